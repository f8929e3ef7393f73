import numpy as np
import pytest

from pencildae import MatrixPencil, get_preset, projectors_algebraic


def random_orthogonal(n, rng):
    q, _ = np.linalg.qr(rng.standard_normal((n, n)))
    return q


def random_conditioned(n, rng, spread=(0.5, 2.0)):
    """Random invertible matrix with singular values inside ``spread``."""
    return random_orthogonal(n, rng) @ np.diag(rng.uniform(*spread, n)) @ \
        random_orthogonal(n, rng)


def random_index1_pencil(rng, n=None, k=None):
    """Regular pencil of index <= 1 with known projector closed forms.

    Built as U * diag(A1, 0) * V + U * diag(B1, B2) * V with invertible A1 and
    B2, so P2 = V^-1 diag(0, I_k) V and Q2 = U diag(0, I_k) U^-1 exactly.
    Returns (pencil, k, p2_exact, q2_exact).
    """
    if n is None:
        n = int(rng.integers(2, 9))
    if k is None:
        k = int(rng.integers(0, n))
    d = n - k
    a_block = np.zeros((n, n))
    a_block[:d, :d] = random_conditioned(d, rng) if d else np.zeros((0, 0))
    b_block = np.zeros((n, n))
    if d:
        b_block[:d, :d] = rng.standard_normal((d, d))
    if k:
        b_block[d:, d:] = random_conditioned(k, rng)
    u = random_conditioned(n, rng)
    v = random_conditioned(n, rng)
    pencil = MatrixPencil(a=u @ a_block @ v, b=u @ b_block @ v)
    selector = np.zeros((n, n))
    selector[d:, d:] = np.eye(k)
    p2_exact = np.linalg.inv(v) @ selector @ v
    q2_exact = u @ selector @ np.linalg.inv(u)
    return pencil, k, p2_exact, q2_exact


@pytest.fixture(scope="session")
def sec5_preset():
    return get_preset("sec5_cubic")


@pytest.fixture(scope="session")
def sec5_decomp(sec5_preset):
    return projectors_algebraic(sec5_preset.dae.pencil)
