"""Semilinear DAE problems d/dt[A x] + B x = f(t, x) and their state splitting.

A state is split as x = z + u with z = P1 x (differential part) and u = P2 x
(algebraic part).  Consistency means the point lies on the constraint manifold
Q2[B x - f(t, x)] = 0; Newton-based initialization solves for the algebraic
part given the differential one.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable

import numpy as np

from .pencil import MatrixPencil, SpectralDecomposition

__all__ = [
    "SemilinearDAE",
    "SplitState",
    "NonFiniteJacobianError",
    "SingularNewtonMatrixError",
    "NoConvergenceError",
    "split_state",
    "constraint_residual",
    "jacobian",
    "check_jacobian",
    "consistent_initialize",
]

RhsFunc = Callable[[float, np.ndarray], np.ndarray]
JacFunc = Callable[[float, np.ndarray], np.ndarray]


class NonFiniteJacobianError(Exception):
    """The Jacobian evaluation produced NaN or Inf entries."""


class SingularNewtonMatrixError(Exception):
    """[I - Ginv * d(Q2 f)/dx] restricted to X2 is numerically singular."""


class NoConvergenceError(Exception):
    """Newton iteration failed to reach the requested tolerance."""

    def __init__(self, message: str, last_residual: float):
        super().__init__(message)
        self.last_residual = last_residual


@dataclass(frozen=True)
class SemilinearDAE:
    """A pencil together with the nonlinear right-hand side f(t, x).

    ``jac_f``, when provided, is the analytic state Jacobian df/dx; otherwise a
    forward difference with step ``fd_step`` is used.  Both callables must be
    pure: the solvers evaluate them concurrently across independent runs.
    """

    pencil: MatrixPencil
    f: RhsFunc
    jac_f: JacFunc | None = None
    fd_step: float = 1e-7

    def __post_init__(self):
        if self.fd_step <= 0.0:
            raise ValueError("fd_step must be positive")

    @property
    def n(self) -> int:
        return self.pencil.n

    @property
    def analytic_jacobian(self) -> bool:
        return self.jac_f is not None


@dataclass(frozen=True)
class SplitState:
    """x = z + u with z in X1 and u in X2, tagged with its time."""

    z: np.ndarray
    u: np.ndarray
    t: float

    @property
    def x(self) -> np.ndarray:
        return self.z + self.u


def split_state(decomp: SpectralDecomposition, x, t: float = 0.0) -> SplitState:
    """Project a state onto the differential/algebraic subspaces."""
    x = np.asarray(x, dtype=float)
    if x.shape != (decomp.n,):
        raise ValueError(f"state must have shape ({decomp.n},), got {x.shape}")
    return SplitState(z=decomp.p1 @ x, u=decomp.p2 @ x, t=t)


def constraint_residual(dae: SemilinearDAE, decomp: SpectralDecomposition,
                        t: float, x) -> tuple[np.ndarray, float]:
    """Residual Q2[B x - f(t, x)] and its Euclidean norm.

    Zero (up to tolerance) exactly when (t, x) lies on the constraint
    manifold; identically zero for index-0 problems where Q2 = 0.
    """
    x = np.asarray(x, dtype=float)
    vec = decomp.q2 @ (dae.pencil.b @ x - dae.f(t, x))
    return vec, float(np.linalg.norm(vec))


def jacobian(dae: SemilinearDAE, t: float, x) -> np.ndarray:
    """State Jacobian df/dx, analytic or columnwise forward difference."""
    x = np.asarray(x, dtype=float)
    if dae.jac_f is not None:
        jac = np.asarray(dae.jac_f(t, x), dtype=float)
    else:
        step = dae.fd_step
        f0 = np.asarray(dae.f(t, x), dtype=float)
        jac = np.empty((x.size, x.size))
        for j in range(x.size):
            xp = x.copy()
            xp[j] += step
            jac[:, j] = (np.asarray(dae.f(t, xp), dtype=float) - f0) / step
    if not np.all(np.isfinite(jac)):
        raise NonFiniteJacobianError(f"Jacobian non-finite at t={t}")
    return jac


def check_jacobian(dae: SemilinearDAE, t: float, xs) -> float:
    """Self-test: max entrywise gap between analytic and FD Jacobians.

    ``xs`` is an iterable of probe states.  Only meaningful when an analytic
    Jacobian is attached.
    """
    if dae.jac_f is None:
        raise ValueError("check_jacobian needs an analytic jac_f to compare against")
    fd = SemilinearDAE(pencil=dae.pencil, f=dae.f, jac_f=None, fd_step=dae.fd_step)
    worst = 0.0
    for x in xs:
        gap = np.abs(jacobian(dae, t, x) - jacobian(fd, t, x)).max()
        worst = max(worst, float(gap))
    return worst


def _in_subspace(vec: np.ndarray, projector: np.ndarray, tol: float) -> bool:
    return np.abs(projector @ vec - vec).max() <= tol * (1.0 + np.abs(vec).max())


def consistent_initialize(dae: SemilinearDAE, decomp: SpectralDecomposition,
                          t0: float, z0, u_guess=None, tol: float = 1e-12,
                          max_iter: int = 50) -> np.ndarray:
    """Solve the consistency condition B u = Q2 f(t0, z0 + u) for u in X2.

    Newton iteration on F(u) = u - Ginv Q2 f(t0, z0 + u), expressed in
    ``x2_basis`` coordinates so that each update is a k x k solve (the
    full-space operator is singular on X1).  The returned root depends on
    ``u_guess`` if the constraint admits several solutions.

    Raises
    ------
    SingularNewtonMatrixError
        If the restricted Newton matrix is numerically singular.
    NoConvergenceError
        If ``max_iter`` iterations do not reach ``tol``.
    """
    z0 = np.asarray(z0, dtype=float)
    if not _in_subspace(z0, decomp.p1, 1e-8):
        raise ValueError("z0 must lie in X1 (apply P1 first)")
    basis = decomp.x2_basis
    k = basis.shape[1]
    if k == 0:
        return np.zeros(decomp.n)
    if u_guess is None:
        u_guess = np.zeros(decomp.n)
    u_guess = np.asarray(u_guess, dtype=float)
    if not _in_subspace(u_guess, decomp.p2, 1e-8):
        raise ValueError("u_guess must lie in X2 (apply P2 first)")

    ginv_q2 = decomp.g_inv @ decomp.q2
    coeff_map = basis.T @ ginv_q2  # k x n, coordinates of Ginv Q2 (.) in x2_basis
    c = basis.T @ u_guess
    eye_k = np.eye(k)
    last = np.inf
    for _ in range(max_iter):
        x = z0 + basis @ c
        fval = c - coeff_map @ dae.f(t0, x)
        last = float(np.linalg.norm(fval))
        if last <= tol:
            return basis @ c
        newton = eye_k - coeff_map @ (jacobian(dae, t0, x) @ basis)
        try:
            delta = np.linalg.solve(newton, fval)
        except np.linalg.LinAlgError as exc:
            raise SingularNewtonMatrixError(
                f"restricted Newton matrix singular at t0={t0}") from exc
        if not np.all(np.isfinite(delta)):
            raise SingularNewtonMatrixError(
                f"restricted Newton step non-finite at t0={t0}")
        c = c - delta
    # accept a final iterate that already satisfies the tolerance
    x = z0 + basis @ c
    fval = c - coeff_map @ dae.f(t0, x)
    last = float(np.linalg.norm(fval))
    if last <= tol:
        return basis @ c
    raise NoConvergenceError(
        f"consistency Newton stalled at residual {last:.3e} after {max_iter} iterations",
        last_residual=last,
    )
