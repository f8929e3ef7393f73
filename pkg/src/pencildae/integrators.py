"""Time integration of semilinear DAEs on a uniform mesh.

Two combined schemes share the same Newton-like update of the algebraic
component u and differ in the update of the differential component z:

* method 1 advances z by an explicit forward-difference (Euler) step and has
  first-order accuracy;
* method 2 advances z by a centered-difference (leapfrog) step after an Euler
  starter and has second-order accuracy, at the price of a weaker stability
  coefficient on long intervals.

A single solve is strictly sequential; distinct solves share the immutable
problem objects and may run concurrently.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from enum import Enum

import numpy as np

from .dae_model import SemilinearDAE, SingularNewtonMatrixError, jacobian
from .pencil import SpectralDecomposition

__all__ = [
    "Mesh",
    "Method",
    "SingleStep",
    "IterateToTol",
    "SolverConfig",
    "SolveOutcome",
    "SolveStatus",
    "Trajectory",
    "InconsistentInitialStateError",
    "method1_solve",
    "method2_solve",
    "solve",
    "algebraic_update",
]


class InconsistentInitialStateError(Exception):
    """The initial point violates the constraint manifold beyond tolerance."""


@dataclass(frozen=True)
class Mesh:
    """Uniform mesh t_i = t0 + i*h, i = 0..n_steps, h = (t_end - t0)/n_steps.

    Nodes are always formed as t0 + i*h (never by accumulation) so that
    refined meshes share their coarse nodes exactly.
    """

    t0: float
    t_end: float
    n_steps: int

    def __post_init__(self):
        if self.n_steps < 1:
            raise ValueError("n_steps must be a positive integer")
        if not self.t_end > self.t0:
            raise ValueError("t_end must exceed t0")

    @property
    def h(self) -> float:
        return (self.t_end - self.t0) / self.n_steps

    def node(self, i: int) -> float:
        return self.t0 + i * self.h

    def times(self) -> np.ndarray:
        return self.t0 + np.arange(self.n_steps + 1) * self.h

    def refined(self, factor: int) -> "Mesh":
        return Mesh(self.t0, self.t_end, self.n_steps * factor)


class Method(Enum):
    METHOD1 = "method1"
    METHOD2 = "method2"


@dataclass(frozen=True)
class SingleStep:
    """Exactly one Newton-like correction of u per time step; this is the
    update the convergence orders are stated for."""


@dataclass(frozen=True)
class IterateToTol:
    """Repeat the u-correction with refreshed Jacobian until the fixed-point
    residual ||u - Ginv Q2 f|| drops below ``tol`` (or ``max_iter`` is hit)."""

    tol: float
    max_iter: int = 50

    def __post_init__(self):
        if self.tol <= 0.0:
            raise ValueError("tol must be positive")
        if self.max_iter < 1:
            raise ValueError("max_iter must be positive")


Corrector = SingleStep | IterateToTol


@dataclass(frozen=True)
class SolverConfig:
    method: Method = Method.METHOD1
    corrector: Corrector = field(default_factory=SingleStep)
    blow_up_threshold: float = 1e6

    def __post_init__(self):
        if self.blow_up_threshold <= 0.0:
            raise ValueError("blow_up_threshold must be positive")


class SolveOutcome(Enum):
    COMPLETED = "completed"
    BLOW_UP = "blow_up"
    CORRECTOR_FAILED = "corrector_failed"


@dataclass(frozen=True)
class SolveStatus:
    outcome: SolveOutcome
    blow_up_time: float | None = None
    failed_step: int | None = None

    @property
    def completed(self) -> bool:
        return self.outcome is SolveOutcome.COMPLETED

    def to_json(self) -> dict:
        out: dict = {"outcome": self.outcome.value}
        if self.blow_up_time is not None:
            out["blow_up_time"] = self.blow_up_time
        if self.failed_step is not None:
            out["failed_step"] = self.failed_step
        return out


@dataclass(frozen=True)
class Trajectory:
    """Mesh values of an approximate solution x_i = z_i + u_i.

    On early termination the arrays are truncated at the offending node
    (never padded); ``status`` records why.
    """

    times: np.ndarray
    states: np.ndarray
    z_history: np.ndarray
    u_history: np.ndarray
    residuals: np.ndarray
    status: SolveStatus
    mesh: Mesh

    def __len__(self) -> int:
        return self.times.shape[0]

    @property
    def max_norm(self) -> float:
        return float(np.linalg.norm(self.states, axis=1).max())

    @property
    def final_state(self) -> np.ndarray:
        return self.states[-1]


def _corrector_params(corrector: Corrector) -> tuple[bool, float, int]:
    if isinstance(corrector, IterateToTol):
        return True, corrector.tol, corrector.max_iter
    if isinstance(corrector, SingleStep):
        return False, 0.0, 1
    raise TypeError(f"unknown corrector {corrector!r}")


def algebraic_update(dae: SemilinearDAE, decomp: SpectralDecomposition,
                     t_next: float, z_next, u_prev,
                     corrector: Corrector = SingleStep()) -> np.ndarray:
    """One algebraic-component update shared by both methods.

    Single-step mode performs exactly one linearized correction
    u+ = u - [I - Ginv d(Q2 f)/dx]^-1 (u - Ginv Q2 f) restricted to X2;
    iterate mode repeats it until the fixed-point residual meets the
    tolerance.  Affine constraints are solved exactly in one step.
    """
    z_next = np.asarray(z_next, dtype=float)
    u_prev = np.asarray(u_prev, dtype=float)
    basis = decomp.x2_basis
    k = basis.shape[1]
    if k == 0:
        return np.zeros(decomp.n)
    coeff_map = basis.T @ (decomp.g_inv @ decomp.q2)
    iterate, tol, max_iter = _corrector_params(corrector)
    c = basis.T @ u_prev
    eye_k = np.eye(k)
    updates = 0
    while True:
        x_eval = z_next + basis @ c
        f_coords = c - coeff_map @ np.asarray(dae.f(t_next, x_eval), dtype=float)
        if iterate and float(np.linalg.norm(f_coords)) <= tol:
            break
        if updates >= max_iter:
            if iterate:
                raise SingularNewtonMatrixError(
                    f"u-update did not reach tol={tol:g} in {max_iter} corrections"
                )
            break
        newton = eye_k - coeff_map @ (jacobian(dae, t_next, x_eval) @ basis)
        try:
            delta = np.linalg.solve(newton, f_coords)
        except np.linalg.LinAlgError as exc:
            raise SingularNewtonMatrixError(
                f"restricted Newton matrix singular at t={t_next}") from exc
        if not np.all(np.isfinite(delta)):
            raise SingularNewtonMatrixError(
                f"restricted Newton step non-finite at t={t_next}")
        c = c - delta
        updates += 1
        if not iterate:
            break
    return basis @ c


def _integrate(dae: SemilinearDAE, decomp: SpectralDecomposition, mesh: Mesh,
               x0, config: SolverConfig, leapfrog: bool,
               init_residual_rtol: float = 1e-8) -> Trajectory:
    n = dae.n
    x0 = np.asarray(x0, dtype=float)
    if x0.shape != (n,):
        raise ValueError(f"x0 must have shape ({n},), got {x0.shape}")
    if leapfrog and mesh.n_steps < 2:
        raise ValueError("method 2 needs at least 2 steps")

    b_mat = dae.pencil.b
    q2 = decomp.q2
    norm_b = np.linalg.norm(b_mat, 2)
    f = dae.f

    # consistency of the initial point
    res0_vec = q2 @ (b_mat @ x0 - np.asarray(f(mesh.t0, x0), dtype=float))
    res0 = float(np.linalg.norm(res0_vec))
    init_tol = init_residual_rtol * (1.0 + norm_b) * (1.0 + float(np.linalg.norm(x0)))
    if res0 > init_tol:
        raise InconsistentInitialStateError(
            f"initial constraint residual {res0:.3e} exceeds tolerance {init_tol:.3e}"
        )

    h = mesh.h
    t0 = mesh.t0
    n_steps = mesh.n_steps
    thr2 = config.blow_up_threshold ** 2
    iterate, iter_tol, max_corrections = _corrector_params(config.corrector)

    ginv = decomp.g_inv
    ginv_b = ginv @ b_mat
    step_mat = np.eye(n) - h * ginv_b          # Euler propagator for z
    h_ginv_q1 = h * (ginv @ decomp.q1)
    two_h_ginv_q1 = 2.0 * h_ginv_q1
    two_h_ginv_b = (2.0 * h) * ginv_b

    basis = decomp.x2_basis
    k = basis.shape[1]
    coeff_map = basis.T @ (ginv @ q2) if k else None   # k x n
    scalar_update = k == 1
    if scalar_update:
        coeff_row = coeff_map[0]
        basis_col = basis[:, 0]
    eye_k = np.eye(k) if k > 1 else None

    times = np.empty(n_steps + 1)
    states = np.empty((n_steps + 1, n))
    z_hist = np.empty((n_steps + 1, n))
    u_hist = np.empty((n_steps + 1, n))
    residuals = np.empty(n_steps + 1)

    z = decomp.p1 @ x0
    if k:
        c = basis.T @ (decomp.p2 @ x0)
        u = basis @ c
    else:
        u = np.zeros(n)
    times[0] = t0
    z_hist[0] = z
    u_hist[0] = u
    states[0] = z + u
    residuals[0] = res0
    z_prev = None

    def truncated(upto: int, status: SolveStatus) -> Trajectory:
        return Trajectory(times=times[:upto + 1].copy(), states=states[:upto + 1].copy(),
                          z_history=z_hist[:upto + 1].copy(),
                          u_history=u_hist[:upto + 1].copy(),
                          residuals=residuals[:upto + 1].copy(), status=status, mesh=mesh)

    def guarded_residual(t: float, x: np.ndarray) -> float:
        # f may overflow at an exploded state; the residual is then unbounded
        try:
            v = q2 @ (b_mat @ x - np.asarray(f(t, x), dtype=float))
            return float(np.sqrt(v @ v))
        except (OverflowError, FloatingPointError, ValueError):
            return float("inf")

    # hot loop: the Jacobian's finiteness is guarded through the Newton step
    # itself (NaN propagates into jn/delta), so the wrapper check is skipped
    if dae.jac_f is not None:
        jac_eval = dae.jac_f
    else:
        def jac_eval(t, x):
            return jacobian(dae, t, x)

    solve_kxk = np.linalg.solve
    isfinite = np.isfinite
    sqrt = np.sqrt
    for i in range(n_steps):
        t = t0 + i * h
        x = states[i]
        nrm2 = float(x @ x)
        if not nrm2 <= thr2:  # also catches NaN states
            if i:
                residuals[i] = guarded_residual(t, x)
            return truncated(i, SolveStatus(SolveOutcome.BLOW_UP, blow_up_time=t))
        fi = f(t, x)
        if i:  # node residual reuses the f evaluation of the z-step
            rv = q2 @ (b_mat @ x - fi)
            residuals[i] = sqrt(rv @ rv)
        if leapfrog and i >= 1:
            z_next = z_prev + two_h_ginv_q1 @ fi - two_h_ginv_b @ z
        else:
            z_next = step_mat @ z + h_ginv_q1 @ fi
        t_next = t0 + (i + 1) * h

        if k:
            updates = 0
            failed = False
            while True:
                x_eval = z_next + u
                fe = f(t_next, x_eval)
                if scalar_update:
                    fc = c[0] - coeff_row @ fe
                    if iterate and abs(fc) <= iter_tol:
                        break
                    if updates >= max_corrections:
                        failed = iterate
                        break
                    jn = 1.0 - coeff_row @ (jac_eval(t_next, x_eval) @ basis_col)
                    if jn == 0.0 or not isfinite(jn):
                        return truncated(i, SolveStatus(SolveOutcome.CORRECTOR_FAILED,
                                                        failed_step=i + 1))
                    c[0] -= fc / jn
                    u = basis_col * c[0]
                else:
                    fc = c - coeff_map @ fe
                    if iterate and float(np.linalg.norm(fc)) <= iter_tol:
                        break
                    if updates >= max_corrections:
                        failed = iterate
                        break
                    newton = eye_k - coeff_map @ (jac_eval(t_next, x_eval) @ basis)
                    try:
                        delta = solve_kxk(newton, fc)
                    except np.linalg.LinAlgError:
                        return truncated(i, SolveStatus(SolveOutcome.CORRECTOR_FAILED,
                                                        failed_step=i + 1))
                    if not np.all(isfinite(delta)):
                        return truncated(i, SolveStatus(SolveOutcome.CORRECTOR_FAILED,
                                                        failed_step=i + 1))
                    c = c - delta
                    u = basis @ c
                updates += 1
                if not iterate:
                    break
            if failed:
                return truncated(i, SolveStatus(SolveOutcome.CORRECTOR_FAILED,
                                                failed_step=i + 1))

        z_prev = z
        z = z_next
        j = i + 1
        times[j] = t_next
        z_hist[j] = z
        u_hist[j] = u
        states[j] = z + u

    xN = states[n_steps]
    residuals[n_steps] = guarded_residual(float(times[n_steps]), xN)
    nrm2 = float(xN @ xN)
    if not nrm2 <= thr2:
        return Trajectory(times=times, states=states, z_history=z_hist, u_history=u_hist,
                          residuals=residuals,
                          status=SolveStatus(SolveOutcome.BLOW_UP,
                                             blow_up_time=float(times[n_steps])),
                          mesh=mesh)
    return Trajectory(times=times, states=states, z_history=z_hist, u_history=u_hist,
                      residuals=residuals, status=SolveStatus(SolveOutcome.COMPLETED),
                      mesh=mesh)


def method1_solve(dae: SemilinearDAE, decomp: SpectralDecomposition, mesh: Mesh,
                  x0, config: SolverConfig | None = None) -> Trajectory:
    """First-order combined scheme: explicit Euler on z, one u-correction per step.

    On an index-0 problem this reduces exactly to the classical explicit Euler
    method for dx/dt = A^-1 (f(t, x) - B x).
    """
    config = config or SolverConfig(method=Method.METHOD1)
    return _integrate(dae, decomp, mesh, x0, config, leapfrog=False)


def method2_solve(dae: SemilinearDAE, decomp: SpectralDecomposition, mesh: Mesh,
                  x0, config: SolverConfig | None = None) -> Trajectory:
    """Second-order combined scheme: Euler starter, then leapfrog on z.

    The u-update is identical to method 1.  The leapfrog step carries a
    parasitic mode whose amplification grows with the stability coefficient
    1 + 2h(||Ginv B|| + M1); prefer method 1 on long intervals.
    """
    config = config or SolverConfig(method=Method.METHOD2)
    return _integrate(dae, decomp, mesh, x0, config, leapfrog=True)


def solve(dae: SemilinearDAE, decomp: SpectralDecomposition, mesh: Mesh, x0,
          config: SolverConfig) -> Trajectory:
    """Dispatch on ``config.method``."""
    if config.method is Method.METHOD1:
        return method1_solve(dae, decomp, mesh, x0, config)
    return method2_solve(dae, decomp, mesh, x0, config)
