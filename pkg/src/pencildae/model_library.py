"""The nonlinear two-pole circuit DAE and its named parameter sets.

The circuit couples an inductor current x1, a capacitor voltage x2 and a
resistor-branch current x3 through

    A = diag(L, C, 0),   B = [[0, 1, r], [0, g, -1], [0, 1, r]],
    f(t, x) = ( e(t) - phi0(x1) - phi(x3), -h(x2), psi(x1 - x3) - phi(x3) ),

with nonlinear resistances phi0, phi, psi, a nonlinear conductance h and an
input voltage e(t).  The pencil is always index 1 (the third diagonal entry of
A is structurally zero).

Units: parameter values are stored in SI (henries, farads) exactly as printed
in the source parameter sets, but the assembled DAE is rescaled to
microhenries/microfarads with time in microseconds (factor 1e6 on L and C).
This keeps the computed coefficients at O(1)-O(1000) instead of 1e-7 and is
the convention under which all step sizes and intervals here are quoted.

A couple of small synthetic problems (one index-0, one index-1) are shipped
alongside for testing and convergence studies.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable

import numpy as np

from .dae_model import SemilinearDAE
from .pencil import MatrixPencil

__all__ = [
    "UNIT_SCALE",
    "Nonlinearity",
    "odd_power",
    "sine",
    "neg_square",
    "square",
    "custom_nonlinearity",
    "VoltageWaveform",
    "sinusoidal",
    "power_decay",
    "polynomial",
    "exponential",
    "gaussian",
    "triangular",
    "sawtooth",
    "custom_waveform",
    "eval_waveform",
    "CircuitParams",
    "build_circuit_dae",
    "circuit_consistency_check",
    "ModelPreset",
    "PRESET_IDS",
    "get_preset",
]

#: henry -> microhenry (equivalently farad -> microfarad) for computation units
UNIT_SCALE = 1e6

TRIANGULAR_PERIOD = 100.0
SAWTOOTH_PERIOD = 5.0


@dataclass(frozen=True)
class Nonlinearity:
    """A scalar characteristic y(x) with its derivative."""

    kind: str
    value: Callable[[float], float]
    derivative: Callable[[float], float]

    def derivative_gap(self, xs, step: float = 1e-7) -> float:
        """Max |forward-difference - analytic| over the probe points."""
        worst = 0.0
        for x in xs:
            fd = (self.value(x + step) - self.value(x)) / step
            worst = max(worst, abs(fd - self.derivative(x)))
        return worst


def odd_power(alpha: float = 1.0, exponent: int = 3) -> Nonlinearity:
    """alpha * x**(2k-1) with alpha > 0 and an odd exponent."""
    if alpha <= 0.0:
        raise ValueError("alpha must be positive")
    if exponent < 1 or exponent % 2 == 0:
        raise ValueError("exponent must be an odd positive integer")
    return Nonlinearity(
        kind=f"odd_power({alpha}, {exponent})",
        value=lambda x: alpha * x ** exponent,
        derivative=lambda x: alpha * exponent * x ** (exponent - 1),
    )


def sine(alpha: float = 1.0) -> Nonlinearity:
    return Nonlinearity(kind=f"sine({alpha})",
                        value=lambda x: alpha * math.sin(x),
                        derivative=lambda x: alpha * math.cos(x))


def neg_square() -> Nonlinearity:
    """-x**2, the destabilising resistance of the finite-time blow-up set."""
    return Nonlinearity(kind="neg_square", value=lambda x: -x * x,
                        derivative=lambda x: -2.0 * x)


def square() -> Nonlinearity:
    return Nonlinearity(kind="square", value=lambda x: x * x,
                        derivative=lambda x: 2.0 * x)


def custom_nonlinearity(value, derivative, kind: str = "custom") -> Nonlinearity:
    return Nonlinearity(kind=kind, value=value, derivative=derivative)


@dataclass(frozen=True)
class VoltageWaveform:
    """Input voltage e(t); ``smooth`` gates convergence-order assertions."""

    kind: str
    value: Callable[[float], float]
    smooth: bool = True
    period: float | None = None


def sinusoidal(beta: float = 1.0, omega: float = 1.0, theta: float = 0.0) -> VoltageWaveform:
    return VoltageWaveform(kind=f"sinusoidal({beta}, {omega}, {theta})",
                           value=lambda t: beta * math.sin(omega * t + theta))


def power_decay(beta: float = 1.0, alpha: float = 1.0, n: int = 1) -> VoltageWaveform:
    """beta * (t + alpha)**(-n); alpha > 0 keeps the pole left of t = 0."""
    if alpha <= 0.0:
        raise ValueError("alpha must be positive")
    if n < 1:
        raise ValueError("n must be a positive integer")
    return VoltageWaveform(kind=f"power_decay({beta}, {alpha}, {n})",
                           value=lambda t: beta * (t + alpha) ** (-n))


def polynomial(beta: float = 1.0, alpha: float = 0.0, n: int = 1) -> VoltageWaveform:
    if n < 1:
        raise ValueError("n must be a positive integer")
    return VoltageWaveform(kind=f"polynomial({beta}, {alpha}, {n})",
                           value=lambda t: beta * (t + alpha) ** n)


def exponential(beta: float = 1.0, alpha: float = 1.0) -> VoltageWaveform:
    return VoltageWaveform(kind=f"exponential({beta}, {alpha})",
                           value=lambda t: beta * math.exp(-alpha * t))


def gaussian(beta: float = 1.0, alpha: float = 0.0, sigma: float = 1.0) -> VoltageWaveform:
    if sigma == 0.0:
        raise ValueError("sigma must be nonzero")
    return VoltageWaveform(kind=f"gaussian({beta}, {alpha}, {sigma})",
                           value=lambda t: beta * math.exp(-((t - alpha) / sigma) ** 2))


def _triangular_value(t: float) -> float:
    # 50 - |t - 50 - 100k| on [100k, 100(k+1)]; both segment formulas agree at
    # the boundaries, where the left-segment one is taken.
    tau = math.fmod(t, TRIANGULAR_PERIOD)
    return 50.0 - abs(tau - 50.0)


def triangular() -> VoltageWaveform:
    """Periodic triangle: rises 0 -> 50 on [0, 50], falls back on [50, 100]."""
    return VoltageWaveform(kind="triangular", value=_triangular_value,
                           smooth=False, period=TRIANGULAR_PERIOD)


def _sawtooth_value(t: float) -> float:
    tau = math.fmod(t, SAWTOOTH_PERIOD)
    if tau <= 4.0:
        return tau
    return 20.0 - 4.0 * tau


def sawtooth() -> VoltageWaveform:
    """Periodic sawtooth: rises 0 -> 4 on [0, 4], drops back to 0 on [4, 5]."""
    return VoltageWaveform(kind="sawtooth", value=_sawtooth_value,
                           smooth=False, period=SAWTOOTH_PERIOD)


def custom_waveform(value, smooth: bool = True, kind: str = "custom",
                    period: float | None = None) -> VoltageWaveform:
    return VoltageWaveform(kind=kind, value=value, smooth=smooth, period=period)


def eval_waveform(w: VoltageWaveform, t: float) -> float:
    if t < 0.0:
        raise ValueError("waveforms are defined for t >= 0")
    return w.value(t)


@dataclass(frozen=True)
class CircuitParams:
    """Linear circuit parameters, stored in SI units as printed."""

    l_ind: float
    c_cap: float
    r_res: float
    g_cond: float

    def __post_init__(self):
        for name in ("l_ind", "c_cap", "r_res", "g_cond"):
            if getattr(self, name) <= 0.0:
                raise ValueError(f"{name} must be strictly positive")


def circuit_pencil(params: CircuitParams) -> MatrixPencil:
    """The (rescaled) circuit pencil; always singular A, index 1."""
    a = np.diag([params.l_ind * UNIT_SCALE, params.c_cap * UNIT_SCALE, 0.0])
    r = params.r_res
    b = np.array([[0.0, 1.0, r],
                  [0.0, params.g_cond, -1.0],
                  [0.0, 1.0, r]])
    return MatrixPencil(a=a, b=b)


def build_circuit_dae(params: CircuitParams, phi0: Nonlinearity, phi: Nonlinearity,
                      psi: Nonlinearity, h_cond: Nonlinearity,
                      e: VoltageWaveform) -> SemilinearDAE:
    """Assemble the circuit DAE with its analytic Jacobian.

    The right-hand side is
    (e(t) - phi0(x1) - phi(x3), -h(x2), psi(x1 - x3) - phi(x3)).
    """
    pencil = circuit_pencil(params)
    e_val = e.value
    p0v, p0d = phi0.value, phi0.derivative
    phv, phd = phi.value, phi.derivative
    psv, psd = psi.value, psi.derivative
    hcv, hcd = h_cond.value, h_cond.derivative

    def f(t, x):
        x1, x2, x3 = x
        return np.array((e_val(t) - p0v(x1) - phv(x3),
                         -hcv(x2),
                         psv(x1 - x3) - phv(x3)))

    def jac(t, x):
        x1, x2, x3 = x
        dpsi = psd(x1 - x3)
        dphi = phd(x3)
        return np.array(((-p0d(x1), 0.0, -dphi),
                         (0.0, -hcd(x2), 0.0),
                         (dpsi, 0.0, -dpsi - dphi)))

    return SemilinearDAE(pencil=pencil, f=f, jac_f=jac)


def circuit_consistency_check(params: CircuitParams, psi: Nonlinearity,
                              phi: Nonlinearity, x0) -> tuple[bool, float]:
    """Scalar consistency condition x2 + r*x3 = psi(x1 - x3) - phi(x3).

    Equivalent to the projector condition Q2[B x - f] = 0 of the assembled
    DAE (the constraint manifold has codimension one for this circuit).
    """
    x1, x2, x3 = np.asarray(x0, dtype=float)
    r = params.r_res
    residual = x2 + r * x3 - psi.value(x1 - x3) + phi.value(x3)
    ok = abs(residual) <= 1e-10 * (1.0 + abs(x2) + r * abs(x3))
    return ok, float(residual)


@dataclass(frozen=True)
class ModelPreset:
    """A ready-to-solve problem: DAE, default initial state, smoothness flag."""

    preset_id: str
    dae: SemilinearDAE
    x0: np.ndarray
    smooth: bool
    description: str


def _cubic() -> Nonlinearity:
    return odd_power(1.0, 3)


def _circuit_preset(preset_id, params, phi0, phi, psi, h_cond, e, x0, description):
    dae = build_circuit_dae(params, phi0, phi, psi, h_cond, e)
    return ModelPreset(preset_id=preset_id, dae=dae, x0=np.asarray(x0, dtype=float),
                       smooth=e.smooth, description=description)


def _linear_index0_preset() -> ModelPreset:
    a = np.array([[2.0, 0.3], [0.1, 1.0]])
    b = np.array([[0.5, -0.2], [0.1, 0.4]])

    def f(t, x):
        return np.array((math.sin(t) - 0.1 * x[1], math.cos(t) + 0.05 * x[0]))

    def jac(t, x):
        return np.array(((0.0, -0.1), (0.05, 0.0)))

    dae = SemilinearDAE(pencil=MatrixPencil(a=a, b=b), f=f, jac_f=jac)
    return ModelPreset(preset_id="linear_index0", dae=dae,
                       x0=np.array([1.0, -0.5]), smooth=True,
                       description="2x2 invertible-A problem with mild coupling")


def _toy_index1_preset() -> ModelPreset:
    a = np.diag([1.0, 0.0])
    b = np.eye(2)

    def f(t, x):
        return np.array((-0.2 * x[0] + 0.5 * x[1] + math.sin(t),
                         0.5 * math.sin(t) + 0.25 * x[1] + 0.3 * x[0]))

    def jac(t, x):
        return np.array(((-0.2, 0.5), (0.3, 0.25)))

    dae = SemilinearDAE(pencil=MatrixPencil(a=a, b=b), f=f, jac_f=jac)
    # constraint: x2 = (0.5 sin t + 0.3 x1) / 0.75  =>  x2(0) = 0.4 for x1(0) = 1
    return ModelPreset(preset_id="toy_index1", dae=dae, x0=np.array([1.0, 0.4]),
                       smooth=True, description="2x2 index-1 problem with forced constraint")


def _build_preset(preset_id: str) -> ModelPreset:
    cubic = _cubic
    if preset_id == "sec5_cubic":
        return _circuit_preset(
            preset_id, CircuitParams(5e-4, 5e-7, 2.0, 0.2),
            cubic(), cubic(), cubic(), cubic(), sinusoidal(),
            (0.0, 0.0, 0.0),
            "cubic circuit, e = sin t, reference comparison set")
    if preset_id == "sec5_r4_g01":
        return _circuit_preset(
            preset_id, CircuitParams(5e-4, 5e-7, 4.0, 0.1),
            cubic(), cubic(), cubic(), cubic(), sinusoidal(),
            (0.0, 0.0, 0.0),
            "cubic circuit with doubled r and halved g (leapfrog-friendly)")
    if preset_id == "sec6_sine_powerdecay":
        # e(t) = (2t + 10)^-2 = 0.25 * (t + 5)^-2
        return _circuit_preset(
            preset_id, CircuitParams(5e-4, 5e-7, 2.0, 0.2),
            cubic(), sine(), sine(), sine(), power_decay(0.25, 5.0, 2),
            (10.0, -10.0, 5.0),
            "sine nonlinearities, decaying drive, bounded solution")
    if preset_id == "sec6_polynomial":
        return _circuit_preset(
            preset_id, CircuitParams(1e-3, 5e-7, 2.0, 0.3),
            cubic(), cubic(), cubic(), cubic(), polynomial(1.0, 0.0, 2),
            (0.0, 0.0, 0.0),
            "e = t^2: global but unbounded solution")
    if preset_id == "sec6_triangular":
        return _circuit_preset(
            preset_id, CircuitParams(5e-4, 5e-7, 2.0, 0.2),
            cubic(), cubic(), cubic(), cubic(), triangular(),
            (0.0, 0.0, 0.0),
            "triangular drive (non-smooth), bounded solution")
    if preset_id == "sec6_sawtooth":
        return _circuit_preset(
            preset_id, CircuitParams(1e-5, 2e-7, 55.0, 0.015),
            cubic(), cubic(), cubic(), cubic(), sawtooth(),
            (0.0, 0.0, 0.0),
            "sawtooth drive (non-smooth), bounded solution")
    if preset_id == "sec6_blowup":
        return _circuit_preset(
            preset_id, CircuitParams(5e-6, 5e-7, 2.0, 0.2),
            neg_square(), cubic(), cubic(), square(), sinusoidal(beta=2.0),
            (1.0, -6.5, 1.5),
            "Lagrange-unstable set: finite-time blow-up")
    if preset_id == "linear_index0":
        return _linear_index0_preset()
    if preset_id == "toy_index1":
        return _toy_index1_preset()
    raise KeyError(preset_id)


_ALIASES = {"lagrange_unstable": "sec6_blowup"}

PRESET_IDS = (
    "sec5_cubic",
    "sec5_r4_g01",
    "sec6_sine_powerdecay",
    "sec6_polynomial",
    "sec6_triangular",
    "sec6_sawtooth",
    "sec6_blowup",
    "linear_index0",
    "toy_index1",
)


def get_preset(preset_id: str) -> ModelPreset:
    """Resolve a preset id (or alias) to a freshly built model."""
    canonical = _ALIASES.get(preset_id, preset_id)
    if canonical not in PRESET_IDS:
        raise KeyError(f"unknown preset {preset_id!r}; known: {', '.join(PRESET_IDS)}")
    return _build_preset(canonical)
