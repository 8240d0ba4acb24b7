"""
Generalized mean-field dynamics of the non-Hermitian dimer.

The renormalized state follows a flow on the Bloch sphere that combines the
symplectic flow of H with a metric gradient flow of Gamma, where
H - i Gamma is the coherent-state expectation value of the Hamiltonian per
particle. The same flow is available in five equivalent forms:

* Bloch vector (the reference form, free of chart singularities),
* canonical coordinates (q, p),
* unnormalized nonlinear Schroedinger (Gross-Pitaevskii) spinor,
* renormalized Gross-Pitaevskii spinor,
* the single complex coordinate phi_1 with phi_2 real.

The survival probability n is integrated alongside in log space.
"""

__all__ = [
    "Formulation",
    "MeanFieldState",
    "HamiltonianFunction",
    "bloch_rhs_nonlinear",
    "canonical_rhs",
    "kahler_metric_pq",
    "gp_rhs_unnormalized",
    "gp_rhs_normalized",
    "phi_canonical_rhs",
    "phi2_rate",
    "inverse_metric_phi",
    "hamiltonian_value",
    "log_norm_rate",
    "bloch_log_norm_rhs",
    "project_bloch_state",
    "integrate_meanfield",
]

import logging
import math
from enum import Enum
from typing import Callable, NamedTuple, Optional, Sequence, Tuple

import numpy as np

from .core import (
    SPHERE_TOL_INTEGRATION,
    BlochVector,
    CanonicalPoint,
    ChartSingularError,
    DomainError,
    PreconditionError,
    SpinorState,
    SystemParams,
    Trajectory,
    Variant,
    bloch_from_canonical,
    bloch_from_spinor,
    canonical_from_bloch,
    project_to_sphere,
    sphere_defect,
    spinor_from_bloch,
)
from .numerics import DEFAULT_ATOL, DEFAULT_RTOL, integrate_ode

logger = logging.getLogger(__name__)

CHART_MARGIN = 1e-12
UNIT_NORM_TOL = 1e-9


class Formulation(str, Enum):
    """Equivalent forms of the mean-field equations of motion."""

    BLOCH = "bloch"
    CANONICAL = "canonical"
    GP_UNNORMALIZED = "gp"
    GP_NORMALIZED = "gp-normalized"
    PHI = "phi"


class MeanFieldState(NamedTuple):
    """Renormalized Bloch vector together with the survival probability."""

    s: BlochVector
    n: float


class HamiltonianFunction(NamedTuple):
    """Mean-field energy H - i Gamma."""

    H: float
    Gamma: float

    @property
    def value(self) -> complex:
        return complex(self.H, -self.Gamma)


def bloch_rhs_nonlinear(s, params: SystemParams) -> np.ndarray:
    """Nonlinear non-Hermitian Bloch equations; s . ds/dt = 0 identically."""
    sx, sy, sz = s
    eps, v, gamma, g = params.epsilon, params.v, params.gamma, params.g
    return np.array([
        -2.0 * eps * sy + 4.0 * gamma * sx * sz - 4.0 * g * sy * sz,
        2.0 * eps * sx - 2.0 * v * sz + 4.0 * gamma * sy * sz + 4.0 * g * sx * sz,
        2.0 * v * sy - gamma * (1.0 - 4.0 * sz * sz),
    ])


def hamiltonian_value(s, params: SystemParams) -> HamiltonianFunction:
    """Hamiltonian function H = 2 eps s_z + 2 v s_x + 2 g s_z^2 and Gamma = 2 gamma s_z."""
    sx, _, sz = s
    return HamiltonianFunction(
        H=2.0 * params.epsilon * sz + 2.0 * params.v * sx + 2.0 * params.g * sz * sz,
        Gamma=2.0 * params.gamma * sz,
    )


def log_norm_rate(s, params: SystemParams) -> float:
    """d log n / dt for the selected variant."""
    sz = s[2]
    if params.variant == Variant.PT:
        return -4.0 * params.gamma * sz
    return -2.0 * params.gamma * (2.0 * sz + 1.0)


def _check_chart(p: float) -> None:
    if abs(p) >= 1.0 - CHART_MARGIN:
        raise ChartSingularError(
            f"canonical chart is singular at p={p}; use the Bloch formulation")


def kahler_metric_pq(p: float) -> np.ndarray:
    """Metric on the sphere in (q, p) coordinates: diag(2(1-p^2), 1/(2(1-p^2)))."""
    _check_chart(p)
    w = 1.0 - p * p
    return np.diag([2.0 * w, 0.5 / w])


def canonical_rhs(pt: CanonicalPoint, params: SystemParams) -> Tuple[float, float]:
    """Canonical gradient flow in (q, p).

    Returns
    -------
    :
        (dq/dt, dp/dt) with dq/dt = dH/dp and
        dp/dt = -dH/dq - (G^-1 grad Gamma)_p.
    """
    p, q = pt.p, pt.q
    _check_chart(p)
    root = math.sqrt(1.0 - p * p)
    eps, v, gamma, g = params.epsilon, params.v, params.gamma, params.g
    qdot = eps + g * p - v * p * math.cos(2.0 * q) / root
    pdot = -2.0 * gamma * (1.0 - p * p) + 2.0 * v * root * math.sin(2.0 * q)
    return qdot, pdot


def _imbalance(psi1: complex, psi2: complex) -> Tuple[float, float]:
    w1, w2 = abs(psi1) ** 2, abs(psi2) ** 2
    n = w1 + w2
    if n <= 0.0:
        raise DomainError("spinor with zero norm")
    return (w1 - w2) / n, n


def gp_rhs_unnormalized(psi: SpinorState, params: SystemParams) -> np.ndarray:
    """Time derivative of the unnormalized nonlinear Schroedinger equation.

    The induced norm law is dn/dt = -2 gamma (1 + kappa) n for the decaying
    variant, with kappa the population imbalance.
    """
    kappa, _ = _imbalance(psi.psi1, psi.psi2)
    eps, v, gamma = params.epsilon, params.v, params.gamma
    shift = 1j * gamma if params.variant == Variant.PT else 0.0
    mu = eps + params.g * kappa
    d1 = mu - 2j * gamma + shift
    d2 = -mu + shift
    return -1j * np.array([
        d1 * psi.psi1 + v * psi.psi2,
        v * psi.psi1 + d2 * psi.psi2,
    ], dtype=complex)


def gp_rhs_normalized(phi: SpinorState, params: SystemParams) -> np.ndarray:
    """Time derivative of the renormalized nonlinear Schroedinger equation.

    Raises
    ------
    PreconditionError
        If the spinor does not have unit norm.
    """
    kappa, n = _imbalance(phi.psi1, phi.psi2)
    if abs(n - 1.0) > UNIT_NORM_TOL:
        raise PreconditionError(f"renormalized spinor must have unit norm, got {n}")
    eps, v, gamma = params.epsilon, params.v, params.gamma
    mu = eps + params.g * kappa
    d1 = mu - 1j * gamma * (1.0 - kappa)
    d2 = -mu + 1j * gamma * (1.0 + kappa)
    return -1j * np.array([
        d1 * phi.psi1 + v * phi.psi2,
        v * phi.psi1 + d2 * phi.psi2,
    ], dtype=complex)


def _check_gauge(phi1: complex) -> float:
    x = abs(phi1) ** 2
    if x <= CHART_MARGIN or x >= 1.0 - CHART_MARGIN:
        raise ChartSingularError(f"phi gauge is singular at |phi_1|^2={x}")
    return x


def inverse_metric_phi(phi1: complex) -> np.ndarray:
    """Inverse metric in the coordinates (phi_1, phi_1*) with phi_2 real.

    Returns
    -------
    :
        The 2x2 complex matrix, with x = |phi_1|^2,
        [[phi^2 (x-2), 2-2x+x^2], [2-2x+x^2, phi*^2 (x-2)]] / (2 (1-x)).
    """
    x = _check_gauge(phi1)
    off = (2.0 - 2.0 * x + x * x) / (2.0 * (1.0 - x))
    return np.array([
        [phi1 * phi1 * (x - 2.0) / (2.0 * (1.0 - x)), off],
        [off, phi1.conjugate() ** 2 * (x - 2.0) / (2.0 * (1.0 - x))],
    ], dtype=complex)


def phi_canonical_rhs(phi1: complex, params: SystemParams) -> complex:
    """Time derivative of phi_1 in the gauge with phi_2 = sqrt(1 - |phi_1|^2) real.

    i dphi_1/dt = dH/dphi_1* - i (G^-1 grad Gamma)_1 with
    H = eps (2x-1) + v sqrt(1-x) (phi_1 + phi_1*) + g (2x-1)^2 / 2 and
    Gamma = gamma (2x-1).
    """
    phi1 = complex(phi1)
    x = _check_gauge(phi1)
    root = math.sqrt(1.0 - x)
    eps, v, gamma, g = params.epsilon, params.v, params.gamma, params.g
    dh = (2.0 * eps * phi1
          + v * (root - phi1 * (phi1 + phi1.conjugate()) / (2.0 * root))
          + 2.0 * g * phi1 * (2.0 * x - 1.0))
    grad_gamma = np.array([2.0 * gamma * phi1.conjugate(), 2.0 * gamma * phi1])
    flow = complex((inverse_metric_phi(phi1) @ grad_gamma)[0])
    return -1j * dh - flow


def phi2_rate(phi1: complex, phi1_dot: complex) -> float:
    """Time derivative of the real component phi_2 = sqrt(1 - |phi_1|^2)."""
    x = _check_gauge(phi1)
    xdot = 2.0 * (phi1_dot * phi1.conjugate()).real
    return -xdot / (2.0 * math.sqrt(1.0 - x))


def bloch_log_norm_rhs(params: SystemParams) -> Callable[[float, np.ndarray], np.ndarray]:
    """Vector field of the state (s_x, s_y, s_z, log n) in the Bloch formulation."""
    def rhs(t, y):
        ds = bloch_rhs_nonlinear(y[:3], params)
        return np.append(ds, log_norm_rate(y[:3], params))
    return rhs


def project_bloch_state(y: np.ndarray) -> np.ndarray:
    out = y.copy()
    out[:3], drift = project_to_sphere(y[:3])
    if drift > 1e-12:
        logger.debug(f"sphere projection removed drift {drift:.3e}")
    return out


def _spinor_vector(psi: SpinorState) -> np.ndarray:
    return np.array([psi.psi1.real, psi.psi1.imag, psi.psi2.real, psi.psi2.imag])


def _vector_spinor(y: np.ndarray) -> SpinorState:
    return SpinorState(complex(y[0], y[1]), complex(y[2], y[3]))


class _FormulationSystem(NamedTuple):
    y0: np.ndarray
    rhs: Callable[[float, np.ndarray], np.ndarray]
    project: Optional[Callable[[np.ndarray], np.ndarray]]
    to_state: Callable[[np.ndarray], MeanFieldState]
    norm_shift: float = 0.0


def _system(s0: BlochVector, params: SystemParams, formulation: Formulation) -> _FormulationSystem:
    if formulation == Formulation.BLOCH:
        # The renormalized flow is the same for both variants; the PT norm is the
        # decaying norm times exp(2 gamma t), so both take identical steps.
        return _FormulationSystem(
            np.append(s0.as_array(), 0.0),
            bloch_log_norm_rhs(params.with_(variant=Variant.DECAYING)),
            project_bloch_state,
            lambda y: MeanFieldState(BlochVector.from_array(y[:3]), math.exp(y[3])),
            2.0 * params.gamma if params.variant == Variant.PT else 0.0,
        )

    if formulation == Formulation.CANONICAL:
        pt = canonical_from_bloch(s0)
        if pt.at_pole:
            raise ChartSingularError("canonical formulation cannot start at a pole")

        def rhs(t, y):
            qdot, pdot = canonical_rhs(CanonicalPoint(p=y[1], q=y[0]), params)
            s = bloch_from_canonical(CanonicalPoint(p=y[1], q=y[0]))
            return np.array([qdot, pdot, log_norm_rate(s, params)])

        return _FormulationSystem(
            np.array([pt.q, pt.p, 0.0]),
            rhs,
            None,
            lambda y: MeanFieldState(
                bloch_from_canonical(CanonicalPoint(p=y[1], q=y[0])), math.exp(y[2])),
        )

    if formulation == Formulation.GP_UNNORMALIZED:
        def rhs(t, y):
            d = gp_rhs_unnormalized(_vector_spinor(y), params)
            return np.array([d[0].real, d[0].imag, d[1].real, d[1].imag])

        def to_state(y):
            psi = _vector_spinor(y)
            return MeanFieldState(bloch_from_spinor(psi), psi.norm)

        return _FormulationSystem(_spinor_vector(spinor_from_bloch(s0)), rhs, None, to_state)

    if formulation == Formulation.GP_NORMALIZED:
        def rhs(t, y):
            phi = _vector_spinor(y[:4])
            d = gp_rhs_normalized(phi, params)
            return np.array([d[0].real, d[0].imag, d[1].real, d[1].imag,
                             log_norm_rate(bloch_from_spinor(phi), params)])

        def project(y):
            out = y.copy()
            out[:4] /= np.linalg.norm(y[:4])
            return out

        return _FormulationSystem(
            np.append(_spinor_vector(spinor_from_bloch(s0)), 0.0),
            rhs,
            project,
            lambda y: MeanFieldState(bloch_from_spinor(_vector_spinor(y[:4])), math.exp(y[4])),
        )

    if formulation == Formulation.PHI:
        phi0 = spinor_from_bloch(s0).psi1

        def to_spinor(y):
            phi1 = complex(y[0], y[1])
            return SpinorState(phi1, complex(math.sqrt(max(0.0, 1.0 - abs(phi1) ** 2)), 0.0))

        def rhs(t, y):
            d = phi_canonical_rhs(complex(y[0], y[1]), params)
            return np.array([d.real, d.imag,
                             log_norm_rate(bloch_from_spinor(to_spinor(y)), params)])

        _check_gauge(phi0)
        return _FormulationSystem(
            np.array([phi0.real, phi0.imag, 0.0]),
            rhs,
            None,
            lambda y: MeanFieldState(bloch_from_spinor(to_spinor(y)), math.exp(y[2])),
        )

    raise PreconditionError(f"unknown formulation {formulation!r}")


def integrate_meanfield(
    s0: BlochVector,
    params: SystemParams,
    t_grid: Sequence[float],
    formulation: Formulation = Formulation.BLOCH,
    rtol: float = DEFAULT_RTOL,
    atol: float = DEFAULT_ATOL,
) -> Trajectory:
    """Integrate the mean-field dynamics together with the survival probability.

    Parameters
    ----------
    s0 :
        Initial Bloch vector; the initial norm is 1.
    params :
        System parameters.
    t_grid :
        Strictly increasing sample times; integration starts at ``t_grid[0]``.
    formulation :
        Which equivalent form of the equations to integrate.

    Returns
    -------
    :
        The sampled trajectory, renormalized states on the sphere.
    """
    if sphere_defect(s0) > SPHERE_TOL_INTEGRATION:
        raise PreconditionError(f"initial state is not on the Bloch sphere: {s0}")
    times = np.asarray(t_grid, dtype=float)
    if times.size < 1 or np.any(np.diff(times) <= 0):
        raise PreconditionError("t_grid must be non-empty and strictly increasing")
    system = _system(s0, params, Formulation(formulation))
    result = integrate_ode(system.rhs, system.y0, (times[0], times[-1]), t_eval=times,
                           rtol=rtol, atol=atol, project=system.project)
    states = np.empty((times.size, 3))
    norms = np.empty(times.size)
    for i, y in enumerate(result.y):
        state = system.to_state(y)
        s_arr, _ = project_to_sphere(state.s)
        states[i] = s_arr
        norms[i] = state.n * math.exp(system.norm_shift * (times[i] - times[0]))
    logger.debug(f"integrated {formulation} mean field over [{times[0]}, {times[-1]}] "
                 f"in {result.n_steps} steps")
    return Trajectory(times, states, norms)
