"""
Exact many-particle dynamics of the non-Hermitian Bose-Hubbard dimer.

States live in the (N+1)-dimensional space spanned by Fock states |k>, with
k the number of particles in mode 1, i.e. m = k - N/2 in the angular momentum
basis |l, m> with l = N/2. The Hamiltonian

    H = 2 (eps - i gamma) L_z + 2 v L_x + 2 c L_z^2 - i gamma N

is tridiagonal in this basis; the PT variant drops the last term.
"""

__all__ = [
    "FockVector",
    "AngularExpectations",
    "CovarianceReport",
    "angular_momentum_operators",
    "build_hamiltonian",
    "linear_spectrum_closed_form",
    "coherent_state",
    "coherent_overlap",
    "expectations",
    "anticommutator_expectations",
    "covariance_check",
    "norm_rate",
    "AmplificationMonitor",
    "ROUNDING_TOLERANCE",
    "propagate",
    "rescaled_norm",
    "expectation_table",
]

import logging
import math
from typing import Dict, List, NamedTuple, Optional, Sequence, Tuple

import numpy as np
import scipy.sparse
from scipy.special import gammaln

from .core import DomainError, PreconditionError, SystemParams, Variant
from .numerics import expm

logger = logging.getLogger(__name__)

MACHINE_EPSILON = float(np.finfo(float).eps)
ROUNDING_TOLERANCE = 1e-8


class FockVector(NamedTuple):
    """Many-particle state; the physical vector is exp(log_scale) * amplitudes.

    Keeping the overall scale in log space lets norms decay far below the
    floating point range without losing the shape of the state.
    """

    amplitudes: np.ndarray
    log_scale: float = 0.0

    @property
    def n_particles(self) -> int:
        return self.amplitudes.size - 1

    def log_norm(self) -> float:
        """Natural logarithm of <Psi|Psi>."""
        weight = float(np.vdot(self.amplitudes, self.amplitudes).real)
        if weight <= 0.0:
            raise DomainError("Fock vector has zero norm")
        return 2.0 * self.log_scale + math.log(weight)

    def norm(self) -> float:
        """<Psi|Psi>, possibly underflowing to 0."""
        return math.exp(self.log_norm())

    def normalized_amplitudes(self) -> np.ndarray:
        weight = math.sqrt(float(np.vdot(self.amplitudes, self.amplitudes).real))
        if weight <= 0.0:
            raise DomainError("Fock vector has zero norm")
        return self.amplitudes / weight

    def rescaled(self) -> "FockVector":
        """Same state with unit-norm amplitudes and the norm moved into ``log_scale``."""
        weight = math.sqrt(float(np.vdot(self.amplitudes, self.amplitudes).real))
        if weight <= 0.0:
            raise DomainError("Fock vector has zero norm")
        return FockVector(self.amplitudes / weight, self.log_scale + math.log(weight))

    def to_array(self) -> np.ndarray:
        return self.amplitudes * math.exp(self.log_scale)


class AngularExpectations(NamedTuple):
    """Normalized expectation values <L_x>, <L_y>, <L_z> and <N>."""

    lx: float
    ly: float
    lz: float
    n_expect: float

    def bloch(self) -> np.ndarray:
        """Renormalized Bloch vector <L>/N."""
        return np.array([self.lx, self.ly, self.lz]) / self.n_expect


class CovarianceReport(NamedTuple):
    """Residuals of the generalized Heisenberg equations and of the
    coherent-state factorization of anti-commutators.

    The factorization residual is only expected to vanish for coherent
    states.
    """

    heisenberg_residual: float
    factorization_residual: float
    lhs: np.ndarray
    rhs: np.ndarray


def _m_values(n_particles: int) -> np.ndarray:
    return np.arange(n_particles + 1) - 0.5 * n_particles


def _ladder(n_particles: int) -> np.ndarray:
    """<m+1| L_+ |m> = sqrt((l - m)(l + m + 1)) for m = -l .. l-1."""
    l = 0.5 * n_particles
    m = _m_values(n_particles)[:-1]
    return np.sqrt((l - m) * (l + m + 1.0))


def angular_momentum_operators(n_particles: int) -> Dict[str, scipy.sparse.csr_matrix]:
    """Sparse matrices of L_x, L_y, L_z and N in the Fock basis."""
    ladder = _ladder(n_particles)
    dim = n_particles + 1
    lplus = scipy.sparse.diags([ladder], [-1], shape=(dim, dim), dtype=complex, format="csr")
    lminus = lplus.conj().T
    return {
        "lx": (0.5 * (lplus + lminus)).tocsr(),
        "ly": (-0.5j * (lplus - lminus)).tocsr(),
        "lz": scipy.sparse.diags([_m_values(n_particles)], [0], dtype=complex, format="csr"),
        "n": n_particles * scipy.sparse.identity(dim, dtype=complex, format="csr"),
    }


def _resolve_n(params: SystemParams, n_particles: Optional[int]) -> int:
    n = params.n_particles if n_particles is None else n_particles
    if n is None or n < 1:
        raise PreconditionError("many-particle operations need n_particles >= 1")
    return int(n)


def build_hamiltonian(params: SystemParams, n_particles: Optional[int] = None) -> np.ndarray:
    """Dense tridiagonal (N+1)x(N+1) Hamiltonian, microscopic interaction c = g / N."""
    n = _resolve_n(params, n_particles)
    c = params.g / n
    m = _m_values(n)
    diagonal = 2.0 * params.zeta * m + 2.0 * c * m * m
    if params.variant == Variant.DECAYING:
        diagonal = diagonal - 1j * params.gamma * n
    off = params.v * _ladder(n)
    return np.diag(diagonal) + np.diag(off, 1) + np.diag(off, -1)


def linear_spectrum_closed_form(params: SystemParams,
                                n_particles: Optional[int] = None) -> np.ndarray:
    """Non-interacting spectrum: multiples of the single-particle eigenvalues.

    Raises
    ------
    PreconditionError
        If the interaction does not vanish.
    """
    n = _resolve_n(params, n_particles)
    if params.g != 0.0:
        raise PreconditionError("closed-form spectrum requires c = 0")
    zeta = params.zeta
    omega = np.sqrt(complex(zeta * zeta + params.v ** 2))
    offset = -1j * n * params.gamma if params.variant == Variant.DECAYING else 0.0
    return np.array([offset + (2 * k - n) * omega for k in range(n + 1)], dtype=complex)


def coherent_state(theta: float, phi: float, n_particles: int) -> FockVector:
    """SU(2) coherent state at the sphere point (theta, phi), unit norm.

    a_k = sqrt(C(N, k)) x1^k x2^(N-k) with x1 = e^{-i phi} cos(theta/2) and
    x2 = sin(theta/2); binomials and powers are combined in log space.
    """
    if n_particles < 1:
        raise PreconditionError("coherent states need n_particles >= 1")
    n = n_particles
    k = np.arange(n + 1)
    abs1, abs2 = abs(math.cos(0.5 * theta)), abs(math.sin(0.5 * theta))
    sign1 = math.copysign(1.0, math.cos(0.5 * theta))
    sign2 = math.copysign(1.0, math.sin(0.5 * theta))
    log_binom = 0.5 * (gammaln(n + 1) - gammaln(k + 1) - gammaln(n - k + 1))
    log1 = math.log(abs1) if abs1 > 0 else -np.inf
    log2 = math.log(abs2) if abs2 > 0 else -np.inf
    # 0 * log(0) counts as 0
    with np.errstate(invalid="ignore"):
        term1 = np.where(k > 0, k * log1, 0.0)
        term2 = np.where(n - k > 0, (n - k) * log2, 0.0)
    magnitude = np.exp(log_binom + term1 + term2)
    phase = np.exp(-1j * phi * k) * sign1 ** k * sign2 ** (n - k)
    return FockVector(magnitude * phase).rescaled()._replace(log_scale=0.0)


def coherent_overlap(psi: FockVector, theta: float, phi: float) -> float:
    """|<theta, phi | Psi>|^2 / <Psi|Psi>."""
    ref = coherent_state(theta, phi, psi.n_particles).amplitudes
    return float(abs(np.vdot(ref, psi.normalized_amplitudes())) ** 2)


def expectations(psi: FockVector) -> AngularExpectations:
    """Normalized angular momentum expectation values."""
    amps = psi.normalized_amplitudes()
    n = psi.n_particles
    lplus = np.sum(amps[1:].conj() * _ladder(n) * amps[:-1])
    lz = float(np.sum(np.abs(amps) ** 2 * _m_values(n)))
    return AngularExpectations(float(lplus.real), float(lplus.imag), lz, float(n))


def anticommutator_expectations(psi: FockVector,
                                names: Sequence[str] = ("lx", "ly", "lz")) -> np.ndarray:
    """Matrix of normalized <[A_i, A_j]_+> for the named operators.

    ``names`` are keys of :func:`angular_momentum_operators`; the default gives
    the 3x3 matrix for L_x, L_y, L_z.
    """
    amps = psi.normalized_amplitudes()
    ops = angular_momentum_operators(psi.n_particles)
    images = [ops[name] @ amps for name in names]
    size = len(images)
    result = np.empty((size, size))
    for i in range(size):
        for j in range(size):
            # <L_i L_j> + <L_j L_i> = 2 Re <L_i psi | L_j psi>
            result[i, j] = 2.0 * np.vdot(images[i], images[j]).real
    return result


def _heisenberg_rhs(psi: FockVector, params: SystemParams) -> np.ndarray:
    """d<L_i>/dt from i<[H_h, L_i]> - <[Gamma, L_i]_+> + 2 <Gamma><L_i>."""
    amps = psi.normalized_amplitudes()
    n = psi.n_particles
    ham = scipy.sparse.csr_matrix(build_hamiltonian(params, n))
    hermitian = 0.5 * (ham + ham.conj().T)
    gamma_op = 0.5j * (ham - ham.conj().T)
    ops = angular_momentum_operators(n)
    h_amps = hermitian @ amps
    g_amps = gamma_op @ amps
    gamma_mean = np.vdot(amps, g_amps).real
    rhs = np.empty(3)
    for i, name in enumerate(("lx", "ly", "lz")):
        l_amps = ops[name] @ amps
        commutator = np.vdot(h_amps, l_amps) - np.vdot(l_amps, h_amps)
        anti = 2.0 * np.vdot(g_amps, l_amps).real
        rhs[i] = (1j * commutator).real - anti + 2.0 * gamma_mean * np.vdot(amps, l_amps).real
    return rhs


def covariance_check(psi: FockVector, params: SystemParams,
                     step: Optional[float] = None) -> CovarianceReport:
    """Check the generalized Heisenberg equations for <L_i>.

    The left side is a central finite difference of propagated expectation
    values; the right side uses the commutator with the Hermitian part and
    the covariance with the anti-Hermitian part of H.
    """
    n = psi.n_particles
    dt = 1e-6 / params.v if step is None else step
    ham = build_hamiltonian(params, n)
    forward = FockVector(expm(-1j * ham * dt) @ psi.amplitudes)
    backward = FockVector(expm(1j * ham * dt) @ psi.amplitudes)
    lhs = (np.array(expectations(forward)[:3]) - np.array(expectations(backward)[:3])) / (2 * dt)
    rhs = _heisenberg_rhs(psi, params)

    mean = np.array(expectations(psi)[:3])
    anti = anticommutator_expectations(psi, ("lx", "ly", "lz", "n"))
    factorized = 2.0 * (1.0 - 1.0 / n) * np.outer(mean, mean) + 0.5 * n * np.eye(3)
    # <[L_i, N]_+> = 2 N <L_i> in the N-particle space
    factor_res = max(float(np.max(np.abs(anti[:3, :3] - factorized))),
                     float(np.max(np.abs(anti[:3, 3] - 2.0 * n * mean))))
    return CovarianceReport(
        heisenberg_residual=float(np.max(np.abs(lhs - rhs))),
        factorization_residual=factor_res,
        lhs=lhs,
        rhs=rhs,
    )


def norm_rate(psi: FockVector, params: SystemParams) -> float:
    """d log <Psi|Psi> / dt = -2 gamma (2 <L_z> + N) (decaying) or -4 gamma <L_z> (PT)."""
    lz = expectations(psi).lz
    if params.variant == Variant.PT:
        return -4.0 * params.gamma * lz
    return -2.0 * params.gamma * (2.0 * lz + psi.n_particles)


class AmplificationMonitor:
    """Estimate of how strongly a non-unitary propagation amplifies rounding errors.

    A random unit vector is propagated next to the states. Its growth
    approaches the operator norm of the accumulated propagator, so rounding
    errors of relative size eps can reach eps * exp(log_growth - state growth)
    relative to the state. Sums of many decaying Fock components are
    ill-conditioned once N gamma t is large, and this ratio detects it.
    """

    def __init__(self, dimension: int, seed: int = 0):
        rng = np.random.default_rng(seed)
        vector = rng.normal(size=dimension) + 1j * rng.normal(size=dimension)
        self._vector = vector / np.linalg.norm(vector)
        self.log_growth = 0.0
        self.log_amplification = 0.0

    def step(self, matrix: np.ndarray) -> None:
        self._vector = matrix @ self._vector
        weight = float(np.linalg.norm(self._vector))
        self._vector /= weight
        self.log_growth += math.log(weight)

    def record(self, state_log_growth: float) -> None:
        """Compare with the growth of log ||Psi|| since the start."""
        self.log_amplification = max(self.log_amplification,
                                     self.log_growth - state_log_growth)

    @property
    def relative_error(self) -> float:
        """Relative error of the state that rounding alone can produce."""
        return MACHINE_EPSILON * math.exp(min(self.log_amplification, 700.0))

    def check(self, context: str) -> bool:
        """Log a warning if the estimated error exceeds ``ROUNDING_TOLERANCE``."""
        if self.relative_error <= ROUNDING_TOLERANCE:
            return True
        logger.warning(f"{context}: rounding errors may grow to {self.relative_error:.1e} "
                       f"of the state (amplification e^{self.log_amplification:.1f}); "
                       f"reduce N, gamma or t")
        return False


def propagate(psi0: FockVector, params: SystemParams, t_grid: Sequence[float]) -> List[FockVector]:
    """Propagate Psi(t) = exp(-i H (t - t_0)) Psi_0 over the grid.

    ``psi0`` is taken at ``t_grid[0]``. Step exponentials are cached per
    distinct step length so uniform grids need a single exponential. The
    state is rescaled after every step and its norm kept in ``log_scale``.
    A warning is logged when rounding errors can be amplified beyond
    ``ROUNDING_TOLERANCE`` (see :class:`AmplificationMonitor`).
    """
    times = np.asarray(t_grid, dtype=float)
    if times.size < 1 or np.any(np.diff(times) < 0):
        raise PreconditionError("t_grid must be non-empty and non-decreasing")
    ham = build_hamiltonian(params, psi0.n_particles)
    cache: Dict[float, np.ndarray] = {}
    state = psi0.rescaled()
    states = [state]
    monitor = AmplificationMonitor(psi0.n_particles + 1)
    for dt in np.diff(times):
        key = round(float(dt), 15)
        if key not in cache:
            cache[key] = expm(-1j * ham * dt)
        state = FockVector(cache[key] @ state.amplitudes, state.log_scale).rescaled()
        monitor.step(cache[key])
        monitor.record(state.log_scale - states[0].log_scale)
        states.append(state)
    monitor.check(f"propagation of N={psi0.n_particles} to t={times[-1]:g}")
    logger.debug(f"propagated N={psi0.n_particles} over {times.size} samples "
                 f"with {len(cache)} distinct step exponentials")
    return states


def rescaled_norm(psi: FockVector) -> float:
    """<Psi|Psi>^(1/N), evaluated in log space."""
    return math.exp(psi.log_norm() / psi.n_particles)


def expectation_table(states: Sequence[FockVector]) -> Tuple[np.ndarray, np.ndarray]:
    """Bloch images <L>/N and rescaled norms for a propagated sequence."""
    bloch = np.array([expectations(s).bloch() for s in states])
    norms = np.array([rescaled_norm(s) for s in states])
    return bloch, norms
