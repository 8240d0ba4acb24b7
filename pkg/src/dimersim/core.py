"""
Shared domain types, coordinate conversions and errors.

The renormalized state of the two-mode system lives on the Bloch sphere of
radius 1/2. It can be addressed through a Bloch vector, the canonical chart
(p, q), or an (unnormalized) two-component spinor. All conversions in this
module are pure and operate on immutable values.
"""

__all__ = [
    "DimersimError",
    "DomainError",
    "ChartSingularError",
    "PreconditionError",
    "NumericalError",
    "ConsistencyError",
    "ConfigError",
    "Variant",
    "SystemParams",
    "BlochVector",
    "CanonicalPoint",
    "SpinorState",
    "Trajectory",
    "SPHERE_TOL_INTEGRATION",
    "SPHERE_TOL_CONVERSION",
    "bloch_from_canonical",
    "canonical_from_bloch",
    "bloch_from_spinor",
    "spinor_from_bloch",
    "bloch_from_angles",
    "angles_from_bloch",
    "project_to_sphere",
    "sphere_defect",
]

import math
from enum import Enum
from typing import NamedTuple, Optional, Tuple

import numpy as np
import pandas as pd
from pydantic import BaseModel, ConfigDict, field_validator

SPHERE_TOL_INTEGRATION = 1e-9
SPHERE_TOL_CONVERSION = 1e-12


class DimersimError(Exception):
    """Base class for all errors raised by dimersim."""


class DomainError(DimersimError, ValueError):
    """Input lies outside the domain of an operation."""


class ChartSingularError(DomainError):
    """A coordinate chart or gauge is singular at the requested point."""


class PreconditionError(DimersimError, ValueError):
    """A documented precondition of an operation is violated."""


class NumericalError(DimersimError, ArithmeticError):
    """A numerical kernel failed (non-convergence, overflow, underflow)."""

    def __init__(self, message: str, last_time: Optional[float] = None):
        super().__init__(message)
        self.last_time = last_time


class ConsistencyError(DimersimError, RuntimeError):
    """An internal invariant was found violated."""


class ConfigError(DimersimError, ValueError):
    """Invalid run configuration."""


class Variant(str, Enum):
    """Selects the decaying Hamiltonian or its PT-symmetric shift."""

    DECAYING = "decaying"
    PT = "pt"


class SystemParams(BaseModel):
    """Physical parameters of the dimer.

    Parameters
    ----------
    epsilon :
        Onsite bias.
    v :
        Coupling between the two modes, must be positive.
    gamma :
        Non-Hermiticity (decay rate of mode 1), must be non-negative.
    g :
        Macroscopic interaction g = N c.
    n_particles :
        Particle number N, absent for pure mean-field runs.
    variant :
        Decaying Hamiltonian or the PT-symmetric version shifted by
        i gamma N.
    """

    model_config = ConfigDict(frozen=True, use_enum_values=False)

    epsilon: float = 0.0
    v: float = 1.0
    gamma: float = 0.0
    g: float = 0.0
    n_particles: Optional[int] = None
    variant: Variant = Variant.DECAYING

    @field_validator("v")
    @classmethod
    def _positive_coupling(cls, value: float) -> float:
        if not value > 0 or not math.isfinite(value):
            raise ValueError(f"coupling v must be positive and finite, got {value}")
        return value

    @field_validator("gamma")
    @classmethod
    def _nonnegative_gamma(cls, value: float) -> float:
        if not value >= 0 or not math.isfinite(value):
            raise ValueError(f"gamma must be non-negative and finite, got {value}")
        return value

    @field_validator("epsilon", "g")
    @classmethod
    def _finite(cls, value: float) -> float:
        if not math.isfinite(value):
            raise ValueError(f"parameter must be finite, got {value}")
        return value

    @field_validator("n_particles")
    @classmethod
    def _positive_particles(cls, value: Optional[int]) -> Optional[int]:
        if value is not None and value < 1:
            raise ValueError(f"n_particles must be at least 1, got {value}")
        return value

    @classmethod
    def from_microscopic(cls, c_times_n: float, n_particles: int, **kwargs) -> "SystemParams":
        """Build parameters from the microscopic interaction given as c N."""
        return cls(g=c_times_n, n_particles=n_particles, **kwargs)

    @property
    def c(self) -> float:
        """Microscopic interaction c = g / N."""
        if self.n_particles is None:
            raise PreconditionError("microscopic c requires n_particles")
        return self.g / self.n_particles

    @property
    def zeta(self) -> complex:
        """Complex onsite energy epsilon - i gamma."""
        return complex(self.epsilon, -self.gamma)

    def with_(self, **changes) -> "SystemParams":
        """Return a validated copy with some fields replaced."""
        return type(self).model_validate({**self.model_dump(), **changes})


class BlochVector(NamedTuple):
    """Point on the Bloch sphere of radius 1/2."""

    sx: float
    sy: float
    sz: float

    def as_array(self) -> np.ndarray:
        return np.array([self.sx, self.sy, self.sz], dtype=float)

    @classmethod
    def from_array(cls, arr) -> "BlochVector":
        return cls(float(arr[0]), float(arr[1]), float(arr[2]))


class CanonicalPoint(NamedTuple):
    """Canonical coordinates (p, q); q is normalized into [0, pi)."""

    p: float
    q: float
    at_pole: bool = False


class SpinorState(NamedTuple):
    """Two complex amplitudes of the two-mode state."""

    psi1: complex
    psi2: complex

    @property
    def norm(self) -> float:
        return abs(self.psi1) ** 2 + abs(self.psi2) ** 2

    def normalized(self) -> "SpinorState":
        n = self.norm
        if n <= 0:
            raise DomainError("cannot normalize a spinor with zero norm")
        scale = 1.0 / math.sqrt(n)
        return SpinorState(self.psi1 * scale, self.psi2 * scale)

    def as_array(self) -> np.ndarray:
        return np.array([self.psi1, self.psi2], dtype=complex)


class Trajectory(NamedTuple):
    """Sampled mean-field trajectory.

    ``states`` is an array of shape (len(times), 3) of Bloch vectors and
    ``norms`` holds the survival probability n(t).
    """

    times: np.ndarray
    states: np.ndarray
    norms: np.ndarray

    def state(self, index: int) -> BlochVector:
        return BlochVector.from_array(self.states[index])

    def validate(self, tol: float = SPHERE_TOL_INTEGRATION) -> None:
        """Check the trajectory contract and raise ``ConsistencyError`` if broken."""
        n = len(self.times)
        if self.states.shape != (n, 3) or self.norms.shape != (n,):
            raise ConsistencyError("trajectory arrays have mismatched lengths")
        if n > 1 and not np.all(np.diff(self.times) > 0):
            raise ConsistencyError("trajectory times are not strictly increasing")
        defect = np.max(np.abs(np.sum(self.states ** 2, axis=1) - 0.25)) if n else 0.0
        if defect > tol:
            raise ConsistencyError(f"trajectory left the Bloch sphere (defect {defect:.3e})")
        if np.any(self.norms <= 0):
            raise ConsistencyError("trajectory norms must stay positive")

    def to_frame(self) -> pd.DataFrame:
        return pd.DataFrame({
            "t": self.times,
            "sx": self.states[:, 0],
            "sy": self.states[:, 1],
            "sz": self.states[:, 2],
            "norm": self.norms,
        })


def sphere_defect(s) -> float:
    """Return |s^2 - 1/4| for a Bloch vector or a 3-array."""
    sx, sy, sz = s
    return abs(sx * sx + sy * sy + sz * sz - 0.25)


def project_to_sphere(s) -> Tuple[np.ndarray, float]:
    """Project a 3-vector radially onto the radius-1/2 sphere.

    Returns
    -------
    :
        The projected vector and the defect |s^2 - 1/4| before projection.
    """
    arr = np.asarray(s, dtype=float)
    radius = float(np.linalg.norm(arr))
    if radius == 0.0:
        raise DomainError("cannot project the zero vector onto the Bloch sphere")
    return arr / (2.0 * radius), abs(radius * radius - 0.25)


def bloch_from_canonical(pt: CanonicalPoint) -> BlochVector:
    """Map canonical coordinates (p, q) onto the Bloch sphere."""
    p, q = pt.p, pt.q
    if abs(p) > 1.0:
        raise DomainError(f"canonical momentum must satisfy |p| <= 1, got {p}")
    rho = 0.5 * math.sqrt(max(0.0, 1.0 - p * p))
    return BlochVector(rho * math.cos(2.0 * q), rho * math.sin(2.0 * q), 0.5 * p)


def canonical_from_bloch(s: BlochVector) -> CanonicalPoint:
    """Inverse of :func:`bloch_from_canonical`.

    At the poles the angle is undefined; q = 0 is returned with ``at_pole``
    set so that callers avoid the singular chart.
    """
    if sphere_defect(s) > 1e-6:
        raise DomainError(f"Bloch vector is not on the sphere: {s}")
    p = max(-1.0, min(1.0, 2.0 * s.sz))
    if s.sx == 0.0 and s.sy == 0.0 or abs(p) >= 1.0:
        return CanonicalPoint(p=p, q=0.0, at_pole=True)
    q = 0.5 * math.atan2(s.sy, s.sx)
    if q < 0.0:
        q += math.pi
    if q >= math.pi:
        q -= math.pi
    return CanonicalPoint(p=p, q=q)


def bloch_from_spinor(psi: SpinorState) -> BlochVector:
    """Renormalized Bloch vector of a (not necessarily normalized) spinor."""
    n = psi.norm
    if n <= 0.0:
        raise DomainError("Bloch vector of a zero spinor is undefined")
    cross = psi.psi1.conjugate() * psi.psi2
    return BlochVector(
        cross.real / n,
        cross.imag / n,
        0.5 * (abs(psi.psi1) ** 2 - abs(psi.psi2) ** 2) / n,
    )


def bloch_from_angles(theta: float, phi: float) -> BlochVector:
    """Bloch vector of the sphere point with polar angle theta and azimuth phi."""
    return BlochVector(
        0.5 * math.sin(theta) * math.cos(phi),
        0.5 * math.sin(theta) * math.sin(phi),
        0.5 * math.cos(theta),
    )


def angles_from_bloch(s: BlochVector) -> Tuple[float, float]:
    """Polar and azimuthal angle of a Bloch vector."""
    theta = math.acos(max(-1.0, min(1.0, 2.0 * s.sz)))
    phi = math.atan2(s.sy, s.sx)
    return theta, phi


def spinor_from_bloch(s: BlochVector, norm: float = 1.0) -> SpinorState:
    """A spinor with the given norm whose Bloch image is ``s``.

    The gauge is fixed by taking psi2 real and non-negative, with
    psi1 = sqrt(n) e^{-i phi} cos(theta/2), psi2 = sqrt(n) sin(theta/2).
    """
    theta, phi = angles_from_bloch(s)
    amp = math.sqrt(norm)
    return SpinorState(
        amp * complex(math.cos(phi), -math.sin(phi)) * math.cos(0.5 * theta),
        complex(amp * math.sin(0.5 * theta), 0.0),
    )
