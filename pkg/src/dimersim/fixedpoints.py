"""
Fixed points of the mean-field flow on the Bloch sphere.

Fixed points are found as real roots of a quartic in s_z, completed to
points on the sphere and polished by Newton steps in the tangent plane.
Each point is classified from the eigenvalues of the flow Jacobian projected
onto the tangent plane, and its Poincare index is measured as the winding
number of the vector field around a small geodesic circle. On the sphere the
indices always add up to the Euler characteristic 2.
"""

__all__ = [
    "FixpointKind",
    "Region",
    "RegionLabel",
    "FixedPoint",
    "FixedPointReport",
    "CENTER_TOL",
    "fixed_point_quartic",
    "solve_fixed_points",
    "tangent_basis",
    "flow_jacobian",
    "tangent_jacobian",
    "kind_from_eigenvalues",
    "classify",
    "poincare_index",
    "region_of",
    "critical_interaction",
    "meanfield_energies",
    "analyze",
    "locate_count_change",
]

import logging
import math
from enum import Enum
from typing import Dict, FrozenSet, List, NamedTuple, Optional, Sequence, Tuple

import numpy as np

from .core import (
    BlochVector,
    ConsistencyError,
    NumericalError,
    PreconditionError,
    SystemParams,
    project_to_sphere,
)
from .linear2 import complete_fixed_points
from .meanfield import HamiltonianFunction, bloch_rhs_nonlinear, hamiltonian_value
from .numerics import eig_complex, real_roots, roots_quartic

logger = logging.getLogger(__name__)

CENTER_TOL = 1e-8
RESIDUAL_TOL = 1e-9
BOUNDARY_TOL = 1e-12
INDEX_RADIUS = 1e-3
INDEX_SAMPLES = 720
INDEX_HALVINGS = 3


class FixpointKind(str, Enum):
    """Fixed point types by the eigenvalues of the tangent Jacobian."""

    STABLE_NODE = "stable_node"
    UNSTABLE_NODE = "unstable_node"
    SADDLE = "saddle"
    STABLE_FOCUS = "stable_focus"
    UNSTABLE_FOCUS = "unstable_focus"
    CENTER = "center"

    @property
    def index(self) -> int:
        return -1 if self is FixpointKind.SADDLE else 1


class Region(str, Enum):
    """Fixed point configurations of the unbiased dimer.

    R1: two equatorial points; R2: four points including a saddle and a
    center; R3: only the two off-equator points.
    """

    R1 = "R1"
    R2 = "R2"
    R3 = "R3"


class RegionLabel(NamedTuple):
    region: Region
    boundary_flags: FrozenSet[str]


class FixedPoint(NamedTuple):
    """Classified fixed point."""

    location: BlochVector
    jacobian_eigenvalues: Tuple[complex, complex]
    kind: FixpointKind
    index: int
    energy: HamiltonianFunction

    def to_record(self) -> Dict:
        return {
            "s": list(self.location),
            "kind": self.kind.value,
            "index": self.index,
            "eigenvalues": [[ev.real, ev.imag] for ev in self.jacobian_eigenvalues],
            "energy": [self.energy.H, -self.energy.Gamma],
        }


class FixedPointReport(NamedTuple):
    params: SystemParams
    fixed_points: List[FixedPoint]
    region: Optional[RegionLabel]
    index_sum: int

    def to_record(self) -> Dict:
        return {
            "params": self.params.model_dump(mode="json"),
            "fixed_points": [fp.to_record() for fp in self.fixed_points],
            "region": None if self.region is None else {
                "region": self.region.region.value,
                "boundary_flags": sorted(self.region.boundary_flags),
            },
            "index_sum": self.index_sum,
        }


def fixed_point_quartic(params: SystemParams) -> Tuple[float, float, float, float, float]:
    """Coefficients (c4..c0) of the fixed point polynomial in s_z."""
    eps, v, gamma, g = params.epsilon, params.v, params.gamma, params.g
    return (
        4.0 * (g * g + gamma * gamma),
        4.0 * g * eps,
        eps * eps + v * v - g * g - gamma * gamma,
        -g * eps,
        -0.25 * eps * eps,
    )


def _scale(params: SystemParams) -> float:
    return max(1.0, abs(params.epsilon), params.v, params.gamma, abs(params.g))


def tangent_basis(s) -> np.ndarray:
    """Orthonormal basis (3x2, columns e1, e2) of the tangent plane at ``s``.

    (e1, e2, s/|s|) is right-handed.
    """
    normal = np.asarray(s, dtype=float)
    normal = normal / np.linalg.norm(normal)
    axis = np.zeros(3)
    axis[int(np.argmin(np.abs(normal)))] = 1.0
    e1 = axis - axis.dot(normal) * normal
    e1 /= np.linalg.norm(e1)
    e2 = np.cross(normal, e1)
    return np.column_stack([e1, e2])


def flow_jacobian(s, params: SystemParams) -> np.ndarray:
    """Analytic 3x3 Jacobian of the nonlinear Bloch equations."""
    sx, sy, sz = s
    eps, v, gamma, g = params.epsilon, params.v, params.gamma, params.g
    return np.array([
        [4.0 * gamma * sz, -2.0 * eps - 4.0 * g * sz, 4.0 * gamma * sx - 4.0 * g * sy],
        [2.0 * eps + 4.0 * g * sz, 4.0 * gamma * sz, -2.0 * v + 4.0 * gamma * sy + 4.0 * g * sx],
        [0.0, 2.0 * v, 8.0 * gamma * sz],
    ])


def tangent_jacobian(s, params: SystemParams) -> np.ndarray:
    """Jacobian restricted to the tangent plane of the sphere at ``s``."""
    basis = tangent_basis(s)
    return basis.T @ flow_jacobian(s, params) @ basis


def _polish(s: BlochVector, params: SystemParams) -> BlochVector:
    """Newton steps in the tangent plane; steps that do not reduce the residual are dropped."""
    current = s.as_array()
    residual = np.linalg.norm(bloch_rhs_nonlinear(current, params))
    for _ in range(4):
        if residual == 0.0:
            break
        basis = tangent_basis(current)
        jac = basis.T @ flow_jacobian(current, params) @ basis
        if abs(np.linalg.det(jac)) <= 1e-12 * max(1.0, np.linalg.norm(jac)) ** 2:
            break
        step = np.linalg.solve(jac, -basis.T @ bloch_rhs_nonlinear(current, params))
        if np.linalg.norm(step) > 1e-6:
            break
        candidate, _ = project_to_sphere(current + basis @ step)
        cand_res = np.linalg.norm(bloch_rhs_nonlinear(candidate, params))
        if cand_res >= residual:
            break
        current, residual = candidate, cand_res
    return BlochVector.from_array(current)


def solve_fixed_points(params: SystemParams) -> List[BlochVector]:
    """All fixed points of the nonlinear Bloch flow.

    Raises
    ------
    ConsistencyError
        If no fixed point survives, which the index theorem rules out.
    """
    v, gamma = params.v, params.gamma
    roots = roots_quartic(*fixed_point_quartic(params))
    points = complete_fixed_points(
        real_roots(roots),
        lambda sz: 2.0 * gamma * (0.25 - sz * sz) / v,
        lambda s: bloch_rhs_nonlinear(s, params),
        _scale(params),
    )
    points = [_polish(p, params) for p in points]
    if not points:
        raise ConsistencyError(f"no fixed points found for {params}")
    logger.debug(f"{len(points)} fixed points for {params}")
    return points


def kind_from_eigenvalues(eigenvalues: Sequence[complex]) -> FixpointKind:
    """Classify a fixed point from the two eigenvalues of its tangent Jacobian."""
    lam1, lam2 = (complex(ev) for ev in eigenvalues)
    magnitude = max(abs(lam1), abs(lam2))
    if magnitude == 0.0:
        return FixpointKind.CENTER
    if max(abs(lam1.imag), abs(lam2.imag)) <= 1e-9 * magnitude:
        r1, r2 = lam1.real, lam2.real
        if r1 * r2 < 0:
            return FixpointKind.SADDLE
        if r1 + r2 < 0:
            return FixpointKind.STABLE_NODE
        return FixpointKind.UNSTABLE_NODE
    re = 0.5 * (lam1.real + lam2.real)
    if abs(re) <= CENTER_TOL * magnitude:
        return FixpointKind.CENTER
    return FixpointKind.STABLE_FOCUS if re < 0 else FixpointKind.UNSTABLE_FOCUS


def classify(location: BlochVector, params: SystemParams) -> FixedPoint:
    """Classify a fixed point and attach its index and mean-field energy.

    Raises
    ------
    PreconditionError
        If the flow does not vanish at ``location``.
    """
    residual = float(np.linalg.norm(bloch_rhs_nonlinear(location, params)))
    if residual > RESIDUAL_TOL * _scale(params):
        raise PreconditionError(f"not a fixed point: flow residual {residual:.3e} at {location}")
    spectrum = eig_complex(tangent_jacobian(location, params), vectors=False).eigenvalues
    eigenvalues = tuple(complex(ev) for ev in sorted(spectrum, key=lambda z: (z.real, z.imag)))
    kind = kind_from_eigenvalues(eigenvalues)
    return FixedPoint(
        location=location,
        jacobian_eigenvalues=eigenvalues,
        kind=kind,
        index=kind.index,
        energy=hamiltonian_value(location, params),
    )


def _circle_winding(center: np.ndarray, params: SystemParams, radius: float,
                    samples: int) -> Optional[int]:
    """Winding number of the tangent field along a geodesic circle, or None if ambiguous."""
    basis = tangent_basis(center)
    normal = center / np.linalg.norm(center)
    # geodesic radius on the sphere of radius 1/2
    alpha = 2.0 * radius
    theta = np.linspace(0.0, 2.0 * np.pi, samples, endpoint=False)
    direction = np.outer(basis[:, 0], np.cos(theta)) + np.outer(basis[:, 1], np.sin(theta))
    points = 0.5 * (math.cos(alpha) * normal[:, None] + math.sin(alpha) * direction)
    field = bloch_rhs_nonlinear(points, params)
    u = basis[:, 0] @ field
    w = basis[:, 1] @ field
    magnitude = np.hypot(u, w)
    if np.min(magnitude) <= 1e-3 * np.max(magnitude):
        return None
    angles = np.arctan2(w, u)
    steps = np.diff(np.append(angles, angles[0]))
    steps = (steps + np.pi) % (2.0 * np.pi) - np.pi
    if np.max(np.abs(steps)) > 0.5 * np.pi:
        return None
    winding = steps.sum() / (2.0 * np.pi)
    rounded = int(round(winding))
    if abs(winding - rounded) > 1e-6:
        return None
    return rounded


def poincare_index(location: BlochVector, params: SystemParams,
                   others: Optional[Sequence[BlochVector]] = None,
                   radius: float = INDEX_RADIUS,
                   samples: int = INDEX_SAMPLES) -> int:
    """Poincare index of an isolated fixed point.

    Parameters
    ----------
    location :
        The fixed point.
    params :
        System parameters.
    others :
        The remaining fixed points; computed when not given.
    radius :
        Initial geodesic radius of the encircling curve, halved up to three
        times if the winding is ambiguous or another fixed point is too close.

    Raises
    ------
    PreconditionError
        If another fixed point lies inside the circle at the smallest radius.
    NumericalError
        If the winding number stays ambiguous.
    """
    center = location.as_array()
    if others is None:
        others = solve_fixed_points(params)
    distances = [np.linalg.norm(center - np.asarray(o)) for o in others]
    nearest = min((d for d in distances if d > 1e-8), default=math.inf)
    for attempt in range(INDEX_HALVINGS + 1):
        if nearest > 10.0 * radius:
            winding = _circle_winding(center, params, radius, samples)
            if winding in (-1, 1):
                return winding
            logger.debug(f"ambiguous winding {winding} at radius {radius:.2e}")
        radius *= 0.5
    if nearest <= 10.0 * radius * 2:
        raise PreconditionError(
            f"fixed point at {location} is not isolated (neighbor at distance {nearest:.3e})")
    raise NumericalError(
        f"ambiguous winding number at {location}; retry with a smaller radius")


def region_of(params: SystemParams) -> RegionLabel:
    """Region of the unbiased parameter plane.

    Raises
    ------
    PreconditionError
        If epsilon is not zero.
    """
    if params.epsilon != 0.0:
        raise PreconditionError("parameter regions are defined for epsilon = 0 only")
    v, gamma, g = params.v, params.gamma, params.g
    flags = set()
    if abs(gamma * gamma + g * g - v * v) <= BOUNDARY_TOL:
        flags.add("interaction_circle")
    if abs(gamma - v) <= BOUNDARY_TOL:
        flags.add("exceptional_line")
    if gamma <= BOUNDARY_TOL:
        flags.add("hermitian")
    if gamma > v:
        region = Region.R3
    elif gamma * gamma + g * g <= v * v:
        region = Region.R1
    else:
        region = Region.R2
    return RegionLabel(region, frozenset(flags))


def critical_interaction(params: SystemParams) -> float:
    """Interaction g_crit = sqrt(v^2 - gamma^2) where two further fixed points appear."""
    if params.gamma > params.v:
        raise PreconditionError("no critical interaction for gamma > v")
    return math.sqrt(params.v ** 2 - params.gamma ** 2)


def meanfield_energies(params: SystemParams) -> List[complex]:
    """Values H - i Gamma of the Hamiltonian function at all fixed points."""
    return [hamiltonian_value(s, params).value for s in solve_fixed_points(params)]


def analyze(params: SystemParams, strict: bool = True) -> FixedPointReport:
    """Solve, classify and index all fixed points.

    Raises
    ------
    ConsistencyError
        With ``strict``, if a measured index contradicts the classified kind
        or the indices do not add up to 2.
    """
    locations = solve_fixed_points(params)
    fixed_points = []
    for location in locations:
        fp = classify(location, params)
        index = poincare_index(location, params, others=locations)
        if index != fp.kind.index:
            message = f"index {index} contradicts kind {fp.kind.value} at {location}"
            if strict:
                raise ConsistencyError(message)
            logger.warning(message)
        fixed_points.append(fp._replace(index=index))
    index_sum = sum(fp.index for fp in fixed_points)
    if index_sum != 2:
        message = f"fixed point indices add up to {index_sum} for {params}"
        if strict:
            raise ConsistencyError(message)
        logger.warning(message)
    region = region_of(params) if params.epsilon == 0.0 else None
    return FixedPointReport(params, fixed_points, region, index_sum)


def locate_count_change(params: SystemParams, field: str, lower: float, upper: float,
                        tol: float = 1e-4) -> float:
    """Bisect in one parameter for the value where the number of fixed points changes.

    Raises
    ------
    PreconditionError
        If the counts at both ends agree.
    """
    def count(value: float) -> int:
        return len(solve_fixed_points(params.with_(**{field: value})))

    count_lower, count_upper = count(lower), count(upper)
    if count_lower == count_upper:
        raise PreconditionError(
            f"fixed point count {count_lower} is the same at {field}={lower} and {field}={upper}")
    while upper - lower > tol:
        middle = 0.5 * (lower + upper)
        if count(middle) == count_lower:
            lower = middle
        else:
            upper = middle
    return 0.5 * (lower + upper)
