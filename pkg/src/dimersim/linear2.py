"""
Closed-form physics of the single-particle two-level system.

The PT-symmetric matrix is H_PT = [[zeta, v], [v, -zeta]] with
zeta = epsilon - i gamma; the decaying matrix differs by the constant
offset -i gamma. Since H_PT^2 = omega^2 with omega^2 = zeta^2 + v^2, the
propagator has the closed form cos(omega t) - i H_PT sin(omega t) / omega,
which at the exceptional point (omega = 0) degenerates to 1 - i H_PT t.
"""

__all__ = [
    "TwoLevelEigen",
    "EP_SWITCH",
    "hamiltonian_matrix",
    "eigenvalues_pt",
    "eigenvalues_decaying",
    "is_exceptional",
    "propagator_pt",
    "propagator",
    "bloch_rhs_linear",
    "norm_rate_linear",
    "fixed_points_linear",
    "complete_fixed_points",
    "propagate_linear",
]

import cmath
import logging
import math
from typing import Callable, List, NamedTuple, Optional, Sequence

import numpy as np
import pandas as pd

from .core import (
    BlochVector,
    DomainError,
    SpinorState,
    SystemParams,
    Variant,
    bloch_from_spinor,
)
from .numerics import real_roots, roots_quartic

logger = logging.getLogger(__name__)

#: Below |omega| <= EP_SWITCH * v the exceptional-point form of the propagator is used.
EP_SWITCH = 1e-6
#: Up to |omega| <= SERIES_SWITCH * v the trigonometric factors are series-expanded.
SERIES_SWITCH = 1e-3
EP_EIGEN_TOL = 1e-12


class TwoLevelEigen(NamedTuple):
    """Eigenvalues of the two-level Hamiltonian."""

    lambda_plus: complex
    lambda_minus: complex
    omega: complex
    zeta: complex
    is_ep: bool


def hamiltonian_matrix(params: SystemParams) -> np.ndarray:
    """The 2x2 single-particle Hamiltonian of the selected variant."""
    eps, v, gamma = params.epsilon, params.v, params.gamma
    if params.variant == Variant.PT:
        return np.array([[eps - 1j * gamma, v], [v, -eps + 1j * gamma]], dtype=complex)
    return np.array([[eps - 2j * gamma, v], [v, -eps]], dtype=complex)


def _omega(params: SystemParams) -> complex:
    zeta = params.zeta
    return cmath.sqrt(zeta * zeta + params.v * params.v)


def eigenvalues_pt(params: SystemParams) -> TwoLevelEigen:
    """Eigenvalues +-sqrt((epsilon - i gamma)^2 + v^2).

    For the decaying variant both eigenvalues carry the extra offset
    -i gamma.
    """
    omega = _omega(params)
    shift = -1j * params.gamma if params.variant == Variant.DECAYING else 0.0
    return TwoLevelEigen(
        lambda_plus=omega + shift,
        lambda_minus=-omega + shift,
        omega=omega,
        zeta=params.zeta,
        is_ep=abs(omega) <= EP_EIGEN_TOL * params.v,
    )


def eigenvalues_decaying(params: SystemParams) -> TwoLevelEigen:
    """Eigenvalues of the decaying Hamiltonian regardless of ``params.variant``."""
    return eigenvalues_pt(params.with_(variant=Variant.DECAYING))


def is_exceptional(params: SystemParams) -> bool:
    """True on the exceptional lines epsilon = 0, gamma = v."""
    return eigenvalues_pt(params).is_ep


def _cos_sinc(omega: complex, t: float):
    """cos(omega t) and sin(omega t) / omega, series-expanded for small arguments."""
    x = omega * t
    if abs(x) <= 0.5:
        x2 = x * x
        cos_val = 0.0
        sinc_val = 0.0
        term_c = 1.0
        term_s = 1.0
        for k in range(8):
            cos_val += term_c
            sinc_val += term_s
            term_c *= -x2 / ((2 * k + 1) * (2 * k + 2))
            term_s *= -x2 / ((2 * k + 2) * (2 * k + 3))
        return cos_val, sinc_val * t
    return cmath.cos(x), cmath.sin(x) / omega


def propagator_pt(params: SystemParams, t: float) -> np.ndarray:
    """Time evolution operator exp(-i H_PT t) of the PT-symmetric matrix."""
    if not math.isfinite(t):
        raise DomainError(f"time must be finite, got {t}")
    zeta, v = params.zeta, params.v
    omega = _omega(params)
    if abs(omega) <= EP_SWITCH * v:
        cos_wt, sinc = 1.0, t
    elif abs(omega) <= SERIES_SWITCH * v:
        cos_wt, sinc = _cos_sinc(omega, t)
    else:
        cos_wt, sinc = cmath.cos(omega * t), cmath.sin(omega * t) / omega
    return np.array([
        [cos_wt - 1j * zeta * sinc, -1j * v * sinc],
        [-1j * v * sinc, cos_wt + 1j * zeta * sinc],
    ], dtype=complex)


def propagator(params: SystemParams, t: float) -> np.ndarray:
    """Propagator of the selected variant; the decaying one is U_PT e^{-gamma t}."""
    u = propagator_pt(params, t)
    if params.variant == Variant.DECAYING:
        u = u * math.exp(-params.gamma * t)
    return u


def bloch_rhs_linear(s, params: SystemParams) -> np.ndarray:
    """Renormalized Bloch equations of the two-level system.

    Both variants share this flow since they differ by a constant imaginary
    energy only.
    """
    sx, sy, sz = s
    eps, v, gamma = params.epsilon, params.v, params.gamma
    return np.array([
        -2.0 * eps * sy + 4.0 * gamma * sx * sz,
        2.0 * eps * sx - 2.0 * v * sz + 4.0 * gamma * sy * sz,
        2.0 * v * sy - gamma * (1.0 - 4.0 * sz * sz),
    ])


def norm_rate_linear(s, params: SystemParams, variant: Optional[Variant] = None) -> float:
    """Relative norm change dn/dt / n at the Bloch point ``s``."""
    variant = params.variant if variant is None else Variant(variant)
    sz = s[2]
    if variant == Variant.PT:
        return -4.0 * params.gamma * sz
    return -4.0 * params.gamma * (sz + 0.5)


def complete_fixed_points(
    sz_roots: Sequence[float],
    sy_of: Callable[[float], float],
    rhs: Callable[[BlochVector], np.ndarray],
    scale: float,
) -> List[BlochVector]:
    """Complete s_z roots to fixed points, resolving the sign of s_x by the flow residual."""
    points: List[BlochVector] = []
    for sz in sz_roots:
        if abs(sz) > 0.5 + 1e-10:
            continue
        sz = max(-0.5, min(0.5, sz))
        sy = sy_of(sz)
        sx2 = 0.25 - sy * sy - sz * sz
        if sx2 < -1e-10:
            continue
        sx_abs = math.sqrt(max(0.0, sx2))
        for sx in (sx_abs, -sx_abs):
            candidate = BlochVector(sx, sy, sz)
            residual = float(np.linalg.norm(rhs(candidate)))
            if residual > 1e-8 * scale:
                continue
            if any(np.linalg.norm(np.subtract(candidate, p)) <= 1e-8 for p in points):
                continue
            points.append(candidate)
    return points


def fixed_points_linear(params: SystemParams) -> List[BlochVector]:
    """Fixed points of the renormalized two-level Bloch flow.

    s_z solves 16 gamma^2 s_z^4 + 4 (epsilon^2 + v^2 - gamma^2) s_z^2 - epsilon^2 = 0,
    s_y = gamma (1 - 4 s_z^2) / (2 v) and s_x follows from normalization.
    At the exceptional point the two fixed points coincide and a single
    point is returned.
    """
    eps, v, gamma = params.epsilon, params.v, params.gamma
    roots = roots_quartic(16.0 * gamma ** 2, 0.0, 4.0 * (eps ** 2 + v ** 2 - gamma ** 2),
                          0.0, -eps ** 2)
    points = complete_fixed_points(
        real_roots(roots),
        lambda sz: gamma * (1.0 - 4.0 * sz * sz) / (2.0 * v),
        lambda s: bloch_rhs_linear(s, params),
        max(1.0, abs(eps), v, gamma),
    )
    logger.debug(f"{len(points)} linear fixed points for {params}")
    return points


def propagate_linear(psi0: SpinorState, params: SystemParams,
                     t_grid: Sequence[float]) -> pd.DataFrame:
    """Propagate a spinor in closed form and tabulate populations and norm.

    Returns
    -------
    :
        Columns t, pop1, pop2, norm, sx, sy, sz; the Bloch components are
        those of the renormalized state.
    """
    psi = psi0.as_array()
    rows = []
    for t in t_grid:
        out = propagator(params, float(t)) @ psi
        state = SpinorState(complex(out[0]), complex(out[1]))
        s = bloch_from_spinor(state)
        rows.append({
            "t": float(t),
            "pop1": abs(out[0]) ** 2,
            "pop2": abs(out[1]) ** 2,
            "norm": state.norm,
            "sx": s.sx,
            "sy": s.sy,
            "sz": s.sz,
        })
    return pd.DataFrame(rows, columns=["t", "pop1", "pop2", "norm", "sx", "sy", "sz"])
