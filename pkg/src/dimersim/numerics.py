"""
Numerical kernels: dense complex eigenproblems, matrix exponentials,
adaptive Runge-Kutta integration with events, and polynomial roots.

The heavy lifting is done by LAPACK (through :mod:`scipy.linalg`) and by the
Dormand-Prince 5(4) stepper of :mod:`scipy.integrate`. This module adds the
contracts the rest of the package relies on: residual checks and
conditioning flags for eigenpairs, overflow detection for exponentials,
per-step projection and bisection-located events for ODEs, and cluster-aware
root extraction for quartics.
"""

__all__ = [
    "ComplexSpectrum",
    "OdeEvent",
    "OdeResult",
    "DEFAULT_RTOL",
    "DEFAULT_ATOL",
    "EVENT_XTOL",
    "eig_complex",
    "expm",
    "integrate_ode",
    "roots_quartic",
    "real_roots",
    "sorted_spectrum",
    "polyval_desc",
]

import logging
from typing import Callable, List, NamedTuple, Optional, Sequence

import numpy as np
import scipy.linalg
from scipy.integrate import RK45, DOP853, OdeSolution
from scipy.optimize import brentq

from .core import NumericalError, PreconditionError

logger = logging.getLogger(__name__)

DEFAULT_RTOL = 1e-9
DEFAULT_ATOL = 1e-10
EVENT_XTOL = 1e-12

MAX_DENSE_DIMENSION = 2000
EIG_RESIDUAL_THRESHOLD = 1e-8
EIG_CONDITION_THRESHOLD = 1e8

REAL_ROOT_TOL = 1e-8

_STEPPERS = {"RK45": RK45, "DOP853": DOP853}


class ComplexSpectrum(NamedTuple):
    """Eigenvalues of a complex matrix with optional right eigenvectors.

    ``flagged`` marks eigenpairs whose residual or eigenvalue condition
    number indicates a (nearly) defective matrix, e.g. close to an
    exceptional point.
    """

    eigenvalues: np.ndarray
    eigenvectors: Optional[np.ndarray]
    residuals: Optional[np.ndarray]
    flagged: np.ndarray


def _as_square(A) -> np.ndarray:
    arr = np.asarray(A, dtype=complex)
    if arr.ndim != 2 or arr.shape[0] != arr.shape[1] or arr.shape[0] < 1:
        raise PreconditionError(f"expected a non-empty square matrix, got shape {arr.shape}")
    if not np.all(np.isfinite(arr)):
        raise PreconditionError("matrix has non-finite entries")
    return arr


def eig_complex(A, vectors: bool = True) -> ComplexSpectrum:
    """Eigen-decomposition of a dense complex (non-Hermitian) matrix.

    Parameters
    ----------
    A :
        Square complex matrix of dimension at most 2000.
    vectors :
        If True, right eigenvectors (columns) and per-pair residuals
        ||A v - lambda v|| / (||A|| ||v||) are returned.

    Returns
    -------
    ComplexSpectrum
        Eigenvalues in LAPACK order; pairs with a residual above 1e-8 or an
        eigenvalue condition number above 1e8 are flagged, not rejected.
    """
    arr = _as_square(A)
    dim = arr.shape[0]
    if dim > MAX_DENSE_DIMENSION:
        raise PreconditionError(
            f"dense eigensolver limited to dimension {MAX_DENSE_DIMENSION}, got {dim}")
    try:
        if vectors:
            w, vl, vr = scipy.linalg.eig(arr, left=True, right=True)
        else:
            w = scipy.linalg.eigvals(arr)
    except scipy.linalg.LinAlgError as err:
        raise NumericalError(f"eigenvalue iteration failed to converge: {err}") from err

    if not vectors:
        return ComplexSpectrum(w, None, None, np.zeros(dim, dtype=bool))

    scale = max(np.linalg.norm(arr, 2), np.finfo(float).tiny)
    residuals = np.linalg.norm(arr @ vr - vr * w, axis=0) / (
        scale * np.linalg.norm(vr, axis=0))
    overlap = np.abs(np.sum(vl.conj() * vr, axis=0)) / (
        np.linalg.norm(vl, axis=0) * np.linalg.norm(vr, axis=0))
    with np.errstate(divide="ignore"):
        condition = np.where(overlap > 0, 1.0 / overlap, np.inf)
    flagged = (residuals > EIG_RESIDUAL_THRESHOLD) | (condition > EIG_CONDITION_THRESHOLD)
    if np.any(flagged):
        logger.debug(f"{int(flagged.sum())} of {dim} eigenpairs flagged as near-defective")
    return ComplexSpectrum(w, vr, residuals, flagged)


def expm(A) -> np.ndarray:
    """Matrix exponential by scaling and squaring with a Padé approximant.

    Raises
    ------
    NumericalError
        If the result overflows.
    """
    arr = _as_square(A)
    with np.errstate(over="ignore", invalid="ignore"):
        result = scipy.linalg.expm(arr)
    if not np.all(np.isfinite(result)):
        raise NumericalError(
            f"matrix exponential overflowed (1-norm of argument {np.linalg.norm(arr, 1):.3e})")
    return result


class OdeEvent:
    """Scalar event function g(t, y) located by bisection when it changes sign.

    Parameters
    ----------
    func :
        The event function.
    terminal :
        Stop the integration at the first occurrence.
    direction :
        Only crossings with this sign of slope count (0 for both).
    """

    def __init__(self, func: Callable[[float, np.ndarray], float],
                 terminal: bool = False, direction: int = 0):
        self.func = func
        self.terminal = terminal
        self.direction = direction

    def __call__(self, t: float, y: np.ndarray) -> float:
        return float(self.func(t, y))


class OdeResult(NamedTuple):
    """Result of :func:`integrate_ode`.

    ``t`` and ``y`` hold the samples requested via ``t_eval`` (y has shape
    (len(t), dim)); ``t_events``/``y_events`` list the located events per
    event function; ``sol`` is the dense output over the integrated range.
    """

    t: np.ndarray
    y: np.ndarray
    t_events: List[np.ndarray]
    y_events: List[np.ndarray]
    sol: Optional[OdeSolution]
    terminated: bool
    n_steps: int


def integrate_ode(
    rhs: Callable[[float, np.ndarray], np.ndarray],
    y0: Sequence[float],
    t_span: Sequence[float],
    t_eval: Optional[Sequence[float]] = None,
    events: Sequence[OdeEvent] = (),
    rtol: float = DEFAULT_RTOL,
    atol: float = DEFAULT_ATOL,
    project: Optional[Callable[[np.ndarray], np.ndarray]] = None,
    max_step: float = np.inf,
    method: str = "RK45",
) -> OdeResult:
    """Integrate y' = rhs(t, y) with an embedded Runge-Kutta pair.

    The stepper is advanced one accepted step at a time. After each step the
    optional ``project`` callback maps the state back onto its constraint
    manifold, requested samples are taken from the step interpolant, and
    sign changes of the event functions are located to 1e-12 in time.

    Raises
    ------
    NumericalError
        If the step size underflows; ``last_time`` holds the last valid time.
    """
    t0, t_bound = float(t_span[0]), float(t_span[1])
    direction = 1.0 if t_bound >= t0 else -1.0
    try:
        stepper_cls = _STEPPERS[method]
    except KeyError:
        raise PreconditionError(f"unknown integration method {method!r}") from None

    y_start = np.asarray(y0, dtype=float)
    if project is not None:
        y_start = project(y_start)
    if t_eval is None:
        samples = np.empty(0)
    else:
        samples = np.asarray(t_eval, dtype=float)
        if samples.size and np.any(direction * np.diff(samples) < 0):
            raise PreconditionError("t_eval must be monotone in the integration direction")

    out_t: List[float] = []
    out_y: List[np.ndarray] = []
    next_sample = 0
    while next_sample < samples.size and direction * (samples[next_sample] - t0) < 0:
        next_sample += 1
    if next_sample < samples.size and samples[next_sample] == t0:
        out_t.append(t0)
        out_y.append(y_start.copy())
        next_sample += 1

    t_events: List[List[float]] = [[] for _ in events]
    y_events: List[List[np.ndarray]] = [[] for _ in events]
    g_prev = [event(t0, y_start) for event in events]

    ts = [t0]
    interpolants = []
    terminated = False
    n_steps = 0

    if t_bound == t0:
        return OdeResult(np.asarray(out_t), np.asarray(out_y).reshape(len(out_t), y_start.size),
                         [np.asarray(e) for e in t_events],
                         [np.asarray(e) for e in y_events], None, False, 0)

    solver = stepper_cls(rhs, t0, y_start, t_bound, rtol=rtol, atol=atol, max_step=max_step)
    while solver.status == "running":
        t_old = solver.t
        message = solver.step()
        if solver.status == "failed":
            raise NumericalError(f"ODE integration failed at t={t_old}: {message}", last_time=t_old)
        n_steps += 1
        interpolant = solver.dense_output()
        if project is not None:
            solver.y = project(solver.y)
            solver.f = solver.fun(solver.t, solver.y)
        t_new = solver.t

        t_stop = t_new
        for k, event in enumerate(events):
            g_new = event(t_new, solver.y)
            crossing = (g_prev[k] <= 0 < g_new) or (g_prev[k] >= 0 > g_new)
            if g_prev[k] == 0 and g_new == 0:
                crossing = False
            slope_ok = (event.direction == 0
                        or np.sign(g_new - g_prev[k]) * direction == np.sign(event.direction))
            if crossing and slope_ok:
                def _root(t, _event=event, _interp=interpolant):
                    return _event(t, _interp(t))
                if g_prev[k] == 0:
                    t_root = t_old
                else:
                    t_root = brentq(_root, min(t_old, t_new), max(t_old, t_new),
                                    xtol=EVENT_XTOL, rtol=4 * np.finfo(float).eps)
                t_events[k].append(t_root)
                y_events[k].append(interpolant(t_root))
                if event.terminal:
                    terminated = True
                    if direction * (t_root - t_stop) < 0:
                        t_stop = t_root
            g_prev[k] = g_new

        while (next_sample < samples.size
               and direction * (samples[next_sample] - t_stop) <= 0):
            t_s = samples[next_sample]
            y_s = solver.y.copy() if t_s == t_new else interpolant(t_s)
            if project is not None:
                y_s = project(y_s)
            out_t.append(t_s)
            out_y.append(y_s)
            next_sample += 1

        ts.append(t_new)
        interpolants.append(interpolant)
        if terminated:
            break

    dim = y_start.size
    dense = OdeSolution(ts, interpolants) if interpolants else None
    return OdeResult(
        t=np.asarray(out_t, dtype=float),
        y=np.asarray(out_y, dtype=float).reshape(len(out_t), dim),
        t_events=[np.asarray(e, dtype=float) for e in t_events],
        y_events=[np.asarray(e, dtype=float).reshape(len(e), dim) for e in y_events],
        sol=dense,
        terminated=terminated,
        n_steps=n_steps,
    )


def polyval_desc(coeffs: Sequence[float], x):
    """Evaluate a polynomial with coefficients in descending order (Horner)."""
    result = 0.0 * x
    for c in coeffs:
        result = result * x + c
    return result


def _companion(monic_tail: np.ndarray) -> np.ndarray:
    """Companion matrix of x^n + a_{n-1} x^{n-1} + ... + a_0 (tail = a_{n-1}..a_0)."""
    n = monic_tail.size
    comp = np.zeros((n, n), dtype=complex)
    comp[0, :] = -monic_tail
    if n > 1:
        comp[np.arange(1, n), np.arange(0, n - 1)] = 1.0
    return comp


def _refine_clusters(coeffs: np.ndarray, roots: np.ndarray) -> np.ndarray:
    """Collapse clusters of roots that stem from a multiple root.

    A cluster of m roots is replaced by the Newton-refined simple root of the
    (m-1)-th derivative when that improves the polynomial residual; genuine
    close pairs keep their individual values.
    """
    n = roots.size
    if n < 2:
        return roots
    refined = roots.copy()
    used = np.zeros(n, dtype=bool)
    for i in range(n):
        if used[i]:
            continue
        members = [j for j in range(n)
                   if not used[j] and abs(roots[j] - roots[i]) <= 1e-3 * (1 + abs(roots[i]))]
        if len(members) < 2:
            continue
        m = len(members)
        deriv = np.asarray(coeffs, dtype=complex)
        for _ in range(m - 1):
            deriv = np.polyder(deriv)
        d1 = np.polyder(deriv)
        z = np.mean(roots[members])
        for _ in range(20):
            slope = polyval_desc(d1, z)
            if slope == 0:
                break
            step = polyval_desc(deriv, z) / slope
            z -= step
            if abs(step) <= 1e-16 * (1 + abs(z)):
                break
        merged_res = abs(polyval_desc(coeffs, z))
        member_res = max(abs(polyval_desc(coeffs, roots[j])) for j in members)
        if merged_res <= member_res:
            refined[members] = z
        used[members] = True
    return refined


def roots_quartic(c4: float, c3: float, c2: float, c1: float, c0: float) -> np.ndarray:
    """All complex roots of c4 x^4 + c3 x^3 + c2 x^2 + c1 x + c0.

    Roots are the eigenvalues of the companion matrix. Vanishing leading
    coefficients reduce the degree (so fewer than four roots are returned);
    vanishing trailing coefficients contribute exact zero roots.

    Raises
    ------
    PreconditionError
        If all coefficients vanish.
    """
    coeffs = np.array([c4, c3, c2, c1, c0], dtype=float)
    if not np.all(np.isfinite(coeffs)):
        raise PreconditionError("polynomial coefficients must be finite")
    if not np.any(coeffs):
        raise PreconditionError("the zero polynomial has no well-defined roots")
    coeffs = np.trim_zeros(coeffs, "f")
    trimmed = np.trim_zeros(coeffs, "b")
    n_zero = coeffs.size - trimmed.size
    roots = np.zeros(n_zero, dtype=complex)
    if trimmed.size > 1:
        tail = trimmed[1:] / trimmed[0]
        found = eig_complex(_companion(tail), vectors=False).eigenvalues
        found = _polish(trimmed, found)
        found = _refine_clusters(trimmed, found)
        roots = np.concatenate([found, roots])

    scale = np.max(np.abs(coeffs))
    worst = max((abs(polyval_desc(coeffs, r)) for r in roots), default=0.0)
    if worst > 1e-10 * scale * max(1.0, max(abs(r) for r in roots) ** (coeffs.size - 1)):
        logger.warning(f"quartic root residual {worst:.3e} exceeds tolerance (scale {scale:.3e})")
    return roots


def _polish(coeffs: np.ndarray, roots: np.ndarray, iterations: int = 3) -> np.ndarray:
    """A few Newton steps on simple roots; steps that raise the residual are rejected."""
    d1 = np.polyder(coeffs)
    polished = roots.astype(complex)
    for k, r in enumerate(polished):
        z = r
        res = abs(polyval_desc(coeffs, z))
        for _ in range(iterations):
            slope = polyval_desc(d1, z)
            if slope == 0:
                break
            candidate = z - polyval_desc(coeffs, z) / slope
            cand_res = abs(polyval_desc(coeffs, candidate))
            if cand_res >= res:
                break
            z, res = candidate, cand_res
        polished[k] = z
    return polished


def real_roots(roots: Sequence[complex], tol: float = REAL_ROOT_TOL) -> np.ndarray:
    """Real parts of the roots whose imaginary part is below tol (1 + |Re r|)."""
    arr = np.asarray(roots, dtype=complex)
    keep = np.abs(arr.imag) <= tol * (1.0 + np.abs(arr.real))
    return np.sort(arr.real[keep])


def sorted_spectrum(values: Sequence[complex]) -> np.ndarray:
    """Sort complex values by real part, then imaginary part."""
    arr = np.asarray(values, dtype=complex)
    order = np.lexsort((arr.imag, np.round(arr.real, 10)))
    return arr[order]
