"""
Half-life landscapes: the time at which the survival probability of a
state started at a given point of the Bloch sphere first drops to 1/2.

The mean-field map locates the crossing with an ODE event on log n; the
many-particle map propagates all coherent initial states of the grid
together, column by column in a single matrix, and bisects the step in
which the rescaled norm <Psi|Psi>^(1/N) crosses 1/2.
"""

__all__ = [
    'halflife_grid',
    'meanfield_half_life',
    'halflife_meanfield',
    'halflife_manybody',
    'HalfLifeMeanFieldExperiment',
    'HalfLifeManyBodyExperiment',
]

import logging
import math
from typing import Optional, Tuple

import numpy as np
from scipy.optimize import brentq

from ..config import default_t_max
from ..core import ConfigError, PreconditionError, SystemParams, bloch_from_angles
from ..manybody import AmplificationMonitor, build_hamiltonian, coherent_state
from ..meanfield import bloch_log_norm_rhs, project_bloch_state
from ..numerics import DEFAULT_ATOL, DEFAULT_RTOL, EVENT_XTOL, OdeEvent, expm, integrate_ode
from . import HALF_LIFE_SENTINEL, Experiment, HalfLifeMap, parallel_map

logger = logging.getLogger(__name__)

LOG_HALF = math.log(0.5)


def halflife_grid(n_theta: int, n_phi: int) -> Tuple[np.ndarray, np.ndarray]:
    """Polar angles including both poles and azimuths covering [0, 2 pi)."""
    return np.linspace(0.0, math.pi, n_theta), np.linspace(0.0, 2 * math.pi, n_phi,
                                                            endpoint=False)


def meanfield_half_life(theta: float, phi: float, params: SystemParams, t_max: float,
                        rtol: float = DEFAULT_RTOL, atol: float = DEFAULT_ATOL) -> float:
    """Mean-field half-life from (theta, phi), or the sentinel if n stays above 1/2."""
    if params.gamma == 0.0:
        return HALF_LIFE_SENTINEL
    s0 = bloch_from_angles(theta, phi)
    event = OdeEvent(lambda t, y: y[3] - LOG_HALF, terminal=True, direction=-1)
    result = integrate_ode(bloch_log_norm_rhs(params), np.append(s0.as_array(), 0.0),
                           (0.0, t_max), events=[event], rtol=rtol, atol=atol,
                           project=project_bloch_state)
    if result.t_events[0].size:
        return float(result.t_events[0][0])
    return HALF_LIFE_SENTINEL


def halflife_meanfield(params: SystemParams, n_theta: int = 20, n_phi: int = 20,
                       t_max: Optional[float] = None, threads: Optional[int] = None,
                       rtol: float = DEFAULT_RTOL, atol: float = DEFAULT_ATOL) -> HalfLifeMap:
    """Mean-field half-life map over a (theta, phi) grid."""
    t_max = default_t_max(params.gamma) if t_max is None else t_max
    thetas, phis = halflife_grid(n_theta, n_phi)
    cells = [(theta, phi) for theta in thetas for phi in phis]
    values = parallel_map(
        lambda cell: meanfield_half_life(cell[0], cell[1], params, t_max, rtol, atol),
        cells, desc="Mean-field half-lives", threads=threads)
    half_lives = np.asarray(values, dtype=float).reshape(n_theta, n_phi)
    n_capped = int(np.sum(half_lives == HALF_LIFE_SENTINEL))
    if n_capped and params.gamma > 0:
        logger.warning(f"{n_capped} of {half_lives.size} cells capped at t_max={t_max}")
    return HalfLifeMap(thetas, phis, half_lives, params, t_max)


def halflife_manybody(params: SystemParams, n_particles: int, n_theta: int = 20,
                      n_phi: int = 20, t_max: Optional[float] = None,
                      dt: Optional[float] = None) -> HalfLifeMap:
    """Half-life map of the rescaled many-particle norm over a (theta, phi) grid.

    Parameters
    ----------
    dt :
        Coarse time step used to bracket the crossing; defaults to
        0.05 / max(v, gamma, |g|).
    """
    if n_particles < 1:
        raise PreconditionError("n_particles must be at least 1")
    t_max = default_t_max(params.gamma) if t_max is None else t_max
    thetas, phis = halflife_grid(n_theta, n_phi)
    half_lives = np.full((n_theta, n_phi), HALF_LIFE_SENTINEL)
    if params.gamma == 0.0:
        return HalfLifeMap(thetas, phis, half_lives, params, t_max)

    dt = 0.05 / max(params.v, params.gamma, abs(params.g)) if dt is None else dt
    ham = build_hamiltonian(params, n_particles)
    step = expm(-1j * ham * dt)
    cells = [(i, j) for i in range(n_theta) for j in range(n_phi)]
    amps = np.column_stack([coherent_state(thetas[i], phis[j], n_particles).amplitudes
                            for i, j in cells])
    log_scale = np.zeros(len(cells))
    active = np.ones(len(cells), dtype=bool)
    target = n_particles * LOG_HALF
    monitor = AmplificationMonitor(n_particles + 1)
    t = 0.0
    while t < t_max and np.any(active):
        previous = amps[:, active].copy()
        previous_scale = log_scale[active].copy()
        amps[:, active] = step @ amps[:, active]
        weight = np.linalg.norm(amps[:, active], axis=0)
        amps[:, active] /= weight
        log_scale[active] += np.log(weight)
        monitor.step(step)
        monitor.record(float(np.min(log_scale[active])))
        t_next = t + dt
        crossed = np.flatnonzero(2.0 * log_scale[active] <= target)
        indices = np.flatnonzero(active)
        for local in crossed:
            cell = indices[local]
            psi, scale = previous[:, local], previous_scale[local]

            def excess(tau, _psi=psi, _scale=scale):
                out = expm(-1j * ham * tau) @ _psi
                return 2.0 * _scale + math.log(float(np.vdot(out, out).real)) - target

            tau = brentq(excess, 0.0, dt, xtol=EVENT_XTOL) if excess(0.0) > 0 else 0.0
            i, j = cells[cell]
            half_lives[i, j] = t + tau if t + tau <= t_max else HALF_LIFE_SENTINEL
            active[cell] = False
        t = t_next
    monitor.check(f"half-life map N={n_particles}")
    logger.info(f"Many-particle half-life map N={n_particles}: "
                f"{int(np.sum(half_lives == HALF_LIFE_SENTINEL))} capped cells")
    return HalfLifeMap(thetas, phis, half_lives, params, t_max)


class HalfLifeMeanFieldExperiment(Experiment):
    name = 'halflife-mf'

    def run(self) -> dict:
        n_theta, n_phi = self.config.grid
        hl_map = halflife_meanfield(self.params, n_theta, n_phi, self.config.t_max,
                                    threads=self.threads, rtol=self.config.rtol,
                                    atol=self.config.atol)
        return {self.name: hl_map.to_frame()}


class HalfLifeManyBodyExperiment(Experiment):
    name = 'halflife-mp'

    def run(self) -> dict:
        if self.params.n_particles is None:
            raise ConfigError("halflife-mp needs --n-particles")
        n_theta, n_phi = self.config.grid
        hl_map = halflife_manybody(self.params, self.params.n_particles, n_theta, n_phi,
                                   self.config.t_max)
        return {self.name: hl_map.to_frame()}
