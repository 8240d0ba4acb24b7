"""
Damped self-trapping: s_z(t) as a function of the interaction g, and the
interaction g_sep above which a state started at the south pole no longer
reaches the northern hemisphere.
"""

__all__ = [
    'SelfTrappingResult',
    'selftrapping_map',
    'oscillation_period',
    'reaches_north',
    'separatrix_interaction',
    'SelfTrapExperiment',
]

import logging
import math
from typing import NamedTuple, Optional, Sequence

import numpy as np
import pandas as pd
from scipy.signal import find_peaks

from ..config import SweepSpec
from ..core import BlochVector, ConfigError, SystemParams
from ..meanfield import bloch_log_norm_rhs, integrate_meanfield, project_bloch_state
from ..numerics import OdeEvent, integrate_ode
from . import Experiment, parallel_map

logger = logging.getLogger(__name__)

SOUTH_POLE = BlochVector(0.0, 0.0, -0.5)
G_SEP_TOL = 1e-4


class SelfTrappingResult(NamedTuple):
    """s_z(t) per interaction value with oscillation diagnostics."""

    g_values: np.ndarray
    times: np.ndarray
    sz: np.ndarray
    periods: np.ndarray
    g_sep: Optional[float]

    def to_frame(self) -> pd.DataFrame:
        g, t = np.meshgrid(self.g_values, self.times, indexing='ij')
        return pd.DataFrame({'g': g.ravel(), 't': t.ravel(), 'sz': self.sz.ravel()})

    def summary_frame(self) -> pd.DataFrame:
        return pd.DataFrame({
            'g': self.g_values,
            'max_sz': self.sz.max(axis=1),
            'min_sz': self.sz.min(axis=1),
            'period': self.periods,
        })


def oscillation_period(times: np.ndarray, sz: np.ndarray) -> float:
    """Mean time between successive maxima of s_z, NaN with fewer than two maxima."""
    peaks, _ = find_peaks(sz, prominence=1e-6)
    if peaks.size < 2:
        return math.nan
    return float(np.mean(np.diff(times[peaks])))


def reaches_north(params: SystemParams, s0: BlochVector = SOUTH_POLE,
                  t_window: Optional[float] = None) -> bool:
    """Whether the trajectory from ``s0`` crosses s_z = 0 upwards within the window."""
    t_window = 200.0 / params.v if t_window is None else t_window
    event = OdeEvent(lambda t, y: y[2], terminal=True, direction=1)
    result = integrate_ode(bloch_log_norm_rhs(params), np.append(s0.as_array(), 0.0),
                           (0.0, t_window), events=[event], project=project_bloch_state)
    return bool(result.t_events[0].size)


def separatrix_interaction(params: SystemParams, g_max: float = 64.0,
                           tol: float = G_SEP_TOL) -> Optional[float]:
    """Interaction g_sep where the orbit from the south pole stops reaching s_z > 0.

    Returns
    -------
    :
        g_sep to within ``tol``, or None if the orbit never reaches the
        northern hemisphere, even without interaction.
    """
    if not reaches_north(params.with_(g=0.0)):
        logger.info(f"no oscillatory regime for {params}")
        return None
    lower, upper = 0.0, 1.0
    while reaches_north(params.with_(g=upper)):
        lower, upper = upper, 2.0 * upper
        if upper > g_max:
            logger.warning(f"orbit still oscillates at g={g_max}")
            return None
    while upper - lower > tol:
        middle = 0.5 * (lower + upper)
        if reaches_north(params.with_(g=middle)):
            lower = middle
        else:
            upper = middle
    g_sep = 0.5 * (lower + upper)
    logger.debug(f"g_sep={g_sep:.6f} for {params}")
    return g_sep


def selftrapping_map(params: SystemParams, g_values: Sequence[float],
                     t_grid: Sequence[float], s0: BlochVector = SOUTH_POLE,
                     threads: Optional[int] = None, find_g_sep: bool = True) -> SelfTrappingResult:
    """s_z(t) for every interaction value, started at ``s0``."""
    g_values = np.asarray(g_values, dtype=float)
    times = np.asarray(t_grid, dtype=float)
    rows = parallel_map(
        lambda g: integrate_meanfield(s0, params.with_(g=float(g)), times).states[:, 2],
        g_values, desc="Self-trapping map", threads=threads)
    sz = np.vstack(rows)
    periods = np.array([oscillation_period(times, row) for row in sz])
    g_sep = separatrix_interaction(params) if find_g_sep else None
    return SelfTrappingResult(g_values, times, sz, periods, g_sep)


class SelfTrapExperiment(Experiment):
    name = 'selftrap'

    def run(self) -> dict:
        sweep = self.config.sweep or SweepSpec(name='g', start=0.0, stop=4.0, count=81)
        if sweep.name != 'g':
            raise ConfigError("selftrap sweeps the interaction: use --sweep g:start:stop:count")
        t_max = self.config.t_max if self.config.t_max is not None else 50.0
        t_grid = np.linspace(0.0, t_max, self.config.n_times)
        # always starts at the south pole, the only start with a defined g_sep
        result = selftrapping_map(self.params, sweep.values(), t_grid, threads=self.threads)
        return {
            self.name: result.to_frame(),
            'summary': result.summary_frame(),
            'report': {'params': self.params.model_dump(mode='json'), 'g_sep': result.g_sep},
        }
