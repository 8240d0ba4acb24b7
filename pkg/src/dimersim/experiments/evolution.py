"""Time evolution tables: mean field, many particles, their comparison,
the two-level system and the norm decay at the poles."""

__all__ = [
    'evolve_meanfield',
    'evolve_manybody',
    'compare_mp_mf',
    'evolve_linear2',
    'norm_decay',
    'EvolveMeanFieldExperiment',
    'EvolveManyBodyExperiment',
    'CompareExperiment',
    'EvolveLinearExperiment',
    'NormDecayExperiment',
]

import logging
import math
from typing import Sequence

import numpy as np
import pandas as pd

from ..config import default_t_max
from ..core import ConfigError, SpinorState, SystemParams, Variant, bloch_from_angles
from ..linear2 import propagate_linear
from ..manybody import coherent_state, expectations, propagate, rescaled_norm
from ..meanfield import Formulation, hamiltonian_value, integrate_meanfield
from . import Experiment

logger = logging.getLogger(__name__)

LINEAR_GAMMAS = (0.1, 0.5, 1.0, 1.5)


def evolve_meanfield(params: SystemParams, theta: float, phi: float,
                     t_grid: Sequence[float],
                     formulation: Formulation = Formulation.BLOCH) -> pd.DataFrame:
    """Mean-field trajectory from the sphere point (theta, phi).

    Columns: t, sx, sy, sz, norm, energy_re, energy_im.
    """
    trajectory = integrate_meanfield(bloch_from_angles(theta, phi), params, t_grid,
                                     formulation=formulation)
    trajectory.validate()
    df = trajectory.to_frame()
    energies = [hamiltonian_value(s, params).value for s in trajectory.states]
    df['energy_re'] = [e.real for e in energies]
    df['energy_im'] = [e.imag for e in energies]
    return df


def evolve_manybody(params: SystemParams, n_particles: int, theta: float, phi: float,
                    t_grid: Sequence[float]) -> pd.DataFrame:
    """Many-particle dynamics from a coherent state.

    Columns: t, lx, ly, lz, norm, rescaled_norm.
    """
    states = propagate(coherent_state(theta, phi, n_particles), params, t_grid)
    rows = []
    for t, state in zip(t_grid, states):
        exp = expectations(state)
        rows.append({
            't': float(t),
            'lx': exp.lx,
            'ly': exp.ly,
            'lz': exp.lz,
            'norm': math.exp(state.log_norm()),
            'rescaled_norm': rescaled_norm(state),
        })
    return pd.DataFrame(rows, columns=['t', 'lx', 'ly', 'lz', 'norm', 'rescaled_norm'])


def compare_mp_mf(params: SystemParams, n_particles: int, theta: float, phi: float,
                  t_grid: Sequence[float]) -> pd.DataFrame:
    """Mean-field and many-particle dynamics from matching initial conditions.

    The coherent state at (theta, phi) is matched with the Bloch vector of
    the same point; the many-particle Bloch image is <L>/N and its norm is
    rescaled as <Psi|Psi>^(1/N).
    """
    mf = integrate_meanfield(bloch_from_angles(theta, phi), params, t_grid)
    mp = evolve_manybody(params, n_particles, theta, phi, t_grid)
    return pd.DataFrame({
        't': np.asarray(t_grid, dtype=float),
        'mf_sx': mf.states[:, 0],
        'mf_sy': mf.states[:, 1],
        'mf_sz': mf.states[:, 2],
        'mp_sx': mp['lx'].to_numpy() / n_particles,
        'mp_sy': mp['ly'].to_numpy() / n_particles,
        'mp_sz': mp['lz'].to_numpy() / n_particles,
        'mf_norm': mf.norms,
        'mp_rescaled_norm': mp['rescaled_norm'].to_numpy(),
    })


def evolve_linear2(params: SystemParams, t_grid: Sequence[float],
                   gammas: Sequence[float] = LINEAR_GAMMAS) -> pd.DataFrame:
    """Two-level populations and norm for both variants, starting in level 1."""
    frames = []
    psi0 = SpinorState(1.0 + 0j, 0j)
    for gamma in gammas:
        for variant in Variant:
            df = propagate_linear(psi0, params.with_(gamma=gamma, variant=variant), t_grid)
            df.insert(0, 'variant', variant.value)
            df.insert(0, 'gamma', gamma)
            frames.append(df)
    return pd.concat(frames, ignore_index=True)


def norm_decay(params: SystemParams, t_grid: Sequence[float]) -> pd.DataFrame:
    """Survival probability for starts at the north and south pole, with the
    configured interaction and without it."""
    frames = []
    for start, theta in (('north', 0.0), ('south', math.pi)):
        for g in sorted({0.0, params.g}):
            trajectory = integrate_meanfield(bloch_from_angles(theta, 0.0),
                                             params.with_(g=g), t_grid)
            frames.append(pd.DataFrame({
                'start': start,
                'g': g,
                't': trajectory.times,
                'sz': trajectory.states[:, 2],
                'norm': trajectory.norms,
            }))
    return pd.concat(frames, ignore_index=True)


def _require_particles(params: SystemParams) -> int:
    if params.n_particles is None:
        raise ConfigError("this command needs --n-particles")
    return params.n_particles


class EvolveMeanFieldExperiment(Experiment):
    name = 'evolve-mf'

    def run(self) -> dict:
        return {self.name: evolve_meanfield(self.params, self.config.theta0, self.config.phi0,
                                            self.config.time_grid(),
                                            Formulation(self.config.formulation))}


class EvolveManyBodyExperiment(Experiment):
    name = 'evolve-mp'

    def run(self) -> dict:
        n = _require_particles(self.params)
        return {self.name: evolve_manybody(self.params, n, self.config.theta0,
                                           self.config.phi0, self.config.time_grid())}


class CompareExperiment(Experiment):
    name = 'compare'

    def run(self) -> dict:
        n = _require_particles(self.params)
        return {self.name: compare_mp_mf(self.params, n, self.config.theta0,
                                         self.config.phi0, self.config.time_grid())}


class EvolveLinearExperiment(Experiment):
    name = 'evolve-linear'

    def run(self) -> dict:
        t_max = self.config.t_max if self.config.t_max is not None else 10.0
        t_grid = np.linspace(0.0, t_max, self.config.n_times)
        return {self.name: evolve_linear2(self.params, t_grid)}


class NormDecayExperiment(Experiment):
    name = 'norm-decay'

    def run(self) -> dict:
        t_max = (self.config.t_max if self.config.t_max is not None
                 else min(default_t_max(self.params.gamma), 100.0))
        t_grid = np.linspace(0.0, t_max, self.config.n_times)
        return {self.name: norm_decay(self.params, t_grid)}
