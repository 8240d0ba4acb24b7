"""Many-particle spectra along a parameter sweep, with mean-field energies."""

__all__ = ['spectrum_sweep', 'match_branches', 'SpectrumExperiment']

import logging
from typing import Optional, Tuple

import numpy as np
import pandas as pd
from scipy.optimize import linear_sum_assignment

from ..config import SweepSpec
from ..core import ConfigError, NumericalError, SystemParams
from ..fixedpoints import meanfield_energies
from ..manybody import build_hamiltonian
from ..numerics import eig_complex, sorted_spectrum
from . import Experiment, parallel_map

logger = logging.getLogger(__name__)

COLLISION_TOL = 1e-6


def match_branches(previous: np.ndarray, current: np.ndarray) -> np.ndarray:
    """Reorder ``current`` so each entry continues the nearest branch of ``previous``."""
    cost = np.abs(previous[:, None] - current[None, :])
    rows, cols = linear_sum_assignment(cost)
    ordered = np.empty_like(current)
    ordered[rows] = current[cols]
    return ordered


def _eigenvalues(params: SystemParams, n_particles: int) -> Tuple[np.ndarray, bool]:
    try:
        spectrum = eig_complex(build_hamiltonian(params, n_particles))
    except NumericalError as err:
        logger.warning(f"eigenvalue computation failed at {params}: {err}")
        return np.full(n_particles + 1, np.nan + 1j * np.nan), True
    return spectrum.eigenvalues, False


def spectrum_sweep(spec: SweepSpec, params: SystemParams, n_particles: int,
                   include_meanfield: bool = False,
                   threads: Optional[int] = None) -> Tuple[pd.DataFrame, Optional[pd.DataFrame]]:
    """Eigenvalues of the many-particle Hamiltonian along a sweep.

    Branches are continued by nearest-neighbour matching between adjacent
    sweep points. Points where two eigenvalues nearly coincide are marked in
    the ``collision`` column since branch labels may swap there.

    Returns
    -------
    :
        A wide table with columns ``<name>, flagged, collision, re_0.., im_0..``
        and, if requested, a long table of mean-field energies
        (``<name>, branch, re, im``) evaluated at the macroscopic g.
    """
    values = spec.values()
    points = [params.with_(**{spec.name: float(value)}) for value in values]
    results = parallel_map(lambda p: _eigenvalues(p, n_particles), points,
                           desc="Spectrum sweep", threads=threads)

    rows = []
    previous = None
    for value, (eigenvalues, flagged) in zip(values, results):
        if previous is None or flagged or np.any(np.isnan(previous)):
            ordered = sorted_spectrum(eigenvalues) if not flagged else eigenvalues
        else:
            ordered = match_branches(previous, eigenvalues)
        scale = max(1.0, float(np.nanmax(np.abs(ordered)))) if not flagged else 1.0
        gaps = np.abs(ordered[:, None] - ordered[None, :])
        np.fill_diagonal(gaps, np.inf)
        collision = bool(not flagged and np.min(gaps) <= COLLISION_TOL * scale)
        row = {spec.name: value, 'flagged': flagged, 'collision': collision}
        row.update({f're_{k}': ev.real for k, ev in enumerate(ordered)})
        row.update({f'im_{k}': ev.imag for k, ev in enumerate(ordered)})
        rows.append(row)
        previous = ordered
    n_flagged = sum(row['flagged'] for row in rows)
    if n_flagged:
        logger.warning(f"{n_flagged} of {len(rows)} sweep points flagged")
    eigen_df = pd.DataFrame(rows)

    energy_df = None
    if include_meanfield:
        energy_rows = []
        for value, p in zip(values, points):
            for branch, energy in enumerate(meanfield_energies(p)):
                energy_rows.append({spec.name: value, 'branch': branch,
                                    're': energy.real, 'im': energy.imag})
        energy_df = pd.DataFrame(energy_rows, columns=[spec.name, 'branch', 're', 'im'])
    return eigen_df, energy_df


class SpectrumExperiment(Experiment):
    name = 'spectrum'

    def run(self) -> dict:
        if self.config.sweep is None:
            raise ConfigError("spectrum needs a --sweep")
        if self.params.n_particles is None:
            raise ConfigError("spectrum needs --n-particles")
        eigen_df, energy_df = spectrum_sweep(self.config.sweep, self.params,
                                             self.params.n_particles,
                                             include_meanfield=self.config.meanfield_energies,
                                             threads=self.threads)
        artifacts: dict = {self.name: eigen_df}
        if energy_df is not None:
            artifacts['meanfield'] = energy_df
        return artifacts
