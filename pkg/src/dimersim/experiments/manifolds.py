"""Stable and unstable manifolds of the mean-field saddle point."""

__all__ = ['ManifoldBranch', 'find_saddle', 'trace_manifolds', 'ManifoldsExperiment']

import logging
from typing import List, NamedTuple, Optional

import numpy as np
import pandas as pd

from ..core import BlochVector, PreconditionError, SystemParams, project_to_sphere
from ..fixedpoints import FixedPoint, FixpointKind, classify, solve_fixed_points, tangent_basis, tangent_jacobian
from ..meanfield import bloch_rhs_nonlinear
from ..numerics import OdeEvent, eig_complex, integrate_ode
from . import Experiment

logger = logging.getLogger(__name__)

MANIFOLD_OFFSET = 1e-6
ARRIVAL_DISTANCE = 1e-4
N_SAMPLES = 2001


class ManifoldBranch(NamedTuple):
    """One half of a stable or unstable manifold as a polyline on the sphere."""

    name: str
    times: np.ndarray
    points: np.ndarray
    end: str

    def to_frame(self) -> pd.DataFrame:
        return pd.DataFrame({
            'branch': self.name,
            't': self.times,
            'sx': self.points[:, 0],
            'sy': self.points[:, 1],
            'sz': self.points[:, 2],
        })


def find_saddle(params: SystemParams) -> FixedPoint:
    """The saddle of the flow.

    Raises
    ------
    PreconditionError
        If there is no saddle, i.e. outside region R2.
    """
    for location in solve_fixed_points(params):
        fp = classify(location, params)
        if fp.kind is FixpointKind.SADDLE:
            return fp
    raise PreconditionError(f"no saddle point for {params}")


def _directions(saddle: FixedPoint, params: SystemParams):
    """Unit tangent vectors of the unstable and stable eigendirections."""
    spectrum = eig_complex(tangent_jacobian(saddle.location, params))
    order = np.argsort(spectrum.eigenvalues.real)
    basis = tangent_basis(saddle.location)
    stable, unstable = (basis @ spectrum.eigenvectors[:, k].real for k in order)
    return unstable / np.linalg.norm(unstable), stable / np.linalg.norm(stable)


def _trace(name: str, start: np.ndarray, t_max: float, params: SystemParams,
           saddle: np.ndarray, others: List[np.ndarray], offset: float) -> ManifoldBranch:
    # distances shrink along the direction of integration
    approach = -1 if t_max > 0 else 1
    events = [OdeEvent(lambda t, y: np.linalg.norm(y - saddle) - 10.0 * offset,
                       terminal=True, direction=approach)]
    events += [OdeEvent(lambda t, y, _p=p: np.linalg.norm(y - _p) - ARRIVAL_DISTANCE,
                        terminal=True, direction=approach) for p in others]
    result = integrate_ode(lambda t, y: bloch_rhs_nonlinear(y, params), start,
                           (0.0, t_max), t_eval=np.linspace(0.0, t_max, N_SAMPLES),
                           events=events, project=lambda y: project_to_sphere(y)[0])
    times, points = result.t, result.y
    end = 'open'
    for k, t_event in enumerate(result.t_events):
        if t_event.size:
            times = np.append(times, t_event[0])
            points = np.vstack([points, result.y_events[k][0]])
            end = 'saddle' if k == 0 else f'fixed_point_{k - 1}'
            break
    logger.debug(f"branch {name}: {len(times)} points, ends at {end}")
    return ManifoldBranch(name, np.abs(times), points, end)


def trace_manifolds(params: SystemParams, offset: float = MANIFOLD_OFFSET,
                    t_max: Optional[float] = None) -> List[ManifoldBranch]:
    """Integrate away from the saddle along its eigendirections.

    The unstable manifold is traced forward and the stable manifold backward
    in time, each starting ``offset`` away from the saddle on both sides.
    A branch stops when it returns to the saddle or arrives at another fixed
    point. For gamma = 0 the branches form the figure-eight separatrix,
    otherwise they connect source, saddle and sink.

    Raises
    ------
    PreconditionError
        If the flow has no saddle.
    """
    t_max = 50.0 / params.v if t_max is None else t_max
    saddle = find_saddle(params)
    center = saddle.location.as_array()
    others = [np.asarray(p) for p in solve_fixed_points(params)
              if np.linalg.norm(np.asarray(p) - center) > 1e-8]
    unstable, stable = _directions(saddle, params)
    branches = []
    for label, direction, horizon in (('unstable', unstable, t_max),
                                      ('stable', stable, -t_max)):
        for sign, suffix in ((1.0, '+'), (-1.0, '-')):
            start, _ = project_to_sphere(center + sign * offset * direction)
            branches.append(_trace(label + suffix, start, horizon, params, center,
                                   others, offset))
    logger.info(f"traced manifolds of the saddle at {BlochVector.from_array(center)}")
    return branches


class ManifoldsExperiment(Experiment):
    name = 'manifolds'

    def run(self) -> dict:
        branches = trace_manifolds(self.params, t_max=self.config.t_max)
        saddle = find_saddle(self.params)
        return {
            self.name: pd.concat([b.to_frame() for b in branches], ignore_index=True),
            'report': {
                'params': self.params.model_dump(mode='json'),
                'saddle': saddle.to_record(),
                'ends': {b.name: b.end for b in branches},
            },
        }
