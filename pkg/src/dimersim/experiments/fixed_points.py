"""Fixed point report of the mean-field flow."""

__all__ = ['fixed_point_report', 'FixedPointsExperiment']

import logging
from typing import Dict

from ..core import PreconditionError, SystemParams
from ..fixedpoints import analyze, critical_interaction
from . import Experiment

logger = logging.getLogger(__name__)


def fixed_point_report(params: SystemParams, strict: bool = True) -> Dict:
    """Classified fixed points, their indices and region label as a JSON-ready dict."""
    report = analyze(params, strict=strict)
    record = report.to_record()
    try:
        record['g_crit'] = critical_interaction(params)
    except PreconditionError:
        record['g_crit'] = None
    logger.info(f"{len(report.fixed_points)} fixed points, index sum {report.index_sum}")
    return record


class FixedPointsExperiment(Experiment):
    name = 'fixed-points'

    def run(self) -> dict:
        return {self.name: fixed_point_report(self.params)}
