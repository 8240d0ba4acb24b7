"""
Drivers that turn the simulation modules into reproducible data artifacts.

Every driver is an :class:`Experiment` bound to a :class:`RunConfig`; its
``run`` method returns named tables or JSON reports and ``export`` writes
them to the output directory.
"""

__all__ = [
    "Artifact",
    "Experiment",
    "HalfLifeMap",
    "HALF_LIFE_SENTINEL",
    "parallel_map",
]

import logging
import time
from abc import ABC, abstractmethod
from pathlib import Path
from typing import Callable, Dict, List, NamedTuple, Optional, Sequence, TypeVar, Union

import numpy as np
import pandas as pd
from tqdm.contrib.concurrent import thread_map

from ..config import RunConfig, thread_count
from ..core import SystemParams

logger = logging.getLogger(__name__)

#: Half-life entry written for cells that did not reach n = 1/2 before t_max.
HALF_LIFE_SENTINEL = -1.0

Artifact = Union[pd.DataFrame, dict]

T = TypeVar("T")
R = TypeVar("R")


def parallel_map(func: Callable[[T], R], items: Sequence[T], desc: str,
                 threads: Optional[int] = None) -> List[R]:
    """Map over independent work items on a thread pool; results keep input order."""
    items = list(items)
    if threads == 1 or len(items) <= 1:
        return [func(item) for item in items]
    return list(thread_map(func, items, max_workers=threads, desc=desc,
                           unit="task", leave=False))


class HalfLifeMap(NamedTuple):
    """Half-life times over a grid of initial points (theta, phi) on the sphere.

    ``half_lives`` has shape (len(thetas), len(phis)); cells that did not
    decay to 1/2 before ``t_max`` hold the sentinel -1.
    """

    thetas: np.ndarray
    phis: np.ndarray
    half_lives: np.ndarray
    params: SystemParams
    t_max: float

    @property
    def capped(self) -> np.ndarray:
        return self.half_lives == HALF_LIFE_SENTINEL

    def to_frame(self) -> pd.DataFrame:
        theta, phi = np.meshgrid(self.thetas, self.phis, indexing="ij")
        return pd.DataFrame({
            "theta": theta.ravel(),
            "phi": phi.ravel(),
            "half_life": self.half_lives.ravel(),
            "capped": self.capped.ravel(),
        })


class Experiment(ABC):
    """Base class for experiment drivers."""

    name: str = NotImplemented

    def __init__(self, config: RunConfig):
        self.config = config

    @property
    def params(self) -> SystemParams:
        return self.config.params

    @property
    def threads(self) -> Optional[int]:
        return thread_count(self.config)

    @abstractmethod
    def run(self) -> Dict[str, Artifact]:
        """Run the experiment and return its artifacts keyed by file stem."""

    def export(self, out_dir: Optional[Union[str, Path]] = None) -> List[Path]:
        """Run the experiment and write its artifacts."""
        from .io import write_artifacts

        out_dir = Path(out_dir) if out_dir is not None else self.config.output_dir()
        logger.info(f"Running {self.name} with {self.params}")
        start = time.perf_counter()
        artifacts = self.run()
        paths = write_artifacts(artifacts, out_dir, self.name)
        logger.info(f"{self.name} finished in {time.perf_counter() - start:.1f} s, "
                    f"wrote {len(paths)} file(s) to {out_dir}")
        return paths
