from pathlib import Path
from typing import Dict, List, Optional, Type, Union

from tqdm import tqdm

from ..config import RunConfig, resolve_config
from ..core import ConfigError
from ..resources import load_figure_presets
from . import Experiment
from .evolution import (
    CompareExperiment,
    EvolveLinearExperiment,
    EvolveManyBodyExperiment,
    EvolveMeanFieldExperiment,
    NormDecayExperiment,
)
from .fixed_points import FixedPointsExperiment
from .halflife import HalfLifeManyBodyExperiment, HalfLifeMeanFieldExperiment
from .manifolds import ManifoldsExperiment
from .selftrap import SelfTrapExperiment
from .spectrum import SpectrumExperiment

EXPERIMENTS: Dict[str, Type[Experiment]] = {
    cls.name: cls
    for cls in (
        SpectrumExperiment,
        EvolveMeanFieldExperiment,
        EvolveManyBodyExperiment,
        CompareExperiment,
        FixedPointsExperiment,
        HalfLifeMeanFieldExperiment,
        HalfLifeManyBodyExperiment,
        SelfTrapExperiment,
        ManifoldsExperiment,
        EvolveLinearExperiment,
        NormDecayExperiment,
    )
}


def get_experiment(config: RunConfig) -> Experiment:
    """Instantiate the experiment registered for ``config.command``."""
    try:
        return EXPERIMENTS[config.command](config)
    except KeyError:
        raise ConfigError(f"unknown command {config.command!r}") from None


def run_config(config: RunConfig, out_dir: Optional[Union[str, Path]] = None) -> List[Path]:
    """Run one configuration and write its artifacts."""
    return get_experiment(config).export(out_dir)


def reproduce_all(out_dir: Union[str, Path], threads: Optional[int] = None) -> List[Path]:
    """Run every figure preset, each into its own subdirectory of ``out_dir``."""
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    paths = []
    for preset in tqdm(load_figure_presets(), desc="Reproducing figures", unit="figure"):
        overrides = dict(preset["config"])
        if threads is not None:
            overrides["threads"] = threads
        config = resolve_config(preset["command"], overrides=overrides)
        paths.extend(run_config(config, out_dir / preset["name"]))
    return paths


if __name__ == "__main__":
    from .. import DIMERSIM_BASE

    reproduce_all(DIMERSIM_BASE.join("figures"))
