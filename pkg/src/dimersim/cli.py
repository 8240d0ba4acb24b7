"""
Command line interface.

Every subcommand runs one experiment driver and writes CSV tables and JSON
reports to the output directory, e.g.::

    dimersim fixed-points --v 1 --gamma 0.75 --g 3
    dimersim spectrum --n-particles 13 --c-times-n 0.5 --variant pt --sweep gamma:0:1.2:121

Exit status is 0 on success, 2 for invalid input and 1 when a numerical
computation fails.
"""

__all__ = ['main', 'build_parser']

import argparse
import logging
import sys
from typing import Any, Dict, List, Optional

from pydantic import ValidationError

from . import __version__
from .config import dump_config, load_config_file, resolve_config
from .core import (
    ConfigError,
    ConsistencyError,
    DomainError,
    NumericalError,
    PreconditionError,
    Variant,
)

logger = logging.getLogger(__name__)

EXIT_OK = 0
EXIT_NUMERICAL = 1
EXIT_USAGE = 2

COMMANDS = {
    'spectrum': "Many-particle eigenvalues along a parameter sweep.",
    'evolve-mf': "Mean-field trajectory from a point of the Bloch sphere.",
    'evolve-mp': "Many-particle dynamics from a coherent state.",
    'compare': "Mean-field and many-particle dynamics side by side.",
    'fixed-points': "Classified fixed points with Poincare indices.",
    'halflife-mf': "Mean-field half-life map over initial states.",
    'halflife-mp': "Many-particle half-life map over coherent initial states.",
    'selftrap': "s_z(t) against the interaction g and the separatrix value g_sep.",
    'manifolds': "Stable and unstable manifolds of the saddle point.",
    'evolve-linear': "Two-level populations and norm for both variants.",
    'norm-decay': "Norm decay from the poles with and without interaction.",
}

PARAM_FLAGS = ('epsilon', 'v', 'gamma', 'g', 'n_particles', 'variant')
RUN_FLAGS = ('theta0', 'phi0', 't_max', 'n_times', 'sweep', 'grid', 'formulation',
             'meanfield_energies', 'out_dir', 'threads', 'rtol', 'atol')


def _add_logging_flags(parser: argparse.ArgumentParser) -> None:
    group = parser.add_mutually_exclusive_group()
    group.add_argument('-v', '--verbose', action='store_true', help="Log debug messages.")
    group.add_argument('-q', '--quiet', action='store_true', help="Log warnings only.")


def _common_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(add_help=False)
    physics = parser.add_argument_group("system parameters")
    physics.add_argument('--epsilon', type=float, help="Onsite bias.")
    physics.add_argument('--v', type=float, help="Coupling between the modes.")
    physics.add_argument('--gamma', type=float, help="Decay rate of mode 1.")
    interaction = physics.add_mutually_exclusive_group()
    interaction.add_argument('--g', type=float, help="Macroscopic interaction g = N c.")
    interaction.add_argument('--c-times-n', type=float,
                             help="Microscopic interaction given as c N.")
    physics.add_argument('--n-particles', type=int, help="Particle number N.")
    physics.add_argument('--variant', choices=[variant.value for variant in Variant],
                         help="Decaying or PT-symmetric Hamiltonian.")

    run = parser.add_argument_group("run settings")
    run.add_argument('--config', metavar='PATH', help="JSON configuration; flags override it.")
    run.add_argument('--dump-config', metavar='PATH',
                     help="Write the resolved configuration as JSON.")
    run.add_argument('--out', dest='out_dir', metavar='DIR', help="Output directory.")
    run.add_argument('--theta0', type=float, help="Polar angle of the initial state.")
    run.add_argument('--phi0', type=float, help="Azimuth of the initial state.")
    run.add_argument('--t-max', type=float, help="Final time.")
    run.add_argument('--n-times', type=int, help="Number of output times.")
    run.add_argument('--sweep', metavar='NAME:START:STOP:COUNT',
                     help="Parameter sweep, e.g. gamma:0:1.2:121.")
    run.add_argument('--grid', type=int, nargs=2, metavar=('N_THETA', 'N_PHI'),
                     help="Size of the half-life grid.")
    run.add_argument('--formulation', choices=['bloch', 'canonical', 'gp', 'gp-normalized',
                                               'phi'],
                     help="Mean-field equations to integrate.")
    run.add_argument('--meanfield-energies', action='store_true', default=None,
                     help="Also tabulate mean-field energies in spectrum sweeps.")
    run.add_argument('--threads', type=int, help="Worker threads for grids and sweeps.")
    run.add_argument('--rtol', type=float, help="Relative ODE tolerance.")
    run.add_argument('--atol', type=float, help="Absolute ODE tolerance.")
    _add_logging_flags(run)
    return parser


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog='dimersim',
        description="Simulations of the non-Hermitian Bose-Hubbard dimer.",
    )
    parser.add_argument('--version', action='version', version=f'%(prog)s {__version__}')
    subparsers = parser.add_subparsers(dest='command', required=True, metavar='COMMAND')
    common = _common_parser()
    for name, description in COMMANDS.items():
        subparsers.add_parser(name, parents=[common], help=description,
                              description=description)
    reproduce = subparsers.add_parser(
        'reproduce', help="Run all figure presets.",
        description="Run all figure presets into subdirectories of the output directory.")
    reproduce.add_argument('--out', dest='out_dir', metavar='DIR', help="Output directory.")
    reproduce.add_argument('--threads', type=int, help="Worker threads.")
    _add_logging_flags(reproduce)
    return parser


def _overrides(args: argparse.Namespace) -> Dict[str, Any]:
    """Configuration values given on the command line."""
    params = {name: getattr(args, name) for name in PARAM_FLAGS
              if getattr(args, name) is not None}
    if args.c_times_n is not None:
        params['g'] = args.c_times_n
    overrides: Dict[str, Any] = {name: getattr(args, name) for name in RUN_FLAGS
                                 if getattr(args, name) is not None}
    if params:
        overrides['params'] = params
    return overrides


def _configure_logging(args: argparse.Namespace) -> None:
    if args.verbose:
        logging.getLogger().setLevel(logging.DEBUG)
    elif args.quiet:
        logging.getLogger().setLevel(logging.WARNING)


def _run(args: argparse.Namespace) -> None:
    from .experiments.build import reproduce_all, run_config

    if args.command == 'reproduce':
        from . import DIMERSIM_BASE

        out_dir = args.out_dir if args.out_dir is not None else DIMERSIM_BASE.join('figures')
        reproduce_all(out_dir, threads=args.threads)
        return
    file_data = load_config_file(args.config) if args.config else None
    config = resolve_config(args.command, file_data, _overrides(args))
    if args.dump_config:
        dump_config(config, args.dump_config)
    run_config(config)


def main(argv: Optional[List[str]] = None) -> int:
    """Entry point of the ``dimersim`` command."""
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_OK if exc.code in (0, None) else EXIT_USAGE
    _configure_logging(args)
    try:
        _run(args)
    except (ConfigError, PreconditionError, DomainError, ValidationError) as err:
        logger.error(f"invalid input: {err}")
        return EXIT_USAGE
    except (NumericalError, ConsistencyError) as err:
        logger.error(f"numerical failure: {err}")
        return EXIT_NUMERICAL
    return EXIT_OK


if __name__ == '__main__':
    sys.exit(main())
