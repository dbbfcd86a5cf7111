from __future__ import annotations

import argparse
import logging
import sys
from pathlib import Path
from typing import Any, Dict, Optional, Sequence, Tuple, Type

from rclab import __version__
from rclab.commands.analysis import (
    AnnealedCommand,
    FitExponentCommand,
    PipelineAnomalousCommand,
    PipelineStandardCommand,
    ReportBoundsCommand,
)
from rclab.commands.base import BaseCommand
from rclab.commands.env import EnvSampleCommand, EnvStatCommand
from rclab.commands.iso import IsoCheckCommand, IsoMpCommand, IsoProfileCommand
from rclab.commands.kernel import KernelDistCommand, KernelReturnCommand
from rclab.commands.traps import TrapsLambdaCommand, TrapsQnCommand, TrapsScanCommand
from rclab.commands.walk import WalkSimulateCommand
from rclab.config import resolve_config
from rclab.exceptions import ConfigError, RclabError
from rclab.models.config import FORMATS, KEY_TYPES

logger = logging.getLogger(__name__)

COMMANDS: Dict[Tuple[str, str], Type[BaseCommand]] = {
    ("env", "sample"): EnvSampleCommand,
    ("env", "stat"): EnvStatCommand,
    ("kernel", "return"): KernelReturnCommand,
    ("kernel", "dist"): KernelDistCommand,
    ("walk", "simulate"): WalkSimulateCommand,
    ("traps", "scan"): TrapsScanCommand,
    ("traps", "qn"): TrapsQnCommand,
    ("traps", "lambda"): TrapsLambdaCommand,
    ("iso", "profile"): IsoProfileCommand,
    ("iso", "mp"): IsoMpCommand,
    ("iso", "check"): IsoCheckCommand,
    ("fit", "exponent"): FitExponentCommand,
    ("report", "bounds"): ReportBoundsCommand,
    ("annealed", ""): AnnealedCommand,
    ("pipeline", "anomalous"): PipelineAnomalousCommand,
    ("pipeline", "standard"): PipelineStandardCommand,
}

DESCRIPTIONS: Dict[str, str] = {
    "env sample": (
        "Samples i.i.d. conductances on a box of Z^d from P[w_e <= a] = a^gamma "
        "(or the site-minimum and constant laws) and stores them with their seed."
    ),
    "env stat": (
        "The minimum conductance in [-N, N]^d: log(min w) / log N tends to -d/gamma, "
        "and min w >= N^-(d/gamma + mu) holds eventually."
    ),
    "kernel return": (
        "Exact return probabilities P^{2n}_w(0,0) of the discrete-time walk that "
        "jumps along a bond with probability proportional to its conductance."
    ),
    "kernel dist": "The n-step heat kernel P^n_w(x, .) with its truncation error bound.",
    "walk simulate": (
        "One quenched trajectory with its hitting times H_N of the inner boundaries of "
        "the boxes [-3N, 3N]^d."
    ),
    "traps scan": (
        "Sites x whose bond collection C(x) is a trap: a bond above xi reachable only "
        "through bonds of size at most N^-alpha; \"we agree to call it a trap\"."
    ),
    "traps qn": (
        "q_N = (1 - 2^-gamma)(1 - xi^gamma) N^-((4d-2) alpha gamma), which is "
        "N^-(1-eps) at the default alpha."
    ),
    "traps lambda": (
        "The trap events at the successive boundary hits are independent: the event "
        "\"is P-independent for each N\", so P[no trap among N hits] = (1 - q_N)^N."
    ),
    "iso profile": (
        "The isoperimetric profile Phi(r), the infimum of Q(S, S^c)/pi(S) over "
        "connected S with pi(S) <= r."
    ),
    "iso mp": (
        "The evolving-set heat-kernel bound: P^n(x, y) <= eps pi(y) \"for all n such that\" "
        "n exceeds 1 + ((1-sigma)^2/sigma^2) times the integral of 4/(u Phi(u)^2) "
        "from 4 min(pi(x), pi(y)) to 4/eps."
    ),
    "iso check": (
        "Surface and volume bounds for the two-step modified walk: "
        "Q(L, L^c) >= (alpha^2/2d)|dL| and pi(L) <= 2d|L| for connected even sets L."
    ),
    "fit exponent": "Least-squares slope of log P^{2n}(0,0) against log n with a bootstrap interval.",
    "report bounds": (
        "The proven exponents: the anomalous window [-2(1 + d(2d-1)gamma), -2], the "
        "universal bound -d/2 (d <= 3) or -2, and the large-gamma target -d/2 + 4d^2/gamma."
    ),
    "annealed": (
        "The environment average E[P^{2n}(0,0)], which decays like n^-d/2 for "
        "gamma > 1/2 and anomalously below."
    ),
    "pipeline anomalous": (
        "The trap lower bound: a walk reaching a trap within B_{3N} by time n crosses "
        "its weak bond with probability >= 1/(4dN^alpha) and then sojourns; "
        "\"we agree to call it a trap\" when the strong bond is reachable only through weak ones."
    ),
    "pipeline standard": (
        "The large-gamma upper bound: Phi(r) >= c r^(-1/d) from the surface and volume "
        "bounds, turned into P^{2n}(0, x) <= eps pi(x) at the profile time threshold."
    ),
}

_COMMON_KEYS = ("format", "out", "threads")


def describe(command: str) -> str:
    """The claim a command exercises."""
    key = " ".join(command.split())
    if key not in DESCRIPTIONS:
        raise ConfigError(f"Unknown command '{command}'.")
    return DESCRIPTIONS[key]


def _add_parameters(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--config", metavar="FILE", help="Read parameters from a key=value or INI file.")
    parser.add_argument("--force", action="store_true", help="Overwrite existing output files.")
    parser.add_argument("--no-timestamp", action="store_true", help="Leave the timestamp out of provenance.")
    parser.add_argument("-v", "--verbose", action="count", default=0, help="INFO with -v, DEBUG with -vv.")
    parser.add_argument("--format", choices=FORMATS, help="Output format (default json).")
    parser.add_argument("--out", metavar="PATH", help="Write the output here instead of stdout.")
    parser.add_argument("--threads", metavar="K", help="Worker threads for sampling.")
    for key in KEY_TYPES:
        if key in _COMMON_KEYS:
            continue
        flags = [f"--{key}"]
        if "_" in key:
            flags.append(f"--{key.replace('_', '-')}")
        if key == "epsilon":
            flags.append("--eps")
        parser.add_argument(*flags, dest=key, metavar=key.upper())


def _summary(command_cls: Type[BaseCommand]) -> str:
    return (command_cls.__doc__ or "").strip().splitlines()[0]


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="rclab",
        description="Random walks among random conductances: exact kernels, traps and bounds.",
    )
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    groups = parser.add_subparsers(dest="group", metavar="GROUP")
    groups.required = True

    actions: Dict[str, Any] = {}
    for (group, action), command_cls in COMMANDS.items():
        if not action:
            _add_parameters(groups.add_parser(group, help=_summary(command_cls)))
            continue
        if group not in actions:
            actions[group] = groups.add_parser(group).add_subparsers(dest="action", metavar="ACTION")
            actions[group].required = True
        _add_parameters(actions[group].add_parser(action, help=_summary(command_cls)))

    desc = groups.add_parser("describe", help="Show the claim a command exercises.")
    desc.add_argument("target", nargs="+", metavar="COMMAND")
    return parser


def _configure_logging(verbosity: int) -> None:
    level = logging.WARNING
    if verbosity == 1:
        level = logging.INFO
    elif verbosity >= 2:
        level = logging.DEBUG
    logging.basicConfig(
        format="%(asctime)s [%(filename)s:%(lineno)s] %(message)s",
        datefmt="%Y-%m-%d %H:%M:%S",
        level=level,
    )
    logging.getLogger("rclab").setLevel(level)


def _execute(args: argparse.Namespace) -> int:
    if args.group == "describe":
        print(describe(" ".join(args.target)))
        return 0
    _configure_logging(args.verbose)
    action = getattr(args, "action", "") or ""
    command_cls = COMMANDS[(args.group, action)]
    flags = {key: getattr(args, key, None) for key in KEY_TYPES}
    config_path = Path(args.config) if args.config else None
    config = resolve_config(command_cls.name, flags, config_path)
    logger.debug("Resolved configuration: %s", config.as_dict())
    command = command_cls(config, force=args.force, timestamp=not args.no_timestamp)
    return command.execute()


def run(argv: Optional[Sequence[str]] = None) -> int:
    """Parse ``argv``, run one command and return the process exit code."""
    parser = _build_parser()
    try:
        args = parser.parse_args(list(argv) if argv is not None else None)
    except SystemExit as exc:
        return exc.code if isinstance(exc.code, int) else 2
    try:
        return _execute(args)
    except RclabError as exc:
        print(f"Error: {exc}", file=sys.stderr)
        return exc.exit_code