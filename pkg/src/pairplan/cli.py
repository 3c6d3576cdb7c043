"""Command line entry point, one subcommand per lifecycle stage."""

import argparse
from collections.abc import Callable, Sequence
import logging
from pathlib import Path
import sys

import pandas as pd

from .exceptions import ConfigurationError, PairPlanError
from .il import train_il
from .nn import save_checkpoint
from .pipeline import Models, plan, run_eval
from .rl import train_rl
from .rwm import train_rwm
from .settings import ExperimentConfig
from .sim import build_suite, load_suite, save_suite

log = logging.getLogger(__name__)

LOG_FORMAT = "%(asctime)s %(levelname)-8s %(name)s: %(message)s"
IL_CHECKPOINT = "il.ckpt"
RL_CHECKPOINT = "rl.ckpt"
RWM_CHECKPOINT = "rwm.ckpt"
RL_LOG = "rl_log.csv"


def _config(args: argparse.Namespace) -> ExperimentConfig:
    config = (
        ExperimentConfig.from_file(args.config) if args.config is not None else ExperimentConfig()
    )
    if args.seed is not None:
        config = config.model_copy(update={"seed": args.seed})
    return config


def _out_dir(args: argparse.Namespace, fallback: Path) -> Path:
    out = Path(args.out) if args.out is not None else fallback
    out.mkdir(parents=True, exist_ok=True)
    return out


def gen_scenarios(args: argparse.Namespace) -> Path:
    """Generate the scenario suite."""
    config = _config(args)
    suite = build_suite(
        config.suite.families,
        config.suite.per_family,
        config.seed,
        config.suite.corrupted_fraction,
        config.simulator,
        config.metrics,
    )
    out = Path(args.out) if args.out is not None else config.suite_path
    return save_suite(suite, out)


def train_il_command(args: argparse.Namespace) -> Path:
    """Train the imitation branch."""
    config = _config(args)
    policy = train_il(load_suite(config.suite_path), config)
    out = _out_dir(args, Path("checkpoints"))
    return save_checkpoint(
        out / IL_CHECKPOINT, policy.to_checkpoint(config.seed, policy.metadata["steps"])
    )


def train_rl_command(args: argparse.Namespace) -> Path:
    """Train the tree sampler with GRPO."""
    config = _config(args)
    out = _out_dir(args, Path("checkpoints"))
    policy = train_rl(load_suite(config.suite_path), config, log_path=out / RL_LOG)
    return save_checkpoint(
        out / RL_CHECKPOINT, policy.to_checkpoint(config.seed, policy.metadata["updates"])
    )


def train_rwm_command(args: argparse.Namespace) -> Path:
    """Train the reward world model on groups of the configured sampler."""
    config = _config(args)
    models = Models.load(config, {"rl"})
    model = train_rwm(load_suite(config.suite_path), models.sampler, config)
    out = _out_dir(args, Path("checkpoints"))
    return save_checkpoint(
        out / RWM_CHECKPOINT, model.to_checkpoint(config.seed, config.rwm.epochs)
    )


def eval_command(args: argparse.Namespace) -> Path:
    """Evaluate the roster and write the reports."""
    config = _config(args)
    return run_eval(config, _out_dir(args, Path("reports")))


def plan_command(args: argparse.Namespace) -> Path:
    """Plan one scenario and write its trajectory rows."""
    config = _config(args)
    suite = {s.id: s for s in load_suite(config.suite_path)}
    if args.scenario not in suite:
        raise ConfigurationError(f"Scenario {args.scenario!r} is not in the suite")
    scenario = suite[args.scenario]
    models = Models.load(config, {"il", "rl", "rwm"})
    trajectory = plan(
        scenario, models.il, models.sampler, models.rwm, args.best_of, config, config.seed
    )
    path = _out_dir(args, Path("plans")) / f"{scenario.id}.csv"
    frame = pd.DataFrame(trajectory.to_rows(), columns=["t", "x", "y", "h"])
    frame.to_csv(path, index=False, float_format="%.6f", lineterminator="\n")
    return path


COMMANDS: dict[str, tuple[Callable[[argparse.Namespace], Path], str]] = {
    "gen-scenarios": (gen_scenarios, "generate and save the scenario suite"),
    "train-il": (train_il_command, "train the imitation branch"),
    "train-rl": (train_rl_command, "train the tree sampler with GRPO"),
    "train-rwm": (train_rwm_command, "train the reward world model"),
    "eval": (eval_command, "evaluate the agent roster"),
    "plan": (plan_command, "plan a single scenario"),
}


def build_parser() -> argparse.ArgumentParser:
    """Argument parser with all subcommands."""
    parser = argparse.ArgumentParser(prog="pairplan", description=__doc__)
    parser.add_argument(
        "--log-level",
        default="INFO",
        choices=["DEBUG", "INFO", "WARNING", "ERROR"],
        help="root logger level",
    )
    subparsers = parser.add_subparsers(dest="command", required=True)
    for name, (handler, help_text) in COMMANDS.items():
        sub = subparsers.add_parser(name, help=help_text)
        sub.add_argument("--config", type=Path, default=None, help="TOML or JSON experiment config")
        sub.add_argument("--seed", type=int, default=None, help="override the config seed")
        sub.add_argument("--out", type=Path, default=None, help="output directory")
        if name == "plan":
            sub.add_argument("--scenario", required=True, help="scenario id")
            sub.add_argument("--best-of", type=int, default=1, help="independent sampling passes")
        sub.set_defaults(handler=handler)
    return parser


def main(argv: Sequence[str] | None = None) -> int:
    """Run the CLI and return the process exit code."""
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=args.log_level, format=LOG_FORMAT, stream=sys.stderr)
    try:
        written = args.handler(args)
    except PairPlanError as err:
        log.error("%s failed: %s", args.command, err)
        return 1
    log.info("Wrote %s", written)
    return 0
