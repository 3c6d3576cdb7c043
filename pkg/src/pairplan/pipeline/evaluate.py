"""Evaluation harness: per-scenario reports, split summaries and the bar chart."""

from collections.abc import Sequence
from dataclasses import asdict, dataclass
import logging
from pathlib import Path
import time

import matplotlib
from matplotlib.figure import Figure
import numpy as np
import pandas as pd

from pairplan.const import HUMAN_BAD_PDMS
from pairplan.exceptions import PairPlanIOError
from pairplan.geometry import Trajectory
from pairplan.il import il_forward
from pairplan.metrics import epdms, human_mask, pdms
from pairplan.parallel import ordered_map
from pairplan.sampler import SamplerPolicy
from pairplan.settings import AgentName, ExperimentConfig
from pairplan.sim import Scenario, encode_scene, evaluate_trajectory, load_suite

from .planner import Models, plan

log = logging.getLogger(__name__)

REPORT_NAME = "report.csv"
SUMMARY_NAME = "summary.csv"
CHART_NAME = "scores.svg"
MEAN_ROW = "__mean__"
SCORE_COLUMNS = ["nc", "dac", "ep", "ttc", "comfort", "ddc", "tlc", "lk", "hc", "ec", "pdms", "epdms"]
REPORT_COLUMNS = ["scenario_id", "agent", *SCORE_COLUMNS, "wall_time_ms"]
SUMMARY_COLUMNS = ["split", "agent", "scenarios", "pdms", "epdms", "ci_low", "ci_high"]

NEEDS: dict[str, set[str]] = {
    "human": set(),
    "il_only": {"il"},
    "il_rwm": {"il", "rwm"},
    "pair_drive": {"il", "rl", "rwm"},
    "pair_drive_bestof6": {"il", "rl", "rwm"},
    "human_pair_drive": {"il", "rl", "rwm"},
}


@dataclass(frozen=True)
class ReportRow:
    """Scores of one agent on one scenario."""

    scenario_id: str
    agent: str
    nc: float
    dac: float
    ep: float
    ttc: float
    comfort: float
    ddc: float
    tlc: float
    lk: float
    hc: float
    ec: float
    pdms: float
    epdms: float
    wall_time_ms: float | None = None


def required_checkpoints(roster: Sequence[AgentName]) -> set[str]:
    """Checkpoint roles the roster depends on."""
    return set().union(*(NEEDS[agent] for agent in roster))


def agent_plan(
    agent: AgentName,
    scenario: Scenario,
    models: Models,
    config: ExperimentConfig,
    seed: int,
) -> Trajectory:
    """The trajectory a rostered agent drives in a scenario."""
    match agent:
        case "human":
            return scenario.expert_trajectory
        case "il_only":
            return il_forward(models.il, encode_scene(scenario, config.net))
        case "il_rwm":
            untrained = SamplerPolicy.create(
                config.net,
                config.sampler,
                scenario.horizon,
                scenario.dt,
                config.simulator.speed_limit,
                config.seed,
            )
            return plan(scenario, models.il, untrained, models.rwm, 1, config, seed)
        case "pair_drive":
            return plan(scenario, models.il, models.sampler, models.rwm, 1, config, seed)
        case "pair_drive_bestof6":
            return plan(
                scenario, models.il, models.sampler, models.rwm, config.eval.best_of_n, config, seed
            )
        case "human_pair_drive":
            return plan(
                scenario,
                models.il,
                models.sampler,
                models.rwm,
                1,
                config,
                seed,
                root=scenario.expert_trajectory,
            )


def evaluate_scenario(
    scenario: Scenario, models: Models, config: ExperimentConfig, seed: int
) -> list[ReportRow]:
    """Report rows of every rostered agent on one scenario."""
    expert = evaluate_trajectory(scenario, scenario.expert_trajectory, config.metrics)
    mask = human_mask(expert)
    rows = []
    for agent in config.eval.roster:
        started = time.perf_counter()
        trajectory = agent_plan(agent, scenario, models, config, seed)
        elapsed = (time.perf_counter() - started) * 1000.0
        scores = evaluate_trajectory(scenario, trajectory, config.metrics)
        rows.append(
            ReportRow(
                scenario.id,
                agent,
                **asdict(scores),
                pdms=pdms(scores),
                epdms=epdms(scores, mask),
                wall_time_ms=elapsed if config.eval.record_timing else None,
            )
        )
    return rows


def report_frame(rows: Sequence[ReportRow], roster: Sequence[str]) -> pd.DataFrame:
    """Per-scenario rows followed by one mean row per agent."""
    frame = pd.DataFrame([asdict(r) for r in rows], columns=REPORT_COLUMNS)
    means = []
    for agent in roster:
        subset = frame[frame["agent"] == agent]
        mean = {"scenario_id": MEAN_ROW, "agent": agent}
        mean |= {c: subset[c].mean() for c in SCORE_COLUMNS}
        mean["wall_time_ms"] = subset["wall_time_ms"].mean() if subset["wall_time_ms"].notna().any() else None
        means.append(mean)
    return pd.concat([frame, pd.DataFrame(means, columns=REPORT_COLUMNS)], ignore_index=True)


def paired_bootstrap(
    treatment: np.ndarray, control: np.ndarray, resamples: int, seed: int
) -> tuple[float, float, float]:
    """Mean paired difference with a 95% percentile bootstrap interval."""
    diff = np.asarray(treatment, dtype=np.float64) - np.asarray(control, dtype=np.float64)
    if diff.shape[0] == 0:
        return float("nan"), float("nan"), float("nan")
    rng = np.random.default_rng(seed)
    idx = rng.integers(0, diff.shape[0], size=(resamples, diff.shape[0]))
    low, high = np.percentile(diff[idx].mean(axis=1), [2.5, 97.5])
    return float(diff.mean()), float(low), float(high)


def summary_frame(
    report: pd.DataFrame, suite: Sequence[Scenario], config: ExperimentConfig
) -> pd.DataFrame:
    """Per-agent means on the full suite, the human-bad split and the corrupted split.

    A final row carries the paired bootstrap of pair_drive minus il_only PDMS
    when both agents are rostered.
    """
    rows = report[report["scenario_id"] != MEAN_ROW]
    human = rows[rows["agent"] == "human"].set_index("scenario_id")["pdms"]
    if human.empty:
        human = pd.Series(
            {
                s.id: pdms(evaluate_trajectory(s, s.expert_trajectory, config.metrics))
                for s in suite
            }
        )
    splits = {
        "all": [s.id for s in suite],
        "human_bad": [s.id for s in suite if human[s.id] < HUMAN_BAD_PDMS],
        "corrupted": [s.id for s in suite if s.corruption != "None"],
    }
    records = []
    for split, ids in splits.items():
        for agent in config.eval.roster:
            subset = rows[(rows["agent"] == agent) & rows["scenario_id"].isin(ids)]
            records.append(
                {
                    "split": split,
                    "agent": agent,
                    "scenarios": len(subset),
                    "pdms": subset["pdms"].mean() if len(subset) else None,
                    "epdms": subset["epdms"].mean() if len(subset) else None,
                }
            )
    roster = set(config.eval.roster)
    if {"pair_drive", "il_only"} <= roster:
        pivot = rows.pivot(index="scenario_id", columns="agent", values="pdms")
        mean, low, high = paired_bootstrap(
            pivot["pair_drive"].to_numpy(),
            pivot["il_only"].to_numpy(),
            config.eval.bootstrap_resamples,
            config.seed,
        )
        records.append(
            {
                "split": "paired_bootstrap",
                "agent": "pair_drive-il_only",
                "scenarios": len(pivot),
                "pdms": mean,
                "ci_low": low,
                "ci_high": high,
            }
        )
    return pd.DataFrame(records, columns=SUMMARY_COLUMNS)


def write_csv(frame: pd.DataFrame, path: Path, header: str | None = None) -> Path:
    """Write a fixed-point CSV, optionally after a comment line.

    Existing files are never replaced.

    Raises:
        PairPlanIOError: If the file exists or cannot be written.

    """
    try:
        path.parent.mkdir(parents=True, exist_ok=True)
        with path.open("x", newline="", encoding="utf-8") as handle:
            if header is not None:
                handle.write(f"# {header}\n")
            frame.to_csv(handle, index=False, float_format="%.4f", na_rep="", lineterminator="\n")
    except OSError as err:
        raise PairPlanIOError("Cannot write report", path) from err
    return path


def write_chart(report: pd.DataFrame, path: Path) -> Path:
    """Grouped bar chart of mean PDMS and EPDMS per agent."""
    means = report[report["scenario_id"] == MEAN_ROW]
    # fixed salt keeps the SVG element ids stable across runs
    with matplotlib.rc_context({"svg.hashsalt": "pairplan"}):
        fig = Figure(figsize=(8, 4))
        ax = fig.subplots()
        x = np.arange(len(means))
        ax.bar(x - 0.2, means["pdms"], width=0.4, label="PDMS")
        ax.bar(x + 0.2, means["epdms"], width=0.4, label="EPDMS")
        ax.set_xticks(x, means["agent"], rotation=20)
        ax.set_ylim(0.0, 1.0)
        ax.set_ylabel("mean score")
        ax.legend()
        fig.tight_layout()
        try:
            with path.open("x", encoding="utf-8") as handle:
                fig.savefig(handle, format="svg", metadata={"Date": None})
        except OSError as err:
            raise PairPlanIOError("Cannot write chart", path) from err
    return path


def run_eval(
    config: ExperimentConfig,
    out_dir: Path | str,
    models: Models | None = None,
    suite: Sequence[Scenario] | None = None,
) -> Path:
    """Evaluate every rostered agent on the suite and write the reports.

    Scenarios run in parallel; rows are gathered in suite order so the output
    does not depend on the worker count.

    Raises:
        PairPlanIOError: If the suite cannot be read or a report not written,
            or if the output directory already holds reports of an earlier run.
        ConfigurationError: If a needed checkpoint is not configured.

    """
    out_dir = Path(out_dir)
    earlier = [p for p in (out_dir / REPORT_NAME, out_dir / SUMMARY_NAME, out_dir / CHART_NAME) if p.exists()]
    if earlier:
        raise PairPlanIOError("Refusing to overwrite an earlier report", earlier[0])
    suite = list(suite) if suite is not None else load_suite(config.suite_path)
    if models is None:
        models = Models.load(config, required_checkpoints(config.eval.roster))
    log.info("Evaluating %d agents on %d scenarios", len(config.eval.roster), len(suite))

    per_scenario = ordered_map(
        lambda item: evaluate_scenario(item[1], models, config, config.seed + item[0]),
        list(enumerate(suite)),
    )
    report = report_frame([row for rows in per_scenario for row in rows], config.eval.roster)
    report_path = write_csv(report, out_dir / REPORT_NAME, f"config_sha256={config.digest()}")
    write_csv(summary_frame(report, suite, config), out_dir / SUMMARY_NAME)
    if config.eval.svg:
        write_chart(report, out_dir / CHART_NAME)
    for _, row in report[report["scenario_id"] == MEAN_ROW].iterrows():
        log.info("%s: PDMS %.4f, EPDMS %.4f", row["agent"], row["pdms"], row["epdms"])
    return report_path
