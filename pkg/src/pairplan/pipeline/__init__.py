"""Inference pipeline and evaluation harness."""

from .evaluate import (
    MEAN_ROW,
    REPORT_COLUMNS,
    SUMMARY_COLUMNS,
    ReportRow,
    agent_plan,
    evaluate_scenario,
    paired_bootstrap,
    report_frame,
    required_checkpoints,
    run_eval,
    summary_frame,
    write_chart,
    write_csv,
)
from .planner import Models, plan

__all__ = [
    "MEAN_ROW",
    "REPORT_COLUMNS",
    "SUMMARY_COLUMNS",
    "Models",
    "ReportRow",
    "agent_plan",
    "evaluate_scenario",
    "paired_bootstrap",
    "plan",
    "report_frame",
    "required_checkpoints",
    "run_eval",
    "summary_frame",
    "write_chart",
    "write_csv",
]
