from __future__ import annotations

from pathlib import Path

from rich.console import Group
from rich.panel import Panel
from rich.table import Table
from rich.text import Text

from clusterchain.config import ExperimentConfig


def _model_table(cfg: ExperimentConfig) -> Panel:
    t = Table(expand=True)
    t.add_column("Parameter")
    t.add_column("Value")
    m = cfg.model
    t.add_row("N", str(m.n))
    t.add_row("kappa/J", f"{m.kappa / m.j:.4g}")
    t.add_row("V_xx/J", f"{m.v_xx / m.j:.4g}")
    t.add_row("V_y/J", f"{m.v_y / m.j:.4g}")
    t.add_row("jumps", m.jumps)
    t.add_row("seed", str(cfg.schedule.base_seed))
    return Panel(t, title="Model")


def build_summary(
    cfg: ExperimentConfig,
    headline: dict[str, str],
    files: list[Path],
    warnings: list[str],
    elapsed: float,
) -> Panel:
    color = "yellow" if warnings else "green"
    header = Text(f"Experiment: {cfg.experiment} | Elapsed: {elapsed:.1f}s", style=color)

    results = Table(expand=True)
    results.add_column("Result")
    results.add_column("Value")
    for k, v in headline.items():
        results.add_row(k, v)
    if not headline:
        results.add_row("-", "-")

    body = Group(
        header,
        _model_table(cfg),
        Panel(results, title="Results"),
        Panel("\n".join(str(p) for p in files) or "None", title="Files"),
        Panel("\n".join(warnings) or "None", title="Warnings"),
    )
    return Panel(body, title="clusterchain")
