"""Render simulation summaries as CSV or markdown tables."""

from __future__ import annotations

import csv
import io

from .errors import ValidationError
from .simulation import SimulationSummary

LABELS = {"mover": "beta_M", "unified": "beta_L"}
STAT_COLUMNS = ("True", "Mean", "Bias", "SD", "RMSE")
FORMATS = ("csv", "markdown")


def fmt3(value: float) -> str:
    """Fixed three-decimal formatting; negative zero prints as ``0.000``."""
    text = f"{value:.3f}"
    return "0.000" if text == "-0.000" else text


def level_label(level: float) -> str:
    return f"{level * 100:g}%"


def table_rows(summary: SimulationSummary) -> tuple[list[str], list[list[str]]]:
    cfg = summary.config
    levels = list(cfg.ci_levels)
    header = ["Study", "Estimator", "Coord", "N", "L", "pi0", "1/alpha", "rho"]
    header += list(STAT_COLUMNS) + [level_label(lv) for lv in levels]
    rows = []
    for name, cells in summary.cells.items():
        for k, c in enumerate(cells):
            rows.append(
                [cfg.name or "study", LABELS.get(name, name), str(k + 1), str(cfg.n), str(cfg.poly_order),
                 f"{cfg.pi0:g}", f"{1.0 / cfg.alpha:g}", f"{cfg.rho:g}"]
                + [fmt3(v) for v in (c.true_value, c.mean, c.bias, c.sd, c.rmse)]
                + [fmt3(c.coverage[lv]) for lv in levels]
            )
    return header, rows


def emit_table(summary: SimulationSummary | list[SimulationSummary], format: str = "markdown") -> str:
    """Render one or several summaries into a single table document."""
    if format not in FORMATS:
        raise ValidationError(f"table format must be one of {FORMATS}, got {format!r}")
    summaries = summary if isinstance(summary, (list, tuple)) else [summary]
    header, rows = None, []
    for s in summaries:
        h, r = table_rows(s)
        if header is not None and h != header:
            raise ValidationError("summaries with different CI levels cannot share a table")
        header = h
        rows.extend(r)
    if format == "csv":
        buf = io.StringIO()
        writer = csv.writer(buf, lineterminator="\n")
        writer.writerow(header)
        writer.writerows(rows)
        return buf.getvalue()
    lines = ["| " + " | ".join(header) + " |", "|" + "|".join("---" for _ in header) + "|"]
    lines += ["| " + " | ".join(r) + " |" for r in rows]
    return "\n".join(lines) + "\n"
