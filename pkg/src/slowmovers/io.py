"""CSV panel ingestion, simulation config files and JSON reports."""

from __future__ import annotations

import configparser
import csv
import io
import json
import math
import os
import tempfile
import warnings
from dataclasses import dataclass, field
from typing import Any, Iterable, TextIO

import numpy as np

from . import __version__
from .errors import (
    ConfigError,
    CsvParseError,
    SerializationError,
    UnbalancedPanelError,
    UnsupportedShapeError,
)
from .panel import PanelDataset
from .simulation import CONFIG_KEYS, SimulationConfig

# ---------------------------------------------------------------- panel CSV


def _regressor_columns(header: list[str]) -> list[str]:
    cols = [c for c in header if c.startswith("x") and c[1:].isdigit()]
    return sorted(cols, key=lambda c: int(c[1:]))


def read_panel_csv(stream: TextIO, p: int | None = None) -> PanelDataset:
    """Read a long-format panel: columns ``id, period, y, x1..xp``.

    Units are sorted by id and rows by period. Integer period labels that
    are not ``1..T`` are mapped to ``1..T`` in sorted order with a warning.
    """
    reader = csv.reader(stream)
    try:
        header = [h.strip() for h in next(reader)]
    except StopIteration:
        raise CsvParseError("empty file: header row missing", row=1) from None
    if p is None:
        p = len(_regressor_columns(header))
    if p < 1:
        raise CsvParseError("no regressor columns x1..xp in header", row=1)
    needed = ["id", "period", "y"] + [f"x{k}" for k in range(1, p + 1)]
    missing = [c for c in needed if c not in header]
    if missing:
        raise CsvParseError(f"header lacks columns {missing}", row=1)
    pos = {c: header.index(c) for c in needed}

    units: dict[str, dict[int, tuple[float, list[float]]]] = {}
    for rownum, row in enumerate(reader, start=2):
        if not row or all(not cell.strip() for cell in row):
            continue
        if len(row) < len(header):
            raise CsvParseError(f"row {rownum}: expected {len(header)} cells, got {len(row)}", row=rownum)
        cells = {c: row[i].strip() for c, i in pos.items()}
        for c, v in cells.items():
            if v == "":
                raise CsvParseError(f"row {rownum}: missing value in column {c!r}", row=rownum)
        uid = cells["id"]
        try:
            period = int(cells["period"])
        except ValueError:
            raise CsvParseError(f"row {rownum}: period {cells['period']!r} is not an integer", row=rownum) from None
        try:
            y = float(cells["y"])
            xs = [float(cells[f"x{k}"]) for k in range(1, p + 1)]
        except ValueError as err:
            raise CsvParseError(f"row {rownum}: non-numeric cell ({err})", row=rownum) from None
        if not (math.isfinite(y) and all(math.isfinite(v) for v in xs)):
            raise CsvParseError(f"row {rownum}: non-finite value", row=rownum)
        slot = units.setdefault(uid, {})
        if period in slot:
            raise UnbalancedPanelError(f"id {uid!r} has period {period} twice (row {rownum})", panel_id=uid)
        slot[period] = (y, xs)

    if not units:
        raise CsvParseError("no data rows")
    ids = sorted(units)
    periods = sorted(units[ids[0]])
    for uid in ids:
        if sorted(units[uid]) != periods:
            raise UnbalancedPanelError(
                f"id {uid!r} has periods {sorted(units[uid])}, expected {periods}", panel_id=uid
            )
    t_periods = len(periods)
    if periods != list(range(1, t_periods + 1)):
        warnings.warn(f"period labels {periods} normalized to 1..{t_periods}", UserWarning, stacklevel=2)
    if t_periods < p:
        raise UnsupportedShapeError(f"T={t_periods} < p={p}")
    y = np.array([[units[u][t][0] for t in periods] for u in ids])
    x = np.array([[units[u][t][1] for t in periods] for u in ids])
    return PanelDataset(y, x)


def write_panel_csv(dataset: PanelDataset, stream: TextIO, ids: Iterable[str] | None = None) -> None:
    """Write a dataset in the long layout read by :func:`read_panel_csv`.

    Floats use ``repr`` so a re-read reproduces every bit. Default ids are
    zero-padded so lexical order equals unit order.
    """
    if ids is None:
        width = len(str(dataset.n))
        ids = [f"u{i:0{width}d}" for i in range(1, dataset.n + 1)]
    ids = list(ids)
    writer = csv.writer(stream, lineterminator="\n")
    writer.writerow(["id", "period", "y"] + [f"x{k}" for k in range(1, dataset.p_regressors + 1)])
    for i, uid in enumerate(ids):
        for t in range(dataset.t_periods):
            writer.writerow(
                [uid, t + 1, repr(float(dataset.y[i, t]))] + [repr(float(v)) for v in dataset.x[i, t]]
            )


# ---------------------------------------------------------------- configs


def _parse_value(key: str, raw: str):
    raw = raw.strip()
    try:
        if key in ("n", "poly_order", "reps", "seed"):
            return int(raw)
        if key == "ci_levels":
            return tuple(float(v) for v in raw.split(",") if v.strip())
        if key == "period_noise":
            return {"true": True, "1": True, "yes": True, "false": False, "0": False, "no": False}[raw.lower()]
        return float(raw)
    except (ValueError, KeyError):
        raise ConfigError(f"bad value for {key}: {raw!r}") from None


def parse_simulation_configs(text: str) -> list[SimulationConfig]:
    """Parse one or more ``[section]`` blocks of ``key = value`` lines.

    A ``[DEFAULT]`` block supplies shared values; a file without any section
    header is read as a single study.
    """
    stripped = [ln.strip() for ln in text.splitlines() if ln.strip() and not ln.strip().startswith(("#", ";"))]
    if stripped and not stripped[0].startswith("["):
        text = "[study]\n" + text
    parser = configparser.ConfigParser(interpolation=None)
    try:
        parser.read_string(text)
    except configparser.Error as err:
        raise ConfigError(f"config parse error: {err}") from None
    allowed = set(CONFIG_KEYS) | {"period_noise"}
    out = []
    for section in parser.sections():
        values: dict[str, Any] = {"name": section}
        for key, raw in parser.items(section):
            if key not in allowed:
                raise ConfigError(f"[{section}] unknown key {key!r}")
            values[key] = _parse_value(key, raw)
        out.append(SimulationConfig(**values))
    if not out:
        raise ConfigError("config defines no study")
    return out


def format_simulation_config(config: SimulationConfig) -> str:
    lines = [f"[{config.name or 'study'}]"]
    for key in CONFIG_KEYS:
        value = getattr(config, key)
        if key == "ci_levels":
            value = ",".join(repr(v) for v in value)
        lines.append(f"{key} = {value}")
    if config.period_noise:
        lines.append("period_noise = true")
    return "\n".join(lines) + "\n"


# ---------------------------------------------------------------- reports


@dataclass
class RunReport:
    config: dict
    mode: str
    estimates: dict
    inference: dict
    counts: dict
    warnings: list = field(default_factory=list)
    version: str = __version__

    def to_dict(self) -> dict:
        return {
            "version": self.version,
            "mode": self.mode,
            "config": self.config,
            "counts": self.counts,
            "estimates": self.estimates,
            "inference": self.inference,
            "warnings": list(self.warnings),
        }


def to_jsonable(obj):
    if isinstance(obj, np.ndarray):
        return to_jsonable(obj.tolist())
    if isinstance(obj, dict):
        return {str(k): to_jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [to_jsonable(v) for v in obj]
    if isinstance(obj, (bool, np.bool_)):
        return bool(obj)
    if isinstance(obj, (int, np.integer)):
        return int(obj)
    if isinstance(obj, (float, np.floating)):
        return float(obj)
    return obj


def _find_nonfinite(obj, path="$"):
    if isinstance(obj, float) and not math.isfinite(obj):
        return path
    if isinstance(obj, dict):
        for k, v in obj.items():
            hit = _find_nonfinite(v, f"{path}.{k}")
            if hit:
                return hit
    if isinstance(obj, list):
        for i, v in enumerate(obj):
            hit = _find_nonfinite(v, f"{path}[{i}]")
            if hit:
                return hit
    return None


def dumps_json(doc) -> str:
    """Serialize with stable key order and shortest round-trip float repr."""
    doc = to_jsonable(doc)
    bad = _find_nonfinite(doc)
    if bad:
        raise SerializationError(f"refusing to serialize non-finite value at {bad}")
    return json.dumps(doc, indent=2, allow_nan=False) + "\n"


def write_report(report: RunReport, format: str = "json") -> str:
    if format != "json":
        raise SerializationError(f"unsupported report format {format!r}")
    return dumps_json(report.to_dict())


def read_report(text: str) -> RunReport:
    doc = json.loads(text)
    return RunReport(
        config=doc["config"],
        mode=doc["mode"],
        estimates=doc["estimates"],
        inference=doc["inference"],
        counts=doc["counts"],
        warnings=doc.get("warnings", []),
        version=doc["version"],
    )


def atomic_write(path: str, text: str) -> None:
    """Write via a temporary file in the target directory, then rename."""
    directory = os.path.dirname(os.path.abspath(path))
    fd, tmp = tempfile.mkstemp(dir=directory, prefix=".tmp-", suffix=os.path.basename(path))
    try:
        with io.open(fd, "w", encoding="utf-8", newline="") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise
