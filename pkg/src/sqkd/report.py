"""Deterministic run reports: human-readable text, JSON and the interval table."""
from __future__ import annotations

import csv
import io
import json
import math
from pathlib import Path

from . import __version__

INTERVAL_COLUMNS = (
    "interval",
    "qber_sift_z",
    "qber_ctrl_x",
    "contrast_sift_z",
    "contrast_ctrl_x",
    "conclusive",
)

# Bench figures the default scenario is compared against.
BENCH_RAW_KEY_RATE_BPS = 88e3
BENCH_RESPONSE_RATE = 0.00895


def _clean(obj):
    """JSON-safe copy: NaN/inf become None, numpy scalars become Python numbers."""
    if isinstance(obj, dict):
        return {str(k): _clean(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_clean(v) for v in obj]
    if hasattr(obj, "item") and not isinstance(obj, (str, bytes)):
        obj = obj.item()
    if isinstance(obj, float) and not math.isfinite(obj):
        return None
    return obj


def key_rate_note(raw_key_rate_bps: float, response_rate: float) -> str:
    return (
        f"raw key rate {raw_key_rate_bps / 1e3:.1f} kbps and response rate {100 * response_rate:.3f} % "
        f"versus bench figures {BENCH_RAW_KEY_RATE_BPS / 1e3:.0f} kbps and {100 * BENCH_RESPONSE_RATE:.3f} %. "
        "The bench operation probabilities are unknown; the simulation uses the configured "
        "p_ctrl/p_basis_z, so the rate is an order-of-magnitude comparison only."
    )


def build_report(command: str, config: dict, sections: dict) -> dict:
    return _clean({"tool": "sqkd", "version": __version__, "command": command, "seed": config.get("seed"),
                   "config": config, **sections})


def _fmt(v) -> str:
    if v is None:
        return "n/a"
    if isinstance(v, bool):
        return str(v).lower()
    if isinstance(v, float):
        return f"{v:.10g}"
    return str(v)


def _lines(obj, indent: int = 0):
    pad = "  " * indent
    for key, value in obj.items():
        if isinstance(value, dict):
            yield f"{pad}{key}:"
            yield from _lines(value, indent + 1)
        elif isinstance(value, list) and value and isinstance(value[0], dict):
            yield f"{pad}{key}:"
            for i, row in enumerate(value):
                yield f"{pad}  [{i}] " + ", ".join(f"{k}={_fmt(v)}" for k, v in row.items())
        else:
            yield f"{pad}{key}: {_fmt(value) if not isinstance(value, list) else ', '.join(map(_fmt, value))}"


def render_text(report: dict) -> str:
    return "\n".join(_lines(report)) + "\n"


def render_json(report: dict) -> str:
    return json.dumps(report, indent=2, allow_nan=False) + "\n"


def render_intervals(series) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(INTERVAL_COLUMNS)
    for s in series:
        w.writerow(
            [s.interval_index]
            + ["" if math.isnan(x) else repr(float(x)) for x in
               (s.qber_sift_z, s.qber_ctrl_x, s.contrast_sift_z, s.contrast_ctrl_x)]
            + [s.conclusive]
        )
    return buf.getvalue()


def write_outputs(out_dir: str | Path, report: dict, tables: dict[str, str] | None = None) -> list[Path]:
    """Write ``report.txt``, ``report.json`` and any extra named tables."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    files = {"report.txt": render_text(report), "report.json": render_json(report), **(tables or {})}
    written = []
    for name, body in files.items():
        path = out / name
        path.write_text(body)
        written.append(path)
    return written
