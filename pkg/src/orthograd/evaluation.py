"""Unlearning metrics and the structured results file.

The unlearning impact score (UIS) measures how far an unlearned model has
drifted from the pretrained reference: with accuracies in percent,

    uis = (|A_p_test - A_u_test| / A_p_test + |A_p_test - A_u_u| / A_p_test) / 2

where ``A_p_test`` is the pretrained model's test accuracy, ``A_u_test`` the
unlearned model's test accuracy, and ``A_u_u`` the unlearned model's accuracy
on the unlearn set.  Zero means the unlearned model kept test accuracy and
the unlearn set still scores like the reference; large values mean damage.

Result files hold one ``key=value`` record per line with 6-significant-digit
numbers and a fixed key order, so identical runs emit identical bytes.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import net
from .data import Splits

__all__ = [
    "uis",
    "AccuracyReport",
    "UISRecord",
    "RunRecord",
    "evaluate_splits",
    "RECORD_FIELDS",
    "format_record",
    "parse_record_line",
    "parse_records",
    "emit_records",
    "emit_report",
    "render_table",
    "render_sweep",
]


def uis(a_p_test: float, a_u_test: float, a_u_u: float) -> float:
    """Unlearning impact score; accuracies in percent, reference must be > 0."""
    if not a_p_test > 0.0:
        raise ValueError(f"pretrained test accuracy must be positive, got {a_p_test}")
    return (abs(a_p_test - a_u_test) + abs(a_p_test - a_u_u)) / a_p_test / 2.0


@dataclass(frozen=True)
class AccuracyReport:
    """Accuracies (percent) of one model snapshot on one split family."""

    A_u: float      # unlearn set
    A_r: float      # retain set
    A_test: float   # test set (class mode: forgotten class excluded)
    epoch: int = 0
    method: str = ""
    seed: int = 0


@dataclass(frozen=True)
class UISRecord:
    """Final report of a run paired with the pretrained reference accuracy."""

    A_p_test: float
    report: AccuracyReport
    uis: float

    @classmethod
    def from_report(cls, a_p_test: float, report: AccuracyReport) -> "UISRecord":
        return cls(A_p_test=a_p_test, report=report,
                   uis=uis(a_p_test, report.A_test, report.A_u))


def evaluate_splits(params, splits: Splits, epoch: int = 0,
                    method: str = "", seed: int = 0) -> AccuracyReport:
    """Accuracy of ``params`` on the unlearn, retain, and test sets."""
    return AccuracyReport(
        A_u=net.evaluate_accuracy(params, splits.unlearn),
        A_r=net.evaluate_accuracy(params, splits.retain),
        A_test=net.evaluate_accuracy(params, splits.test),
        epoch=epoch, method=method, seed=seed,
    )


# ---------------------------------------------------------------------------
# results file


RECORD_FIELDS = ("method", "seed", "epoch", "A_u", "A_r", "A_test",
                 "uis", "stop_epoch", "stopped_early", "n_retain")


@dataclass(frozen=True)
class RunRecord:
    """One line of the results file."""

    method: str
    seed: int
    epoch: int
    A_u: float
    A_r: float
    A_test: float
    uis: float
    stop_epoch: int
    stopped_early: bool
    n_retain: int

    def sort_key(self):
        return (self.method, self.n_retain, self.seed)


def _fmt_value(value) -> str:
    if isinstance(value, bool):
        return "true" if value else "false"
    if isinstance(value, float):
        return f"{value:.6g}"
    return str(value)


def format_record(rec: RunRecord) -> str:
    return " ".join(f"{k}={_fmt_value(getattr(rec, k))}" for k in RECORD_FIELDS)


def parse_record_line(line: str, source: str = "<records>", lineno: int = 0) -> RunRecord:
    where = f"{source}:{lineno}" if lineno else source
    entries = {}
    for token in line.split():
        key, sep, value = token.partition("=")
        if not sep:
            raise ValueError(f"{where}: expected key=value tokens, got {token!r}")
        entries[key] = value
    missing = [k for k in RECORD_FIELDS if k not in entries]
    if missing:
        raise ValueError(f"{where}: record missing fields {missing}")
    try:
        return RunRecord(
            method=entries["method"],
            seed=int(entries["seed"]),
            epoch=int(entries["epoch"]),
            A_u=float(entries["A_u"]),
            A_r=float(entries["A_r"]),
            A_test=float(entries["A_test"]),
            uis=float(entries["uis"]),
            stop_epoch=int(entries["stop_epoch"]),
            stopped_early={"true": True, "false": False}[entries["stopped_early"]],
            n_retain=int(entries["n_retain"]),
        )
    except (ValueError, KeyError) as exc:
        raise ValueError(f"{where}: malformed record field ({exc})") from None


def parse_records(path) -> list[RunRecord]:
    from pathlib import Path

    p = Path(path)
    if not p.exists():
        raise FileNotFoundError(f"results file not found: {p}")
    records = []
    for lineno, raw in enumerate(p.read_text(encoding="utf-8").splitlines(), start=1):
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        records.append(parse_record_line(line, source=str(p), lineno=lineno))
    return records


def emit_records(records, path) -> None:
    """Write records sorted by (method, n_retain, seed); byte-deterministic."""
    from pathlib import Path

    ordered = sorted(records, key=RunRecord.sort_key)
    text = "\n".join(format_record(r) for r in ordered)
    Path(path).write_text(text + "\n" if text else "", encoding="utf-8")


def upsert_records(existing, new) -> list[RunRecord]:
    """Replace records that share (method, n_retain, seed), keep the rest."""
    table = {r.sort_key(): r for r in existing}
    for r in new:
        table[r.sort_key()] = r
    return list(table.values())


def emit_report(records, path, fmt: str = "records") -> None:
    """Write results either as machine records or as the summary table."""
    if fmt == "records":
        emit_records(records, path)
        return
    if fmt == "table":
        from pathlib import Path

        Path(path).write_text(render_table(records) + "\n", encoding="utf-8")
        return
    raise ValueError(f"format must be 'records' or 'table', got {fmt!r}")


# ---------------------------------------------------------------------------
# summary tables (cmd_compare)


def _mean_std(values) -> tuple[float, float]:
    arr = np.asarray(values, dtype=np.float64)
    return float(arr.mean()), float(arr.std())  # population std: one run -> 0.00


def _method_order(records) -> list[str]:
    methods = sorted({r.method for r in records})
    if "original" in methods:
        methods.remove("original")
        methods.insert(0, "original")
    return methods


def render_table(records) -> str:
    """Per-method summary: accuracy columns then UIS, mean +/- std over seeds."""
    if not records:
        return "(no records)"
    lines = [f"{'method':<22} {'n':>3}  {'A_u':>14}  {'A_r':>14}  {'A_test':>14}  {'UIS':>15}"]
    for method in _method_order(records):
        group = [r for r in records if r.method == method]
        cells = []
        for field in ("A_u", "A_r", "A_test"):
            m, s = _mean_std([getattr(r, field) for r in group])
            cells.append(f"{m:6.2f} ± {s:5.2f}")
        if method == "original":
            uis_cell = "-"
        else:
            m, s = _mean_std([r.uis for r in group])
            uis_cell = f"{m:6.3f} ± {s:5.3f}"
        lines.append(f"{method:<22} {len(group):>3}  " + "  ".join(f"{c:>14}" for c in cells)
                     + f"  {uis_cell:>15}")
    return "\n".join(lines)


def render_sweep(records) -> str:
    """UIS versus retain-set size, one row per (method, n_retain)."""
    if not records:
        return "(no records)"
    lines = [f"{'method':<22} {'n_retain':>8} {'n':>3}  {'UIS':>15}"]
    for method in _method_order(records):
        if method == "original":
            continue
        sizes = sorted({r.n_retain for r in records if r.method == method})
        for size in sizes:
            group = [r for r in records if r.method == method and r.n_retain == size]
            m, s = _mean_std([r.uis for r in group])
            lines.append(f"{method:<22} {size:>8} {len(group):>3}  {m:6.3f} ± {s:5.3f}")
    return "\n".join(lines)
