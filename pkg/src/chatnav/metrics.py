"""Evaluation metrics over interaction logs.

Four headline numbers: command recognition accuracy (predicted vs true
label), object identification accuracy (label match and position error under
the threshold), navigation success rate (succeeded / terminal navigations),
and average response time (chat sent to motion started).  All computations
are pure batch functions over record dicts; a metric with zero eligible
records is reported as undefined rather than zero.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable, Optional

TERMINAL_NAV_STATES = ("succeeded", "aborted", "timed_out")


class UndefinedMetricError(ValueError):
    """No eligible records; the metric has no value."""


class DataIntegrityError(ValueError):
    """A record violates the log contract (e.g. negative time interval)."""


def load_records(path: str | Path) -> list[dict]:
    """Parse a JSON-lines interaction log."""
    records = []
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            line = line.strip()
            if not line:
                continue
            try:
                records.append(json.loads(line))
            except json.JSONDecodeError as exc:
                raise DataIntegrityError(f"log line {lineno} is not valid JSON: {exc}")
    return records


def _cra_eligible(records: Iterable[dict]) -> list[dict]:
    return [r for r in records
            if r.get("true_label") is not None and r.get("predicted_label") is not None]


def compute_cra(records: Iterable[dict]) -> float:
    """Fraction of records whose predicted label equals the true label."""
    eligible = _cra_eligible(records)
    if not eligible:
        raise UndefinedMetricError("no records with true and predicted labels")
    hits = sum(1 for r in eligible if r["predicted_label"] == r["true_label"])
    return hits / len(eligible)


def compute_oia(records: Iterable[dict]) -> float:
    """Fraction of detection outcomes marked correct."""
    eligible = [r for r in records
                if r.get("outcome", {}).get("detection_correct") is not None]
    if not eligible:
        raise UndefinedMetricError("no records with detection outcomes")
    hits = sum(1 for r in eligible if r["outcome"]["detection_correct"])
    return hits / len(eligible)


def compute_nsr(records: Iterable[dict]) -> float:
    """Fraction of terminal navigation records that succeeded."""
    eligible = [r for r in records
                if r.get("outcome", {}).get("nav_state") in TERMINAL_NAV_STATES]
    if not eligible:
        raise UndefinedMetricError("no terminal navigation records")
    hits = sum(1 for r in eligible if r["outcome"].get("nav_state") == "succeeded")
    return hits / len(eligible)


def compute_art(records: Iterable[dict]) -> dict:
    """Mean seconds from chat sent to motion started, with per-label means.

    Query interactions end at the response publication instead and are
    reported separately; backend latency gets its own column so response time
    can be read with or without it.
    """
    motion_intervals: list[float] = []
    per_label: dict[str, list[float]] = {}
    query_intervals: list[float] = []
    lm_latencies: list[float] = []

    for r in records:
        stamps = r.get("stamps", {})
        sent, started = stamps.get("gui_sent"), stamps.get("action_started")
        if sent is None or started is None:
            continue
        interval = started - sent
        if interval < 0:
            raise DataIntegrityError(
                f"record {r.get('id')} has negative response interval {interval}")
        if r.get("intent_kind") == "query":
            query_intervals.append(interval)
        else:
            motion_intervals.append(interval)
            per_label.setdefault(r.get("predicted_label", "unknown"), []).append(interval)
        if r.get("lm_latency") is not None:
            lm_latencies.append(r["lm_latency"])

    if not motion_intervals and not query_intervals:
        raise UndefinedMetricError("no records with response stamps")

    def _stats(values: list[float]) -> dict:
        if not values:
            return {"mean": None, "std": None, "count": 0}
        mean = sum(values) / len(values)
        var = sum((v - mean) ** 2 for v in values) / len(values)
        return {"mean": mean, "std": math.sqrt(var), "count": len(values)}

    out = _stats(motion_intervals)
    out["per_label"] = {
        label: _stats(vals) for label, vals in sorted(per_label.items())
    }
    out["query_response"] = _stats(query_intervals)
    out["backend_latency"] = _stats(lm_latencies)
    return out


def confusion_matrix(records: Iterable[dict]) -> tuple[list[str], list[list[float]]]:
    """Row-normalized true-vs-predicted frequency matrix over observed labels."""
    eligible = _cra_eligible(records)
    if not eligible:
        raise UndefinedMetricError("no records with true and predicted labels")
    labels = sorted({r["true_label"] for r in eligible}
                    | {r["predicted_label"] for r in eligible})
    index = {label: i for i, label in enumerate(labels)}
    counts = [[0] * len(labels) for _ in labels]
    for r in eligible:
        counts[index[r["true_label"]]][index[r["predicted_label"]]] += 1
    matrix = []
    for row in counts:
        total = sum(row)
        matrix.append([v / total for v in row] if total else [0.0] * len(labels))
    return labels, matrix


@dataclass
class MetricsReport:
    cra: Optional[float]
    oia: Optional[float]
    nsr: Optional[float]
    art: Optional[dict]
    counts: dict
    confusion_labels: list[str]
    confusion: list[list[float]]

    def to_dict(self) -> dict:
        return {
            "cra": {"defined": self.cra is not None, "value": self.cra},
            "oia": {"defined": self.oia is not None, "value": self.oia},
            "nsr": {"defined": self.nsr is not None, "value": self.nsr},
            "art": {"defined": self.art is not None, **(self.art or {})},
            "counts": self.counts,
            "confusion": {"labels": self.confusion_labels, "matrix": self.confusion},
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), sort_keys=True, indent=2) + "\n"


def build_report(records: list[dict]) -> MetricsReport:
    def _try(fn):
        try:
            return fn(records)
        except UndefinedMetricError:
            return None

    cra = _try(compute_cra)
    oia = _try(compute_oia)
    nsr = _try(compute_nsr)
    art = _try(compute_art)
    try:
        labels, matrix = confusion_matrix(records)
    except UndefinedMetricError:
        labels, matrix = [], []

    per_kind: dict[str, int] = {}
    for r in records:
        kind = r.get("intent_kind", "unknown")
        per_kind[kind] = per_kind.get(kind, 0) + 1
    counts = {
        "records": len(records),
        "cra_eligible": len(_cra_eligible(records)),
        "oia_eligible": sum(1 for r in records
                            if r.get("outcome", {}).get("detection_correct") is not None),
        "nav_terminal": sum(1 for r in records
                            if r.get("outcome", {}).get("nav_state") in TERMINAL_NAV_STATES),
        "per_intent_kind": dict(sorted(per_kind.items())),
    }
    return MetricsReport(cra=cra, oia=oia, nsr=nsr, art=art, counts=counts,
                         confusion_labels=labels, confusion=matrix)


def emit_report(records: list[dict], path: str | Path) -> MetricsReport:
    """Write the JSON report; byte-identical for identical record lists."""
    report = build_report(records)
    Path(path).write_text(report.to_json(), encoding="utf-8")
    return report


def emit_confusion_csv(records: list[dict], path: str | Path) -> None:
    labels, matrix = confusion_matrix(records)
    lines = ["true\\predicted," + ",".join(labels)]
    for label, row in zip(labels, matrix):
        lines.append(label + "," + ",".join(f"{v:.6f}" for v in row))
    Path(path).write_text("\n".join(lines) + "\n", encoding="utf-8")
