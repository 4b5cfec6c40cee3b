"""Flowtime statistics and policy comparisons."""

from __future__ import annotations

import csv
import io
import json
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

DEFAULT_THRESHOLDS = (10.0, 20.0, 40.0, 80.0, 100.0, 200.0, 400.0, 1000.0)
PERCENTILES = (50, 90, 95, 99)


@dataclass
class Metrics:
    per_job_flowtimes: list[float]
    average_flowtime: float
    cdf_points: list[tuple[float, float]]
    percentiles: dict[int, float]
    censored_count: int
    total_jobs: int
    job_ids: list[int] = field(default_factory=list)

    def fraction_within(self, threshold: float) -> float:
        """Share of all jobs (censored ones count as not finished) with
        flowtime at most ``threshold``."""
        if not self.total_jobs:
            return 0.0
        f = np.asarray(self.per_job_flowtimes)
        return float(np.count_nonzero(f <= threshold)) / self.total_jobs

    def to_dict(self) -> dict:
        return {
            "total_jobs": self.total_jobs,
            "completed_jobs": len(self.per_job_flowtimes),
            "censored_count": self.censored_count,
            "average_flowtime": self.average_flowtime,
            "percentiles": {str(k): v for k, v in self.percentiles.items()},
            "cdf": [[t, v] for t, v in self.cdf_points],
        }


def summarize_flowtimes(flowtimes: Sequence[float], censored_count: int = 0,
                        thresholds: Sequence[float] = DEFAULT_THRESHOLDS,
                        job_ids: Sequence[int] = ()) -> Metrics:
    f = np.asarray(flowtimes, dtype=float)
    ids = list(job_ids)
    if ids:
        order = np.lexsort((np.asarray(ids), f))
        f = f[order]
        ids = [ids[i] for i in order]
    else:
        f = np.sort(f)
    total = len(f) + int(censored_count)
    avg = float(f.mean()) if len(f) else float("nan")
    pct = {p: float(np.percentile(f, p)) for p in PERCENTILES} if len(f) else {}
    cdf = []
    if total:
        for t in sorted(float(x) for x in thresholds):
            cdf.append((t, float(np.searchsorted(f, t, side="right")) / total))
    return Metrics(f.tolist(), avg, cdf, pct, int(censored_count), total, ids)


def summarize(trace, cdf_thresholds: Sequence[float] = DEFAULT_THRESHOLDS) -> Metrics:
    """Aggregate a simulation trace. Censored jobs are left out of the average
    and percentiles but stay in the CDF denominator."""
    ft = trace.flowtimes
    ids = sorted(ft)
    return summarize_flowtimes([ft[i] for i in ids], len(trace.censored), cdf_thresholds, ids)


@dataclass
class Comparison:
    relative_change: float
    cdf_gaps: list[tuple[float, float]]
    average_a: float
    average_b: float

    def to_dict(self) -> dict:
        return {"relative_change": self.relative_change, "average_a": self.average_a,
                "average_b": self.average_b, "cdf_gaps": [[t, g] for t, g in self.cdf_gaps]}


def compare(a: Metrics, b: Metrics) -> Comparison:
    """Relative average change ``(a - b) / b`` and CDF differences ``a - b``
    at thresholds present in both."""
    if not a.per_job_flowtimes or not b.per_job_flowtimes:
        raise ValueError("compare needs two nonempty summaries")
    rel = (a.average_flowtime - b.average_flowtime) / b.average_flowtime
    bmap = dict(b.cdf_points)
    gaps = [(t, v - bmap[t]) for t, v in a.cdf_points if t in bmap]
    return Comparison(rel, gaps, a.average_flowtime, b.average_flowtime)


def linear_trend(series: Sequence[float], dt: float = 1.0) -> tuple[float, float]:
    """Least-squares slope and intercept of ``series`` against time."""
    y = np.asarray(series, dtype=float)
    if len(y) < 2:
        return 0.0, float(y[0]) if len(y) else 0.0
    t = np.arange(len(y)) * dt
    slope, intercept = np.polyfit(t, y, 1)
    return float(slope), float(intercept)


def metrics_json(m: Metrics, extra: dict | None = None) -> str:
    d = m.to_dict()
    if extra:
        d.update(extra)
    return json.dumps(d, indent=2, sort_keys=True) + "\n"


def cdf_csv(m: Metrics) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["threshold", "fraction"])
    for t, v in m.cdf_points:
        w.writerow([repr(t), repr(v)])
    return buf.getvalue()


def flowtimes_csv(m: Metrics) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["job_id", "flowtime"])
    ids = m.job_ids or range(len(m.per_job_flowtimes))
    for j, f in zip(ids, m.per_job_flowtimes):
        w.writerow([j, repr(f)])
    return buf.getvalue()


def write_metrics(m: Metrics, stem, extra: dict | None = None, per_job: bool = False) -> list[str]:
    """Write ``<stem>.metrics.json`` and ``<stem>.cdf.csv`` (plus
    ``<stem>.flowtimes.csv`` when ``per_job``); returns the paths."""
    stem = str(stem)
    out = [stem + ".metrics.json", stem + ".cdf.csv"]
    with open(out[0], "w", encoding="utf-8", newline="") as fh:
        fh.write(metrics_json(m, extra))
    with open(out[1], "w", encoding="utf-8", newline="") as fh:
        fh.write(cdf_csv(m))
    if per_job:
        out.append(stem + ".flowtimes.csv")
        with open(out[2], "w", encoding="utf-8", newline="") as fh:
            fh.write(flowtimes_csv(m))
    return out
