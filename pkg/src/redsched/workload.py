"""Job arrival sequences: Poisson arrivals with Pareto sizes, or CSV traces."""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass
from pathlib import Path
from typing import Sequence

import numpy as np


class TraceError(ValueError):
    pass


@dataclass(frozen=True)
class JobSpec:
    job_id: int
    arrival: float
    size: float

    def __post_init__(self):
        if self.arrival < 0 or not math.isfinite(self.arrival):
            raise ValueError(f"job {self.job_id}: arrival must be a finite non-negative number")
        if not (self.size > 0 and math.isfinite(self.size)):
            raise ValueError(f"job {self.job_id}: size must be a finite positive number")


@dataclass(frozen=True)
class WorkloadParams:
    arrival_rate: float
    pareto_scale: float = 20.0
    pareto_shape: float = 2.0
    horizon: float = 20000.0

    def __post_init__(self):
        if not self.arrival_rate > 0:
            raise ValueError("arrival_rate must be positive")
        if not self.pareto_scale > 0:
            raise ValueError("pareto_scale must be positive")
        if not self.pareto_shape > 1:
            raise ValueError("pareto_shape must exceed 1 for a finite mean size")
        if not self.horizon > 0:
            raise ValueError("horizon must be positive")

    @property
    def mean_size(self) -> float:
        return self.pareto_shape * self.pareto_scale / (self.pareto_shape - 1)


def pareto_size(u, scale: float, shape: float):
    """Inverse-CDF Pareto draw; ``u`` in (0, 1]."""
    return scale * np.power(u, -1.0 / shape)


def generate_jobs(params: WorkloadParams, seed: int, slot_length: float = 1.0) -> list[JobSpec]:
    rng = np.random.default_rng(np.random.SeedSequence([int(seed), 0x10B5]))
    expected = params.arrival_rate * params.horizon
    chunk = int(expected + 6 * math.sqrt(expected) + 16)
    times: list[np.ndarray] = []
    clock = 0.0
    while clock < params.horizon:
        gaps = rng.exponential(1.0 / params.arrival_rate, size=chunk)
        t = clock + np.cumsum(gaps)
        times.append(t)
        clock = float(t[-1])
    arrivals = np.concatenate(times)
    arrivals = arrivals[arrivals < params.horizon]
    arrivals = np.floor(arrivals / slot_length) * slot_length
    u = 1.0 - rng.random(arrivals.size)  # (0, 1]
    sizes = pareto_size(u, params.pareto_scale, params.pareto_shape)
    return [JobSpec(i, float(a), float(s)) for i, (a, s) in enumerate(zip(arrivals, sizes))]


def load_trace(path) -> list[JobSpec]:
    """Read a ``job_id,arrival,size`` CSV and return jobs sorted by arrival, then id."""
    path = Path(path)
    jobs: list[JobSpec] = []
    seen: set[int] = set()
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header is None:
            return []
        if [h.strip() for h in header] != ["job_id", "arrival", "size"]:
            raise TraceError(f"{path}:1: expected header 'job_id,arrival,size', got {header!r}")
        for lineno, row in enumerate(reader, start=2):
            if not row or all(not c.strip() for c in row):
                continue
            if len(row) != 3:
                raise TraceError(f"{path}:{lineno}: expected 3 fields, got {len(row)}")
            try:
                job_id = int(row[0])
                arrival = float(row[1])
                size = float(row[2])
            except ValueError as exc:
                raise TraceError(f"{path}:{lineno}: {exc}") from None
            if job_id < 0:
                raise TraceError(f"{path}:{lineno}: job_id must be non-negative")
            if job_id in seen:
                raise TraceError(f"{path}:{lineno}: duplicate job_id {job_id}")
            try:
                jobs.append(JobSpec(job_id, arrival, size))
            except ValueError as exc:
                raise TraceError(f"{path}:{lineno}: {exc}") from None
            seen.add(job_id)
    return sort_jobs(jobs)


def sort_jobs(jobs):
    return sorted(jobs, key=lambda j: (j.arrival, j.job_id))


def write_trace(jobs: Sequence[JobSpec], path) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh)
        w.writerow(["job_id", "arrival", "size"])
        for j in jobs:
            w.writerow([j.job_id, repr(j.arrival), repr(j.size)])
