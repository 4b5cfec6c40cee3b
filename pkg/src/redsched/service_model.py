"""Machine service-capacity model (alternating available/unavailable periods).

Each machine alternates between an available period (AP) and an unavailable
period (UP). Period lengths are Gamma distributed and the service rate is
drawn uniformly once per period. Raw rates are multiplied by a single
normalization constant so that the long-run mean rate is exactly one.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Iterable, Optional, Sequence

import numpy as np

AP = "AP"
UP = "UP"


class ServiceModelError(ValueError):
    pass


@dataclass(frozen=True)
class ServiceModelParams:
    ap_shape: float
    ap_scale: float
    up_shape: float
    up_scale: float
    ap_rate_range: tuple[float, float]
    up_rate_range: tuple[float, float]
    normalization: Optional[float] = None
    # Optional per-chunk rate redraw inside a period; None keeps one draw per period.
    redraw_interval: Optional[float] = None

    def __post_init__(self):
        for name in ("ap_shape", "ap_scale", "up_shape", "up_scale"):
            v = getattr(self, name)
            if not (v > 0 and math.isfinite(v)):
                raise ServiceModelError(f"{name} must be a positive finite number, got {v!r}")
        for name in ("ap_rate_range", "up_rate_range"):
            lo, hi = getattr(self, name)
            if lo < 0 or lo > hi:
                raise ServiceModelError(f"{name} must satisfy 0 <= lower <= upper, got {(lo, hi)!r}")
            object.__setattr__(self, name, (float(lo), float(hi)))
        if self.redraw_interval is not None and not self.redraw_interval > 0:
            raise ServiceModelError("redraw_interval must be positive")
        if self.normalization is None:
            c, _ = derive_normalization(self)
            object.__setattr__(self, "normalization", c)
        elif not self.normalization > 0:
            raise ServiceModelError("normalization must be positive")

    @property
    def ap_fraction(self) -> float:
        mean_ap = self.ap_shape * self.ap_scale
        mean_up = self.up_shape * self.up_scale
        return mean_ap / (mean_ap + mean_up)

    @property
    def raw_mean_rate(self) -> float:
        p = self.ap_fraction
        return p * sum(self.ap_rate_range) / 2 + (1 - p) * sum(self.up_rate_range) / 2

    @property
    def peak_rate_delta(self) -> float:
        return self.normalization * max(self.ap_rate_range[1], self.up_rate_range[1])

    @property
    def is_deterministic(self) -> bool:
        """True when every period delivers the same constant rate."""
        lo_a, hi_a = self.ap_rate_range
        lo_u, hi_u = self.up_rate_range
        return lo_a == hi_a == lo_u == hi_u

    @classmethod
    def apup_default(cls) -> "ServiceModelParams":
        return cls(
            ap_shape=0.34, ap_scale=94.35,
            up_shape=0.19, up_scale=39.92,
            ap_rate_range=(2.0, 3.0), up_rate_range=(0.0, 0.3),
        )

    @classmethod
    def unit_rate(cls) -> "ServiceModelParams":
        """Variability-free machines: rate 1 at all times."""
        return cls(
            ap_shape=1.0, ap_scale=1.0, up_shape=1.0, up_scale=1.0,
            ap_rate_range=(1.0, 1.0), up_rate_range=(1.0, 1.0),
        )

    def to_dict(self) -> dict:
        return {
            "ap_shape": self.ap_shape, "ap_scale": self.ap_scale,
            "up_shape": self.up_shape, "up_scale": self.up_scale,
            "ap_rate_range": list(self.ap_rate_range),
            "up_rate_range": list(self.up_rate_range),
            "normalization": self.normalization,
            "redraw_interval": self.redraw_interval,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "ServiceModelParams":
        d = dict(d)
        d["ap_rate_range"] = tuple(d["ap_rate_range"])
        d["up_rate_range"] = tuple(d["up_rate_range"])
        return cls(**d)


def derive_normalization(params: ServiceModelParams) -> tuple[float, float]:
    """Return ``(c, delta)`` where ``c`` scales raw rates to unit long-run mean
    and ``delta`` is the resulting peak rate. Any ``normalization`` already set
    on *params* is ignored."""
    raw = params.raw_mean_rate
    if not raw > 0:
        raise ServiceModelError("degenerate service model: long-run mean raw rate is zero")
    c = 1.0 / raw
    return c, c * max(params.ap_rate_range[1], params.up_rate_range[1])


@dataclass
class MachineTimeline:
    machine_id: int
    kinds: list[str]
    durations: np.ndarray
    rates: np.ndarray
    peak_rate_delta: float
    horizon: float
    _ends: np.ndarray = field(init=False, repr=False)
    _cum: np.ndarray = field(init=False, repr=False)

    def __post_init__(self):
        self.durations = np.asarray(self.durations, dtype=float)
        self.rates = np.asarray(self.rates, dtype=float)
        self._ends = np.cumsum(self.durations)
        self._cum = np.concatenate(([0.0], np.cumsum(self.durations * self.rates)))

    @property
    def periods(self) -> list[tuple[str, float, float]]:
        return list(zip(self.kinds, self.durations.tolist(), self.rates.tolist()))

    def service_at(self, t) -> np.ndarray:
        """Cumulative service S(0, t] for scalar or array ``t`` (no range check)."""
        t = np.asarray(t, dtype=float)
        idx = np.searchsorted(self._ends, t, side="left")
        idx = np.minimum(idx, len(self._ends) - 1)
        start = self._ends[idx] - self.durations[idx]
        return self._cum[idx] + (t - start) * self.rates[idx]

    def slot_service(self, n_slots: int, slot_length: float = 1.0) -> np.ndarray:
        """Service delivered in each slot ``(k L, (k+1) L]`` for ``k < n_slots``."""
        bounds = np.arange(n_slots + 1, dtype=float) * slot_length
        if bounds[-1] > self._ends[-1] + 1e-9:
            raise ServiceModelError("timeline shorter than requested slots")
        return np.diff(self.service_at(bounds))


def _stationary_start(params: ServiceModelParams, rng: np.random.Generator, size: int):
    """Kind, remaining length and rate of the period in progress at time 0 for a
    process that has been running forever: AP with its long-run time fraction,
    remaining length from the equilibrium (length-biased, uniformly cut) law."""
    c = params.normalization
    is_ap = rng.random(size) < params.ap_fraction
    shape = np.where(is_ap, params.ap_shape, params.up_shape)
    scale = np.where(is_ap, params.ap_scale, params.up_scale)
    length = rng.gamma(shape + 1.0, scale) * rng.random(size)
    lo = np.where(is_ap, params.ap_rate_range[0], params.up_rate_range[0])
    hi = np.where(is_ap, params.ap_rate_range[1], params.up_rate_range[1])
    rate = rng.uniform(lo, hi) * c
    return is_ap, np.maximum(length, np.finfo(float).tiny), rate


def _draw_periods(params: ServiceModelParams, rng: np.random.Generator, horizon: float,
                  stationary: bool = False):
    c = params.normalization
    kinds: list[str] = []
    durations: list[np.ndarray] = []
    rates: list[np.ndarray] = []
    total = 0.0
    first, second = AP, UP
    if stationary:
        first_ap, first_d, first_r = _stationary_start(params, rng, 1)
        if first_ap[0]:
            first, second = UP, AP
        kinds.append(AP if first_ap[0] else UP)
        durations.append(first_d)
        rates.append(first_r)
        total = float(first_d[0])
    cycle = params.ap_shape * params.ap_scale + params.up_shape * params.up_scale
    block = max(8, int(2 * horizon / cycle) + 8)
    draw = {
        AP: lambda: (rng.gamma(params.ap_shape, params.ap_scale, size=block),
                     rng.uniform(*params.ap_rate_range, size=block) * c),
        UP: lambda: (rng.gamma(params.up_shape, params.up_scale, size=block),
                     rng.uniform(*params.up_rate_range, size=block) * c),
    }
    while total < horizon:
        d1, r1 = draw[first]()
        d2, r2 = draw[second]()
        d = np.empty(2 * block)
        d[0::2], d[1::2] = d1, d2
        r = np.empty(2 * block)
        r[0::2], r[1::2] = r1, r2
        # Gamma draws with small shape underflow to exactly zero now and then.
        d = np.maximum(d, np.finfo(float).tiny)
        ends = total + np.cumsum(d)
        keep = int(np.searchsorted(ends, horizon, side="left")) + 1
        keep = min(keep + (keep % 2), 2 * block)  # stop after a full cycle
        durations.append(d[:keep])
        rates.append(r[:keep])
        kinds.extend([first, second] * (keep // 2))
        total = float(ends[keep - 1])
    return kinds, np.concatenate(durations), np.concatenate(rates)


def _split_redraw(params, rng, kinds, durations, rates):
    step = params.redraw_interval
    c = params.normalization
    out_k, out_d, out_r = [], [], []
    for kind, d, r in zip(kinds, durations, rates):
        lo, hi = params.ap_rate_range if kind == AP else params.up_rate_range
        n = max(1, int(math.ceil(d / step)))
        pieces = np.full(n, step)
        pieces[-1] = d - step * (n - 1)
        out_k.extend([kind] * n)
        out_d.append(pieces)
        out_r.append(np.concatenate(([r], rng.uniform(lo, hi, size=n - 1) * c)))
    return out_k, np.concatenate(out_d), np.concatenate(out_r)


def machine_rng(seed: int, machine_id: int) -> np.random.Generator:
    return np.random.default_rng(np.random.SeedSequence([int(seed), 0x5E, int(machine_id)]))


def generate_timeline(params: ServiceModelParams, machine_id: int, horizon: float,
                      seed: int, stationary: bool = False) -> MachineTimeline:
    """Sample one machine's periods. By default the path starts at the
    beginning of an AP period; ``stationary=True`` instead starts it mid-way
    through a period drawn from the long-run regime, so the expected rate is
    1 at every instant."""
    if not horizon > 0:
        raise ServiceModelError("horizon must be positive")
    rng = machine_rng(seed, machine_id)
    kinds, durations, rates = _draw_periods(params, rng, horizon, stationary)
    if params.redraw_interval is not None:
        kinds, durations, rates = _split_redraw(params, rng, kinds, durations, rates)
    return MachineTimeline(machine_id, kinds, durations, rates, params.peak_rate_delta, float(horizon))


def cumulative_service(timeline: MachineTimeline, t0: float, t1: float) -> float:
    """Work delivered by the machine over ``(t0, t1]``."""
    if not (0 <= t0 <= t1 <= timeline.horizon):
        raise ServiceModelError(
            f"interval ({t0}, {t1}] outside timeline horizon [0, {timeline.horizon}]")
    if t0 == t1:
        return 0.0
    s0, s1 = timeline.service_at([t0, t1])
    return max(0.0, float(s1 - s0))


def slot_service_matrix(params: ServiceModelParams, n_machines: int, n_slots: int,
                        seed: int, slot_length: float = 1.0) -> np.ndarray:
    """Per-machine, per-slot delivered service, shape ``(n_machines, n_slots)``."""
    horizon = max(n_slots * slot_length, slot_length)
    if params.is_deterministic:
        return np.full((n_machines, n_slots), params.normalization * params.ap_rate_range[0] * slot_length)
    out = np.empty((n_machines, n_slots))
    for m in range(n_machines):
        out[m] = generate_timeline(params, m, horizon, seed).slot_service(n_slots, slot_length)
    return out


# ---------------------------------------------------------------------------
# Redundancy speedup g(r, t)


@dataclass(frozen=True)
class SpeedupEntry:
    r: int
    t: float
    estimate: float
    std_error: float
    replications: int
    seed: int


@dataclass
class SpeedupTable:
    peak_rate_delta: float
    entries: dict[tuple[int, float], SpeedupEntry] = field(default_factory=dict)

    def add(self, entry: SpeedupEntry) -> None:
        self.entries[(entry.r, entry.t)] = entry

    def __getitem__(self, key: tuple[int, float]) -> SpeedupEntry:
        return self.entries[key]

    def times(self) -> list[float]:
        return sorted({t for _, t in self.entries})

    def redundancies(self, t: float) -> list[int]:
        return sorted(r for r, tt in self.entries if tt == t)

    def to_csv(self, path) -> None:
        with open(path, "w", newline="", encoding="utf-8") as fh:
            w = csv.writer(fh)
            w.writerow(["r", "t", "estimate", "std_error", "replications", "seed"])
            for key in sorted(self.entries):
                e = self.entries[key]
                w.writerow([e.r, repr(e.t), repr(e.estimate), repr(e.std_error), e.replications, e.seed])

    @classmethod
    def from_csv(cls, path, peak_rate_delta: float) -> "SpeedupTable":
        table = cls(peak_rate_delta)
        with open(path, newline="", encoding="utf-8") as fh:
            for row in csv.DictReader(fh):
                table.add(SpeedupEntry(int(row["r"]), float(row["t"]), float(row["estimate"]),
                                       float(row["std_error"]), int(row["replications"]), int(row["seed"])))
        return table


def _sample_service_paths(params: ServiceModelParams, n_paths: int, t: float,
                          rng: np.random.Generator) -> np.ndarray:
    """Cumulative service S(0, t] for ``n_paths`` independent machines, each
    observed from a stationary start (see :func:`_stationary_start`) so that
    the expected rate is 1 throughout and g(1, t) = t holds exactly."""
    c = params.normalization
    if params.is_deterministic:
        return np.full(n_paths, c * params.ap_rate_range[0] * t)
    is_ap, d, rate = _stationary_start(params, rng, n_paths)
    out = np.zeros(n_paths)
    clock = np.zeros(n_paths)
    live = np.arange(n_paths)
    ranges = {True: params.ap_rate_range, False: params.up_rate_range}
    while live.size:
        used = np.minimum(d, t - clock[live])
        if params.redraw_interval is None:
            out[live] += used * rate
        else:
            kind = is_ap[live]
            lo = np.where(kind, ranges[True][0], ranges[False][0]) * c
            hi = np.where(kind, ranges[True][1], ranges[False][1]) * c
            out[live] += _redraw_work(used, rate, lo, hi, params.redraw_interval, rng)
        clock[live] += d
        keep = clock[live] < t
        live = live[keep]
        is_ap[live] = ~is_ap[live]
        kind = is_ap[live]
        shape = np.where(kind, params.ap_shape, params.up_shape)
        scale = np.where(kind, params.ap_scale, params.up_scale)
        d = np.maximum(rng.gamma(shape, scale), np.finfo(float).tiny)
        lo = np.where(kind, ranges[True][0], ranges[False][0])
        hi = np.where(kind, ranges[True][1], ranges[False][1])
        rate = rng.uniform(lo, hi) * c
    return out


def _redraw_work(used, first_rate, lo, hi, step, rng):
    work = np.empty_like(used)
    lo = np.broadcast_to(lo, used.shape)
    hi = np.broadcast_to(hi, used.shape)
    for i, (u, r0) in enumerate(zip(used, first_rate)):
        n = max(1, int(math.ceil(u / step)))
        pieces = np.full(n, step)
        pieces[-1] = u - step * (n - 1)
        rates = np.concatenate(([r0], rng.uniform(lo[i], hi[i], size=n - 1)))
        work[i] = float(pieces @ rates)
    return work


def estimate_speedup_curve(params: ServiceModelParams, max_r: int, t: float,
                           replications: int, seed: int) -> list[SpeedupEntry]:
    """Estimate g(r, t) for r = 1..max_r from shared replications.

    Each replication draws ``max_r`` fresh machines; g(r, t) averages the best
    of the first ``r``. Sharing draws across r keeps the curve's differences
    low-variance without changing any single estimate's distribution.
    """
    if max_r < 1 or not t > 0 or replications < 2:
        raise ServiceModelError("need r >= 1, t > 0 and replications >= 2")
    rng = np.random.default_rng(np.random.SeedSequence([int(seed), int(round(t * 1e6))]))
    samples = _sample_service_paths(params, replications * max_r, t, rng).reshape(replications, max_r)
    best = np.maximum.accumulate(samples, axis=1)
    entries = []
    for r in range(1, max_r + 1):
        col = best[:, r - 1]
        mean = float(col.mean())
        se = float(col.std(ddof=1) / math.sqrt(replications))
        entries.append(SpeedupEntry(r, float(t), mean, se, replications, int(seed)))
    return entries


def estimate_speedup(params: ServiceModelParams, r: int, t: float, replications: int,
                     seed: int) -> SpeedupEntry:
    return estimate_speedup_curve(params, r, t, replications, seed)[r - 1]


def build_speedup_table(params: ServiceModelParams, rs: Iterable[int], ts: Iterable[float],
                        replications: int, seed: int) -> SpeedupTable:
    rs = sorted(rs)
    table = SpeedupTable(params.peak_rate_delta)
    for t in ts:
        for e in estimate_speedup_curve(params, rs[-1], t, replications, seed):
            if e.r in rs:
                table.add(e)
    return table


@dataclass(frozen=True)
class SpeedupCheck:
    name: str
    r: int
    t: float
    passed: bool
    slack: float


@dataclass
class SpeedupReport:
    checks: list[SpeedupCheck]

    @property
    def passed(self) -> bool:
        return all(c.passed for c in self.checks)

    def failures(self) -> list[SpeedupCheck]:
        return [c for c in self.checks if not c.passed]


def verify_speedup_properties(table: SpeedupTable, n_sigma: float = 3.0) -> SpeedupReport:
    """Check concavity in r, the min(delta*t, r*t) cap and g(1, t) = t.

    Slacks are reported so that a negative slack is a violation.
    """
    delta = table.peak_rate_delta
    checks: list[SpeedupCheck] = []
    for t in table.times():
        rs = table.redundancies(t)
        if rs[0] != 1 or rs != list(range(1, rs[-1] + 1)):
            raise ServiceModelError(f"table at t={t} lacks consecutive r values starting at 1: {rs}")
        g = {r: table[(r, t)] for r in rs}
        first = g[1]
        checks.append(SpeedupCheck("unit", 1, t, abs(first.estimate - t) <= n_sigma * first.std_error,
                                   n_sigma * first.std_error - abs(first.estimate - t)))
        for r in rs:
            e = g[r]
            cap = min(delta * t, r * t)
            slack = cap + n_sigma * e.std_error - e.estimate
            checks.append(SpeedupCheck("cap", r, t, slack >= 0, slack))
        for r in rs[2:]:
            a, b, c = g[r].estimate, g[r - 1].estimate, g[r - 2].estimate
            se = math.sqrt(g[r].std_error ** 2 + 4 * g[r - 1].std_error ** 2 + g[r - 2].std_error ** 2)
            slack = (b - c) - (a - b) + n_sigma * se
            checks.append(SpeedupCheck("concave", r, t, slack >= 0, slack))
    return SpeedupReport(checks)
