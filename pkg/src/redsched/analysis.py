"""Instance-level checks of the scheduling analysis on simulated traces.

All time integrals are evaluated segment by segment. Inside a recorded
segment every job progresses linearly, so integrals of linear functions of
time against the realized progress are exact (midpoint rule), and
piecewise-constant quantities such as the active count integrate exactly.
"""

from __future__ import annotations

import json
import math
from dataclasses import asdict, dataclass, field
from typing import Callable, Optional, Sequence

import numpy as np

from .schedulers import Policy
from .service_model import ServiceModelParams
from .sim_engine import SimConfig, SimTrace, run_simulation
from .workload import JobSpec

TOL = 1e-9


class AnalysisError(ValueError):
    pass


@dataclass
class Check:
    name: str
    passed: bool
    worst_slack: float
    job: Optional[int] = None
    time: Optional[float] = None
    detail: str = ""

    def __post_init__(self):
        self.passed = bool(self.passed)
        self.worst_slack = float(self.worst_slack)
        self.job = None if self.job is None else int(self.job)
        self.time = None if self.time is None else float(self.time)


@dataclass
class Report:
    checks: list[Check] = field(default_factory=list)
    notes: list[str] = field(default_factory=list)

    @property
    def passed(self) -> bool:
        return all(c.passed for c in self.checks)

    def add(self, check: Check) -> None:
        self.checks.append(check)

    def extend(self, other: "Report", prefix: str = "") -> None:
        for c in other.checks:
            self.checks.append(Check(prefix + c.name, c.passed, c.worst_slack, c.job, c.time, c.detail))
        self.notes.extend(other.notes)

    def failures(self) -> list[Check]:
        return [c for c in self.checks if not c.passed]

    def to_dict(self) -> dict:
        return {
            "passed": self.passed,
            "checks": [
                {"name": c.name, "passed": c.passed,
                 "worst_slack": c.worst_slack if math.isfinite(c.worst_slack) else None,
                 "location": {"job": c.job, "time": c.time}, "detail": c.detail}
                for c in self.checks
            ],
            "notes": self.notes,
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2, sort_keys=True)


# ---------------------------------------------------------------------------
# Transient SRPT flowtime


def transient_srpt_flowtime(remaining_sizes: Sequence[float], M: int) -> float:
    """Total remaining flowtime of SRPT on ``M`` unit-speed machines when no
    further jobs arrive. ``remaining_sizes`` must be sorted ascending."""
    p = np.asarray(remaining_sizes, dtype=float)
    n = len(p)
    if n == 0:
        return 0.0
    if np.any(np.diff(p) < 0):
        raise AnalysisError("remaining sizes must be sorted ascending")
    j = np.arange(1, n + 1)
    return float(np.dot((n - j) // M + 1, p))


def brute_force_srpt_flowtime(sizes: Sequence[float], M: int) -> float:
    """Event-by-event SRPT on unit-speed machines, all jobs present at time 0."""
    remaining = sorted(float(s) for s in sizes)
    clock = 0.0
    total = 0.0
    while remaining:
        running = remaining[:M]
        dt = running[0]
        clock += dt
        remaining = [r - dt for r in running] + remaining[M:]
        done = [r for r in remaining if r <= 1e-12]
        total += clock * len(done)
        remaining = sorted(r for r in remaining if r > 1e-12)
    return total


# ---------------------------------------------------------------------------
# Trace helpers


def _require_segments(trace: SimTrace) -> None:
    if trace.jobs and not trace.segments:
        raise AnalysisError("trace has no recorded segments; rerun with record_segments=True")


def _arrival_rank(trace: SimTrace) -> dict[int, int]:
    order = sorted(trace.jobs, key=lambda j: (j.arrival, j.job_id))
    return {j.job_id: i for i, j in enumerate(order)}


def _integral_n(trace: SimTrace) -> float:
    return float(sum(seg.n * seg.length for seg in trace.segments))


def _sample_points(trace: SimTrace, beta_scale: float) -> list[tuple[float, float]]:
    """``(t, beta(t+))`` at every segment start and at each segment end that
    opens an idle gap (where beta is zero)."""
    pts = [(seg.t0, seg.n * beta_scale) for seg in trace.segments]
    starts = {seg.t0 for seg in trace.segments}
    pts += [(seg.t1, 0.0) for seg in trace.segments if seg.t1 not in starts]
    return sorted(pts)


def _cumulative_at(trace: SimTrace, times: Sequence[float]) -> dict[float, dict[int, float]]:
    """Cumulative realized progress of each job at each of ``times``
    (which must coincide with segment boundaries)."""
    want = sorted(set(times))
    out: dict[float, dict[int, float]] = {}
    cum: dict[int, float] = {}
    k = 0
    for seg in trace.segments:
        while k < len(want) and want[k] <= seg.t0 + 1e-12:
            out[want[k]] = dict(cum)
            k += 1
        for jid, inc in zip(seg.job_ids.tolist(), seg.increments.tolist()):
            cum[jid] = cum.get(jid, 0.0) + inc
    while k < len(want):
        out[want[k]] = dict(cum)
        k += 1
    return out


@dataclass
class DualCertificate:
    alpha: dict[int, float]
    beta_scale: float
    epsilon: float
    constant: float
    slacks: list[tuple[int, float, float]]
    objective_lhs: float
    objective_rhs: float
    cost: float
    report: Report
    beta_series: list[tuple[float, float, float]] = field(default_factory=list)

    @property
    def feasible(self) -> bool:
        return min((s for _, _, s in self.slacks), default=0.0) >= -TOL

    def beta_at(self, n: int) -> float:
        return n * self.beta_scale


def _beta_series(trace: SimTrace, beta_scale: float) -> list[tuple[float, float, float]]:
    return [(seg.t0, seg.t1, seg.n * beta_scale) for seg in trace.segments]


def dual_slacks(trace: SimTrace, alpha: dict[int, float], beta_scale: float,
                constant: float) -> list[tuple[int, float, float]]:
    """Slack of ``alpha_j - beta(t) <= (t - a_j)/p_j + constant`` for every job
    at every time where the slack can attain its minimum."""
    pts = _sample_points(trace, beta_scale)
    times = np.array([t for t, _ in pts])
    betas = np.array([b for _, b in pts])
    out = []
    for job in trace.jobs:
        a, p = job.arrival, job.size
        mask = times >= a - 1e-12
        if not mask.any():
            continue
        s = (times[mask] - a) / p + constant - alpha[job.job_id] + betas[mask]
        for t, v in zip(times[mask].tolist(), s.tolist()):
            out.append((job.job_id, t, v))
    return out


def _slack_check(name: str, slacks) -> Check:
    if not slacks:
        return Check(name, True, math.inf)
    j, t, s = min(slacks, key=lambda x: x[2])
    return Check(name, s >= -TOL, s, j, t)


def _rel_check(name: str, got: float, want: float, rtol: float = 1e-6) -> Check:
    scale = max(abs(want), 1e-12)
    err = abs(got - want) / scale
    return Check(name, err <= rtol, rtol - err, detail=f"got {got!r}, expected {want!r}")


def _check_policy(trace: SimTrace, policy: Policy) -> None:
    if trace.policy != policy:
        raise AnalysisError(f"expected a {policy.value} trace, got {trace.policy.value}")


def _require_complete(trace: SimTrace) -> None:
    if trace.censored:
        raise AnalysisError(f"{len(trace.censored)} jobs unfinished at horizon; certificate needs a complete trace")


def srpt_alpha(trace: SimTrace, epsilon: float) -> dict[int, float]:
    """Dual variable per job from the SRPT state seen on arrival."""
    M = trace.config.M
    arrivals = sorted({j.arrival for j in trace.jobs})
    snap = _cumulative_at(trace, arrivals)
    rank = _arrival_rank(trace)
    alpha = {}
    for job in trace.jobs:
        done = snap[job.arrival]
        rem = []
        for other in trace.jobs:
            if rank[other.job_id] >= rank[job.job_id]:
                continue
            c = trace.completion.get(other.job_id, math.inf)
            if c <= job.arrival + 1e-12:
                continue
            left = other.size - done.get(other.job_id, 0.0)
            if left > 1e-12:
                rem.append(left)
        n = len(rem) + 1
        p = job.size
        smaller = sorted(r for r in rem if r <= p)
        rho = len(smaller)
        first = sum(((n - k) // M - (n - k - 1) // M) * pk for k, pk in enumerate(smaller, start=1))
        alpha[job.job_id] = (first / p + (n - rho - 1) // M + 1) / (1 + epsilon)
    return alpha


def build_srpt_dual_certificate(trace: SimTrace, epsilon: float,
                                alpha: Optional[dict[int, float]] = None) -> DualCertificate:
    _check_policy(trace, Policy.SRPT)
    _require_segments(trace)
    _require_complete(trace)
    if not epsilon > 0:
        raise AnalysisError("epsilon must be positive")
    M = trace.config.M
    if alpha is None:
        alpha = srpt_alpha(trace, epsilon)
    beta_scale = 1.0 / ((1 + epsilon) * M)
    slacks = dual_slacks(trace, alpha, beta_scale, 2.0)
    cost = float(sum(trace.flowtimes.values()))
    lhs = sum(alpha[j.job_id] * j.size for j in trace.jobs)
    rhs = M * beta_scale * _integral_n(trace)
    report = Report()
    if abs(trace.config.speed_augmentation - (1 + epsilon)) > 1e-9:
        report.notes.append(
            f"trace speed {trace.config.speed_augmentation} differs from 1+epsilon={1 + epsilon}")
    report.add(Check("alpha_nonnegative", min(alpha.values(), default=0) >= 0, min(alpha.values(), default=0)))
    report.add(_slack_check("p2_constraint", slacks))
    report.add(_rel_check("alpha_objective_equals_cost", lhs, cost))
    report.add(_rel_check("beta_objective_equals_cost_over_speed", rhs, cost / (1 + epsilon)))
    return DualCertificate(alpha, beta_scale, epsilon, 2.0, slacks, lhs, rhs, cost, report,
                           _beta_series(trace, beta_scale))


def fair_alpha(trace: SimTrace, epsilon: float) -> dict[int, float]:
    M = trace.config.M
    speed = 4 + epsilon
    rank = _arrival_rank(trace)
    sizes = {j.job_id: j.size for j in trace.jobs}
    alpha = {j.job_id: 0.0 for j in trace.jobs}
    for seg in trace.segments:
        if not seg.n:
            continue
        ids = seg.job_ids.tolist()
        inc = seg.increments
        if seg.n >= M:
            order = sorted(range(seg.n), key=lambda i: rank[ids[i]])
            running = 0.0
            for i in order:
                running += float(inc[i])
                alpha[ids[i]] += running / (speed * M * sizes[ids[i]])
        else:
            for i, jid in enumerate(ids):
                alpha[jid] += float(inc[i]) / (4 * speed * sizes[jid])
    return alpha


def build_fair_dual_certificate(trace: SimTrace, epsilon: float,
                                alpha: Optional[dict[int, float]] = None) -> DualCertificate:
    _check_policy(trace, Policy.FAIR_R)
    _require_segments(trace)
    _require_complete(trace)
    if not epsilon > 0:
        raise AnalysisError("epsilon must be positive")
    M = trace.config.M
    if alpha is None:
        alpha = fair_alpha(trace, epsilon)
    beta_scale = 1.0 / ((4 + epsilon) * M)
    slacks = dual_slacks(trace, alpha, beta_scale, 0.25)
    cost = float(sum(trace.flowtimes.values()))
    lhs = sum(alpha[j.job_id] * j.size for j in trace.jobs)
    rhs = M * beta_scale * _integral_n(trace)
    bound = epsilon / (16 + 4 * epsilon) * cost
    report = Report()
    if abs(trace.config.speed_augmentation - (4 + epsilon)) > 1e-9:
        report.notes.append(
            f"trace speed {trace.config.speed_augmentation} differs from 4+epsilon={4 + epsilon}")
    report.add(Check("alpha_nonnegative", min(alpha.values(), default=0) >= 0, min(alpha.values(), default=0)))
    report.add(_slack_check("fair_constraint", slacks))
    gap = lhs - rhs - bound
    report.add(Check("dual_objective_bound", gap >= -1e-6 * max(cost, 1.0), gap,
                     detail=f"dual objective {lhs - rhs!r} vs {bound!r}"))
    return DualCertificate(alpha, beta_scale, epsilon, 0.25, slacks, lhs, rhs, cost, report,
                           _beta_series(trace, beta_scale))


# ---------------------------------------------------------------------------
# Potential function for LAPS+R(beta)


def _progress_curves(trace: SimTrace) -> dict[int, tuple[np.ndarray, np.ndarray]]:
    pts: dict[int, tuple[list, list]] = {}
    cum: dict[int, float] = {}
    for seg in trace.segments:
        for jid, inc in zip(seg.job_ids.tolist(), seg.increments.tolist()):
            ts, vs = pts.setdefault(jid, ([], []))
            c0 = cum.get(jid, 0.0)
            if not ts or ts[-1] != seg.t0:
                ts.append(seg.t0)
                vs.append(c0)
            cum[jid] = c0 + inc
            ts.append(seg.t1)
            vs.append(cum[jid])
    return {j: (np.array(t), np.array(v)) for j, (t, v) in pts.items()}


def _eval_curve(curve, t: float) -> float:
    if curve is None:
        return 0.0
    ts, vs = curve
    return float(np.interp(t, ts, vs, left=0.0, right=vs[-1]))


@dataclass
class PotentialSeries:
    times: np.ndarray
    lambda_left: np.ndarray
    lambda_right: np.ndarray
    pi: dict[int, np.ndarray]
    f_values: dict[int, np.ndarray]
    delta_speed: float
    drift_slacks: list[tuple[float, float, float]]
    jump_slacks: list[tuple[float, float]]
    report: Report



def potential_weight(n_j: int, beta: float, M: int) -> float:
    return 1.0 if beta * n_j <= M else M / (beta * n_j)


def _active(jobs, completion, t: float, side: str) -> list[JobSpec]:
    if side == "right":
        return [j for j in jobs if j.arrival <= t + 1e-12 and completion.get(j.job_id, math.inf) > t + 1e-12]
    return [j for j in jobs if j.arrival < t - 1e-12 and completion.get(j.job_id, math.inf) >= t - 1e-12]


def potential_series(laps_trace: SimTrace, reference_trace: SimTrace, beta: float,
                     epsilon: float, delta_rate_cap: float, tol: float = 1e-6) -> PotentialSeries:
    """Evaluate the LAPS+R potential against a feasible reference schedule and
    check its boundary, jump and drift conditions."""
    _require_segments(laps_trace)
    _require_segments(reference_trace)
    if {j.job_id for j in laps_trace.jobs} != {j.job_id for j in reference_trace.jobs}:
        raise AnalysisError("LAPS and reference traces have different job sets")
    _require_complete(laps_trace)
    M = laps_trace.config.M
    if reference_trace.config.M != M:
        raise AnalysisError("traces use different machine counts")
    delta = 2 + 2 * beta + 2 * epsilon
    Delta = delta_rate_cap
    jobs = sorted(laps_trace.jobs, key=lambda j: (j.arrival, j.job_id))
    comp, comp_ref = laps_trace.completion, reference_trace.completion
    laps_curve = _progress_curves(laps_trace)
    ref_curve = _progress_curves(reference_trace)

    grid = {0.0}
    for tr in (laps_trace, reference_trace):
        for seg in tr.segments:
            grid.add(seg.t0)
            grid.add(seg.t1)
    grid.update(j.arrival for j in jobs)
    times = np.array(sorted(grid))

    pi = {j.job_id: np.zeros(len(times)) for j in jobs}
    for k, t in enumerate(times.tolist()):
        for j in jobs:
            if j.arrival <= t:
                d = _eval_curve(ref_curve.get(j.job_id), t) - _eval_curve(laps_curve.get(j.job_id), t)
                pi[j.job_id][k] = max(d, 0.0)

    # f recorded for the right-continuous active set; NaN where inactive
    f_values = {j.job_id: np.full(len(times), np.nan) for j in jobs}

    def lam(k: int, side: str) -> float:
        act = _active(jobs, comp, float(times[k]), side)
        total = 0.0
        for n_j, j in enumerate(act, start=1):
            f = potential_weight(n_j, beta, M)
            if side == "right":
                f_values[j.job_id][k] = f
            total += pi[j.job_id][k] / (delta * f)
        return total

    left = np.array([lam(k, "left") for k in range(len(times))])
    right = np.array([lam(k, "right") for k in range(len(times))])

    report = Report()
    first = min(j.arrival for j in jobs)
    k0 = int(np.searchsorted(times, first))
    last = max(comp.values())
    k1 = int(np.searchsorted(times, last))
    report.add(Check("boundary_start", right[k0] == 0.0 and left[k0] == 0.0, -max(right[k0], left[k0]),
                     time=float(times[k0])))
    report.add(Check("boundary_end", right[k1] == 0.0, -right[k1], time=float(times[k1])))

    events = sorted({j.arrival for j in jobs} | set(comp.values()))
    jumps = []
    for t in events:
        k = int(np.argmin(np.abs(times - t)))
        jumps.append((float(times[k]), float(left[k] - right[k])))
    jt, js = min(jumps, key=lambda x: x[1])
    report.add(Check("jump_nonincreasing", js >= -tol, js, time=jt))

    drifts = []
    coef = (delta + 1) * Delta / delta
    gain = epsilon * beta / (2 * delta)
    for k in range(len(times) - 1):
        t0, t1 = float(times[k]), float(times[k + 1])
        mid = 0.5 * (t0 + t1)
        n = len(_active(jobs, comp, mid, "right"))
        n_ref = len(_active(reference_trace.jobs, comp_ref, mid, "right"))
        bound = (coef * n_ref - gain * n) * (t1 - t0)
        change = left[k + 1] - right[k]
        drifts.append((t0, t1, bound + tol - change))
    if drifts:
        d0, d1, ds = min(drifts, key=lambda x: x[2])
        report.add(Check("drift_bound", ds >= 0, ds, time=d0))
    return PotentialSeries(times, left, right, pi, f_values, delta, drifts, jumps, report)


# ---------------------------------------------------------------------------
# Approximate-objective bound


def p1_objective_bound(trace: SimTrace, delta_peak: float, tol: float = 1e-6) -> Report:
    """Per completed job: integral of ((t - a_j + 2 p_j)/p_j) h_j(t) dt must not
    exceed (1 + 2 delta_peak) times the job's flowtime."""
    _require_segments(trace)
    jobs = trace.job_map
    lhs = {jid: 0.0 for jid in trace.completion}
    for seg in trace.segments:
        mid = 0.5 * (seg.t0 + seg.t1)
        for jid, inc in zip(seg.job_ids.tolist(), seg.increments.tolist()):
            if jid in lhs and inc:
                job = jobs[jid]
                lhs[jid] += inc * (mid - job.arrival + 2 * job.size) / job.size
    report = Report()
    skipped = trace.censored
    if skipped:
        report.notes.append(f"skipped {len(skipped)} incomplete jobs: {skipped[:10]}")
    flow = trace.flowtimes
    worst = None
    for jid, val in lhs.items():
        slack = (1 + 2 * delta_peak) * flow[jid] + tol - val
        if worst is None or slack < worst[1]:
            worst = (jid, slack)
    if worst is not None:
        report.add(Check("per_job_bound", worst[1] >= 0, worst[1], job=worst[0]))
        total = (1 + 2 * delta_peak) * sum(flow.values()) + tol * len(lhs) - sum(lhs.values())
        report.add(Check("aggregate_bound", total >= 0, total))
    return report


def p1_integrand_values(trace: SimTrace) -> dict[int, float]:
    jobs = trace.job_map
    out = {jid: 0.0 for jid in trace.completion}
    for seg in trace.segments:
        mid = 0.5 * (seg.t0 + seg.t1)
        for jid, inc in zip(seg.job_ids.tolist(), seg.increments.tolist()):
            if jid in out:
                job = jobs[jid]
                out[jid] += inc * (mid - job.arrival + 2 * job.size) / job.size
    return out


# ---------------------------------------------------------------------------
# Random instance suites


def random_instance(rng: np.random.Generator, max_jobs: int, integer_sizes: bool = False,
                    max_size: float = 10.0, arrival_span: Optional[int] = None) -> list[JobSpec]:
    n = int(rng.integers(1, max_jobs + 1))
    span = arrival_span if arrival_span is not None else max(1, n)
    arrivals = np.sort(rng.integers(0, span + 1, size=n)).astype(float)
    if integer_sizes:
        sizes = rng.integers(1, int(max_size) + 1, size=n).astype(float)
    else:
        sizes = rng.uniform(0.5, max_size, size=n)
    return [JobSpec(i, float(a), float(s)) for i, (a, s) in enumerate(zip(arrivals, sizes))]


def simulate_exact(jobs: Sequence[JobSpec], M: int, policy, speed: float = 1.0,
                   beta: Optional[float] = None, seed: int = 0,
                   service: Optional[ServiceModelParams] = None) -> SimTrace:
    """Run with reassignment at every completion instant, so that checkpoints
    coincide exactly with arrivals and departures. Defaults to unit-rate
    machines; the horizon is long enough for every job to finish."""
    service = service or ServiceModelParams.unit_rate()
    last = max((j.arrival for j in jobs), default=0.0)
    work = sum(j.size for j in jobs)
    floor_rate = speed * service.normalization * min(service.ap_rate_range[0], service.up_rate_range[0])
    if floor_rate <= 0:
        raise AnalysisError("simulate_exact needs a positive minimum machine rate")
    horizon = math.ceil(last + work / floor_rate) + 2
    cfg = SimConfig(M=M, horizon=horizon, policy=policy, beta=beta, speed_augmentation=speed,
                    service_params=service, seed=seed, mid_slot_reassign=True, record_segments=True)
    return run_simulation(cfg, jobs)


def eq14_suite(max_jobs: int = 8, max_size: int = 5, max_machines: int = 4) -> Report:
    """Exhaustive comparison of the closed form with brute-force SRPT over all
    size multisets."""
    from itertools import combinations_with_replacement

    report = Report()
    worst = (0.0, None)
    count = 0
    for M in range(1, max_machines + 1):
        for n in range(0, max_jobs + 1):
            for sizes in combinations_with_replacement(range(1, max_size + 1), n):
                formula = transient_srpt_flowtime(sizes, M)
                brute = brute_force_srpt_flowtime(sizes, M)
                count += 1
                err = abs(formula - brute)
                if err > worst[0] or worst[1] is None:
                    worst = (err, (M, sizes))
    report.add(Check("formula_equals_brute_force", worst[0] == 0.0, -worst[0],
                     detail=f"{count} cases; worst at M, sizes = {worst[1]}"))
    return report


def srpt_dual_suite(n_instances: int = 100, max_jobs: int = 20, max_machines: int = 5,
                    epsilon: float = 1.0, seed: int = 20240901,
                    corrupt: Optional[Callable[[dict], dict]] = None) -> Report:
    rng = np.random.default_rng(seed)
    report = Report()
    for k in range(n_instances):
        jobs = random_instance(rng, max_jobs)
        M = int(rng.integers(1, max_machines + 1))
        trace = simulate_exact(jobs, M, Policy.SRPT, speed=1 + epsilon)
        alpha = srpt_alpha(trace, epsilon)
        if corrupt is not None:
            alpha = corrupt(alpha)
        cert = build_srpt_dual_certificate(trace, epsilon, alpha)
        report.extend(cert.report, prefix=f"instance{k}/")
    return report


def fair_dual_suite(n_instances: int = 100, max_jobs: int = 20, max_machines: int = 5,
                    epsilon: float = 1.0, seed: int = 20240901) -> Report:
    rng = np.random.default_rng(seed)
    report = Report()
    for k in range(n_instances):
        jobs = random_instance(rng, max_jobs)
        M = int(rng.integers(1, max_machines + 1))
        trace = simulate_exact(jobs, M, Policy.FAIR_R, speed=4 + epsilon)
        cert = build_fair_dual_certificate(trace, epsilon)
        report.extend(cert.report, prefix=f"instance{k}/")
    return report


def potential_suite(n_instances: int = 50, max_jobs: int = 15, max_machines: int = 4,
                    betas: Sequence[float] = (0.3, 0.5, 0.8), epsilon: float = 0.5,
                    seed: int = 20240902) -> Report:
    rng = np.random.default_rng(seed)
    report = Report()
    for k in range(n_instances):
        jobs = random_instance(rng, max_jobs)
        M = int(rng.integers(1, max_machines + 1))
        beta = float(betas[k % len(betas)])
        delta = 2 + 2 * beta + 2 * epsilon
        laps = simulate_exact(jobs, M, Policy.LAPS_R, speed=delta, beta=beta)
        ref = simulate_exact(jobs, M, Policy.SRPT_R, speed=1.0)
        series = potential_series(laps, ref, beta, epsilon, delta_rate_cap=1.0)
        report.extend(series.report, prefix=f"instance{k}/")
    return report


def p1_suite(n_instances: int = 100, max_jobs: int = 20, max_machines: int = 5,
             seed: int = 20240903) -> Report:
    """P1 bound over random instances for every policy, on unit-rate and on
    variable-rate machines (peak rate scaled by the run's speed)."""
    rng = np.random.default_rng(seed)
    report = Report()
    variable = ServiceModelParams.apup_default()
    for k in range(n_instances):
        jobs = random_instance(rng, max_jobs)
        M = int(rng.integers(1, max_machines + 1))
        policy = list(Policy)[k % len(Policy)]
        beta = 0.5 if policy.needs_beta else None
        trace = simulate_exact(jobs, M, policy, beta=beta)
        report.extend(p1_objective_bound(trace, 1.0), prefix=f"instance{k}/{policy.value}/unit/")
        cfg = SimConfig(M=M, horizon=400, policy=policy, beta=beta, service_params=variable, seed=k)
        trace = run_simulation(cfg, jobs)
        report.extend(p1_objective_bound(trace, variable.peak_rate_delta), prefix=f"instance{k}/{policy.value}/apup/")
    return report


def speedup_suite(params: Optional[ServiceModelParams] = None, rs: Sequence[int] = range(1, 9),
                  ts: Sequence[float] = (1, 5, 10, 50), replications: int = 10_000,
                  seed: int = 20240904) -> Report:
    from .service_model import build_speedup_table, verify_speedup_properties

    params = params or ServiceModelParams.apup_default()
    table = build_speedup_table(params, rs, ts, replications, seed)
    sp = verify_speedup_properties(table)
    report = Report()
    for c in sp.checks:
        report.add(Check(f"{c.name}/r={c.r}/t={c.t:g}", c.passed, c.slack))
    return report
