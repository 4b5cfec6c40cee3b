"""Slotted simulation of redundant execution with opportunistic checkpointing.

Time is divided into slots of ``slot_length``. Jobs arrive at slot
boundaries. Whenever a slot boundary sees an arrival, or a completion
happened during the previous slot, every active job is checkpointed (its
progress becomes that of its most advanced copy) and the policy recomputes
redundancy, shares and machine placement. Each copy then accumulates
``share * speed * machine service`` independently until the next checkpoint.

Machine rates are treated as constant inside a slot (the slot's delivered
service divided by its length). Completion instants are interpolated under
that assumption, and recorded segments are split at every completion so
that per-segment job counts and increments integrate exactly to flowtimes.
With ``mid_slot_reassign`` the policy is also re-run at each completion
instant instead of waiting for the next boundary.
"""

from __future__ import annotations

import json
import math
from array import array
from dataclasses import dataclass, field
from typing import Iterable, Iterator, Optional, Sequence

import numpy as np

from .schedulers import Assignment, Policy, check_assignment, pack_machines, policy_order, rank_plan
from .service_model import ServiceModelParams, slot_service_matrix
from .workload import JobSpec, sort_jobs

_EPS = 1e-12


class SimulationError(RuntimeError):
    pass


@dataclass
class SimConfig:
    M: int
    horizon: float
    policy: Policy
    beta: Optional[float] = None
    slot_length: float = 1.0
    speed_augmentation: float = 1.0
    service_params: ServiceModelParams = field(default_factory=ServiceModelParams.apup_default)
    seed: int = 0
    mid_slot_reassign: bool = False
    record_segments: bool = True

    def __post_init__(self):
        if isinstance(self.policy, str):
            self.policy = Policy.parse(self.policy)
        if int(self.M) != self.M or self.M < 1:
            raise ValueError("M must be a positive integer")
        self.M = int(self.M)
        if not self.horizon > 0:
            raise ValueError("horizon must be positive")
        if not self.slot_length > 0:
            raise ValueError("slot_length must be positive")
        if not self.speed_augmentation >= 1:
            raise ValueError("speed_augmentation must be >= 1")
        if self.policy.needs_beta:
            if self.beta is None or not 0 < self.beta < 1:
                raise ValueError(f"{self.policy.value} needs beta in (0, 1)")
        elif self.beta is not None:
            raise ValueError(f"beta is only meaningful for LAPS policies, not {self.policy.value}")

    @property
    def n_slots(self) -> int:
        return int(math.ceil(self.horizon / self.slot_length - 1e-9))

    def to_dict(self) -> dict:
        return {
            "M": self.M, "horizon": self.horizon, "policy": self.policy.value, "beta": self.beta,
            "slot_length": self.slot_length, "speed_augmentation": self.speed_augmentation,
            "service_params": self.service_params.to_dict(), "seed": self.seed,
            "mid_slot_reassign": self.mid_slot_reassign, "record_segments": self.record_segments,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "SimConfig":
        d = dict(d)
        d["service_params"] = ServiceModelParams.from_dict(d["service_params"])
        return cls(**d)


@dataclass
class JobRuntimeState:
    spec: JobSpec
    checkpointed_progress: float
    copy_accumulators: dict[int, float]
    redundancy: int
    share: float
    completion: Optional[float] = None

    @property
    def effective_progress(self) -> float:
        return self.checkpointed_progress + max(self.copy_accumulators.values(), default=0.0)


class _Checkpoints:
    """Columnar checkpoint log: one row per (job, checkpoint)."""

    def __init__(self):
        self.job = array("q")
        self.time = array("d")
        self.r = array("q")
        self.x = array("d")
        self.service = array("d")

    def open(self, job_ids, t, r, x) -> np.ndarray:
        start = len(self.job)
        n = len(job_ids)
        self.job.extend(np.asarray(job_ids, dtype=np.int64).tolist())
        self.time.extend([float(t)] * n)
        self.r.extend(np.asarray(r, dtype=np.int64).tolist())
        self.x.extend(np.asarray(x, dtype=float).tolist())
        self.service.extend([0.0] * n)
        return np.arange(start, start + n, dtype=np.int64)

    def close(self, rows, service) -> None:
        for row, s in zip(np.asarray(rows).tolist(), np.asarray(service, dtype=float).tolist()):
            self.service[row] = s

    def __len__(self) -> int:
        return len(self.job)


class ActiveSet:
    """Mutable state of the jobs currently in the system.

    Job arrays are kept in arrival order. Copies live in flat arrays:
    ``copy_owner`` indexes the job arrays, ``acc`` is the work each copy has
    delivered since the job's last checkpoint (already scaled by share and
    speed).
    """

    def __init__(self, M: int):
        self.M = M
        self.ids = np.zeros(0, dtype=np.int64)
        self.arrival = np.zeros(0)
        self.size = np.zeros(0)
        self.progress = np.zeros(0)
        self.r = np.zeros(0, dtype=np.int64)
        self.x = np.zeros(0)
        self.rows = np.zeros(0, dtype=np.int64)
        self.copy_owner = np.zeros(0, dtype=np.int64)
        self.copy_machine = np.zeros(0, dtype=np.int64)
        self.acc = np.zeros(0)
        self.assignment: Optional[Assignment] = None

    def __len__(self) -> int:
        return len(self.ids)

    def add(self, jobs: Sequence[JobSpec]) -> None:
        if not jobs:
            return
        self.ids = np.concatenate((self.ids, [j.job_id for j in jobs])).astype(np.int64)
        self.arrival = np.concatenate((self.arrival, [j.arrival for j in jobs]))
        self.size = np.concatenate((self.size, [j.size for j in jobs]))
        k = len(jobs)
        self.progress = np.concatenate((self.progress, np.zeros(k)))
        self.r = np.concatenate((self.r, np.zeros(k, dtype=np.int64)))
        self.x = np.concatenate((self.x, np.zeros(k)))
        self.rows = np.concatenate((self.rows, np.full(k, -1, dtype=np.int64)))

    def set_copies(self, owner, machine, acc=None) -> None:
        self.copy_owner = np.asarray(owner, dtype=np.int64)
        self.copy_machine = np.asarray(machine, dtype=np.int64)
        self.acc = np.zeros(len(self.copy_owner)) if acc is None else np.asarray(acc, dtype=float)

    def best_copy(self) -> np.ndarray:
        """Per-job maximum copy accumulator (0 for unscheduled jobs)."""
        best = np.zeros(len(self.ids))
        if len(self.acc):
            np.maximum.at(best, self.copy_owner, self.acc)
        return best

    def effective(self) -> np.ndarray:
        return self.progress + self.best_copy()

    def remove(self, keep: np.ndarray) -> None:
        new_index = np.cumsum(keep) - 1
        live = keep[self.copy_owner] if len(self.copy_owner) else np.zeros(0, dtype=bool)
        self.copy_owner = new_index[self.copy_owner[live]]
        self.copy_machine = self.copy_machine[live]
        self.acc = self.acc[live]
        for name in ("ids", "arrival", "size", "progress", "r", "x", "rows"):
            setattr(self, name, getattr(self, name)[keep])

    def job_state(self, job_id: int) -> JobRuntimeState:
        i = int(np.nonzero(self.ids == job_id)[0][0])
        mine = self.copy_owner == i
        return JobRuntimeState(
            spec=JobSpec(int(self.ids[i]), float(self.arrival[i]), float(self.size[i])),
            checkpointed_progress=float(self.progress[i]),
            copy_accumulators={int(m): float(a) for m, a in zip(self.copy_machine[mine], self.acc[mine])},
            redundancy=int(self.r[i]), share=float(self.x[i]),
        )


def checkpoint_and_reassign(active: ActiveSet, policy: Policy, M: int, time: float,
                            rng, beta: Optional[float] = None,
                            log: Optional[_Checkpoints] = None) -> Assignment:
    """Checkpoint every active job and compute a fresh placed assignment."""
    gained = active.best_copy()
    active.progress = active.progress + gained
    if log is not None and len(active):
        opened = active.rows >= 0
        log.close(active.rows[opened], gained[opened])
    remaining = np.maximum(active.size - active.progress, _EPS)
    order = policy_order(policy.base, active.ids, active.arrival, remaining)
    r_rank, x_rank = rank_plan(policy.base, len(active), M, beta, policy.redundant)
    assignment = Assignment(active.ids[order], r_rank, x_rank, M)
    assignment.copy_job, assignment.copy_machine = pack_machines(r_rank, x_rank, M, rng)
    r = np.zeros(len(active), dtype=np.int64)
    x = np.zeros(len(active))
    r[order] = r_rank
    x[order] = x_rank
    active.r, active.x = r, x
    active.set_copies(order[assignment.copy_job], assignment.copy_machine)
    active.assignment = assignment
    if log is not None and len(active):
        active.rows = log.open(active.ids, time, r, x)
    return assignment


def advance_slot(active: ActiveSet, slot_rates: np.ndarray, fraction: float, speed: float) -> np.ndarray:
    """Advance every copy by ``fraction`` of a slot; returns per-job effective increments.

    ``slot_rates`` holds each machine's delivered service over the whole slot.
    """
    before = active.effective()
    if len(active.acc):
        active.acc = active.acc + active.x[active.copy_owner] * speed * slot_rates[active.copy_machine] * fraction
    return active.effective() - before


def _crossing_fraction(active: ActiveSet, gains: np.ndarray) -> np.ndarray:
    """Earliest fraction of the pending span at which each job's best copy finishes."""
    cross = np.full(len(active), np.inf)
    if not len(active.acc):
        return cross
    need = (active.size - active.progress)[active.copy_owner] - active.acc
    with np.errstate(divide="ignore", invalid="ignore"):
        t = np.where(gains > 0, need / gains, np.inf)
    t = np.where(need <= _EPS * np.maximum(1.0, active.size[active.copy_owner]), 0.0, t)
    np.minimum.at(cross, active.copy_owner, t)
    return cross


@dataclass
class Segment:
    """A stretch of time with a fixed active set and fixed copy placement."""

    slot: int
    t0: float
    t1: float
    job_ids: np.ndarray
    increments: np.ndarray
    redundancy: np.ndarray
    share: np.ndarray
    copy_owner: np.ndarray
    copy_machine: np.ndarray

    @property
    def n(self) -> int:
        return len(self.job_ids)

    @property
    def length(self) -> float:
        return self.t1 - self.t0

    def machines_of(self, i: int) -> list[int]:
        return self.copy_machine[self.copy_owner == i].tolist()


@dataclass
class SimTrace:
    config: SimConfig
    jobs: list[JobSpec]
    completion: dict[int, float]
    n_series: np.ndarray
    checkpoint_times: list[float]
    checkpoint_total_share: list[float]
    ckpt_job: np.ndarray
    ckpt_time: np.ndarray
    ckpt_r: np.ndarray
    ckpt_x: np.ndarray
    ckpt_service: np.ndarray
    segments: list[Segment] = field(default_factory=list)
    peak_rate_delta: float = 1.0

    @property
    def policy(self) -> Policy:
        return self.config.policy

    @property
    def job_map(self) -> dict[int, JobSpec]:
        return {j.job_id: j for j in self.jobs}

    @property
    def flowtimes(self) -> dict[int, float]:
        arrival = {j.job_id: j.arrival for j in self.jobs}
        return {k: c - arrival[k] for k, c in self.completion.items()}

    @property
    def censored(self) -> list[int]:
        return [j.job_id for j in self.jobs if j.job_id not in self.completion]

    @property
    def end_time(self) -> float:
        if self.segments:
            return self.segments[-1].t1
        return max(self.completion.values(), default=0.0)

    def trajectory(self, job_id: int) -> list[tuple[float, int, float, float]]:
        """Checkpoint rows ``(t_k, r_k, x_k, service_k)`` for one job."""
        rows = np.nonzero(self.ckpt_job == job_id)[0]
        return [(float(self.ckpt_time[i]), int(self.ckpt_r[i]), float(self.ckpt_x[i]),
                 float(self.ckpt_service[i])) for i in rows]

    def trajectories(self) -> dict[int, list[tuple[float, int, float, float]]]:
        out: dict[int, list] = {j.job_id: [] for j in self.jobs}
        for i in range(len(self.ckpt_job)):
            out[int(self.ckpt_job[i])].append(
                (float(self.ckpt_time[i]), int(self.ckpt_r[i]), float(self.ckpt_x[i]), float(self.ckpt_service[i])))
        return out

    # -- invariant checks -------------------------------------------------

    def event_time_violations(self) -> list[float]:
        """Checkpoint times not explained by an arrival or a departure."""
        L = self.config.slot_length
        arrivals = {j.arrival for j in self.jobs}
        comps = np.sort(np.fromiter(self.completion.values(), dtype=float, count=len(self.completion)))
        bad = []
        for t in sorted(set(self.checkpoint_times)):
            if t in arrivals:
                continue
            lo = np.searchsorted(comps, t - L - 1e-9, side="right")
            hi = np.searchsorted(comps, t + 1e-9, side="right")
            window = comps[lo:hi]
            if self.config.mid_slot_reassign:
                ok = bool(np.any(np.abs(window - t) <= 1e-9))
            else:
                ok = window.size > 0
            if not ok:
                bad.append(t)
        return bad

    def resource_violations(self, tol: float = 1e-9) -> list[float]:
        M = self.config.M
        return [t for t, s in zip(self.checkpoint_times, self.checkpoint_total_share) if s > M + tol]

    def work_conservation_errors(self) -> dict[int, float]:
        errs: dict[int, float] = {}
        if not len(self.ckpt_job):
            return errs
        order = np.argsort(self.ckpt_job, kind="stable")
        jobs = self.ckpt_job[order]
        svc = self.ckpt_service[order]
        uniq, start = np.unique(jobs, return_index=True)
        sums = np.add.reduceat(svc, start)
        sizes = self.job_map
        for j, s in zip(uniq.tolist(), sums.tolist()):
            if j in self.completion:
                errs[j] = abs(s - sizes[j].size)
        return errs

    def max_realized_speed(self) -> float:
        """Largest per-job progress rate over any recorded segment."""
        best = 0.0
        for seg in self.segments:
            if seg.length > 0 and seg.n:
                best = max(best, float(seg.increments.max()) / seg.length)
        return best


def run_simulation(config: SimConfig, jobs: Sequence[JobSpec],
                   rates: Optional[np.ndarray] = None) -> SimTrace:
    """Simulate ``jobs`` under ``config``.

    ``rates`` may supply a precomputed ``(n_slots, M)`` matrix of per-slot
    machine service; by default it is generated from the config's service
    model and seed.
    """
    jobs = sort_jobs(jobs)
    if len({j.job_id for j in jobs}) != len(jobs):
        raise SimulationError("job ids must be unique")
    L = config.slot_length
    n_slots = config.n_slots
    M = config.M
    speed = config.speed_augmentation
    params = config.service_params
    log = _Checkpoints()
    completion: dict[int, float] = {}
    segments: list[Segment] = []
    ckpt_times: list[float] = []
    ckpt_share: list[float] = []
    n_series = np.zeros(n_slots, dtype=np.int64)

    def finish() -> SimTrace:
        return SimTrace(
            config=config, jobs=list(jobs), completion=completion, n_series=n_series,
            checkpoint_times=ckpt_times, checkpoint_total_share=ckpt_share,
            ckpt_job=np.frombuffer(log.job, dtype=np.int64).copy() if len(log) else np.zeros(0, dtype=np.int64),
            ckpt_time=np.array(log.time), ckpt_r=np.array(log.r, dtype=np.int64),
            ckpt_x=np.array(log.x), ckpt_service=np.array(log.service),
            segments=segments, peak_rate_delta=params.peak_rate_delta,
        )

    if not jobs:
        return finish()
    if jobs[-1].arrival >= n_slots * L:
        jobs = [j for j in jobs if j.arrival < n_slots * L]
    for j in jobs:
        if abs(j.arrival / L - round(j.arrival / L)) > 1e-9:
            raise SimulationError(f"job {j.job_id} arrives at {j.arrival}, not on a slot boundary")

    if rates is None:
        rates = slot_service_matrix(params, M, n_slots, config.seed, L).T.copy()
    elif rates.shape != (n_slots, M):
        raise SimulationError(f"rates must have shape {(n_slots, M)}, got {rates.shape}")
    rng = np.random.default_rng(np.random.SeedSequence([int(config.seed), 0xACC]))

    active = ActiveSet(M)
    next_job = 0
    pending_event = False

    def reassign(t: float) -> None:
        a = checkpoint_and_reassign(active, config.policy, M, t, rng, config.beta, log)
        problems = check_assignment(a, config.policy.multitasking)
        if problems:
            raise SimulationError(f"invalid assignment at t={t}: {problems}")
        ckpt_times.append(t)
        ckpt_share.append(a.total_share())

    for s in range(n_slots):
        T = s * L
        end = T + L
        arriving = []
        while next_job < len(jobs) and jobs[next_job].arrival <= T + 1e-9:
            arriving.append(jobs[next_job])
            next_job += 1
        if arriving:
            active.add(arriving)
        n_series[s] = len(active)
        if (arriving or pending_event) and len(active):
            reassign(T)
        pending_event = False
        if not len(active):
            if next_job >= len(jobs):
                n_series = n_series[: s + 1]
                break
            continue

        column = rates[s]
        u = T
        while len(active):
            frac_left = (end - u) / L
            gains = np.zeros(0)
            if len(active.acc):
                gains = active.x[active.copy_owner] * speed * column[active.copy_machine] * frac_left
            cross = _crossing_fraction(active, gains)
            first = float(cross.min()) if len(cross) else np.inf
            done_at_end = first >= 1.0 - 1e-12
            step = 1.0 if first > 1.0 - 1e-12 else first
            before = active.effective()
            if len(active.acc):
                active.acc = active.acc + gains * step
            after = active.effective()
            finishing = cross <= step * (1 + 1e-12) + 1e-15 if first <= 1.0 + 1e-12 else np.zeros(len(active), bool)
            t_hit = end if done_at_end else u + step * (end - u)
            increments = after - before
            increments[finishing] = active.size[finishing] - before[finishing]
            if config.record_segments:
                segments.append(Segment(s, u, t_hit, active.ids.copy(), increments,
                                        active.r, active.x, active.copy_owner, active.copy_machine))
            if not finishing.any():
                break
            for i in np.nonzero(finishing)[0]:
                completion[int(active.ids[i])] = t_hit
            fin_rows = active.rows[finishing]
            log.close(fin_rows, active.size[finishing] - active.progress[finishing])
            active.remove(~finishing)
            if done_at_end:
                pending_event = True
                break
            if config.mid_slot_reassign:
                if len(active):
                    reassign(t_hit)
            else:
                pending_event = True
            u = t_hit

    if len(active):
        opened = active.rows >= 0
        log.close(active.rows[opened], active.best_copy()[opened])
    return finish()


# ---------------------------------------------------------------------------
# JSON-lines export


def _num(v):
    return float(v) if isinstance(v, (float, np.floating)) else int(v)


def iter_trace_records(trace: SimTrace) -> Iterator[dict]:
    yield {"type": "config", "config": trace.config.to_dict(), "peak_rate_delta": trace.peak_rate_delta,
           "n_series": trace.n_series.tolist(),
           "checkpoints": [[t, s] for t, s in zip(trace.checkpoint_times, trace.checkpoint_total_share)]}
    for seg in trace.segments:
        yield {
            "type": "segment", "slot": seg.slot, "t0": seg.t0, "t1": seg.t1, "n": seg.n,
            "jobs": [
                {"job_id": int(seg.job_ids[i]), "r": int(seg.redundancy[i]), "x": float(seg.share[i]),
                 "machines": seg.machines_of(i), "increment": float(seg.increments[i])}
                for i in range(seg.n)
            ],
        }
    traj = trace.trajectories()
    for job in trace.jobs:
        c = trace.completion.get(job.job_id)
        yield {
            "type": "job", "job_id": job.job_id, "arrival": job.arrival, "size": job.size,
            "completion": c, "flowtime": None if c is None else c - job.arrival,
            "checkpoints": [{"t": t, "r": r, "x": x, "service": sv} for t, r, x, sv in traj[job.job_id]],
        }


def dump_trace(trace: SimTrace, path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        for rec in iter_trace_records(trace):
            fh.write(json.dumps(rec, sort_keys=True))
            fh.write("\n")


def load_trace_records(path) -> SimTrace:
    header = None
    segments: list[Segment] = []
    jobs: list[JobSpec] = []
    completion: dict[int, float] = {}
    rows = {"job": [], "time": [], "r": [], "x": [], "service": []}
    with open(path, encoding="utf-8") as fh:
        for line in fh:
            if not line.strip():
                continue
            rec = json.loads(line)
            kind = rec["type"]
            if kind == "config":
                header = rec
            elif kind == "segment":
                js = rec["jobs"]
                owner, machine = [], []
                for i, row in enumerate(js):
                    owner.extend([i] * len(row["machines"]))
                    machine.extend(row["machines"])
                segments.append(Segment(
                    rec["slot"], rec["t0"], rec["t1"],
                    np.array([row["job_id"] for row in js], dtype=np.int64),
                    np.array([row["increment"] for row in js], dtype=float),
                    np.array([row["r"] for row in js], dtype=np.int64),
                    np.array([row["x"] for row in js], dtype=float),
                    np.array(owner, dtype=np.int64), np.array(machine, dtype=np.int64)))
            elif kind == "job":
                jobs.append(JobSpec(rec["job_id"], rec["arrival"], rec["size"]))
                if rec["completion"] is not None:
                    completion[rec["job_id"]] = rec["completion"]
                for c in rec["checkpoints"]:
                    rows["job"].append(rec["job_id"])
                    rows["time"].append(c["t"])
                    rows["r"].append(c["r"])
                    rows["x"].append(c["x"])
                    rows["service"].append(c["service"])
            else:
                raise ValueError(f"unknown record type {kind!r}")
    if header is None:
        raise ValueError("trace file has no config record")
    cps = header["checkpoints"]
    return SimTrace(
        config=SimConfig.from_dict(header["config"]), jobs=jobs, completion=completion,
        n_series=np.array(header["n_series"], dtype=np.int64),
        checkpoint_times=[c[0] for c in cps], checkpoint_total_share=[c[1] for c in cps],
        ckpt_job=np.array(rows["job"], dtype=np.int64), ckpt_time=np.array(rows["time"], dtype=float),
        ckpt_r=np.array(rows["r"], dtype=np.int64), ckpt_x=np.array(rows["x"], dtype=float),
        ckpt_service=np.array(rows["service"], dtype=float),
        segments=segments, peak_rate_delta=header["peak_rate_delta"],
    )
