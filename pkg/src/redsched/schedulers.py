"""Assignment rules for SRPT+R, Fair+R, LAPS+R(beta) and their r=1 baselines.

Every policy first orders the active jobs (by remaining work for SRPT, by
arrival for Fair and LAPS, ties by job id) and then hands out redundancy and
resource shares by rank. The rank arithmetic lives in :func:`rank_plan`;
:func:`pack_machines` turns the resulting copy counts into machine ids.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np


class Policy(str, enum.Enum):
    SRPT = "SRPT"
    SRPT_R = "SRPT_R"
    FAIR = "FAIR"
    FAIR_R = "FAIR_R"
    LAPS = "LAPS"
    LAPS_R = "LAPS_R"

    @property
    def base(self) -> str:
        return self.value.split("_")[0]

    @property
    def redundant(self) -> bool:
        return self.value.endswith("_R")

    @property
    def multitasking(self) -> bool:
        return self.base in ("FAIR", "LAPS")

    @property
    def needs_beta(self) -> bool:
        return self.base == "LAPS"

    @classmethod
    def parse(cls, name: str) -> "Policy":
        key = name.strip().upper().replace("+", "_").replace("-", "_")
        aliases = {"SRPTR": "SRPT_R", "FAIRR": "FAIR_R", "LAPSR": "LAPS_R"}
        key = aliases.get(key, key)
        try:
            return cls(key)
        except ValueError:
            raise ValueError(f"unknown policy {name!r}; choose from {[p.value for p in cls]}") from None


class PackingError(RuntimeError):
    """Copy demand cannot be placed; policy postconditions were violated."""


@dataclass(frozen=True)
class ActiveJobView:
    job_id: int
    arrival: float
    remaining: float


@dataclass
class Assignment:
    """Per-job redundancy, share and (after packing) machine placement.

    Arrays are aligned with ``job_ids``. Placement is stored flat:
    copy ``c`` belongs to job index ``copy_job[c]`` and runs on machine
    ``copy_machine[c]``; copies of one job are contiguous.
    """

    job_ids: np.ndarray
    redundancy: np.ndarray
    share: np.ndarray
    M: int
    copy_job: np.ndarray = field(default_factory=lambda: np.zeros(0, dtype=np.int64))
    copy_machine: np.ndarray = field(default_factory=lambda: np.zeros(0, dtype=np.int64))

    def __len__(self) -> int:
        return len(self.job_ids)

    @property
    def placed(self) -> bool:
        return len(self.copy_machine) == int(self.redundancy.sum())

    def index_of(self, job_id: int) -> int:
        hits = np.nonzero(self.job_ids == job_id)[0]
        if not hits.size:
            raise KeyError(job_id)
        return int(hits[0])

    def row(self, job_id: int) -> tuple[int, float, tuple[int, ...]]:
        i = self.index_of(job_id)
        return int(self.redundancy[i]), float(self.share[i]), self.machines_of_index(i)

    def machines_of_index(self, i: int) -> tuple[int, ...]:
        return tuple(int(m) for m in self.copy_machine[self.copy_job == i])

    def machines(self, job_id: int) -> tuple[int, ...]:
        return self.machines_of_index(self.index_of(job_id))

    def as_dict(self) -> dict[int, tuple[int, float]]:
        return {int(j): (int(r), float(x)) for j, r, x in zip(self.job_ids, self.redundancy, self.share)}

    def total_share(self) -> float:
        return float(np.dot(self.redundancy, self.share))

    def machine_loads(self) -> np.ndarray:
        loads = np.zeros(self.M)
        np.add.at(loads, self.copy_machine, self.share[self.copy_job])
        return loads


def _decompose(beta: float, n: int, M: int) -> tuple[int, int, float]:
    """Split ``beta * n`` into ``z*M + alpha + gamma``."""
    bn = beta * n
    whole = int(math.floor(bn + 1e-9))
    z, a = divmod(whole, M)
    return z, a, max(0.0, bn - whole)


def rank_plan(base: str, n: int, M: int, beta: Optional[float] = None,
              redundant: bool = True) -> tuple[np.ndarray, np.ndarray]:
    """Redundancy and share per rank (rank 0 = first in the policy's order).

    SRPT ranks by ascending remaining work; Fair and LAPS by ascending
    arrival, so the last rank is the most recent job.
    """
    if M < 1:
        raise ValueError("M must be at least 1")
    r = np.zeros(n, dtype=np.int64)
    x = np.zeros(n)
    if n == 0:
        return r, x
    if base == "SRPT":
        if n >= M:
            r[:M] = 1
        else:
            r[:] = M // n
            r[0] = M - (n - 1) * (M // n)
        x[r > 0] = 1.0
    elif base == "FAIR":
        if n >= M:
            k, l = divmod(n, M)
            r[l:] = 1
            x[l:] = 1.0 / k
        else:
            r[:] = M // n
            r[-1] = M - (M // n) * (n - 1)
            x[:] = 1.0
    elif base == "LAPS":
        if beta is None or not 0 < beta < 1:
            raise ValueError("LAPS needs beta in (0, 1)")
        z, a, _ = _decompose(beta, n, M)
        if z >= 1:
            first = n - z * M - a - 1
            r[first:] = 1
            r[-1] = M - a
            x[first:] = 1.0 / (z + 1)
        else:
            each = M // (a + 1)
            r[n - a - 1:] = each
            r[-1] = M - a * each
            x[n - a - 1:] = 1.0
    else:
        raise ValueError(f"unknown policy base {base!r}")
    if not redundant:
        r[r > 1] = 1
    return r, x


def _views(active: Sequence[ActiveJobView]):
    ids = np.array([a.job_id for a in active], dtype=np.int64)
    arrival = np.array([a.arrival for a in active], dtype=float)
    remaining = np.array([a.remaining for a in active], dtype=float)
    if np.any(remaining <= 0):
        raise ValueError("active jobs must have positive remaining work")
    return ids, arrival, remaining


def policy_order(base: str, ids: np.ndarray, arrival: np.ndarray, remaining: np.ndarray) -> np.ndarray:
    if base == "SRPT":
        return np.lexsort((ids, remaining))
    return np.lexsort((ids, arrival))


def assign_arrays(policy: Policy, ids, arrival, remaining, M: int,
                  beta: Optional[float] = None) -> Assignment:
    """Vectorized assignment over parallel arrays; result is in rank order."""
    order = policy_order(policy.base, ids, arrival, remaining)
    r, x = rank_plan(policy.base, len(ids), M, beta, policy.redundant)
    return Assignment(ids[order], r, x, M)


def srpt_r_assign(active: Sequence[ActiveJobView], M: int) -> Assignment:
    return assign_arrays(Policy.SRPT_R, *_views(active), M)


def fair_r_assign(active: Sequence[ActiveJobView], M: int) -> Assignment:
    return assign_arrays(Policy.FAIR_R, *_views(active), M)


def laps_r_assign(active: Sequence[ActiveJobView], M: int, beta: float) -> Assignment:
    return assign_arrays(Policy.LAPS_R, *_views(active), M, beta)


def baseline_assign(policy: str, active: Sequence[ActiveJobView], M: int,
                    beta: Optional[float] = None) -> Assignment:
    base = Policy.parse(policy).base
    return assign_arrays(Policy(base), *_views(active), M, beta)


def assign(policy: Policy, active: Sequence[ActiveJobView], M: int,
           beta: Optional[float] = None) -> Assignment:
    return assign_arrays(policy, *_views(active), M, beta)


def pack_machines(redundancies, shares, M: int, seed) -> tuple[np.ndarray, np.ndarray]:
    """Place copies on machines; returns flat ``(copy_job, copy_machine)``.

    A random machine permutation is drawn from ``seed`` (an int or a numpy
    Generator). Jobs are taken in order of decreasing redundancy and their
    copies fill the next free capacity slots in permutation order, so one
    job's copies always land on distinct machines.
    """
    r = np.asarray(redundancies, dtype=np.int64)
    x = np.asarray(shares, dtype=float)
    rng = np.random.default_rng(seed)
    perm = rng.permutation(M)
    served = np.nonzero(r > 0)[0]
    if not served.size:
        return np.zeros(0, dtype=np.int64), np.zeros(0, dtype=np.int64)
    if np.any(r > M):
        raise PackingError("a job cannot have more copies than machines")
    if float(np.dot(r, x)) > M + 1e-9:
        raise PackingError(f"demand {float(np.dot(r, x))} exceeds {M} machines")
    order = served[np.argsort(-r[served], kind="stable")]
    xs = x[served]
    if np.all(np.abs(xs - xs[0]) <= 1e-12):
        per_machine = int(math.floor(1.0 / xs[0] + 1e-9))
        total = int(r[served].sum())
        if total > per_machine * M:
            raise PackingError("copy count exceeds machine capacity")
        slots = np.tile(perm, per_machine)[:total]
        owners = np.repeat(order, r[order])
    else:
        owners, slots = _greedy_pack(order, r, x, perm, M)
    grouped = np.argsort(owners, kind="stable")
    return owners[grouped].astype(np.int64), slots[grouped].astype(np.int64)


def _greedy_pack(order, r, x, perm, M):
    room = np.ones(M)
    rank = np.empty(M, dtype=np.int64)
    rank[perm] = np.arange(M)
    owners, slots = [], []
    for j in order:
        fits = np.nonzero(room >= x[j] - 1e-12)[0]
        if fits.size < r[j]:
            raise PackingError(f"cannot place {r[j]} copies at share {x[j]}")
        pick = fits[np.lexsort((rank[fits], -room[fits]))][: r[j]]
        room[pick] -= x[j]
        owners.extend([j] * r[j])
        slots.extend(pick.tolist())
    return np.array(owners), np.array(slots)


def place(assignment: Assignment, seed) -> Assignment:
    assignment.copy_job, assignment.copy_machine = pack_machines(
        assignment.redundancy, assignment.share, assignment.M, seed)
    return assignment


def check_assignment(a: Assignment, multitasking: bool, tol: float = 1e-9) -> list[str]:
    """Return a list of violated assignment invariants (empty when valid)."""
    problems = []
    if a.total_share() > a.M + tol:
        problems.append(f"total share {a.total_share()} exceeds M={a.M}")
    if a.placed and len(a.copy_machine):
        if a.copy_machine.min() < 0 or a.copy_machine.max() >= a.M:
            problems.append("machine id out of range")
        loads = a.machine_loads()
        if loads.max() > 1 + tol:
            problems.append(f"machine load {loads.max()} exceeds 1")
        pairs = a.copy_job * a.M + a.copy_machine
        if len(np.unique(pairs)) != len(pairs):
            problems.append("two copies of one job share a machine")
        counts = np.bincount(a.copy_job, minlength=len(a))
        if np.any(counts != a.redundancy):
            problems.append("placement does not match redundancy")
    if not multitasking:
        if np.any((a.share != 0) & (a.share != 1)):
            problems.append("non-multitasking share must be 0 or 1")
    return problems
