import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from redsched.analysis import transient_srpt_flowtime
from redsched.schedulers import Policy
from redsched.service_model import ServiceModelParams
from redsched.sim_engine import (ActiveSet, SimConfig, SimulationError,
                                 advance_slot, checkpoint_and_reassign, dump_trace,
                                 iter_trace_records, load_trace_records, run_simulation)
from redsched.workload import JobSpec, WorkloadParams, generate_jobs

UNIT = ServiceModelParams.unit_rate()
APUP = ServiceModelParams.apup_default()


def cfg(**kw):
    base = dict(M=3, horizon=50, policy=Policy.SRPT_R, service_params=UNIT, seed=0)
    base.update(kw)
    return SimConfig(**base)


def test_single_job_three_copies_unit_rate():
    tr = run_simulation(cfg(), [JobSpec(0, 0.0, 5.0)])
    assert tr.completion == {0: pytest.approx(5.0)}
    assert tr.flowtimes[0] == pytest.approx(5.0)
    assert tr.trajectory(0)[0][:3] == (0.0, 3, 1.0)
    assert not tr.event_time_violations()
    assert max(tr.work_conservation_errors().values()) <= 1e-9


def test_zero_jobs():
    tr = run_simulation(cfg(), [])
    assert tr.completion == {}
    assert tr.segments == []
    assert int(tr.n_series.sum()) == 0


def test_config_validation():
    with pytest.raises(ValueError):
        cfg(policy=Policy.LAPS_R)
    with pytest.raises(ValueError):
        cfg(beta=0.5)
    with pytest.raises(ValueError):
        cfg(speed_augmentation=0.5)
    with pytest.raises(ValueError):
        cfg(M=0)
    c = cfg(policy="laps+r", beta=0.4)
    assert SimConfig.from_dict(c.to_dict()) == c


def test_rejects_duplicate_ids_and_unaligned_arrivals():
    with pytest.raises(SimulationError):
        run_simulation(cfg(), [JobSpec(0, 0.0, 1.0), JobSpec(0, 1.0, 1.0)])
    with pytest.raises(SimulationError):
        run_simulation(cfg(), [JobSpec(0, 0.5, 1.0)])


def test_checkpoint_takes_most_advanced_copy():
    active = ActiveSet(3)
    active.add([JobSpec(7, 0.0, 10.0)])
    active.set_copies([0, 0], [1, 2], acc=[3.2, 4.1])
    checkpoint_and_reassign(active, Policy.SRPT_R, 3, 1.0, np.random.default_rng(0))
    assert active.progress[0] == pytest.approx(4.1)
    assert np.all(active.acc == 0)
    state = active.job_state(7)
    assert state.checkpointed_progress == pytest.approx(4.1)
    assert set(state.copy_accumulators) == {0, 1, 2}


def test_checkpoint_unscheduled_job_unchanged():
    active = ActiveSet(1)
    active.add([JobSpec(0, 0.0, 5.0), JobSpec(1, 0.0, 6.0)])
    active.progress = np.array([1.0, 2.0])
    active.set_copies([0], [0], acc=[0.5])
    checkpoint_and_reassign(active, Policy.SRPT, 1, 2.0, np.random.default_rng(0))
    assert active.progress.tolist() == pytest.approx([1.5, 2.0])


def test_advance_slot_share_scaling():
    active = ActiveSet(1)
    active.add([JobSpec(0, 0.0, 5.0)])
    active.x = np.array([0.5])
    active.set_copies([0], [0])
    inc = advance_slot(active, np.array([1.4]), 1.0, 1.0)
    assert inc[0] == pytest.approx(0.7)
    inc = advance_slot(active, np.array([1.4]), 1.0, 2.0)
    assert inc[0] == pytest.approx(1.4)


def test_completion_interpolated_within_slot():
    rates = np.full((4, 1), 0.6)
    tr = run_simulation(cfg(M=1, horizon=4), [JobSpec(0, 0.0, 0.3)], rates=rates)
    assert tr.completion[0] == pytest.approx(0.5)


def test_speed_two_halves_completion():
    jobs = [JobSpec(0, 0.0, 8.0)]
    slow = run_simulation(cfg(M=1), jobs)
    fast = run_simulation(cfg(M=1, speed_augmentation=2.0), jobs)
    assert fast.completion[0] == pytest.approx(slow.completion[0] / 2)


def test_no_events_no_checkpoints():
    tr = run_simulation(cfg(M=2, horizon=40), [JobSpec(0, 0.0, 30.0)])
    assert tr.checkpoint_times == [0.0]
    assert len(tr.trajectory(0)) == 1


def test_simultaneous_arrivals_one_event():
    jobs = [JobSpec(i, 2.0, 3.0 + i) for i in range(4)]
    tr = run_simulation(cfg(M=2), jobs)
    assert tr.checkpoint_times.count(2.0) == 1


def test_boundary_mode_waits_for_slot_end():
    jobs = [JobSpec(0, 0.0, 0.5), JobSpec(1, 0.0, 1.0)]
    tr = run_simulation(cfg(M=1), jobs, rates=np.ones((50, 1)))
    assert tr.completion[0] == pytest.approx(0.5)
    assert tr.completion[1] == pytest.approx(2.0)
    mid = run_simulation(cfg(M=1, mid_slot_reassign=True), jobs, rates=np.ones((50, 1)))
    assert mid.completion[1] == pytest.approx(1.5)


def test_censored_jobs_reported():
    tr = run_simulation(cfg(M=1, horizon=5), [JobSpec(0, 0.0, 3.0), JobSpec(1, 0.0, 30.0)])
    assert tr.censored == [1]
    assert set(tr.flowtimes) == {0}


@settings(max_examples=40, deadline=None)
@given(sizes=st.lists(st.integers(1, 9), min_size=1, max_size=8), M=st.integers(1, 4),
       seed=st.integers(0, 100))
def test_unit_rate_redundancy_is_noop(sizes, M, seed):
    rng = np.random.default_rng(seed)
    arrivals = np.sort(rng.integers(0, 6, len(sizes)))
    jobs = [JobSpec(i, float(a), float(s)) for i, (a, s) in enumerate(zip(arrivals, sizes))]
    a = run_simulation(cfg(M=M, policy=Policy.SRPT_R, seed=seed), jobs)
    b = run_simulation(cfg(M=M, policy=Policy.SRPT, seed=seed), jobs)
    assert a.completion == pytest.approx(b.completion)


@settings(max_examples=40, deadline=None)
@given(sizes=st.lists(st.integers(1, 9), min_size=1, max_size=10))
def test_single_machine_srpt_matches_closed_form(sizes):
    jobs = [JobSpec(i, 0.0, float(s)) for i, s in enumerate(sizes)]
    tr = run_simulation(cfg(M=1, policy=Policy.SRPT, horizon=100), jobs)
    assert sum(tr.flowtimes.values()) == pytest.approx(transient_srpt_flowtime(sorted(sizes), 1))


@settings(max_examples=40, deadline=None)
@given(sizes=st.lists(st.floats(0.1, 9), min_size=1, max_size=10), M=st.integers(1, 4))
def test_exact_mode_matches_closed_form_any_m(sizes, M):
    jobs = [JobSpec(i, 0.0, s) for i, s in enumerate(sizes)]
    tr = run_simulation(cfg(M=M, policy=Policy.SRPT, horizon=200, mid_slot_reassign=True), jobs)
    assert sum(tr.flowtimes.values()) == pytest.approx(transient_srpt_flowtime(sorted(sizes), M), rel=1e-9)


@pytest.mark.parametrize("policy,beta", [(Policy.SRPT_R, None), (Policy.SRPT, None), (Policy.FAIR_R, None),
                                         (Policy.FAIR, None), (Policy.LAPS_R, 0.3), (Policy.LAPS, 0.7)])
@pytest.mark.parametrize("mid", [False, True])
def test_trace_invariants_variable_rates(policy, beta, mid):
    jobs = generate_jobs(WorkloadParams(0.5, horizon=300), seed=3)
    c = SimConfig(M=10, horizon=400, policy=policy, beta=beta, speed_augmentation=1.5,
                  service_params=APUP, seed=3, mid_slot_reassign=mid)
    tr = run_simulation(c, jobs)
    assert not tr.event_time_violations()
    assert not tr.resource_violations()
    errs = tr.work_conservation_errors()
    assert errs and max(errs.values()) <= 1e-9
    assert tr.max_realized_speed() <= 1.5 * APUP.peak_rate_delta + 1e-9
    # integral of n(t) equals total time in system
    busy = sum(seg.n * seg.length for seg in tr.segments)
    censored_time = sum(tr.end_time - tr.job_map[j].arrival for j in tr.censored)
    assert busy == pytest.approx(sum(tr.flowtimes.values()) + censored_time, rel=1e-9)


def test_determinism_byte_identical(tmp_path):
    jobs = generate_jobs(WorkloadParams(1.0, horizon=200), seed=8)
    c = SimConfig(M=8, horizon=250, policy=Policy.FAIR_R, service_params=APUP, seed=8)
    dump_trace(run_simulation(c, jobs), tmp_path / "a.jsonl")
    dump_trace(run_simulation(c, jobs), tmp_path / "b.jsonl")
    assert (tmp_path / "a.jsonl").read_bytes() == (tmp_path / "b.jsonl").read_bytes()


def test_trace_jsonl_round_trip(tmp_path):
    jobs = generate_jobs(WorkloadParams(0.3, horizon=100), seed=2)
    c = SimConfig(M=4, horizon=150, policy=Policy.LAPS_R, beta=0.5, service_params=APUP, seed=2)
    tr = run_simulation(c, jobs)
    path = tmp_path / "t.jsonl"
    dump_trace(tr, path)
    kinds = [r["type"] for r in iter_trace_records(tr)]
    assert kinds[0] == "config" and "segment" in kinds and kinds[-1] == "job"
    back = load_trace_records(path)
    assert back.config == tr.config
    assert back.completion == tr.completion
    assert back.jobs == tr.jobs
    assert back.checkpoint_times == tr.checkpoint_times
    assert len(back.segments) == len(tr.segments)
    for s, t in zip(back.segments, tr.segments):
        assert (s.t0, s.t1, s.slot) == (t.t0, t.t1, t.slot)
        assert np.array_equal(s.job_ids, t.job_ids)
        assert np.array_equal(s.increments, t.increments)
    assert back.trajectories() == tr.trajectories()
    dump_trace(back, tmp_path / "again.jsonl")
    assert (tmp_path / "again.jsonl").read_bytes() == path.read_bytes()
