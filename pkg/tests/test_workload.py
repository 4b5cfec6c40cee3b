import numpy as np
import pytest
from scipy import stats

from redsched.workload import (JobSpec, TraceError, WorkloadParams, generate_jobs,
                               load_trace, pareto_size, write_trace)


def test_inverse_cdf_examples():
    assert pareto_size(0.25, 20, 2) == pytest.approx(40.0)
    assert pareto_size(1.0, 20, 2) == pytest.approx(20.0)


def test_mean_size_near_40():
    jobs = generate_jobs(WorkloadParams(5.0, horizon=21000), seed=1)
    sizes = np.array([j.size for j in jobs])[:100_000]
    assert len(sizes) == 100_000
    assert sizes.mean() == pytest.approx(40, abs=1)
    assert sizes.min() >= 20


def test_pareto_tail_ks():
    jobs = generate_jobs(WorkloadParams(5.0, horizon=21000), seed=2)
    sizes = np.array([j.size for j in jobs])[:100_000]
    res = stats.kstest(sizes, lambda x: np.where(x >= 20, 1 - (20 / x) ** 2, 0.0))
    assert res.pvalue > 0.01


def test_poisson_counts_chi_square():
    lam, horizon = 1.0, 200.0
    counts = np.array([len(generate_jobs(WorkloadParams(lam, horizon=horizon), seed=s)) for s in range(100)])
    mean = lam * horizon
    # bin counts into equiprobable Poisson bins and run a chi-square test
    edges = stats.poisson.ppf(np.linspace(0, 1, 6)[1:-1], mean)
    observed = np.bincount(np.searchsorted(edges, counts, side="left"), minlength=5)
    cdf = stats.poisson.cdf(edges, mean)
    probs = np.diff(np.concatenate(([0.0], cdf, [1.0])))
    res = stats.chisquare(observed, probs * len(counts))
    assert res.pvalue > 0.01


def test_generate_jobs_contract():
    p = WorkloadParams(2.0, horizon=300)
    jobs = generate_jobs(p, seed=4)
    assert jobs == generate_jobs(p, seed=4)
    assert jobs != generate_jobs(p, seed=5)
    arr = [j.arrival for j in jobs]
    assert arr == sorted(arr)
    assert all(a == int(a) and 0 <= a < 300 for a in arr)
    assert [j.job_id for j in jobs] == list(range(len(jobs)))


def test_slot_snapping_with_half_slots():
    jobs = generate_jobs(WorkloadParams(2.0, horizon=50), seed=4, slot_length=0.5)
    assert all((j.arrival * 2) == int(j.arrival * 2) for j in jobs)


def test_params_validation():
    with pytest.raises(ValueError):
        WorkloadParams(1.0, pareto_shape=1.0)
    with pytest.raises(ValueError):
        WorkloadParams(0.0)
    assert WorkloadParams(1.0).mean_size == pytest.approx(40)


def test_jobspec_validation():
    with pytest.raises(ValueError):
        JobSpec(0, -1.0, 3.0)
    with pytest.raises(ValueError):
        JobSpec(0, 1.0, 0.0)


def test_load_trace_empty(tmp_path):
    p = tmp_path / "t.csv"
    p.write_text("")
    assert load_trace(p) == []
    p.write_text("job_id,arrival,size\n")
    assert load_trace(p) == []


def test_load_trace_sorts(tmp_path):
    p = tmp_path / "t.csv"
    p.write_text("job_id,arrival,size\n2,5,1.5\n0,3,2\n1,3,4\n")
    assert [j.job_id for j in load_trace(p)] == [0, 1, 2]


def test_load_trace_bad_size_names_line(tmp_path):
    p = tmp_path / "t.csv"
    p.write_text("job_id,arrival,size\n0,0,1\n1,2,-1\n")
    with pytest.raises(TraceError, match=":3:"):
        load_trace(p)


@pytest.mark.parametrize("body,line", [("0,0\n", 2), ("0,zero,1\n", 2), ("0,0,1\n0,1,1\n", 3)])
def test_load_trace_malformed(tmp_path, body, line):
    p = tmp_path / "t.csv"
    p.write_text("job_id,arrival,size\n" + body)
    with pytest.raises(TraceError, match=f":{line}:"):
        load_trace(p)


def test_trace_round_trip(tmp_path):
    jobs = generate_jobs(WorkloadParams(1.0, horizon=100), seed=3)
    p = tmp_path / "t.csv"
    write_trace(jobs, p)
    assert load_trace(p) == jobs
