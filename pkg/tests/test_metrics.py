import json
import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from redsched.metrics import (compare, linear_trend, summarize, summarize_flowtimes,
                              write_metrics)
from redsched.schedulers import Policy
from redsched.service_model import ServiceModelParams
from redsched.sim_engine import SimConfig, run_simulation
from redsched.workload import JobSpec


def test_small_example():
    m = summarize_flowtimes([1, 2, 3], thresholds=(2,))
    assert m.average_flowtime == 2
    assert m.cdf_points == [(2.0, pytest.approx(2 / 3))]
    assert m.percentiles[50] == 2


def test_empty():
    m = summarize_flowtimes([])
    assert m.total_jobs == 0 and m.cdf_points == []
    assert math.isnan(m.average_flowtime)
    assert m.fraction_within(10) == 0.0
    json.dumps(m.to_dict())


def test_censored_count_in_denominator():
    m = summarize_flowtimes([1, 2, 3], censored_count=1, thresholds=(100,))
    assert m.average_flowtime == 2
    assert m.cdf_points[0][1] == pytest.approx(0.75)
    assert m.fraction_within(math.inf) == pytest.approx(0.75)


def test_summarize_trace():
    c = SimConfig(M=1, horizon=5, policy=Policy.SRPT, service_params=ServiceModelParams.unit_rate())
    tr = run_simulation(c, [JobSpec(0, 0.0, 3.0), JobSpec(1, 0.0, 30.0)])
    m = summarize(tr, (3, 10))
    assert (m.total_jobs, m.censored_count) == (2, 1)
    assert m.average_flowtime == pytest.approx(3.0)
    assert m.cdf_points == [(3.0, 0.5), (10.0, 0.5)]


@settings(max_examples=100, deadline=None)
@given(f=st.lists(st.floats(0.1, 1000), min_size=1, max_size=40), cens=st.integers(0, 5),
       seed=st.integers(0, 1000))
def test_permutation_invariant_and_cdf_limit(f, cens, seed):
    perm = np.random.default_rng(seed).permutation(len(f))
    a = summarize_flowtimes(f, cens)
    b = summarize_flowtimes([f[i] for i in perm], cens)
    assert a.to_dict() == b.to_dict()
    ys = [v for _, v in a.cdf_points]
    assert all(y2 >= y1 for y1, y2 in zip(ys, ys[1:]))
    assert a.fraction_within(math.inf) == pytest.approx(1 - cens / (len(f) + cens))


def test_compare():
    a = summarize_flowtimes([30.0] * 4)
    b = summarize_flowtimes([40.0] * 4)
    assert compare(a, a).relative_change == 0
    assert all(g == 0 for _, g in compare(a, a).cdf_gaps)
    cmp = compare(a, b)
    assert cmp.relative_change == pytest.approx(-0.25)
    assert dict(cmp.cdf_gaps)[40.0] == 0 and dict(cmp.cdf_gaps)[20.0] == 0
    assert dict(cmp.cdf_gaps)[80.0] == 0
    with pytest.raises(ValueError):
        compare(a, summarize_flowtimes([]))


def test_linear_trend():
    slope, icpt = linear_trend([1, 3, 5, 7], dt=2.0)
    assert slope == pytest.approx(1.0)
    assert icpt == pytest.approx(1.0)
    assert linear_trend([4.0]) == (0.0, 4.0)


def test_writers_byte_identical(tmp_path):
    m = summarize_flowtimes([5.5, 1.25, 80.0], censored_count=2, job_ids=[2, 0, 1])
    a = write_metrics(m, tmp_path / "a", {"x": 1}, per_job=True)
    b = write_metrics(m, tmp_path / "b", {"x": 1}, per_job=True)
    assert len(a) == 3
    for p, q in zip(a, b):
        assert open(p, "rb").read() == open(q, "rb").read()
    rows = open(a[2]).read().splitlines()
    assert rows == ["job_id,flowtime", "0,1.25", "2,5.5", "1,80.0"]
    doc = json.loads(open(a[0]).read())
    assert doc["censored_count"] == 2 and doc["x"] == 1
