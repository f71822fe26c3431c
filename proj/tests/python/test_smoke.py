import json
import math

import pytest

import bbmlab


def test_size_biasing():
    law = bbmlab.OffspringLaw({2: 0.5, 3: 0.5})
    q = bbmlab.size_biased(law)
    assert q.probability(2) == pytest.approx(0.4)
    assert q.probability(3) == pytest.approx(0.6)
    with pytest.raises(ValueError):
        bbmlab.OffspringLaw({1: 1.0})


def test_rate_function():
    assert bbmlab.energy([0.0, 0.0, 1.5]) == pytest.approx(2.25)
    assert bbmlab.theta0([0.0, 0.0, 1.5], 1.0) == pytest.approx(2.25 / 3.5)
    assert math.isinf(bbmlab.theta0([0.0] * 5, 1.0))
    assert bbmlab.k_value([0.0, 2.0 / 3, 4.0 / 3, 2.0], 1.0, 1.0) == -math.inf
    value, argmax, converged = bbmlab.sup_k_over_ball([0.0] * 9, 0.3, 1.0, 1.0)
    assert value == pytest.approx(1.0)
    assert converged
    assert len(argmax) == 9


def test_counterexample():
    assert bbmlab.counterexample_rate(20, 0.25, 0.25) == 2.0
    assert bbmlab.counterexample_rate(20, 0.25, 0.5) == 1.0
    assert bbmlab.counterexample_log_mean(20, 0.0) / 20.0 == pytest.approx(1.0, abs=1e-3)


def test_simulation_is_seeded():
    a = bbmlab.population_counts(1.0, {}, 3.0, 30, 7, 0)
    b = bbmlab.population_counts(1.0, {}, 3.0, 30, 7, 0)
    assert a == b
    assert a[0] == 1
    assert all(y >= x for x, y in zip(a, a[1:]))
    assert bbmlab.tube_count(1.0, {}, [0.0, 0.0], 100.0, 1.0, 3.0, 30, 7, 0) == a[-1]


def test_run_experiment(tmp_path):
    checks = bbmlab.run_experiment("counterexample", json.dumps({"seed": 2}), str(tmp_path))
    assert checks["counterexample.limsup"] == "pass"
    assert (tmp_path / "summary.json").exists()
    with pytest.raises(ValueError):
        bbmlab.run_experiment("nope")
