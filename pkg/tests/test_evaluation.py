from fractions import Fraction

import numpy as np
import pytest
from hypothesis import given, strategies as st

from vertexnom.config import ExperimentConfig, preset
from vertexnom.evaluation import (
    TruthLabels,
    adjusted_rand_index,
    average_precision,
    average_precision_harmonic,
    mean_nomination_curve,
    run_experiment,
)
from vertexnom.nomination import NominationList

hit_lists = st.lists(st.booleans(), min_size=1, max_size=50).filter(any)


def test_ap_examples():
    assert average_precision(np.arange(4), [1, 0, 1, 0]) == 0.75
    assert average_precision(np.arange(4), [1, 1, 0, 0]) == 1.0
    assert average_precision(np.arange(4), [0, 0, 1, 1]) == 0.0
    assert average_precision_harmonic(np.arange(4), [1, 0, 1, 0]) == 0.75
    assert average_precision(np.arange(4), [1, 0, 1, 0], exact=True) == Fraction(3, 4)
    with pytest.raises(ValueError):
        average_precision(np.arange(3), [0, 0, 0])
    with pytest.raises(ValueError):
        average_precision_harmonic(np.arange(3), [0, 0, 0])


def test_ap_from_truth_labels():
    truth = TruthLabels(np.array([3, 5, 7, 9]), np.array([True, False, True, False]))
    nom = NominationList(np.array([7, 5, 3, 9]), np.zeros(4), truth.nonseeds)
    assert truth.u1 == 2 and truth.u == 4
    assert average_precision(nom, truth) == 0.75
    with pytest.raises(ValueError):
        truth.hits(np.array([1, 5, 3, 9]))


@given(hit_lists)
def test_harmonic_form_exact(h):
    h = np.array(h)
    assert average_precision(None, h, exact=True) == average_precision_harmonic(None, h, exact=True)
    assert average_precision(None, h) == pytest.approx(average_precision_harmonic(None, h), abs=1e-12)


@given(hit_lists)
def test_ap_range_and_all_first(h):
    h = np.array(h)
    ap = average_precision(None, h)
    assert 0.0 <= ap <= 1.0
    assert average_precision(None, np.sort(h)[::-1]) == 1.0


@given(hit_lists, st.data())
def test_ap_monotone_moving_up(h, data):
    h = np.array(h)
    ones = np.flatnonzero(h)
    i = data.draw(st.sampled_from(ones.tolist()))
    zeros_above = np.flatnonzero(~h[:i])
    if zeros_above.size == 0:
        return
    j = data.draw(st.sampled_from(zeros_above.tolist()))
    moved = h.copy()
    moved[i], moved[j] = False, True
    assert average_precision(None, moved, exact=True) >= average_precision(None, h, exact=True)


def test_ari_examples():
    assert adjusted_rand_index([0, 0, 1, 1], [0, 0, 1, 1]) == 1.0
    assert adjusted_rand_index([1, 2, 1, 2], [1, 1, 2, 2]) == pytest.approx(-0.5)
    assert adjusted_rand_index([0, 0, 0, 0], [0, 0, 1, 1]) == 0.0
    with pytest.raises(ValueError):
        adjusted_rand_index([0, 1], [0, 1, 1])


labelings = st.integers(2, 30).flatmap(
    lambda n: st.tuples(st.lists(st.integers(0, 4), min_size=n, max_size=n),
                        st.lists(st.integers(0, 4), min_size=n, max_size=n)))


@given(labelings)
def test_ari_properties(pair):
    from sklearn.metrics import adjusted_rand_score

    x, y = map(np.array, pair)
    ari = adjusted_rand_index(x, y)
    assert ari == pytest.approx(adjusted_rand_index(y, x), abs=1e-12)
    relabel = np.array([3, 0, 4, 1, 2])
    assert ari == pytest.approx(adjusted_rand_index(relabel[x], y), abs=1e-12)
    assert ari == pytest.approx(adjusted_rand_score(y, x), abs=1e-12)
    assert -0.5 - 1e-12 <= ari <= 1.0


def test_curve_examples():
    truth = TruthLabels(np.arange(5), np.arange(5) < 2)
    perfect = NominationList(np.arange(5), np.zeros(5), np.arange(5))
    c = mean_nomination_curve([perfect], truth)
    assert c.prob.tolist() == [1, 1, 0, 0, 0] and c.trials == 1
    rng = np.random.default_rng(0)
    lists = [NominationList(rng.permutation(5), np.zeros(5), np.arange(5)) for _ in range(4000)]
    c = mean_nomination_curve(lists, truth)
    assert c.prob.sum() == pytest.approx(2.0)
    assert np.all(np.abs(c.prob - 0.4) < 0.04)
    with pytest.raises(ValueError):
        mean_nomination_curve([], truth)
    with pytest.raises(ValueError):
        mean_nomination_curve([perfect, NominationList(np.arange(4), np.zeros(4), np.arange(4))],
                              [truth, TruthLabels(np.arange(4), np.arange(4) < 2)])


# ---------------------------------------------------------------- harness


def test_config_validation(tmp_path):
    with pytest.raises(ValueError):
        ExperimentConfig(block_sizes=[2, 2], lam=[[0.5, 0.5], [0.5, 0.5]], edges="x")
    with pytest.raises(ValueError):
        ExperimentConfig(block_sizes=[2, 2])
    with pytest.raises(ValueError):
        preset("small", trials=0)
    with pytest.raises(ValueError):
        preset("small", schemes=["nope"])
    with pytest.raises(ValueError):
        preset("huge")
    with pytest.raises(ValueError):
        ExperimentConfig.from_dict({"bogus": 1})
    cfg = preset("small", trials=3)
    path = tmp_path / "c.json"
    import json

    path.write_text(json.dumps(cfg.to_dict()))
    assert ExperimentConfig.from_json(path) == cfg


def _aggregates(report):
    # repr keeps NaN comparable and checks bit-identical floats
    return repr([(s.scheme, s.param_mode, s.mean_ap, s.se_ap, s.mean_ari, s.se_ari,
                  s.curve.prob.tolist()) for s in report.summaries])


def test_run_reproducible():
    cfg = preset("small", trials=3, param_modes=["known", "estimated"])
    a, b = run_experiment(cfg), run_experiment(cfg)
    assert _aggregates(a) == _aggregates(b)
    assert a.complete
    c = run_experiment(preset("small", trials=3, master_seed=1))
    assert _aggregates(c) != _aggregates(a)


def test_run_parallel_matches_serial():
    cfg = preset("small", trials=4, schemes=["ml", "res", "sp"])
    assert _aggregates(run_experiment(cfg, workers=2)) == _aggregates(run_experiment(cfg, workers=1))


def test_guard_failure_is_per_scheme():
    cfg = preset("small", trials=2, schemes=["res", "can"], canonical_guard=3)
    rep = run_experiment(cfg)
    can = rep.get("can")
    assert can.failures == 2 and "guard" in can.errors[0] and np.isnan(can.mean_ap)
    assert rep.get("res").failures == 0 and not rep.complete


def test_standard_error_and_ranges():
    rep = run_experiment(preset("small", trials=6))
    for s in rep.summaries:
        assert 0 <= s.mean_ap <= 1 and s.se_ap >= 0
        if s.scheme != "can":
            assert -0.5 <= s.mean_ari <= 1
        else:
            assert np.isnan(s.mean_ari)
        assert s.curve.prob.shape == (6,)
    assert 0 < rep.chance[4] < 1
    d = rep.to_dict()
    assert d["summaries"][0]["curve"]["prob"]


def test_sweep_rows():
    cfg = ExperimentConfig(block_sizes=[15, 15], lam=[[0.7, 0.3], [0.3, 0.6]], m=[2, 5, 10, 20],
                           trials=2, schemes=["res", "sp"])
    rep = run_experiment(cfg)
    assert [s.m for s in rep.summaries if s.scheme == "res"] == [2, 5, 10, 20]


def test_stratified_and_feature_config():
    cfg = ExperimentConfig(block_sizes=[10, 10], lam=[[0.5, 0.5], [0.5, 0.5]], m=[2, 2],
                           seed_policy="stratified", trials=3, schemes=["ml", "mlf"],
                           feature_means=[[0.0], [6.0]])
    rep = run_experiment(cfg)
    assert rep.get("mlf").mean_ap > 0.9
    missing = ExperimentConfig(block_sizes=[10, 10], lam=[[0.5, 0.5], [0.5, 0.5]], m=4,
                               trials=1, schemes=["mlf"])
    assert run_experiment(missing).get("mlf").failures == 1
