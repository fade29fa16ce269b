import json

import numpy as np
import pytest
from statsmodels.stats.proportion import proportion_confint

from majdyn import dynamics as dyn
from majdyn import experiments as ex
from majdyn.graphs import clique_with_leaves, complete, cycle, random_regular, star
from majdyn.stats import Z95, wilson_interval


@pytest.mark.parametrize("k,n", [(0, 10), (10, 10), (5, 10), (6000, 10000), (1, 2000)])
def test_wilson_matches_statsmodels(k, n):
    est = wilson_interval(k, n)
    lo, hi = proportion_confint(k, n, alpha=0.05, method="wilson")
    assert est.lo == pytest.approx(lo, abs=1e-9)
    assert est.hi == pytest.approx(hi, abs=1e-9)
    assert est.lo <= est.point <= est.hi and 0 <= est.lo and est.hi <= 1


def test_wilson_closed_form_extremes():
    z2 = Z95 ** 2
    assert wilson_interval(0, 10).hi == pytest.approx(z2 / (10 + z2))
    assert wilson_interval(10, 10).lo == pytest.approx(10 / (10 + z2))
    with pytest.raises(ValueError):
        wilson_interval(3, 2)
    with pytest.raises(ValueError):
        wilson_interval(0, 0)


@pytest.mark.parametrize("kw", [dict(trials=0), dict(delta=0.0), dict(delta=0.51), dict(graph=None)])
def test_config_validation(kw):
    base = dict(graph=complete(3), delta=0.1, trials=5)
    base.update(kw)
    with pytest.raises(ValueError):
        ex.ExperimentConfig(**base)


def test_config_from_family():
    cfg = ex.ExperimentConfig(family="cycle:7", delta=0.2, trials=3)
    assert cfg.graph == cycle(7)


def test_probability_sanity():
    rep = ex.estimate_outcomes(ex.ExperimentConfig(graph=cycle(12), delta=0.2, trials=400, seed=1))
    e = rep.estimates
    total = e["p_red_consensus"].point + e["p_blue_consensus"].point
    assert total == pytest.approx(e["p_consensus"].point)
    assert e["p_consensus"].point <= 1


@pytest.mark.parametrize("graph,checkpoints", [
    (clique_with_leaves(4, 2), ()),
    (random_regular(80, 3, 1), ()),
    (cycle(20), (0, 5, 40)),
])
def test_results_independent_of_worker_count(tmp_path, graph, checkpoints):
    outs = []
    for workers in (1, 3):
        cfg = ex.ExperimentConfig(graph=graph, delta=0.15, trials=37, seed=4, workers=workers,
                                  checkpoints=checkpoints)
        path = tmp_path / f"w{workers}.json"
        ex.write_outcome_report(ex.estimate_outcomes(cfg), path)
        outs.append(path.read_bytes())
    assert outs[0] == outs[1]


def test_batched_and_record_paths_agree():
    g = star(9)
    a = ex.estimate_outcomes(ex.ExperimentConfig(graph=g, delta=0.2, trials=60, seed=2))
    b = ex.estimate_outcomes(ex.ExperimentConfig(graph=g, delta=0.2, trials=60, seed=2, keep_records=True))
    for k in dyn.SUMMARY_FIELDS:
        np.testing.assert_array_equal(a.per_trial[k], b.per_trial[k])


def test_non_stabilizing_trial_aborts():
    cfg = ex.ExperimentConfig(graph=cycle(40), delta=0.1, trials=5, seed=3, max_steps=3)
    with pytest.raises(dyn.NotStabilizedError, match="seed 3"):
        ex.estimate_outcomes(cfg)


def test_report_schema_and_csv(tmp_path):
    cfg = ex.ExperimentConfig(family="star:6", delta=0.2, trials=10, seed=0, checkpoints=(2,))
    rep = ex.estimate_outcomes(cfg)
    path = tmp_path / "r.json"
    ex.write_outcome_report(rep, path)
    doc = json.loads(path.read_text())
    assert set(doc) >= {"config", "graph_hash", "estimates", "per_trial", "checkpoints"}
    assert doc["graph_hash"] == star(6).content_hash()
    for est in doc["estimates"].values():
        assert set(est) == {"point", "lo", "hi", "trials"}
    assert len(doc["per_trial"]) == 10 and len(doc["checkpoints"]) == 10
    written = ex.write_outcome_report(rep, tmp_path / "r.csv", fmt="csv")
    assert len(written) == 2
    lines = written[0].read_text().splitlines()
    assert lines[0].startswith("trial,") and len(lines) == 11
    assert written[1].read_text().splitlines()[0].startswith("trial,t,red_volume")
    with pytest.raises(ValueError):
        ex.write_outcome_report(rep, tmp_path / "r.x", fmt="xml")


def test_order_statistics():
    m, ell = 4, 2
    # first-selection times; 0 = never selected; leaves of clique node i are m + i*ell + j
    first = np.zeros(m + m * ell, dtype=np.int64)
    first[:m] = [5, 1, 9, 0]
    first[m + 0 * ell:m + 1 * ell] = [2, 0]     # node 0 (2nd picked): one leaf before it
    first[m + 2 * ell:m + 3 * ell] = [3, 4]     # node 2 (3rd picked): two leaves before it
    stats = ex.order_statistics(first, m, ell, max_i=4)
    assert stats == {2: True, 3: True, 4: None}
    first[m] = 7
    assert ex.order_statistics(first, m, ell, max_i=3)[2] is False


def test_star_bound_formula():
    assert ex.star_bound(2000, 0.3) == pytest.approx(1 - np.log(2000) / (2 * 0.09 * 2000) - 1 / 2000)


def test_small_expander_suite_is_trend_only():
    rep = ex.expander_trend_suite(n=400, d=3, delta=0.45, trials=40, seed=0)
    assert rep.extra["regime"] == "trend-only"
    assert rep.extra["lambda"] > 0.45 / 6
    assert {"lambda", "delta_over_6", "regime"} <= set(rep.to_dict()["extra"])


def test_suite_reports_serialize():
    rep = ex.complete_suite(n=10, trials=200, seed=1)
    doc = json.loads(ex.dumps_json(rep.to_dict()))
    assert doc["suite"] == "complete" and isinstance(doc["passed"], bool)
    assert all("PASS" in c.line() or "FAIL" in c.line() for c in rep.checks)
