import math

import numpy as np
import pytest
import scipy.linalg
from hypothesis import given, settings
from hypothesis import strategies as st

from majdyn.graphs import Graph, complete, cycle, random_regular, star
from majdyn.spectral import (
    SpectralDomainError,
    SpectralSizeError,
    edges_between,
    mixing_check,
    mixing_sweep,
    spectrum,
    weighted_adjacency,
)


def _power_rayleigh(a, iters, seed=0):
    rng = np.random.default_rng(seed)
    x = rng.standard_normal(a.shape[0])
    for _ in range(iters):
        x = a @ x
        x /= np.linalg.norm(x)
    return float(x @ a @ x)


def power_lambdas(graph, iters=20_000):
    """Independent estimate of (lambda_1, lambda) by shifted and deflated power iteration."""
    m = graph.adjacency_matrix() / np.sqrt(np.outer(graph.degrees, graph.degrees))
    # M + I is positive semidefinite with top eigenvalue lambda_1 + 1
    lam1 = _power_rayleigh(m + np.eye(graph.n), 2000) - 1
    v1 = np.sqrt(graph.degrees / graph.volume_total)
    rest = m - np.outer(v1, v1)
    lam = math.sqrt(max(_power_rayleigh(rest @ rest, iters), 0.0))
    return lam1, lam


def test_weighted_adjacency_path():
    g = Graph(3, [(0, 1), (1, 2)])
    m = weighted_adjacency(g)
    assert m[0, 1] == pytest.approx(1 / math.sqrt(2), abs=1e-12)
    assert m[0, 2] == 0
    np.testing.assert_array_equal(m, m.T)


def test_weighted_adjacency_k4_and_star():
    m = weighted_adjacency(complete(4))
    off = m[~np.eye(4, dtype=bool)]
    np.testing.assert_allclose(off, 1 / 3)
    s = weighted_adjacency(star(3))
    np.testing.assert_allclose(s[0, 1:], 1 / math.sqrt(3))


def test_isolated_vertex_rejected():
    with pytest.raises(SpectralDomainError):
        weighted_adjacency(Graph(3, [(0, 1)]))


def test_spectrum_k4():
    rep = spectrum(complete(4))
    np.testing.assert_allclose(rep.eigenvalues, [1, -1 / 3, -1 / 3, -1 / 3], atol=1e-12)
    assert rep.lam == pytest.approx(1 / 3, abs=1e-8)


def test_spectrum_c4():
    rep = spectrum(cycle(4))
    np.testing.assert_allclose(rep.eigenvalues, [1, 0, 0, -1], atol=1e-12)
    assert rep.lam == pytest.approx(1.0, abs=1e-8)


@pytest.mark.parametrize("n", [5, 8, 13])
def test_spectrum_cycle_closed_form(n):
    expected = sorted((math.cos(2 * math.pi * k / n) for k in range(n)), reverse=True)
    np.testing.assert_allclose(spectrum(cycle(n)).eigenvalues, expected, atol=1e-10)


@pytest.mark.parametrize("n", [5, 13, 30])
def test_spectrum_complete_closed_form(n):
    assert spectrum(complete(n)).lam == pytest.approx(1 / (n - 1), abs=1e-10)


def test_random_regular_against_power_iteration():
    g = random_regular(200, 3, seed=7)
    rep = spectrum(g)
    lam1, lam = power_lambdas(g)
    assert rep.lambda_1 == pytest.approx(1.0, abs=1e-8)
    assert lam1 == pytest.approx(rep.lambda_1, abs=1e-8)
    assert lam == pytest.approx(rep.lam, abs=1e-6)
    assert rep.lam < 1


def test_regular_graph_matches_plain_normalized_adjacency():
    g = random_regular(120, 5, seed=2)
    plain = scipy.linalg.eigvalsh(g.adjacency_matrix() / 5)[::-1]
    np.testing.assert_allclose(spectrum(g).eigenvalues, plain, atol=1e-9)


def test_report_invariants():
    g = random_regular(80, 4, seed=1)
    rep = spectrum(g)
    ev = rep.eigenvalues
    assert np.all(np.diff(ev) <= 1e-12)
    assert np.all(np.abs(ev) <= 1 + 1e-9)
    assert 0 <= rep.lam <= 1
    assert abs(ev.sum()) <= 1e-7
    assert np.trace(weighted_adjacency(g)) == 0
    assert rep.max_residual <= 1e-8
    assert rep.is_lambda_expander_for(rep.lam + 1e-6)
    assert not rep.is_lambda_expander_for(rep.lam - 1e-3)
    d = rep.to_dict()
    assert set(d) >= {"n", "lambda", "lambda_1", "max_residual"}


def test_size_and_domain_errors():
    with pytest.raises(SpectralSizeError):
        spectrum(cycle(30), cap=20)
    with pytest.raises(SpectralDomainError):
        spectrum(Graph(4, [(0, 1), (2, 3)]))


def test_edges_between_double_counts_intersection():
    g = complete(3)
    allv = range(3)
    assert edges_between(g, allv, allv) == g.volume_total
    assert edges_between(g, [0], [1, 2]) == 2
    assert edges_between(g, [0, 1], [0, 1]) == 2


def test_mixing_full_and_empty_sets():
    g = random_regular(50, 4, seed=0)
    lam = spectrum(g).lam
    full = mixing_check(g, lam, range(g.n), range(g.n))
    assert full.lhs == pytest.approx(0.0, abs=1e-9) and full.holds
    # the |E| denominator form fails on the full set
    assert full.lhs_edge_denominator == pytest.approx(g.volume_total)
    empty = mixing_check(g, lam, [], range(10))
    assert empty.lhs == 0 and empty.rhs == 0 and empty.holds


def test_mixing_sweep_random_regular_100_4():
    g = random_regular(100, 4, seed=3)
    res = mixing_sweep(g, spectrum(g).lam, 1000, seed=11)
    assert res["failed"] == 0 and res["passed"] == 1000


def test_mixing_detects_too_small_lambda():
    g = random_regular(100, 4, seed=3)
    res = mixing_sweep(g, 0.0, 200, seed=1)
    assert res["failed"] > 0


@settings(max_examples=60, deadline=None)
@given(st.integers(0, 10_000), st.integers(0, 2**32 - 1))
def test_mixing_holds_for_any_subsets(graph_seed, subset_seed):
    g = random_regular(40, 3, graph_seed)
    lam = spectrum(g).lam
    rng = np.random.default_rng(subset_seed)
    s = np.flatnonzero(rng.random(g.n) < rng.random())
    t = np.flatnonzero(rng.random(g.n) < rng.random())
    assert mixing_check(g, lam, s, t).holds
