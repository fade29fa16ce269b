import itertools

import numpy as np
import pytest

from majdyn import dynamics as dyn
from majdyn.dynamics import BLUE, RED, DynamicsState
from majdyn.graphs import Graph, clique_with_leaves, complete, cycle, star
from majdyn.oracle import (
    ColoringSpace,
    OracleSizeError,
    build_chain,
    exact_distribution,
    exact_expected_red_volume,
)


def _state_from(graph, signals, colors):
    s = DynamicsState(graph, signals)
    s.colors[:] = colors
    return s


def brute_force_distribution(graph, delta):
    """Absorption probabilities from a dict-built chain and a dense solve.

    Shares nothing with the oracle module beyond the reference step rule.
    """
    n = graph.n
    p_red = p_blue = 0.0
    for bits in itertools.product((RED, BLUE), repeat=n):
        sig = np.array(bits, dtype=np.int8)
        w = np.prod([0.5 + delta if b == RED else 0.5 - delta for b in bits])
        start = (0,) * n
        index, order, edges = {start: 0}, [start], []
        i = 0
        while i < len(order):
            cur = order[i]
            for v in range(n):
                s = _state_from(graph, sig, cur)
                s.step(v)
                nxt = tuple(int(c) for c in s.colors)
                if nxt not in index:
                    index[nxt] = len(order)
                    order.append(nxt)
                edges.append((i, index[nxt]))
            i += 1
        k = len(order)
        P = np.zeros((k, k))
        for a, b in edges:
            P[a, b] += 1 / n
        absorbing = np.isclose(np.diag(P), 1.0)
        trans = np.flatnonzero(~absorbing)
        absb = np.flatnonzero(absorbing)
        if trans.size and trans[0] == 0:
            Q = P[np.ix_(trans, trans)]
            R = P[np.ix_(trans, absb)]
            B = np.linalg.solve(np.eye(trans.size) - Q, R)[0]
        else:
            B = (absb == 0).astype(float)
        for prob, code in zip(B, absb):
            c = np.array(order[code])
            p_red += w * prob * np.all(c == RED)
            p_blue += w * prob * np.all(c == BLUE)
    return p_red, p_blue


def brute_force_red_volume(graph, delta, T):
    """Average over every selection sequence of length T and every signal assignment."""
    n = graph.n
    total = 0.0
    for bits in itertools.product((RED, BLUE), repeat=n):
        sig = np.array(bits, dtype=np.int8)
        w = np.prod([0.5 + delta if b == RED else 0.5 - delta for b in bits])
        acc = 0.0
        for seq in itertools.product(range(n), repeat=T):
            colors = dyn.replay(graph, sig, list(seq)).final_colors
            credited = (colors == RED) | ((colors == 0) & (sig == RED))
            acc += graph.degrees[credited].sum()
        total += w * acc / n ** T
    return total


def test_k2_equals_half_plus_delta():
    assert exact_distribution(complete(2), 0.1).p_red_consensus == pytest.approx(0.6, abs=1e-12)


def test_single_node():
    d = exact_distribution(Graph(1, []), 0.25)
    assert d.p_red_consensus == pytest.approx(0.75, abs=1e-12)
    assert d.p_blue_consensus == pytest.approx(0.25, abs=1e-12)


@pytest.mark.parametrize("n", [3, 4, 5])
@pytest.mark.parametrize("delta", [0.05, 0.3])
def test_complete_graphs_herd(n, delta):
    d = exact_distribution(complete(n), delta)
    assert d.p_red_consensus == pytest.approx(0.5 + delta, abs=1e-10)
    assert d.p_no_consensus == pytest.approx(0.0, abs=1e-10)


@pytest.mark.parametrize("graph", [
    star(2), star(3), cycle(4), cycle(5), Graph(3, [(0, 1), (1, 2)]),
    clique_with_leaves(2, 1), Graph(4, [(0, 1), (1, 2), (2, 0), (2, 3)]),
])
@pytest.mark.parametrize("delta", [0.1, 0.25])
def test_matches_brute_force_chain(graph, delta):
    exact = exact_distribution(graph, delta)
    red, blue = brute_force_distribution(graph, delta)
    assert exact.p_red_consensus == pytest.approx(red, abs=1e-10)
    assert exact.p_blue_consensus == pytest.approx(blue, abs=1e-10)
    assert exact.terminal_probabilities().sum() == pytest.approx(1.0, abs=1e-10)
    assert exact.max_residual <= 1e-12


def test_star2_value_frozen():
    # computed by brute_force_distribution above; frozen here
    assert exact_distribution(star(2), 0.1).p_red_consensus == pytest.approx(0.616, abs=1e-12)


def test_star2_monte_carlo():
    g = star(2)
    trials = 200_000
    cols = dyn.simulate_summaries(g, 0.1, 77, range(trials))
    p_hat = np.mean(cols["terminal"] == dyn.TERMINAL_CODES[dyn.RED_CONSENSUS])
    p = exact_distribution(g, 0.1).p_red_consensus
    assert abs(p_hat - p) <= 3 * np.sqrt(p * (1 - p) / trials)


def test_mean_color_changes_matches_monte_carlo():
    g = cycle(5)
    exact = exact_distribution(g, 0.2).mean_color_changes
    cols = dyn.simulate_summaries(g, 0.2, 3, range(50_000))
    x = cols["color_changes"]
    assert abs(x.mean() - exact) <= 4 * x.std() / np.sqrt(x.size)


@pytest.mark.parametrize("graph", [cycle(4), star(3), complete(4), Graph(4, [(0, 1), (1, 2), (2, 3)])])
def test_chain_rows_and_absorbing_states(graph):
    space = ColoringSpace(graph)
    for bits in itertools.product((RED, BLUE), repeat=graph.n):
        sig = np.array(bits, dtype=np.int8)
        chain = build_chain(space, sig)
        rows = chain.transition_rows()
        np.testing.assert_allclose(rows.sum(axis=1), 1.0, atol=1e-12)
        for code, absorbing in zip(chain.reachable, chain.absorbing):
            state = _state_from(graph, sig, space.decode(code))
            assert bool(absorbing) == state.is_stable()


def test_size_caps():
    with pytest.raises(OracleSizeError):
        exact_distribution(cycle(9), 0.1)
    with pytest.raises(OracleSizeError):
        exact_expected_red_volume(cycle(7), 0.1, 2)
    with pytest.raises(OracleSizeError):
        exact_expected_red_volume(cycle(4), 0.1, 13)


@pytest.mark.parametrize("graph,delta", [(cycle(4), 0.2), (star(3), 0.1), (complete(3), 0.3)])
def test_expected_red_volume_at_zero(graph, delta):
    assert exact_expected_red_volume(graph, delta, 0) == pytest.approx((1 + 2 * delta) * graph.m)


def test_expected_red_volume_k3():
    value = exact_expected_red_volume(complete(3), 0.1, 3)
    assert value == pytest.approx(brute_force_red_volume(complete(3), 0.1, 3), abs=1e-12)
    assert value == pytest.approx(3.6, abs=1e-12)
    assert value >= 0.6 * 3


def test_expected_red_volume_c4():
    value = exact_expected_red_volume(cycle(4), 0.2, 4)
    assert value == pytest.approx(brute_force_red_volume(cycle(4), 0.2, 4), abs=1e-12)
    assert value == pytest.approx(5.6525, abs=1e-12)
    assert value >= 0.7 * 4


@pytest.mark.parametrize("graph", [Graph(3, [(0, 1), (1, 2)]), star(2), Graph(4, [(0, 1), (2, 3)])])
@pytest.mark.parametrize("T", [1, 2, 3])
def test_expected_red_volume_matches_enumeration(graph, T):
    assert exact_expected_red_volume(graph, 0.15, T) == pytest.approx(
        brute_force_red_volume(graph, 0.15, T), abs=1e-12)
