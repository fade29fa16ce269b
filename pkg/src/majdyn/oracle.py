"""Exact outcome distributions for tiny graphs.

With the signals fixed, the process is a Markov chain on colourings: a
uniformly chosen node moves the colouring to a deterministic successor.
Colourings are encoded base 3 (digit v is the colour of node v). Stable
colourings are absorbing; absorption probabilities come from one sparse LU
solve per signal assignment, and the signal assignments are then averaged
with their binomial weights.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass

import numpy as np
import scipy.sparse as sp
import scipy.sparse.linalg as spla

from .dynamics import BLUE, RED, UNCOLORED, InvariantViolation

MAX_NODES = 8
MAX_NODES_VOLUME = 6
MAX_T_VOLUME = 12
RESIDUAL_TOL = 1e-12


class OracleSizeError(ValueError):
    pass


@dataclass(frozen=True)
class OutcomeDistribution:
    p_red_consensus: float
    p_blue_consensus: float
    p_no_consensus: float
    p_correct_majority_nodes: float
    p_correct_majority_volume: float
    mean_color_changes: float
    max_residual: float

    def terminal_probabilities(self):
        return np.array([self.p_red_consensus, self.p_blue_consensus, self.p_no_consensus])

    def to_dict(self):
        return dict(self.__dict__)


class ColoringSpace:
    """All 3**n colourings of a graph with precomputed neighbour counts."""

    def __init__(self, graph):
        n = graph.n
        self.graph = graph
        self.n = n
        self.size = 3 ** n
        codes = np.arange(self.size)
        self.powers = 3 ** np.arange(n)
        self.digits = (codes[:, None] // self.powers[None, :]) % 3
        adj = graph.adjacency_matrix()
        self.n_red = (self.digits == RED).astype(float) @ adj
        self.n_blue = (self.digits == BLUE).astype(float) @ adj

    def successors(self, signals):
        """``succ[s, v]``: colouring reached from s when v is selected."""
        sig = np.asarray(signals)[None, :]
        wb = np.where(self.n_red > self.n_blue, RED, np.where(self.n_red < self.n_blue, BLUE, sig))
        return np.arange(self.size)[:, None] + (wb - self.digits) * self.powers[None, :]

    def decode(self, code):
        return self.digits[code]


@dataclass
class ColoringChain:
    succ: np.ndarray
    reachable: np.ndarray   # sorted codes reachable from the all-uncoloured state
    absorbing: np.ndarray   # bool over ``reachable``

    @property
    def transient(self):
        return self.reachable[~self.absorbing]

    def transition_rows(self):
        """Dense transition rows over ``reachable`` (for inspection on tiny graphs)."""
        n = self.succ.shape[1]
        index = {int(c): i for i, c in enumerate(self.reachable)}
        rows = np.zeros((self.reachable.size, self.reachable.size))
        for i, c in enumerate(self.reachable):
            for v in range(n):
                rows[i, index[int(self.succ[c, v])]] += 1.0 / n
        return rows


def build_chain(space, signals):
    succ = space.successors(signals)
    reach = np.zeros(space.size, dtype=bool)
    reach[0] = True
    frontier = np.array([0])
    while frontier.size:
        nxt = np.unique(succ[frontier].ravel())
        frontier = nxt[~reach[nxt]]
        reach[frontier] = True
    reachable = np.flatnonzero(reach)
    absorbing = np.all(succ[reachable] == reachable[:, None], axis=1)
    return ColoringChain(succ, reachable, absorbing)


def _visits(chain, n):
    """Expected visits to each transient state starting from state 0, and the residual."""
    trans = chain.transient
    pos = np.full(chain.succ.shape[0], -1)
    pos[trans] = np.arange(trans.size)
    rows = np.repeat(np.arange(trans.size), n)
    cols = pos[chain.succ[trans].ravel()]
    keep = cols >= 0
    q = sp.csr_matrix((np.full(keep.sum(), 1.0 / n), (rows[keep], cols[keep])),
                      shape=(trans.size, trans.size))
    system = (sp.identity(trans.size, format="csc") - q.T).tocsc()
    rhs = np.zeros(trans.size)
    rhs[pos[0]] = 1.0
    y = spla.splu(system).solve(rhs)
    residual = float(np.abs(system @ y - rhs).max())
    return trans, y, residual


def _signal_assignments(n, delta):
    for bits in itertools.product((RED, BLUE), repeat=n):
        reds = bits.count(RED)
        w = (0.5 + delta) ** reds * (0.5 - delta) ** (n - reds)
        if w > 0:
            yield np.array(bits, dtype=np.int8), w


def exact_distribution(graph, delta):
    """Exact terminal-outcome probabilities for graphs with at most 8 nodes."""
    n = graph.n
    if n > MAX_NODES:
        raise OracleSizeError(f"exact analysis limited to n <= {MAX_NODES}")
    space = ColoringSpace(graph)
    deg = graph.degrees
    acc = np.zeros(5)
    worst = 0.0
    for signals, weight in _signal_assignments(n, delta):
        chain = build_chain(space, signals)
        trans, y, residual = _visits(chain, n)
        if residual > RESIDUAL_TOL:
            raise ArithmeticError(f"absorption solve residual {residual:.3g}")
        worst = max(worst, residual)
        absorbed = np.zeros(space.size)
        nxt = chain.succ[trans]
        moved = nxt != trans[:, None]
        np.add.at(absorbed, nxt.ravel(), np.repeat(y / n, n))
        absorbed[trans] = 0.0
        changes = float(y @ moved.sum(axis=1)) / n
        final = chain.reachable[chain.absorbing]
        p = absorbed[final]
        digits = space.decode(final)
        reds = (digits == RED).sum(axis=1)
        blues = (digits == BLUE).sum(axis=1)
        red_vol = (digits == RED) @ deg
        acc += weight * np.array([
            p[reds == n].sum(),
            p[blues == n].sum(),
            p[2 * reds > n].sum(),
            p[2 * red_vol > graph.volume_total].sum(),
            changes,
        ])
    p_red, p_blue = acc[0], acc[1]
    return OutcomeDistribution(
        p_red_consensus=float(p_red),
        p_blue_consensus=float(p_blue),
        p_no_consensus=float(max(0.0, 1.0 - p_red - p_blue)),
        p_correct_majority_nodes=float(acc[2]),
        p_correct_majority_volume=float(acc[3]),
        mean_color_changes=float(acc[4]),
        max_residual=worst,
    )


def exact_expected_red_volume(graph, delta, T):
    """E[sum_v d(v) f_v] after T uniform selections.

    ``f_v`` is 1 when v is red, and for a still-uncoloured v it is v's own
    signal. Computed by propagating the exact distribution over colourings T
    steps, which equals the average over all n**T selection sequences.
    Raises InvariantViolation if the result falls below (1/2 + delta)|E|.
    """
    n = graph.n
    if n > MAX_NODES_VOLUME or T > MAX_T_VOLUME:
        raise OracleSizeError(f"limited to n <= {MAX_NODES_VOLUME} and T <= {MAX_T_VOLUME}")
    if T < 0:
        raise ValueError("T must be >= 0")
    space = ColoringSpace(graph)
    deg = graph.degrees
    total = 0.0
    for signals, weight in _signal_assignments(n, delta):
        succ = space.successors(signals)
        p = np.zeros(space.size)
        p[0] = 1.0
        for _ in range(T):
            p = np.bincount(succ.ravel(), weights=np.repeat(p / n, n), minlength=space.size)
        credited = (space.digits == RED) | ((space.digits == UNCOLORED) & (signals[None, :] == RED))
        total += weight * float(p @ (credited @ deg))
    if total < (0.5 + delta) * graph.m - 1e-9:
        raise InvariantViolation(f"expected red volume {total} below (1/2+delta)|E|")
    return total
