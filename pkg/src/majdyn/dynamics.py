"""Asynchronous majority dynamics.

A uniformly random node is selected at each step. It turns red if more of
its neighbours are red than blue, blue in the opposite case, and its private
signal on a tie. Uncoloured neighbours count for neither side, so a node
whose neighbourhood is entirely uncoloured announces its signal.

Two engines are provided. ``DynamicsState`` is a straightforward Python
implementation that recounts neighbourhoods on every step; it is the
readable reference. ``run``/``replay`` drive a numba kernel that maintains
neighbour counts, volumes, the potential and the "front" volumes
incrementally. Tests cross-check the two.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field

import numpy as np
from numba import njit

from .rng import trial_generator


class Color(enum.IntEnum):
    UNCOLORED = 0
    RED = 1
    BLUE = 2


UNCOLORED, RED, BLUE = int(Color.UNCOLORED), int(Color.RED), int(Color.BLUE)

RED_CONSENSUS = "red_consensus"
BLUE_CONSENSUS = "blue_consensus"
NO_CONSENSUS = "no_consensus"


class NotStabilizedError(RuntimeError):
    def __init__(self, message, record=None):
        super().__init__(message)
        self.record = record


class InvariantViolation(AssertionError):
    pass


# --------------------------------------------------------------------------
# signals


@dataclass(frozen=True)
class SignalAssignment:
    signals: np.ndarray
    delta: float

    def __post_init__(self):
        if not 0 < self.delta <= 0.5:
            raise ValueError("delta must lie in (0, 1/2]")
        sig = np.asarray(self.signals, dtype=np.int8)
        if sig.size and not np.all((sig == RED) | (sig == BLUE)):
            raise ValueError("signals must be RED or BLUE")
        sig.setflags(write=False)
        object.__setattr__(self, "signals", sig)

    def __len__(self):
        return self.signals.size

    @classmethod
    def sample(cls, n, delta, rng):
        draws = rng.random(n)
        return cls(np.where(draws < 0.5 + delta, RED, BLUE).astype(np.int8), delta)

    def with_changes(self, changes):
        sig = self.signals.copy()
        for v, c in changes.items():
            sig[v] = c
        return SignalAssignment(sig, self.delta)


def _as_signal_array(signals):
    if isinstance(signals, SignalAssignment):
        return signals.signals
    return np.asarray(signals, dtype=np.int8)


def would_announce(n_red, n_blue, signal):
    if n_red > n_blue:
        return RED
    if n_red < n_blue:
        return BLUE
    return signal


# --------------------------------------------------------------------------
# reference engine


class DynamicsState:
    """Mutable process state with a readable step rule.

    Every query recounts from the colour vector; only ``red_volume``,
    ``blue_volume``, ``uncolored_count`` and ``unstable_count`` are carried
    between steps, and ``recompute`` checks those against a full rescan.
    """

    def __init__(self, graph, signals):
        self.graph = graph
        self.signals = _as_signal_array(signals)
        if self.signals.size != graph.n:
            raise ValueError("one signal per node required")
        self.colors = np.zeros(graph.n, dtype=np.int8)
        self.t = 0
        self.history = []
        self.red_volume = 0
        self.blue_volume = 0
        self.uncolored_count = graph.n
        self.unstable_count = graph.n

    def counts(self, v):
        nb = self.colors[self.graph.neighbors(v)]
        return int(np.count_nonzero(nb == RED)), int(np.count_nonzero(nb == BLUE))

    def would_be(self, v):
        return would_announce(*self.counts(v), int(self.signals[v]))

    def is_unstable(self, v):
        return self.would_be(v) != self.colors[v]

    def step(self, v):
        v = int(v)
        self.t += 1
        self.history.append(v)
        old = int(self.colors[v])
        new = self.would_be(v)
        if new == old:
            return False
        touched = [v, *self.graph.neighbors(v).tolist()]
        before = sum(self.is_unstable(u) for u in touched)
        k = int(self.graph.degrees[v])
        if old == RED:
            self.red_volume -= k
        elif old == BLUE:
            self.blue_volume -= k
        else:
            self.uncolored_count -= 1
        if new == RED:
            self.red_volume += k
        else:
            self.blue_volume += k
        self.colors[v] = new
        after = sum(self.is_unstable(u) for u in touched)
        self.unstable_count += after - before
        return True

    def is_stable(self):
        return all(not self.is_unstable(v) for v in range(self.graph.n))

    def potential(self):
        return potential(self.graph, self.colors, self.signals)

    def recompute(self):
        """Full rescan of the carried quantities."""
        deg = self.graph.degrees
        return {
            "red_volume": int(deg[self.colors == RED].sum()),
            "blue_volume": int(deg[self.colors == BLUE].sum()),
            "uncolored_count": int(np.count_nonzero(self.colors == UNCOLORED)),
            "unstable_count": sum(self.is_unstable(v) for v in range(self.graph.n)),
        }

    def front(self):
        return classify_front(self.graph, self.colors, self.signals)


def potential(graph, colors, signals):
    """Self-disagreements plus twice the number of unsettled edges.

    An uncoloured node counts as disagreeing with its signal; an edge scores
    2 when either end is uncoloured or the ends differ.
    """
    colors = np.asarray(colors)
    signals = _as_signal_array(signals)
    f = int(np.count_nonzero(colors != signals))
    e = graph.edges()
    cu, cv = colors[e[:, 0]], colors[e[:, 1]]
    g = 2 * int(np.count_nonzero((cu == UNCOLORED) | (cv == UNCOLORED) | (cu != cv)))
    return f + g


@dataclass(frozen=True)
class Front:
    """Volumes of the announced sets and of the would-be announcements.

    ``B`` holds blue and uncoloured nodes. ``vol_up`` is Vol(B ∩ R') and
    ``vol_down`` is Vol(R ∩ B').
    """

    vol_R: int
    vol_B: int
    vol_Rprime: int
    vol_Bprime: int
    count_R: int
    count_B: int
    vol_up: int
    vol_down: int

    def as_dict(self):
        return dict(self.__dict__)


def would_be_colors(graph, colors, signals):
    colors = np.asarray(colors)
    signals = _as_signal_array(signals)
    src = np.repeat(np.arange(graph.n), graph.degrees)
    nbr = colors[graph.indices]
    n_red = np.bincount(src, weights=(nbr == RED), minlength=graph.n)
    n_blue = np.bincount(src, weights=(nbr == BLUE), minlength=graph.n)
    return np.where(n_red > n_blue, RED, np.where(n_red < n_blue, BLUE, signals)).astype(np.int8)


def classify_front(graph, colors, signals):
    colors = np.asarray(colors)
    wb = would_be_colors(graph, colors, signals)
    deg = graph.degrees
    in_r = colors == RED
    in_b = ~in_r
    return Front(
        vol_R=int(deg[in_r].sum()),
        vol_B=int(deg[in_b].sum()),
        vol_Rprime=int(deg[wb == RED].sum()),
        vol_Bprime=int(deg[wb == BLUE].sum()),
        count_R=int(in_r.sum()),
        count_B=int(in_b.sum()),
        vol_up=int(deg[in_b & (wb == RED)].sum()),
        vol_down=int(deg[in_r & (wb == BLUE)].sum()),
    )


def front_bound(front, lam, vol_total):
    """Upper bound on Vol(B') implied by the expander mixing inequality, or None.

    Valid whenever Vol(B) < Vol(V)/2: ``Vol(B') <= Vol(B) (lam / (1/2 - Vol(B)/Vol(V)))**2``.
    """
    gap = 0.5 - front.vol_B / vol_total
    if gap <= 0:
        return None
    return front.vol_B * (lam / gap) ** 2


def halving_hypothesis(front, lam, delta, vol_total):
    """Expansion and red-majority hypotheses of the halving bound, volume form."""
    # same comparison slack as SpectralReport.is_lambda_expander_for
    return lam <= delta / 6 + 1e-9 and front.vol_R >= (0.5 + delta / 4) * vol_total


def front_halves(front):
    return 2 * front.vol_Bprime <= front.vol_B


def up_dominates_down(front, c):
    """Vol(B') <= Vol(B)/c implies Vol(B∩R') >= c Vol(R∩B') and Vol(B∩R') >= 1."""
    if c * front.vol_Bprime > front.vol_B:
        return True
    if front.vol_B == 0:
        return front.vol_up == 0 and front.vol_down == 0
    return front.vol_up >= c * front.vol_down and front.vol_up >= 1


def classify_terminal(colors):
    colors = np.asarray(colors)
    if np.all(colors == RED):
        return RED_CONSENSUS
    if np.all(colors == BLUE):
        return BLUE_CONSENSUS
    return NO_CONSENSUS


# --------------------------------------------------------------------------
# numba engine

S_T, S_RED_VOL, S_BLUE_VOL, S_RED_CNT, S_BLUE_CNT, S_UNC_CNT, S_UNSTABLE, S_H = range(8)
S_CHANGES, S_HVIOL, S_RP_VOL, S_BP_VOL, S_UP_VOL, S_DOWN_VOL, S_UP_CNT, S_DOWN_CNT = range(8, 16)
S_UP_SQ, S_DOWN_SQ = 16, 17
N_SCALARS = 18

SCALAR_NAMES = (
    "t", "red_volume", "blue_volume", "red_count", "blue_count", "uncolored_count",
    "unstable_count", "potential", "color_changes", "potential_violations",
    "vol_Rprime", "vol_Bprime", "vol_up", "vol_down", "count_up", "count_down",
    "sq_up", "sq_down",
)

# change-log columns; front quantities are taken just before the change
CHANGE_FIELDS = ("t", "node", "old", "new", "vol_up", "vol_down", "count_up", "count_down",
                 "sq_up", "sq_down")


@njit(cache=True)
def _contrib(sc, c, w, k, sign):
    if w != c:
        sc[S_UNSTABLE] += sign
    if w == RED:
        sc[S_RP_VOL] += sign * k
        if c != RED:
            sc[S_UP_VOL] += sign * k
            sc[S_UP_CNT] += sign
            sc[S_UP_SQ] += sign * k * k
    else:
        sc[S_BP_VOL] += sign * k
        if c == RED:
            sc[S_DOWN_VOL] += sign * k
            sc[S_DOWN_CNT] += sign
            sc[S_DOWN_SQ] += sign * k * k


@njit(cache=True)
def _advance(indptr, indices, deg, signals, colors, nr, nb, wb, first_sel, sc,
             sel, stop_when_stable, cps, cp_state, cp_out, log, log_state):
    """Apply selections ``sel`` in order; return how many were consumed."""
    n_cps = cps.shape[0]
    log_cap = log.shape[0]
    for i in range(sel.shape[0]):
        v = sel[i]
        t = sc[S_T] + 1
        sc[S_T] = t
        if first_sel[v] < 0:
            first_sel[v] = t
        old = colors[v]
        new = wb[v]
        if new != old:
            if log_state[0] < log_cap:
                r = log_state[0]
                log[r, 0] = t
                log[r, 1] = v
                log[r, 2] = old
                log[r, 3] = new
                log[r, 4] = sc[S_UP_VOL]
                log[r, 5] = sc[S_DOWN_VOL]
                log[r, 6] = sc[S_UP_CNT]
                log[r, 7] = sc[S_DOWN_CNT]
                log[r, 8] = sc[S_UP_SQ]
                log[r, 9] = sc[S_DOWN_SQ]
            log_state[0] += 1
            k = deg[v]
            s = signals[v]
            dh = (1 if new != s else 0) - (1 if old != s else 0)
            for j in range(indptr[v], indptr[v + 1]):
                cu = colors[indices[j]]
                gb = 2 if (old == UNCOLORED or cu == UNCOLORED or old != cu) else 0
                ga = 2 if (cu == UNCOLORED or new != cu) else 0
                dh += ga - gb
            sc[S_H] += dh
            if dh > -1:
                sc[S_HVIOL] += 1
            sc[S_CHANGES] += 1
            _contrib(sc, old, new, k, -1)
            if old == RED:
                sc[S_RED_VOL] -= k
                sc[S_RED_CNT] -= 1
            elif old == BLUE:
                sc[S_BLUE_VOL] -= k
                sc[S_BLUE_CNT] -= 1
            else:
                sc[S_UNC_CNT] -= 1
            if new == RED:
                sc[S_RED_VOL] += k
                sc[S_RED_CNT] += 1
            else:
                sc[S_BLUE_VOL] += k
                sc[S_BLUE_CNT] += 1
            colors[v] = new
            _contrib(sc, new, new, k, 1)
            for j in range(indptr[v], indptr[v + 1]):
                u = indices[j]
                ku = deg[u]
                _contrib(sc, colors[u], wb[u], ku, -1)
                if old == RED:
                    nr[u] -= 1
                elif old == BLUE:
                    nb[u] -= 1
                if new == RED:
                    nr[u] += 1
                else:
                    nb[u] += 1
                if nr[u] > nb[u]:
                    wb[u] = RED
                elif nr[u] < nb[u]:
                    wb[u] = BLUE
                else:
                    wb[u] = signals[u]
                _contrib(sc, colors[u], wb[u], ku, 1)
        while cp_state[0] < n_cps and cps[cp_state[0]] == t:
            for q in range(sc.shape[0]):
                cp_out[cp_state[0], q] = sc[q]
            cp_state[0] += 1
        if stop_when_stable and sc[S_UNSTABLE] == 0:
            return i + 1
    return sel.shape[0]


class _Engine:
    """Kernel state for one trajectory."""

    def __init__(self, graph, signals, checkpoints=(), log_changes=False):
        n = graph.n
        self.graph = graph
        self.signals = np.ascontiguousarray(_as_signal_array(signals), dtype=np.int8)
        if self.signals.size != n:
            raise ValueError("one signal per node required")
        self.colors = np.zeros(n, dtype=np.int8)
        self.nr = np.zeros(n, dtype=np.int32)
        self.nb = np.zeros(n, dtype=np.int32)
        self.wb = self.signals.copy()
        self.first_sel = np.full(n, -1, dtype=np.int64)
        deg = graph.degrees
        red = self.signals == RED
        sc = np.zeros(N_SCALARS, dtype=np.int64)
        sc[S_UNC_CNT] = n
        sc[S_UNSTABLE] = n
        sc[S_H] = n + 2 * graph.m
        sc[S_RP_VOL] = sc[S_UP_VOL] = deg[red].sum()
        sc[S_BP_VOL] = deg[~red].sum()
        sc[S_UP_CNT] = red.sum()
        sc[S_UP_SQ] = (deg[red] ** 2).sum()
        self.sc = sc
        self.cps = np.array(sorted(set(int(c) for c in checkpoints)), dtype=np.int64)
        if self.cps.size and self.cps[0] < 0:
            raise ValueError("checkpoints must be non-negative")
        self.cp_state = np.zeros(1, dtype=np.int64)
        self.cp_out = np.zeros((self.cps.size, N_SCALARS), dtype=np.int64)
        while self.cp_state[0] < self.cps.size and self.cps[self.cp_state[0]] == 0:
            self.cp_out[self.cp_state[0]] = sc
            self.cp_state[0] += 1
        cap = n + 2 * graph.m + 1 if log_changes else 0
        self.log = np.zeros((cap, len(CHANGE_FIELDS)), dtype=np.int64)
        self.log_state = np.zeros(1, dtype=np.int64)

    def advance(self, sel, stop_when_stable=True):
        g = self.graph
        sel = np.ascontiguousarray(sel, dtype=np.int64)
        return _advance(g.indptr, g.indices, g.degrees, self.signals, self.colors, self.nr,
                        self.nb, self.wb, self.first_sel, self.sc, sel, stop_when_stable,
                        self.cps, self.cp_state, self.cp_out, self.log, self.log_state)

    @property
    def t(self):
        return int(self.sc[S_T])

    @property
    def stable(self):
        return self.sc[S_UNSTABLE] == 0

    def finish_checkpoints(self):
        """Checkpoints past the current time see the current (frozen) state."""
        out = self.cp_out.copy()
        for i in range(int(self.cp_state[0]), self.cps.size):
            out[i] = self.sc
        if self.cps.size:
            out[:, S_T] = self.cps
        return out

    def changes(self):
        k = int(self.log_state[0])
        if k > self.log.shape[0]:
            raise InvariantViolation("change log overflow: more changes than |V| + 2|E|")
        return self.log[:k].copy()


def default_max_steps(graph):
    n, m = graph.n, graph.m
    return 10 * (n * n + 2 * n * m)


@dataclass
class TrajectoryRecord:
    trial: int
    seed: int
    n: int
    volume_total: int
    stabilized: bool
    terminal: str | None
    steps: int
    color_changes: int
    potential: int
    potential_violations: int
    red_count: int
    blue_count: int
    red_volume: int
    blue_volume: int
    first_selected: int
    first_signal: int
    checkpoint_times: np.ndarray = field(repr=False)
    checkpoints: np.ndarray = field(repr=False)
    final_colors: np.ndarray = field(repr=False)
    signals: np.ndarray = field(repr=False)
    first_selection: np.ndarray = field(repr=False)
    selections: np.ndarray | None = field(default=None, repr=False)
    changes: np.ndarray | None = field(default=None, repr=False)

    @property
    def steps_to_stabilize(self):
        return self.steps if self.stabilized else None

    @property
    def correct_majority_nodes(self):
        return 2 * self.red_count > self.n

    @property
    def correct_majority_volume(self):
        return 2 * self.red_volume > self.volume_total

    def checkpoint_rows(self):
        """One dict per checkpoint with the observer quantities."""
        rows = []
        for row in self.checkpoints:
            rows.append({
                "trial": self.trial,
                "t": int(row[S_T]),
                "red_volume": int(row[S_RED_VOL]),
                "blue_volume": int(row[S_BLUE_VOL]),
                "uncolored_count": int(row[S_UNC_CNT]),
                "potential": int(row[S_H]),
                "vol_R": int(row[S_RED_VOL]),
                "vol_B": self.volume_total - int(row[S_RED_VOL]),
                "vol_Rprime": int(row[S_RP_VOL]),
                "vol_Bprime": int(row[S_BP_VOL]),
                "unstable_count": int(row[S_UNSTABLE]),
            })
        return rows

    def summary(self):
        return {
            "trial": self.trial,
            "terminal": self.terminal,
            "stabilized": self.stabilized,
            "steps": self.steps,
            "color_changes": self.color_changes,
            "red_count": self.red_count,
            "red_volume": self.red_volume,
            "correct_majority_nodes": self.correct_majority_nodes,
            "correct_majority_volume": self.correct_majority_volume,
            "first_selected": self.first_selected,
            "first_signal": self.first_signal,
            "potential_violations": self.potential_violations,
        }


def _chunk_size(n, taken):
    return max(256, 8 * n, taken)


def run(graph, signals=None, *, delta=None, seed=0, trial=0, max_steps=None, checkpoints=(),
        horizon=None, record_selections=False, record_changes=False):
    """Run one trajectory until stabilization.

    Signals are sampled from the trial stream when ``signals`` is None (then
    ``delta`` is required). With ``horizon`` the run stops after that many
    selections even if unstable, and no error is raised; otherwise reaching
    ``max_steps`` unstable raises ``NotStabilizedError``.
    """
    gen = trial_generator(seed, trial)
    if signals is None:
        if delta is None:
            raise ValueError("either signals or delta is required")
        signals = SignalAssignment.sample(graph.n, delta, gen)
    eng = _Engine(graph, signals, checkpoints, log_changes=record_changes)
    limit = horizon if horizon is not None else (max_steps or default_max_steps(graph))
    if limit < 0 or (horizon is None and limit < 1):
        raise ValueError("max_steps must be >= 1")
    chunks = []
    while eng.t < limit and not eng.stable:
        size = min(_chunk_size(graph.n, eng.t), limit - eng.t)
        sel = gen.integers(0, graph.n, size=size, dtype=np.int64)
        used = eng.advance(sel)
        if record_selections:
            chunks.append(sel[:used])
    record = _make_record(eng, trial, seed, chunks if record_selections else None, record_changes)
    if horizon is None and not record.stabilized:
        raise NotStabilizedError(
            f"trial {trial} (seed {seed}) did not stabilize within {limit} steps", record)
    bound = graph.n + 2 * graph.m
    if record.color_changes > bound:
        raise InvariantViolation(f"{record.color_changes} colour changes exceed |V|+2|E| = {bound}")
    return record


def replay(graph, signals, sequence, stop_when_stable=False, record_changes=False, checkpoints=()):
    """Apply an explicit selection sequence; returns a TrajectoryRecord."""
    eng = _Engine(graph, signals, checkpoints, log_changes=record_changes)
    seq = np.asarray(sequence, dtype=np.int64)
    if seq.size and (seq.min() < 0 or seq.max() >= graph.n):
        raise ValueError("selection out of range")
    used = eng.advance(seq, stop_when_stable=stop_when_stable)
    return _make_record(eng, -1, -1, [seq[:used]], record_changes)


def _make_record(eng, trial, seed, chunks, record_changes):
    sc = eng.sc
    colors = eng.colors.copy()
    first = eng.first_sel.copy()
    if np.any(first > 0):
        first_node = int(np.argmin(np.where(first > 0, first, np.iinfo(np.int64).max)))
        first_signal = int(eng.signals[first_node])
    else:
        first_node, first_signal = -1, -1
    stable = bool(sc[S_UNSTABLE] == 0)
    return TrajectoryRecord(
        trial=trial,
        seed=seed,
        n=eng.graph.n,
        volume_total=eng.graph.volume_total,
        stabilized=stable,
        terminal=classify_terminal(colors) if stable else None,
        steps=int(sc[S_T]),
        color_changes=int(sc[S_CHANGES]),
        potential=int(sc[S_H]),
        potential_violations=int(sc[S_HVIOL]),
        red_count=int(sc[S_RED_CNT]),
        blue_count=int(sc[S_BLUE_CNT]),
        red_volume=int(sc[S_RED_VOL]),
        blue_volume=int(sc[S_BLUE_VOL]),
        first_selected=first_node,
        first_signal=first_signal,
        checkpoint_times=eng.cps.copy(),
        checkpoints=eng.finish_checkpoints(),
        final_colors=colors,
        signals=eng.signals.copy(),
        first_selection=first,
        selections=np.concatenate(chunks) if chunks is not None and chunks else
        (np.empty(0, dtype=np.int64) if chunks is not None else None),
        changes=eng.changes() if record_changes else None,
    )


# --------------------------------------------------------------------------
# batched summaries

SUMMARY_FIELDS = ("trial", "stabilized", "terminal", "steps", "color_changes", "red_count",
                  "red_volume", "first_selected", "first_signal", "potential",
                  "potential_violations")
TERMINAL_CODES = {RED_CONSENSUS: 1, BLUE_CONSENSUS: 2, NO_CONSENSUS: 0}
BATCH_MAX_N = 64


@njit(cache=True)
def _init_scalars(deg, signals, n, m, sc):
    sc[:] = 0
    sc[S_UNC_CNT] = n
    sc[S_UNSTABLE] = n
    sc[S_H] = n + 2 * m
    for v in range(n):
        k = deg[v]
        if signals[v] == RED:
            sc[S_RP_VOL] += k
            sc[S_UP_VOL] += k
            sc[S_UP_CNT] += 1
            sc[S_UP_SQ] += k * k
        else:
            sc[S_BP_VOL] += k


@njit(cache=True)
def _run_batch(indptr, indices, deg, m, signals2d, sel2d, out):
    n = deg.shape[0]
    colors = np.zeros(n, dtype=np.int8)
    nr = np.zeros(n, dtype=np.int32)
    nb = np.zeros(n, dtype=np.int32)
    wb = np.zeros(n, dtype=np.int8)
    first = np.zeros(n, dtype=np.int64)
    sc = np.zeros(N_SCALARS, dtype=np.int64)
    cps = np.zeros(0, dtype=np.int64)
    cp_state = np.zeros(1, dtype=np.int64)
    cp_out = np.zeros((0, N_SCALARS), dtype=np.int64)
    log = np.zeros((0, 10), dtype=np.int64)
    log_state = np.zeros(1, dtype=np.int64)
    for b in range(signals2d.shape[0]):
        signals = signals2d[b]
        colors[:] = 0
        nr[:] = 0
        nb[:] = 0
        wb[:] = signals
        first[:] = -1
        _init_scalars(deg, signals, n, m, sc)
        _advance(indptr, indices, deg, signals, colors, nr, nb, wb, first, sc, sel2d[b], True,
                 cps, cp_state, cp_out, log, log_state)
        out[b, :N_SCALARS] = sc
        best = -1
        for v in range(n):
            if first[v] > 0 and (best < 0 or first[v] < first[best]):
                best = v
        out[b, N_SCALARS] = best
        out[b, N_SCALARS + 1] = signals[best] if best >= 0 else -1


def _summary_from_record(rec):
    return (rec.trial, rec.stabilized, TERMINAL_CODES.get(rec.terminal, -1), rec.steps,
            rec.color_changes, rec.red_count, rec.red_volume, rec.first_selected,
            rec.first_signal, rec.potential, rec.potential_violations)


def simulate_summaries(graph, delta, seed, trials, max_steps=None):
    """Per-trial outcome columns for trials ``trials`` (an iterable of indices).

    Small graphs go through a batched kernel; every trial still uses its own
    keyed stream, so the result is identical to calling ``run`` per trial.
    Returns a dict of numpy arrays keyed by ``SUMMARY_FIELDS``; ``terminal``
    holds codes from ``TERMINAL_CODES`` (-1 when unstable).
    """
    trials = np.asarray(list(trials), dtype=np.int64)
    rows = np.zeros((trials.size, len(SUMMARY_FIELDS)), dtype=np.int64)
    n = graph.n
    limit = max_steps or default_max_steps(graph)
    chunk = min(_chunk_size(n, 0), limit)
    if n <= BATCH_MAX_N and trials.size:
        sig = np.empty((trials.size, n), dtype=np.int8)
        sel = np.empty((trials.size, chunk), dtype=np.int64)
        for i, tr in enumerate(trials.tolist()):
            gen = trial_generator(seed, tr)
            sig[i] = np.where(gen.random(n) < 0.5 + delta, RED, BLUE)
            sel[i] = gen.integers(0, n, size=chunk, dtype=np.int64)
        out = np.zeros((trials.size, N_SCALARS + 2), dtype=np.int64)
        _run_batch(graph.indptr, graph.indices, graph.degrees, graph.m, sig, sel, out)
        for i, tr in enumerate(trials.tolist()):
            sc = out[i]
            if sc[S_UNSTABLE] != 0:
                rows[i] = _summary_from_record(run(graph, delta=delta, seed=seed, trial=tr,
                                                   max_steps=limit))
                continue
            if sc[S_RED_CNT] == n:
                term = 1
            elif sc[S_BLUE_CNT] == n:
                term = 2
            else:
                term = 0
            rows[i] = (tr, 1, term, sc[S_T], sc[S_CHANGES], sc[S_RED_CNT], sc[S_RED_VOL],
                       sc[N_SCALARS], sc[N_SCALARS + 1], sc[S_H], sc[S_HVIOL])
            if sc[S_CHANGES] > n + 2 * graph.m:
                raise InvariantViolation(f"trial {tr}: colour changes exceed |V|+2|E|")
    else:
        for i, tr in enumerate(trials.tolist()):
            rows[i] = _summary_from_record(run(graph, delta=delta, seed=seed, trial=tr,
                                               max_steps=limit))
    return {name: rows[:, j].copy() for j, name in enumerate(SUMMARY_FIELDS)}


# --------------------------------------------------------------------------
# observers over many trials


@dataclass(frozen=True)
class CheckpointResult:
    T: int
    trials: int
    red_volumes: np.ndarray = field(repr=False)
    uncolored_counts: np.ndarray = field(repr=False)
    threshold: float
    fraction_at_or_below: float
    uncolored_mean: float
    uncolored_sem: float
    uncolored_bound: float | None


def checkpoint_times(n, d):
    """Checkpoint T = ceil(n ln x / (2d)) with x = ln ln n."""
    x = math.log(math.log(n))
    return math.ceil(n * math.log(x) / (2 * d)), x


def checkpoint_red_volume(trials, graph, delta, T, seed, x=None):
    """Red volume among announced nodes after exactly T selections.

    ``fraction_at_or_below`` is the share of trials whose red volume is at most
    ``(1/2 + delta/2) |E|``. When ``x`` is given, ``uncolored_bound`` is
    ``n * x**(-1/(2 d))`` with d the maximum degree.
    """
    if T < 0:
        raise ValueError("T must be >= 0")
    vols = np.empty(trials, dtype=np.int64)
    unc = np.empty(trials, dtype=np.int64)
    for i in range(trials):
        rec = run(graph, delta=delta, seed=seed, trial=i, horizon=T, checkpoints=(T,))
        vols[i] = rec.checkpoints[0, S_RED_VOL]
        unc[i] = rec.checkpoints[0, S_UNC_CNT]
    threshold = (0.5 + delta / 2) * graph.m
    bound = graph.n * x ** (-1 / (2 * graph.max_degree)) if x is not None else None
    return CheckpointResult(
        T=T, trials=trials, red_volumes=vols, uncolored_counts=unc, threshold=threshold,
        fraction_at_or_below=float(np.mean(vols <= threshold)),
        uncolored_mean=float(unc.mean()),
        uncolored_sem=float(unc.std(ddof=1) / math.sqrt(trials)) if trials > 1 else 0.0,
        uncolored_bound=bound,
    )


# --------------------------------------------------------------------------
# influence sets and blocking pairs


def influence_set(graph, selection_sequence, v):
    """Nodes whose signals can affect v's colour after the sequence.

    Scan the sequence backwards. v joins at its last selection; afterwards a
    node joins at the first (backward) selection where it neighbours the
    current set.
    """
    members = set()
    frontier = np.zeros(graph.n, dtype=bool)
    for u in reversed([int(x) for x in selection_sequence]):
        if not members:
            if u != v:
                continue
        elif u in members or not frontier[u]:
            continue
        members.add(u)
        frontier[graph.neighbors(u)] = True
    return members


def _check_cycle(graph):
    if graph.n < 4 or np.any(graph.degrees != 2) or not graph.is_connected():
        raise ValueError("blocking pairs are defined on cycles with at least 4 nodes")


def find_blocking_pairs(graph, signals, selection_sequence):
    """Adjacent equal-signal pairs first selected before both outer neighbours."""
    _check_cycle(graph)
    signals = _as_signal_array(signals)
    n = graph.n
    first = np.full(n, np.iinfo(np.int64).max, dtype=np.int64)
    for t, u in enumerate(selection_sequence):
        if first[u] == np.iinfo(np.int64).max:
            first[u] = t
    order = _cycle_order(graph)
    pairs = []
    for i in range(n):
        a, b = order[i], order[(i + 1) % n]
        outer = (order[i - 1], order[(i + 2) % n])
        if signals[a] != signals[b]:
            continue
        latest = max(first[a], first[b])
        if latest == np.iinfo(np.int64).max:
            continue
        if all(latest < first[o] for o in outer):
            pairs.append((int(min(a, b)), int(max(a, b))))
    return pairs


def _cycle_order(graph):
    order = [0]
    prev, cur = -1, 0
    for _ in range(graph.n - 1):
        a, b = graph.neighbors(cur).tolist()
        nxt = a if a != prev else b
        order.append(nxt)
        prev, cur = cur, nxt
    return order
