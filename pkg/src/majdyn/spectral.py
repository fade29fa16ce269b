"""Weighted adjacency spectra, expansion certificates and mixing checks."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

DENSE_CAP = 2000
RESIDUAL_TOL = 1e-8
SLACK = 1e-9


class SpectralDomainError(ValueError):
    pass


class SpectralSizeError(ValueError):
    pass


def weighted_adjacency(graph):
    """Matrix with ``1/sqrt(d(x) d(y))`` on edges and zeros elsewhere."""
    if np.any(graph.degrees == 0):
        raise SpectralDomainError("weighted adjacency undefined for isolated vertices")
    e = graph.edges()
    w = 1.0 / np.sqrt(graph.degrees[e[:, 0]] * graph.degrees[e[:, 1]])
    mat = np.zeros((graph.n, graph.n))
    mat[e[:, 0], e[:, 1]] = w
    mat[e[:, 1], e[:, 0]] = w
    return mat


@dataclass(frozen=True)
class SpectralReport:
    n: int
    eigenvalues: np.ndarray = field(repr=False)
    lam: float
    max_residual: float

    @property
    def lambda_1(self):
        return float(self.eigenvalues[0])

    def is_lambda_expander_for(self, threshold):
        return self.lam <= threshold + SLACK

    def to_dict(self, full=False):
        out = {
            "n": self.n,
            "lambda": self.lam,
            "lambda_1": self.lambda_1,
            "lambda_2": float(self.eigenvalues[1]) if self.n > 1 else None,
            "lambda_n": float(self.eigenvalues[-1]),
            "max_residual": self.max_residual,
        }
        if full:
            out["eigenvalues"] = self.eigenvalues.tolist()
        return out


def spectrum(graph, cap=DENSE_CAP):
    if graph.n > cap:
        raise SpectralSizeError(f"n={graph.n} exceeds dense eigensolver cap {cap}")
    if not graph.is_connected():
        raise SpectralDomainError("graph is disconnected")
    mat = weighted_adjacency(graph)
    vals, vecs = np.linalg.eigh(mat)
    residual = float(np.abs(mat @ vecs - vecs * vals).max(axis=0).max())
    if residual > RESIDUAL_TOL:
        raise ArithmeticError(f"eigen-residual {residual:.3g} exceeds {RESIDUAL_TOL}")
    vals = vals[::-1].copy()
    lam = float(max(abs(vals[1]), abs(vals[-1]))) if graph.n > 1 else 0.0
    return SpectralReport(graph.n, vals, min(lam, 1.0), residual)


@dataclass(frozen=True)
class MixingCheck:
    edges_between: int
    vol_s: int
    vol_t: int
    lhs: float
    rhs: float
    holds: bool
    # same deviation with |E| in place of Vol(V) in the denominator
    lhs_edge_denominator: float

    @property
    def margin(self):
        return self.rhs - self.lhs


def edges_between(graph, s, t):
    """E(S,T) counting an edge inside S ∩ T twice."""
    in_s = np.zeros(graph.n, dtype=bool)
    in_t = np.zeros(graph.n, dtype=bool)
    in_s[list(s)] = True
    in_t[list(t)] = True
    src = np.repeat(np.arange(graph.n), graph.degrees)
    return int(np.count_nonzero(in_s[src] & in_t[graph.indices]))


def mixing_check(graph, lam, s, t):
    s, t = list(s), list(t)
    e_st = edges_between(graph, s, t)
    vs, vt = graph.volume(s), graph.volume(t)
    vol = graph.volume_total
    expected = vs * vt / vol if vol else 0.0
    lhs = abs(e_st - expected)
    rhs = lam * np.sqrt(vs * vt)
    edge_form = abs(e_st - vs * vt / graph.m) if graph.m else 0.0
    return MixingCheck(e_st, vs, vt, float(lhs), float(rhs), bool(lhs <= rhs + SLACK), float(edge_form))


def sample_subset(n, rng):
    size = int(rng.integers(0, n + 1))
    return np.sort(rng.choice(n, size=size, replace=False))


def mixing_sweep(graph, lam, samples, seed):
    """Check ``samples`` random (S, T) pairs; subset sizes are uniform on 0..n."""
    rng = np.random.default_rng(seed)
    checks = [mixing_check(graph, lam, sample_subset(graph.n, rng), sample_subset(graph.n, rng))
              for _ in range(samples)]
    return {
        "samples": samples,
        "passed": sum(c.holds for c in checks),
        "failed": sum(not c.holds for c in checks),
        "worst_margin": min(c.margin for c in checks) if checks else None,
        "edge_denominator_failures": sum(c.lhs_edge_denominator > c.rhs + SLACK for c in checks),
    }
