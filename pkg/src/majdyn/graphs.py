"""Undirected simple graphs, the named graph families, and edge-list I/O.

Graphs are stored in CSR form (``indptr``/``indices``) so the numba kernels
can walk neighbourhoods without Python objects. Arrays are made read-only
after construction.
"""

from __future__ import annotations

import hashlib
from collections import defaultdict
from dataclasses import dataclass
from pathlib import Path

import numpy as np

FAMILIES = ("complete", "star", "cycle", "random_regular", "clique_with_leaves")


class GraphError(ValueError):
    """Invalid graph parameters or structure."""


class GenerationError(RuntimeError):
    """Randomized generation exhausted its retry budget."""


class GraphParseError(ValueError):
    def __init__(self, message, lineno=None):
        self.lineno = lineno
        if lineno is not None:
            message = f"line {lineno}: {message}"
        super().__init__(message)


class Graph:
    """Immutable undirected simple graph on nodes ``0..n-1``."""

    __slots__ = ("n", "m", "indptr", "indices", "degrees", "max_degree", "volume_total")

    def __init__(self, n, edges):
        n = int(n)
        if n < 1:
            raise GraphError("graph needs at least one node")
        edges = np.asarray(list(edges), dtype=np.int64).reshape(-1, 2)
        if edges.size:
            if edges.min() < 0 or edges.max() >= n:
                raise GraphError("node id out of range")
            if np.any(edges[:, 0] == edges[:, 1]):
                raise GraphError("self-loop")
            lo = np.minimum(edges[:, 0], edges[:, 1])
            hi = np.maximum(edges[:, 0], edges[:, 1])
            keys = lo * n + hi
            if np.unique(keys).size != keys.size:
                raise GraphError("duplicate edge")
            src = np.concatenate([lo, hi])
            dst = np.concatenate([hi, lo])
        else:
            src = dst = np.empty(0, dtype=np.int64)
        order = np.lexsort((dst, src))
        indices = dst[order].astype(np.int32)
        degrees = np.bincount(src, minlength=n).astype(np.int64)
        indptr = np.zeros(n + 1, dtype=np.int64)
        np.cumsum(degrees, out=indptr[1:])
        for arr in (indices, degrees, indptr):
            arr.setflags(write=False)
        object.__setattr__(self, "n", n)
        object.__setattr__(self, "m", int(edges.shape[0]))
        object.__setattr__(self, "indptr", indptr)
        object.__setattr__(self, "indices", indices)
        object.__setattr__(self, "degrees", degrees)
        object.__setattr__(self, "max_degree", int(degrees.max()) if n else 0)
        object.__setattr__(self, "volume_total", int(degrees.sum()))

    def __setattr__(self, name, value):
        raise AttributeError("Graph is immutable")

    def __reduce__(self):
        return (Graph, (self.n, self.edges()))

    def neighbors(self, v):
        return self.indices[self.indptr[v]:self.indptr[v + 1]]

    @property
    def adjacency(self):
        return [self.neighbors(v).tolist() for v in range(self.n)]

    def edges(self):
        """Edges as an ``(m, 2)`` array with ``u < v``, sorted."""
        src = np.repeat(np.arange(self.n), self.degrees)
        mask = src < self.indices
        return np.column_stack([src[mask], self.indices[mask]])

    def volume(self, nodes):
        nodes = np.asarray(list(nodes) if not isinstance(nodes, np.ndarray) else nodes, dtype=np.int64)
        return int(self.degrees[nodes].sum()) if nodes.size else 0

    def adjacency_matrix(self):
        a = np.zeros((self.n, self.n))
        e = self.edges()
        a[e[:, 0], e[:, 1]] = 1.0
        a[e[:, 1], e[:, 0]] = 1.0
        return a

    def is_connected(self):
        seen = np.zeros(self.n, dtype=bool)
        seen[0] = True
        stack = [0]
        while stack:
            v = stack.pop()
            for u in self.neighbors(v):
                if not seen[u]:
                    seen[u] = True
                    stack.append(int(u))
        return bool(seen.all())

    def content_hash(self):
        """Git-style blob hash of the canonical edge-list text."""
        data = to_edge_list_text(self).encode("utf-8")
        return hashlib.sha1(b"blob %d\0" % len(data) + data).hexdigest()

    def __eq__(self, other):
        if not isinstance(other, Graph):
            return NotImplemented
        return (self.n == other.n and np.array_equal(self.indptr, other.indptr)
                and np.array_equal(self.indices, other.indices))

    def __hash__(self):
        return hash((self.n, self.indices.tobytes()))

    def __repr__(self):
        return f"Graph(n={self.n}, m={self.m}, max_degree={self.max_degree})"


@dataclass(frozen=True)
class GraphFamilySpec:
    family: str
    params: tuple

    def __post_init__(self):
        if self.family not in FAMILIES:
            raise GraphError(f"unknown family {self.family!r}; expected one of {FAMILIES}")
        arity = {"complete": 1, "star": 1, "cycle": 1, "random_regular": 3, "clique_with_leaves": 2}
        if len(self.params) != arity[self.family]:
            raise GraphError(f"{self.family} takes {arity[self.family]} parameters")
        p = tuple(int(x) for x in self.params)
        object.__setattr__(self, "params", p)
        if self.family == "complete" and p[0] < 1:
            raise GraphError("complete(n) needs n >= 1")
        if self.family == "star" and p[0] < 1:
            raise GraphError("star(leaves) needs at least one leaf")
        if self.family == "cycle" and p[0] < 3:
            raise GraphError("cycle(n) needs n >= 3")
        if self.family == "random_regular":
            n, d, _ = p
            if d < 1 or d >= n:
                raise GraphError("random_regular needs 1 <= d < n")
            if (n * d) % 2:
                raise GraphError("random_regular needs n*d even")
        if self.family == "clique_with_leaves":
            m, ell = p
            if not m >= ell >= 1:
                raise GraphError("clique_with_leaves needs m >= l >= 1")

    @classmethod
    def parse(cls, text):
        """Parse ``family:a,b,...``, e.g. ``random_regular:100,3,7``."""
        name, _, args = text.partition(":")
        params = tuple(int(a) for a in args.split(",") if a.strip()) if args else ()
        return cls(name.strip(), params)

    def __str__(self):
        return f"{self.family}:{','.join(str(p) for p in self.params)}"


def complete(n):
    GraphFamilySpec("complete", (n,))
    return Graph(n, [(u, v) for u in range(n) for v in range(u + 1, n)])


def star(leaves):
    """Star with the centre at node 0."""
    GraphFamilySpec("star", (leaves,))
    return Graph(leaves + 1, [(0, v) for v in range(1, leaves + 1)])


def cycle(n):
    GraphFamilySpec("cycle", (n,))
    return Graph(n, [(v, (v + 1) % n) for v in range(n)])


def clique_with_leaves(m, ell):
    """m-clique on nodes ``0..m-1``; clique node i owns leaves ``m + i*ell + j``."""
    GraphFamilySpec("clique_with_leaves", (m, ell))
    edges = [(u, v) for u in range(m) for v in range(u + 1, m)]
    edges += [(i, m + i * ell + j) for i in range(m) for j in range(ell)]
    return Graph(m + m * ell, edges)


def random_regular(n, d, seed, max_attempts=1000):
    """Random simple d-regular graph from the pairing model.

    Stubs are paired at random; pairs that would form a loop or a repeated
    edge are rejected and their stubs re-paired. An attempt that gets stuck
    is discarded and restarted, up to ``max_attempts`` times.
    """
    GraphFamilySpec("random_regular", (n, d, seed))
    rng = np.random.default_rng(seed)
    for _ in range(max_attempts):
        edges = _pairing_attempt(n, d, rng)
        if edges is not None:
            return Graph(n, sorted(edges))
    raise GenerationError(f"pairing model failed {max_attempts} times for n={n}, d={d}")


def _pairing_attempt(n, d, rng):
    edges = set()
    stubs = np.repeat(np.arange(n), d)
    while stubs.size:
        rng.shuffle(stubs)
        leftover = defaultdict(int)
        for a, b in zip(stubs[0::2].tolist(), stubs[1::2].tolist()):
            if a > b:
                a, b = b, a
            if a != b and (a, b) not in edges:
                edges.add((a, b))
            else:
                leftover[a] += 1
                leftover[b] += 1
        if leftover and not _can_progress(edges, leftover):
            return None
        stubs = np.array([v for v, k in leftover.items() for _ in range(k)], dtype=np.int64)
    return edges


def _can_progress(edges, leftover):
    nodes = list(leftover)
    for i, a in enumerate(nodes):
        for b in nodes[i + 1:]:
            if (min(a, b), max(a, b)) not in edges:
                return True
    return False


def generate(spec):
    if isinstance(spec, str):
        spec = GraphFamilySpec.parse(spec)
    builders = {
        "complete": complete,
        "star": star,
        "cycle": cycle,
        "random_regular": random_regular,
        "clique_with_leaves": clique_with_leaves,
    }
    return builders[spec.family](*spec.params)


def to_edge_list_text(graph):
    lines = [f"{graph.n} {graph.m}"]
    lines += [f"{u} {v}" for u, v in graph.edges().tolist()]
    return "\n".join(lines) + "\n"


def parse_edge_list(text):
    header = None
    edges = []
    seen = set()
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        parts = line.split()
        if len(parts) != 2:
            raise GraphParseError(f"expected two integers, got {line!r}", lineno)
        try:
            a, b = int(parts[0]), int(parts[1])
        except ValueError:
            raise GraphParseError(f"non-integer token in {line!r}", lineno) from None
        if header is None:
            if a < 1 or b < 0:
                raise GraphParseError("header must be 'n m' with n >= 1, m >= 0", lineno)
            header = (a, b)
            continue
        n = header[0]
        if not (0 <= a < n and 0 <= b < n):
            raise GraphParseError(f"node id out of range [0, {n})", lineno)
        if a == b:
            raise GraphParseError(f"self-loop at node {a}", lineno)
        if a > b:
            raise GraphParseError("edge must be written 'u v' with u < v", lineno)
        if (a, b) in seen:
            raise GraphParseError(f"duplicate edge {a} {b}", lineno)
        seen.add((a, b))
        edges.append((a, b))
    if header is None:
        raise GraphParseError("missing 'n m' header")
    if len(edges) != header[1]:
        raise GraphParseError(f"header declares {header[1]} edges, found {len(edges)}")
    return Graph(header[0], edges)


def load_graph(path):
    return parse_edge_list(Path(path).read_text(encoding="utf-8"))


def save_graph(graph, path):
    Path(path).write_text(to_edge_list_text(graph), encoding="utf-8", newline="\n")
