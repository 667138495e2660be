"""Graph container, degree bookkeeping, components and edge-list I/O.

Graphs are stored in compressed sparse row form: the out-neighbours of node
``u`` are ``indices[indptr[u]:indptr[u + 1]]``, sorted ascending.  Undirected
graphs store every edge as two arcs.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
import scipy.sparse as sp
from scipy.sparse import csgraph

log = logging.getLogger(__name__)


class EdgeListError(ValueError):
    """Raised when an edge-list file cannot be parsed."""


@dataclass(frozen=True, eq=False)
class Graph:
    n: int
    directed: bool
    indptr: np.ndarray
    indices: np.ndarray

    def __post_init__(self):
        self.indptr.setflags(write=False)
        self.indices.setflags(write=False)

    @property
    def edge_count(self) -> int:
        """Arcs for directed graphs, edges (arcs / 2) for undirected ones."""
        arcs = int(self.indices.size)
        return arcs if self.directed else arcs // 2

    @property
    def arc_count(self) -> int:
        return int(self.indices.size)

    def neighbors(self, u: int) -> np.ndarray:
        return self.indices[self.indptr[u]:self.indptr[u + 1]]

    def out_degrees(self) -> np.ndarray:
        return np.diff(self.indptr)

    def arcs(self) -> np.ndarray:
        """All arcs as an ``(arc_count, 2)`` array ordered by source then target."""
        src = np.repeat(np.arange(self.n, dtype=np.int64), self.out_degrees())
        return np.column_stack([src, self.indices.astype(np.int64)])

    def edges(self) -> np.ndarray:
        """Arcs for directed graphs; each undirected edge once with ``u < v``."""
        a = self.arcs()
        if self.directed:
            return a
        return a[a[:, 0] < a[:, 1]]

    def __eq__(self, other):
        if not isinstance(other, Graph):
            return NotImplemented
        return (self.n == other.n and self.directed == other.directed
                and np.array_equal(self.indptr, other.indptr)
                and np.array_equal(self.indices, other.indices))

    def __repr__(self):
        kind = "directed" if self.directed else "undirected"
        return f"Graph(n={self.n}, {kind}, edges={self.edge_count})"


@dataclass
class BuildReport:
    """What was dropped while building a simple graph from raw pairs."""
    self_loops: int = 0
    duplicates: int = 0
    id_map: np.ndarray | None = None
    retained_fraction: float = 1.0


def from_edges(n: int, edges, directed: bool = False,
               report: BuildReport | None = None) -> Graph:
    """Build a simple graph from an iterable/array of ``(u, v)`` pairs.

    Self-loops and repeated arcs are dropped; counts go to ``report``.
    For undirected graphs ``(u, v)`` and ``(v, u)`` are the same edge.
    """
    e = np.asarray(edges, dtype=np.int64).reshape(-1, 2)
    if e.size and (e.min() < 0 or e.max() >= n):
        raise ValueError(f"node id out of range [0, {n})")
    loops = e[:, 0] == e[:, 1]
    n_loops = int(loops.sum())
    e = e[~loops]
    if directed:
        keys = e[:, 0] * n + e[:, 1]
    else:
        lo = np.minimum(e[:, 0], e[:, 1])
        hi = np.maximum(e[:, 0], e[:, 1])
        keys = lo * n + hi
    uniq = np.unique(keys)
    n_dup = int(keys.size - uniq.size)
    src, dst = uniq // n, uniq % n
    if not directed:
        src, dst = np.concatenate([src, dst]), np.concatenate([dst, src])
    order = np.lexsort((dst, src))
    src, dst = src[order], dst[order]
    indptr = np.zeros(n + 1, dtype=np.int64)
    np.cumsum(np.bincount(src, minlength=n), out=indptr[1:])
    if report is not None:
        report.self_loops += n_loops
        report.duplicates += n_dup
    return Graph(n, directed, indptr, dst.astype(np.int64))


@dataclass(frozen=True)
class DegreeSequence:
    degrees: np.ndarray
    min: int = field(init=False)
    max: int = field(init=False)
    mean: float = field(init=False)

    def __post_init__(self):
        d = self.degrees
        object.__setattr__(self, "min", int(d.min()) if d.size else 0)
        object.__setattr__(self, "max", int(d.max()) if d.size else 0)
        object.__setattr__(self, "mean", float(d.mean()) if d.size else 0.0)


def degree_stats(g: Graph) -> DegreeSequence:
    """Out-degree sequence with min/max/mean (mean = 2L/n when undirected)."""
    return DegreeSequence(g.out_degrees())


# ---------------------------------------------------------------------------
# components

def connected_components(g: Graph) -> np.ndarray:
    """Component label per node (weak components for directed graphs).

    Labels are assigned in order of each component's smallest node id.
    """
    adj = sp.csr_matrix((np.ones(g.arc_count, dtype=np.int8), g.indices, g.indptr),
                        shape=(g.n, g.n))
    _, raw = csgraph.connected_components(adj, directed=g.directed, connection="weak")
    _, first = np.unique(raw, return_index=True)
    rank = np.empty(first.size, dtype=np.int64)
    rank[np.argsort(first)] = np.arange(first.size)
    return rank[raw]


def is_connected(g: Graph) -> bool:
    return g.n > 0 and bool((connected_components(g) == 0).all())


def induced_subgraph(g: Graph, nodes) -> Graph:
    """Subgraph on ``nodes`` relabelled 0..k-1 in increasing original id."""
    keep = np.unique(np.asarray(nodes, dtype=np.int64))
    new_id = np.full(g.n, -1, dtype=np.int64)
    new_id[keep] = np.arange(keep.size)
    a = g.arcs()
    a = a[(new_id[a[:, 0]] >= 0) & (new_id[a[:, 1]] >= 0)]
    return from_edges(keep.size, new_id[a], directed=g.directed)


def giant_component(g: Graph, report: BuildReport | None = None) -> Graph:
    """Largest (weakly) connected component, relabelled preserving order.

    Equal-size components are resolved in favour of the one holding the
    smallest original node id.
    """
    if g.n < 1:
        raise ValueError("empty graph")
    labels = connected_components(g)
    sizes = np.bincount(labels)
    best = int(np.argmax(sizes))  # argmax picks the first, i.e. lowest-id component
    nodes = np.flatnonzero(labels == best)
    if report is not None:
        report.id_map = nodes
        report.retained_fraction = nodes.size / g.n
    if nodes.size == g.n:
        return g
    return induced_subgraph(g, nodes)


# ---------------------------------------------------------------------------
# edge-list files

def save_edge_list(g: Graph, path) -> None:
    """Write ``g`` as an edge list with a ``# directed=<0|1> n=<int>`` header."""
    e = g.edges()
    with open(path, "w", newline="\n") as fh:
        fh.write(f"# directed={int(g.directed)} n={g.n}\n")
        fh.write(f"# edges={g.edge_count}\n")
        if e.size:
            np.savetxt(fh, e, fmt="%d")


def _parse_header(line: str) -> dict:
    out = {}
    for tok in line.lstrip("#").split():
        if "=" in tok:
            k, v = tok.split("=", 1)
            out[k.strip()] = v.strip()
    return out


def load_edge_list(path, directed: bool | None = None,
                   report: BuildReport | None = None,
                   remap: bool = False) -> Graph:
    """Read a whitespace-separated edge list.

    ``directed=None`` defers to the file header (undirected when absent).
    Node count is ``max id + 1`` unless the header declares a larger ``n``.
    With ``remap=True`` sparse ids are compacted to 0..k-1 and the original
    ids are left in ``report.id_map``.
    """
    path = Path(path)
    header: dict = {}
    pairs = []
    with open(path, "r", newline=None) as fh:
        for lineno, raw in enumerate(fh, start=1):
            line = raw.strip()
            if not line:
                continue
            if line.startswith("#"):
                if not header:
                    header = _parse_header(line)
                continue
            parts = line.split()
            if len(parts) < 2:
                raise EdgeListError(f"{path}:{lineno}: expected two node ids, got {line!r}")
            try:
                u, v = int(parts[0]), int(parts[1])
            except ValueError:
                raise EdgeListError(f"{path}:{lineno}: non-integer node id in {line!r}") from None
            if u < 0 or v < 0:
                raise EdgeListError(f"{path}:{lineno}: negative node id in {line!r}")
            pairs.append((u, v))
    if directed is None:
        directed = header.get("directed", "0") == "1"
    declared_n = int(header["n"]) if "n" in header else 0
    if not pairs and declared_n == 0:
        raise EdgeListError(f"{path}: empty graph")

    rep = report if report is not None else BuildReport()
    e = np.asarray(pairs, dtype=np.int64).reshape(-1, 2)
    if remap:
        ids, inv = np.unique(e, return_inverse=True)
        e = inv.reshape(-1, 2)
        n = ids.size
        rep.id_map = ids
    else:
        n = max(int(e.max()) + 1 if e.size else 0, declared_n)
    g = from_edges(n, e, directed=directed, report=rep)
    if rep.self_loops or rep.duplicates:
        log.info("%s: dropped %d self-loops and %d duplicate arcs",
                 path, rep.self_loops, rep.duplicates)
    return g
