"""Seeded generators for the candidate mix topologies.

Every generator is a pure function of its arguments: the same parameters and
seed always give the same graph.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, fields

import numpy as np

from .graph import Graph, from_edges, is_connected

MODELS = ("er", "ba", "sfr", "kws", "regular")


class GenerationError(RuntimeError):
    """A randomised construction gave up after its retry budget."""


def _rng(seed, stream: int = 0) -> np.random.Generator:
    return np.random.default_rng([int(seed) & 0xFFFFFFFFFFFFFFFF, stream])


# ---------------------------------------------------------------------------
# Erdos-Renyi

def gen_er(n: int, p: float, seed: int = 0) -> Graph:
    """G(n, p): each of the n(n-1)/2 pairs is linked independently."""
    if n < 2:
        raise ValueError("n must be >= 2")
    if not 0 < p < 1:
        raise ValueError("p must lie in (0, 1)")
    rng = _rng(seed)
    rows = []
    for u in range(n - 1):
        hits = np.flatnonzero(rng.random(n - u - 1) < p)
        if hits.size:
            rows.append(np.column_stack([np.full(hits.size, u), hits + u + 1]))
    edges = np.concatenate(rows) if rows else np.empty((0, 2), dtype=np.int64)
    return from_edges(n, edges)


# ---------------------------------------------------------------------------
# Barabasi-Albert

def gen_ba(n: int, m: int, seed: int = 0) -> Graph:
    """Linear preferential attachment grown from an m-node clique.

    Each arriving node links to ``m`` distinct existing nodes, each chosen
    with probability proportional to its current degree (renormalised over
    the not-yet-chosen nodes).  With ``m == 1`` the seed is a single node and
    the first arrival attaches to it.
    """
    if not 1 <= m < n:
        raise ValueError("need 1 <= m < n")
    rng = _rng(seed)
    edges = [(i, j) for i in range(m) for j in range(i + 1, m)]
    # node u appears deg(u) times; uniform draws from it are degree-weighted
    pool = np.empty(2 * (len(edges) + m * (n - m)), dtype=np.int64)
    size = 0
    for i, j in edges:
        pool[size:size + 2] = (i, j)
        size += 2
    for v in range(m, n):
        if size == 0:
            targets = list(range(m))
        else:
            chosen = set()
            while len(chosen) < m:
                chosen.add(int(pool[rng.integers(size)]))
            targets = sorted(chosen)
        for t in targets:
            edges.append((t, v))
            pool[size:size + 2] = (t, v)
            size += 2
    return from_edges(n, edges)


# ---------------------------------------------------------------------------
# configuration-model wiring shared by the SFR and regular generators

def is_graphical(degrees) -> bool:
    """Erdos-Gallai test for a simple undirected graph."""
    d = np.sort(np.asarray(degrees, dtype=np.int64))[::-1]
    n = d.size
    if n == 0:
        return True
    if d.sum() % 2 or d[0] >= n or d[-1] < 0:
        return False
    csum = np.cumsum(d)
    k = np.arange(1, n + 1)
    # sum_{i>k} min(d_i, k): the n-k smallest degrees, read off ascending prefix sums
    asc = d[::-1]
    prefix = np.concatenate([[0], np.cumsum(asc)])
    cut = np.minimum(np.searchsorted(asc, k), n - k)
    tail = prefix[cut] + k * (n - k - cut)
    return bool(np.all(csum <= k * (k - 1) + tail))


def _pair_stubs(degrees: np.ndarray, rng: np.random.Generator) -> np.ndarray:
    stubs = np.repeat(np.arange(degrees.size, dtype=np.int64), degrees)
    rng.shuffle(stubs)
    return stubs.reshape(-1, 2)


def wire_configuration(degrees, rng: np.random.Generator, max_passes: int = 100) -> np.ndarray:
    """Random simple graph with exactly the given degree sequence.

    Stubs are matched uniformly, then self-loops and repeated edges are
    removed by degree-preserving double-edge swaps against randomly chosen
    edges.  Raises GenerationError when ``max_passes`` sweeps leave defects.
    """
    degrees = np.asarray(degrees, dtype=np.int64)
    if degrees.sum() % 2:
        raise ValueError("degree sum must be even")
    edges = _pair_stubs(degrees, rng)
    m = edges.shape[0]
    if m == 0:
        return edges
    n = int(degrees.size)

    def key(a, b):
        return min(a, b) * n + max(a, b)

    counts: dict[int, int] = {}
    for a, b in edges:
        k = key(int(a), int(b))
        counts[k] = counts.get(k, 0) + 1

    def bad(i):
        a, b = int(edges[i, 0]), int(edges[i, 1])
        return a == b or counts[key(a, b)] > 1

    for _ in range(max_passes):
        defects = [i for i in range(m) if bad(i)]
        if not defects:
            return edges
        for i in defects:
            if not bad(i):
                continue
            for _attempt in range(50):
                j = int(rng.integers(m))
                if j == i:
                    continue
                a, b = int(edges[i, 0]), int(edges[i, 1])
                c, d = int(edges[j, 0]), int(edges[j, 1])
                if rng.random() < 0.5:
                    c, d = d, c
                # (a,b),(c,d) -> (a,c),(b,d)
                if a == c or b == d:
                    continue
                k1, k2 = key(a, c), key(b, d)
                if k1 == k2 or counts.get(k1, 0) or counts.get(k2, 0):
                    continue
                for old in (key(a, b), key(c, d)):
                    counts[old] -= 1
                    if counts[old] == 0:
                        del counts[old]
                counts[k1] = 1
                counts[k2] = 1
                edges[i] = (a, c)
                edges[j] = (b, d)
                break
    if any(bad(i) for i in range(m)):
        raise GenerationError(f"could not remove multi-edges/self-loops in {max_passes} passes")
    return edges


# ---------------------------------------------------------------------------
# scale-free random graphs (power-law degree sequence, random otherwise)
#
# Node i (1-based) gets expected degree w_i = c * i**(-1/(beta-1)); the number
# of nodes with expected degree near x is then e**alpha * x**-beta with
# e**alpha = (beta-1) * c**(beta-1).  Realised degrees are Poisson(w_i).

def sfr_weights(n: int, beta: float, scale: float) -> np.ndarray:
    i = np.arange(1, n + 1, dtype=float)
    return scale * i ** (-1.0 / (beta - 1.0))


def sfr_scale_for_mean(n: int, beta: float, mean_degree: float) -> float:
    return mean_degree / float(sfr_weights(n, beta, 1.0).mean())


def sfr_alpha(scale: float, beta: float) -> float:
    """Intercept of log(count) = alpha - beta log(degree)."""
    return math.log(beta - 1.0) + (beta - 1.0) * math.log(scale)


def sfr_scale_for_alpha(alpha: float, beta: float) -> float:
    return math.exp((alpha - math.log(beta - 1.0)) / (beta - 1.0))


def sfr_degree_sequence(n: int, beta: float, scale: float,
                        rng: np.random.Generator) -> np.ndarray:
    """Poisson-realised degrees; an odd sum bumps one random degree-1 node."""
    w = sfr_weights(n, beta, scale)
    deg = np.minimum(rng.poisson(w), n - 1).astype(np.int64)
    if deg.sum() % 2:
        ones = np.flatnonzero(deg == 1)
        if ones.size:
            deg[int(rng.choice(ones))] += 1
        else:
            deg[int(np.argmax(deg))] -= 1
    return deg


SFR_BETA = 3.0


def gen_sfr(n: int, beta: float = SFR_BETA, seed: int = 0, *,
            mean_degree: float | None = None, alpha: float | None = None,
            max_retries: int = 20) -> Graph:
    """Scale-free random graph: power-law degrees, uniformly random wiring.

    The law's intercept comes from ``alpha`` or, more usefully, from a
    ``mean_degree`` target with ``beta`` held fixed.  Nodes whose realised
    degree is zero stay isolated; callers usually take the giant component.
    """
    if n < 2:
        raise ValueError("n must be >= 2")
    if beta is None or beta <= 2.0:
        raise ValueError("beta must exceed 2 for a finite mean degree")
    if (mean_degree is None) == (alpha is None):
        raise ValueError("give exactly one of mean_degree or alpha")
    if mean_degree is not None:
        if mean_degree <= 0:
            raise ValueError("mean_degree must be positive")
        scale = sfr_scale_for_mean(n, beta, mean_degree)
    else:
        scale = sfr_scale_for_alpha(alpha, beta)
    rng = _rng(seed)
    for _ in range(max_retries):
        deg = sfr_degree_sequence(n, beta, scale, rng)
        if not is_graphical(deg):
            continue
        try:
            edges = wire_configuration(deg, rng)
        except GenerationError:
            continue
        return from_edges(n, edges)
    raise GenerationError(f"no graphical power-law sequence after {max_retries} retries")


# ---------------------------------------------------------------------------
# Kleinberg / Watts-Strogatz directed lattice

def lattice_offsets(radius: int) -> np.ndarray:
    """All (di, dj) != (0, 0) with |di| + |dj| <= radius."""
    r = np.arange(-radius, radius + 1)
    di, dj = np.meshgrid(r, r, indexing="ij")
    mask = (np.abs(di) + np.abs(dj) <= radius) & ((di != 0) | (dj != 0))
    return np.column_stack([di[mask], dj[mask]])


def gen_kws(side: int, radius: int = 1, q: int = 2, r_exp: float = 1.5,
            seed: int = 0) -> Graph:
    """Directed small-world lattice on ``side * side`` nodes (no wrap-around).

    Node ``(i, j)`` has id ``i * side + j``.  Each node links to every node
    within lattice distance ``radius`` and adds ``q`` distinct long-range
    links drawn with probability proportional to ``d(u, v) ** -r_exp`` over
    nodes outside its local ball.
    """
    if side < 2 or radius < 1 or q < 0 or r_exp < 0:
        raise ValueError("invalid KWS parameters")
    n = side * side
    rng = _rng(seed)
    coords = np.column_stack(np.divmod(np.arange(n), side))
    offs = lattice_offsets(radius)
    arcs = []
    for off in offs:
        tgt = coords + off
        ok = (tgt >= 0).all(axis=1) & (tgt < side).all(axis=1)
        src = np.flatnonzero(ok)
        arcs.append(np.column_stack([src, tgt[ok, 0] * side + tgt[ok, 1]]))
    if q:
        # distance-based weights depend on position; precompute per node
        all_i, all_j = coords[:, 0], coords[:, 1]
        for u in range(n):
            d = np.abs(all_i - all_i[u]) + np.abs(all_j - all_j[u])
            eligible = np.flatnonzero(d > radius)
            if eligible.size == 0:
                continue
            w = d[eligible].astype(float) ** (-r_exp)
            k = min(q, eligible.size)
            picks = rng.choice(eligible, size=k, replace=False, p=w / w.sum())
            arcs.append(np.column_stack([np.full(k, u), picks]))
    return from_edges(n, np.concatenate(arcs), directed=True)


# ---------------------------------------------------------------------------
# random D-regular expander

def gen_regular(n: int, D: int, seed: int = 0, max_retries: int = 20,
                require_connected: bool = True) -> Graph:
    """Uniform-ish random D-regular simple graph via the pairing model."""
    if D < 3 or D >= n or (n * D) % 2:
        raise ValueError("need 3 <= D < n with n*D even")
    for attempt in range(max_retries):
        rng = _rng(seed, attempt)
        try:
            edges = wire_configuration(np.full(n, D), rng)
        except GenerationError:
            continue
        g = from_edges(n, edges)
        if not require_connected or is_connected(g):
            return g
    raise GenerationError(f"pairing model failed {max_retries} times")


# ---------------------------------------------------------------------------
# config plumbing

@dataclass(frozen=True)
class GeneratorConfig:
    model: str
    n: int = 5000
    seed: int = 0
    p: float | None = None
    m: int | None = None
    beta: float | None = None
    alpha: float | None = None
    mean_degree: float | None = None
    side: int | None = None
    radius: int = 1
    q: int = 2
    r_exp: float = 1.5
    D: int | None = None

    def __post_init__(self):
        if self.model not in MODELS:
            raise ValueError(f"unknown model {self.model!r}; choose from {MODELS}")
        if self.n < 2:
            raise ValueError("n must be >= 2")
        need = {"er": ("p",), "ba": ("m",), "regular": ("D",)}
        for name in need.get(self.model, ()):
            if getattr(self, name) is None:
                raise ValueError(f"model {self.model} requires {name}")
        if self.model == "sfr" and (self.alpha is None) == (self.mean_degree is None):
            raise ValueError("model sfr requires exactly one of alpha or mean_degree")

    def params(self) -> dict:
        """Only the parameters the chosen model consumes."""
        used = {"er": ("p",), "ba": ("m",), "sfr": ("beta", "alpha", "mean_degree"),
                "kws": ("side", "radius", "q", "r_exp"), "regular": ("D",)}[self.model]
        return {k: getattr(self, k) for k in used if getattr(self, k) is not None}

    def dumps(self) -> str:
        """Flat ``key=value`` text, one per line."""
        return "".join(f"{f.name}={getattr(self, f.name)}\n" for f in fields(self)
                       if getattr(self, f.name) is not None)

    @classmethod
    def loads(cls, text: str) -> "GeneratorConfig":
        types = {f.name: f.type for f in fields(cls)}
        kw = {}
        for line in text.splitlines():
            line = line.strip()
            if not line or line.startswith("#"):
                continue
            k, v = (s.strip() for s in line.split("=", 1))
            if k not in types:
                raise ValueError(f"unknown config key {k!r}")
            t = types[k]
            if k == "model":
                kw[k] = v
            elif "int" in t and "float" not in t:
                kw[k] = int(v)
            else:
                kw[k] = float(v)
        return cls(**kw)


def generate(cfg: GeneratorConfig) -> Graph:
    if cfg.model == "er":
        return gen_er(cfg.n, cfg.p, cfg.seed)
    if cfg.model == "ba":
        return gen_ba(cfg.n, cfg.m, cfg.seed)
    if cfg.model == "sfr":
        return gen_sfr(cfg.n, cfg.beta if cfg.beta is not None else SFR_BETA, cfg.seed,
                       mean_degree=cfg.mean_degree, alpha=cfg.alpha)
    if cfg.model == "kws":
        side = cfg.side if cfg.side is not None else math.isqrt(cfg.n)
        return gen_kws(side, cfg.radius, cfg.q, cfg.r_exp, cfg.seed)
    return gen_regular(cfg.n, cfg.D, cfg.seed)
