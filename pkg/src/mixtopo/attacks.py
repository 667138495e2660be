"""Compromised mix routes and intersection-attack batch sizing."""

from __future__ import annotations

import csv
import io
import json
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sp

from .graph import Graph

SCHEMA_VERSION = 1
WALK_STREAM = 1  # sub-stream id for walk randomness, distinct from generation


def top_degree_nodes(g: Graph, k: int) -> np.ndarray:
    """The k highest-degree nodes; ties go to the smaller id."""
    if not 0 <= k <= g.n:
        raise ValueError(f"k must lie in [0, {g.n}]")
    deg = g.out_degrees()
    order = np.lexsort((np.arange(g.n), -deg))
    return np.sort(order[:k])


def random_nodes(g: Graph, k: int, seed: int = 0) -> np.ndarray:
    if not 0 <= k <= g.n:
        raise ValueError(f"k must lie in [0, {g.n}]")
    return np.sort(np.random.default_rng(seed).choice(g.n, size=k, replace=False))


@dataclass
class CompromiseScenario:
    compromised: np.ndarray
    walk_lengths: tuple = (3,)
    n_walks: int = 100_000
    seed: int = 0
    selection: str = "explicit"
    workers: int = 1

    def __post_init__(self):
        self.compromised = np.unique(np.asarray(self.compromised, dtype=np.int64))
        if isinstance(self.walk_lengths, int):
            self.walk_lengths = (self.walk_lengths,)
        self.walk_lengths = tuple(int(x) for x in self.walk_lengths)
        if min(self.walk_lengths) < 1:
            raise ValueError("walk length must be >= 1")
        if self.n_walks < 1 or self.workers < 1:
            raise ValueError("n_walks and workers must be >= 1")


@dataclass
class AttackReport:
    fractions: dict
    halfwidths: dict
    n_walks: int
    pi_mass: float | None = None
    gap: float | None = None
    gilbert: dict = field(default_factory=dict)
    exact: dict = field(default_factory=dict)
    batch: dict = field(default_factory=dict)
    meta: dict = field(default_factory=dict)

    def sigma(self, length: int) -> float:
        p = self.fractions[length]
        return math.sqrt(max(p * (1 - p), 0.0) / self.n_walks)

    def to_dict(self) -> dict:
        keyed = lambda d: {str(k): v for k, v in sorted(d.items())}
        return {
            "schema_version": SCHEMA_VERSION,
            "compromised_fraction": keyed(self.fractions),
            "ci95_halfwidth": keyed(self.halfwidths),
            "n_walks": self.n_walks,
            "pi_mass": self.pi_mass,
            "gap": self.gap,
            "gilbert_bound": keyed(self.gilbert),
            "exact_probability": keyed(self.exact),
            "batch": self.batch,
            **self.meta,
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2, sort_keys=True)


def _walk_chunk(g: Graph, inside: np.ndarray, max_len: int, count: int,
                rng: np.random.Generator) -> np.ndarray:
    """Length of the all-compromised prefix of ``count`` random walks (capped)."""
    deg = g.out_degrees()
    cur = rng.integers(g.n, size=count)
    prefix = np.zeros(count, dtype=np.int64)
    alive = inside[cur]
    prefix[alive] = 1
    idx = np.flatnonzero(alive)
    cur = cur[idx]
    for _ in range(1, max_len):
        if idx.size == 0:
            break
        d = deg[cur]
        nxt = g.indices[g.indptr[cur] + (rng.random(idx.size) * d).astype(np.int64)]
        keep = inside[nxt]
        idx, cur = idx[keep], nxt[keep]
        prefix[idx] += 1
    return prefix


def simulate_compromise(g: Graph, scenario: CompromiseScenario) -> AttackReport:
    """Monte-Carlo fraction of routes lying entirely in the compromised set.

    A route of length t visits t mixes: a uniformly chosen first mix, then
    t - 1 hops to uniform random out-neighbours.  One set of walks is shared
    by all requested lengths, so the fractions are coupled across lengths.
    Work is split into ``scenario.workers`` chunks, each with its own
    sub-seed, so results depend on the worker count but not on scheduling.
    """
    if scenario.compromised.size and (scenario.compromised.max() >= g.n
                                      or scenario.compromised.min() < 0):
        raise ValueError("compromised node id out of range")
    if np.any(g.out_degrees() == 0):
        raise ValueError("walks need every node to have an out-neighbour")
    inside = np.zeros(g.n, dtype=bool)
    inside[scenario.compromised] = True
    max_len = max(scenario.walk_lengths)
    w = scenario.workers
    sizes = [scenario.n_walks // w + (i < scenario.n_walks % w) for i in range(w)]
    rngs = [np.random.default_rng([scenario.seed, WALK_STREAM, i]) for i in range(w)]
    if w == 1:
        parts = [_walk_chunk(g, inside, max_len, sizes[0], rngs[0])]
    else:
        with ThreadPoolExecutor(max_workers=w) as pool:
            parts = list(pool.map(lambda i: _walk_chunk(g, inside, max_len, sizes[i], rngs[i]),
                                  range(w)))
    prefix = np.concatenate(parts)
    fractions, half = {}, {}
    for t in scenario.walk_lengths:
        p = float(np.mean(prefix >= t))
        fractions[t] = p
        half[t] = 1.96 * math.sqrt(p * (1 - p) / scenario.n_walks)
    return AttackReport(fractions, half, scenario.n_walks,
                        meta={"selection": scenario.selection,
                              "k": int(scenario.compromised.size),
                              "seed": scenario.seed, "workers": w})


def exact_compromise_probability(g: Graph, compromised, length: int) -> float:
    """Probability that a route of ``length`` mixes stays inside the set.

    Computed as (1/n) 1_S^T (P restricted to S)^(length-1) 1.
    """
    S = np.unique(np.asarray(compromised, dtype=np.int64))
    if S.size == 0:
        return 0.0
    deg = g.out_degrees().astype(float)
    A = sp.csr_matrix((np.ones(g.arc_count), g.indices, g.indptr), shape=(g.n, g.n))
    PS = sp.diags(1.0 / deg[S]) @ A[S][:, S]
    v = np.ones(S.size)
    for _ in range(length - 1):
        v = PS @ v
    return float(v.sum() / g.n)


def analytic_compromise_ba(degrees_of_B, route_length: int) -> float:
    """Closed form (|B| - 1) / prod(k_j) for hub sets of BA graphs.

    Zero when the route is longer than the hub set.  Reported as given; it
    is not a normalised probability for arbitrary degree lists.
    """
    k = np.asarray(degrees_of_B, dtype=float)
    if np.any(k < 1):
        raise ValueError("degrees must be >= 1")
    if route_length > k.size or k.size <= 1:
        return 0.0
    return float((k.size - 1) / np.prod(k))


def gilbert_bound(pi_S: float, gap: float, t: int) -> float:
    """Chernoff-type bound on a length-t walk staying in a set of mass pi_S."""
    if not 0 <= pi_S <= 1 or not 0 <= gap <= 1 or t < 0:
        raise ValueError("need 0 <= pi_S <= 1, 0 <= gap <= 1, t >= 0")
    out = 1 - pi_S
    val = (1 + out * gap / 10) * math.exp(-t * out * out * gap / 20)
    return min(max(val, 0.0), 1.0)


def batch_size(degree: int, f: float) -> float:
    """Messages per batch so every outgoing link is used within f percent.

    (9 / f^2) (1 - p) / p with p = 1 / degree, i.e. (9 / f^2)(degree - 1).
    ``f`` is a raw percentage: 5 means 5%.
    """
    if degree < 1:
        raise ValueError("degree must be >= 1")
    if f <= 0:
        raise ValueError("f must be positive")
    return 9.0 / (f * f) * (degree - 1)


def network_batch_size(g: Graph, f: float = 5.0) -> dict:
    """Batch size governed by the highest-degree node (p_min = 1 / max degree)."""
    dmax = int(g.out_degrees().max())
    return {"max_degree": dmax, "p_min": 1.0 / dmax, "f": f,
            "batch_size": batch_size(dmax, f),
            "mean_degree": float(g.out_degrees().mean())}


def batch_table_csv(rows) -> str:
    """CSV with columns model, params, mean_degree, p_min, batch_size."""
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["model", "params", "mean_degree", "p_min", "batch_size"])
    for r in rows:
        params = ";".join(f"{k}={v}" for k, v in sorted(r.get("params", {}).items()))
        w.writerow([r.get("model", ""), params, repr(r["mean_degree"]), repr(r["p_min"]),
                    repr(r["batch_size"])])
    return buf.getvalue()


def ba_formula_check(g: Graph, compromised, length: int, report: AttackReport) -> dict:
    """Set the hub formula beside the simulated and exact probabilities.

    ``agrees`` is False when the formula falls outside the simulation's 3-sigma
    band; the formula is reported as is, never corrected.
    """
    S = np.unique(np.asarray(compromised, dtype=np.int64))
    formula = analytic_compromise_ba(g.out_degrees()[S], length) if S.size else 0.0
    sim = report.fractions[length]
    band = 3 * max(report.sigma(length), 1.0 / report.n_walks)
    return {"formula": formula, "simulated": sim,
            "exact": exact_compromise_probability(g, S, length),
            "agrees": bool(abs(formula - sim) <= band)}
