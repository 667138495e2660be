"""Random-walk Markov chain of mix-route selection and its spectral summary.

Distributions are plain 1-D numpy arrays (or ``(n, k)`` arrays holding ``k``
distributions column-wise, which ``step`` evolves together).
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field, replace

import numpy as np
import scipy.sparse as sp
from scipy.sparse import csgraph
from scipy.sparse.linalg import ArpackError, ArpackNoConvergence, LinearOperator, eigsh

from .graph import Graph, giant_component, is_connected

log = logging.getLogger(__name__)

ROW_SUM_TOL = 1e-12


class GraphConditionError(ValueError):
    """The graph violates a precondition of the walk (dead ends, disconnection)."""


class StationaryError(RuntimeError):
    """Power iteration for the stationary distribution did not settle."""

    def __init__(self, msg, residual):
        super().__init__(msg)
        self.residual = residual


@dataclass(frozen=True, eq=False)
class TransitionMatrix:
    """Row-stochastic P of the walk; ``lazy`` chains are ``(P + I) / 2``."""
    matrix: sp.csr_matrix
    reversible: bool
    lazy: bool = False
    graph: Graph | None = None
    _transpose: sp.csr_matrix = field(init=False, repr=False)

    def __post_init__(self):
        object.__setattr__(self, "_transpose", self.matrix.T.tocsr())

    @property
    def n(self) -> int:
        return self.matrix.shape[0]

    def dense(self) -> np.ndarray:
        return self.matrix.toarray()

    def as_lazy(self) -> "TransitionMatrix":
        if self.lazy:
            return self
        half = (0.5 * (self.matrix + sp.identity(self.n, format="csr"))).tocsr()
        return replace(self, matrix=half, lazy=True)


def transition_matrix(g: Graph, lazy: bool = False) -> TransitionMatrix:
    """P[i, j] = 1 / outdeg(i) for every arc (i, j)."""
    deg = g.out_degrees()
    dead = np.flatnonzero(deg == 0)
    if dead.size:
        raise GraphConditionError(
            f"{dead.size} node(s) have no out-neighbours (first: {int(dead[0])}); "
            "restrict to the giant component first")
    data = np.repeat(1.0 / deg, deg)
    P = sp.csr_matrix((data, g.indices.copy(), g.indptr.copy()), shape=(g.n, g.n))
    rows = np.asarray(P.sum(axis=1)).ravel()
    assert np.all(np.abs(rows - 1.0) <= ROW_SUM_TOL), "row sums drifted"
    tm = TransitionMatrix(P, reversible=not g.directed, graph=g)
    return tm.as_lazy() if lazy else tm


def walk_chain(g: Graph, lazy: bool = False, giant: bool = False) -> TransitionMatrix:
    """Convenience: optionally reduce to the giant component, then build P."""
    if giant:
        g = giant_component(g)
    elif not is_connected(g):
        raise GraphConditionError("graph is disconnected; use its giant component")
    return transition_matrix(g, lazy=lazy)


# ---------------------------------------------------------------------------
# distributions

def uniform(n: int) -> np.ndarray:
    return np.full(n, 1.0 / n)


def point_mass(n: int, nodes) -> np.ndarray:
    """One point mass per entry of ``nodes``; a scalar gives a 1-D vector."""
    nodes_arr = np.atleast_1d(np.asarray(nodes, dtype=np.int64))
    q = np.zeros((n, nodes_arr.size))
    q[nodes_arr, np.arange(nodes_arr.size)] = 1.0
    return q[:, 0] if np.ndim(nodes) == 0 else q


def check_distribution(q: np.ndarray, tol: float = 1e-9) -> None:
    if np.any(q < 0):
        raise ValueError("negative probability")
    s = q.sum(axis=0)
    if np.any(np.abs(s - 1.0) > tol):
        raise ValueError(f"probabilities sum to {s}, not 1")


def step(P: TransitionMatrix, q: np.ndarray) -> np.ndarray:
    """One transition: ``q P`` (column-wise for 2-D input)."""
    if q.shape[0] != P.n:
        raise ValueError(f"dimension mismatch: distribution has {q.shape[0]} entries, chain {P.n}")
    return P._transpose @ q


def evolve(P: TransitionMatrix, q0: np.ndarray, t: int) -> np.ndarray:
    q = q0
    for _ in range(t):
        q = step(P, q)
    return q


def stationary(P: TransitionMatrix, tol: float = 1e-12, max_iter: int = 200_000,
               check_closed_form: bool = True) -> np.ndarray:
    """Stationary distribution by power iteration from the uniform vector.

    Stops once ``||pi P - pi||_1 <= tol``.  Periodic chains never get there;
    the error raised then suggests the lazy walk.  For reversible chains the
    result is checked against ``deg / 2L``.
    """
    pi = uniform(P.n)
    residual = math.inf
    for _ in range(max_iter):
        nxt = step(P, pi)
        nxt /= nxt.sum()
        residual = float(np.abs(nxt - pi).sum())
        pi = nxt
        if residual <= tol:
            break
    else:
        hint = "" if P.lazy else " (periodic chain? try the lazy walk)"
        raise StationaryError(f"no convergence in {max_iter} iterations, "
                              f"residual {residual:.3e}{hint}", residual)
    if check_closed_form and P.reversible and P.graph is not None:
        d = P.graph.out_degrees()
        closed = d / d.sum()
        err = float(np.max(np.abs(pi - closed)))
        if err > 1e-8:
            raise StationaryError(f"power iteration disagrees with deg/2L by {err:.3e}", err)
    return pi


def rpd(q: np.ndarray, pi: np.ndarray):
    """Relative point-wise distance max_i |q_i - pi_i| / pi_i (per column if 2-D)."""
    if q.shape[0] != pi.shape[0]:
        raise ValueError("dimension mismatch")
    if np.any(pi <= 0):
        raise ValueError("stationary distribution has zero entries")
    rel = np.abs(q - (pi[:, None] if q.ndim == 2 else pi))
    rel /= pi[:, None] if q.ndim == 2 else pi
    return rel.max(axis=0)


# ---------------------------------------------------------------------------
# spectrum

@dataclass(frozen=True)
class SpectralSummary:
    """Second-eigenvalue summary.

    ``lambda2`` is the largest eigenvalue modulus once the trivial
    eigenvalue 1 (and -1, for bipartite graphs) is set aside;
    ``lambda2_signed`` is the second-largest eigenvalue itself.  Directed
    chains only get a decay-rate estimate in ``lambda2``.
    """
    lambda2: float
    iterations: int
    converged: bool
    method: str
    lambda2_signed: float | None = None
    periodic: bool = False

    @property
    def gap(self) -> float:
        return 1.0 - self.lambda2

    def to_dict(self) -> dict:
        return {"lambda2": self.lambda2, "gap": self.gap, "lambda2_signed": self.lambda2_signed,
                "iterations": self.iterations, "converged": self.converged,
                "method": self.method, "periodic": self.periodic}


def bipartition(g: Graph) -> np.ndarray | None:
    """+-1 two-colouring of a connected undirected graph, or None if none exists."""
    adj = sp.csr_matrix((np.ones(g.arc_count), g.indices, g.indptr), shape=(g.n, g.n))
    order, pred = csgraph.breadth_first_order(adj, 0, directed=False)
    depth = np.zeros(g.n, dtype=np.int64)
    for v in order[1:]:
        depth[v] = depth[pred[v]] + 1
    colour = np.where(depth % 2 == 0, 1.0, -1.0)
    a = g.arcs()
    if np.any(colour[a[:, 0]] == colour[a[:, 1]]):
        return None
    return colour


def _symmetric_form(P: TransitionMatrix, pi: np.ndarray) -> sp.csr_matrix:
    s = np.sqrt(pi)
    return (sp.diags(s) @ P.matrix @ sp.diags(1.0 / s)).tocsr()


def _deflation_vectors(P: TransitionMatrix, pi: np.ndarray):
    """Unit eigenvectors of the symmetric form for the trivial eigenvalues."""
    top = np.sqrt(pi)
    top /= np.linalg.norm(top)
    vecs = [(top, 1.0)]
    periodic = False
    if not P.lazy and P.graph is not None:
        colour = bipartition(P.graph)
        if colour is not None:
            periodic = True
            vecs.append((colour * top, -1.0))
    return vecs, periodic


def _power(apply, n, deflate, tol, max_iter, rng):
    x = rng.standard_normal(n)
    for v in deflate:
        x -= v * (v @ x)
    x /= np.linalg.norm(x)
    est = 0.0
    for it in range(1, max_iter + 1):
        y = apply(x)
        for v in deflate:
            y -= v * (v @ y)
        norm = np.linalg.norm(y)
        if norm == 0.0:
            return 0.0, it, True
        new = float(x @ y)
        x = y / norm
        if abs(new - est) <= tol * max(1.0, abs(new)):
            return new, it, True
        est = new
    return est, max_iter, False


def lambda2_estimate(P: TransitionMatrix, pi: np.ndarray | None = None, tol: float = 1e-10,
                     max_iter: int = 100_000, method: str = "auto",
                     seed: int = 0) -> SpectralSummary:
    """Estimate the second eigenvalue modulus of the walk.

    Reversible chains work on the symmetrised matrix ``D^1/2 P D^-1/2``
    (``D = diag(pi)``) with the trivial eigenvectors projected out:

    * ``"power"`` -- power iteration on the square (modulus) and on
      ``(I + S) / 2`` (signed value);
    * ``"lanczos"`` -- ARPACK on the same deflated operator;
    * ``"auto"`` -- Lanczos, falling back to power iteration.

    Directed chains use ``"decay"``: the geometric decay rate of the
    relative point-wise distance from a handful of point-mass starts.
    """
    if pi is None:
        if P.reversible and P.graph is not None:
            d = P.graph.out_degrees()
            pi = d / d.sum()  # exact for reversible walks, periodic or not
        else:
            pi = stationary(P)
    if not P.reversible or method == "decay":
        return _decay_rate(P, pi, tol, max_iter, seed)
    n = P.n
    deflate_pairs, periodic = _deflation_vectors(P, pi)
    vecs = [v for v, _ in deflate_pairs]
    if n - len(vecs) <= 0:
        return SpectralSummary(0.0, 0, True, "exact", 0.0, periodic)
    S = _symmetric_form(P, pi)
    rng = np.random.default_rng(seed)

    if n <= 3:
        # too small for ARPACK; solve the deflated matrix directly
        M = S.toarray() - sum(lam * np.outer(v, v) for v, lam in deflate_pairs)
        w = _drop_deflated(np.linalg.eigvalsh(M), len(vecs))
        return SpectralSummary(float(np.max(np.abs(w))), 1, True, "dense",
                               float(np.max(w)), periodic)

    if method in ("auto", "lanczos"):
        def matvec(x):
            x = np.asarray(x).ravel()
            y = S @ x
            for v, lam in deflate_pairs:
                y -= lam * v * (v @ x)
            return y

        op = LinearOperator((n, n), matvec=matvec, dtype=float)
        v0 = rng.standard_normal(n)
        try:
            lm = eigsh(op, k=1, which="LM", tol=tol, maxiter=max_iter, v0=v0,
                       return_eigenvectors=False)
            la = eigsh(op, k=1, which="LA", tol=tol, maxiter=max_iter, v0=v0,
                       return_eigenvectors=False)
            return SpectralSummary(float(abs(lm[0])), 0, True, "lanczos", float(la[0]), periodic)
        except ArpackNoConvergence:
            if method == "lanczos":
                return SpectralSummary(math.nan, max_iter, False, "lanczos", None, periodic)
            log.info("Lanczos did not converge; falling back to power iteration")
        except ArpackError:
            # e.g. the deflated operator is identically zero (stars, K2 x K2)
            log.info("ARPACK failed; falling back to power iteration")

    sq, it1, ok1 = _power(lambda x: S @ (S @ x), n, vecs, tol, max_iter, rng)
    lazy_top, it2, ok2 = _power(lambda x: 0.5 * (x + S @ x), n, vecs, tol, max_iter, rng)
    return SpectralSummary(math.sqrt(max(sq, 0.0)), it1 + it2, ok1 and ok2, "power",
                           2.0 * lazy_top - 1.0, periodic)


def _drop_deflated(w: np.ndarray, k: int) -> np.ndarray:
    # deflated directions come back as eigenvalue 0; remove k of them
    w = np.sort(w)
    for _ in range(k):
        idx = int(np.argmin(np.abs(w)))
        w = np.delete(w, idx)
    return w


def _decay_rate(P, pi, tol, max_iter, seed, starts: int = 8,
                floor: float = 1e-9) -> SpectralSummary:
    rng = np.random.default_rng(seed)
    nodes = rng.choice(P.n, size=min(starts, P.n), replace=False)
    q = point_mass(P.n, nodes)
    deltas = []
    for t in range(max_iter):
        q = step(P, q)
        d = float(np.max(rpd(q, pi)))
        deltas.append(d)
        if d < floor:
            break
    deltas = np.asarray(deltas)
    # fit on the tail: values below 1e-2 where the slowest mode dominates
    mask = (deltas < 1e-2) & (deltas > floor * 0.1)
    t_idx = np.flatnonzero(mask)
    if t_idx.size < 3:
        est = float(deltas[-1] ** (1.0 / len(deltas))) if deltas[-1] > 0 else 0.0
        return SpectralSummary(min(est, 1.0), len(deltas), False, "decay")
    tail = t_idx[t_idx.size // 2:] if t_idx.size >= 6 else t_idx
    slope = np.polyfit(tail, np.log(deltas[tail]), 1)[0]
    return SpectralSummary(float(min(math.exp(slope), 1.0)), len(deltas), True, "decay")


def sinclair_steps(lambda2: float, pi_min: float, delta_target: float = 1.0) -> int:
    """Smallest t with lambda2**t / pi_min <= delta_target."""
    if not 0 < lambda2 < 1:
        raise ValueError("lambda2 must lie in (0, 1)")
    if not 0 < pi_min <= 1:
        raise ValueError("pi_min must lie in (0, 1]")
    if delta_target <= 0:
        raise ValueError("delta_target must be positive")
    if 1.0 / pi_min <= delta_target:
        return 0
    t = max(0, math.ceil(math.log(delta_target * pi_min) / math.log(lambda2)) - 1)
    rel = 1e-12
    while lambda2 ** t / pi_min > delta_target * (1 + rel):
        t += 1
    return t


# ---------------------------------------------------------------------------
# conductance

MAX_CONDUCTANCE_NODES = 24


def conductance_exact(g: Graph) -> float:
    """min |cut(S)| / vol(S) over nonempty S with vol(S) <= vol(V) / 2.

    Exhaustive over all 2^n subsets, so limited to small graphs.
    """
    if g.directed:
        raise ValueError("conductance is defined here for undirected graphs")
    if g.n > MAX_CONDUCTANCE_NODES:
        raise ValueError(f"exact conductance limited to n <= {MAX_CONDUCTANCE_NODES}")
    if g.n < 2 or g.edge_count == 0:
        raise ValueError("need a graph with at least one edge")
    deg = g.out_degrees().astype(np.int64)
    total = int(deg.sum())
    e = g.edges()
    best = math.inf
    chunk = 1 << 18
    for start in range(1, 1 << g.n, chunk):
        masks = np.arange(start, min(start + chunk, 1 << g.n), dtype=np.int64)
        bits = (masks[:, None] >> np.arange(g.n)) & 1
        vol = bits @ deg
        inside = (bits[:, e[:, 0]] & bits[:, e[:, 1]]).sum(axis=1)
        cut = vol - 2 * inside
        ok = (2 * vol <= total) & (vol > 0)
        if ok.any():
            best = min(best, float(np.min(cut[ok] / vol[ok])))
    return best


def cheeger_bounds(phi: float) -> tuple[float, float]:
    """Interval 1 - 2 phi <= lambda2 <= 1 - phi^2 / 2."""
    return 1.0 - 2.0 * phi, 1.0 - phi * phi / 2.0


# ---------------------------------------------------------------------------
# lambda2 against network size

@dataclass
class SizeSweepRow:
    n: int
    mean: float
    std: float
    values: list

    def to_dict(self):
        return {"n": self.n, "mean_lambda2": self.mean, "std": self.std, "values": self.values}


def lambda2_size_experiment(template, sizes, trials: int = 5, lazy: bool = False):
    """Mean and spread of lambda2 across generated graphs at several sizes.

    ``template`` is a GeneratorConfig; each (size, trial) pair gets seed
    ``template.seed + 1000 * trial + size`` and is reduced to its giant
    component before the estimate.
    """
    from .generators import generate
    if len(sizes) < 1 or trials < 1:
        raise ValueError("need at least one size and one trial")
    rows = []
    for n in sizes:
        vals = []
        for k in range(trials):
            cfg = replace(template, n=int(n), seed=template.seed + 1000 * k + int(n))
            P = transition_matrix(giant_component(generate(cfg)), lazy=lazy)
            vals.append(lambda2_estimate(P, stationary(P)).lambda2)
        rows.append(SizeSweepRow(int(n), float(np.mean(vals)), float(np.std(vals)), vals))
    return rows


def size_spread(rows) -> float:
    means = [r.mean for r in rows]
    return float(max(means) - min(means))
