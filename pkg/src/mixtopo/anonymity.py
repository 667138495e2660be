"""Entropy anonymity metric and convergence of the route-selection walk."""

from __future__ import annotations

import csv
import io
import json
import logging
from dataclasses import dataclass, field

import numpy as np

from .markov import TransitionMatrix, point_mass, rpd, stationary, step

log = logging.getLogger(__name__)

SCHEMA_VERSION = 1
CRITERIA = ("entropy-gap", "rpd")
DEFAULT_THRESHOLD = {"entropy-gap": 0.1, "rpd": 0.01}
OSCILLATION_WINDOW = 10
SATURATION_BITS = 0.01


def entropy(d: np.ndarray):
    """Shannon entropy in bits, ``0 log 0 = 0``; column-wise for 2-D input."""
    p = np.asarray(d, dtype=float)
    with np.errstate(divide="ignore", invalid="ignore"):
        terms = np.where(p > 0, p * np.log2(np.where(p > 0, p, 1.0)), 0.0)
    h = -terms.sum(axis=0)
    return np.maximum(h, 0.0) if np.ndim(h) else max(float(h), 0.0)


def max_anonymity(pi: np.ndarray) -> float:
    return float(entropy(pi))


@dataclass
class TracePoint:
    t: int
    entropy_bits: float
    rpd: float


@dataclass
class ConvergenceReport:
    trace: list[TracePoint]
    max_anonymity_bits: float
    t_converge: int | None
    criterion: dict
    oscillating: bool = False
    meta: dict = field(default_factory=dict)

    @property
    def entropies(self) -> np.ndarray:
        return np.array([p.entropy_bits for p in self.trace])

    @property
    def rpds(self) -> np.ndarray:
        return np.array([p.rpd for p in self.trace])

    def to_dict(self) -> dict:
        return {
            "schema_version": SCHEMA_VERSION,
            "model": self.meta.get("model"),
            "params": self.meta.get("params", {}),
            "seed": self.meta.get("seed"),
            "max_anonymity_bits": self.max_anonymity_bits,
            "t_converge": self.t_converge,
            "criterion": self.criterion,
            "oscillating": self.oscillating,
            "trace": [{"t": p.t, "entropy": p.entropy_bits, "rpd": p.rpd} for p in self.trace],
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2, sort_keys=True)

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["t", "entropy_bits", "rpd"])
        for p in self.trace:
            w.writerow([p.t, repr(p.entropy_bits), repr(p.rpd)])
        return buf.getvalue()


def _meets(criterion: str, threshold: float, h: float, d: float, h_max: float) -> bool:
    if criterion == "entropy-gap":
        return h >= h_max - threshold
    return d <= threshold


def convergence_profile(P: TransitionMatrix, q0: np.ndarray, t_max: int = 100,
                        criterion: str = "entropy-gap", threshold: float | None = None,
                        pi: np.ndarray | None = None) -> ConvergenceReport:
    """Trace entropy and relative point-wise distance of ``q0 P^t``, t = 0..t_max.

    ``q0`` may be ``(n, k)``: the k distributions evolve together, the
    entropy column of the trace is their mean and the distance their maximum.
    ``t_converge`` is the first t meeting the criterion:

    * ``entropy-gap``: entropy >= max anonymity - threshold (bits)
    * ``rpd``: relative point-wise distance <= threshold
    """
    if t_max < 1:
        raise ValueError("t_max must be >= 1")
    if criterion not in CRITERIA:
        raise ValueError(f"criterion must be one of {CRITERIA}")
    if threshold is None:
        threshold = DEFAULT_THRESHOLD[criterion]
    if pi is None:
        pi = stationary(P)
    h_max = max_anonymity(pi)
    q = np.asarray(q0, dtype=float)
    trace = []
    t_conv = None
    for t in range(t_max + 1):
        if t:
            q = step(P, q)
        h = float(np.mean(entropy(q)))
        d = float(np.max(rpd(q, pi)))
        trace.append(TracePoint(t, h, d))
        if t_conv is None and _meets(criterion, threshold, h, d, h_max):
            t_conv = t
    deltas = np.array([p.rpd for p in trace])
    oscillating = _oscillation(deltas, threshold if criterion == "rpd" else 1e-9)
    if oscillating and not P.lazy:
        log.warning("relative point-wise distance stopped decreasing; the chain looks "
                    "periodic, consider the lazy walk")
    return ConvergenceReport(trace, h_max, t_conv,
                             {"rule": criterion, "threshold": threshold, "lazy": P.lazy,
                              "starts": 1 if q.ndim == 1 else int(q.shape[1])},
                             oscillating)


def _oscillation(deltas: np.ndarray, floor: float) -> bool:
    """Delta(t) has stopped falling for a full window while still above ``floor``."""
    w = OSCILLATION_WINDOW
    if deltas.size <= 2 * w or deltas[-1] <= floor:
        return False
    return bool(deltas[-w:].min() >= (1 - 1e-3) * deltas[:-w].min())


def random_starts(n: int, k: int, seed: int = 0) -> np.ndarray:
    """``k`` point masses at distinct uniformly chosen nodes, as an (n, k) array."""
    rng = np.random.default_rng(seed)
    nodes = np.sort(rng.choice(n, size=min(k, n), replace=False))
    return point_mass(n, nodes)


def recommend_route_length(report: ConvergenceReport, fraction: float = 0.95) -> int:
    """Shortest route (t) whose entropy reaches ``fraction`` of the maximum.

    The target never exceeds saturation (0.01 bits below the maximum), so
    ``fraction == 1`` means saturation and the result stays monotone in
    ``fraction`` right up to 1.
    """
    if not 0 < fraction <= 1:
        raise ValueError("fraction must lie in (0, 1]")
    h = report.max_anonymity_bits
    target = min(fraction * h, h - SATURATION_BITS)
    for p in report.trace:
        if p.entropy_bits >= target:
            return p.t
    raise ValueError(f"{fraction:.0%} of maximal anonymity not reached within "
                     f"t = {report.trace[-1].t}")
