import json
import logging
import math

import numpy as np
import pytest
from hypothesis import given, strategies as st
from hypothesis.extra.numpy import arrays

from mixtopo.anonymity import (ConvergenceReport, TracePoint, convergence_profile, entropy,
                               max_anonymity, random_starts, recommend_route_length)
from mixtopo.generators import gen_ba, gen_regular
from mixtopo.graph import from_edges
from mixtopo.markov import evolve, point_mass, stationary, transition_matrix, uniform

from conftest import cycle, path3, random_connected

probs = arrays(float, st.integers(1, 40), elements=st.floats(0, 1)).filter(
    lambda a: a.sum() > 1e-6).map(lambda a: a / a.sum())


def test_entropy_examples():
    assert entropy(uniform(4096)) == pytest.approx(12.0)
    assert entropy(np.array([0.25, 0.5, 0.25])) == pytest.approx(1.5)
    assert entropy(uniform(5000)) == pytest.approx(12.2877, abs=1e-4)
    assert entropy(np.array([1.0, 0.0])) == 0.0


@given(probs, st.randoms())
def test_entropy_permutation_invariant_and_bounded(p, rnd):
    perm = list(range(p.size))
    rnd.shuffle(perm)
    h = entropy(p)
    assert entropy(p[perm]) == pytest.approx(h, abs=1e-12)
    assert -1e-12 <= h <= math.log2(p.size) + 1e-9


@given(st.integers(2, 200), st.integers(0, 1000))
def test_uniform_is_the_maximum(n, seed):
    q = np.random.default_rng(seed).dirichlet(np.ones(n))
    assert entropy(q) <= entropy(uniform(n)) + 1e-12


def test_entropy_column_wise():
    Q = np.column_stack([uniform(8), point_mass(8, 2)])
    assert entropy(Q).tolist() == pytest.approx([3.0, 0.0])


def test_max_anonymity_regular_is_log_n():
    g = gen_regular(5000, 14, seed=0)
    assert max_anonymity(stationary(transition_matrix(g))) == pytest.approx(math.log2(5000), abs=1e-9)


@given(st.integers(0, 10_000), st.integers(3, 40))
def test_max_anonymity_at_most_log_n(seed, n):
    g = random_connected(n, 0.2, seed)
    d = g.out_degrees()
    h = max_anonymity(d / d.sum())
    assert h <= math.log2(n) + 1e-12
    if np.all(d == d[0]):
        assert h == pytest.approx(math.log2(n))
    else:
        assert h < math.log2(n)


# -- convergence profile ----------------------------------------------------

def test_stationary_start_converges_at_zero():
    g = gen_ba(300, 2, seed=1)
    P = transition_matrix(g)
    pi = stationary(P)
    rep = convergence_profile(P, pi, 5, pi=pi)
    assert rep.t_converge == 0
    rep = convergence_profile(P, pi, 5, criterion="rpd", pi=pi)
    assert rep.t_converge == 0


def test_uniform_on_regular_is_already_maximal():
    P = transition_matrix(gen_regular(5000, 14, seed=0))
    rep = convergence_profile(P, uniform(5000), 3)
    assert all(p.entropy_bits == pytest.approx(rep.max_anonymity_bits) for p in rep.trace)


def test_profile_matches_dense_oracle():
    g = random_connected(200, 0.04, 3)
    P = transition_matrix(g)
    d = g.out_degrees()
    pi = d / d.sum()
    q0 = point_mass(200, 17)
    rep = convergence_profile(P, q0, 30, pi=pi)
    D = P.dense()
    q = q0.copy()
    for t in range(31):
        h = -np.sum(q[q > 0] * np.log2(q[q > 0]))
        assert rep.trace[t].entropy_bits == pytest.approx(h, abs=1e-10)
        assert rep.trace[t].rpd == pytest.approx(np.max(np.abs(q - pi) / pi), rel=1e-9)
        q = q @ D


def test_expander_point_mass_converges_fast():
    P = transition_matrix(gen_regular(5000, 14, seed=0))
    rep = convergence_profile(P, point_mass(5000, 0), 20)
    assert rep.t_converge is not None and rep.t_converge <= 8


@given(st.integers(0, 10_000), st.sampled_from(["entropy-gap", "rpd"]),
       st.floats(1e-3, 1.0))
def test_t_converge_consistent_with_trace(seed, crit, thr):
    g = random_connected(30, 0.15, seed)
    P = transition_matrix(g, lazy=True)
    d = g.out_degrees()
    pi = d / d.sum()
    rep = convergence_profile(P, point_mass(30, 0), 40, crit, thr, pi=pi)
    ok = [(p.entropy_bits >= rep.max_anonymity_bits - thr) if crit == "entropy-gap"
          else (p.rpd <= thr) for p in rep.trace]
    expected = ok.index(True) if any(ok) else None
    assert rep.t_converge == expected
    assert rep.criterion["rule"] == crit and rep.criterion["threshold"] == thr


def test_not_reached_within_horizon():
    g = cycle(101)
    P = transition_matrix(g, lazy=True)
    rep = convergence_profile(P, point_mass(101, 0), 2)
    assert rep.t_converge is None
    with pytest.raises(ValueError):
        recommend_route_length(rep, 0.95)


def test_oscillation_flagged_on_bipartite(caplog):
    g = cycle(8)
    P = transition_matrix(g)
    with caplog.at_level(logging.WARNING):
        rep = convergence_profile(P, point_mass(8, 0), 40, pi=uniform(8))
    assert rep.oscillating
    assert "lazy" in caplog.text
    rep = convergence_profile(P.as_lazy(), point_mass(8, 0), 40, pi=uniform(8))
    assert not rep.oscillating


def test_bad_arguments():
    P = transition_matrix(path3(), lazy=True)
    with pytest.raises(ValueError):
        convergence_profile(P, uniform(3), 0)
    with pytest.raises(ValueError):
        convergence_profile(P, uniform(3), 5, criterion="kl")


def test_multi_start_profile_averages_entropy():
    g = random_connected(40, 0.1, 8)
    P = transition_matrix(g, lazy=True)
    Q = random_starts(40, 5, seed=1)
    rep = convergence_profile(P, Q, 10)
    q5 = evolve(P, Q, 5)
    assert rep.trace[5].entropy_bits == pytest.approx(np.mean(entropy(q5)))
    assert rep.criterion["starts"] == 5


def test_random_starts_are_distinct_point_masses():
    Q = random_starts(100, 30, seed=4)
    assert Q.shape == (100, 30)
    assert np.all(Q.sum(axis=0) == 1)
    assert len(set(np.argmax(Q, axis=0).tolist())) == 30


# -- serialisation ----------------------------------------------------------

def test_report_json_and_csv_schema():
    P = transition_matrix(path3(), lazy=True)
    rep = convergence_profile(P, point_mass(3, 0), 4)
    rep.meta.update({"model": "file", "params": {"k": 1}, "seed": 3})
    d = json.loads(rep.to_json())
    assert set(d) >= {"schema_version", "model", "params", "seed", "max_anonymity_bits",
                      "t_converge", "criterion", "trace"}
    assert d["max_anonymity_bits"] == pytest.approx(1.5)
    assert set(d["trace"][0]) == {"t", "entropy", "rpd"}
    lines = rep.to_csv().splitlines()
    assert lines[0] == "t,entropy_bits,rpd" and len(lines) == 6


# -- route length recommendation --------------------------------------------

def trace_report(values, hmax):
    return ConvergenceReport([TracePoint(t, h, 0.0) for t, h in enumerate(values)], hmax, None,
                             {})


def test_recommend_examples():
    rep = trace_report([0, 5, 9, 14.9, 15.9, 16.0], 16.0)
    assert recommend_route_length(rep, 0.95) == 4
    assert recommend_route_length(rep, 1.0) == 5
    with pytest.raises(ValueError):
        recommend_route_length(rep, 0)
    # just below 1 must not demand more than saturation
    sat = trace_report([0, 15.995, 16.0], 16.0)
    assert recommend_route_length(sat, 1.0) == 1
    assert recommend_route_length(sat, 0.9999) == 1


@given(st.lists(st.floats(0, 10), min_size=1, max_size=30), st.floats(0.01, 1.0),
       st.floats(0.01, 1.0))
def test_recommend_monotone_in_fraction(vals, f1, f2):
    lo, hi = sorted((f1, f2))
    rep = trace_report(sorted(vals), 10.0)
    try:
        t_hi = recommend_route_length(rep, hi)
    except ValueError:
        return
    assert recommend_route_length(rep, lo) <= t_hi
