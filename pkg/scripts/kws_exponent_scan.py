"""Convergence steps of the directed small-world lattice against its long-link exponent.

Prints one row per exponent: t_converge for (radius, q) in
(1, 2), (1, 10), (4, 2), (4, 10) on a side x side lattice, for each seed.

    python scripts/kws_exponent_scan.py --exponents 1 1.5 2 2.5
"""

import argparse

from mixtopo.anonymity import convergence_profile, random_starts
from mixtopo.generators import gen_kws
from mixtopo.markov import stationary, transition_matrix

SETTINGS = ((1, 2), (1, 10), (4, 2), (4, 10))


def t_converge(side, radius, q, r_exp, seed, threshold):
    g = gen_kws(side, radius, q, r_exp, seed)
    P = transition_matrix(g)
    pi = stationary(P, check_closed_form=False)
    rep = convergence_profile(P, random_starts(g.n, 50, seed=[seed, 2]), 250,
                              threshold=threshold, pi=pi)
    return rep.t_converge


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--side", type=int, default=71)
    ap.add_argument("--exponents", type=float, nargs="+", default=[1.0, 1.5, 2.0, 2.5])
    ap.add_argument("--seeds", type=int, default=3)
    ap.add_argument("--threshold", type=float)
    args = ap.parse_args(argv)
    print("r_exp  " + "  ".join(f"r{r}q{q}" for r, q in SETTINGS))
    for r_exp in args.exponents:
        cells = [",".join(str(t_converge(args.side, r, q, r_exp, s, args.threshold))
                          for s in range(args.seeds)) for r, q in SETTINGS]
        print(f"{r_exp:<5}  " + "  ".join(cells), flush=True)


if __name__ == "__main__":
    main()
