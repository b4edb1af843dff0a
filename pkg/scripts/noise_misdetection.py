"""Fraction of separable trials flagged as entangled under xy-rotation input noise,
for the linear (I) and nonlinear (N) MDI witnesses, per rotation angle."""

import argparse
import sys

import numpy as np

from mdinew.emit import emit
from mdinew.noise import compare_ew_new, xy_rotation
from mdinew.quantum import make_rng, named_state, random_dichotomic_effect, random_separable
from mdinew.witness import InputBasis, make_bundle


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("--trials", type=int, default=500)
    ap.add_argument("--angles", type=int, default=9)
    ap.add_argument("--seed", type=int, default=0)
    args = ap.parse_args()
    basis = InputBasis.standard(2, 2)
    bundle = make_bundle(named_state("singlet"), basis=basis)
    thetas = np.linspace(0, np.pi / 2, args.angles)
    channels = [xy_rotation(t) for t in thetas]
    i_hits = np.zeros(len(thetas), dtype=int)
    n_hits = np.zeros(len(thetas), dtype=int)
    for trial in range(args.trials):
        rng = make_rng(args.seed, trial)
        sigma = random_separable((2, 2), int(rng.integers(1, 5)), rng).assemble()
        a1 = random_dichotomic_effect(4, rng, (2, 2))
        b1 = random_dichotomic_effect(4, rng, (2, 2))
        for k, r in enumerate(compare_ew_new(sigma, basis, a1, b1, channels, bundle)):
            i_hits[k] += r.i_misdetects
            n_hits[k] += r.n_misdetects
    rows = [dict(theta=float(t), trials=args.trials, i_rate=int(i) / args.trials, n_rate=int(n) / args.trials)
            for t, i, n in zip(thetas, i_hits, n_hits)]
    sys.stdout.write(emit(rows, ["theta", "trials", "i_rate", "n_rate"]))


if __name__ == "__main__":
    main()
