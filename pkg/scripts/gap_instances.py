"""Search for two-qubit states the nonlinear witness detects but the linear one
misses, and print the first few as explicit density matrices."""

import argparse

import numpy as np

from mdinew.protocol import build_table, i_alpha, max_entangled_effect, n_phi
from mdinew.quantum import make_rng, random_pure
from mdinew.scenarios import random_npt_state
from mdinew.witness import bundle_from_parts, witness_from_npt


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("--trials", type=int, default=2000)
    ap.add_argument("--show", type=int, default=3)
    ap.add_argument("--seed", type=int, default=0)
    args = ap.parse_args()
    e = max_entangled_effect(2)
    found = 0
    np.set_printoptions(precision=4, suppress=True)
    for trial in range(args.trials):
        rng = make_rng(args.seed, trial)
        w, phi = witness_from_npt(random_npt_state(2, 2, rng))
        bundle = bundle_from_parts(w, phi, random_pure(4, rng, (2, 2)))
        rho = random_pure(4, rng, (2, 2)).density()
        table = build_table(rho, bundle.basis, e, e)
        ia, nv = i_alpha(table, bundle.alpha), n_phi(table, bundle)
        if ia >= 0 > nv:
            found += 1
            if found <= args.show:
                print(f"trial {trial}: I = {ia:.6g}, N = {nv:.6g}, s(X) = {bundle.sX:.4f}")
                print(rho.mat)
    print(f"{found} of {args.trials} trials: I >= 0 > N")


if __name__ == "__main__":
    main()
