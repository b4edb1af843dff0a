"""Critical detection efficiency vs Werner weight, exact and Monte Carlo tables.

    python3 scripts/critical_efficiency.py --nbar 10000 --seed 0 > crit.csv
"""

import argparse
import sys

import numpy as np

from mdinew.emit import emit
from mdinew.loophole import critical_efficiency
from mdinew.protocol import max_entangled_effect
from mdinew.quantum import named_state
from mdinew.witness import make_bundle


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("--p", default="0.4:1.0:7", help="werner weights start:stop:steps")
    ap.add_argument("--nbar", type=int, default=10_000)
    ap.add_argument("--seed", type=int, default=0)
    args = ap.parse_args()
    start, stop, steps = args.p.split(":")
    e = max_entangled_effect(2)
    rows = []
    for p in np.linspace(float(start), float(stop), int(steps)):
        rho = named_state("werner", float(p))
        bundle = make_bundle(rho)
        for mode in ("exact", "mc"):
            for vary in ("plus", "minus"):
                r = critical_efficiency(rho, e, e, bundle, vary, mode=mode, nbar=args.nbar, seed=args.seed)
                rows.append(dict(p=float(p), mode=mode, vary=vary, eta_crit=r.value, flag=r.flag, monotone=r.monotone))
    sys.stdout.write(emit(rows, ["p", "mode", "vary", "eta_crit", "flag", "monotone"]))


if __name__ == "__main__":
    main()
