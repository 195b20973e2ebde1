"""Storage/release infidelity against ramp duration (units of 1/(g sqrt N)).

    python scripts/ramp_scan.py --ramps 10 20 40 80 160 --phi-e 0.785 --cutoff 12
"""
import argparse

import numpy as np

from dlmemory import dynamics as dyn
from dlmemory.ensemble import CouplingParams
from dlmemory.fock import build_space


def main():
    ap = argparse.ArgumentParser(description=__doc__, formatter_class=argparse.RawDescriptionHelpFormatter)
    ap.add_argument("--ramps", type=float, nargs="+", default=[10, 20, 40, 80, 160])
    ap.add_argument("--phi-e", type=float, default=np.pi / 4)
    ap.add_argument("--alpha", type=float, default=1.0)
    ap.add_argument("--cutoff", type=int, default=12)
    args = ap.parse_args()

    space = build_space(args.cutoff)
    params = CouplingParams(1.0, 1.0, 1.0)
    print(f"{'ramp':>8s} {'infidelity':>12s} {'stored':>12s} {'min dark':>9s} {'steps':>8s}")
    for T in args.ramps:
        spec = dyn.ProtocolSpec(input="coherent", alpha=args.alpha, phi_e=args.phi_e, ramp=T, samples=9)
        res = dyn.run_protocol(space, params, spec, monitor=False)
        print(f"{T:8.1f} {res.infidelity:12.3e} {1 - res.stored_fidelity:12.3e} "
              f"{res.dark_population.min():9.4f} {res.n_steps:8d}")


if __name__ == "__main__":
    main()
