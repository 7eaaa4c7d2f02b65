"""van der Pol, sigma = 0.5, only x2 observed.

Writes two record tables: a full-state monomial degree sweep without delay
and a delay-depth sweep M = 0..8 with the quadratic delay dictionary, and
prints median errors per setting.
"""
from collections import defaultdict

import numpy as np

from _common import parser
from koopman_po import io
from koopman_po.experiments import ExperimentSetup, run_degree_sweep, run_partial_observation_trial
from koopman_po.systems import make_van_der_pol


def medians(records, key):
    groups = defaultdict(list)
    for r in records:
        groups[key(r)].append(r.error)
    return {k: np.median(v) for k, v in sorted(groups.items())}


def main():
    ap = parser(__doc__, "vdp_sweeps")
    ap.add_argument("--sigma", type=float, default=0.5)
    args = ap.parse_args()
    system = make_van_der_pol(1.0, args.sigma)
    setup = ExperimentSetup.protocol("van_der_pol")

    deg = run_degree_sweep(system, 1, (1, 2, 3, 4), args.seeds, setup)
    io.save_records(deg, args.out / "degree_sweep.csv")
    for (d, tgt), m in medians(deg, lambda r: (r.degree, r.target)).items():
        print(f"degree={d} {tgt}: median error {m:.4f}")

    delay = run_partial_observation_trial(system, 1, range(9), 2, args.seeds, setup)
    io.save_records(delay, args.out / "delay_sweep.csv")
    for (M, tgt), m in medians(delay, lambda r: (r.M, r.target)).items():
        print(f"M={M} {tgt}: median error {m:.4f}")


if __name__ == "__main__":
    main()
