"""Print the white-noise sweep table and its bound crossings.

    python3 scripts/noise_sweep.py --totals 20000 --seed 5
"""

import argparse

from asymtele.config import ExperimentConfig, InputSpec
from asymtele.scenarios import run_scenario


def main():
    parser = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    parser.add_argument("--totals", type=int, default=20000)
    parser.add_argument("--seed", type=int, default=5)
    args = parser.parse_args()

    cfg = ExperimentConfig("noise-sweep", InputSpec("phi-all"), counts_override=args.totals,
                           bootstrap_iters=0, seed=args.seed)
    rep = run_scenario(cfg)
    print("  p   resource  teleport  exact   >2/5   >3/4")
    for r in rep.payload["rows"]:
        mark = " <- 2/5" if r["crosses_estimation_limit"] else ""
        mark += " <- 3/4" if r["crosses_ququart_limit"] else ""
        print(f"{r['white_noise_weight']:4.1f} {r['resource_fidelity']:9.4f} {r['teleport_fidelity']:9.4f}"
              f" {r['teleport_fidelity_exact']:7.4f}  {r['above_estimation_limit']!s:6}"
              f" {r['above_ququart_limit']!s:6}{mark}")
    print("teleport column monotone:", rep.payload["teleport_monotone"])


if __name__ == "__main__":
    main()
