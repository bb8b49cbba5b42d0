"""Teleport the three reference inputs through the ideal and a noisy resource.

    python3 scripts/reproduce_teleportation.py --noise-p 0.2 --totals 1830
"""

import argparse

from asymtele.estimation import NoiseModel, teleport_fidelity_report
from asymtele.photonics import INPUT_ANGLES, reference_input_state, teleport_via_optics
from asymtele.state import PureState, fidelity_pure


def main():
    parser = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    parser.add_argument("--noise-p", type=float, default=0.0, help="mixed weight of the resource")
    parser.add_argument("--totals", type=int, default=1830)
    parser.add_argument("--seed", type=int, default=0)
    args = parser.parse_args()

    noise = NoiseModel(1 - args.noise_p)
    print("state  optics_F  exact_F  estimate  +-     >2/5   >3/4")
    for i, name in enumerate(("phi1", "phi2", "phi3")):
        state = reference_input_state(name)
        b, _ = teleport_via_optics(INPUT_ANGLES[name])
        optics = fidelity_pure(PureState((4,), state.amps), b.to_mixed())
        rep = teleport_fidelity_report(state, noise, args.totals, args.seed + i)
        est = rep.estimate
        print(f"{name:6} {optics:8.4f} {rep.exact_fidelity:8.4f} {est.value:9.4f} {est.std_error:.4f}"
              f"  {rep.above_estimation_limit!s:6} {rep.above_ququart_limit!s}")


if __name__ == "__main__":
    main()
