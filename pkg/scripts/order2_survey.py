"""Random search for an attracting 2-cycle of the return map.

Draws parameters around the low-growth scenarios, keeps draws where the
threshold is reachable, and records the order-1 multiplier.  A multiplier
below -1 would signal a period-doubling and a candidate 2-cycle; the
script reports the most negative one seen.

    python3 scripts/order2_survey.py --draws 500 --seed 0
"""

import argparse

import numpy as np

from wnv_impulse import ControlPolicy, Parameters, nullcline_markers
from wnv_impulse.errors import WNVError
from wnv_impulse.orbits import find_order1, iterate_map


def draw(rng):
    delta = rng.uniform(0.02, 0.2)
    params = Parameters(mu_m=delta * rng.uniform(1.05, 20), K_m=1000, delta_m=delta,
                        mu_b=rng.uniform(0.002, 0.05), c=rng.uniform(0.05, 0.3),
                        beta_bm=rng.uniform(0.5, 1.0), N_b=400)
    policy = ControlPolicy(rng.uniform(0.05, 0.95), rng.uniform(0.05, 0.95), rng.uniform(20, 380))
    return params, policy


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--draws", type=int, default=500)
    ap.add_argument("--seed", type=int, default=0)
    args = ap.parse_args()
    rng = np.random.default_rng(args.seed)
    worst, tried, flips = None, 0, 0
    for _ in range(args.draws):
        params, policy = draw(rng)
        try:
            policy.check_against(params)
            if not nullcline_markers(params, policy).threshold_reachable:
                continue
            orbit, stab = find_order1(params, policy)
        except WNVError:
            continue
        tried += 1
        if worst is None or stab.mu_analytic < worst[0]:
            worst = (stab.mu_analytic, params, policy)
        if stab.mu_analytic < -1:
            flips += 1
            tail = iterate_map(orbit.anchors[0] * 0.9, params, policy)
            print(f"mu={stab.mu_analytic:.4f} tail={tail.limit} {params} {policy}")
    print(f"{tried} usable draws, {flips} with mu < -1")
    if worst is not None:
        print(f"most negative multiplier {worst[0]:.6f} at {worst[1]} {worst[2]}")


if __name__ == "__main__":
    main()
