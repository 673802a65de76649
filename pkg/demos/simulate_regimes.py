"""Simulate one hour of normalized PV power under four weather regimes.

Each regime is a bounded mean-reverting diffusion; the script prints the
sample statistics of a simulated fan next to the analytic stationary law
so the two can be compared at a glance.
"""

import numpy as np

from pvsde import (SdeParams, simulate_hour, stationary_beta_shapes,
                   stationary_sample)

REGIMES = {
    "clear sky": SdeParams(0.3298, 0.8333, 0.0348, 0.6895, 0.8477),
    "cloudy": SdeParams(0.2095, 0.5496, 0.1946, 0.1263, 0.9930),
    "rainy": SdeParams(0.0760, 0.0519, 0.0519, 0.0, 0.3143),
    "overcast": SdeParams(0.0461, 0.3547, 0.1064, 0.2267, 0.6209),
}


def main():
    rng = np.random.default_rng(0)
    print(f"{'regime':<10} {'sim mean':>9} {'law mean':>9} "
          f"{'sim std':>8} {'law std':>8}")
    for name, th in REGIMES.items():
        start = stationary_sample(th, 400, rng)
        paths = simulate_hour(th, start, n_steps=120, rng=rng, substeps=20)
        alpha, beta = stationary_beta_shapes(th)
        mean = th.c + (th.d - th.c) * alpha / (alpha + beta)
        var = ((th.d - th.c) ** 2 * alpha * beta
               / ((alpha + beta) ** 2 * (alpha + beta + 1.0)))
        print(f"{name:<10} {paths.mean():9.4f} {mean:9.4f} "
              f"{paths.std():8.4f} {np.sqrt(var):8.4f}")


if __name__ == "__main__":
    main()
