"""Neighbour-difference variability along vs across the forearm on a synthetic grid recording."""
import argparse

import numpy as np

from hdepose.dataio import SynthConfig, default_mixing, generate_synthetic, grid_mixing
from hdepose.emgproc import ndv, ndv_compare, rms_envelope


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("--grid", type=int, nargs=2, default=[6, 16])
    ap.add_argument("--duration", type=float, default=30.0)
    ap.add_argument("--seed", type=int, default=9)
    a = ap.parse_args()
    grid = tuple(a.grid)
    n = grid[0] * grid[1]
    for name, mix in (("grid", grid_mixing(grid, np.random.default_rng(a.seed))),
                      ("sparse", default_mixing(n, np.random.default_rng(a.seed)))):
        d = generate_synthetic(SynthConfig(seed=a.seed, duration_s=a.duration, n_channels=n, grid=grid, mixing=mix))
        env, _ = rms_envelope(d.emg, 200, 25)
        r = ndv(env, grid, d.emg.channel_map)
        c = ndv_compare(r.proximo_distal, r.circumferential)
        print(f"{name:>6} mixing: median NDV pd {c.median_pd:.4f}, circ {c.median_circ:.4f}, "
              f"U {c.report.statistic:.0f}, p {c.report.p_value:.2e}")


if __name__ == "__main__":
    main()
