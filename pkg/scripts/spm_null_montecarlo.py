"""Family-wise false-positive rate of the one-sample SPM t test on smooth Gaussian null fields."""
import argparse
import math

import numpy as np
from scipy.ndimage import gaussian_filter1d

from hdepose.evalspm import spm_one_sample_t


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("--sims", type=int, default=5000)
    ap.add_argument("--k", type=int, default=16)
    ap.add_argument("--nodes", type=int, default=100)
    ap.add_argument("--fwhm", type=float, nargs="+", default=[5.0, 10.0, 20.0, 40.0])
    ap.add_argument("--alpha", type=float, default=0.05)
    ap.add_argument("--seed", type=int, default=0)
    a = ap.parse_args()
    rng = np.random.default_rng(a.seed)
    for fwhm in a.fwhm:
        sigma = fwhm / math.sqrt(8 * math.log(2))
        pad = int(4 * sigma) + 1
        hits = 0
        for _ in range(a.sims):
            D = gaussian_filter1d(rng.standard_normal((a.nodes + 2 * pad, a.k)), sigma, axis=0)[pad:pad + a.nodes]
            r = spm_one_sample_t(D, a.alpha)
            hits += bool(r.t_series.max() > r.t_crit)
        p = hits / a.sims
        se = math.sqrt(p * (1 - p) / a.sims)
        print(f"FWHM {fwhm:5.1f}: FWE {p:.4f} +- {se:.4f}  (nominal {a.alpha})")


if __name__ == "__main__":
    main()
