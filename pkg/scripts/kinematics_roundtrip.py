"""FKA -> IKA round trip over random in-range poses; prints per-phase accuracy."""
import argparse
import time

import numpy as np

from hdepose.kinematics import default_skeleton, fka, ika
from hdepose.kinematics.skeleton import THUMB, WRIST


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("--n", type=int, default=2000)
    ap.add_argument("--seed", type=int, default=0)
    a = ap.parse_args()
    sk = default_skeleton()
    poses = sk.random_pose(np.random.default_rng(a.seed), a.n)
    t0 = time.perf_counter()
    errs, res = [], []
    for p, fr in zip(poses, fka(poses, sk)):
        r = ika(fr, sk)
        errs.append(np.abs(r.angles - p))
        res.append(r.per_phase_residual["fingers"])
    errs, res = np.array(errs), np.array(res)
    print(f"{a.n} poses in {time.perf_counter() - t0:.1f} s")
    print(f"wrist max |err| {errs[:, WRIST].max():.2e} rad, thumb {errs[:, THUMB].max():.2e} rad")
    print(f"finger marker residual {res.mean():.3f} +- {res.std():.3f} mm (p95 {np.percentile(res, 95):.3f})")


if __name__ == "__main__":
    main()
