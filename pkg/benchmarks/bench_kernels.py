"""Compare the compiled and pure-Python integrator kernels on one vehicle of the reference track.

    python3 benchmarks/bench_kernels.py [--repeat N]
"""

import argparse
import timeit

import numpy as np

from platoonlat import _kernels_py
from platoonlat.control import reference_gains
from platoonlat.model import LINCOLN_MKZ
from platoonlat.path import default_track
from platoonlat.sim import closed_loop_system, rk4_affine

try:
    from platoonlat import _kernels
except ImportError:
    _kernels = None


def workload(step=0.01):
    path = default_track(step)
    gains = reference_gains()
    A, b_w, b_k = closed_loop_system(LINCOLN_MKZ, gains)
    phi, g0, gm, g1 = rk4_affine(A, step)
    kappa = path.curvature(np.arange(2 * int(round(path.length / step)) + 1) * (step / 2))
    f = np.outer(gains.k_ff * kappa, b_w) + np.outer(kappa, b_k)
    g = np.ascontiguousarray(f[0:-1:2] @ g0.T + f[1::2] @ gm.T + f[2::2] @ g1.T)
    return np.ascontiguousarray(phi), g, np.zeros(4)


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--repeat", type=int, default=5)
    args = ap.parse_args()
    phi, g, x0 = workload()
    print(f"steps per vehicle: {len(g)}")
    ref, _ = _kernels_py.affine_recursion(phi, g, x0, 1e3)
    t_py = min(timeit.repeat(lambda: _kernels_py.affine_recursion(phi, g, x0, 1e3), number=1, repeat=args.repeat))
    print(f"python : {t_py * 1e3:9.2f} ms")
    if _kernels is None:
        print("cython : extension not built")
        return
    out, _ = _kernels.affine_recursion(phi, g, x0, 1e3)
    t_cy = min(timeit.repeat(lambda: _kernels.affine_recursion(phi, g, x0, 1e3), number=1, repeat=args.repeat))
    print(f"cython : {t_cy * 1e3:9.2f} ms")
    print(f"speedup: {t_py / t_cy:9.1f}x")
    print(f"max |difference|: {np.max(np.abs(out - ref)):.3e}")


if __name__ == "__main__":
    main()
