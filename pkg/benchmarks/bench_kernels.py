"""Timing comparison of the numba kernels against the numpy fallback.

The backend is frozen at import time, so each flavour runs in its own
subprocess. Usage:

    python benchmarks/bench_kernels.py            # compare both
    SUPPALIGN_BACKEND=numpy python benchmarks/bench_kernels.py --worker
"""

from __future__ import annotations

import argparse
import json
import os
import subprocess
import sys
import time


def _bench_worker() -> dict:
    import numpy as np

    from suppalign import backend, imd, kernels

    rng = np.random.default_rng(0)
    a = rng.normal(size=(512, 8))
    b = rng.normal(size=(512, 8))
    ya = rng.integers(0, 3, size=512)
    yb = rng.integers(0, 3, size=512)
    va = rng.normal(size=4096)
    vb = rng.normal(size=4096)
    inst = imd.random_imd_instance(np.random.default_rng(5), m=6, n_classes=2)

    cases = {
        "nearest_dists_512x8": lambda: kernels.nearest_dists(a, b),
        "nearest_dists_labeled_512x8": lambda: kernels.nearest_dists_labeled(
            a, ya, b, yb, 100.0
        ),
        "pairwise_dists_512x8": lambda: kernels.pairwise_dists(a, b),
        "nearest_abs_diff_4096": lambda: kernels.nearest_abs_diff(va, vb),
        "grid_oracle_m6_step02": lambda: imd.grid_imd_value(inst, step=0.02),
    }

    out = {"backend": backend.BACKEND, "timings_ms": {}}
    for name, fn in cases.items():
        fn()  # warmup; triggers jit compilation under numba
        reps = 3 if name.startswith("grid") else 20
        t0 = time.perf_counter()
        for _ in range(reps):
            fn()
        out["timings_ms"][name] = 1e3 * (time.perf_counter() - t0) / reps
    return out


def main() -> int:
    parser = argparse.ArgumentParser()
    parser.add_argument("--worker", action="store_true")
    args = parser.parse_args()

    if args.worker:
        print(json.dumps(_bench_worker()))
        return 0

    results = {}
    for flavour in ("numpy", "numba"):
        env = dict(os.environ, SUPPALIGN_BACKEND=flavour)
        proc = subprocess.run(
            [sys.executable, __file__, "--worker"],
            env=env, capture_output=True, text=True,
        )
        if proc.returncode != 0:
            print(f"{flavour} worker failed:\n{proc.stderr}", file=sys.stderr)
            continue
        results[flavour] = json.loads(proc.stdout.strip().splitlines()[-1])

    if not results:
        return 1
    names = sorted(next(iter(results.values()))["timings_ms"])
    width = max(len(n) for n in names)
    header = f"{'kernel'.ljust(width)}  " + "  ".join(
        f"{fl:>12}" for fl in results
    ) + "  speedup"
    print(header)
    print("-" * len(header))
    for n in names:
        row = [f"{results[fl]['timings_ms'][n]:10.3f}ms" for fl in results]
        spd = ""
        if "numpy" in results and "numba" in results:
            t_np = results["numpy"]["timings_ms"][n]
            t_nb = results["numba"]["timings_ms"][n]
            spd = f"{t_np / t_nb:7.1f}x" if t_nb > 0 else "    inf"
        print(f"{n.ljust(width)}  " + "  ".join(row) + f"  {spd}")
    return 0


if __name__ == "__main__":
    sys.exit(main())
