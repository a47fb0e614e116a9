"""Compare the compiled and pure-Python kernels, then time a full ferry run with each.

    python benchmarks/bench_kernels.py [--repeat 5]
"""

from __future__ import annotations

import argparse
import importlib
import os
import subprocess
import sys
import timeit
from array import array

from dmcis import _kernels_py
from dmcis.engine import Rng


def _arrays(n_points: int, n_events: int, seed: int = 7):
    rng = Rng(seed)

    def col(n, lo, hi):
        return array("d", [lo + (hi - lo) * rng.uniform() for _ in range(n)])

    pts = (col(n_points, 0, 5000), col(n_points, 0, 5000))
    ev = (col(n_events, 0, 5000), col(n_events, 0, 5000), col(n_events, 100, 900), col(n_events, 1, 10))
    return pts, ev


def bench_kernels(repeat: int) -> None:
    try:
        ext = importlib.import_module("dmcis._ext._kernels")
    except ImportError:
        print("compiled extension not built; only the Python backend is available")
        ext = None
    backends = [("python", _kernels_py)] + ([("cython", ext)] if ext else [])

    cases = [
        ("field_intensities 1000x8", "field", 1000, 8),
        ("field_intensities 5000x32", "field", 5000, 32),
        ("in_range_mask 16x40", "range", 16, 40),
        ("in_range_mask 200x400", "range", 200, 400),
    ]
    print(f"{'case':<28}{'backend':<9}{'best ms':>10}{'speedup':>10}")
    for label, kind, a, b in cases:
        if kind == "field":
            (xs, ys), ev = _arrays(a, b)
            args = (xs, ys) + ev
            fn = "field_intensities"
        else:
            (mx, my), _ = _arrays(a, 0, seed=3)
            (sx, sy), _ = _arrays(b, 0, seed=4)
            args = (mx, my, array("d", [250.0] * a), sx, sy, array("d", [150.0] * b))
            fn = "in_range_mask"
        ref = None
        base = None
        for name, mod in backends:
            f = getattr(mod, fn)
            out = f(*args)
            if ref is None:
                ref = out
            elif out != ref:
                raise SystemExit(f"{label}: backends disagree")
            loops = 5
            best = min(timeit.repeat(lambda: f(*args), number=loops, repeat=repeat)) / loops
            base = base or best
            print(f"{label:<28}{name:<9}{best * 1e3:>10.3f}{base / best:>9.1f}x")


def bench_run(repeat: int) -> None:
    code = (
        "import time; from dmcis import parse_scenario, Simulation, BACKEND; "
        "from dmcis.generate import benchmark_ferry; s = parse_scenario(benchmark_ferry(8)); "
        f"best = min((lambda t0: (Simulation(s).run(), time.perf_counter() - t0)[1])(time.perf_counter()) "
        f"for _ in range({repeat})); print(BACKEND, round(best * 1e3, 1))"
    )
    print("\nfull run, benchmark ferry with 8 MAPs (best ms)")
    for flag in ("0", "1"):
        env = dict(os.environ, DMCIS_PURE_PYTHON=flag)
        out = subprocess.run([sys.executable, "-c", code], env=env, capture_output=True, text=True, check=True)
        name, ms = out.stdout.split()
        print(f"  {name:<8}{ms:>10}")


def main() -> None:
    ap = argparse.ArgumentParser()
    ap.add_argument("--repeat", type=int, default=5)
    args = ap.parse_args()
    bench_kernels(args.repeat)
    bench_run(max(1, args.repeat // 2))


if __name__ == "__main__":
    main()
