"""Time the compiled and numpy kernels on the same solitary-wave state.

    python3 benchmarks/bench_kernels.py --n 1024 4096 --steps 200
"""
from __future__ import annotations

import argparse
import timeit

import numpy as np

from twoch.backend import available
from twoch.dynamics import advance, rhs
from twoch.grid import Grid
from twoch.solitary import TrainSpec, train


def bench(n: int, steps: int, repeat: int) -> dict[str, tuple[float, float]]:
    g = Grid(n, 204.8)
    s = train(TrainSpec((2.0, 3.0), (-30.0, 10.0)), g)
    out = {}
    for name in available():
        rhs(s, backend=name)
        t_rhs = min(timeit.repeat(lambda: rhs(s, backend=name), number=50, repeat=repeat)) / 50
        t_adv = min(timeit.repeat(lambda: advance(s, 1e-3, steps, backend=name),
                                  number=1, repeat=repeat)) / steps
        out[name] = (t_rhs, t_adv)
    if len(out) == 2:
        a = advance(s, 1e-3, steps, backend="compiled")
        b = advance(s, 1e-3, steps, backend="python")
        diff = max(np.max(np.abs(a.u.values - b.u.values)), np.max(np.abs(a.eta.values - b.eta.values)))
        print(f"n={n}: compiled vs python after {steps} steps, max difference {diff:.1e}")
    return out


def main(argv: list[str] | None = None) -> None:
    p = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    p.add_argument("--n", type=int, nargs="+", default=[1024, 4096])
    p.add_argument("--steps", type=int, default=200)
    p.add_argument("--repeat", type=int, default=3)
    args = p.parse_args(argv)
    print(f"{'n':>6} {'backend':>9} {'rhs [ms]':>10} {'RK4 step [ms]':>14}")
    for n in args.n:
        res = bench(n, args.steps, args.repeat)
        for name, (tr, ta) in res.items():
            print(f"{n:6d} {name:>9} {1e3 * tr:10.3f} {1e3 * ta:14.3f}")
        if len(res) == 2:
            print(f"{'':6} {'speedup':>9} {res['python'][0] / res['compiled'][0]:9.2f}x"
                  f" {res['python'][1] / res['compiled'][1]:13.2f}x")


if __name__ == "__main__":
    main()
