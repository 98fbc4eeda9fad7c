"""Wall time of the compiled adaptive kernel against the numpy stepper.

Both backends produce bitwise identical trajectories, so the comparison is
purely about speed. Usage::

    python benchmarks/bench_kernels.py [--pair aprime] [--atol 1e-8] [--repeat 3]
"""

import argparse
import statistics
import time

import numpy as np

from fsalpairs.integrate import ControllerConfig, compiled_available, integrate_adaptive
from fsalpairs.library import builtin
from fsalpairs.problems import PROBLEMS, problem


def best_time(pair, prob, cfg, backend, repeat):
    times, stats = [], None
    for _ in range(repeat):
        start = time.perf_counter()
        stats = integrate_adaptive(pair, prob.system, prob.t0, prob.tend, prob.x0, cfg,
                                   record=False, backend=backend)
        times.append(time.perf_counter() - start)
    return min(times), statistics.median(times), stats


def main(argv=None):
    parser = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    parser.add_argument("--pair", default="aprime")
    parser.add_argument("--atol", type=float, default=1e-8)
    parser.add_argument("--repeat", type=int, default=3)
    args = parser.parse_args(argv)
    if not compiled_available():
        raise SystemExit("compiled kernel unavailable; build the extension first")
    pair, cfg = builtin(args.pair), ControllerConfig(atol=args.atol)
    print(f"pair {pair.name}, atol {args.atol:g}, best of {args.repeat}")
    print(f"{'problem':<8}{'n_rhs':>9}{'python s':>12}{'compiled s':>12}{'speedup':>10}  identical")
    for pid in PROBLEMS:
        prob = problem(pid)
        t_py, _, st_py = best_time(pair, prob, cfg, "python", args.repeat)
        t_c, _, st_c = best_time(pair, prob, cfg, "compiled", args.repeat)
        same = st_py.n_rhs == st_c.n_rhs and np.array_equal(st_py.x_end, st_c.x_end)
        print(f"{pid:<8}{st_c.n_rhs:>9}{t_py:>12.4f}{t_c:>12.5f}{t_py / t_c:>10.1f}  {same}")


if __name__ == "__main__":
    main()
