"""Time the numba kernels against their numpy fallbacks.

    python3 benchmarks/bench_kernels.py [--sizes 1000 100000] [--repeat 5]

Both paths are always available here regardless of FAME_DISABLE_JIT; the
flag only decides which one the package uses at runtime.
"""

import argparse
import timeit

import numpy as np

from fame._accel import HAVE_NUMBA
from fame.kernels import IMPLEMENTATIONS


def _inputs(n, rng):
    labels = (rng.random(n) < 0.5).astype(np.int64)
    scores = np.round(rng.normal(labels, 1.0), 2)
    order = np.argsort(scores, kind="stable")
    sorted_scores, sorted_labels = scores[order], labels[order]
    _, far, frr = IMPLEMENTATIONS["numpy"]["det_sweep"](sorted_scores, sorted_labels)
    m = max(8, int(np.sqrt(n)))
    emb = rng.normal(size=(m, 32))
    emb /= np.linalg.norm(emb, axis=1, keepdims=True)
    return {
        "det_sweep": (sorted_scores, sorted_labels),
        "eer_crossing": (far, frr),
        "pair_cosine_sums": (emb @ emb.T, rng.integers(0, 5, m)),
    }


def _max_rel_diff(a, b):
    # float sums are accumulated in a different order, so allow rounding-level drift
    if isinstance(a, tuple):
        return max(_max_rel_diff(x, y) for x, y in zip(a, b))
    a, b = np.asarray(a, dtype=float), np.asarray(b, dtype=float)
    equal = a == b  # covers the +inf threshold sentinel
    scale = np.maximum(np.maximum(np.abs(a), np.abs(b)), 1e-300)
    with np.errstate(invalid="ignore"):
        rel = np.abs(a - b) / scale
    return float(np.max(np.where(equal, 0.0, rel), initial=0.0))


def run(sizes, repeat=5, seed=0):
    rng = np.random.default_rng(seed)
    rows = []
    for n in sizes:
        inputs = _inputs(n, rng)
        for name, args in inputs.items():
            timings = {}
            outputs = {}
            for impl, table in IMPLEMENTATIONS.items():
                fn = table[name]
                outputs[impl] = fn(*args)  # warm-up, triggers compilation
                number = max(1, int(2e5 // n))
                timings[impl] = min(timeit.repeat(lambda: fn(*args), number=number, repeat=repeat)) / number
            rows.append((name, n, timings["numpy"], timings["jit"], _max_rel_diff(outputs["jit"], outputs["numpy"])))
    return rows


def main(argv=None):
    parser = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    parser.add_argument("--sizes", type=int, nargs="+", default=[1_000, 10_000, 100_000])
    parser.add_argument("--repeat", type=int, default=5)
    args = parser.parse_args(argv)
    if not HAVE_NUMBA:
        print("numba is not installed; both columns time the numpy path")
    print(f"{'kernel':<18}{'n':>9}{'numpy [ms]':>13}{'jit [ms]':>11}{'speedup':>9}  max rel diff")
    for name, n, t_np, t_jit, diff in run(args.sizes, args.repeat):
        print(f"{name:<18}{n:>9}{t_np * 1e3:>13.4f}{t_jit * 1e3:>11.4f}{t_np / t_jit:>8.1f}x  {diff:.1e}")


if __name__ == "__main__":
    main()
