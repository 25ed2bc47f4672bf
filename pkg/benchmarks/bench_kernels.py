"""Compare the compiled kernels with the numpy fallback on the shipped network.

    python benchmarks/bench_kernels.py [--samples 100000] [--repeat 3]

Each kernel is timed with both implementations on identical inputs, and the
outputs are checked for equality before any timing is reported.
"""
import argparse
import timeit

import numpy as np

from netrel import _backend
from netrel.datasets import default_scenario
from netrel.rng import stream_key


def cases(samples: int):
    sc = default_scenario()
    g = sc.net.arrays
    probs = np.ascontiguousarray(sc.probs_at(7.5))
    key = stream_key(0, "topology", 0)
    graph = (g.indptr, g.nbr, g.lnk, g.link_u, g.link_v, g.source, g.terminal)
    states = _backend.fallback.sample_states(key, 0, samples, probs)
    return {
        f"sample_states ({samples} x {sc.net.n_links})":
            lambda k: k.sample_states(key, 0, samples, probs),
        f"connected_batch ({samples} realizations)":
            lambda k: k.connected_batch(states, *graph),
        f"sample_and_check ({samples} samples)":
            lambda k: k.sample_and_check(key, 0, samples, probs, *graph),
        f"enumerate_reliability (2^{sc.net.n_links} states)":
            lambda k: k.enumerate_reliability(probs, *graph),
    }


def main(argv=None) -> int:
    p = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    p.add_argument("--samples", type=int, default=100_000)
    p.add_argument("--repeat", type=int, default=3)
    args = p.parse_args(argv)
    compiled, fallback = _backend.compiled, _backend.fallback
    if compiled is None:
        print("compiled kernels are not built; nothing to compare")
        return 1
    print(f"{'kernel':<42} {'compiled s':>11} {'fallback s':>11} {'speedup':>8}")
    for name, run in cases(args.samples).items():
        a, b = run(compiled), run(fallback)
        if not np.array_equal(np.asarray(a), np.asarray(b)):
            print(f"{name}: outputs differ")
            return 1
        t_c = min(timeit.repeat(lambda: run(compiled), number=1, repeat=args.repeat))
        t_f = min(timeit.repeat(lambda: run(fallback), number=1, repeat=args.repeat))
        print(f"{name:<42} {t_c:>11.4f} {t_f:>11.4f} {t_f / t_c:>7.1f}x")
    return 0


if __name__ == "__main__":
    raise SystemExit(main())
