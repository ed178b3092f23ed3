"""Time the numba kernels against their numpy twins.

Run as a script:

    python3 benchmarks/bench_kernels.py [--repeats 200] [--batch 64]

Shapes mirror the deep-RL configurations actually used (belief widths
121/230/280 into 300x100 and 200x75 trunks).  The numba column is absent
when numba is not installed.
"""

from __future__ import annotations

import argparse
import time

import numpy as np

from dialbench import accel

SHAPES = [
    ("CR 121-300-100", 121, 300, 100, 14),
    ("SFR 230-300-100", 230, 300, 100, 23),
    ("LAP 280-300-100", 280, 300, 100, 38),
    ("A2C 230-200-75", 230, 200, 75, 24),
]


def make_net(rng, d_in, h1, h2, d_out):
    return (rng.normal(size=(d_in, h1)) / np.sqrt(d_in),
            np.zeros(h1),
            rng.normal(size=(h1, h2)) / np.sqrt(h1),
            np.zeros(h2),
            rng.normal(size=(h2, d_out)) / np.sqrt(h2),
            np.zeros(d_out))


def bench(fn, repeats):
    fn()  # warm-up; also triggers jit compilation
    start = time.perf_counter()
    for _ in range(repeats):
        fn()
    return (time.perf_counter() - start) / repeats


def run(repeats: int, batch: int) -> None:
    rng = np.random.default_rng(0)
    header = f"{'kernel':34s} {'numpy':>12s}"
    if accel.HAS_NUMBA:
        header += f" {'numba':>12s} {'speedup':>8s}"
    print(header)

    def report(label, np_fn, nb_fn):
        t_np = bench(np_fn, repeats)
        line = f"{label:34s} {t_np * 1e6:10.1f}us"
        if nb_fn is not None:
            t_nb = bench(nb_fn, repeats)
            line += f" {t_nb * 1e6:10.1f}us {t_np / t_nb:7.2f}x"
        print(line)

    for label, d_in, h1, h2, d_out in SHAPES:
        w1, b1, w2, b2, w3, b3 = make_net(rng, d_in, h1, h2, d_out)
        x = rng.normal(size=(batch, d_in))
        g = rng.normal(size=(batch, d_out))

        def fwd(fn):
            return lambda: fn(w1, b1, w2, b2, w3, b3, x)

        hh1, hh2, _ = accel.net2_forward_np(w1, b1, w2, b2, w3, b3, x)

        def bwd(fn):
            return lambda: fn(w2, w3, x, hh1, hh2, g)

        report(f"forward  {label}", fwd(accel.net2_forward_np),
               fwd(accel.net2_forward_nb) if accel.HAS_NUMBA else None)
        report(f"backward {label}", bwd(accel.net2_backward_np),
               bwd(accel.net2_backward_nb) if accel.HAS_NUMBA else None)

    n = 121 * 300 + 300 * 100 + 100 * 14
    param = rng.normal(size=n)
    grad = rng.normal(size=n)
    m = np.zeros(n)
    v = np.zeros(n)

    def adam(fn):
        return lambda: fn(param, grad, m, v, 0.001, 0.9, 0.999, 1e-8, 3)

    report(f"adam     {n} params", adam(accel.adam_update_np),
           adam(accel.adam_update_nb) if accel.HAS_NUMBA else None)


def main() -> None:
    parser = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    parser.add_argument("--repeats", type=int, default=200)
    parser.add_argument("--batch", type=int, default=64)
    args = parser.parse_args()
    run(args.repeats, args.batch)


if __name__ == "__main__":
    main()
