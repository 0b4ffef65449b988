"""Time the compiled kernels against the numpy fallback.

    python benchmarks/bench_kernels.py [--repeat 3]
"""
import argparse
import timeit

import numpy as np

from roughlab.kernels import backends


def cases():
    r = np.random.default_rng(0)
    R, C = 2048, 1024
    k0 = r.integers(0, 2 ** 53, R, dtype=np.uint64)
    s0 = r.integers(0, 2 ** 63, R, dtype=np.uint64)
    y0 = r.random(R)
    X = np.cumsum(r.standard_normal((600, 2)), axis=0)
    M = r.standard_normal((600, 2, 2))
    Xt, Mt = X + 0.1, M * 0.9

    def doubling(mod):
        mod.doubling_chunk(k0.copy(), s0.copy(), np.empty((R, C)))

    def lsv(mod):
        mod.lsv_chunk(y0.copy(), s0.copy(), 0.25, np.empty((R, C)))

    yield f"doubling orbit {R}x{C}", doubling
    yield f"lsv orbit {R}x{C}", lsv
    yield "q-var level 1, N=600", lambda mod: mod.qvar_first(X, 2.5)
    yield "q-var level 2, N=600", lambda mod: mod.qvar_second(X, M, Xt, Mt, 1.25)


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--repeat", type=int, default=3)
    args = ap.parse_args()
    mods = backends()
    print(f"{'kernel':28s}" + "".join(f"{k:>12s}" for k in mods) + "     speedup")
    for name, fn in cases():
        t = {k: min(timeit.repeat(lambda: fn(m), number=1, repeat=args.repeat))
             for k, m in mods.items()}
        line = f"{name:28s}" + "".join(f"{v:11.4f}s" for v in t.values())
        if "compiled" in t:
            line += f"  {t['pure'] / t['compiled']:9.1f}x"
        print(line)


if __name__ == "__main__":
    main()
