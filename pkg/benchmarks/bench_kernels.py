"""Compare the numba and numpy top-k kernels.

Times ``topk_rows`` / ``topk_mean`` on score blocks of the shape the
retrieval code feeds them, then one full lexicon induction per backend.

    python3 benchmarks/bench_kernels.py --vocab 20000 --block 1024
"""
import argparse
import time

import numpy as np

from mwalign import kernels
from mwalign.mat import MappingSet
from mwalign.mpsr import induce_lexicon
from mwalign.synthetic import generate_family


def best_of(fn, repeat):
    times = []
    for _ in range(repeat):
        t0 = time.perf_counter()
        fn()
        times.append(time.perf_counter() - t0)
    return min(times)


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("--vocab", type=int, default=20000)
    ap.add_argument("--block", type=int, default=1024)
    ap.add_argument("--dim", type=int, default=64)
    ap.add_argument("--repeat", type=int, default=5)
    args = ap.parse_args()

    scores = np.random.default_rng(0).standard_normal((args.block, args.vocab))
    fam = generate_family(2, args.vocab, args.dim, 0.05, seed=0, rotation_scale=0.2)
    eye = MappingSet.identity(fam.langs, 0, args.dim)
    backends = ["numpy"] + (["numba"] if kernels._accel.HAVE_NUMBA else [])

    print(f"block {args.block} x vocab {args.vocab}, best of {args.repeat}")
    print(f"{'kernel':<22}" + "".join(f"{b:>12}" for b in backends))
    rows = {
        "topk_rows k=1": lambda: kernels.topk_rows(scores, 1),
        "topk_rows k=10": lambda: kernels.topk_rows(scores, 10),
        "topk_mean k=10": lambda: kernels.topk_mean(scores, 10),
        "induce_lexicon": lambda: induce_lexicon(fam.spaces[0], fam.spaces[1], eye.maps[0], eye.maps[1],
                                                 cutoff=args.vocab),
    }
    results = {}
    for b in backends:
        kernels.use_numba(b == "numba")
        for fn in rows.values():
            fn()    # warm-up, includes jit compilation
        results[b] = {name: best_of(fn, args.repeat) for name, fn in rows.items()}
    for name in rows:
        line = f"{name:<22}" + "".join(f"{results[b][name] * 1e3:>10.1f}ms" for b in backends)
        if len(backends) == 2:
            line += f"   x{results['numpy'][name] / results['numba'][name]:.1f}"
        print(line)


if __name__ == "__main__":
    main()
