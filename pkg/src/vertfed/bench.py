"""Crypto microbenchmarks; `--compare` reruns them under both kernel
backends in subprocesses and prints the speedups side by side.
"""

import json
import os
import random
import subprocess
import sys
import time

import numpy as np


def _timeit(fn, repeat=3):
    best = float("inf")
    for _ in range(repeat):
        t0 = time.perf_counter()
        fn()
        best = min(best, time.perf_counter() - t0)
    return best


def run_suite(group_bits=48, table_bound=1 << 18, n_dlogs=256, dlog_span=10**9):
    from vertfed import backend, mife, sife
    from vertfed.groups import DlogSolver, DlogTable, group_gen

    ctx = group_gen(group_bits, seed=7)
    rnd = random.Random(11)
    results = {"backend": backend.ACTIVE, "group_bits": group_bits}

    results["table_build_s"] = _timeit(lambda: DlogTable.build(ctx, table_bound), repeat=1)
    table = DlogTable.build(ctx, table_bound)
    solver = DlogSolver(ctx, table)

    exps = [rnd.randrange(-dlog_span, dlog_span + 1) for _ in range(n_dlogs)]
    hs = [ctx.pow(ctx.g, e) for e in exps]
    solver.solve_many(hs[:4], dlog_span)  # warm the window cache / jit
    results["dlog_batch_s"] = _timeit(lambda: solver.solve_many(hs, dlog_span))
    results["dlog_per_query_ms"] = 1000.0 * results["dlog_batch_s"] / n_dlogs

    bases = np.array([ctx.g] * 4096, dtype=np.uint64) if ctx.fast else None
    if bases is not None:
        exps_arr = np.array(
            [rnd.randrange(ctx.q) for _ in range(4096)], dtype=np.uint64
        )
        results["powmod_4096_s"] = _timeit(
            lambda: backend.powmod_vec(bases, exps_arr, ctx.p)
        )

    msk = sife.setup(ctx, 16, rnd)
    xs = [rnd.randrange(-1024, 1025) for _ in range(16)]
    ys = [rnd.randrange(-1024, 1025) for _ in range(16)]
    key = sife.dkgen(msk, ys)

    def sife_round():
        ct = sife.encrypt(msk.public, xs, rnd)
        sife.decrypt(msk.public, ct, key, ys, 16 * 2**20, solver)

    results["sife_roundtrip_s"] = _timeit(sife_round)

    mk = mife.setup(ctx, [1] * 4, rnd)
    keys = [mife.skdist(mk, i + 1) for i in range(4)]
    yv = [1, 1, 1, 1]
    dk = mife.dkgen(mk, yv)

    def mife_round():
        cts = [mife.encrypt(k, [rnd.randrange(-1024, 1025)], rnd) for k in keys]
        mife.decrypt(mk.public, cts, dk, yv, 4 * 2**10, solver)

    results["mife_roundtrip_s"] = _timeit(mife_round)
    return results


def compare(**kwargs):
    """Run the suite under each backend in a fresh interpreter."""
    out = {}
    for name in ("numba", "numpy"):
        env = dict(os.environ, VERTFED_BACKEND=name)
        code = (
            "import json, sys; from vertfed.bench import run_suite; "
            f"print(json.dumps(run_suite(**{kwargs!r})))"
        )
        proc = subprocess.run(
            [sys.executable, "-c", code], env=env, capture_output=True, text=True
        )
        if proc.returncode != 0:
            raise RuntimeError(f"{name} benchmark failed:\n{proc.stderr}")
        out[name] = json.loads(proc.stdout.strip().splitlines()[-1])
    return out


def format_comparison(results):
    numba_r, numpy_r = results["numba"], results["numpy"]
    keys = [k for k, v in numba_r.items() if isinstance(v, float)]
    lines = [f"{'benchmark':<24}{'numba':>12}{'numpy':>12}{'speedup':>10}"]
    for k in keys:
        if k not in numpy_r:
            continue
        a, b = numba_r[k], numpy_r[k]
        ratio = b / a if a > 0 else float("inf")
        lines.append(f"{k:<24}{a:>12.5f}{b:>12.5f}{ratio:>9.1f}x")
    return "\n".join(lines)
