"""Compare the compiled and numpy kernel backends.

    python3 benchmarks/bench_kernels.py [--repeat 5] [--json out.json]
"""

from __future__ import annotations

import argparse
import json
import sys
import timeit

import numpy as np

from risdfrc import kernels


def _crandn(rng, *shape):
    return (rng.standard_normal(shape) + 1j * rng.standard_normal(shape)) / np.sqrt(2)


def _cases(rng):
    nt, cols = 4, 4
    a = _crandn(rng, nt, nt)
    psi_inv = np.linalg.inv(a @ a.conj().T + nt * np.eye(nt))
    v = _crandn(rng, nt, nt)
    rhs = _crandn(rng, nt, cols)
    b0 = _crandn(rng, nt, cols)

    def inner(backend):
        b, x, y = b0.copy(), b0.copy(), v @ b0
        kernels.penalty_inner(psi_inv, rhs, v, b, x, y, 0.5, 40.0, 1.0, 1e-9, 30, 0.0, backend=backend)

    cases = {"penalty_inner (30 sweeps, N_t=4)": (inner, 200)}
    for L in (20, 40):
        xi = _crandn(rng, L, L)
        xi = xi @ xi.conj().T
        z = _crandn(rng, L)
        m = _crandn(rng, L, L)
        cands = np.exp(2j * np.pi * rng.random((L, 201)))
        cases[f"score_candidates (L={L}, 201 candidates)"] = (
            lambda be, xi=xi, z=z, m=m, c=cands: kernels.score_candidates(xi, z, m, c, backend=be), 200)
    return cases


def _bisect(backend):
    impl = kernels._select(backend)

    def run():
        for g in np.linspace(0.01, 0.99, 200):
            impl.bisect_mu(float(g), 1.0, 1e-12)
            impl.bisect_tau(1.0 / float(g), 1.0, 1e-12)

    return run


def main(argv=None) -> int:
    p = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    p.add_argument("--repeat", type=int, default=5)
    p.add_argument("--json", default=None)
    args = p.parse_args(argv)
    backends = kernels.available_backends()
    if "cython" not in backends:
        print("compiled kernels are not built; only the numpy backend is timed", file=sys.stderr)
    rng = np.random.default_rng(0)
    cases = _cases(rng)
    results = []
    for name, (fn, number) in cases.items():
        row = {"case": name}
        for be in backends:
            t = min(timeit.repeat(lambda: fn(be), number=number, repeat=args.repeat)) / number
            row[be] = t
        results.append(row)
    row = {"case": "bisect_mu + bisect_tau (400 calls)"}
    for be in backends:
        row[be] = min(timeit.repeat(_bisect(be), number=5, repeat=args.repeat)) / 5
    results.append(row)

    width = max(len(r["case"]) for r in results)
    head = f"{'case':<{width}}  " + "  ".join(f"{be:>12}" for be in backends)
    if len(backends) == 2:
        head += f"  {'speedup':>8}"
    print(head)
    for r in results:
        line = f"{r['case']:<{width}}  " + "  ".join(f"{r[be] * 1e6:10.1f}us" for be in backends)
        if len(backends) == 2:
            line += f"  {r['python'] / r['cython']:7.1f}x"
        print(line)
    if args.json:
        with open(args.json, "w") as fh:
            json.dump(results, fh, indent=2)
    return 0


if __name__ == "__main__":
    sys.exit(main())
