"""Time the compiled kernels against the pure-Python fallback.

    python benchmarks/bench_kernels.py [--repeat 5] [--json out.json]

Each kernel is run on identical inputs under every importable backend; the
table reports the best wall time over ``--repeat`` runs and the speedup of
the compiled core. Results are checked to agree before timing.
"""

import argparse
import json
import sys
import timeit

import numpy as np

from rcslab import _kernels
from rcslab.circuit import random_architecture
from rcslab.ensembles import haar_unitary


def _state_case(n, rng):
    psi = rng.standard_normal(2 ** n) + 1j * rng.standard_normal(2 ** n)
    return psi / np.linalg.norm(psi), haar_unitary(4, rng)


def _pathsum_case(n, m, rng):
    arch = random_architecture(n, m, rng)
    mats = [haar_unitary(2 ** len(s), rng) for s in arch.gate_slots]
    return mats, list(arch.gate_slots)


def cases(rng):
    psi, gate = _state_case(16, rng)
    mats, slots = _pathsum_case(3, 8, rng)
    q = 999999937
    M = [[int(v) for v in rng.integers(q, size=10)] for _ in range(10)]
    A = [[int(v) for v in rng.integers(q, size=40)] for _ in range(30)]
    Mc = rng.standard_normal((10, 10)) + 1j * rng.standard_normal((10, 10))
    return {
        "apply_gate (n=16, 2-qubit)": lambda k: k.apply_gate(psi.copy(), gate, (3, 11), 16),
        "pathsum_amplitude (n=3, m=8)": lambda k: k.pathsum_amplitude(mats, slots, 3, 0, 5),
        "permanent_mod (10x10, q~1e9)": lambda k: k.permanent_mod(M, q),
        "permanent_complex (10x10)": lambda k: k.permanent_complex(Mc),
        "rref_mod (30x40, q~1e9)": lambda k: k.rref_mod(A, q),
    }


def _same(a, b):
    if isinstance(a, tuple):
        return all(_same(x, y) for x, y in zip(a, b))
    a, b = np.asarray(a, dtype=object if isinstance(a, list) else None), np.asarray(b)
    if a.dtype.kind in "fc" or b.dtype.kind in "fc":
        return np.allclose(np.asarray(a, dtype=complex), np.asarray(b, dtype=complex), atol=1e-9)
    return np.array_equal(a, np.asarray(b, dtype=object))


def run(repeat):
    backends = _kernels.backends()
    rows = []
    for name, fn in cases(np.random.default_rng(0)).items():
        results = {b: fn(k) for b, k in backends.items()}
        first = next(iter(results.values()))
        if not all(_same(first, r) for r in results.values()):
            raise SystemExit(f"backends disagree on {name}")
        times = {}
        for b, k in backends.items():
            number = 1
            while timeit.timeit(lambda: fn(k), number=number) < 0.2 and number < 10_000:
                number *= 2
            times[b] = min(timeit.repeat(lambda: fn(k), number=number, repeat=repeat)) / number
        rows.append({"kernel": name, **{f"{b}_s": t for b, t in times.items()}})
    return rows


def main(argv=None):
    parser = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    parser.add_argument("--repeat", type=int, default=5)
    parser.add_argument("--json", default=None)
    args = parser.parse_args(argv)
    rows = run(args.repeat)
    if "cython_s" not in rows[0]:
        print("compiled core not built; timing the fallback only", file=sys.stderr)
    print(f"{'kernel':34s} {'python':>12s} {'cython':>12s} {'speedup':>9s}")
    for r in rows:
        py, cy = r["python_s"], r.get("cython_s")
        cy_txt = f"{cy * 1e3:10.3f}ms" if cy else f"{'-':>12s}"
        speed = f"{py / cy:8.1f}x" if cy else f"{'-':>9s}"
        print(f"{r['kernel']:34s} {py * 1e3:10.3f}ms {cy_txt} {speed}")
    if args.json:
        with open(args.json, "w") as fh:
            json.dump(rows, fh, indent=2)


if __name__ == "__main__":
    main()
