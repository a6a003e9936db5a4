"""Compare the compiled and pure-Python kernels on representative workloads.

    python benchmarks/bench_kernels.py [--repeat 5]

Workloads:

* ``dopri5``: one divergence chunk (reference plus 25 perturbed su(4) states)
  integrated over [0, 1] at tol 1e-10, the inner loop of every stability run;
* ``dopri5+U``: a single BVP forward map, the state with its unitary fused into
  the Runge-Kutta vector;
* ``propagate``: 2048 geometric steps of a 4x4 unitary product.

Both backends must agree to rounding; the script checks this before timing.
"""
from __future__ import annotations

import argparse
import time

import numpy as np

from brachx._core import BACKENDS
from brachx.dynamics import unitary_field_terms
from brachx.fixtures import load_fixture
from brachx.io import child_rng


def _dopri(be, terms, X0, t_eval):
    qk, qi, qj, qv = terms
    y, _, _, nfev, status, _ = be.dopri5(qk, qi, qj, qv, None, X0, 0.0, 1.0, t_eval, 1e-10, 1e-10,
                                         200000, False, 0.0)
    assert status == 0
    return np.asarray(y)


def workloads():
    fx = load_fixture("chaotic_su4")
    dec = fx.dec
    x0 = fx.states["x_bvp"]
    rng = child_rng(0, 1)
    D = rng.standard_normal((25, dec.dim))
    D *= 1e-6 * np.linalg.norm(x0) / np.linalg.norm(D, axis=1, keepdims=True)
    chunk = np.ascontiguousarray(np.vstack([x0, x0 + D]))
    grid = np.linspace(0.0, 1.0, 51)

    n = dec.n
    Z0 = np.zeros((1, dec.dim + 2 * n * n))
    Z0[0, : dec.dim] = x0
    Z0[0, dec.dim : dec.dim + n * n] = np.eye(n).ravel()
    uterms = unitary_field_terms(dec)

    steps = 2048
    G = dec.hamiltonian(rng.standard_normal((steps, 1, dec.dim_a)) * 1e-3)
    U0 = np.eye(n, dtype=complex)[None]
    record = np.zeros(steps + 1, bool)
    record[::64] = True

    return {
        "dopri5": lambda be: _dopri(be, dec.field_terms, chunk, grid),
        "dopri5+U": lambda be: _dopri(be, uterms, Z0, np.array([0.0, 1.0])),
        "propagate": lambda be: np.asarray(be.propagate(np.ascontiguousarray(G), U0, record)),
    }


def best_time(fn, repeat: int) -> float:
    ts = []
    for _ in range(repeat):
        t0 = time.perf_counter()
        fn()
        ts.append(time.perf_counter() - t0)
    return min(ts)


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--repeat", type=int, default=5)
    args = ap.parse_args(argv)
    if "compiled" not in BACKENDS:
        raise SystemExit("compiled kernels not built; run `pip install -e . --no-build-isolation`")
    py, cc = BACKENDS["python"], BACKENDS["compiled"]
    print(f"{'workload':<12}{'python [s]':>12}{'compiled [s]':>14}{'speedup':>10}{'max diff':>11}")
    for name, fn in workloads().items():
        diff = float(np.max(np.abs(fn(py) - fn(cc))))
        tp = best_time(lambda: fn(py), args.repeat)
        tc = best_time(lambda: fn(cc), args.repeat)
        print(f"{name:<12}{tp:>12.4f}{tc:>14.4f}{tp / tc:>10.1f}{diff:>11.1e}")


if __name__ == "__main__":
    main()
