"""Regenerate the pinned su(4) fixtures.

    python -m brachx.fixtures.generate [--out DIR]

Three decompositions share two targets: a Haar-random ``generic`` target and a
``near_identity`` one produced by the Type I decomposition from a state of
norm 0.3.  Each fixture stores

* ``x_unit``: an isotropic unit-norm state,
* ``x_bvp``: the least-cost solution of the generic target found by a
  Levenberg-Marquardt multi-start with the start radius set to
  ``||Log(target)||``.
"""
from __future__ import annotations

import argparse
from pathlib import Path

import numpy as np

from ..bvp import BvpProblem, random_target, solve_multistart
from ..decomposition import build_type_ab, centralizer_split, make_pseudo_cartan, make_random_ab
from ..dynamics import final_unitary
from ..io import atomic_write_text, child_rng, dumps_json, matrix_to_json
from . import HERE

CHAOTIC_SEED = 1
TARGET_SEED = 0
NEAR_IDENTITY_NORM = 0.3
SOLVE = dict(optimizer_budget=1000, n_starts=20, seed=0, method="lm")


def su4_decompositions():
    pc = make_pseudo_cartan(4, 3)
    p_hat = np.zeros((4, 4), complex)
    p_hat[0, 3] = p_hat[3, 0] = 1.0
    return {
        "chaotic_su4": (make_random_ab(4, 6, CHAOTIC_SEED), {"construction": "random", "seed": CHAOTIC_SEED}),
        "type1_su4": (pc.type1(), {"construction": "pseudo_cartan_type1", "n": 4, "k": 3}),
        "type2_su4": (build_type_ab(centralizer_split(pc, p_hat, 3)),
                      {"construction": "centralizer_type2", "n": 4, "k": 3, "p_hat": "E03+E30", "q": 3}),
    }


def _unit(dim: int, rng) -> np.ndarray:
    v = rng.standard_normal(dim)
    return v / np.linalg.norm(v)


def build(out: Path = HERE, log=print) -> dict:
    decs = su4_decompositions()
    generic = random_target(4, TARGET_SEED)
    t1 = decs["type1_su4"][0]
    xt = NEAR_IDENTITY_NORM * _unit(t1.dim, child_rng(TARGET_SEED, 1))
    near = final_unitary(t1, xt)
    written = {}
    for k, (name, (dec, params)) in enumerate(decs.items()):
        forward = "type1" if dec.kind == "type1" else "ode"
        prob = BvpProblem(dec, generic, forward=forward, **SOLVE)
        res = solve_multistart(prob)
        best = res.brachistochrone()
        if best is None:
            raise RuntimeError(f"{name}: no start solved the generic target")
        log(f"{name}: {np.sum(res.final_costs < 1e-6)}/{len(res.final_costs)} solved, "
            f"|a| = {np.linalg.norm(best.x[:dec.dim_a]):.4f}, C = {best.cost:.2e}")
        data = {
            "name": name,
            "decomposition": dec.to_json(),
            "params": {**params, "target_seed": TARGET_SEED, "near_identity_norm": NEAR_IDENTITY_NORM,
                       "solve": {**SOLVE, "start_norm": prob.start_norm, "forward": forward},
                       "x_bvp_cost": best.cost},
            "states": {"x_unit": _unit(dec.dim, child_rng(TARGET_SEED, 2, k)).tolist(),
                       "x_bvp": best.x.tolist()},
            "targets": {"generic": matrix_to_json(generic), "near_identity": matrix_to_json(near)},
        }
        path = Path(out) / f"{name}.json"
        atomic_write_text(path, dumps_json(data))
        written[name] = path
    return written


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--out", type=Path, default=HERE)
    args = ap.parse_args(argv)
    for name, path in build(args.out).items():
        print(name, "->", path)


if __name__ == "__main__":
    main()
