"""Command-line entry point: ``brachx run`` and ``brachx figure``.

Every run writes its data files (CSV with a header row, JSON sidecars) into
the output directory, followed by ``manifest.json`` listing each file with its
sha256 digest.  Exit status: 0 success, 2 invalid input, 3 numerical failure.
"""
from __future__ import annotations

import argparse
import json
import os
import sys
import time
from pathlib import Path

import numpy as np

from . import __version__
from .bvp import BvpProblem, random_target, residual_cost, solve_multistart, type1_algebraic_solve
from .decomposition import (ABDecomposition, build_type_ab, centralizer_split, make_pseudo_cartan,
                            make_random_ab, verify_controllability)
from .dynamics import PhaseState, evolve_unitary, factorization_residual, final_unitary, integrate
from .fixtures import NAMES as FIXTURES, fixture_digest, load_fixture
from .integrable import TLSplit, euler_arnold_limit, su3_example_decomposition, type1_defect
from .io import atomic_write_text, child_rng, csv_text, digest_bytes, dumps_json, matrix_from_json, matrix_to_json
from .lie_algebra import gell_mann_basis
from .policy import BrachxError, InvalidArgument, load_policy
from .stability import (DivergenceRun, changepoint, divergence_E, f_measure, fit_exponent,
                        linear_through_origin, lyapunov_distribution, samples_csv, unitary_divergence_O)

KINDS = ("basis", "decomp-verify", "simulate", "solve", "solve-type1", "lyapunov", "lyapunov-dist",
         "divergence", "fmeasure", "euler-arnold-limit")
STOCHASTIC = {"solve", "solve-type1", "lyapunov", "lyapunov-dist", "divergence", "fmeasure",
              "euler-arnold-limit"}
SCALES = {
    "desk": {"n_perturbations": 200, "n_samples": 2500, "n_starts": 100, "f_samples": 500},
    "paper": {"n_perturbations": 2000, "n_samples": 25000, "n_starts": 1000, "f_samples": 5000},
}
F_D_NORM = 1e-3  # same absolute perturbation size for every protocol
EXIT_OK, EXIT_INVALID, EXIT_NUMERICAL = 0, 2, 3


class ConfigError(InvalidArgument):
    pass


def default_threads() -> int:
    try:
        return len(os.sched_getaffinity(0))
    except AttributeError:  # pragma: no cover
        return os.cpu_count() or 1


# ---------------------------------------------------------------- config resolution


def load_config(path) -> dict:
    text = Path(path).read_text()
    try:
        cfg = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ConfigError(f"{path}: invalid JSON at line {exc.lineno}, column {exc.colno}: {exc.msg}") from None
    if not isinstance(cfg, dict):
        raise ConfigError(f"{path}: top level must be an object")
    return cfg


def resolve_decomposition(spec) -> tuple[ABDecomposition, dict]:
    """Decomposition from a fixture name or a construction record; also returns provenance."""
    if isinstance(spec, str):
        spec = {"fixture": spec}
    if not isinstance(spec, dict):
        raise ConfigError("decomposition must be a fixture name or an object")
    if "fixture" in spec:
        name = spec["fixture"]
        if name not in FIXTURES:
            raise ConfigError(f"unknown fixture {name!r}; have {', '.join(FIXTURES)}")
        return load_fixture(name).dec, {"fixture": name, "digest": fixture_digest(name)}
    if "basis" in spec:
        dec = ABDecomposition.from_json(spec)
        return dec, {"inline_digest": digest_bytes(json.dumps(spec, sort_keys=True).encode())}
    kind = spec.get("type")
    try:
        if kind == "random":
            dec = make_random_ab(int(spec["n"]), int(spec["dim_a"]), int(spec["seed"]))
        elif kind == "pseudo_cartan":
            dec = make_pseudo_cartan(int(spec["n"]), int(spec["k"])).type1()
        elif kind == "centralizer":
            pc = make_pseudo_cartan(int(spec["n"]), int(spec["k"]))
            dec = build_type_ab(centralizer_split(pc, matrix_from_json(spec["p_hat"]), int(spec["q"])))
        elif kind == "su3_example":
            dec = su3_example_decomposition()
        else:
            raise ConfigError(f"unknown decomposition type {kind!r}; have random, pseudo_cartan, "
                              "centralizer, su3_example, or a fixture")
    except KeyError as exc:
        raise ConfigError(f"decomposition of type {kind!r} needs key {exc.args[0]!r}") from None
    return dec, {"construction": spec}


def resolve_state(spec, dec: ABDecomposition, fixture: str | None, seed) -> PhaseState:
    """Initial state from a coefficient list, a fixture key, or ``{"random_unit": true, "norm": r}``."""
    if spec is None:
        spec = "x_unit" if fixture else {"random_unit": True}
    if isinstance(spec, str):
        if fixture is None:
            raise ConfigError(f"state {spec!r} refers to a fixture but the decomposition is not one")
        fx = load_fixture(fixture)
        if spec not in fx.states:
            raise ConfigError(f"fixture {fixture} has states {sorted(fx.states)}, not {spec!r}")
        return fx.state(spec)
    if isinstance(spec, dict):
        norm = float(spec.get("norm", 1.0))
        if spec.get("random_unit"):
            if seed is None:
                raise ConfigError("a random state needs a seed")
            v = child_rng(seed, 7).standard_normal(dec.dim)
            return PhaseState.from_x(dec, norm * v / np.linalg.norm(v))
        if "x" in spec:
            return PhaseState.from_x(dec, norm * np.asarray(spec["x"], float))
        raise ConfigError("state object needs 'x' or 'random_unit'")
    x = np.asarray(spec, dtype=float)
    if x.shape != (dec.dim,):
        raise ConfigError(f"state needs {dec.dim} coefficients, got shape {x.shape}")
    return PhaseState.from_x(dec, x)


def resolve_target(spec, dec: ABDecomposition, fixture: str | None, seed) -> np.ndarray:
    if isinstance(spec, str):
        if fixture is None:
            raise ConfigError(f"target {spec!r} refers to a fixture but the decomposition is not one")
        fx = load_fixture(fixture)
        if spec not in fx.targets:
            raise ConfigError(f"fixture {fixture} has targets {sorted(fx.targets)}, not {spec!r}")
        return fx.target(spec)
    if isinstance(spec, dict) and spec.get("haar"):
        return random_target(dec.n, int(spec.get("seed", seed if seed is not None else 0)))
    if isinstance(spec, dict) and "state" in spec:
        st = resolve_state(spec["state"], dec, fixture, seed)
        return final_unitary(dec, st.x)
    if isinstance(spec, dict) and "re" in spec:
        return matrix_from_json(spec)
    raise ConfigError("target must be a fixture key, a matrix record, {'haar': true} or {'state': ...}")


# ---------------------------------------------------------------- experiments


class Outputs:
    """Collects files for one run directory; nothing is written until ``flush``."""

    def __init__(self, out: Path):
        self.out = Path(out)
        self.files: dict[str, str] = {}

    def text(self, name: str, content: str):
        self.files[name] = content

    def json(self, name: str, obj):
        self.files[name] = dumps_json(obj)

    def flush(self, manifest: dict):
        entries = []
        for name, content in self.files.items():
            atomic_write_text(self.out / name, content)
            entries.append({"path": name, "sha256": digest_bytes(content.encode()),
                            "bytes": len(content.encode())})
        manifest["outputs"] = entries
        atomic_write_text(self.out / "manifest.json", dumps_json(manifest))


def _p(params: dict, key: str, default=None, cast=None):
    v = params.get(key, default)
    if v is None:
        raise ConfigError(f"missing required parameter {key!r}")
    return cast(v) if cast else v


def exp_basis(params, seed, ctx, out: Outputs):
    n = _p(params, "n", ctx.get("n"), int)
    if n < 2:
        raise ConfigError("n must be >= 2")
    basis = gell_mann_basis(n)
    out.json("basis.json", {**basis.to_json(), "dim": basis.dim,
                            "matrices": [matrix_to_json(g) for g in basis.elements]})


def _dec(params, ctx):
    spec = params.get("decomposition", ctx.get("decomposition"))
    if spec is None:
        raise ConfigError("missing required parameter 'decomposition'")
    dec, prov = resolve_decomposition(spec)
    return dec, prov, prov.get("fixture")


def exp_decomp_verify(params, seed, ctx, out: Outputs):
    dec, prov, _ = _dec(params, ctx)
    F = dec.frame
    report = {
        "provenance": prov, "kind": dec.kind, "n": dec.n, "dim_a": dec.dim_a, "dim_b": dec.dim_b,
        "orthonormality_residual": float(np.max(np.abs(F @ F.T - np.eye(dec.dim)))),
        "controllable": bool(verify_controllability(dec)),
        "type1_defect": float(type1_defect(dec)),
    }
    out.json("verify.json", report)


def exp_simulate(params, seed, ctx, out: Outputs):
    dec, prov, fx = _dec(params, ctx)
    st = resolve_state(params.get("x0"), dec, fx, seed)
    traj = integrate(st, float(params.get("t_end", 1.0)), ctx["tol"],
                     n_samples=int(params.get("n_samples", 101)))
    summary = {"provenance": prov, "x0": st.x.tolist()}
    if params.get("unitaries", False):
        traj = evolve_unitary(traj)
        summary["factorization_residual"] = float(np.max(factorization_residual(traj)))
        out.json("unitaries.json", traj.unitaries_json())
    summary["drifts"] = traj.drifts()
    out.text("trajectory.csv", traj.to_csv())
    out.json("summary.json", summary)


def _bvp_problem(params, seed, ctx):
    dec, prov, fx = _dec(params, ctx)
    target = resolve_target(params.get("target", "generic" if fx else None), dec, fx, seed)
    return dec, prov, target


def exp_solve(params, seed, ctx, out: Outputs):
    dec, prov, target = _bvp_problem(params, seed, ctx)
    prob = BvpProblem(dec, target, integration_tol=ctx["tol"],
                      optimizer_budget=int(params.get("budget", 1000)),
                      n_starts=int(params.get("n_starts", ctx["scale"]["n_starts"])), seed=seed,
                      start_norm=params.get("start_norm"), method=params.get("method", "simplex"))
    res = solve_multistart(prob, ctx["threads"])
    out.text("costs.csv", res.costs_csv())
    out.json("result.json", {"provenance": prov, "start_norm": prob.start_norm, "method": prob.method,
                             "target": matrix_to_json(target), **res.to_json()})


def exp_solve_type1(params, seed, ctx, out: Outputs):
    dec, prov, target = _bvp_problem(params, seed, ctx)
    res = type1_algebraic_solve(target, dec, seed=seed,
                                n_starts=int(params.get("n_starts", ctx["scale"]["n_starts"])),
                                budget=int(params.get("budget", 4000)), start_norm=params.get("start_norm"),
                                workers=ctx["threads"])
    out.text("costs.csv", res.costs_csv())
    out.json("result.json", {"provenance": prov, "target": matrix_to_json(target), **res.to_json()})


def _run(params, seed, ctx):
    dec, prov, fx = _dec(params, ctx)
    st = resolve_state(params.get("x0"), dec, fx, seed)
    run = DivergenceRun(st, params.get("d_norm"),
                        int(params.get("n_perturbations", ctx["scale"]["n_perturbations"])),
                        np.linspace(0.0, 1.0, int(params.get("n_times", 51))), seed, ctx["tol"])
    return run, prov


def _fit_record(curve) -> dict:
    s, w, r2 = fit_exponent(curve.times, curve.mean)
    return {"exponent": s, "fit_window": list(w), "fit_r2": r2, "retained": curve.retained,
            "dropped": curve.dropped, "retention": curve.retention}


def exp_lyapunov(params, seed, ctx, out: Outputs):
    run, prov = _run(params, seed, ctx)
    E = divergence_E(run, ctx["threads"])
    out.text("divergence_E.csv", E.to_csv())
    out.json("fit.json", {"provenance": prov, "x0_norm": float(np.linalg.norm(run.x0.x)),
                          "d_norm": run.d_norm, **_fit_record(E)})


def exp_lyapunov_dist(params, seed, ctx, out: Outputs):
    dec, prov, _ = _dec(params, ctx)
    n = int(params.get("n_samples", ctx["scale"]["n_samples"]))
    samples = lyapunov_distribution(dec, n, seed, int(params.get("n_perturbations", 8)),
                                    tol=ctx["tol"], workers=ctx["threads"])
    ex = np.array([s.exponent for s in samples])
    out.text("exponents.csv", samples_csv(samples))
    out.json("summary.json", {"provenance": prov, "n_samples": n, "mean": float(ex.mean()),
                              "median": float(np.median(ex)), "std": float(ex.std()),
                              "dropped": int(sum(s.dropped for s in samples))})


def _finite(v):
    # JSON has no infinity; "never" is recorded as null
    return float(v) if np.isfinite(v) else None


def _divergence_summary(run, E, O) -> dict:
    fit = _fit_record(E)
    c, r2 = linear_through_origin(O.times, O.mean)
    return {**fit, "O_initial_slope": c, "O_initial_r2": r2,
            "O_changepoint": _finite(changepoint(O.times, O.mean)),
            "inverse_exponent": 1.0 / fit["exponent"] if fit["exponent"] > 0 else None,
            "O_retained": O.retained, "O_dropped": O.dropped,
            "O_branch_excluded": int(O.excluded.max()) if O.excluded.size else 0,
            "x0_norm": float(np.linalg.norm(run.x0.x)), "d_norm": run.d_norm}


def exp_divergence(params, seed, ctx, out: Outputs):
    run, prov = _run(params, seed, ctx)
    E = divergence_E(run, ctx["threads"])
    O = unitary_divergence_O(run, ctx["threads"])
    out.text("divergence_E.csv", E.to_csv())
    out.text("divergence_O.csv", O.to_csv())
    out.json("summary.json", {"provenance": prov, **_divergence_summary(run, E, O)})


def exp_fmeasure(params, seed, ctx, out: Outputs):
    dec, prov, fx = _dec(params, ctx)
    st = resolve_state(params.get("x0"), dec, fx, seed)
    U0 = (resolve_target(params["target"], dec, fx, seed) if "target" in params
          else final_unitary(dec, st.x, ctx["tol"]))
    d_norm = float(params.get("d_norm", F_D_NORM))
    res = f_measure(U0, st, d_norm, int(params.get("n_samples", ctx["scale"]["f_samples"])), seed,
                    ctx["tol"], ctx["threads"])
    out.text("log_F.csv", res.to_csv())
    out.json("summary.json", {"provenance": prov, "d_norm": d_norm, "median": res.median,
                              "iqr": list(res.iqr), "control_cost": res.control, "dropped": res.dropped,
                              "branch_excluded": res.excluded})


def exp_euler_arnold(params, seed, ctx, out: Outputs):
    n, k, q = int(params.get("n", 4)), int(params.get("k", 3)), int(params.get("q", 3))
    pc = make_pseudo_cartan(n, k)
    if "p_hat" in params:
        p_hat = matrix_from_json(params["p_hat"])
    else:
        p_hat = np.zeros((n, n), complex)
        p_hat[0, n - 1] = p_hat[n - 1, 0] = 1.0
    cs = centralizer_split(pc, p_hat, q)
    x = child_rng(seed, 11).standard_normal(pc.basis.dim)
    tl = TLSplit(x[list(pc.l_indices)], x[list(pc.p_indices)])
    eps = [float(e) for e in params.get("epsilons", [1e-1, 5e-2, 2e-2, 1e-2, 5e-3])]
    dev = euler_arnold_limit(cs, tl, eps, float(params.get("t_end", 1.0)), min(ctx["tol"], 1e-12))
    out.text("deviation.csv", csv_text(["epsilon", "deviation"], [[e, dev[e]] for e in eps]))
    out.json("summary.json", {"n": n, "k": k, "q": q, "eigenvalues": cs.eigenvalues.tolist(),
                              "p_hat": matrix_to_json(p_hat)})


EXPERIMENTS = {
    "basis": exp_basis, "decomp-verify": exp_decomp_verify, "simulate": exp_simulate,
    "solve": exp_solve, "solve-type1": exp_solve_type1, "lyapunov": exp_lyapunov,
    "lyapunov-dist": exp_lyapunov_dist, "divergence": exp_divergence, "fmeasure": exp_fmeasure,
    "euler-arnold-limit": exp_euler_arnold,
}


# ---------------------------------------------------------------- figures


def figure_1(seed, ctx, out: Outputs):
    """E(t) and O(t) for the Type I, Type II and chaotic fixtures at their generic-target solutions."""
    protos = [("type1", "type1_su4"), ("type2", "type2_su4"), ("chaotic", "chaotic_su4")]
    P = ctx["scale"]["n_perturbations"]
    curves, fits = {}, {}
    for label, name in protos:
        st = load_fixture(name).state("x_bvp")
        run = DivergenceRun(st, None, P, np.linspace(0.0, 1.0, 51), seed, ctx["tol"])
        E = divergence_E(run, ctx["threads"])
        O = unitary_divergence_O(run, ctx["threads"])
        curves[label] = (E, O)
        fits[label] = {"fixture": name, "digest": fixture_digest(name), **_divergence_summary(run, E, O)}
    t = curves["type1"][0].times
    for m, j in (("E", 0), ("O", 1)):
        header = ["t"] + [f"{c}_{label}" for label, _ in protos for c in (f"mean_{m}", f"mean_log_{m}")]
        rows = [[t[i]] + [v for label, _ in protos
                          for v in (curves[label][j].mean[i], curves[label][j].log_mean[i])]
                for i in range(len(t))]
        out.text(f"fig1_{m}.csv", csv_text(header, rows))
    out.json("fig1_fits.json", fits)


def figure_2(seed, ctx, out: Outputs):
    """Exponent distribution of isotropic unit-norm states on the chaotic fixture."""
    n = ctx["scale"]["n_samples"]
    samples = lyapunov_distribution(load_fixture("chaotic_su4").dec, n, seed, 8, tol=ctx["tol"],
                                    workers=ctx["threads"])
    out.text("fig2_exponents.csv", samples_csv(samples))
    ex = np.array([s.exponent for s in samples])
    out.json("fig2_summary.json", {"n_samples": n, "median": float(np.median(ex)), "mean": float(ex.mean()),
                                   "fixture_digest": fixture_digest("chaotic_su4")})


def figure_3(seed, ctx, out: Outputs):
    """log F on the Type I and chaotic fixtures: (a) unit-norm states, (b) generic-target solutions."""
    n = ctx["scale"]["f_samples"]
    d_norm = F_D_NORM
    summary = {}
    for panel, key in (("a", "x_unit"), ("b", "x_bvp")):
        cols = {}
        for label, name in (("type1", "type1_su4"), ("chaotic", "chaotic_su4")):
            fx = load_fixture(name)
            st = fx.state(key)
            U0 = final_unitary(fx.dec, st.x, ctx["tol"]) if key == "x_unit" else fx.target("generic")
            res = f_measure(U0, st, d_norm, n, seed, ctx["tol"], ctx["threads"])
            cols[label] = res
            summary[f"{panel}_{label}"] = {"median": res.median, "iqr": list(res.iqr), "d_norm": d_norm,
                                           "x0_norm": float(np.linalg.norm(st.x)),
                                           "dropped": res.dropped, "branch_excluded": res.excluded}
        rows = _align(cols)
        out.text(f"fig3_{panel}.csv", csv_text(["index", "log_F_type1", "log_F_chaotic"], rows))
    out.json("fig3_summary.json", summary)


def _align(cols: dict) -> list:
    a, b = cols["type1"], cols["chaotic"]
    ma = dict(zip(a.indices.tolist(), a.log_F))
    mb = dict(zip(b.indices.tolist(), b.log_F))
    idx = sorted(set(ma) | set(mb))
    return [[i, ma.get(i, float("nan")), mb.get(i, float("nan"))] for i in idx]


def figure_4(seed, ctx, out: Outputs):
    """Terminal BVP costs for the near-identity target on the Type I and chaotic fixtures."""
    n = ctx["scale"]["n_starts"]
    res = {}
    for label, name in (("type1", "type1_su4"), ("chaotic", "chaotic_su4")):
        fx = load_fixture(name)
        prob = BvpProblem(fx.dec, fx.target("near_identity"), integration_tol=ctx["tol"],
                          optimizer_budget=1000, n_starts=n, seed=seed, method="lm")
        res[label] = solve_multistart(prob, ctx["threads"])
    rows = [[i, res["type1"].final_costs[i], res["chaotic"].final_costs[i]] for i in range(n)]
    out.text("fig4_costs.csv", csv_text(["start", "cost_type1", "cost_chaotic"], rows))
    out.json("fig4_summary.json", {
        label: {"success_fraction": r.success_fraction(), "median_cost": float(np.median(r.final_costs)),
                "evaluations": int(r.evaluations_used.sum())} for label, r in res.items()})


FIGURES = {1: figure_1, 2: figure_2, 3: figure_3, 4: figure_4}


# ---------------------------------------------------------------- driver


def _manifest(config: dict, ctx: dict, policy, wall: float) -> dict:
    return {"config": config, "tool": {"name": "brachx", "version": __version__},
            "numeric_policy": policy.to_dict(), "threads": ctx["threads"], "wall_time_s": wall}


def _execute(fn, config: dict, seed, ctx: dict, out_dir: Path, params: dict | None = None) -> int:
    t0 = time.perf_counter()
    out = Outputs(out_dir)
    if params is None:
        fn(seed, ctx, out)
    else:
        fn(params, seed, ctx, out)
    out.flush(_manifest(config, ctx, ctx["policy"], time.perf_counter() - t0))
    return EXIT_OK


def cmd_run(args) -> int:
    cfg = load_config(args.config) if args.config else {}
    kind = args.kind or cfg.get("kind")
    if kind not in KINDS:
        raise ConfigError(f"unknown or missing kind {kind!r}; valid kinds: {', '.join(KINDS)}")
    params = dict(cfg.get("parameters", {}))
    seed = args.seed if args.seed is not None else cfg.get("seed")
    if kind in STOCHASTIC and seed is None:
        raise ConfigError(f"kind {kind!r} is stochastic and needs a seed")
    if seed is not None and (not isinstance(seed, int) or isinstance(seed, bool)):
        raise ConfigError("seed must be an integer")
    out_dir = Path(args.out or cfg.get("output_dir") or f"brachx-{kind}")
    ctx = _context(args, cfg)
    if args.n is not None:
        ctx["n"] = args.n
    config = {"kind": kind, "seed": seed, "parameters": params, "output_dir": str(out_dir),
              "scale": ctx["scale_name"], "tol": ctx["tol"]}
    return _execute(EXPERIMENTS[kind], config, seed, ctx, out_dir, params)


def cmd_figure(args) -> int:
    ctx = _context(args, {})
    out_dir = Path(args.out or f"figure{args.figure}-{ctx['scale_name']}")
    config = {"figure": args.figure, "seed": args.seed, "scale": ctx["scale_name"], "tol": ctx["tol"],
              "output_dir": str(out_dir)}
    return _execute(FIGURES[args.figure], config, args.seed, ctx, out_dir)


def _context(args, cfg) -> dict:
    scale = args.scale or cfg.get("scale", "desk")
    if scale not in SCALES:
        raise ConfigError(f"unknown scale {scale!r}; have {', '.join(SCALES)}")
    tol = float(args.tol if args.tol is not None else cfg.get("tol", 1e-10))
    if not 0 < tol < 1:
        raise ConfigError("tol must lie in (0, 1)")
    threads = args.threads if args.threads is not None else default_threads()
    if threads < 1:
        raise ConfigError("threads must be >= 1")
    return {"scale": SCALES[scale], "scale_name": scale, "tol": tol, "threads": threads,
            "policy": load_policy()}


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="brachx", description="Quantum brachistochrone experiments on SU(n).")
    sub = ap.add_subparsers(dest="command", required=True)

    def common(p):
        p.add_argument("--threads", type=int, default=None, help="worker processes (default: available CPUs)")
        p.add_argument("--scale", choices=tuple(SCALES), default=None)
        p.add_argument("--out", default=None, help="output directory")
        p.add_argument("--tol", type=float, default=None, help="integration tolerance (default 1e-10)")

    r = sub.add_parser("run", help="run one experiment from a config file and/or flags")
    r.add_argument("config_path", nargs="?", default=None, help="experiment config (JSON)")
    r.add_argument("--config", dest="config_flag", default=None)
    r.add_argument("--kind", choices=KINDS, default=None)
    r.add_argument("--n", type=int, default=None)
    r.add_argument("--seed", type=int, default=None)
    common(r)
    r.set_defaults(func=cmd_run)

    f = sub.add_parser("figure", help="reproduce one figure's data on the pinned su(4) fixtures")
    f.add_argument("figure", type=int, choices=sorted(FIGURES))
    f.add_argument("--seed", type=int, default=0)
    common(f)
    f.set_defaults(func=cmd_figure)
    return ap


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    if args.command == "run":
        args.config = args.config_flag or args.config_path
    try:
        return args.func(args)
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INVALID
    except InvalidArgument as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INVALID
    except BrachxError as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL


if __name__ == "__main__":
    sys.exit(main())
