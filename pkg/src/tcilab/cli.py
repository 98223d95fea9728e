"""Reproducible experiment driver.

Usage:
    tcilab run <config.json> [--out DIR] [--seed N]
    tcilab suite <manifest.json> [--out DIR] [--jobs N]
    tcilab list-kinds

A config is a JSON document {"kind": ..., "seed": ..., "params": {...}}.
Reports are a JSON summary plus CSV detail tables, written atomically;
identical configs produce byte-identical reports (floats are normalized to
15 significant digits and nothing time- or host-dependent is embedded).

Exit status: 0 all verdicts pass, 1 a verdict failed, 2 schema violation,
3 numerical error from the originating module.
"""

from __future__ import annotations

import argparse
import csv
import json
import math
import os
import sys
from concurrent.futures import ThreadPoolExecutor

import numpy as np

from . import pathspace as ps
from . import tensorize as tz
from .dynamics import (BoundSpec, MarkovChainSampler, SdeSpec, SimConfig,
                       coupling_decay, euler_maruyama, path_stream,
                       tail_vs_bound, time_average_functional)
from .errors import CapacityError, SchemaError
from .spaces import (DiscreteMeasure, FiniteMetricSpace, LipschitzFunction,
                     PathGrid)
from .tci import (T1EstimatorConfig, check_tp, estimate_t1_constant, tilt_family)
from .transport import (DUALITY_TOL, MARGINAL_TOL, kl_divergence,
                        total_variation, wasserstein_exact)

KINDS = ("transport_check", "tp_verify", "t1_estimate", "tensorize_check",
         "dynamics_tail", "coupling_decay", "spectrum", "pathspace_check")

# one-line statement of the claim each experiment kind checks
CLAIMS = {
    "transport_check": "primal transport cost equals the dual potential value "
                       "(strong duality certificate)",
    "tp_verify": "W_p(mu, nu) <= sqrt(2 C H(nu/mu)) across the candidate family",
    "t1_estimate": "squared-distance exponential moments upper-bound the "
                   "L1 transport-entropy constant",
    "tensorize_check": "exact W_p <= stepwise coupling cost <= "
                       "(1/(1-r)) sqrt(2 C n^(2/p-1) H) for dependent sequences",
    "dynamics_tail": "empirical exceedance frequencies stay below the "
                     "sub-Gaussian concentration bound",
    "coupling_decay": "synchronous coupling gap decays below |x - y|^2 exp(-2 delta t)",
    "spectrum": "top covariance eigenvalue dominates its Rayleigh quotient indicator",
    "pathspace_check": "path-space quadratic transport constants and their "
                       "functional consequences hold",
}


def _sig15(x):
    """Normalize floats to 15 significant digits for reproducible reports."""
    if isinstance(x, float):
        return float(f"{x:.15g}") if math.isfinite(x) else x
    if isinstance(x, dict):
        return {k: _sig15(v) for k, v in x.items()}
    if isinstance(x, (list, tuple)):
        return [_sig15(v) for v in x]
    if isinstance(x, (np.floating,)):
        return _sig15(float(x))
    if isinstance(x, (np.bool_,)):
        return bool(x)
    if isinstance(x, (np.integer,)):
        return int(x)
    if isinstance(x, np.ndarray):
        return _sig15(x.tolist())
    return x


def _atomic_write(path, text: str):
    tmp = f"{path}.tmp"
    with open(tmp, "w") as fh:
        fh.write(text)
    os.replace(tmp, path)


def _write_json(path, doc):
    _atomic_write(path, json.dumps(_sig15(doc), indent=2, sort_keys=True) + "\n")


def _write_csv(path, header, rows):
    lines = [",".join(header)]
    for row in rows:
        lines.append(",".join(
            f"{v:.15g}" if isinstance(v, float) else str(v) for v in row))
    _atomic_write(path, "\n".join(lines) + "\n")


def _require(params: dict, *keys):
    for key in keys:
        if key not in params:
            raise SchemaError(f"missing required parameter {key!r}")


# ---------------------------------------------------------------------------
# experiment kinds


def _space_from(params, key="space") -> FiniteMetricSpace:
    doc = params[key]
    if doc == "two_point_trivial":
        return FiniteMetricSpace.trivial()
    return FiniteMetricSpace.from_json(doc)


def _run_transport_check(params: dict, seed: int):
    tables = {}
    if "random_instances" in params:
        count = int(params["random_instances"])
        max_points = int(params.get("max_points", 8))
        p = float(params.get("p", 1.0))
        rng = path_stream(seed, 0)
        rows = []
        ok = True
        for i in range(count):
            m = int(rng.integers(2, max_points + 1))
            pts = rng.uniform(0.0, 1.0, size=(m, 2))
            dist = np.linalg.norm(pts[:, None, :] - pts[None, :, :], axis=2)
            np.fill_diagonal(dist, 0.0)
            space = FiniteMetricSpace(range(m), dist)
            mu = DiscreteMeasure(space, rng.dirichlet(np.ones(m)))
            nu = DiscreteMeasure(space, rng.dirichlet(np.ones(m)))
            value, plan = wasserstein_exact(mu, nu, space, p)
            gap = abs(plan.cost - plan.dual_value(mu.weights, nu.weights))
            marg = max(np.max(np.abs(plan.matrix.sum(1) - mu.weights)),
                       np.max(np.abs(plan.matrix.sum(0) - nu.weights)))
            good = gap <= DUALITY_TOL and marg <= MARGINAL_TOL
            ok = ok and good
            rows.append([i, m, float(value), float(gap), float(marg), good])
        tables["instances"] = (["instance", "points", "value", "duality_gap",
                                "marginal_dev", "ok"], rows)
        return {"instances": count, "all_certified": ok}, ok, tables

    _require(params, "space", "mu", "nu")
    space = _space_from(params)
    mu = DiscreteMeasure(space, params["mu"])
    nu = DiscreteMeasure(space, params["nu"])
    p = float(params.get("p", 1.0))
    value, plan = wasserstein_exact(mu, nu, space, p)
    gap = abs(plan.cost - plan.dual_value(mu.weights, nu.weights))
    result = {
        "p": p, "wasserstein": value, "lp_cost": plan.cost, "duality_gap": gap,
        "kl_nu_mu": kl_divergence(nu, mu), "total_variation": total_variation(mu, nu),
    }
    trivial = np.array_equal(space.dist, np.ones_like(space.dist) - np.eye(len(space)))
    verdict = gap <= DUALITY_TOL
    if trivial and p == 1.0:
        tv_identity = abs(2.0 * value - result["total_variation"])
        result["trivial_metric_tv_identity_dev"] = tv_identity
        verdict = verdict and tv_identity <= 1e-9
    rows, cols = np.nonzero(plan.matrix > 0)
    tables["plan"] = (["source_index", "target_index", "mass"],
                      [[int(i), int(j), float(plan.matrix[i, j])]
                       for i, j in zip(rows, cols)])
    return result, verdict, tables


def _run_tp_verify(params: dict, seed: int):
    _require(params, "space", "mu", "C")
    space = _space_from(params)
    mu = DiscreteMeasure(space, params["mu"])
    p = float(params.get("p", 1.0))
    C = float(params["C"])
    spec = params.get("candidates", {})
    candidates = []
    if "bernoulli_grid" in spec:
        if len(space) != 2:
            raise SchemaError("bernoulli_grid needs a two-point space")
        grid = spec["bernoulli_grid"]
        qs = np.linspace(grid.get("start", 0.01), grid.get("stop", 0.99),
                         int(grid.get("num", 99)))
        candidates += [DiscreteMeasure(space, [1.0 - q, q]) for q in qs]
    if "tilt" in spec:
        f = LipschitzFunction(space, spec["tilt"]["f"])
        candidates += tilt_family(mu, f, spec["tilt"]["lambdas"])
    for weights in spec.get("explicit", []):
        candidates.append(DiscreteMeasure(space, weights))
    cert = check_tp(mu, candidates, space, p, C)
    tables = {"witnesses": (
        ["index", "wp", "entropy", "ratio"],
        [[i, w.wp, w.entropy if math.isfinite(w.entropy) else "inf",
          "" if w.ratio is None else w.ratio]
         for i, w in enumerate(cert.witnesses)])}
    return cert.to_json(), cert.passed, tables


def _run_t1_estimate(params: dict, seed: int):
    _require(params, "delta", "mode")
    cfg = T1EstimatorConfig(delta=float(params["delta"]),
                            k_max=int(params.get("k_max", 50)), seed=seed)
    if params["mode"] == "analytic":
        _require(params, "moment")
        est = estimate_t1_constant(float(params["moment"]), cfg)
    elif params["mode"] == "mc":
        if params.get("sampler", "gaussian_pairs") != "gaussian_pairs":
            raise SchemaError("only the gaussian_pairs sampler is available")
        dim = int(params.get("dim", 1))
        pairs = int(params.get("pairs", 10**6))
        rng = path_stream(seed, 0)
        gaps = rng.standard_normal((pairs, dim)) - rng.standard_normal((pairs, dim))
        est = estimate_t1_constant(np.linalg.norm(gaps, axis=1), cfg)
    else:
        raise SchemaError("mode must be 'analytic' or 'mc'")
    result = {"estimate": est.value, "sup_k": est.sup_k, "moment": est.moment,
              "stderr": est.stderr}
    verdict = math.isfinite(est.value)
    if "expect" in params:
        target = float(params["expect"])
        if est.stderr is not None:
            verdict = verdict and abs(est.value - target) <= 3.0 * est.stderr
        else:
            verdict = verdict and abs(est.value - target) <= float(
                params.get("atol", 1e-9))
        result["expect"] = target
    tables = {"terms": (["k", "term"],
                        [[k + 1, float(t)] for k, t in enumerate(est.terms)])}
    return result, verdict, tables


def _run_tensorize_check(params: dict, seed: int):
    _require(params, "P", "C")
    P = tz.SequentialModel.from_json(params["P"])
    p = float(params.get("p", 1.0))
    C = float(params["C"])
    profile = tz.backward_coefficients(P, p)
    factor = tz.tensorized_constant(C, profile.r, P.n, p)   # raises if r >= 1
    result = {"r": profile.r, "a": profile.a.tolist(), "bound_factor": factor,
              "martingale_constant": None, "forward_S": None}
    checks = []
    if P.n >= 2:
        delta = float(params.get("delta", tz.default_weight_delta(profile.r)))
        z = tz.weight_vector(profile.a, P.n, delta)
        za = np.array([float(np.dot(z[k + 1:], profile.a[:P.n - 1 - k]))
                       for k in range(P.n)])
        checks.append(bool(np.all(za <= delta * z)))
        result["weight_vector"] = z.tolist()
        result["weight_delta"] = delta
    try:
        S = tz.forward_coefficient(P)
        result["forward_S"] = S
        result["martingale_constant"] = tz.martingale_constant(C, S, P.n)
    except CapacityError:
        pass    # future spaces beyond the desk-scale cap; not a failure
    tables = {}
    if "Q" in params:
        Q = tz.SequentialModel.from_json(params["Q"])
        _, total = tz.entropy_chain_rule(Q, P)
        joint_q = tz.joint_weights(Q)
        joint_p = tz.joint_weights(P)
        direct = kl_divergence(joint_q, joint_p)
        chain_dev = abs(total - direct) if math.isfinite(total) else 0.0
        checks.append(chain_dev <= 1e-10)
        coupling, cost = tz.marton_coupling(P, Q, p)
        exact, _ = wasserstein_exact(tz.joint_law(Q, p), tz.joint_law(P, p), p=p)
        bound = factor * math.sqrt(total) if math.isfinite(total) else math.inf
        checks.append(exact <= cost + 1e-12)
        checks.append(cost <= bound + 1e-12)
        marg_dev = max(
            float(np.max(np.abs(coupling.sum(axis=1) - joint_q))),
            float(np.max(np.abs(coupling.sum(axis=0) - joint_p))))
        checks.append(marg_dev <= 1e-10)
        result.update({"entropy": total, "chain_rule_dev": chain_dev,
                       "marton_cost": cost, "exact_wp": exact, "bound": bound,
                       "coupling_marginal_dev": marg_dev})
        tables["inequality"] = (["exact_wp", "marton_cost", "bound"],
                                [[exact, cost, bound]])
    verdict = all(checks) if checks else True
    return result, verdict, tables


def _sde_from(doc: dict) -> SdeSpec:
    if doc["kind"] == "ou":
        return SdeSpec.ornstein_uhlenbeck(theta=float(doc.get("theta", 0.5)),
                                          sigma=float(doc.get("sigma", 1.0)),
                                          dim=int(doc.get("dim", 1)))
    if doc["kind"] == "linear":
        return SdeSpec.linear_drift(np.asarray(doc["A"], dtype=float),
                                    sigma=float(doc.get("sigma", 1.0)))
    raise SchemaError(f"unknown sde kind {doc['kind']!r}")


def _run_dynamics_tail(params: dict, seed: int):
    _require(params, "generator", "bound", "r_values", "n_paths")
    gen_doc = params["generator"]
    bound = BoundSpec(kind=params["bound"]["kind"], params=params["bound"]["params"],
                      r_values=tuple(params["r_values"]))
    if gen_doc["kind"] == "markov_chain":
        sampler = MarkovChainSampler(
            start=np.asarray(gen_doc["start"], dtype=float),
            kernel=np.asarray(gen_doc["kernel"], dtype=float),
            n_steps=int(gen_doc["n_steps"]))
        state = int(params.get("functional", {}).get("state", 1))
        functional = lambda states: np.sum(states == state, axis=1).astype(float)
        cfg = SimConfig(dt=1.0, horizon=float(gen_doc["n_steps"]),
                        n_paths=int(params["n_paths"]), seed=seed)
        report = tail_vs_bound(functional, sampler, cfg, bound)
    elif gen_doc["kind"] in ("ou", "linear"):
        sde = _sde_from(gen_doc)
        cfg = SimConfig(dt=float(params.get("dt", 0.01)),
                        horizon=float(params["horizon"]),
                        n_paths=int(params["n_paths"]), seed=seed)
        functional = time_average_functional(
            lambda paths: paths[:, :, 0],
            normalize=params.get("functional", {}).get("normalize", True))
        report = tail_vs_bound(functional, sde, cfg, bound)
    else:
        raise SchemaError(f"unknown generator kind {gen_doc['kind']!r}")
    rows = [[row.r, row.empirical, row.bound, row.ci_low, row.ci_high,
             "pass" if row.passed else "fail"] +
            ([row.bound_alt] if row.bound_alt is not None else [])
            for row in report.rows]
    header = ["r", "empirical", "bound", "ci_low", "ci_high", "verdict"]
    if report.rows and report.rows[0].bound_alt is not None:
        header.append("bound_alt_transposed_exponent")
    result = {"mean_value": report.mean_value, "n_paths": report.n_paths,
              "rows": [dict(zip(header, row)) for row in rows]}
    return result, report.passed, {"tails": (header, rows)}


def _run_coupling_decay(params: dict, seed: int):
    _require(params, "sde", "x", "x_tilde", "horizon")
    sde = _sde_from(params["sde"])
    cfg = SimConfig(dt=float(params.get("dt", 0.01)), horizon=float(params["horizon"]),
                    n_paths=int(params.get("n_paths", 100)), seed=seed,
                    shared_noise=True)
    res = coupling_decay(sde, params["x"], params["x_tilde"], cfg)
    rows = [[float(t), float(c), float(s), float(b)]
            for t, c, s, b in zip(res.times, res.curve, res.stderr, res.bound)]
    result = {"passed": res.passed, "allowance": res.allowance,
              "final_gap_sq": float(res.curve[-1]), "final_bound": float(res.bound[-1])}
    return result, res.passed, {"curve": (["t", "gap_sq", "stderr", "bound"], rows)}


def _run_spectrum(params: dict, seed: int):
    _require(params, "kernel", "T", "N")
    kernel = ps.CovarianceKernel.by_name(params["kernel"], float(params["T"]))
    res = ps.operator_spectrum(kernel, int(params["N"]))
    verdict = res.lambda_max >= res.rayleigh_indicator - 1e-9
    doc = res.to_json()
    if "expect_lambda" in params:
        dev = abs(res.lambda_max - float(params["expect_lambda"]))
        doc["expect_dev"] = dev
        verdict = verdict and dev <= float(params.get("atol", 1e-3))
    if "lambda_cap" in params:
        verdict = verdict and res.lambda_max <= float(params["lambda_cap"])
    return doc, verdict, {"history": (["N", "lambda_max"],
                                      [[int(n), float(v)]
                                       for n, v in res.refinement_history])}


def _run_pathspace_check(params: dict, seed: int):
    T = float(params.get("T", 1.0))
    n_steps = int(params.get("n_steps", 1024))
    theta = float(params.get("theta", 0.5))
    sigma = float(params.get("sigma", 1.0))
    grid = PathGrid.uniform(T, n_steps)
    checks = {}

    a0 = ps.alpha_squared(1.0, 1.0, 0.0)
    a_neg = ps.alpha_squared(7.3, 1.0, -1.0)
    a_pos = ps.alpha_squared(1.0, 1.0, 1.0)
    checks["alpha_squared"] = (abs(a0 - 3.0) < 1e-12 and abs(a_neg - 4.0) < 1e-12
                               and abs(a_pos - (2.0 + math.e**2)) < 1e-12)

    ent = ps.girsanov_entropy(np.ones(n_steps + 1), PathGrid.uniform(1.0, n_steps))
    checks["girsanov_unit_drift"] = abs(ent - 0.5) < 1e-12

    h = np.sin(np.pi * grid.times / T)
    upper, lower = ps.shift_w2_certificate(h, grid)
    checks["shift_certificate"] = abs(upper - lower) <= 1e-12

    consts = ps.pathspace_t2_constants(sigma, theta, T, eps=theta)
    marginal = ps.GaussianMarginal(0.0, math.sqrt(sigma**2 / (2 * theta)
                                                  * (1 - math.exp(-2 * theta * T))))
    for name, g, gp in (("identity", lambda y: y, lambda y: np.ones_like(y)),
                        ("square", lambda y: y**2, lambda y: 2 * y),
                        ("sin", np.sin, np.cos)):
        res = ps.poincare_check(marginal, g, gp, consts.c_marginal)
        checks[f"poincare_{name}"] = res.passed

    n_paths = int(params.get("n_paths", 20000))
    sde = SdeSpec.ornstein_uhlenbeck(theta=theta, sigma=sigma, dim=1)
    cfg = SimConfig(dt=T / n_steps, horizon=T, n_paths=n_paths, seed=seed)
    ensemble = euler_maruyama(sde, np.zeros(1), cfg)
    rho = float(params.get("rho", 1.0 / consts.c_path))
    hvec = np.sin(np.pi * ensemble.times / T)
    ts_grid = PathGrid(ensemble.times)
    single = ps.tsirelson_check([hvec], ensemble.paths, ts_grid, rho)
    pair = ps.tsirelson_check([hvec, -hvec], ensemble.paths, ts_grid, rho)
    checks["tsirelson_singleton"] = single.passed
    checks["tsirelson_pair"] = pair.passed

    result = {"checks": checks, "c_path": consts.c_path,
              "c_marginal": consts.c_marginal,
              "tsirelson": {"singleton": [single.lhs, single.rhs],
                            "pair": [pair.lhs, pair.rhs]}}
    rows = [[name, "pass" if ok else "fail"] for name, ok in sorted(checks.items())]
    return result, all(checks.values()), {"checks": (["check", "verdict"], rows)}


_RUNNERS = {
    "transport_check": _run_transport_check,
    "tp_verify": _run_tp_verify,
    "t1_estimate": _run_t1_estimate,
    "tensorize_check": _run_tensorize_check,
    "dynamics_tail": _run_dynamics_tail,
    "coupling_decay": _run_coupling_decay,
    "spectrum": _run_spectrum,
    "pathspace_check": _run_pathspace_check,
}


# ---------------------------------------------------------------------------
# driver


def load_config(path) -> dict:
    try:
        with open(path) as fh:
            doc = json.load(fh)
    except (OSError, json.JSONDecodeError) as exc:
        raise SchemaError(f"cannot read config {path}: {exc}")
    validate_config(doc)
    return doc


def validate_config(doc: dict):
    if not isinstance(doc, dict):
        raise SchemaError("config must be a JSON object")
    kind = doc.get("kind")
    if kind not in KINDS:
        raise SchemaError(f"unrecognized kind {kind!r}; see list-kinds")
    if "seed" not in doc or not isinstance(doc["seed"], int) or doc["seed"] < 0:
        raise SchemaError("config must declare a nonnegative integer seed")
    if not isinstance(doc.get("params", {}), dict):
        raise SchemaError("params must be an object")


def run_config(doc: dict, name: str, out_dir: str, seed_override=None) -> dict:
    """Execute one experiment and write its report files.

    Returns the summary document (also written to ``<out_dir>/<name>.json``).
    """
    validate_config(doc)
    seed = doc["seed"] if seed_override is None else int(seed_override)
    kind = doc["kind"]
    result, verdict, tables = _RUNNERS[kind](doc.get("params", {}), seed)
    os.makedirs(out_dir, exist_ok=True)
    summary = {
        "name": name,
        "kind": kind,
        "claim": CLAIMS[kind],
        "seed": seed,
        "params": doc.get("params", {}),
        "result": result,
        "verdict": "pass" if verdict else "fail",
    }
    _write_json(os.path.join(out_dir, f"{name}.json"), summary)
    for table_name, (header, rows) in tables.items():
        _write_csv(os.path.join(out_dir, f"{name}__{table_name}.csv"), header, rows)
    return summary


def run_suite(manifest_path: str, out_dir: str, jobs: int = 1) -> tuple[dict, int]:
    """Run every experiment in a manifest and aggregate the verdicts."""
    with open(manifest_path) as fh:
        manifest = json.load(fh)
    entries = manifest["experiments"] if isinstance(manifest, dict) else manifest
    if not entries:
        raise SchemaError("manifest lists no experiments")
    base = os.path.dirname(os.path.abspath(manifest_path))

    def one(entry):
        path = entry if os.path.isabs(entry) else os.path.join(base, entry)
        name = os.path.splitext(os.path.basename(path))[0]
        try:
            doc = load_config(path)
            summary = run_config(doc, name, out_dir)
            return {"name": name, "kind": summary["kind"],
                    "claim": summary["claim"], "verdict": summary["verdict"]}
        except SchemaError as exc:
            return {"name": name, "verdict": "error", "error": f"schema: {exc}"}
        except Exception as exc:
            return {"name": name, "verdict": "error",
                    "error": f"{type(exc).__name__}: {exc}"}

    if jobs > 1:
        with ThreadPoolExecutor(max_workers=jobs) as pool:
            results = list(pool.map(one, entries))
    else:
        results = [one(entry) for entry in entries]

    errors = [r["name"] for r in results if r["verdict"] == "error"]
    failures = [r["name"] for r in results if r["verdict"] == "fail"]
    aggregate = {
        "experiments": results,
        "errors": errors,
        "failures": failures,
        "passed": not errors and not failures,
    }
    os.makedirs(out_dir, exist_ok=True)
    _write_json(os.path.join(out_dir, "suite.json"), aggregate)
    _write_csv(os.path.join(out_dir, "suite.csv"),
               ["name", "kind", "claim", "verdict"],
               [[r["name"], r.get("kind", ""), r.get("claim", ""), r["verdict"]]
                for r in results])
    code = 3 if errors else (0 if not failures else 1)
    return aggregate, code


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(prog="tcilab",
                                     description="transport-entropy inequality experiments")
    sub = parser.add_subparsers(dest="command", required=True)

    p_run = sub.add_parser("run", help="run a single experiment config")
    p_run.add_argument("config")
    p_run.add_argument("--out", default="reports")
    p_run.add_argument("--seed", type=int, default=None)

    p_suite = sub.add_parser("suite", help="run a manifest of experiments")
    p_suite.add_argument("manifest")
    p_suite.add_argument("--out", default="reports")
    p_suite.add_argument("--jobs", type=int, default=1)

    sub.add_parser("list-kinds", help="list recognized experiment kinds")

    args = parser.parse_args(argv)

    if args.command == "list-kinds":
        for kind in KINDS:
            print(f"{kind}: {CLAIMS[kind]}")
        return 0

    if args.command == "run":
        try:
            doc = load_config(args.config)
            name = os.path.splitext(os.path.basename(args.config))[0]
            summary = run_config(doc, name, args.out, seed_override=args.seed)
        except SchemaError as exc:
            print(f"schema error: {exc}", file=sys.stderr)
            return 2
        except Exception as exc:
            print(f"numerical error: {type(exc).__name__}: {exc}", file=sys.stderr)
            return 3
        print(f"{name}: {summary['verdict']}")
        return 0 if summary["verdict"] == "pass" else 1

    try:
        aggregate, code = run_suite(args.manifest, args.out, jobs=args.jobs)
    except SchemaError as exc:
        print(f"schema error: {exc}", file=sys.stderr)
        return 2
    for r in aggregate["experiments"]:
        print(f"{r['name']}: {r['verdict']}" + (f" ({r['error']})" if "error" in r else ""))
    if aggregate["errors"]:
        print("errors in: " + ", ".join(aggregate["errors"]), file=sys.stderr)
    return code


if __name__ == "__main__":
    sys.exit(main())
