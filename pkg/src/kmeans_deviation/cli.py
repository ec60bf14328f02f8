"""Command-line front end.

Subcommands: ``bound`` (sample-size calculators), ``moments`` (CSV moment
estimation), ``deviate``/``rate`` (deviation sweeps), ``counterexample``
(impossibility reproductions), ``verify`` (identity and constant checks).

Outputs are machine-readable: JSON summaries carry the full resolved
configuration (including defaulted values and the master seed); per-cell
records use a fixed CSV schema. Exit codes: 0 success, 1 usage error,
2 precondition violation, 3 internal invariant failure.
"""
from __future__ import annotations

import argparse
import json
import math
import sys
import traceback

import numpy as np

from . import bounds as B
from . import deviation as dev
from . import distributions as dist
from . import moments as mom
from ._rng import AUX, derive_seed
from .errors import InvariantViolationError, PreconditionError
from .quantization import expected_error, normalized_loss

_TIER_NAMES = {
    "kurtosis": "kurtosis",
    "moment": "moment",
    "subgaussian": "subgaussian",
    "bounded": "bounded-support",
    "framework": "generic-framework",
}


class _UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise _UsageError(message)


def _jsonify(obj):
    if isinstance(obj, dict):
        return {str(k): _jsonify(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonify(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return [_jsonify(v) for v in obj.tolist()]
    if isinstance(obj, (np.bool_, bool)):
        return bool(obj)
    if isinstance(obj, (np.floating, float)):
        return float(obj)
    if isinstance(obj, (np.integer, int)):
        return int(obj)
    return obj


def _emit(payload: dict, path):
    text = json.dumps(_jsonify(payload), indent=2, sort_keys=True) + "\n"
    if path in (None, "-"):
        sys.stdout.write(text)
    else:
        with open(path, "w", encoding="utf-8") as fh:
            fh.write(text)


def build_parser() -> _Parser:
    parser = _Parser(prog="kmdev", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)

    pb = sub.add_parser("bound", help="evaluate a sample-size bound")
    pb.add_argument("--tier", required=True, choices=sorted(_TIER_NAMES))
    pb.add_argument("--epsilon", type=float, required=True)
    pb.add_argument("--delta", type=float, required=True)
    pb.add_argument("--k", type=int, default=1)
    pb.add_argument("--d", type=int, default=1)
    pb.add_argument("--m4hat", type=float)
    pb.add_argument("--p", type=int)
    pb.add_argument("--mphat", type=float)
    pb.add_argument("--a", type=float)
    pb.add_argument("--b", type=float)
    pb.add_argument("--R", type=float)
    pb.add_argument("--sigma2", type=float)
    pb.add_argument("--t", type=float)
    pb.add_argument("--pdim", type=float)
    pb.add_argument("--output", default=None, help="JSON output path (default stdout)")

    pm = sub.add_parser("moments", help="estimate moments of a CSV sample")
    pm.add_argument("--input", required=True)
    pm.add_argument("--ps", default="", help="comma-separated moment orders, e.g. 4,8")
    pm.add_argument("--mu", default=None, help="optional centering override (comma floats)")
    pm.add_argument("--output", default=None)

    for name in ("deviate", "rate"):
        ps = sub.add_parser(name, help=f"run a deviation {name} sweep")
        ps.add_argument("--config", default=None, help="flat key=value config file")
        ps.add_argument("--dist", default=None, help="e.g. gaussian:d=1 or student-t:nu=5")
        ps.add_argument("--k", type=int, default=None)
        ps.add_argument("--m-grid", default=None, help="comma-separated sample sizes")
        ps.add_argument("--replicates", type=int, default=None)
        ps.add_argument("--candidates-per-cell", type=int, default=None)
        ps.add_argument("--seed", type=int, default=None)
        ps.add_argument("--restrict-to-unit", dest="restrict", action="store_true", default=None)
        ps.add_argument("--no-restrict-to-unit", dest="restrict", action="store_false")
        ps.add_argument("--reference-size", type=int, default=None)
        ps.add_argument("--threads", type=int, default=None)
        ps.add_argument("--out-csv", default=None, help="records CSV path ('-' for stdout)")
        ps.add_argument("--out-json", default=None, help="summary JSON path (default stdout)")

    pc = sub.add_parser("counterexample", help="reproduce an impossibility argument")
    pc.add_argument("--which", required=True, choices=("scaling", "divergence", "bernoulli"))
    pc.add_argument("--lambda", dest="lam", type=float, default=100.0)
    pc.add_argument("--epsilon", type=float, default=0.1)
    pc.add_argument("--dist", default="gaussian:d=1")
    pc.add_argument("--k", type=int, default=1)
    pc.add_argument("--m", type=int, default=256)
    pc.add_argument("--delta", type=float, default=0.1)
    pc.add_argument("--seed", type=int, default=0)
    pc.add_argument("--q-grid", default="0,0.5,1,2,5,10,100,1000")
    pc.add_argument("--output", default=None)

    pv = sub.add_parser("verify", help="run identity/constant verification suites")
    pv.add_argument("--seed", type=int, default=20200828)
    pv.add_argument("--fuzz", type=int, default=10_000)
    pv.add_argument("--output", default=None, help="optional JSON report path")

    return parser


# ---------------------------------------------------------------------------
# Subcommand implementations
# ---------------------------------------------------------------------------

def _cmd_bound(args) -> int:
    tier = _TIER_NAMES[args.tier]
    d = args.d
    profile = None
    if tier != "generic-framework":
        mphat = {args.p: args.mphat} if (args.p is not None and args.mphat is not None) else None
        subgauss = (args.a, args.b) if (args.a is not None and args.b is not None) else None
        profile = dist.MomentProfile(
            mu=np.zeros(d),
            sigma2=args.sigma2 if args.sigma2 is not None else 1.0,
            m4hat=args.m4hat,
            mphat=mphat,
            subgauss=subgauss,
            diameter=args.R,
        )
    query = B.BoundQuery(
        epsilon=args.epsilon,
        delta=args.delta,
        k=args.k,
        d=d,
        tier=tier,
        profile=profile,
        p=args.p,
        t=args.t,
        pdim=args.pdim,
    )
    res = B.compute_bound(query)
    _emit(
        {
            "config": {
                "tier": args.tier,
                "epsilon": args.epsilon,
                "delta": args.delta,
                "k": args.k,
                "d": d,
                "m4hat": args.m4hat,
                "p": args.p,
                "mphat": args.mphat,
                "a": args.a,
                "b": args.b,
                "R": args.R,
                "sigma2": args.sigma2,
                "t": args.t,
                "pdim": args.pdim,
            },
            "result": {
                "m_required": res.m_required,
                "m_real": res.m_real,
                "intermediates": res.intermediates,
            },
        },
        args.output,
    )
    return 0


def _cmd_moments(args) -> int:
    spec = dist.load_empirical_csv(args.input)
    ps = [int(p) for p in args.ps.split(",") if p.strip()] if args.ps else []
    mu = np.array([float(v) for v in args.mu.split(",")]) if args.mu else None
    est = mom.estimate_moments(spec.data, ps=ps, mu=mu)
    _emit(
        {
            "config": {"input": args.input, "ps": ps, "mu": mu},
            "result": {
                "n": est.n,
                "mu_hat": est.mu_hat,
                "sigma2_hat": est.sigma2_hat,
                "m4hat_hat": est.m4hat_hat,
                "mphat_hat": est.mphat_hat,
            },
        },
        args.output,
    )
    return 0


def _read_config_file(path) -> dict:
    values: dict[str, str] = {}
    with open(path, "r", encoding="utf-8") as fh:
        for line in fh:
            line = line.strip()
            if not line or line.startswith("#"):
                continue
            key, sep, val = line.partition("=")
            if not sep:
                raise PreconditionError(f"malformed config line {line!r} (expected key=value)")
            values[key.strip()] = val.strip()
    return values


_TRUE_STRINGS = ("1", "true", "yes", "on")


def _resolve_sweep_config(args) -> tuple[dev.ExperimentConfig, int]:
    file_vals = _read_config_file(args.config) if args.config else {}

    def pick(cli_val, key, cast, default):
        if cli_val is not None:
            return cli_val
        if key in file_vals:
            return cast(file_vals[key])
        return default

    dist_str = pick(args.dist, "dist", str, None)
    if dist_str is None:
        raise _UsageError("a distribution is required (--dist or config 'dist')")
    spec = dist.parse_spec_string(dist_str)
    m_grid_str = pick(args.m_grid, "m_grid", str, None)
    if m_grid_str is None:
        raise _UsageError("a sample-size grid is required (--m-grid or config 'm_grid')")
    if isinstance(m_grid_str, str):
        m_grid = tuple(int(tok) for tok in m_grid_str.replace("[", "").replace("]", "").split(","))
    else:
        m_grid = tuple(m_grid_str)
    restrict = pick(args.restrict, "restrict_to_unit", lambda s: s.lower() in _TRUE_STRINGS, True)
    ref_size = pick(args.reference_size, "reference_size", int, None)
    cfg = dev.ExperimentConfig(
        spec=spec,
        k=pick(args.k, "k", int, 1),
        m_grid=m_grid,
        replicates=pick(args.replicates, "replicates", int, 20),
        candidates_per_cell=pick(args.candidates_per_cell, "candidates_per_cell", int, 8),
        master_seed=pick(args.seed, "master_seed", int, 0),
        restrict_to_unit=restrict,
        reference_size=ref_size,
    )
    threads = pick(args.threads, "threads", int, 1)
    if threads < 1:
        raise PreconditionError("threads must be >= 1")
    return cfg, threads


def _cmd_sweep(args, want_fit: bool) -> int:
    cfg, threads = _resolve_sweep_config(args)
    if want_fit and len(cfg.m_grid) < 4:
        raise PreconditionError("rate fitting needs at least 4 grid points in m_grid")
    result = dev.rate_sweep(cfg, threads=threads, fit=want_fit and len(cfg.m_grid) >= 4)
    csv_text = dev.records_to_csv(result.records)
    if args.out_csv == "-":
        sys.stdout.write(csv_text)
    elif args.out_csv:
        with open(args.out_csv, "w", encoding="utf-8", newline="") as fh:
            fh.write(csv_text)
    _emit(dev.sweep_summary(cfg, result, threads=threads), args.out_json)
    return 0


def _cmd_counterexample(args) -> int:
    if args.which == "bernoulli":
        report = dev.counterexample_bernoulli(args.m, args.delta)
        config = {"which": "bernoulli", "m": args.m, "delta": args.delta}
    elif args.which == "scaling":
        spec = dist.parse_spec_string(args.dist)
        cfg = dev.ExperimentConfig(
            spec=spec, k=args.k, m_grid=(args.m,), replicates=1, master_seed=args.seed
        )
        report = dev.counterexample_scaling(args.lam, cfg, epsilon=args.epsilon)
        config = {
            "which": "scaling",
            "lambda": args.lam,
            "epsilon": args.epsilon,
            "dist": args.dist,
            "k": args.k,
            "m": args.m,
            "seed": args.seed,
        }
    else:
        spec = dist.parse_spec_string(args.dist)
        profile = dev.population_profile(spec)
        if spec.dim != 1 or float(np.abs(profile.mu).max()) != 0.0:
            raise PreconditionError(
                "divergence counterexample requires a one-dimensional zero-mean distribution"
            )
        X = dist.sample(spec, args.m, args.seed)
        q_grid = [float(tok) for tok in args.q_grid.split(",")]
        report = dev.counterexample_divergence(X, q_grid, profile.sigma2)
        config = {
            "which": "divergence",
            "dist": args.dist,
            "m": args.m,
            "seed": args.seed,
            "q_grid": q_grid,
        }
    _emit({"config": config, "report": report}, args.output)
    return 0


def _verify_checks(seed: int, fuzz: int) -> list[tuple[str, bool, str]]:
    checks: list[tuple[str, bool, str]] = []

    aux = B.verify_aux_constants(n_pairs=fuzz, seed=seed)
    checks.append(
        (
            "series_partial_sum_leq_5",
            aux["checks"]["series_leq_5"],
            f"S_200={aux['series_partial_sum']:.6f}",
        )
    )
    checks.append(
        (
            "series_geometric_bound_limit",
            aux["checks"]["geometric_bound_at_limit"]
            and aux["checks"]["series_below_geometric_bound"],
            f"bound_200={aux['geometric_bound_at_n']:.9f} vs 2+2sqrt2={aux['limit_bound']:.9f}",
        )
    )
    checks.append(
        (
            "log_dominance_implication",
            aux["checks"]["log_dominance_zero_violations"],
            f"{aux['n_pairs']} pairs, {aux['violations']} violations",
        )
    )

    env0 = mom.envelope(np.zeros(1), np.zeros(1), 1.0)
    env1 = mom.envelope(np.ones(1), np.zeros(1), 1.0)
    env2 = mom.envelope(np.array([math.sqrt(2.0)]), np.zeros(1), 1.0)
    ok_env = env0 == 8.0 and env1 == 12.0 and env2 == 16.0
    checks.append(("envelope_point_values", ok_env, f"({env0}, {env1}, {env2}) vs (8, 12, 16)"))

    bern = dist.analytic_profile(dist.bernoulli(0.5))
    formula = mom.envelope_second_moment(bern)
    exact = 0.5 * mom.envelope(np.array([0.0]), bern.mu, bern.sigma2) ** 2 + 0.5 * mom.envelope(
        np.array([1.0]), bern.mu, bern.sigma2
    ) ** 2
    ok_bern = abs(formula - 144.0) <= 1e-12 and abs(exact - formula) <= 1e-12
    checks.append(("envelope_second_moment_two_point", ok_bern, f"formula={formula}, exact={exact}"))

    g = dist.gaussian(1)
    z = dist.sample(g, 1_000_000, derive_seed(seed, AUX, 1))
    mc = float(np.mean(mom.envelope(z, np.zeros(1), 1.0) ** 2))
    ok_mc = abs(mc - 176.0) / 176.0 <= 0.01
    checks.append(("envelope_second_moment_gaussian_mc", ok_mc, f"mc={mc:.3f} vs 176 (1%)"))

    ok_moors = True
    detail = []
    for i, (fam, n) in enumerate(
        [(dist.gaussian(1), 10), (dist.gaussian(3), 1000), (dist.pareto(4.5), 100_000)]
    ):
        s = dist.sample(fam, n, derive_seed(seed, AUX, 2 + i))
        lhs, rhs = mom.moors_identity_check(s)
        rel = abs(lhs - rhs) / max(1.0, abs(lhs))
        ok_moors &= rel <= 1e-9
        detail.append(f"{rel:.2e}")
    checks.append(("moors_identity", ok_moors, "rel errs " + ",".join(detail)))

    rng = np.random.Generator(np.random.Philox(derive_seed(seed, AUX, 10)))
    profile = dist.analytic_profile(g)
    worst = -math.inf
    for _ in range(50):
        Q = rng.normal(size=(3, 1)) * 3.0
        e = expected_error(g, Q)
        x = rng.normal(size=(200, 1)) * 2.0
        f_vals = normalized_loss(x, Q, profile.sigma2, e)
        s_vals = mom.envelope(x, profile.mu, profile.sigma2)
        worst = max(worst, float(np.max(f_vals - s_vals)))
    checks.append(("envelope_domination_spot", worst <= 1e-9, f"max(f-s)={worst:.3e}"))
    return checks


def _cmd_verify(args) -> int:
    print(f"# kmdev verify seed={args.seed} fuzz={args.fuzz}")
    checks = _verify_checks(args.seed, args.fuzz)
    all_ok = True
    for name, ok, detail in checks:
        all_ok &= ok
        print(f"[{'PASS' if ok else 'FAIL'}] {name}: {detail}")
    if args.output:
        _emit(
            {
                "config": {"seed": args.seed, "fuzz": args.fuzz},
                "checks": {name: {"ok": ok, "detail": detail} for name, ok, detail in checks},
                "all_ok": all_ok,
            },
            args.output,
        )
    if not all_ok:
        raise InvariantViolationError("verification suite reported failures")
    return 0


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except _UsageError as exc:
        print(f"usage error: {exc}", file=sys.stderr)
        return 1
    try:
        if args.command == "bound":
            return _cmd_bound(args)
        if args.command == "moments":
            return _cmd_moments(args)
        if args.command == "deviate":
            return _cmd_sweep(args, want_fit=False)
        if args.command == "rate":
            return _cmd_sweep(args, want_fit=True)
        if args.command == "counterexample":
            return _cmd_counterexample(args)
        if args.command == "verify":
            return _cmd_verify(args)
        raise _UsageError(f"unknown command {args.command!r}")
    except _UsageError as exc:
        print(f"usage error: {exc}", file=sys.stderr)
        return 1
    except PreconditionError as exc:
        print(f"precondition violated: {exc}", file=sys.stderr)
        return 2
    except InvariantViolationError as exc:
        print(f"invariant failure: {exc}", file=sys.stderr)
        return 3
    except Exception:
        traceback.print_exc()
        return 3


if __name__ == "__main__":
    sys.exit(main())
