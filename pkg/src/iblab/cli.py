"""Command-line harness.

Writes diffable artifacts only (CSV for matrices and tables, JSON for
structured results); every JSON artifact carries the schema version, the
seed, and a hash of the resolved configuration, so a rerun of the same
config reproduces outputs bit-exactly.

Exit codes: 0 success, 2 invalid configuration, 3 solver failure,
4 verification failure.
"""

from __future__ import annotations

import argparse
import csv
import hashlib
import json
import sys
from pathlib import Path

import numpy as np

from . import checks
from .data import (
    GAUSSIAN,
    RADEMACHER,
    SCHEMA_VERSION,
    encode_multiclass,
    gen_diagonal_gram,
    gen_orthogonal,
    gen_subgaussian,
    load_dataset,
    save_dataset,
)
from .dual import ce_candidate, solve_multiclass_general, solve_relaxed
from .errors import (IblabError, InvalidParameterError, NotApplicableError,
                     SolverFailureError)
from .experiments import converse_demo, iw_demo, scaling_sweep
from .interpolation import gram_summary, mni, svp_check
from .losses import (
    ADABOOST,
    CROSS_ENTROPY,
    EQUAL_ASSIGNMENT,
    SIMPLEX,
    Binary,
    MulticlassCE,
    MulticlassGeneral,
    make_loss,
    smoothness_bound,
    smoothness_is_estimated,
)
from .train import StopRule, StepSchedule, train_binary, train_multiclass

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_SOLVER = 3
EXIT_VERIFY = 4


def _config_hash(args: argparse.Namespace) -> str:
    # output destinations are not part of the experiment configuration
    items = {k: v for k, v in sorted(vars(args).items())
             if k not in ("func", "config", "out") and not callable(v)}
    blob = json.dumps(items, sort_keys=True, default=str).encode()
    return hashlib.sha256(blob).hexdigest()[:16]


def _artifact(args, payload: dict) -> dict:
    return {"schema_version": SCHEMA_VERSION,
            "config_hash": _config_hash(args),
            "seed": getattr(args, "seed", None),
            **payload}


def _write_json(path, obj) -> None:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w") as fh:
        json.dump(obj, fh, indent=2)
    print(f"wrote {path}")


def _write_csv(path, rows) -> None:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", newline="") as fh:
        csv.writer(fh).writerows(rows)
    print(f"wrote {path}")


def _parse_spectrum(text: str, d: int) -> np.ndarray:
    if text == "iso":
        return np.ones(d)
    if text.startswith("@"):
        vals = json.loads(Path(text[1:]).read_text())
        return np.asarray(vals, dtype=np.float64)
    return np.asarray([float(v) for v in text.split(",")], dtype=np.float64)


def _loss_from_args(args) -> "LossSpec":
    return make_loss(args.loss, getattr(args, "m", None))


# ---------------------------------------------------------------------------
# subcommands
# ---------------------------------------------------------------------------


def cmd_gen_data(args) -> int:
    if args.ensemble == "subgaussian":
        ds = gen_subgaussian(args.n, args.d, _parse_spectrum(args.spectrum, args.d),
                             entry_dist=args.entry, seed=args.seed,
                             n_classes=args.classes, norm_cap=args.norm_cap)
    elif args.ensemble == "orthogonal":
        ds = gen_orthogonal(args.n, args.d, args.alpha, seed=args.seed,
                            n_classes=args.classes)
    else:
        dvec = np.asarray([float(v) for v in args.dvec.split(",")])
        ds = gen_diagonal_gram(args.n, args.d, dvec, seed=args.seed,
                               n_classes=args.classes)
    save_dataset(ds, args.out, extra_meta={"config_hash": _config_hash(args)})
    print(f"wrote {args.out}.csv and {args.out}.meta.json")
    return EXIT_OK


def cmd_solve_dual(args) -> int:
    ds = load_dataset(args.data)
    loss = _loss_from_args(args)
    if args.multiclass:
        K = int(ds.labels.max())
        if args.multiclass == "ce":
            enc = encode_multiclass(ds.labels, SIMPLEX, K)
            sol = ce_candidate(ds.gram(), enc)
            payload = {"loss": {"kind": "logistic", "m": None},
                       "mu": sol.mu, "balance_residual": sol.balance_residual,
                       "mass_gap": sol.mass_gap,
                       "per_class": [s.to_dict() for s in sol.per_class]}
        else:
            enc = encode_multiclass(ds.labels, EQUAL_ASSIGNMENT, K)
            sols = solve_multiclass_general(ds.gram(), enc, loss)
            payload = {"loss": json.loads(loss.to_json()),
                       "per_class": [s.to_dict() for s in sols]}
    else:
        sol = solve_relaxed(ds.gram(), np.asarray(ds.labels, float), loss)
        payload = {"loss": json.loads(loss.to_json()), **sol.to_dict()}
    _write_json(args.out, _artifact(args, payload))
    return EXIT_OK


def cmd_mni(args) -> int:
    ds = load_dataset(args.data)
    alpha = args.alpha
    if args.alpha_from_spectrum:
        if ds.lam is None:
            raise InvalidParameterError("dataset has no recorded spectrum")
        alpha = float(np.sum(ds.lam)) * ds.rescale ** 2
    summ = gram_summary(ds.X, alpha)
    y = np.asarray(ds.labels, dtype=np.float64)
    w = mni(ds.X, y)
    rep = svp_check(summ.G, y)
    payload = {
        "w": w.tolist(),
        "alpha": summ.alpha, "eps": summ.eps, "ratio": summ.ratio,
        "lambda_min": summ.lambda_min, "condition": summ.condition,
        "svp_holds": rep.holds, "svp_margin": rep.margin,
    }
    _write_json(args.out, _artifact(args, payload))
    return EXIT_OK


def cmd_train(args) -> int:
    ds = load_dataset(args.data)
    loss = _loss_from_args(args)
    stop = StopRule(risk_threshold=args.risk_threshold, max_iters=args.max_iters)
    schedule = StepSchedule(eta_hat=args.eta_hat)
    if args.multiclass:
        K = int(ds.labels.max())
        scheme = SIMPLEX if args.multiclass == "ce" else EQUAL_ASSIGNMENT
        formulation = CROSS_ENTROPY if args.multiclass == "ce" else ADABOOST
        enc = encode_multiclass(ds.labels, scheme, K)
        traj = train_multiclass(ds, enc, loss, formulation, schedule=schedule, stop=stop)
        setting = MulticlassCE(K) if args.multiclass == "ce" else MulticlassGeneral(ds.n, K)
        dists = traj.per_class_dist_mni
        extra = {"per_class_dist_mni": None if dists is None else dists.tolist()}
    else:
        traj = train_binary(ds, loss, schedule=schedule, stop=stop)
        setting = Binary(ds.n)
        extra = {}
    _write_csv(str(args.out) + ".trajectory.csv", traj.to_csv_rows())
    payload = {
        "loss": json.loads(loss.to_json()),
        "termination": traj.termination,
        "iterations": traj.iterations,
        "final_risk": traj.final_risk,
        "final_log_risk": traj.final_log_risk,
        "eta_hat": traj.eta_hat,
        "smoothness_bound": smoothness_bound(loss, setting),
        "smoothness_bound_estimated": smoothness_is_estimated(loss, setting),
        "final_dist_mni": traj.snapshots[-1].dist_mni,
        **extra,
    }
    _write_json(str(args.out) + ".summary.json", _artifact(args, payload))
    return EXIT_OK


def cmd_scaling_sweep(args) -> int:
    d_list = [int(v) for v in args.d_list.split(",")]
    seeds = list(range(args.seeds))
    loss = _loss_from_args(args)
    sweep = scaling_sweep(args.n, d_list, loss, seeds, entry_dist=args.entry)
    rows = [["d", "seed", "ratio", "eps_y_over_alpha", "dual_dist", "primal_dist",
             "bound_ratio", "method", "iterations", "runtime_ms", "failed"]]
    for t in sweep.trials:
        rows.append([t.d, t.seed, repr(t.ratio), repr(t.eps_y_over_alpha),
                     repr(t.dual_dist), repr(t.primal_dist), repr(t.bound_ratio),
                     t.method, t.iterations, repr(t.runtime_ms), int(t.failed)])
    _write_csv(str(args.out) + ".trials.csv", rows)
    _write_json(str(args.out) + ".summary.json", _artifact(args, sweep.to_dict()))
    return EXIT_OK


def cmd_converse_demo(args) -> int:
    dvec = np.asarray([float(v) for v in args.dvec.split(",")])
    y = np.asarray([float(v) for v in args.y.split(",")])
    loss = _loss_from_args(args)
    report = converse_demo(dvec, y, loss, seed=args.seed)
    print(f"dual spread (max - min): {report['spread']:.6g}")
    print(f"adjusted labels: {np.asarray(report['tilde_y']).round(6).tolist()}")
    print(f"interpolation residual: {report['interpolation_residual']:.3e}")
    print(f"note: {report['note']}")
    if args.out:
        _write_json(args.out, _artifact(args, report))
    return EXIT_OK


def cmd_iw_demo(args) -> int:
    report = iw_demo(args.n, args.d, args.big_q, args.m, args.subset_size,
                     seed=args.seed, max_iters=args.max_iters)
    print(f"margin ratio: {report['ratio']:.5f} "
          f"(target Q^(1/(m+2)) = {report['expected_ratio']:.5f}, "
          f"relative error {report['relative_error']:.2e})")
    if args.out:
        _write_json(args.out, _artifact(args, report))
    return EXIT_OK


def cmd_multiclass_demo(args) -> int:
    ds = gen_subgaussian(args.n, args.d, 1.0, seed=args.seed, n_classes=args.k,
                         norm_cap=(args.k - 1) / args.k if args.formulation == "ce" else 1.0)
    K = args.k
    if args.formulation == "ce":
        enc = encode_multiclass(ds.labels, SIMPLEX, K)
        loss = make_loss("logistic")
        formulation = CROSS_ENTROPY
        try:
            sol = ce_candidate(ds.gram(), enc)
            cand = {"mu": sol.mu, "balance_residual": sol.balance_residual,
                    "mass_gap": sol.mass_gap}
        except NotApplicableError as exc:
            cand = {"not_applicable": str(exc)}
    else:
        enc = encode_multiclass(ds.labels, EQUAL_ASSIGNMENT, K)
        loss = _loss_from_args(args)
        formulation = ADABOOST
        sols = solve_multiclass_general(ds.gram(), enc, loss)
        cand = {"per_class_mu": [s.mu for s in sols]}
    traj = train_multiclass(ds, enc, loss, formulation,
                            stop=StopRule(risk_threshold=args.risk_threshold,
                                          max_iters=args.max_iters))
    dists = traj.per_class_dist_mni
    payload = {
        "formulation": formulation, "K": K,
        "candidate": cand,
        "iterations": traj.iterations,
        "termination": traj.termination,
        "per_class_dist_mni": None if dists is None else dists.tolist(),
    }
    print(f"per-class distance to interpolation: "
          f"{None if dists is None else np.round(dists, 6).tolist()}")
    if args.out:
        _write_json(args.out, _artifact(args, payload))
    return EXIT_OK


def cmd_verify(args) -> int:
    results = checks.run_suite(args.suite)
    failures = [r for r in results if not r.passed]
    for r in results:
        print(f"[{'PASS' if r.passed else 'FAIL'}] {r.module}/{r.name}: {r.detail}")
    report = {
        "suite": args.suite,
        "passed": len(results) - len(failures),
        "failed": len(failures),
        "failures": [{"module": r.module, "name": r.name, "detail": r.detail}
                     for r in failures],
    }
    if args.out:
        _write_json(args.out, _artifact(args, report))
    print(f"{report['passed']}/{len(results)} checks passed")
    return EXIT_VERIFY if failures else EXIT_OK


# ---------------------------------------------------------------------------
# parser
# ---------------------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="iblab",
        description="Dual solvers, interpolation references, and gradient-descent "
                    "experiments for overparameterized linear classifiers.")
    parser.add_argument("--config", help="JSON file whose entries override flags")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("gen-data", help="generate and persist a dataset")
    p.add_argument("--ensemble", choices=["subgaussian", "orthogonal", "diagonal"],
                   default="subgaussian")
    p.add_argument("--n", type=int, required=True)
    p.add_argument("--d", type=int, required=True)
    p.add_argument("--spectrum", default="iso",
                   help="'iso', comma floats, or @file.json (subgaussian only)")
    p.add_argument("--entry", choices=[GAUSSIAN, RADEMACHER], default=GAUSSIAN)
    p.add_argument("--alpha", type=float, default=1.0, help="orthogonal ensemble scale")
    p.add_argument("--dvec", default="", help="comma floats (diagonal ensemble)")
    p.add_argument("--classes", type=int, default=0, help="0 = binary labels")
    p.add_argument("--norm-cap", type=float, default=1.0)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_gen_data)

    p = sub.add_parser("solve-dual", help="solve the dual program for a dataset")
    p.add_argument("--data", required=True)
    p.add_argument("--loss", required=True)
    p.add_argument("--m", type=float)
    p.add_argument("--multiclass", choices=["general", "ce"], default=None)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_solve_dual)

    p = sub.add_parser("mni", help="interpolation direction and Gram summary")
    p.add_argument("--data", required=True)
    p.add_argument("--alpha", type=float, default=None,
                   help="reference scale; default tr(G)/n")
    p.add_argument("--alpha-from-spectrum", action="store_true",
                   help="use ||lambda||_1 * rescale^2 from the dataset metadata")
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_mni)

    p = sub.add_parser("train", help="gradient descent with trajectory export")
    p.add_argument("--data", required=True)
    p.add_argument("--loss", required=True)
    p.add_argument("--m", type=float)
    p.add_argument("--multiclass", choices=["general", "ce"], default=None)
    p.add_argument("--risk-threshold", type=float, default=1e-10)
    p.add_argument("--max-iters", type=int, default=2_000_000)
    p.add_argument("--eta-hat", type=float, default=None)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("scaling-sweep", help="median distances across dimensions")
    p.add_argument("--n", type=int, required=True)
    p.add_argument("--d-list", required=True, help="comma-separated increasing dims")
    p.add_argument("--loss", required=True)
    p.add_argument("--m", type=float)
    p.add_argument("--seeds", type=int, default=20)
    p.add_argument("--entry", choices=[GAUSSIAN, RADEMACHER], default=GAUSSIAN)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_scaling_sweep)

    p = sub.add_parser("converse-demo", help="diagonal-Gram adjusted-label demo")
    p.add_argument("--dvec", required=True)
    p.add_argument("--y", required=True)
    p.add_argument("--loss", required=True)
    p.add_argument("--m", type=float)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out")
    p.set_defaults(func=cmd_converse_demo)

    p = sub.add_parser("iw-demo", help="importance-weighted margin-ratio demo")
    p.add_argument("--n", type=int, default=16)
    p.add_argument("--d", type=int, default=32)
    p.add_argument("--big-q", "--Q", dest="big_q", type=float, required=True)
    p.add_argument("--m", type=float, required=True)
    p.add_argument("--subset-size", type=int, default=8)
    p.add_argument("--max-iters", type=int, default=6_000_000)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out")
    p.set_defaults(func=cmd_iw_demo)

    p = sub.add_parser("multiclass-demo", help="multiclass candidates vs training")
    p.add_argument("--n", type=int, default=18)
    p.add_argument("--d", type=int, default=18 * 64)
    p.add_argument("--k", type=int, default=3)
    p.add_argument("--formulation", choices=["ce", "general"], default="ce")
    p.add_argument("--loss", default="exp")
    p.add_argument("--m", type=float)
    p.add_argument("--risk-threshold", type=float, default=0.0)
    p.add_argument("--max-iters", type=int, default=1_000_000)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out")
    p.set_defaults(func=cmd_multiclass_demo)

    p = sub.add_parser("verify", help="run the invariant suite")
    p.add_argument("--suite", default="all",
                   help=f"'all' or one of {checks.suites()}")
    p.add_argument("--out", help="machine-readable failure report")
    p.set_defaults(func=cmd_verify)

    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    if args.config:
        overrides = json.loads(Path(args.config).read_text())
        for key, value in overrides.items():
            setattr(args, key.replace("-", "_"), value)
    try:
        return args.func(args)
    except SolverFailureError as exc:
        print(f"solver failure: {exc}", file=sys.stderr)
        return EXIT_SOLVER
    except IblabError as exc:
        print(f"invalid configuration: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except FileNotFoundError as exc:
        print(f"missing input: {exc}", file=sys.stderr)
        return EXIT_CONFIG


if __name__ == "__main__":
    sys.exit(main())
