"""Command-line interface.

Subcommands: simulate, fit, predict, select, benchmark, evaluate. All
numeric outputs are CSV files; every output directory gets a plain-text
manifest echoing the command, configuration, seed and runtime so the run
can be reproduced exactly.
"""

from __future__ import annotations

import argparse
import configparser
import csv
import sys
import time
from pathlib import Path

import numpy as np

from . import __version__
from .archive import load_model, load_truth, save_model, save_truth
from .bench import run_benchmark
from .core import FitConfig, Ranks, fit
from .data import (
    MultiSourceDataset,
    Outcome,
    load_csv,
    standardize,
    standardize_outcome_with,
    standardize_with,
    write_csv,
)
from .errors import ConfigError, ParseError, SJiveError
from .metrics import component_inference, meta_loadings, recovery_error, test_mse
from .predict import estimate_scores, predict
from .selection import DEFAULT_ETA_GRID, make_cv_plan, select_eta, select_model, select_ranks
from .simulate import SimConfig, generate


def _read_sim_config(path):
    """Parse a key = value config file with a [simulation] section."""
    parser = configparser.ConfigParser()
    read = parser.read(path)
    if not read:
        raise ConfigError(f"cannot read config file {path}")
    if "simulation" not in parser:
        raise ConfigError(f"{path}: missing [simulation] section")
    sec = parser["simulation"]

    def ints(key):
        return tuple(int(v.strip()) for v in sec[key].split(","))

    try:
        cfg = SimConfig(
            k=sec.getint("k"),
            p=ints("p"),
            n=sec.getint("n"),
            rank_joint=sec.getint("rank_joint"),
            rank_indiv=ints("rank_indiv"),
            w_joint=sec.getfloat("w_joint", fallback=1.0),
            w_indiv=sec.getfloat("w_indiv", fallback=1.0),
            x_err=sec.getfloat("x_err", fallback=0.0),
            y_err=sec.getfloat("y_err", fallback=0.0),
            r_prop=sec.getfloat("r_prop", fallback=1.0),
            seed=sec.getint("seed", fallback=0),
        )
    except (KeyError, ValueError) as exc:
        raise ConfigError(f"{path}: {exc}") from None
    n_test = sec.getint("n_test", fallback=cfg.n)
    return cfg, n_test


def _write_manifest(outdir: Path, command: str, params: dict, seed, runtime: float):
    lines = [
        f"command = {command}",
        f"package_version = {__version__}",
        f"numpy_version = {np.__version__}",
        f"seed = {seed}",
        f"runtime_seconds = {runtime:.3f}",
    ]
    for key, val in params.items():
        lines.append(f"{key} = {val}")
    (outdir / "manifest.txt").write_text("\n".join(lines) + "\n", encoding="utf-8")


def _write_rows(path, header, rows):
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(header)
        for row in rows:
            writer.writerow(row)


def _load_dataset(paths, samples_in_rows=False) -> MultiSourceDataset:
    mats = [load_csv(p, samples_in_rows=samples_in_rows) for p in paths]
    return MultiSourceDataset.from_labeled(mats)


def _load_outcome(path, samples_in_rows=False):
    mat = load_csv(path, samples_in_rows=samples_in_rows)
    if mat.values.shape[0] != 1:
        raise ParseError(f"{path}: outcome file must contain exactly one variable row")
    return Outcome(mat.values[0]), mat.col_ids


def _parse_ranks(text: str, k: int) -> Ranks:
    parts = [p.strip() for p in text.split(",")]
    if len(parts) != k + 1:
        raise ConfigError(
            f"--ranks needs {k + 1} comma-separated values (joint,r1..r{k}), got {text!r}"
        )
    vals = [int(p) for p in parts]
    return Ranks(vals[0], tuple(vals[1:]))


def _fold_trace_rows(trace):
    n_folds = max((len(c["fold_mses"]) for c in trace.candidates), default=0)
    header = ["candidate", "mean_mse"] + [f"fold{i + 1}_mse" for i in range(n_folds)]
    rows = [
        [c["candidate"], repr(c["mean_mse"]), *(repr(v) for v in c["fold_mses"])]
        for c in trace.candidates
    ]
    return header, rows


def _cmd_simulate(args) -> int:
    t0 = time.perf_counter()
    cfg, _ = _read_sim_config(args.config)
    if args.seed is not None:
        cfg = SimConfig(**{**cfg.__dict__, "seed": args.seed})
    outdir = Path(args.out)
    outdir.mkdir(parents=True, exist_ok=True)
    data, y, truth = generate(cfg)
    for i, block in enumerate(data.blocks):
        write_csv(outdir / f"X{i + 1}.csv", block, data.variable_ids[i], data.sample_ids)
    write_csv(outdir / "y.csv", y.values[None, :], ["y"], data.sample_ids)
    save_truth(truth, outdir / "truth.zip")
    _write_manifest(
        outdir,
        "simulate",
        {**{k: v for k, v in cfg.__dict__.items()}, "outputs": "X*.csv, y.csv, truth.zip"},
        cfg.seed,
        time.perf_counter() - t0,
    )
    print(f"wrote {cfg.k} blocks, outcome and truth archive to {outdir}")
    return 0


def _cmd_fit(args) -> int:
    t0 = time.perf_counter()
    outdir = Path(args.out)
    outdir.mkdir(parents=True, exist_ok=True)
    raw = _load_dataset(args.x, samples_in_rows=args.samples_as_rows)
    y_raw, y_ids = _load_outcome(args.y, samples_in_rows=args.samples_as_rows)
    if y_ids != raw.sample_ids:
        raise ParseError("outcome sample ids do not match the block sample ids")
    policy = "drop" if args.drop_constant else "error"
    data, y = standardize(raw, y_raw, policy=policy)
    compress = False if args.no_compress else "auto"
    if args.ranks == "auto" or args.eta == "auto":
        plan = make_cv_plan(data.n, seed=args.seed)
        if args.ranks == "auto" and args.eta == "auto":
            eta, ranks, *_ = select_model(raw, y_raw, plan, compress=compress)
        elif args.ranks == "auto":
            eta = float(args.eta)
            ranks, _ = select_ranks(raw, y_raw, eta, plan, compress=compress)
        else:
            ranks = _parse_ranks(args.ranks, data.k)
            eta, _ = select_eta(raw, y_raw, ranks, DEFAULT_ETA_GRID, plan, compress=compress)
    else:
        ranks = _parse_ranks(args.ranks, data.k)
        eta = float(args.eta)
    cfg = FitConfig(eta=eta, ranks=ranks, max_iter=args.max_iter, tol=args.tol, seed=args.seed)
    model, report = fit(data, y, cfg, compress=compress)
    save_model(model, outdir / "model.zip", report)
    _write_rows(
        outdir / "fit_report.csv",
        ["iteration", "objective"],
        [(i, repr(v)) for i, v in enumerate(report.objective_trace)],
    )
    dropped = [
        f"block{i + 1}:{','.join(sc.dropped_ids)}"
        for i, sc in enumerate(data.standardization or [])
        if sc.dropped_ids
    ]
    _write_manifest(
        outdir,
        "fit",
        {
            "x": ";".join(args.x),
            "y": args.y,
            "eta": eta,
            "ranks": f"{ranks.joint},{','.join(map(str, ranks.individual))}",
            "tol": args.tol,
            "max_iter": args.max_iter,
            "compress": compress,
            "converged": report.converged,
            "iterations": report.iterations,
            "final_objective": repr(report.final_objective),
            "dropped_variables": ";".join(dropped) if dropped else "none",
        },
        args.seed,
        time.perf_counter() - t0,
    )
    print(
        f"fit eta={eta:g} ranks=({ranks.joint},{','.join(map(str, ranks.individual))}) "
        f"objective={report.final_objective:.6g} "
        f"{'converged' if report.converged else 'NOT converged'} "
        f"after {report.iterations} iterations -> {outdir / 'model.zip'}"
    )
    return 0


def _cmd_predict(args) -> int:
    t0 = time.perf_counter()
    outdir = Path(args.out)
    outdir.mkdir(parents=True, exist_ok=True)
    model, _ = load_model(args.model)
    raw = _load_dataset(args.x, samples_in_rows=args.samples_as_rows)
    data = standardize_with(raw, model.block_scalers) if model.block_scalers else raw
    est = estimate_scores(model, data)
    yhat = predict(model, est)
    contrib = [model.theta_joint @ est.joint_scores]
    contrib += [th @ s for th, s in zip(model.theta_indiv, est.indiv_scores)]
    header = ["sample_id", "predicted"] + ["contrib_joint"] + [
        f"contrib_block{i + 1}" for i in range(model.k)
    ]
    rows = []
    for j, sid in enumerate(data.sample_ids):
        rows.append([sid, repr(float(yhat[j])), *(repr(float(c[j])) for c in contrib)])
    _write_rows(outdir / "predictions.csv", header, rows)
    _write_manifest(
        outdir,
        "predict",
        {"model": args.model, "x": ";".join(args.x), "n_predicted": data.n,
         "score_iterations": est.iterations, "score_converged": est.converged},
        "n/a",
        time.perf_counter() - t0,
    )
    print(f"wrote predictions for {data.n} samples to {outdir / 'predictions.csv'}")
    return 0


def _cmd_select(args) -> int:
    t0 = time.perf_counter()
    outdir = Path(args.out)
    outdir.mkdir(parents=True, exist_ok=True)
    raw = _load_dataset(args.x, samples_in_rows=args.samples_as_rows)
    y_raw, _ = _load_outcome(args.y, samples_in_rows=args.samples_as_rows)
    plan = make_cv_plan(raw.n, seed=args.seed)
    grid = (
        tuple(float(v) for v in args.eta_grid.split(","))
        if args.eta_grid
        else DEFAULT_ETA_GRID
    )
    compress = False if args.no_compress else "auto"
    eta, ranks, rank_trace, eta_trace = select_model(
        raw, y_raw, plan, eta_grid=grid, iterate=args.iterate, compress=compress
    )
    header, rows = _fold_trace_rows(rank_trace)
    _write_rows(outdir / "rank_trace.csv", header, rows)
    header, rows = _fold_trace_rows(eta_trace)
    _write_rows(outdir / "eta_trace.csv", header, rows)
    _write_rows(
        outdir / "chosen.csv",
        ["eta", "rank_joint", *(f"rank_block{i + 1}" for i in range(raw.k))],
        [[eta, ranks.joint, *ranks.individual]],
    )
    _write_manifest(
        outdir,
        "select",
        {"x": ";".join(args.x), "y": args.y, "eta": eta,
         "ranks": f"{ranks.joint},{','.join(map(str, ranks.individual))}",
         "eta_grid": ",".join(f"{g:g}" for g in grid)},
        args.seed,
        time.perf_counter() - t0,
    )
    print(
        f"selected eta={eta:g}, ranks=({ranks.joint},"
        f"{','.join(map(str, ranks.individual))}) -> {outdir}"
    )
    return 0


def _cmd_benchmark(args) -> int:
    t0 = time.perf_counter()
    outdir = Path(args.out)
    outdir.mkdir(parents=True, exist_ok=True)
    sim_cfg, n_test = _read_sim_config(args.config)
    if args.seed is not None:
        sim_cfg = SimConfig(**{**sim_cfg.__dict__, "seed": args.seed})
    eta = "cv" if args.eta == "cv" else float(args.eta)
    result = run_benchmark(
        sim_cfg,
        reps=args.reps,
        n_test=n_test,
        eta=eta,
        threads=args.threads,
        max_iter=args.max_iter,
        tol=args.tol,
    )
    rep_rows = []
    for r in result.replicates:
        for m in result.methods:
            rep_rows.append([r.rep, m, repr(r.mses[m])])
    _write_rows(outdir / "replicates.csv", ["rep", "method", "test_mse"], rep_rows)
    means = result.mean_mses()
    wins = result.win_rates()
    _write_rows(
        outdir / "summary.csv",
        ["method", "mean_test_mse", "win_percent"],
        [[m, repr(means[m]), repr(wins[m])] for m in result.methods],
    )
    _write_rows(
        outdir / "signal.csv",
        ["rep", "signal_top_sv", "noise_top_sv", "eta_used"],
        [
            [r.rep, repr(r.signal_sv), repr(r.noise_sv), repr(r.eta_used)]
            for r in result.replicates
        ],
    )
    _write_manifest(
        outdir,
        "benchmark",
        {**sim_cfg.__dict__, "n_test": n_test, "reps": args.reps, "eta": args.eta,
         "threads": args.threads},
        sim_cfg.seed,
        time.perf_counter() - t0,
    )
    print(f"benchmark over {args.reps} replicates -> {outdir / 'summary.csv'}")
    for m in result.methods:
        print(f"  {m}: mean test MSE {means[m]:.4f}, wins {wins[m]:.0f}%")
    return 0


def _cmd_evaluate(args) -> int:
    t0 = time.perf_counter()
    outdir = Path(args.out)
    outdir.mkdir(parents=True, exist_ok=True)
    model, _ = load_model(args.model)
    raw = _load_dataset(args.x, samples_in_rows=args.samples_as_rows)
    data = standardize_with(raw, model.block_scalers) if model.block_scalers else raw
    est = estimate_scores(model, data)
    yhat_raw = predict(model, est)
    outputs = {}
    if args.y:
        y_raw, _ = _load_outcome(args.y, samples_in_rows=args.samples_as_rows)
        _write_rows(
            outdir / "predictions_scatter.csv",
            ["sample_id", "y_true", "y_pred"],
            [
                [sid, repr(float(t)), repr(float(p))]
                for sid, t, p in zip(data.sample_ids, y_raw.values, yhat_raw)
            ],
        )
        if model.outcome_scaler is not None:
            y_std = standardize_outcome_with(y_raw.values, model.outcome_scaler)
            yhat_std = predict(model, est, standardized=True)
        else:
            y_std, yhat_std = y_raw.values, yhat_raw
        mse = test_mse(y_std, yhat_std)
        _write_rows(outdir / "metrics.csv", ["metric", "value"],
                    [["test_mse_standardized", repr(mse)], ["n", data.n]])
        outputs["test_mse"] = f"{mse:.6g}"
        if data.n == model.n:
            rows = [
                [c.name, c.rank, repr(c.partial_r2), repr(c.f_stat), repr(c.p_value)]
                for c in component_inference(model, y_std)
            ]
            _write_rows(
                outdir / "inference.csv",
                ["component", "rank", "partial_r2", "f_stat", "p_value"],
                rows,
            )
    if model.theta_joint is not None:
        for i, m in enumerate(meta_loadings(model)):
            ids = (
                model.variable_ids[i]
                if model.variable_ids
                else [f"v{j + 1}" for j in range(m.size)]
            )
            _write_rows(
                outdir / f"meta_loadings_block{i + 1}.csv",
                ["variable_id", "meta_loading"],
                [[vid, repr(float(v))] for vid, v in zip(ids, m)],
            )
    train_ids = [f"s{j + 1}" for j in range(model.n)]
    for i, (joint, indiv) in enumerate(
        zip(
            [u @ model.joint_scores for u in model.joint_loadings],
            [w @ s for w, s in zip(model.indiv_loadings, model.indiv_scores)],
        )
    ):
        ids = (
            model.variable_ids[i]
            if model.variable_ids
            else [f"v{j + 1}" for j in range(joint.shape[0])]
        )
        write_csv(outdir / f"heatmap_joint_block{i + 1}.csv", joint, ids, train_ids)
        write_csv(outdir / f"heatmap_indiv_block{i + 1}.csv", indiv, ids, train_ids)
    if args.truth:
        truth = load_truth(args.truth)
        est_joint = np.vstack([u @ model.joint_scores for u in model.joint_loadings])
        rows = [
            ["joint", repr(recovery_error(est_joint, truth.stacked_joint()))]
        ]
        for i in range(model.k):
            est_a = model.indiv_loadings[i] @ model.indiv_scores[i]
            rows.append(
                [f"block{i + 1}", repr(recovery_error(est_a, truth.indiv_structure[i]))]
            )
        _write_rows(outdir / "recovery.csv", ["component", "recovery_error"], rows)
    _write_manifest(
        outdir,
        "evaluate",
        {"model": args.model, "x": ";".join(args.x), "y": args.y or "none",
         "truth": args.truth or "none", **outputs},
        "n/a",
        time.perf_counter() - t0,
    )
    print(f"evaluation written to {outdir}")
    return 0


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="sjive",
        description="Joint/individual multi-source decomposition with supervised prediction",
    )
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    def add_common(p):
        p.add_argument("--seed", type=int, default=0, help="random seed recorded in outputs")
        p.add_argument("--samples-as-rows", action="store_true",
                       help="input CSVs store samples as rows")

    p_sim = sub.add_parser("simulate", help="generate synthetic blocks, outcome and truth")
    p_sim.add_argument("--config", required=True)
    p_sim.add_argument("--out", required=True)
    p_sim.add_argument("--seed", type=int, default=None, help="override the config seed")
    p_sim.set_defaults(func=_cmd_simulate)

    p_fit = sub.add_parser("fit", help="fit the decomposition to CSV blocks")
    p_fit.add_argument("--x", action="append", required=True, help="block CSV (repeatable)")
    p_fit.add_argument("--y", required=True, help="outcome CSV (single row)")
    p_fit.add_argument("--eta", default="0.5", help="weight in (0,1], or 'auto' for CV")
    p_fit.add_argument("--ranks", default="auto",
                       help="'rJ,r1,..,rk' or 'auto' for forward-selection CV")
    p_fit.add_argument("--out", required=True)
    p_fit.add_argument("--tol", type=float, default=1e-6)
    p_fit.add_argument("--max-iter", type=int, default=1000)
    p_fit.add_argument("--drop-constant", action="store_true",
                       help="drop zero-variance variables instead of erroring")
    p_fit.add_argument("--no-compress", action="store_true",
                       help="disable the tall-block SVD compression")
    add_common(p_fit)
    p_fit.set_defaults(func=_cmd_fit)

    p_pred = sub.add_parser("predict", help="predict outcomes for new samples")
    p_pred.add_argument("--model", required=True, help="model archive from fit")
    p_pred.add_argument("--x", action="append", required=True)
    p_pred.add_argument("--out", required=True)
    add_common(p_pred)
    p_pred.set_defaults(func=_cmd_predict)

    p_sel = sub.add_parser("select", help="cross-validated weight and rank selection")
    p_sel.add_argument("--x", action="append", required=True)
    p_sel.add_argument("--y", required=True)
    p_sel.add_argument("--out", required=True)
    p_sel.add_argument("--eta-grid", default=None, help="comma-separated grid values")
    p_sel.add_argument("--iterate", action="store_true",
                       help="repeat rank selection once at the chosen weight")
    p_sel.add_argument("--no-compress", action="store_true")
    add_common(p_sel)
    p_sel.set_defaults(func=_cmd_select)

    p_bench = sub.add_parser("benchmark", help="replicated method comparison on generated data")
    p_bench.add_argument("--config", required=True)
    p_bench.add_argument("--reps", type=int, default=10)
    p_bench.add_argument("--out", required=True)
    p_bench.add_argument("--eta", default="0.5", help="fixed weight or 'cv'")
    p_bench.add_argument("--threads", type=int, default=1)
    p_bench.add_argument("--tol", type=float, default=1e-6)
    p_bench.add_argument("--max-iter", type=int, default=1000)
    p_bench.add_argument("--seed", type=int, default=None, help="override the config seed")
    p_bench.set_defaults(func=_cmd_benchmark)

    p_eval = sub.add_parser("evaluate", help="reports for a fitted model on data")
    p_eval.add_argument("--model", required=True)
    p_eval.add_argument("--x", action="append", required=True)
    p_eval.add_argument("--y", default=None)
    p_eval.add_argument("--truth", default=None, help="truth archive from simulate")
    p_eval.add_argument("--out", required=True)
    add_common(p_eval)
    p_eval.set_defaults(func=_cmd_evaluate)
    return parser


def main(argv=None) -> int:
    parser = _build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except SJiveError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
