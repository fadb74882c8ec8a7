"""Command-line front end: fit, simulate, benchmark, select, check-id.

Exit codes: 0 success, 2 fit did not converge (outputs are still written),
3 input error, 4 identifiability check failed.
"""

from __future__ import annotations

import argparse
import csv
import json
import os
import sys
from pathlib import Path

import numpy as np

from . import car, fileio, plots
from .components import ComponentError
from .identify import check_identifiability
from .initialization import EstimationError, ive, pearson_type, qp_init
from .likelihood import (Dataset, LikelihoodError, confidence_intervals, fit_sce,
                         loglikelihood)
from .selection import average_effects, select_best
from .shrinkage import (ShrinkageError, lambda_bootstrap, lambda_upper,
                        nearest_pd_correlation, wsce)
from .simulate import (DEFAULT_ESTIMATORS, ScenarioConfig, SimulationError,
                       run_benchmark, scenario_structures, simulate_replicate)

EXIT_OK = 0
EXIT_NOCONV = 2
EXIT_INPUT = 3
EXIT_NONIDENT = 4

INPUT_ERRORS = (fileio.InputError, ComponentError, EstimationError,
                LikelihoodError, ShrinkageError, SimulationError, car.GraphError)


def _threads(args):
    if args.threads is not None:
        return args.threads
    env = os.environ.get("STRUCTCOV_THREADS")
    return int(env) if env else 1


def _load_dataset(args):
    y = fileio.load_matrix_csv(args.data)
    t, d = y.shape
    mask = None
    if args.mask:
        mask = fileio.load_matrix_csv(args.mask).astype(bool)
        if mask.shape != (t, d):
            raise fileio.InputError("mask shape %s does not match data %s"
                                    % (mask.shape, (t, d)))
    if args.mode == "known":
        if not args.mu or not args.sigma:
            raise fileio.InputError("known mode requires --mu and --sigma files")
        mu = fileio.load_vector_or_matrix(args.mu, t, d)
        sigma = fileio.load_vector_or_matrix(args.sigma, t, d)
        return Dataset.from_observations(y, mask=mask, mu=mu, sigma=sigma), d
    return Dataset.from_observations(y, mask=mask), d


def _matrix_list(m):
    return [[float(v) for v in row] for row in np.asarray(m)]


def cmd_fit(args):
    data, d = _load_dataset(args)
    cfg = fileio.load_model_config(args.model)
    cset = fileio.build_covariate_set(cfg, Path(args.model).parent, d=d)
    beta_grid = fileio.parse_beta_grid(args.beta_grid or cfg.get("beta_grid"))

    errors = data.standardized_errors()
    r_pearson = pearson_type(errors)
    init = qp_init(r_pearson, cset, beta_grid=beta_grid)
    fit = fit_sce(data, cset, init.theta0)

    payload = {
        "theta": {
            "alpha": [float(a) for a in fit.theta.alpha],
            "delta": fit.theta.delta,
            "beta": fit.theta.beta,
        },
        "free_names": list(fit.free_names),
        "theta0": {
            "alpha": [float(a) for a in init.theta0.alpha],
            "delta": init.theta0.delta,
            "beta": init.theta0.beta,
        },
        "loglik_transformed": fit.loglik_transformed,
        "loglik": float(loglikelihood(fit)),
        "converged": fit.converged,
        "iterations": fit.iterations,
        "grad_norm": fit.grad_norm,
        "fisher": _matrix_list(fit.fisher),
        "R_sce": _matrix_list(fit.R),
        "R_ive": _matrix_list(ive(init.theta0, cset)),
        "average_effects": average_effects(fit.theta, cset).effects,
    }
    try:
        payload["confidence_intervals"] = {
            name: {"estimate": v, "low": lo, "high": hi}
            for name, (v, lo, hi) in confidence_intervals(fit).items()}
    except LikelihoodError as exc:
        payload["confidence_intervals"] = {"error": str(exc)}

    r_report = fit.R
    if not args.no_wsce:
        pd_pearson = nearest_pd_correlation(r_pearson)
        known = args.mode == "known"
        if errors.complete and known:
            est = lambda_upper(fit, cset, pd_pearson, data.t)
        else:
            boot = cfg.get("bootstrap", {})
            est = lambda_bootstrap(fit, cset, data,
                                   b=args.bootstrap_b or boot.get("b", 100),
                                   seed=args.seed if args.seed is not None
                                   else boot.get("seed", 0))
        r_wsce = wsce(fit.R, pd_pearson, est.lam)
        payload["lambda"] = {
            "value": est.lam, "method": est.method, "clamped": est.clamped,
            "pi": est.pi_hat, "rho": est.rho_hat, "gamma": est.gamma_hat,
        }
        payload["R_wsce"] = _matrix_list(r_wsce)
        r_report = r_wsce

    out = Path(args.out or "fit.json")
    fileio.write_json(out, payload)
    fileio.save_matrix_csv(out.with_name(out.stem + "_sce.csv"), fit.R)
    if not args.no_wsce:
        fileio.save_matrix_csv(out.with_name(out.stem + "_wsce.csv"), r_wsce)
    if not args.no_figures:
        plots.correlation_heatmap(r_report, out.with_name(out.stem + ".png"))
    print("wrote %s (converged=%s, loglik=%.6f)"
          % (out, fit.converged, payload["loglik"]))
    return EXIT_OK if fit.converged else EXIT_NOCONV


def cmd_simulate(args):
    config = ScenarioConfig(kind=args.setting, d=args.d, t=args.t, xi=args.xi,
                            missing="monotone" if args.missing else None,
                            known_musigma=args.mode == "known", seed=args.seed or 0)
    r_true, cset, data = simulate_replicate(config, rep=0)
    out = Path(args.out or "simulated")
    out.mkdir(parents=True, exist_ok=True)
    fileio.save_matrix_csv(out / "data.csv", data.y)
    fileio.save_matrix_csv(out / "mask.csv", data.mask.astype(float))
    fileio.save_matrix_csv(out / "mu.csv", data.mu_hat)
    fileio.save_matrix_csv(out / "sigma.csv", data.sigma_hat)
    fileio.save_matrix_csv(out / "r_true.csv", r_true)
    labels_a, labels_b, graph = scenario_structures(config, rep=0)
    with open(out / "comcol.csv", "w", newline="") as handle:
        w = csv.writer(handle)
        w.writerow(["id", "label"])
        w.writerows(enumerate(labels_a))
    with open(out / "region.csv", "w", newline="") as handle:
        w = csv.writer(handle)
        w.writerow(["id", "label"])
        w.writerows(enumerate(labels_b))
    edges = np.argwhere(np.triu(graph.adjacency, 1) > 0)
    if len(edges):
        np.savetxt(out / "adjacency.csv", edges, delimiter=",", fmt="%d")
    else:
        np.savetxt(out / "adjacency.csv", graph.adjacency, delimiter=",", fmt="%d")
    fileio.write_json(out / "model.json", {
        "components": [
            {"name": "comcol", "kind": "cluster", "source": "comcol.csv"},
            {"name": "region", "kind": "cluster", "source": "region.csv"},
            {"name": "global", "kind": "global"},
        ],
        "spatial": {"adjacency": "adjacency.csv"},
        "mode": args.mode,
        "beta_grid": "0.02:0.98:25",
    })
    fileio.write_json(out / "scenario.json", {
        "kind": config.kind, "d": config.d, "t": config.t, "xi": config.xi,
        "seed": config.seed, "missing": config.missing,
        "theta_star": {"alpha": [float(a) for a in config.theta_star.alpha],
                       "delta": config.theta_star.delta,
                       "beta": config.theta_star.beta}})
    print("wrote scenario files under %s" % out)
    return EXIT_OK


def cmd_benchmark(args):
    config = ScenarioConfig(kind=args.setting, d=args.d, t=args.t, xi=args.xi,
                            missing="monotone" if args.missing else None,
                            known_musigma=args.mode == "known", seed=args.seed or 0,
                            bootstrap_b=args.bootstrap_b or 100)
    estimators = tuple(args.estimators.split(",")) if args.estimators \
        else DEFAULT_ESTIMATORS
    report = run_benchmark(config, estimators=estimators, reps=args.reps,
                           threads=_threads(args))
    out = Path(args.out or "benchmark.json")
    fileio.write_json(out, report.to_dict())
    csv_path = out.with_name(out.stem + ".csv")
    with open(csv_path, "w", newline="") as handle:
        w = csv.writer(handle)
        w.writerow(["replicate", "estimator", "mae", "seconds"])
        for name in report.estimators:
            for rep, (err, sec) in enumerate(zip(report.maes[name],
                                                 report.seconds[name])):
                w.writerow([rep, name, fileio.FLOAT_FMT % err, "%.3f" % sec])
    if not args.no_figures:
        plots.benchmark_boxplot(report, out.with_name(out.stem + ".png"))
    means = {name: float(np.mean(report.maes[name])) for name in report.estimators}
    print("wrote %s; mean MAE: %s"
          % (out, ", ".join("%s=%.4f" % kv for kv in means.items())))
    return EXIT_OK


def cmd_select(args):
    data, d = _load_dataset(args)
    cfg = fileio.load_model_config(args.model)
    cset = fileio.build_covariate_set(cfg, Path(args.model).parent, d=d)
    beta_grid = fileio.parse_beta_grid(args.beta_grid or cfg.get("beta_grid"))
    candidates, centered = select_best(data, cset, beta_grid=beta_grid)
    payload = {
        "ranking": [
            {"components": list(c.index_set), "bic": c.bic,
             "converged": c.converged,
             "centered_bic": delta}
            for c, delta in centered
        ],
        "best": list(candidates[0].index_set),
    }
    out = Path(args.out or "selection.json")
    fileio.write_json(out, payload)
    csv_path = out.with_name(out.stem + ".csv")
    with open(csv_path, "w", newline="") as handle:
        w = csv.writer(handle)
        w.writerow(["rank", "components", "bic", "centered_bic", "converged"])
        for rank, (c, delta) in enumerate(centered):
            w.writerow([rank, "+".join(c.index_set), fileio.FLOAT_FMT % c.bic,
                        fileio.FLOAT_FMT % delta, int(c.converged)])
    if not args.no_figures:
        plots.selection_chart(centered, out.with_name(out.stem + ".png"))
    print("wrote %s; best model: %s" % (out, "+".join(candidates[0].index_set)))
    return EXIT_OK


def cmd_check_id(args):
    cfg = fileio.load_model_config(args.model)
    cset = fileio.build_covariate_set(cfg, Path(args.model).parent)
    grid = fileio.parse_beta_grid(args.grid or cfg.get("beta_grid"))
    report = check_identifiability(cset, beta_grid=grid,
                                   tol=args.tol if args.tol else 1e-7)
    payload = report.to_dict()
    print(json.dumps(payload, indent=2, sort_keys=True))
    if args.out:
        fileio.write_json(args.out, payload)
    return EXIT_OK if report.identifiable else EXIT_NONIDENT


def build_parser():
    parser = argparse.ArgumentParser(
        prog="structcov",
        description="structured correlation estimation from pairwise and "
                    "spatial covariates")
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p):
        p.add_argument("--seed", type=int, default=None)
        p.add_argument("--threads", type=int, default=None,
                       help="worker threads (default: STRUCTCOV_THREADS or 1)")
        p.add_argument("--out", type=str, default=None)
        p.add_argument("--no-figures", action="store_true",
                       help="skip rendering PNG figures next to the reports")

    p_fit = sub.add_parser("fit", help="fit the structured estimator to data")
    p_fit.add_argument("--data", required=True)
    p_fit.add_argument("--model", required=True)
    p_fit.add_argument("--mask")
    p_fit.add_argument("--mu")
    p_fit.add_argument("--sigma")
    p_fit.add_argument("--mode", choices=("known", "unknown"), default="unknown")
    p_fit.add_argument("--beta-grid")
    p_fit.add_argument("--bootstrap-b", type=int, default=None)
    p_fit.add_argument("--no-wsce", action="store_true")
    common(p_fit)

    p_sim = sub.add_parser("simulate", help="write one simulated scenario to disk")
    p_sim.add_argument("--setting", choices=("fss", "structured"), default="fss")
    p_sim.add_argument("--d", type=int, default=200)
    p_sim.add_argument("--t", type=int, default=11)
    p_sim.add_argument("--xi", type=float, default=0.0)
    p_sim.add_argument("--missing", action="store_true")
    p_sim.add_argument("--mode", choices=("known", "unknown"), default="known")
    common(p_sim)

    p_bench = sub.add_parser("benchmark", help="run the estimator benchmark")
    p_bench.add_argument("--setting", choices=("fss", "structured"), default="fss")
    p_bench.add_argument("--d", type=int, default=200)
    p_bench.add_argument("--t", type=int, default=11)
    p_bench.add_argument("--xi", type=float, default=0.0)
    p_bench.add_argument("--reps", type=int, default=40)
    p_bench.add_argument("--missing", action="store_true")
    p_bench.add_argument("--mode", choices=("known", "unknown"), default="known")
    p_bench.add_argument("--estimators",
                         help="comma-separated subset of: %s" % ",".join(DEFAULT_ESTIMATORS))
    p_bench.add_argument("--bootstrap-b", type=int, default=None)
    common(p_bench)

    p_sel = sub.add_parser("select", help="BIC model selection over component subsets")
    p_sel.add_argument("--data", required=True)
    p_sel.add_argument("--model", required=True)
    p_sel.add_argument("--mask")
    p_sel.add_argument("--mu")
    p_sel.add_argument("--sigma")
    p_sel.add_argument("--mode", choices=("known", "unknown"), default="unknown")
    p_sel.add_argument("--beta-grid")
    common(p_sel)

    p_id = sub.add_parser("check-id", help="identifiability check for a model config")
    p_id.add_argument("--model", required=True)
    p_id.add_argument("--grid", help="beta grid as start:stop:count")
    p_id.add_argument("--tol", type=float, default=None)
    common(p_id)
    return parser


def main(argv=None):
    parser = build_parser()
    args = parser.parse_args(argv)
    handlers = {
        "fit": cmd_fit,
        "simulate": cmd_simulate,
        "benchmark": cmd_benchmark,
        "select": cmd_select,
        "check-id": cmd_check_id,
    }
    try:
        return handlers[args.command](args)
    except INPUT_ERRORS as exc:
        print("error: %s" % exc, file=sys.stderr)
        return EXIT_INPUT


if __name__ == "__main__":
    sys.exit(main())
