"""Command-line front end tying data generation, fitting, evaluation, model
comparison, and path planning together.

Every command is deterministic given --seed, writes its outputs plus one run
manifest, and exits 0 on success, 1 on domain errors, 2 on usage errors.
"""

from __future__ import annotations

import argparse
import sys
import time
from dataclasses import replace
from pathlib import Path

import numpy as np

from . import io
from .estimation import (
    EmConfig,
    EstimationError,
    baseline_params,
    default_init,
    em_fit,
    forward_backward,
    likelihood_ratio_test,
    mse_fit,
    test_log_likelihood,
)
from .model import basis_matrix
from .planner import PlanInfeasibleError, plan, sweep_ba
from .synth import ScenarioConfig, default_true_params, sample_observations, simulate_flyby, split_dataset


def _config_dict(args: argparse.Namespace) -> dict:
    skip = {"func"}
    return {k: (str(v) if isinstance(v, Path) else v)
            for k, v in vars(args).items() if k not in skip}


def _finish(args, out_path, command: str, inputs: list, outputs: list,
            started: float) -> None:
    io.write_manifest(out_path, command, _config_dict(args), inputs, outputs,
                      getattr(args, "seed", None), time.perf_counter() - started)


def cmd_gen_data(args) -> int:
    started = time.perf_counter()
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    config = ScenarioConfig(
        n_sequences=args.subjects,
        events_per_sequence=args.events,
        sample_rate=args.sample_rate,
        seed=args.seed,
        samples_per_sequence=args.samples_per_sequence,
    )
    theta_true = default_true_params(args.k)
    trajectories = simulate_flyby(config)
    dataset, truth = sample_observations(trajectories, theta_true, seed=args.seed)
    train, test = split_dataset(dataset, args.train_fraction, seed=args.seed)

    outputs = []
    outputs += io.save_dataset(train, out / "train")
    outputs += io.save_dataset(test, out / "test")
    outputs += io.save_ground_truth(truth, dataset, out / "truth")
    theta_path = out / "theta_true.json"
    io.save_model_file(theta_path, io.ModelFile(
        kind="true", k=theta_true.k, params=theta_true,
        standardization=dataset.feature_standardization))
    outputs.append(theta_path)
    print(f"generated {len(train.sequences)} train / {len(test.sequences)} test "
          f"sequences ({dataset.n_samples} samples) in {out}")
    _finish(args, out, "gen-data", [], outputs, started)
    return 0


def cmd_fit(args) -> int:
    started = time.perf_counter()
    dataset = io.load_dataset(args.train)
    config = EmConfig(max_iters=args.max_iters, rel_tol=args.tol, k=args.k,
                      seed=args.seed)
    theta0 = default_init(dataset, args.k, args.seed)
    report = em_fit(dataset, theta0, config, threads=args.threads)
    model = io.ModelFile(
        kind="hmm", k=args.k, params=report.theta_star,
        standardization=dataset.feature_standardization,
        ll_trace=list(report.ll_trace), iterations=report.iterations,
        converged=report.converged, train_log_likelihood=report.ll_trace[-1])
    io.save_model_file(args.out, model)
    print(f"fit k={args.k}: train log-likelihood {report.ll_trace[-1]:.4f}, "
          f"{report.iterations} iterations, converged={report.converged}")
    _finish(args, Path(args.out), "fit", [str(args.train)], [str(args.out)], started)
    return 0


def cmd_fit_mse(args) -> int:
    started = time.perf_counter()
    dataset = io.load_dataset(args.train)
    beta, sigma_sq = mse_fit(dataset)
    theta = baseline_params(beta, sigma_sq)
    train_ll = test_log_likelihood(theta, dataset)
    model = io.ModelFile(
        kind="mse", k=0, params=theta,
        standardization=dataset.feature_standardization,
        train_log_likelihood=train_ll)
    io.save_model_file(args.out, model)
    print(f"mse baseline: residual variance {sigma_sq:.6f}, "
          f"train log-likelihood {train_ll:.4f}")
    _finish(args, Path(args.out), "fit-mse", [str(args.train)], [str(args.out)],
            started)
    return 0


def cmd_eval(args) -> int:
    started = time.perf_counter()
    dataset = io.load_dataset(args.test)
    rows = []
    for model_path in args.model:
        model = io.load_model_file(model_path)
        ll = test_log_likelihood(model.params, dataset)
        rows.append((Path(model_path).stem, model.k, ll))
        print(f"{rows[-1][0]} (K={model.k}): test log-likelihood {ll:.4f}")
    outputs = []
    if args.out:
        io.write_eval_csv(args.out, rows)
        outputs.append(str(args.out))
        _finish(args, Path(args.out), "eval", [str(p) for p in args.model],
                outputs, started)
    return 0


def cmd_compare(args) -> int:
    started = time.perf_counter()
    dataset = io.load_dataset(args.test)
    proposed = io.load_model_file(args.proposed)
    baseline = io.load_model_file(args.baseline)
    ll_p = test_log_likelihood(proposed.params, dataset)
    ll_b = test_log_likelihood(baseline.params, dataset)
    result = likelihood_ratio_test(ll_p, ll_b, extra_params=args.r,
                                   alpha=args.alpha)
    verdict = "reject" if result.reject else "keep"
    print(f"proposed {ll_p:.4f} vs baseline {ll_b:.4f}: lambda = "
          f"{result.statistic:.4f}, chi2({result.dof}) critical at alpha="
          f"{result.alpha} is {result.critical_value:.4f} -> {verdict} the "
          "baseline-only hypothesis")
    if args.out:
        io.write_json(args.out, {
            "ll_proposed": ll_p, "ll_baseline": ll_b,
            "lambda": result.statistic, "dof": result.dof,
            "alpha": result.alpha, "critical_value": result.critical_value,
            "reject": result.reject,
        })
        _finish(args, Path(args.out), "compare",
                [str(args.proposed), str(args.baseline)], [str(args.out)],
                started)
    return 0


def _scenario_with_overrides(args):
    scenario = io.load_scenario(args.scenario)
    overrides = {}
    if args.gamma is not None:
        overrides["gamma"] = args.gamma
    if args.b_a is not None:
        overrides["b_a"] = args.b_a
    if args.degree is not None:
        overrides["degree"] = args.degree
    return replace(scenario, **overrides) if overrides else scenario


def cmd_plan(args) -> int:
    started = time.perf_counter()
    scenario = _scenario_with_overrides(args)
    model = io.load_model_file(args.model).arousal_model()
    result = plan(scenario, model, seed=args.seed, threads=args.threads)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    plan_path = out / "plan.json"
    path_csv = out / "path.csv"
    io.write_json(plan_path, io.plan_result_to_dict(result))
    io.write_path_csv(path_csv, result.curve, scenario.flight_altitude)
    print(f"planned path: cost {result.cost:.4f}, t_f {result.curve.t_f:.3f}s, "
          f"min human distance {result.min_human_distance:.3f}m")
    _finish(args, out, "plan", [str(args.scenario), str(args.model)],
            [str(plan_path), str(path_csv)], started)
    return 0


def cmd_sweep_ba(args) -> int:
    started = time.perf_counter()
    scenario = _scenario_with_overrides(args)
    model = io.load_model_file(args.model).arousal_model()
    values = [float(v) for v in args.b_a_values.split(",") if v.strip()]
    if not values:
        raise ValueError("no b_a values given")
    results = sweep_ba(scenario, model, values, seed=args.seed,
                       threads=args.threads)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    outputs = []
    rows = []
    for b_a, result in results:
        tag = f"{b_a:g}".replace(".", "p")
        path_csv = out / f"path_ba_{tag}.csv"
        io.write_path_csv(path_csv, result.curve, scenario.flight_altitude)
        outputs.append(str(path_csv))
        rows.append([io.fmt_float(b_a), io.fmt_float(result.min_human_distance),
                     io.fmt_float(result.cost), io.fmt_float(result.curve.t_f),
                     str(result.diagnostics.converged)])
        print(f"b_a = {b_a:g}: min human distance "
              f"{result.min_human_distance:.3f}m, cost {result.cost:.4f}")
    sweep_csv = out / "sweep.csv"
    io.write_csv(sweep_csv, ("b_a", "min_human_distance", "cost", "t_f",
                              "converged"), rows)
    outputs.append(str(sweep_csv))
    _finish(args, out, "sweep-ba", [str(args.scenario), str(args.model)],
            outputs, started)
    return 0


def cmd_plot_data(args) -> int:
    started = time.perf_counter()
    dataset = io.load_dataset(args.data)
    model = io.load_model_file(args.model)
    std = dataset.feature_standardization
    rows = []
    for seq in dataset.sequences:
        preds = basis_matrix(seq.features, std) @ model.params.beta
        tables = forward_backward(model.params, seq, std)
        times = seq.times if seq.times is not None else np.arange(len(seq), dtype=float)
        for i in range(len(seq)):
            rows.append([seq.subject_id, io.fmt_float(times[i]),
                         io.fmt_float(seq.targets[i]), io.fmt_float(preds[i]),
                         io.fmt_float(tables.gamma[i, 0])])
    io.write_csv(Path(args.out), ("subject", "t", "y", "y_hat", "p_attentive"),
                  rows)
    print(f"wrote {len(rows)} prediction rows to {args.out}")
    _finish(args, Path(args.out), "plot-data",
            [str(args.data), str(args.model)], [str(args.out)], started)
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="humanaware",
        description="Latent-attention arousal modeling and arousal-aware "
                    "flight path planning.")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("gen-data", help="generate a synthetic fly-by dataset")
    p.add_argument("--events", type=int, default=4,
                   help="fly-by events per subject session")
    p.add_argument("--subjects", type=int, default=12)
    p.add_argument("--k", type=int, default=2, help="true mixture size")
    p.add_argument("--sample-rate", type=float, default=10.0)
    p.add_argument("--samples-per-sequence", type=int, default=None)
    p.add_argument("--train-fraction", type=float, default=0.7)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_gen_data)

    p = sub.add_parser("fit", help="fit the latent-attention model by EM")
    p.add_argument("--train", required=True)
    p.add_argument("--k", type=int, default=2)
    p.add_argument("--max-iters", type=int, default=500)
    p.add_argument("--tol", type=float, default=1e-8)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--threads", type=int, default=1)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_fit)

    p = sub.add_parser("fit-mse", help="fit the least-squares baseline")
    p.add_argument("--train", required=True)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_fit_mse)

    p = sub.add_parser("eval", help="test log-likelihood of fitted models")
    p.add_argument("--model", action="append", required=True,
                   help="model file; may be repeated")
    p.add_argument("--test", required=True)
    p.add_argument("--out", default=None, help="optional CSV output")
    p.set_defaults(func=cmd_eval)

    p = sub.add_parser("compare", help="likelihood-ratio test against the baseline")
    p.add_argument("--proposed", required=True)
    p.add_argument("--baseline", required=True)
    p.add_argument("--test", required=True)
    p.add_argument("--r", type=int, default=10, help="extra parameters (dof)")
    p.add_argument("--alpha", type=float, default=0.01)
    p.add_argument("--out", default=None)
    p.set_defaults(func=cmd_compare)

    p = sub.add_parser("plan", help="plan an arousal-aware path")
    p.add_argument("--scenario", required=True)
    p.add_argument("--model", required=True)
    p.add_argument("--gamma", type=float, default=None)
    p.add_argument("--b-a", dest="b_a", type=float, default=None)
    p.add_argument("--degree", type=int, default=None)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--threads", type=int, default=1)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_plan)

    p = sub.add_parser("sweep-ba", help="plan across arousal thresholds")
    p.add_argument("--scenario", required=True)
    p.add_argument("--model", required=True)
    p.add_argument("--b-a-values", default="0.4,0.3,0.2,0.1")
    p.add_argument("--gamma", type=float, default=None)
    p.add_argument("--b-a", dest="b_a", type=float, default=None)
    p.add_argument("--degree", type=int, default=None)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--threads", type=int, default=1)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_sweep_ba)

    p = sub.add_parser("plot-data", help="export prediction series for plotting")
    p.add_argument("--model", required=True)
    p.add_argument("--data", required=True)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_plot_data)

    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except (ValueError, OSError, KeyError, EstimationError,
            PlanInfeasibleError) as exc:
        print(f"error [{args.command}]: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
