"""Command line entry points.

Each subcommand runs a prefix of the six-stage pipeline (``sample``,
``subspace``, ``design``, ``fit``), the whole thing (``pipeline``), or
one of the studies (``compare``, ``perturb-study``); ``predict``
evaluates a saved surface at new points.  All runs are driven by a JSON
config file mirroring :class:`~activekrig.pipeline.PipelineConfig`;
every field has a default, so ``{"model": {...}}`` is a complete config.

Exit codes: 0 on success, 2 for configuration or input problems, 3 for
numerical failures.
"""

from __future__ import annotations

import argparse
import json
import os
import sys

import numpy as np

from .domain import ReducedDomain, save_design_csv
from .errors import ConfigError, NumericalError
from .kriging import load_model_json, save_model_json
from .models import build_model
from .pipeline import PipelineConfig, _stage, build_design, \
    config_from_dict, execute_pipeline, fit_reduced_surface, \
    run_comparison, run_perturbation_study, sample_gradient_set
from .serialize import format_float, read_csv, write_csv
from .subspace import estimate_subspace, load_subspace_json, \
    save_samples_csv, save_subspace_json
from .surrogate import McSurrogateConfig, evaluate_Ghat_batch, \
    save_training_csv


def load_config(path: str) -> PipelineConfig:
    with open(path) as fh:
        doc = json.load(fh)
    if not isinstance(doc, dict):
        raise ConfigError(f"config file {path} must hold a JSON object")
    return config_from_dict(doc)


def _outpath(args, name: str) -> str:
    os.makedirs(args.outdir, exist_ok=True)
    return os.path.join(args.outdir, name)


def _print_eigenvalue_table(eigenvalues, n: int) -> None:
    """The guide for choosing the partition; n itself stays a config input."""
    total = float(np.sum(eigenvalues))
    print(f"{'index':>5}  {'eigenvalue':>14}  {'cumulative share':>16}")
    running = 0.0
    for i, lam in enumerate(eigenvalues):
        running += float(lam)
        share = running / total if total > 0 else float("nan")
        marker = "  <- partition n" if i == n - 1 else ""
        print(f"{i:>5}  {lam:>14.6e}  {share:>16.9f}{marker}")


# ---------------------------------------------------------------------------
# stage-prefix subcommands

def _stages_for(args, upto: str):
    """Run pipeline stages one through ``upto``, writing artifacts as we go."""
    cfg = load_config(args.config)
    with _stage("sampling"):
        model_fn = build_model(cfg.model)
        samples = sample_gradient_set(cfg, model_fn)
    save_samples_csv(samples, _outpath(args, "samples.csv"))
    if upto == "sample":
        print(f"wrote {os.path.join(args.outdir, 'samples.csv')} "
              f"({cfg.M} samples, m = {model_fn.m})")
        return
    with _stage("subspace"):
        subspace = estimate_subspace(samples, cfg.n)
    save_subspace_json(subspace, _outpath(args, "subspace.json"))
    if upto == "subspace":
        _print_eigenvalue_table(subspace.eigenvalues, subspace.n)
        print(f"wrote {os.path.join(args.outdir, 'subspace.json')}")
        return
    with _stage("domain"):
        reduced = ReducedDomain(model_fn.domain, subspace)
    with _stage("design"):
        design = build_design(reduced, cfg)
    save_design_csv(design, _outpath(args, "design.csv"))
    if upto == "design":
        print(f"wrote {os.path.join(args.outdir, 'design.csv')} "
              f"({design.shape[0]} points in {design.shape[1]} dimensions)")
        return
    with _stage("training"):
        mc = McSurrogateConfig(N=cfg.N, seed=cfg.seeds.mc)
        training = evaluate_Ghat_batch(model_fn, reduced, design, mc)
        model = fit_reduced_surface(cfg, model_fn, samples, subspace,
                                    design, training)
    save_training_csv(design, training, _outpath(args, "training.csv"))
    save_model_json(model, _outpath(args, "model.json"))
    print(f"wrote {os.path.join(args.outdir, 'model.json')} "
          f"(eta2 = {model.hyper.eta2:.6e}, alpha = {model.hyper.alpha:.6e})")


def _cmd_sample(args) -> None:
    _stages_for(args, "sample")


def _cmd_subspace(args) -> None:
    _stages_for(args, "subspace")


def _cmd_design(args) -> None:
    _stages_for(args, "design")


def _cmd_fit(args) -> None:
    _stages_for(args, "fit")


# ---------------------------------------------------------------------------
# full runs and studies

def _cmd_pipeline(args) -> None:
    cfg = load_config(args.config)
    run = execute_pipeline(cfg, outdir=args.outdir)
    summary = run.report.summary()
    print(f"mean relative error   {summary['mean']:.6e}")
    print(f"median relative error {summary['median']:.6e}")
    budget = run.report.budget()
    print(f"budget: {budget['function_evals']} function evals, "
          f"{budget['gradient_evals']} gradient evals "
          f"(effective {budget['effective_cost']})")
    for note in run.notices:
        print(f"notice: {note}")
    print(f"wrote {os.path.join(args.outdir, 'report.json')} "
          f"and companion files")


def _cmd_compare(args) -> None:
    cfg = load_config(args.config)
    result = run_comparison(cfg, outdir=args.outdir)
    print("median relative error by arm:")
    for arm, med in result.medians().items():
        print(f"  {arm:<18} {med:.6e}")
    if result.coordinates:
        print(f"local-sensitivity coordinates: {list(result.coordinates)}")
    for note in result.notices:
        print(f"notice: {note}")
    print(f"wrote {os.path.join(args.outdir, 'comparison.json')}")


def _cmd_perturb_study(args) -> None:
    cfg = load_config(args.config)
    rows = run_perturbation_study(cfg, outdir=args.outdir)
    print(f"{'epsilon':>8}  {'distance':>12}  {'empirical_mse':>14}"
          f"  {'bound':>12}")
    for r in rows:
        print(f"{r['epsilon']:>8.3f}  {r['distance']:>12.6e}"
              f"  {r['empirical_mse']:>14.6e}  {r['bound']:>12.6e}")
    print(f"wrote {os.path.join(args.outdir, 'perturbation_study.csv')}")


def _cmd_predict(args) -> None:
    model = load_model_json(args.model)
    header, points = read_csv(args.points)
    if args.space == "full":
        if args.subspace is None:
            raise ConfigError("--space full requires --subspace")
        subspace = load_subspace_json(args.subspace)
        if points.shape[1] != subspace.W.shape[0]:
            raise ConfigError(
                f"points have {points.shape[1]} columns but the subspace "
                f"expects {subspace.W.shape[0]}")
        points = subspace.to_active(points)
    n = model.design.shape[1]
    if points.shape[1] != n:
        raise ConfigError(
            f"points have {points.shape[1]} columns but the surface "
            f"expects {n}")
    mean, var = model.predict_batch(points)
    out_header = [f"y{i + 1}" for i in range(n)] + ["mean", "variance"]
    rows = np.column_stack([points, mean, var])
    if args.out is not None:
        write_csv(args.out, out_header, rows)
        print(f"wrote {args.out} ({rows.shape[0]} predictions)")
    else:
        print(",".join(out_header))
        for row in rows:
            print(",".join(format_float(c) for c in row))


# ---------------------------------------------------------------------------
# parser and entry point

def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="activekrig",
        description="Detect a function's dominant directions from sampled "
                    "gradients and build a kriging response surface on "
                    "the reduced domain.")
    sub = parser.add_subparsers(dest="command", required=True)

    def add_run(name, help_text, handler):
        p = sub.add_parser(name, help=help_text)
        p.add_argument("--config", required=True,
                       help="JSON config file (PipelineConfig fields)")
        p.add_argument("--outdir", default=".",
                       help="directory for output files (default: .)")
        p.set_defaults(handler=handler)
        return p

    add_run("sample", "draw the gradient sample set and write samples.csv",
            _cmd_sample)
    add_run("subspace", "estimate the dominant directions and print the "
            "eigenvalue table", _cmd_subspace)
    add_run("design", "lay out the reduced-domain design and write "
            "design.csv", _cmd_design)
    add_run("fit", "evaluate training data and fit the kriging surface",
            _cmd_fit)
    add_run("pipeline", "run all six stages and write the full report",
            _cmd_pipeline)
    add_run("compare", "run the subspace arm against the coordinate and "
            "full-space baselines", _cmd_compare)
    add_run("perturb-study", "rerun with rotated bases and tabulate "
            "errors against bounds", _cmd_perturb_study)

    p = sub.add_parser("predict", help="evaluate a saved surface at points")
    p.add_argument("--model", required=True, help="model.json from fit")
    p.add_argument("--points", required=True,
                   help="CSV of points, one per row")
    p.add_argument("--space", choices=("active", "full"), default="active",
                   help="whether points are reduced coordinates or full "
                        "input vectors (default: active)")
    p.add_argument("--subspace",
                   help="subspace.json, required with --space full")
    p.add_argument("--out", help="write predictions here instead of stdout")
    p.set_defaults(handler=_cmd_predict)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        args.handler(args)
    except (NumericalError, np.linalg.LinAlgError, ArithmeticError) as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return 3
    except (ConfigError, ValueError, TypeError, KeyError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    return 0


if __name__ == "__main__":
    sys.exit(main())
