"""End-to-end runs: sample, reduce, design, train, fit, test, report.

The driver executes six stages.  (1) Draw M input samples and record
values and gradients.  (2) Estimate the dominant-direction basis and its
eigenvalues.  (3) Construct the reduced domain for the chosen dimension.
(4) Lay out a design on it.  (5) Evaluate the averaged surrogate at the
design points and fit the kriging surface.  (6) Reuse the M initial
samples as the testing set and report errors, bounds, and budget.

Two baselines reuse the same machinery for comparison studies: a
coordinate subspace picked by a single gradient's largest components, and
a kriging surface over all input variables at the same evaluation budget.
A perturbation study reruns stages three to six with a deliberately
rotated basis to put the error bounds against measured errors.

Everything is deterministic given the three seeds in the config; reports
carry no timestamps, so identical configs give byte-identical outputs.
"""

from __future__ import annotations

import os
from contextlib import contextmanager
from dataclasses import dataclass, field, fields
from typing import Mapping

import numpy as np

from . import plots
from .domain import GAUSSIAN_BOX_HALF_WIDTH, ReducedDomain, \
    save_design_csv, tensor_design, zonotope_design
from .errors import ConfigError
from .kriging import KrigingModel, basis_size, fit, fit_isotropic, \
    save_model_json
from .models import ModelFunction, build_model
from .serialize import write_csv, write_json
from .subspace import ActiveSubspace, BoundInputs, GradientSampleSet, \
    bound_conditional, bound_monte_carlo, bound_perturbed, \
    bound_response_surface, estimate_subspace, local_sensitivity_ranking, \
    perturb_subspace, save_samples_csv, save_subspace_json, subspace_distance
from .surrogate import McSurrogateConfig, evaluate_Ghat_batch, \
    save_training_csv

RELATIVE_ERROR_GUARD = 1e-12
HISTOGRAM_BINS = 20

_TESTING_STREAM = 1
_FULL_SPACE_STREAM = 2


@dataclass(frozen=True)
class PipelineSeeds:
    """The three explicit random streams a run consumes."""

    sampling: int = 0
    mc: int = 1
    perturbation: int = 2

    def __post_init__(self):
        for f in fields(self):
            v = getattr(self, f.name)
            if int(v) != v or v < 0:
                raise ConfigError(
                    f"seed {f.name} must be a nonnegative integer, got {v}")


@dataclass(frozen=True)
class PipelineConfig:
    """Inputs of a full run; every field except the model has a default."""

    model: Mapping
    M: int = 100
    n: int = 1
    points_per_dim: int = 5
    spacing: float | None = None
    N: int = 1
    seeds: PipelineSeeds = field(default_factory=PipelineSeeds)
    local_sensitivity: bool = True
    full_space: bool = True
    test_points: int = 500
    epsilons: tuple = (0.0, 0.05, 0.1, 0.2)
    C1: float | None = None
    C2delta: float = 0.0
    plots: bool = True

    def __post_init__(self):
        if not isinstance(self.model, Mapping):
            raise ConfigError("model must be a mapping of zoo options")
        if self.M < 1:
            raise ConfigError(f"M must be >= 1, got {self.M}")
        if self.n < 1:
            raise ConfigError(f"n must be >= 1, got {self.n}")
        if self.points_per_dim < 2:
            raise ConfigError(
                f"points_per_dim must be >= 2, got {self.points_per_dim}")
        if self.spacing is not None and self.spacing <= 0:
            raise ConfigError(f"spacing must be positive, got {self.spacing}")
        if self.N < 1:
            raise ConfigError(f"N must be >= 1, got {self.N}")
        if self.test_points < 1:
            raise ConfigError(
                f"test_points must be >= 1, got {self.test_points}")
        object.__setattr__(self, "epsilons",
                           tuple(float(e) for e in self.epsilons))
        for e in self.epsilons:
            if not (0.0 <= e <= 0.5):
                raise ConfigError(f"epsilons must lie in [0, 0.5], got {e}")
        if self.C1 is not None and self.C1 <= 0:
            raise ConfigError(f"C1 must be positive, got {self.C1}")
        if self.C2delta < 0:
            raise ConfigError(
                f"C2delta must be nonnegative, got {self.C2delta}")


def config_from_dict(d: Mapping) -> PipelineConfig:
    """Build a config from a plain mapping, rejecting unknown keys."""
    if not isinstance(d, Mapping):
        raise ConfigError("config must be a mapping")
    d = dict(d)
    if "model" not in d:
        raise ConfigError("config is missing the 'model' entry")
    kwargs = {"model": d.pop("model")}
    if "seeds" in d:
        seeds = d.pop("seeds")
        if not isinstance(seeds, Mapping):
            raise ConfigError("seeds must be a mapping")
        extra = set(seeds) - {"sampling", "mc", "perturbation"}
        if extra:
            raise ConfigError(f"unknown seed names: {sorted(extra)}")
        kwargs["seeds"] = PipelineSeeds(**seeds)
    if "comparisons" in d:
        comp = d.pop("comparisons")
        if not isinstance(comp, Mapping):
            raise ConfigError("comparisons must be a mapping")
        extra = set(comp) - {"local_sensitivity", "full_space"}
        if extra:
            raise ConfigError(f"unknown comparison toggles: {sorted(extra)}")
        kwargs.update(comp)
    simple = {"M", "n", "points_per_dim", "spacing", "N", "test_points",
              "epsilons", "C1", "C2delta", "plots"}
    for key in list(d):
        if key in simple:
            kwargs[key] = d.pop(key)
    if d:
        raise ConfigError(f"unknown config keys: {sorted(d)}")
    try:
        return PipelineConfig(**kwargs)
    except TypeError as exc:
        raise ConfigError(str(exc)) from exc


def config_to_dict(cfg: PipelineConfig) -> dict:
    return {
        "model": dict(cfg.model),
        "M": cfg.M,
        "n": cfg.n,
        "points_per_dim": cfg.points_per_dim,
        "spacing": cfg.spacing,
        "N": cfg.N,
        "seeds": {"sampling": cfg.seeds.sampling, "mc": cfg.seeds.mc,
                  "perturbation": cfg.seeds.perturbation},
        "comparisons": {"local_sensitivity": cfg.local_sensitivity,
                        "full_space": cfg.full_space},
        "test_points": cfg.test_points,
        "epsilons": list(cfg.epsilons),
        "C1": cfg.C1,
        "C2delta": cfg.C2delta,
        "plots": cfg.plots,
    }


# ---------------------------------------------------------------------------
# error reports

@dataclass
class ErrorReport:
    """Per-point testing errors plus the evaluation budget that bought them.

    ``errors`` holds relative errors except where the truth magnitude falls
    under the denominator guard; those entries hold the absolute error and
    are marked in ``absolute_flags``.
    """

    truth: np.ndarray
    predictions: np.ndarray
    errors: np.ndarray
    absolute_flags: np.ndarray
    function_evals: int
    gradient_evals: int

    def __post_init__(self):
        self.truth = np.asarray(self.truth, dtype=float).ravel()
        self.predictions = np.asarray(self.predictions, dtype=float).ravel()
        self.errors = np.asarray(self.errors, dtype=float).ravel()
        self.absolute_flags = np.asarray(self.absolute_flags,
                                         dtype=bool).ravel()
        sizes = {self.truth.size, self.predictions.size, self.errors.size,
                 self.absolute_flags.size}
        if len(sizes) != 1 or self.truth.size == 0:
            raise ConfigError("report arrays must share a nonzero length")
        if np.any(self.errors < 0):
            raise ConfigError("errors must be nonnegative")

    @property
    def effective_cost(self) -> int:
        # A gradient is priced at two evaluations.
        return self.function_evals + 2 * self.gradient_evals

    def mean(self) -> float:
        return float(np.mean(self.errors))

    def median(self) -> float:
        return float(np.median(self.errors))

    def summary(self) -> dict:
        q = np.quantile(self.errors, [0.1, 0.25, 0.75, 0.9])
        return {
            "count": int(self.errors.size),
            "mean": self.mean(),
            "median": self.median(),
            "q10": float(q[0]),
            "q25": float(q[1]),
            "q75": float(q[2]),
            "q90": float(q[3]),
            "max": float(np.max(self.errors)),
            "absolute_flagged": int(np.count_nonzero(self.absolute_flags)),
        }

    def budget(self) -> dict:
        return {
            "function_evals": int(self.function_evals),
            "gradient_evals": int(self.gradient_evals),
            "effective_cost": int(self.effective_cost),
        }

    def log10_histogram(self, bins: int = HISTOGRAM_BINS):
        vals = np.log10(np.maximum(self.errors, plots.LOG_ERROR_FLOOR))
        lo = float(np.floor(vals.min()))
        hi = float(np.ceil(vals.max()))
        if hi <= lo:
            hi = lo + 1.0
        counts, edges = np.histogram(vals, bins=bins, range=(lo, hi))
        return edges, counts


def make_error_report(truth, predictions, function_evals: int,
                      gradient_evals: int) -> ErrorReport:
    truth = np.asarray(truth, dtype=float).ravel()
    predictions = np.asarray(predictions, dtype=float).ravel()
    if truth.shape != predictions.shape:
        raise ConfigError("truth and predictions must have equal length")
    abs_err = np.abs(predictions - truth)
    flags = np.abs(truth) < RELATIVE_ERROR_GUARD
    errors = np.where(flags, abs_err, abs_err / np.abs(np.where(flags, 1.0,
                                                                truth)))
    return ErrorReport(truth=truth, predictions=predictions, errors=errors,
                       absolute_flags=flags, function_evals=function_evals,
                       gradient_evals=gradient_evals)


def write_errors_csv(report: ErrorReport, path) -> None:
    header = ["index", "truth", "prediction", "error", "used_absolute"]
    rows = [
        [str(i), t, p, e, "1" if fl else "0"]
        for i, (t, p, e, fl) in enumerate(
            zip(report.truth, report.predictions, report.errors,
                report.absolute_flags))
    ]
    write_csv(path, header, rows)


def write_histogram_csv(report: ErrorReport, path) -> None:
    edges, counts = report.log10_histogram()
    header = ["bin_left", "bin_right", "count"]
    rows = [[edges[i], edges[i + 1], str(int(c))]
            for i, c in enumerate(counts)]
    write_csv(path, header, rows)


# ---------------------------------------------------------------------------
# stage driver

@contextmanager
def _stage(name: str):
    try:
        yield
    except Exception as exc:
        label = f"[stage {name}]"
        if exc.args and isinstance(exc.args[0], str):
            exc.args = (f"{label} {exc.args[0]}",) + exc.args[1:]
        else:
            exc.args = (label,) + exc.args
        raise


def build_design(reduced: ReducedDomain, cfg: PipelineConfig) -> np.ndarray:
    """Design points on the reduced domain per the config's density."""
    if reduced.input_domain.is_gaussian:
        if cfg.spacing is not None:
            ppd = int(round(2.0 * GAUSSIAN_BOX_HALF_WIDTH / cfg.spacing)) + 1
            return tensor_design(reduced, max(ppd, 2))
        return tensor_design(reduced, cfg.points_per_dim)
    spacing = cfg.spacing
    if spacing is None:
        widths = reduced.vertices.max(axis=0) - reduced.vertices.min(axis=0)
        spacing = float(widths.max()) / (cfg.points_per_dim - 1)
    return zonotope_design(reduced, spacing)


@dataclass
class PipelineRun:
    """Everything a finished run produced, for reporting and reuse."""

    config: PipelineConfig
    model_fn: ModelFunction
    samples: GradientSampleSet
    subspace: ActiveSubspace
    reduced: ReducedDomain
    design: np.ndarray
    training: np.ndarray
    kriging: KrigingModel
    report: ErrorReport
    testing_overlap: int
    notices: list


def sample_gradient_set(cfg: PipelineConfig,
                        model_fn: ModelFunction) -> GradientSampleSet:
    """Stage one: M input draws with recorded values and gradients."""
    rng = np.random.default_rng(cfg.seeds.sampling)
    X = model_fn.domain.sample(cfg.M, rng)
    values = np.array([model_fn.eval(x) for x in X])
    grads = np.array([model_fn.grad(x) for x in X])
    return GradientSampleSet(points=X, values=values, gradients=grads)


def fit_reduced_surface(cfg: PipelineConfig, model_fn: ModelFunction,
                        samples: GradientSampleSet,
                        subspace: ActiveSubspace, design: np.ndarray,
                        training: np.ndarray) -> KrigingModel:
    """Stage five's fit, keyed to the basis actually in use.

    Hyperparameters come from the gradient energy along the supplied
    basis, not the stored eigenvalues.  For the estimated eigenbasis the
    two agree, but a perturbed basis leaks active energy into its
    trailing columns and the fit must see that as noise rather than
    interpolate it.  The active head stays in column order; the tail is
    only ever summed, so sorting it is harmless.
    """
    energies = np.mean((samples.gradients @ subspace.W) ** 2, axis=0)
    spectrum = np.concatenate(
        [energies[:cfg.n], np.sort(energies[cfg.n:])[::-1]])
    return fit(design, training, spectrum, cfg.n,
               samples.value_variance(), model_fn.domain, c1=cfg.C1)


def _reduced_stages(cfg: PipelineConfig, model_fn: ModelFunction,
                    samples: GradientSampleSet,
                    subspace: ActiveSubspace):
    """Stages three to six for a given basis; shared with the studies."""
    with _stage("domain"):
        reduced = ReducedDomain(model_fn.domain, subspace)
    with _stage("design"):
        design = build_design(reduced, cfg)
    with _stage("training"):
        mc = McSurrogateConfig(N=cfg.N, seed=cfg.seeds.mc)
        model_fn.trace = []
        try:
            training = evaluate_Ghat_batch(model_fn, reduced, design, mc)
        finally:
            train_hashes = set(model_fn.trace or [])
            model_fn.trace = None
        kriging = fit_reduced_surface(cfg, model_fn, samples, subspace,
                                      design, training)
    with _stage("testing"):
        predictions, _ = kriging.predict_batch(
            subspace.to_active(samples.points))
        test_hashes = {np.ascontiguousarray(x).tobytes()
                       for x in samples.points}
        overlap = len(train_hashes & test_hashes)
        report = make_error_report(samples.values, predictions,
                                   model_fn.eval_count,
                                   model_fn.grad_count)
    return reduced, design, training, kriging, report, overlap


def execute_pipeline(cfg: PipelineConfig, outdir=None,
                     model_fn: ModelFunction | None = None) -> PipelineRun:
    """Run all six stages, optionally writing the report files."""
    notices = []
    if model_fn is None:
        with _stage("sampling"):
            model_fn = build_model(cfg.model)
    model_fn.reset_counters()
    with _stage("sampling"):
        samples = sample_gradient_set(cfg, model_fn)
    with _stage("subspace"):
        subspace = estimate_subspace(samples, cfg.n)
    reduced, design, training, kriging, report, overlap = _reduced_stages(
        cfg, model_fn, samples, subspace)
    if overlap:
        notices.append(
            f"{overlap} training evaluation(s) coincide with testing points")
    run = PipelineRun(config=cfg, model_fn=model_fn, samples=samples,
                      subspace=subspace, reduced=reduced, design=design,
                      training=training, kriging=kriging, report=report,
                      testing_overlap=overlap, notices=notices)
    if outdir is not None:
        write_run_outputs(run, outdir)
    return run


def run_pipeline(cfg: PipelineConfig, outdir=None):
    """Public entry point: returns (subspace, kriging model, error report)."""
    run = execute_pipeline(cfg, outdir=outdir)
    return run.subspace, run.kriging, run.report


def _bound_inputs(cfg: PipelineConfig, subspace: ActiveSubspace,
                  model_fn: ModelFunction, epsilon: float = 0.0,
                  C2delta: float | None = None) -> BoundInputs:
    c1 = cfg.C1 if cfg.C1 is not None else \
        model_fn.domain.poincare_constant()
    return BoundInputs(eigenvalues=subspace.eigenvalues, n=cfg.n, C1=c1,
                       N=cfg.N,
                       C2delta=cfg.C2delta if C2delta is None else C2delta,
                       epsilon=epsilon)


def build_report_payload(run: PipelineRun) -> dict:
    b = _bound_inputs(run.config, run.subspace, run.model_fn)
    return {
        "format": "pipeline-report-v1",
        "config": config_to_dict(run.config),
        "model": {"name": run.model_fn.name, "m": run.model_fn.m,
                  "input_domain": run.model_fn.domain.kind},
        "eigenvalues": [float(v) for v in run.subspace.eigenvalues],
        "subspace": {"n": run.subspace.n,
                     "active_sum": run.subspace.active_sum(),
                     "tail_sum": run.subspace.tail_sum()},
        "design_points": int(run.design.shape[0]),
        "bounds": {
            "conditional": bound_conditional(b),
            "monte_carlo": bound_monte_carlo(b),
            "response_surface": bound_response_surface(b),
        },
        "error_summary": run.report.summary(),
        "budget": run.report.budget(),
        "testing_set_overlap": run.testing_overlap,
        "notices": list(run.notices),
    }


def write_run_outputs(run: PipelineRun, outdir) -> None:
    os.makedirs(outdir, exist_ok=True)

    def path(name):
        return os.path.join(outdir, name)

    save_samples_csv(run.samples, path("samples.csv"))
    save_subspace_json(run.subspace, path("subspace.json"))
    save_design_csv(run.design, path("design.csv"))
    save_training_csv(run.design, run.training, path("training.csv"))
    save_model_json(run.kriging, path("model.json"))
    write_errors_csv(run.report, path("errors.csv"))
    write_histogram_csv(run.report, path("histogram.csv"))
    write_json(path("report.json"), build_report_payload(run))
    if run.config.plots:
        plots.plot_eigenvalue_decay(run.subspace.eigenvalues, run.subspace.n,
                                    path("eigenvalues.png"))
        plots.plot_error_histogram({"surface": run.report.errors},
                                   path("error_histogram.png"))
        testing_y = run.subspace.to_active(run.samples.points)
        if run.subspace.n == 1:
            plots.plot_surface_section(run.kriging, testing_y,
                                       run.samples.values,
                                       path("surface_section.png"))
        elif run.subspace.n == 2:
            plots.plot_surface_contour(run.kriging,
                                       path("surface_contour.png"))


# ---------------------------------------------------------------------------
# baselines

def _coordinate_subspace(gradient: np.ndarray, n: int) -> ActiveSubspace:
    """Axis-aligned basis ordered by a single gradient's magnitudes."""
    ranking = np.argsort(-np.abs(gradient), kind="stable")
    m = gradient.size
    W = np.eye(m)[:, ranking]
    eigenvalues = np.abs(gradient[ranking]) ** 2
    if eigenvalues[0] <= 0:
        eigenvalues = np.ones(m)
    return ActiveSubspace(W=W, eigenvalues=eigenvalues, n=n)


def run_local_sensitivity_baseline(cfg: PipelineConfig,
                                   model_fn: ModelFunction | None = None,
                                   testing=None):
    """Coordinate-subspace arm: one gradient picks the axes.

    Returns (selected coordinate indices, kriging model, error report).
    ``testing`` is an optional (points, values) pair; by default the arm
    draws the same M samples the main pipeline tests on.
    """
    if model_fn is None:
        model_fn = build_model(cfg.model)
    model_fn.reset_counters()
    with _stage("subspace"):
        origin = np.zeros(model_fn.m)
        gradient = model_fn.grad(origin)

        class _Precomputed:
            def grad(self, _):
                return gradient

        ranking = local_sensitivity_ranking(_Precomputed(), origin)
        coords = [int(i) for i in ranking[: cfg.n]]
        subspace = _coordinate_subspace(gradient, cfg.n)
    with _stage("domain"):
        reduced = ReducedDomain(model_fn.domain, subspace)
    with _stage("design"):
        design = build_design(reduced, cfg)
    with _stage("training"):
        mc = McSurrogateConfig(N=cfg.N, seed=cfg.seeds.mc)
        training = evaluate_Ghat_batch(model_fn, reduced, design, mc)
        kriging = fit_isotropic(design, training, basis_degree=2)
    with _stage("testing"):
        if testing is None:
            rng = np.random.default_rng(cfg.seeds.sampling)
            X = model_fn.domain.sample(cfg.M, rng)
            f = np.array([model_fn.eval(x) for x in X])
            trained_evals = model_fn.eval_count - X.shape[0]
        else:
            X, f = testing
            trained_evals = model_fn.eval_count
        predictions, _ = kriging.predict_batch(subspace.to_active(X))
        report = make_error_report(f, predictions, trained_evals,
                                   model_fn.grad_count)
    return coords, kriging, report


def run_full_space_baseline(cfg: PipelineConfig,
                            model_fn: ModelFunction | None = None,
                            testing=None, budget: int | None = None,
                            notices: list | None = None):
    """Kriging over all input variables at the matched evaluation budget.

    The training set contains ``budget`` fresh points (three evaluations
    per pipeline sample plus the design size when not given).  The mean
    polynomial degrades from quadratic to linear when the budget cannot
    poise a quadratic, with a notice recorded.
    """
    if model_fn is None:
        model_fn = build_model(cfg.model)
    model_fn.reset_counters()
    m = model_fn.m
    if budget is None:
        budget = 3 * cfg.M + (cfg.points_per_dim ** cfg.n) * cfg.N
    degree = 2
    if budget < basis_size(m, 2):
        degree = 1
        note = (f"full-space mean degraded to linear: budget {budget} "
                f"cannot poise a quadratic in {m} variables")
        if notices is not None:
            notices.append(note)
    with _stage("training"):
        rng = np.random.default_rng([cfg.seeds.sampling, _FULL_SPACE_STREAM])
        X_train = model_fn.domain.sample(budget, rng)
        f_train = np.array([model_fn.eval(x) for x in X_train])
        kriging = fit_isotropic(X_train, f_train, basis_degree=degree)
    with _stage("testing"):
        if testing is None:
            rng = np.random.default_rng([cfg.seeds.sampling,
                                         _TESTING_STREAM])
            X = model_fn.domain.sample(cfg.test_points, rng)
            f = np.array([model_fn.eval(x) for x in X])
        else:
            X, f = testing
        predictions, _ = kriging.predict_batch(X)
        report = make_error_report(f, predictions, budget, 0)
    return kriging, report


# ---------------------------------------------------------------------------
# comparison study

@dataclass
class ComparisonResult:
    config: PipelineConfig
    run: PipelineRun
    testing_points: np.ndarray
    testing_values: np.ndarray
    reports: dict
    coordinates: list
    notices: list

    def medians(self) -> dict:
        return {arm: r.median() for arm, r in self.reports.items()}


def run_comparison(cfg: PipelineConfig, outdir=None) -> ComparisonResult:
    """All arms on one fresh testing set of ``cfg.test_points`` points."""
    model_fn = build_model(cfg.model)
    run = execute_pipeline(cfg, outdir=outdir, model_fn=model_fn)
    asm_evals = model_fn.eval_count
    asm_grads = model_fn.grad_count
    rng = np.random.default_rng([cfg.seeds.sampling, _TESTING_STREAM])
    X_test = model_fn.domain.sample(cfg.test_points, rng)
    f_test = np.array([model_fn.eval(x) for x in X_test])
    testing = (X_test, f_test)
    notices = list(run.notices)
    predictions, _ = run.kriging.predict_batch(
        run.subspace.to_active(X_test))
    reports = {"subspace": make_error_report(f_test, predictions,
                                             asm_evals, asm_grads)}
    coordinates = []
    if cfg.local_sensitivity:
        coordinates, _, sens_report = run_local_sensitivity_baseline(
            cfg, model_fn=model_fn, testing=testing)
        reports["local_sensitivity"] = sens_report
    if cfg.full_space:
        budget = asm_evals + 2 * asm_grads
        _, full_report = run_full_space_baseline(
            cfg, model_fn=model_fn, testing=testing, budget=budget,
            notices=notices)
        reports["full_space"] = full_report
    result = ComparisonResult(config=cfg, run=run, testing_points=X_test,
                              testing_values=f_test, reports=reports,
                              coordinates=coordinates, notices=notices)
    if outdir is not None:
        write_comparison_outputs(result, outdir)
    return result


_ARM_FILES = {"subspace": "errors_asm.csv",
              "local_sensitivity": "errors_sens.csv",
              "full_space": "errors_full.csv"}


def write_comparison_outputs(result: ComparisonResult, outdir) -> None:
    os.makedirs(outdir, exist_ok=True)
    for arm, report in result.reports.items():
        write_errors_csv(report, os.path.join(outdir, _ARM_FILES[arm]))
    payload = {
        "format": "comparison-report-v1",
        "config": config_to_dict(result.config),
        "testing_points": int(result.testing_points.shape[0]),
        "medians": result.medians(),
        "means": {arm: r.mean() for arm, r in result.reports.items()},
        "budgets": {arm: r.budget() for arm, r in result.reports.items()},
        "selected_coordinates": list(result.coordinates),
        "notices": list(result.notices),
    }
    write_json(os.path.join(outdir, "comparison.json"), payload)
    if result.config.plots:
        plots.plot_error_histogram(
            {arm: r.errors for arm, r in result.reports.items()},
            os.path.join(outdir, "comparison_histogram.png"))


# ---------------------------------------------------------------------------
# perturbation study

def run_perturbation_study(cfg: PipelineConfig, epsilons=None,
                           outdir=None) -> list:
    """Measure error growth as the basis is rotated away from the truth.

    For each perturbation size the study reruns stages three to six with
    the rotated basis under identical seeds and reports the measured mean
    squared error next to the theoretical bound.  The bound's surface term
    is calibrated as the larger of the configured ``C2delta`` and the
    measured error of the unperturbed run, so the zero row is honest by
    construction.
    """
    eps_list = list(cfg.epsilons if epsilons is None else
                    [float(e) for e in epsilons])
    for e in eps_list:
        if not (0.0 <= e <= 0.5):
            raise ConfigError(f"epsilons must lie in [0, 0.5], got {e}")
    model_fn = build_model(cfg.model)
    model_fn.reset_counters()
    with _stage("sampling"):
        samples = sample_gradient_set(cfg, model_fn)
    with _stage("subspace"):
        subspace = estimate_subspace(samples, cfg.n)

    def rerun(sub):
        _, _, _, _, report, _ = _reduced_stages(cfg, model_fn, samples, sub)
        return float(np.mean((report.truth - report.predictions) ** 2))

    mse0 = rerun(subspace)
    c2delta = max(cfg.C2delta, mse0)
    rows = []
    for eps in eps_list:
        if eps == 0.0:
            mse, dist = mse0, 0.0
        else:
            perturbed = perturb_subspace(subspace, eps,
                                         cfg.seeds.perturbation)
            mse = rerun(perturbed)
            dist = subspace_distance(subspace.W, perturbed.W)
        bound = bound_perturbed(
            _bound_inputs(cfg, subspace, model_fn, epsilon=eps,
                          C2delta=c2delta),
            kind="response_surface")
        rows.append({"epsilon": eps, "distance": dist,
                     "empirical_mse": mse, "bound": bound})
    if outdir is not None:
        os.makedirs(outdir, exist_ok=True)
        header = ["epsilon", "distance", "empirical_mse", "bound"]
        write_csv(os.path.join(outdir, "perturbation_study.csv"), header,
                  [[r["epsilon"], r["distance"], r["empirical_mse"],
                    r["bound"]] for r in rows])
    return rows
