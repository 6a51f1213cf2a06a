"""Pipeline orchestration: config handling, reports, runs, baselines."""

import os

import numpy as np
import pytest

from activekrig.errors import ConfigError
from activekrig.pipeline import (
    ErrorReport,
    PipelineConfig,
    PipelineSeeds,
    config_from_dict,
    config_to_dict,
    execute_pipeline,
    make_error_report,
    run_comparison,
    run_full_space_baseline,
    run_local_sensitivity_baseline,
    run_perturbation_study,
    run_pipeline,
)
from activekrig.serialize import read_csv, read_json
from activekrig.subspace import BoundInputs, bound_perturbed

RIDGE_A = [0.7, 0.3, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0]


def ridge_config(**overrides):
    base = dict(model={"name": "ridge", "a": RIDGE_A}, M=20, n=1,
                points_per_dim=25, test_points=100, plots=False)
    base.update(overrides)
    return PipelineConfig(**base)


class TestConfig:
    def test_from_dict_full(self):
        cfg = config_from_dict({
            "model": {"name": "ridge", "a": [1.0, 0.5]},
            "M": 30, "n": 1, "points_per_dim": 7, "N": 2,
            "seeds": {"sampling": 5, "mc": 6, "perturbation": 7},
            "comparisons": {"local_sensitivity": False, "full_space": True},
            "test_points": 50, "epsilons": [0.0, 0.1],
            "C1": 2.0, "C2delta": 0.5, "plots": False,
        })
        assert cfg.M == 30
        assert cfg.seeds.mc == 6
        assert cfg.local_sensitivity is False
        assert cfg.full_space is True
        assert cfg.epsilons == (0.0, 0.1)

    def test_defaults(self):
        cfg = config_from_dict({"model": {"name": "ridge", "a": [1.0, 0.5]}})
        assert cfg.M == 100
        assert cfg.n == 1
        assert cfg.N == 1
        assert cfg.points_per_dim == 5
        assert cfg.test_points == 500
        assert cfg.seeds == PipelineSeeds()
        assert cfg.plots is True

    def test_round_trip(self):
        cfg = ridge_config(N=3, C1=1.5)
        again = config_from_dict(config_to_dict(cfg))
        assert again == cfg

    def test_rejects_unknown_keys(self):
        with pytest.raises(ConfigError, match="unknown config"):
            config_from_dict({"model": {"name": "ridge", "a": [1, 1]},
                              "bogus": 3})
        with pytest.raises(ConfigError, match="seed"):
            config_from_dict({"model": {"name": "ridge", "a": [1, 1]},
                              "seeds": {"extra": 1}})
        with pytest.raises(ConfigError, match="comparison"):
            config_from_dict({"model": {"name": "ridge", "a": [1, 1]},
                              "comparisons": {"other": True}})
        with pytest.raises(ConfigError, match="model"):
            config_from_dict({"M": 10})

    def test_rejects_invalid_values(self):
        with pytest.raises(ConfigError):
            ridge_config(M=0)
        with pytest.raises(ConfigError):
            ridge_config(n=0)
        with pytest.raises(ConfigError):
            ridge_config(N=0)
        with pytest.raises(ConfigError):
            ridge_config(epsilons=(0.7,))
        with pytest.raises(ConfigError):
            ridge_config(C2delta=-1.0)
        with pytest.raises(ConfigError):
            PipelineSeeds(sampling=-1)


class TestErrorReport:
    def test_relative_and_absolute_entries(self):
        report = make_error_report([2.0, 0.0], [2.2, 0.3], 10, 4)
        assert report.errors[0] == pytest.approx(0.1, rel=1e-12)
        assert report.errors[1] == pytest.approx(0.3, rel=1e-12)
        assert not report.absolute_flags[0]
        assert report.absolute_flags[1]
        assert report.effective_cost == 18

    def test_summary_and_histogram(self):
        rng = np.random.default_rng(0)
        truth = rng.uniform(1.0, 2.0, 64)
        pred = truth * (1.0 + rng.uniform(-0.1, 0.1, 64))
        report = make_error_report(truth, pred, 64, 0)
        s = report.summary()
        assert s["count"] == 64
        assert s["q25"] <= s["median"] <= s["q75"]
        assert s["absolute_flagged"] == 0
        edges, counts = report.log10_histogram()
        assert counts.sum() == 64
        assert edges.size == counts.size + 1

    def test_rejects_negative_errors(self):
        with pytest.raises(ConfigError):
            ErrorReport(truth=[1.0], predictions=[1.0], errors=[-0.1],
                        absolute_flags=[False], function_evals=1,
                        gradient_evals=0)


class TestRidgePipeline:
    def test_exactly_one_dimensional_function_is_recovered(self):
        # Smooth, noiseless, and exactly one-dimensional: the surface
        # should be accurate to interpolation error.
        _, _, report = run_pipeline(ridge_config())
        assert report.mean() <= 1e-6

    def test_budget_accounting(self):
        cfg = ridge_config(N=2)
        _, _, report = run_pipeline(cfg)
        P = cfg.points_per_dim
        assert report.function_evals == cfg.M + P * cfg.N
        assert report.gradient_evals == cfg.M
        assert report.effective_cost == 3 * cfg.M + P * cfg.N

    def test_output_files(self, tmp_path):
        cfg = ridge_config(plots=True)
        run_pipeline(cfg, outdir=str(tmp_path))
        expected = ["samples.csv", "subspace.json", "design.csv",
                    "training.csv", "model.json", "errors.csv",
                    "report.json", "histogram.csv", "eigenvalues.png",
                    "error_histogram.png", "surface_section.png"]
        for name in expected:
            assert (tmp_path / name).exists(), name
        header, rows = read_csv(tmp_path / "errors.csv")
        assert header == ["index", "truth", "prediction", "error",
                          "used_absolute"]
        assert rows.shape[0] == cfg.M
        report = read_json(tmp_path / "report.json")
        assert report["budget"]["effective_cost"] == \
            3 * cfg.M + cfg.points_per_dim
        assert report["testing_set_overlap"] == 0
        assert report["bounds"]["monte_carlo"] >= 0
        hheader, hrows = read_csv(tmp_path / "histogram.csv")
        assert hheader == ["bin_left", "bin_right", "count"]
        assert int(hrows[:, 2].sum()) == cfg.M

    def test_plots_can_be_disabled(self, tmp_path):
        run_pipeline(ridge_config(plots=False), outdir=str(tmp_path))
        assert not list(tmp_path.glob("*.png"))

    def test_deterministic_outputs(self, tmp_path):
        cfg = ridge_config()
        d1, d2 = tmp_path / "a", tmp_path / "b"
        run_pipeline(cfg, outdir=str(d1))
        run_pipeline(cfg, outdir=str(d2))
        for name in ("errors.csv", "report.json", "samples.csv",
                     "model.json"):
            assert (d1 / name).read_bytes() == (d2 / name).read_bytes(), name

    def test_stage_label_on_errors(self):
        with pytest.raises(ValueError, match=r"\[stage subspace\]"):
            run_pipeline(ridge_config(n=10))

    def test_uniform_inputs(self):
        cfg = PipelineConfig(
            model={"name": "ridge", "a": [0.7, 0.3, 0.0, 0.0],
                   "domain": "uniform"},
            M=30, n=1, points_per_dim=15, plots=False)
        subspace, kriging, report = run_pipeline(cfg)
        # reduced interval radius is sum |W1 entries|
        r = np.sum(np.abs(subspace.W1))
        assert np.max(np.abs(kriging.design)) <= r + 1e-9
        assert report.mean() <= 1e-3


class TestLocalSensitivityBaseline:
    def test_single_axis_ridge_selects_that_coordinate(self):
        a = np.zeros(10)
        a[5] = 1.0
        cfg = PipelineConfig(model={"name": "ridge", "a": a.tolist()},
                             M=15, n=1, points_per_dim=9, plots=False)
        coords, _, report = run_local_sensitivity_baseline(cfg)
        assert coords == [5]
        assert report.gradient_evals == 1
        assert np.all(np.isfinite(report.errors))

    def test_zero_gradient_falls_back_with_warning(self):
        cfg = PipelineConfig(model={"name": "quadratic",
                                    "diag": [3.0, 1.0, 0.5]},
                             M=15, n=1, points_per_dim=9, plots=False)
        with pytest.warns(RuntimeWarning, match="zero"):
            coords, _, _ = run_local_sensitivity_baseline(cfg)
        assert coords == [0]

    def test_misaligned_ridge_beats_it_with_the_rotated_basis(self):
        # The ridge direction mixes two coordinates, so one axis alone
        # cannot represent the function.
        cfg = ridge_config(M=40)
        result = run_comparison(cfg)
        medians = result.medians()
        assert medians["subspace"] < medians["local_sensitivity"]


class TestFullSpaceBaseline:
    def test_budget_is_consumed_exactly(self):
        cfg = ridge_config()
        _, report = run_full_space_baseline(cfg, budget=77)
        assert report.function_evals == 77
        assert report.gradient_evals == 0

    def test_mean_degrades_to_linear_with_notice(self):
        cfg = ridge_config()
        notices = []
        # 77 points cannot poise a quadratic in 10 variables (66 terms
        # would fit, but force the small case): use m = 10, budget 20.
        _, report = run_full_space_baseline(cfg, budget=20, notices=notices)
        assert any("linear" in n for n in notices)
        assert np.all(np.isfinite(report.errors))

    def test_adequate_in_two_dimensions(self):
        # Small-m control: the full-space surface must be competitive
        # (not more than an order of magnitude behind) when m is tiny.
        cfg = PipelineConfig(model={"name": "quadratic", "diag": [3.0, 1.0]},
                             M=40, n=1, points_per_dim=9, N=4,
                             test_points=200, plots=False)
        result = run_comparison(cfg)
        medians = result.medians()
        assert medians["full_space"] <= 10.0 * medians["subspace"]


class TestComparison:
    def test_reports_and_files(self, tmp_path):
        cfg = ridge_config(M=40, test_points=150)
        result = run_comparison(cfg, outdir=str(tmp_path))
        assert set(result.reports) == {"subspace", "local_sensitivity",
                                       "full_space"}
        for name in ("errors_asm.csv", "errors_sens.csv", "errors_full.csv",
                     "comparison.json", "errors.csv", "report.json"):
            assert (tmp_path / name).exists(), name
        payload = read_json(tmp_path / "comparison.json")
        assert payload["testing_points"] == 150
        assert payload["medians"]["subspace"] == \
            pytest.approx(result.reports["subspace"].median())
        # matched budget: the full arm trains on the subspace arm's cost
        asm = result.reports["subspace"]
        assert result.reports["full_space"].function_evals == \
            asm.effective_cost

    def test_subspace_arm_wins_on_the_ridge(self):
        result = run_comparison(ridge_config(M=40, test_points=150))
        medians = result.medians()
        assert medians["subspace"] < medians["local_sensitivity"]
        assert medians["subspace"] < medians["full_space"]

    def test_testing_set_is_fresh(self):
        cfg = ridge_config(M=25, test_points=60)
        result = run_comparison(cfg)
        train = {x.tobytes() for x in result.run.samples.points}
        test = {x.tobytes() for x in result.testing_points}
        assert not train & test


class TestPerturbationStudy:
    def test_table_structure_and_zero_row(self, tmp_path):
        cfg = ridge_config(M=200, epsilons=(0.0, 0.05, 0.1, 0.2))
        rows = run_perturbation_study(cfg, outdir=str(tmp_path))
        assert [r["epsilon"] for r in rows] == [0.0, 0.05, 0.1, 0.2]
        assert rows[0]["distance"] == 0.0
        # the zero row repeats the unperturbed pipeline exactly
        _, _, report = run_pipeline(cfg)
        mse = float(np.mean((report.truth - report.predictions) ** 2))
        assert rows[0]["empirical_mse"] == mse
        header, data = read_csv(tmp_path / "perturbation_study.csv")
        assert header == ["epsilon", "distance", "empirical_mse", "bound"]
        assert data.shape == (4, 4)

    def test_bound_dominates_and_matches_formula(self):
        cfg = ridge_config(M=200)
        rows = run_perturbation_study(cfg)
        subspace, _, _ = run_pipeline(cfg)
        c2 = max(cfg.C2delta, rows[0]["empirical_mse"])
        for row in rows:
            assert row["empirical_mse"] <= row["bound"]
            expected = bound_perturbed(
                BoundInputs(eigenvalues=subspace.eigenvalues, n=cfg.n,
                            C1=1.0, N=cfg.N, C2delta=c2,
                            epsilon=row["epsilon"]),
                kind="response_surface")
            assert row["bound"] == pytest.approx(expected, abs=1e-12)

    def test_error_grows_with_the_perturbation(self):
        cfg = ridge_config(M=200)
        rows = run_perturbation_study(cfg)
        mses = [r["empirical_mse"] for r in rows]
        inversions = sum(1 for i in range(len(mses) - 1)
                         if mses[i + 1] < mses[i])
        assert inversions <= 1

    def test_rejects_out_of_range_epsilon(self):
        with pytest.raises(ConfigError):
            run_perturbation_study(ridge_config(), epsilons=[0.9])


def test_no_wall_clock_anywhere(tmp_path):
    # Nothing in the report path may depend on time or platform entropy:
    # rerunning in a fresh directory must reproduce every byte.
    cfg = ridge_config(M=10, points_per_dim=7)
    d1, d2 = tmp_path / "x", tmp_path / "y"
    run_comparison(cfg, outdir=str(d1))
    run_comparison(cfg, outdir=str(d2))
    for name in sorted(os.listdir(d1)):
        if name.endswith(".png"):
            continue
        assert (d1 / name).read_bytes() == (d2 / name).read_bytes(), name
