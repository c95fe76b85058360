"""
实验层测试：配置校验、站点生成、各类扫描、斜率拟合与并行确定性
"""
import glob
import math
import os

import numpy as np
import pytest

from wquant.core.measures import DiscreteMeasure
from wquant.data.presets import ORIGIN_2D, SCENARIOS, UNIFORM_1D, UNIFORM_2D, get_scenario
from wquant.errors import InvalidInputError
from wquant.harness import (SweepConfig, csv_text, fit_slope, generate_sites, jittered_grid, load_config,
                            run_baselines, run_h_sweep, run_nonuniform_trial, run_nterm_sweep, run_quantize,
                            run_tail_check, run_tail_experiment, write_reports)
from wquant.harness.specs import build_measure

CONFIG_DIR = os.path.join(os.path.dirname(__file__), "..", "configs")


def sweep(command, measure, values, **kwargs):
    return SweepConfig(command=command, measure_spec=measure, values=values, name=command, **kwargs)


# ==========================================
# 斜率拟合
# ==========================================

def test_fit_slope_recovers_power_law():
    rows = [(n, 3.0 * n ** -0.5) for n in (4, 16, 64, 256)]
    fit = fit_slope(rows)
    assert fit.slope == pytest.approx(-0.5)
    assert fit.intercept == pytest.approx(math.log(3.0))
    assert fit.n_rows == 4


def test_fit_slope_excludes_nonpositive_rows():
    fit = fit_slope([(1.0, 0.0), (2.0, 2.0), (4.0, 4.0), (8.0, 8.0)])
    assert fit.excluded == (0,)
    assert fit.slope == pytest.approx(1.0)


def test_fit_slope_needs_three_rows():
    with pytest.raises(InvalidInputError):
        fit_slope([(1.0, 1.0), (2.0, 2.0), (4.0, 0.0)])


# ==========================================
# 配置
# ==========================================

@pytest.mark.parametrize("name", sorted(SCENARIOS))
def test_every_scenario_parses(name):
    data = get_scenario(name)
    cfg = SweepConfig.from_dict(data)
    assert cfg.command == data["command"]
    assert cfg.build_measure().dim >= 1


@pytest.mark.parametrize("path", sorted(p for p in glob.glob(os.path.join(CONFIG_DIR, "*.json"))
                                        if not p.endswith("_measure.json")), ids=os.path.basename)
def test_every_example_config_parses(path):
    cfg = load_config(path)
    assert cfg.values


def test_get_scenario_returns_a_copy():
    data = get_scenario("uniform_1d_h")
    data["values"].clear()
    assert SCENARIOS["uniform_1d_h"]["values"]
    with pytest.raises(KeyError):
        get_scenario("no-such-scenario")


@pytest.mark.parametrize("command, values, extra", [
    ("sweep-h", [0.25, 0.5], {}),
    ("sweep-n", [4, 2], {}),
    ("sweep-n", [2.5, 4], {}),
    ("sweep-h", [], {}),
    ("sweep-h", [0.5, -0.25], {}),
    ("no-such-command", [0.5], {}),
    ("tail", [0.5], {}),
    ("sweep-h", [0.5], {"p": 0.5}),
    ("sweep-h", [0.5], {"slope_window": (2.0, 1.0)}),
])
def test_invalid_configs(command, values, extra):
    with pytest.raises(InvalidInputError):
        sweep(command, UNIFORM_1D, values, **extra)


def test_nonuniform_defaults_to_jittered_grid():
    cfg = sweep("nonuniform", UNIFORM_2D, [16])
    assert cfg.sites_spec["generator"] == "jittered_grid"
    assert cfg.parameter == "N"


def test_lattice_dimension_must_match_measure():
    cfg = sweep("sweep-h", UNIFORM_1D, [0.5], lattice_spec={"kind": "A2", "dim": 2})
    with pytest.raises(InvalidInputError):
        cfg.build_lattice(1)


def test_build_measure_specs():
    atoms = build_measure({"type": "atoms", "locations": [[0.0, 0.0], [1.0, 1.0]], "weights": [1, 3]})
    assert isinstance(atoms, DiscreteMeasure)
    np.testing.assert_allclose(atoms.weights, [0.25, 0.75])
    with pytest.raises(InvalidInputError):
        build_measure({"type": "no-such-measure"})


# ==========================================
# 站点生成
# ==========================================

def test_jittered_grid_shape_and_box():
    box = (np.full(2, -0.5), np.full(2, 0.5))
    sites = jittered_grid(16, box, 0.25, seed=1)
    assert sites.shape == (16, 2)
    assert np.all(np.abs(sites) < 0.5)
    np.testing.assert_array_equal(sites, jittered_grid(16, box, 0.25, seed=1))


@pytest.mark.parametrize("n, jitter", [(15, 0.25), (16, 0.5), (16, -0.1)])
def test_jittered_grid_errors(n, jitter):
    with pytest.raises(InvalidInputError):
        jittered_grid(n, (np.zeros(2), np.ones(2)), jitter)


def test_generate_sites():
    box = (np.zeros(2), np.ones(2))
    sites, seed = generate_sites({"generator": "random_uniform"}, 10, box, 7)
    assert sites.shape == (10, 2)
    assert seed == 7
    with pytest.raises(InvalidInputError):
        generate_sites({"generator": "no-such-generator"}, 10, box, 0)


# ==========================================
# 扫描
# ==========================================

def test_h_sweep_matches_closed_form():
    values = [0.5, 0.25, 0.125, 0.0625]
    report = run_h_sweep(sweep("sweep-h", UNIFORM_1D, values, slope_window=(0.999, 1.001)))
    assert report.passed, report.failures
    assert report.slope_source == "measured"
    for row, h in zip(report.rows, values):
        assert row.exact_method == "quantile"
        assert row.measured_wp == pytest.approx(h / (2 * math.sqrt(3)), abs=1e-9)
        assert row.theoretical_bound == pytest.approx(h)


def test_h_sweep_of_point_mass_is_degenerate():
    report = run_h_sweep(sweep("sweep-h", ORIGIN_2D, [0.5, 0.25, 0.125]))
    assert report.passed
    assert report.slope is None
    assert any("degenerate" in note for note in report.notes)
    assert all(row.measured_wp == pytest.approx(0.0, abs=1e-9) for row in report.rows)


def test_h_sweep_indicator_mode_on_hexagonal_lattice():
    cfg = sweep("sweep-h", UNIFORM_2D, [0.5, 0.25], lattice_spec={"kind": "A2", "dim": 2}, mode="indicator")
    report = run_h_sweep(cfg)
    assert report.passed, report.failures
    assert report.extra["lattice"]["kind"] == "A2"


def test_nterm_sweep_1d_slope():
    report = run_nterm_sweep(sweep("sweep-n", UNIFORM_1D, [2, 4, 8, 16], slope_window=(-1.001, -0.999)))
    assert report.passed, report.failures
    assert report.extra["interior_support"] is False
    assert any("boundary" in note for note in report.notes)


def test_nterm_sweep_interior_support_asserts_term_count():
    measure = {"type": "uniform_cube", "dim": 2, "side": 0.5}
    report = run_nterm_sweep(sweep("sweep-n", measure, [4, 16, 64]))
    assert report.passed, report.failures
    assert all("terms_le_N" in row.checks for row in report.rows)


def test_nterm_sweep_rejects_non_powers():
    with pytest.raises(InvalidInputError):
        run_nterm_sweep(sweep("sweep-n", UNIFORM_2D, [4, 8]))


def test_nonuniform_trial():
    cfg = sweep("nonuniform", UNIFORM_2D, [16], trials=2, sites_spec={"generator": "jittered_grid", "jitter": 0.25})
    report = run_nonuniform_trial(cfg)
    assert report.passed, report.failures
    assert len(report.rows) == 2
    assert report.rows[0].seed != report.rows[1].seed
    for row in report.rows:
        assert row.theoretical_bound == pytest.approx(2.0 * row.extra["mesh_norm"])
        assert row.extra["mesh_ratio"] >= 1.0


def test_gaussian_tail_experiment():
    report = run_tail_experiment(SweepConfig.from_dict(get_scenario("gaussian_tail")))
    assert report.passed, report.failures
    assert report.extra["compact"] is False
    trunc = report.extra["truncation_error"]
    assert trunc > 0
    for row in report.rows:
        assert row.theoretical_bound == pytest.approx(2 ** 0.5 * row.extra["h"] + trunc)
        assert row.extra["rad_bound"] < row.theoretical_bound


def test_compact_tail_experiment_has_no_truncation():
    cfg = sweep("tail", UNIFORM_2D, [0.5, 0.25], tail={"R": 1.0})
    report = run_tail_experiment(cfg)
    assert report.passed, report.failures
    assert report.extra["truncation_error"] == 0.0


def test_tail_check_reports_failing_conditions():
    near = DiscreteMeasure([[0.0, 0.0], [0.5, 0.0]])
    assert run_tail_check(near, 1.0, 2.0, 0.1).passed

    heavy = DiscreteMeasure([[0.0, 0.0], [5.0, 0.0]], [0.5, 0.5])
    report = run_tail_check(heavy, 1.0, 2.0, 0.1)
    assert not report.passed
    assert "decay condition (3) fails" in report.failures
    assert report.extra["truncation_error"] == pytest.approx(math.sqrt(0.5 * 16.0))


def test_quantize_records_moment_bounds():
    cfg = sweep("quantize", UNIFORM_2D, [0.25], lattice_spec={"kind": "A2", "dim": 2})
    approximant, report = run_quantize(cfg)
    assert report.passed, report.failures
    assert approximant.masses.sum() == pytest.approx(1.0, abs=1e-10)
    assert [m["inequality_id"] for m in report.extra["moment_bounds"]] == ["L3.2.i", "L3.2.ii", "L3.2.iii"]


def test_baselines():
    report = run_baselines(sweep("baselines", UNIFORM_2D, [1, 4]))
    assert report.passed, report.failures
    for row in report.rows:
        assert row.extra["empirical_mean"] is not None
        assert row.extra["lloyd"] is not None
        assert row.extra["lloyd_codewords"] <= row.parameter


# ==========================================
# 报告与确定性
# ==========================================

def test_parallel_sweep_is_deterministic():
    texts = []
    for jobs in (1, 4):
        cfg = sweep("sweep-h", UNIFORM_2D, [0.5, 0.25, 0.125], mode="indicator", jobs=jobs)
        texts.append(csv_text(run_h_sweep(cfg).rows))
    assert texts[0] == texts[1]
    assert texts[0].splitlines()[0] == "parameter,measured_wp,coupling_bound,theoretical_bound,terms,seed"


def test_write_reports(tmp_path):
    report = run_h_sweep(sweep("sweep-h", UNIFORM_1D, [0.5, 0.25, 0.125]))
    paths = write_reports(report, str(tmp_path / "out"), {"name": "test"})
    for path in paths.values():
        assert os.path.exists(path)
    with open(paths["csv"], encoding="utf-8") as f:
        assert len(f.read().splitlines()) == 4
