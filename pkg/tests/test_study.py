import json
import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from qmsde.brownian import coarsen, generate_path, generate_paths
from qmsde.catalog import get_problem
from qmsde.piecewise import SDEProblem, affine, constant
from qmsde.study import (
    ConvergenceOrderRegressor,
    StudyConfig,
    StudyPathError,
    StudyReport,
    rate_fit,
    run_study,
    strong_error,
    strong_error_from_samples,
)


# -- rate fit ----------------------------------------------------------------------
def test_exact_power_law():
    n = 2.0 ** np.arange(4, 10)
    fit = rate_fit(zip(n, 3.0 * n ** -0.75))
    assert fit.order == pytest.approx(0.75, abs=1e-12)
    assert fit.r_squared == pytest.approx(1.0, abs=1e-12)


def test_two_points_halving():
    fit = rate_fit([(2, 0.3), (4, 0.15)])
    assert fit.order == pytest.approx(1.0, abs=1e-15)
    assert fit.slope_stderr == 0.0


def test_noisy_power_law_recovers_order():
    rng = np.random.default_rng(12)
    n = 2.0 ** np.arange(4, 10)
    for _ in range(100):
        err = 0.7 * n ** -0.75 * (1 + 0.05 * rng.standard_normal(n.size))
        assert abs(rate_fit(zip(n, err)).order - 0.75) <= 0.1


@pytest.mark.parametrize(
    "points",
    [[(16, 0.1)], [(16, 0.1), (32, 0.0)], [(16, 0.1), (32, -1.0)], [(16, 0.1), (16, 0.2)]],
)
def test_rate_fit_errors(points):
    with pytest.raises(ValueError):
        rate_fit(points)


def test_regressor_estimator_api():
    n = np.array([16, 32, 64, 128])
    reg = ConvergenceOrderRegressor().fit(n, 2.0 / n)
    assert reg.order_ == pytest.approx(1.0)
    assert np.allclose(reg.predict([256]), [2.0 / 256])
    assert reg.score(n, 2.0 / n) == pytest.approx(1.0)
    assert reg.get_params() == {}


@settings(max_examples=50, deadline=None)
@given(
    c=st.floats(1e-3, 1e3),
    r=st.floats(0.1, 2.0),
    lo=st.integers(1, 6),
    k=st.integers(2, 8),
)
def test_fit_is_exact_on_any_power_law(c, r, lo, k):
    n = 2.0 ** np.arange(lo, lo + k)
    fit = rate_fit(zip(n, c * n ** -r))
    assert fit.order == pytest.approx(r, abs=1e-9)
    assert 2 ** fit.intercept == pytest.approx(c, rel=1e-9)


# -- estimator -------------------------------------------------------------------------
def test_strong_error_from_samples_matches_definition():
    e = np.abs(np.random.default_rng(0).standard_normal(1000))
    est, se = strong_error_from_samples(e, 2.0)
    assert est == pytest.approx(math.sqrt(np.mean(e**2)))
    m = np.mean(e**2)
    assert se == pytest.approx(0.5 * m**-0.5 * np.std(e**2, ddof=1) / math.sqrt(1000))
    assert strong_error_from_samples(np.zeros(5), 1.0) == (0.0, 0.0)


@pytest.mark.parametrize("name, scheme", [("exx2", "qm"), ("exx1", "tqm"), ("gbm", "euler")])
def test_scheme_against_itself_at_reference_level_is_zero(name, scheme):
    if name == "gbm":
        # the closed form is the reference there, so compare against a qm reference
        prob = get_problem(name)
        prob = SDEProblem(prob.x0, prob.mu, prob.sigma, prob.assumption_class, name="gbm-no-oracle")
        scheme = "qm"
    else:
        prob = name
    assert strong_error(prob, scheme, 64, 64, 50, 2.0, seed=3) == (0.0, 0.0)


@pytest.mark.parametrize("scheme", ["euler", "qm"])
def test_pure_brownian_motion_error_is_rounding_only(scheme):
    bm = SDEProblem(0.0, constant(0.0), constant(1.0), "B")
    est, _ = strong_error(bm, scheme, 16, 256, 200, 2.0, seed=1)
    assert est <= 1e-12


def test_gbm_euler_matches_brute_force_estimator():
    n, n_ref, M, seed = 64, 256, 10_000, 5
    est, se = strong_error("gbm", "euler", n, n_ref, M, 2.0, seed)
    total = 0.0
    sq = []
    for i in range(M):
        fine = generate_path(seed, i, n_ref).increments
        dw = fine.reshape(n, -1).sum(axis=1)
        x = 1.0
        for d in dw:
            x = x + x * d
        exact = math.exp(-0.5 + fine.sum())
        e2 = (exact - x) ** 2
        total += e2
        sq.append(e2)
    want = math.sqrt(total / M)
    assert abs(est - want) <= 1e-12
    want_se = 0.5 / want * np.std(sq, ddof=1) / math.sqrt(M)
    assert se == pytest.approx(want_se, rel=1e-9)


def test_levels_share_the_brownian_endpoint():
    fine = generate_paths(9, range(50), 512)
    w1 = coarsen(fine, 1)[:, 0]
    for n in (16, 32, 64, 512):
        assert np.allclose(coarsen(fine, n).sum(axis=1), w1, rtol=0, atol=1e-13)


def test_errors_decrease_with_level_up_to_noise():
    report = run_study(StudyConfig("exx2", "qm", "8..64", n_ref=512, M=400, seed=2))
    for p in (1.0, 2.0):
        rows = [report.error(n, p) for n in report.levels]
        for a, b in zip(rows, rows[1:]):
            assert b.error <= a.error + 2 * (a.stderr + b.stderr)
    assert all(r.error >= 0 for r in report.results)


def test_grid_sup_dominates_final_time():
    kw = dict(levels="8..32", n_ref=256, M=200, seed=4)
    fin = run_study(StudyConfig("exx1", "tqm", error_mode="final_time", **kw))
    sup = run_study(StudyConfig("exx1", "tqm", error_mode="grid_sup", **kw))
    for a, b in zip(fin.results, sup.results):
        assert b.error >= a.error - 1e-12


# -- run_study -------------------------------------------------------------------------
@pytest.fixture(scope="module")
def small_report():
    return run_study(StudyConfig("exx22", "qm", "16..64", n_ref=256, M=600, seed=11, chunk_size=100))


def test_report_contents(small_report):
    r = small_report
    assert r.levels == [16, 32, 64] and r.p_list == [1.0, 2.0]
    assert len(r.results) == 6 and all(x.paths == 600 for x in r.results)
    assert not r.degenerate
    assert 0.7 < r.order < 1.3
    assert r.schema_version == 1
    assert "--seed 11" in r.command


def test_worker_count_does_not_change_report(small_report):
    cfg = StudyConfig("exx22", "qm", "16..64", n_ref=256, M=600, seed=11, chunk_size=100)
    again = run_study(cfg, workers=3)
    assert again == small_report
    assert again.workers == 3


def test_json_and_csv_round_trip(small_report, tmp_path):
    paths = small_report.write(tmp_path / "out")
    back = StudyReport.from_dict(json.loads(open(paths["json"]).read()))
    assert back == small_report
    rows = open(paths["csv"]).read().splitlines()
    assert rows[0] == "level,p,error,stderr,paths"
    assert len(rows) == 7
    level, p, err, se, m = rows[1].split(",")
    assert float(err) == small_report.results[0].error
    assert open(paths["command"]).read().startswith("qmsde study --problem exx22")


def test_degenerate_levels_equal_reference():
    report = run_study(StudyConfig("exx2", "qm", (64,), n_ref=64, M=20))
    assert report.degenerate
    assert all(r.error == 0.0 for r in report.results)
    assert report.fit(2) is None and report.order is None
    assert "fit rejected" in report.summary()


def test_blow_up_names_path_and_level():
    prob = SDEProblem(1.0, affine(1e308, 0.0), constant(0.0), "B")
    with pytest.raises(StudyPathError) as info:
        run_study(StudyConfig(prob, "euler", (4,), n_ref=16, M=3))
    assert info.value.path_index == 0 and info.value.level == 16


@pytest.mark.parametrize(
    "kwargs",
    [
        dict(levels=(16, 32), n_ref=64),
        dict(levels=(24,), n_ref=96),
        dict(levels=(16,), n_ref=64, M=1),
        dict(levels=(16,), n_ref=64, p_list=(0.5,)),
        dict(levels=(16,), n_ref=64, error_mode="sup"),
        dict(levels=(), n_ref=64),
    ],
)
def test_config_errors(kwargs):
    with pytest.raises(ValueError):
        StudyConfig("exx2", "qm", **kwargs)


def test_config_defaults_and_level_parsing():
    cfg = StudyConfig("exx2", "qm", "16..512")
    assert cfg.levels == (16, 32, 64, 128, 256, 512)
    assert cfg.n_ref == 8192 and cfg.p_list == (1.0, 2.0)
    assert StudyConfig("exx2", "em", "32,16").levels == (16, 32)
