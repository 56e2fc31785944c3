import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from qmsde.catalog import ex2_sigma, get_problem
from qmsde.piecewise import (
    AffinePiece,
    PiecewiseFunction,
    SDEProblem,
    affine,
    constant,
    delta,
    evaluate,
    indicator,
    left_limit,
    right_limit,
)


@pytest.fixture
def exx1_drift():
    return get_problem("exx1").mu


def test_indicator_values():
    f = indicator(0.0)
    assert evaluate(f, -1.0) == 0.0
    # the indicator of [0, inf) includes the breakpoint
    assert evaluate(f, 0.0) == 1.0


def test_affine_pieces_hand_value(exx1_drift):
    assert exx1_drift(2.0) == 3.0


def test_eval_vectorised_matches_scalar(exx1_drift):
    x = np.array([-2.0, -1e-9, 0.0, 1e-9, 2.0])
    assert np.array_equal(exx1_drift(x), [exx1_drift(v) for v in x])


def test_one_sided_limits(exx1_drift):
    f = indicator(0.0)
    assert left_limit(f, 0) == 0.0
    assert right_limit(exx1_drift, 0) == 1.0
    g = PiecewiseFunction([0.0], [AffinePiece(1.0, 0.0), AffinePiece(1.0, 0.0)])
    assert left_limit(g, 0) == right_limit(g, 0) == 0.0


@pytest.mark.parametrize("i", [-1, 1, 5])
def test_limit_index_out_of_range(i):
    with pytest.raises(IndexError):
        indicator().left_limit(i)


def test_delta_convention():
    assert delta(indicator(), 0.0) == 0.0
    sigma = get_problem("exx2").sigma
    assert delta(sigma, 1.0) == 1.0
    assert delta(sigma, 0.0) == 0.0
    f = affine(3.0, -1.0)
    assert np.all(delta(f, np.linspace(-5, 5, 11)) == 3.0)


def test_delta_at_smooth_artificial_breakpoint():
    g = PiecewiseFunction([0.0], [AffinePiece(2.0, 1.0), AffinePiece(2.0, 1.0)])
    assert g.delta(0.0) == 2.0
    assert g.is_differentiable_at(0)


@pytest.mark.parametrize("bad", [np.nan, np.inf, -np.inf])
def test_non_finite_input_rejected(bad):
    with pytest.raises(ValueError):
        indicator()(bad)
    with pytest.raises(ValueError):
        indicator().delta(bad)


def test_breakpoint_value_rules():
    pieces = [AffinePiece(0.0, 0.0), AffinePiece(0.0, 1.0)]
    assert PiecewiseFunction([0.0], pieces, ["left"])(0.0) == 0.0
    assert PiecewiseFunction([0.0], pieces, ["right"])(0.0) == 1.0
    assert PiecewiseFunction([0.0], pieces, [0.25])(0.0) == 0.25
    with pytest.raises(ValueError):
        PiecewiseFunction([0.0], pieces, ["middle"])


@pytest.mark.parametrize(
    "bps",
    [[1.0, 0.0], [0.0, 0.0], [0.0, np.inf], [np.nan]],
)
def test_construction_rejects_bad_breakpoints(bps):
    pieces = [AffinePiece(0.0, 0.0)] * (len(bps) + 1)
    with pytest.raises(ValueError):
        PiecewiseFunction(bps, pieces)


def test_piece_count_must_match():
    with pytest.raises(ValueError):
        PiecewiseFunction([0.0], [AffinePiece(0.0, 0.0)])


def test_limits_approached_at_lipschitz_rate():
    rng = np.random.default_rng(4)
    for _ in range(20):
        bps = np.sort(rng.uniform(-5, 5, 3))
        pieces = [AffinePiece(*rng.uniform(-4, 4, 2)) for _ in range(4)]
        f = PiecewiseFunction(bps, pieces)
        for i, b in enumerate(bps):
            for h in 10.0 ** -np.arange(3, 9):
                assert abs(f(b - h) - f.left_limit(i)) <= pieces[i].lipschitz * h + 1e-12
                assert abs(f(b + h) - f.right_limit(i)) <= pieces[i + 1].lipschitz * h + 1e-12


@pytest.mark.parametrize("func", [get_problem("exx2").sigma, get_problem("exx1").mu, ex2_sigma()])
def test_delta_matches_central_differences(func):
    rng = np.random.default_rng(0)
    x = rng.uniform(-1, 1, 1000)
    x = x[np.min(np.abs(x[:, None] - func.breakpoints[None, :]), axis=1) > 1e-4]
    h = 1e-6
    fd = (func(x + h) - func(x - h)) / (2 * h)
    d = func.delta(x)
    assert np.allclose(fd, d, rtol=1e-6, atol=1e-6 * np.max(np.abs(d)) + 1e-9)


@settings(max_examples=50, deadline=None)
@given(
    slopes=st.lists(st.floats(-10, 10), min_size=3, max_size=3),
    intercepts=st.lists(st.floats(-10, 10), min_size=3, max_size=3),
    x=st.floats(-100, 100),
)
def test_eval_follows_containing_piece(slopes, intercepts, x):
    pieces = [AffinePiece(s, c) for s, c in zip(slopes, intercepts)]
    f = PiecewiseFunction([-1.0, 1.0], pieces)
    j = 0 if x < -1 else (1 if x < 1 else 2)
    if x in (-1.0, 1.0):
        assert f(x) == pieces[j].value(x)
    else:
        assert f(x) == pytest.approx(pieces[j].value(x))
        assert f.delta(x) == slopes[j]


def test_functions_are_immutable():
    f = indicator()
    with pytest.raises(ValueError):
        f.breakpoints[0] = 3.0


# -- SDEProblem validation -----------------------------------------------------
def test_class_b_rejects_discontinuous_sigma():
    with pytest.raises(ValueError, match="sigma"):
        SDEProblem(0.0, constant(0.0), indicator(), "B")


def test_class_a_rejects_discontinuous_sigma():
    with pytest.raises(ValueError, match="sigma"):
        SDEProblem(0.0, indicator(), PiecewiseFunction([1.0], [AffinePiece(0, 1), AffinePiece(0, 2)]), "A")


def test_class_b_rejects_discontinuous_drift():
    with pytest.raises(ValueError, match="continuous drift"):
        SDEProblem(0.0, indicator(), constant(1.0), "B")


def test_sigma_must_not_vanish_at_drift_breakpoint():
    with pytest.raises(ValueError, match="vanishes"):
        SDEProblem(0.0, indicator(), affine(1.0, 0.0), "A")


def test_class_a_sigma_kinks_must_sit_on_drift_breakpoints():
    sigma = PiecewiseFunction([1.0], [AffinePiece(0.0, 1.0), AffinePiece(1.0, 0.0)])
    with pytest.raises(ValueError, match="kinks"):
        SDEProblem(0.0, indicator(), sigma, "A")


def test_unknown_class_rejected():
    with pytest.raises(ValueError):
        SDEProblem(0.0, constant(0.0), constant(1.0), "C")


@pytest.mark.parametrize("name", ["exx1", "exx2", "exx22", "ex2", "gbm"])
def test_catalog_entries_validate(name):
    p = get_problem(name)
    assert p.assumption_class in ("A", "B")
    m, s, d = p.coefficients(np.array([-0.5, 0.0, 0.5]))
    assert m.shape == s.shape == d.shape == (3,)
