"""Built-in benchmark problems and named closed-form pieces."""

import numpy as np

from .piecewise import AffinePiece, CatalogPiece, PiecewiseFunction, SDEProblem, affine, constant, indicator
from .transform import TransformParams, _gp, _gpp

__all__ = ["PIECE_CATALOG", "PROBLEMS", "describe", "ex2_sigma", "get_problem", "list_problems"]

EX2_DEFAULT_NU = 0.125


def _ex2_params(nu):
    return TransformParams((0.0,), (-0.5,), nu)


def ex2_sigma(nu=EX2_DEFAULT_NU):
    """``1 / G'`` for ``z = 0, alpha = -1/2``; kinked at 0 with slopes -1 and +1."""
    T = _ex2_params(nu)

    def value(x):
        return 1.0 / _gp(T, np.asarray(x, dtype=float))

    def slope(at_zero):
        def d(x):
            x = np.asarray(x, dtype=float)
            g1 = _gp(T, x)
            return -_gpp(T, x, [at_zero]) / (g1 * g1)
        return d

    # G'' one-sided values at 0 are -2*alpha = 1 (left) and 2*alpha = -1 (right)
    # |G''| <= 2|alpha| = 1 because |psi| <= 1 on the bump
    lip = 1.0 / T.min_slope ** 2
    left = CatalogPiece(f"ex2_sigma_left(nu={nu!r})", value, slope(1.0), lip)
    right = CatalogPiece(f"ex2_sigma_right(nu={nu!r})", value, slope(-1.0), lip)
    return PiecewiseFunction([0.0], [left, right], ["left"])


def _exx1(x0=0.0):
    mu = PiecewiseFunction([0.0], [AffinePiece(0.0, 0.0), AffinePiece(1.0, 1.0)], ["right"])
    return SDEProblem(x0, mu, constant(1.0), "A", "exx1")


def _positive_part_drift():
    return PiecewiseFunction([0.0], [AffinePiece(0.0, 0.0), AffinePiece(1.0, 0.0)], ["right"])


def _exx2(x0=0.0):
    sigma = PiecewiseFunction([0.0], [AffinePiece(0.0, 1.0), AffinePiece(1.0, 1.0)], ["right"])
    return SDEProblem(x0, _positive_part_drift(), sigma, "B", "exx2")


def _exx22(x0=0.0):
    return SDEProblem(x0, _positive_part_drift(), constant(1.0), "B", "exx22")


def _ex2(x0=0.0, nu=EX2_DEFAULT_NU):
    if not (0.0 < nu < 0.25):
        raise ValueError(f"ex2 needs nu in (0, 1/4), got {nu}")
    return SDEProblem(x0, indicator(0.0), ex2_sigma(nu), "A", "ex2")


def _gbm_solution(x0, t, w):
    return x0 * np.exp(-0.5 * np.asarray(t) + w)


def _gbm(x0=1.0):
    return SDEProblem(x0, constant(0.0), affine(1.0, 0.0), "B", "gbm", exact_solution=_gbm_solution)


PROBLEMS = {
    "exx1": (_exx1, "dX = (1+X) 1[X>=0] dt + dW, X0 = 0 (class A, drift jump at 0)"),
    "exx2": (_exx2, "dX = X 1[X>=0] dt + (1 + X 1[X>=0]) dW, X0 = 0 (class B, kinked sigma)"),
    "exx22": (_exx22, "dX = X 1[X>=0] dt + dW, X0 = 0 (class B, smooth sigma)"),
    "ex2": (_ex2, "dX = 1[X>=0] dt + 1/G'(X) dW, X0 = 0, G with z=0, alpha=-1/2, nu=1/8 (class A)"),
    "gbm": (_gbm, "dX = X dW, X0 = 1 (class B, closed form X_t = exp(W_t - t/2))"),
}

# Named pieces accepted by the JSON problem loader.
PIECE_CATALOG = {
    "ex2_sigma_left": lambda: ex2_sigma().pieces[0],
    "ex2_sigma_right": lambda: ex2_sigma().pieces[1],
}


def list_problems():
    return sorted(PROBLEMS)


def describe(name):
    return PROBLEMS[name][1]


def get_problem(name, **kwargs):
    """Construct a catalog problem, e.g. ``get_problem("ex2", nu=0.1)``."""
    try:
        factory = PROBLEMS[name][0]
    except KeyError:
        raise KeyError(f"unknown problem {name!r}; available: {', '.join(list_problems())}") from None
    return factory(**kwargs)
