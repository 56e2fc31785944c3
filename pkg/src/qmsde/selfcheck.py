"""Fast invariant checks run by ``qmsde selfcheck``."""

import sys
import time

import numpy as np

from .brownian import coarsen, generate_path
from .catalog import get_problem
from .piecewise import SDEProblem, affine, constant
from .schemes import simulate
from .study import rate_fit
from .transform import (
    TransformParams,
    g_eval,
    g_inverse,
    g_prime,
    g_second,
    g_third,
    rho_max,
    transformed_problem,
)


def random_params(rng, k):
    z = np.sort(rng.uniform(-3, 3, size=k))
    while k > 1 and np.min(np.diff(z)) < 0.05:
        z = np.sort(rng.uniform(-3, 3, size=k))
    alpha = rng.uniform(-2, 2, size=k)
    nu = rng.uniform(0.05, 0.95) * rho_max(z, alpha)
    return TransformParams(tuple(z), tuple(alpha), nu)


def _check_transform(rng):
    for trial in range(20):
        T = random_params(rng, 1 + trial % 3)
        x = np.concatenate([rng.uniform(min(T.z) - 1, max(T.z) + 1, 2000), np.array(T.z)])
        xs = np.sort(x)
        assert np.all(np.diff(g_eval(T, xs)) > 0) or np.all(np.diff(xs) == 0)
        assert np.array_equal(g_eval(T, np.array(T.z)), np.array(T.z))
        assert np.all(g_prime(T, np.array(T.z)) == 1.0)
        assert np.max(np.abs(g_inverse(T, g_eval(T, x), 1e-12) - x)) <= 1e-10
        inner = x[np.min(np.abs(x[:, None] - np.array(T.z)[None, :]), axis=1) > 1e-3]
        h = 1e-6
        fd = (g_eval(T, inner + h) - g_eval(T, inner - h)) / (2 * h)
        assert np.allclose(fd, g_prime(T, inner), rtol=1e-6, atol=1e-8)
        fd2 = (g_prime(T, inner + h) - g_prime(T, inner - h)) / (2 * h)
        assert np.allclose(fd2, g_second(T, inner), rtol=1e-5, atol=1e-6)
        fd3 = (g_second(T, inner + h) - g_second(T, inner - h)) / (2 * h)
        assert np.allclose(fd3, g_third(T, inner), rtol=1e-4, atol=1e-4)
        for zi, a in zip(T.z, T.alpha):
            assert abs(g_second(T, zi - 1e-6) + 2 * a) <= 1e-4
            assert abs(g_second(T, zi + 1e-6) - 2 * a) <= 1e-4


def _check_transformed_coefficients(rng):
    for name in ("exx1", "ex2"):
        prob = get_problem(name)
        t = transformed_problem(prob)
        for i, xi in enumerate(prob.mu.breakpoints):
            mid = (prob.mu.left_limit(i) + prob.mu.right_limit(i)) / 2
            assert t.mu_tilde(xi) == mid
            assert t.sigma_tilde(xi) == prob.sigma(xi)


def _check_schemes(rng):
    prob = SDEProblem(0.0, constant(0.0), constant(1.0), "B")
    lat = generate_path(11, 3, 256)
    w = np.concatenate(([0.0], np.cumsum(lat.increments)))
    for scheme in ("euler", "qm"):
        assert np.array_equal(simulate(prob, scheme, 256, lat.increments).values, w)
    smooth = SDEProblem(0.3, affine(-1.0, 0.5), constant(0.7), "B")
    a = simulate(smooth, "euler", 64, coarsen(lat, 64)).values
    b = simulate(smooth, "qm", 64, coarsen(lat, 64)).values
    assert np.array_equal(a, b)


def _check_brownian(rng):
    a, b = generate_path(5, 9, 1024), generate_path(5, 9, 1024)
    assert np.array_equal(a.increments, b.increments)
    assert np.array_equal(coarsen(coarsen(a, 64), 8), coarsen(a, 8))


def _check_rate_fit(rng):
    n = 2.0 ** np.arange(4, 10)
    fit = rate_fit(zip(n, 3.0 * n ** -0.75))
    assert abs(fit.order - 0.75) < 1e-12 and abs(fit.r_squared - 1) < 1e-12


CHECKS = [
    ("transform invariants (20 random configs)", _check_transform),
    ("transformed coefficients at breakpoints", _check_transformed_coefficients),
    ("scheme exactness and equivalence", _check_schemes),
    ("brownian determinism and coarsening", _check_brownian),
    ("rate fit on an exact power law", _check_rate_fit),
]


def run_selfcheck(out=sys.stdout, seed=20240601):
    rng = np.random.default_rng(seed)
    ok = True
    for label, fn in CHECKS:
        t0 = time.perf_counter()
        try:
            fn(rng)
            status = "PASS"
        except AssertionError:
            status = "FAIL"
            ok = False
        out.write(f"{status}  {label}  ({time.perf_counter() - t0:.2f}s)\n")
    out.write("all checks passed\n" if ok else "some checks FAILED\n")
    return ok
