"""Bump transforms ``G(x) = x + sum_i a_i (x - z_i)|x - z_i| phi((x - z_i)/nu)``.

With ``phi(u) = (1 - u^2)^4`` on ``[-1, 1]``, ``G`` is strictly increasing,
equals the identity outside the bumps ``[z_i - nu, z_i + nu]``, fixes every
``z_i``, and has ``G'(z_i) = 1`` while ``G''`` jumps from ``-2 a_i`` to
``2 a_i`` across ``z_i``. Choosing ``z`` as the drift breakpoints and ``a``
as the jump coefficients turns an SDE with a discontinuous drift into one
with Lipschitz coefficients (:class:`TransformedSDE`).
"""

from dataclasses import dataclass, field
from typing import Tuple

import numpy as np
from sklearn.base import BaseEstimator, TransformerMixin
from sklearn.utils.validation import check_is_fitted

from ._validation import as_float_array, check_strictly_increasing, restore_shape
from .piecewise import SDEProblem, _same

__all__ = [
    "ConvergenceError",
    "DriftJumpTransformer",
    "TransformParams",
    "TransformedSDE",
    "bump_phi",
    "compute_alpha",
    "default_nu",
    "g_eval",
    "g_inverse",
    "g_prime",
    "g_second",
    "g_third",
    "rho_max",
    "transformed_problem",
]

MAX_INVERSE_ITER = 200


class ConvergenceError(RuntimeError):
    """Raised when the inverse iteration fails to converge."""


def rho_max(z, alpha):
    """Largest admissible bump half-width (exclusive bound on ``nu``).

    ``min({1/(8|a_i|)} U {(z_i - z_{i-1})/2})`` with ``1/0 = inf``.
    """
    z = check_strictly_increasing(z, "z")
    alpha = np.asarray(alpha, dtype=float).reshape(-1)
    if alpha.size != z.size:
        raise ValueError(f"z and alpha lengths differ: {z.size} != {alpha.size}")
    bounds = [np.inf if a == 0 else 1.0 / (8.0 * abs(a)) for a in alpha]
    bounds += list(np.diff(z) / 2.0)
    return float(min(bounds)) if bounds else float("inf")


def default_nu(z, alpha):
    """Half of ``rho_max``; 1.0 when every bump weight vanishes."""
    rho = rho_max(z, alpha)
    return rho / 2.0 if np.isfinite(rho) else 1.0


def bump_phi(u):
    arr = np.asarray(u, dtype=float)
    out = np.where(np.abs(arr) <= 1.0, (1.0 - arr * arr) ** 4, 0.0)
    return float(out) if out.ndim == 0 else out


@dataclass(frozen=True)
class TransformParams:
    """Centres ``z``, weights ``alpha`` and half-width ``nu`` of a bump transform.

    ``z`` may be empty, in which case ``G`` is the identity.
    """

    z: Tuple[float, ...]
    alpha: Tuple[float, ...]
    nu: float

    def __post_init__(self):
        z = tuple(float(v) for v in check_strictly_increasing(self.z, "z"))
        alpha = tuple(float(a) for a in np.asarray(self.alpha, dtype=float).reshape(-1))
        if len(alpha) != len(z):
            raise ValueError(f"z and alpha lengths differ: {len(z)} != {len(alpha)}")
        if not all(np.isfinite(alpha)):
            raise ValueError("alpha must be finite")
        nu = float(self.nu)
        rho = rho_max(z, alpha)
        if not (0.0 < nu < rho) or not np.isfinite(nu):
            raise ValueError(f"nu={nu} outside the admissible range (0, {rho})")
        if len(z) > 1 and not np.all(np.diff(z) > 2 * nu):
            raise ValueError("bump supports overlap")
        object.__setattr__(self, "z", z)
        object.__setattr__(self, "alpha", alpha)
        object.__setattr__(self, "nu", nu)

    @property
    def k(self):
        return len(self.z)

    @property
    def rho(self):
        return rho_max(self.z, self.alpha)

    @property
    def min_slope(self):
        """Lower bound ``1 - 8 max|alpha_i| nu`` for ``G'``."""
        if not self.alpha:
            return 1.0
        return 1.0 - 8.0 * max(abs(a) for a in self.alpha) * self.nu

    def _bumps(self, x):
        """Yield ``(i, mask, s, u)`` for each bump with a nonzero weight that ``x`` touches."""
        for i, (zi, ai) in enumerate(zip(self.z, self.alpha)):
            if ai == 0.0:
                continue
            s = x - zi
            mask = np.abs(s) < self.nu
            if mask.any():
                yield i, ai, mask, s[mask], s[mask] / self.nu


def _g(T, x):
    out = x.copy()
    for _, a, m, s, u in T._bumps(x):
        w = 1.0 - u * u
        out[m] += a * s * np.abs(s) * (w * w) * (w * w)
    return out


def _gp(T, x):
    out = np.ones_like(x)
    nu = T.nu
    for _, a, m, s, u in T._bumps(x):
        w = 1.0 - u * u
        out[m] += 2.0 * a * nu * np.abs(u) * w * w * w * (1.0 - 5.0 * u * u)
    return out


def _gpp(T, x, at_z=None):
    """Interior ``G''``; entries exactly at ``z_i`` take ``at_z[i]`` (or NaN)."""
    out = np.zeros_like(x)
    for i, a, m, s, u in T._bumps(x):
        w = 1.0 - u * u
        u2 = u * u
        psi = w * w * (1.0 - 22.0 * u2 + 45.0 * u2 * u2)
        out[m] += np.sign(s) * 2.0 * a * psi
    for i, zi in enumerate(T.z):
        hit = x == zi
        if hit.any():
            out[hit] = np.nan if at_z is None else at_z[i]
    return out


def _gppp(T, x):
    out = np.zeros_like(x)
    nu = T.nu
    for i, a, m, s, u in T._bumps(x):
        u2 = u * u
        eta = (1.0 - u2) * (-48.0 * u + 312.0 * u2 * u - 360.0 * u2 * u2 * u)
        out[m] += np.sign(s) * (2.0 * a / nu) * eta
    return out


def g_eval(T, x):
    arr, scalar = as_float_array(x)
    return restore_shape(_g(T, arr), scalar)


def g_prime(T, x):
    arr, scalar = as_float_array(x)
    return restore_shape(_gp(T, arr), scalar)


def g_second(T, x, side="interior"):
    """``G''`` with one-sided values at the centres.

    ``side="left"``/``"right"`` returns ``-2 alpha_i``/``2 alpha_i`` exactly at
    ``z_i``; ``side="interior"`` refuses those points.
    """
    arr, scalar = as_float_array(x)
    if side == "interior":
        if any(np.any(arr == zi) for zi in T.z):
            raise ValueError("G'' is not defined at a bump centre; pass side='left' or 'right'")
        at_z = None
    elif side == "left":
        at_z = [-2.0 * a for a in T.alpha]
    elif side == "right":
        at_z = [2.0 * a for a in T.alpha]
    else:
        raise ValueError(f"side must be 'left', 'right' or 'interior', got {side!r}")
    return restore_shape(_gpp(T, arr, at_z), scalar)


def g_third(T, x):
    arr, scalar = as_float_array(x)
    if any(np.any(arr == zi) for zi in T.z):
        raise ValueError("G''' is not defined at a bump centre")
    return restore_shape(_gppp(T, arr), scalar)


def _ginv(T, y, tol):
    x = y.copy()
    if T.k == 0 or not any(T.alpha):
        return x
    lo_all, hi_all = np.array(T.z) - T.nu, np.array(T.z) + T.nu
    inside = np.zeros(y.shape, dtype=bool)
    for lo, hi in zip(lo_all, hi_all):
        inside |= (y > lo) & (y < hi)
    for zi in T.z:
        inside &= y != zi
    if not inside.any():
        return x
    yy = y[inside]
    # bracket [y - d, y + d] with d >= max |G(x) - x|, widened until it straddles
    d = sum(abs(a) for a in T.alpha) * T.nu ** 2 + 1e-300
    lo = yy - d
    hi = yy + d
    for _ in range(64):
        bad = (_g(T, lo) > yy) | (_g(T, hi) < yy)
        if not bad.any():
            break
        d *= 2.0
        lo = np.where(bad, yy - d, lo)
        hi = np.where(bad, yy + d, hi)
    xx = yy.copy()
    active = np.ones(yy.shape, dtype=bool)
    for _ in range(MAX_INVERSE_ITER):
        xa = xx[active]
        f = _g(T, xa) - yy[active]
        done = np.abs(f) <= tol
        la, ha = lo[active], hi[active]
        la = np.where(f < 0, xa, la)
        ha = np.where(f > 0, xa, ha)
        step = xa - f / _gp(T, xa)
        outside = ~((step > la) & (step < ha))
        step = np.where(outside, 0.5 * (la + ha), step)
        width_ok = (ha - la) <= 4.0 * np.spacing(np.maximum(np.abs(la), np.abs(ha)))
        finished = done | width_ok
        xa = np.where(finished, xa, step)
        xx[active] = xa
        lo[active], hi[active] = la, ha
        idx = np.flatnonzero(active)
        active[idx[finished]] = False
        if not active.any():
            break
    else:
        raise ConvergenceError(
            f"G^-1 did not converge within {MAX_INVERSE_ITER} iterations for {int(active.sum())} points"
        )
    x[inside] = xx
    return x


def g_inverse(T, y, tol=1e-12):
    """Solve ``G(x) = y`` by bracketed Newton with bisection fallback."""
    if not tol > 0:
        raise ValueError(f"tol must be positive, got {tol!r}")
    arr, scalar = as_float_array(y, "y")
    return restore_shape(_ginv(T, arr, tol), scalar)


def compute_alpha(problem):
    """Jump coefficients ``(mu(xi-) - mu(xi+)) / (2 sigma(xi)^2)`` at each drift breakpoint."""
    mu, sigma = problem.mu, problem.sigma
    out = []
    for i, xi in enumerate(mu.breakpoints):
        s = sigma(xi)
        if s == 0.0:
            raise ValueError(f"sigma vanishes at drift breakpoint {xi}")
        out.append((mu.left_limit(i) - mu.right_limit(i)) / (2.0 * s * s))
    return np.array(out, dtype=float)


@dataclass(frozen=True)
class TransformedSDE:
    """Coefficients of ``Z = G(X)`` for a class-A problem.

    ``mu~ = (G' mu + G'' sigma^2 / 2) o G^-1`` and ``sigma~ = (G' sigma) o G^-1``,
    where ``G''`` at a drift breakpoint ``xi_i`` is extended by
    ``2 a_i + 2 (mu(xi_i+) - mu(xi_i)) / sigma(xi_i)^2``.
    """

    base: SDEProblem
    params: TransformParams
    tol: float = 1e-12
    _gpp_ext: np.ndarray = field(init=False, repr=False, compare=False)
    _dsig_at: np.ndarray = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        mu, sigma = self.base.mu, self.base.sigma
        if tuple(float(b) for b in mu.breakpoints) != self.params.z:
            raise ValueError("transform centres must equal the drift breakpoints")
        ext, dsig = [], []
        sig_bp = sigma.breakpoints.tolist()
        for i, xi in enumerate(self.params.z):
            a = self.params.alpha[i]
            s = sigma(xi)
            ext.append(2.0 * a + 2.0 * (mu.right_limit(i) - mu.breakpoint_value(i)) / (s * s))
            # one-sided derivatives of sigma~ at xi (G'(xi) = 1, G(xi) = xi)
            if xi in sig_bp:
                j = sig_bp.index(xi)
                dl, dr = sigma.left_derivative(j), sigma.right_derivative(j)
            else:
                dl = dr = sigma.delta(xi)
            left, right = dl - 2.0 * a * s, dr + 2.0 * a * s
            dsig.append(left if _same(left, right) else 0.0)
        object.__setattr__(self, "_gpp_ext", np.array(ext))
        object.__setattr__(self, "_dsig_at", np.array(dsig))

    @property
    def x0(self):
        return float(_g(self.params, np.array(self.base.x0)))

    @property
    def x_init(self):
        return self.x0

    @property
    def breakpoints(self):
        return np.array(self.params.z)

    def inverse(self, y):
        return _ginv(self.params, np.asarray(y, dtype=float), self.tol)

    def coefficients(self, y, with_delta=True):
        """Return ``(mu~(y), sigma~(y), delta_sigma~(y))`` with a single inversion."""
        y = np.asarray(y, dtype=float)
        shape = y.shape
        y = y.reshape(-1)
        T = self.params
        x = _ginv(T, y, self.tol)
        mu, sigma = self.base.mu, self.base.sigma
        gp = _gp(T, x)
        gpp = _gpp(T, x, self._gpp_ext)
        m = mu(x)
        s = sigma(x)
        mt = gp * m + 0.5 * gpp * s * s
        st = gp * s
        if not with_delta:
            return mt.reshape(shape), st.reshape(shape), None
        gpp_int = _gpp(T, x, np.zeros(T.k))
        dt = sigma.delta(x) + gpp_int / gp * s
        for i, zi in enumerate(T.z):
            hit = x == zi
            if hit.any():
                dt[hit] = self._dsig_at[i]
        return mt.reshape(shape), st.reshape(shape), dt.reshape(shape)

    def mu_tilde(self, y):
        arr, scalar = as_float_array(y, "y")
        return restore_shape(self.coefficients(arr, False)[0], scalar)

    def sigma_tilde(self, y):
        arr, scalar = as_float_array(y, "y")
        return restore_shape(self.coefficients(arr, False)[1], scalar)

    def sigma_tilde_prime(self, y):
        """``sigma~'`` under the delta convention."""
        arr, scalar = as_float_array(y, "y")
        return restore_shape(self.coefficients(arr, True)[2], scalar)

    def mu_tilde_prime(self, y):
        """Diagnostic only; NaN exactly at the breakpoints."""
        arr, scalar = as_float_array(y, "y")
        T = self.params
        x = _ginv(T, arr, self.tol)
        mu, sigma = self.base.mu, self.base.sigma
        gp = _gp(T, x)
        gpp = _gpp(T, x)
        gppp = _gppp(T, x)
        s = sigma(x)
        out = mu.delta(x) + gpp / gp * (mu(x) + s * sigma.delta(x)) + 0.5 * gppp / gp * s * s
        return restore_shape(out, scalar)


def transformed_problem(problem, nu=None, tol=1e-12):
    """Build the transformed SDE; ``nu`` defaults to half the admissible radius."""
    if problem.assumption_class != "A":
        raise ValueError("the transform is only defined for class-A problems")
    z = tuple(float(b) for b in problem.mu.breakpoints)
    alpha = compute_alpha(problem)
    rho = rho_max(z, alpha)
    if nu is None:
        nu = default_nu(z, alpha)
    elif not (0.0 < nu < rho):
        raise ValueError(f"nu={nu} is inadmissible; it must lie in (0, {rho})")
    return TransformedSDE(problem, TransformParams(z, tuple(alpha), nu), tol)


class DriftJumpTransformer(TransformerMixin, BaseEstimator):
    """Estimator-style wrapper around the jump-removing transform.

    ``fit`` takes an :class:`SDEProblem` (class A) and learns the bump
    centres, weights and half-width; ``transform`` applies ``G`` and
    ``inverse_transform`` applies ``G^-1`` elementwise to array input.

    Parameters
    ----------
    nu : float, optional
        Bump half-width. Defaults to half of the admissible radius.
    tol : float
        Residual tolerance for the inverse.
    """

    def __init__(self, nu=None, tol=1e-12):
        self.nu = nu
        self.tol = tol

    def fit(self, X, y=None):
        if not isinstance(X, SDEProblem):
            raise TypeError("DriftJumpTransformer.fit expects an SDEProblem")
        tsde = transformed_problem(X, self.nu, self.tol)
        self.transformed_ = tsde
        self.params_ = tsde.params
        self.z_ = np.array(tsde.params.z)
        self.alpha_ = np.array(tsde.params.alpha)
        self.nu_ = tsde.params.nu
        self.rho_ = tsde.params.rho
        return self

    def transform(self, X):
        check_is_fitted(self, "params_")
        arr, _ = as_float_array(X, "X")
        return _g(self.params_, arr)

    def inverse_transform(self, X):
        check_is_fitted(self, "params_")
        arr, _ = as_float_array(X, "X")
        return _ginv(self.params_, arr, self.tol)

    def derivative(self, X, order=1, side="interior"):
        check_is_fitted(self, "params_")
        if order == 1:
            return g_prime(self.params_, X)
        if order == 2:
            return g_second(self.params_, X, side)
        if order == 3:
            return g_third(self.params_, X)
        raise ValueError(f"order must be 1, 2 or 3, got {order!r}")
