"""Euler-Maruyama, quasi-Milstein and the transformed quasi-Milstein method.

All integrators are vectorised over leading axes: ``increments`` of shape
``(..., n)`` produce paths of shape ``(..., n + 1)``, one per row.
"""

from dataclasses import dataclass
from typing import Optional

import numpy as np

from .piecewise import SDEProblem
from .transform import TransformParams, TransformedSDE, _ginv, transformed_problem

__all__ = [
    "PathBlowUpError",
    "SchemePath",
    "continuous_value",
    "euler_step",
    "fine_grid_values",
    "invert_transformed",
    "qm_step",
    "resolve_scheme",
    "simulate",
]

SCHEMES = ("euler", "quasi_milstein", "transformed_qm")
_ALIASES = {
    "euler": "euler", "em": "euler",
    "qm": "quasi_milstein", "quasi_milstein": "quasi_milstein", "milstein": "quasi_milstein",
    "tqm": "transformed_qm", "transformed_qm": "transformed_qm",
}


class PathBlowUpError(FloatingPointError):
    """A simulated state became non-finite."""

    def __init__(self, step, rows):
        self.step = step
        self.rows = rows
        super().__init__(f"non-finite state at step {step} (rows {rows}); check the coefficients")


def resolve_scheme(name):
    try:
        return _ALIASES[name]
    except KeyError:
        raise ValueError(f"unknown scheme {name!r}; choose from euler, qm, tqm") from None


def euler_step(mu_val, sigma_val, x, h, dW):
    return x + mu_val * h + sigma_val * dW


def qm_step(mu_val, sigma_val, sigma_delta_val, x, h, dW):
    return x + mu_val * h + sigma_val * dW + 0.5 * sigma_val * sigma_delta_val * (dW * dW - h)


@dataclass(frozen=True, eq=False)
class SchemePath:
    """Grid values ``X_hat[l / n]``, ``l = 0..n`` (last axis) of one scheme run.

    For ``transformed_qm`` the values are in transformed coordinates until
    :func:`invert_transformed` is applied (``inverted`` flips to True).
    """

    n: int
    values: np.ndarray
    scheme: str
    increments: np.ndarray
    inverted: bool = False
    params: Optional[TransformParams] = None

    @property
    def times(self):
        return np.arange(self.n + 1) / self.n

    @property
    def final(self):
        return self.values[..., -1]


def _coefficient_provider(problem, scheme, nu=None, tol=1e-12):
    if scheme == "transformed_qm":
        if isinstance(problem, TransformedSDE):
            return problem
        return transformed_problem(problem, nu, tol)
    if isinstance(problem, TransformedSDE) and scheme != "transformed_qm":
        return problem
    if not isinstance(problem, SDEProblem):
        raise TypeError(f"expected an SDEProblem or TransformedSDE, got {type(problem).__name__}")
    return problem


def simulate(problem, scheme, n, increments, nu=None, tol=1e-12):
    """Run ``scheme`` with ``n`` steps of size ``1/n`` on the given increments.

    ``problem`` is an :class:`SDEProblem` or a :class:`TransformedSDE`. For
    ``"tqm"`` an untransformed problem is transformed first (``nu``/``tol``
    are used only then); the returned path holds the raw transformed states.
    """
    scheme = resolve_scheme(scheme)
    inc = np.asarray(increments, dtype=float)
    n = int(n)
    if inc.shape[-1:] != (n,):
        raise ValueError(f"expected {n} increments along the last axis, got shape {inc.shape}")
    coeffs = _coefficient_provider(problem, scheme, nu, tol)
    h = 1.0 / n
    out = np.empty(inc.shape[:-1] + (n + 1,))
    x = np.full(inc.shape[:-1], coeffs.x0)
    out[..., 0] = x
    milstein = scheme != "euler"
    # overflow is detected explicitly below
    with np.errstate(over="ignore", invalid="ignore"):
        for l in range(n):
            dW = inc[..., l]
            m, s, d = coeffs.coefficients(x, milstein)
            if milstein:
                x = qm_step(m, s, d, x, h, dW)
            else:
                x = euler_step(m, s, x, h, dW)
            if not np.all(np.isfinite(x)):
                raise PathBlowUpError(l, np.flatnonzero(~np.isfinite(np.ravel(x))).tolist())
            out[..., l + 1] = x
    params = coeffs.params if isinstance(coeffs, TransformedSDE) else None
    return SchemePath(n, out, scheme, inc, False, params)


def _step_index(t, n):
    if not (0.0 < t <= 1.0):
        raise ValueError(f"t={t} must lie in (0, 1]")
    i = int(np.ceil(t * n)) - 1
    # snap grid times that land one ulp above an integer multiple
    if i >= 1 and np.isclose(t * n, i, rtol=0, atol=1e-9):
        i -= 1
    return max(i, 0)


def continuous_value(path, problem, t, W_t_minus_Wi, i=None):
    """Time-continuous interpolant at ``t`` in ``(i/n, (i+1)/n]``.

    ``problem`` supplies the coefficients used to produce ``path`` (an
    :class:`SDEProblem` or :class:`TransformedSDE`). The step index ``i`` is
    inferred from ``t`` unless given.
    """
    n = path.n
    if i is None:
        i = _step_index(t, n)
    elif not (i / n < t <= (i + 1) / n):
        raise ValueError(f"t={t} is outside the step ({i}/{n}, {i + 1}/{n}]")
    x = path.values[..., i]
    tau = t - i / n
    dw = np.asarray(W_t_minus_Wi, dtype=float)
    milstein = path.scheme != "euler"
    m, s, d = problem.coefficients(np.asarray(x, dtype=float), milstein)
    val = x + m * tau + s * dw
    if milstein:
        val = val + 0.5 * s * d * (dw * dw - tau)
    return val


def fine_grid_values(path, problem, fine_increments):
    """Evaluate the continuous interpolant at every fine grid time ``j / n_ref``.

    ``fine_increments`` has shape ``(..., n_ref)`` and must coarsen to the
    increments that drove ``path``. Returns ``(..., n_ref + 1)`` values.
    """
    n = path.n
    fine = np.asarray(fine_increments, dtype=float)
    n_ref = fine.shape[-1]
    r = n_ref // n
    if r * n != n_ref:
        raise ValueError(f"n={n} does not divide n_ref={n_ref}")
    blocks = fine.reshape(fine.shape[:-1] + (n, r))
    dw = np.cumsum(blocks, axis=-1)
    tau = np.arange(1, r + 1) / n_ref
    x = path.values[..., :-1]
    milstein = path.scheme != "euler"
    m, s, d = problem.coefficients(x, milstein)
    x, m, s = x[..., None], m[..., None], s[..., None]
    val = x + m * tau + s * dw
    if milstein:
        val = val + 0.5 * s * d[..., None] * (dw * dw - tau)
    val = val.reshape(fine.shape[:-1] + (n_ref,))
    return np.concatenate((path.values[..., :1], val), axis=-1)


def invert_transformed(path, transform, tol=1e-12):
    """Map a transformed path back through ``G^-1``."""
    if path.scheme != "transformed_qm" or path.inverted:
        raise ValueError("invert_transformed expects a raw transformed_qm path")
    params = transform.params if isinstance(transform, TransformedSDE) else transform
    values = _ginv(params, np.asarray(path.values, dtype=float), tol)
    return SchemePath(path.n, values, path.scheme, path.increments, True, params)
