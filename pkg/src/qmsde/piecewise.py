"""Piecewise-smooth scalar coefficients and the SDE problems built from them.

A :class:`PiecewiseFunction` is defined by breakpoints ``xi_1 < ... < xi_k``,
``k + 1`` pieces living on the open intervals between them (the outer
intervals extend to -inf and +inf), and an explicit value at every
breakpoint. Derivatives follow the delta convention: the classical
derivative where the function is differentiable and 0 at every breakpoint
where it is not.
"""

from dataclasses import dataclass, field
from typing import Callable, Optional, Sequence, Union

import numpy as np

from ._validation import as_float_array, check_strictly_increasing, restore_shape

__all__ = [
    "AffinePiece",
    "CatalogPiece",
    "PiecewiseFunction",
    "SDEProblem",
    "affine",
    "constant",
    "delta",
    "evaluate",
    "indicator",
    "left_limit",
    "right_limit",
]

# Relative tolerance used to decide whether one-sided values coincide.
_MATCH_RTOL = 1e-12
_MATCH_ATOL = 1e-14


def _same(a, b):
    return bool(np.isclose(a, b, rtol=_MATCH_RTOL, atol=_MATCH_ATOL))


@dataclass(frozen=True)
class AffinePiece:
    """``x -> slope * x + intercept`` on one open interval."""

    slope: float
    intercept: float

    def __post_init__(self):
        if not (np.isfinite(self.slope) and np.isfinite(self.intercept)):
            raise ValueError(f"affine piece needs finite coefficients, got {self}")

    @property
    def lipschitz(self):
        return abs(self.slope)

    def value(self, x):
        return self.slope * x + self.intercept

    def derivative(self, x):
        return np.full(np.shape(x), float(self.slope))

    def to_dict(self):
        return {"slope": self.slope, "intercept": self.intercept}


@dataclass(frozen=True)
class CatalogPiece:
    """A named closed-form piece from the built-in catalog.

    ``func`` and ``deriv`` must accept numpy arrays. ``lipschitz`` is an upper
    bound for the Lipschitz constant on the piece, if known.
    """

    name: str
    func: Callable = field(repr=False)
    deriv: Callable = field(repr=False)
    lipschitz: Optional[float] = None

    def value(self, x):
        return self.func(x)

    def derivative(self, x):
        return self.deriv(x)


Piece = Union[AffinePiece, CatalogPiece]
BreakpointRule = Union[str, float]


class PiecewiseFunction:
    """Scalar function with finitely many breakpoints.

    Parameters
    ----------
    breakpoints : sequence of float
        Strictly increasing finite breakpoints. May be empty.
    pieces : sequence of pieces
        ``len(breakpoints) + 1`` pieces, ordered left to right.
    at_breakpoint : sequence, optional
        Value rule per breakpoint: ``"left"`` or ``"right"`` to take the
        corresponding one-sided limit, or an explicit number. Defaults to
        ``"right"`` everywhere, i.e. indicator-style ``1_[xi, inf)`` ownership.

    Instances are immutable; the value at each breakpoint is resolved once
    at construction.
    """

    def __init__(self, breakpoints=(), pieces=(), at_breakpoint=None):
        bp = check_strictly_increasing(breakpoints, "breakpoints")
        pieces = tuple(pieces)
        if len(pieces) != bp.size + 1:
            raise ValueError(
                f"expected {bp.size + 1} pieces for {bp.size} breakpoints, got {len(pieces)}"
            )
        for p in pieces:
            if not isinstance(p, (AffinePiece, CatalogPiece)):
                raise TypeError(f"unsupported piece type {type(p).__name__}")
        if at_breakpoint is None:
            at_breakpoint = ["right"] * bp.size
        rules = tuple(at_breakpoint)
        if len(rules) != bp.size:
            raise ValueError(
                f"expected {bp.size} breakpoint rules, got {len(rules)}"
            )

        bp.setflags(write=False)
        self._bp = bp
        self._pieces = pieces
        self._rules = rules

        left, right, lder, rder, vals = [], [], [], [], []
        for i, b in enumerate(bp):
            lo = float(pieces[i].value(np.float64(b)))
            hi = float(pieces[i + 1].value(np.float64(b)))
            if not (np.isfinite(lo) and np.isfinite(hi)):
                raise ValueError(f"one-sided limits at breakpoint {b} must be finite")
            rule = rules[i]
            if isinstance(rule, str):
                if rule == "left":
                    v = lo
                elif rule == "right":
                    v = hi
                else:
                    raise ValueError(f"breakpoint rule must be 'left', 'right' or a number, got {rule!r}")
            else:
                v = float(rule)
                if not np.isfinite(v):
                    raise ValueError(f"breakpoint value must be finite, got {rule!r}")
            left.append(lo)
            right.append(hi)
            vals.append(v)
            lder.append(float(pieces[i].derivative(np.float64(b))))
            rder.append(float(pieces[i + 1].derivative(np.float64(b))))
        self._left = np.array(left)
        self._right = np.array(right)
        self._values = np.array(vals)
        self._lder = np.array(lder)
        self._rder = np.array(rder)
        # delta convention at each breakpoint: derivative if differentiable, else 0
        diff = []
        for i in range(bp.size):
            smooth = (
                _same(left[i], right[i])
                and _same(vals[i], left[i])
                and _same(lder[i], rder[i])
            )
            diff.append(lder[i] if smooth else 0.0)
        self._delta_at = np.array(diff)
        self._differentiable = tuple(
            _same(left[i], right[i]) and _same(vals[i], left[i]) and _same(lder[i], rder[i])
            for i in range(bp.size)
        )

    # -- structure -----------------------------------------------------------
    @property
    def breakpoints(self):
        return self._bp

    @property
    def pieces(self):
        return self._pieces

    @property
    def at_breakpoint(self):
        return self._rules

    @property
    def k(self):
        return int(self._bp.size)

    @property
    def exportable(self):
        """True when every piece is affine and can be written as JSON."""
        return all(isinstance(p, AffinePiece) for p in self._pieces)

    def __repr__(self):
        return (
            f"PiecewiseFunction(breakpoints={self._bp.tolist()}, "
            f"pieces={list(self._pieces)}, at_breakpoint={list(self._rules)})"
        )

    def __eq__(self, other):
        if not isinstance(other, PiecewiseFunction):
            return NotImplemented
        return (
            np.array_equal(self._bp, other._bp)
            and self._pieces == other._pieces
            and np.array_equal(self._values, other._values)
        )

    __hash__ = None

    def _check_index(self, i):
        if not (0 <= i < self.k):
            raise IndexError(f"breakpoint index {i} out of range for k={self.k}")

    # -- evaluation ----------------------------------------------------------
    def _apply(self, arr, method, at_bp):
        if self.k == 0:
            return np.asarray(getattr(self._pieces[0], method)(arr), dtype=float) + np.zeros_like(arr)
        idx = np.searchsorted(self._bp, arr, side="right")
        out = np.empty_like(arr)
        for j, piece in enumerate(self._pieces):
            m = idx == j
            if m.any():
                out[m] = getattr(piece, method)(arr[m])
        for i, b in enumerate(self._bp):
            m = arr == b
            if m.any():
                out[m] = at_bp[i]
        return out

    def __call__(self, x):
        """Evaluate; breakpoints take their resolved breakpoint value."""
        arr, scalar = as_float_array(x)
        return restore_shape(self._apply(arr, "value", self._values), scalar)

    def delta(self, x):
        """Derivative under the delta convention (0 at non-smooth breakpoints)."""
        arr, scalar = as_float_array(x)
        return restore_shape(self._apply(arr, "derivative", self._delta_at), scalar)

    def left_limit(self, i):
        self._check_index(i)
        return float(self._left[i])

    def right_limit(self, i):
        self._check_index(i)
        return float(self._right[i])

    def left_derivative(self, i):
        self._check_index(i)
        return float(self._lder[i])

    def right_derivative(self, i):
        self._check_index(i)
        return float(self._rder[i])

    def breakpoint_value(self, i):
        self._check_index(i)
        return float(self._values[i])

    def is_continuous_at(self, i):
        self._check_index(i)
        return _same(self._left[i], self._right[i]) and _same(self._values[i], self._left[i])

    def is_differentiable_at(self, i):
        self._check_index(i)
        return self._differentiable[i]

    @property
    def is_continuous(self):
        return all(self.is_continuous_at(i) for i in range(self.k))

    def kinks(self):
        """Breakpoints at which the function is not differentiable."""
        return self._bp[[not d for d in self._differentiable]] if self.k else self._bp

    def lipschitz_bounds(self):
        """Per-piece Lipschitz constants (``None`` where unknown)."""
        return [p.lipschitz for p in self._pieces]


# -- functional aliases ----------------------------------------------------
def evaluate(f, x):
    return f(x)


def delta(f, x):
    return f.delta(x)


def left_limit(f, i):
    return f.left_limit(i)


def right_limit(f, i):
    return f.right_limit(i)


# -- constructors ------------------------------------------------------------
def affine(slope, intercept=0.0):
    return PiecewiseFunction((), [AffinePiece(float(slope), float(intercept))])


def constant(c):
    return affine(0.0, c)


def indicator(at=0.0):
    """``1_[at, inf)``: 0 to the left, 1 from the breakpoint on."""
    return PiecewiseFunction([at], [AffinePiece(0.0, 0.0), AffinePiece(0.0, 1.0)], ["right"])


# -- problems ----------------------------------------------------------------
@dataclass(frozen=True)
class SDEProblem:
    """``dX = mu(X) dt + sigma(X) dW`` on ``[0, 1]`` with ``X_0 = x0``.

    ``assumption_class`` is ``"A"`` (drift may jump) or ``"B"`` (globally
    Lipschitz drift and diffusion, piecewise C^1). ``exact_solution``, if
    given, maps ``(x0, t, W_t)`` to ``X_t`` and is used as the reference in
    convergence studies.
    """

    x0: float
    mu: PiecewiseFunction
    sigma: PiecewiseFunction
    assumption_class: str = "A"
    name: Optional[str] = None
    exact_solution: Optional[Callable] = field(default=None, compare=False, repr=False)

    def __post_init__(self):
        if not np.isfinite(self.x0):
            raise ValueError(f"x0 must be finite, got {self.x0!r}")
        object.__setattr__(self, "x0", float(self.x0))
        cls = self.assumption_class
        if cls not in ("A", "B"):
            raise ValueError(f"assumption_class must be 'A' or 'B', got {cls!r}")
        mu, sigma = self.mu, self.sigma
        if not sigma.is_continuous:
            raise ValueError("sigma must be continuous on the real line")
        for i, xi in enumerate(mu.breakpoints):
            if sigma(xi) == 0.0:
                raise ValueError(f"sigma vanishes at drift breakpoint {xi}")
        if cls == "B":
            if not mu.is_continuous:
                bad = [float(b) for i, b in enumerate(mu.breakpoints) if not mu.is_continuous_at(i)]
                raise ValueError(f"class B requires a continuous drift; jumps at {bad}")
            for eta in sigma.kinks():
                if sigma(eta) == 0.0:
                    raise ValueError(f"sigma vanishes at its own kink {eta}")
        else:
            xs = set(mu.breakpoints.tolist())
            stray = [float(e) for e in sigma.kinks() if float(e) not in xs]
            if stray:
                raise ValueError(
                    f"class A requires sigma to be smooth between drift breakpoints; kinks at {stray}"
                )

    @property
    def x_init(self):
        return self.x0

    def coefficients(self, x, with_delta=True):
        """Return ``(mu(x), sigma(x), delta_sigma(x))``; the last is None unless requested."""
        m = self.mu(x)
        s = self.sigma(x)
        d = self.sigma.delta(x) if with_delta else None
        return m, s, d
