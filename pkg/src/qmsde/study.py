"""Monte-Carlo strong-error estimation on coupled levels and order fitting.

For every path index the fine Brownian lattice at ``n_ref`` is drawn once;
the reference solution and every coarse level consume coarsenings of that
same lattice, so errors are measured pathwise. Paths are processed in
fixed-size chunks (the unit of parallelism) and reduced in path order, so
results do not depend on the number of workers.
"""

import csv
import datetime
import io
import json
import os
import shlex
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass, field
from typing import Dict, List, Optional, Tuple

import numpy as np
from scipy import stats
from sklearn.base import BaseEstimator, RegressorMixin
from sklearn.utils.validation import check_is_fitted

from ._validation import check_divides, check_power_of_two
from .brownian import coarsen, generate_paths
from .schemes import PathBlowUpError, fine_grid_values, resolve_scheme, simulate
from .serialization import resolve_problem
from .transform import _ginv, transformed_problem

__all__ = [
    "ConvergenceOrderRegressor",
    "LevelResult",
    "RateFit",
    "StudyConfig",
    "StudyPathError",
    "StudyReport",
    "pathwise_errors",
    "rate_fit",
    "run_study",
    "strong_error",
    "strong_error_from_samples",
]

SCHEMA_VERSION = 1
ERROR_MODES = ("final_time", "grid_sup")
_SHORT = {"euler": "euler", "quasi_milstein": "qm", "transformed_qm": "tqm"}


# -- order fitting -----------------------------------------------------------
@dataclass(frozen=True)
class RateFit:
    order: float
    slope: float
    intercept: float
    r_squared: float
    slope_stderr: float


class ConvergenceOrderRegressor(RegressorMixin, BaseEstimator):
    """Least-squares fit of ``log2(error)`` against ``log2(n)``.

    After ``fit``, ``order_`` is the negated slope, so errors behaving like
    ``c * n**-r`` give ``order_ == r``.
    """

    def fit(self, X, y):
        n = np.asarray(X, dtype=float).reshape(-1)
        err = np.asarray(y, dtype=float).reshape(-1)
        if n.size != err.size:
            raise ValueError(f"got {n.size} levels but {err.size} errors")
        if n.size < 2:
            raise ValueError("need at least two points to fit an order")
        if np.any(err <= 0) or not np.all(np.isfinite(err)):
            raise ValueError("errors must be positive and finite")
        if np.any(n <= 0):
            raise ValueError("levels must be positive")
        lx, ly = np.log2(n), np.log2(err)
        if np.ptp(lx) == 0:
            raise ValueError("levels must not all be equal")
        res = stats.linregress(lx, ly)
        self.slope_ = float(res.slope)
        self.intercept_ = float(res.intercept)
        self.order_ = -self.slope_
        self.r_squared_ = float(res.rvalue ** 2)
        self.slope_stderr_ = float(res.stderr) if n.size > 2 else 0.0
        return self

    def predict(self, X):
        check_is_fitted(self, "slope_")
        n = np.asarray(X, dtype=float).reshape(-1)
        return 2.0 ** (self.intercept_ + self.slope_ * np.log2(n))

    def to_fit(self):
        check_is_fitted(self, "slope_")
        return RateFit(self.order_, self.slope_, self.intercept_, self.r_squared_, self.slope_stderr_)


def rate_fit(points):
    """Fit ``[(n, error), ...]`` and return a :class:`RateFit`."""
    points = list(points)
    if len(points) < 2:
        raise ValueError("need at least two points to fit an order")
    n, err = zip(*points)
    return ConvergenceOrderRegressor().fit(n, err).to_fit()


# -- configuration -----------------------------------------------------------
def _parse_levels(levels):
    if isinstance(levels, str):
        if ".." in levels:
            a, b = (int(v) for v in levels.split(".."))
            out, n = [], 1
            while n <= b:
                if n >= a:
                    out.append(n)
                n *= 2
            return tuple(out)
        return tuple(int(v) for v in levels.split(","))
    return tuple(int(v) for v in levels)


@dataclass(frozen=True)
class StudyConfig:
    """Parameters of a convergence study.

    ``levels`` accepts an iterable or a string ``"a..b"`` (powers of two in
    ``[a, b]``) or ``"16,32,64"``. ``n_ref`` defaults to ``16 * max(levels)``.
    """

    problem: object
    scheme: str
    levels: Tuple[int, ...]
    n_ref: Optional[int] = None
    M: int = 2000
    p_list: Tuple[float, ...] = (1.0, 2.0)
    seed: int = 0
    nu: Optional[float] = None
    error_mode: str = "final_time"
    tol: float = 1e-12
    chunk_size: int = 250

    def __post_init__(self):
        levels = _parse_levels(self.levels)
        if not levels:
            raise ValueError("at least one level is required")
        for n in levels:
            check_power_of_two(n, "level")
        levels = tuple(sorted(set(levels)))
        n_ref = self.n_ref if self.n_ref is not None else 16 * max(levels)
        n_ref = check_power_of_two(n_ref, "n_ref")
        for n in levels:
            check_divides(n, n_ref, "level")
        if levels != (n_ref,) and n_ref < 4 * max(levels):
            raise ValueError(f"n_ref={n_ref} must be at least 4 * max(levels) = {4 * max(levels)}")
        if int(self.M) < 2:
            raise ValueError("M must be at least 2")
        p_list = tuple(float(p) for p in self.p_list)
        if not p_list or any(p < 1 for p in p_list):
            raise ValueError(f"every p must be >= 1, got {p_list}")
        if self.error_mode not in ERROR_MODES:
            raise ValueError(f"error_mode must be one of {ERROR_MODES}, got {self.error_mode!r}")
        if self.chunk_size < 1:
            raise ValueError("chunk_size must be positive")
        object.__setattr__(self, "scheme", resolve_scheme(self.scheme))
        object.__setattr__(self, "levels", levels)
        object.__setattr__(self, "n_ref", n_ref)
        object.__setattr__(self, "M", int(self.M))
        object.__setattr__(self, "p_list", p_list)
        object.__setattr__(self, "seed", int(self.seed))

    @property
    def problem_label(self):
        if isinstance(self.problem, str):
            return self.problem
        return getattr(self.problem, "name", None) or "custom"

    def command_line(self):
        args = [
            "qmsde", "study",
            "--problem", self.problem_label,
            "--scheme", _SHORT[self.scheme],
            "--levels", ",".join(str(n) for n in self.levels),
            "--nref", str(self.n_ref),
            "--M", str(self.M),
            "--p", ",".join(f"{p:g}" for p in self.p_list),
            "--seed", str(self.seed),
            "--error-mode", self.error_mode,
            "--tol", repr(self.tol),
        ]
        if self.nu is not None:
            args += ["--nu", repr(self.nu)]
        return shlex.join(args)


# -- reports -----------------------------------------------------------------
@dataclass(frozen=True)
class LevelResult:
    level: int
    p: float
    error: float
    stderr: float
    paths: int


@dataclass
class StudyReport:
    """Per-level error estimates and fitted orders.

    ``timestamp`` and ``workers`` are bookkeeping and excluded from equality.
    """

    problem: str
    scheme: str
    seed: int
    n_ref: int
    M: int
    levels: List[int]
    p_list: List[float]
    error_mode: str
    nu: Optional[float]
    results: List[LevelResult]
    fits: Dict[str, Optional[RateFit]]
    degenerate: bool
    notes: List[str] = field(default_factory=list)
    command: str = ""
    schema_version: int = SCHEMA_VERSION
    timestamp: str = field(default="", compare=False)
    workers: int = field(default=1, compare=False)

    def error(self, level, p=2.0):
        for r in self.results:
            if r.level == level and r.p == float(p):
                return r
        raise KeyError((level, p))

    def fit(self, p=2.0):
        return self.fits.get(f"{float(p):g}")

    @property
    def order(self):
        """Headline order (p = 2, or the first p when 2 was not requested)."""
        f = self.fit(2.0) if self.fit(2.0) is not None else self.fit(self.p_list[0])
        return None if f is None else f.order

    def to_dict(self):
        d = asdict(self)
        d["fits"] = {k: (None if v is None else asdict(v)) for k, v in self.fits.items()}
        return d

    def to_json(self):
        return json.dumps(self.to_dict(), indent=2)

    def to_csv(self):
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["level", "p", "error", "stderr", "paths"])
        for r in self.results:
            w.writerow([r.level, f"{r.p:g}", repr(r.error), repr(r.stderr), r.paths])
        return buf.getvalue()

    def write(self, out_dir):
        os.makedirs(out_dir, exist_ok=True)
        paths = {
            "json": os.path.join(out_dir, "report.json"),
            "csv": os.path.join(out_dir, "report.csv"),
            "command": os.path.join(out_dir, "command.txt"),
        }
        with open(paths["json"], "w") as fh:
            fh.write(self.to_json() + "\n")
        with open(paths["csv"], "w") as fh:
            fh.write(self.to_csv())
        with open(paths["command"], "w") as fh:
            fh.write(self.command + "\n")
        return paths

    @classmethod
    def from_dict(cls, d):
        d = dict(d)
        d["results"] = [LevelResult(**r) for r in d["results"]]
        d["fits"] = {k: (None if v is None else RateFit(**v)) for k, v in d["fits"].items()}
        return cls(**d)

    def summary(self):
        lines = [
            f"problem={self.problem} scheme={self.scheme} M={self.M} n_ref={self.n_ref} "
            f"seed={self.seed} mode={self.error_mode}"
            + (f" nu={self.nu:g}" if self.nu is not None else "")
        ]
        lines.append(f"{'level':>7} {'p':>4} {'error':>12} {'stderr':>12}")
        for r in self.results:
            lines.append(f"{r.level:>7d} {r.p:>4g} {r.error:>12.5e} {r.stderr:>12.3e}")
        for k, f in self.fits.items():
            if f is None:
                lines.append(f"p={k}: fit rejected (degenerate errors)")
            else:
                lines.append(
                    f"p={k}: order {f.order:.4f} +- {f.slope_stderr:.4f}  R^2 {f.r_squared:.4f}"
                )
        lines.extend(self.notes)
        return "\n".join(lines)


# -- estimation --------------------------------------------------------------
def strong_error_from_samples(abs_err, p):
    """``(mean |e|^p)^(1/p)`` and its delta-method standard error."""
    e = np.asarray(abs_err, dtype=float)
    M = e.size
    ep = e ** p
    m = float(np.mean(ep))
    est = m ** (1.0 / p)
    if m == 0.0:
        return est, 0.0
    se_m = float(np.std(ep, ddof=1)) / np.sqrt(M)
    return est, (1.0 / p) * m ** (1.0 / p - 1.0) * se_m


class _Plan:
    """Resolved problem, coefficient providers and reference strategy."""

    def __init__(self, problem, scheme, nu, tol, error_mode):
        self.problem = problem
        self.scheme = scheme
        self.tol = tol
        self.grid = error_mode == "grid_sup"
        needs_transform = scheme == "transformed_qm" or (
            problem.exact_solution is None and problem.assumption_class == "A"
        )
        self.tsde = transformed_problem(problem, nu, tol) if needs_transform else None
        self.coarse = self.tsde if scheme == "transformed_qm" else problem

    def reference(self, fine):
        prob = self.problem
        n_ref = fine.shape[-1]
        if prob.exact_solution is not None:
            if self.grid:
                w = np.concatenate((np.zeros(fine.shape[:-1] + (1,)), np.cumsum(fine, axis=-1)), axis=-1)
                return prob.exact_solution(prob.x0, np.arange(n_ref + 1) / n_ref, w)
            return prob.exact_solution(prob.x0, 1.0, coarsen(fine, 1)[..., 0])
        if self.tsde is not None:
            path = simulate(self.tsde, "tqm", n_ref, fine)
            vals = path.values if self.grid else path.final
            return _ginv(self.tsde.params, vals, self.tol)
        path = simulate(prob, "qm", n_ref, fine)
        return path.values if self.grid else path.final

    def level(self, fine, n):
        inc = coarsen(fine, n)
        path = simulate(self.coarse, self.scheme, n, inc)
        vals = fine_grid_values(path, self.coarse, fine) if self.grid else path.final
        if self.scheme == "transformed_qm":
            vals = _ginv(self.tsde.params, vals, self.tol)
        return vals


class StudyPathError(RuntimeError):
    """A path blew up; carries the offending ``path_index`` and ``level``."""

    def __init__(self, path_index, level, step):
        self.path_index = path_index
        self.level = level
        self.step = step
        super().__init__(f"path {path_index} blew up at level {level} (step {step})")


def _guarded(fn, path_indices, level):
    try:
        return fn()
    except PathBlowUpError as exc:
        raise StudyPathError(path_indices[exc.rows[0]], level, exc.step) from exc


def pathwise_errors(plan, seed, path_indices, levels, n_ref):
    """Absolute errors ``{level: array}`` for one chunk of paths."""
    path_indices = list(path_indices)
    fine = generate_paths(seed, path_indices, n_ref)
    ref = _guarded(lambda: plan.reference(fine), path_indices, n_ref)
    out = {}
    for n in levels:
        d = np.abs(ref - _guarded(lambda: plan.level(fine, n), path_indices, n))
        out[n] = d.max(axis=-1) if plan.grid else d
    return out


def _collect_errors(config, problem, workers):
    plan = _Plan(problem, config.scheme, config.nu, config.tol, config.error_mode)
    chunks = [
        list(range(start, min(start + config.chunk_size, config.M)))
        for start in range(0, config.M, config.chunk_size)
    ]

    def job(idx):
        return pathwise_errors(plan, config.seed, idx, config.levels, config.n_ref)

    if workers > 1 and len(chunks) > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            parts = list(pool.map(job, chunks))
    else:
        parts = [job(c) for c in chunks]
    errors = {n: np.concatenate([part[n] for part in parts]) for n in config.levels}
    return errors, plan


def run_study(config, workers=1):
    """Estimate strong errors on every level and fit the convergence order per p."""
    problem = resolve_problem(config.problem)
    errors, plan = _collect_errors(config, problem, workers)
    results = []
    for n in config.levels:
        for p in config.p_list:
            est, se = strong_error_from_samples(errors[n], p)
            results.append(LevelResult(n, p, est, se, config.M))
    fits, notes = {}, []
    degenerate = False
    for p in config.p_list:
        pts = [(r.level, r.error) for r in results if r.p == p]
        key = f"{p:g}"
        if len(pts) < 2 or any(e <= 0 for _, e in pts):
            fits[key] = None
            degenerate = True
            notes.append(f"p={key}: need >= 2 levels with positive error to fit an order")
        else:
            fits[key] = rate_fit(pts)
    return StudyReport(
        problem=config.problem_label,
        scheme=config.scheme,
        seed=config.seed,
        n_ref=config.n_ref,
        M=config.M,
        levels=list(config.levels),
        p_list=list(config.p_list),
        error_mode=config.error_mode,
        nu=None if plan.tsde is None else plan.tsde.params.nu,
        results=results,
        fits=fits,
        degenerate=degenerate,
        notes=notes,
        command=config.command_line(),
        timestamp=datetime.datetime.now(datetime.timezone.utc).isoformat(timespec="seconds"),
        workers=workers,
    )


def strong_error(problem, scheme, n, n_ref, M, p, seed, nu=None, tol=1e-12,
                 error_mode="final_time", workers=1):
    """``(estimate, stderr)`` of ``E[|X_1 - X_hat_{n,1}|^p]^(1/p)`` against a level-``n_ref`` reference."""
    config = StudyConfig(problem, scheme, (n,), n_ref, M, (p,), seed, nu, error_mode, tol)
    errors, _ = _collect_errors(config, resolve_problem(problem), workers)
    return strong_error_from_samples(errors[int(n)], p)
