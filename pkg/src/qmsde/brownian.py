"""Seed-reproducible Brownian increments on a dyadic grid.

Each path is drawn from a Philox counter-based stream keyed by
``(seed, path_index)``: increment ``j`` depends only on the key and ``j``,
so paths can be generated in any order, on any number of workers, with
identical results. Uniforms are mapped to normals with Wichura's AS241
rational approximation, which uses only arithmetic, ``log`` and ``sqrt``.
"""

from dataclasses import dataclass

import numpy as np

from ._validation import check_divides, check_power_of_two

__all__ = ["BrownianLattice", "coarsen", "generate_path", "generate_paths", "normal_ppf"]

_MASK64 = (1 << 64) - 1

# AS241 (PPND16) coefficients
_A = (3.387132872796366608, 133.14166789178437745, 1971.5909503065514427,
      13731.693765509461125, 45921.953931549871457, 67265.770927008700853,
      33430.575583588128105, 2509.0809287301226727)
_B = (1.0, 42.313330701600911252, 687.1870074920579083, 5394.1960214247511077,
      21213.794301586595867, 39307.89580009271061, 28729.085735721942674,
      5226.495278852545925)
_C = (1.42343711074968357734, 4.6303378461565452959, 5.7694972214606914055,
      3.64784832476320460504, 1.27045825245236838258, 0.24178072517745061177,
      0.0227238449892691845833, 7.7454501427834140764e-4)
_D = (1.0, 2.05319162663775882187, 1.6763848301838038494,
      0.68976733498510000455, 0.14810397642748007459, 0.0151986665636164571966,
      5.475938084995344946e-4, 1.05075007164441684324e-9)
_E = (6.6579046435011037772, 5.4637849111641143699, 1.7848265399172913358,
      0.29656057182850489123, 0.026532189526576123093, 0.0012426609473880784386,
      2.71155556874348757815e-5, 2.01033439929228813265e-7)
_F = (1.0, 0.59983220655588793769, 0.13692988092273580531,
      0.0148753612908506148525, 7.868691311456132591e-4, 1.8463183175100546818e-5,
      1.4215117583164458887e-7, 2.04426310338993978564e-15)


def _horner(coef, x):
    acc = coef[7]
    for c in coef[6::-1]:
        acc = acc * x + c
    return acc


def normal_ppf(p):
    """Standard normal quantile for ``p`` in (0, 1), vectorised AS241."""
    p = np.asarray(p, dtype=float)
    q = p - 0.5
    out = np.empty_like(p)
    central = np.abs(q) <= 0.425
    if central.any():
        qc = q[central]
        r = 0.180625 - qc * qc
        out[central] = qc * _horner(_A, r) / _horner(_B, r)
    tail = ~central
    if tail.any():
        qt = q[tail]
        r = np.where(qt < 0, p[tail], 1.0 - p[tail])
        r = np.sqrt(-np.log(r))
        near = r <= 5.0
        val = np.where(
            near,
            _horner(_C, r - 1.6) / _horner(_D, r - 1.6),
            _horner(_E, r - 5.0) / _horner(_F, r - 5.0),
        )
        out[tail] = np.where(qt < 0, -val, val)
    return out


def _uniforms(seed, path_index, size):
    key = np.array([seed & _MASK64, path_index & _MASK64], dtype=np.uint64)
    bits = np.random.Philox(key=key).random_raw(size)
    return ((bits >> np.uint64(11)).astype(np.float64) + 0.5) * 2.0 ** -53


def _increments(seed, path_index, n_ref):
    return normal_ppf(_uniforms(seed, path_index, n_ref)) / np.sqrt(n_ref)


@dataclass(frozen=True, eq=False)
class BrownianLattice:
    """``n_ref`` i.i.d. ``N(0, 1/n_ref)`` increments of one Brownian path."""

    seed: int
    path_index: int
    n_ref: int
    increments: np.ndarray

    def __post_init__(self):
        if self.increments.shape != (self.n_ref,):
            raise ValueError("increments length must equal n_ref")
        self.increments.setflags(write=False)

    def __eq__(self, other):
        if not isinstance(other, BrownianLattice):
            return NotImplemented
        return (
            (self.seed, self.path_index, self.n_ref) == (other.seed, other.path_index, other.n_ref)
            and np.array_equal(self.increments, other.increments)
        )

    __hash__ = None

    def coarsen(self, n):
        return coarsen(self.increments, n)

    def grid_values(self):
        """``W`` at ``j / n_ref`` for ``j = 0..n_ref``."""
        return np.concatenate(([0.0], np.cumsum(self.increments)))


def generate_path(seed, path_index, n_ref):
    n_ref = check_power_of_two(n_ref, "n_ref")
    seed, path_index = int(seed), int(path_index)
    return BrownianLattice(seed, path_index, n_ref, _increments(seed, path_index, n_ref))


def generate_paths(seed, path_indices, n_ref):
    """Stack the increments of several paths into an ``(len, n_ref)`` array."""
    n_ref = check_power_of_two(n_ref, "n_ref")
    path_indices = [int(i) for i in path_indices]
    out = np.empty((len(path_indices), n_ref))
    for row, idx in enumerate(path_indices):
        out[row] = _increments(int(seed), idx, n_ref)
    return out


def coarsen(increments, n):
    """Sum fine increments into ``n`` coarse ones along the last axis.

    Sums are formed by repeated pairwise halving, so coarsening in stages
    gives bit-identical results to coarsening in one go.
    """
    if isinstance(increments, BrownianLattice):
        increments = increments.increments
    a = np.asarray(increments, dtype=float)
    n_ref = a.shape[-1]
    check_power_of_two(n_ref, "increment count")
    n = check_divides(n, n_ref)
    check_power_of_two(n)
    while a.shape[-1] > n:
        a = a[..., 0::2] + a[..., 1::2]
    return a.copy() if a is increments else a
