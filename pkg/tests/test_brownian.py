from statistics import NormalDist

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from qmsde.brownian import BrownianLattice, coarsen, generate_path, generate_paths, normal_ppf


def test_regeneration_is_bit_identical():
    a = generate_path(3, 17, 512)
    b = generate_path(3, 17, 512)
    assert a == b
    assert a.increments.tobytes() == b.increments.tobytes()


def test_different_keys_differ():
    base = generate_path(3, 17, 64).increments
    assert not np.array_equal(base, generate_path(4, 17, 64).increments)
    assert not np.array_equal(base, generate_path(3, 18, 64).increments)


def test_generate_paths_stacks_rows():
    rows = generate_paths(9, [5, 2, 7], 32)
    for r, idx in zip(rows, [5, 2, 7]):
        assert np.array_equal(r, generate_path(9, idx, 32).increments)


def test_large_keys_accepted():
    generate_path(2**64 - 1, 2**63 + 5, 8)


@pytest.mark.parametrize("n_ref", [0, 3, 12, -4])
def test_rejects_non_power_of_two(n_ref):
    with pytest.raises(ValueError):
        generate_path(0, 0, n_ref)


def test_lattice_is_read_only():
    lat = generate_path(0, 0, 8)
    with pytest.raises(ValueError):
        lat.increments[0] = 1.0
    with pytest.raises(ValueError):
        BrownianLattice(0, 0, 8, np.zeros(4))


def test_pooled_moments():
    n_ref = 64
    x = generate_paths(2024, range(10**6 // n_ref), n_ref).ravel()
    assert x.size == 10**6
    se = x.std(ddof=1) / np.sqrt(x.size)
    assert abs(x.mean()) <= 4 * se
    assert abs(x.var(ddof=1) * n_ref - 1) <= 0.01


def test_normal_ppf_against_stdlib():
    nd = NormalDist()
    p = np.concatenate([np.linspace(1e-12, 1 - 1e-12, 2001), [1e-300, 2.0**-54, 0.5, 0.975]])
    got = normal_ppf(p)
    want = np.array([nd.inv_cdf(v) for v in p])
    assert np.allclose(got, want, rtol=1e-14, atol=1e-14)


def test_coarsen_trivial_cases():
    lat = generate_path(1, 1, 256)
    assert np.array_equal(coarsen(lat, 256), lat.increments)
    assert coarsen(lat, 1)[0] == pytest.approx(lat.increments.sum(), abs=1e-14)


def test_coarsen_half_matches_prefix_sum_oracle():
    lat = generate_path(1, 2, 256)
    w = lat.grid_values()
    half = coarsen(lat, 128)
    assert np.array_equal(half, lat.increments[0::2] + lat.increments[1::2])
    # prefix sums at shared grid points, up to summation-order rounding
    assert np.allclose(np.cumsum(half), w[2::2], rtol=0, atol=1e-14)


@settings(max_examples=40, deadline=None)
@given(
    seed=st.integers(0, 2**32),
    log_ref=st.integers(0, 10),
    a=st.integers(0, 10),
    b=st.integers(0, 10),
)
def test_chain_consistency_is_exact(seed, log_ref, a, b):
    n1, n2 = sorted((2 ** min(a, log_ref), 2 ** min(b, log_ref)))
    lat = generate_path(seed, 0, 2**log_ref)
    assert np.array_equal(coarsen(coarsen(lat, n2), n1), coarsen(lat, n1))


def test_coarsen_errors():
    lat = generate_path(0, 0, 16)
    with pytest.raises(ValueError):
        coarsen(lat, 32)
    with pytest.raises(ValueError):
        coarsen(lat, 3)
    with pytest.raises(ValueError):
        coarsen(np.zeros(12), 4)


def test_coarsen_works_on_stacked_rows():
    rows = generate_paths(5, range(4), 64)
    c = coarsen(rows, 8)
    assert c.shape == (4, 8)
    for r, crow in zip(rows, c):
        assert np.array_equal(coarsen(r, 8), crow)


def test_independence_across_path_index():
    w1 = coarsen(generate_paths(77, range(0, 20000, 2), 16), 1).ravel()
    w2 = coarsen(generate_paths(77, range(1, 20000, 2), 16), 1).ravel()
    assert abs(np.corrcoef(w1, w2)[0, 1]) < 0.05
