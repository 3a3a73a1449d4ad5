import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from botorus.spectral_core import (
    SpectralField,
    apply_multiplier,
    brute_force_kernel_products,
    coeff_norm,
    hermitian_defect,
    kernel_product_in_V,
    mask,
    parity_check,
    product,
    proj,
    project,
    random_field,
    sobolev_norm,
)

seeds = st.integers(min_value=0, max_value=2**32 - 1)


def field(f, nt=4, nx=4):
    return SpectralField.from_function(f, nt, nx)


def close(u, v, tol=1e-13):
    nt = max(u.box[0], v.box[0])
    nx = max(u.box[1], v.box[1])
    return np.max(np.abs(u.resized(nt, nx).coeffs - v.resized(nt, nx).coeffs)) <= tol


def test_hilbert_of_cos_is_sin():
    u = field(lambda t, x: np.cos(x) + 0 * t)
    assert close(apply_multiplier("hilbert", u), field(lambda t, x: np.sin(x) + 0 * t))


def test_hilbert_twice_kills_mean():
    u = field(lambda t, x: np.cos(x) + 1 + 0 * t)
    hh = apply_multiplier("hilbert", apply_multiplier("hilbert", u))
    assert close(hh, field(lambda t, x: -np.cos(x) + 0 * t))


def test_linear_operator_annihilates_kernel_mode():
    u = SpectralField.from_modes({(-9, 3): 1.0}, 10, 4)
    assert np.max(np.abs(apply_multiplier("L", u).coeffs)) == 0


def test_projection_examples():
    u = field(lambda t, x: 2 + np.cos(x) + 0 * t)
    assert close(project("C", u), field(lambda t, x: 2 + 0 * t + 0 * x))
    k = SpectralField.from_modes({(-5, 3): 1.0}, 6, 4)
    assert np.max(np.abs(project("V", k).coeffs)) == 0
    w = field(lambda t, x: np.cos(t) + np.cos(x))
    assert close(project("T", w), field(lambda t, x: np.cos(t) + 0 * x))


def test_product_of_cosines():
    c = field(lambda t, x: np.cos(x) + 0 * t, 1, 1)
    expected = field(lambda t, x: 0.5 + 0.5 * np.cos(2 * x) + 0 * t, 2, 2)
    assert close(product(c, c), expected)


def test_product_of_conjugate_kernel_modes_is_one():
    nt, nx = 2, 2
    q1 = np.zeros((5, 5), dtype=complex)
    q1[-1 + nt, 1 + nx] = 1.0
    qm1 = np.zeros((5, 5), dtype=complex)
    qm1[1 + nt, -1 + nx] = 1.0
    # q_1 and q_{-1} are conjugates, so 2 cos(...) squared has mean 2.
    u = SpectralField(q1 + qm1)
    assert product(u, u).coeff(0, 0) == pytest.approx(2.0)


def test_product_with_zero():
    rng = np.random.default_rng(3)
    u = random_field(rng, 3, 3)
    assert np.max(np.abs(product(u, SpectralField.zeros(2, 2)).coeffs)) == 0


def test_sobolev_norm_examples():
    one = SpectralField.from_modes({(0, 0): 1.0}, 1, 1)
    assert sobolev_norm(one, 3.0) == pytest.approx(1.0)
    u = field(lambda t, x: 2 * np.cos(2 * x) + 0 * t)
    assert sobolev_norm(u, 1.0) == pytest.approx(2 * np.sqrt(2))
    assert sobolev_norm(3.0 * u, 1.0) == pytest.approx(3 * sobolev_norm(u, 1.0))
    with pytest.raises(ValueError):
        sobolev_norm(u, -1.0)


def test_parity_examples():
    assert parity_check(field(lambda t, x: np.cos(t + x))) == "even"
    assert parity_check(field(lambda t, x: np.sin(x) + 0 * t)) == "odd"
    assert parity_check(field(lambda t, x: np.cos(x) + np.sin(x) + 0 * t)) == "neither"


def test_kernel_products_clean_up_to_ten():
    assert brute_force_kernel_products(10) == []
    assert kernel_product_in_V((2, -2))
    assert not kernel_product_in_V((2, 3))


def test_json_round_trip():
    u = random_field(np.random.default_rng(0), 3, 2)
    v = SpectralField.from_json_dict(u.to_json_dict())
    assert close(u, v, 0.0)


@settings(max_examples=30, deadline=None)
@given(seeds, st.sampled_from(["hilbert", "dx", "dt", "dx_inv", "dt_inv", "L"]))
def test_multipliers_keep_fields_real(seed, kind):
    u = random_field(np.random.default_rng(seed), 4, 5)
    assert hermitian_defect(apply_multiplier(kind, u).coeffs) <= 1e-15


@settings(max_examples=30, deadline=None)
@given(seeds)
def test_kernel_and_range_are_complementary(seed):
    c = random_field(np.random.default_rng(seed), 5, 4).coeffs
    assert np.max(np.abs(proj("V", proj("W", c)))) == 0
    assert np.max(np.abs(proj("V", c) + proj("W", c) - c)) == 0
    nt, nx = 5, 4
    assert not np.any(mask("V", nt, nx) & mask("W", nt, nx))


@settings(max_examples=30, deadline=None)
@given(seeds, st.floats(0.0, 3.0), st.floats(0.0, 3.0))
def test_norm_monotone_and_interpolating(seed, s1, s2):
    u = random_field(np.random.default_rng(seed), 4, 4, decay=0.2)
    lo, hi = sorted((s1, s2))
    n_lo, n_hi = sobolev_norm(u, lo), sobolev_norm(u, hi)
    assert n_lo <= n_hi * (1 + 1e-12)
    mid = 0.5 * (lo + hi)
    assert sobolev_norm(u, mid) <= 2 * np.sqrt(n_lo * n_hi)


@settings(max_examples=100, deadline=None)
@given(seeds, st.sampled_from([1, 2]), st.integers(2, 12), st.floats(0.0, 4.0))
def test_smoothing_inequalities(seed, a, N, s):
    u = random_field(np.random.default_rng(seed), 8, 8, decay=0.1).coeffs
    low = proj("box", u, N)
    high = u - low
    assert coeff_norm(low, s + a, "l1") <= N**a * coeff_norm(u, s, "l1") * (1 + 1e-12)
    assert coeff_norm(high, s, "l1") <= N ** (-a) * coeff_norm(u, s + a, "l1") * (1 + 1e-12)
