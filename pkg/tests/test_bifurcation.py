from fractions import Fraction
from itertools import combinations

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from botorus.bifurcation import (
    ModeSetError,
    amplitude_matrix,
    amplitudes,
    apply_linearized_bif,
    bifurcation_residual,
    build_v1,
    build_v2,
    mean_square,
    solve_linearized_bif,
    validate_mode_set,
)
from botorus.nonlinearity import get_spec
from botorus.spectral_core import SpectralField, coeff_norm, kernel_mode, proj


def random_kernel_field(rng, data, nt, nx, odd=False):
    c = np.zeros((2 * nt + 1, 2 * nx + 1), dtype=complex)
    j = 1
    while j * j <= nt and j <= nx:
        v = rng.standard_normal()
        for s in (1, -1):
            l, jj = kernel_mode(s * j)
            c[l + nt, jj + nx] = (1j * s * v) if odd else v
        j += 1
    return c


def test_smallest_mode_set_is_accepted():
    v = validate_mode_set([2, 3])
    assert v.accepted and v.modes.ks == (2, 3)


def test_single_mode_rejected():
    v = validate_mode_set([5])
    assert not v.accepted


def test_existence_failure_reported():
    v = validate_mode_set([1, 5])
    assert not v.accepted and v.reason.startswith("existence")


def test_nondegeneracy_failure_reported():
    # 4 > 5/2 holds but 9 / (3/2) = 6 is an integer
    v = validate_mode_set([4, 5])
    assert not v.accepted and v.reason.startswith("non-degeneracy")


def test_empty_rejected():
    assert not validate_mode_set([]).accepted
    with pytest.raises(ModeSetError):
        build_v1([])


def test_amplitudes_for_two_three():
    rho = amplitudes((2, 3))
    assert rho == [Fraction(4, 3), Fraction(1, 3)]
    assert [4 * r for r in rho] == [Fraction(16, 3), Fraction(4, 3)]
    assert mean_square((2, 3)) == Fraction(10, 3)


def test_bifurcation_equation_holds():
    d = build_v1((2, 3))
    assert coeff_norm(bifurcation_residual(d).coeffs) <= 1e-12
    assert d.delta > 0
    assert d.v1.coeff(-4, 2) ** 2 == pytest.approx(4 / 3)
    assert d.v1.coeff(-9, 3) ** 2 == pytest.approx(1 / 3)


@pytest.mark.parametrize("signs", [(1, -1), (-1, 1), (-1, -1)])
def test_sign_flips_keep_residual_zero(signs):
    d = build_v1((2, 3), signs)
    assert coeff_norm(bifurcation_residual(d).coeffs) <= 1e-12


def test_nondegeneracy_margin_is_attained():
    d = build_v1((2, 3))
    b = float(d.b)
    js = np.arange(1, 200)
    assert np.min(np.abs(b - js) / js) == pytest.approx(d.delta)


def packets():
    out = []
    for m in range(2, 7):
        for ks in combinations(range(1, 41), m):
            if ks[-1] * (2 * m - 3) < ks[0] * 2 * (m - 1):
                out.append(ks)
    return out


def test_packets_satisfy_existence():
    # k_m / k_1 < (m-1)/(m-3/2) forces the existence inequality
    count = 0
    for ks in packets():
        m = len(ks)
        assert Fraction(sum(ks[:-1])) > Fraction(ks[-1]) * (m - Fraction(3, 2))
        count += 1
    assert count > 1000


@settings(max_examples=60, deadline=None)
@given(st.lists(st.integers(1, 40), min_size=2, max_size=6, unique=True))
def test_accepted_sets_have_decreasing_amplitudes(ks):
    ks = sorted(ks)
    v = validate_mode_set(ks)
    if not v.accepted:
        return
    rho = amplitudes(v.modes)
    assert all(r > 0 for r in rho)
    for i in range(len(ks) - 1):
        assert rho[i] - rho[i + 1] == ks[i + 1] - ks[i]
    M = amplitude_matrix(len(ks))
    assert [sum(M[i][j] * rho[j] for j in range(len(ks))) for i in range(len(ks))] == ks


def test_zero_rhs_gives_zero():
    d = build_v1((2, 3))
    h = solve_linearized_bif(d, SpectralField.zeros(16, 4))
    assert np.max(np.abs(h.coeffs)) == 0


@settings(max_examples=20, deadline=None)
@given(st.integers(0, 2**32 - 1))
def test_linearized_operator_round_trip(seed):
    d = build_v1((2, 3))
    rng = np.random.default_rng(seed)
    h0 = random_kernel_field(rng, d, 25, 5)
    f = apply_linearized_bif(d, h0)
    h = solve_linearized_bif(d, SpectralField(f)).coeffs
    assert np.max(np.abs(h - h0)) <= 1e-10 * np.max(np.abs(h0))


def test_linearized_inverse_gains_a_derivative():
    d = build_v1((2, 3))
    rng = np.random.default_rng(7)
    ratios = []
    for _ in range(20):
        f = random_kernel_field(rng, d, 36, 6, odd=True)
        h = solve_linearized_bif(d, SpectralField(f)).coeffs
        ratios.append(coeff_norm(h, 2.0, "l1") / coeff_norm(f, 1.0, "l1"))
    assert max(ratios) < 10


def test_kernel_support_is_invariant():
    d = build_v1((2, 3))
    nt, nx = 25, 5
    on_k = np.zeros((2 * nt + 1, 2 * nx + 1), dtype=complex)
    off_k = np.zeros_like(on_k)
    for j in (2, 3):
        for s in (1, -1):
            l, jj = kernel_mode(s * j)
            on_k[l + nt, jj + nx] = 1.0
    for j in (1, 4, 5):
        for s in (1, -1):
            l, jj = kernel_mode(s * j)
            off_k[l + nt, jj + nx] = 1.0
    k_mask = np.abs(on_k) > 0
    assert np.max(np.abs(np.where(k_mask, 0, apply_linearized_bif(d, on_k)))) <= 1e-12
    assert np.max(np.abs(np.where(k_mask, apply_linearized_bif(d, off_k), 0))) <= 1e-12


def test_v2_vanishes_for_pure_cubic():
    d = build_v1((2, 3))
    assert np.max(np.abs(build_v2(d, get_spec("zero"), 0.05).coeffs)) == 0


def test_v2_bounded_as_eps_shrinks():
    d = build_v1((2, 3))
    norms = [coeff_norm(build_v2(d, get_spec("case1"), e).coeffs, 2.0) for e in (0.04, 0.02, 0.01, 0.005)]
    assert max(norms) <= 2 * min(norms) + 1e-12


def test_v2_lies_in_even_kernel():
    d = build_v1((2, 3))
    v2 = build_v2(d, get_spec("case2"), 0.05).coeffs
    assert np.max(np.abs(proj("Y", v2))) <= 1e-12
    assert np.max(np.abs(v2 - proj("V0", v2))) == 0
