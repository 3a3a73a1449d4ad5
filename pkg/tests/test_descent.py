import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from botorus.bifurcation import build_v1
from botorus.descent import (
    NormalForm,
    apply_D,
    apply_Phi,
    build_stack,
    compute_phi,
    descent_residuals,
    eigenvalue_grid,
    mu0_quadrature,
    normal_form_eigenvalue,
    residual_R,
    trace_record,
)
from botorus.nonlinearity import EvaluatedLinearization, exact_box, get_spec, linearize
from botorus.spectral_core import coeff_norm, dx, proj, random_field, resize, to_grid

DATA = build_v1((2, 3))


def real_imag(c):
    """Coefficients of the real and imaginary parts of a complex-valued field."""
    rc = np.conj(c[..., ::-1, ::-1])
    return 0.5 * (c + rc), -0.5j * (c - rc)


def in_X(c, tol=1e-10):
    return coeff_norm(proj("Y", c)) <= tol * max(1.0, coeff_norm(c))


def in_Y(c, tol=1e-10):
    return coeff_norm(proj("X", c)) <= tol * max(1.0, coeff_norm(c))


def stack_for(name, eps, N=8):
    spec = get_spec(name)
    return build_stack(linearize(spec, DATA, np.zeros((1, 1)), eps, box=exact_box(spec, DATA, N, N)))


@pytest.fixture(scope="module")
def stack():
    return stack_for("case1", 0.05)


@pytest.fixture(scope="module")
def trivial():
    nt = nx = 12
    z = np.zeros((2 * nt + 1, 2 * nx + 1), dtype=complex)
    return build_stack(EvaluatedLinearization(z, z, z, z, z, 1.0, 0.0, "manual"))


def test_trivial_stack(trivial):
    dd = trivial.dd
    for c in (dd.phi, dd.eta1, dd.eta2, dd.eta3):
        assert np.max(np.abs(c)) <= 1e-15
    assert trivial.nf.mu0 == 0 and trivial.nf.mu_m2 == 0
    u = random_field(np.random.default_rng(0), 4, 4, zero_mean=True).coeffs
    u = resize(u, *trivial.box)
    for direction in ("forward", "inverse"):
        assert np.max(np.abs(apply_Phi(dd, u, direction) - u)) <= 1e-14
    assert np.max(np.abs(residual_R(trivial, u))) <= 1e-12


def test_phi_equation_and_parity(stack):
    tc = stack.tc
    phi = stack.dd.phi
    box = (phi.shape[0] // 2, phi.shape[1] // 2)
    a76E = proj("E", resize(tc.a7, *box)) + 1j * resize(tc.a6, *box)
    resid = 2j * tc.mu2 * dx(phi) + a76E
    assert np.max(np.abs(proj("E", resid))) <= 1e-10
    assert np.max(np.abs(compute_phi(tc, box=box) - phi)) == 0
    re, im = real_imag(phi)
    assert in_X(re) and in_Y(im)
    assert abs(phi[box]) == 0


def test_descent_equations(stack):
    res = descent_residuals(stack.tc, stack.dd)
    assert set(res) == {"T1", "T0", "T-1", "T-2"}
    assert max(res.values()) <= 1e-9


def test_solvability(stack):
    dd = stack.dd
    for g in (dd.g0, dd.g1, dd.g2):
        assert np.max(np.abs(proj("TC", g))) <= 1e-10


def test_mu0_matches_quadrature(stack):
    assert stack.nf.mu0 == pytest.approx(mu0_quadrature(stack.tc), abs=1e-10)


def test_parity_chain(stack):
    dd = stack.dd
    for c in (dd.g0, dd.eta1, dd.g2, dd.eta3):
        re, im = real_imag(c)
        assert in_Y(re) and in_X(im)
    for c in (dd.g1, dd.eta2):
        re, im = real_imag(c)
        assert in_X(re) and in_Y(im)


def test_leading_factor_never_vanishes(stack):
    f0 = to_grid(stack.dd.f[0])
    a0, b0 = f0.real, f0.imag
    rephi = to_grid(real_imag(stack.dd.phi)[0]).real
    assert np.min(a0**2 + b0**2) > 0
    assert np.max(np.abs(a0**2 + b0**2 - np.exp(2 * rephi))) <= 1e-10


def test_normal_form_is_small(stack):
    assert stack.nf.size() < 0.5


@settings(max_examples=10, deadline=None)
@given(st.integers(0, 2**32 - 1))
def test_phi_round_trip_and_parity(stack, seed):
    rng = np.random.default_rng(seed)
    u = resize(random_field(rng, 5, 5, parity="even", zero_mean=True).coeffs, *stack.box)
    v = apply_Phi(stack.dd, u)
    assert in_X(v, 1e-12)
    assert np.max(np.abs(apply_Phi(stack.dd, v, "inverse") - u)) <= 1e-10


def test_eigenvalues_at_zero_structure():
    nf = NormalForm(1.0, 1.0, 0.0, 0.0, 0.0)
    l, j = np.meshgrid(np.arange(-5, 6), np.arange(-5, 6), indexing="ij")
    assert np.array_equal(normal_form_eigenvalue(nf, l, j), 1j * (l + j * np.abs(j)))


@settings(max_examples=50, deadline=None)
@given(
    st.floats(0.9, 1.1),
    st.floats(0.9, 1.1),
    st.floats(-0.1, 0.1),
    st.floats(-0.1, 0.1),
    st.floats(-0.1, 0.1),
    st.integers(-30, 30),
    st.integers(-8, 8),
)
def test_eigenvalue_symmetries(om, m2, m1, m0, mm2, l, j):
    nf = NormalForm(om, m2, m1, m0, mm2)
    lam = normal_form_eigenvalue(nf, l, j)
    assert lam.real == 0
    # real operator: the symbol at -k is the conjugate of the symbol at k
    assert normal_form_eigenvalue(nf, -l, -j) == pytest.approx(np.conj(lam), abs=1e-12)
    assert normal_form_eigenvalue(nf, -l, -j) == pytest.approx(-lam, abs=1e-12)
    assert normal_form_eigenvalue(nf, l, 0) == pytest.approx(1j * om * l)


def test_remainder_regularizes(stack):
    nt, nx = stack.box
    ratios = []
    for j in (4, 8, 16):
        e = np.zeros((2 * nt + 1, 2 * nx + 1), dtype=complex)
        e[1 + nt, j + nx] = e[-1 + nt, -j + nx] = 1.0
        ratios.append(coeff_norm(residual_R(stack, e)) / j**2)
    assert ratios[0] > ratios[1] > ratios[2]


def test_diagonal_part_commutes_with_splitting(stack):
    u = resize(random_field(np.random.default_rng(1), 6, 6).coeffs, *stack.box)
    assert np.max(np.abs(proj("V", apply_D(stack.nf, u)) - apply_D(stack.nf, proj("V", u)))) == 0
    assert np.max(np.abs(proj("V", apply_D(stack.nf, proj("W", u))))) == 0
    lam = eigenvalue_grid(stack.nf, *stack.box)
    assert np.max(np.abs(apply_D(stack.nf, u) - lam * u)) == 0


def test_constants_decay_with_eps():
    eps_grid = np.geomspace(0.01, 0.1, 5)
    nfs = [stack_for("zero", e, 4).nf for e in eps_grid]
    s0 = np.polyfit(np.log(eps_grid), np.log([abs(n.mu0) for n in nfs]), 1)[0]
    s2 = np.polyfit(np.log(eps_grid), np.log([abs(n.mu_m2) for n in nfs]), 1)[0]
    assert s0 >= 2.5 and s2 >= 3.5


def test_trace_record(stack):
    rec = trace_record(stack.dd, stack.nf)
    assert rec["mu2"] == stack.nf.mu2 and "sup_eta3" in rec
