"""Descent to a constant-coefficient normal form.

After the change of variables the operator reads

    L3 = omega d_tau + mu2 H d_yy + a6 H d_y + a7 d_y + a8 H + a9 + ...

A near-identity operator ``Phi = sum_{k=0..3} (alpha_k + H beta_k) d_y^-k`` is
built so that ``Phi^-1 L3 Phi = D + R`` with

    D = omega d_tau + mu2 H d_yy + mu1 d_y + mu0 H + mu_m2 H d_y^-2

and ``R`` of order ``-3`` in ``y``.  The coefficients come from complex
functions ``f_k = alpha_k + i beta_k`` (standard ``i``) solving four
transport-type equations; ``f_0 = exp(phi)``, ``f_k = eta_k f_0``.

Complex functions are held as (non-Hermitian) coefficient arrays on the grid
of the working box.  Real fields are Hermitian arrays on the same box.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .nonlinearity import EvaluatedLinearization, apply_L
from .reduction_change_of_vars import (
    TorusDiffeo,
    TransformedCoefficients,
    apply_M_tilde,
    apply_Psi_tilde,
)
from .spectral_core import (
    box_of,
    dt,
    dt_inv,
    dx,
    dx_inv,
    from_grid,
    hilbert,
    proj,
    resize,
    to_grid,
    wavenumbers,
)

NEUMANN_TOL = 1e-12
NEUMANN_MAXITER = 100


class NeumannDivergence(RuntimeError):
    """The Neumann series for a near-identity inverse failed to converge."""


def _mul(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    return from_grid(to_grid(a) * to_grid(b))


def _mean(c: np.ndarray) -> complex:
    nt, nx = box_of(c)
    return complex(c[..., nt, nx])


def _const(value: complex, like: np.ndarray) -> np.ndarray:
    out = np.zeros_like(like, dtype=complex)
    nt, nx = box_of(like)
    out[nt, nx] = value
    return out


# ---------------------------------------------------------------------------
# normal form


@dataclass(frozen=True)
class NormalForm:
    omega: float
    mu2: float
    mu1: float
    mu0: float
    mu_m2: float

    def size(self) -> float:
        """``|omega - 1| + |mu2 - 1| + |mu1| + |mu0| + |mu_m2|``."""
        return abs(self.omega - 1) + abs(self.mu2 - 1) + abs(self.mu1) + abs(self.mu0) + abs(self.mu_m2)

    def as_dict(self) -> dict:
        return {
            "omega": self.omega,
            "mu2": self.mu2,
            "mu1": self.mu1,
            "mu0": self.mu0,
            "mu_m2": self.mu_m2,
        }


def normal_form_eigenvalue(nf: NormalForm, l, j):
    """``i (omega l + mu2 j|j| + mu1 j - mu0 sign j + mu_m2 sign(j) / j^2)``.

    The last term is ``-mu_m2 sign(j) (i j)^-2``; it vanishes at ``j = 0``.
    """
    l = np.asarray(l, dtype=float)
    j = np.asarray(j, dtype=float)
    s = np.sign(j)
    with np.errstate(divide="ignore", invalid="ignore"):
        inv2 = np.where(j != 0, 1.0 / np.where(j != 0, j, 1.0) ** 2, 0.0)
    return 1j * (nf.omega * l + nf.mu2 * j * np.abs(j) + nf.mu1 * j - nf.mu0 * s + nf.mu_m2 * s * inv2)


def eigenvalue_grid(nf: NormalForm, nt: int, nx: int) -> np.ndarray:
    l, j = wavenumbers(nt, nx)
    return normal_form_eigenvalue(nf, l + 0 * j, j + 0 * l)


def apply_D(nf: NormalForm, c: np.ndarray) -> np.ndarray:
    nt, nx = box_of(c)
    return c * eigenvalue_grid(nf, nt, nx)


# ---------------------------------------------------------------------------
# descent chain


@dataclass(frozen=True, eq=False)
class DescentData:
    phi: np.ndarray
    eta1: np.ndarray
    eta2: np.ndarray
    eta3: np.ndarray
    f: tuple[np.ndarray, np.ndarray, np.ndarray, np.ndarray]
    g0: np.ndarray
    g1: np.ndarray
    g2: np.ndarray
    c0: complex
    c_m2: complex
    mu0: float
    mu_m2: float
    # grid values of alpha_k = Re f_k and beta_k = Im f_k
    alpha_grid: np.ndarray
    beta_grid: np.ndarray

    @property
    def box(self) -> tuple[int, int]:
        """Working box on which ``Phi`` acts (the chain itself lives on a finer box)."""
        return self.alpha_grid.shape[-2] // 2, self.alpha_grid.shape[-1] // 2


def _a76E(tc: TransformedCoefficients, box=None) -> np.ndarray:
    box = box or tc.box
    a7 = resize(tc.a7, *box)
    return a7 - _const(tc.mu1, a7) + 1j * resize(tc.a6, *box)


def _a98(tc: TransformedCoefficients, box=None) -> np.ndarray:
    box = box or tc.box
    return resize(tc.a9, *box) + 1j * resize(tc.a8, *box)


def effective_band(c: np.ndarray, rel: float = 1e-13) -> tuple[int, int]:
    """Largest ``|l|`` and ``|j|`` carrying coefficients above ``rel * max``."""
    nt, nx = box_of(c)
    a = np.abs(c).reshape((-1,) + c.shape[-2:]).max(axis=0)
    big = a > rel * max(float(a.max()), 1e-300)
    if not big.any():
        return 0, 0
    l = np.abs(np.flatnonzero(big.any(axis=1)) - nt).max()
    j = np.abs(np.flatnonzero(big.any(axis=0)) - nx).max()
    return int(l), int(j)


DESCENT_FACTOR = 4
DESCENT_MAX_BOX = 400


def descent_box(tc: TransformedCoefficients) -> tuple[int, int]:
    """Box on which the chain's products of up to four coefficient factors are unaliased."""
    bt, bx = effective_band(np.stack([tc.a6, tc.a7 - _const(tc.mu1, tc.a7), tc.a8, tc.a9]))
    nt, nx = tc.box
    et = min(max(nt, DESCENT_FACTOR * bt + 8), DESCENT_MAX_BOX)
    ex = min(max(nx, DESCENT_FACTOR * bx + 8), DESCENT_MAX_BOX)
    return et, ex


def compute_phi(tc: TransformedCoefficients, omega: float | None = None, box=None) -> np.ndarray:
    """Solve ``2 i mu2 phi_y + a76^E = 0`` on ``Z_E`` and fix the ``Z_T`` part so
    that ``g0`` has no ``(tau)``-only component; ``Pi_C phi = 0``."""
    if omega is None:
        omega = tc.omega
    mu2 = tc.mu2
    a76E = _a76E(tc, box)
    a98 = _a98(tc, box)
    phiE = (1j / (2 * mu2)) * dx_inv(a76E)
    sq = _mul(a76E, a76E)
    phiT = -(1j / (4 * mu2 * omega)) * dt_inv(proj("T", sq)) - dt_inv(proj("T", a98)) / omega
    return proj("E", phiE) + proj("T", phiT)


def compute_descent_chain(
    tc: TransformedCoefficients, omega: float | None = None, phi: np.ndarray | None = None
) -> DescentData:
    if omega is None:
        omega = tc.omega
    box = descent_box(tc)
    if phi is None:
        phi = compute_phi(tc, omega, box)
    phi = resize(phi, *box)
    mu2, mu1 = tc.mu2, tc.mu1
    a76E = _a76E(tc, box)
    a98 = _a98(tc, box)
    a76 = a76E + _const(mu1, a76E)

    sq = _mul(a76E, a76E)
    c0 = (1j / (4 * mu2)) * _mean(sq) + _mean(a98)

    phi_y = dx(phi)
    g0 = (
        omega * dt(phi)
        + 1j * mu2 * (_mul(phi_y, phi_y) + dx(phi_y))
        + _mul(a76, phi_y)
        + a98
        - _const(c0, a98)
    )
    eta1 = proj("E", (1j / (2 * mu2)) * dx_inv(g0))

    g1 = _mul(eta1, g0) + omega * dt(eta1) + 1j * mu2 * dx(dx(eta1)) + mu1 * dx(eta1)
    eta2E = proj("E", (1j / (2 * mu2)) * dx_inv(g1))
    e2g0 = _mul(eta2E, g0)
    eta2T = -dt_inv(proj("T", e2g0)) / omega
    c_m2 = _mean(e2g0)
    eta2 = eta2E + eta2T

    g2 = (
        _mul(eta2, g0)
        + omega * dt(eta2)
        + 1j * mu2 * dx(dx(eta2))
        + mu1 * dx(eta2)
        - _const(c_m2, g0)
    )
    eta3 = proj("E", (1j / (2 * mu2)) * dx_inv(g2))

    f0g = np.exp(to_grid(phi))
    fs = [from_grid(f0g)] + [from_grid(to_grid(e) * f0g) for e in (eta1, eta2, eta3)]
    fg = np.stack([to_grid(resize(f, *tc.box)) for f in fs])
    return DescentData(
        phi=phi,
        eta1=eta1,
        eta2=eta2,
        eta3=eta3,
        f=tuple(fs),
        g0=g0,
        g1=g1,
        g2=g2,
        c0=complex(c0),
        c_m2=complex(c_m2),
        mu0=float(np.imag(c0)),
        mu_m2=float(np.imag(c_m2)),
        alpha_grid=fg.real,
        beta_grid=fg.imag,
    )


def normal_form(tc: TransformedCoefficients, dd: DescentData) -> NormalForm:
    return NormalForm(tc.omega, tc.mu2, tc.mu1, dd.mu0, dd.mu_m2)


def mu0_quadrature(tc: TransformedCoefficients) -> float:
    """Independent evaluation ``(1/4mu2) mean[(Pi_E a7)^2 - a6^2] + mean(a8)`` on the grid."""
    a7E = to_grid(proj("E", tc.a7)).real
    a6 = to_grid(tc.a6).real
    a8 = to_grid(tc.a8).real
    return float(np.mean(a7E**2 - a6**2) / (4 * tc.mu2) + np.mean(a8))


def descent_residuals(tc: TransformedCoefficients, dd: DescentData) -> dict[str, float]:
    """Grid sup of ``T1, T0, T-1, T-2`` from their defining combinations."""
    mu2, mu1, omega = tc.mu2, tc.mu1, tc.omega
    box = box_of(dd.phi)
    a76E = _a76E(tc, box)
    a76 = a76E + _const(mu1, a76E)
    a98 = _a98(tc, box)

    def Q(f):
        return 2j * mu2 * dx(f) + _mul(a76E, f)

    def S(f):
        return omega * dt(f) + 1j * mu2 * dx(dx(f)) + _mul(a76, dx(f)) + _mul(a98 - _const(dd.c0, a98), f)

    f0, f1, f2, f3 = dd.f
    T = {
        "T1": Q(f0),
        "T0": Q(f1) + S(f0),
        "T-1": Q(f2) + S(f1),
        "T-2": Q(f3) + S(f2) - dd.c_m2 * f0,
    }
    return {k: float(np.max(np.abs(to_grid(v)))) for k, v in T.items()}


# ---------------------------------------------------------------------------
# the operator Phi


def _dy_pow(c: np.ndarray, k: int) -> np.ndarray:
    for _ in range(k):
        c = dx_inv(c)
    return c


def apply_Phi_raw(dd: DescentData, c: np.ndarray) -> np.ndarray:
    """``sum_k alpha_k d_y^-k h + H(beta_k d_y^-k h)`` (real ``h``, batched)."""
    c = resize(c, *dd.box)
    out = np.zeros_like(c, dtype=complex)
    acc_a = 0.0
    acc_b = 0.0
    for k in range(4):
        hk = to_grid(_dy_pow(c, k)).real
        acc_a = acc_a + dd.alpha_grid[k] * hk
        acc_b = acc_b + dd.beta_grid[k] * hk
    out = from_grid(acc_a) + hilbert(from_grid(acc_b))
    return 0.5 * (out + np.conj(out[..., ::-1, ::-1]))


def apply_Phi(dd: DescentData, c: np.ndarray, direction: str = "forward") -> np.ndarray:
    """``P Phi P`` or its inverse by the Neumann iteration ``v <- u - (P Phi P - I) v``."""
    u = proj("Z0", resize(c, *dd.box))
    if direction == "forward":
        return proj("Z0", apply_Phi_raw(dd, u))
    if direction != "inverse":
        raise ValueError("direction must be 'forward' or 'inverse'")
    scale = max(float(np.max(np.abs(u), initial=0.0)), 1e-300)
    v = u.copy()
    prev = np.inf
    for _ in range(NEUMANN_MAXITER):
        v_new = u - (proj("Z0", apply_Phi_raw(dd, v)) - v)
        step = float(np.max(np.abs(v_new - v)))
        v = v_new
        if step <= NEUMANN_TOL * scale:
            return v
        if step > prev and step > 1e3 * NEUMANN_TOL * scale:
            if step > 2 * prev:
                raise NeumannDivergence(f"Phi inverse diverges (step {step:.3g})")
        prev = step
    raise NeumannDivergence(f"Phi inverse did not reach {NEUMANN_TOL} in {NEUMANN_MAXITER} steps")


# ---------------------------------------------------------------------------
# the full conjugation stack


@dataclass(frozen=True, eq=False)
class ConjugationStack:
    """Everything needed to apply ``L4 = Phi^-1 M^-1 Psi^-1 L Psi Phi`` on ``Z_0``."""

    lin: EvaluatedLinearization
    diffeo: TorusDiffeo
    tc: TransformedCoefficients
    dd: DescentData
    nf: NormalForm

    @property
    def box(self) -> tuple[int, int]:
        return self.lin.box

    @property
    def eps(self) -> float:
        return self.lin.eps

    def L_tilde(self, c):
        return proj("Z0", apply_L(self.lin, proj("Z0", resize(c, *self.box))))

    def Psi(self, c, direction="forward"):
        return apply_Psi_tilde(self.diffeo, c, direction)

    def M(self, c, direction="forward"):
        return apply_M_tilde(self.diffeo, proj("Z0", c), direction)

    def Phi(self, c, direction="forward"):
        return apply_Phi(self.dd, c, direction)

    def L3(self, c):
        return self.M(self.Psi(self.L_tilde(self.Psi(c)), "inverse"), "inverse")

    def L4(self, c):
        return self.Phi(self.L3(self.Phi(c)), "inverse")

    def D(self, c):
        return proj("Z0", apply_D(self.nf, resize(c, *self.box)))

    def R(self, c):
        c = proj("Z0", resize(c, *self.box))
        return self.L4(c) - self.D(c)


def build_stack(lin: EvaluatedLinearization) -> ConjugationStack:
    from .reduction_change_of_vars import build_diffeo

    diffeo, tc = build_diffeo(lin)
    dd = compute_descent_chain(tc)
    return ConjugationStack(lin, diffeo, tc, dd, normal_form(tc, dd))


def residual_R(stack: ConjugationStack, probe: np.ndarray) -> np.ndarray:
    """Action of ``R = L4 - D`` on a probe field."""
    return stack.R(probe)


def trace_record(dd: DescentData, nf: NormalForm) -> dict:
    def sup(c):
        return float(np.max(np.abs(to_grid(c))))

    rec = nf.as_dict()
    rec.update({"sup_eta1": sup(dd.eta1), "sup_eta2": sup(dd.eta2), "sup_eta3": sup(dd.eta3)})
    return rec
