"""Torus diffeomorphism that straightens the top-order coefficients.

With ``psi(t, x) = (t + alpha(t), x + beta(t, x))`` and ``(Psi u)(t, x) =
u(psi(t, x))`` the linearized operator becomes, after dividing by
``1 + Psi^-1 alpha'``,

    omega d_tau + mu2 H d_yy + a6 H d_y + a7 d_y + a8 H + a9 + (remainder).

``alpha`` and ``beta`` are chosen so that the coefficients of ``d_tau`` and
``H d_yy`` are proportional, ``a6`` has zero ``y``-mean and ``a7 - mu1`` lies
in the space of zero-``y``-mean functions.

Everything lives on the grid of one working box.  Composition with ``psi`` or
its inverse is evaluated by direct summation at the displaced nodes.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .nonlinearity import EvaluatedLinearization
from .spectral_core import (
    box_of,
    dt,
    dt_inv,
    dx,
    dx_inv,
    evaluate_rows,
    from_grid,
    grid_nodes,
    proj,
    resize,
    to_grid,
)

FIXED_POINT_TOL = 1e-12
FIXED_POINT_MAXITER = 200
CONTRACTION_LIMIT = 0.5


class ContractionError(RuntimeError):
    """The displacement is too large for the inverse map to be a contraction."""


def _real(c: np.ndarray) -> np.ndarray:
    return 0.5 * (c + np.conj(c[..., ::-1, ::-1]))


def _fit(values: np.ndarray) -> np.ndarray:
    return _real(from_grid(values))


def _rows_to_field(r: np.ndarray, nx: int) -> np.ndarray:
    """Coefficients of the ``x``-independent function with grid values ``r(t)``."""
    return _fit(np.repeat(r[:, None], 2 * nx + 1, axis=1))


def _eval_time(c: np.ndarray, t: np.ndarray) -> np.ndarray:
    """Evaluate an ``x``-independent field at arbitrary times."""
    nt, nx = box_of(c)
    col = c[:, nx]
    l = np.arange(-nt, nt + 1)
    return (np.exp(1j * np.outer(t, l)) @ col).real


def lipschitz_bound(alpha: np.ndarray, beta: np.ndarray) -> float:
    """``max(sup |alpha'|, sup |beta_x|)``: the contraction constants of the inverse maps."""
    return float(
        max(np.max(np.abs(to_grid(dt(alpha)).real)), np.max(np.abs(to_grid(dx(beta)).real)))
    )


@dataclass(frozen=True, eq=False)
class TorusDiffeo:
    """``psi(t, x) = (t + alpha(t), x + beta(t, x))`` with its numerical inverse.

    ``alpha`` and ``beta`` are coefficient arrays on ``box``; ``alpha_tilde``
    and ``beta_tilde`` are the spectral fits of the inverse displacement, so
    ``psi^-1(tau, y) = (tau + alpha_tilde(tau), y + beta_tilde(tau, y))``.
    """

    alpha: np.ndarray
    beta: np.ndarray
    alpha_tilde: np.ndarray
    beta_tilde: np.ndarray
    fwd_T: np.ndarray
    fwd_X: np.ndarray
    inv_T: np.ndarray
    inv_X: np.ndarray
    contraction_bound: float
    fixed_point_residual: float

    @property
    def box(self) -> tuple[int, int]:
        return box_of(self.beta)

    def stretch(self) -> np.ndarray:
        """Grid values of ``1 + (Psi^-1 alpha')(tau)`` as a function of ``tau``."""
        return 1.0 + _eval_time(dt(self.alpha), self.inv_T)


def invert_diffeo(alpha: np.ndarray, beta: np.ndarray) -> TorusDiffeo:
    """Invert ``psi`` node by node by fixed-point iteration.

    ``t + alpha(t) = tau`` is solved first, then ``x + beta(t, x) = y`` at
    that ``t``.  Both maps are contractions when ``|alpha'|, |beta_x| < 1/2``.
    """
    nt, nx = box_of(beta)
    alpha = resize(alpha, nt, nx)
    bound = lipschitz_bound(alpha, beta)
    if not bound < CONTRACTION_LIMIT:
        raise ContractionError(
            f"max(sup|alpha'|, sup|beta_x|) = {bound:.3g} is not below {CONTRACTION_LIMIT}; use a smaller eps"
        )
    tau, y = grid_nodes(nt, nx)
    alpha_grid = _eval_time(alpha, tau)
    beta_grid = to_grid(beta).real
    fwd_T = tau + alpha_grid
    fwd_X = y[None, :] + beta_grid

    t = tau.copy()
    for _ in range(FIXED_POINT_MAXITER):
        t_new = tau - _eval_time(alpha, t)
        step = np.max(np.abs(t_new - t))
        t = t_new
        if step <= FIXED_POINT_TOL:
            break
    else:
        raise ContractionError("time inverse did not converge")
    x = np.repeat(y[None, :], tau.size, axis=0)
    for _ in range(FIXED_POINT_MAXITER):
        x_new = y[None, :] - evaluate_rows(beta, t, x).real
        step = np.max(np.abs(x_new - x))
        x = x_new
        if step <= FIXED_POINT_TOL:
            break
    else:
        raise ContractionError("space inverse did not converge")
    res_t = np.max(np.abs(t + _eval_time(alpha, t) - tau))
    res_x = np.max(np.abs(x + evaluate_rows(beta, t, x).real - y[None, :]))
    return TorusDiffeo(
        alpha=alpha,
        beta=beta,
        alpha_tilde=_rows_to_field(t - tau, nx),
        beta_tilde=_fit(x - y[None, :]),
        fwd_T=fwd_T,
        fwd_X=fwd_X,
        inv_T=t,
        inv_X=x,
        contraction_bound=bound,
        fixed_point_residual=float(max(res_t, res_x)),
    )


def identity_diffeo(nt: int, nx: int) -> TorusDiffeo:
    z = np.zeros((2 * nt + 1, 2 * nx + 1), dtype=complex)
    return invert_diffeo(z, z)


def compose_grid(d: TorusDiffeo, c: np.ndarray, direction: str = "forward") -> np.ndarray:
    """Grid values of ``Psi u`` (forward) or ``Psi^-1 u`` (inverse); ``c`` may be batched."""
    c = resize(c, *d.box)
    if direction == "forward":
        return evaluate_rows(c, d.fwd_T, d.fwd_X).real
    if direction == "inverse":
        return evaluate_rows(c, d.inv_T, d.inv_X).real
    raise ValueError("direction must be 'forward' or 'inverse'")


def apply_Psi(d: TorusDiffeo, c: np.ndarray, direction: str = "forward") -> np.ndarray:
    """Composition with the diffeomorphism, projected back to the working box."""
    return _fit(compose_grid(d, c, direction))


def apply_Psi_tilde(d: TorusDiffeo, c: np.ndarray, direction: str = "forward") -> np.ndarray:
    """``P Psi P`` with ``P`` removing the space-time mean."""
    return proj("Z0", apply_Psi(d, proj("Z0", resize(c, *d.box)), direction))


class MeanError(ValueError):
    """Input to the mean-free multiplication operator has a nonzero mean."""


def apply_M_tilde(d: TorusDiffeo, c: np.ndarray, direction: str = "forward", tol: float = 1e-9) -> np.ndarray:
    """``P (1 + Psi^-1 alpha') P`` and its closed-form inverse

        M^-1 h = m h - (m / mean(m)) mean(m h),   m = 1 / (1 + Psi^-1 alpha').
    """
    c = resize(c, *d.box)
    nt, nx = d.box
    mean = np.abs(c[..., nt, nx])
    if np.max(mean, initial=0.0) > tol * max(1.0, float(np.max(np.abs(c), initial=0.0))):
        raise MeanError("input must have zero space-time mean")
    c = proj("Z0", c)
    m1 = d.stretch()[:, None]
    h = to_grid(c).real
    if direction == "forward":
        return proj("Z0", _fit(m1 * h))
    if direction != "inverse":
        raise ValueError("direction must be 'forward' or 'inverse'")
    m = 1.0 / m1
    mh = m * h
    mean_mh = mh.mean(axis=(-2, -1), keepdims=True)
    out = mh - (m / m.mean()) * mean_mh
    return _fit(out)


@dataclass(frozen=True, eq=False)
class TransformedCoefficients:
    mu2: float
    mu1: float
    a6: np.ndarray
    a7: np.ndarray
    a8: np.ndarray
    a9: np.ndarray
    omega: float
    # diagnostics in the original variables
    leading_coeff_residual: float
    rho: np.ndarray
    sigma: np.ndarray

    @property
    def box(self) -> tuple[int, int]:
        return box_of(self.a6)


def build_diffeo(lin: EvaluatedLinearization, omega: float | None = None):
    """Construct ``(alpha, beta)``, the constants ``mu2, mu1`` and ``a6..a9``."""
    if omega is None:
        omega = lin.omega
    nt, nx = lin.box
    g = lin.grids()
    if not np.max(np.abs(g["a1"])) < 1:
        raise ContractionError("sup |a1| must be below 1")
    p = (1.0 + g["a1"]) ** -0.5
    P = p.mean(axis=1)
    rho = P**-2
    mu2 = float(rho.mean())
    alpha = dt_inv(proj("T", _rows_to_field(rho, nx))) / mu2
    alpha = _real(alpha)

    pc = _fit(p - P[:, None])
    betaE = _fit(to_grid(dx_inv(pc)).real / P[:, None])
    betaE = proj("E", betaE)
    bEx = to_grid(dx(betaE)).real
    bEt = to_grid(dt(betaE)).real
    sigma = (omega * bEt * (1 + bEx) + g["a3"] * (1 + bEx) ** 2).mean(axis=1)
    mu1 = float(sigma.mean())
    gamma = (mu1 * alpha - dt_inv(proj("T", _rows_to_field(sigma, nx)))) / omega
    beta = _real(betaE + proj("T", gamma))

    diffeo = invert_diffeo(alpha, beta)

    ad = 1.0 + to_grid(dt(alpha)).real
    bx = to_grid(dx(beta)).real
    bxx = to_grid(dx(dx(beta))).real
    bt = to_grid(dt(beta)).real
    A6 = ((1 + g["a1"]) * bxx + g["a2"] * (1 + bx)) / ad
    A7 = (omega * bt + g["a3"] * (1 + bx)) / ad
    A8 = g["a4"] / ad
    A9 = g["a5"] / ad
    stack = _fit(np.stack([A6, A7, A8, A9]))
    a6, a7, a8, a9 = apply_Psi(diffeo, stack, "inverse")
    resid = float(np.max(np.abs((1 + g["a1"]) * (1 + bx) ** 2 - mu2 * ad)))
    tc = TransformedCoefficients(
        mu2=mu2,
        mu1=mu1,
        a6=a6,
        a7=a7,
        a8=a8,
        a9=a9,
        omega=float(omega),
        leading_coeff_residual=resid,
        rho=rho,
        sigma=sigma,
    )
    return diffeo, tc


def a6_mean_defect(tc: TransformedCoefficients) -> float:
    """``max_tau |mean_y a6(tau, .)|`` on the grid."""
    return float(np.max(np.abs(to_grid(tc.a6).real.mean(axis=1))))


def roundtrip_error(d: TorusDiffeo) -> float:
    """Grid residual of ``alpha(t) + alpha_tilde(t + alpha(t)) = 0`` and of
    ``psi(psi^-1(tau, y)) = (tau, y)`` through the fitted inverse."""
    nt, nx = d.box
    tau, y = grid_nodes(nt, nx)
    a = _eval_time(d.alpha, tau)
    e1 = np.max(np.abs(a + _eval_time(d.alpha_tilde, tau + a)))
    # psi^-1 via the fitted displacement, then psi
    at = _eval_time(d.alpha_tilde, tau)
    t_star = tau + at
    x_star = y[None, :] + to_grid(d.beta_tilde).real
    back_t = t_star + _eval_time(d.alpha, t_star)
    back_x = x_star + evaluate_rows(d.beta, t_star, x_star).real
    e2 = np.max(np.abs(back_t - tau))
    e3 = np.max(np.abs(back_x - y[None, :]))
    return float(max(e1, e2, e3))


def trace_record(d: TorusDiffeo, tc: TransformedCoefficients) -> dict:
    def sup(c):
        return float(np.max(np.abs(to_grid(c).real)))

    return {
        "mu2": tc.mu2,
        "mu1": tc.mu1,
        "sup_alpha": sup(d.alpha),
        "sup_beta": sup(d.beta),
        "sup_a6": sup(tc.a6),
        "sup_a7": sup(tc.a7),
        "sup_a8": sup(tc.a8),
        "sup_a9": sup(tc.a9),
    }
