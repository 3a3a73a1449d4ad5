"""Nonlinearities, the rescaled map F(u, eps) and its linearization.

The equation is ``omega u_t + H u_xx + d/dx(u^3) + N4(u) = 0`` with two
structural forms of the quartic perturbation:

* case I:  ``N4 = g1(x, u, Hu, u_x) + d/dx g2(x, u, Hu_x)``
* case II: ``N4 = g0(x, u, Hu, u_x, Hu_xx)``

All work is done with coefficient arrays on a box whose grid is large enough
for the polynomial degree, so products are exact for the shipped catalog.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable

import numpy as np

from .spectral_core import (
    SpectralField,
    box_of,
    dt,
    dx,
    from_grid,
    hilbert,
    mask,
    multiply,
    proj,
    resize,
    to_grid,
)

DOMAIN_RADIUS = 0.99


class DomainError(ValueError):
    """Raised when the nonlinearity is evaluated outside its small-amplitude ball."""


Partial = Callable[..., np.ndarray]


@dataclass(frozen=True)
class NonlinearitySpec:
    """A catalog nonlinearity with hand-coded first partial derivatives.

    ``g`` maps a name (``g0``, ``g1``, ``g2``) to ``(value, partials)`` where
    each callable takes ``(x, *y)`` on the grid and ``partials[i]`` is the
    derivative in the ``i``-th ``y`` argument.  ``degree`` is the top power in
    ``u`` and ``x_band`` the Fourier width of the explicit ``x`` dependence.
    """

    name: str
    case: str
    degree: int
    x_band: int
    g: dict

    @property
    def is_zero(self) -> bool:
        return self.case == "zero"


def _zero(*a):
    return 0.0


def _g1_I(x, y1, y2, y3):
    return np.sin(x) * y3**4 + y1 * y3**3 + np.cos(x) * y3**5


def _g2_I(x, y1, y2):
    return y2**4 / 4


def _g0_II(x, y1, y2, y3, y4):
    return np.sin(x) * y4**4 + y3**5


CATALOG: dict[str, NonlinearitySpec] = {
    "zero": NonlinearitySpec("zero", "zero", 3, 0, {}),
    # (H u_x)^3 H u_xx + sin(x) u_x^4 + u u_x^3 + cos(x) u_x^5
    "case1": NonlinearitySpec(
        "case1",
        "I",
        5,
        1,
        {
            "g1": (
                _g1_I,
                (
                    lambda x, y1, y2, y3: y3**3,
                    lambda x, y1, y2, y3: 0.0 * y2,
                    lambda x, y1, y2, y3: 4 * np.sin(x) * y3**3
                    + 3 * y1 * y3**2
                    + 5 * np.cos(x) * y3**4,
                ),
            ),
            "g2": (
                _g2_I,
                (
                    lambda x, y1, y2: 0.0 * y1,
                    lambda x, y1, y2: y2**3,
                ),
            ),
        },
    ),
    # sin(x) (H u_xx)^4 + u_x^5
    "case2": NonlinearitySpec(
        "case2",
        "II",
        5,
        1,
        {
            "g0": (
                _g0_II,
                (
                    lambda x, y1, y2, y3, y4: 0.0 * y1,
                    lambda x, y1, y2, y3, y4: 0.0 * y2,
                    lambda x, y1, y2, y3, y4: 5 * y3**4,
                    lambda x, y1, y2, y3, y4: 4 * np.sin(x) * y4**3,
                ),
            ),
        },
    ),
}
CATALOG["I"] = CATALOG["case1"]
CATALOG["II"] = CATALOG["case2"]


def get_spec(name: str) -> NonlinearitySpec:
    try:
        return CATALOG[name]
    except KeyError:
        raise ValueError(f"unknown nonlinearity {name!r}; choose from {sorted(CATALOG)}") from None


# ---------------------------------------------------------------------------
# boxes and grids


def working_box(spec: NonlinearitySpec, nt: int, nx: int, extra: int = 0) -> tuple[int, int]:
    """Smallest box on which the nonlinearity of a field in ``(nt, nx)`` is exact."""
    d = spec.degree
    return d * nt + extra, d * nx + spec.x_band + extra


def _x_nodes(c: np.ndarray) -> np.ndarray:
    nt, nx = box_of(c)
    return (2 * np.pi * np.arange(2 * nx + 1) / (2 * nx + 1))[None, :] * np.ones((2 * nt + 1, 1))


def _real_grid(c: np.ndarray) -> np.ndarray:
    return to_grid(c).real


def argument_grids(c: np.ndarray) -> dict[str, np.ndarray]:
    """Grid values of ``U, HU, U_x, HU_x, HU_xx`` for coefficients ``c``."""
    hc = hilbert(c)
    return {
        "U": _real_grid(c),
        "HU": _real_grid(hc),
        "Ux": _real_grid(dx(c)),
        "HUx": _real_grid(dx(hc)),
        "HUxx": _real_grid(dx(dx(hc))),
    }


def domain_sup(c: np.ndarray) -> float:
    return max(float(np.max(np.abs(v))) for v in argument_grids(c).values())


def check_domain(spec: NonlinearitySpec, c: np.ndarray) -> None:
    if spec.is_zero:
        return
    s = domain_sup(c)
    if not s < DOMAIN_RADIUS:
        raise DomainError(
            f"nonlinearity arguments reach {s:.3g}, outside the admissible ball of radius {DOMAIN_RADIUS}"
        )


def _n4_on_box(spec: NonlinearitySpec, c: np.ndarray) -> np.ndarray:
    if spec.is_zero:
        return np.zeros_like(c)
    x = _x_nodes(c)
    a = argument_grids(c)
    if spec.case == "I":
        g1 = spec.g["g1"][0](x, a["U"], a["HU"], a["Ux"])
        g2 = spec.g["g2"][0](x, a["U"], a["HUx"])
        return from_grid(g1) + dx(from_grid(g2))
    g0 = spec.g["g0"][0](x, a["U"], a["HU"], a["Ux"], a["HUxx"])
    return from_grid(g0)


def exact_N4(spec: NonlinearitySpec, c: np.ndarray, check_domain: bool = True) -> np.ndarray:
    """``N4`` of the field with coefficients ``c`` on its exact (enlarged) box."""
    nt, nx = box_of(c)
    bt, bx = working_box(spec, nt, nx)
    cb = resize(c, bt, bx)
    if check_domain:
        globals()["check_domain"](spec, cb)
    return _n4_on_box(spec, cb)


def eval_N(spec: NonlinearitySpec, u: SpectralField, check: bool = True) -> SpectralField:
    """``N(u) = d/dx(u^3) + N4(u)`` on the exact box (no aliasing)."""
    nt, nx = u.box
    bt, bx = working_box(spec, nt, nx)
    c = resize(u.coeffs, bt, bx)
    if check:
        check_domain(spec, c)
    g = _real_grid(c)
    out = dx(from_grid(g**3)) + _n4_on_box(spec, c)
    return SpectralField(0.5 * (out + np.conj(out[::-1, ::-1])))


# ---------------------------------------------------------------------------
# the rescaled map


def omega_of(eps: float) -> float:
    return 1.0 + 3.0 * eps**2


@dataclass(frozen=True)
class Problem:
    """Bundle of what F(u, eps) depends on, with a fixed working box."""

    spec: NonlinearitySpec
    v1: np.ndarray  # kernel solution coefficients on the working box
    eps: float
    box: tuple[int, int]

    @property
    def omega(self) -> float:
        return omega_of(self.eps)


def make_problem(spec: NonlinearitySpec, data, eps: float, box: tuple[int, int]) -> Problem:
    return Problem(spec, data.v1_on(*box), float(eps), (int(box[0]), int(box[1])))


def exact_box(spec: NonlinearitySpec, data, nt: int, nx: int) -> tuple[int, int]:
    """Box on which F(u) is exact for ``u`` supported in ``(nt, nx)``."""
    vt, vx = data.v1.box
    return working_box(spec, max(nt, vt), max(nx, vx))


def eval_F(
    spec: NonlinearitySpec,
    data,
    u: SpectralField | np.ndarray,
    eps: float,
    box: tuple[int, int] | None = None,
    check: bool = True,
) -> np.ndarray:
    """Rescaled map on ``box`` (defaults to the exact box), as a coefficient array.

    The kernel block is evaluated from the expanded form in which the
    ``eps^-1`` terms cancel through the bifurcation equation:

        Pi_V{3 u_t + d/dx(3 v1^2 u + 3 eps v1 u^2 + eps^2 u^3)} + eps^-4 Pi_V N4(U)
        Pi_W{L u + 3 eps^2 u_t + eps d/dx (v1 + eps u)^3 + eps^-2 N4(U)}

    with ``U = eps v1 + eps^2 u``.
    """
    c = u.coeffs if isinstance(u, SpectralField) else np.asarray(u)
    if box is None:
        box = exact_box(spec, data, *box_of(c))
    prob = make_problem(spec, data, eps, box)
    return eval_F_on(prob, resize(c, *box), check=check)


def eval_F_on(prob: Problem, c: np.ndarray, check: bool = True) -> np.ndarray:
    eps = prob.eps
    v1 = prob.v1
    vg = _real_grid(v1)
    ug = to_grid(c).real
    kern = (3 * vg**2 * ug + 3 * eps * vg * ug**2 + eps**2 * ug**3)
    rng = (vg + eps * ug) ** 3
    big = eps * v1 + eps**2 * c
    if check:
        check_domain(prob.spec, big)
    n4 = _n4_on_box(prob.spec, big)
    vpart = 3 * dt(c) + dx(from_grid(kern)) + n4 / eps**4
    wpart = multiply("L", c) + 3 * eps**2 * dt(c) + eps * dx(from_grid(rng)) + n4 / eps**2
    out = np.where(_vmask(c), vpart, wpart)
    return 0.5 * (out + np.conj(out[..., ::-1, ::-1]))


def _vmask(c):
    return mask("V", *box_of(c))


def eval_raw(spec: NonlinearitySpec, U: np.ndarray, omega: float, check: bool = True) -> np.ndarray:
    """``omega U_t + H U_xx + d/dx(U^3) + N4(U)`` on the box of ``U`` (caller sizes it)."""
    if check:
        check_domain(spec, U)
    g = _real_grid(U)
    out = omega * dt(U) + dx(dx(hilbert(U))) + dx(from_grid(g**3)) + _n4_on_box(spec, U)
    return 0.5 * (out + np.conj(out[..., ::-1, ::-1]))


def eval_F_two_route(spec, data, u: SpectralField, eps: float, box=None, check=True) -> np.ndarray:
    """``eps^-2 P_eps^-1`` applied to the raw equation at ``eps v1 + eps^2 u``."""
    if box is None:
        box = exact_box(spec, data, *u.box)
    U = eps * data.v1_on(*box) + eps**2 * resize(u.coeffs, *box)
    raw = eval_raw(spec, U, omega_of(eps), check=check)
    return multiply("P_eps_inv", raw, eps) / eps**2


# ---------------------------------------------------------------------------
# linearization


@dataclass(frozen=True, eq=False)
class EvaluatedLinearization:
    """Coefficients of ``omega d_t + (1+a1) H d_xx + a2 H d_x + a3 d_x + a4 H + a5``."""

    a1: np.ndarray
    a2: np.ndarray
    a3: np.ndarray
    a4: np.ndarray
    a5: np.ndarray
    omega: float
    eps: float
    case: str

    @property
    def box(self) -> tuple[int, int]:
        return box_of(self.a1)

    def grids(self) -> dict[str, np.ndarray]:
        return {k: _real_grid(getattr(self, k)) for k in ("a1", "a2", "a3", "a4", "a5")}


def coefficients_on(spec: NonlinearitySpec, U: np.ndarray) -> dict[str, np.ndarray]:
    """``a1..a5`` for the amplitude ``U`` on the box of ``U``."""
    ug = _real_grid(U)
    sq = from_grid(3 * ug**2)
    zero = np.zeros_like(U)
    if spec.is_zero:
        return {"a1": zero, "a2": zero, "a3": sq, "a4": zero, "a5": dx(sq)}
    x = _x_nodes(U)
    a = argument_grids(U)
    if spec.case == "I":
        _, (g1_1, g1_2, g1_3) = spec.g["g1"]
        _, (g2_1, g2_2) = spec.g["g2"]
        args1 = (x, a["U"], a["HU"], a["Ux"])
        args2 = (x, a["U"], a["HUx"])
        a1 = from_grid(g2_2(*args2) + 0 * x)
        g21 = from_grid(g2_1(*args2) + 0 * x)
        return {
            "a1": a1,
            "a2": dx(a1),
            "a3": sq + from_grid(g1_3(*args1) + 0 * x) + g21,
            "a4": from_grid(g1_2(*args1) + 0 * x),
            "a5": dx(sq) + from_grid(g1_1(*args1) + 0 * x) + dx(g21),
        }
    _, (d1, d2, d3, d4) = spec.g["g0"]
    args = (x, a["U"], a["HU"], a["Ux"], a["HUxx"])
    return {
        "a1": from_grid(d4(*args) + 0 * x),
        "a2": zero,
        "a3": sq + from_grid(d3(*args) + 0 * x),
        "a4": from_grid(d2(*args) + 0 * x),
        "a5": dx(sq) + from_grid(d1(*args) + 0 * x),
    }


def _real_part(c: np.ndarray) -> np.ndarray:
    return 0.5 * (c + np.conj(c[..., ::-1, ::-1]))


def linearize(spec, data, u, eps: float, box=None, check: bool = True) -> EvaluatedLinearization:
    """Coefficients of the linearized operator at ``U = eps v1 + eps^2 u``."""
    c = u.coeffs if isinstance(u, SpectralField) else np.asarray(u)
    if box is None:
        box = exact_box(spec, data, *box_of(c))
    U = eps * data.v1_on(*box) + eps**2 * resize(c, *box)
    if check:
        check_domain(spec, U)
    co = {k: _real_part(v) for k, v in coefficients_on(spec, U).items()}
    return EvaluatedLinearization(omega=omega_of(eps), eps=float(eps), case=spec.case, **co)


def apply_L(lin: EvaluatedLinearization, h: np.ndarray) -> np.ndarray:
    """``omega h_t + (1+a1) H h_xx + a2 H h_x + a3 h_x + a4 H h + a5 h`` on the box of ``lin``.

    ``h`` may carry leading batch axes.
    """
    h = resize(h, *lin.box)
    g = lin.grids()
    hh = hilbert(h)
    hxx = to_grid(dx(dx(hh))).real
    pointwise = (
        g["a1"] * hxx
        + g["a2"] * to_grid(dx(hh)).real
        + g["a3"] * to_grid(dx(h)).real
        + g["a4"] * to_grid(hh).real
        + g["a5"] * to_grid(h).real
    )
    return lin.omega * dt(h) + dx(dx(hh)) + from_grid(pointwise)


def apply_dF(lin: EvaluatedLinearization, h: np.ndarray) -> np.ndarray:
    """``F'(u) h = P_eps^-1 L(u) h``."""
    return multiply("P_eps_inv", apply_L(lin, h), lin.eps)


def eval_Q(spec, data, u, h, eps: float, box=None, check: bool = True) -> np.ndarray:
    """Taylor remainder ``F(u + h) - F(u) - F'(u) h`` on a common box."""
    cu = u.coeffs if isinstance(u, SpectralField) else np.asarray(u)
    ch = h.coeffs if isinstance(h, SpectralField) else np.asarray(h)
    if box is None:
        nt = max(box_of(cu)[0], box_of(ch)[0])
        nx = max(box_of(cu)[1], box_of(ch)[1])
        box = exact_box(spec, data, nt, nx)
    cu = resize(cu, *box)
    ch = resize(ch, *box)
    prob = make_problem(spec, data, eps, box)
    lin = linearize(spec, data, cu, eps, box=box, check=check)
    return eval_F_on(prob, cu + ch, check) - eval_F_on(prob, cu, check) - apply_dF(lin, ch)


def project_V(c):
    return proj("V", c)
