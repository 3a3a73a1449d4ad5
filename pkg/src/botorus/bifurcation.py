"""Multimodal kernel solutions of the cubic bifurcation equation.

Kernel modes are ``q_j = exp(i(-j|j| t + j x))``.  For a mode set
``K = {k_1 < ... < k_m}`` the leading-order solution is

    v1 = sum_{j in +-K} a_j q_j,   a_{-j} = a_j,   a_{k_i}^2 = rho_i,

where ``rho = M^{-1} k`` and ``M`` has ones on the diagonal and twos elsewhere.
Amplitude arithmetic is exact (``fractions.Fraction``).
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Sequence

import numpy as np

from .spectral_core import SpectralField, box_of, kernel_mode, mask, proj, product, resize


class ModeSetError(ValueError):
    """Raised when a mode set fails the existence or non-degeneracy test."""


@dataclass(frozen=True)
class ModeSet:
    ks: tuple[int, ...]

    @property
    def m(self) -> int:
        return len(self.ks)

    @property
    def k_max(self) -> int:
        return self.ks[-1]


@dataclass(frozen=True)
class ModeSetVerdict:
    accepted: bool
    modes: ModeSet | None
    reason: str = ""


def validate_mode_set(ks: Sequence[int]) -> ModeSetVerdict:
    """Check existence (``k_1+...+k_{m-1} > k_m (m - 3/2)``) and
    non-degeneracy (``sum k / (m - 1/2)`` not a positive integer)."""
    ks = list(ks)
    if not ks or any(int(k) != k or k <= 0 for k in ks):
        return ModeSetVerdict(False, None, "modes must be positive integers")
    ks = sorted(int(k) for k in ks)
    if len(set(ks)) != len(ks):
        return ModeSetVerdict(False, None, "modes must be distinct")
    m = len(ks)
    if m == 1:
        return ModeSetVerdict(False, None, "existence: a single mode never satisfies the existence condition")
    lhs = sum(ks[:-1])
    if not Fraction(lhs) > Fraction(ks[-1]) * (Fraction(m) - Fraction(3, 2)):
        return ModeSetVerdict(
            False, None, f"existence: {lhs} > {ks[-1]}*({m} - 3/2) is false"
        )
    b = Fraction(sum(ks)) / (Fraction(m) - Fraction(1, 2))
    if b.denominator == 1 and b > 0:
        return ModeSetVerdict(False, None, f"non-degeneracy: sum/(m - 1/2) = {b} is a positive integer")
    return ModeSetVerdict(True, ModeSet(tuple(ks)))


def _require(modes: ModeSet | Sequence[int]) -> ModeSet:
    if isinstance(modes, ModeSet):
        return modes
    v = validate_mode_set(modes)
    if not v.accepted:
        raise ModeSetError(v.reason)
    return v.modes


def amplitude_matrix(m: int) -> list[list[Fraction]]:
    return [[Fraction(1) if i == j else Fraction(2) for j in range(m)] for i in range(m)]


def amplitudes(modes: ModeSet | Sequence[int]) -> list[Fraction]:
    """``rho = M^{-1} k`` in closed form: ``rho_i = sum(k)/(m - 1/2) - k_i``."""
    modes = _require(modes)
    b_half = Fraction(sum(modes.ks)) / (Fraction(modes.m) - Fraction(1, 2))
    return [b_half - k for k in modes.ks]


def mean_square(modes: ModeSet | Sequence[int]) -> Fraction:
    """``b = Pi_C(v1^2) = 2 sum rho_i = sum(k)/(m - 1/2)``."""
    return 2 * sum(amplitudes(modes), Fraction(0))


def nondegeneracy_margin(b: float) -> float:
    """``min_{j != 0} |b - |j|| / |j|``; the ratio tends to 1 so ``|j| <= ceil(2b)`` suffices."""
    top = max(1, math.ceil(2 * b))
    return min(min(abs(b - j) / j for j in range(1, top + 1)), 1.0)


@dataclass(frozen=True, eq=False)
class BifurcationData:
    modes: ModeSet
    rho: tuple[Fraction, ...]
    signs: tuple[int, ...]
    b: Fraction
    delta: float
    v1: SpectralField
    amps: dict[int, float] = field(default_factory=dict)

    @property
    def band(self) -> int:
        """Largest ``|l| + |j|`` among the kernel modes of ``v1``."""
        return max(k * k + k for k in self.modes.ks)

    def v1_on(self, nt: int, nx: int) -> np.ndarray:
        """Coefficients of ``v1`` on an arbitrary box."""
        c = np.zeros((2 * nt + 1, 2 * nx + 1), dtype=complex)
        for j, a in self.amps.items():
            l, jj = kernel_mode(j)
            c[l + nt, jj + nx] = a
        return c


def build_v1(modes: ModeSet | Sequence[int], signs: Sequence[int] | None = None) -> BifurcationData:
    modes = _require(modes)
    if signs is None:
        signs = (1,) * modes.m
    signs = tuple(int(s) for s in signs)
    if len(signs) != modes.m or any(s not in (1, -1) for s in signs):
        raise ValueError("signs must be a sequence of +-1 with one entry per mode")
    rho = amplitudes(modes)
    b = mean_square(modes)
    amps: dict[int, float] = {}
    for k, r, s in zip(modes.ks, rho, signs):
        amps[k] = amps[-k] = s * math.sqrt(float(r))
    kmax = modes.k_max
    nt, nx = kmax * kmax, kmax
    c = np.zeros((2 * nt + 1, 2 * nx + 1), dtype=complex)
    for j, a in amps.items():
        l, jj = kernel_mode(j)
        c[l + nt, jj + nx] = a
    return BifurcationData(
        modes=modes,
        rho=tuple(rho),
        signs=signs,
        b=b,
        delta=nondegeneracy_margin(float(b)),
        v1=SpectralField(c),
        amps=amps,
    )


def bifurcation_residual(data: BifurcationData) -> SpectralField:
    """``3 dv1/dt + Pi_V d/dx (v1^3)``, evaluated by exact products."""
    v = data.v1
    cube = product(product(v, v), v)
    nt, nx = cube.box
    c = proj("V", 1j * np.arange(-nx, nx + 1)[None, :] * cube.coeffs)
    lhs = 3j * np.arange(-v.box[0], v.box[0] + 1)[:, None] * v.coeffs
    return SpectralField(resize(lhs, nt, nx) + c)


# ---------------------------------------------------------------------------
# linearized bifurcation operator  A h = 3 h_t + Pi_V d/dx (3 v1^2 h)  on V0


def _kernel_positions(c: np.ndarray):
    nt, nx = box_of(c)
    js = [j for j in range(1, nx + 1) if j * j <= nt]
    return nt, nx, js


def apply_linearized_bif(data: BifurcationData, h: np.ndarray) -> np.ndarray:
    """Forward operator on ``V0`` coefficient arrays, by exact products."""
    nt, nx = box_of(h)
    hv = proj("V0", h)
    v1 = data.v1.resized(*data.v1.box)
    sq = product(v1, v1)
    prod = product(sq, SpectralField(hv))
    pt, px = prod.box
    j = np.arange(-px, px + 1)[None, :]
    out = proj("V", 3j * j * prod.coeffs)
    out = resize(out, nt, nx)
    l = np.arange(-nt, nt + 1)[:, None]
    return proj("V0", out + 3j * l * hv)


def solve_linearized_bif(data: BifurcationData, f: SpectralField) -> SpectralField:
    """Solve ``3 h_t + Pi_V d/dx(3 v1^2 h) = f`` for ``h`` in ``V0``.

    Off the mode set the operator is the scalar ``3 i j (b - |j|)``; on
    ``+-K`` it reduces to ``M z = y'`` with ``z_i = a_{k_i} h_{k_i}`` and
    ``y'_i = f_{k_i} / (6 i k_i a_{k_i})`` (``h`` even in ``j``).
    """
    c = f.coeffs
    nt, nx, js = _kernel_positions(c)
    b = float(data.b)
    out = np.zeros_like(c)
    ks = data.modes.ks
    for j in js:
        if j in ks:
            continue
        for s in (1, -1):
            l, jj = kernel_mode(s * j)
            out[l + nt, jj + nx] = c[l + nt, jj + nx] / (3j * jj * (b - j))
    # On +-K only the even combination is determined; the odd one spans the
    # kernel of A (the translation directions), so the even solution is taken.
    m = data.modes.m
    mat = np.array([[1.0 if i == k else 2.0 for k in range(m)] for i in range(m)])
    rhs = np.zeros(m, dtype=complex)
    inside = [k * k <= nt and k <= nx for k in ks]
    for i, k in enumerate(ks):
        if not inside[i]:
            continue
        lp, jp = kernel_mode(k)
        ln, jn = kernel_mode(-k)
        rhs[i] = (c[lp + nt, jp + nx] - c[ln + nt, jn + nx]) / (12j * k * data.amps[k])
    z = np.linalg.solve(mat, rhs)
    for i, k in enumerate(ks):
        if not inside[i]:
            continue
        lp, jp = kernel_mode(k)
        ln, jn = kernel_mode(-k)
        out[lp + nt, jp + nx] = out[ln + nt, jn + nx] = z[i] / data.amps[k]
    return SpectralField(out)


def kernel_support_box(jmax: int) -> tuple[int, int]:
    return jmax * jmax, jmax


def build_v2(data: BifurcationData, nonlin, eps: float) -> SpectralField:
    """Correction ``v2(eps)`` solving ``A v2 = -eps^-4 Pi_V N4(eps v1)``."""
    from .nonlinearity import exact_N4

    if nonlin.degree == 3:
        nt, nx = data.v1.box
        return SpectralField.zeros(nt, nx)
    n4 = exact_N4(nonlin, eps * data.v1.coeffs, check_domain=True)
    f = SpectralField(-proj("V0", n4) / eps**4)
    nt, nx = f.box
    jmax = int(math.isqrt(nt))
    jmax = min(jmax, nx)
    f = f.resized(jmax * jmax, jmax)
    return solve_linearized_bif(data, f)


def kernel_mask(nt: int, nx: int) -> np.ndarray:
    return mask("V0", nt, nx)
