"""Real trigonometric polynomials on the 2-torus.

A field is stored as a dense, centred array of Fourier coefficients
``c[l + nt, j + nx]`` for ``|l| <= nt`` and ``|j| <= nx``, so that

    u(t, x) = sum_{l, j} c[l, j] exp(i (l t + j x)).

Real fields carry Hermitian symmetry ``c[-k] = conj(c[k])``.  The same box
also defines a uniform grid of ``(2 nt + 1) x (2 nx + 1)`` nodes on which the
FFT is a bijection; pointwise work in the solver pipeline happens there.

Most helpers act on raw coefficient arrays whose last two axes are the box,
which lets the solver apply operators to stacks of fields at once.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from functools import lru_cache
from itertools import product as _iproduct
from typing import Iterable, Literal

import numpy as np
import scipy.fft as sfft

Parity = Literal["even", "odd", "neither"]

DEFAULT_PARITY_TOL = 1e-10
DEFAULT_MAX_MODES = 4_000_000

MULTIPLIERS = ("hilbert", "dx", "dt", "dx_inv", "dt_inv", "L", "P_eps", "P_eps_inv")
SUBSPACES = ("C", "T", "E", "V", "W", "V0", "Z0", "X", "Y", "box")


# ---------------------------------------------------------------------------
# index bookkeeping


@lru_cache(maxsize=64)
def wavenumbers(nt: int, nx: int) -> tuple[np.ndarray, np.ndarray]:
    """Integer index arrays ``(l, j)`` broadcastable to the box shape."""
    l = np.arange(-nt, nt + 1).reshape(-1, 1)
    j = np.arange(-nx, nx + 1).reshape(1, -1)
    l.setflags(write=False)
    j.setflags(write=False)
    return l, j


def box_of(c: np.ndarray) -> tuple[int, int]:
    mt, mx = c.shape[-2:]
    if mt % 2 == 0 or mx % 2 == 0:
        raise ValueError(f"coefficient array must have odd trailing shape, got {c.shape}")
    return (mt - 1) // 2, (mx - 1) // 2


def grid_nodes(nt: int, nx: int) -> tuple[np.ndarray, np.ndarray]:
    """Uniform nodes ``t_a = 2 pi a / (2nt+1)`` and ``x_b = 2 pi b / (2nx+1)``."""
    t = 2 * np.pi * np.arange(2 * nt + 1) / (2 * nt + 1)
    x = 2 * np.pi * np.arange(2 * nx + 1) / (2 * nx + 1)
    return t, x


# ---------------------------------------------------------------------------
# grid <-> coefficients


def to_grid(c: np.ndarray) -> np.ndarray:
    """Values on the box grid; complex array (take ``.real`` for real fields)."""
    size = c.shape[-2] * c.shape[-1]
    return sfft.ifft2(sfft.ifftshift(c, axes=(-2, -1)), axes=(-2, -1)) * size


def from_grid(values: np.ndarray) -> np.ndarray:
    size = values.shape[-2] * values.shape[-1]
    return sfft.fftshift(sfft.fft2(values, axes=(-2, -1)), axes=(-2, -1)) / size


def resize(c: np.ndarray, nt: int, nx: int) -> np.ndarray:
    """Zero-pad or truncate a coefficient array to the box ``(nt, nx)``."""
    ot, ox = box_of(c)
    out = np.zeros(c.shape[:-2] + (2 * nt + 1, 2 * nx + 1), dtype=complex)
    kt, kx = min(ot, nt), min(ox, nx)
    out[..., nt - kt : nt + kt + 1, nx - kx : nx + kx + 1] = c[
        ..., ot - kt : ot + kt + 1, ox - kx : ox + kx + 1
    ]
    return out


def reflect(c: np.ndarray) -> np.ndarray:
    """Coefficients of ``u(-t, -x)``."""
    return c[..., ::-1, ::-1]


def hermitian_defect(c: np.ndarray) -> float:
    return float(np.max(np.abs(c - np.conj(reflect(c))), initial=0.0))


def symmetrize(c: np.ndarray) -> np.ndarray:
    """Nearest Hermitian-symmetric array (projection onto real fields)."""
    return 0.5 * (c + np.conj(reflect(c)))


# ---------------------------------------------------------------------------
# Fourier multipliers


@lru_cache(maxsize=256)
def _symbol(kind: str, nt: int, nx: int, eps: float | None) -> np.ndarray:
    l, j = wavenumbers(nt, nx)
    lf = l.astype(float)
    jf = j.astype(float)
    shape = (2 * nt + 1, 2 * nx + 1)
    if kind == "hilbert":
        s = -1j * np.sign(jf) * np.ones_like(lf)
    elif kind == "dx":
        s = 1j * jf * np.ones_like(lf)
    elif kind == "dt":
        s = 1j * lf * np.ones_like(jf)
    elif kind == "dx_inv":
        with np.errstate(divide="ignore"):
            s = np.where(j != 0, 1.0 / (1j * np.where(j != 0, jf, 1.0)), 0.0) * np.ones_like(lf)
    elif kind == "dt_inv":
        with np.errstate(divide="ignore"):
            s = np.where(l != 0, 1.0 / (1j * np.where(l != 0, lf, 1.0)), 0.0) * np.ones_like(jf)
    elif kind == "L":
        s = 1j * (lf + jf * np.abs(jf))
    elif kind in ("P_eps", "P_eps_inv"):
        if eps is None or eps <= 0:
            raise ValueError("P_eps needs a positive eps")
        kern = (l + j * np.abs(j)) == 0
        w = eps**2 if kind == "P_eps" else eps**-2
        s = np.where(kern, w, 1.0)
    else:
        raise ValueError(f"unknown multiplier {kind!r}")
    s = np.broadcast_to(s, shape).astype(complex)
    s.setflags(write=False)
    return s


def symbol(kind: str, nt: int, nx: int, eps: float | None = None) -> np.ndarray:
    return _symbol(kind, nt, nx, None if eps is None else float(eps))


def multiply(kind: str, c: np.ndarray, eps: float | None = None) -> np.ndarray:
    nt, nx = box_of(c)
    return c * symbol(kind, nt, nx, eps)


def dx(c):
    return multiply("dx", c)


def dt(c):
    return multiply("dt", c)


def hilbert(c):
    return multiply("hilbert", c)


def dx_inv(c):
    return multiply("dx_inv", c)


def dt_inv(c):
    return multiply("dt_inv", c)


# ---------------------------------------------------------------------------
# index sets


@lru_cache(maxsize=256)
def _mask(tag: str, nt: int, nx: int, n: float | None) -> np.ndarray:
    l, j = wavenumbers(nt, nx)
    shape = (2 * nt + 1, 2 * nx + 1)
    if tag == "C":
        m = (l == 0) & (j == 0)
    elif tag == "T":
        m = (l != 0) & (j == 0)
    elif tag == "E":
        m = (j != 0) & (l == l)
    elif tag == "V":
        m = (l + j * np.abs(j)) == 0
    elif tag == "W":
        m = (l + j * np.abs(j)) != 0
    elif tag == "V0":
        m = ((l + j * np.abs(j)) == 0) & (j != 0)
    elif tag == "Z0":
        m = ~((l == 0) & (j == 0))
    elif tag == "TC":
        m = (j == 0) & (l == l)
    elif tag == "box":
        if n is None:
            raise ValueError("box projection needs N")
        m = (np.abs(l) + np.abs(j)) <= n + 1e-12
    else:
        raise ValueError(f"unknown index set {tag!r}")
    m = np.broadcast_to(m, shape).copy()
    m.setflags(write=False)
    return m


def mask(tag: str, nt: int, nx: int, n: float | None = None) -> np.ndarray:
    return _mask(tag, nt, nx, None if n is None else float(n))


def proj(tag: str, c: np.ndarray, n: float | None = None) -> np.ndarray:
    """Orthogonal projection of a coefficient array onto an index set or parity class."""
    if tag == "X":
        return 0.5 * (c + reflect(c))
    if tag == "Y":
        return 0.5 * (c - reflect(c))
    nt, nx = box_of(c)
    return np.where(mask(tag, nt, nx, n), c, 0.0)


def mean_x(c: np.ndarray) -> np.ndarray:
    """Coefficients of the x-average (the ``j = 0`` column) as a full box array."""
    return proj("TC", c)


def grid_product(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    """Pointwise product on the common box grid (aliased if the box is too small)."""
    return from_grid(to_grid(a) * to_grid(b))


def evaluate_rows(c: np.ndarray, T: np.ndarray, X: np.ndarray, chunk: int = 24) -> np.ndarray:
    """Evaluate trigonometric polynomials at scattered nodes sharing a time per row.

    ``T`` has shape ``(M,)`` and ``X`` shape ``(M, P)``: node ``(a, b)`` is
    ``(T[a], X[a, b])``.  ``c`` may carry leading batch axes; the result has
    shape ``batch + (M, P)`` and is exact up to rounding (direct summation,
    restricted to the rows and columns where ``c`` is nonzero).
    """
    nt, nx = box_of(c)
    batch = c.shape[:-2]
    flat = c.reshape((-1,) + c.shape[-2:])
    nz = np.abs(flat).max(axis=0) > 0
    rows = np.flatnonzero(nz.any(axis=1))
    cols = np.flatnonzero(nz.any(axis=0))
    M, P = X.shape
    out = np.zeros((flat.shape[0], M, P), dtype=complex)
    if rows.size == 0:
        return out.reshape(batch + (M, P))
    ls = (rows - nt).astype(float)
    js = (cols - nx).astype(float)
    sub = flat[:, rows][:, :, cols]
    et = np.exp(1j * np.outer(T, ls))
    w = np.einsum("al,blj->abj", et, sub)  # (M, batch, J)
    for a0 in range(0, M, chunk):
        a1 = min(M, a0 + chunk)
        ex = np.exp(1j * X[a0:a1, :, None] * js[None, None, :])  # (m, P, J)
        out[:, a0:a1, :] = np.matmul(w[a0:a1], ex.transpose(0, 2, 1)).transpose(1, 0, 2)
    return out.reshape(batch + (M, P))


# ---------------------------------------------------------------------------
# the public value type


@dataclass(frozen=True, eq=False)
class SpectralField:
    """Real function on the torus given by Hermitian Fourier coefficients."""

    coeffs: np.ndarray

    def __post_init__(self):
        c = np.asarray(self.coeffs, dtype=complex)
        if c.ndim != 2:
            raise ValueError("coeffs must be two-dimensional")
        box_of(c)
        c = c.copy()
        c.setflags(write=False)
        object.__setattr__(self, "coeffs", c)

    # construction -------------------------------------------------------
    @classmethod
    def zeros(cls, nt: int, nx: int) -> "SpectralField":
        return cls(np.zeros((2 * nt + 1, 2 * nx + 1), dtype=complex))

    @classmethod
    def from_modes(cls, modes: dict[tuple[int, int], complex], nt: int, nx: int) -> "SpectralField":
        """Build from a partial coefficient map; conjugate partners are filled in."""
        c = np.zeros((2 * nt + 1, 2 * nx + 1), dtype=complex)
        for (l, j), v in modes.items():
            if abs(l) > nt or abs(j) > nx:
                raise ValueError(f"mode {(l, j)} outside box {(nt, nx)}")
            c[l + nt, j + nx] = v
            if (l, j) != (0, 0) and (-l, -j) not in modes:
                c[-l + nt, -j + nx] = np.conj(v)
        return cls(c)

    @classmethod
    def from_grid_values(cls, values: np.ndarray) -> "SpectralField":
        return cls(symmetrize(from_grid(np.asarray(values, dtype=float))))

    @classmethod
    def from_function(cls, f, nt: int, nx: int) -> "SpectralField":
        t, x = grid_nodes(nt, nx)
        return cls.from_grid_values(f(t[:, None], x[None, :]))

    # views -------------------------------------------------------------
    @property
    def box(self) -> tuple[int, int]:
        return box_of(self.coeffs)

    def coeff(self, l: int, j: int) -> complex:
        nt, nx = self.box
        if abs(l) > nt or abs(j) > nx:
            return 0j
        return complex(self.coeffs[l + nt, j + nx])

    def grid_values(self) -> np.ndarray:
        return to_grid(self.coeffs).real

    def __call__(self, t, x) -> np.ndarray:
        """Direct evaluation at arbitrary points (broadcast)."""
        nt, nx = self.box
        t = np.asarray(t, dtype=float)
        x = np.asarray(x, dtype=float)
        l = np.arange(-nt, nt + 1)
        j = np.arange(-nx, nx + 1)
        et = np.exp(1j * t[..., None] * l)
        ex = np.exp(1j * x[..., None] * j)
        return np.einsum("...l,lj,...j->...", et, self.coeffs, ex).real

    def resized(self, nt: int, nx: int) -> "SpectralField":
        return SpectralField(resize(self.coeffs, nt, nx))

    # arithmetic --------------------------------------------------------
    def _binary(self, other, op):
        if isinstance(other, SpectralField):
            nt = max(self.box[0], other.box[0])
            nx = max(self.box[1], other.box[1])
            return SpectralField(op(resize(self.coeffs, nt, nx), resize(other.coeffs, nt, nx)))
        raise TypeError("expected SpectralField")

    def __add__(self, other):
        return self._binary(other, np.add)

    def __sub__(self, other):
        return self._binary(other, np.subtract)

    def __neg__(self):
        return SpectralField(-self.coeffs)

    def __mul__(self, a):
        if isinstance(a, SpectralField):
            return product(self, a)
        a = float(a)
        return SpectralField(self.coeffs * a)

    __rmul__ = __mul__

    def norm(self, s: float = 0.0) -> float:
        return sobolev_norm(self, s)

    # serialization -----------------------------------------------------
    def to_json_dict(self) -> dict:
        nt, nx = self.box
        records = []
        for l in range(0, nt + 1):
            for j in range(-nx, nx + 1):
                if l == 0 and j < 0:
                    continue
                v = self.coeffs[l + nt, j + nx]
                if v != 0:
                    records.append({"l": l, "j": j, "re": float(v.real), "im": float(v.imag)})
        return {"truncation": {"Nt": nt, "Nx": nx}, "coefficients": records}

    @classmethod
    def from_json_dict(cls, data: dict) -> "SpectralField":
        nt = int(data["truncation"]["Nt"])
        nx = int(data["truncation"]["Nx"])
        modes = {(r["l"], r["j"]): complex(r["re"], r["im"]) for r in data["coefficients"]}
        return cls.from_modes(modes, nt, nx)

    def to_json(self) -> str:
        return json.dumps(self.to_json_dict(), sort_keys=True)


# ---------------------------------------------------------------------------
# operations on fields


def apply_multiplier(kind: str, u: SpectralField, eps: float | None = None) -> SpectralField:
    """Coefficientwise Fourier multiplier.

    ``kind`` is one of ``hilbert, dx, dt, dx_inv, dt_inv, L, P_eps, P_eps_inv``.
    ``L`` is ``d/dt + H d^2/dx^2`` with symbol ``i (l + j|j|)``; ``P_eps`` scales
    kernel modes by ``eps^2`` and leaves the range alone.
    """
    if kind not in MULTIPLIERS:
        raise ValueError(f"unknown multiplier {kind!r}")
    return SpectralField(multiply(kind, u.coeffs, eps))


def project(tag: str, u: SpectralField, n: float | None = None) -> SpectralField:
    """Projection onto ``C, T, E, V, W, V0, Z0``, the parity classes ``X, Y``,
    or the diamond ``box`` ``|l| + |j| <= n``."""
    if tag not in SUBSPACES:
        raise ValueError(f"unknown subspace {tag!r}")
    return SpectralField(proj(tag, u.coeffs, n))


def product(u: SpectralField, v: SpectralField, max_modes: int = DEFAULT_MAX_MODES) -> SpectralField:
    """Exact product of two trigonometric polynomials on the enlarged box."""
    nt = u.box[0] + v.box[0]
    nx = u.box[1] + v.box[1]
    if (2 * nt + 1) * (2 * nx + 1) > max_modes:
        raise OverflowError(
            f"product box ({nt}, {nx}) exceeds the configured maximum of {max_modes} modes"
        )
    a = to_grid(resize(u.coeffs, nt, nx)).real
    b = to_grid(resize(v.coeffs, nt, nx)).real
    return SpectralField(symmetrize(from_grid(a * b)))


def sobolev_weights(nt: int, nx: int, s: float, metric: str = "euclidean") -> np.ndarray:
    l, j = wavenumbers(nt, nx)
    if metric == "euclidean":
        k = np.sqrt(l.astype(float) ** 2 + j.astype(float) ** 2)
    elif metric == "l1":
        k = (np.abs(l) + np.abs(j)).astype(float)
    else:
        raise ValueError(f"unknown metric {metric!r}")
    return np.maximum(1.0, k) ** (2 * s)


def coeff_norm(c: np.ndarray, s: float = 0.0, metric: str = "euclidean") -> float:
    nt, nx = box_of(c)
    return float(np.sqrt(np.sum(np.abs(c) ** 2 * sobolev_weights(nt, nx, s, metric))))


def sobolev_norm(u: SpectralField, s: float, metric: str = "euclidean") -> float:
    """Weighted l2 norm with weights ``<k>^(2s)``, ``<k> = max(1, |k|)``.

    ``metric`` picks ``|k|``: Euclidean by default, ``l1`` for ``|l| + |j|``.
    """
    if s < 0:
        raise ValueError("s must be nonnegative")
    return coeff_norm(u.coeffs, s, metric)


def parity_check(u: SpectralField, tol: float = DEFAULT_PARITY_TOL) -> Parity:
    """Classify as even (X), odd (Y) or neither by the off-parity coefficient mass."""
    odd_mass = coeff_norm(proj("Y", u.coeffs))
    even_mass = coeff_norm(proj("X", u.coeffs))
    if odd_mass <= tol:
        return "even"
    if even_mass <= tol:
        return "odd"
    return "neither"


# ---------------------------------------------------------------------------
# kernel products


def kernel_mode(j: int) -> tuple[int, int]:
    """Index ``(l, j)`` of ``q_j = exp(i(-j|j| t + j x))``."""
    return (-j * abs(j), j)


def kernel_product_in_V(js: Iterable[int]) -> bool:
    """True iff the product of the ``q_j`` has a nonzero kernel projection."""
    js = list(js)
    l = -sum(j * abs(j) for j in js)
    s = sum(js)
    return l + s * abs(s) == 0


def brute_force_kernel_products(max_j: int) -> list[tuple[int, ...]]:
    """All two- and three-term products of kernel modes with ``0 < |j_i| <= max_j``
    whose kernel projection is nonzero although no pair cancels (``j_a + j_b = 0``).

    Empty output means the pairing rule holds on the whole range.
    """
    if max_j < 2:
        raise ValueError("max_j must be at least 2")
    js = np.array([j for j in range(-max_j, max_j + 1) if j != 0])
    sq = js * np.abs(js)
    bad: list[tuple[int, ...]] = []

    j1, j2 = np.meshgrid(js, js, indexing="ij")
    s = j1 + j2
    hit = (j1 * np.abs(j1) + j2 * np.abs(j2)) == s * np.abs(s)
    for a, b in zip(j1[hit & (s != 0)], j2[hit & (s != 0)]):
        bad.append((int(a), int(b)))

    a, b, c = np.meshgrid(js, js, js, indexing="ij")
    s = a + b + c
    q = np.add.outer(np.add.outer(sq, sq), sq)
    hit = q == s * np.abs(s)
    paired = (a + b == 0) | (a + c == 0) | (b + c == 0)
    for x, y, z in zip(a[hit & ~paired], b[hit & ~paired], c[hit & ~paired]):
        bad.append((int(x), int(y), int(z)))
    return bad


def random_field(
    rng: np.random.Generator,
    nt: int,
    nx: int,
    parity: str | None = None,
    decay: float = 1.0,
    zero_mean: bool = False,
    scale: float = 1.0,
) -> SpectralField:
    """Random real field with coefficients damped like ``exp(-decay |k|_1)``."""
    l, j = wavenumbers(nt, nx)
    shape = (2 * nt + 1, 2 * nx + 1)
    c = rng.standard_normal(shape) + 1j * rng.standard_normal(shape)
    c = c * np.exp(-decay * (np.abs(l) + np.abs(j)))
    c = symmetrize(c)
    if parity == "even":
        c = proj("X", c)
    elif parity == "odd":
        c = proj("Y", c)
    if zero_mean:
        c = proj("Z0", c)
    return SpectralField(scale * c)


def all_modes(nt: int, nx: int):
    return _iproduct(range(-nt, nt + 1), range(-nx, nx + 1))
