"""Inversion of the truncated conjugated operator.

``Pi_N L4 Pi_N`` is inverted on the diamond ``|l| + |j| <= N`` by splitting
into the kernel part ``V0N`` (a handful of modes, solved densely) and the
range part ``W_N`` (diagonal ``D`` plus the remainder ``R``, solved by a
Neumann series).  A dense direct solve over the whole even basis serves as
an independent oracle.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .descent import ConjugationStack, NormalForm, eigenvalue_grid, normal_form_eigenvalue
from .spectral_core import mask, proj, resize

NEUMANN_TOL = 1e-12
NEUMANN_MAXITER = 100
DIOPHANTINE_WINDOW_C = 10.0


class InversionError(RuntimeError):
    pass


class SingularBlock(InversionError):
    pass


class NeumannDivergence(InversionError):
    pass


# ---------------------------------------------------------------------------
# bases


def half_space_modes(N: int) -> list[tuple[int, int]]:
    """Nonzero modes of the diamond ``|l| + |j| <= N`` with ``l > 0`` or ``l = 0, j > 0``."""
    out = []
    for l in range(0, N + 1):
        for j in range(-(N - l), N - l + 1):
            if l == 0 and j <= 0:
                continue
            out.append((l, j))
    return out


def kernel_modes(N: int) -> list[tuple[int, int]]:
    """Kernel modes ``(-j^2, j)``, ``j >= 1``, inside the diamond."""
    out = []
    j = 1
    while j * j + j <= N:
        out.append((-j * j, j))
        j += 1
    return out


def cos_basis(modes, box) -> np.ndarray:
    """Stack of even fields with unit coefficients at ``k`` and ``-k``."""
    nt, nx = box
    out = np.zeros((len(modes), 2 * nt + 1, 2 * nx + 1), dtype=complex)
    for i, (l, j) in enumerate(modes):
        out[i, l + nt, j + nx] = 1.0
        out[i, -l + nt, -j + nx] = 1.0
    return out


def _idx(modes, box):
    nt, nx = box
    li = np.array([l + nt for l, _ in modes], dtype=int)
    ji = np.array([j + nx for _, j in modes], dtype=int)
    return li, ji


def y_coords(c: np.ndarray, modes, box) -> np.ndarray:
    """Imaginary parts at the given modes (coordinates of an odd field)."""
    li, ji = _idx(modes, box)
    return c[..., li, ji].imag


def x_from_coords(x: np.ndarray, modes, box) -> np.ndarray:
    nt, nx = box
    out = np.zeros((2 * nt + 1, 2 * nx + 1), dtype=complex)
    for v, (l, j) in zip(x, modes):
        out[l + nt, j + nx] = v
        out[-l + nt, -j + nx] = v
    return out


# ---------------------------------------------------------------------------
# Diophantine condition


@dataclass
class DiophantineReport:
    passed: bool
    worst: tuple[int, int, float, float] | None
    violations: list[tuple[int, int, float, float]] = field(default_factory=list)

    @property
    def margin(self) -> float:
        """``min |lambda| / threshold - 1`` over the checked set."""
        if self.worst is None:
            return float("inf")
        return self.worst[2] / self.worst[3] - 1.0

    def to_json_dict(self) -> dict:
        return {
            "pass": self.passed,
            "worst": list(self.worst) if self.worst else None,
            "violations": [list(v) for v in self.violations],
        }


def dioph_threshold(j) -> np.ndarray:
    jb = np.maximum(1.0, np.abs(np.asarray(j, dtype=float)))
    return 1.0 / (2.0 * jb**3)


def diophantine_check(
    nf: NormalForm, N: int, eps: float, window_c: float = DIOPHANTINE_WINDOW_C, j_max: int | None = None
) -> DiophantineReport:
    """Check ``|lambda_{l,j}| > 1/(2<j>^3)`` for ``l + j|j| != 0``, ``|j| <= N``.

    Only ``|l + j|j|| <= 1/2 + C eps^2 j^2`` is enumerated; outside that window
    the bound holds automatically.
    """
    j_max = N if j_max is None else j_max
    worst = None
    worst_ratio = np.inf
    violations = []
    for j in range(-j_max, j_max + 1):
        w = 0.5 + window_c * eps**2 * j * j
        centre = -j * abs(j)
        ls = np.arange(int(np.floor(centre - w)), int(np.ceil(centre + w)) + 1)
        ls = ls[(np.abs(ls + j * abs(j)) <= w) & (ls + j * abs(j) != 0)]
        if ls.size == 0:
            continue
        lam = np.abs(normal_form_eigenvalue(nf, ls, np.full(ls.shape, j)))
        thr = float(dioph_threshold(j))
        ratio = lam / thr
        k = int(np.argmin(ratio))
        if ratio[k] < worst_ratio:
            worst_ratio = ratio[k]
            worst = (int(ls[k]), int(j), float(lam[k]), thr)
        for li in np.flatnonzero(lam <= thr):
            violations.append((int(ls[li]), int(j), float(lam[li]), thr))
    return DiophantineReport(passed=not violations, worst=worst, violations=violations)


# ---------------------------------------------------------------------------
# Lyapunov-Schmidt data


@dataclass(frozen=True, eq=False)
class LSData:
    stack: ConjugationStack
    N: int
    v_modes: list
    A_VV: np.ndarray  # (J, J) real: Y-coordinates of Pi_V L4 e_j
    C_WV: np.ndarray  # (J, box) columns Pi_W Pi_N L4 e_j
    lam: np.ndarray  # eigenvalues of D on the box

    @property
    def box(self):
        return self.stack.box

    def PiN(self, c):
        return proj("box", c, self.N)

    def PiW(self, c):
        return np.where(self.w_mask, c, 0.0)

    def PiV(self, c):
        return np.where(self.v_mask, c, 0.0)

    @property
    def w_mask(self):
        nt, nx = self.box
        return mask("W", nt, nx) & mask("box", nt, nx, self.N) & mask("Z0", nt, nx)

    @property
    def v_mask(self):
        nt, nx = self.box
        return mask("V0", nt, nx) & mask("box", nt, nx, self.N)


def assemble_ls(stack: ConjugationStack, N: int) -> LSData:
    box = stack.box
    v_modes = kernel_modes(N)
    if not v_modes:
        raise InversionError("the truncation contains no kernel modes")
    basis = cos_basis(v_modes, box)
    cols = proj("box", stack.L4(basis), N)
    A = y_coords(cols, v_modes, box).T
    nt, nx = box
    wm = mask("W", nt, nx) & mask("box", nt, nx, N) & mask("Z0", nt, nx)
    C = np.where(wm, cols, 0.0)
    lam = eigenvalue_grid(stack.nf, nt, nx)
    return LSData(stack, N, v_modes, A, C, lam)


def _solve_V(ls: LSData, y: np.ndarray) -> np.ndarray:
    try:
        cond = np.linalg.cond(ls.A_VV)
    except np.linalg.LinAlgError:
        cond = np.inf
    if not np.isfinite(cond) or cond > 1e14:
        raise SingularBlock(f"kernel block is numerically singular (cond {cond:.3g})")
    return np.linalg.solve(ls.A_VV, y)


def invert_V_block(ls: LSData, rhs: np.ndarray) -> np.ndarray:
    """Solve ``Pi_V L4 h = rhs`` for ``h`` in ``V0N`` (even), ``rhs`` odd in ``V0N``."""
    x = _solve_V(ls, y_coords(rhs, ls.v_modes, ls.box))
    return x_from_coords(x, ls.v_modes, ls.box)


def apply_A(ls: LSData, h: np.ndarray) -> np.ndarray:
    """Eliminated range operator ``Pi_W L4 h - C_WV A_VV^-1 Pi_V L4 h`` on ``W_N``."""
    Lh = ls.stack.L4(ls.PiW(h))
    x = _solve_V(ls, y_coords(Lh, ls.v_modes, ls.box))
    return ls.PiW(Lh) - np.tensordot(x, ls.C_WV, axes=(0, 0))


def invert_W_block(ls: LSData, rhs: np.ndarray, tol: float = NEUMANN_TOL, maxiter: int = NEUMANN_MAXITER):
    """Solve ``A h = rhs`` on ``W_N`` by ``h <- D^-1 (rhs - R_W h)``, ``R_W = A - D_W``.

    Returns ``(h, iterations, history)``.
    """
    wm = ls.w_mask
    lam = np.where(wm, ls.lam, 1.0)
    rhs = ls.PiW(rhs)
    scale = max(float(np.max(np.abs(rhs), initial=0.0)), 1e-300)
    h = np.where(wm, rhs / lam, 0.0)
    history = []
    for it in range(1, maxiter + 1):
        Ah = apply_A(ls, h)
        Rh = Ah - np.where(wm, ls.lam * h, 0.0)
        h_new = np.where(wm, (rhs - Rh) / lam, 0.0)
        step = float(np.max(np.abs(h_new - h)))
        history.append(step)
        h = h_new
        if step <= tol * scale:
            return h, it, history
        if it >= 3 and history[-1] > history[-2] > history[-3] and history[-1] > scale:
            raise NeumannDivergence(
                f"range-block Neumann series diverges (contraction estimate {history[-1] / history[-2]:.3g})"
            )
    raise NeumannDivergence(
        f"range-block Neumann series did not converge in {maxiter} steps (last step {history[-1]:.3g})"
    )


@dataclass
class InversionResult:
    h: np.ndarray
    iterations: int
    history: list
    eliminated_residual: float


def invert_L4_truncated(stack: ConjugationStack, rhs: np.ndarray, N: int, ls: LSData | None = None) -> InversionResult:
    """Solve ``Pi_N L4 Pi_N h = Pi_N rhs`` by Lyapunov-Schmidt elimination."""
    if ls is None:
        ls = assemble_ls(stack, N)
    f = ls.PiN(proj("Z0", resize(rhs, *ls.box)))
    xV = _solve_V(ls, y_coords(f, ls.v_modes, ls.box))
    f1 = ls.PiW(f) - np.tensordot(xV, ls.C_WV, axes=(0, 0))
    hW, it, hist = invert_W_block(ls, f1)
    resid = float(np.max(np.abs(apply_A(ls, hW) - ls.PiW(f1))))
    LhW = stack.L4(hW)
    x = _solve_V(ls, y_coords(f - ls.PiV(LhW), ls.v_modes, ls.box))
    hV = x_from_coords(x, ls.v_modes, ls.box)
    return InversionResult(hV + hW, it, hist, resid)


# ---------------------------------------------------------------------------
# dense oracle


@dataclass
class DenseOracle:
    matrix: np.ndarray
    modes: list
    box: tuple
    cond: float

    def solve(self, rhs: np.ndarray) -> np.ndarray:
        y = y_coords(resize(rhs, *self.box), self.modes, self.box)
        x = np.linalg.solve(self.matrix, y)
        return x_from_coords(x, self.modes, self.box)


def assemble_dense(apply, N: int, box, chunk: int = 64) -> DenseOracle:
    """Matrix of ``Pi_N apply Pi_N`` from even basis fields to odd coordinates."""
    modes = half_space_modes(N)
    cols = []
    for i in range(0, len(modes), chunk):
        basis = cos_basis(modes[i : i + chunk], box)
        cols.append(y_coords(proj("box", apply(basis), N), modes, box))
    mat = np.concatenate(cols, axis=0).T
    sv = np.linalg.svd(mat, compute_uv=False)
    if sv[-1] <= 1e-14 * sv[0]:
        raise SingularBlock(f"dense matrix is numerically singular (smallest singular value {sv[-1]:.3g})")
    return DenseOracle(mat, modes, tuple(box), float(sv[0] / sv[-1]))


def dense_oracle_inverse(stack: ConjugationStack, rhs: np.ndarray, N: int, oracle: DenseOracle | None = None):
    """Direct solve with the assembled matrix of ``Pi_N L4 Pi_N``; returns ``(h, cond)``."""
    if oracle is None:
        oracle = assemble_dense(stack.L4, N, stack.box)
    return oracle.solve(proj("box", rhs, N)), oracle.cond
