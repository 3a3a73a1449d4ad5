"""Nash-Moser iteration for the rescaled equation ``F(u, eps) = 0``.

Each step conjugates the linearized operator to ``L4 = D + R``, inverts the
truncation ``Pi L4 Pi`` and maps back:

    h = -Pi Psi Phi (Pi L4 Pi)^-1 Pi Phi^-1 M^-1 Psi^-1 P_eps Pi F(u)

Truncations follow ``N_n = N_0 exp(a (chi^n - 1))`` up to a hard cap.  Once the
cap is reached the scheme is a Newton method for the Galerkin system
``Pi_cap F(u) = 0`` on even zero-mean fields, which is also what
``oracle_newton`` solves with a dense Jacobian.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .bifurcation import BifurcationData, build_v1, build_v2
from .descent import NeumannDivergence as PhiDivergence
from .descent import build_stack
from .descent import trace_record as descent_trace
from .inversion import (
    InversionError,
    diophantine_check,
    half_space_modes,
    invert_L4_truncated,
    x_from_coords,
    y_coords,
)
from .nonlinearity import (
    DomainError,
    NonlinearitySpec,
    apply_dF,
    eval_F,
    eval_Q,
    eval_raw,
    exact_box,
    get_spec,
    linearize,
    omega_of,
)
from .reduction_change_of_vars import ContractionError, MeanError
from .reduction_change_of_vars import trace_record as diffeo_trace
from .spectral_core import SpectralField, box_of, coeff_norm, multiply, proj, resize

STACK_ERRORS = (ContractionError, MeanError, PhiDivergence, InversionError, DomainError, np.linalg.LinAlgError)


@dataclass(frozen=True)
class IterationConfig:
    a_bar: float = 1.2
    chi: float = 1.5
    max_steps: int = 12
    n_cap: int = 32
    tol_residual: float = 1e-10
    s_norm: float = 0.0
    check_identities: bool = False
    trace: bool = False

    def __post_init__(self):
        if self.a_bar <= 0 or self.chi <= 1:
            raise ValueError("need a_bar > 0 and chi > 1")
        if self.n_cap < 1 or self.max_steps < 1 or self.tol_residual <= 0:
            raise ValueError("n_cap, max_steps and tol_residual must be positive")


def truncation_schedule(config: IterationConfig, k_max: int, steps: int) -> list[int]:
    """``N_0 .. N_steps``; ``N_0 >= max(exp(a), 3 k_max)`` and strictly increasing below the cap."""
    n0 = max(math.ceil(math.exp(config.a_bar)), 3 * k_max)
    out = []
    for n in range(steps + 1):
        log_val = math.log(n0) + config.a_bar * (config.chi**n - 1.0)
        if log_val >= math.log(config.n_cap):
            nn = config.n_cap
        else:
            nn = math.ceil(math.exp(log_val) - 1e-9)
        if out:
            nn = min(config.n_cap, max(nn, out[-1] + 1))
        out.append(nn)
    return out


@dataclass
class StepRecord:
    n: int
    N: int
    residual: float  # ||Pi_cap F(u_n)||_s
    residual_full: float  # ||F(u_n)|| on the working box
    h_norm: float  # ||h_n||_s
    margin: float | None = None
    iterations: int | None = None
    rn_error: float | None = None
    taylor_error: float | None = None

    def as_row(self) -> dict:
        return {
            "n": self.n,
            "N": self.N,
            "residual": self.residual,
            "residual_full": self.residual_full,
            "h_norm": self.h_norm,
            "margin": self.margin,
        }


@dataclass
class IterationState:
    spec: NonlinearitySpec
    data: BifurcationData
    eps: float
    config: IterationConfig
    box: tuple[int, int]
    schedule: list[int]
    u: np.ndarray
    n: int = 0
    status: str = "running"
    records: list[StepRecord] = field(default_factory=list)
    message: str = ""
    witness: tuple | None = None
    traces: list[dict] = field(default_factory=list)

    @property
    def solution(self) -> SpectralField:
        n = self.config.n_cap
        return SpectralField(resize(proj("box", self.u, n), n, n))

    @property
    def residual(self) -> float:
        return self.records[-1].residual if self.records else float("nan")

    def h_norms(self) -> list[float]:
        return [r.h_norm for r in self.records[1:]]


def _norm(c, s):
    return coeff_norm(c, s)


def initial_state(spec, data: BifurcationData, eps: float, config: IterationConfig) -> IterationState:
    """``u_0 = v2(eps)`` on the working box of the capped truncation."""
    box = exact_box(spec, data, config.n_cap, config.n_cap)
    sched = truncation_schedule(config, data.modes.k_max, config.max_steps + 1)
    u0 = proj("Z0", resize(build_v2(data, spec, eps).coeffs, *box))
    st = IterationState(spec, data, float(eps), config, box, sched, u0)
    F = eval_F(spec, data, u0, eps, box=box)
    st.records.append(
        StepRecord(0, sched[0], _norm(proj("box", F, config.n_cap), config.s_norm), _norm(F, config.s_norm), 0.0)
    )
    return st


@dataclass
class StepProducts:
    """Intermediate quantities of a step, kept for the residual identities."""

    F: np.ndarray
    h: np.ndarray
    w: np.ndarray
    c: np.ndarray
    stack: object
    N: int
    iterations: int = 0


def newton_direction(state: IterationState, N: int, stack=None) -> StepProducts:
    spec, data, eps, box = state.spec, state.data, state.eps, state.box
    F = eval_F(spec, data, state.u, eps, box=box)
    if stack is None:
        stack = build_stack(linearize(spec, data, state.u, eps, box=box))
    PF = multiply("P_eps", proj("box", F, N), eps)
    c = stack.Phi(stack.M(stack.Psi(PF, "inverse"), "inverse"), "inverse")
    inv = invert_L4_truncated(stack, proj("box", c, N), N)
    h = -proj("box", stack.Psi(stack.Phi(inv.h)), N)
    return StepProducts(F, h, inv.h, c, stack, N, inv.iterations)


def residual_rn(prod: StepProducts) -> np.ndarray:
    """``r_n = P^-1 Psi M Phi {c' - Pi c - Pi_perp R Pi w + L4 b}`` with ``c'`` built from the full ``F``."""
    st, N = prod.stack, prod.N
    eps = st.eps
    cf = st.Phi(st.M(st.Psi(multiply("P_eps", prod.F, eps), "inverse"), "inverse"), "inverse")
    Pw = proj("box", prod.w, N)
    Rw = st.R(Pw)
    perp = lambda a: a - proj("box", a, N)  # noqa: E731
    b = st.Phi(st.Psi(perp(st.Psi(st.Phi(prod.w))), "inverse"), "inverse")
    inner = cf - proj("box", prod.c, N) - perp(Rw) + st.L4(b)
    return multiply("P_eps_inv", st.Psi(st.M(st.Phi(inner))), eps)


def identity_errors(state: IterationState, prod: StepProducts) -> tuple[float, float]:
    """Sup-norm defects of ``F + F'h = r_n`` and ``F(u + h) = r_n + Q(u, h)``."""
    spec, data, eps, box = state.spec, state.data, state.eps, state.box
    r = residual_rn(prod)
    lhs = prod.F + apply_dF(prod.stack.lin, prod.h)
    e1 = float(np.max(np.abs(lhs - r)))
    Fn = eval_F(spec, data, state.u + prod.h, eps, box=box)
    Q = eval_Q(spec, data, state.u, prod.h, eps, box=box)
    e2 = float(np.max(np.abs(Fn - (r + Q))))
    return e1, e2


def step(state: IterationState) -> IterationState:
    """One iteration; updates ``state`` in place and returns it."""
    if state.status != "running":
        return state
    cfg = state.config
    N = state.schedule[state.n + 1]
    try:
        stack = build_stack(linearize(state.spec, state.data, state.u, state.eps, box=state.box))
    except STACK_ERRORS as exc:
        state.status, state.message = "diverged", f"stack construction failed: {exc}"
        return state
    if cfg.trace:
        state.traces.append(_trace(state.n, stack))
    rep = diophantine_check(stack.nf, N, state.eps)
    if not rep.passed:
        state.status = "diophantine_fail"
        l, j, lam, thr = rep.violations[0]
        state.message = f"|lambda| = {lam:.3g} <= {thr:.3g} at (l, j) = ({l}, {j})"
        state.records[-1].margin = rep.margin
        state.witness = (l, j)
        return state
    try:
        prod = newton_direction(state, N, stack)
    except STACK_ERRORS as exc:
        state.status, state.message = "diverged", f"inversion failed: {exc}"
        return state
    rn_err = tq_err = None
    if cfg.check_identities:
        rn_err, tq_err = identity_errors(state, prod)
    state.u = state.u + prod.h
    state.n += 1
    F = eval_F(state.spec, state.data, state.u, state.eps, box=state.box)
    state.records[-1].margin = rep.margin
    state.records.append(
        StepRecord(
            state.n,
            N,
            _norm(proj("box", F, cfg.n_cap), cfg.s_norm),
            _norm(F, cfg.s_norm),
            _norm(prod.h, cfg.s_norm),
            iterations=prod.iterations,
            rn_error=rn_err,
            taylor_error=tq_err,
        )
    )
    return state


def _trace(n: int, stack) -> dict:
    rec = {"n": n}
    rec.update(diffeo_trace(stack.diffeo, stack.tc))
    rec.update(descent_trace(stack.dd, stack.nf))
    return rec


def _diverging(records: list[StepRecord]) -> bool:
    if len(records) < 4:
        return False
    r = [x.residual for x in records[-3:]]
    return r[2] > r[1] > r[0]


def run(config: IterationConfig, modes, spec, eps: float, signs=None) -> IterationState:
    """Iterate until the capped residual drops below tolerance or a failure state."""
    if isinstance(spec, str):
        spec = get_spec(spec)
    data = modes if isinstance(modes, BifurcationData) else build_v1(modes, signs)
    if not (eps > 0):
        raise ValueError("eps must be positive")
    state = initial_state(spec, data, eps, config)
    while state.status == "running":
        if state.n > 0 and state.schedule[state.n] == config.n_cap and state.residual <= config.tol_residual:
            state.status = "converged"
            break
        if state.n >= config.max_steps:
            state.status = "max_steps"
            break
        step(state)
        if state.status == "running" and _diverging(state.records):
            state.status, state.message = "diverged", "residual grew two steps in a row"
    return state


def convergence_slope(h_norms, floor: float = 1e-14) -> float:
    """Least-squares slope of ``log h_{n+1}`` against ``log h_n`` over the tail above ``floor``."""
    h = [x for x in h_norms if x > floor]
    if len(h) < 3:
        return float("nan")
    x = np.log(h[:-1])
    y = np.log(h[1:])
    # the tail starts where the step sizes begin to decay
    start = int(np.argmax(np.array(h) < 0.5 * h[0])) if any(v < 0.5 * h[0] for v in h) else 0
    start = min(start, len(x) - 2)
    x, y = x[start:], y[start:]
    return float(np.polyfit(x, y, 1)[0])


def tail_slopes(h_norms, floor: float = 1e-14) -> list[float]:
    """Successive ratios ``log h_{n+1} / log h_n`` of the step sizes."""
    h = [x for x in h_norms if x > floor]
    return [float(np.log(b) / np.log(a)) for a, b in zip(h[:-1], h[1:]) if a < 1]


# ---------------------------------------------------------------------------
# dense Newton oracle


def dense_jacobian(lin, modes, eps: float) -> np.ndarray:
    """Matrix of ``Pi F'(u) Pi`` from even cosine coordinates to odd sine coordinates.

    Built by direct convolution indexing of the coefficient arrays.
    """
    nt, nx = lin.box
    ml = np.array([m[0] for m in modes])
    mj = np.array([m[1] for m in modes])
    n_l, n_j = ml[:, None], mj[:, None]
    omega = lin.omega
    out = np.zeros((len(modes), len(modes)))
    for sgn in (1, -1):
        p, q = sgn * ml[None, :], sgn * mj[None, :]
        sq = np.sign(q)
        syms = (1j * sq * q * q, sq * q, 1j * q, -1j * sq, np.ones_like(q))
        kl, kj = n_l - p, n_j - q
        inside = (np.abs(kl) <= nt) & (np.abs(kj) <= nx)
        il, ij = np.where(inside, kl + nt, 0), np.where(inside, kj + nx, 0)
        blk = np.zeros(inside.shape, dtype=complex)
        for a, s in zip((lin.a1, lin.a2, lin.a3, lin.a4, lin.a5), syms):
            blk += np.where(inside, a[il, ij], 0.0) * s
        diag = (n_l == p) & (n_j == q)
        blk += np.where(diag, 1j * omega * p + 1j * sq * q * q, 0.0)
        out += blk.imag
    kern = (ml + mj * np.abs(mj) == 0)
    return np.where(kern[:, None], out / eps**2, out)


@dataclass
class OracleResult:
    u: np.ndarray
    residual: float
    steps: int
    converged: bool
    history: list


def oracle_newton(modes, spec, eps: float, N: int, tol: float = 1e-12, maxiter: int = 30, signs=None) -> OracleResult:
    """Plain Newton on ``Pi_N F(u) = 0`` over even zero-mean fields in the diamond ``N``."""
    if isinstance(spec, str):
        spec = get_spec(spec)
    data = modes if isinstance(modes, BifurcationData) else build_v1(modes, signs)
    box = exact_box(spec, data, N, N)
    hs = half_space_modes(N)
    u = proj("Z0", resize(build_v2(data, spec, eps).coeffs, *box))
    u = proj("box", u, N)
    hist = []
    for it in range(maxiter + 1):
        F = eval_F(spec, data, u, eps, box=box)
        y = y_coords(F, hs, box)
        res = float(np.max(np.abs(proj("box", F, N))))
        hist.append(res)
        if res <= tol:
            return OracleResult(u, res, it, True, hist)
        if it >= 3 and hist[-1] > hist[-2] > hist[-3]:
            break
        if it == maxiter:
            break
        J = dense_jacobian(linearize(spec, data, u, eps, box=box), hs, eps)
        dx = np.linalg.solve(J, -y)
        u = u + x_from_coords(dx, hs, box)
    return OracleResult(u, hist[-1], len(hist) - 1, False, hist)


# ---------------------------------------------------------------------------
# reconstruction in the original variables


def reconstruct(data: BifurcationData, u: np.ndarray, eps: float) -> np.ndarray:
    """``u_eps = eps v1 + eps^2 u`` on the box of ``u``."""
    box = box_of(u)
    return eps * data.v1_on(*box) + eps**2 * u


def original_residual(spec, data: BifurcationData, u: np.ndarray, eps: float, N: int | None = None) -> float:
    """Sup of the coefficients of ``omega U_t + H U_xx + (U^3)_x + N4(U)``, optionally on the diamond ``N``."""
    if isinstance(spec, str):
        spec = get_spec(spec)
    box = box_of(u)
    U = reconstruct(data, u, eps)
    raw = eval_raw(spec, U, omega_of(eps))
    if N is not None:
        raw = proj("box", raw, N)
    return float(np.max(np.abs(raw)))
