"""Good and bad parameters along an epsilon grid.

The classification uses the normal form of the linearized operator at the
starting iterate ``u_0 = v2(eps)``:

    lambda_{l,j} = i omega (l + p_j(eps)),
    p_j = (mu2 j|j| + mu1 j - mu0 sign j + mu_m2 sign j / j^2) / omega.

``eps`` is bad when ``|lambda_{l,j}| <= 1/(2<j>^3)`` for some ``l + j|j| != 0``.
Per-pair exclusion sets ``{eps : |l + p_j(eps)| <= 1/(2<j>^3)}`` are intervals
because ``p_j`` is monotone in ``eps``; their endpoints are located by bisection.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy.interpolate import CubicSpline
from scipy.optimize import brentq

from .bifurcation import BifurcationData, build_v1, build_v2
from .descent import NormalForm, build_stack
from .inversion import diophantine_check, dioph_threshold
from .nash_moser import STACK_ERRORS, IterationConfig, run
from .nonlinearity import exact_box, get_spec, linearize, omega_of
from .spectral_core import resize

BISECTION_DEPTH = 10


def witness_window_constant(b: float) -> float:
    """Bound on ``|p_j - j|j|| / (eps^2 j^2)`` with a factor two of slack: ``2 (3 + 3 b)``."""
    return 2.0 * (3.0 + 3.0 * float(b))


def in_witness_window(l: int, j: int, eps: float, b: float) -> bool:
    return abs(l + j * abs(j)) <= 0.5 + witness_window_constant(b) * eps**2 * j * j


@dataclass(frozen=True)
class ScanConfig:
    eps_min: float = 0.005
    eps_max: float = 0.1
    grid_points: int = 200
    j_max: int = 32
    refine_bad: bool = True
    full_runs: bool = False
    solver: IterationConfig = field(default_factory=IterationConfig)
    trend_points: int = 10

    def __post_init__(self):
        if not (0 < self.eps_min < self.eps_max):
            raise ValueError("need 0 < eps_min < eps_max")
        if self.grid_points < 2:
            raise ValueError("grid_points must be at least 2")
        if self.j_max < 1:
            raise ValueError("j_max must be positive")

    def grid(self) -> np.ndarray:
        return np.linspace(self.eps_min, self.eps_max, self.grid_points)


# ---------------------------------------------------------------------------
# normal form as a function of eps


def normal_form_at(spec, data: BifurcationData, eps: float) -> NormalForm:
    """Normal form of the linearized operator at ``u_0 = v2(eps)``."""
    box = exact_box(spec, data, *data.v1.box)
    u0 = resize(build_v2(data, spec, eps).coeffs, *box)
    return build_stack(linearize(spec, data, u0, eps, box=box)).nf


def p_of(nf: NormalForm, j):
    j = np.asarray(j, dtype=float)
    s = np.sign(j)
    jj = np.where(j == 0, 1.0, j)
    return (nf.mu2 * j * np.abs(j) + nf.mu1 * j - nf.mu0 * s + nf.mu_m2 * s / jj**2) / nf.omega


class NormalFormCurve:
    """Normal-form coefficients on an eps grid, cubic-spline interpolated in between."""

    def __init__(self, spec, data: BifurcationData, eps_grid):
        self.spec, self.data = spec, data
        self.grid = np.asarray(eps_grid, dtype=float)
        forms, ok, errors = [], [], {}
        for e in self.grid:
            try:
                forms.append(normal_form_at(spec, data, float(e)))
                ok.append(True)
            except STACK_ERRORS as exc:
                forms.append(None)
                ok.append(False)
                errors[float(e)] = str(exc)
        self.forms = forms
        self.ok = np.array(ok)
        self.errors = errors
        good = self.grid[self.ok]
        if good.size < 4:
            raise ValueError("fewer than four grid points admit a normal form")
        self.lo, self.hi = float(good[0]), float(good[-1])
        self._splines = {
            k: CubicSpline(good, [getattr(f, k) for f in forms if f is not None])
            for k in ("mu2", "mu1", "mu0", "mu_m2")
        }

    def __call__(self, eps: float) -> NormalForm:
        return NormalForm(omega_of(eps), *(float(self._splines[k](eps)) for k in ("mu2", "mu1", "mu0", "mu_m2")))

    def p(self, j, eps):
        eps = np.asarray(eps, dtype=float)
        om = omega_of(eps)
        s = np.sign(j)
        sp = self._splines
        return (sp["mu2"](eps) * j * abs(j) + sp["mu1"](eps) * j - sp["mu0"](eps) * s + sp["mu_m2"](eps) * s / j**2) / om

    def interpolation_error(self) -> float:
        """Largest relative spline defect at grid midpoints, for the worst ``|j|``-weighted coefficient."""
        good = self.grid[self.ok]
        if good.size < 2:
            return 0.0
        mids = 0.5 * (good[:-1] + good[1:])
        pick = mids[:: max(1, mids.size // 5)]
        err = 0.0
        for e in pick:
            exact = normal_form_at(self.spec, self.data, float(e))
            approx = self(float(e))
            for k in ("mu1", "mu0", "mu_m2"):
                a, b = getattr(exact, k), getattr(approx, k)
                err = max(err, abs(a - b) / max(abs(a), 1e-300))
        return err


# ---------------------------------------------------------------------------
# exclusion intervals


@dataclass
class ExclusionInterval:
    l: int
    j: int
    lo: float
    hi: float
    complete: bool  # False when clipped by the scanned range

    @property
    def width(self) -> float:
        return self.hi - self.lo


def _bisect(f, inside: float, outside: float, depth: int = BISECTION_DEPTH) -> float:
    for _ in range(depth):
        mid = 0.5 * (inside + outside)
        if f(mid):
            inside = mid
        else:
            outside = mid
    return 0.5 * (inside + outside)


def _edge(f, centre: float, step: float, limit: float):
    """Walk from ``centre`` (inside) by doubling ``step`` towards ``limit`` until outside, then bisect."""
    direction = 1.0 if limit > centre else -1.0
    prev = centre
    s = abs(step)
    while True:
        cand = centre + direction * s
        if (cand - limit) * direction >= 0:
            if f(limit):
                return limit, False
            return _bisect(f, prev, limit), True
        if not f(cand):
            return _bisect(f, prev, cand), True
        prev = cand
        s *= 2.0


def exclusion_intervals(curve: NormalFormCurve, j_max: int, depth: int = BISECTION_DEPTH) -> list[ExclusionInterval]:
    """All ``(l, j)``, ``1 <= j <= j_max``, whose exclusion set meets the scanned range.

    Pairs with ``j < 0`` give the same sets as ``(-l, -j)``.
    """
    lo, hi = curve.lo, curve.hi
    fine = np.linspace(lo, hi, max(64, 4 * curve.grid.size))
    out = []
    for j in range(1, j_max + 1):
        thr = float(dioph_threshold(j))
        pj = curve.p(j, fine)
        for l in range(int(math.floor(-pj.max())) - 1, int(math.ceil(-pj.min())) + 2):
            if l + j * j == 0:
                continue
            d = l + pj
            if np.min(np.abs(d)) > 1.0 and not np.any(np.sign(d[1:]) != np.sign(d[:-1])):
                continue
            g = lambda e, l=l, j=j: float(l + curve.p(j, e))  # noqa: E731
            inside = lambda e, g=g, thr=thr: abs(g(e)) <= thr  # noqa: E731
            sign_change = np.flatnonzero(np.sign(d[1:]) != np.sign(d[:-1]))
            if sign_change.size:
                k = int(sign_change[0])
                centre = brentq(g, fine[k], fine[k + 1], xtol=1e-15)
            else:
                k = int(np.argmin(np.abs(d)))
                if abs(d[k]) > thr:
                    continue
                centre = float(fine[k])
            slope = abs(float(curve._slope(j, centre)))
            step = thr / max(slope, 1e-300)
            a, ca = _edge(inside, centre, step, lo) if inside(centre) else (centre, True)
            b, cb = _edge(inside, centre, step, hi) if inside(centre) else (centre, True)
            out.append(ExclusionInterval(l, j, min(a, b), max(a, b), ca and cb))
    return out


def _slope(self, j, eps):
    h = 1e-6 * max(eps, 1e-3)
    return (self.p(j, eps + h) - self.p(j, eps - h)) / (2 * h)


NormalFormCurve._slope = _slope


def monotonicity(curve: NormalFormCurve, j_max: int) -> dict[int, int]:
    """Sign of the finite-difference ``d p_j / d eps`` if constant over the range, else 0."""
    e = curve.grid[curve.ok]
    out = {}
    for j in range(1, j_max + 1):
        p = np.array([p_of(curve.forms[i], j) for i in np.flatnonzero(curve.ok)])
        s = np.sign(np.diff(p))
        out[j] = int(s[0]) if np.all(s == s[0]) and s[0] != 0 else 0
    return out


def exclusion_widths(modes, spec, j_max: int, eps_min: float = 0.005, eps_max: float = 0.1, grid_points: int = 200):
    """Rows ``(l, j, lo, hi, width, width j^4, count_l, count_l / (eps0^2 j^2))`` for complete intervals."""
    if isinstance(spec, str):
        spec = get_spec(spec)
    data = modes if isinstance(modes, BifurcationData) else build_v1(modes)
    curve = NormalFormCurve(spec, data, np.linspace(eps_min, eps_max, grid_points))
    return width_table(exclusion_intervals(curve, j_max), curve.hi)


def width_table(intervals: list[ExclusionInterval], eps0: float) -> list[dict]:
    counts: dict[int, int] = {}
    for iv in intervals:
        counts[iv.j] = counts.get(iv.j, 0) + 1
    rows = []
    for iv in intervals:
        if not iv.complete:
            continue
        rows.append(
            {
                "l": iv.l,
                "j": iv.j,
                "lo": iv.lo,
                "hi": iv.hi,
                "width": iv.width,
                "width_j4": iv.width * iv.j**4,
                "count_l": counts[iv.j],
                "count_scaled": counts[iv.j] / (eps0**2 * iv.j**2),
            }
        )
    return rows


# ---------------------------------------------------------------------------
# the scan


@dataclass
class ScanReport:
    per_eps: list[dict]
    bad_intervals: list[tuple[float, float, tuple[int, int]]]
    good_fraction: float
    trend: list[tuple[float, float]]
    widths: list[dict]
    monotone: dict[int, int]
    interpolation_error: float

    def to_json_dict(self) -> dict:
        return {
            "per_eps": self.per_eps,
            "bad_intervals": [[lo, hi, list(w)] for lo, hi, w in self.bad_intervals],
            "good_fraction": self.good_fraction,
            "trend": [list(t) for t in self.trend],
            "widths": self.widths,
            "monotone": {str(k): v for k, v in self.monotone.items()},
            "interpolation_error": self.interpolation_error,
        }


def merge_intervals(intervals: list[ExclusionInterval]) -> list[tuple[float, float, tuple[int, int]]]:
    """Union of the exclusion sets as disjoint intervals, each with the pair that opened it."""
    ivs = sorted(intervals, key=lambda iv: iv.lo)
    out: list[list] = []
    for iv in ivs:
        if out and iv.lo <= out[-1][1]:
            out[-1][1] = max(out[-1][1], iv.hi)
        else:
            out.append([iv.lo, iv.hi, (iv.l, iv.j)])
    return [(a, b, w) for a, b, w in out]


def good_fraction_below(bad: list[tuple[float, float, tuple]], eps0: float) -> float:
    """``|G cap (0, eps0)| / eps0`` with ``G`` the complement of the bad intervals."""
    meas = sum(max(0.0, min(hi, eps0) - lo) for lo, hi, _ in bad if lo < eps0)
    return 1.0 - meas / eps0


def scan(config: ScanConfig, modes, spec, signs=None) -> ScanReport:
    if isinstance(spec, str):
        spec = get_spec(spec)
    data = modes if isinstance(modes, BifurcationData) else build_v1(modes, signs)
    grid = config.grid()
    curve = NormalFormCurve(spec, data, grid)
    b = float(data.b)
    per = []
    for e, nf, ok in zip(grid, curve.forms, curve.ok):
        rec = {"eps": float(e), "status": "diverged", "witness": None, "margin": None}
        if ok:
            rep = diophantine_check(nf, config.j_max, float(e))
            rec["margin"] = rep.margin
            if rep.passed:
                rec["status"] = "good"
            else:
                l, j, _, _ = rep.violations[0]
                if j < 0:
                    l, j = -l, -j
                rec["status"], rec["witness"] = "bad", [l, j]
        else:
            rec["message"] = curve.errors.get(float(e), "")
        if config.full_runs:
            st = run(config.solver, data, spec, float(e))
            rec["run_status"] = st.status
            rec["run_witness"] = list(st.witness) if st.witness else None
            rec["run_residual"] = st.residual
        per.append(rec)
    if config.refine_bad:
        intervals = exclusion_intervals(curve, config.j_max)
    else:
        intervals = _grid_intervals(per)
    bad = merge_intervals(intervals)
    span = curve.hi - config.eps_min
    meas = sum(hi - lo for lo, hi, _ in bad)
    gf = 1.0 - meas / span if span > 0 else 1.0
    k = max(1, config.trend_points)
    idx = np.unique(np.linspace(0, grid.size - 1, k + 1).astype(int))[1:]
    trend = [(float(grid[i]), good_fraction_below(bad, float(grid[i]))) for i in idx]
    return ScanReport(
        per_eps=per,
        bad_intervals=bad,
        good_fraction=gf,
        trend=trend,
        widths=width_table(intervals, curve.hi),
        monotone=monotonicity(curve, config.j_max),
        interpolation_error=curve.interpolation_error() if config.refine_bad else 0.0,
    )


def _grid_intervals(per: list[dict]) -> list[ExclusionInterval]:
    """Runs of consecutive bad grid points, without refinement."""
    out = []
    run_start = None
    for i, rec in enumerate(per + [{"status": "good"}]):
        if rec["status"] == "bad" and run_start is None:
            run_start = i
        elif rec["status"] != "bad" and run_start is not None:
            l, j = per[run_start]["witness"]
            out.append(ExclusionInterval(l, j, per[run_start]["eps"], per[i - 1]["eps"], False))
            run_start = None
    return out
