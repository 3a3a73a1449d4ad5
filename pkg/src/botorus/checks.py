"""Verification suites behind ``botorus verify``.

Each suite returns a list of :class:`CheckResult`; the thresholds are the
ones used by the acceptance tests, at smaller problem sizes where that keeps
the command quick.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .bifurcation import build_v1
from .descent import build_stack, descent_residuals
from .inversion import dense_oracle_inverse, half_space_modes, invert_L4_truncated
from .nonlinearity import exact_box, get_spec, linearize
from .reduction_change_of_vars import a6_mean_defect, roundtrip_error
from .spectral_core import (
    brute_force_kernel_products,
    dt,
    dx,
    dx_inv,
    hilbert,
    parity_check,
    proj,
    random_field,
    SpectralField,
)


@dataclass(frozen=True)
class CheckResult:
    name: str
    passed: bool
    detail: str


def kernel_products(max_j: int = 20, **_) -> list[CheckResult]:
    bad = brute_force_kernel_products(max_j)
    return [CheckResult("kernel products", not bad, f"{len(bad)} counterexamples (|j| <= {max_j})")]


def identities(n_fields: int = 100, seed: int = 0, **_) -> list[CheckResult]:
    rng = np.random.default_rng(seed)
    worst_h = worst_dx = 0.0
    parity_ok = True
    for _ in range(n_fields):
        c = random_field(rng, 6, 6, decay=0.3).coeffs
        worst_h = max(worst_h, float(np.max(np.abs(hilbert(hilbert(c)) + proj("E", c)))))
        worst_dx = max(worst_dx, float(np.max(np.abs(dx_inv(dx(c)) - proj("E", c)))))
        e = random_field(rng, 6, 6, parity="even", decay=0.3)
        o = random_field(rng, 6, 6, parity="odd", decay=0.3)
        for op in (hilbert, dx, dt):
            parity_ok &= parity_check(SpectralField(op(e.coeffs))) == "odd"
            parity_ok &= parity_check(SpectralField(op(o.coeffs))) == "even"
    return [
        CheckResult("H^2 = -Pi_E", worst_h == 0.0, f"max defect {worst_h:.1e}"),
        CheckResult("dx^-1 dx = Pi_E", worst_dx < 1e-15, f"max defect {worst_dx:.1e}"),
        CheckResult("parity maps", parity_ok, "H, dx, dt swap X and Y"),
    ]


def conjugation(eps: float = 0.05, N: int = 8, **_) -> list[CheckResult]:
    out = []
    d = build_v1((2, 3))
    for name in ("zero", "case1"):
        spec = get_spec(name)
        box = exact_box(spec, d, N, N)
        st = build_stack(linearize(spec, d, np.zeros((1, 1)), eps, box=box))
        res = descent_residuals(st.tc, st.dd)
        out.append(CheckResult(f"leading-coefficient residual [{name}]", st.tc.leading_coeff_residual <= 1e-9, f"{st.tc.leading_coeff_residual:.1e}"))
        out.append(CheckResult(f"a6 y-mean [{name}]", a6_mean_defect(st.tc) <= 1e-9, f"{a6_mean_defect(st.tc):.1e}"))
        rt = roundtrip_error(st.diffeo)
        out.append(CheckResult(f"diffeo round trip [{name}]", rt <= 1e-10, f"{rt:.1e}"))
        worst = max(res.values())
        out.append(CheckResult(f"descent residuals [{name}]", worst <= 1e-9, f"max {worst:.1e}"))
    return out


def oracle(eps: float = 0.05, N: int = 12, seed: int = 1, **_) -> list[CheckResult]:
    out = []
    d = build_v1((2, 3))
    rng = np.random.default_rng(seed)
    for name in ("zero", "case1"):
        spec = get_spec(name)
        st = build_stack(linearize(spec, d, np.zeros((1, 1)), eps, box=exact_box(spec, d, N, N)))
        nt, nx = st.box
        f = np.zeros((2 * nt + 1, 2 * nx + 1), dtype=complex)
        for l, j in half_space_modes(N):
            v = 1j * rng.standard_normal()
            f[l + nt, j + nx] = v
            f[-l + nt, -j + nx] = -v
        h1 = invert_L4_truncated(st, f, N).h
        h2, cond = dense_oracle_inverse(st, f, N)
        rel = float(np.max(np.abs(h1 - h2)) / np.max(np.abs(h2)))
        out.append(CheckResult(f"structured vs dense [{name}]", rel <= 1e-8, f"rel {rel:.1e}, cond {cond:.1e}"))
    return out


SUITES = {"kernel_products": kernel_products, "identities": identities, "conjugation": conjugation, "oracle": oracle}
