"""Structured inverse of the conjugated operator against the dense oracle."""

import argparse
import time
from dataclasses import dataclass, field

import numpy as np

from botorus.bifurcation import build_v1
from botorus.descent import build_stack
from botorus.inversion import dense_oracle_inverse, half_space_modes, invert_L4_truncated
from botorus.nash_moser import STACK_ERRORS
from botorus.nonlinearity import exact_box, get_spec, linearize


@dataclass
class Config:
    modes: tuple = (2, 3)
    cases: list = field(default_factory=lambda: [("zero", 0.05), ("case1", 0.05), ("case2", 0.005)])
    N: int = 12
    seed: int = 8


def odd_rhs(rng, box, N):
    nt, nx = box
    f = np.zeros((2 * nt + 1, 2 * nx + 1), dtype=complex)
    for l, j in half_space_modes(N):
        v = 1j * rng.standard_normal()
        f[l + nt, j + nx] = v
        f[-l + nt, -j + nx] = -v
    return f


def main(cfg: Config):
    data = build_v1(cfg.modes)
    for name, eps in cfg.cases:
        t = time.perf_counter()
        spec = get_spec(name)
        st = build_stack(linearize(spec, data, np.zeros((1, 1)), eps, box=exact_box(spec, data, cfg.N, cfg.N)))
        f = odd_rhs(np.random.default_rng(cfg.seed), st.box, cfg.N)
        try:
            h1 = invert_L4_truncated(st, f, cfg.N).h
        except STACK_ERRORS as exc:
            print(f"{name:6s} eps={eps:<6} N={cfg.N} structured inverse failed: {exc}")
            continue
        h2, cond = dense_oracle_inverse(st, f, cfg.N)
        rel = np.max(np.abs(h1 - h2)) / np.max(np.abs(h2))
        print(f"{name:6s} eps={eps:<6} N={cfg.N} rel {rel:.2e} cond {cond:.2e} {time.perf_counter() - t:.1f}s")


if __name__ == "__main__":
    p = argparse.ArgumentParser()
    p.add_argument("--N", type=int, default=Config.N)
    main(Config(N=p.parse_args().N))
