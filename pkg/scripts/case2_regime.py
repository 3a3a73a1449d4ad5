"""Where the fully nonlinear case stops behaving perturbatively.

For each eps: sup|a1| of the linearization, whether the change of variables exists,
singular values of the kernel block divided by eps^2, and the contraction factor of the
range-block iteration (spectral radius of I - D^-1 A on W_N, assembled densely).
"""

import argparse
from dataclasses import dataclass

import numpy as np

from botorus.bifurcation import build_v1
from botorus.descent import build_stack, normal_form_eigenvalue
from botorus.inversion import apply_A, assemble_ls, cos_basis, half_space_modes, y_coords
from botorus.nonlinearity import exact_box, get_spec, linearize
from botorus.nash_moser import STACK_ERRORS


@dataclass
class Config:
    modes: tuple = (2, 3)
    nonlinearity: str = "case2"
    eps_min: float = 0.003
    eps_max: float = 0.05
    points: int = 14
    N: int = 8


def contraction_factor(stack, ls, N):
    box = stack.box
    wmodes = [m for m in half_space_modes(N) if m[0] + m[1] * abs(m[1]) != 0]
    basis = cos_basis(wmodes, box)
    lam = np.array([normal_form_eigenvalue(stack.nf, l, j) for l, j in wmodes]).imag
    A = np.array([y_coords(apply_A(ls, b), wmodes, box) for b in basis]).T
    return float(np.max(np.abs(np.linalg.eigvals(np.eye(len(wmodes)) - A / lam[:, None]))))


def main(cfg: Config):
    data = build_v1(cfg.modes)
    spec = get_spec(cfg.nonlinearity)
    print(f"{'eps':>9} {'sup|a1|':>9} {'smin/e^2':>9} {'smax/e^2':>9} {'rho':>7}")
    for eps in np.geomspace(cfg.eps_min, cfg.eps_max, cfg.points):
        lin = linearize(spec, data, np.zeros((1, 1)), eps, box=exact_box(spec, data, cfg.N, cfg.N))
        a1 = np.max(np.abs(lin.grids()["a1"]))
        try:
            st = build_stack(lin)
            ls = assemble_ls(st, cfg.N)
        except STACK_ERRORS as exc:
            print(f"{eps:9.5f} {a1:9.2e}  no conjugation: {exc}")
            continue
        s = np.linalg.svd(ls.A_VV / eps**2, compute_uv=False)
        print(f"{eps:9.5f} {a1:9.2e} {s.min():9.3f} {s.max():9.3f} {contraction_factor(st, ls, cfg.N):7.3f}")


if __name__ == "__main__":
    p = argparse.ArgumentParser()
    p.add_argument("--nonlinearity", default=Config.nonlinearity)
    p.add_argument("--N", type=int, default=Config.N)
    a = p.parse_args()
    main(Config(nonlinearity=a.nonlinearity, N=a.N))
