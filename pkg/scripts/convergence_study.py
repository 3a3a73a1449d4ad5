"""Nash-Moser runs over a list of eps: residual history, step slope and distance to eps v1."""

import argparse
import csv
from dataclasses import dataclass, field

import numpy as np

from botorus.bifurcation import build_v1
from botorus.nash_moser import IterationConfig, convergence_slope, original_residual, reconstruct, run
from botorus.spectral_core import coeff_norm


@dataclass
class Config:
    modes: tuple = (2, 3)
    nonlinearity: str = "zero"
    eps: list = field(default_factory=lambda: [0.02, 0.03, 0.04])
    n_cap: int = 32
    out: str = "convergence.csv"


def main(cfg: Config):
    data = build_v1(cfg.modes)
    rows = []
    for eps in cfg.eps:
        st = run(IterationConfig(n_cap=cfg.n_cap), data, cfg.nonlinearity, eps)
        U = reconstruct(data, st.u, eps)
        dist = coeff_norm(U - eps * data.v1_on(*st.box))
        rows.append(
            {
                "eps": eps,
                "status": st.status,
                "steps": st.n,
                "residual": st.residual,
                "original_residual": original_residual(cfg.nonlinearity, data, st.u, eps, cfg.n_cap),
                "slope": convergence_slope(st.h_norms()),
                "dist_eps_v1": dist,
            }
        )
        print(rows[-1])
    e = np.array([r["eps"] for r in rows])
    d = np.array([r["dist_eps_v1"] for r in rows])
    if len(rows) > 1:
        print("log-log slope of ||u_eps - eps v1||:", np.polyfit(np.log(e), np.log(d), 1)[0])
    with open(cfg.out, "w", newline="") as fh:
        w = csv.DictWriter(fh, fieldnames=list(rows[0]))
        w.writeheader()
        w.writerows(rows)


if __name__ == "__main__":
    p = argparse.ArgumentParser()
    p.add_argument("--nonlinearity", default=Config.nonlinearity)
    p.add_argument("--eps", type=float, nargs="+")
    p.add_argument("--n-cap", type=int, default=Config.n_cap)
    p.add_argument("--out", default=Config.out)
    a = p.parse_args()
    cfg = Config(nonlinearity=a.nonlinearity, n_cap=a.n_cap, out=a.out)
    if a.eps:
        cfg.eps = a.eps
    main(cfg)
