"""Good/bad eps classification, exclusion widths and the good-fraction trend."""

import argparse
import json
from dataclasses import dataclass

from botorus.cantor_scan import ScanConfig, scan


@dataclass
class Config:
    modes: tuple = (2, 3)
    nonlinearity: str = "zero"
    eps_min: float = 0.005
    eps_max: float = 0.1
    grid_points: int = 200
    j_max: int = 32
    out: str = "scan.json"


def main(cfg: Config):
    rep = scan(
        ScanConfig(eps_min=cfg.eps_min, eps_max=cfg.eps_max, grid_points=cfg.grid_points, j_max=cfg.j_max),
        cfg.modes,
        cfg.nonlinearity,
    )
    bad = [r for r in rep.per_eps if r["status"] == "bad"]
    print(f"good fraction {rep.good_fraction:.5f}, {len(rep.bad_intervals)} excluded intervals")
    for r in bad:
        print(f"  bad grid eps {r['eps']:.6f} witness {tuple(r['witness'])} margin {r['margin']:.3f}")
    w = [r["width_j4"] for r in rep.widths]
    if w:
        print(f"width*j^4 in [{min(w):.3g}, {max(w):.3g}]")
    for eps0, g in rep.trend:
        print(f"  eps0 {eps0:.4f}  good fraction below {g:.5f}")
    with open(cfg.out, "w") as fh:
        json.dump(rep.to_json_dict(), fh, indent=1)


if __name__ == "__main__":
    p = argparse.ArgumentParser()
    p.add_argument("--nonlinearity", default=Config.nonlinearity)
    p.add_argument("--grid-points", type=int, default=Config.grid_points)
    p.add_argument("--out", default=Config.out)
    a = p.parse_args()
    main(Config(nonlinearity=a.nonlinearity, grid_points=a.grid_points, out=a.out))
