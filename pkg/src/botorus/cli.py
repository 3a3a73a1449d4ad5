"""Command-line interface.

Subcommands: ``bifurcate``, ``solve``, ``scan`` and ``verify``.  Options can
also come from a flat ``key = value`` file passed with ``--config``; command
line flags override the file.  Exit codes: 0 success, 1 invalid input,
2 solver failure or failed verification.
"""

from __future__ import annotations

import argparse
import csv
import json
import sys
from pathlib import Path

from . import __version__
from .bifurcation import build_v1, validate_mode_set
from .cantor_scan import ScanConfig, scan
from .nash_moser import IterationConfig, original_residual, run
from .nonlinearity import CATALOG

SCHEMA_VERSION = 1


class ValidationError(ValueError):
    pass


# ---------------------------------------------------------------------------
# config files

# key -> (converter, commands that accept it)
CONFIG_KEYS = {
    "modes": (str, {"bifurcate", "solve", "scan"}),
    "signs": (str, {"bifurcate", "solve", "scan"}),
    "nonlinearity": (str, {"solve", "scan"}),
    "eps": (float, {"solve"}),
    "eps_min": (float, {"scan"}),
    "eps_max": (float, {"scan"}),
    "grid_points": (int, {"scan"}),
    "j_max": (int, {"scan"}),
    "refine_bad": (lambda s: _parse_bool(s), {"scan"}),
    "a_bar": (float, {"solve"}),
    "chi": (float, {"solve"}),
    "n_cap": (int, {"solve"}),
    "max_steps": (int, {"solve"}),
    "tol": (float, {"solve"}),
    "s_norm": (float, {"solve"}),
    "out": (str, {"bifurcate", "solve", "scan"}),
    "csv": (str, {"solve", "scan"}),
    "widths_csv": (str, {"scan"}),
    "trace": (str, {"solve"}),
    "max_j": (int, {"verify"}),
}


def _parse_bool(s: str) -> bool:
    v = s.strip().lower()
    if v in ("1", "true", "yes", "on"):
        return True
    if v in ("0", "false", "no", "off"):
        return False
    raise ValidationError(f"not a boolean: {s!r}")


def read_config(path: str, command: str) -> dict:
    """Parse ``key = value`` lines; ``#`` starts a comment."""
    out = {}
    text = Path(path).read_text()
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ValidationError(f"{path}:{lineno}: expected key = value")
        key, value = (p.strip() for p in line.split("=", 1))
        key = key.replace("-", "_")
        if key not in CONFIG_KEYS:
            raise ValidationError(f"{path}:{lineno}: unknown key {key!r}")
        conv, cmds = CONFIG_KEYS[key]
        if command not in cmds:
            raise ValidationError(f"{path}:{lineno}: key {key!r} does not apply to {command}")
        try:
            out[key] = conv(value)
        except ValueError as exc:
            raise ValidationError(f"{path}:{lineno}: bad value for {key}: {exc}") from None
    return out


# ---------------------------------------------------------------------------
# argument parsing


def _int_list(s: str) -> list[int]:
    try:
        return [int(x) for x in str(s).replace(" ", "").split(",") if x]
    except ValueError:
        raise ValidationError(f"expected a comma-separated list of integers, got {s!r}") from None


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="botorus", description="Periodic solutions of a completely resonant dispersive equation.")
    p.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    p.add_argument("--config", help="flat key = value file; flags override it")
    p.add_argument("--error-json", action="store_true", help="print errors as JSON on stderr")
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", default=argparse.SUPPRESS, help=argparse.SUPPRESS)
    common.add_argument("--error-json", action="store_true", default=argparse.SUPPRESS, help=argparse.SUPPRESS)
    sub = p.add_subparsers(dest="command", required=True)

    b = sub.add_parser("bifurcate", parents=[common], help="amplitudes and kernel solution for a mode set")
    b.add_argument("--modes")
    b.add_argument("--signs")
    b.add_argument("--out")

    s = sub.add_parser("solve", parents=[common], help="run the Nash-Moser iteration")
    s.add_argument("--modes")
    s.add_argument("--signs")
    s.add_argument("--nonlinearity")
    s.add_argument("--eps", type=float)
    s.add_argument("--a-bar", dest="a_bar", type=float)
    s.add_argument("--chi", type=float)
    s.add_argument("--n-cap", dest="n_cap", type=int)
    s.add_argument("--max-steps", dest="max_steps", type=int)
    s.add_argument("--tol", type=float)
    s.add_argument("--s-norm", dest="s_norm", type=float)
    s.add_argument("--out", help="solution JSON")
    s.add_argument("--csv", help="per-step CSV")
    s.add_argument("--trace", help="per-step diagnostics JSON")

    c = sub.add_parser("scan", parents=[common], help="classify an eps grid into good and bad parameters")
    c.add_argument("--modes")
    c.add_argument("--signs")
    c.add_argument("--nonlinearity")
    c.add_argument("--eps-min", dest="eps_min", type=float)
    c.add_argument("--eps-max", dest="eps_max", type=float)
    c.add_argument("--grid-points", dest="grid_points", type=int)
    c.add_argument("--j-max", dest="j_max", type=int)
    c.add_argument("--no-refine", dest="refine_bad", action="store_const", const=False)
    c.add_argument("--out", help="report JSON")
    c.add_argument("--csv", help="per-eps CSV")
    c.add_argument("--widths-csv", dest="widths_csv", help="exclusion-width CSV")

    v = sub.add_parser("verify", parents=[common], help="run the property and oracle checks")
    v.add_argument("--appendix-a", "--kernel-products", dest="kernel_products", action="store_true", help="kernel product enumeration")
    v.add_argument("--identities", action="store_true", help="multiplier identities")
    v.add_argument("--conjugation", action="store_true", help="change of variables and descent residuals")
    v.add_argument("--oracle", action="store_true", help="structured inverse against the dense oracle")
    v.add_argument("--max-j", dest="max_j", type=int)
    return p


DEFAULTS = {
    "modes": "2,3",
    "signs": None,
    "nonlinearity": "zero",
    "eps": None,
    "eps_min": 0.005,
    "eps_max": 0.1,
    "grid_points": 200,
    "j_max": 32,
    "refine_bad": True,
    "a_bar": 1.2,
    "chi": 1.5,
    "n_cap": 32,
    "max_steps": 12,
    "tol": 1e-10,
    "s_norm": 0.0,
    "max_j": 20,
}


def resolve(args: argparse.Namespace) -> dict:
    """Defaults, then the config file, then explicit flags."""
    opts = {k: v for k, v in DEFAULTS.items()}
    if args.config:
        try:
            opts.update(read_config(args.config, args.command))
        except OSError as exc:
            raise ValidationError(f"cannot read config: {exc}") from None
    for k, v in vars(args).items():
        if k in ("command", "config", "error_json"):
            continue
        if v is not None and v is not False:
            opts[k] = v
        elif k not in opts:
            opts[k] = v
    return opts


def _modes(opts) -> tuple[list[int], list[int] | None]:
    modes = _int_list(opts["modes"])
    verdict = validate_mode_set(modes)
    if not verdict.accepted:
        raise ValidationError(f"mode set rejected: {verdict.reason}")
    signs = _int_list(opts["signs"]) if opts.get("signs") else None
    if signs is not None and (len(signs) != len(modes) or any(s not in (1, -1) for s in signs)):
        raise ValidationError("signs must be +-1, one per mode")
    if signs is None:
        return sorted(modes), None
    pairs = sorted(zip(modes, signs))
    return [m for m, _ in pairs], [s for _, s in pairs]


def _spec_name(opts) -> str:
    name = opts["nonlinearity"]
    if name not in CATALOG:
        raise ValidationError(f"unknown nonlinearity {name!r}; known: {', '.join(sorted(CATALOG))}")
    return name


def _dump(obj, path: str | None):
    text = json.dumps(obj, sort_keys=True, indent=1)
    if path:
        Path(path).write_text(text + "\n")
    else:
        print(text)


# ---------------------------------------------------------------------------
# commands


def cmd_bifurcate(opts) -> int:
    modes, signs = _modes(opts)
    d = build_v1(modes, signs)
    payload = {
        "schema": SCHEMA_VERSION,
        "modes": list(d.modes.ks),
        "signs": list(d.signs),
        "rho": [str(r) for r in d.rho],
        "rho_float": [float(r) for r in d.rho],
        "a_j": {str(j): a for j, a in sorted(d.amps.items())},
        "b": str(d.b),
        "b_float": float(d.b),
        "delta": d.delta,
        "v1": d.v1.to_json_dict(),
    }
    _dump(payload, opts.get("out"))
    return 0


STEP_COLUMNS = ["n", "N", "residual", "h_norm", "margin", "status"]


def cmd_solve(opts) -> int:
    modes, signs = _modes(opts)
    name = _spec_name(opts)
    eps = opts.get("eps")
    if eps is None or not (0 < eps < 1):
        raise ValidationError("--eps is required and must lie in (0, 1)")
    try:
        cfg = IterationConfig(
            a_bar=opts["a_bar"],
            chi=opts["chi"],
            max_steps=opts["max_steps"],
            n_cap=opts["n_cap"],
            tol_residual=opts["tol"],
            s_norm=opts["s_norm"],
            trace=bool(opts.get("trace")),
        )
    except ValueError as exc:
        raise ValidationError(str(exc)) from None
    state = run(cfg, modes, name, eps, signs=signs)
    rows = []
    for i, r in enumerate(state.records):
        last = i == len(state.records) - 1
        rows.append(
            {
                "n": r.n,
                "N": r.N,
                "residual": f"{r.residual:.6e}",
                "h_norm": f"{r.h_norm:.6e}",
                "margin": "" if r.margin is None else f"{r.margin:.6e}",
                "status": state.status if last else "running",
            }
        )
    if opts.get("csv"):
        with open(opts["csv"], "w", newline="") as fh:
            w = csv.DictWriter(fh, fieldnames=STEP_COLUMNS)
            w.writeheader()
            w.writerows(rows)
    else:
        w = csv.DictWriter(sys.stdout, fieldnames=STEP_COLUMNS)
        w.writeheader()
        w.writerows(rows)
    if opts.get("trace"):
        _dump({"schema": SCHEMA_VERSION, "steps": state.traces}, opts["trace"])
    if opts.get("out"):
        payload = {
            "schema": SCHEMA_VERSION,
            "modes": modes,
            "nonlinearity": name,
            "eps": eps,
            "omega": 1 + 3 * eps**2,
            "status": state.status,
            "message": state.message,
            "residual": state.residual,
            "original_residual": original_residual(name, state.data, state.u, eps, cfg.n_cap),
            "u": state.solution.to_json_dict(),
        }
        _dump(payload, opts["out"])
    print(f"status={state.status} steps={state.n} residual={state.residual:.3e}", file=sys.stderr)
    if state.status != "converged":
        raise SolverFailure(state.status, state.message)
    return 0


SCAN_COLUMNS = ["eps", "status", "margin"]
WIDTH_COLUMNS = ["l", "j", "lo", "hi", "width", "width_j4", "count_l", "count_scaled"]


def cmd_scan(opts) -> int:
    modes, signs = _modes(opts)
    name = _spec_name(opts)
    try:
        cfg = ScanConfig(
            eps_min=opts["eps_min"],
            eps_max=opts["eps_max"],
            grid_points=opts["grid_points"],
            j_max=opts["j_max"],
            refine_bad=opts["refine_bad"],
        )
    except ValueError as exc:
        raise ValidationError(str(exc)) from None
    report = scan(cfg, modes, name, signs=signs)
    payload = {"schema": SCHEMA_VERSION, "modes": modes, "nonlinearity": name}
    payload.update(report.to_json_dict())
    _dump(payload, opts.get("out"))
    if opts.get("csv"):
        with open(opts["csv"], "w", newline="") as fh:
            w = csv.DictWriter(fh, fieldnames=SCAN_COLUMNS, extrasaction="ignore")
            w.writeheader()
            w.writerows(report.per_eps)
    if opts.get("widths_csv"):
        with open(opts["widths_csv"], "w", newline="") as fh:
            w = csv.DictWriter(fh, fieldnames=WIDTH_COLUMNS)
            w.writeheader()
            w.writerows(report.widths)
    return 0


def cmd_verify(opts) -> int:
    from . import checks

    chosen = [k for k in ("kernel_products", "identities", "conjugation", "oracle") if opts.get(k)]
    if not chosen:
        chosen = ["kernel_products", "identities", "conjugation", "oracle"]
    max_j = opts["max_j"]
    if max_j is None or max_j < 1:
        raise ValidationError("--max-j must be a positive integer")
    results = []
    for name in chosen:
        results.extend(checks.SUITES[name](max_j=max_j))
    width = max(len(r.name) for r in results)
    for r in results:
        print(f"{r.name:<{width}}  {'PASS' if r.passed else 'FAIL'}  {r.detail}")
    if all(r.passed for r in results):
        return 0
    raise SolverFailure("verification_failed", ", ".join(r.name for r in results if not r.passed))


class SolverFailure(RuntimeError):
    def __init__(self, status: str, message: str = ""):
        super().__init__(message or status)
        self.status = status


COMMANDS = {"bifurcate": cmd_bifurcate, "solve": cmd_solve, "scan": cmd_scan, "verify": cmd_verify}


def _error(kind: str, msg: str, as_json: bool) -> None:
    if as_json:
        print(json.dumps({"error": kind, "message": msg}, sort_keys=True), file=sys.stderr)
    else:
        print(f"error: {msg}", file=sys.stderr)


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return 1 if exc.code not in (0, None) else 0
    try:
        opts = resolve(args)
        return COMMANDS[args.command](opts)
    except ValidationError as exc:
        _error("validation", str(exc), args.error_json)
        return 1
    except SolverFailure as exc:
        _error(exc.status, str(exc), args.error_json)
        return 2


if __name__ == "__main__":
    sys.exit(main())
