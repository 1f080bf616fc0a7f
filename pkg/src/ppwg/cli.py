"""Command-line entry point.

Commands: ``verify``, ``symbol``, ``solve``, ``field`` and ``norms``. Every
command writes its outputs plus a ``manifest.json`` echo into ``--out``.

Exit status: 0 on success, 1 when an identity check or a per-mode solve
fails, 2 on usage or configuration errors.
"""

from __future__ import annotations

import argparse
import ast
import json
import math
import operator
import os
import platform
import sys
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
import scipy

from . import __version__
from .calderon import symbol_table
from .io import FIELD_HEADER, field_rows, symbol_rows, trace_from_csv, write_csv, write_text
from .sobolev import curl_norm, div_norm, hs_norm
from .solver import IncidentSpec, SingularSystemError, battery, battery_incidents, solve_scattering
from .verify import SUITES, format_report, run_suite
from .waveguide import ConfigError, OutgoingCoefficients, WaveguideConfig, field_grid

__all__ = ["ConfigParseError", "RunManifest", "parse_config", "main", "ENV_CONFIG", "DEFAULT_CONFIG"]

ENV_CONFIG = "PPWG_CONFIG"

#: Used when neither ``--config`` nor the environment variable is given.
DEFAULT_CONFIG = {"k": 2.5, "Z": math.pi, "R": 1.0, "a": 0.5}

_FLOAT_KEYS = ("k", "Z", "R", "a", "eta", "tol", "cutoff_guard")
_INT_KEYS = ("N_max", "M_max")
_BOOL_KEYS = ("exclude_cutoff",)
_KEYS = _FLOAT_KEYS + _INT_KEYS + _BOOL_KEYS

EXIT_OK, EXIT_FAIL, EXIT_USAGE = 0, 1, 2


class ConfigParseError(ConfigError):
    """Malformed configuration file."""


@dataclass(frozen=True)
class RunManifest:
    config: WaveguideConfig
    command: str
    options: dict = field(default_factory=dict)
    out_dir: Path = Path(".")

    def to_json(self) -> str:
        cfg = {k: getattr(self.config, k) for k in _KEYS}
        doc = {
            "command": self.command,
            "config": cfg,
            "options": self.options,
            "versions": {
                "ppwg": __version__,
                "numpy": np.__version__,
                "scipy": scipy.__version__,
                "python": platform.python_version(),
            },
        }
        return json.dumps(doc, indent=2, sort_keys=True) + "\n"


# config parsing ---------------------------------------------------------

_BINOPS = {ast.Add: operator.add, ast.Sub: operator.sub, ast.Mult: operator.mul, ast.Div: operator.truediv}


def _eval_number(text: str) -> float:
    """Numeric literal or simple arithmetic over numbers and ``pi``."""

    def ev(node):
        if isinstance(node, ast.Expression):
            return ev(node.body)
        if isinstance(node, ast.Constant) and isinstance(node.value, (int, float)):
            return float(node.value)
        if isinstance(node, ast.Name) and node.id == "pi":
            return math.pi
        if isinstance(node, ast.UnaryOp) and isinstance(node.op, (ast.USub, ast.UAdd)):
            v = ev(node.operand)
            return -v if isinstance(node.op, ast.USub) else v
        if isinstance(node, ast.BinOp) and type(node.op) in _BINOPS:
            return _BINOPS[type(node.op)](ev(node.left), ev(node.right))
        raise ValueError(text)

    return ev(ast.parse(text.strip(), mode="eval"))


def _coerce(key: str, raw, where: str):
    try:
        if key in _BOOL_KEYS:
            if isinstance(raw, bool):
                return raw
            s = str(raw).strip().lower()
            if s in ("true", "1", "yes"):
                return True
            if s in ("false", "0", "no"):
                return False
            raise ValueError(raw)
        if raw is None or (isinstance(raw, str) and raw.strip().lower() in ("none", "null")):
            if key in ("a", "cutoff_guard"):
                return None
            raise ValueError(raw)
        v = float(raw) if isinstance(raw, (int, float)) else _eval_number(str(raw))
        if key in _INT_KEYS:
            if v != int(v):
                raise ValueError(raw)
            return int(v)
        return v
    except (ValueError, SyntaxError, ZeroDivisionError):
        raise ConfigParseError(f"{where}: bad value {raw!r} for key {key!r}") from None


def _parse_entries(text: str, name: str) -> dict:
    if text.lstrip().startswith("{"):
        try:
            doc = json.loads(text)
        except json.JSONDecodeError as e:
            raise ConfigParseError(f"{name}:{e.lineno}: invalid JSON ({e.msg})") from None
        if not isinstance(doc, dict):
            raise ConfigParseError(f"{name}: expected a JSON object")
        out = {}
        for key, raw in doc.items():
            if key not in _KEYS:
                raise ConfigParseError(f"{name}: unknown key {key!r}")
            out[key] = _coerce(key, raw, f"{name}")
        return out
    out = {}
    for lineno, line in enumerate(text.splitlines(), start=1):
        body = line.split("#", 1)[0].strip()
        if not body:
            continue
        if "=" not in body:
            raise ConfigParseError(f"{name}:{lineno}: expected 'key = value', got {body!r}")
        key, raw = (s.strip() for s in body.split("=", 1))
        if key not in _KEYS:
            raise ConfigParseError(f"{name}:{lineno}: unknown key {key!r}")
        if key in out:
            raise ConfigParseError(f"{name}:{lineno}: duplicate key {key!r}")
        out[key] = _coerce(key, raw, f"{name}:{lineno}")
    return out


def parse_config(path) -> WaveguideConfig:
    """Read ``key = value`` lines (``#`` comments) or a JSON object.

    Values may use ``pi`` and basic arithmetic (``Z = pi``). Missing optional
    keys take the :class:`WaveguideConfig` defaults.
    """
    path = Path(path)
    try:
        text = path.read_text()
    except OSError as e:
        raise ConfigParseError(f"{path}: cannot read ({e.strerror})") from None
    entries = _parse_entries(text, str(path))
    missing = [k for k in ("k", "Z", "R") if k not in entries]
    if missing:
        raise ConfigParseError(f"{path}: missing required key(s) {', '.join(missing)}")
    return WaveguideConfig(**entries)


# commands ---------------------------------------------------------------

def _parse_incident(text: str, cfg: WaveguideConfig) -> IncidentSpec:
    parts = [p.strip() for p in text.split(",")]
    if len(parts) not in (3, 4):
        raise ValueError(f"--incident expects n,m,channel[,amp], got {text!r}")
    n, m = int(parts[0]), int(parts[1])
    amp = complex(parts[3].replace(" ", "")) if len(parts) == 4 else 1.0
    if abs(n) > cfg.N_max or not 0 <= m <= cfg.M_max:
        raise ValueError(f"mode ({n},{m}) outside the truncation N_max={cfg.N_max}, M_max={cfg.M_max}")
    return IncidentSpec.channel((n, m), parts[2], cfg, amp)


def _verify(args, cfg, out: Path) -> tuple[int, dict]:
    checks = run_suite(args.suite, cfg, threads=args.threads, perturb_symbol=args.perturb_symbol)
    report = format_report(checks)
    write_text(out / "verify_report.txt", report)
    sys.stdout.write(report)
    status = EXIT_OK if all(c.passed for c in checks) else EXIT_FAIL
    return status, {"suite": args.suite, "perturb_symbol": args.perturb_symbol}


def _symbol(args, cfg, out: Path) -> tuple[int, dict]:
    c = cfg.replace(N_max=args.nmax, M_max=args.mmax)
    modes = [(n, m) for m in c.axial_indices() for n in range(-c.N_max, c.N_max + 1)]
    write_csv(out / "symbol.csv", ("n", "m", "entry", "re", "im"), symbol_rows(symbol_table(c), modes))
    return EXIT_OK, {"nmax": args.nmax, "mmax": args.mmax, "radius": c.R}


_SOLVE_HEADER = ("case", "n", "m", "channel", "coef", "re", "im", "residual")
_LEDGER_HEADER = ("case", "k", "a", "eta", "n", "m", "channel", "radiated_flux", "dissipated_power",
                  "total_flux", "balance_residual", "cond")


def _solve(args, cfg, out: Path) -> tuple[int, dict]:
    if args.battery == (args.incident is not None):
        raise ValueError("solve needs exactly one of --battery or --incident")
    if args.battery:
        cases = [(c, battery_incidents(c)) for c in battery(tol=cfg.tol)]
        opts = {"battery": True}
    else:
        if cfg.a is None:
            raise ConfigError("solve needs an obstacle radius a")
        cases = [(cfg, [_parse_incident(args.incident, cfg)])]
        opts = {"incident": args.incident}
    rows, ledger, errors = [], [], []
    for case, (c, incs) in enumerate(cases):
        try:
            results = solve_scattering(incs, c, threads=args.threads)
        except (SingularSystemError, ConfigError) as e:
            errors.append(f"case {case}: {e}")
            continue
        for inc, res in zip(incs, results):
            n, m = res.mode
            ch = "TE" if inc.coeffs[2] == 0 else "TM"
            for name, v in zip(("A_plus", "A_minus", "B"), res.scattered):
                rows.append((case, n, m, ch, name, v.real, v.imag, res.bc_residual))
            bal = abs(res.total_flux - res.dissipated_power) / max(1.0, abs(res.dissipated_power))
            ledger.append((case, c.k, c.a, c.eta, n, m, ch, res.radiated_flux, res.dissipated_power,
                           res.total_flux, bal, res.cond))
            if res.bc_residual > c.tol:
                errors.append(f"case {case} mode ({n},{m}) {ch}: residual {res.bc_residual:.3e} > tol")
    write_csv(out / "solve.csv", _SOLVE_HEADER, rows)
    write_csv(out / "flux_ledger.csv", _LEDGER_HEADER, ledger)
    write_text(out / "solve_report.txt", "".join(e + "\n" for e in errors) + f"errors: {len(errors)}\n")
    for e in errors:
        print(e, file=sys.stderr)
    return (EXIT_FAIL if errors else EXIT_OK), opts


def _field(args, cfg, out: Path) -> tuple[int, dict]:
    if cfg.a is None:
        raise ConfigError("field needs an obstacle radius a (the grid spans a <= r <= R)")
    try:
        nr, nt, nz = (int(v) for v in args.grid.split(","))
    except ValueError:
        raise ValueError(f"--grid expects NR,NT,NZ, got {args.grid!r}") from None
    if min(nr, nt, nz) < 1:
        raise ValueError("grid sizes must be positive")
    inc = _parse_incident(args.incident, cfg)
    (res,) = solve_scattering([inc], cfg)
    n, m = inc.mode
    h = OutgoingCoefficients.from_dict({(n, m): res.scattered}, cfg.N_max, cfg.M_max, inc.parity)
    j = OutgoingCoefficients.from_dict({(n, m): inc.coeffs}, cfg.N_max, cfg.M_max, inc.parity)
    r = np.linspace(cfg.a, cfg.R, nr)
    theta = 2 * np.pi * np.arange(nt) / nt
    z = (np.arange(nz) + 0.5) * cfg.Z / nz
    E = field_grid(h, r, theta, z, cfg, "h") + field_grid(j, r, theta, z, cfg, "j")
    write_csv(out / "field.csv", FIELD_HEADER, field_rows(r, theta, z, E))
    return EXIT_OK, {"grid": [nr, nt, nz], "incident": args.incident}


def _norms(args, cfg, out: Path) -> tuple[int, dict]:
    trace = trace_from_csv(args.input, cfg.R)
    if args.space == "div":
        rep = div_norm(trace, cfg.R, cfg.Z)
    elif args.space == "curl":
        rep = curl_norm(trace, cfg.R, cfg.Z)
    else:
        rep = hs_norm(trace, args.order)
    text = f"space: {args.space}\norder: {args.order}\n" + rep.to_text()
    write_text(out / "norms.txt", text)
    sys.stdout.write(text)
    return EXIT_OK, {"input": str(args.input), "space": args.space, "order": args.order}


_COMMANDS = {"verify": _verify, "symbol": _symbol, "solve": _solve, "field": _field, "norms": _norms}


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="ppwg", description=__doc__.splitlines()[0])
    p.add_argument("--version", action="version", version=f"ppwg {__version__}")
    g = argparse.ArgumentParser(add_help=False)
    g.add_argument("--config", type=Path, help=f"config file (default: ${ENV_CONFIG} or built-in)")
    g.add_argument("--out", type=Path, default=Path("."), help="output directory")
    g.add_argument("--threads", type=int, default=1)
    g.add_argument("--tol", type=float, help="override the config tolerance")
    sub = p.add_subparsers(dest="command", required=True)

    v = sub.add_parser("verify", parents=[g], help="run identity checks")
    v.add_argument("--suite", default="all", choices=SUITES)
    v.add_argument("--perturb-symbol", type=float, default=0.0,
                   help="debug: relative perturbation of W11 in the transparent-boundary checks")

    s = sub.add_parser("symbol", parents=[g], help="dump the Calderón symbol")
    s.add_argument("--nmax", type=int, default=4)
    s.add_argument("--mmax", type=int, default=4)

    so = sub.add_parser("solve", parents=[g], help="scattering solves")
    so.add_argument("--battery", action="store_true")
    so.add_argument("--incident", metavar="n,m,channel,amp")

    f = sub.add_parser("field", parents=[g], help="total field on an annulus grid")
    f.add_argument("--grid", default="8,8,8", metavar="NR,NT,NZ")
    f.add_argument("--incident", default="0,0,TM,1", metavar="n,m,channel,amp")

    nm = sub.add_parser("norms", parents=[g], help="trace norms of a coefficient file")
    nm.add_argument("--input", type=Path, required=True)
    nm.add_argument("--space", choices=("div", "curl", "hs"), default="hs")
    nm.add_argument("--order", type=float, default=0.0)
    return p


def _load_config(args) -> WaveguideConfig:
    path = args.config or os.environ.get(ENV_CONFIG)
    cfg = parse_config(path) if path else WaveguideConfig(**DEFAULT_CONFIG)
    if args.tol is not None:
        cfg = cfg.replace(tol=args.tol)
    return cfg


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as e:
        return int(e.code) if e.code is not None else EXIT_OK
    if args.threads < 1:
        print("ppwg: error: --threads must be >= 1", file=sys.stderr)
        return EXIT_USAGE
    try:
        cfg = _load_config(args)
        out = args.out
        out.mkdir(parents=True, exist_ok=True)
        status, opts = _COMMANDS[args.command](args, cfg, out)
    except (ConfigError, ValueError, OSError) as e:
        print(f"ppwg: error: {e}", file=sys.stderr)
        return EXIT_USAGE
    write_text(out / "manifest.json", RunManifest(cfg, args.command, opts, out).to_json())
    return status


if __name__ == "__main__":
    sys.exit(main())
