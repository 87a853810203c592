"""Command-line entry point.

    memtransfer simulate      --config run.json --out DIR
    memtransfer zero-dynamics --preset lambda --set control=constant:1 --out DIR
    memtransfer optimize      --config lambda.json --out DIR
    memtransfer presets list

Configuration is a JSON document; ``--set key=value`` overrides entries
(dotted keys address nested fields, values are parsed as JSON when possible).
Exit status: 0 on success, 2 on invalid input, 3 on numerical failure.
"""
from __future__ import annotations

import argparse
import copy
import json
import logging
import sys
from dataclasses import asdict, replace
from pathlib import Path

import numpy as np

from . import io
from .control import CostWeights, OptimizerOptions, optimize, select_t2
from .dynamics import propagate_correlation, propagate_eta
from .presets import DEFAULT_TARGETS, PRESETS, make_preset
from .signals import ControlSignal, GridMismatchError, PulseSignal, TimeGrid
from .system import InvariantError, MemorySystem
from .zero_dynamics import (
    TerminalCondition,
    build_zero_dynamics,
    drift_eigenvalues,
    rising_exponential,
    solve_backward,
)

log = logging.getLogger("memtransfer")

EXIT_OK, EXIT_INVALID, EXIT_NUMERICAL = 0, 2, 3

PRESET_DEFAULTS = {
    "lambda": {
        "grid": {"t0": -20.0, "t1": 0.0, "steps": 2000},
        "weights": {"alpha": 10.0, "beta": 1.0, "gamma": 1e4, "delta": 20.0},
        "t2": -2.6,
    },
    "network": {
        "grid": {"t0": -60.0, "t1": 0.0, "steps": 6000},
        "weights": {"alpha": 100.0, "beta": 0.1, "gamma": 1e4, "delta": 20.0},
        # no fixed t2: short scan of the default candidates, then refine the best
        "scan_iters": 150,
        "max_iters": 8000,
    },
}


class ConfigError(ValueError):
    pass


def _parse_value(text: str):
    try:
        return json.loads(text)
    except json.JSONDecodeError:
        return text


def apply_overrides(cfg: dict, sets: list[str]) -> dict:
    cfg = copy.deepcopy(cfg)
    for item in sets or []:
        if "=" not in item:
            raise ConfigError(f"--set expects KEY=VALUE, got {item!r}")
        key, value = item.split("=", 1)
        node = cfg
        parts = key.split(".")
        for p in parts[:-1]:
            node = node.setdefault(p, {})
            if not isinstance(node, dict):
                raise ConfigError(f"cannot set {key}: {p} is not an object")
        node[parts[-1]] = _parse_value(value)
    return cfg


def load_config(path, preset: str | None, sets: list[str]) -> dict:
    cfg: dict = {}
    if path is not None:
        try:
            cfg = json.loads(Path(path).read_text(encoding="utf-8"))
        except (OSError, json.JSONDecodeError) as exc:
            raise ConfigError(f"cannot read config {path}: {exc}") from exc
        cfg["_base_dir"] = str(Path(path).resolve().parent)
    if preset is not None:
        cfg["preset"] = preset
    return apply_overrides(cfg, sets)


def _resolve(cfg, p) -> Path:
    p = Path(p)
    if not p.is_absolute() and "_base_dir" in cfg and not p.exists():
        return Path(cfg["_base_dir"]) / p
    return p


def _decode_vector(v) -> np.ndarray:
    """Accept plain numbers or ``[re, im]`` pairs per entry."""
    out = []
    for e in v:
        if isinstance(e, (list, tuple)):
            if len(e) != 2:
                raise ConfigError("complex entries must be [re, im] pairs")
            out.append(complex(e[0], e[1]))
        else:
            out.append(complex(e))
    return np.array(out, dtype=complex)


def build_system(cfg) -> MemorySystem:
    if "system" in cfg:
        source = cfg["system"]
        if isinstance(source, str):
            return MemorySystem.from_json(_resolve(cfg, source))
        return MemorySystem.from_dict(source)
    name = cfg.get("preset")
    if name is None:
        raise ConfigError("config needs either 'preset' or 'system'")
    if name not in PRESETS:
        raise ConfigError(f"unknown preset {name!r}; available: {sorted(PRESETS)}")
    return make_preset(name, **cfg.get("preset_params", {}))


def _defaults(cfg) -> dict:
    return PRESET_DEFAULTS.get(cfg.get("preset"), {})


def build_grid(cfg) -> TimeGrid:
    g = {**_defaults(cfg).get("grid", {}), **cfg.get("grid", {})}
    try:
        return TimeGrid(g["t0"], g["t1"], g["steps"])
    except KeyError as exc:
        raise ConfigError(f"grid is missing {exc}") from exc


def build_target(cfg, sys) -> np.ndarray:
    target = cfg.get("target", DEFAULT_TARGETS.get(cfg.get("preset")))
    if target is None:
        raise ConfigError("config needs a 'target' vector")
    return _decode_vector(target)


def build_control(cfg, source, grid) -> ControlSignal:
    if isinstance(source, (int, float)):
        return ControlSignal.constant(grid, source)
    if not isinstance(source, str):
        raise ConfigError(f"bad control source {source!r}")
    if source.startswith("constant:"):
        return ControlSignal.constant(grid, float(source.split(":", 1)[1]))
    return io.read_control(_resolve(cfg, source), grid)


def build_pulse(cfg, source, grid) -> PulseSignal:
    if source in (None, "zero"):
        return PulseSignal.zeros(grid)
    return io.read_pulse(_resolve(cfg, source), grid)


def _out_dir(args, cfg) -> Path:
    out = Path(args.out or cfg.get("out", "."))
    out.mkdir(parents=True, exist_ok=True)
    return out


def cmd_simulate(args, cfg) -> int:
    sys_ = build_system(cfg)
    grid = build_grid(cfg)
    u = build_control(cfg, cfg.get("control", "constant:0"), grid)
    xi = build_pulse(cfg, cfg.get("pulse", "zero"), grid)
    eta0 = _decode_vector(cfg["eta0"]) if "eta0" in cfg else None
    eta, xi_out = propagate_eta(sys_, u, xi, eta0)
    corr = propagate_correlation(sys_, u, xi, eta) if eta0 is None or not np.any(eta0) else None
    if not np.all(np.isfinite(eta.states)):
        raise FloatingPointError("pulse dynamics diverged")
    out = _out_dir(args, cfg)
    io.write_trajectory(out / "eta.csv", eta)
    io.write_pulse(out / "xi_out.csv", xi_out)
    if corr is not None:
        io.write_photon_numbers(out / "photon_numbers.csv", corr)
    final = np.abs(eta.final) ** 2
    print("final mode populations:", " ".join(f"{p:.6f}" for p in final))
    return EXIT_OK


def cmd_zero_dynamics(args, cfg) -> int:
    sys_ = build_system(cfg)
    grid = build_grid(cfg)
    target = build_target(cfg, sys_)
    term = TerminalCondition.from_full_target(sys_, target, grid.t1)
    mode = cfg.get("mode", "ode")
    source = cfg.get("control", "constant:1")
    out = _out_dir(args, cfg)
    if mode == "closed-form":
        if not (isinstance(source, (int, float)) or str(source).startswith("constant:")):
            raise ConfigError("closed-form mode needs a constant control")
        u_const = float(source) if isinstance(source, (int, float)) else float(source.split(":", 1)[1])
        xi = rising_exponential(sys_, u_const, target, grid)
        lam = drift_eigenvalues(sys_, u_const)
        io.write_json(out / "xi.json", {
            "u": u_const,
            "eigenvalues": lam,
            "stable": bool(np.all(lam.real < 0)),
        })
    elif mode == "ode":
        u = build_control(cfg, source, grid)
        x = solve_backward(build_zero_dynamics(sys_), u, term)
        xi = PulseSignal(grid, x.states[:, 0])
        io.write_trajectory(out / "x.csv", x)
    else:
        raise ConfigError(f"unknown zero-dynamics mode {mode!r}")
    io.write_pulse(out / "xi.csv", xi)
    print(f"pulse norm^2 = {xi.norm_squared():.10f}")
    return EXIT_OK


def build_weights(cfg, t2) -> CostWeights:
    wd = {**_defaults(cfg).get("weights", {}), **cfg.get("weights", {})}
    try:
        return CostWeights(wd["alpha"], wd["beta"], wd["gamma"], wd["delta"], t2)
    except KeyError as exc:
        raise ConfigError(f"weights are missing {exc}") from exc


def cmd_optimize(args, cfg) -> int:
    sys_ = build_system(cfg)
    grid = build_grid(cfg)
    target = build_target(cfg, sys_)
    term = TerminalCondition.from_full_target(sys_, target, grid.t1)
    zd = build_zero_dynamics(sys_)
    u_init = build_control(cfg, cfg.get("u_init", "constant:1"), grid)
    opts = OptimizerOptions(
        tol=cfg.get("tol"),
        max_iters=int(cfg.get("max_iters", _defaults(cfg).get("max_iters", 5000))),
        log_every=int(cfg.get("log_every", 0)),
    )
    scan_iters = cfg.get("scan_iters", _defaults(cfg).get("scan_iters"))
    if "t2_candidates" in cfg:
        candidates = cfg["t2_candidates"]
    elif "t2" in cfg or "t2" in _defaults(cfg):
        candidates = [cfg.get("t2", _defaults(cfg).get("t2"))]
    else:
        candidates = None
    w = build_weights(cfg, candidates[0] if candidates else 0.5 * (grid.t0 + grid.t1))
    if candidates is not None and len(candidates) == 1:
        w.check_window(grid)
        result = optimize(zd, term, w, u_init, opts)
        result.candidate_costs = {w.t2: result.cost}
    else:
        scan, refine = opts, None
        if scan_iters is not None:
            scan, refine = replace(opts, max_iters=int(scan_iters)), opts
        _, result = select_t2(u_init, zd, term, w, candidates, scan,
                              workers=int(cfg.get("workers", 1)), refine=refine)
    if not np.isfinite(result.cost):
        raise FloatingPointError("optimization produced a non-finite cost")
    out = _out_dir(args, cfg)
    io.write_control(out / "u_opt.csv", result.u_opt)
    io.write_pulse(out / "xi_opt.csv", result.xi_opt)
    summary = result.to_dict()
    summary["weights"] = asdict(build_weights(cfg, result.t2_used))
    summary["grid"] = asdict(grid)
    io.write_json(out / "result.json", summary)
    print(f"J = {result.cost:.10g} after {result.iterations} iterations "
          f"({result.termination_reason}), t2 = {result.t2_used:g}")
    return EXIT_OK


def cmd_presets(args, cfg) -> int:
    if args.action != "list":
        raise ConfigError(f"unknown presets action {args.action!r}")
    for name, (_, params) in PRESETS.items():
        print(f"{name}: {asdict(params())}")
    return EXIT_OK


COMMANDS = {
    "simulate": cmd_simulate,
    "zero-dynamics": cmd_zero_dynamics,
    "optimize": cmd_optimize,
    "presets": cmd_presets,
}


def make_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="memtransfer", description=__doc__.splitlines()[0])
    sub = ap.add_subparsers(dest="command", required=True)
    for name in ("simulate", "zero-dynamics", "optimize"):
        p = sub.add_parser(name)
        p.add_argument("--config", help="JSON configuration file")
        p.add_argument("--preset", help="preset system name (lambda, network)")
        p.add_argument("--out", help="output directory")
        p.add_argument("--set", action="append", default=[], metavar="KEY=VALUE",
                       help="override a configuration entry (repeatable)")
        p.add_argument("-v", "--verbose", action="store_true")
    p = sub.add_parser("presets")
    p.add_argument("action", choices=["list"])
    return ap


def main(argv=None) -> int:
    args = make_parser().parse_args(argv)
    logging.basicConfig(
        level=logging.INFO if getattr(args, "verbose", False) else logging.WARNING,
        format="%(levelname)s %(name)s: %(message)s",
    )
    try:
        cfg = {} if args.command == "presets" else load_config(args.config, args.preset, args.set)
        return COMMANDS[args.command](args, cfg)
    except (FloatingPointError, np.linalg.LinAlgError) as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL
    except (ConfigError, InvariantError, GridMismatchError, ValueError, KeyError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INVALID


if __name__ == "__main__":
    sys.exit(main())
