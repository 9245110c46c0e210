"""Command-line front end: ``rmwave <command> [flags]``.

Exit codes: 0 success, 1 numerical failure (a JSON diagnostic is printed on
stdout and partial outputs are removed), 2 usage error.
"""
from __future__ import annotations

import argparse
import json
import math
import os
import shutil
import sys
import tempfile
from dataclasses import dataclass, field
from pathlib import Path
from typing import Sequence

import numpy as np

from rmwave import __version__, cycles, model, pde, wave
from rmwave.errors import ConfigurationError, DomainError, RMWaveError
from rmwave.model import ModelParams

__all__ = ["RunConfig", "UsageError", "parse_args", "run", "main", "dumps"]

COMMANDS = ("equilibria", "hopf-scan", "cycle", "heteroclinic", "wave-shoot", "reduced-cycle", "pde", "front-speed")
PDE_COMMANDS = ("pde", "front-speed")
WAVE_COMMANDS = ("wave-shoot", "reduced-cycle")

KINETIC_DEFAULTS = {"alpha": 1.0, "beta": 3.0, "gamma": 2.4, "d": 1.0}
PDE_DEFAULTS = {"alpha": 0.25, "beta": 2.0, "gamma": 4.0, "d": 1.0, "delta": 0.1}
DEFAULT_C = 10.0
DEFAULT_T_END = {"heteroclinic": 200.0, "wave-shoot": 300.0, "pde": 150.0, "front-speed": 150.0}


class UsageError(ConfigurationError):
    """Bad command line; maps to exit code 2."""


@dataclass(frozen=True)
class RunConfig:
    command: str
    params: ModelParams
    wave: wave.WaveParams | None = None
    pde: pde.PdeConfig | None = None
    seed: int = 0
    out_dir: Path = Path("rmwave-out")
    format: str = "csv"
    t_end: float | None = None
    gamma_min: float | None = None
    gamma_max: float | None = None
    steps: int | None = None
    extra: dict = field(default_factory=dict)

    def to_dict(self) -> dict:
        return {
            "command": self.command,
            "params": {"alpha": self.params.alpha, "beta": self.params.beta,
                       "gamma": self.params.gamma, "d": self.params.d},
            "wave": None if self.wave is None else {"c": self.wave.c, "epsilon": self.wave.epsilon},
            "pde": None if self.pde is None else self.pde.to_dict(),
            "seed": self.seed,
            "format": self.format,
            "t_end": self.t_end,
            "gamma_min": self.gamma_min,
            "gamma_max": self.gamma_max,
            "steps": self.steps,
            "version": __version__,
        }


# ---------------------------------------------------------------------------
# serialization


def _fmt_float(x: float) -> str:
    if not math.isfinite(x):
        return "null"
    return "%.17g" % x


def dumps(obj, indent: int = 0) -> str:
    """Deterministic JSON: sorted keys, floats with 17 significant digits."""
    pad = "  " * (indent + 1)
    end = "  " * indent
    if obj is None or isinstance(obj, bool):
        return {None: "null", True: "true", False: "false"}[obj]
    if isinstance(obj, (int, np.integer)):
        return str(int(obj))
    if isinstance(obj, (float, np.floating)):
        return _fmt_float(float(obj))
    if isinstance(obj, str):
        return json.dumps(obj)
    if isinstance(obj, Path):
        return dumps(str(obj), indent)
    if isinstance(obj, dict):
        if not obj:
            return "{}"
        items = [f"{pad}{dumps(str(k))}: {dumps(obj[k], indent + 1)}" for k in sorted(obj, key=str)]
        return "{\n" + ",\n".join(items) + "\n" + end + "}"
    if isinstance(obj, (list, tuple, np.ndarray)):
        seq = list(obj)
        if not seq:
            return "[]"
        if all(not isinstance(v, (dict, list, tuple, np.ndarray)) for v in seq):
            return "[" + ", ".join(dumps(v, indent + 1) for v in seq) + "]"
        return "[\n" + ",\n".join(pad + dumps(v, indent + 1) for v in seq) + "\n" + end + "]"
    raise TypeError(f"cannot serialize {type(obj).__name__}")


def _write_json(path: Path, obj) -> None:
    with open(path, "w", newline="\n") as fh:
        fh.write(dumps(obj) + "\n")


def _write_csv(path: Path, header: Sequence[str], rows) -> None:
    with open(path, "w", newline="\n") as fh:
        fh.write(",".join(header) + "\n")
        for row in rows:
            fh.write(",".join(_fmt_float(float(v)) if not isinstance(v, str) else v for v in row) + "\n")


def _write_table(cfg: RunConfig, tmp: Path, stem: str, header, rows) -> str:
    rows = [list(r) for r in rows]
    if cfg.format == "csv":
        name = f"{stem}.csv"
        _write_csv(tmp / name, header, rows)
    else:
        name = f"{stem}_table.json"
        _write_json(tmp / name, {"columns": list(header), "rows": rows})
    return name


# ---------------------------------------------------------------------------
# parsing


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(message)


def _positive(text: str) -> float:
    try:
        val = float(text)
    except ValueError:
        raise argparse.ArgumentTypeError(f"not a number: {text!r}")
    if not (math.isfinite(val) and val > 0):
        raise argparse.ArgumentTypeError(f"must be positive, got {text}")
    return val


def _count(text: str) -> int:
    try:
        val = int(text)
    except ValueError:
        raise argparse.ArgumentTypeError(f"not an integer: {text!r}")
    if val <= 0:
        raise argparse.ArgumentTypeError(f"must be positive, got {text}")
    return val


def _seed(text: str) -> int:
    try:
        val = int(text, 0)
    except ValueError:
        raise argparse.ArgumentTypeError(f"not an integer: {text!r}")
    if not 0 <= val < 2**64:
        raise argparse.ArgumentTypeError("seed must fit in 64 unsigned bits")
    return val


def _build_parser() -> argparse.ArgumentParser:
    common = _Parser(add_help=False)
    for name in ("alpha", "beta", "gamma", "d", "delta", "t-end"):
        common.add_argument(f"--{name}", type=_positive, default=None)
    speed = common.add_mutually_exclusive_group()
    speed.add_argument("--c", type=_positive, default=None)
    speed.add_argument("--epsilon", type=_positive, default=None)
    common.add_argument("--grid-n", type=_count, default=None)
    common.add_argument("--seed", type=_seed, default=0)
    common.add_argument("--out", default=None)
    common.add_argument("--format", choices=("csv", "json"), default="csv")

    parser = _Parser(prog="rmwave", description="Predator-prey kinetics, traveling waves and PDE runs.")
    parser.add_argument("--version", action="version", version=f"rmwave {__version__}")
    sub = parser.add_subparsers(dest="command", parser_class=_Parser)
    for cmd in COMMANDS:
        sp = sub.add_parser(cmd, parents=[common])
        if cmd == "hopf-scan":
            sp.add_argument("--gamma-min", type=_positive, default=None)
            sp.add_argument("--gamma-max", type=_positive, default=None)
            sp.add_argument("--steps", type=_count, default=101)
    return parser


def parse_args(argv: Sequence[str]) -> RunConfig:
    ns = _build_parser().parse_args(list(argv))
    if ns.command is None:
        raise UsageError("missing command")
    cmd = ns.command
    defaults = PDE_DEFAULTS if cmd in PDE_COMMANDS else KINETIC_DEFAULTS
    vals = {k: getattr(ns, k) if getattr(ns, k) is not None else defaults[k] for k in ("alpha", "beta", "gamma", "d")}
    try:
        params = ModelParams(**vals)
    except DomainError as exc:
        raise UsageError(str(exc)) from exc

    w = None
    if ns.epsilon is not None:
        if ns.epsilon > 1.0:
            raise UsageError("--epsilon must not exceed 1")
        w = wave.WaveParams.from_epsilon(ns.epsilon)
    elif ns.c is not None:
        w = wave.WaveParams.from_speed(ns.c)
    elif cmd in WAVE_COMMANDS:
        w = wave.WaveParams.from_speed(DEFAULT_C)

    t_end = ns.t_end if ns.t_end is not None else DEFAULT_T_END.get(cmd)
    out = ns.out if ns.out is not None else os.environ.get("RMWAVE_OUT", "rmwave-out")

    pcfg = None
    if cmd in PDE_COMMANDS:
        delta = ns.delta if ns.delta is not None else PDE_DEFAULTS["delta"]
        N = ns.grid_n if ns.grid_n is not None else 4000
        L = 1000.0
        dt = min(0.02, 0.25 * (L / N) ** 2 / max(params.d, 1.0))
        n_snap = 5 if cmd == "pde" else 30
        times = tuple(t_end * k / n_snap for k in range(n_snap + 1))
        try:
            pcfg = pde.PdeConfig(params=params, L=L, N=N, dt=dt, t_end=t_end, snapshot_times=times, delta=delta)
        except ConfigurationError as exc:
            raise UsageError(str(exc)) from exc

    gmin = gmax = steps = None
    if cmd == "hopf-scan":
        if not params.beta > 1.0:
            raise UsageError("hopf-scan needs beta > 1")
        star = model.hopf_gamma(params)
        gmin = ns.gamma_min if ns.gamma_min is not None else 0.5 * star
        gmax = ns.gamma_max if ns.gamma_max is not None else 1.5 * star
        if not gmin < gmax:
            raise UsageError("--gamma-min must be below --gamma-max")
        steps = ns.steps
    return RunConfig(cmd, params, w, pcfg, ns.seed, Path(out), ns.format, t_end, gmin, gmax, steps)


# ---------------------------------------------------------------------------
# commands


def _complex_pair(eigs):
    return [[float(z.real), float(z.imag)] for z in eigs]


def _cmd_equilibria(cfg: RunConfig, tmp: Path) -> dict:
    p = cfg.params
    eqs = model.equilibria(p)
    listing = [
        {"kind": e.kind.value, "U": e.location.U, "V": e.location.V,
         "eigenvalues": _complex_pair(e.eigenvalues), "classification": e.classification.value}
        for e in eqs
    ]
    summary = {"equilibria": listing}
    if p.beta > 1.0:
        summary["hopf_gamma"] = model.hopf_gamma(p)
        rng = model.dulac_exponent_range(p)
        summary["dulac_exponent_range"] = None if rng is None else list(rng)
    rows = [[e.kind.value, e.location.U, e.location.V, e.eigenvalues[0].real, e.eigenvalues[0].imag,
             e.eigenvalues[1].real, e.eigenvalues[1].imag, e.classification.value] for e in eqs]
    summary["table"] = _write_table(cfg, tmp, "equilibria",
                                    ["kind", "U", "V", "re1", "im1", "re2", "im2", "classification"], rows)
    return summary


def _cmd_hopf_scan(cfg: RunConfig, tmp: Path) -> dict:
    p = cfg.params
    rows = []
    for g in np.linspace(cfg.gamma_min, cfg.gamma_max, cfg.steps):
        q = p.replace(gamma=float(g))
        if not q.has_interior():
            continue
        lead = model.classify_interior(q).eigenvalues[0]
        rows.append([float(g), lead.real, abs(lead.imag)])
    bracket = None
    for a, b in zip(rows, rows[1:]):
        if a[1] < 0.0 <= b[1] or a[1] > 0.0 >= b[1]:
            bracket = [a[0], b[0]]
            break
    name = _write_table(cfg, tmp, "hopf_scan", ["gamma", "re_lambda", "im_lambda"], rows)
    return {"hopf_gamma": model.hopf_gamma(p), "sign_change_bracket": bracket, "table": name}


def _cycle_summary(c: cycles.LimitCycle | None) -> dict:
    if c is None:
        return {"exists": False}
    return {
        "exists": True,
        "period": c.period,
        "divergence_integral": c.divergence_integral,
        "closure_residual": c.closure_residual,
        "encloses": [c.encloses.U, c.encloses.V],
        "max_U": float(c.points[:, 0].max()),
    }


def _cmd_cycle(cfg: RunConfig, tmp: Path) -> dict:
    p = cfg.params
    if not p.has_interior():
        raise DomainError("no interior equilibrium")
    c = cycles.find_limit_cycle(model.kinetic_field(p), p, divergence=model.kinetic_divergence(p))
    summary = _cycle_summary(c)
    if c is not None:
        summary["table"] = _write_table(cfg, tmp, "cycle", ["t", "U", "V"],
                                        np.column_stack([c.times, c.points]))
    return summary


def _cmd_heteroclinic(cfg: RunConfig, tmp: Path) -> dict:
    p = cfg.params
    rhs = model.kinetic_field(p)
    cyc = cycles.find_limit_cycle(rhs, p, divergence=model.kinetic_divergence(p))
    res = cycles.heteroclinic_from_gamma(rhs, p, cfg.t_end, cycle=cyc, jac=model.jacobian(p, (p.gamma, 0.0)))
    eq = model.interior_equilibrium(p)
    back = cycles.backward_escape(rhs, p, (eq.U + 0.01, eq.V + 0.01))
    tr = res.trajectory
    name = _write_table(cfg, tmp, "heteroclinic", ["t", "U", "V"], np.column_stack([tr.times, tr.states]))
    return {
        "omega_limit": res.omega.value,
        "omega_distance": res.omega_distance,
        "seed_point": list(res.seed_point),
        "cycle": _cycle_summary(cyc),
        "backward_check": {"witnessed": back.witnessed, "outcome": back.outcome,
                           "escaped_component": back.escaped_component,
                           "u_max": back.u_max, "v_max": back.v_max},
        "table": name,
    }


def _cmd_wave_shoot(cfg: RunConfig, tmp: Path) -> dict:
    shot = wave.shoot_heteroclinic_4d(cfg.params, cfg.wave.c, cfg.t_end)
    tr = shot.trajectory
    name = _write_table(cfg, tmp, "wave_shoot", ["t", "u1", "u2", "v1", "v2"], np.column_stack([tr.times, tr.states]))
    return {
        "verdict": shot.verdict.value,
        "omega_distance": shot.omega_distance,
        "min_u1": shot.min_u1,
        "min_v1": shot.min_v1,
        "time_variable": "slow time t = -epsilon*tau",
        "table": name,
    }


def _cmd_reduced_cycle(cfg: RunConfig, tmp: Path) -> dict:
    p = cfg.params
    if not p.has_interior():
        raise DomainError("no interior equilibrium")
    c = wave.reduced_limit_cycle(p, cfg.wave.epsilon)
    summary = _cycle_summary(c)
    c0 = cycles.find_limit_cycle(model.kinetic_field(p), p, divergence=model.kinetic_divergence(p))
    summary["kinetic_period"] = None if c0 is None else c0.period
    if c is not None:
        summary["crosses_line"] = wave.cycle_crosses_line_check(c, p)
        summary["crossing_level"] = wave.crossing_level(p)
        if c0 is not None:
            summary["hausdorff_to_kinetic"] = cycles.hausdorff(c.points, c0.points)
        summary["table"] = _write_table(cfg, tmp, "reduced_cycle", ["t", "U", "V"],
                                        np.column_stack([c.times, c.points]))
    return summary


def _cmd_pde(cfg: RunConfig, tmp: Path) -> dict:
    snaps = pde.simulate(cfg.pde)
    for f in snaps:
        pde.write_snapshot_csv(f, tmp)
    pde.write_manifest(cfg.pde, snaps, tmp)
    return {"snapshots": [pde.snapshot_filename(f.t) for f in snaps], "manifest": "manifest.json",
            "min_value": float(min(min(f.U.min(), f.V.min()) for f in snaps))}


def _cmd_front_speed(cfg: RunConfig, tmp: Path) -> dict:
    p = cfg.params
    snaps = pde.simulate(cfg.pde)
    est = pde.estimate_front_speed(snaps, "V", params=p)
    lam = p.beta * p.gamma / (1.0 + p.gamma) - 1.0
    name = _write_table(cfg, tmp, "front_positions", ["t", "x"], est.positions)
    return {
        "level": est.level,
        "speed": est.speed,
        "r_squared": est.r_squared,
        "linear_spreading_speed": 2.0 * math.sqrt(lam) if lam > 0 else None,
        "table": name,
    }


_DISPATCH = {
    "equilibria": _cmd_equilibria,
    "hopf-scan": _cmd_hopf_scan,
    "cycle": _cmd_cycle,
    "heteroclinic": _cmd_heteroclinic,
    "wave-shoot": _cmd_wave_shoot,
    "reduced-cycle": _cmd_reduced_cycle,
    "pde": _cmd_pde,
    "front-speed": _cmd_front_speed,
}


def run(cfg: RunConfig) -> int:
    """Execute ``cfg``; artifacts are staged and moved into ``out_dir`` only on success."""
    out = Path(cfg.out_dir)
    try:
        out.mkdir(parents=True, exist_ok=True)
    except OSError as exc:
        print(f"rmwave: error: cannot create output directory {out}: {exc}", file=sys.stderr)
        return 2
    tmp = Path(tempfile.mkdtemp(prefix=".rmwave-", dir=out))
    try:
        summary = _DISPATCH[cfg.command](cfg, tmp)
        summary["config"] = cfg.to_dict()
        _write_json(tmp / f"{cfg.command.replace('-', '_')}.json", summary)
        for item in sorted(tmp.iterdir()):
            os.replace(item, out / item.name)
        return 0
    except (DomainError, ConfigurationError) as exc:
        print(f"rmwave: error: {exc}", file=sys.stderr)
        return 2
    except (RMWaveError, ArithmeticError) as exc:
        diag = {"error": type(exc).__name__, "message": str(exc), "command": cfg.command}
        if hasattr(exc, "t"):
            diag["t"] = exc.t
        print(json.dumps(diag, sort_keys=True))
        return 1
    finally:
        shutil.rmtree(tmp, ignore_errors=True)


def main(argv: Sequence[str] | None = None) -> int:
    try:
        cfg = parse_args(sys.argv[1:] if argv is None else argv)
    except UsageError as exc:
        print(f"rmwave: error: {exc}", file=sys.stderr)
        return 2
    return run(cfg)


if __name__ == "__main__":
    sys.exit(main())
