"""Method-of-lines solver for the diffusive predator-prey system on [0, L].

    U_t = d*U_xx + alpha*U*(gamma - U) - U*V/(1 + U)
    V_t = V_xx - V + beta*U*V/(1 + U)

with zero-flux boundaries, cell-centred second differences and classical RK4
in time.
"""
from __future__ import annotations

import json
import math
import os
from dataclasses import dataclass, field
from pathlib import Path
from typing import Sequence

import numpy as np
from scipy import stats

from rmwave import __version__, model
from rmwave.errors import BlowUpError, ConfigurationError, DomainError, NotEstimableError
from rmwave.model import ModelParams

__all__ = [
    "REFERENCE_PARAMS",
    "PdeConfig",
    "Field",
    "FrontSpeedEstimate",
    "laplacian_neumann",
    "cell_centres",
    "simulate",
    "front_position",
    "estimate_front_speed",
    "snapshot_filename",
    "write_snapshot_csv",
    "write_manifest",
]

# reference parameter set for the wave-train experiments
REFERENCE_PARAMS = ModelParams(alpha=0.25, beta=2.0, gamma=4.0, d=1.0)

NEGATIVE_TOL = 1e-9


@dataclass(frozen=True, eq=False)
class PdeConfig:
    params: ModelParams = REFERENCE_PARAMS
    L: float = 1000.0
    N: int = 4000
    dt: float = 0.02
    t_end: float = 150.0
    snapshot_times: tuple[float, ...] = ()
    delta: float = 0.1
    v0_amp: float = 0.1
    u0: np.ndarray | None = field(default=None, repr=False)
    v0: np.ndarray | None = field(default=None, repr=False)

    def __post_init__(self) -> None:
        if not (isinstance(self.N, (int, np.integer)) and self.N >= 16):
            raise ConfigurationError(f"N must be an integer >= 16, got {self.N!r}")
        for name in ("L", "dt", "delta"):
            val = getattr(self, name)
            if not (math.isfinite(val) and val > 0):
                raise ConfigurationError(f"{name} must be positive, got {val!r}")
        if not (math.isfinite(self.t_end) and self.t_end >= 0):
            raise ConfigurationError(f"t_end must be nonnegative, got {self.t_end!r}")
        if not self.v0_amp >= 0:
            raise ConfigurationError("v0_amp must be nonnegative")
        limit = 0.4 * self.dx**2 / max(self.params.d, 1.0)
        if self.dt > limit:
            raise ConfigurationError(f"dt={self.dt} exceeds the explicit stability bound {limit:.6g}")
        ts = tuple(float(t) for t in self.snapshot_times)
        if any(b <= a for a, b in zip(ts, ts[1:])):
            raise ConfigurationError("snapshot_times must be strictly increasing")
        if ts and (ts[0] < 0 or ts[-1] > self.t_end):
            raise ConfigurationError("snapshot_times must lie in [0, t_end]")
        object.__setattr__(self, "snapshot_times", ts)
        for name in ("u0", "v0"):
            arr = getattr(self, name)
            if arr is not None:
                arr = np.array(arr, dtype=float)
                if arr.shape != (self.N,):
                    raise ConfigurationError(f"{name} must have length N={self.N}")
                arr.setflags(write=False)
                object.__setattr__(self, name, arr)

    @property
    def dx(self) -> float:
        return self.L / self.N

    def x(self) -> np.ndarray:
        return cell_centres(self.L, self.N)

    def initial_state(self) -> tuple[np.ndarray, np.ndarray]:
        x = self.x()
        U = np.full(self.N, self.params.gamma) if self.u0 is None else self.u0.copy()
        V = self.v0_amp * np.exp(-self.delta * x) if self.v0 is None else self.v0.copy()
        return U, V

    def to_dict(self) -> dict:
        out = {
            "params": {"alpha": self.params.alpha, "beta": self.params.beta,
                       "gamma": self.params.gamma, "d": self.params.d},
            "L": self.L, "N": int(self.N), "dt": self.dt, "t_end": self.t_end,
            "snapshot_times": list(self.snapshot_times), "delta": self.delta, "v0_amp": self.v0_amp,
            "custom_u0": self.u0 is not None, "custom_v0": self.v0 is not None,
        }
        return out


@dataclass(frozen=True, eq=False)
class Field:
    t: float
    x: np.ndarray
    U: np.ndarray
    V: np.ndarray

    def component(self, name: str) -> np.ndarray:
        if name not in ("U", "V"):
            raise DomainError(f"component must be 'U' or 'V', got {name!r}")
        return self.U if name == "U" else self.V


@dataclass(frozen=True)
class FrontSpeedEstimate:
    level: float
    positions: tuple[tuple[float, float], ...]
    speed: float
    r_squared: float


def cell_centres(L: float, N: int) -> np.ndarray:
    return (np.arange(N) + 0.5) * (L / N)


def laplacian_neumann(values, dx: float) -> np.ndarray:
    """Second differences with mirror ghost cells (zero flux); acts on the last axis."""
    values = np.asarray(values, dtype=float)
    if values.shape[-1] < 3:
        raise DomainError("need at least 3 cells")
    pad = [(0, 0)] * (values.ndim - 1) + [(1, 1)]
    g = np.pad(values, pad, mode="edge")
    return (g[..., :-2] + g[..., 2:] - 2.0 * g[..., 1:-1]) / (dx * dx)


def _rates(y: np.ndarray, p: ModelParams, dx: float) -> np.ndarray:
    U, V = y
    lap = laplacian_neumann(y, dx)
    uv = U * V / (1.0 + U)
    out = np.empty_like(y)
    out[0] = p.d * lap[0] + p.alpha * U * (p.gamma - U) - uv
    out[1] = lap[1] - V + p.beta * uv
    return out


def simulate(cfg: PdeConfig) -> list[Field]:
    """RK4 time stepping; returns snapshots at the completed steps nearest the requested times."""
    p, dt, dx = cfg.params, cfg.dt, cfg.dx
    x = cfg.x()
    y = np.vstack(cfg.initial_state())
    n_steps = int(round(cfg.t_end / dt))
    wanted: dict[int, list[float]] = {}
    for t in cfg.snapshot_times:
        wanted.setdefault(min(int(round(t / dt)), n_steps), []).append(t)
    snaps: list[Field] = []

    def record(k):
        for _ in wanted.get(k, ()):
            U, V = y[0].copy(), y[1].copy()
            U.setflags(write=False)
            V.setflags(write=False)
            snaps.append(Field(k * dt, x, U, V))

    record(0)
    half = 0.5 * dt
    with np.errstate(over="ignore", invalid="ignore"):
        for k in range(1, n_steps + 1):
            k1 = _rates(y, p, dx)
            k2 = _rates(y + half * k1, p, dx)
            k3 = _rates(y + half * k2, p, dx)
            k4 = _rates(y + dt * k3, p, dx)
            y = y + (dt / 6.0) * (k1 + 2.0 * (k2 + k3) + k4)
            if k % 50 == 0 or k == n_steps or k in wanted:
                if not np.isfinite(y).all():
                    raise BlowUpError(f"non-finite field at t={k * dt}", k * dt)
            record(k)
    return snaps


def front_position(f: Field, component: str, level: float) -> float | None:
    """Rightmost linearly interpolated crossing of ``level``, or None."""
    vals = f.component(component) - level
    s = np.sign(vals)
    idx = np.nonzero(s[:-1] * s[1:] <= 0)[0]
    idx = idx[(vals[idx] != 0) | (vals[idx + 1] != 0)]
    if len(idx) == 0:
        return None
    i = idx[-1]
    a, b = vals[i], vals[i + 1]
    theta = a / (a - b) if a != b else 0.0
    return float(f.x[i] + theta * (f.x[i + 1] - f.x[i]))


def estimate_front_speed(
    snapshots: Sequence[Field],
    component: str = "V",
    level: float | None = None,
    *,
    params: ModelParams | None = None,
    min_r_squared: float = 0.99,
) -> FrontSpeedEstimate:
    """Least-squares front speed over the trailing half of the snapshots."""
    if level is None:
        level = 0.5 * model.interior_equilibrium(params or REFERENCE_PARAMS).V
    if len(snapshots) < 5:
        raise NotEstimableError("need at least 5 snapshots")
    window = snapshots[len(snapshots) // 2:]
    positions = []
    for f in window:
        xf = front_position(f, component, level)
        if xf is None:
            raise NotEstimableError(f"level {level} is not crossed at t={f.t}")
        right = f.x[-1] + 0.5 * (f.x[1] - f.x[0])
        if xf > 0.95 * right:
            raise NotEstimableError(f"front at x={xf} is within 5% of the right boundary (t={f.t})")
        positions.append((f.t, xf))
    t = np.array([q[0] for q in positions])
    xs = np.array([q[1] for q in positions])
    if np.ptp(xs) == 0.0:
        raise NotEstimableError("front does not move")
    fit = stats.linregress(t, xs)
    r2 = float(fit.rvalue**2)
    if not r2 >= min_r_squared:
        raise NotEstimableError(f"front motion is not linear (r^2={r2:.4f})")
    return FrontSpeedEstimate(float(level), tuple(positions), float(fit.slope), r2)


# ---------------------------------------------------------------------------
# output


def snapshot_filename(t: float) -> str:
    return f"snap_t{t:.10g}.csv"


def write_snapshot_csv(f: Field, directory: str | os.PathLike) -> Path:
    path = Path(directory) / snapshot_filename(f.t)
    with open(path, "w", newline="\n") as fh:
        fh.write("x,U,V\n")
        for row in zip(f.x, f.U, f.V):
            fh.write("%.17g,%.17g,%.17g\n" % row)
    return path


def write_manifest(cfg: PdeConfig, snapshots: Sequence[Field], directory: str | os.PathLike) -> Path:
    path = Path(directory) / "manifest.json"
    doc = {
        "version": __version__,
        "config": cfg.to_dict(),
        "snapshots": [snapshot_filename(f.t) for f in snapshots],
    }
    with open(path, "w", newline="\n") as fh:
        json.dump(doc, fh, sort_keys=True, indent=2)
        fh.write("\n")
    return path
