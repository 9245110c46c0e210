"""Explicit integration of autonomous ODEs.

Classical RK4 for fixed steps, a Dormand-Prince 5(4) pair with PI step-size
control for adaptive runs, cubic Hermite dense output between accepted steps
and section-crossing detection.
"""
from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field
from typing import Callable, Iterable, Sequence

import numpy as np

from rmwave.errors import DivergenceError, DomainError, GrazingError, StiffnessError

__all__ = [
    "Field",
    "StepStats",
    "Trajectory",
    "Orientation",
    "Section",
    "Crossing",
    "step_rk4",
    "dp_step",
    "integrate_adaptive",
    "reverse",
    "find_crossings",
    "hermite",
]

Field = Callable[[np.ndarray], np.ndarray]

# Dormand-Prince 5(4) tableau
_C = (0.0, 1 / 5, 3 / 10, 4 / 5, 8 / 9, 1.0, 1.0)
_A = (
    (),
    (1 / 5,),
    (3 / 40, 9 / 40),
    (44 / 45, -56 / 15, 32 / 9),
    (19372 / 6561, -25360 / 2187, 64448 / 6561, -212 / 729),
    (9017 / 3168, -355 / 33, 46732 / 5247, 49 / 176, -5103 / 18656),
    (35 / 384, 0.0, 500 / 1113, 125 / 192, -2187 / 6784, 11 / 84),
)
_B5 = np.array([35 / 384, 0.0, 500 / 1113, 125 / 192, -2187 / 6784, 11 / 84, 0.0])
_B4 = np.array([5179 / 57600, 0.0, 7571 / 16695, 393 / 640, -92097 / 339200, 187 / 2100, 1 / 40])
_E = _B5 - _B4
_A_ROWS = np.zeros((7, 7))
for _i, _row in enumerate(_A):
    _A_ROWS[_i, : len(_row)] = _row

_SAFETY = 0.9
_FAC_MIN = 0.2
_FAC_MAX = 5.0
_PI_ALPHA = 0.7 / 5.0
_PI_BETA = 0.4 / 5.0


@dataclass(frozen=True)
class StepStats:
    accepted: int
    rejected: int
    final_step: float


@dataclass(frozen=True)
class Trajectory:
    """Accepted states of an integration; immutable once built.

    ``derivs`` holds the vector field at every recorded state and is what the
    Hermite interpolant uses between nodes.
    """

    times: np.ndarray
    states: np.ndarray
    derivs: np.ndarray
    step_stats: StepStats = field(default_factory=lambda: StepStats(0, 0, 0.0))
    terminated: bool = False

    def __post_init__(self) -> None:
        for arr in (self.times, self.states, self.derivs):
            arr.setflags(write=False)
        if len(self.times) != len(self.states):
            raise ValueError("times and states must have the same length")

    def __len__(self) -> int:
        return len(self.times)

    @property
    def t_final(self) -> float:
        return float(self.times[-1])

    @property
    def y_final(self) -> np.ndarray:
        return self.states[-1]

    def interpolate(self, t: float) -> np.ndarray:
        """Cubic Hermite dense output at time ``t``."""
        ts = self.times
        if t <= ts[0]:
            return self.states[0].copy()
        if t >= ts[-1]:
            return self.states[-1].copy()
        k = int(np.searchsorted(ts, t, side="right")) - 1
        h = ts[k + 1] - ts[k]
        return hermite(self.states[k], self.derivs[k], self.states[k + 1], self.derivs[k + 1], h, (t - ts[k]) / h)

    def sample(self, times: Iterable[float]) -> np.ndarray:
        return np.array([self.interpolate(t) for t in times])


def hermite(y0, f0, y1, f1, h: float, theta: float) -> np.ndarray:
    t = theta
    h00 = (1 + 2 * t) * (1 - t) ** 2
    h10 = t * (1 - t) ** 2
    h01 = t * t * (3 - 2 * t)
    h11 = t * t * (t - 1)
    return h00 * y0 + h10 * h * f0 + h01 * y1 + h11 * h * f1


def _eval(rhs: Field, y: np.ndarray) -> np.ndarray:
    return np.asarray(rhs(y), dtype=float)


def step_rk4(rhs: Field, y, h: float) -> np.ndarray:
    """One classical fourth-order Runge-Kutta step."""
    if not h > 0:
        raise DomainError("step size must be positive")
    y = np.asarray(y, dtype=float)
    k1 = _eval(rhs, y)
    k2 = _eval(rhs, y + 0.5 * h * k1)
    k3 = _eval(rhs, y + 0.5 * h * k2)
    k4 = _eval(rhs, y + h * k3)
    out = y + (h / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)
    if not np.all(np.isfinite(out)):
        raise DivergenceError("non-finite state in RK4 step")
    return out


def dp_step(rhs: Field, y: np.ndarray, h: float, f0: np.ndarray | None = None):
    """Dormand-Prince step; returns (y_new, f_new, error_vector)."""
    k = np.empty((7, y.shape[0]))
    k[0] = f0 if f0 is not None else _eval(rhs, y)
    for i in range(1, 7):
        acc = y + h * (_A_ROWS[i][:i] @ k[:i])
        k[i] = _eval(rhs, acc)
    return acc, k[6], h * (_E @ k)


def reverse(rhs: Field) -> Field:
    """Time-reversed vector field."""
    return lambda y: -np.asarray(rhs(y), dtype=float)


def _initial_step(rhs, y0, f0, t_span, rtol, atol) -> float:
    scale = atol + rtol * np.abs(y0)
    d0 = np.sqrt(np.mean((y0 / scale) ** 2))
    d1 = np.sqrt(np.mean((f0 / scale) ** 2))
    h0 = 1e-6 if d0 < 1e-5 or d1 < 1e-5 else 0.01 * d0 / d1
    h0 = min(h0, t_span)
    y1 = y0 + h0 * f0
    f1 = _eval(rhs, y1)
    d2 = np.sqrt(np.mean(((f1 - f0) / scale) ** 2)) / h0
    if max(d1, d2) <= 1e-15:
        h1 = max(1e-6, h0 * 1e-3)
    else:
        h1 = (0.01 / max(d1, d2)) ** (1.0 / 5.0)
    return min(100 * h0, h1, t_span)


def integrate_adaptive(
    rhs: Field,
    y0,
    t_end: float,
    rel_tol: float = 1e-8,
    abs_tol: float = 1e-10,
    *,
    max_step: float | None = None,
    stops: Sequence[float] | None = None,
    stop_when: Callable[[float, np.ndarray], bool] | None = None,
    h0: float | None = None,
) -> Trajectory:
    """Integrate y' = rhs(y) from t = 0 to ``t_end``.

    ``stops`` are times the integrator lands on exactly (they are recorded
    like any accepted step). ``stop_when(t, y)`` ends the run early after the
    first accepted step for which it returns True.
    """
    if not (0.0 < rel_tol <= 1e-2 and 0.0 < abs_tol <= 1e-2):
        raise DomainError("tolerances must lie in (0, 1e-2]")
    if t_end < 0.0:
        raise DomainError("t_end must be nonnegative")
    y = np.array(y0, dtype=float)
    f = _eval(rhs, y)
    times, states, derivs = [0.0], [y.copy()], [f.copy()]
    if t_end == 0.0:
        return Trajectory(np.array(times), np.array(states), np.array(derivs), StepStats(0, 0, 0.0))
    if not np.all(np.isfinite(f)):
        raise DivergenceError("non-finite vector field at the initial state")

    n_dim = y.shape[0]
    hmax = t_end if max_step is None else min(max_step, t_end)
    stop_list = sorted({float(s) for s in (() if stops is None else stops) if 0.0 < s < t_end}) + [t_end]
    next_stop = 0
    h = h0 if h0 is not None else _initial_step(rhs, y, f, t_end, rel_tol, abs_tol)
    h = min(h, hmax)
    h_floor = 1e-14 * t_end
    t = 0.0
    err_prev = 1.0
    accepted = rejected = 0
    terminated = False

    while t < t_end:
        target = stop_list[next_stop]
        h_try = h
        landing = t + 1.01 * h_try >= target
        if landing:
            h_try = target - t
        if h_try < h_floor:
            raise StiffnessError(f"step size underflow at t={t:.6g} (h={h_try:.3g})")
        y_new, f_new, err_vec = dp_step(rhs, y, h_try, f)
        scale = abs_tol + rel_tol * np.maximum(np.abs(y), np.abs(y_new))
        r = err_vec / scale
        err = math.sqrt(float(r @ r) / n_dim)
        if not math.isfinite(err) or not math.isfinite(float(f_new @ f_new)):
            rejected += 1
            h = 0.25 * h_try
            if h < h_floor:
                raise DivergenceError(f"non-finite state near t={t:.6g}")
            continue
        if err <= 1.0:
            t = target if landing else t + h_try
            y, f = y_new, f_new
            times.append(t)
            states.append(y.copy())
            derivs.append(f.copy())
            accepted += 1
            if landing:
                next_stop += 1
            if err == 0.0:
                fac = _FAC_MAX
            else:
                fac = _SAFETY * err ** (-_PI_ALPHA) * max(err_prev, 1e-4) ** _PI_BETA
                fac = min(_FAC_MAX, max(_FAC_MIN, fac))
            err_prev = err
            if landing:
                # a clipped step says little about the natural step size
                h = min(hmax, max(h, h_try * fac))
            else:
                h = min(hmax, h_try * fac)
            if stop_when is not None and stop_when(t, y):
                terminated = True
                break
        else:
            rejected += 1
            fac = max(_FAC_MIN, _SAFETY * err ** (-1.0 / 5.0))
            h = h_try * min(1.0, fac)
    return Trajectory(
        np.array(times),
        np.array(states),
        np.array(derivs),
        StepStats(accepted, rejected, float(h)),
        terminated,
    )


class Orientation(enum.Enum):
    INCREASING = "Increasing"
    DECREASING = "Decreasing"
    BOTH = "Both"


@dataclass(frozen=True)
class Section:
    """Hyperplane {y : <normal, y> = offset} with a crossing orientation."""

    normal: tuple[float, ...]
    offset: float = 0.0
    orientation: Orientation = Orientation.BOTH

    def __post_init__(self) -> None:
        n = np.asarray(self.normal, dtype=float)
        if n.ndim != 1 or not np.any(n != 0.0):
            raise DomainError("section normal must be a nonzero vector")
        object.__setattr__(self, "normal", tuple(float(x) for x in n))
        object.__setattr__(self, "orientation", Orientation(self.orientation))

    def value(self, y) -> float:
        return float(np.dot(self.normal, y) - self.offset)

    def values(self, ys: np.ndarray) -> np.ndarray:
        return ys @ np.asarray(self.normal) - self.offset

    def matches(self, g0: float, g1: float) -> bool:
        if self.orientation is Orientation.INCREASING:
            return g0 < 0.0 <= g1
        if self.orientation is Orientation.DECREASING:
            return g0 > 0.0 >= g1
        return (g0 < 0.0 <= g1) or (g0 > 0.0 >= g1)


@dataclass(frozen=True)
class Crossing:
    t: float
    y: np.ndarray

    def __iter__(self):
        yield self.t
        yield self.y


_RESIDUAL_TOL = 1e-10
_GRAZING_TOL = 1e-9


def _refine_crossing(rhs, sec, traj, k):
    t0, t1 = traj.times[k], traj.times[k + 1]
    y0, y1 = traj.states[k], traj.states[k + 1]
    f0, f1 = traj.derivs[k], traj.derivs[k + 1]
    h = t1 - t0
    g0 = sec.value(y0)
    lo, hi = 0.0, 1.0
    # bracket on the dense interpolant
    for _ in range(60):
        mid = 0.5 * (lo + hi)
        gm = sec.value(hermite(y0, f0, y1, f1, h, mid))
        if (gm < 0.0) == (g0 < 0.0) and gm != 0.0:
            lo = mid
        else:
            hi = mid
        if abs(gm) <= 0.1 * _RESIDUAL_TOL:
            break
    theta = 0.5 * (lo + hi)
    y_interp = hermite(y0, f0, y1, f1, h, theta)
    # polish on true sub-steps of the integrator from the left node
    y_best, theta_best, g_best = y_interp, theta, sec.value(y_interp)
    for _ in range(8):
        if theta <= 0.0:
            break
        y_try, f_try, _ = dp_step(rhs, y0, theta * h, f0)
        g = sec.value(y_try)
        if abs(g) < abs(g_best) or y_best is y_interp:
            y_best, theta_best, g_best = y_try, theta, g
        dg = float(np.dot(sec.normal, f_try)) * h
        if abs(g) <= 1e-3 * _RESIDUAL_TOL or dg == 0.0:
            break
        theta = min(1.0, max(0.0, theta - g / dg))
    if abs(g_best) > _RESIDUAL_TOL:
        y_best, theta_best = y_interp, 0.5 * (lo + hi)
    slope = float(np.dot(sec.normal, _eval(rhs, y_best)))
    if abs(slope) < _GRAZING_TOL:
        raise GrazingError(f"tangential crossing at t={t0 + theta_best * h:.12g} (slope {slope:.3g})")
    return Crossing(float(t0 + theta_best * h), y_best)


def find_crossings(rhs: Field, traj: Trajectory, sec: Section) -> list[Crossing]:
    """All oriented crossings of ``sec`` along ``traj`` in time order."""
    g = sec.values(traj.states)
    out = []
    for k in range(len(g) - 1):
        if sec.matches(g[k], g[k + 1]):
            if g[k + 1] == 0.0 and k + 2 < len(g) and sec.matches(g[k + 1], g[k + 2]):
                continue
            if g[k + 1] == 0.0:
                y = traj.states[k + 1].copy()
                slope = float(np.dot(sec.normal, traj.derivs[k + 1]))
                if abs(slope) < _GRAZING_TOL:
                    raise GrazingError(f"tangential crossing at t={traj.times[k + 1]:.12g}")
                out.append(Crossing(float(traj.times[k + 1]), y))
            else:
                out.append(_refine_crossing(rhs, sec, traj, k))
    return out
