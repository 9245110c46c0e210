"""Attractor-level analysis of planar predator-prey fields.

Poincare maps on the ray {U = U_eq, V > V_eq}, limit-cycle location, the
divergence (stability) integral, global-stability and persistence probes, and
the heteroclinic orbit leaving (gamma, 0).

The functions accept any planar field with the kinetic equilibria, so they are
reused unchanged for the reduced traveling-wave system.
"""
from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field
from typing import Callable

import numpy as np
from scipy.spatial import cKDTree

from rmwave import model
from rmwave.errors import (
    ConfigurationError,
    ConvergenceError,
    DomainError,
    IntegrationError,
    NoReturnError,
    SpectralError,
)
from rmwave.model import ModelParams, PlanarState
from rmwave.ode import Orientation, Section, Trajectory, find_crossings, integrate_adaptive, reverse

__all__ = [
    "Rng64",
    "InvariantTriangle",
    "LimitCycle",
    "ProbeReport",
    "PersistenceReport",
    "OmegaKind",
    "HeteroclinicResult",
    "BackwardReport",
    "invariant_triangle",
    "kinetic_section",
    "poincare_map",
    "find_limit_cycle",
    "cycle_stability_integral",
    "numerical_divergence",
    "curve_distance",
    "hausdorff",
    "classify_omega",
    "global_stability_probe",
    "persistence_floor",
    "heteroclinic_from_gamma",
    "backward_escape",
    "no_heteroclinic_from_origin_check",
]

PlanarField = Callable[[np.ndarray], np.ndarray]

EQUILIBRIUM_TOL = 1e-5
CYCLE_TOL = 1e-3


class Rng64:
    """64-bit linear congruential generator (Knuth's MMIX constants)."""

    _A = 6364136223846793005
    _C = 1442695040888963407
    _MASK = (1 << 64) - 1

    def __init__(self, seed: int):
        self.state = int(seed) & self._MASK

    def next_u64(self) -> int:
        self.state = (self._A * self.state + self._C) & self._MASK
        return self.state

    def uniform(self) -> float:
        """Float in [0, 1) from the top 53 bits."""
        return (self.next_u64() >> 11) * (1.0 / (1 << 53))


# ---------------------------------------------------------------------------
# invariant region


@dataclass(frozen=True)
class InvariantTriangle:
    R: float
    beta: float

    def contains(self, s, tol: float = 0.0) -> bool:
        u, v = (s.U, s.V) if isinstance(s, PlanarState) else s
        return u >= -tol and v >= -tol and self.beta * u + v <= self.R + tol

    def sample_interior(self, rng: Rng64, margin: float = 1e-3) -> np.ndarray:
        """Uniform point of the triangle with both coordinates >= margin * R."""
        while True:
            a, b = rng.uniform(), rng.uniform()
            if a + b > 1.0:
                a, b = 1.0 - a, 1.0 - b
            u, v = a * self.R / self.beta, b * self.R
            if min(u, v) >= margin * self.R:
                return np.array([u, v])


def _hypotenuse_negative(p: ModelParams, R: float, n: int = 1000) -> bool:
    u = np.linspace(0.0, R / p.beta, n)
    v = R - p.beta * u
    r = u / (1.0 + u)
    F = p.alpha * u * (p.gamma - u) - r * v
    G = v * (p.beta * r - 1.0)
    return bool(np.all(p.beta * F + G < 0.0))


def invariant_triangle(p: ModelParams) -> InvariantTriangle:
    """Smallest R of the doubling sequence from beta*(gamma+1)+1 with beta*F+G < 0 on the hypotenuse."""
    R = p.beta * (p.gamma + 1.0) + 1.0
    for _ in range(61):
        if _hypotenuse_negative(p, R):
            return InvariantTriangle(R, p.beta)
        R *= 2.0
    raise ConfigurationError("no forward-invariant triangle found after 60 doublings")


# ---------------------------------------------------------------------------
# Poincare map


def kinetic_section(p: ModelParams) -> Section:
    """The ray {U = U_eq} crossed with U decreasing (i.e. V > V_eq)."""
    eq = model.interior_equilibrium(p)
    return Section((-1.0, 0.0), -eq.U, Orientation.INCREASING)


def _first_return(rhs, sec: Section, y0, t_max, rtol, atol, min_time=1e-8):
    armed = [False]

    def stop(t, y):
        g = sec.value(y)
        if sec.orientation is Orientation.INCREASING:
            if g < 0.0:
                armed[0] = True
            return armed[0] and g >= 0.0
        if sec.orientation is Orientation.DECREASING:
            if g > 0.0:
                armed[0] = True
            return armed[0] and g <= 0.0
        return t > min_time and g * sec.value(y0) <= 0.0 and g != sec.value(y0)

    traj = integrate_adaptive(rhs, y0, t_max, rtol, atol, stop_when=stop)
    for c in find_crossings(rhs, traj, sec):
        if c.t > min_time:
            return c, traj
    raise NoReturnError(f"no return to the section before t_max={t_max}")


def poincare_map(
    rhs: PlanarField,
    sec: Section,
    s,
    t_max: float = 1000.0,
    *,
    rel_tol: float = 1e-12,
    abs_tol: float = 1e-14,
) -> tuple[np.ndarray, float]:
    """First oriented return of the orbit through ``s`` to ``sec``."""
    y0 = np.asarray(s.as_array() if isinstance(s, PlanarState) else s, dtype=float)
    if abs(sec.value(y0)) > 1e-10:
        raise DomainError("starting point is not on the section")
    c, _ = _first_return(rhs, sec, y0, t_max, rel_tol, abs_tol)
    return c.y, c.t


# ---------------------------------------------------------------------------
# limit cycles


@dataclass(frozen=True)
class LimitCycle:
    times: np.ndarray
    points: np.ndarray
    period: float
    closure_residual: float
    divergence_integral: float
    encloses: PlanarState
    rhs: PlanarField | None = field(default=None, repr=False, compare=False)

    @property
    def section_point(self) -> np.ndarray:
        return self.points[0]

    def amplitude(self) -> tuple[float, float]:
        """Max |U - U_eq| and |V - V_eq| over the orbit."""
        d = np.abs(self.points - self.encloses.as_array())
        return float(d[:, 0].max()), float(d[:, 1].max())

    def winding_number(self) -> int:
        rel = self.points - self.encloses.as_array()
        ang = np.unwrap(np.arctan2(rel[:, 1], rel[:, 0]))
        return int(round((ang[-1] - ang[0]) / (2.0 * math.pi)))


def numerical_divergence(rhs: PlanarField, h: float = 1e-6) -> Callable[[np.ndarray], float]:
    """Central-difference divergence of a planar field."""

    def div(y) -> float:
        y = np.asarray(y, dtype=float)
        eu, ev = np.array([h, 0.0]), np.array([0.0, h])
        return float((rhs(y + eu)[0] - rhs(y - eu)[0] + rhs(y + ev)[1] - rhs(y - ev)[1]) / (2.0 * h))

    return div


def cycle_stability_integral(div: Callable[[np.ndarray], float], cycle: LimitCycle) -> float:
    """Integral of the divergence over one period of ``cycle``.

    With the generating field attached the integral is re-integrated as an
    extra ODE component along the orbit; otherwise the periodic trapezoid rule
    on the (uniform) samples is used.
    """
    if cycle.rhs is not None:
        rhs = cycle.rhs

        def aug(y):
            out = np.empty(3)
            out[:2] = rhs(y[:2])
            out[2] = div(y[:2])
            return out

        y0 = np.append(cycle.points[0], 0.0)
        traj = integrate_adaptive(aug, y0, cycle.period, 1e-12, 1e-14)
        return float(traj.y_final[2])
    vals = np.array([div(y) for y in cycle.points])
    return float(np.trapezoid(vals, cycle.times))


def _sample_orbit(rhs, y0, T, n, rtol=1e-12, atol=1e-14):
    stops = np.linspace(0.0, T, n + 1)
    traj = integrate_adaptive(rhs, y0, T, rtol, atol, stops=stops[1:-1])
    keep = np.isin(traj.times, stops)
    return traj.times[keep], traj.states[keep]


def find_limit_cycle(
    rhs: PlanarField,
    p: ModelParams,
    tol: float = 1e-10,
    *,
    start=None,
    divergence: Callable[[np.ndarray], float] | None = None,
    n_samples: int = 2000,
    max_iter: int = 500,
    t_max: float = 2000.0,
    damped_steps: int = 3,
) -> LimitCycle | None:
    """Attracting periodic orbit around the interior equilibrium, or None.

    The first-return map on {U = U_eq, V > V_eq} is iterated a few times and
    then solved for its fixed point by secant steps on P(V) - V. Iterates
    that collapse onto the equilibrium mean there is no cycle.
    """
    eq = model.interior_equilibrium(p)
    sec = kinetic_section(p)
    rtol, atol = 1e-12, 1e-14
    eq_floor = 1e-6 * (1.0 + eq.V)

    if start is None:
        V = eq.V + 0.5 * max(eq.V, 1.0)
    else:
        y = np.asarray(start.as_array() if isinstance(start, PlanarState) else start, dtype=float)
        if abs(sec.value(y)) <= 1e-10 and y[1] > eq.V:
            V = float(y[1])
        else:
            c, _ = _first_return(rhs, sec, y, t_max, rtol, atol)
            V = float(c.y[1])

    def P(V):
        c, _ = _first_return(rhs, sec, np.array([eq.U, V]), t_max, rtol, atol)
        return float(c.y[1]), c.t

    hist: list[tuple[float, float]] = []
    fixed = None
    for it in range(max_iter):
        Vn, T = P(V)
        D = Vn - V
        if abs(D) <= tol:
            fixed = (V, T)
            break
        if Vn - eq.V <= eq_floor or V - eq.V <= eq_floor:
            return None
        hist.append((V, D))
        if it >= damped_steps and len(hist) >= 2:
            (V1, D1), (V2, D2) = hist[-2], hist[-1]
            if D2 != D1:
                Vs = V2 - D2 * (V2 - V1) / (D2 - D1)
                if Vs - eq.V > eq_floor and abs(Vs - V2) <= 4.0 * abs(D2) + 10 * tol:
                    V = Vs
                    continue
        V = Vn
    if fixed is None:
        raise ConvergenceError(f"limit-cycle search did not converge in {max_iter} iterations")

    V, T = fixed
    times, pts = _sample_orbit(rhs, np.array([eq.U, V]), T, n_samples, rtol, atol)
    closure = float(np.linalg.norm(pts[-1] - pts[0]))
    cyc = LimitCycle(times, pts, T, closure, float("nan"), eq, rhs)
    div = divergence if divergence is not None else numerical_divergence(rhs)
    integral = cycle_stability_integral(div, cyc)
    return LimitCycle(times, pts, T, closure, integral, eq, rhs)


# ---------------------------------------------------------------------------
# curve geometry


def _densify(curve: np.ndarray) -> np.ndarray:
    return np.asarray(curve, dtype=float)


def curve_distance(points: np.ndarray, curve: np.ndarray) -> float:
    """max over ``points`` of the distance to the polyline ``curve``."""
    points = np.atleast_2d(np.asarray(points, dtype=float))
    curve = _densify(curve)
    if len(curve) == 1:
        return float(np.max(np.linalg.norm(points - curve[0], axis=1)))
    tree = cKDTree(curve)
    k = min(4, len(curve))
    _, idx = tree.query(points, k=k)
    idx = np.atleast_2d(idx)
    best = np.full(len(points), np.inf)
    for col in range(idx.shape[1]):
        for off in (-1, 0):
            j = np.clip(idx[:, col] + off, 0, len(curve) - 2)
            a, b = curve[j], curve[j + 1]
            ab = b - a
            denom = np.einsum("ij,ij->i", ab, ab)
            t = np.where(denom > 0, np.einsum("ij,ij->i", points - a, ab) / np.where(denom > 0, denom, 1.0), 0.0)
            t = np.clip(t, 0.0, 1.0)
            d = np.linalg.norm(points - (a + t[:, None] * ab), axis=1)
            best = np.minimum(best, d)
    return float(best.max())


def hausdorff(a: np.ndarray, b: np.ndarray) -> float:
    """Symmetric Hausdorff distance between two sampled curves (as polylines)."""
    return max(curve_distance(a, b), curve_distance(b, a))


# ---------------------------------------------------------------------------
# omega limits and probes


class OmegaKind(enum.Enum):
    EQUILIBRIUM = "Equilibrium"
    CYCLE = "Cycle"
    FLAGGED = "Flagged"


def classify_omega(
    traj: Trajectory,
    eq: PlanarState,
    cycle: LimitCycle | None = None,
    *,
    trailing: float | None = None,
    eq_tol: float = EQUILIBRIUM_TOL,
    cycle_tol: float = CYCLE_TOL,
) -> tuple[OmegaKind, float]:
    """Equilibrium / Cycle / Flagged verdict with the deciding distance."""
    y_end = np.asarray(traj.states[-1][:2])
    d_eq = float(np.linalg.norm(y_end - eq.as_array()))
    if d_eq < eq_tol:
        return OmegaKind.EQUILIBRIUM, d_eq
    if cycle is not None:
        span = trailing if trailing is not None else 2.0 * cycle.period
        tail = traj.states[traj.times >= traj.times[-1] - span][:, :2]
        d_cyc = curve_distance(tail, cycle.points)
        if d_cyc < cycle_tol:
            return OmegaKind.CYCLE, d_cyc
        return OmegaKind.FLAGGED, min(d_eq, d_cyc)
    return OmegaKind.FLAGGED, d_eq


@dataclass(frozen=True)
class ProbeReport:
    starts: np.ndarray
    finals: np.ndarray
    distances: np.ndarray
    max_distance: float | None
    converged: bool
    tol: float


def _interior_starts(p: ModelParams, n: int, seed: int) -> np.ndarray:
    tri = invariant_triangle(p)
    rng = Rng64(seed)
    return np.array([tri.sample_interior(rng) for _ in range(n)]).reshape(n, 2)


def global_stability_probe(
    p: ModelParams, n: int, horizon: float, seed: int, tol: float = 1e-6
) -> ProbeReport:
    """Integrate seeded interior starts and measure their final distance to the equilibrium."""
    starts = _interior_starts(p, n, seed)
    if n == 0:
        empty = np.empty((0, 2))
        return ProbeReport(empty, empty, np.empty(0), None, True, tol)
    eq = model.interior_equilibrium(p).as_array()
    rhs = model.kinetic_field(p)
    finals = np.array([integrate_adaptive(rhs, s, horizon, 1e-9, 1e-12).y_final for s in starts])
    dist = np.linalg.norm(finals - eq, axis=1)
    dmax = float(dist.max())
    return ProbeReport(starts, finals, dist, dmax, dmax <= tol, tol)


@dataclass(frozen=True)
class PersistenceReport:
    theta_estimate: float
    samples: int
    horizon: float


def persistence_floor(p: ModelParams, n: int, horizon: float, seed: int) -> PersistenceReport:
    """min(U, V) over the second half of the horizon, minimised over seeded starts."""
    if not p.has_interior():
        raise DomainError("persistence requires gamma*(beta-1) > 1")
    rhs = model.kinetic_field(p)
    theta = math.inf
    for s in _interior_starts(p, n, seed):
        traj = integrate_adaptive(rhs, s, horizon, 1e-7, 1e-10, stops=[0.5 * horizon], max_step=0.25)
        late = traj.states[traj.times >= 0.5 * horizon]
        theta = min(theta, float(late.min()))
    if not theta > 0.0:
        raise ConvergenceError(f"nonpositive persistence floor {theta}")
    return PersistenceReport(theta, n, horizon)


# ---------------------------------------------------------------------------
# heteroclinic orbits


@dataclass(frozen=True)
class HeteroclinicResult:
    trajectory: Trajectory
    omega: OmegaKind
    omega_distance: float
    seed_point: np.ndarray
    direction: np.ndarray


def _fd_jacobian(rhs, y, h=1e-6):
    y = np.asarray(y, dtype=float)
    J = np.empty((2, 2))
    for j in range(2):
        e = np.zeros(2)
        e[j] = h
        J[:, j] = (np.asarray(rhs(y + e)) - np.asarray(rhs(y - e))) / (2.0 * h)
    return J


def unstable_direction(J: np.ndarray) -> np.ndarray:
    """Unit eigenvector of the positive eigenvalue of a planar saddle, with V >= 0."""
    w, vecs = np.linalg.eig(J)
    if np.any(np.abs(w.imag) > 0) or not np.any(w.real > 0):
        raise SpectralError(f"no real unstable eigenvalue: {w}")
    e = np.real(vecs[:, int(np.argmax(w.real))])
    e = e / np.linalg.norm(e)
    if e[1] < 0.0:
        e = -e
    return e


def heteroclinic_from_gamma(
    rhs: PlanarField,
    p: ModelParams,
    horizon: float = 400.0,
    *,
    offset: float = 1e-7,
    cycle: LimitCycle | None = None,
    jac: np.ndarray | None = None,
    sample_dt: float = 0.01,
) -> HeteroclinicResult:
    """Unstable manifold of (gamma, 0) that enters the open quadrant."""
    if not p.has_interior():
        raise DomainError("requires gamma*(beta-1) > 1")
    base = np.array([p.gamma, 0.0])
    J = jac if jac is not None else _fd_jacobian(rhs, base)
    e = unstable_direction(J)
    if not e[1] > 0.0:
        raise SpectralError("unstable eigenvector does not point into V > 0")
    y0 = base + offset * e
    n_stops = int(horizon / sample_dt)
    traj = integrate_adaptive(rhs, y0, horizon, 1e-11, 1e-14, stops=np.arange(1, n_stops) * sample_dt)
    eq = model.interior_equilibrium(p)
    kind, dist = classify_omega(traj, eq, cycle)
    return HeteroclinicResult(traj, kind, dist, y0, e)


@dataclass(frozen=True)
class BackwardReport:
    witnessed: bool
    outcome: str  # "escaped", "bounded" or "origin"
    escaped_component: str | None
    u_max: float
    v_max: float
    min_origin_distance: float
    t_final: float


def backward_escape(
    rhs: PlanarField,
    p: ModelParams,
    start=None,
    *,
    horizon: float = 500.0,
    blowup: float = 1e6,
    origin_radius: float = 1e-3,
) -> BackwardReport:
    """Integrate backward in time and report how the orbit leaves.

    The orbit either leaves every bounded set (some coordinate above
    ``blowup``), stays bounded for the whole horizon, or enters the
    ``origin_radius`` ball around (0, 0); only the last outcome would be
    compatible with an orbit coming out of the origin.
    """
    if start is None:
        eq = model.interior_equilibrium(p)
        start = (eq.U + 0.01, eq.V + 0.01)
    y0 = np.asarray(start.as_array() if isinstance(start, PlanarState) else start, dtype=float)
    back = reverse(rhs)

    def stop(t, y):
        return max(y[0], y[1]) > blowup or math.hypot(y[0], y[1]) < origin_radius

    try:
        traj = integrate_adaptive(back, y0, horizon, 1e-10, 1e-13, stop_when=stop)
        states, t_final = traj.states, traj.t_final
    except IntegrationError:
        # finite-time blow-up faster than the step control can follow
        traj = integrate_adaptive(back, y0, horizon, 1e-10, 1e-13, stop_when=lambda t, y: max(y) > 1e3)
        states, t_final = traj.states, traj.t_final
    u_max, v_max = float(states[:, 0].max()), float(states[:, 1].max())
    r_min = float(np.min(np.hypot(states[:, 0], states[:, 1])))
    end = states[-1]
    if r_min < origin_radius:
        return BackwardReport(False, "origin", None, u_max, v_max, r_min, t_final)
    if max(end[0], end[1]) > blowup:
        comp = "U" if end[0] >= end[1] else "V"
        return BackwardReport(True, "escaped", comp, u_max, v_max, r_min, t_final)
    return BackwardReport(True, "bounded", None, u_max, v_max, r_min, t_final)


def no_heteroclinic_from_origin_check(rhs: PlanarField, p: ModelParams, start=None, **kwargs) -> bool:
    """True when the backward orbit from ``start`` does not come out of (0, 0)."""
    return backward_escape(rhs, p, start, **kwargs).witnessed
