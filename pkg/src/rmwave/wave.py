"""Traveling-wave profile system and its large-speed planar reduction.

Internal (profile) time tau:

    u1' = eps*u2
    u2' = (-u2 - F(u1, v1)) / d
    v1' = eps*v2
    v2' = -v2 - G(u1, v1)

with eps = 1/c**2. The shift U2 = u2 + F, V2 = v2 + G turns this into

    X' = eps*(Y - H(X)),   Y' = -D*Y + eps*(P, Q),   D = diag(1/d, 1),

where X = (u1, v1), H = (F, G) and (P, Q) = DH(X) (Y - H(X)). The fast
variables Y are slaved to X on a slow manifold Y = Phi(X), approximated here
to first order in eps. On that manifold, with the slow time t = -eps*tau,
X obeys the reduced planar field H - Phi, a small perturbation of the
kinetics that the ``cycles`` machinery analyses unchanged.
"""
from __future__ import annotations

import enum
import math
from dataclasses import dataclass

import numpy as np
from scipy.integrate import solve_bvp

from rmwave import cycles, model
from rmwave.errors import ConvergenceError, DomainError, SingularityError, SpectralError
from rmwave.model import ModelParams
from rmwave.ode import StepStats, Trajectory, integrate_adaptive

__all__ = [
    "WaveParams",
    "WaveState4",
    "TransformedState",
    "Verdict",
    "WaveShot",
    "wave_rhs_4d",
    "wave_field",
    "wave_jacobian_4d",
    "spectrum_4x4",
    "profile_reparametrize",
    "profile_unreparametrize",
    "transform_uv",
    "inverse_transform_uv",
    "pq_terms",
    "transformed_field",
    "slow_manifold_first_order",
    "invariance_residual",
    "reduced_rhs",
    "reduced_field",
    "reduced_jacobian",
    "reduced_limit_cycle",
    "crossing_level",
    "cycle_crosses_line_check",
    "shoot_heteroclinic_4d",
    "shoot_boundary_heteroclinic",
]


@dataclass(frozen=True)
class WaveParams:
    c: float
    epsilon: float

    def __post_init__(self) -> None:
        if not (math.isfinite(self.c) and self.c > 0):
            raise DomainError(f"wave speed must be positive, got {self.c!r}")
        if not (0.0 < self.epsilon <= 1.0):
            raise DomainError(f"epsilon must lie in (0, 1], got {self.epsilon!r}")
        if abs(self.epsilon - 1.0 / self.c**2) > 1e-15 * max(1.0, self.epsilon):
            raise DomainError("epsilon must equal 1/c**2")

    @classmethod
    def from_speed(cls, c: float) -> "WaveParams":
        return cls(float(c), 1.0 / float(c) ** 2)

    @classmethod
    def from_epsilon(cls, epsilon: float) -> "WaveParams":
        if not epsilon > 0:
            raise DomainError(f"epsilon must be positive, got {epsilon!r}")
        c = 1.0 / math.sqrt(epsilon)
        return cls(c, 1.0 / c**2)


@dataclass(frozen=True)
class WaveState4:
    u1: float
    u2: float
    v1: float
    v2: float

    def as_array(self) -> np.ndarray:
        return np.array([self.u1, self.u2, self.v1, self.v2], dtype=float)


@dataclass(frozen=True)
class TransformedState:
    X: tuple[float, float]
    Y: tuple[float, float]

    def as_array(self) -> np.ndarray:
        return np.array([self.X[0], self.X[1], self.Y[0], self.Y[1]], dtype=float)


def _arr4(s) -> np.ndarray:
    if isinstance(s, (WaveState4, TransformedState)):
        return s.as_array()
    return np.asarray(s, dtype=float)


def _FG(p: ModelParams, u, v):
    r = u / (1.0 + u)
    return p.alpha * u * (p.gamma - u) - r * v, v * (p.beta * r - 1.0)


def _partials(p: ModelParams, u, v):
    """(F_u, F_v, G_u, G_v); works elementwise on arrays."""
    w = 1.0 + u
    return (
        p.alpha * (p.gamma - 2.0 * u) - v / (w * w),
        -u / w,
        p.beta * v / (w * w),
        p.beta * u / w - 1.0,
    )


# ---------------------------------------------------------------------------
# profile system


def wave_rhs_4d(p: ModelParams, w: WaveParams, s) -> np.ndarray:
    u1, u2, v1, v2 = _arr4(s)
    if u1 == -1.0:
        raise SingularityError("wave field is singular at u1 = -1")
    F, G = _FG(p, u1, v1)
    eps = w.epsilon
    return np.array([eps * u2, (-u2 - F) / p.d, eps * v2, -v2 - G])


def wave_field(p: ModelParams, w: WaveParams):
    a, b, g, d, eps = p.alpha, p.beta, p.gamma, p.d, w.epsilon

    def rhs(y):
        u1, u2, v1, v2 = y
        r = u1 / (1.0 + u1)
        F = a * u1 * (g - u1) - r * v1
        G = v1 * (b * r - 1.0)
        return np.array([eps * u2, (-u2 - F) / d, eps * v2, -v2 - G])

    return rhs


def wave_jacobian_4d(p: ModelParams, w: WaveParams, s) -> np.ndarray:
    u1, _, v1, _ = _arr4(s)
    Fu, Fv, Gu, Gv = _partials(p, u1, v1)
    eps, d = w.epsilon, p.d
    return np.array(
        [
            [0.0, eps, 0.0, 0.0],
            [-Fu / d, -1.0 / d, -Fv / d, 0.0],
            [0.0, 0.0, 0.0, eps],
            [-Gu, 0.0, -Gv, -1.0],
        ]
    )


def _null_vector(M: np.ndarray) -> np.ndarray:
    _, _, vh = np.linalg.svd(M)
    v = vh[-1].conj()
    return v / np.linalg.norm(v)


def spectrum_4x4(J: np.ndarray) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Eigenvalues with right and left eigenvectors of a 4x4 real matrix.

    When the (u1, u2) / (v1, v2) ordering makes J block triangular the roots
    come from the two 2x2 quadratics in closed form; otherwise from the
    companion matrix of the characteristic polynomial. Vectors are null
    vectors of J - lambda*I (and its transpose).
    """
    J = np.asarray(J, dtype=float)
    if np.all(J[2:, :2] == 0.0) or np.all(J[:2, 2:] == 0.0):
        lam = np.array(model.eigenvalues_2x2(J[:2, :2]) + model.eigenvalues_2x2(J[2:, 2:]))
    else:
        lam = np.roots(np.poly(J)).astype(complex)
    order = np.argsort(-lam.real, kind="stable")
    lam = lam[order]
    eye = np.eye(4)
    right = np.column_stack([_null_vector(J - z * eye) for z in lam])
    left = np.column_stack([_null_vector(J.T - z * eye) for z in lam])
    return lam, right, left


def profile_reparametrize(traj: Trajectory, w: WaveParams) -> Trajectory:
    """Map internal time tau to the wave coordinate s = -tau/c."""
    return _remap_times(traj, -1.0 / w.c)


def profile_unreparametrize(traj: Trajectory, w: WaveParams) -> Trajectory:
    """Inverse of :func:`profile_reparametrize`."""
    return _remap_times(traj, -w.c)


def _remap_times(traj: Trajectory, factor: float) -> Trajectory:
    t = traj.times * factor
    idx = np.argsort(t, kind="stable")
    return Trajectory(t[idx], traj.states[idx], traj.derivs[idx] / factor, traj.step_stats, traj.terminated)


# ---------------------------------------------------------------------------
# change of variables


def transform_uv(p: ModelParams, s) -> TransformedState:
    u1, u2, v1, v2 = _arr4(s)
    if u1 == -1.0:
        raise SingularityError("transform is singular at u1 = -1")
    F, G = _FG(p, u1, v1)
    return TransformedState((float(u1), float(v1)), (float(u2 + F), float(v2 + G)))


def inverse_transform_uv(p: ModelParams, t) -> WaveState4:
    U1, V1, U2, V2 = _arr4(t)
    if U1 == -1.0:
        raise SingularityError("transform is singular at U1 = -1")
    F, G = _FG(p, U1, V1)
    return WaveState4(float(U1), float(U2 - F), float(V1), float(V2 - G))


def pq_terms(p: ModelParams, t) -> tuple[float, float]:
    """(P, Q) = DH(X) (Y - H(X))."""
    U1, V1, U2, V2 = _arr4(t)
    if U1 == -1.0:
        raise SingularityError("P, Q are singular at U1 = -1")
    F, G = _FG(p, U1, V1)
    Fu, Fv, Gu, Gv = _partials(p, U1, V1)
    a, b = U2 - F, V2 - G
    return float(Fu * a + Fv * b), float(Gu * a + Gv * b)


def transformed_field(p: ModelParams, w: WaveParams):
    """The profile system in (X, Y) coordinates, internal time."""
    eps, d = w.epsilon, p.d

    def rhs(z):
        U1, V1, U2, V2 = z
        F, G = _FG(p, U1, V1)
        P, Q = pq_terms(p, z)
        return np.array([eps * (U2 - F), eps * (V2 - G), -U2 / d + eps * P, -V2 + eps * Q])

    return rhs


# ---------------------------------------------------------------------------
# slow manifold and reduced system


def slow_manifold_first_order(p: ModelParams, epsilon: float, X) -> tuple[float, float]:
    """Leading-order slow manifold Y = eps*(d*P0(X), Q0(X)), P0, Q0 taken at Y = 0."""
    u, v = X
    F, G = _FG(p, u, v)
    Fu, Fv, Gu, Gv = _partials(p, u, v)
    return -epsilon * p.d * (Fu * F + Fv * G), -epsilon * (Gu * F + Gv * G)


def invariance_residual(p: ModelParams, epsilon: float, X, h: float = 1e-6) -> float:
    """Norm of Y' + D*Y - eps*(P, Q) for Y = Phi(X) moving with the profile flow.

    Phi's derivative is taken by central differences; the result is O(eps**2)
    for the first-order manifold.
    """
    X = np.asarray(X, dtype=float)
    Y = np.array(slow_manifold_first_order(p, epsilon, X))
    F, G = _FG(p, X[0], X[1])
    Xdot = epsilon * (Y - np.array([F, G]))
    DPhi = np.empty((2, 2))
    for j in range(2):
        e = np.zeros(2)
        e[j] = h
        DPhi[:, j] = (np.array(slow_manifold_first_order(p, epsilon, X + e))
                      - np.array(slow_manifold_first_order(p, epsilon, X - e))) / (2.0 * h)
    Ydot = DPhi @ Xdot
    P, Q = pq_terms(p, (X[0], X[1], Y[0], Y[1]))
    res = Ydot + np.array([Y[0] / p.d, Y[1]]) - epsilon * np.array([P, Q])
    return float(np.linalg.norm(res))


def reduced_rhs(p: ModelParams, epsilon: float, X) -> tuple[float, float]:
    """(F - Phi1, G - Phi2) in slow time t = -eps*tau."""
    u, v = X
    F, G = _FG(p, u, v)
    phi1, phi2 = slow_manifold_first_order(p, epsilon, X)
    return F - phi1, G - phi2


def reduced_field(p: ModelParams, epsilon: float):
    a, b, g, d = p.alpha, p.beta, p.gamma, p.d

    def rhs(y):
        u, v = y[0], y[1]
        w = 1.0 + u
        r = u / w
        F = a * u * (g - u) - r * v
        G = v * (b * r - 1.0)
        Fu = a * (g - 2.0 * u) - v / (w * w)
        Gu = b * v / (w * w)
        Gv = b * r - 1.0
        return np.array([F + epsilon * d * (Fu * F - r * G), G + epsilon * (Gu * F + Gv * G)])

    return rhs


def reduced_jacobian(p: ModelParams, epsilon: float, X, h: float = 1e-6) -> np.ndarray:
    return cycles._fd_jacobian(reduced_field(p, epsilon), X, h)


def reduced_limit_cycle(p: ModelParams, epsilon: float, tol: float = 1e-10, **kwargs) -> cycles.LimitCycle | None:
    """Attracting cycle of the reduced field, or None when the equilibrium attracts."""
    if not 0.0 <= epsilon <= 1e-2:
        raise DomainError(f"reduced system is only meaningful for small epsilon, got {epsilon}")
    rhs = reduced_field(p, epsilon)
    return cycles.find_limit_cycle(rhs, p, tol, divergence=cycles.numerical_divergence(rhs), **kwargs)


def crossing_level(p: ModelParams) -> float:
    """Midpoint between U_eq and (gamma - 1)/2."""
    return 0.5 * (model.interior_equilibrium(p).U + 0.5 * (p.gamma - 1.0))


def cycle_crosses_line_check(cycle: cycles.LimitCycle, p: ModelParams) -> bool:
    return bool(np.max(cycle.points[:, 0]) >= crossing_level(p))


# ---------------------------------------------------------------------------
# heteroclinic profiles


class Verdict(enum.Enum):
    TO_EQUILIBRIUM = "ToEquilibrium"
    TO_WAVE_TRAIN = "ToWaveTrain"
    ESCAPED = "Escaped"


@dataclass(frozen=True)
class WaveShot:
    """A heteroclinic profile in slow time t = -eps*tau (kinetic orientation)."""

    trajectory: Trajectory
    verdict: Verdict
    omega_distance: float
    target: np.ndarray | None
    min_u1: float
    min_v1: float
    wave: WaveParams

    def shadow(self) -> np.ndarray:
        return self.trajectory.states[:, [0, 2]]


def _slow_time_system(p: ModelParams, w: WaveParams):
    """Vectorised profile field and Jacobian in slow time (columns are states)."""
    a, b, g, d, eps = p.alpha, p.beta, p.gamma, p.d, w.epsilon

    def fun(t, y):
        u1, u2, v1, v2 = y
        r = u1 / (1.0 + u1)
        F = a * u1 * (g - u1) - r * v1
        G = v1 * (b * r - 1.0)
        return np.vstack([-u2, (u2 + F) / (d * eps), -v2, (v2 + G) / eps])

    def jac(t, y):
        u1, _, v1, _ = y
        Fu, Fv, Gu, Gv = _partials(p, u1, v1)
        m = y.shape[1]
        out = np.zeros((4, 4, m))
        out[0, 1] = -1.0
        out[1, 0] = Fu / (d * eps)
        out[1, 1] = 1.0 / (d * eps)
        out[1, 2] = Fv / (d * eps)
        out[2, 3] = -1.0
        out[3, 0] = Gu / eps
        out[3, 2] = Gv / eps
        out[3, 3] = 1.0 / eps
        return out

    return fun, jac


def _lift(p: ModelParams, eps: float, X: np.ndarray) -> np.ndarray:
    """4D states on the first-order slow manifold above the planar points X (rows)."""
    u, v = X[:, 0], X[:, 1]
    F, G = _FG(p, u, v)
    phi1, phi2 = slow_manifold_first_order(p, eps, (u, v))
    return np.column_stack([u, phi1 - F, v, phi2 - G])


def _manifold_gap(p: ModelParams, eps: float, y: np.ndarray) -> np.ndarray:
    u1, u2, v1, v2 = y
    F, G = _FG(p, u1, v1)
    phi1, phi2 = slow_manifold_first_order(p, eps, (u1, v1))
    return np.array([u2 + F - phi1, v2 + G - phi2])


def _solve_profile(fun, jac, bc, mesh, guess, tol, max_nodes):
    sol = solve_bvp(fun, bc, mesh, guess.T, fun_jac=jac, tol=tol, max_nodes=max_nodes)
    if sol.status != 0:
        raise ConvergenceError(f"profile boundary-value solve failed: {sol.message}")
    return sol


def _trajectory_from_bvp(sol, n_out: int | None = None) -> Trajectory:
    t = sol.x if n_out is None else np.linspace(sol.x[0], sol.x[-1], n_out)
    y = sol.sol(t)
    dy = sol.sol(t, 1)
    return Trajectory(t, y.T.copy(), dy.T.copy(), StepStats(len(sol.x), 0, float(np.max(np.diff(sol.x)))))


def shoot_heteroclinic_4d(
    p: ModelParams,
    c: float,
    horizon: float = 300.0,
    *,
    offset: float = 1e-7,
    n_mesh: int = 3000,
    tol: float = 1e-8,
    max_nodes: int = 300000,
    cycle_tol: float = 1e-2,
    reference_cycle: cycles.LimitCycle | None = None,
) -> WaveShot:
    """Profile leaving (gamma, 0, 0, 0) into v1 > 0, classified by its (u1, v1) shadow.

    In slow time the point (gamma, 0, 0, 0) has one stable direction (slow
    prey), one slow unstable direction pointing into v1 > 0, and two fast
    unstable directions. Forward integration would amplify the fast modes,
    so the orbit is computed as a boundary-value problem on [0, horizon]:
    at t = 0 the stable coefficient is zero and the slow unstable one equals
    ``offset``; at t = horizon the state lies on the slow manifold.
    """
    if c < 5.0:
        raise DomainError("shooting is set up for the large-speed regime c >= 5")
    if not p.has_interior():
        raise DomainError("requires gamma*(beta-1) > 1")
    w = WaveParams.from_speed(c)
    eps = w.epsilon
    base = np.array([p.gamma, 0.0, 0.0, 0.0])
    J = -wave_jacobian_4d(p, w, base) / eps
    lam, right, left = spectrum_4x4(J)
    lam = lam.real
    if np.sum(lam < 0.0) != 1:
        raise SpectralError(f"expected exactly one stable direction at (gamma,0,0,0), got {lam}")
    i_stable = int(np.argmin(lam))
    positive = [i for i in range(4) if lam[i] > 0.0]
    i_slow = min(positive, key=lambda i: lam[i])
    r_slow = right[:, i_slow].real
    if abs(r_slow[2]) < 1e-12:
        raise SpectralError("slow unstable direction does not leave the prey axis")
    if r_slow[2] < 0.0:
        r_slow = -r_slow
    l_stable, l_slow = left[:, i_stable].real, left[:, i_slow].real
    norm_slow = float(l_slow @ r_slow)

    fun, jac = _slow_time_system(p, w)

    def bc(ya, yb):
        dz = ya - base
        gap = _manifold_gap(p, eps, yb)
        return np.array([l_stable @ dz / offset, l_slow @ dz / offset - norm_slow, gap[0], gap[1]])

    # initial guess: the reduced heteroclinic, lifted onto the slow manifold
    red = reduced_field(p, eps)
    X0 = np.array([p.gamma, 0.0]) + offset * r_slow[[0, 2]]
    mesh = np.linspace(0.0, horizon, n_mesh)
    tr = integrate_adaptive(red, X0, horizon, 1e-10, 1e-13, stops=mesh[1:-1])
    X = tr.sample(mesh)
    sol = _solve_profile(fun, jac, bc, mesh, _lift(p, eps, X), tol, max_nodes)
    traj = _trajectory_from_bvp(sol)

    shadow = traj.states[:, [0, 2]]
    min_u1, min_v1 = float(shadow[:, 0].min()), float(shadow[:, 1].min())
    tri = cycles.invariant_triangle(p)
    inside = min(min_u1, min_v1) >= -1e-9 and np.all(p.beta * shadow[:, 0] + shadow[:, 1] <= tri.R)
    eq = model.interior_equilibrium(p)
    cyc = reference_cycle
    if cyc is None and not np.linalg.norm(shadow[-1] - eq.as_array()) < cycles.EQUILIBRIUM_TOL:
        cyc = reduced_limit_cycle(p, eps)
    shadow_traj = Trajectory(traj.times, shadow, traj.derivs[:, [0, 2]])
    kind, dist = cycles.classify_omega(shadow_traj, eq, cyc, cycle_tol=cycle_tol)
    if not inside or kind is cycles.OmegaKind.FLAGGED:
        verdict = Verdict.ESCAPED
    elif kind is cycles.OmegaKind.EQUILIBRIUM:
        verdict = Verdict.TO_EQUILIBRIUM
    else:
        verdict = Verdict.TO_WAVE_TRAIN
    target = eq.as_array() if verdict is Verdict.TO_EQUILIBRIUM else None
    return WaveShot(traj, verdict, dist, target, min_u1, min_v1, w)


def shoot_boundary_heteroclinic(
    p: ModelParams,
    c: float,
    horizon: float = 60.0,
    *,
    offset: float = 1e-7,
    n_mesh: int = 2000,
    tol: float = 1e-8,
    max_nodes: int = 300000,
) -> WaveShot:
    """Predator-free profile from (0, 0, 0, 0) to (gamma, 0, 0, 0).

    On the invariant set v1 = v2 = 0 the profile is planar; it leaves the
    origin with u1(0) = ``offset`` and ends on the slow manifold near
    (gamma, 0).
    """
    if c < 5.0:
        raise DomainError("shooting is set up for the large-speed regime c >= 5")
    w = WaveParams.from_speed(c)
    eps = w.epsilon
    fun4, jac4 = _slow_time_system(p, w)

    def fun(t, y):
        z = np.vstack([y, np.zeros_like(y)])
        return fun4(t, z)[:2]

    def jac(t, y):
        z = np.vstack([y, np.zeros_like(y)])
        return jac4(t, z)[:2, :2]

    def bc(ya, yb):
        gap = _manifold_gap(p, eps, np.array([yb[0], yb[1], 0.0, 0.0]))
        return np.array([ya[0] / offset - 1.0, gap[0]])

    red = reduced_field(p, eps)
    mesh = np.linspace(0.0, horizon, n_mesh)
    tr = integrate_adaptive(red, np.array([offset, 0.0]), horizon, 1e-10, 1e-13, stops=mesh[1:-1])
    X = tr.sample(mesh)
    guess = _lift(p, eps, X)[:, :2]
    sol = _solve_profile(fun, jac, bc, mesh, guess, tol, max_nodes)
    t = sol.x
    y2 = sol.y
    states = np.column_stack([y2[0], y2[1], np.zeros_like(t), np.zeros_like(t)])
    derivs = np.column_stack([sol.yp[0], sol.yp[1], np.zeros_like(t), np.zeros_like(t)])
    traj = Trajectory(t, states, derivs, StepStats(len(t), 0, float(np.max(np.diff(t)))))
    end = np.array([p.gamma, 0.0])
    dist = float(np.linalg.norm(states[-1, [0, 2]] - end))
    ok = dist < cycles.EQUILIBRIUM_TOL and states[:, 0].min() >= -1e-9
    verdict = Verdict.TO_EQUILIBRIUM if ok else Verdict.ESCAPED
    return WaveShot(traj, verdict, dist, end if ok else None, float(states[:, 0].min()), 0.0, w)
