"""Closed-form kinetic quantities of the scaled Rosenzweig-MacArthur system.

The kinetic field is

    U' = F(U, V) = alpha*U*(gamma - U) - U*V/(1 + U)
    V' = G(U, V) = V*(beta*U/(1 + U) - 1)

Everything here is a pure function of its arguments.
"""
from __future__ import annotations

import cmath
import enum
import math
from dataclasses import dataclass
from typing import Callable, Sequence

import numpy as np

from rmwave.errors import DomainError, SingularityError

__all__ = [
    "RawParams",
    "ModelParams",
    "PlanarState",
    "EquilibriumKind",
    "Classification",
    "Equilibrium",
    "DulacVariant",
    "rescale_params",
    "kinetic_rhs",
    "kinetic_field",
    "kinetic_divergence",
    "nullcline_f",
    "equilibria",
    "interior_equilibrium",
    "jacobian",
    "interior_jacobian",
    "eigenvalues_2x2",
    "classify",
    "classify_interior",
    "hopf_gamma",
    "dulac_exponent_range",
    "dulac_divergence",
]


def _require_positive(**values: float) -> None:
    for name, value in values.items():
        if not (isinstance(value, (int, float, np.floating, np.integer)) and math.isfinite(value) and value > 0):
            raise DomainError(f"{name} must be a positive finite real, got {value!r}")


@dataclass(frozen=True)
class RawParams:
    """Dimensional constants of the original diffusive predator-prey model."""

    A: float
    B: float
    C: float
    D: float
    E: float
    K: float
    delta1: float
    delta2: float

    def __post_init__(self) -> None:
        _require_positive(**{k: getattr(self, k) for k in self.__dataclass_fields__})


@dataclass(frozen=True)
class ModelParams:
    """Dimensionless parameters (alpha, beta, gamma, d)."""

    alpha: float
    beta: float
    gamma: float
    d: float = 1.0

    def __post_init__(self) -> None:
        _require_positive(alpha=self.alpha, beta=self.beta, gamma=self.gamma, d=self.d)

    def has_interior(self) -> bool:
        return self.gamma * (self.beta - 1.0) > 1.0

    def replace(self, **changes: float) -> "ModelParams":
        fields = {"alpha": self.alpha, "beta": self.beta, "gamma": self.gamma, "d": self.d}
        fields.update(changes)
        return ModelParams(**fields)


@dataclass(frozen=True)
class PlanarState:
    """Prey/predator pair in the closed positive quadrant."""

    U: float
    V: float

    def __post_init__(self) -> None:
        if not (self.U >= 0.0 and self.V >= 0.0):
            raise DomainError(f"state must lie in the nonnegative quadrant, got ({self.U}, {self.V})")

    def as_array(self) -> np.ndarray:
        return np.array([self.U, self.V], dtype=float)


class EquilibriumKind(enum.Enum):
    ORIGIN = "Origin"
    BOUNDARY_GAMMA = "BoundaryGamma"
    INTERIOR = "Interior"


class Classification(enum.Enum):
    SINK = "Sink"
    SOURCE = "Source"
    SADDLE = "Saddle"
    IMAGINARY_PAIR = "ImaginaryPair"
    # zero real eigenvalue (e.g. at gamma*(beta-1) == 1); not hyperbolic
    DEGENERATE = "Degenerate"


@dataclass(frozen=True)
class Equilibrium:
    location: PlanarState
    kind: EquilibriumKind
    eigenvalues: tuple[complex, complex]
    classification: Classification


class DulacVariant(enum.Enum):
    XI_PLUS_ONE = "XiPlusOne"
    XI_MINUS_ONE = "XiMinusOne"


def _uv(s) -> tuple[float, float]:
    if isinstance(s, PlanarState):
        return s.U, s.V
    u, v = s
    return float(u), float(v)


def rescale_params(raw: RawParams) -> ModelParams:
    """Map the dimensional constants to (alpha, beta, gamma, d)."""
    if not isinstance(raw, RawParams):
        raw = RawParams(*raw)
    return ModelParams(
        alpha=raw.A / (raw.E * raw.C * raw.K),
        beta=raw.D / (raw.E * raw.C),
        gamma=raw.E * raw.K,
        d=raw.delta1 / raw.delta2,
    )


def kinetic_rhs(p: ModelParams, s) -> tuple[float, float]:
    """Return (F(U, V), G(U, V))."""
    u, v = _uv(s)
    if u == -1.0:
        raise SingularityError("kinetic field is singular at U = -1")
    r = u / (1.0 + u)
    return p.alpha * u * (p.gamma - u) - r * v, v * (p.beta * r - 1.0)


def kinetic_field(p: ModelParams) -> Callable[[np.ndarray], np.ndarray]:
    """Vector-field callable y -> (F, G) for the integrators."""
    a, b, g = p.alpha, p.beta, p.gamma

    def rhs(y: np.ndarray) -> np.ndarray:
        u, v = y[0], y[1]
        r = u / (1.0 + u)
        return np.array([a * u * (g - u) - r * v, v * (b * r - 1.0)])

    return rhs


def kinetic_divergence(p: ModelParams) -> Callable[[np.ndarray], float]:
    """Scalar field dF/dU + dG/dV."""
    a, b, g = p.alpha, p.beta, p.gamma

    def div(y) -> float:
        u, v = y[0], y[1]
        w = 1.0 + u
        return a * (g - 2.0 * u) - v / (w * w) + b * u / w - 1.0

    return div


def nullcline_f(p: ModelParams, U: float) -> float:
    """Prey nullcline V = alpha*(gamma - U)*(1 + U)."""
    return p.alpha * (p.gamma - U) * (1.0 + U)


def interior_equilibrium(p: ModelParams) -> PlanarState:
    if not p.has_interior():
        raise DomainError("no interior equilibrium: requires gamma*(beta-1) > 1")
    bm1 = p.beta - 1.0
    return PlanarState(1.0 / bm1, p.alpha * p.beta * (p.gamma * bm1 - 1.0) / (bm1 * bm1))


def jacobian(p: ModelParams, s) -> np.ndarray:
    u, v = _uv(s)
    if u == -1.0:
        raise SingularityError("Jacobian is singular at U = -1")
    w = 1.0 + u
    return np.array(
        [
            [p.alpha * (p.gamma - 2.0 * u) - v / (w * w), -u / w],
            [p.beta * v / (w * w), p.beta * u / w - 1.0],
        ]
    )


def interior_jacobian(p: ModelParams) -> np.ndarray:
    """Jacobian at the interior equilibrium in its simplified closed form."""
    if not p.has_interior():
        raise DomainError("no interior equilibrium: requires gamma*(beta-1) > 1")
    a, b, g = p.alpha, p.beta, p.gamma
    return np.array(
        [
            [a * (g * (b - 1.0) - (b + 1.0)) / (b * (b - 1.0)), -1.0 / b],
            [a * (g * (b - 1.0) - 1.0), 0.0],
        ]
    )


def eigenvalues_2x2(J) -> tuple[complex, complex]:
    """Roots of lambda^2 - tr*lambda + det, ordered by decreasing real part."""
    tr = J[0][0] + J[1][1]
    det = J[0][0] * J[1][1] - J[0][1] * J[1][0]
    half = 0.5 * tr
    disc = half * half - det
    if disc >= 0.0:
        r = math.sqrt(disc)
        # avoid cancellation in the smaller-magnitude root
        big = half + math.copysign(r, half) if half != 0.0 else r
        if big == 0.0:
            return complex(0.0), complex(0.0)
        small = det / big
        lo, hi = sorted((big, small))
        return complex(hi), complex(lo)
    r = cmath.sqrt(disc)
    return complex(half, r.imag), complex(half, -r.imag)


def classify(eigs: Sequence[complex]) -> Classification:
    re = [e.real for e in eigs]
    if all(r < 0.0 for r in re):
        return Classification.SINK
    if all(r > 0.0 for r in re):
        return Classification.SOURCE
    if min(re) < 0.0 < max(re):
        return Classification.SADDLE
    if all(r == 0.0 for r in re) and all(e.imag != 0.0 for e in eigs):
        return Classification.IMAGINARY_PAIR
    return Classification.DEGENERATE


def classify_interior(p: ModelParams) -> Equilibrium:
    """Interior equilibrium with its spectrum.

    The sign of gamma*(beta-1) - (beta+1) decides Sink / Source; at equality
    the eigenvalues are returned from the exact formula +-i*sqrt(alpha/beta*(gamma*(beta-1)-1)).
    """
    loc = interior_equilibrium(p)
    a, b, g = p.alpha, p.beta, p.gamma
    margin = g * (b - 1.0) - (b + 1.0)
    if margin == 0.0:
        w = math.sqrt(a / b * (g * (b - 1.0) - 1.0))
        return Equilibrium(loc, EquilibriumKind.INTERIOR, (complex(0.0, w), complex(0.0, -w)),
                           Classification.IMAGINARY_PAIR)
    eigs = eigenvalues_2x2(interior_jacobian(p))
    cls = Classification.SINK if margin < 0.0 else Classification.SOURCE
    return Equilibrium(loc, EquilibriumKind.INTERIOR, eigs, cls)


def equilibria(p: ModelParams) -> list[Equilibrium]:
    """Origin, (gamma, 0) and, when it exists, the interior equilibrium."""
    out = []
    for kind, loc in (
        (EquilibriumKind.ORIGIN, PlanarState(0.0, 0.0)),
        (EquilibriumKind.BOUNDARY_GAMMA, PlanarState(p.gamma, 0.0)),
    ):
        eigs = eigenvalues_2x2(jacobian(p, loc))
        out.append(Equilibrium(loc, kind, eigs, classify(eigs)))
    if p.has_interior():
        out.append(classify_interior(p))
    return out


def hopf_gamma(p: ModelParams) -> float:
    """Hopf threshold gamma* = (beta+1)/(beta-1)."""
    if not p.beta > 1.0:
        raise DomainError("Hopf threshold requires beta > 1")
    return (p.beta + 1.0) / (p.beta - 1.0)


def dulac_exponent_range(p: ModelParams) -> tuple[float, float] | None:
    """Open xi-interval of the Dulac function, or None when it is empty."""
    if not p.beta > 1.0:
        raise DomainError("Dulac exponent window requires beta > 1")
    a, b, g = p.alpha, p.beta, p.gamma
    scale = 4.0 * a / (b - 1.0)
    lo = ((g - 1.0) / 2.0 - (g - 1.0) / 4.0) * scale
    hi = (1.0 / (b - 1.0) - (g - 1.0) / 4.0) * scale
    if lo < hi:
        return lo, hi
    return None


def dulac_divergence(
    p: ModelParams,
    xi: float,
    s,
    exponent_variant: DulacVariant = DulacVariant.XI_PLUS_ONE,
) -> float:
    """div(phi*(F, G)) for phi = (1+U)/U * V**k, k = xi +- 1.

    Using phi*F = V**k (f(U) - V) and phi*G = ((beta-1)U - 1)/U * V**(k+1):

        div = V**k * [f'(U) + (k+1) * ((beta-1) - 1/U)]
    """
    u, v = _uv(s)
    if u == 0.0 or v == 0.0:
        raise SingularityError("Dulac function is singular on the axes")
    k = xi + 1.0 if DulacVariant(exponent_variant) is DulacVariant.XI_PLUS_ONE else xi - 1.0
    fprime = p.alpha * (p.gamma - 1.0 - 2.0 * u)
    return v**k * (fprime + (k + 1.0) * ((p.beta - 1.0) - 1.0 / u))
