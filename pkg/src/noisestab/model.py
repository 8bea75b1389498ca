"""Core model types: physical parameters, interval geometry, admissible
intensity intervals and the discrete H-norm.

States pair a grid function on [0, L] with its two boundary values.  The
squared H-norm is the trapezoid approximation of the interior L2 mass plus
unit point masses at the endpoints, matching the inner product

    <U, V>_H = int u v dx + u(0) v(0) + u(L) v(L).
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass

import numpy as np


class NoisePlacement(enum.Enum):
    """Where the multiplicative noise enters the system."""

    BOUNDARY = "boundary"
    INTERIOR = "interior"
    NONE = "none"


class ParameterError(ValueError):
    """A model parameter violates its constraint."""


class NonPositiveBeta(ParameterError):
    pass


class NonPositiveLambda(ParameterError):
    pass


class BadGeometry(ParameterError):
    pass


@dataclass(frozen=True)
class ModelParams:
    """Reaction coefficient beta, boundary dissipation lam, noise intensity."""

    beta: float
    lam: float
    alpha: float = 0.0
    placement: NoisePlacement = NoisePlacement.NONE

    @property
    def effective_alpha(self) -> float:
        """Noise intensity actually applied; zero when placement is NONE."""
        return 0.0 if self.placement is NoisePlacement.NONE else self.alpha

    @property
    def b(self) -> float:
        """beta + lam, the coefficient appearing in the linearised analysis."""
        return self.beta + self.lam


@dataclass(frozen=True)
class DomainGeometry:
    """Dimension d and half-diameter R of the domain; 1D means [0, 2R]."""

    dimension: int = 1
    half_diameter: float = 0.5

    @property
    def interval_length(self) -> float:
        if self.dimension != 1:
            raise BadGeometry("interval_length is defined in one dimension only")
        return 2.0 * self.half_diameter

    @property
    def d_over_r(self) -> float:
        return self.dimension / self.half_diameter

    @classmethod
    def interval(cls, length: float = 1.0) -> "DomainGeometry":
        return cls(dimension=1, half_diameter=length / 2.0)


def validate_params(
    p: ModelParams, g: DomainGeometry
) -> tuple[ModelParams, DomainGeometry]:
    """Check type invariants; return the pair unchanged if they hold."""
    if not (isinstance(p.beta, (int, float)) and math.isfinite(p.beta) and p.beta > 0.0):
        raise NonPositiveBeta(f"beta must be positive and finite, got beta={p.beta!r}")
    if not (isinstance(p.lam, (int, float)) and math.isfinite(p.lam) and p.lam > 0.0):
        raise NonPositiveLambda(f"lam must be positive and finite, got lam={p.lam!r}")
    if p.placement is not NoisePlacement.NONE and not math.isfinite(p.alpha):
        raise ParameterError(f"alpha must be finite, got alpha={p.alpha!r}")
    if g.dimension < 1 or not isinstance(g.dimension, int):
        raise BadGeometry(f"dimension must be an integer >= 1, got dimension={g.dimension!r}")
    if not (math.isfinite(g.half_diameter) and g.half_diameter > 0.0):
        raise BadGeometry(
            f"half_diameter must be positive and finite, got half_diameter={g.half_diameter!r}"
        )
    return p, g


@dataclass(frozen=True)
class IntensityInterval:
    """Admissible range for alpha^2/2, with the case that produced it.

    ``theorem_case`` tags the branch: "boundary:A>2B", "boundary:2B>=A>B",
    "interior:B>-2A", "interior:-2A>=B>-A" or "envelope".  A denotes the
    trace-constant margin C - beta; B is theta - lam for boundary noise and
    lam - theta for interior noise.
    """

    lower: float
    upper: float
    lower_closed: bool
    theorem_case: str
    theta_used: float

    def __post_init__(self) -> None:
        if not (0.0 <= self.lower < self.upper):
            raise ValueError(
                f"need 0 <= lower < upper, got [{self.lower}, {self.upper})"
            )

    @property
    def alpha_sq_lower(self) -> float:
        return 2.0 * self.lower

    @property
    def alpha_sq_upper(self) -> float:
        return 2.0 * self.upper

    def contains(self, half_alpha_sq: float) -> bool:
        if half_alpha_sq >= self.upper:
            return False
        if self.lower_closed:
            return half_alpha_sq >= self.lower
        return half_alpha_sq > self.lower


@dataclass(frozen=True, eq=False)
class HState:
    """Grid function on [0, L] including both endpoints.

    The boundary components of the pair (u, u|_boundary) coincide with the
    first and last grid values in this conforming discretisation.
    """

    values: np.ndarray

    def __post_init__(self) -> None:
        arr = np.asarray(self.values, dtype=float)
        if arr.ndim != 1 or arr.size < 2:
            raise ValueError("HState needs a 1-D array with at least two nodes")
        object.__setattr__(self, "values", arr)

    @property
    def n_nodes(self) -> int:
        return self.values.size

    @property
    def boundary_left(self) -> float:
        return float(self.values[0])

    @property
    def boundary_right(self) -> float:
        return float(self.values[-1])

    def scaled(self, c: float) -> "HState":
        return HState(c * self.values)

    @classmethod
    def from_function(cls, f, n_nodes: int, length: float = 1.0) -> "HState":
        return cls(np.asarray(f(uniform_grid(n_nodes, length)), dtype=float))


def uniform_grid(n_nodes: int, length: float = 1.0) -> np.ndarray:
    return np.linspace(0.0, length, n_nodes)


def h_norm_sq(state: HState, grid_spacing: float) -> float:
    """Squared H-norm: trapezoid of u^2 over [0, L] plus u(0)^2 + u(L)^2."""
    if grid_spacing <= 0.0:
        raise ValueError("grid_spacing must be positive")
    u = state.values
    sq = u * u
    interior = grid_spacing * (sq.sum() - 0.5 * sq[0] - 0.5 * sq[-1])
    return float(interior + sq[0] + sq[-1])


def h_inner(a: HState, b: HState, grid_spacing: float) -> float:
    """H-inner product of two states on a common grid."""
    if grid_spacing <= 0.0:
        raise ValueError("grid_spacing must be positive")
    if a.n_nodes != b.n_nodes:
        raise ValueError("states live on different grids")
    prod = a.values * b.values
    interior = grid_spacing * (prod.sum() - 0.5 * prod[0] - 0.5 * prod[-1])
    return float(interior + prod[0] + prod[-1])
