"""Constants of the Poincare-trace inequality

    ||grad u||_D^2 + theta ||u||_bd^2 >= C ||u||_D^2.

Two routes are provided: the explicit sub-optimal constant valid in any
dimension, and the optimal constant in one dimension, computed either from
the transcendental characteristic equation of the Robin eigenvalue problem
or from a symmetric finite-difference eigensolve.  The optimal constant is
the first eigenvalue of -u'' with Robin conditions

    -u'(0) + theta u(0) = 0,    u'(L) + theta u(L) = 0,

where the derivative at the left endpoint carries the outward-normal sign.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass

import numpy as np
from scipy.linalg import eigh_tridiagonal

from .model import DomainGeometry
from .rootfind import bisect, sign_change_brackets


class NoRootInBracket(RuntimeError):
    """The scan window contained no sign change; pole enumeration failed."""


class ConvergenceFailure(RuntimeError):
    """The tridiagonal eigensolver did not converge."""


class ConstantSource(enum.Enum):
    """Which trace constant feeds the range formulas."""

    EXPLICIT = "explicit"
    OPTIMAL_1D = "optimal-1d"


class TraceMethod(enum.Enum):
    EXPLICIT_ONLY = "explicit-only"
    TRANSCENDENTAL = "transcendental"
    FINITE_DIFFERENCE = "finite-difference"


@dataclass(frozen=True)
class TraceConstantReport:
    theta: float
    explicit_value: float
    optimal_value: float | None
    dirichlet_bound: float
    method: TraceMethod

    def __post_init__(self) -> None:
        if self.optimal_value is not None:
            # explicit constant is sub-optimal; allow rounding slack
            tol = 1e-9 * max(1.0, abs(self.optimal_value))
            if self.explicit_value > self.optimal_value + tol:
                raise ValueError("explicit constant exceeds the optimal one")
            if self.optimal_value > self.dirichlet_bound + tol:
                raise ValueError("optimal constant exceeds the Dirichlet bound")


def explicit_constant(theta: float, g: DomainGeometry) -> float:
    """Explicit constant theta (d/R - theta), saturating at d^2/(4R^2).

    Continuous and non-decreasing in theta, zero at theta = 0.
    """
    if theta < 0.0:
        raise ValueError("theta must be nonnegative")
    s = g.d_over_r
    if theta < 0.5 * s:
        return theta * (s - theta)
    return 0.25 * s * s


def dirichlet_bound(L: float) -> float:
    """First Dirichlet eigenvalue pi^2 / L^2 of the interval (0, L)."""
    if L <= 0.0:
        raise ValueError("L must be positive")
    return math.pi * math.pi / (L * L)


def robin_secular(mu: float, theta: float, L: float) -> float:
    """Pole-free form of tan(mu L) = 2 theta mu / (mu^2 - theta^2)."""
    return (mu * mu - theta * theta) * math.sin(mu * L) - 2.0 * theta * mu * math.cos(
        mu * L
    )


def _first_robin_mu(theta: float, L: float) -> float:
    """Smallest positive root of the Robin characteristic equation."""
    step = min(0.01, math.pi / (100.0 * L))
    head = np.geomspace(1e-9, step, 64)
    tail = np.arange(step, math.pi / L + 1.0 + step, step)
    grid = np.concatenate([head, tail])
    vals = (grid * grid - theta * theta) * np.sin(grid * L) - 2.0 * theta * grid * np.cos(
        grid * L
    )
    brackets = sign_change_brackets(grid, vals, max_count=1)
    if not brackets:
        raise NoRootInBracket(
            f"no sign change for theta={theta}, L={L}; defective pole enumeration"
        )
    lo, hi = brackets[0]
    return bisect(lambda m: robin_secular(m, theta, L), lo, hi)


def optimal_constant_1d(theta: float, L: float = 1.0, tol: float = 1e-12) -> float:
    """Optimal 1D trace constant: first Robin eigenvalue mu_1^2 on (0, L).

    The root is bracketed by a sign scan of the pole-free secular function
    and refined by bisection well below ``tol``.  theta = 0 returns 0 by
    convention (constant eigenfunction).
    """
    if theta < 0.0:
        raise ValueError("theta must be nonnegative")
    if L <= 0.0 or tol <= 0.0:
        raise ValueError("L and tol must be positive")
    if theta == 0.0:
        return 0.0
    mu = _first_robin_mu(theta, L)
    return mu * mu


def robin_spectrum_fd(
    theta: float, L: float = 1.0, n_nodes: int = 2000, n_modes: int = 1
) -> np.ndarray:
    """Smallest Robin eigenvalues from a symmetric finite-difference solve.

    Ghost-node elimination folds the Robin conditions into the boundary
    rows; weighting those rows by 1/2 yields a symmetric generalized
    problem with lumped mass diag(1/2, 1, ..., 1, 1/2), symmetrised here
    into an ordinary tridiagonal one.  Second-order accurate.
    """
    if theta <= 0.0:
        raise ValueError("theta must be positive")
    if L <= 0.0:
        raise ValueError("L must be positive")
    if n_nodes < 16:
        raise ValueError("n_nodes must be at least 16")
    if n_modes < 1:
        raise ValueError("n_modes must be at least 1")
    h = L / (n_nodes - 1)
    inv_h2 = 1.0 / (h * h)
    diag = np.full(n_nodes, 2.0 * inv_h2)
    diag[0] = diag[-1] = 2.0 * (1.0 + h * theta) * inv_h2
    off = np.full(n_nodes - 1, -inv_h2)
    off[0] = off[-1] = -math.sqrt(2.0) * inv_h2
    try:
        vals = eigh_tridiagonal(
            diag, off, eigvals_only=True, select="i", select_range=(0, n_modes - 1)
        )
    except np.linalg.LinAlgError as exc:  # pragma: no cover - solver hiccup
        raise ConvergenceFailure(str(exc)) from exc
    return np.asarray(vals, dtype=float)


def robin_eigenfunction_1d(
    theta: float, L: float, x: np.ndarray
) -> tuple[np.ndarray, float]:
    """First Robin eigenfunction cos(mu x) + (theta/mu) sin(mu x) and mu_1^2.

    Positive on [0, L]; used as the pairing weight of the growth functional
    in instability checks.
    """
    if theta <= 0.0:
        raise ValueError("theta must be positive")
    mu = _first_robin_mu(theta, L)
    psi = np.cos(mu * x) + (theta / mu) * np.sin(mu * x)
    return psi, mu * mu


def trace_report(
    theta: float,
    g: DomainGeometry,
    method: TraceMethod = TraceMethod.TRANSCENDENTAL,
    n_nodes: int = 2000,
) -> TraceConstantReport:
    """Bundle the explicit constant with the 1D optimal one (if available)."""
    expl = explicit_constant(theta, g)
    if g.dimension != 1:
        # no optimal constant or Dirichlet eigenvalue is computed beyond 1D
        return TraceConstantReport(
            theta=theta,
            explicit_value=expl,
            optimal_value=None,
            dirichlet_bound=math.inf,
            method=TraceMethod.EXPLICIT_ONLY,
        )
    L = g.interval_length
    if method is TraceMethod.EXPLICIT_ONLY:
        opt = None
    elif method is TraceMethod.FINITE_DIFFERENCE:
        opt = float(robin_spectrum_fd(theta, L, n_nodes=n_nodes)[0]) if theta > 0 else 0.0
    else:
        opt = optimal_constant_1d(theta, L)
    return TraceConstantReport(
        theta=theta,
        explicit_value=expl,
        optimal_value=opt,
        dirichlet_bound=dirichlet_bound(L),
        method=method,
    )
