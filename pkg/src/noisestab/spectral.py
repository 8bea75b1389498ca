"""Separated-variable modes of the linearised problem on (0, 1).

After factoring out e^{beta t}, separation of variables reduces the
dynamical boundary conditions to the characteristic equation

    tan mu = (2 mu^3 - 2 b mu) / (mu^4 - (2b + 1) mu^2 + b^2),    b = beta + lam,

whose positive roots mu_n give eigenfunctions

    phi_n(x) = cos(mu_n x) + ((b - mu_n^2) / mu_n) sin(mu_n x)

and growth rates beta - mu_n^2.  Root finding scans the pole-free product
form of the equation, which also covers the exceptional cos(mu) = 0 roots
(possible only when mu^2 = (b - mu^2)^2).  The first root behaves like
mu_1^2 = (2/3) b - b^2/27 + O(b^3) for small b, so the scan grid is
refined near zero.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass, replace

import numpy as np

from .model import HState, ModelParams, h_inner, h_norm_sq
from .rootfind import bisect, sign_change_brackets


SCAN_STEP = 1e-3
_WINDOW_EXTENSIONS = 6


class RootCountShortfall(RuntimeError):
    """The scan window was exhausted before the requested roots appeared."""


class Branch(enum.Enum):
    TAN = "tan"
    COS_ZERO = "cos-zero"


@dataclass(frozen=True)
class SpectralMode:
    index: int
    mu: float
    coeff_sin: float
    branch: Branch
    residual: float
    coeff_cos: float = 1.0
    growth_rate: float | None = None

    def eigenfunction(self, x: np.ndarray | float) -> np.ndarray | float:
        return self.coeff_cos * np.cos(self.mu * x) + self.coeff_sin * np.sin(
            self.mu * x
        )


@dataclass(frozen=True)
class InstabilityReport:
    unstable: bool
    margin: float
    mu1_sq: float


def characteristic_residual(mu: float, b: float) -> float:
    """Pole-free characteristic function; its zeros are the mode frequencies.

    g(mu) = (mu^4 - (2b+1) mu^2 + b^2) sin(mu) - (2 mu^3 - 2 b mu) cos(mu).
    """
    mu2 = mu * mu
    return (mu2 * mu2 - (2.0 * b + 1.0) * mu2 + b * b) * math.sin(mu) - (
        2.0 * mu2 * mu - 2.0 * b * mu
    ) * math.cos(mu)


def _residual_scale(mu: float, b: float) -> float:
    mu2 = mu * mu
    return mu2 * mu2 + (2.0 * b + 1.0) * mu2 + b * b + 2.0 * mu2 * mu + 2.0 * b * mu


def _char_values(mu: np.ndarray, b: float) -> np.ndarray:
    mu2 = mu * mu
    return (mu2 * mu2 - (2.0 * b + 1.0) * mu2 + b * b) * np.sin(mu) - (
        2.0 * mu2 * mu - 2.0 * b * mu
    ) * np.cos(mu)


def mu_roots(b: float, n_roots: int = 1, tol: float = 1e-12) -> list[SpectralMode]:
    """First ``n_roots`` positive mode frequencies, ascending.

    Sign-scans the pole-free characteristic function with step 1e-3 plus a
    geometric prefix near zero (the first root shrinks like sqrt(2b/3)),
    then bisects each bracket.  The window extends automatically; raises
    RootCountShortfall if it caps out.
    """
    if b <= 0.0:
        raise ValueError("b = beta + lam must be positive")
    if n_roots < 1:
        raise ValueError("n_roots must be at least 1")
    if tol <= 0.0:
        raise ValueError("tol must be positive")
    window = (n_roots + 2) * math.pi
    start = 1e-9
    modes: list[SpectralMode] = []
    for _ in range(_WINDOW_EXTENSIONS):
        head = np.geomspace(start, SCAN_STEP, 128)
        tail = np.arange(SCAN_STEP, window, SCAN_STEP)
        grid = np.concatenate([head, tail])
        vals = _char_values(grid, b)
        brackets = sign_change_brackets(grid, vals, max_count=n_roots)
        if len(brackets) >= n_roots:
            break
        window *= 2.0
    else:
        raise RootCountShortfall(
            f"found {len(brackets)} of {n_roots} roots below mu = {window}"
        )
    for k, (lo, hi) in enumerate(brackets[:n_roots], start=1):
        mu = bisect(lambda m: characteristic_residual(m, b), lo, hi)
        res = abs(characteristic_residual(mu, b)) / _residual_scale(mu, b)
        branch = Branch.COS_ZERO if abs(math.cos(mu)) < 1e-9 else Branch.TAN
        modes.append(
            SpectralMode(
                index=k,
                mu=mu,
                coeff_sin=(b - mu * mu) / mu,
                branch=branch,
                residual=res,
            )
        )
        if res > tol:
            raise RootCountShortfall(
                f"root {k} at mu={mu} has scaled residual {res} above tol={tol}"
            )
    return modes


def modes_for_params(
    p: ModelParams, n_roots: int = 1, tol: float = 1e-12
) -> list[SpectralMode]:
    """Modes of the linearisation at zero, with growth rates beta - mu^2."""
    return [
        replace(m, growth_rate=p.beta - m.mu * m.mu)
        for m in mu_roots(p.b, n_roots=n_roots, tol=tol)
    ]


def mu1_squared_asymptotic(b: float) -> float:
    """Small-b expansion of the first squared frequency: (2/3) b - b^2/27."""
    if b <= 0.0:
        raise ValueError("b must be positive")
    return (2.0 / 3.0) * b - b * b / 27.0


def instability_predicate(p: ModelParams, tol: float = 1e-12) -> InstabilityReport:
    """True iff beta exceeds the first squared mode frequency mu_1^2."""
    mu1_sq = mu_roots(p.b, n_roots=1, tol=tol)[0].mu ** 2
    margin = p.beta - mu1_sq
    return InstabilityReport(unstable=margin > 0.0, margin=margin, mu1_sq=mu1_sq)


def series_solution(
    U0: HState,
    modes: list[SpectralMode],
    p: ModelParams,
    x: np.ndarray | float,
    t: float,
) -> np.ndarray | float:
    """Evaluate the truncated mode expansion of the linearised solution.

    u(x, t) = sum_n <U0, Phi_n>_H / ||Phi_n||_H^2 e^{(beta - mu_n^2) t}
    phi_n(x), with H-inner products taken on the grid carrying U0
    (trapezoid plus both boundary point masses).
    """
    if not modes:
        raise ValueError("modes must be nonempty")
    if t < 0.0:
        raise ValueError("t must be nonnegative")
    n = U0.n_nodes
    grid = np.linspace(0.0, 1.0, n)
    h = 1.0 / (n - 1)
    out = np.zeros_like(np.asarray(x, dtype=float))
    for mode in modes:
        phi = HState(mode.eigenfunction(grid))
        coeff = h_inner(U0, phi, h) / h_norm_sq(phi, h)
        rate = p.beta - mode.mu * mode.mu
        out = out + coeff * math.exp(rate * t) * mode.eigenfunction(x)
    if np.isscalar(x):
        return float(out)
    return out
