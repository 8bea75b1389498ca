"""Deterministic stability verdicts and admissible noise-intensity ranges.

All intervals are expressed in units of alpha^2/2.  Writing A = C - beta
for a valid trace constant C and B = theta - lam (boundary noise) or
B = lam - theta (interior noise), the admissible ranges are

    boundary:  [max(0, B), Z2)  if A > 2B,     (Z1, Z2)  if 2B >= A > B,
    interior:  [max(0, -A), T2) if B > -2A,    (T1, T2)  if -2A >= B > -A,

with endpoints

    Z_{1,2} = 3A - B   -/+ 2 sqrt(2A (A - B)),
    T_{1,2} = A  + 3B  -/+ 2 sqrt(2B (A + B)).

Each range is exactly the set of alpha^2/2 for which the associated scalar
quadratic stays positive on Z > 0; the brute-force positivity oracle below
rechecks that condition sample-wise and is kept independent of the closed
forms.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass

import numpy as np

from .model import DomainGeometry, IntensityInterval, ModelParams, validate_params
from .trace_constants import ConstantSource, explicit_constant, optimal_constant_1d


class NegativeDiscriminant(ArithmeticError):
    """The square root in the endpoint formula has a negative argument."""


class HypothesisFailed(RuntimeError):
    """A stated precondition of the range construction does not hold."""


class EmptyFeasibleSet(RuntimeError):
    """No theta satisfies the feasibility conditions."""


class Verdict(enum.Enum):
    STABLE = "stable"
    UNSTABLE = "unstable"
    INCONCLUSIVE = "inconclusive"


@dataclass(frozen=True)
class DeterministicVerdict:
    verdict: Verdict
    threshold_constant: float
    decay_rate: float | None
    source: ConstantSource


@dataclass(frozen=True)
class ThetaSweepResult:
    """Per-theta intervals, their merged union and the envelope."""

    intervals: tuple[IntensityInterval, ...]
    union: tuple[tuple[float, float], ...]
    connected: bool
    envelope: IntensityInterval
    feasible_theta: tuple[float, float]
    notes: tuple[str, ...]


N_EPS_GRID = 1000


def _constant(theta: float, g: DomainGeometry, source: ConstantSource) -> float:
    if source is ConstantSource.OPTIMAL_1D:
        if g.dimension != 1:
            raise ValueError("the optimal constant is only available in one dimension")
        return optimal_constant_1d(theta, g.interval_length)
    return explicit_constant(theta, g)


def deterministic_verdict(
    p: ModelParams, g: DomainGeometry, source: ConstantSource = ConstantSource.EXPLICIT
) -> DeterministicVerdict:
    """Stability of the zero state of the noise-free problem.

    Stable when the trace constant at theta = lam exceeds beta, with decay
    rate 2 delta, delta = max over eps in (0, lam) of min(eps, C_{lam-eps}
    - beta), evaluated on a uniform eps grid.  Instability can only be
    concluded from the optimal constant; the explicit one being below beta
    is inconclusive.
    """
    validate_params(p, g)
    c_lam = _constant(p.lam, g, source)
    if c_lam > p.beta:
        eps = p.lam * np.arange(1, N_EPS_GRID + 1) / (N_EPS_GRID + 1)
        if source is ConstantSource.OPTIMAL_1D:
            c_shift = np.array([_constant(p.lam - e, g, source) for e in eps])
        else:
            c_shift = np.array([explicit_constant(p.lam - e, g) for e in eps])
        delta = float(np.max(np.minimum(eps, c_shift - p.beta)))
        if delta <= 0.0:
            # grid too coarse to exhibit a positive margin
            return DeterministicVerdict(Verdict.INCONCLUSIVE, c_lam, None, source)
        return DeterministicVerdict(Verdict.STABLE, c_lam, 2.0 * delta, source)
    if c_lam < p.beta and source is ConstantSource.OPTIMAL_1D:
        return DeterministicVerdict(Verdict.UNSTABLE, c_lam, None, source)
    return DeterministicVerdict(Verdict.INCONCLUSIVE, c_lam, None, source)


def boundary_endpoints(A: float, B: float) -> tuple[float, float]:
    """Z_{1,2} = 3A - B -/+ 2 sqrt(2A(A - B))."""
    disc = 2.0 * A * (A - B)
    if disc < 0.0:
        raise NegativeDiscriminant(f"2A(A-B) = {disc} < 0 (requires A > B, A > 0)")
    root = 2.0 * math.sqrt(disc)
    return 3.0 * A - B - root, 3.0 * A - B + root


def interior_endpoints(A: float, B: float) -> tuple[float, float]:
    """T_{1,2} = A + 3B -/+ 2 sqrt(2B(A + B))."""
    disc = 2.0 * B * (A + B)
    if disc < 0.0:
        raise NegativeDiscriminant(f"2B(A+B) = {disc} < 0 (requires B > -A, B > 0)")
    root = 2.0 * math.sqrt(disc)
    return A + 3.0 * B - root, A + 3.0 * B + root


def boundary_noise_range(
    p: ModelParams, theta: float, C: float
) -> IntensityInterval | None:
    """Admissible alpha^2/2 range for noise on the boundary, or None.

    C is a valid trace constant for theta (explicit or optimal).  The
    hypotheses require A = C - beta > 0 and A > B = theta - lam.
    """
    A = C - p.beta
    B = theta - p.lam
    if not (A > 0.0 and A > B):
        return None
    z1, z2 = boundary_endpoints(A, B)
    if A > 2.0 * B:
        return IntensityInterval(
            lower=max(0.0, B),
            upper=z2,
            lower_closed=True,
            theorem_case="boundary:A>2B",
            theta_used=theta,
        )
    return IntensityInterval(
        lower=z1,
        upper=z2,
        lower_closed=False,
        theorem_case="boundary:2B>=A>B",
        theta_used=theta,
    )


def interior_noise_range(
    p: ModelParams, theta: float, C: float
) -> IntensityInterval | None:
    """Admissible alpha^2/2 range for noise inside the domain, or None.

    With A = C - beta and B = lam - theta the hypotheses require B > 0 and
    A + B > 0 (theta strictly below lam, possibly with C below beta).
    """
    A = C - p.beta
    B = p.lam - theta
    if not (B > 0.0 and A + B > 0.0):
        return None
    t1, t2 = interior_endpoints(A, B)
    if B > -2.0 * A:
        return IntensityInterval(
            lower=max(0.0, -A),
            upper=t2,
            lower_closed=True,
            theorem_case="interior:B>-2A",
            theta_used=theta,
        )
    return IntensityInterval(
        lower=t1,
        upper=t2,
        lower_closed=False,
        theorem_case="interior:-2A>=B>-A",
        theta_used=theta,
    )


def theta_feasible_interval_boundary(
    p: ModelParams, g: DomainGeometry
) -> tuple[float, float] | None:
    """Open theta interval on (0, d/2R] where C_theta - beta > theta - lam > 0.

    Computed as the intersection of (lam, d/2R] with the root interval of
    theta^2 - (d/R - 1) theta + (beta - lam); the lower root enters the
    bound, keeping the interval consistent with the quadratic it solves.
    Returns None when the discriminant is nonpositive or the intersection
    is empty.
    """
    validate_params(p, g)
    s = g.d_over_r
    psi = (s - 1.0) ** 2 - 4.0 * (p.beta - p.lam)
    if psi <= 0.0:
        return None
    root = math.sqrt(psi)
    lo = max(p.lam, 0.5 * (s - 1.0 - root))
    hi = min(0.5 * s, 0.5 * (s - 1.0 + root))
    if not lo < hi:
        return None
    return lo, hi


def theta_feasible_interval_interior(
    p: ModelParams, g: DomainGeometry
) -> tuple[float, float] | None:
    """Open theta interval in (0, lam) where C_theta + lam - theta > beta.

    The map theta -> C_theta - theta is concave, so the feasible set is a
    single interval; its right end may continue onto the saturated branch
    C = d^2/4R^2.  Positivity of the bounds needs beta < lam or dimension
    above half-diameter (d/R > 1).
    """
    validate_params(p, g)
    s = g.d_over_r
    c = p.beta - p.lam
    phi = (s - 1.0) ** 2 - 4.0 * c
    if phi <= 0.0:
        return None
    root = math.sqrt(phi)
    lo_parab = 0.5 * (s - 1.0 - root)
    hi_parab = 0.5 * (s - 1.0 + root)
    if hi_parab <= 0.0:
        return None
    if hi_parab < 0.5 * s:
        hi = hi_parab
    else:
        # condition continues as d^2/4R^2 - theta > c past the vertex
        hi = 0.25 * s * s - c
    lo = max(0.0, lo_parab)
    hi = min(hi, p.lam)
    if not lo < hi:
        return None
    return lo, hi


def theta_hat_persistence_interior(p: ModelParams, g: DomainGeometry) -> float:
    """Unique theta-hat below lam solving theta + C_theta = beta + lam.

    Requires beta < C_lam.  theta + C_theta is strictly increasing, so the
    root is a closed-form quadratic root on the rising branch of C and a
    linear shift on the saturated branch.
    """
    validate_params(p, g)
    if not p.beta < explicit_constant(p.lam, g):
        raise HypothesisFailed("needs beta < C_lam (explicit constant)")
    s = g.d_over_r
    target = p.beta + p.lam
    knee = 0.5 * s + 0.25 * s * s
    if target <= knee:
        disc = (1.0 + s) ** 2 - 4.0 * target
        return 0.5 * ((1.0 + s) - math.sqrt(disc))
    return target - 0.25 * s * s


def quadratic_positivity_oracle(
    A: float,
    B: float,
    alpha_sq: float,
    placement: str,
    z_max: float = 1e3,
    n_z: int = 10_000,
) -> bool:
    """Brute-force check of the scalar positivity condition behind the ranges.

    Samples the quadratic on a log-spaced grid in (0, z_max] and returns
    True iff it is strictly positive at every sample.  ``placement`` is
    "boundary" (quadratic in X/Y) or "interior" (quadratic in Y/X), where
    X, Y are the squared interior and boundary masses.
    """
    if n_z < 1000:
        raise ValueError("n_z must be at least 1000")
    if z_max <= 0.0:
        raise ValueError("z_max must be positive")
    if alpha_sq < 0.0:
        raise ValueError("alpha_sq must be nonnegative")
    z = np.geomspace(z_max * 1e-9, z_max, n_z)
    if placement == "boundary":
        q = 2.0 * A * z * z + (2.0 * A - 2.0 * B - alpha_sq) * z + (alpha_sq - 2.0 * B)
    elif placement == "interior":
        q = 2.0 * B * z * z + (2.0 * (A + B) - alpha_sq) * z + (2.0 * A + alpha_sq)
    else:
        raise ValueError(f"unknown placement {placement!r}")
    return bool(np.all(q > 0.0))


def _merge_intervals(
    intervals: list[IntensityInterval],
) -> tuple[tuple[tuple[float, float], ...], bool]:
    if not intervals:
        return (), False
    items = sorted(intervals, key=lambda iv: (iv.lower, iv.upper))
    merged: list[list[float]] = [[items[0].lower, items[0].upper]]
    for iv in items[1:]:
        cur = merged[-1]
        if iv.lower < cur[1] or (iv.lower == cur[1] and iv.lower_closed):
            cur[1] = max(cur[1], iv.upper)
        else:
            merged.append([iv.lower, iv.upper])
    return tuple((lo, hi) for lo, hi in merged), len(merged) == 1


def optimize_range_over_theta(
    p: ModelParams,
    g: DomainGeometry,
    placement: str,
    source: ConstantSource = ConstantSource.EXPLICIT,
    n_theta: int = 2000,
) -> ThetaSweepResult:
    """Sweep theta over its feasible interval and merge the ranges.

    Reports every per-theta interval, the union of overlapping intervals,
    whether that union is a single connected interval, and the envelope
    (smallest lower endpoint, largest upper endpoint).  Stability is
    guaranteed on the union; the envelope equals it exactly when connected.
    """
    validate_params(p, g)
    if n_theta < 1:
        raise ValueError("n_theta must be at least 1")
    notes: list[str] = []
    if placement == "boundary":
        feasible = theta_feasible_interval_boundary(p, g)
        range_fn = boundary_noise_range
    elif placement == "interior":
        feasible = theta_feasible_interval_interior(p, g)
        range_fn = interior_noise_range
        if p.beta >= p.lam:
            notes.append(
                "small-theta branch unavailable: beta >= lam, so the lower "
                "theta bound is strictly positive"
            )
        if g.d_over_r <= 1.0:
            notes.append(
                "dimension does not exceed half-diameter (d/R <= 1): the "
                "quadratic theta bounds cannot be positive unless beta < lam"
            )
    else:
        raise ValueError(f"unknown placement {placement!r}")
    if feasible is None:
        raise EmptyFeasibleSet(
            f"no feasible theta for placement={placement!r} with beta={p.beta}, "
            f"lam={p.lam}, d/R={g.d_over_r}"
        )
    lo, hi = feasible
    if hi > lo:
        thetas = np.linspace(lo, hi, n_theta + 2)[1:-1]
    else:
        thetas = np.array([lo])
    intervals: list[IntensityInterval] = []
    for theta in thetas:
        C = _constant(float(theta), g, source)
        iv = range_fn(p, float(theta), C)
        if iv is not None:
            intervals.append(iv)
    if not intervals:
        raise EmptyFeasibleSet(
            "the hypotheses failed at every sampled theta inside the feasible interval"
        )
    union, connected = _merge_intervals(intervals)
    low_iv = min(intervals, key=lambda iv: iv.lower)
    high_iv = max(intervals, key=lambda iv: iv.upper)
    envelope = IntensityInterval(
        lower=low_iv.lower,
        upper=high_iv.upper,
        lower_closed=low_iv.lower_closed,
        theorem_case="envelope",
        theta_used=low_iv.theta_used,
    )
    return ThetaSweepResult(
        intervals=tuple(intervals),
        union=union,
        connected=connected,
        envelope=envelope,
        feasible_theta=(lo, hi),
        notes=tuple(notes),
    )
