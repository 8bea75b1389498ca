"""Sign-scan bracketing and bisection for scalar root finding.

Characteristic equations in this package are rewritten in pole-free product
form before scanning, so plain bisection on sign changes is robust.
"""

from __future__ import annotations

from typing import Callable

import numpy as np


def sign_change_brackets(
    grid: np.ndarray, values: np.ndarray, max_count: int | None = None
) -> list[tuple[float, float]]:
    """Brackets (lo, hi) around each sign change of sampled values.

    A value that is exactly zero yields the degenerate bracket (x, x).
    """
    brackets: list[tuple[float, float]] = []
    v = np.asarray(values)
    zero = v == 0.0
    change = (v[:-1] * v[1:]) < 0.0
    hits = np.flatnonzero(zero[:-1] | change)
    for i in hits:
        if zero[i]:
            brackets.append((float(grid[i]), float(grid[i])))
        else:
            brackets.append((float(grid[i]), float(grid[i + 1])))
        if max_count is not None and len(brackets) >= max_count:
            return brackets
    if max_count is None and zero[-1]:
        brackets.append((float(grid[-1]), float(grid[-1])))
    return brackets


def bisect(
    f: Callable[[float], float],
    lo: float,
    hi: float,
    xtol: float = 0.0,
    max_iter: int = 200,
) -> float:
    """Bisection on a sign-change bracket, refined to near machine precision.

    ``xtol`` only loosens the stop criterion; the default runs until the
    bracket width is at the rounding floor.
    """
    if lo == hi:
        return lo
    flo = f(lo)
    if flo == 0.0:
        return lo
    fhi = f(hi)
    if fhi == 0.0:
        return hi
    if flo * fhi > 0.0:
        raise ValueError(f"no sign change on [{lo}, {hi}]")
    for _ in range(max_iter):
        mid = 0.5 * (lo + hi)
        if mid == lo or mid == hi:
            break
        fmid = f(mid)
        if fmid == 0.0:
            return mid
        if flo * fmid < 0.0:
            hi = mid
        else:
            lo, flo = mid, fmid
        if hi - lo <= xtol:
            break
    return 0.5 * (lo + hi)
