"""Finite-difference Euler-Maruyama simulation on the unit-length interval.

The state carries the solution on a uniform grid including both endpoints.
Interior nodes follow the reaction-diffusion drift with the 3-point
Laplacian; the two endpoint nodes evolve by the dynamical boundary
condition with a one-sided discrete normal derivative (second-order
stencil by default, first-order behind a flag).  A single scalar Wiener
increment per step drives every noised node:

    boundary placement:  du = (-dnu_h u - lam u) dt + alpha u dW  at x = 0, L
    interior placement:  du = (Lap_h u + beta u - u^3) dt + alpha u dW  inside

The diffusion coefficient is evaluated at the left endpoint of each step
(Ito convention, no Stratonovich correction).  Two schemes are available:
explicit Euler-Maruyama (requires dt <= 0.25 h^2) and a semi-implicit
variant that treats the full linear spatial operator implicitly through a
precomputed tridiagonal factorisation, leaving reaction and noise
explicit.  Monte Carlo ensembles run all paths through the same vectorised
engine; every operation is elementwise across paths, so each path is
bit-identical to a standalone run with the same (seed, path_index) stream.

Linearised runs renormalise the state to unit H-norm on a fixed schedule
and fold the discarded log-factors back into the recorded values.
Nonlinear runs renormalise only below an H-norm of 1e-60, where the cubic
term sits far beneath the rounding floor of the linear drift, purely to
avoid exponent underflow on long stabilised trajectories.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace
from functools import lru_cache

import numpy as np

from .model import (
    DomainGeometry,
    HState,
    ModelParams,
    NoisePlacement,
    h_inner,
    validate_params,
)

EXPLICIT = "explicit"
SEMI_IMPLICIT = "semi-implicit"

_STABILITY_FRACTION = 0.25
_FLOOR_NORM_SQ = 1e-120  # squared H-norm; sqrt gives the 1e-60 state floor
_DW_CHUNK = 4096


class NonFiniteState(RuntimeError):
    """A node became NaN or infinite; usually dt is too large."""


class ZeroInitialState(ValueError):
    """A Lyapunov estimate needs a nonzero initial state."""


@dataclass(frozen=True)
class SimConfig:
    """Grid, stepping and bookkeeping knobs of one simulation run."""

    n_nodes: int
    dt: float
    t_final: float
    t_burn_in: float | None = None  # default 0.1 * t_final
    seed: int = 0
    linearized: bool = False
    renormalize_every: int = 64
    scheme: str = EXPLICIT
    boundary_stencil_order: int = 2
    n_records: int = 512

    def __post_init__(self) -> None:
        if self.n_nodes < 3:
            raise ValueError("n_nodes must be at least 3")
        if not (self.dt > 0.0 and math.isfinite(self.dt)):
            raise ValueError("dt must be positive")
        if not (self.t_final > 0.0 and math.isfinite(self.t_final)):
            raise ValueError("t_final must be positive")
        if self.t_burn_in is not None and not 0.0 <= self.t_burn_in < self.t_final:
            raise ValueError("t_burn_in must lie in [0, t_final)")
        if not 0 <= self.seed < 2**64:
            raise ValueError("seed must fit in 64 unsigned bits")
        if self.renormalize_every < 1:
            raise ValueError("renormalize_every must be positive")
        if self.scheme not in (EXPLICIT, SEMI_IMPLICIT):
            raise ValueError(f"unknown scheme {self.scheme!r}")
        if self.boundary_stencil_order not in (1, 2):
            raise ValueError("boundary_stencil_order must be 1 or 2")
        if self.n_records < 2:
            raise ValueError("n_records must be at least 2")

    @property
    def burn_in(self) -> float:
        return 0.1 * self.t_final if self.t_burn_in is None else self.t_burn_in


@dataclass(frozen=True, eq=False)
class PathRecord:
    """One path's log-norm trajectory and finite-time Lyapunov estimate."""

    seed: int
    path_index: int
    times: np.ndarray
    log_h_norm_sq: np.ndarray
    lyapunov_estimate: float
    final_state: HState | None = None


@dataclass(frozen=True, eq=False)
class EnsembleSummary:
    """Order-independent aggregate of per-path Lyapunov estimates."""

    estimates: np.ndarray
    mean: float
    median: float
    standard_error: float | None
    fraction_negative: float
    paths: tuple[PathRecord, ...]


class _Engine:
    """Precomputed stencils and stepping kernels on (paths, nodes) arrays."""

    def __init__(self, p: ModelParams, g: DomainGeometry, cfg: SimConfig):
        validate_params(p, g)
        L = g.interval_length
        n = cfg.n_nodes
        h = L / (n - 1)
        if cfg.scheme == EXPLICIT and cfg.dt > _STABILITY_FRACTION * h * h:
            raise ValueError(
                f"explicit scheme needs dt <= {_STABILITY_FRACTION} h^2 = "
                f"{_STABILITY_FRACTION * h * h:.3e}, got dt = {cfg.dt}"
            )
        self.p = p
        self.cfg = cfg
        self.h = h
        self.inv_h = 1.0 / h
        self.inv_h2 = 1.0 / (h * h)
        self.inv_2h = 0.5 / h
        self.alpha = p.effective_alpha
        self.placement = p.placement if self.alpha != 0.0 else NoisePlacement.NONE
        self.has_noise = self.placement is not NoisePlacement.NONE
        if cfg.scheme == SEMI_IMPLICIT:
            self._build_implicit_system(n)

    def _build_implicit_system(self, n: int) -> None:
        p, cfg, h = self.p, self.cfg, self.h
        r = cfg.dt * self.inv_h2
        sub = np.full(n, -r)
        diag = np.full(n, 1.0 + 2.0 * r)
        sup = np.full(n, -r)
        sub[0] = 0.0
        sup[-1] = 0.0
        diag[0] = diag[-1] = 1.0 + cfg.dt * self.inv_h + cfg.dt * p.lam
        if cfg.boundary_stencil_order == 2:
            # eliminate the (0,2) and (n-1,n-3) corner entries with the
            # adjacent interior rows; factor -h/2 transfers to the rhs
            sup[0] = 0.5 * h - cfg.dt * self.inv_h
            sub[-1] = 0.5 * h - cfg.dt * self.inv_h
            self.corner = True
            self.half_h = 0.5 * h
        else:
            sup[0] = -cfg.dt * self.inv_h
            sub[-1] = -cfg.dt * self.inv_h
            self.corner = False
            self.half_h = 0.0
        bp = np.empty(n)
        w = np.zeros(n)
        bp[0] = diag[0]
        for i in range(1, n):
            w[i] = sub[i] / bp[i - 1]
            bp[i] = diag[i] - w[i] * sup[i - 1]
        if not np.all(np.isfinite(bp)) or np.any(bp == 0.0):
            raise NonFiniteState("degenerate implicit system factorisation")
        self.th_w = w
        self.th_sup = sup
        self.th_inv_bp = 1.0 / bp

    # -- kernels ---------------------------------------------------------

    def norm_sq_rows(self, U: np.ndarray) -> np.ndarray:
        sq = U * U
        s = sq.sum(axis=1)
        return self.h * (s - 0.5 * sq[:, 0] - 0.5 * sq[:, -1]) + sq[:, 0] + sq[:, -1]

    def _boundary_drift(self, U: np.ndarray, out: np.ndarray) -> None:
        lam = self.p.lam
        if self.cfg.boundary_stencil_order == 2:
            out[:, 0] = (-3.0 * U[:, 0] + 4.0 * U[:, 1] - U[:, 2]) * self.inv_2h
            out[:, -1] = (-3.0 * U[:, -1] + 4.0 * U[:, -2] - U[:, -3]) * self.inv_2h
        else:
            out[:, 0] = (U[:, 1] - U[:, 0]) * self.inv_h
            out[:, -1] = (U[:, -2] - U[:, -1]) * self.inv_h
        out[:, 0] -= lam * U[:, 0]
        out[:, -1] -= lam * U[:, -1]

    def _reaction(self, inner: np.ndarray) -> np.ndarray:
        if self.cfg.linearized:
            return self.p.beta * inner
        return self.p.beta * inner - inner * inner * inner

    def _apply_noise(self, U: np.ndarray, out: np.ndarray, dW: np.ndarray) -> None:
        gain = self.alpha * dW
        if self.placement is NoisePlacement.BOUNDARY:
            out[:, 0] += gain * U[:, 0]
            out[:, -1] += gain * U[:, -1]
        elif self.placement is NoisePlacement.INTERIOR:
            out[:, 1:-1] += gain[:, None] * U[:, 1:-1]

    def step_rows(self, U: np.ndarray, dW: np.ndarray | None) -> np.ndarray:
        dt = self.cfg.dt
        if self.cfg.scheme == EXPLICIT:
            drift = np.empty_like(U)
            drift[:, 1:-1] = (U[:, :-2] - 2.0 * U[:, 1:-1] + U[:, 2:]) * self.inv_h2
            drift[:, 1:-1] += self._reaction(U[:, 1:-1])
            self._boundary_drift(U, drift)
            new = U + dt * drift
        else:
            rhs = U.copy()
            rhs[:, 1:-1] += dt * self._reaction(U[:, 1:-1])
            new = rhs
        if self.has_noise and dW is not None:
            self._apply_noise(U, new, dW)
        if self.cfg.scheme == SEMI_IMPLICIT:
            new = self._solve(new)
        return new

    def _solve(self, rhs: np.ndarray) -> np.ndarray:
        if self.corner:
            rhs[:, 0] += self.half_h * rhs[:, 1]
            rhs[:, -1] += self.half_h * rhs[:, -2]
        w = self.th_w
        sup = self.th_sup
        inv_bp = self.th_inv_bp
        n = rhs.shape[1]
        for i in range(1, n):
            rhs[:, i] -= w[i] * rhs[:, i - 1]
        rhs[:, n - 1] *= inv_bp[n - 1]
        for i in range(n - 2, -1, -1):
            rhs[:, i] = (rhs[:, i] - sup[i] * rhs[:, i + 1]) * inv_bp[i]
        return rhs


@lru_cache(maxsize=16)
def _cached_engine(p: ModelParams, g: DomainGeometry, cfg: SimConfig) -> _Engine:
    return _Engine(p, g, cfg)


def path_generator(seed: int, path_index: int) -> np.random.Generator:
    """Counter-based stream for one path, keyed by (seed, path_index)."""
    return np.random.Generator(np.random.Philox(key=[seed, path_index]))


def _schedule(cfg: SimConfig) -> tuple[int, int, np.ndarray]:
    n_steps = int(round(cfg.t_final / cfg.dt))
    if n_steps < 1:
        raise ValueError("t_final must cover at least one step")
    burn_step = int(round(cfg.burn_in / cfg.dt))
    if not 0 <= burn_step < n_steps:
        raise ValueError("burn-in must resolve to a step strictly before t_final")
    stride = max(1, n_steps // cfg.n_records)
    steps = sorted(set(range(0, n_steps + 1, stride)) | {burn_step, n_steps})
    return n_steps, burn_step, np.asarray(steps, dtype=np.int64)


def _integrate(
    U0_rows: np.ndarray,
    p: ModelParams,
    g: DomainGeometry,
    cfg: SimConfig,
    path_indices: list[int],
    dW_rows: np.ndarray | None = None,
) -> tuple[np.ndarray, np.ndarray, np.ndarray, np.ndarray]:
    """March all rows to t_final; returns (times, logs, final rows, offsets)."""
    eng = _Engine(p, g, cfg)
    U = np.array(U0_rows, dtype=float)
    n_paths = U.shape[0]
    if U.shape[1] != cfg.n_nodes:
        raise ValueError("initial state does not match n_nodes")
    n_steps, _, rec_steps = _schedule(cfg)
    logs = np.empty((n_paths, rec_steps.size))
    offset = np.zeros(n_paths)

    ns = eng.norm_sq_rows(U)
    if not np.all(np.isfinite(ns)):
        raise NonFiniteState("initial state is not finite")
    if np.any(ns <= 0.0):
        raise ZeroInitialState("initial state has zero H-norm")
    logs[:, 0] = np.log(ns)
    rec_pos = 1
    next_rec = int(rec_steps[rec_pos]) if rec_steps.size > 1 else -1

    draw_noise = eng.has_noise and dW_rows is None
    if draw_noise:
        gens = [path_generator(cfg.seed, pi) for pi in path_indices]
    sqrt_dt = math.sqrt(cfg.dt)
    chunk = np.empty((0, n_paths))
    chunk_base = 0
    renorm_every = cfg.renormalize_every if cfg.linearized else 0

    for k in range(1, n_steps + 1):
        if eng.has_noise:
            if dW_rows is not None:
                dW = dW_rows[k - 1]
            else:
                j = k - 1 - chunk_base
                if j >= chunk.shape[0]:
                    chunk_base = k - 1
                    m = min(_DW_CHUNK, n_steps - chunk_base)
                    chunk = np.empty((m, n_paths))
                    for col, gen in enumerate(gens):
                        chunk[:, col] = gen.standard_normal(m)
                    chunk *= sqrt_dt
                    j = 0
                dW = chunk[j]
        else:
            dW = None
        U = eng.step_rows(U, dW)

        if k == next_rec:
            ns = eng.norm_sq_rows(U)
            if not np.all(np.isfinite(ns)) or np.any(ns <= 0.0):
                raise NonFiniteState(
                    f"state left the finite positive range at t = {k * cfg.dt}"
                )
            logs[:, rec_pos] = np.log(ns) + offset
            rec_pos += 1
            next_rec = int(rec_steps[rec_pos]) if rec_pos < rec_steps.size else -1
            if not cfg.linearized:
                low = ns < _FLOOR_NORM_SQ
                if low.any():
                    offset += np.where(low, np.log(ns), 0.0)
                    U *= np.where(low, 1.0 / np.sqrt(ns), 1.0)[:, None]
        if renorm_every and k % renorm_every == 0 and k != n_steps:
            ns = eng.norm_sq_rows(U)
            if not np.all(np.isfinite(ns)) or np.any(ns <= 0.0):
                raise NonFiniteState(
                    f"state left the finite positive range at t = {k * cfg.dt}"
                )
            offset += np.log(ns)
            U /= np.sqrt(ns)[:, None]

    times = rec_steps * cfg.dt
    return times, logs, U, offset


def _estimate(times: np.ndarray, logs: np.ndarray, cfg: SimConfig) -> np.ndarray:
    _, burn_step, rec_steps = _schedule(cfg)
    i_burn = int(np.searchsorted(rec_steps, burn_step))
    span = times[-1] - times[i_burn]
    return (logs[:, -1] - logs[:, i_burn]) / span


def step(
    state: HState,
    p: ModelParams,
    cfg: SimConfig,
    dW: float,
    geometry: DomainGeometry | None = None,
) -> HState:
    """Advance one Euler-Maruyama step with a single Gaussian increment.

    ``dW`` is one N(0, dt) draw shared by every noised node.
    """
    g = geometry if geometry is not None else DomainGeometry.interval(1.0)
    eng = _cached_engine(p, g, cfg)
    U = state.values[None, :].copy()
    out = eng.step_rows(U, np.array([float(dW)]))
    if not np.all(np.isfinite(out)):
        raise NonFiniteState("step produced a non-finite node; reduce dt")
    return HState(out[0])


def run_path(
    U0: HState,
    p: ModelParams,
    cfg: SimConfig,
    geometry: DomainGeometry | None = None,
    path_index: int = 0,
    keep_final: bool = False,
) -> PathRecord:
    """Integrate one path and estimate its finite-time Lyapunov exponent.

    The estimate is the difference quotient of the recorded log squared
    H-norm between the burn-in time and t_final.  The noise stream is fully
    determined by (cfg.seed, path_index).
    """
    g = geometry if geometry is not None else DomainGeometry.interval(1.0)
    times, logs, finals, _ = _integrate(U0.values[None, :], p, g, cfg, [path_index])
    est = _estimate(times, logs, cfg)
    return PathRecord(
        seed=cfg.seed,
        path_index=path_index,
        times=times,
        log_h_norm_sq=logs[0],
        lyapunov_estimate=float(est[0]),
        final_state=HState(finals[0]) if keep_final else None,
    )


def monte_carlo_lyapunov(
    U0: HState,
    p: ModelParams,
    cfg: SimConfig,
    n_paths: int,
    geometry: DomainGeometry | None = None,
    keep_paths: bool = True,
) -> EnsembleSummary:
    """Independent paths indexed 0..n_paths-1, aggregated by path index."""
    if n_paths < 1:
        raise ValueError("n_paths must be at least 1")
    g = geometry if geometry is not None else DomainGeometry.interval(1.0)
    rows = np.repeat(U0.values[None, :], n_paths, axis=0)
    times, logs, _, _ = _integrate(rows, p, g, cfg, list(range(n_paths)))
    est = _estimate(times, logs, cfg)
    paths: tuple[PathRecord, ...] = ()
    if keep_paths:
        paths = tuple(
            PathRecord(
                seed=cfg.seed,
                path_index=i,
                times=times,
                log_h_norm_sq=logs[i].copy(),
                lyapunov_estimate=float(est[i]),
            )
            for i in range(n_paths)
        )
    stderr = None
    if n_paths > 1:
        stderr = float(np.std(est, ddof=1) / math.sqrt(n_paths))
    return EnsembleSummary(
        estimates=est,
        mean=float(np.mean(est)),
        median=float(np.median(est)),
        standard_error=stderr,
        fraction_negative=float(np.mean(est < 0.0)),
        paths=paths,
    )


def strong_convergence_probe(
    U0: HState,
    p: ModelParams,
    cfg: SimConfig,
    n_levels: int = 3,
    geometry: DomainGeometry | None = None,
) -> list[tuple[float, float]]:
    """Pathwise self-convergence study over nested time steps.

    The finest level draws one Wiener path; each coarser level sums
    consecutive fine increments, so all levels share the same underlying
    path.  Returns (dt, H-norm difference at t_final) for each consecutive
    pair, coarser dt attached.
    """
    if n_levels < 2:
        raise ValueError("n_levels must be at least 2")
    g = geometry if geometry is not None else DomainGeometry.interval(1.0)
    m = 2 ** (n_levels - 1)
    n0 = max(1, int(round(cfg.t_final / cfg.dt)))
    n_fine = m * ((n0 + m - 1) // m)
    dt_fine = cfg.t_final / n_fine
    gen = path_generator(cfg.seed, 0)
    dw_fine = gen.standard_normal(n_fine) * math.sqrt(dt_fine)
    finals = []
    dts = []
    for level in range(n_levels):
        factor = 2**level
        n_lvl = n_fine // factor
        cfg_lvl = replace(cfg, dt=cfg.t_final / n_lvl, t_burn_in=0.0)
        dw_lvl = dw_fine.reshape(n_lvl, factor).sum(axis=1)
        _, _, fin, _ = _integrate(
            U0.values[None, :], p, g, cfg_lvl, [0], dW_rows=dw_lvl[:, None]
        )
        finals.append(fin[0])
        dts.append(cfg.t_final / n_lvl)
    h = g.interval_length / (cfg.n_nodes - 1)
    out = []
    for level in range(1, n_levels):
        diff = HState(finals[level] - finals[level - 1])
        from .model import h_norm_sq

        out.append((dts[level], math.sqrt(h_norm_sq(diff, h))))
    return out


def empirical_order(errors: list[tuple[float, float]]) -> float:
    """Least-squares slope of log error against log dt."""
    if len(errors) < 2:
        raise ValueError("need at least two (dt, error) pairs")
    x = np.log([dt for dt, _ in errors])
    y = np.log([e for _, e in errors])
    return float(np.polyfit(x, y, 1)[0])


def kaplan_functional(state: HState, psi1: HState, h: float) -> float:
    """Discrete H-pairing of the state with the positive eigenfunction.

    With psi1 the first Robin eigenfunction for a theta above lam and beta
    above the corresponding trace constant, this pairing grows
    exponentially along unstable deterministic trajectories.
    """
    return h_inner(state, psi1, h)


def discrete_bilinear_form(state: HState, lam: float, h: float) -> float:
    """Discrete energy form: gradient mass plus lam times boundary mass."""
    u = state.values
    grad = np.diff(u) / h
    return float(h * np.sum(grad * grad) + lam * (u[0] ** 2 + u[-1] ** 2))


def quartic_interior_norm(state: HState, h: float) -> float:
    """Trapezoid approximation of the interior L4 mass (u^4 integral)."""
    q = state.values**4
    return float(h * (q.sum() - 0.5 * q[0] - 0.5 * q[-1]))
