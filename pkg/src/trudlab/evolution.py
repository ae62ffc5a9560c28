"""Time stepping of ``d/dt (v^{p-1}) = Delta_p v`` with zero lateral values.

The unknown advanced in time is the conserved variable ``w = v^{p-1}``.  The
explicit scheme is forward Euler in ``w`` with a local CFL step; the
semi-implicit scheme freezes the flux coefficient at the old level and
solves the remaining nodal nonlinearity by Newton sweeps.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.sparse import diags
from scipy.sparse.linalg import spsolve

from . import _pykernels
from ._backend import kernels
from ._sparse import WeightedLaplacian
from .eigensolver import EigenPair
from .fields import EvolutionTrace, ScalarField, check_p
from .grid import GridDomain
from .operators import lp_norm

__all__ = [
    "EvolutionError",
    "EvolutionTrace",
    "StepOptions",
    "cfl_timestep",
    "decay_rate_fit",
    "evolve",
    "evolve_many",
    "separable_solution",
]

SCHEMES = ("explicit", "semi-implicit")


class EvolutionError(RuntimeError):
    pass


@dataclass(frozen=True)
class StepOptions:
    """Time-stepping controls.

    Parameters
    ----------
    scheme : {"explicit", "semi-implicit"}
    cfl_safety : float
        Fraction of the monotonicity step bound used by the explicit scheme.
    dt_max : float
        Largest step; the semi-implicit scheme always uses it.
    eps : float or None
        Gradient floor, ``None`` for the default (0 if p >= 2, h if p < 2).
    snapshot_stride : int
        Store a snapshot every this many steps (ignored if ``snapshot_dt``).
    snapshot_dt : float or None
        Store snapshots at multiples of this time, so runs with different
        step sequences can be compared at matched times.
    floor_rel : float or None
        For p > 2 the CFL bound floors v at ``floor_rel * max v``; ``None``
        means ``h**2``.
    """

    scheme: str = "explicit"
    cfl_safety: float = 0.9
    dt_max: float = 1e-3
    eps: float | None = None
    snapshot_stride: int = 100
    snapshot_dt: float | None = None
    floor_rel: float | None = None
    max_steps: int = 10**9
    newton_tol: float = 1e-12
    max_sweeps: int = 200

    def __post_init__(self):
        if self.scheme not in SCHEMES:
            raise ValueError(f"scheme must be one of {SCHEMES}, got {self.scheme!r}")
        if not 0.0 < self.cfl_safety <= 1.0:
            raise ValueError("cfl_safety must lie in (0, 1]")
        if not self.dt_max > 0:
            raise ValueError("dt_max must be positive")
        if self.eps is not None and self.eps < 0:
            raise ValueError("eps must be nonnegative")
        if self.snapshot_stride < 1:
            raise ValueError("snapshot_stride must be positive")
        if self.snapshot_dt is not None and not self.snapshot_dt > 0:
            raise ValueError("snapshot_dt must be positive")

    def eps_for(self, p, h):
        if self.eps is not None:
            return float(self.eps)
        return float(h) if p < 2.0 else 0.0

    def floor_for(self, h):
        return float(h * h) if self.floor_rel is None else float(self.floor_rel)


def cfl_timestep(v: ScalarField, p, opts: StepOptions | None = None) -> float:
    """Explicit step bound ``safety * h^2 / (2 dim cmax)`` capped at ``dt_max``.

    ``cmax`` is the largest nodal diffusivity of the w-update,
    ``kappa * max(adjacent face coefficients) * v^{2-p}`` with
    ``kappa = max(1, p-1) / (p-1)``.
    """
    p = check_p(p)
    opts = opts or StepOptions()
    d = v.domain
    eps = opts.eps_for(p, d.h)
    stack = v.values[None]
    if d.dim == 1:
        cmax = kernels.cfl_coef_1d(stack, d.interior_mask, p, eps, d.h, opts.floor_for(d.h))
    else:
        cmax = kernels.cfl_coef_2d(stack, d.interior_mask, p, eps, d.h, opts.floor_for(d.h))
    if cmax <= 0.0:
        return opts.dt_max
    return min(opts.dt_max, opts.cfl_safety * d.h ** 2 / (2.0 * d.dim * cmax))


def _initial_stack(d, p, gs):
    rows = []
    for g in gs:
        vals = g.values if isinstance(g, ScalarField) else np.asarray(g, dtype=float)
        if vals.shape != tuple(d.shape):
            raise ValueError("initial data do not match the grid")
        if np.any(vals[d.interior_mask] < 0):
            raise ValueError("initial data must be nonnegative")
        if np.any(vals[~d.interior_mask] != 0):
            raise ValueError("initial data must vanish off the interior")
        rows.append(vals)
    v = np.ascontiguousarray(np.stack(rows), dtype=float)
    w = np.ascontiguousarray(v ** (p - 1.0))
    return w, v


def _snapshot_times(T, opts):
    if opts.snapshot_dt is None:
        return None
    k = max(1, int(math.floor(T / opts.snapshot_dt * (1 + 1e-12))))
    times = [opts.snapshot_dt * i for i in range(1, k + 1)]
    if T - times[-1] > 1e-12 * T:
        times.append(T)
    else:
        times[-1] = T
    return times


def _explicit(d, p, w, v, T, opts, record):
    eps = opts.eps_for(p, d.h)
    floor = opts.floor_for(d.h)
    adv = kernels.explicit_advance_1d if d.dim == 1 else kernels.explicit_advance_2d
    inn = d.interior_mask
    tol = -1e-12 * max(1.0, float(w.max()))
    t, total = 0.0, 0
    stats = {"dt_min": np.inf, "dt_max": 0.0}
    targets = _snapshot_times(T, opts)
    while t < T:
        if total >= opts.max_steps:
            raise EvolutionError(f"step budget of {opts.max_steps} exhausted at t={t!r}")
        budget = opts.max_steps - total
        if targets is None:
            stop, budget = T, min(budget, opts.snapshot_stride)
        else:
            stop = next(s for s in targets if s > t)
        t, steps, dt_lo, dt_hi, wmin = adv(w, v, inn, p, eps, d.h, opts.cfl_safety, opts.dt_max, floor, t, stop, budget)
        if wmin < tol:
            raise EvolutionError(f"conserved variable went negative ({wmin!r}) before t={t!r}")
        total += steps
        stats["dt_min"] = min(stats["dt_min"], dt_lo)
        stats["dt_max"] = max(stats["dt_max"], dt_hi)
        if targets is None or t >= stop:
            record(t, v)
    stats["steps"] = total
    return stats


def _semi_implicit_step(d, p, lap, w_old, v_old, dt, eps, opts):
    """Solve ``W(v) - dt div(a^n grad v) = w_old`` on the interior."""
    inn = d.interior_mask
    faces = _pykernels.faces_1d(v_old, p, eps, d.h) if d.dim == 1 else _pykernels.faces_2d(v_old, p, eps, d.h)
    coefs = lap.restrict(faces[1:] if d.dim == 1 else faces[2:])
    L = lap.matrix(coefs)
    b = w_old[inn]
    x = v_old[inn].copy()
    scale = max(float(np.abs(b).max()), 1e-300)
    in_w = p < 2.0
    if in_w:
        x = b.copy()
    for sweep in range(opts.max_sweeps):
        if in_w:
            vx = np.maximum(x, 0.0) ** (1.0 / (p - 1.0))
            F = x + dt * (L @ vx) - b
            dv = np.maximum(x, 0.0) ** ((2.0 - p) / (p - 1.0)) / (p - 1.0)
            J = diags(np.ones_like(x)) + dt * (L @ diags(dv))
        else:
            F = np.maximum(x, 0.0) ** (p - 1.0) + dt * (L @ x) - b
            floor = 1e-12 * max(float(x.max()), 1e-300)
            dw = (p - 1.0) * np.maximum(x, floor) ** (p - 2.0)
            J = diags(dw) + dt * L
        if float(np.abs(F).max()) <= opts.newton_tol * scale:
            break
        x = np.maximum(x - spsolve(J.tocsc(), F), 0.0)
    else:
        raise EvolutionError(f"semi-implicit sweeps did not converge in {opts.max_sweeps} iterations")
    v_new = np.zeros_like(v_old)
    w_new = np.zeros_like(w_old)
    if in_w:
        w_new[inn] = x
        v_new[inn] = x ** (1.0 / (p - 1.0))
    else:
        v_new[inn] = x
        w_new[inn] = x ** (p - 1.0)
    return w_new, v_new


def _semi_implicit(d, p, w, v, T, opts, record):
    eps = opts.eps_for(p, d.h)
    lap = WeightedLaplacian(d)
    targets = _snapshot_times(T, opts)
    t, steps = 0.0, 0
    while t < T:
        if steps >= opts.max_steps:
            raise EvolutionError(f"step budget of {opts.max_steps} exhausted at t={t!r}")
        stop = T if targets is None else next(s for s in targets if s > t)
        dt = opts.dt_max
        last = dt >= (stop - t) * (1.0 - 1e-12)
        if last:
            dt = stop - t
        for k in range(w.shape[0]):
            w[k], v[k] = _semi_implicit_step(d, p, lap, w[k], v[k], dt, eps, opts)
        t = stop if last else t + dt
        steps += 1
        if (targets is None and (steps % opts.snapshot_stride == 0 or t >= T)) or (targets is not None and last):
            record(t, v)
    return {"steps": steps, "dt_min": opts.dt_max, "dt_max": opts.dt_max}


def evolve_many(d: GridDomain, p, gs, T: float, opts: StepOptions | None = None) -> list:
    """Evolve several initial data with one shared step sequence.

    The explicit step is the minimum CFL bound over all runs, so ordered or
    scaled data are compared at identical times and steps.
    """
    p = check_p(p)
    opts = opts or StepOptions()
    if not T > 0:
        raise ValueError("T must be positive")
    w, v = _initial_stack(d, p, gs)
    times = [0.0]
    snaps = [v.copy()]

    def record(t, vals):
        if t > times[-1]:
            times.append(t)
            snaps.append(vals.copy())

    runner = _explicit if opts.scheme == "explicit" else _semi_implicit
    stats = runner(d, p, w, v, T, opts, record)
    stacked = np.stack(snaps, axis=1)
    meta = {
        "scheme": opts.scheme,
        "eps": opts.eps_for(p, d.h),
        "cfl_safety": opts.cfl_safety,
        "dt_max": opts.dt_max,
        "steps": stats["steps"],
        "dt_min_used": stats["dt_min"],
        "dt_max_used": stats["dt_max"],
    }
    return [EvolutionTrace(d, p, np.array(times), stacked[k], dict(meta)) for k in range(len(gs))]


def evolve(d: GridDomain, p, g, T: float, opts: StepOptions | None = None) -> EvolutionTrace:
    """Numerical solution with ``v(., 0) = g`` and zero lateral values up to time ``T``."""
    return evolve_many(d, p, [g], T, opts)[0]


def separable_solution(pair: EigenPair, p, t: float) -> ScalarField:
    """``exp(-lambda t / (p-1)) u``."""
    p = check_p(p)
    if t < 0:
        raise ValueError("t must be nonnegative")
    return pair.u * math.exp(-pair.lam * t / (p - 1.0))


def separable_trace(pair: EigenPair, p, times) -> EvolutionTrace:
    times = np.asarray(times, dtype=float)
    vals = np.stack([separable_solution(pair, p, t).values for t in times])
    return EvolutionTrace(pair.u.domain, check_p(p), times, vals, {"scheme": "exact"})


def decay_rate_fit(trace: EvolutionTrace, window) -> float:
    """Negated least-squares slope of ``log lp_norm(v(., t))`` over ``window``."""
    lo, hi = window
    sel = [k for k, t in enumerate(trace.times) if lo <= t <= hi]
    if len(sel) < 2:
        raise ValueError("window holds fewer than two snapshots")
    norms = np.array([lp_norm(trace.field_at(k), trace.p) for k in sel])
    if np.any(norms <= 0):
        raise ValueError("solution vanishes inside the fit window")
    slope = np.polyfit(trace.times[sel], np.log(norms), 1)[0]
    return float(-slope)
