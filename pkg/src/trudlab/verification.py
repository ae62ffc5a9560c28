"""Executable checks of qualitative properties on numerical traces.

Each check returns a value object with an explicit additive tolerance tied
to the grid spacing and time step; see :mod:`trudlab.tolerances`.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from . import tolerances
from .eigensolver import EigenPair
from .evolution import StepOptions, evolve
from .fields import EvolutionTrace, ScalarField, check_p
from .grid import GridDomain
from .operators import weak_residual

__all__ = [
    "AuditReport",
    "AsymptoticReport",
    "ComparisonCertificate",
    "asymptotic_profile",
    "bump_battery",
    "check_comparison",
    "comparison_certificate",
    "max_with_constant_check",
    "sandwich_check",
    "trace_dt",
    "uniqueness_check",
    "viscosity_audit",
]


@dataclass(frozen=True, eq=False)
class ComparisonCertificate:
    beta: float
    times: np.ndarray
    values: np.ndarray
    max_uptick: float
    tolerance: float
    p: float

    @property
    def passed(self) -> bool:
        return self.max_uptick <= self.tolerance

    def scaled_by(self, k: float):
        return self.values * k ** (self.p - 1.0)


@dataclass(frozen=True, eq=False)
class AuditReport:
    check: str
    checked_points: int
    violations: list
    worst_margin: float
    tolerance: float
    params: dict = field(default_factory=dict)

    @property
    def passed(self) -> bool:
        return self.worst_margin >= -self.tolerance

    def worst_violation(self):
        if not self.violations:
            return None
        return min(self.violations, key=lambda item: item[2])


def trace_dt(trace: EvolutionTrace) -> float:
    """Largest time step recorded in the trace metadata, else the snapshot spacing."""
    dt = trace.meta.get("dt_max_used")
    if dt is None or not np.isfinite(dt) or dt <= 0:
        dt = float(np.diff(trace.times).max()) if len(trace) > 1 else 0.0
    return float(dt)


def _same_run_layout(a: EvolutionTrace, b: EvolutionTrace):
    if not a.domain.same_grid(b.domain):
        raise ValueError("traces live on different grids")
    if len(a) != len(b) or not np.allclose(a.times, b.times, rtol=1e-12, atol=1e-15):
        raise ValueError("traces have different snapshot times")


def _positive_power(x, q):
    return np.maximum(x, 0.0) ** q


def comparison_certificate(u_trace, v_trace, beta: float, p, v_floor: float | None = None) -> ComparisonCertificate:
    """Time series of ``sum (u^{p-1} - (beta v)^{p-1})^+ h^dim`` over the interior.

    ``v_floor`` enforces the positivity hypothesis: the interior minimum of
    v over all snapshots after the first must exceed it.
    """
    p = check_p(p)
    if not beta > 1.0:
        raise ValueError("beta must exceed 1")
    _same_run_layout(u_trace, v_trace)
    d = u_trace.domain
    inn = d.interior_mask
    if v_floor is not None:
        vmin = float(v_trace.values[1:, inn].min()) if len(v_trace) > 1 else float(v_trace.values[0, inn].min())
        if vmin <= v_floor:
            raise ValueError(f"positivity hypothesis fails: min v = {vmin!r} <= {v_floor!r}")
    q = p - 1.0
    diff = _positive_power(u_trace.values, q) - _positive_power(beta * v_trace.values, q)
    vals = np.maximum(diff, 0.0)[:, inn].sum(axis=1) * d.cell_volume
    ups = np.diff(vals)
    max_uptick = float(ups.max()) if ups.size else 0.0
    return ComparisonCertificate(float(beta), u_trace.times.copy(), vals, max_uptick, tolerances.tol_cert(float(vals[0])), p)


def _audit_nodes(check, d, times, margins, tol, params, mask=None):
    """Collect violations from a (snapshots, *shape) margin array."""
    mask = d.interior_mask if mask is None else mask
    sel = margins[:, mask]
    worst = float(sel.min()) if sel.size else 0.0
    bad = np.argwhere((margins < -tol) & mask[None])
    violations = [(tuple(int(i) for i in idx[1:]), float(times[idx[0]]), float(margins[tuple(idx)])) for idx in bad]
    return AuditReport(check, int(sel.size), violations, worst, float(tol), params)


def check_comparison(
    u_trace, v_trace, p, tol: float | None = None, C: float | None = None, require_ordered: bool = True
) -> AuditReport:
    """Nodewise audit of ``u <= v + tol_cmp`` at every snapshot.

    Unordered initial data raise unless ``require_ordered`` is false, in
    which case they simply show up as violations (negative controls).
    """
    p = check_p(p)
    _same_run_layout(u_trace, v_trace)
    d = u_trace.domain
    inn = d.interior_mask
    scale = max(1.0, float(np.abs(v_trace.values[0]).max()))
    if require_ordered and np.any(u_trace.values[0][inn] > v_trace.values[0][inn] + 1e-12 * scale):
        raise ValueError("initial data are not ordered (u_0 <= v_0 fails)")
    dt = max(trace_dt(u_trace), trace_dt(v_trace))
    tol = tolerances.tol_cmp(d.h, dt, C) if tol is None else tol
    margins = v_trace.values - u_trace.values
    return _audit_nodes("comparison", d, u_trace.times, margins, tol, {"p": p, "h": d.h, "dt": dt})


def uniqueness_check(
    d: GridDomain,
    p,
    g,
    T: float,
    snapshot_dt: float | None = None,
    semi_dt: float | None = None,
    C: float | None = None,
    eps: float | None = None,
) -> AuditReport:
    """Sup-norm agreement of three discretizations at matched times.

    Explicit runs at CFL safeties 0.5 and 0.25 and a semi-implicit run with
    step ``semi_dt`` (default ``h^2``) are compared with the finest
    explicit run; ``tol_unique = C (h + dt_coarse)``.
    """
    p = check_p(p)
    if d.star_center is None:
        raise ValueError("uniqueness check needs a star-shaped domain")
    snapshot_dt = snapshot_dt or T / 10.0
    semi_dt = semi_dt or d.h * d.h
    common = dict(snapshot_dt=snapshot_dt, eps=eps, dt_max=min(1e-3, semi_dt))
    coarse = evolve(d, p, g, T, StepOptions(cfl_safety=0.5, **common))
    fine = evolve(d, p, g, T, StepOptions(cfl_safety=0.25, **common))
    semi = evolve(d, p, g, T, StepOptions(scheme="semi-implicit", snapshot_dt=snapshot_dt, eps=eps, dt_max=semi_dt))
    dt_coarse = max(trace_dt(coarse), semi_dt)
    tol = tolerances.tol_unique(d.h, dt_coarse, C)
    gaps = np.maximum(np.abs(coarse.values - fine.values), np.abs(semi.values - fine.values))
    report = _audit_nodes("uniqueness", d, fine.times, -gaps, tol, {"p": p, "h": d.h, "dt_coarse": dt_coarse})
    report.params["sup_gap"] = -report.worst_margin
    return report


def sandwich_check(trace, pair_hi: EigenPair | None, pair_lo: EigenPair | None, p, tol: float | None = None, C=None) -> AuditReport:
    """Audit ``e^{-lt/(p-1)} u_lo - tol <= v <= e^{-lt/(p-1)} u_hi + tol``."""
    p = check_p(p)
    if pair_hi is None and pair_lo is None:
        raise ValueError("at least one bounding pair is required")
    d = trace.domain
    inn = d.interior_mask
    g = trace.values[0]
    scale = max(1.0, float(np.abs(g).max()))
    if pair_hi is not None and np.any(g[inn] > pair_hi.u.values[inn] + 1e-12 * scale):
        raise ValueError("initial data exceed the upper extremal")
    if pair_lo is not None and np.any(g[inn] < pair_lo.u.values[inn] - 1e-12 * scale):
        raise ValueError("initial data fall below the lower extremal")
    dt = trace_dt(trace)
    tol = tolerances.tol_cmp(d.h, dt, C) if tol is None else tol
    margins = np.full(trace.values.shape, np.inf)
    for k, t in enumerate(trace.times):
        if pair_hi is not None:
            bound = math.exp(-pair_hi.lam * t / (p - 1.0)) * pair_hi.u.values
            margins[k] = np.minimum(margins[k], bound - trace.values[k])
        if pair_lo is not None:
            bound = math.exp(-pair_lo.lam * t / (p - 1.0)) * pair_lo.u.values
            margins[k] = np.minimum(margins[k], trace.values[k] - bound)
    return _audit_nodes("sandwich", d, trace.times, margins, tol, {"p": p, "h": d.h, "dt": dt})


@dataclass(frozen=True, eq=False)
class AsymptoticReport:
    times: np.ndarray
    increments: np.ndarray
    tolerance: float
    profile_sup: float

    @property
    def monotone(self) -> bool:
        # increments at roundoff level (exact profiles) count as nonincreasing
        floor = 64 * np.finfo(float).eps * max(self.profile_sup, 1.0)
        return bool(np.all(np.diff(self.increments) <= floor))

    @property
    def converged(self) -> bool:
        return self.monotone and bool(self.increments[-1] < self.tolerance)


def asymptotic_profile(trace: EvolutionTrace, lam: float, p, t_tail: float, tol: float | None = None):
    """Rescaled profile ``e^{lam t/(p-1)} v(., t_final)`` and tail Cauchy increments."""
    p = check_p(p)
    sel = [k for k, t in enumerate(trace.times) if t >= t_tail]
    if len(sel) < 3:
        raise ValueError("need at least three snapshots after t_tail")
    profiles = [math.exp(lam * trace.times[k] / (p - 1.0)) * trace.values[k] for k in sel]
    inc = np.array([float(np.abs(b - a).max()) for a, b in zip(profiles[:-1], profiles[1:])])
    final = ScalarField(trace.domain, profiles[-1])
    tol = tolerances.DEFAULTS["asym"] if tol is None else tol
    return final, AsymptoticReport(trace.times[sel][1:], inc, float(tol), float(np.abs(profiles[-1]).max()))


def _jets_1d(d, v):
    """Slope and curvature of the quadratic through each node and its two neighbours.

    The three-point quadratic is its own least-squares fit, so the fit
    residual is zero in 1D.
    """
    h = d.h
    grad = np.zeros(v.shape)
    curv = np.zeros(v.shape)
    grad[..., 1:-1] = (v[..., 2:] - v[..., :-2]) / (2 * h)
    curv[..., 1:-1] = (v[..., 2:] - 2 * v[..., 1:-1] + v[..., :-2]) / (h * h)
    return grad, curv, np.zeros(v.shape)


def _plap_jet_1d(grad, curv, p):
    if p == 2.0:
        return curv
    return (p - 1.0) * np.abs(grad) ** (p - 2.0) * curv


def _jets_2d(d, v):
    h = d.h
    inside = d.inside_mask
    offs = [(a, b) for a in (-1, 0, 1) for b in (-1, 0, 1)]
    A = np.array([[1, a * h, b * h, 0.5 * (a * h) ** 2, a * b * h * h, 0.5 * (b * h) ** 2] for a, b in offs])
    pinv = np.linalg.pinv(A)
    nx, ny = d.shape
    ok = np.zeros(d.shape, dtype=bool)
    ok[1:-1, 1:-1] = d.interior_mask[1:-1, 1:-1]
    for a, b in offs:
        ok[1:-1, 1:-1] &= inside[1 + a : nx - 1 + a, 1 + b : ny - 1 + b]
    st = np.stack([np.roll(v, (-a, -b), axis=(-2, -1)) for a, b in offs], axis=-1)
    c = st @ pinv.T
    resid = np.sqrt(np.mean((st - c @ A.T) ** 2, axis=-1))
    gx, gy = c[..., 1], c[..., 2]
    hxx, hxy, hyy = c[..., 3], c[..., 4], c[..., 5]
    return (gx, gy, hxx, hxy, hyy), resid, ok


def _plap_jet_2d(jet, p):
    gx, gy, hxx, hxy, hyy = jet
    lap = hxx + hyy
    if p == 2.0:
        return lap
    s2 = gx * gx + gy * gy
    with np.errstate(divide="ignore", invalid="ignore"):
        quad = np.where(s2 > 0, (gx * gx * hxx + 2 * gx * gy * hxy + gy * gy * hyy) / s2, 0.0)
        out = np.where(s2 > 0, s2 ** (0.5 * (p - 2.0)) * (lap + (p - 2.0) * quad), 0.0)
    return out


def viscosity_audit(
    trace: EvolutionTrace, p, tol: float | None = None, fit_tol: float | None = None, C=None, t_min: float = 0.0
) -> AuditReport:
    """Pointwise test of the equation against fitted touching quadratics.

    At every interior node of every inner snapshot the spatial jet is a
    local quadratic least-squares fit and the time derivative of ``v^{p-1}``
    a centred difference.  With ``E = d_t(v^{p-1}) - Delta_p(jet)`` the
    margin is ``-|E|`` at regular points.  Where the fitted gradient is
    small compared with ``h`` times the fitted Hessian the jet is not
    resolved (for p > 2 extremals are only C^{1,alpha} at critical points),
    and only the inequality for the touching direction is tested:
    ``-max(E, 0)`` if the fit is concave (touching from above) and
    ``-max(-E, 0)`` if convex.  Zeros of v are minima of a nonnegative
    function and get ``-max(E, 0)``.  Nodes whose fit residual exceeds
    ``fit_tol`` are skipped, and so are snapshots before ``t_min`` (an
    initial layer the snapshot spacing does not resolve in time; earlier
    snapshots still serve as time neighbours).
    """
    p = check_p(p)
    if p < 2.0:
        raise ValueError("the viscosity audit covers p >= 2 only")
    if len(trace) < 3:
        raise ValueError("viscosity audit needs at least 3 snapshots")
    d = trace.domain
    inn = d.interior_mask
    v = trace.values
    w = trace.conserved()
    times = trace.times
    wt = (w[2:] - w[:-2]) / (times[2:] - times[:-2]).reshape((-1,) + (1,) * d.dim)
    vin = v[1:-1]
    vmax = float(np.abs(v).max())
    fit_tol = 0.25 * vmax if fit_tol is None else fit_tol
    if d.dim == 1:
        grad, curv, resid = _jets_1d(d, vin)
        lap = _plap_jet_1d(grad, curv, p)
        usable = np.broadcast_to(inn, vin.shape)
        gnorm, hnorm, htrace = np.abs(grad), np.abs(curv), curv
    else:
        jet, resid, ok = _jets_2d(d, vin)
        lap = _plap_jet_2d(jet, p)
        usable = np.broadcast_to(ok, vin.shape)
        gx, gy, hxx, hxy, hyy = jet
        gnorm = np.hypot(gx, gy)
        hnorm = np.sqrt(hxx * hxx + 2 * hxy * hxy + hyy * hyy)
        htrace = hxx + hyy
    usable = usable & (resid <= fit_tol)
    usable = usable & (times[1:-1] >= t_min).reshape((-1,) + (1,) * d.dim)
    E = np.where(usable, wt - np.nan_to_num(lap), 0.0)
    margins = -np.abs(E)
    unresolved = np.nan_to_num(gnorm) <= 2.0 * d.h * np.nan_to_num(hnorm)
    zero = vin <= 0.0
    from_above = zero | (unresolved & (np.nan_to_num(htrace) <= 0.0))
    from_below = unresolved & ~from_above
    margins = np.where(from_above, -np.maximum(E, 0.0), margins)
    margins = np.where(from_below, -np.maximum(-E, 0.0), margins)
    margins = np.where(usable, margins, 0.0)
    dt_snap = float(np.diff(times).max())
    scale = float(np.abs(wt[usable]).max()) if usable.any() else 0.0
    tol = tolerances.tol_visc(d.h, dt_snap, scale, C) if tol is None else tol
    full = np.zeros_like(v)
    full[1:-1] = margins
    mask = np.zeros(v.shape, dtype=bool)
    mask[1:-1] = usable
    worst = float(margins[usable].min()) if usable.any() else 0.0
    bad = np.argwhere((full < -tol) & mask)
    violations = [(tuple(int(i) for i in idx[1:]), float(times[idx[0]]), float(full[tuple(idx)])) for idx in bad]
    return AuditReport(
        "viscosity",
        int(usable.sum()),
        violations,
        worst,
        float(tol),
        {"p": p, "h": d.h, "dt_snap": dt_snap, "t_min": t_min, "skipped": int((np.broadcast_to(inn, vin.shape) & ~usable).sum())},
    )


def _bump_1d(center, radius):
    def phi(x):
        r = np.abs(x - center) / radius
        return np.where(r < 1.0, np.cos(0.5 * np.pi * r) ** 2, 0.0)

    return phi


def bump_battery(d: GridDomain, t0: float, t1: float, count: int = 6) -> list:
    """Nonnegative C^1 space-time bumps supported inside the domain and (t0, t1).

    Spatial centres are spread over the middle of the interior's bounding
    box; each bump has its own time window inside (t0, t1).
    """
    if count < 1:
        raise ValueError("count must be positive")
    coords = d.coords()
    inn = d.interior_mask
    lows = [c[inn].min() for c in coords]
    highs = [c[inn].max() for c in coords]
    span = min(hi - lo for lo, hi in zip(lows, highs))
    out = []
    for k in range(count):
        frac = (k + 1) / (count + 1)
        centers = [lo + (hi - lo) * (0.25 + 0.5 * ((frac + 0.37 * a) % 1.0)) for a, (lo, hi) in enumerate(zip(lows, highs))]
        radius = span * (0.12 + 0.08 * (k % 3))
        a = t0 + (t1 - t0) * 0.1 * (k % 3)
        b = t1 - (t1 - t0) * 0.1 * ((k + 1) % 3)
        out.append(_space_time_bump(centers, radius, a, b))
    return out


def _space_time_bump(centers, radius, a, b):
    spatial = [_bump_1d(c, radius) for c in centers]

    def phi(*args):
        *xs, t = args
        val = np.ones(np.broadcast(*xs).shape)
        for f, x in zip(spatial, xs):
            val = val * f(x)
        s = (t - a) / (b - a)
        time_part = np.sin(np.pi * s) ** 2 if 0.0 < s < 1.0 else 0.0
        return val * time_part

    phi.support = (tuple(centers), radius, (a, b))
    return phi


def max_with_constant_check(trace: EvolutionTrace, c: float, p, battery, tol: float | None = None) -> AuditReport:
    """Weak residuals of ``max(v, c)`` (taken on the closed domain) against nonnegative bumps.

    Subsolution behaviour means every residual is at most ``tol``; the
    margin of a test function is ``-residual``.
    """
    p = check_p(p)
    if not c > 0:
        raise ValueError("c must be positive")
    d = trace.domain
    inside = d.inside_mask
    vals = np.where(inside, np.maximum(trace.values, c), 0.0)
    lifted = trace.with_values(vals, max_constant=c)
    residuals = [weak_residual(lifted, p, phi) for phi in battery]
    tol = tolerances.DEFAULTS["weak"] if tol is None else tol
    margins = [-r for r in residuals]
    violations = [(k, float("nan"), m) for k, m in enumerate(margins) if m < -tol]
    worst = min(margins) if margins else 0.0
    return AuditReport(
        "max_with_constant",
        len(residuals),
        violations,
        float(worst),
        float(tol),
        {"p": p, "h": d.h, "c": c, "residuals": residuals},
    )
