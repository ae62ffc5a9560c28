"""Discrete operators on :class:`~trudlab.grid.GridDomain` fields.

All spatial integrals are node-value times cell-volume sums over interior
nodes.  The p-Laplacian is the divergence of face fluxes
``(|G|^2 + eps^2)^((p-2)/2) G_n`` where ``G_n`` is the two-point normal
difference across the face and, in 2D, the tangential component is the
four-point average of the neighbouring tangential differences.
"""
from __future__ import annotations

from typing import Callable, Union

import numpy as np
from scipy.integrate import trapezoid

from . import _pykernels
from ._backend import kernels
from .fields import EvolutionTrace, Regularization, ScalarField, VectorField, check_p

_DEFAULT_REG = Regularization()


def _eps(reg, p, h):
    return (reg or _DEFAULT_REG).eps_for(p, h)


def gradient(f: ScalarField) -> VectorField:
    """Centered differences at interior nodes."""
    d = f.domain
    v = f.values
    comps = np.zeros((d.dim,) + tuple(d.shape))
    for axis in range(d.dim):
        fwd = np.roll(v, -1, axis=axis)
        bwd = np.roll(v, 1, axis=axis)
        comps[axis] = np.where(d.interior_mask, (fwd - bwd) / (2.0 * d.h), 0.0)
    return VectorField(d, comps)


def p_laplacian(f: ScalarField, p, reg: Regularization | None = None) -> ScalarField:
    """Conservative discrete ``div(|grad f|^{p-2} grad f)``; zero off the interior."""
    p = check_p(p)
    d = f.domain
    eps = _eps(reg, p, d.h)
    if d.dim == 1:
        out = kernels.plap_1d(f.values, p, eps, d.h)
    else:
        out = kernels.plap_2d(f.values, p, eps, d.h)
    out = np.where(d.interior_mask, out, 0.0)
    return ScalarField(d, out)


def face_fluxes(f: ScalarField, p, reg: Regularization | None = None, eps: float | None = None):
    """Face fluxes and face coefficients.

    1D: ``(F, A)`` with ``F[i]`` on the face between nodes i and i+1.
    2D: ``(FX, FY, AX, AY)``; ``FX[i, j-1]`` sits between (i, j) and
    (i+1, j), ``FY[i-1, j]`` between (i, j) and (i, j+1).
    """
    p = check_p(p)
    d = f.domain
    if eps is None:
        eps = _eps(reg, p, d.h)
    if d.dim == 1:
        return _pykernels.faces_1d(f.values, p, eps, d.h)
    return _pykernels.faces_2d(f.values, p, eps, d.h)


def _face_masks(d):
    """Boolean masks of faces touching at least one interior node, per axis,
    plus the orientation (+1 if the interior node is on the low side)."""
    inn = d.interior_mask
    if d.dim == 1:
        lo, hi = inn[:-1], inn[1:]
        return [(lo | hi, lo.astype(int) - hi.astype(int))]
    lo, hi = inn[:-1, 1:-1], inn[1:, 1:-1]
    mx = (lo | hi, lo.astype(int) - hi.astype(int))
    lo, hi = inn[1:-1, :-1], inn[1:-1, 1:]
    my = (lo | hi, lo.astype(int) - hi.astype(int))
    return [mx, my]


def boundary_flux(f: ScalarField, p, reg: Regularization | None = None) -> float:
    """Net outward flux through faces separating interior from non-interior nodes."""
    d = f.domain
    fl = face_fluxes(f, p, reg)
    fluxes = fl[:1] if d.dim == 1 else fl[:2]
    total = 0.0
    for flux, (touch, orient) in zip(fluxes, _face_masks(d)):
        crossing = touch & (orient != 0)
        total += float(np.sum(flux[crossing] * orient[crossing]))
    return total * d.h ** (d.dim - 1)


def lp_norm(f: ScalarField, p) -> float:
    p = check_p(p)
    d = f.domain
    vals = np.abs(f.values[d.interior_mask])
    return float((np.sum(vals ** p) * d.cell_volume) ** (1.0 / p))


def dirichlet_energy(f: ScalarField, p) -> float:
    """Face-based discrete ``int |grad f|^p``.

    Each face contributes ``|G|^{p-2} G_n^2`` times the cell volume; in 1D
    this is exactly ``sum |G|^p h`` and for p = 2 it is the 5-point energy.
    With this choice the quotient of a discrete extremal equals its
    Euler-Lagrange multiplier.
    """
    p = check_p(p)
    d = f.domain
    fl = face_fluxes(f, p, eps=0.0)
    if d.dim == 1:
        pairs = [(fl[0], fl[1])]
    else:
        pairs = [(fl[0], fl[2]), (fl[1], fl[3])]
    total = 0.0
    for (flux, coef), (touch, _) in zip(pairs, _face_masks(d)):
        # flux = coef * G_n, so flux^2 / coef = coef * G_n^2
        with np.errstate(divide="ignore", invalid="ignore"):
            e = np.where(coef > 0, flux * flux / np.where(coef > 0, coef, 1.0), 0.0)
        total += float(np.sum(e[touch]))
    return total * d.cell_volume


def rayleigh_quotient(f: ScalarField, p) -> float:
    p = check_p(p)
    denom = lp_norm(f, p) ** p
    if denom == 0.0:
        raise ZeroDivisionError("Rayleigh quotient of the zero field is undefined")
    return dirichlet_energy(f, p) / denom


def euler_lagrange_residual(f: ScalarField, lam: float, p, reg: Regularization | None = None) -> float:
    """Discrete L^{p/(p-1)} norm of ``Delta_p f + lam |f|^{p-2} f`` over the interior."""
    p = check_p(p)
    d = f.domain
    r = p_laplacian(f, p, reg).values + lam * np.sign(f.values) * np.abs(f.values) ** (p - 1.0)
    q = p / (p - 1.0)
    r = np.abs(r[d.interior_mask])
    return float((np.sum(r ** q) * d.cell_volume) ** (1.0 / q))


PhiLike = Union[np.ndarray, Callable[..., np.ndarray]]


def sample_test_function(trace: EvolutionTrace, phi: PhiLike) -> np.ndarray:
    """Evaluate ``phi(*coords, t)`` at every snapshot, or validate a sampled array."""
    d = trace.domain
    if callable(phi):
        coords = d.coords()
        arr = np.stack([np.broadcast_to(phi(*coords, t), d.shape) for t in trace.times]).astype(float)
    else:
        arr = np.asarray(phi, dtype=float)
    if arr.shape != trace.values.shape:
        raise ValueError("test function samples do not match the trace")
    return arr


def _check_compact(phi_arr, d):
    scale = float(np.abs(phi_arr).max())
    if scale == 0.0:
        return
    tol = 1e-12 * scale
    if np.abs(phi_arr[:, ~d.interior_mask]).max(initial=0.0) > tol:
        raise ValueError("test function does not vanish on the boundary")
    if max(np.abs(phi_arr[0]).max(), np.abs(phi_arr[-1]).max()) > tol:
        raise ValueError("test function does not vanish at the first and last snapshot")


def _flux_dot_grad(d, fluxes, phi):
    """Sum over faces of flux times the normal difference of phi, times h^dim."""
    h = d.h
    if d.dim == 1:
        dphi = (phi[1:] - phi[:-1]) / h
        return float(np.sum(fluxes[0] * dphi)) * h
    dx = (phi[1:, 1:-1] - phi[:-1, 1:-1]) / h
    dy = (phi[1:-1, 1:] - phi[1:-1, :-1]) / h
    return float(np.sum(fluxes[0] * dx) + np.sum(fluxes[1] * dy)) * h * h


def weak_residual(trace: EvolutionTrace, p, phi: PhiLike, reg: Regularization | None = None) -> float:
    """Discrete ``iint (-|v|^{p-2} v phi_t + |grad v|^{p-2} grad v . grad phi) dx dt``.

    The time term is evaluated in the summed-by-parts form
    ``sum_k (w_{k+1} - w_k) (phi_k + phi_{k+1}) / 2`` (exact for data
    constant in time); the flux term uses the trapezoidal rule.

    Nonnegative values indicate supersolution behaviour, nonpositive values
    subsolution behaviour.  ``phi`` is a callable ``phi(*coords, t)`` or an
    array of samples with the trace's shape; it must vanish off the interior
    and at the first and last snapshot.  Without ``reg`` the gradient floor
    stored in the trace metadata is used, else the default for ``p``.
    """
    p = check_p(p)
    d = trace.domain
    if len(trace) < 3:
        raise ValueError("weak residual needs at least 3 snapshots")
    phi_arr = sample_test_function(trace, phi)
    _check_compact(phi_arr, d)
    w = trace.conserved()
    if reg is None and trace.meta.get("eps") is not None:
        eps = float(trace.meta["eps"])  # the floor the trace was computed with
    else:
        eps = _eps(reg, p, d.h)
    inn = d.interior_mask
    space = np.empty(len(trace))
    for k in range(len(trace)):
        f = ScalarField(d, trace.values[k])
        fl = face_fluxes(f, p, eps=eps)
        space[k] = _flux_dot_grad(d, fl[:1] if d.dim == 1 else fl[:2], phi_arr[k])
    # -int w phi_t dt summed by parts: w piecewise linear, phi trapezoidal per interval
    dw = (w[1:] - w[:-1])[:, inn]
    phi_mid = 0.5 * (phi_arr[1:] + phi_arr[:-1])[:, inn]
    time_part = float(np.sum(dw * phi_mid)) * d.cell_volume
    return time_part + float(trapezoid(space, trace.times))


def heaviside_approx(s, delta: float):
    """Piecewise-linear Heaviside: 0 for s <= 0, s/delta on (0, delta), 1 beyond."""
    if not delta > 0:
        raise ValueError("delta must be positive")
    s = np.asarray(s, dtype=float)
    out = np.clip(s / delta, 0.0, 1.0)
    return float(out) if out.ndim == 0 else out


def g_delta(s, delta: float):
    """Primitive of :func:`heaviside_approx` vanishing for s <= 0."""
    if not delta > 0:
        raise ValueError("delta must be positive")
    s = np.asarray(s, dtype=float)
    out = np.where(s >= delta, s - 0.5 * delta, np.where(s > 0, s * s / (2.0 * delta), 0.0))
    return float(out) if out.ndim == 0 else out


def steklov_average(trace: EvolutionTrace, window: float) -> EvolutionTrace:
    """Backward time average ``(1/h) int_{t-h}^t f dtau`` of the snapshots.

    The snapshots are joined by linear interpolation, so for a window that
    is a multiple of the spacing this is the trapezoidal rule.  Only times
    with ``t - window >= t_0`` are returned.
    """
    times = trace.times
    if len(times) < 2:
        raise ValueError("Steklov average needs at least two snapshots")
    steps = np.diff(times)
    if not np.allclose(steps, steps[0], rtol=1e-6, atol=0.0):
        raise ValueError("Steklov average needs equally spaced snapshots")
    if not 0.0 < window < times[-1] - times[0]:
        raise ValueError("window must be positive and shorter than the trace")
    dt = steps[0]
    f = trace.values
    cum = np.concatenate([np.zeros((1,) + f.shape[1:]), np.cumsum(0.5 * dt * (f[1:] + f[:-1]), axis=0)])

    def integral_to(s):
        j = min(int(np.floor((s - times[0]) / dt + 1e-9)), len(times) - 2)
        j = max(j, 0)
        r = s - times[j]
        return cum[j] + r * f[j] + r * r / (2.0 * dt) * (f[j + 1] - f[j])

    keep = [k for k, t in enumerate(times) if t - window >= times[0] - 1e-12 * dt]
    avg = np.stack([(cum[k] - integral_to(times[k] - window)) / window for k in keep])
    return EvolutionTrace(trace.domain, trace.p, times[keep], avg, meta={**trace.meta, "steklov_window": window})
