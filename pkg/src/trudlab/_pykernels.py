"""Pure numpy implementation of the hot stencil kernels.

Same call signatures as the compiled ``_ckernels`` module.  Field arguments
are stacked: ``(m, n)`` in 1D and ``(m, nx, ny)`` in 2D, so several runs can
share one time-step sequence.
"""
import numpy as np

BACKEND = "python"


def _coef(s, p):
    """(s)^((p-2)/2) with the convention coef = 0 at s = 0 (1 when p = 2)."""
    if p == 2.0:
        return np.ones_like(s)
    out = np.zeros_like(s)
    pos = s > 0
    out[pos] = s[pos] ** (0.5 * (p - 2.0))
    return out


def faces_1d(v, p, eps, h):
    g = (v[..., 1:] - v[..., :-1]) / h
    a = _coef(g * g + eps * eps, p)
    return a * g, a


def faces_2d(v, p, eps, h):
    gn = (v[..., 1:, 1:-1] - v[..., :-1, 1:-1]) / h
    gt = (v[..., :-1, 2:] - v[..., :-1, :-2] + v[..., 1:, 2:] - v[..., 1:, :-2]) / (4.0 * h)
    ax = _coef(gn * gn + gt * gt + eps * eps, p)
    fx = ax * gn
    gn = (v[..., 1:-1, 1:] - v[..., 1:-1, :-1]) / h
    gt = (v[..., 2:, :-1] - v[..., :-2, :-1] + v[..., 2:, 1:] - v[..., :-2, 1:]) / (4.0 * h)
    ay = _coef(gn * gn + gt * gt + eps * eps, p)
    fy = ay * gn
    return fx, fy, ax, ay


def plap_1d(v, p, eps, h):
    v = np.ascontiguousarray(v, dtype=float)
    f, _ = faces_1d(v, p, eps, h)
    out = np.zeros_like(v)
    out[..., 1:-1] = (f[..., 1:] - f[..., :-1]) / h
    return out


def plap_2d(v, p, eps, h):
    v = np.ascontiguousarray(v, dtype=float)
    fx, fy, _, _ = faces_2d(v, p, eps, h)
    out = np.zeros_like(v)
    out[..., 1:-1, 1:-1] = (fx[..., 1:, :] - fx[..., :-1, :] + fy[..., :, 1:] - fy[..., :, :-1]) / h
    return out


def _node_coef(v, amax, interior, p, eps, floor_rel):
    """Local diffusivity bound of the w-update at each interior node."""
    if p == 2.0:
        c = amax
    else:
        kappa = max(1.0, p - 1.0) / (p - 1.0)
        vv = v
        if p > 2.0:
            vmax = np.where(interior, v, 0.0).reshape(v.shape[0], -1).max(axis=1)
            floor = np.maximum(eps, floor_rel * vmax)
            vv = np.maximum(v, floor.reshape((-1,) + (1,) * (v.ndim - 1)))
        with np.errstate(divide="ignore", invalid="ignore"):
            c = np.where(amax > 0, kappa * amax * vv ** (2.0 - p), 0.0)
    return np.where(interior, c, 0.0)


def _amax_1d(a, shape):
    amax = np.zeros(shape)
    amax[..., 1:-1] = np.maximum(a[..., :-1], a[..., 1:])
    return amax


def _amax_2d(ax, ay, shape):
    amax = np.zeros(shape)
    amax[..., 1:-1, 1:-1] = np.maximum(
        np.maximum(ax[..., :-1, :], ax[..., 1:, :]),
        np.maximum(ay[..., :, :-1], ay[..., :, 1:]),
    )
    return amax


def cfl_coef_1d(v, interior, p, eps, h, floor_rel):
    v = np.ascontiguousarray(v, dtype=float)
    _, a = faces_1d(v, p, eps, h)
    c = _node_coef(v, _amax_1d(a, v.shape), interior.astype(bool), p, eps, floor_rel)
    return float(c.max())


def cfl_coef_2d(v, interior, p, eps, h, floor_rel):
    v = np.ascontiguousarray(v, dtype=float)
    _, _, ax, ay = faces_2d(v, p, eps, h)
    c = _node_coef(v, _amax_2d(ax, ay, v.shape), interior.astype(bool), p, eps, floor_rel)
    return float(c.max())


def _advance(w, v, interior, p, eps, h, safety, dt_max, floor_rel, t, t_stop, max_steps, dim):
    interior = interior.astype(bool)
    ev = 1.0 / (p - 1.0)
    steps = 0
    wmin = 0.0
    dt_lo = np.inf
    dt_hi = 0.0
    while steps < max_steps and t < t_stop:
        if dim == 1:
            f, a = faces_1d(v, p, eps, h)
            amax = _amax_1d(a, v.shape)
            div = np.zeros_like(v)
            div[..., 1:-1] = (f[..., 1:] - f[..., :-1]) / h
        else:
            fx, fy, ax, ay = faces_2d(v, p, eps, h)
            amax = _amax_2d(ax, ay, v.shape)
            div = np.zeros_like(v)
            div[..., 1:-1, 1:-1] = (fx[..., 1:, :] - fx[..., :-1, :] + fy[..., :, 1:] - fy[..., :, :-1]) / h
        cmax = float(_node_coef(v, amax, interior, p, eps, floor_rel).max())
        dt = dt_max
        if cmax > 0.0:
            dt = min(dt, safety * h * h / (2.0 * dim * cmax))
        last = dt >= (t_stop - t) * (1.0 - 1e-12)
        if last:
            dt = t_stop - t
        wn = w + dt * div
        bad = interior & (wn < 0.0)
        if bad.any():
            wmin = min(wmin, float(wn[bad].min()))
        wn = np.where(interior, np.maximum(wn, 0.0), w)
        w[...] = wn
        v[...] = np.where(interior, wn ** ev, v)
        dt_lo = min(dt_lo, dt)
        dt_hi = max(dt_hi, dt)
        t = t_stop if last else t + dt
        steps += 1
    return t, steps, dt_lo, dt_hi, wmin


def explicit_advance_1d(w, v, interior, p, eps, h, safety, dt_max, floor_rel, t, t_stop, max_steps):
    return _advance(w, v, interior, p, eps, h, safety, dt_max, floor_rel, t, t_stop, max_steps, 1)


def explicit_advance_2d(w, v, interior, p, eps, h, safety, dt_max, floor_rel, t, t_stop, max_steps):
    return _advance(w, v, interior, p, eps, h, safety, dt_max, floor_rel, t, t_stop, max_steps, 2)
