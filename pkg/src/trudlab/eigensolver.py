"""First p-Laplacian eigenpair by projected descent on the Rayleigh quotient.

The descent direction is the Euler-Lagrange residual
``r = Delta_p u + lambda u^{p-1}`` (the negative quotient gradient up to a
positive factor) preconditioned by the lagged linearised p-Laplacian.  For
p = 2 and a unit step this is exactly inverse iteration.  Iterates are
clipped at zero and renormalised to unit L^p norm.  The quotient of the
face-based energy equals the multiplier ``-<Delta_p u, u> / |u|_p^p`` at every
iterate, so a step is accepted when it lowers the Euler-Lagrange residual.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field, replace

import numpy as np
from scipy.sparse.linalg import splu

from .fields import Regularization, ScalarField, check_p
from ._sparse import WeightedLaplacian, face_touch_masks
from .grid import GridDomain, shrink_domain
from .operators import euler_lagrange_residual, lp_norm, p_laplacian, rayleigh_quotient

EXACT = Regularization(eps=0.0)


@dataclass(frozen=True)
class DescentOptions:
    initial_step: float = 1.0
    tol: float = 1e-8
    max_iters: int = 400
    backtrack_factor: float = 0.5
    max_backtracks: int = 40

    def __post_init__(self):
        if not (self.initial_step > 0 and self.tol > 0 and self.max_iters > 0):
            raise ValueError("descent options must be positive")
        if not 0.0 < self.backtrack_factor < 1.0:
            raise ValueError("backtrack_factor must lie in (0, 1)")


@dataclass(frozen=True, eq=False)
class EigenPair:
    lam: float
    u: ScalarField
    residual: float
    iterations: int
    p: float
    history: tuple = field(default=(), repr=False)

    def scaled(self, k: float) -> "EigenPair":
        """Same eigenvalue, eigenfunction multiplied by ``k`` (homogeneity)."""
        return replace(self, u=self.u * k, residual=self.residual * abs(k) ** (self.p - 1.0))

    def summary(self) -> str:
        return (
            f"p={self.p!r} h={self.u.domain.h!r} lambda={self.lam!r} "
            f"residual={self.residual!r} iterations={self.iterations}"
        )


class EigenSolveError(RuntimeError):
    """Raised when the residual target is not met; carries the best iterate."""

    def __init__(self, message: str, best: EigenPair):
        super().__init__(f"{message} (best residual {best.residual:.3e} after {best.iterations} iterations)")
        self.best = best


def _face_gradients(d: GridDomain, v: np.ndarray):
    """(normal difference, squared gradient magnitude) on faces touching the interior."""
    h = d.h
    touch = face_touch_masks(d)
    if d.dim == 1:
        g = (v[1:] - v[:-1]) / h
        return [(g[touch[0]], g[touch[0]] ** 2)]
    gn = (v[1:, 1:-1] - v[:-1, 1:-1]) / h
    gt = (v[:-1, 2:] - v[:-1, :-2] + v[1:, 2:] - v[1:, :-2]) / (4.0 * h)
    out = [(gn[touch[0]], (gn * gn + gt * gt)[touch[0]])]
    gn = (v[1:-1, 1:] - v[1:-1, :-1]) / h
    gt = (v[2:, :-1] - v[:-2, :-1] + v[2:, 1:] - v[:-2, 1:]) / (4.0 * h)
    out.append((gn[touch[1]], (gn * gn + gt * gt)[touch[1]]))
    return out


def _precond_coefs(d, v, p):
    grads = _face_gradients(d, v)
    if p == 2.0:
        return [np.ones_like(gn) for gn, _ in grads]
    smax = max(float(s.max()) for _, s in grads)
    delta2 = 1e-6 * smax + 1e-300
    coefs = []
    for gn, s in grads:
        s = s + delta2
        coefs.append(s ** (0.5 * (p - 2.0)) * (1.0 + (p - 2.0) * gn * gn / s))
    return coefs


def initial_bump(d: GridDomain) -> np.ndarray:
    """Product of half-sine waves over the bounding box of the domain."""
    inside = d.inside_mask
    vals = np.ones(d.shape)
    for axis_coords in d.coords():
        lo = axis_coords[inside].min()
        hi = axis_coords[inside].max()
        vals = vals * np.sin(np.pi * np.clip((axis_coords - lo) / (hi - lo), 0.0, 1.0))
    vals[~d.interior_mask] = 0.0
    return np.maximum(vals, 0.0)


def _normalize(d, vals, p):
    f = ScalarField(d, vals)
    nrm = lp_norm(f, p)
    if nrm == 0.0:
        raise ValueError("iterate vanished")
    return vals / nrm


def _descend(d: GridDomain, p: float, u0: np.ndarray, opts: DescentOptions, offset: int = 0) -> EigenPair:
    inn = d.interior_mask
    u = _normalize(d, np.where(inn, np.maximum(u0, 0.0), 0.0), p)
    pre = WeightedLaplacian(d)
    fixed = splu(pre.matrix(_precond_coefs(d, u, p))) if p == 2.0 else None
    lam = rayleigh_quotient(ScalarField(d, u), p)
    res = euler_lagrange_residual(ScalarField(d, u), lam, p, EXACT)
    history = [lam]
    it = 0

    def pair():
        return EigenPair(lam, ScalarField(d, u), res, it + offset, p, tuple(history))

    while res > opts.tol:
        if it >= opts.max_iters:
            raise EigenSolveError("maximum iterations reached", pair())
        f = ScalarField(d, u)
        r = p_laplacian(f, p, EXACT).values + lam * u ** (p - 1.0)
        lu = fixed if fixed is not None else splu(pre.matrix(_precond_coefs(d, u, p)))
        step = np.zeros(d.shape)
        step[inn] = lu.solve(r[inn])
        s = opts.initial_step
        accepted = False
        for _ in range(opts.max_backtracks):
            trial = np.where(inn, np.maximum(u + s * step, 0.0), 0.0)
            if trial.any():
                trial = _normalize(d, trial, p)
                lam_t = rayleigh_quotient(ScalarField(d, trial), p)
                res_t = euler_lagrange_residual(ScalarField(d, trial), lam_t, p, EXACT)
                if res_t < res:
                    accepted = True
                    break
            s *= opts.backtrack_factor
        if not accepted:
            raise EigenSolveError("line search stalled", pair())
        u, lam, res = trial, lam_t, res_t
        history.append(lam)
        it += 1
    return pair()


def _continuation_path(p: float) -> list:
    if p == 2.0:
        return []
    k = min(4, max(1, math.ceil(abs(p - 2.0))))
    return list(np.linspace(2.0, p, k + 1)[1:-1])


def solve_extremal(d: GridDomain, p, opts: DescentOptions | None = None, initial: np.ndarray | None = None) -> EigenPair:
    """Discrete extremal (lambda_p, u_p) with ``lp_norm(u_p) = 1`` and ``u_p >= 0``."""
    p = check_p(p)
    opts = opts or DescentOptions()
    if initial is not None:
        return _descend(d, p, np.asarray(initial, dtype=float), opts)
    base = _descend(d, 2.0, initial_bump(d), opts if p == 2.0 else replace(opts, tol=max(opts.tol, 1e-6)))
    if p == 2.0:
        return base
    u, used = base.u.values, base.iterations
    for q in _continuation_path(p):
        stage = _descend(d, q, u, replace(opts, tol=max(opts.tol, 1e-6)), offset=used)
        u, used = stage.u.values, stage.iterations
    return _descend(d, p, u, opts, offset=used)


@dataclass(frozen=True)
class ExhaustionRow:
    j: int
    lam: float
    c: float
    pair: EigenPair = field(repr=False)


def exhaustion_study(d: GridDomain, p, layers, opts: DescentOptions | None = None, base: EigenPair | None = None) -> list:
    """Extremals on eroded subdomains and the largest c_j with c_j u^j <= u on them."""
    p = check_p(p)
    base = base or solve_extremal(d, p, opts)
    norm = lp_norm(base.u, p)
    rows = []
    for j in layers:
        sub = shrink_domain(d, j)
        pj = solve_extremal(sub, p, opts) if j else base
        pj = pj.scaled(norm / lp_norm(pj.u, p))
        mask = sub.interior_mask & (pj.u.values > 1e-12)
        c = float(np.min(base.u.values[mask] / pj.u.values[mask]))
        rows.append(ExhaustionRow(int(j), pj.lam, c, pj))
    return rows
