"""Default tolerances of the verification checks.

Every entry records its default constant and how the effective tolerance
scales with the grid spacing ``h`` and the time step ``dt``.  The same table
is echoed into the CLI's effective config.
"""
from __future__ import annotations

from dataclasses import dataclass


@dataclass(frozen=True)
class Tolerance:
    name: str
    value: float
    scaling: str
    used_by: str


TABLE = (
    Tolerance("cert_rel", 1e-6, "times I(t0)", "comparison_certificate"),
    Tolerance("cert_abs", 1e-10, "absolute", "comparison_certificate"),
    Tolerance("cmp_C", 0.1, "C * (h + dt)", "check_comparison, sandwich_check"),
    Tolerance("unique_C", 0.5, "C * (h + dt_coarse)", "uniqueness_check"),
    Tolerance("visc_C", 2.0, "C * (h + dt_snap) * max(1, max|w_t|)", "viscosity_audit"),
    Tolerance("weak", 1e-3, "absolute, expected to shrink with h", "max_with_constant_check"),
    Tolerance("asym", 1e-3, "absolute sup-norm increment", "asymptotic_profile"),
    Tolerance("eig_tol", 1e-8, "Euler-Lagrange residual", "solve_extremal"),
)

DEFAULTS = {t.name: t.value for t in TABLE}


def tol_cmp(h: float, dt: float, C: float | None = None) -> float:
    return (DEFAULTS["cmp_C"] if C is None else C) * (h + dt)


def tol_unique(h: float, dt_coarse: float, C: float | None = None) -> float:
    return (DEFAULTS["unique_C"] if C is None else C) * (h + dt_coarse)


def tol_cert(i0: float) -> float:
    return DEFAULTS["cert_rel"] * i0 + DEFAULTS["cert_abs"]


def tol_visc(h: float, dt_snap: float, scale: float, C: float | None = None) -> float:
    return (DEFAULTS["visc_C"] if C is None else C) * (h + dt_snap) * max(1.0, scale)


def table_lines() -> list:
    return [f"{t.name} = {t.value!r}  ; {t.scaling}; {t.used_by}" for t in TABLE]
