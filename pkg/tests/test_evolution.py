import math

import numpy as np
import pytest

from _oracles import brute_cfl_1d, interval_pair, sine_bump
from trudlab.fields import Regularization, ScalarField
from trudlab.grid import build_disk, build_interval, build_rectangle, scale_domain
from trudlab.evolution import (
    EvolutionError,
    StepOptions,
    cfl_timestep,
    decay_rate_fit,
    evolve,
    evolve_many,
    separable_solution,
    separable_trace,
)
from trudlab.operators import boundary_flux, weak_residual


def test_zero_data_stay_zero():
    d = build_rectangle(0, 1, 0, 1, 12)
    for p in (1.5, 2.0, 3.0):
        tr = evolve(d, p, ScalarField.zeros(d), 0.05, StepOptions(snapshot_dt=0.01))
        assert np.all(tr.values == 0.0)


def test_heat_oracle():
    d = build_interval(0.0, 1.0, 128)
    x = d.coords()[0]
    tr = evolve(d, 2.0, sine_bump(d), 0.1)
    assert tr.times[-1] == 0.1
    exact = np.exp(-np.pi ** 2 * 0.1) * np.sin(np.pi * x)
    assert np.abs(tr.values[-1] - exact)[d.inside_mask].max() <= 1e-3


@pytest.mark.parametrize("n", [64, 128])
def test_separable_p3(n):
    pair = interval_pair(n, 3.0)
    tr = evolve(pair.u.domain, 3.0, pair.u, 0.5, StepOptions(snapshot_dt=0.1))
    assert np.abs(tr.values[-1] - separable_solution(pair, 3.0, 0.5).values).max() <= 5e-3


def test_trace_invariants():
    d = build_disk(1.0, 16)
    g = ScalarField(d, np.where(d.interior_mask, 1 - sum(c ** 2 for c in d.coords()), 0.0))
    tr = evolve(d, 3.0, g, 0.02, StepOptions(snapshot_dt=0.005))
    assert np.all(np.diff(tr.times) > 0)
    np.testing.assert_array_equal(tr.values[0], g.values)
    assert np.all(tr.values >= 0)
    assert np.all(tr.values[:, ~d.interior_mask] == 0)
    np.testing.assert_allclose(tr.times, [0, 0.005, 0.01, 0.015, 0.02], rtol=0, atol=1e-15)
    assert tr.meta["scheme"] == "explicit" and tr.meta["steps"] > 0


def test_snapshot_stride():
    d = build_interval(0.0, 1.0, 16)
    tr = evolve(d, 2.0, sine_bump(d), 0.05, StepOptions(snapshot_stride=7))
    assert tr.times[-1] == 0.05
    assert len(tr) >= 3


def test_cfl_p2_classical():
    for d in (build_interval(0.0, 1.0, 32), build_rectangle(0, 1, 0, 1, 32)):
        v = ScalarField(d, sine_bump(d))
        opts = StepOptions(cfl_safety=0.8, dt_max=1.0)
        assert cfl_timestep(v, 2.0, opts) == pytest.approx(0.8 * d.h ** 2 / (2 * d.dim), rel=1e-14)


def test_cfl_zero_field():
    d = build_interval(0.0, 1.0, 16)
    assert cfl_timestep(ScalarField.zeros(d), 3.0, StepOptions(dt_max=0.01)) == 0.01


@pytest.mark.parametrize("p, eps", [(3.0, 0.0), (1.5, 1 / 64), (2.5, 0.0), (4.0, 0.1)])
def test_cfl_brute_force(p, eps):
    d = build_interval(0.0, 1.0, 64)
    v = sine_bump(d)
    opts = StepOptions(cfl_safety=0.9, dt_max=1.0, eps=eps)
    ref = brute_cfl_1d(v, d.interior_mask, p, d.h, 0.9, 1.0, eps=eps)
    assert cfl_timestep(ScalarField(d, v), p, opts) == pytest.approx(ref, rel=1e-12)


def test_separable_solution_values():
    pair = interval_pair(64, 3.0)
    np.testing.assert_array_equal(separable_solution(pair, 3.0, 0.0).values, pair.u.values)
    t = math.log(2.0) * 2.0 / pair.lam
    np.testing.assert_allclose(separable_solution(pair, 3.0, t).values, pair.u.values / 2, rtol=1e-14)
    with pytest.raises(ValueError):
        separable_solution(pair, 3.0, -1.0)


def test_separable_trace_weak_residual_p2():
    pair = interval_pair(128, 2.0)
    times = np.linspace(0.0, 0.1, 201)
    tr = separable_trace(pair, 2.0, times)

    def phi(x, t):
        r = np.abs(x - 0.5) / 0.3
        return np.where(r < 1, np.cos(0.5 * np.pi * r) ** 2, 0.0) * np.sin(np.pi * t / 0.1) ** 2

    assert abs(weak_residual(tr, 2.0, phi, Regularization(eps=0.0))) <= 1e-3


def test_decay_exact_trace():
    for p in (1.5, 2.0, 3.0):
        pair = interval_pair(64, p)
        tr = separable_trace(pair, p, np.linspace(0.0, 0.5, 11))
        assert decay_rate_fit(tr, (0.1, 0.5)) == pytest.approx(pair.lam / (p - 1), rel=1e-10)


def test_decay_heat():
    d = build_interval(0.0, 1.0, 128)
    tr = evolve(d, 2.0, sine_bump(d), 0.3, StepOptions(snapshot_dt=0.02))
    assert decay_rate_fit(tr, (0.1, 0.3)) == pytest.approx(np.pi ** 2, rel=1e-2)


@pytest.mark.parametrize(
    "p, n, eps, T",
    [(2.0, 64, None, 1.5), (2.0, 128, None, 1.5), (3.0, 64, None, 0.6), (3.0, 128, None, 0.6), (1.5, 32, 0.0, 1.0), (1.5, 64, 0.0, 1.0)],
)
def test_decay_generic_data(p, n, eps, T):
    pair = interval_pair(n, p)
    d = pair.u.domain
    x = d.coords()[0]
    g = pair.u.values * (0.6 + 0.4 * np.cos(3 * np.pi * x) ** 2)
    tr = evolve(d, p, g, T, StepOptions(snapshot_dt=0.05, eps=eps))
    assert decay_rate_fit(tr, (T / 2, T)) == pytest.approx(pair.lam / (p - 1), rel=3e-2)


def test_decay_errors():
    pair = interval_pair(32, 2.0)
    tr = separable_trace(pair, 2.0, [0.0, 0.1, 0.2])
    with pytest.raises(ValueError):
        decay_rate_fit(tr, (0.15, 0.3))
    zero = tr.with_values(np.zeros_like(tr.values))
    with pytest.raises(ValueError):
        decay_rate_fit(zero, (0.0, 0.2))


@pytest.mark.parametrize("p, eps", [(2.0, None), (3.0, None), (1.5, 0.0)])
def test_homogeneity(p, eps):
    d = build_interval(0.0, 1.0, 64)
    x = d.coords()[0]
    g = np.where(d.interior_mask, np.sin(np.pi * x) ** 2 * (1 + x), 0.0)
    betas = (0.5, 2.0, 10.0)
    runs = evolve_many(d, p, [g] + [b * g for b in betas], 0.05, StepOptions(snapshot_dt=0.01, eps=eps))
    for b, tr in zip(betas, runs[1:]):
        assert np.abs(tr.values - b * runs[0].values).max() <= 1e-8


def test_homogeneity_2d():
    d = build_rectangle(0, 1, 0, 1, 16)
    g = sine_bump(d, 2)
    runs = evolve_many(d, 3.0, [g, 10 * g], 0.02, StepOptions(snapshot_dt=0.01))
    assert np.abs(runs[1].values - 10 * runs[0].values).max() <= 1e-8


@pytest.mark.parametrize("p", [1.5, 2.0, 3.0])
def test_ordered_data_stay_ordered(p):
    d = build_interval(0.0, 1.0, 48)
    x = d.coords()[0]
    g2 = sine_bump(d) * (1 + x)
    g1 = np.minimum(g2, 0.5 * sine_bump(d, 2))
    lo, hi = evolve_many(d, p, [g1, g2], 0.05, StepOptions(snapshot_dt=0.005))
    assert np.all(lo.values <= hi.values + 1e-8)


@pytest.mark.parametrize("p", [2.0, 3.0])
def test_conservation_per_step(p):
    d = build_interval(0.0, 1.0, 32)
    tr = evolve(d, p, sine_bump(d), 2e-3, StepOptions(snapshot_stride=1, dt_max=1e-4))
    inn = d.interior_mask
    for k in range(len(tr) - 1):
        dt = tr.times[k + 1] - tr.times[k]
        w0 = tr.values[k][inn] ** (p - 1)
        w1 = tr.values[k + 1][inn] ** (p - 1)
        net = (w1.sum() - w0.sum()) * d.cell_volume
        assert net == pytest.approx(dt * boundary_flux(tr.field_at(k), p, Regularization(eps=0.0)), abs=1e-10)


def test_conservation_2d():
    d = build_disk(1.0, 12)
    x, y = d.coords()
    g = np.where(d.interior_mask, 1 - x * x - y * y + 0.1, 0.0)
    tr = evolve(d, 2.0, g, 1e-3, StepOptions(snapshot_stride=1))
    inn = d.interior_mask
    for k in range(len(tr) - 1):
        dt = tr.times[k + 1] - tr.times[k]
        net = (tr.values[k + 1][inn].sum() - tr.values[k][inn].sum()) * d.cell_volume
        assert net == pytest.approx(dt * boundary_flux(tr.field_at(k), 2.0), abs=1e-10)


def test_time_scaling_p2():
    alpha, T, p = 0.5, 0.05, 2.0
    d = build_interval(0.0, 1.0, 128)
    s = scale_domain(d, alpha)
    x = d.coords()[0]
    g = np.where(d.interior_mask, np.sin(np.pi * x) * (1 + x), 0.0)
    base = evolve(d, p, g, alpha ** p * T)
    xs = s.coords()[0]
    mapped = 0.5 + alpha * (xs - 0.5)
    gs = np.where(s.interior_mask, np.interp(mapped, x, g), 0.0)
    big = evolve(s, p, gs, T)
    expect = np.interp(mapped, x, base.values[-1])
    assert np.abs(big.values[-1] - expect)[s.inside_mask].max() <= 5e-3


@pytest.mark.parametrize("p", [1.5, 2.0, 3.0])
def test_positivity_spreads(p):
    d = build_interval(0.0, 1.0, 64)
    x = d.coords()[0]
    g = np.where((np.abs(x - 0.5) < 0.1) & d.interior_mask, np.cos(np.pi * (x - 0.5) / 0.2) ** 2, 0.0)
    assert g[d.interior_mask].min() == 0.0
    tr = evolve(d, p, g, 0.05, StepOptions(snapshot_dt=0.05))
    assert tr.meta["steps"] >= 64
    assert tr.values[-1][d.interior_mask].min() > 0


def test_semi_implicit_heat():
    d = build_interval(0.0, 1.0, 64)
    x = d.coords()[0]
    tr = evolve(d, 2.0, sine_bump(d), 0.1, StepOptions(scheme="semi-implicit", dt_max=1e-4, snapshot_dt=0.05))
    assert tr.meta["scheme"] == "semi-implicit"
    exact = np.exp(-np.pi ** 2 * 0.1) * np.sin(np.pi * x)
    assert np.abs(tr.values[-1] - exact).max() <= 2e-3


@pytest.mark.parametrize("p", [1.5, 3.0])
def test_semi_implicit_separable(p):
    pair = interval_pair(64, p)
    tr = evolve(pair.u.domain, p, pair.u, 0.1, StepOptions(scheme="semi-implicit", dt_max=2e-4, snapshot_dt=0.05))
    assert np.abs(tr.values[-1] - separable_solution(pair, p, 0.1).values).max() <= 5e-3


def test_matched_snapshots_across_schemes():
    d = build_interval(0.0, 1.0, 32)
    a = evolve(d, 2.0, sine_bump(d), 0.1, StepOptions(snapshot_dt=0.02))
    b = evolve(d, 2.0, sine_bump(d), 0.1, StepOptions(scheme="semi-implicit", dt_max=1e-3, snapshot_dt=0.02))
    np.testing.assert_allclose(a.times, b.times, rtol=0, atol=1e-14)


def test_initial_data_errors():
    d = build_interval(0.0, 1.0, 16)
    g = sine_bump(d)
    with pytest.raises(ValueError):
        evolve(d, 2.0, -g, 0.1)
    bad = g.copy()
    bad[0] = 1.0
    with pytest.raises(ValueError):
        evolve(d, 2.0, bad, 0.1)
    with pytest.raises(ValueError):
        evolve(d, 2.0, g, 0.0)
    with pytest.raises(ValueError):
        evolve(d, 2.0, np.zeros(5), 0.1)
    with pytest.raises(ValueError, match="1 < p"):
        evolve(d, 0.5, g, 0.1)


@pytest.mark.parametrize(
    "kw", [dict(scheme="implicit"), dict(cfl_safety=0.0), dict(cfl_safety=1.5), dict(dt_max=0.0), dict(eps=-1.0), dict(snapshot_stride=0), dict(snapshot_dt=0.0)]
)
def test_step_options_validated(kw):
    with pytest.raises(ValueError):
        StepOptions(**kw)


def test_step_budget():
    d = build_interval(0.0, 1.0, 32)
    with pytest.raises(EvolutionError, match="budget"):
        evolve(d, 2.0, sine_bump(d), 0.1, StepOptions(max_steps=5))


def test_semi_implicit_sweep_limit():
    d = build_interval(0.0, 1.0, 32)
    with pytest.raises(EvolutionError, match="sweeps"):
        evolve(d, 3.0, sine_bump(d), 0.01, StepOptions(scheme="semi-implicit", dt_max=1e-3, max_sweeps=1))
