import math

import numpy as np
import pytest

from trudlab.grid import (
    GridDomain,
    build_disk,
    build_interval,
    build_masked,
    build_rectangle,
    scale_domain,
    shrink_domain,
)


def positions(d, mask):
    return [tuple(np.round(c[mask], 9)) for c in d.coords()]


def test_interval_small():
    d = build_interval(0.0, 1.0, 4)
    assert d.shape == (5,)
    assert d.h == 0.25
    assert d.boundary_mask.tolist() == [True, False, False, False, True]
    assert d.interior_mask.tolist() == [False, True, True, True, False]
    assert d.star_center == (0.5,)


def test_interval_pi():
    d = build_interval(0.0, math.pi, 128)
    assert d.shape == (129,)
    assert d.h == pytest.approx(math.pi / 128, rel=1e-15)


@pytest.mark.parametrize("a, b, n", [(1.0, 0.0, 4), (0.0, 0.0, 4), (0.0, 1.0, 2)])
def test_interval_rejects(a, b, n):
    with pytest.raises(ValueError):
        build_interval(a, b, n)


def test_disk_mask():
    d = build_disk(1.0, 64)
    x, y = d.coords()
    assert np.all(x[d.interior_mask] ** 2 + y[d.interior_mask] ** 2 < 1.0)
    # every boundary node touches the interior: one-node-thick layer
    touch = np.zeros(d.shape, dtype=bool)
    for axis in (0, 1):
        for shift in (1, -1):
            touch |= np.roll(d.interior_mask, shift, axis=axis)
    assert np.all(touch[d.boundary_mask])
    assert d.n_interior == int(d.interior_mask.sum())


def test_square_mask():
    d = build_rectangle(0.0, 1.0, 0.0, 1.0, 32)
    assert d.shape == (33, 33)
    assert d.n_interior == 31 * 31
    assert d.boundary_mask.sum() == 4 * 31


def test_empty_indicator():
    with pytest.raises(ValueError):
        build_masked(lambda x, y: np.zeros_like(x, dtype=bool), [(0, 1), (0, 1)], 16)


def test_masks_disjoint_enforced():
    inn = np.array([False, True, True, False])
    with pytest.raises(ValueError):
        GridDomain(1, 0.25, (4,), (0.0,), inn, inn.copy())


def test_star_center_checked():
    # an annulus is not star-shaped about its center
    def ring(x, y):
        r2 = x * x + y * y
        return (r2 < 1.0) & (r2 > 0.25)

    with pytest.raises(ValueError):
        build_masked(ring, [(-1, 1), (-1, 1)], 32, star_center=(0.0, 0.0))


def test_scale_identity():
    d = build_interval(0.0, 1.0, 16)
    assert scale_domain(d, 1.0) is d


def test_scale_half_interval():
    d = build_interval(0.0, 1.0, 16)
    s = scale_domain(d, 0.5)
    x = s.coords()[0]
    inside = x[s.inside_mask]
    assert inside.min() == pytest.approx(-0.5)
    assert inside.max() == pytest.approx(1.5)
    assert s.h == d.h


@pytest.mark.parametrize("alpha", [0.0, -0.5, 1.5])
def test_scale_rejects(alpha):
    with pytest.raises(ValueError):
        scale_domain(build_interval(0.0, 1.0, 8), alpha)


@pytest.mark.parametrize("make", [lambda: build_interval(0.0, 1.0, 16), lambda: build_disk(1.0, 24)])
def test_scale_contains_original(make):
    d = make()
    s = scale_domain(d, 0.7)
    small = set(zip(*positions(d, d.interior_mask)))
    big = set(zip(*positions(s, s.interior_mask)))
    assert small <= big


def test_shrink_interval():
    d = build_interval(0.0, 1.0, 8)
    s = shrink_domain(d, 1)
    assert "".join(s.mask_chars()) == ".BIIIIIB."
    x = s.coords()[0]
    span = x[s.inside_mask]
    assert span.max() - span.min() == pytest.approx(0.75)


def test_shrink_zero_is_identity():
    d = build_interval(0.0, 1.0, 8)
    assert shrink_domain(d, 0) is d


def test_shrink_too_far():
    with pytest.raises(ValueError):
        shrink_domain(build_interval(0.0, 1.0, 8), 4)


def test_shrink_monotone():
    d = build_disk(1.0, 32)
    prev = d.interior_mask
    for j in range(1, 6):
        cur = shrink_domain(d, j).interior_mask
        assert np.all(cur <= prev)
        assert cur.sum() < prev.sum()
        prev = cur


@pytest.mark.parametrize("make", [lambda: build_interval(0.0, 1.0, 8), lambda: build_disk(1.0, 12)])
def test_snapshot_roundtrip(make):
    d = make()
    text = d.to_snapshot()
    assert text.splitlines()[0] == f"dim: {d.dim}"
    back = GridDomain.from_snapshot(text)
    assert back.same_grid(d)
    assert np.array_equal(back.interior_mask, d.interior_mask)
    assert np.array_equal(back.boundary_mask, d.boundary_mask)
    assert back.to_snapshot() == text
