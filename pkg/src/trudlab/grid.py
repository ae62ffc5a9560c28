"""Uniform grids with interior/boundary bookkeeping.

A :class:`GridDomain` is a rectangular array of nodes with spacing ``h`` on
every axis.  Each node is either *interior* (an unknown), *boundary* (carries
the Dirichlet value, zero for every problem in this package) or outside the
domain (``'.'`` in snapshots, value identically zero).
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Optional, Sequence

import numpy as np

Indicator = Callable[..., np.ndarray]


@dataclass(frozen=True, eq=False)
class GridDomain:
    """Discretized spatial domain on a uniform grid."""

    dim: int
    h: float
    shape: tuple
    origin: tuple
    interior_mask: np.ndarray
    boundary_mask: np.ndarray
    star_center: Optional[tuple] = None
    indicator: Optional[Indicator] = field(default=None, repr=False)

    def __post_init__(self):
        if self.dim not in (1, 2):
            raise ValueError("dim must be 1 or 2")
        if not self.h > 0:
            raise ValueError("spacing h must be positive")
        if self.interior_mask.shape != tuple(self.shape):
            raise ValueError("interior mask does not match shape")
        if self.boundary_mask.shape != tuple(self.shape):
            raise ValueError("boundary mask does not match shape")
        if np.any(self.interior_mask & self.boundary_mask):
            raise ValueError("interior and boundary masks overlap")
        if not self.interior_mask.any():
            raise ValueError("domain has no interior nodes")
        inside = self.interior_mask | self.boundary_mask
        for axis in range(self.dim):
            if self.interior_mask.take([0, -1], axis=axis).any():
                raise ValueError("interior node on the edge of the node array")
            for shift in (1, -1):
                nbr = np.roll(inside, shift, axis=axis)
                if np.any(self.interior_mask & ~nbr):
                    raise ValueError("interior node with a neighbor outside the domain")
        self.interior_mask.setflags(write=False)
        self.boundary_mask.setflags(write=False)
        if self.star_center is not None and not is_star_shaped(self, self.star_center):
            raise ValueError("domain is not star-shaped about the given center")

    @property
    def cell_volume(self) -> float:
        return self.h ** self.dim

    @property
    def n_interior(self) -> int:
        return int(self.interior_mask.sum())

    @property
    def inside_mask(self) -> np.ndarray:
        return self.interior_mask | self.boundary_mask

    def axes(self) -> list:
        """1D coordinate arrays, one per axis."""
        return [self.origin[k] + self.h * np.arange(self.shape[k]) for k in range(self.dim)]

    def coords(self) -> tuple:
        """Node coordinates as arrays of ``shape`` (``indexing='ij'``)."""
        return tuple(np.meshgrid(*self.axes(), indexing="ij"))

    def sample(self, fn: Callable[..., np.ndarray]) -> np.ndarray:
        """Evaluate ``fn`` at the nodes; zero outside the interior."""
        values = np.asarray(fn(*self.coords()), dtype=float)
        values = np.broadcast_to(values, self.shape).copy()
        values[~self.interior_mask] = 0.0
        return values

    def same_grid(self, other: "GridDomain") -> bool:
        return (
            self.dim == other.dim
            and tuple(self.shape) == tuple(other.shape)
            and math.isclose(self.h, other.h, rel_tol=1e-12)
            and np.allclose(self.origin, other.origin, atol=1e-9 * self.h)
            and np.array_equal(self.interior_mask, other.interior_mask)
            and np.array_equal(self.boundary_mask, other.boundary_mask)
        )

    def mask_chars(self) -> np.ndarray:
        chars = np.full(self.shape, ".", dtype="<U1")
        chars[self.boundary_mask] = "B"
        chars[self.interior_mask] = "I"
        return chars

    def to_snapshot(self) -> str:
        """Key-value header followed by row-major mask characters."""
        lines = [
            f"dim: {self.dim}",
            f"h: {self.h!r}",
            "shape: " + " ".join(str(s) for s in self.shape),
            "origin: " + " ".join(repr(float(o)) for o in self.origin),
            "star_center: "
            + ("none" if self.star_center is None else " ".join(repr(float(c)) for c in self.star_center)),
        ]
        chars = self.mask_chars()
        if self.dim == 1:
            lines.append("".join(chars))
        else:
            lines.extend("".join(row) for row in chars)
        return "\n".join(lines) + "\n"

    @classmethod
    def from_snapshot(cls, text: str) -> "GridDomain":
        header = {}
        rows = []
        for line in text.splitlines():
            if not line:
                continue
            if ":" in line:
                key, _, value = line.partition(":")
                header[key.strip()] = value.strip()
            else:
                rows.append(line)
        dim = int(header["dim"])
        shape = tuple(int(s) for s in header["shape"].split())
        chars = np.array([list(r) for r in rows], dtype="<U1").reshape(shape)
        center = header.get("star_center", "none")
        return cls(
            dim=dim,
            h=float(header["h"]),
            shape=shape,
            origin=tuple(float(o) for o in header["origin"].split()),
            interior_mask=chars == "I",
            boundary_mask=chars == "B",
            star_center=None if center == "none" else tuple(float(c) for c in center.split()),
        )


def _boundary_layer(interior: np.ndarray) -> np.ndarray:
    near = np.zeros_like(interior)
    for axis in range(interior.ndim):
        padded = np.pad(interior, [(1, 1) if k == axis else (0, 0) for k in range(interior.ndim)])
        sl_lo = [slice(None)] * interior.ndim
        sl_hi = [slice(None)] * interior.ndim
        sl_lo[axis] = slice(0, -2)
        sl_hi[axis] = slice(2, None)
        near |= padded[tuple(sl_lo)] | padded[tuple(sl_hi)]
    return near & ~interior


def is_star_shaped(domain: GridDomain, center: Sequence[float]) -> bool:
    """Sample every interior node's segment to ``center`` at spacing h/2."""
    center = np.asarray(center, dtype=float)
    inside = domain.inside_mask
    pts = np.stack([c[domain.interior_mask] for c in domain.coords()], axis=-1)
    dist = np.linalg.norm(pts - center, axis=-1).max()
    nsamp = max(2, int(math.ceil(dist / (0.5 * domain.h))) + 1)
    origin = np.asarray(domain.origin, dtype=float)
    for s in np.linspace(0.0, 1.0, nsamp):
        q = center + s * (pts - center)
        idx = np.rint((q - origin) / domain.h).astype(int)
        for axis in range(domain.dim):
            if np.any(idx[:, axis] < 0) or np.any(idx[:, axis] >= domain.shape[axis]):
                return False
        if not inside[tuple(idx.T)].all():
            return False
    return True


def build_masked(
    indicator: Indicator,
    bbox: Sequence[Sequence[float]],
    n,
    star_center: Optional[Sequence[float]] = None,
    origin: Optional[Sequence[float]] = None,
    shape: Optional[Sequence[int]] = None,
) -> GridDomain:
    """Grid on ``bbox`` whose interior is where ``indicator`` holds.

    ``n`` is the number of cells along the first axis; the other axes reuse
    the same spacing.  Nodes on the edge of the node array are never
    interior.  ``origin``/``shape`` override the node layout (used to keep
    scaled grids aligned with the original nodes).
    """
    bbox = [tuple(map(float, b)) for b in bbox]
    dim = len(bbox)
    if dim not in (1, 2):
        raise ValueError("only 1D and 2D domains are supported")
    if any(hi <= lo for lo, hi in bbox):
        raise ValueError("bounding box must have lo < hi on every axis")
    if isinstance(n, (tuple, list)):
        n0 = int(n[0])
    else:
        n0 = int(n)
    if n0 < 2:
        raise ValueError("need at least 2 cells per axis")
    h = (bbox[0][1] - bbox[0][0]) / n0
    if origin is None:
        origin = tuple(lo for lo, _ in bbox)
    if shape is None:
        shape = tuple(int(round((hi - lo) / h)) + 1 for lo, hi in bbox)
    axes = [origin[k] + h * np.arange(shape[k]) for k in range(dim)]
    pts = np.meshgrid(*axes, indexing="ij")
    interior = np.asarray(indicator(*pts), dtype=bool)
    interior = np.broadcast_to(interior, tuple(shape)).copy()
    for axis in range(dim):
        idx = [slice(None)] * dim
        idx[axis] = 0
        interior[tuple(idx)] = False
        idx[axis] = -1
        interior[tuple(idx)] = False
    if not interior.any():
        raise ValueError("indicator selects no interior nodes")
    return GridDomain(
        dim=dim,
        h=h,
        shape=tuple(shape),
        origin=tuple(float(o) for o in origin),
        interior_mask=interior,
        boundary_mask=_boundary_layer(interior),
        star_center=None if star_center is None else tuple(float(c) for c in star_center),
        indicator=indicator,
    )


def _open_box(bbox, fuzz):
    def indicator(*xs):
        ok = np.ones(np.shape(xs[0]), dtype=bool)
        for x, (lo, hi) in zip(xs, bbox):
            ok &= (x > lo + fuzz) & (x < hi - fuzz)
        return ok

    return indicator


def build_interval(a: float, b: float, n: int) -> GridDomain:
    """Interval (a, b) with n cells: n+1 nodes, endpoints on the boundary."""
    if not a < b:
        raise ValueError(f"need a < b, got a={a}, b={b}")
    if int(n) < 3:
        raise ValueError(f"need n >= 3 cells, got {n}")
    fuzz = 1e-9 * (b - a) / n
    return build_masked(_open_box([(a, b)], fuzz), [(a, b)], n, star_center=(0.5 * (a + b),))


def build_rectangle(x0: float, x1: float, y0: float, y1: float, n: int) -> GridDomain:
    """Open rectangle, star-shaped about its center; n cells along x."""
    fuzz = 1e-9 * (x1 - x0) / n
    return build_masked(
        _open_box([(x0, x1), (y0, y1)], fuzz),
        [(x0, x1), (y0, y1)],
        n,
        star_center=(0.5 * (x0 + x1), 0.5 * (y0 + y1)),
    )


def build_disk(radius: float, n: int, center=(0.0, 0.0)) -> GridDomain:
    """Disk mask on the bounding square, n cells per axis."""
    cx, cy = center
    r = float(radius)

    def indicator(x, y):
        return (x - cx) ** 2 + (y - cy) ** 2 < r * r

    return build_masked(indicator, [(cx - r, cx + r), (cy - r, cy + r)], n, star_center=center)


def scale_domain(d: GridDomain, alpha: float) -> GridDomain:
    """Image of ``d`` under x -> c + (x - c)/alpha on the same node lattice."""
    if not 0.0 < alpha <= 1.0:
        raise ValueError(f"alpha must lie in (0, 1], got {alpha}")
    if d.star_center is None:
        raise ValueError("scale_domain needs a star center")
    if alpha == 1.0:
        return d
    if d.indicator is None:
        raise ValueError("domain carries no indicator; rebuild it with build_* before scaling")
    c = np.asarray(d.star_center, dtype=float)
    base = d.indicator

    def indicator(*xs):
        return base(*[c[k] + alpha * (xs[k] - c[k]) for k in range(d.dim)])

    h = d.h
    origin, shape, bbox = [], [], []
    for k in range(d.dim):
        lo = d.origin[k]
        hi = lo + h * (d.shape[k] - 1)
        lo_s = c[k] + (lo - c[k]) / alpha
        hi_s = c[k] + (hi - c[k]) / alpha
        m_lo = int(math.ceil((lo - lo_s) / h - 1e-9))
        m_hi = int(math.ceil((hi_s - hi) / h - 1e-9))
        origin.append(lo - m_lo * h)
        shape.append(d.shape[k] + m_lo + m_hi)
        bbox.append((origin[-1], origin[-1] + h * (shape[-1] - 1)))
    return build_masked(
        indicator,
        bbox,
        shape[0] - 1,
        star_center=d.star_center,
        origin=tuple(origin),
        shape=tuple(shape),
    )


def shrink_domain(d: GridDomain, j: int) -> GridDomain:
    """Erode the interior by ``j`` node layers; eroded nodes become boundary."""
    j = int(j)
    if j < 0:
        raise ValueError("j must be nonnegative")
    if j == 0:
        return d
    interior = d.interior_mask.copy()
    for _ in range(j):
        keep = interior.copy()
        for axis in range(d.dim):
            for shift in (1, -1):
                keep &= np.roll(interior, shift, axis=axis)
        interior = keep
    if not interior.any():
        raise ValueError(f"eroding {j} layers leaves no interior nodes")
    center = d.star_center
    domain = GridDomain(
        dim=d.dim,
        h=d.h,
        shape=d.shape,
        origin=d.origin,
        interior_mask=interior,
        boundary_mask=_boundary_layer(interior),
        star_center=None,
    )
    if center is not None and is_star_shaped(domain, center):
        domain = GridDomain(
            dim=d.dim,
            h=d.h,
            shape=d.shape,
            origin=d.origin,
            interior_mask=interior,
            boundary_mask=domain.boundary_mask,
            star_center=center,
        )
    return domain
