"""Field containers shared by the operator, evolution and verification layers."""
from __future__ import annotations

from dataclasses import dataclass, field, replace

import numpy as np

from .grid import GridDomain


@dataclass(frozen=True, eq=False)
class PExponent:
    p: float

    def __post_init__(self):
        check_p(self.p)

    def __float__(self):
        return float(self.p)


def check_p(p) -> float:
    """Return ``p`` as a float, rejecting anything outside (1, inf)."""
    p = float(p)
    if not (1.0 < p < np.inf):
        raise ValueError(f"exponent must satisfy 1 < p < inf, got p={p}")
    return p


@dataclass(frozen=True)
class Regularization:
    """Gradient floor ``eps`` and Heaviside width ``delta``.

    ``eps=None`` selects the default: 0 for p >= 2 and h for p < 2.
    """

    eps: float | None = None
    delta: float = 1e-2

    def __post_init__(self):
        if self.eps is not None and self.eps < 0:
            raise ValueError("eps must be nonnegative")
        if not self.delta > 0:
            raise ValueError("delta must be positive")

    def eps_for(self, p: float, h: float) -> float:
        if self.eps is not None:
            return float(self.eps)
        return float(h) if p < 2.0 else 0.0


@dataclass(frozen=True, eq=False)
class ScalarField:
    """One value per node of ``domain`` (zero outside the domain)."""

    domain: GridDomain
    values: np.ndarray

    def __post_init__(self):
        vals = np.asarray(self.values, dtype=float)
        if vals.shape != tuple(self.domain.shape):
            raise ValueError(f"values of shape {vals.shape} do not match grid {self.domain.shape}")
        if not np.all(np.isfinite(vals)):
            raise ValueError("field has non-finite values")
        object.__setattr__(self, "values", vals)

    @classmethod
    def from_function(cls, domain: GridDomain, fn) -> "ScalarField":
        return cls(domain, domain.sample(fn))

    @classmethod
    def zeros(cls, domain: GridDomain) -> "ScalarField":
        return cls(domain, np.zeros(domain.shape))

    @property
    def interior_values(self) -> np.ndarray:
        return self.values[self.domain.interior_mask]

    def __mul__(self, c) -> "ScalarField":
        return ScalarField(self.domain, self.values * float(c))

    __rmul__ = __mul__


@dataclass(frozen=True, eq=False)
class VectorField:
    """``components[k]`` holds the k-th component at every node (zero off the interior)."""

    domain: GridDomain
    components: np.ndarray

    def norm(self) -> np.ndarray:
        return np.sqrt((self.components ** 2).sum(axis=0))


@dataclass(frozen=True, eq=False)
class EvolutionTrace:
    """Snapshots ``values[k]`` of a field at ``times[k]``."""

    domain: GridDomain
    p: float
    times: np.ndarray
    values: np.ndarray
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        times = np.asarray(self.times, dtype=float)
        values = np.asarray(self.values, dtype=float)
        if values.shape != (len(times),) + tuple(self.domain.shape):
            raise ValueError("snapshot array does not match times and grid")
        if len(times) > 1 and np.any(np.diff(times) <= 0):
            raise ValueError("snapshot times must be strictly increasing")
        object.__setattr__(self, "times", times)
        object.__setattr__(self, "values", values)

    def __len__(self) -> int:
        return len(self.times)

    @property
    def fields(self) -> list:
        return [ScalarField(self.domain, v) for v in self.values]

    def field_at(self, k: int) -> ScalarField:
        return ScalarField(self.domain, self.values[k])

    def with_values(self, values, **meta) -> "EvolutionTrace":
        return replace(self, values=np.asarray(values, dtype=float), meta={**self.meta, **meta})

    def scaled(self, k: float) -> "EvolutionTrace":
        return self.with_values(self.values * float(k))

    def conserved(self) -> np.ndarray:
        """The time-differentiated quantity |v|^{p-2} v at every snapshot."""
        return np.sign(self.values) * np.abs(self.values) ** (self.p - 1.0)
