"""Mixing measures over stability indices and fractional time orders.

A measure is stored as a finite list of weighted nodes. Atoms are kept as
given; continuous densities are reduced to Gauss-Legendre nodes when the
measure is built, so every downstream formula is a plain weighted sum.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from typing import Callable, ClassVar, Iterable, Sequence

import numpy as np

DEFAULT_NODES = 32


def _as_pairs(pairs: Iterable[Sequence[float]]) -> tuple[tuple[float, float], ...]:
    return tuple((float(a), float(w)) for a, w in pairs)


@dataclass(frozen=True)
class _MixingMeasure:
    atoms: tuple[tuple[float, float], ...] = ()
    density_nodes: tuple[tuple[float, float], ...] = ()

    # (lower, upper, upper_inclusive)
    _domain: ClassVar[tuple[float, float, bool]] = (0.0, 2.0, False)
    _label: ClassVar[str] = "alpha"

    nodes: np.ndarray = field(init=False, repr=False, compare=False)
    weights: np.ndarray = field(init=False, repr=False, compare=False)

    def __post_init__(self) -> None:
        object.__setattr__(self, "atoms", _as_pairs(self.atoms))
        object.__setattr__(self, "density_nodes", _as_pairs(self.density_nodes))
        pairs = self.atoms + self.density_nodes
        if not pairs:
            raise ValueError("a mixing measure needs at least one atom or node")
        lo, hi, closed = self._domain
        for order, weight in pairs:
            inside = lo < order < hi or (closed and order == hi)
            if not inside:
                bracket = "]" if closed else ")"
                raise ValueError(
                    f"{self._label}={order} outside ({lo:g}, {hi:g}{bracket}"
                )
            if not weight > 0 or not np.isfinite(weight):
                raise ValueError(f"weight must be positive and finite, got {weight}")
        nodes = np.array([p[0] for p in pairs], dtype=float)
        weights = np.array([p[1] for p in pairs], dtype=float)
        nodes.setflags(write=False)
        weights.setflags(write=False)
        object.__setattr__(self, "nodes", nodes)
        object.__setattr__(self, "weights", weights)

    @property
    def total_mass(self) -> float:
        return float(self.weights.sum())

    @property
    def is_atomic(self) -> bool:
        return not self.density_nodes

    @property
    def single_order(self) -> float | None:
        """The order if the measure is a single atom, else None."""
        if len(self.atoms) == 1 and not self.density_nodes:
            return self.atoms[0][0]
        return None

    @property
    def order_range(self) -> tuple[float, float]:
        return float(self.nodes.min()), float(self.nodes.max())

    def __add__(self, other: _MixingMeasure) -> _MixingMeasure:
        if type(other) is not type(self):
            return NotImplemented
        return type(self)(self.atoms + other.atoms,
                          self.density_nodes + other.density_nodes)

    def to_dict(self) -> dict:
        return {"atoms": [list(p) for p in self.atoms],
                "density_nodes": [list(p) for p in self.density_nodes]}

    @classmethod
    def from_dict(cls, data: dict):
        return cls(data.get("atoms", ()), data.get("density_nodes", ()))

    def to_json(self) -> str:
        return json.dumps(self.to_dict())

    @classmethod
    def from_json(cls, text: str):
        return cls.from_dict(json.loads(text))

    @classmethod
    def atomic(cls, pairs: Iterable[Sequence[float]]):
        pairs = _as_pairs(pairs)
        if not pairs:
            raise ValueError("empty list of atoms")
        return cls(atoms=pairs)

    @classmethod
    def from_density(cls, density: Callable[[float], float],
                     support: tuple[float, float], n_nodes: int = DEFAULT_NODES):
        """Discretize ``density`` on ``support`` with Gauss-Legendre nodes."""
        a, b = map(float, support)
        lo, hi, closed = cls._domain
        if not (lo < a < b and (b < hi or (closed and b == hi))):
            raise ValueError(f"support {support} not inside the admissible range")
        if n_nodes < 1:
            raise ValueError("n_nodes must be >= 1")
        x, w = np.polynomial.legendre.leggauss(int(n_nodes))
        orders = 0.5 * (b - a) * x + 0.5 * (a + b)
        values = np.array([float(density(o)) for o in orders])
        if np.any(values < 0) or not np.all(np.isfinite(values)):
            raise ValueError("density must be finite and nonnegative at the nodes")
        qw = 0.5 * (b - a) * w * values
        keep = qw > 0
        return cls(density_nodes=tuple(zip(orders[keep], qw[keep])))


@dataclass(frozen=True)
class SpectralMeasure(_MixingMeasure):
    """Mixing measure over stability indices alpha in (0, 2)."""

    _domain: ClassVar[tuple[float, float, bool]] = (0.0, 2.0, False)
    _label: ClassVar[str] = "alpha"

    @property
    def alphas(self) -> np.ndarray:
        return self.nodes

    def psi_radial(self, r) -> np.ndarray:
        """Levy symbol as a function of ``|xi|``; vectorized over ``r``."""
        r = np.abs(np.asarray(r, dtype=float))
        powers = r[..., None] ** self.nodes
        return -(powers @ self.weights)


@dataclass(frozen=True)
class TimeMeasure(_MixingMeasure):
    """Mixing measure over fractional time orders beta in (0, 1]."""

    _domain: ClassVar[tuple[float, float, bool]] = (0.0, 1.0, True)
    _label: ClassVar[str] = "beta"

    @property
    def betas(self) -> np.ndarray:
        return self.nodes


def make_atomic_measure(pairs: Iterable[Sequence[float]]) -> SpectralMeasure:
    """Build a purely atomic spatial measure from ``(alpha, weight)`` pairs."""
    return SpectralMeasure.atomic(pairs)


def make_density_measure(density: Callable[[float], float],
                         support: tuple[float, float],
                         n_nodes: int = DEFAULT_NODES) -> SpectralMeasure:
    """Build a spatial measure ``a(alpha) d alpha`` on a sub-interval of (0, 2)."""
    return SpectralMeasure.from_density(density, support, n_nodes)


def symbol_psi(rho: SpectralMeasure, xi) -> float:
    """Levy symbol ``-sum_i w_i |xi|^alpha_i`` at a single point ``xi`` of R^d."""
    r = float(np.linalg.norm(np.atleast_1d(np.asarray(xi, dtype=float))))
    return float(rho.psi_radial(r))


def load_measure(source, kind: type[_MixingMeasure] = SpectralMeasure):
    """Read a measure from a dict, a JSON string, or a path to a JSON file."""
    if isinstance(source, kind):
        return source
    if isinstance(source, dict):
        return kind.from_dict(source)
    text = str(source)
    if text.lstrip().startswith("{"):
        return kind.from_json(text)
    with open(text) as fh:
        return kind.from_dict(json.load(fh))
