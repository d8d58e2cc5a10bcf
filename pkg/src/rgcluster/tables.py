"""Functions of finitely many +-1 spins stored as dense tables.

A table over ``k`` sites has shape ``(2,) * k``; axis ``i`` belongs to
``sites[i]`` and index 0 means spin +1, index 1 means spin -1. Fourier
(Walsh) coefficients use the same layout with index 1 meaning "site in Z".
"""

from __future__ import annotations

import itertools
from typing import Iterable, Mapping

import numpy as np

SPINS = np.array([1.0, -1.0])


def walsh(values: np.ndarray) -> np.ndarray:
    """All normalized Fourier coefficients by iterated pairwise sum/difference.

    ``out[idx]`` is the average over spin configurations of ``f * sigma_Z``
    with ``Z`` the axes where ``idx`` is 1.
    """
    out = np.asarray(values, dtype=np.float64)
    for ax in range(out.ndim):
        a = out.take(0, axis=ax)
        b = out.take(1, axis=ax)
        out = np.stack(((a + b) * 0.5, (a - b) * 0.5), axis=ax)
    return out


def inverse_walsh(coeffs: np.ndarray) -> np.ndarray:
    out = np.asarray(coeffs, dtype=np.float64)
    for ax in range(out.ndim):
        a = out.take(0, axis=ax)
        b = out.take(1, axis=ax)
        out = np.stack((a + b, a - b), axis=ax)
    return out


def spin_axis(k: int, i: int) -> np.ndarray:
    """The +-1 values of spin ``i`` broadcastable against a ``(2,)*k`` table."""
    shape = [1] * k
    shape[i] = 2
    return SPINS.reshape(shape)


def spin_configs(sites: Iterable) -> Iterable[dict]:
    """Every +-1 assignment on ``sites`` in table index order."""
    sites = tuple(sites)
    for idx in itertools.product((0, 1), repeat=len(sites)):
        yield {x: 1 - 2 * i for x, i in zip(sites, idx)}


def config_bits(sites, assignment: Mapping) -> str:
    """Assignment encoded as a string of '+'/'-' in site order."""
    return "".join("+" if assignment[x] == 1 else "-" for x in sites)


def _aligned(table: "SpinTable", target: tuple) -> np.ndarray:
    pos = {x: i for i, x in enumerate(table.sites)}
    shape = [2 if x in pos else 1 for x in target]
    return table.values.reshape(shape)


class SpinTable:
    """A real function of the spins on a sorted tuple of sites."""

    __slots__ = ("sites", "values")

    def __init__(self, sites, values):
        sites = tuple(sites)
        values = np.asarray(values, dtype=np.float64)
        if values.shape != (2,) * len(sites):
            raise ValueError(f"table shape {values.shape} does not match {len(sites)} sites")
        if list(sites) != sorted(set(sites)):
            raise ValueError("table sites must be sorted and distinct")
        self.sites = sites
        self.values = values

    @classmethod
    def constant(cls, c: float = 0.0) -> "SpinTable":
        return cls((), np.array(float(c)))

    def __repr__(self):
        return f"SpinTable(sites={self.sites}, values={self.values.tolist()})"

    def lift(self, sites) -> "SpinTable":
        target = tuple(sorted(set(sites) | set(self.sites)))
        full = np.broadcast_to(_aligned(self, target), (2,) * len(target))
        return SpinTable(target, np.array(full))

    def _combine(self, other, op) -> "SpinTable":
        if not isinstance(other, SpinTable):
            return SpinTable(self.sites, op(self.values, float(other)))
        target = tuple(sorted(set(self.sites) | set(other.sites)))
        out = op(_aligned(self, target), _aligned(other, target))
        return SpinTable(target, np.array(np.broadcast_to(out, (2,) * len(target))))

    def __add__(self, other):
        return self._combine(other, np.add)

    __radd__ = __add__

    def __sub__(self, other):
        return self._combine(other, np.subtract)

    def __mul__(self, other):
        return self._combine(other, np.multiply)

    __rmul__ = __mul__

    def __neg__(self):
        return SpinTable(self.sites, -self.values)

    def map(self, fn) -> "SpinTable":
        return SpinTable(self.sites, fn(self.values))

    def at(self, assignment: Mapping) -> float:
        """Value at a spin assignment (extra sites in ``assignment`` are ignored)."""
        idx = tuple(0 if assignment[x] == 1 else 1 for x in self.sites)
        return float(self.values[idx])

    def coefficients(self) -> np.ndarray:
        return walsh(self.values)

    def coefficient(self, Z) -> float:
        """Fourier coefficient of ``sigma_Z``; zero when ``Z`` leaves the support."""
        Z = set(Z)
        if not Z <= set(self.sites):
            return 0.0
        idx = tuple(1 if x in Z else 0 for x in self.sites)
        return float(self.coefficients()[idx])

    def sup_abs(self) -> float:
        return float(np.max(np.abs(self.values)))
