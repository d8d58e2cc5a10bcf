"""Sparse interactions J(X), the weighted sup-norm, and coupling generators."""

from __future__ import annotations

import itertools
import math
from collections.abc import Mapping
from typing import Iterable, Sequence

from .errors import ConfigError, DomainError
from .lattice import Blocking, SiteSet, diameter, site_set

DROP_BELOW = 1e-15


class Interaction(Mapping):
    """Immutable map from nonempty site sets to nonzero real couplings.

    Entries with ``|J(X)| < 1e-15`` are dropped; repeated keys are summed.
    When ``blocking`` is given every support must lie inside its window.
    """

    def __init__(self, couplings=(), blocking: Blocking | None = None):
        items = couplings.items() if isinstance(couplings, Mapping) else couplings
        acc: dict = {}
        for X, v in items:
            key = site_set(X)
            if not key:
                raise DomainError("J(empty set) is not an interaction entry")
            if blocking is not None:
                blocking.check(key)
            acc[key] = acc.get(key, 0.0) + float(v)
        self._data = {X: v for X, v in sorted(acc.items()) if abs(v) >= DROP_BELOW}

    def __getitem__(self, X):
        return self._data[X]

    def __iter__(self):
        return iter(self._data)

    def __len__(self):
        return len(self._data)

    def __repr__(self):
        return f"{type(self).__name__}({self._data!r})"

    def get(self, X, default=0.0):
        return self._data.get(site_set(X), default)

    @property
    def range(self) -> int:
        """Largest diameter of a stored support (0 when empty)."""
        return max((diameter(X) for X in self._data), default=0)

    @property
    def body(self) -> int:
        """Largest support cardinality (0 when empty)."""
        return max((len(X) for X in self._data), default=0)

    @property
    def sup_norm(self) -> float:
        return max((abs(v) for v in self._data.values()), default=0.0)

    def supports(self) -> tuple:
        return tuple(self._data)

    def with_coupling(self, X, delta: float):
        """Copy with ``delta`` added to the coupling on ``X``."""
        return type(self)(itertools.chain(self._data.items(), [(X, delta)]))

    def scaled(self, a: float):
        return type(self)((X, a * v) for X, v in self._data.items())

    def __add__(self, other):
        return type(self)(itertools.chain(self._data.items(), other.items()))


class Direction(Interaction):
    """A perturbation of the interaction fed to the linearized RG map."""


def norm_r(J: Mapping, r: float) -> float:
    """sup over sites x of sum_{X containing x} |J(X)| exp(r |X|)."""
    if not r > 0:
        raise DomainError(f"r must be positive, got {r}")
    per_site: dict = {}
    for X, v in J.items():
        term = abs(v) * math.exp(r * len(X))
        for x in X:
            per_site[x] = per_site.get(x, 0.0) + term
    return max(per_site.values(), default=0.0)


def spin_product(sigma: Mapping, X: Iterable) -> int:
    p = 1
    for x in X:
        p *= sigma[x]
    return p


def exponent(J: Mapping, sigma: Mapping) -> float:
    """sum_X J(X) sigma_X, i.e. minus the Hamiltonian."""
    return sum(v * spin_product(sigma, X) for X, v in J.items())


def _translates(shape: SiteSet, b: Blocking, periodic: bool):
    d = b.d
    if any(len(o) != d for o in shape):
        raise ConfigError(f"generator {shape} does not match dimension {d}")
    lo = [min(o[k] for o in shape) for k in range(d)]
    hi = [max(o[k] for o in shape) for k in range(d)]
    if periodic:
        ranges = [range(L) for L in b.window]
    else:
        ranges = [range(-lo[k], b.window[k] - hi[k]) for k in range(d)]
    for t in itertools.product(*ranges):
        placed = [tuple(o[k] + t[k] for k in range(d)) for o in shape]
        if periodic:
            placed = [tuple(c % L for c, L in zip(x, b.window)) for x in placed]
        yield site_set(placed)


def generate_translation_invariant(
    shapes: Sequence,
    values: Sequence[float],
    b: Blocking,
    range_cap: int | None = None,
    periodic: bool = False,
) -> Interaction:
    """Place each generator shape at every translate inside the window.

    Free boundary keeps only translates fully inside the window; ``periodic``
    wraps coordinates (this affects coupling generation only).
    """
    if len(shapes) != len(values):
        raise ConfigError("one coupling value per generator shape is required")
    entries = []
    for shape, value in zip(shapes, values):
        shape = site_set(shape)
        if not shape:
            raise ConfigError("empty generator shape")
        if range_cap is not None and diameter(shape) > range_cap:
            raise ConfigError(f"generator {shape} has diameter {diameter(shape)} > range cap {range_cap}")
        for X in _translates(shape, b, periodic):
            if len(X) == len(shape):
                entries.append((X, value))
    return Interaction(entries, blocking=b)


def generated_supports(shapes: Sequence, b: Blocking, periodic: bool = False) -> tuple:
    """Distinct supports produced by placing every shape in the window."""
    out = set()
    for shape in shapes:
        shape = site_set(shape)
        for X in _translates(shape, b, periodic):
            if len(X) == len(shape):
                out.add(X)
    return tuple(sorted(out))


def finite_body_constant(S: int, d: int) -> int:
    """Largest cardinality of a sup-metric set of diameter at most ``S``."""
    if S < 0:
        raise DomainError("range must be nonnegative")
    return (int(S) + 1) ** int(d)
