"""Finite lattice windows, blockings, site sets and the two sup-metrics.

Sites are integer coordinate tuples, 0-based. A site set is a sorted tuple of
distinct sites (lexicographic order); a hypergraph is a sorted tuple of
distinct nonempty site sets. Image-lattice sites are block coordinate tuples.
"""

from __future__ import annotations

import itertools
import math
from typing import Iterable, Sequence

from .errors import ConfigError, DomainError

Site = tuple
SiteSet = tuple
Hypergraph = tuple

EMPTY: SiteSet = ()


def as_site(x) -> Site:
    if isinstance(x, (int,)) or hasattr(x, "__index__"):
        return (int(x),)
    return tuple(int(c) for c in x)


def site_set(sites: Iterable = ()) -> SiteSet:
    """Canonical (sorted, duplicate-free) site set."""
    return tuple(sorted({as_site(x) for x in sites}))


def hypergraph(links: Iterable) -> Hypergraph:
    out = {site_set(X) for X in links}
    if EMPTY in out:
        raise DomainError("hypergraph links must be nonempty")
    return tuple(sorted(out))


def sup_distance(a: Site, b: Site) -> int:
    return max((abs(p - q) for p, q in zip(a, b)), default=0)


def diameter(X: SiteSet) -> int:
    """Largest sup-metric distance between two members of ``X``."""
    if not X:
        raise DomainError("diameter of the empty set is undefined")
    return max(sup_distance(a, b) for a in X for b in X)


class Blocking:
    """A rectangular window partitioned into congruent rectangular blocks.

    Args:
        window: number of sites along each axis.
        block: block extent along each axis; must divide ``window``.
    """

    def __init__(self, window: Sequence[int], block: Sequence[int]):
        window = tuple(int(w) for w in window)
        block = tuple(int(b) for b in block)
        if not window or len(window) != len(block):
            raise ConfigError("window and block extents need the same positive dimension")
        if any(w <= 0 for w in window) or any(b <= 0 for b in block):
            raise ConfigError("extents must be positive")
        if any(w % b for w, b in zip(window, block)):
            raise ConfigError(f"block extents {block} do not divide window {window}")
        self.window = window
        self.block = block
        self.d = len(window)
        self.image_window = tuple(w // b for w, b in zip(window, block))
        self.s = math.prod(block)

        self.sites: tuple = tuple(itertools.product(*(range(w) for w in window)))
        self.blocks: tuple = tuple(itertools.product(*(range(n) for n in self.image_window)))
        self._site_rank = {x: i for i, x in enumerate(self.sites)}
        self._block_rank = {y: i for i, y in enumerate(self.blocks)}
        self._block_of = {x: tuple(c // b for c, b in zip(x, block)) for x in self.sites}
        members: dict = {y: [] for y in self.blocks}
        for x in self.sites:
            members[self._block_of[x]].append(x)
        self._sites_of = {y: tuple(v) for y, v in members.items()}

    def __repr__(self):
        return f"Blocking(window={self.window}, block={self.block})"

    def __eq__(self, other):
        return isinstance(other, Blocking) and (self.window, self.block) == (other.window, other.block)

    def __hash__(self):
        return hash((self.window, self.block))

    @property
    def n_sites(self) -> int:
        return len(self.sites)

    @property
    def n_blocks(self) -> int:
        return len(self.blocks)

    def contains(self, x: Site) -> bool:
        return x in self._site_rank

    def check(self, X: Iterable[Site]) -> None:
        for x in X:
            if x not in self._site_rank:
                raise DomainError(f"site {x} outside window {self.window}")

    def check_image(self, Z: Iterable[Site]) -> None:
        for y in Z:
            if y not in self._block_rank:
                raise DomainError(f"image site {y} outside image window {self.image_window}")

    def site_rank(self, x: Site) -> int:
        return self._site_rank[x]

    def block_rank(self, y: Site) -> int:
        return self._block_rank[y]

    def block_of(self, x: Site) -> Site:
        try:
            return self._block_of[x]
        except KeyError:
            raise DomainError(f"site {x} outside window {self.window}") from None

    def sites_of(self, y: Site) -> tuple:
        try:
            return self._sites_of[y]
        except KeyError:
            raise DomainError(f"image site {y} outside image window {self.image_window}") from None

    def block_position(self, x: Site) -> int:
        """Position of ``x`` inside its own block (lexicographic)."""
        return self._sites_of[self.block_of(x)].index(x)

    def image_mask(self, X: Iterable[Site]) -> int:
        """Bitmask over block ranks of the blocks met by ``X``."""
        m = 0
        for x in X:
            m |= 1 << self._block_rank[self.block_of(x)]
        return m

    def blocks_from_mask(self, mask: int) -> SiteSet:
        return tuple(y for i, y in enumerate(self.blocks) if mask >> i & 1)

    def sites_over(self, blocks: Iterable[Site]) -> tuple:
        """Sites of the given blocks in block-major order."""
        return tuple(x for y in blocks for x in self._sites_of[y])


def image_support(X: Iterable[Site], b: Blocking) -> SiteSet:
    """Blocks (image sites) that intersect ``X``."""
    return tuple(sorted({b.block_of(x) for x in X}))


def block_connected(X1: SiteSet, X2: SiteSet, b: Blocking) -> bool:
    return bool(b.image_mask(X1) & b.image_mask(X2))


def block_components(g: Hypergraph, b: Blocking) -> list:
    """Split a hypergraph into its maximal block-connected classes."""
    links = list(g)
    masks = [b.image_mask(X) for X in links]
    parent = list(range(len(links)))

    def find(i):
        while parent[i] != i:
            parent[i] = parent[parent[i]]
            i = parent[i]
        return i

    for i in range(len(links)):
        for j in range(i + 1, len(links)):
            if masks[i] & masks[j]:
                ri, rj = find(i), find(j)
                if ri != rj:
                    parent[max(ri, rj)] = min(ri, rj)
    groups: dict = {}
    for i, X in enumerate(links):
        groups.setdefault(find(i), []).append(X)
    return [tuple(sorted(v)) for _, v in sorted(groups.items())]


def image_distance(W: SiteSet, Z: SiteSet, b: Blocking) -> int:
    """Sup-metric distance in the image lattice between the blocks of ``W`` and ``Z``."""
    if not W or not Z:
        raise DomainError("image_distance needs nonempty arguments")
    b.check_image(Z)
    return min(sup_distance(w, z) for w in image_support(W, b) for z in Z)
