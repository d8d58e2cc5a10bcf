"""Block-connected hypergraphs over the interaction's supports and their weights.

A hypergraph is a set of distinct links (supports with J(X) != 0). Two links
are adjacent when they meet a common block, i.e. their image bitmasks
intersect. Block-connected hypergraphs are the connected vertex subsets of
this link graph; they are enumerated once each by rooted growth from the
least link (ESU-style extension sets), so no hashing of whole hypergraphs is
needed.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Iterable, Iterator, Mapping

import numpy as np

from .errors import CapExceeded, DomainError
from .exact import kernel_contract
from .interaction import Interaction
from .kernels import Kernel
from .lattice import Blocking, SiteSet, image_support, site_set
from .parallel import pmap
from .tables import SpinTable, spin_axis

N_MAX = 6
Q_CAP = 8
GUARD = 10**7


@dataclass(frozen=True)
class Polymer:
    support: SiteSet
    table: SpinTable = field(repr=False)
    link_counts: tuple = ()

    def weight(self, sigma_prime: Mapping) -> float:
        return self.table.at(sigma_prime)

    def sup_abs(self) -> float:
        return self.table.sup_abs()


@dataclass(frozen=True)
class DecoratedPolymer:
    support: SiteSet  # R, may be empty
    insertion: SiteSet  # W, in the original lattice
    table: SpinTable = field(repr=False)  # over R union W'
    link_counts: tuple = ()


class PolymerSet(list):
    """List of polymers plus enumeration metadata.

    ``saturated`` is true when no hypergraph was cut off by ``n_max`` or
    ``q_cap``, so the weights are the complete sums.
    """

    def __init__(self, polymers=(), n_hypergraphs=0, saturated=True, caps=None):
        super().__init__(polymers)
        self.n_hypergraphs = n_hypergraphs
        self.saturated = saturated
        self.caps = dict(caps or {})

    def by_support(self) -> dict:
        return {p.support: p for p in self}


class LinkGraph:
    """The interaction's supports with their block images and adjacency."""

    def __init__(self, J: Interaction, blocking: Blocking, extra: Iterable[SiteSet] = ()):
        extra = list(extra)
        self.blocking = blocking
        self.links = extra + list(J.keys())
        self.couplings = [None] * len(extra) + [J[X] for X in J.keys()]
        self.masks = [blocking.image_mask(X) for X in self.links]
        n = len(self.links)
        self.adj = [
            [j for j in range(n) if j != i and self.masks[i] & self.masks[j]] for i in range(n)
        ]

    def grow(self, root: int, n_max: int, q_cap: int, stats: dict) -> Iterator[tuple]:
        return grow_connected(self.adj, self.masks, root, n_max, q_cap, stats)


def grow_connected(adj, masks, root: int, n_max: int, q_cap: int, stats: dict) -> Iterator[tuple]:
    """Connected vertex sets whose least element is ``root``, each exactly once.

    ``adj[i]`` lists the neighbours of ``i`` in increasing order and
    ``masks[i]`` is its image bitmask. Yields ``(vertex indices, union mask)``
    for sets of at most ``n_max`` vertices whose union has at most ``q_cap``
    image sites. ``stats['cut']`` is set when a cap prevented an extension.
    """
    if bin(masks[root]).count("1") > q_cap:
        stats["cut"] = True
        return

    def extend(sub, mask, closed, ext):
        yield sub, mask
        if not ext:
            return
        if len(sub) >= n_max:
            stats["cut"] = True
            return
        ext = list(ext)
        while ext:
            w = ext.pop(0)
            new_mask = mask | masks[w]
            if bin(new_mask).count("1") > q_cap:
                stats["cut"] = True
                continue
            new_ext = ext + [u for u in adj[w] if u > root and u not in closed]
            yield from extend(sub + (w,), new_mask, closed | set(adj[w]), new_ext)

    closed = {root} | set(adj[root])
    yield from extend((root,), masks[root], closed, [u for u in adj[root] if u > root])


class _LocalBlocks:
    """Spin tensor over the sites of a few blocks, in block-major order."""

    def __init__(self, blocking: Blocking, blocks: SiteSet):
        self.blocks = blocks
        self.order = blocking.sites_over(blocks)
        self.pos = {x: i for i, x in enumerate(self.order)}
        self.m = len(self.order)
        self._factors: dict = {}

    def spin_product(self, X) -> np.ndarray:
        out = np.ones((1,) * self.m)
        for x in X:
            out = out * spin_axis(self.m, self.pos[x])
        return out

    def link_factor(self, X, J: float) -> np.ndarray:
        """exp(J sigma_X) - 1, broadcastable."""
        key = (X, J)
        if key not in self._factors:
            self._factors[key] = np.expm1(J * self.spin_product(X))
        return self._factors[key]

    def average(self, arr: np.ndarray, kernel: Kernel) -> SpinTable:
        full = np.broadcast_to(arr, (2,) * self.m) * 2.0**-self.m
        return SpinTable(self.blocks, kernel_contract(full, kernel.table, len(self.blocks)))


def _product(local: _LocalBlocks, links, couplings) -> np.ndarray:
    out = np.ones((1,) * local.m)
    for X, v in zip(links, couplings):
        out = out * local.link_factor(X, v)
    return out


def alpha(N, gamma, sigma_prime, J: Mapping, kernel: Kernel, blocking: Blocking):
    """Contribution of one block-connected hypergraph to the polymer weight on ``N``.

    Returns the value at ``sigma_prime`` (a mapping over the blocks of ``N``),
    or the whole :class:`SpinTable` when ``sigma_prime`` is None.
    """
    N = site_set(N)
    gamma = [site_set(X) for X in gamma]
    if not gamma:
        raise DomainError("alpha needs a nonempty hypergraph")
    if image_support([x for X in gamma for x in X], blocking) != N:
        raise DomainError(f"hypergraph image support differs from N={N}")
    masks = [blocking.image_mask(X) for X in gamma]
    reach, frontier = masks[0], True
    while frontier:
        frontier = False
        for m in masks:
            if m & reach and m | reach != reach:
                reach |= m
                frontier = True
    if any(not (m & reach) for m in masks):
        raise DomainError("hypergraph is not block-connected")
    local = _LocalBlocks(blocking, N)
    table = local.average(_product(local, gamma, [J.get(X, 0.0) for X in gamma]), kernel)
    return table if sigma_prime is None else table.at(sigma_prime)


def _histogram(counts: dict) -> tuple:
    return tuple(sorted(counts.items()))


def _root_polymers(graph: LinkGraph, root: int, kernel, n_max, q_cap, guard):
    blocking = graph.blocking
    stats = {"cut": False, "count": 0}
    acc: dict = {}
    hist: dict = {}
    locals_: dict = {}
    for sub, mask in graph.grow(root, n_max, q_cap, stats):
        stats["count"] += 1
        if stats["count"] > guard:
            raise CapExceeded(f"hypergraph guard exceeded: more than {guard} hypergraphs")
        if mask not in locals_:
            locals_[mask] = _LocalBlocks(blocking, blocking.blocks_from_mask(mask))
        local = locals_[mask]
        prod = _product(local, [graph.links[i] for i in sub], [graph.couplings[i] for i in sub])
        acc[mask] = acc[mask] + prod if mask in acc else np.broadcast_to(prod, (2,) * local.m).copy()
        h = hist.setdefault(mask, {})
        h[len(sub)] = h.get(len(sub), 0) + 1
    tables = {mask: locals_[mask].average(arr, kernel) for mask, arr in acc.items()}
    return tables, hist, stats


def enumerate_polymers(
    J: Interaction,
    kernel: Kernel,
    blocking: Blocking,
    n_max: int = N_MAX,
    q_cap: int = Q_CAP,
    guard: int = GUARD,
    threads: int | None = None,
) -> PolymerSet:
    """Polymer weights w_N for every image support reachable within the caps.

    Work is split by root link; per-root tables are merged by addition in
    root order, so the result does not depend on the worker count.
    """
    if n_max < 1 or q_cap < 1 or guard < 1:
        raise DomainError("caps must be positive")
    graph = LinkGraph(J, blocking)
    results = pmap(
        lambda r: _root_polymers(graph, r, kernel, n_max, q_cap, guard), range(len(graph.links)), threads
    )
    tables: dict = {}
    hist: dict = {}
    total, saturated = 0, True
    for root_tables, root_hist, stats in results:
        total += stats["count"]
        saturated &= not stats["cut"]
        for mask, tab in root_tables.items():
            tables[mask] = tables[mask] + tab if mask in tables else tab
            h = hist.setdefault(mask, {})
            for k, v in root_hist[mask].items():
                h[k] = h.get(k, 0) + v
    if total > guard:
        raise CapExceeded(f"hypergraph guard exceeded: {total} hypergraphs > {guard}")
    polys = [
        Polymer(blocking.blocks_from_mask(mask), tab, _histogram(hist[mask])) for mask, tab in tables.items()
    ]
    polys.sort(key=lambda p: (len(p.support), p.support))
    caps = {"n_max": n_max, "q_cap": q_cap, "guard": guard}
    return PolymerSet(polys, n_hypergraphs=total, saturated=saturated, caps=caps)


def decorated_weights(
    J: Interaction,
    kernel: Kernel,
    blocking: Blocking,
    W,
    n_max: int = N_MAX,
    q_cap: int = Q_CAP,
    guard: int = GUARD,
) -> PolymerSet:
    """Weights of hypergraphs block-connected to the insertion ``sigma_W``.

    The entry for support ``R`` sums, over link sets with image ``R`` that
    form one block-connected family together with ``W``, the average of
    ``sigma_W`` times the kernels on ``R`` and ``W'`` times the link factors.
    ``R`` is empty for the bare insertion.
    """
    W = site_set(W)
    if not W:
        raise DomainError("insertion set W must be nonempty")
    blocking.check(W)
    graph = LinkGraph(J, blocking, extra=[W])
    w_mask = graph.masks[0]
    stats = {"cut": False}
    acc: dict = {}
    hist: dict = {}
    locals_: dict = {}
    count = 0
    for sub, _ in graph.grow(0, n_max + 1, q_cap + bin(w_mask).count("1"), stats):
        links = sub[1:]
        r_mask = 0
        for i in links:
            r_mask |= graph.masks[i]
        if bin(r_mask).count("1") > q_cap:
            stats["cut"] = True
            continue
        count += 1
        if count > guard:
            raise CapExceeded(f"hypergraph guard exceeded: more than {guard} decorated hypergraphs")
        mask = r_mask | w_mask
        if mask not in locals_:
            locals_[mask] = _LocalBlocks(blocking, blocking.blocks_from_mask(mask))
        local = locals_[mask]
        prod = local.spin_product(W) * _product(
            local, [graph.links[i] for i in links], [graph.couplings[i] for i in links]
        )
        acc[r_mask] = acc[r_mask] + prod if r_mask in acc else np.broadcast_to(prod, (2,) * local.m).copy()
        h = hist.setdefault(r_mask, {})
        h[len(links)] = h.get(len(links), 0) + 1
    out = []
    for r_mask, arr in acc.items():
        local = locals_[r_mask | w_mask]
        out.append(
            DecoratedPolymer(
                blocking.blocks_from_mask(r_mask), W, local.average(arr, kernel), _histogram(hist[r_mask])
            )
        )
    out.sort(key=lambda p: (len(p.support), p.support))
    caps = {"n_max": n_max, "q_cap": q_cap, "guard": guard}
    return PolymerSet(out, n_hypergraphs=count, saturated=not stats["cut"], caps=caps)


def rooted_contributions(
    J: Interaction, blocking: Blocking, M: float, n_max: int = N_MAX, q_cap: int | None = None
) -> dict:
    """a_n(y): sum over block-connected hypergraphs with n links meeting block y
    of prod_X 2|J(X)| M^|X|. Returned as ``{n: {y: value}}`` for n <= n_max."""
    graph = LinkGraph(J, blocking)
    q_cap = blocking.n_blocks if q_cap is None else q_cap
    link_w = [2 * abs(v) * M ** len(X) for X, v in zip(graph.links, graph.couplings)]
    table = {n: {y: 0.0 for y in blocking.blocks} for n in range(1, n_max + 1)}
    for root in range(len(graph.links)):
        for sub, mask in graph.grow(root, n_max, q_cap, {}):
            val = math.prod(link_w[i] for i in sub)
            row = table[len(sub)]
            for y in blocking.blocks_from_mask(mask):
                row[y] += val
    return table


def rooted_contribution(J, blocking, y, n, M, n_max: int | None = None) -> float:
    if n < 1:
        raise DomainError("n must be at least 1")
    return rooted_contributions(J, blocking, M, n_max=max(n, n_max or n))[n][tuple(y)]


def polymer_partition(polymers: Iterable[Polymer], blocking: Blocking, avoid: Iterable = ()) -> SpinTable:
    """sum over collections of pairwise disjoint supports (avoiding ``avoid``) of prod w_N.

    Exact polymer-gas sum, evaluated for every block-spin configuration.
    """
    blocks = blocking.blocks
    nb = len(blocks)
    if nb > 16:
        raise CapExceeded(f"polymer-gas sum over {nb} image sites exceeds the cap of 16")
    avoid_mask = 0
    for y in avoid:
        avoid_mask |= 1 << blocking.block_rank(tuple(y))
    by_low: dict = {}
    for p in polymers:
        mask = 0
        for y in p.support:
            mask |= 1 << blocking.block_rank(y)
        if mask & avoid_mask:
            continue
        low = mask & -mask
        by_low.setdefault(low, []).append((mask, p.table.lift(blocks).values))
    memo = {0: np.ones((2,) * nb)}

    def z(avail):
        if avail in memo:
            return memo[avail]
        low = avail & -avail
        total = z(avail & ~low)
        for mask, vals in by_low.get(low, ()):
            if mask & avail == mask:
                total = total + vals * z(avail & ~mask)
        memo[avail] = total
        return total

    full = ((1 << nb) - 1) & ~avoid_mask
    return SpinTable(blocks, np.broadcast_to(z(full), (2,) * nb).copy())


def link_smallness(J: Mapping) -> float:
    """max over links of |exp(|J(X)|) - 1| - 2|J(X)| (nonpositive when |J(X)| <= 1/2)."""
    return max((math.expm1(abs(v)) - 2 * abs(v) for v in J.values()), default=-math.inf)
