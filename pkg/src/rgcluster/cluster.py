"""Cluster expansion of the polymer gas: Ursell coefficients, log W, J',
avoidance ratios, the expansion-side Jacobian and the Kotecky-Preiss check.

Cluster sums run over tuples (N_1, ..., N_p) with weight 1/p!. Tuples that
are permutations of one another carry the same Ursell coefficient and the
same product of weights, so they are summed as one multiset term with
factor 1/prod(m_i!) (the number of distinct orderings divided by p!). The
ordered-tuple sum is kept as ``log_W_expansion(..., ordered=True)`` for
cross-checking.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field
from functools import lru_cache
from typing import Iterable, Mapping, Sequence

import numpy as np

from .errors import DomainError
from .exact import RenormalizedInteraction
from .lattice import Blocking, SiteSet, site_set
from .parallel import pmap
from .polymers import DecoratedPolymer, Polymer, grow_connected
from .tables import SpinTable

P_MAX = 6


def _overlap_adjacency(supports: Sequence) -> tuple:
    sets = [set(N) for N in supports]
    adj = []
    for i, a in enumerate(sets):
        m = 0
        for j, b in enumerate(sets):
            if i != j and a & b:
                m |= 1 << j
        adj.append(m)
    return tuple(adj)


@lru_cache(maxsize=None)
def ursell_from_adjacency(adj: tuple) -> int:
    """Signed count of connected spanning subgraphs of the overlap graph.

    Uses c(S) = g(S) - sum_{T: min S in T, T proper subset of S} c(T) g(S \\ T),
    where g(S) = 1 if S spans no edge and 0 otherwise (the signed count of all
    spanning subgraphs).
    """
    p = len(adj)
    if p == 0:
        return 0
    full = (1 << p) - 1

    def independent(S):
        return all(not (adj[i] & S) for i in range(p) if S >> i & 1)

    c = {}
    for S in sorted(range(1, full + 1), key=lambda m: bin(m).count("1")):
        low = S & -S
        total = 1 if independent(S) else 0
        rest = S & ~low
        T_rest = rest
        while True:
            T = T_rest | low
            if T != S and independent(S & ~T):
                total -= c[T]
            if T_rest == 0:
                break
            T_rest = (T_rest - 1) & rest
        c[S] = total
    return c[full]


def ursell_by_enumeration(adj: tuple) -> int:
    """Same quantity by summing (-1)^|E| over every connected edge subset."""
    p = len(adj)
    edges = [(i, j) for i in range(p) for j in range(i + 1, p) if adj[i] >> j & 1]
    total = 0
    for k in range(len(edges) + 1):
        for chosen in itertools.combinations(edges, k):
            parent = list(range(p))

            def find(i):
                while parent[i] != i:
                    i = parent[i]
                return i

            for i, j in chosen:
                parent[find(i)] = find(j)
            if len({find(i) for i in range(p)}) == 1:
                total += (-1) ** k
    return total


def ursell(*supports, p_max: int = P_MAX) -> int:
    """C(N_1, ..., N_p) for image supports; zero when the overlap graph is disconnected."""
    p = len(supports)
    if p < 1:
        raise DomainError("need at least one support")
    if p > p_max:
        raise DomainError(f"p={p} exceeds p_max={p_max}")
    return ursell_from_adjacency(_overlap_adjacency([site_set(N) for N in supports]))


@dataclass(frozen=True)
class ClusterTerm:
    supports: tuple  # N_1 <= ... <= N_p, repeated per multiplicity
    counts: tuple
    ursell: int
    union: SiteSet
    coefficient: float  # ursell / prod(m_i!)
    table: SpinTable = field(repr=False)  # coefficient * prod w_N over the union
    abs_weight: float = 0.0  # |coefficient| * prod sup|w_N|

    @property
    def p(self) -> int:
        return len(self.supports)


def _compositions(k: int, extra: int):
    """Multiplicity vectors (m_1..m_k), m_i >= 1, sum m_i <= k + extra."""
    for total in range(k, k + extra + 1):
        for cuts in itertools.combinations(range(1, total), k - 1):
            bounds = (0,) + cuts + (total,)
            yield tuple(bounds[i + 1] - bounds[i] for i in range(k))


def _root_clusters(polys, masks, adj, root, p_max):
    out = []
    for sub, mask in grow_connected(adj, masks, root, p_max, 1 << 30, {}):
        k = len(sub)
        members = [polys[i] for i in sub]
        union = tuple(sorted(set().union(*(p.support for p in members))))
        for counts in _compositions(k, p_max - k):
            expanded = [p.support for p, m in zip(members, counts) for _ in range(m)]
            C = ursell_from_adjacency(_overlap_adjacency(expanded))
            if C == 0:
                continue
            coef = C / math.prod(math.factorial(m) for m in counts)
            table = SpinTable.constant(coef)
            absw = abs(coef)
            for p, m in zip(members, counts):
                for _ in range(m):
                    table = table * p.table
                absw *= p.sup_abs() ** m
            order = sorted(zip((p.support for p in members), counts))
            out.append(
                ClusterTerm(
                    supports=tuple(N for N, m in order for _ in range(m)),
                    counts=tuple(m for _, m in order),
                    ursell=C,
                    union=union,
                    coefficient=coef,
                    table=table.lift(union),
                    abs_weight=absw,
                )
            )
    return out


def enumerate_clusters(polymers: Sequence[Polymer], p_max: int = P_MAX, q: int | None = None, threads=None):
    """All cluster terms with at most ``p_max`` polymers, each of support size <= ``q``."""
    if p_max < 1:
        raise DomainError("p_max must be at least 1")
    polys = [p for p in polymers if q is None or len(p.support) <= q]
    sets = [set(p.support) for p in polys]
    masks = []
    index = {}
    for p in polys:
        m = 0
        for y in p.support:
            m |= 1 << index.setdefault(y, len(index))
        masks.append(m)
    adj = [[j for j in range(len(polys)) if j != i and sets[i] & sets[j]] for i in range(len(polys))]
    parts = pmap(lambda r: _root_clusters(polys, masks, adj, r, p_max), range(len(polys)), threads)
    return [t for part in parts for t in part]


def _touches(U, Y) -> bool:
    return not set(U).isdisjoint(Y)


class ClusterExpansion:
    """Truncated cluster expansion of log W for a fixed polymer list.

    Cluster terms are aggregated per combined support U into one table, so the
    free energy is a sum of local functions.
    """

    def __init__(self, polymers: Sequence[Polymer], p_max: int = P_MAX, q: int | None = None, threads=None):
        self.p_max = p_max
        self.q = q
        self.terms = enumerate_clusters(polymers, p_max, q, threads)
        self.by_union: dict = {}
        for t in self.terms:
            U = t.union
            self.by_union[U] = self.by_union[U] + t.table if U in self.by_union else t.table

    def counts_by_order(self) -> dict:
        out: dict = {}
        for t in self.terms:
            out[t.p] = out.get(t.p, 0) + 1
        return dict(sorted(out.items()))

    def log_W(self, sites: Iterable = ()) -> SpinTable:
        total = SpinTable.constant(0.0).lift(tuple(sites))
        for tab in self.by_union.values():
            total = total + tab
        return total

    def log_W_at(self, sigma_prime: Mapping) -> float:
        return sum(tab.at(sigma_prime) for tab in self.by_union.values())

    def couplings(self) -> RenormalizedInteraction:
        """J'(Z) from local Fourier transforms; Z only receives terms whose union contains it."""
        acc: dict = {}
        for U, tab in self.by_union.items():
            coeffs = tab.coefficients()
            for idx in np.ndindex(*coeffs.shape):
                Z = tuple(y for y, i in zip(U, idx) if i)
                acc[Z] = acc.get(Z, 0.0) + float(coeffs[idx])
        return RenormalizedInteraction(acc)

    def exponent(self, Y) -> SpinTable:
        """Sum of cluster terms whose combined support meets ``Y``."""
        Y = set(Y)
        total = SpinTable.constant(0.0)
        for U, tab in self.by_union.items():
            if _touches(U, Y):
                total = total + tab
        return total

    def avoidance(self, Y) -> SpinTable:
        """Ratio of the polymer sum avoiding ``Y`` to the full sum, exp(-exponent)."""
        return self.exponent(Y).map(lambda v: np.exp(-v)).lift(tuple(sorted(set(Y))))

    def abs_exponent(self, Y, P: float | None = None) -> float:
        """sum |C| prod |w| over clusters touching Y (with |union| > P when given)."""
        Y = set(Y)
        return sum(
            t.abs_weight for t in self.terms if _touches(t.union, Y) and (P is None or len(t.union) > P)
        )

    def jacobian_table(self, decorated: Sequence[DecoratedPolymer], blocking: Blocking, split: float | None = None):
        """sum_R w~_R * avoidance(R u W') as a table; optionally split at |R| > split."""
        small = SpinTable.constant(0.0)
        large = SpinTable.constant(0.0)
        for d in decorated:
            W_img = tuple(sorted({blocking.block_of(x) for x in d.insertion}))
            Y = tuple(sorted(set(d.support) | set(W_img)))
            term = d.table * self.avoidance(Y)
            if split is not None and len(d.support) > split:
                large = large + term
            else:
                small = small + term
        return small, large


def log_W_expansion(polymers: Sequence[Polymer], sigma_prime: Mapping, p_max: int = P_MAX, ordered: bool = False) -> float:
    """Truncated cluster expansion of log W at one block-spin assignment."""
    if not ordered:
        return ClusterExpansion(polymers, p_max).log_W_at(sigma_prime)
    w = [p.weight(sigma_prime) for p in polymers]
    sup = [p.support for p in polymers]
    total = 0.0
    for p in range(1, p_max + 1):
        acc = 0.0
        for tup in itertools.product(range(len(polymers)), repeat=p):
            C = ursell_from_adjacency(_overlap_adjacency([sup[i] for i in tup]))
            if C:
                acc += C * math.prod(w[i] for i in tup)
        total += acc / math.factorial(p)
    return total


def expansion_couplings(polymers: Sequence[Polymer], blocking: Blocking | None = None, p_max: int = P_MAX):
    return ClusterExpansion(polymers, p_max).couplings()


def avoidance_ratio(polymers: Sequence[Polymer], Y, p_max: int = P_MAX) -> SpinTable:
    return ClusterExpansion(polymers, p_max).avoidance(Y)


def truncated_F(polymers: Sequence[Polymer], Y, Q: int, Kc: int) -> SpinTable:
    """Avoidance ratio using only polymers with |N| <= Q and clusters of length <= Kc."""
    if Q < 1 or Kc < 1:
        raise DomainError("Q and Kc must be at least 1")
    return ClusterExpansion(polymers, p_max=Kc, q=Q).avoidance(Y)


@dataclass
class JacobianEstimate:
    value: float
    bound: float | None
    case_large: float  # |R| > |W| P
    case_small: float  # |R| <= |W| P


def jacobian_bound(M: float, w_size: int) -> float:
    """Global bound M^|W| (1 + log M)^|W| on any derivative."""
    return M**w_size * (1 + math.log(M)) ** w_size


def expansion_jacobian(
    J,
    kernel,
    blocking: Blocking,
    Z,
    W,
    n_max: int = 6,
    q_cap: int = 8,
    p_max: int = P_MAX,
    M: float | None = None,
    P: float | None = None,
    guard: int = 10**7,
) -> JacobianEstimate:
    """dJ'(Z)/dJ(W) from decorated weights times cluster-expanded avoidance ratios."""
    from .polymers import decorated_weights, enumerate_polymers

    W = site_set(W)
    polys = enumerate_polymers(J, kernel, blocking, n_max=n_max, q_cap=q_cap, guard=guard)
    dec = decorated_weights(J, kernel, blocking, W, n_max=n_max, q_cap=q_cap, guard=guard)
    ce = ClusterExpansion(polys, p_max)
    split = None if P is None else len(W) * P
    small, large = ce.jacobian_table(dec, blocking, split)
    a, b = small.coefficient(Z), large.coefficient(Z)
    bound = None if M is None else jacobian_bound(M, len(W))
    return JacobianEstimate(a + b, bound, case_large=b, case_small=a)


@dataclass
class KPReport:
    M: float
    log_M: float
    per_site: dict  # y -> S(y)
    passed: bool

    @property
    def worst(self) -> float:
        return max(self.per_site.values(), default=0.0)


def kp_check(polymers: Sequence[Polymer], M: float, blocking: Blocking) -> KPReport:
    """Per-site sufficient condition sum_{N containing y} sup|w_N| M^|N| <= log M."""
    if not M > 1:
        raise DomainError(f"M must exceed 1, got {M}")
    S = {y: 0.0 for y in blocking.blocks}
    for p in polymers:
        v = p.sup_abs() * M ** len(p.support)
        for y in p.support:
            S[y] += v
    log_M = math.log(M)
    return KPReport(M, log_M, S, all(v <= log_M for v in S.values()))


def kp_check_general(polymers: Sequence[Polymer], M: float, supports: Iterable) -> dict:
    """Overlap form: sum_{N' meeting N} sup|w_N'| M^|N'| versus |N| log M, per given N."""
    out = {}
    for N in supports:
        N = site_set(N)
        lhs = sum(p.sup_abs() * M ** len(p.support) for p in polymers if _touches(p.support, N))
        out[N] = (lhs, len(N) * math.log(M))
    return out
