"""Closed-form bounds: high-temperature threshold, the a_n recursion and its
generating function, tail masses eps(P), the band bound, sub-exponential
profiles, support counts and the linearization majorant."""

from __future__ import annotations

import math
from dataclasses import asdict, dataclass, field
from typing import Iterable, Sequence

import numpy as np
from scipy import optimize, special

from .errors import DomainError
from .interaction import generated_supports
from .lattice import Blocking, image_distance, site_set


@dataclass(frozen=True)
class BoundsContext:
    """Parameters shared by every bound.

    Args:
        r: exponent of the interaction norm.
        M: cluster weight base, ``1 < M < e**r``.
        s: block cardinality.
        norm: the interaction norm ``||J||_r``.
        D: body bound (largest support size).
        S: interaction range.
    """

    r: float
    M: float
    s: int
    norm: float
    D: int = 1
    S: int = 1

    def __post_init__(self):
        if not self.r > 0:
            raise DomainError(f"r must be positive, got {self.r}")
        if not 1 < self.M < math.exp(self.r):
            raise DomainError(f"M={self.M} must lie in (1, e^r) = (1, {math.exp(self.r):.6g})")
        if self.s < 1 or self.norm < 0 or self.D < 1 or self.S < 0:
            raise DomainError("need s >= 1, norm >= 0, D >= 1, S >= 0")

    @property
    def eps(self) -> float:
        return self.M * math.exp(-self.r)

    @property
    def c(self) -> float:
        return 1 / math.sqrt(self.eps) - 1

    @property
    def log_M(self) -> float:
        return math.log(self.M)

    @property
    def rho(self) -> float:
        return 2 * self.s * self.norm / self.c**2


def threshold(ctx: BoundsContext) -> float:
    """Largest norm for which the per-site polymer condition is guaranteed."""
    c, L = ctx.c, ctx.log_M
    return L * c**2 / (2 * ctx.s * (c + L))


def passes_threshold(ctx: BoundsContext) -> bool:
    return ctx.norm <= threshold(ctx)


def binomial_eps_sums(eps: float, k_max: int, rel_tol: float = 1e-17) -> list:
    """g_k = sum_{m >= max(k,1)} C(m,k) eps^m for k <= k_max, summed until negligible."""
    out = []
    for k in range(k_max + 1):
        m = max(k, 1)
        term = math.comb(m, k) * eps**m
        total = 0.0
        while True:
            total += term
            nxt = term * (m + 1) / (m + 1 - k) * eps
            m += 1
            # terms decrease geometrically once m > k / (1 - eps)
            if nxt < rel_tol * total and m > k / (1 - eps):
                break
            term = nxt
        out.append(total)
    return out


def a_bar_table(ctx: BoundsContext, n_max: int) -> list:
    """Recursion values [a_1, ..., a_{n_max}] with equality in the rooted-hypergraph bound."""
    if n_max < 1:
        return []
    g = binomial_eps_sums(ctx.eps, n_max)
    pref = 2 * ctx.s * ctx.norm
    a = np.zeros(n_max + 1)  # a[0] = 0: generating function has no constant term
    for n in range(1, n_max + 1):
        deg = n - 1
        power = np.zeros(deg + 1)
        power[0] = 1.0
        total = g[0] * power[deg]
        for k in range(1, deg + 1):
            power = np.convolve(power, a[: deg + 1])[: deg + 1]
            total += g[k] * power[deg]
        a[n] = pref * total
    return a[1:].tolist()


@dataclass
class ABar:
    n: int
    recursion: float
    closed: float
    closed_valid: bool


def a_bar(ctx: BoundsContext, n: int) -> ABar:
    if n < 1:
        raise DomainError("n must be at least 1")
    rec = a_bar_table(ctx, n)[-1]
    return ABar(n, rec, ctx.c * ctx.rho**n, ctx.rho < 1)


@dataclass
class GeneratingCheck:
    z: float
    w: float
    residual: float
    in_domain: bool
    partial_sums: list = field(default_factory=list)
    partial_ok: bool = True


def _z1_of_w(ctx: BoundsContext, w: float) -> float:
    e = ctx.eps
    return w * (1 - e * (1 + w)) / (e * (1 + w))


def generating_check(ctx: BoundsContext, z: float, n_max: int = 40, xtol: float = 1e-13) -> GeneratingCheck:
    """Solve the generating-function identity for w on [0, c] by bisection."""
    if z < 0:
        raise DomainError("z must be nonnegative")
    pref = 2 * ctx.s * ctx.norm
    z1 = pref * z
    c = ctx.c
    if z1 > c**2 * (1 + 1e-12):
        return GeneratingCheck(z, math.nan, math.nan, False)
    if z1 == 0:
        w = 0.0
    elif z1 >= _z1_of_w(ctx, c):
        w = c
    else:
        w = optimize.bisect(lambda v: _z1_of_w(ctx, v) - z1, 0.0, c, xtol=xtol, rtol=4 * np.finfo(float).eps)
    e = ctx.eps
    residual = abs(w - pref * z * e * (1 + w) / (1 - e * (1 + w)))
    partial, acc = [], 0.0
    for n, a in enumerate(a_bar_table(ctx, n_max), 1):
        # a_n z^n <= w <= c, but z^n alone can overflow for tiny norms
        acc += math.exp(math.log(a) + n * math.log(z)) if a > 0 and z > 0 else 0.0
        partial.append(acc)
    ok = all(p <= w * (1 + 1e-9) + 1e-15 for p in partial)
    return GeneratingCheck(z, w, residual, True, partial, ok)


def eps_tail(ctx: BoundsContext, P: float) -> float:
    """Mass bound for rooted polymers with more than P image sites."""
    if P < 0:
        raise DomainError("P must be nonnegative")
    rho = ctx.rho
    if not rho < 1:
        raise DomainError(f"rho={rho:.6g} >= 1: tail bound invalid")
    return ctx.c * rho ** (P / ctx.D) / (1 - rho)


@dataclass
class BandBound:
    value: float
    activation_distance: float
    log_value: float


def log_eps_tail(ctx: BoundsContext, P: float) -> float:
    """log eps(P), finite even where eps(P) underflows."""
    eps_tail(ctx, 0.0)  # domain checks
    if P < 0:
        raise DomainError("P must be nonnegative")
    return math.log(ctx.c) + (P / ctx.D) * math.log(ctx.rho) - math.log1p(-ctx.rho) if ctx.rho > 0 else -math.inf


def band_bound(ctx: BoundsContext, w_size: int, P: float, Q: float, Kc: float) -> BandBound:
    """Derivative bound valid once l(W, Z) > S (|W| P + Q Kc).

    Evaluated in log space: the factor M^((1+P)D) overflows long before the
    tail masses eps(Q), eps(Kc) underflow.
    """
    if min(w_size, P, Q, Kc) <= 0:
        raise DomainError("band_bound arguments must be positive")
    M, D, L = ctx.M, ctx.D, ctx.log_M
    log_pre = D * (math.log(M) + math.log1p(L))
    t1 = log_eps_tail(ctx, P) - math.log(L)
    t2 = (
        np.logaddexp(log_eps_tail(ctx, Q), log_eps_tail(ctx, Kc))
        + math.log1p(P)
        + math.log(D)
        + (1 + P) * D * math.log(M)
    )
    log_value = float(log_pre + np.logaddexp(t1, t2))
    value = math.exp(log_value) if log_value < 709 else math.inf
    return BandBound(value, ctx.S * (w_size * P + Q * Kc), log_value)


@dataclass
class SubexpProfile:
    alpha: float
    beta: float
    alpha_prime: float
    rows: list  # (l, P, Q, log bound)
    knee: float | None  # first l after which the bound never increases
    scaled_knee: float | None  # same for bound * exp(l^alpha')
    log_fitted_C: float

    @property
    def eventually_dominated(self) -> bool:
        """bound(l) exp(l^alpha') stops increasing inside the grid."""
        return self.scaled_knee is not None and self.scaled_knee < self.rows[-1][0]


def _knee(rows, values):
    for i in range(len(values)):
        if all(values[j + 1] <= values[j] for j in range(i, len(values) - 1)):
            return rows[i][0]
    return None


def subexp_profile(
    ctx: BoundsContext,
    w_size: int,
    alpha: float,
    beta: float,
    ls: Iterable[float],
    alpha_prime: float | None = None,
) -> SubexpProfile:
    """Band bound at P = (l/2S)^alpha / |W|, Q = Kc = (l/2S)^beta over a grid of l.

    Values are kept as logarithms. ``log_fitted_C`` is the smallest log C with
    bound(l) <= C exp(-l^alpha') on the grid; ``scaled_knee`` marks where
    bound(l) exp(l^alpha') starts to decrease for good.
    """
    if not 0 < alpha < beta <= 0.5:
        raise DomainError("need 0 < alpha < beta <= 1/2")
    ap = alpha / 2 if alpha_prime is None else alpha_prime
    if not 0 < ap < alpha:
        raise DomainError("need 0 < alpha' < alpha")
    S = ctx.S or 1
    rows = []
    for l in sorted(ls):
        if l <= 0:
            raise DomainError("distances must be positive")
        base = l / (2 * S)
        P = base**alpha / w_size
        Q = base**beta
        rows.append((float(l), P, Q, band_bound(ctx, w_size, P, Q, Q).log_value))
    logs = [r[3] for r in rows]
    scaled = [lb + l**ap for (l, _, _, lb) in rows]
    return SubexpProfile(alpha, beta, ap, rows, _knee(rows, logs), _knee(rows, scaled), max(scaled, default=-math.inf))


def shell_counts(blocking: Blocking, Z, supports: Iterable) -> dict:
    """Number of supports W at each image distance l(W, Z)."""
    Z = site_set(Z)
    out: dict = {}
    for W in supports:
        l = image_distance(W, Z, blocking)
        out[l] = out.get(l, 0) + 1
    return dict(sorted(out.items()))


def count_supports(blocking: Blocking, Z, E: float, shapes: Sequence, S: int | None = None, periodic=False) -> int:
    """n(E): generated supports within image distance E of Z."""
    from .lattice import diameter

    if S is not None:
        for sh in shapes:
            if diameter(site_set(sh)) > S:
                raise DomainError(f"generator {sh} exceeds range {S}")
    supports = generated_supports(shapes, blocking, periodic)
    return sum(n for l, n in shell_counts(blocking, Z, supports).items() if l <= E)


@dataclass
class MajorantSeries:
    alpha: float
    d: int
    value: float
    n_terms: int
    tail_bound: float


def _tail_integral(alpha: float, d: int, a: float) -> float:
    """Upper bound for the integral of exp(-x^alpha)(x+1)^d over [a, inf), a >= 1."""
    s = (d + 1) / alpha
    return 2**d / alpha * special.gamma(s) * special.gammaincc(s, a**alpha)


def majorant_series(alpha: float, d: int, tol: float = 1e-10, chunk: int = 1 << 20) -> MajorantSeries:
    """sum_{n >= 0} exp(-n^alpha) (n+1)^d with an integral-test tail below ``tol``."""
    if not alpha > 0:
        raise DomainError("alpha must be positive")
    # f is decreasing beyond x0 = (d / alpha)^(1 / alpha), so the tail past N is
    # bounded by the integral from N - 1
    x0 = (d / alpha) ** (1 / alpha) + 1
    N = max(int(x0) + 2, 16)
    while _tail_integral(alpha, d, N - 1) > tol:
        N *= 2
    lo, hi = int(x0) + 2, N
    while hi - lo > 1:
        mid = (lo + hi) // 2
        if _tail_integral(alpha, d, mid - 1) > tol:
            lo = mid
        else:
            hi = mid
    N = hi
    parts = []
    for start in range(0, N, chunk):
        n = np.arange(start, min(start + chunk, N), dtype=np.float64)
        parts.append(float(np.sum(np.exp(-(n**alpha)) * (n + 1) ** d)))
    return MajorantSeries(alpha, d, math.fsum(parts), N, _tail_integral(alpha, d, N - 1))


def linearization_bound(ctx: BoundsContext | None, kdir_sup: float, alpha: float, d: int, constant: float = 1.0) -> float:
    """constant * ||K||_inf * sum_n exp(-n^alpha) (n+1)^d."""
    if not 0 < alpha < 0.5:
        raise DomainError("alpha must lie in (0, 1/2)")
    if kdir_sup == 0:
        return 0.0
    return constant * kdir_sup * majorant_series(alpha, d).value


@dataclass
class BoundsReport:
    context: dict
    threshold: float
    passes_threshold: bool
    rho: float
    a_bar: list  # rows (n, recursion, closed)
    a_bar_sum_closed: float | None
    eps_tail: list  # rows (P, value)
    band: list  # rows (|W|, P, Q, Kc, value, activation distance)
    support_counts: list  # rows (E, n(E))
    linearization_series: dict | None

    def to_dict(self) -> dict:
        return asdict(self)


def build_report(
    ctx: BoundsContext,
    n_terms: int = 20,
    P_values: Sequence[float] = (2, 4, 6, 8),
    band_args: Sequence[tuple] = ((1, 8, 8, 8),),
    support_counts: Sequence[tuple] = (),
    series: tuple | None = (0.25, 1),
) -> BoundsReport:
    """Evaluate every closed form; tail-dependent entries are omitted when rho >= 1."""
    th = threshold(ctx)
    rho = ctx.rho
    rec = a_bar_table(ctx, n_terms)
    a_rows = [(n, v, ctx.c * rho**n) for n, v in enumerate(rec, 1)]
    valid = rho < 1
    ms = None
    if series is not None:
        m = majorant_series(*series)
        ms = {"alpha": m.alpha, "d": m.d, "value": m.value, "n_terms": m.n_terms, "tail_bound": m.tail_bound}
    return BoundsReport(
        context={**asdict(ctx), "eps": ctx.eps, "c": ctx.c, "log_M": ctx.log_M},
        threshold=th,
        passes_threshold=ctx.norm <= th,
        rho=rho,
        a_bar=a_rows,
        a_bar_sum_closed=ctx.c * rho / (1 - rho) if valid else None,
        eps_tail=[(P, eps_tail(ctx, P)) for P in P_values] if valid else [],
        band=[(w, P, Q, K, *_bb(ctx, w, P, Q, K)) for (w, P, Q, K) in band_args] if valid else [],
        support_counts=list(support_counts),
        linearization_series=ms,
    )


def _bb(ctx, w, P, Q, K):
    b = band_bound(ctx, w, P, Q, K)
    return b.value, b.activation_distance
