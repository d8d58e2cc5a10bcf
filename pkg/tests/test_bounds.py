import math

import pytest
from conftest import chain
from hypothesis import assume, given, settings, strategies as st

from rgcluster.bounds import (
    BoundsContext,
    a_bar,
    a_bar_table,
    band_bound,
    binomial_eps_sums,
    build_report,
    count_supports,
    eps_tail,
    generating_check,
    linearization_bound,
    majorant_series,
    passes_threshold,
    shell_counts,
    subexp_profile,
    threshold,
)
from rgcluster.cluster import kp_check
from rgcluster.errors import DomainError
from rgcluster.interaction import norm_r
from rgcluster.lattice import Blocking
from rgcluster.polymers import enumerate_polymers, rooted_contributions

REF = dict(r=1.0, M=2.0, s=2)

contexts = st.builds(
    lambda r, frac, s, norm: BoundsContext(r, 1 + frac * (math.exp(r) - 1), s, norm),
    st.floats(0.5, 3.0),
    st.floats(0.05, 0.95),
    st.integers(1, 4),
    st.one_of(st.just(0.0), st.floats(1e-8, 0.05)),
)


def test_reference_constants():
    ctx = BoundsContext(**REF, norm=0.0)
    assert ctx.eps == pytest.approx(0.7357589, abs=1e-7)
    assert ctx.c == pytest.approx(0.1658220, abs=1e-7)
    assert threshold(ctx) == pytest.approx(0.0055471, abs=1e-6)
    assert threshold(ctx) == pytest.approx(0.00554718, abs=1e-8)


@pytest.mark.parametrize("M,r", [(1.0, 1.0), (math.e, 1.0), (3.0, 1.0), (1.5, 0.0)])
def test_invalid_m_rejected(M, r):
    with pytest.raises(DomainError):
        BoundsContext(r, M, 2, 0.0)


@given(st.floats(0.5, 3.0), st.floats(0.05, 0.95), st.integers(1, 3))
def test_threshold_monotone(r, frac, s):
    M = 1 + frac * (math.exp(r) - 1)
    base = threshold(BoundsContext(r, M, s, 0.0))
    assert threshold(BoundsContext(r + 0.1, M, s, 0.0)) > base
    assert threshold(BoundsContext(r, M, s + 1, 0.0)) < base


@given(st.floats(0.01, 0.95), st.integers(0, 12))
def test_binomial_sums_closed_form(eps, k):
    g = binomial_eps_sums(eps, k)[k]
    closed = eps**k / (1 - eps) ** (k + 1) - (1.0 if k == 0 else 0.0)
    assert g == pytest.approx(closed, rel=1e-12)


def test_a_bar_first_term():
    ctx = BoundsContext(**REF, norm=0.004)
    assert a_bar_table(ctx, 1)[0] == pytest.approx(2 * 2 * 0.004 * ctx.eps / (1 - ctx.eps), rel=1e-14)
    rep = a_bar(ctx, 3)
    assert rep.closed_valid and rep.recursion <= rep.closed
    with pytest.raises(DomainError):
        a_bar(ctx, 0)


@settings(max_examples=40, deadline=None)
@given(contexts)
def test_recursion_below_closed_form(ctx):
    for n, v in enumerate(a_bar_table(ctx, 20), 1):
        assert v <= ctx.c * ctx.rho**n * (1 + 1e-9) + 1e-300


@settings(max_examples=25, deadline=None)
@given(contexts, st.floats(0.0, 1.0))
def test_generating_function_identity(ctx, frac):
    assume(ctx.norm > 0)
    z = frac * ctx.c**2 / (2 * ctx.s * ctx.norm)
    g = generating_check(ctx, z)
    assert g.in_domain
    assert 0 <= g.w <= ctx.c
    assert g.residual <= 1e-12
    assert g.partial_ok


def test_generating_function_outside_domain():
    ctx = BoundsContext(**REF, norm=0.004)
    z_star = ctx.c**2 / (2 * ctx.s * ctx.norm)
    assert not generating_check(ctx, 1.01 * z_star).in_domain
    assert generating_check(ctx, z_star).w == pytest.approx(ctx.c, rel=1e-6)
    with pytest.raises(DomainError):
        generating_check(ctx, -1.0)


@settings(max_examples=40, deadline=None)
@given(contexts)
def test_threshold_implication_chain(ctx):
    at = BoundsContext(ctx.r, ctx.M, ctx.s, threshold(ctx) * 0.999)
    assert passes_threshold(at)
    assert at.rho < 1
    g = generating_check(at, 1.0)
    assert g.in_domain and g.w <= at.log_M
    assert sum(a_bar_table(at, 30)) <= at.log_M


@pytest.mark.parametrize("K", [1e-4, 3e-4])
def test_enumerated_rooted_sums_dominated(K):
    J, k, b = chain(8, K)
    ctx = BoundsContext(**REF, norm=norm_r(J, 1.0), D=2, S=1)
    assert passes_threshold(ctx)
    bars = a_bar_table(ctx, 7)
    table = rooted_contributions(J, b, ctx.M, n_max=7)
    for n in range(1, 8):
        assert max(table[n].values()) <= bars[n - 1]
    polys = enumerate_polymers(J, k, b, n_max=10, q_cap=10)
    assert kp_check(polys, ctx.M, b).passed
    for P in (2, 4, 6, 8):
        for y in b.blocks:
            mass = sum(p.sup_abs() * ctx.M ** len(p.support) for p in polys if y in p.support and len(p.support) > P)
            assert mass <= eps_tail(ctx, P)


def test_eps_tail_reference_value():
    # c = 0.2 needs eps = 1/1.44; rho = 0.5 with s = 2 needs ||J|| = 0.005
    eps = 1 / 1.44
    ctx = BoundsContext(1.0, eps * math.e, 2, 0.005, D=2)
    assert ctx.c == pytest.approx(0.2)
    assert ctx.rho == pytest.approx(0.5)
    assert eps_tail(ctx, 8) == pytest.approx(0.025, rel=1e-12)


def test_eps_tail_invalid_when_rho_too_large():
    ctx = BoundsContext(**REF, norm=0.05)
    assert ctx.rho >= 1
    with pytest.raises(DomainError):
        eps_tail(ctx, 2)


def test_band_bound_golden():
    ctx = BoundsContext(**REF, norm=0.004, D=2, S=1)
    bb = band_bound(ctx, 1, 8, 8, 8)
    assert bb.value == pytest.approx(4920159.976913579, rel=1e-12)
    assert bb.activation_distance == 72
    # hand evaluation of the same closed form
    e = lambda P: ctx.c * ctx.rho ** (P / 2) / (1 - ctx.rho)
    L = math.log(2)
    hand = 4 * (1 + L) ** 2 * (e(8) / L + 2 * e(8) * 9 * 2 * 2**18)
    assert bb.value == pytest.approx(hand, rel=1e-12)
    with pytest.raises(DomainError):
        band_bound(ctx, 0, 8, 8, 8)


def test_subexp_profile_eventually_decays():
    ctx = BoundsContext(**REF, norm=0.004, D=2, S=1)
    prof = subexp_profile(ctx, 1, 0.25, 0.5, [2.0**k for k in range(1, 80)])
    assert prof.knee is not None and prof.eventually_dominated
    tail = [lb + l**prof.alpha_prime for (l, _, _, lb) in prof.rows if l >= prof.scaled_knee]
    assert all(v <= prof.log_fitted_C for v in tail)
    with pytest.raises(DomainError):
        subexp_profile(ctx, 1, 0.5, 0.25, [1.0])
    with pytest.raises(DomainError):
        subexp_profile(ctx, 1, 0.25, 0.5, [1.0], alpha_prime=0.3)


def test_support_counts_chain():
    b = Blocking([8], [2])
    shapes = [[[0], [1]]]
    supports = [((i,), (i + 1,)) for i in range(7)]
    assert shell_counts(b, ((0,),), supports) == {0: 2, 1: 2, 2: 2, 3: 1}
    assert [count_supports(b, ((0,),), E, shapes) for E in range(4)] == [2, 4, 6, 7]
    with pytest.raises(DomainError):
        count_supports(b, ((0,),), 1, [[[0], [2]]], S=1)


def test_majorant_series():
    m = majorant_series(0.25, 1)
    assert m.tail_bound < 1e-10
    # integral comparison: the sum is close to 4 Gamma(8) = 20160
    assert 20160 < m.value < 20300
    assert majorant_series(0.5, 1).value < m.value
    with pytest.raises(DomainError):
        majorant_series(0.0, 1)


def test_linearization_bound_scaling():
    s = majorant_series(0.25, 1).value
    assert linearization_bound(None, 2.0, 0.25, 1, 3.0) == pytest.approx(6.0 * s)
    assert linearization_bound(None, 0.0, 0.25, 1) == 0.0
    with pytest.raises(DomainError):
        linearization_bound(None, 1.0, 0.5, 1)


def test_report_omits_tail_entries_when_rho_large():
    good = build_report(BoundsContext(**REF, norm=0.004, D=2), series=None)
    assert good.eps_tail and good.band and good.a_bar_sum_closed is not None
    bad = build_report(BoundsContext(**REF, norm=0.05, D=2), series=None)
    assert bad.eps_tail == [] and bad.band == [] and bad.a_bar_sum_closed is None
    assert not bad.passes_threshold
