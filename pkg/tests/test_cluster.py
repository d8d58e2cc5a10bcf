import itertools
import math

import numpy as np
import pytest
from conftest import chain
from hypothesis import given, settings, strategies as st

from rgcluster.cluster import (
    ClusterExpansion,
    _overlap_adjacency,
    avoidance_ratio,
    enumerate_clusters,
    expansion_couplings,
    expansion_jacobian,
    jacobian_bound,
    kp_check,
    kp_check_general,
    log_W_expansion,
    truncated_F,
    ursell,
    ursell_by_enumeration,
    ursell_from_adjacency,
)
from rgcluster.errors import DomainError
from rgcluster.exact import ExactSystem
from rgcluster.interaction import Interaction
from rgcluster.kernels import decimation
from rgcluster.lattice import Blocking
from rgcluster.polymers import enumerate_polymers, polymer_partition
from rgcluster.tables import spin_configs

Y0, Y1, Y2 = (0,), (1,), (2,)


def _straddling_bond(K):
    b = Blocking([4], [2])
    J = Interaction([([1, 2], K)])
    return J, decimation([2], 0), b


# --- Ursell coefficients -------------------------------------------------


@pytest.mark.parametrize("p", range(1, 7))
def test_ursell_repeated_support(p):
    N = (Y0, Y1)
    expected = (-1) ** (p + 1) * math.factorial(p - 1)
    assert ursell(*([N] * p)) == expected
    assert ursell_by_enumeration(_overlap_adjacency([N] * p)) == expected


def test_ursell_small_cases():
    assert ursell((Y0,)) == 1
    assert ursell((Y0, Y1), (Y1, Y2)) == -1
    assert ursell((Y0,), (Y2,)) == 0
    assert ursell((Y0, Y1), (Y1, Y2), (Y0, Y2)) == 2
    # path of three: only the two-edge spanning tree
    assert ursell((Y0,), (Y0, Y1), (Y1,)) == 1
    with pytest.raises(DomainError):
        ursell()
    with pytest.raises(DomainError):
        ursell(*([(Y0,)] * 7))


@settings(max_examples=60, deadline=None)
@given(st.integers(1, 6).flatmap(lambda p: st.tuples(st.just(p), st.lists(st.booleans(), min_size=p * (p - 1) // 2, max_size=p * (p - 1) // 2))))
def test_ursell_routes_agree_on_random_graphs(data):
    p, bits = data
    adj = [0] * p
    for (i, j), on in zip(itertools.combinations(range(p), 2), bits):
        if on:
            adj[i] |= 1 << j
            adj[j] |= 1 << i
    assert ursell_from_adjacency(tuple(adj)) == ursell_by_enumeration(tuple(adj))


@given(st.permutations([(Y0, Y1), (Y1,), (Y1, Y2), (Y2,)]))
def test_ursell_order_invariant(perm):
    assert ursell(*perm) == ursell((Y0, Y1), (Y1,), (Y1, Y2), (Y2,))


# --- log W -----------------------------------------------------------------


@pytest.mark.parametrize("p_max", range(1, 7))
def test_single_polymer_series_is_log_series(p_max):
    J, k, b = _straddling_bond(0.3)
    polys = enumerate_polymers(J, k, b)
    w = math.cosh(0.3) - 1
    series = sum((-1) ** (p + 1) * w**p / p for p in range(1, p_max + 1))
    for sp in spin_configs(b.blocks):
        assert log_W_expansion(polys, sp, p_max) == pytest.approx(series, abs=1e-15)
    if p_max == 6:
        assert abs(series - math.log(math.cosh(0.3))) < w**7


def test_log_w_residual_decreases_with_order(chain8):
    J, k, b = chain8
    polys = enumerate_polymers(J, k, b, n_max=10, q_cap=10)
    exact = ExactSystem(J, k, b).log_W()
    res = []
    for p_max in range(1, 5):
        approx = ClusterExpansion(polys, p_max).log_W(b.blocks)
        res.append(np.max(np.abs(approx.values - exact.values)))
    assert all(a > c for a, c in zip(res, res[1:]))
    assert res[-1] < 1e-6


def test_four_site_chain_expansion_matches_exact():
    J, k, b = chain(4, 0.1)
    polys = enumerate_polymers(J, k, b, n_max=10, q_cap=10)
    exact = ExactSystem(J, k, b)
    for sp in spin_configs(b.blocks):
        assert log_W_expansion(polys, sp, 4) == pytest.approx(exact.log_W().at(sp), abs=1e-6)
    jp = expansion_couplings(polys, b, 4)
    assert jp[(Y0, Y1)] == pytest.approx(0.5 * math.log(math.cosh(0.2)), abs=1e-6)


@pytest.mark.parametrize("p_max", [1, 2, 3])
def test_ordered_and_multiset_sums_agree(p_max):
    J, k, b = chain(6, 0.15)
    polys = enumerate_polymers(J, k, b, n_max=10, q_cap=10)
    for sp in spin_configs(b.blocks):
        a = log_W_expansion(polys, sp, p_max)
        c = log_W_expansion(polys, sp, p_max, ordered=True)
        assert a == pytest.approx(c, abs=1e-15)


def test_couplings_are_local():
    J, k, b = chain(8, 0.1)
    polys = enumerate_polymers(J, k, b, n_max=10, q_cap=10)
    ce = ClusterExpansion(polys, 3)
    jp = ce.couplings()
    for Z in jp:
        assert any(set(Z) <= set(U) for U in ce.by_union) or not Z
    # a cluster on {y0} alone cannot feed J'({y1})
    only = [p for p in polys if p.support == (Y0,)]
    assert expansion_couplings(only, b, 3).get((Y1,)) == 0.0


def test_empty_polymer_set():
    assert ClusterExpansion([], 4).terms == []
    assert dict(expansion_couplings([], None, 4)) == {}


def test_clusters_thread_independent():
    J, k, b = chain(8, 0.1)
    polys = enumerate_polymers(J, k, b, n_max=10, q_cap=10)
    a = enumerate_clusters(polys, 4, threads=1)
    c = enumerate_clusters(polys, 4, threads=8)
    assert [(t.supports, t.coefficient) for t in a] == [(t.supports, t.coefficient) for t in c]


# --- avoidance ratios ----------------------------------------------------------


@pytest.mark.parametrize("n_sites", [4, 8])
def test_avoidance_matches_restricted_polymer_gas(n_sites):
    J, k, b = chain(n_sites, 0.1)
    polys = enumerate_polymers(J, k, b, n_max=10, q_cap=10)
    full = polymer_partition(polys, b)
    ce = ClusterExpansion(polys, 4)
    for r in (1, 2):
        for Y in itertools.combinations(b.blocks, r):
            exact = polymer_partition(polys, b, avoid=Y).values / full.values
            approx = ce.avoidance(Y).lift(b.blocks).values
            assert np.max(np.abs(approx - exact)) < 1e-6


def test_avoidance_of_untouched_region_is_one():
    J, k, b = chain(8, 0.1)
    polys = [p for p in enumerate_polymers(J, k, b, n_max=10, q_cap=10) if Y2 not in p.support and (3,) not in p.support]
    assert np.all(avoidance_ratio(polys, (Y2, (3,)), 4).values == 1.0)


def test_truncated_avoidance_converges_monotonically():
    J, k, b = chain(8, 0.1)
    polys = enumerate_polymers(J, k, b, n_max=10, q_cap=10)
    full = polymer_partition(polys, b)
    Y = (Y1,)
    exact = polymer_partition(polys, b, avoid=Y).values / full.values
    errs = []
    for Kc in range(1, 5):
        approx = truncated_F(polys, Y, Q=4, Kc=Kc).lift(b.blocks).values
        errs.append(np.max(np.abs(approx - exact)))
    assert all(a > c for a, c in zip(errs, errs[1:]))
    errs_q = [np.max(np.abs(truncated_F(polys, Y, Q=q, Kc=4).lift(b.blocks).values - exact)) for q in (1, 2, 3, 4)]
    assert all(a >= c for a, c in zip(errs_q, errs_q[1:]))
    with pytest.raises(DomainError):
        truncated_F(polys, Y, 0, 1)


# --- Jacobian -----------------------------------------------------------------


@pytest.mark.parametrize("n_sites", [4, 8])
def test_expansion_jacobian_matches_exact(n_sites):
    J, k, b = chain(n_sites, 0.1)
    exact = ExactSystem(J, k, b)
    for W in [((1,),), ((1,), (2,)), ((0,), (3,))]:
        for Z in [(Y0,), (Y0, Y1), (Y1,)]:
            est = expansion_jacobian(J, k, b, Z, W, n_max=10, q_cap=10, p_max=4, M=2.0, P=1)
            assert est.value == pytest.approx(exact.jacobian(Z, W), abs=1e-6)
            assert est.value == pytest.approx(est.case_large + est.case_small)
            assert abs(est.value) <= est.bound


def test_jacobian_bound_value():
    assert jacobian_bound(2.0, 1) == pytest.approx(2 * (1 + math.log(2)))
    assert jacobian_bound(2.0, 2) == pytest.approx(4 * (1 + math.log(2)) ** 2)


# --- polymer condition -------------------------------------------------------------


def test_kp_single_bond_pass():
    J, k, b = _straddling_bond(0.2)
    polys = enumerate_polymers(J, k, b)
    rep = kp_check(polys, 2.0, b)
    assert rep.passed
    assert rep.per_site[Y0] == pytest.approx(0.0802670, abs=1e-7)
    assert rep.log_M == pytest.approx(0.6931472, abs=1e-7)


def test_kp_single_bond_fail():
    J, k, b = _straddling_bond(0.6)
    rep = kp_check(enumerate_polymers(J, k, b), 2.0, b)
    assert not rep.passed
    assert rep.worst == pytest.approx(4 * (math.cosh(0.6) - 1), rel=1e-12)
    assert rep.worst == pytest.approx(0.7418609, abs=1e-7)


def test_kp_trivial_at_zero_coupling():
    b = Blocking([4], [2])
    rep = kp_check(enumerate_polymers(Interaction(), decimation([2], 0), b), 2.0, b)
    assert rep.passed and rep.worst == 0.0
    with pytest.raises(DomainError):
        kp_check([], 1.0, b)


def test_kp_general_form_implied_by_site_form(chain8):
    J, k, b = chain8
    polys = enumerate_polymers(J, k, b, n_max=10, q_cap=10)
    assert kp_check(polys, 2.0, b).passed
    for N, (lhs, rhs) in kp_check_general(polys, 2.0, [p.support for p in polys]).items():
        assert lhs <= rhs
