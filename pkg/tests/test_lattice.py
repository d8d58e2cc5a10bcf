import itertools

import pytest
from hypothesis import given, strategies as st

from rgcluster.errors import ConfigError, DomainError
from rgcluster.lattice import (
    Blocking,
    block_components,
    block_connected,
    diameter,
    image_distance,
    image_support,
    site_set,
    sup_distance,
)


def test_blocking_1d_layout():
    b = Blocking([8], [2])
    assert b.n_sites == 8 and b.n_blocks == 4 and b.s == 2
    assert b.sites_of((1,)) == ((2,), (3,))
    assert b.block_of((5,)) == (2,)
    assert b.sites_over([(1,), (0,)]) == ((2,), (3,), (0,), (1,))


def test_blocking_2d_layout():
    b = Blocking([4, 2], [2, 2])
    assert b.image_window == (2, 1)
    assert b.sites_of((1, 0)) == ((2, 0), (2, 1), (3, 0), (3, 1))
    assert b.block_position((3, 0)) == 2


@pytest.mark.parametrize("window,block", [([5], [2]), ([4, 4], [3, 2]), ([4], [2, 2]), ([0], [1])])
def test_blocking_rejects_bad_extents(window, block):
    with pytest.raises(ConfigError):
        Blocking(window, block)


def test_site_set_is_canonical():
    assert site_set([3, 1, 3]) == ((1,), (3,))
    assert site_set([(1, 0), (0, 2)]) == ((0, 2), (1, 0))


def test_diameter_and_distance():
    assert diameter(((0, 0), (2, 1))) == 2
    assert sup_distance((0, 0), (-3, 1)) == 3
    with pytest.raises(DomainError):
        diameter(())


def test_image_support_and_connectivity():
    b = Blocking([8], [2])
    assert image_support(((1,), (2,)), b) == ((0,), (1,))
    assert block_connected(((1,), (2,)), ((3,), (4,)), b)
    assert not block_connected(((0,), (1,)), ((2,), (3,)), b)


def test_block_components_splits_far_links():
    b = Blocking([8], [2])
    g = (((0,), (1,)), ((1,), (2,)), ((6,), (7,)))
    comps = block_components(g, b)
    assert comps == [(((0,), (1,)), ((1,), (2,))), (((6,), (7,)),)]


def test_image_distance_examples():
    b = Blocking([8], [2])
    assert image_distance(((0,),), ((0,),), b) == 0
    assert image_distance(((0,), (1,)), ((3,),), b) == 3
    assert image_distance(((1,), (2,)), ((2,), (3,)), b) == 1
    with pytest.raises(DomainError):
        image_distance((), ((0,),), b)


@given(st.lists(st.integers(0, 11), min_size=1, max_size=4), st.lists(st.integers(0, 3), min_size=1, max_size=3))
def test_image_distance_symmetric_lower_bound(W, Z):
    b = Blocking([12], [3])
    W = site_set(W)
    Z = site_set(Z)
    l = image_distance(W, Z, b)
    assert l >= 0
    # distance between original sites is at least s*(l-1)+1 when l > 0
    if l > 0:
        gap = min(abs(w[0] - z) for w in W for zb in Z for z in (x[0] for x in b.sites_of(zb)))
        assert gap >= 3 * (l - 1) + 1


@given(st.lists(st.tuples(st.integers(0, 7), st.integers(0, 7)), min_size=1, max_size=5))
def test_components_partition_links(pairs):
    b = Blocking([8], [2])
    g = tuple(sorted({site_set(p) for p in pairs}))
    comps = block_components(g, b)
    assert sorted(x for c in comps for x in c) == sorted(g)
    for c1, c2 in itertools.combinations(comps, 2):
        assert not any(block_connected(x, y, b) for x in c1 for y in c2)
