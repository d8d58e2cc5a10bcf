"""Shared instances and a naive brute-force oracle written with plain loops."""

import itertools
import math

import numpy as np
import pytest

from rgcluster.interaction import Interaction, generate_translation_invariant
from rgcluster.kernels import decimation
from rgcluster.lattice import Blocking

BOND = [[[0], [1]]]


def chain(n_sites: int, K: float, block: int = 2):
    """Nearest-neighbour chain with free boundary and decimation at the first site of each block."""
    b = Blocking([n_sites], [block])
    J = generate_translation_invariant(BOND, [K], b)
    return J, decimation([block], 0), b


def naive_W(J, kernel, b, sigma_prime: dict) -> float:
    """Average over all original configurations of prod_y T * exp(sum J sigma_X)."""
    total = 0.0
    for vals in itertools.product((1, -1), repeat=b.n_sites):
        sigma = dict(zip(b.sites, vals))
        weight = math.exp(sum(v * math.prod(sigma[x] for x in X) for X, v in J.items()))
        for y in b.blocks:
            weight *= kernel([sigma[x] for x in b.sites_of(y)], sigma_prime[y])
        total += weight
    return total / 2**b.n_sites


def naive_couplings(J, kernel, b) -> dict:
    """J'(Z) = average over sigma' of sigma'_Z log W(sigma'), for every Z."""
    logs = {}
    for vals in itertools.product((1, -1), repeat=b.n_blocks):
        sp = dict(zip(b.blocks, vals))
        logs[vals] = math.log(naive_W(J, kernel, b, sp))
    out = {}
    for r in range(b.n_blocks + 1):
        for Z in itertools.combinations(b.blocks, r):
            idx = [b.blocks.index(y) for y in Z]
            out[Z] = sum(v * math.prod(vals[i] for i in idx) for vals, v in logs.items()) / len(logs)
    return out


@pytest.fixture
def chain4():
    return chain(4, 0.2)


@pytest.fixture
def chain8():
    return chain(8, 0.1)


@pytest.fixture
def rng():
    return np.random.default_rng(12345)
