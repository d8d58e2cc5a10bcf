"""Ground truth by exhaustive enumeration of the original spins.

The Boltzmann weights of all ``2**|window|`` configurations are held as a
``(2,)*n`` array in block-major site order, so the product of kernels over
blocks is a sequence of single-axis contractions (one per block) and the
frozen partition function for every block-spin configuration comes out in
``O(2**n)`` work.
"""

from __future__ import annotations

from collections.abc import Mapping
from typing import Iterable

import numpy as np

from .errors import CapExceeded, ConfigError, CoverageError, DomainError, NumericError
from .interaction import Interaction
from .kernels import Kernel
from .lattice import Blocking, site_set
from .parallel import pmap
from .tables import SpinTable, inverse_walsh, spin_axis, walsh

MAX_SITES = 24
MAX_IMAGE_SITES = 20


def kernel_contract(arr: np.ndarray, table: np.ndarray, nb: int) -> np.ndarray:
    """Contract a block-major ``(2,)*(s*nb)`` array with one kernel per block.

    Returns the ``(2,)*nb`` table indexed by block spins. Each block axis is
    reduced in turn; the summation order is fixed by the shapes alone.
    """
    q = table.shape[0]
    cur = np.ascontiguousarray(arr).reshape(-1)
    done, rest = 1, q**nb
    for _ in range(nb):
        rest //= q
        a = cur.reshape(done, q, rest)
        out = np.empty((done, 2, rest))
        for j in (0, 1):
            out[:, j, :] = (a * table[:, j][None, :, None]).sum(axis=1)
        cur = out
        done *= 2
    return cur.reshape((2,) * nb)


class RenormalizedInteraction(Mapping):
    """Image-lattice couplings J'(Z), including the constant term J'(())."""

    def __init__(self, entries=()):
        items = entries.items() if isinstance(entries, Mapping) else entries
        self._data = {site_set(Z): float(v) for Z, v in items}

    @classmethod
    def from_coefficients(cls, sites, coeffs: np.ndarray) -> "RenormalizedInteraction":
        sites = tuple(sites)
        out = {}
        for idx in np.ndindex(*coeffs.shape):
            Z = tuple(x for x, i in zip(sites, idx) if i)
            out[Z] = float(coeffs[idx])
        return cls(out)

    def __getitem__(self, Z):
        return self._data[site_set(Z)]

    def get(self, Z, default=0.0):
        return self._data.get(site_set(Z), default)

    def __iter__(self):
        return iter(self._data)

    def __len__(self):
        return len(self._data)

    def evaluate(self, sigma_prime: Mapping) -> float:
        """sum_Z J'(Z) sigma'_Z at one block-spin assignment."""
        total = 0.0
        for Z, v in self._data.items():
            p = 1
            for y in Z:
                p *= sigma_prime[y]
            total += v * p
        return total


class JacobianTable(Mapping):
    """Sparse map ``(Z, W) -> dJ'(Z)/dJ(W)``."""

    def __init__(self, entries=(), w_supports=()):
        items = entries.items() if isinstance(entries, Mapping) else entries
        self._data = {(site_set(Z), site_set(W)): float(v) for (Z, W), v in items}
        self.w_supports = tuple(sorted({site_set(W) for W in w_supports} | {W for _, W in self._data}))

    def __getitem__(self, key):
        Z, W = key
        return self._data[(site_set(Z), site_set(W))]

    def __iter__(self):
        return iter(self._data)

    def __len__(self):
        return len(self._data)


def _as_assignment(sigma_prime, blocking: Blocking) -> dict:
    if isinstance(sigma_prime, Mapping):
        return dict(sigma_prime)
    vals = list(sigma_prime)
    if len(vals) != blocking.n_blocks:
        raise DomainError("block-spin configuration has the wrong length")
    return dict(zip(blocking.blocks, vals))


class ExactSystem:
    """Exhaustive-enumeration engine for one (interaction, kernel, blocking)."""

    def __init__(
        self,
        J: Interaction,
        kernel: Kernel,
        blocking: Blocking,
        max_sites: int = MAX_SITES,
        max_image_sites: int = MAX_IMAGE_SITES,
    ):
        if blocking.n_sites > max_sites:
            raise CapExceeded(
                f"window has {blocking.n_sites} sites; brute force is capped at {max_sites}"
            )
        if blocking.n_blocks > max_image_sites:
            raise CapExceeded(
                f"image window has {blocking.n_blocks} sites; full Fourier is capped at {max_image_sites}"
            )
        if tuple(kernel.block) != blocking.block:
            raise ConfigError(f"kernel block {kernel.block} != blocking block {blocking.block}")
        self.J = J
        self.kernel = kernel
        self.blocking = blocking
        self.order = blocking.sites_over(blocking.blocks)
        self._pos = {x: i for i, x in enumerate(self.order)}
        n = len(self.order)
        self.n = n

        E = np.zeros((2,) * n)
        for X, v in J.items():
            blocking.check(X)
            E = E + v * self.spin_product(X)
        self.boltz = np.exp(E) * 2.0**-n
        W = self.contract(self.boltz)
        if not np.all(W > 0):
            idx = tuple(int(i) for i in np.argwhere(~(W > 0))[0])
            sp = {y: 1 - 2 * i for y, i in zip(blocking.blocks, idx)}
            raise NumericError(f"frozen partition function is not positive at sigma'={sp}", sp)
        self.W = W

    def spin_product(self, X: Iterable) -> np.ndarray:
        """sigma_X as an array broadcastable to the configuration tensor."""
        out = np.ones((1,) * self.n)
        for x in X:
            if x not in self._pos:
                raise DomainError(f"site {x} outside window {self.blocking.window}")
            out = out * spin_axis(self.n, self._pos[x])
        return out

    def contract(self, arr: np.ndarray) -> np.ndarray:
        """Average ``arr`` against the product of kernels; returns a ``(2,)*n'`` table."""
        return kernel_contract(np.broadcast_to(arr, (2,) * self.n), self.kernel.table, self.blocking.n_blocks)

    def W_table(self) -> SpinTable:
        return SpinTable(self.blocking.blocks, self.W)

    def log_W(self) -> SpinTable:
        return SpinTable(self.blocking.blocks, np.log(self.W))

    def frozen_partition(self, sigma_prime) -> float:
        return self.W_table().at(_as_assignment(sigma_prime, self.blocking))

    def coupling_coefficients(self) -> np.ndarray:
        return walsh(np.log(self.W))

    def couplings(self) -> RenormalizedInteraction:
        return RenormalizedInteraction.from_coefficients(self.blocking.blocks, self.coupling_coefficients())

    def fourier_residual(self) -> float:
        """max over sigma' of |sum_Z J'(Z) sigma'_Z - log W(sigma')|."""
        recon = inverse_walsh(self.coupling_coefficients())
        return float(np.max(np.abs(recon - np.log(self.W))))

    def constrained_mean(self, W: Iterable) -> np.ndarray:
        """<sigma_W> at fixed block spins, for every sigma' (ratio taken per sigma')."""
        num = self.contract(self.boltz * self.spin_product(W))
        return num / self.W

    def jacobian_column(self, W: Iterable) -> np.ndarray:
        """dJ'(Z)/dJ(W) for every Z at once, as a Walsh coefficient array."""
        return walsh(self.constrained_mean(W))

    def jacobian(self, Z, W) -> float:
        Z = site_set(Z)
        self.blocking.check_image(Z)
        idx = tuple(1 if y in Z else 0 for y in self.blocking.blocks)
        return float(self.jacobian_column(site_set(W))[idx])


def frozen_partition(J, kernel, blocking, sigma_prime, max_sites: int = MAX_SITES) -> float:
    """W(sigma') by brute force over every original configuration."""
    return ExactSystem(J, kernel, blocking, max_sites=max_sites).frozen_partition(sigma_prime)


def renormalized_couplings(J, kernel, blocking, **caps) -> RenormalizedInteraction:
    return ExactSystem(J, kernel, blocking, **caps).couplings()


def jacobian_exact(J, kernel, blocking, Z, W, **caps) -> float:
    return ExactSystem(J, kernel, blocking, **caps).jacobian(Z, W)


def jacobian_table(J, kernel, blocking, Ws, Zs=None, threads=None, **caps) -> JacobianTable:
    """Jacobian entries for every ``W`` in ``Ws`` and every ``Z`` in ``Zs`` (default: all)."""
    system = ExactSystem(J, kernel, blocking, **caps)
    Ws = [site_set(W) for W in Ws]
    blocks = blocking.blocks
    if Zs is None:
        Zs = [tuple(y for y, i in zip(blocks, idx) if i) for idx in np.ndindex(*(2,) * len(blocks))]
    Zs = [site_set(Z) for Z in Zs]
    zidx = [tuple(1 if y in Z else 0 for y in blocks) for Z in Zs]
    columns = pmap(system.jacobian_column, Ws, threads)
    entries = {}
    for W, col in zip(Ws, columns):
        for Z, idx in zip(Zs, zidx):
            entries[(Z, W)] = float(col[idx])
    return JacobianTable(entries, w_supports=Ws)


def jacobian_fd(J, kernel, blocking, Z, W, step: float = 1e-4, **caps) -> float:
    """Central finite difference of J'(Z) in the coupling on W."""
    if not step > 0:
        raise DomainError("finite-difference step must be positive")
    W = site_set(W)
    plus = ExactSystem(J.with_coupling(W, step), kernel, blocking, **caps).couplings()
    minus = ExactSystem(J.with_coupling(W, -step), kernel, blocking, **caps).couplings()
    return (plus.get(Z) - minus.get(Z)) / (2.0 * step)


def apply_linearization(jac: Mapping, kdir: Mapping, Z) -> float:
    """L(J)K(Z) = sum_W dJ'(Z)/dJ(W) K(W) over the direction's support."""
    Z = site_set(Z)
    total = 0.0
    for W, k in kdir.items():
        try:
            total += jac[(Z, W)] * k
        except KeyError:
            raise CoverageError(f"Jacobian has no entry for Z={Z}, W={W}") from None
    return total
