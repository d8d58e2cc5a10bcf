"""Block-spin probability kernels T(sigma_block, sigma') and their axioms.

Rows of a kernel table enumerate block configurations: bit ``s-1-j`` of the
row index is 1 iff the ``j``-th block site (lexicographic) has spin -1.
Column 0 is ``sigma' = +1``, column 1 is ``sigma' = -1``. Sums over spins
are normalized averages, so decimation takes values in {0, 2}.
"""

from __future__ import annotations

import itertools
import math
import re
from dataclasses import dataclass, field
from pathlib import Path
from typing import Sequence

import numpy as np

from .errors import ConfigError, KernelValidationError

TOL = 1e-12


def block_spin_matrix(s: int) -> np.ndarray:
    """``(2**s, s)`` array of +-1 spins, one row per block configuration."""
    idx = np.arange(2**s)[:, None]
    bits = (idx >> np.arange(s - 1, -1, -1)[None, :]) & 1
    return 1 - 2 * bits


@dataclass(frozen=True, eq=False)
class Kernel:
    block: tuple
    table: np.ndarray = field(repr=False)
    kind: str = "custom"

    def __post_init__(self):
        table = np.asarray(self.table, dtype=np.float64)
        if table.shape != (2**self.s, 2):
            raise ConfigError(f"kernel table must have shape {(2**self.s, 2)}, got {table.shape}")
        table.setflags(write=False)
        object.__setattr__(self, "table", table)

    @property
    def s(self) -> int:
        return math.prod(self.block)

    def __call__(self, sigma_block: Sequence[int], sigma_prime: int) -> float:
        row = 0
        for v in sigma_block:
            row = (row << 1) | (1 if v == -1 else 0)
        return float(self.table[row, 0 if sigma_prime == 1 else 1])


@dataclass
class AxiomCheck:
    name: str
    passed: bool
    worst: float
    witness: str | None = None


@dataclass
class KernelReport:
    kind: str
    checks: list

    @property
    def passed(self) -> bool:
        return all(c.passed for c in self.checks)

    def check(self, name: str) -> AxiomCheck:
        return next(c for c in self.checks if c.name == name)


def _bits(row: int, s: int) -> str:
    return "".join("-" if row >> (s - 1 - j) & 1 else "+" for j in range(s))


def validate(k: Kernel, strict: bool = True, tol: float = TOL) -> KernelReport:
    """Check nonnegativity, flip symmetry, normalization, and equal block-spin marginals.

    With ``strict`` a failing kernel raises :class:`KernelValidationError`
    carrying the report; otherwise the report is returned either way.
    """
    T = k.table
    s = k.s
    n = 2**s
    flip = (n - 1) ^ np.arange(n)
    checks = []

    neg = np.minimum(T, 0.0)
    row = int(np.argmin(neg.min(axis=1)))
    worst = float(abs(neg.min()))
    checks.append(AxiomCheck("nonnegative", worst <= 0.0, worst, None if worst <= 0 else _bits(row, s)))

    sym = np.abs(T - T[flip][:, ::-1])
    row = int(np.argmax(sym.max(axis=1)))
    worst = float(sym.max())
    checks.append(AxiomCheck("symmetry", worst <= tol, worst, None if worst <= tol else _bits(row, s)))

    nrm = np.abs(T[:, 0] + T[:, 1] - 2.0) / 2.0
    row = int(np.argmax(nrm))
    worst = float(nrm.max())
    checks.append(AxiomCheck("normalization", worst <= tol, worst, None if worst <= tol else _bits(row, s)))

    marg = np.abs(T.sum(axis=0) - n) / n
    worst = float(marg.max())
    col = "+1" if marg[0] >= marg[1] else "-1"
    checks.append(AxiomCheck("block_marginal", worst <= tol, worst, None if worst <= tol else f"sigma'={col}"))

    report = KernelReport(k.kind, checks)
    if strict and not report.passed:
        failed = [c for c in checks if not c.passed]
        detail = ", ".join(f"{c.name} (worst {c.worst:g} at {c.witness})" for c in failed)
        raise KernelValidationError(f"kernel {k.kind!r} rejected: {detail}", report)
    return report


def _position(block: tuple, offset) -> int:
    if isinstance(offset, int):
        offset = (offset,)
    offset = tuple(int(o) for o in offset)
    if len(offset) != len(block) or any(not 0 <= o < b for o, b in zip(offset, block)):
        raise ConfigError(f"offset {offset} lies outside block {block}")
    positions = list(itertools.product(*(range(b) for b in block)))
    return positions.index(offset)


def decimation(block: Sequence[int], offset=0) -> Kernel:
    """Kernel copying the spin at ``offset`` (in-block coordinates) to the block spin."""
    block = tuple(block)
    p = _position(block, offset)
    spins = block_spin_matrix(math.prod(block))[:, p]
    table = np.stack([1 + spins, 1 - spins], axis=1)
    return Kernel(block, table, kind=f"decimation@{p}")


def majority(block: Sequence[int]) -> Kernel:
    block = tuple(block)
    s = math.prod(block)
    if s % 2 == 0:
        raise ConfigError(f"majority rule needs odd block cardinality, got s={s}")
    sign = np.sign(block_spin_matrix(s).sum(axis=1))
    table = np.stack([1 + sign, 1 - sign], axis=1)
    return Kernel(block, table, kind="majority")


def constant(block: Sequence[int]) -> Kernel:
    block = tuple(block)
    return Kernel(block, np.ones((2 ** math.prod(block), 2)), kind="constant")


def _parse_bits(tok: str, s: int) -> int | None:
    if len(tok) != s or not re.fullmatch(r"[+\-]+|[01]+", tok):
        return None
    row = 0
    for ch in tok:
        row = (row << 1) | (1 if ch in "-0" else 0)
    return row


def load_custom(path, block: Sequence[int]) -> Kernel:
    """Read a kernel table: one row per block configuration ``bits, T(+1), T(-1)``.

    Bits are written in in-block site order as ``+``/``-`` or ``1``/``0``
    (``1`` meaning spin +1). Comment lines start with ``#``; one header line
    is tolerated.
    """
    block = tuple(block)
    s = math.prod(block)
    table = np.full((2**s, 2), np.nan)
    for lineno, line in enumerate(Path(path).read_text().splitlines(), 1):
        line = line.strip()
        if not line or line.startswith("#"):
            continue
        toks = [t for t in re.split(r"[,\t; ]+", line) if t]
        row = _parse_bits(toks[0], s) if toks else None
        if row is None:
            if lineno == 1 or all(np.isnan(table).ravel()):
                continue
            raise ConfigError(f"{path}:{lineno}: cannot parse block configuration {toks[:1]}")
        if len(toks) != 3:
            raise ConfigError(f"{path}:{lineno}: expected 3 fields")
        if not np.isnan(table[row]).all():
            raise ConfigError(f"{path}:{lineno}: configuration {toks[0]} repeated")
        table[row] = [float(toks[1]), float(toks[2])]
    if np.isnan(table).any():
        raise ConfigError(f"{path}: table does not cover all {2**s} block configurations")
    return Kernel(block, table, kind="custom")
