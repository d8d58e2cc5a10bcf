"""Experiment configuration (YAML or JSON) and the objects it describes."""

from __future__ import annotations

import json
import math
from pathlib import Path
from typing import Literal

import yaml
from pydantic import BaseModel, ConfigDict, Field, ValidationError, field_validator, model_validator

from . import kernels
from .errors import ConfigError
from .exact import MAX_IMAGE_SITES, MAX_SITES
from .interaction import Direction, Interaction, generate_translation_invariant, norm_r
from .lattice import Blocking, site_set


class _Strict(BaseModel):
    model_config = ConfigDict(extra="forbid")


class KernelSpec(_Strict):
    kind: Literal["decimation", "majority", "constant", "custom"] = "decimation"
    offset: list[int] | None = None
    path: str | None = None

    @model_validator(mode="after")
    def _need_path(self):
        if self.kind == "custom" and not self.path:
            raise ValueError("custom kernel needs 'path'")
        return self


class Generator(_Strict):
    shape: list[list[int]]
    value: float


class Coupling(_Strict):
    sites: list[list[int]]
    value: float


class CouplingSpec(_Strict):
    generators: list[Generator] = Field(default_factory=list)
    explicit: list[Coupling] = Field(default_factory=list)
    range_cap: int | None = None


class Caps(_Strict):
    n_max: int = 6
    q_cap: int = 8
    p_max: int = 4
    guard: int = 10**7
    max_sites: int = MAX_SITES
    max_image_sites: int = MAX_IMAGE_SITES

    @field_validator("*")
    @classmethod
    def _positive(cls, v):
        if v < 1:
            raise ValueError("caps must be positive")
        return v


class JacobianSpec(_Strict):
    w_max: int = 2
    z_max: int = 2
    fd_step: float = 1e-4


class BandSpec(_Strict):
    P: float = 8.0
    Q: float = 8.0
    Kc: float = 8.0


class BoundsSpec(_Strict):
    n_terms: int = 20
    P_values: list[float] = Field(default_factory=lambda: [2.0, 4.0, 6.0, 8.0])
    alpha: float = 0.25
    beta: float = 0.5
    l_values: list[float] = Field(default_factory=lambda: [float(2**k) for k in range(1, 21)])


class LinearizeSpec(_Strict):
    direction: str | None = None
    alpha: float = 0.25


class ExperimentConfig(_Strict):
    """One run: lattice, kernel, couplings, bound parameters and caps."""

    dimension: int = 1
    window: list[int]
    block: list[int]
    boundary: Literal["free", "periodic"] = "free"
    kernel: KernelSpec = Field(default_factory=KernelSpec)
    couplings: CouplingSpec = Field(default_factory=CouplingSpec)
    r: float = 1.0
    M: float = 2.0
    caps: Caps = Field(default_factory=Caps)
    jacobian: JacobianSpec = Field(default_factory=JacobianSpec)
    band: BandSpec = Field(default_factory=BandSpec)
    bounds: BoundsSpec = Field(default_factory=BoundsSpec)
    linearize: LinearizeSpec = Field(default_factory=LinearizeSpec)
    expand_orders: list[int] = Field(default_factory=lambda: [1, 2, 3, 4])
    out: str = "out"
    seed: int = 0
    base_dir: str = Field(default=".", exclude=True)

    @model_validator(mode="after")
    def _check(self):
        if len(self.window) != self.dimension or len(self.block) != self.dimension:
            raise ValueError("window and block must have one extent per dimension")
        if any(b < 1 or w % b for w, b in zip(self.window, self.block)):
            raise ValueError(f"block {self.block} does not divide window {self.window}")
        if not self.r > 0:
            raise ValueError("r must be positive")
        if not 1 < self.M < math.exp(self.r):
            raise ValueError(f"M={self.M} must lie in (1, e^r)")
        return self

    def resolve(self, p: str) -> Path:
        path = Path(p)
        return path if path.is_absolute() else Path(self.base_dir) / path

    def blocking(self) -> Blocking:
        return Blocking(self.window, self.block)

    def make_kernel(self) -> kernels.Kernel:
        k = self.kernel
        if k.kind == "decimation":
            return kernels.decimation(self.block, tuple(k.offset) if k.offset else (0,) * self.dimension)
        if k.kind == "majority":
            return kernels.majority(self.block)
        if k.kind == "constant":
            return kernels.constant(self.block)
        return kernels.load_custom(self.resolve(k.path), self.block)

    def shapes(self) -> list:
        return [site_set(g.shape) for g in self.couplings.generators]

    def interaction(self) -> Interaction:
        b = self.blocking()
        c = self.couplings
        J = generate_translation_invariant(
            self.shapes(),
            [g.value for g in c.generators],
            b,
            range_cap=c.range_cap,
            periodic=self.boundary == "periodic",
        )
        if c.explicit:
            J = J + Interaction([(e.sites, e.value) for e in c.explicit], blocking=b)
        return J

    def norm(self) -> float:
        return norm_r(self.interaction(), self.r)

    def direction(self) -> Direction:
        if not self.linearize.direction:
            raise ConfigError("linearize needs 'linearize.direction'")
        return load_direction(self.resolve(self.linearize.direction), self.blocking())

    def echo(self) -> dict:
        return self.model_dump(mode="json")


def load_direction(path, blocking: Blocking | None = None) -> Direction:
    """Direction file: one ``sites<TAB>value`` row per entry, sites in the table encoding."""
    from .io import decode_set

    entries = []
    for lineno, line in enumerate(Path(path).read_text().splitlines(), 1):
        line = line.strip()
        if not line or line.startswith("#"):
            continue
        toks = line.split()
        if len(toks) != 2:
            raise ConfigError(f"{path}:{lineno}: expected 'sites value'")
        try:
            value = float(toks[1])
        except ValueError:
            if lineno == 1:
                continue  # header
            raise ConfigError(f"{path}:{lineno}: bad value {toks[1]!r}") from None
        entries.append((decode_set(toks[0]), value))
    return Direction(entries, blocking=blocking)


def load_config(path) -> ExperimentConfig:
    path = Path(path)
    try:
        text = path.read_text()
    except OSError as e:
        raise ConfigError(f"cannot read config {path}: {e}") from None
    try:
        data = json.loads(text) if path.suffix == ".json" else yaml.safe_load(text)
    except (json.JSONDecodeError, yaml.YAMLError) as e:
        raise ConfigError(f"cannot parse config {path}: {e}") from None
    if not isinstance(data, dict):
        raise ConfigError(f"config {path} must be a mapping")
    return config_from_dict(data, base_dir=path.parent)


def config_from_dict(data: dict, base_dir=".") -> ExperimentConfig:
    try:
        return ExperimentConfig(**data, base_dir=str(base_dir))
    except ValidationError as e:
        raise ConfigError(str(e)) from None
