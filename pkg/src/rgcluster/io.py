"""Deterministic table and document output.

Tables are tab-separated with one header row and a trailing
``# sha256:<hex>`` line computed over every preceding byte. Floats are
written with ``repr`` so files round-trip exactly.

Set encodings: an original site is its coordinates joined by ``,``; a set is
its sites joined by ``;``. Image sites carry a ``y`` prefix (``y0;y1``). The
empty set is ``{}``.
"""

from __future__ import annotations

import hashlib
import json
import math
from pathlib import Path
from typing import Iterable, Sequence

from .errors import ConfigError
from .lattice import site_set

EMPTY_TOKEN = "{}"


def encode_site(x, prefix: str = "") -> str:
    return prefix + ",".join(str(int(c)) for c in x)


def encode_set(X, image: bool = False) -> str:
    X = site_set(X)
    if not X:
        return EMPTY_TOKEN
    prefix = "y" if image else ""
    return ";".join(encode_site(x, prefix) for x in X)


def decode_set(text: str) -> tuple:
    text = text.strip()
    if text == EMPTY_TOKEN:
        return ()
    out = []
    for tok in text.split(";"):
        tok = tok.strip().lstrip("y")
        try:
            out.append(tuple(int(c) for c in tok.split(",")))
        except ValueError:
            raise ConfigError(f"cannot decode site set {text!r}") from None
    return site_set(out)


def format_value(v) -> str:
    if isinstance(v, bool):
        return "1" if v else "0"
    if isinstance(v, float):
        if math.isnan(v):
            return "nan"
        return repr(v)
    return str(v)


def render_table(header: Sequence[str], rows: Iterable[Sequence]) -> str:
    lines = ["\t".join(header)]
    for row in rows:
        if len(row) != len(header):
            raise ValueError(f"row {row!r} does not match header {header!r}")
        lines.append("\t".join(format_value(v) for v in row))
    body = "\n".join(lines) + "\n"
    return body + f"# sha256:{hashlib.sha256(body.encode()).hexdigest()}\n"


def write_table(path, header: Sequence[str], rows: Iterable[Sequence]) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(render_table(header, rows))
    return path


def read_table(path) -> tuple:
    """Return ``(header, rows)`` after verifying the checksum; cells stay strings."""
    text = Path(path).read_text()
    body, sep, tail = text.rpartition("# sha256:")
    if not sep:
        raise ConfigError(f"{path}: missing checksum line")
    if hashlib.sha256(body.encode()).hexdigest() != tail.strip():
        raise ConfigError(f"{path}: checksum mismatch")
    lines = body.rstrip("\n").split("\n")
    header = lines[0].split("\t")
    return header, [line.split("\t") for line in lines[1:]]


def _jsonable(obj):
    if isinstance(obj, dict):
        return {str(k): _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, float) and not math.isfinite(obj):
        return str(obj)
    if hasattr(obj, "item"):  # numpy scalar
        return _jsonable(obj.item())
    return obj


def write_json(path, obj) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(json.dumps(_jsonable(obj), indent=2, sort_keys=True) + "\n")
    return path
