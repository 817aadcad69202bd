"""Matrix compression operators with bit-exact payload accounting.

Uplink payloads are d-by-m matrices. Four operators are supported:

* ``identity``: no compression, dense 64-bit floats.
* ``top_k``: keep the K largest-magnitude entries of the flattened matrix
  (deterministic, contractive).
* ``rand_k``: keep K uniformly chosen entries scaled by dm/K (unbiased).
* ``dither``: per-column random dithering against the infinity norm with s
  levels (unbiased stochastic rounding).

Bit costs follow fixed encoding formulas (64-bit floats, packed indices and
level codes) and are additive over columns and blocks.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field
from typing import Any, Optional

import numpy as np

logger = logging.getLogger(__name__)

__all__ = [
    "CompressorSpec",
    "CompressedBlock",
    "compress",
    "decompress",
    "contraction_delta",
    "bits_identity",
    "bits_sparse",
    "bits_dither",
]

_KINDS = ("identity", "top_k", "rand_k", "dither")


@dataclass(frozen=True)
class CompressorSpec:
    """Compression operator configuration.

    ``k`` is the number of kept entries for top_k/rand_k; ``levels`` is the
    dithering level count s. ``seed`` seeds the private stream used when no
    explicit generator is passed to :func:`compress`.
    """

    kind: str = "identity"
    k: int = 1
    levels: int = 128
    seed: int = 0

    def __post_init__(self) -> None:
        if self.kind not in _KINDS:
            raise ValueError(f"unknown compressor kind {self.kind!r}")
        if self.kind in ("top_k", "rand_k") and self.k < 1:
            raise ValueError(f"k must be >= 1, got {self.k}")
        if self.kind == "dither" and self.levels < 1:
            raise ValueError(f"levels must be >= 1, got {self.levels}")


@dataclass
class CompressedBlock:
    """Encoded payload of one compressed d-by-m matrix."""

    kind: str
    shape: tuple[int, int]
    bit_cost: int
    payload: dict[str, Any] = field(default_factory=dict)


def bits_identity(d: int, m: int) -> int:
    return 64 * d * m


def bits_sparse(k: int, d: int, m: int) -> int:
    """Value plus packed flat index per kept entry."""
    index_bits = math.ceil(math.log2(d * m)) if d * m > 1 else 0
    return k * (64 + index_bits)


def bits_dither(d: int, m: int, levels: int) -> int:
    """Per column: one norm float plus a sign bit and level code per entry."""
    return m * (64 + d * (1 + math.ceil(math.log2(levels + 1))))


def _effective_k(spec: CompressorSpec, size: int) -> int:
    if spec.k > size:
        logger.warning(
            "compressor k=%d exceeds matrix size %d; clamping", spec.k, size
        )
        return size
    return spec.k


def compress(
    spec: CompressorSpec,
    x: np.ndarray,
    rng: Optional[np.random.Generator] = None,
) -> CompressedBlock:
    """Compress a d-by-m matrix into an encoded block.

    ``rng`` drives the randomized operators (rand_k, dither); when omitted, a
    private stream seeded from ``spec.seed`` is used, making repeated calls
    with the same spec and input identical.
    """
    x = np.asarray(x, dtype=float)
    if x.ndim != 2:
        raise ValueError(f"expected a 2-d array, got shape {x.shape}")
    if not np.all(np.isfinite(x)):
        raise ValueError("cannot compress non-finite entries")
    d, m = x.shape

    if spec.kind == "identity":
        return CompressedBlock(
            kind="identity",
            shape=(d, m),
            bit_cost=bits_identity(d, m),
            payload={"dense": x.copy()},
        )

    if spec.kind == "top_k":
        flat = x.ravel()
        k = _effective_k(spec, flat.size)
        # Stable sort on -|x| breaks magnitude ties by lowest flat index.
        order = np.argsort(-np.abs(flat), kind="stable")
        idx = np.sort(order[:k])
        return CompressedBlock(
            kind="top_k",
            shape=(d, m),
            bit_cost=bits_sparse(k, d, m),
            payload={"indices": idx, "values": flat[idx]},
        )

    if rng is None:
        rng = np.random.default_rng(np.random.SeedSequence([spec.seed]))

    if spec.kind == "rand_k":
        flat = x.ravel()
        k = _effective_k(spec, flat.size)
        idx = np.sort(rng.choice(flat.size, size=k, replace=False))
        scale = flat.size / k
        return CompressedBlock(
            kind="rand_k",
            shape=(d, m),
            bit_cost=bits_sparse(k, d, m),
            payload={"indices": idx, "values": scale * flat[idx]},
        )

    # dither: stochastic rounding of s*|x_j|/||x||_inf per column
    s = spec.levels
    norms = np.max(np.abs(x), axis=0)
    signs = np.sign(x).astype(np.int8)
    levels = np.zeros((d, m), dtype=np.int64)
    active = norms > 0.0
    if np.any(active):
        y = s * np.abs(x[:, active]) / norms[active]
        low = np.floor(y)
        frac = y - low
        bump = rng.random(size=y.shape) < frac
        levels[:, active] = (low + bump).astype(np.int64)
    return CompressedBlock(
        kind="dither",
        shape=(d, m),
        bit_cost=bits_dither(d, m, s),
        payload={"norms": norms, "signs": signs, "levels": levels, "s": s},
    )


def decompress(block: CompressedBlock) -> np.ndarray:
    """Deterministic inverse of the payload encoding."""
    d, m = block.shape
    p = block.payload
    try:
        if block.kind == "identity":
            dense = np.asarray(p["dense"], dtype=float)
            if dense.shape != (d, m):
                raise ValueError("dense payload shape mismatch")
            return dense.copy()
        if block.kind in ("top_k", "rand_k"):
            idx = np.asarray(p["indices"])
            vals = np.asarray(p["values"], dtype=float)
            if idx.shape != vals.shape or (idx.size and idx.max() >= d * m):
                raise ValueError("sparse payload indices out of range")
            out = np.zeros(d * m)
            out[idx] = vals
            return out.reshape(d, m)
        if block.kind == "dither":
            norms = np.asarray(p["norms"], dtype=float)
            signs = np.asarray(p["signs"], dtype=float)
            levels = np.asarray(p["levels"], dtype=float)
            s = int(p["s"])
            if norms.shape != (m,) or signs.shape != (d, m) or levels.shape != (d, m):
                raise ValueError("dither payload shape mismatch")
            if levels.min() < 0 or levels.max() > s:
                raise ValueError("dither levels out of range")
            return norms[np.newaxis, :] * signs * levels / s
    except KeyError as exc:
        raise ValueError(f"corrupt payload: missing field {exc}") from exc
    raise ValueError(f"unknown block kind {block.kind!r}")


def contraction_delta(spec: CompressorSpec, d: int, m: int) -> Optional[float]:
    """Contraction constant delta for biased operators.

    The deterministic top_k operator satisfies
    ||C(X) - X||_F^2 <= (1 - delta) ||X||_F^2 with delta = K/(dm); identity has
    delta = 1. Unbiased operators return None (not applicable).
    """
    if spec.kind == "identity":
        return 1.0
    if spec.kind == "top_k":
        return min(spec.k, d * m) / (d * m)
    return None
