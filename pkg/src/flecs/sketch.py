"""Per-iteration sketching matrices, regenerated identically on every node.

The d-by-m sketch for iteration k is a pure function of (run_seed, k), so the
server and all workers can sample it locally and never transmit it. Streams
are keyed by (run_seed, k) only, never by node id.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass

import numpy as np

logger = logging.getLogger(__name__)

__all__ = ["SketchSpec", "sketch_at", "rank_check", "sample_sketch"]

# Salt constants keep the sketch, compressor, and resample streams disjoint
# while staying derived from the single run seed.
SKETCH_SALT = 101
COMPRESS_SALT = 202
RESAMPLE_SALT = 303

_RANK_RTOL = 1e-10
_MAX_RESAMPLES = 8


@dataclass(frozen=True)
class SketchSpec:
    """Sketch configuration shared by all nodes for one run."""

    m: int
    family: str = "gaussian"
    run_seed: int = 0

    def __post_init__(self) -> None:
        if self.m < 1:
            raise ValueError(f"memory size must be >= 1, got {self.m}")
        if self.family not in ("gaussian", "coordinate"):
            raise ValueError(f"unknown sketch family {self.family!r}")


def _rng_for(spec: SketchSpec, k: int, attempt: int) -> np.random.Generator:
    entropy = [int(spec.run_seed), int(k), SKETCH_SALT]
    if attempt > 0:
        entropy += [RESAMPLE_SALT, attempt]
    return np.random.default_rng(np.random.SeedSequence(entropy))


def sketch_at(spec: SketchSpec, k: int, d: int, attempt: int = 0) -> np.ndarray:
    """Sample the d-by-m sketch for iteration k.

    Deterministic in (run_seed, k, d, m, family, attempt): two calls with
    identical arguments return bit-identical matrices. ``attempt`` > 0 salts
    the stream and is used only when resampling a rank-deficient draw.
    """
    if k < 0:
        raise ValueError(f"iteration index must be >= 0, got {k}")
    if spec.m > d:
        raise ValueError(f"memory size {spec.m} exceeds dimension {d}")
    rng = _rng_for(spec, k, attempt)
    if spec.family == "gaussian":
        return rng.standard_normal((d, spec.m))
    cols = rng.choice(d, size=spec.m, replace=False)
    s = np.zeros((d, spec.m))
    s[cols, np.arange(spec.m)] = 1.0
    return s


def rank_check(s: np.ndarray) -> bool:
    """True iff the numerical rank of S equals its column count."""
    s = np.asarray(s, dtype=float)
    sv = np.linalg.svd(s, compute_uv=False)
    if sv.size == 0:
        return False
    return bool(sv[-1] > _RANK_RTOL * sv[0])


def sample_sketch(spec: SketchSpec, k: int, d: int) -> np.ndarray:
    """Sample the iteration-k sketch, resampling on rank deficiency.

    Resampling uses a salted sub-stream, so all nodes running the same loop
    still agree on the final matrix. Gaussian draws are full rank almost
    surely; this guard exists for misconfigured or degenerate cases.
    """
    for attempt in range(_MAX_RESAMPLES):
        s = sketch_at(spec, k, d, attempt=attempt)
        if rank_check(s):
            if attempt > 0:
                logger.warning(
                    "sketch at iteration %d was rank-deficient; used salted resample %d",
                    k,
                    attempt,
                )
            return s
    raise RuntimeError(
        f"could not draw a full-rank sketch at iteration {k} after {_MAX_RESAMPLES} attempts"
    )
