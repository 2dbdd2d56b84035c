"""Clipping, Gaussian noising, and sensitivity bookkeeping.

All functions are stateless; randomness comes in through an explicit
generator so every noise draw is replayable.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import ConfigError
from .numerics import l2_norm

CLIP_FIXED = "fixed"
CLIP_MEDIAN = "median"


@dataclass(frozen=True)
class ClipPolicy:
    """How the per-round clipping threshold C is chosen.

    Median mode resolves C from the current round's honest pre-clip
    norms.  That makes C data dependent, so any privacy statement under
    median mode is nominal; the ledger carries a caveat flag for it.
    """

    mode: str = CLIP_MEDIAN
    c: float | None = None

    def __post_init__(self):
        if self.mode not in (CLIP_FIXED, CLIP_MEDIAN):
            raise ConfigError(f"unknown clip mode {self.mode!r}", field="clip.mode")
        if self.mode == CLIP_FIXED and (self.c is None or self.c <= 0):
            raise ConfigError("fixed clipping requires C > 0", field="clip.c")


@dataclass(frozen=True)
class NoiseSpec:
    """Gaussian noise scaled to the clipped-update sensitivity.

    Each client perturbs every coordinate with N(0, sigma^2 C^2 / S),
    where S is the number of participating clients per round.
    """

    sigma: float

    def __post_init__(self):
        if self.sigma < 0:
            raise ConfigError("noise multiplier must be >= 0", field="noise.sigma")

    def per_coord_std(self, c: float, s: int) -> float:
        return self.sigma * c / math.sqrt(s)


def clip(delta: np.ndarray, c: float) -> np.ndarray:
    """Rescale ``delta`` to norm at most ``c``, preserving direction.

    Vectors already inside the ball pass through bit-identically.  The
    no-op branch tolerates one part in 1e15, so re-clipping an already
    clipped vector is exactly the identity even though rounding can
    leave its measured norm a few ulps above ``c``.
    """
    if c <= 0:
        raise ConfigError("clipping threshold must be > 0")
    norm = l2_norm(delta)
    if norm <= c * (1.0 + 1e-15):
        return delta.copy()
    return delta * (c / norm)


def add_noise(delta: np.ndarray, spec: NoiseSpec, c: float, s: int,
              rng: np.random.Generator) -> np.ndarray:
    """Add per-coordinate N(0, sigma^2 C^2 / S) noise; sigma = 0 is the identity."""
    if s < 1:
        raise ConfigError("need at least one participating client")
    if spec.sigma == 0.0:
        return delta.copy()
    return delta + spec.per_coord_std(c, s) * rng.standard_normal(delta.shape[0])


def resolve_clip_threshold(preclip_norms, policy: ClipPolicy) -> float:
    """Per-round C: the configured constant, or the lower median of the norms.

    Even-length lists take the lower of the two middle values, so the
    resolved threshold is always one actually attained by an update.
    """
    if policy.mode == CLIP_FIXED:
        return float(policy.c)
    norms = sorted(float(x) for x in preclip_norms)
    if not norms:
        raise ConfigError("median clipping needs a non-empty norm list")
    return norms[(len(norms) - 1) // 2]


def sensitivity(c: float, s: int) -> float:
    """Worst-case aggregate change when one client joins or leaves: C / S."""
    if c <= 0 or s < 1:
        raise ConfigError("need C > 0 and S >= 1")
    return c / s
