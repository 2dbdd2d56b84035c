"""Flatness and update-norm diagnostics.

Landscape slices follow the filter-normalized random-direction recipe:
Gaussian directions rescaled per parameter block to the block norm of
the probed point, with the second direction orthogonalized against the
first inside every block.  Norm reports histogram pre-clip update norms
on bin edges shared across the runs being compared.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from . import models
from .data import DataBatch
from .errors import ConfigError
from .numerics import l2_norm


@dataclass(frozen=True)
class GridSpec:
    lim: float = 1.0
    resolution: int = 41

    def __post_init__(self):
        if self.resolution < 3:
            raise ConfigError("grid resolution must be >= 3", field="probes.resolution")
        if self.lim <= 0:
            raise ConfigError("grid limit must be > 0", field="probes.lim")

    def offsets(self) -> np.ndarray:
        return np.linspace(-self.lim, self.lim, self.resolution)


@dataclass(frozen=True)
class LandscapeGrid:
    a_offsets: np.ndarray
    b_offsets: np.ndarray
    losses: np.ndarray       # shape (len(a), len(b)); +inf marks blow-ups
    d1: np.ndarray
    d2: np.ndarray | None


@dataclass(frozen=True)
class SharpnessProbe:
    grad_norm: float
    max_rise: float


@dataclass(frozen=True)
class NormReport:
    norms: list              # per round: list of floats
    bin_edges: np.ndarray    # 21 edges covering [0, shared max]
    counts: np.ndarray       # (rounds, 20)
    mean: np.ndarray         # per-round means
    median: np.ndarray       # per-round lower medians


def filter_normalized_direction(x: np.ndarray, blocks, rng) -> np.ndarray:
    """Gaussian direction rescaled blockwise to match the norms of ``x``."""
    d = rng.standard_normal(x.shape[0])
    for _, sl in blocks:
        target = l2_norm(x[sl])
        norm = l2_norm(d[sl])
        d[sl] = 0.0 if (norm == 0.0 or target == 0.0) else d[sl] * (target / norm)
    return d


def direction_pair(x: np.ndarray, blocks, rng) -> tuple[np.ndarray, np.ndarray]:
    """Two filter-normalized directions, orthogonal within every block."""
    d1 = filter_normalized_direction(x, blocks, rng)
    d2 = rng.standard_normal(x.shape[0])
    for _, sl in blocks:
        denom = l2_norm(d1[sl]) ** 2
        if denom > 0.0:
            d2[sl] = d2[sl] - (float(np.dot(d2[sl], d1[sl])) / denom) * d1[sl]
        target = l2_norm(x[sl])
        norm = l2_norm(d2[sl])
        d2[sl] = 0.0 if (norm == 0.0 or target == 0.0) else d2[sl] * (target / norm)
    return d1, d2


def slice_losses(loss_fn, x, d1, d2, a_offsets, b_offsets) -> np.ndarray:
    """Evaluate ``loss_fn`` on the offset grid; non-finite cells become +inf."""
    losses = np.empty((len(a_offsets), len(b_offsets)))
    for i, a in enumerate(a_offsets):
        for j, b in enumerate(b_offsets):
            point = x + a * d1 if d2 is None else x + a * d1 + b * d2
            try:
                val = loss_fn(point)
            except ArithmeticError:
                val = math.inf
            losses[i, j] = val if math.isfinite(val) else math.inf
    return losses


def landscape_slice(model, x, batch, grid: GridSpec, rng,
                    directions: int = 2) -> LandscapeGrid:
    """Loss surface around ``x`` along one or two random directions.

    The evaluation batch stays fixed across all grid cells so that the
    slice reflects parameter-space geometry only.
    """
    if directions not in (1, 2):
        raise ConfigError("directions must be 1 or 2")
    blocks = model.blocks()
    if directions == 1:
        d1 = filter_normalized_direction(x, blocks, rng)
        d2 = None
        b_offsets = np.zeros(1)
    else:
        d1, d2 = direction_pair(x, blocks, rng)
        b_offsets = grid.offsets()
    a_offsets = grid.offsets()

    def loss_fn(point):
        return models.loss_and_grad(model, point, batch)[0]

    losses = slice_losses(loss_fn, x, d1, d2, a_offsets, b_offsets)
    return LandscapeGrid(a_offsets, b_offsets, losses, d1, d2)


def eval_sample(ds, rng, size: int = 512):
    """Fixed evaluation subset used by all probes of one comparison."""
    if ds.n <= size:
        return DataBatch(ds.features, ds.labels)
    idx = np.sort(rng.choice(ds.n, size=size, replace=False))
    return DataBatch(ds.features[idx], ds.labels[idx])


def sharpness_from_fn(loss_and_grad_fn, x, rho_probe: float, rng,
                      n_directions: int = 10) -> SharpnessProbe:
    """Gradient norm at ``x`` plus the worst loss rise over random unit probes."""
    if rho_probe <= 0:
        raise ConfigError("rho_probe must be > 0")
    base, grad = loss_and_grad_fn(x)
    max_rise = -math.inf
    for _ in range(n_directions):
        u = rng.standard_normal(x.shape[0])
        u /= l2_norm(u)
        loss, _ = loss_and_grad_fn(x + rho_probe * u)
        max_rise = max(max_rise, loss - base)
    return SharpnessProbe(l2_norm(grad), max_rise)


def sharpness_proxy(model, x, batch, rho_probe: float, rng,
                    n_directions: int = 10) -> SharpnessProbe:
    """Flatness proxy of a model at ``x`` on a fixed evaluation batch."""
    return sharpness_from_fn(lambda p: models.loss_and_grad(model, p, batch),
                             x, rho_probe, rng, n_directions)


def norm_report(rounds_norms, bin_max: float | None = None) -> NormReport:
    """Histogram per-round pre-clip norms into 20 fixed-width bins.

    Pass the max norm across every run being compared as ``bin_max`` so
    the reports share bit-identical edges.
    """
    if not rounds_norms or any(len(r) == 0 for r in rounds_norms):
        raise ConfigError("norm trace is empty")
    top = bin_max if bin_max is not None else max(max(r) for r in rounds_norms)
    if top <= 0:
        top = 1.0
    edges = np.linspace(0.0, top, 21)
    # Clip so every norm lands in a bin and counts always sum to S.
    counts = np.stack([np.histogram(np.clip(np.asarray(r), 0.0, top), bins=edges)[0]
                       for r in rounds_norms])
    means = np.array([sum(sorted(r)) / len(r) for r in rounds_norms])
    medians = np.array([sorted(r)[(len(r) - 1) // 2] for r in rounds_norms])
    return NormReport([list(map(float, r)) for r in rounds_norms],
                      edges, counts, means, medians)


def shared_norm_reports(traces: dict) -> dict:
    """Reports for several runs on one shared set of bin edges."""
    top = max(max(max(r) for r in t) for t in traces.values())
    return {name: norm_report(t, bin_max=top) for name, t in traces.items()}
