"""Seeded synthetic data for desk-scale experiments.

Voronoi-partitioned label maps stand in for real annotations, and
``corrupt_predictions`` turns them into probability maps that look like
network output: softened scores, smeared class boundaries, and isolated
wrong-argmax islands in otherwise correct regions.

Everything is a pure function of :class:`SynthConfig`. Site sampling uses
the sequential xoshiro256** stream; per-pixel corruption decisions use the
stateless counter hash keyed by (seed, stream, pixel index), so the output
never depends on evaluation order. Both constructions are pinned in
docs/PRNG.md.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import rng
from .tensor_io import LabelMap

# counter_hash stream ids (part of the pinned output contract)
_STREAM_FLIP_DECISION = 0
_STREAM_FLIP_CLASS = 1


@dataclass(frozen=True)
class SynthConfig:
    seed: int
    height: int
    width: int
    num_classes: int
    num_cells: int
    boundary_blur_radius: int = 2
    flip_rate: float = 0.08
    temperature: float = 0.35

    def __post_init__(self):
        if self.height < 1 or self.width < 1:
            raise ValueError("height and width must be >= 1")
        if not 1 <= self.num_classes <= 255:
            raise ValueError("num_classes must be in [1, 255]")
        if self.num_cells < 1:
            raise ValueError("num_cells must be >= 1")
        if self.boundary_blur_radius < 0:
            raise ValueError("boundary_blur_radius must be >= 0")
        if not 0.0 <= self.flip_rate < 1.0:
            raise ValueError("flip_rate must lie in [0, 1)")
        if self.temperature <= 0:
            raise ValueError("temperature must be > 0")


def gen_voronoi_labels(cfg: SynthConfig) -> LabelMap:
    """Nearest-site Voronoi partition with class = site index mod C.

    Sites are drawn uniformly with the seeded xoshiro stream (row, then
    column, per site in order). Nearest is squared Euclidean distance;
    ties go to the lowest site index.
    """
    gen = rng.Xoshiro256StarStar(cfg.seed)
    sites = np.empty((cfg.num_cells, 2), dtype=np.int64)
    for k in range(cfg.num_cells):
        sites[k, 0] = gen.next_below(cfg.height)
        sites[k, 1] = gen.next_below(cfg.width)
    site_class = (np.arange(cfg.num_cells) % cfg.num_classes).astype(np.uint8)

    cols = np.arange(cfg.width, dtype=np.int64)
    dj2 = (cols[None, :] - sites[:, 1:2]) ** 2  # [K, W]
    labels = np.empty((cfg.height, cfg.width), dtype=np.uint8)
    # row-chunked so K * chunk * W stays modest for large grids
    chunk = max(1, int(2 ** 24 // max(1, cfg.num_cells * cfg.width)))
    for i0 in range(0, cfg.height, chunk):
        i1 = min(cfg.height, i0 + chunk)
        ii = np.arange(i0, i1, dtype=np.int64)
        di2 = (ii[None, :] - sites[:, 0:1]) ** 2  # [K, chunk]
        d2 = di2[:, :, None] + dj2[:, None, :]  # [K, chunk, W]
        labels[i0:i1] = site_class[np.argmin(d2, axis=0)]
    return LabelMap(data=labels)


def _boundary_mask(lab: np.ndarray) -> np.ndarray:
    """Pixels with a 4-connected neighbor of a different class."""
    b = np.zeros(lab.shape, dtype=bool)
    diff_v = lab[:-1, :] != lab[1:, :]
    b[:-1, :] |= diff_v
    b[1:, :] |= diff_v
    diff_h = lab[:, :-1] != lab[:, 1:]
    b[:, :-1] |= diff_h
    b[:, 1:] |= diff_h
    return b


def _dilate(mask: np.ndarray, radius: int) -> np.ndarray:
    """Chebyshev dilation: OR over all shifts with |di|, |dj| <= radius."""
    if radius == 0:
        return mask.copy()
    h, w = mask.shape
    out = np.zeros_like(mask)
    for di in range(-radius, radius + 1):
        for dj in range(-radius, radius + 1):
            src_i = slice(max(0, di), h + min(0, di))
            dst_i = slice(max(0, -di), h + min(0, -di))
            src_j = slice(max(0, dj), w + min(0, dj))
            dst_j = slice(max(0, -dj), w + min(0, -dj))
            out[dst_i, dst_j] |= mask[src_i, src_j]
    return out


def _box_mean(p: np.ndarray, radius: int) -> np.ndarray:
    """Per-class mean over (2r+1)^2 windows clipped to the grid."""
    _, h, w = p.shape
    integ = np.zeros((p.shape[0], h + 1, w + 1), dtype=np.float64)
    integ[:, 1:, 1:] = np.cumsum(np.cumsum(p, axis=1), axis=2)
    i = np.arange(h)
    j = np.arange(w)
    i1 = np.clip(i - radius, 0, h)
    i2 = np.clip(i + radius + 1, 0, h)
    j1 = np.clip(j - radius, 0, w)
    j2 = np.clip(j + radius + 1, 0, w)
    s = (integ[:, i2[:, None], j2[None, :]]
         - integ[:, i1[:, None], j2[None, :]]
         - integ[:, i2[:, None], j1[None, :]]
         + integ[:, i1[:, None], j1[None, :]])
    area = (i2 - i1)[:, None] * (j2 - j1)[None, :]
    return s / area[None, :, :]


def corrupt_predictions(labels: LabelMap, cfg: SynthConfig) -> np.ndarray:
    """Emulate network output for a fully-labeled map; returns [C, H, W].

    Corruption order is fixed: temperature softening, boundary blur, then
    argmax flips on interior pixels, then renormalization. Flips come last
    so the isolated-noise failure mode survives the blur.
    """
    lab = labels.data
    c = cfg.num_classes
    if int(lab.max()) >= c:
        raise ValueError("label map contains classes >= num_classes "
                         "(corruption needs a fully-labeled map)")
    h, w = lab.shape

    # temperature softening of the one-hot encoding
    if c == 1:
        p = np.ones((1, h, w), dtype=np.float64)
    else:
        off = float(np.exp(-1.0 / cfg.temperature))
        denom = 1.0 + (c - 1) * off
        p = np.full((c, h, w), off / denom, dtype=np.float64)
        p[lab, np.arange(h)[:, None], np.arange(w)[None, :]] = 1.0 / denom

    boundary = _boundary_mask(lab)
    zone = _dilate(boundary, cfg.boundary_blur_radius)
    if cfg.boundary_blur_radius > 0 and zone.any():
        blurred = _box_mean(p, cfg.boundary_blur_radius)
        p[:, zone] = blurred[:, zone]

    interior = ~zone
    if cfg.flip_rate > 0.0 and c >= 2 and interior.any():
        idx = np.arange(h * w, dtype=np.uint64)
        u = rng.to_unit(rng.counter_hash(cfg.seed, _STREAM_FLIP_DECISION, idx))
        flip = interior & (u.reshape(h, w) < cfg.flip_rate)
        if flip.any():
            draw = rng.bounded(
                rng.counter_hash(cfg.seed, _STREAM_FLIP_CLASS, idx), c - 1
            ).reshape(h, w)
            cur = lab.astype(np.int64)
            other = draw + (draw >= cur)
            fi, fj = np.nonzero(flip)
            c_cur = cur[fi, fj]
            c_new = other[fi, fj]
            tmp = p[c_cur, fi, fj].copy()
            p[c_cur, fi, fj] = p[c_new, fi, fj]
            p[c_new, fi, fj] = tmp

    p /= p.sum(axis=0, keepdims=True)
    return p
