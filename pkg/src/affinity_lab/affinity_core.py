"""Dilated-affinity ground truth and neighbor-category statistics.

A dilation rate (r1, r2) defines 8 sparse neighbors of pixel (i, j):
row offsets s in {-r1, 0, r1} crossed with column offsets t in
{-r2, 0, r2}, minus (0, 0). The channel layout is part of the on-disk
contract and must stay bit-stable:

    channel = rate_index * 8 + direction_index

where directions are ordered by s ascending, then t ascending:

    d: 0        1       2       3       4       5       6       7
       (-r1,-r2)(-r1,0) (-r1,r2)(0,-r2) (0,r2)  (r1,-r2)(r1,0)  (r1,r2)

Note direction 7 - d is always the reverse offset of direction d.

An affinity entry is valid iff the neighbor lies inside the grid and
neither endpoint carries the ignore label. Boundary and ignore handling
are therefore explicit masking, never fabricated labels. A pixel's
neighbor category at a rate is the number of positive signals among its
*valid* directions; pixels with no valid direction are uncounted.
"""

from __future__ import annotations

import re
from dataclasses import dataclass
from typing import Iterable, Iterator, Sequence

import numpy as np

from .tensor_io import LabelMap

UNCOUNTED = -1

_ITEM_RE = re.compile(r"\s*(?:(\d+)|\(\s*(\d+)\s*,\s*(\d+)\s*\))\s*")


@dataclass(frozen=True)
class RateSet:
    """Ordered, duplicate-free list of expanded dilation-rate pairs."""

    rates: tuple[tuple[int, int], ...]

    def __post_init__(self):
        if not self.rates:
            raise ValueError("RateSet must contain at least one rate pair")
        seen = set()
        for r1, r2 in self.rates:
            if r1 < 1 or r2 < 1:
                raise ValueError(f"rates must be >= 1, got ({r1},{r2})")
            if (r1, r2) in seen:
                raise ValueError(f"duplicate rate pair ({r1},{r2})")
            seen.add((r1, r2))

    def __len__(self) -> int:
        return len(self.rates)

    def __iter__(self) -> Iterator[tuple[int, int]]:
        return iter(self.rates)

    def __getitem__(self, i: int) -> tuple[int, int]:
        return self.rates[i]

    @property
    def n_channels(self) -> int:
        return 8 * len(self.rates)


def expand_rate_set(spec: str) -> RateSet:
    """Parse a rate-set string like ``"8,(12,24),16"``.

    A scalar n expands to the pair (n, n); a tuple (a, b) with a != b
    expands to both (a, b) and (b, a); (a, a) yields a single pair.
    Input order is preserved and duplicate resulting pairs are an error
    so the channel count stays unambiguous.
    """
    if not isinstance(spec, str) or not spec.strip():
        raise ValueError("empty rate-set spec")
    rates: list[tuple[int, int]] = []
    pos = 0
    while True:
        m = _ITEM_RE.match(spec, pos)
        if not m or m.end() == m.start():
            raise ValueError(f"cannot parse rate-set spec at: {spec[pos:]!r}")
        if m.group(1) is not None:
            n = int(m.group(1))
            rates.append((n, n))
        else:
            a, b = int(m.group(2)), int(m.group(3))
            rates.append((a, b))
            if a != b:
                rates.append((b, a))
        pos = m.end()
        if pos == len(spec):
            break
        if spec[pos] != ",":
            raise ValueError(f"expected ',' at: {spec[pos:]!r}")
        pos += 1
        if pos == len(spec):
            raise ValueError("trailing comma in rate-set spec")
    return RateSet(tuple(rates))


def neighbor_offsets(rate: tuple[int, int]) -> tuple[tuple[int, int], ...]:
    """The 8 offsets of a rate pair in the fixed scan order."""
    r1, r2 = rate
    offs = []
    for s in (-r1, 0, r1):
        for t in (-r2, 0, r2):
            if s == 0 and t == 0:
                continue
            offs.append((s, t))
    return tuple(offs)


@dataclass(frozen=True)
class AffinityField:
    """Per-pixel, per-rate, 8-direction affinity values with validity.

    ``values`` holds binary ground truth, logits, or probabilities
    depending on context; ``valid`` marks entries whose neighbor exists
    and whose endpoints are both labeled. Channel-major layout
    [8*|R|, H, W] matches the AFT1 serialization.
    """

    values: np.ndarray
    valid: np.ndarray

    def __post_init__(self):
        v = np.asarray(self.values)
        m = np.asarray(self.valid)
        if v.ndim != 3 or v.shape[0] % 8 != 0:
            raise ValueError("AffinityField values must be [8*|R|, H, W]")
        if m.shape != v.shape:
            raise ValueError("validity mask shape mismatch")
        if m.dtype != np.bool_:
            m = m.astype(bool)
        object.__setattr__(self, "values", v)
        object.__setattr__(self, "valid", m)

    @property
    def n_rates(self) -> int:
        return self.values.shape[0] // 8

    @property
    def height(self) -> int:
        return self.values.shape[1]

    @property
    def width(self) -> int:
        return self.values.shape[2]


def _shift_slices(s: int, t: int, h: int, w: int):
    """Destination/source index ranges for offset (s, t) within an h x w grid.

    Destination (i, j) covers pixels whose neighbor (i+s, j+t) is in-grid.
    Returns None when no pixel has an in-grid neighbor at this offset.
    """
    i0, i1 = max(0, -s), h - max(0, s)
    j0, j1 = max(0, -t), w - max(0, t)
    if i0 >= i1 or j0 >= j1:
        return None
    dst = (slice(i0, i1), slice(j0, j1))
    src = (slice(i0 + s, i1 + s), slice(j0 + t, j1 + t))
    return dst, src


def grid_validity(height: int, width: int, rates: RateSet) -> np.ndarray:
    """Validity mask from grid bounds alone (no ignore information)."""
    valid = np.zeros((rates.n_channels, height, width), dtype=bool)
    for k, rate in enumerate(rates):
        for d, (s, t) in enumerate(neighbor_offsets(rate)):
            sl = _shift_slices(s, t, height, width)
            if sl is None:
                continue
            dst, _ = sl
            valid[8 * k + d][dst] = True
    return valid


def ground_truth_affinity(labels: LabelMap, rates: RateSet) -> AffinityField:
    """Binary ground-truth affinity: 1 iff the two labels are equal.

    Entries whose neighbor falls outside the grid, or where either
    endpoint is the ignore label, are masked invalid (value 0).
    """
    lab = labels.data
    h, w = lab.shape
    labeled = lab != labels.ignore_value
    values = np.zeros((rates.n_channels, h, w), dtype=np.float32)
    valid = np.zeros((rates.n_channels, h, w), dtype=bool)
    for k, rate in enumerate(rates):
        for d, (s, t) in enumerate(neighbor_offsets(rate)):
            sl = _shift_slices(s, t, h, w)
            if sl is None:
                continue
            dst, src = sl
            c = 8 * k + d
            ok = labeled[dst] & labeled[src]
            valid[c][dst] = ok
            values[c][dst] = (lab[dst] == lab[src]) & ok
    return AffinityField(values=values, valid=valid)


def neighbor_category(gt: AffinityField, rate_index: int) -> np.ndarray:
    """Per-pixel category: positive signals among valid directions.

    Returns an int array [H, W] in {0..8}, with UNCOUNTED (-1) where a
    pixel has no valid direction at this rate (this covers ignore-labeled
    pixels, whose directions are all invalid).
    """
    if not 0 <= rate_index < gt.n_rates:
        raise ValueError(f"rate_index {rate_index} out of range "
                         f"(field has {gt.n_rates} rates)")
    block = slice(8 * rate_index, 8 * rate_index + 8)
    valid_count = gt.valid[block].sum(axis=0)
    positives = np.rint(gt.values[block]).astype(np.int64).sum(axis=0)
    cats = positives.astype(np.int64)
    cats[valid_count == 0] = UNCOUNTED
    return cats


@dataclass(frozen=True)
class CategoryHistogram:
    """Per-rate counts of neighbor categories n0..n8 plus signal tallies.

    ``counts[k, c]`` is the number of counted pixels in category c at rate
    k, aggregated over every map fed in. ``positive_signals`` and
    ``valid_signals`` track individual affinity entries and power the
    signal-reweighting scheme and bias initialization.
    """

    rates: RateSet
    counts: np.ndarray
    positive_signals: np.ndarray
    valid_signals: np.ndarray

    def __post_init__(self):
        n = len(self.rates)
        if self.counts.shape != (n, 9):
            raise ValueError("counts must be [n_rates, 9]")

    def frequencies(self) -> np.ndarray:
        """Category frequencies per rate; all-zero rows where nothing counted."""
        totals = self.counts.sum(axis=1, keepdims=True).astype(np.float64)
        freq = np.zeros_like(self.counts, dtype=np.float64)
        np.divide(self.counts, totals, out=freq, where=totals > 0)
        return freq

    def positive_frequency(self) -> np.ndarray:
        """Fraction of positive signals among valid signals, per rate."""
        out = np.full(len(self.rates), np.nan)
        nz = self.valid_signals > 0
        out[nz] = self.positive_signals[nz] / self.valid_signals[nz]
        return out


def category_histogram(
    labels: LabelMap | Iterable[LabelMap], rates: RateSet
) -> CategoryHistogram:
    """Aggregate neighbor-category counts over one or more label maps.

    Rates at which no pixel is counted (every direction off-grid on every
    map) yield zero counts and zero frequencies rather than an error, so
    statistics can be taken across rates larger than the image.
    """
    maps: Sequence[LabelMap]
    if isinstance(labels, LabelMap):
        maps = [labels]
    else:
        maps = list(labels)
    if not maps:
        raise ValueError("category_histogram: empty input set")
    n = len(rates)
    counts = np.zeros((n, 9), dtype=np.int64)
    pos = np.zeros(n, dtype=np.int64)
    tot = np.zeros(n, dtype=np.int64)
    for lm in maps:
        gt = ground_truth_affinity(lm, rates)
        for k in range(n):
            cats = neighbor_category(gt, k)
            counted = cats[cats != UNCOUNTED]
            counts[k] += np.bincount(counted, minlength=9)[:9]
            block = slice(8 * k, 8 * k + 8)
            tot[k] += int(gt.valid[block].sum())
            pos[k] += int(np.rint(gt.values[block]).astype(np.int64).sum())
    return CategoryHistogram(
        rates=rates, counts=counts, positive_signals=pos, valid_signals=tot
    )
