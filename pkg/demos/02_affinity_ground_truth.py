#!/usr/bin/env python3
"""Dilated affinity from first principles.

Shows how a rate-set string expands, which 8 neighbors a rate addresses,
how binary ground-truth affinity is derived from a label map, and how the
neighbor-category distribution shifts as the dilation rate grows.
"""

import numpy as np

from affinity_lab import (
    SynthConfig,
    category_histogram,
    expand_rate_set,
    gen_voronoi_labels,
    ground_truth_affinity,
    neighbor_category,
    neighbor_offsets,
)

print("=== rate-set expansion ===")
spec = "8,(12,24),16"
rates = expand_rate_set(spec)
print(f"{spec!r} expands to {rates.rates}")
print(f"affinity head width: 8 * |R| = {rates.n_channels} channels")
print("offsets for rate (12, 24):")
for d, off in enumerate(neighbor_offsets((12, 24))):
    print(f"  direction {d}: {off}")

print()
print("=== ground truth on a toy map ===")
from affinity_lab import LabelMap

toy = LabelMap(np.array([[0, 1], [0, 1]], dtype=np.uint8))
gt = ground_truth_affinity(toy, expand_rate_set("1"))
print("labels:\n", toy.data)
offs = neighbor_offsets((1, 1))
for d in range(8):
    state = "invalid (off-grid)" if not gt.valid[d, 0, 0] else \
        f"affinity {gt.values[d, 0, 0]:.0f}"
    print(f"pixel (0,0) toward {offs[d]}: {state}")
cats = neighbor_category(gt, 0)
print("neighbor categories (positives among valid directions):\n", cats)

print()
print("=== category statistics vs dilation rate ===")
maps = [
    gen_voronoi_labels(SynthConfig(seed=s, height=64, width=64,
                                   num_classes=5, num_cells=40))
    for s in range(10)
]
sweep = expand_rate_set("1,2,4,8,16,32")
hist = category_histogram(maps, sweep)
freq = hist.frequencies()
header = "rate   " + "".join(f"  n{k}   " for k in range(9))
print(header)
for k, (r1, _) in enumerate(sweep):
    row = "".join(f"{freq[k, c]:7.3f}" for c in range(9))
    print(f"{r1:4d} {row}")
print()
print("n8 (all-same neighborhoods) dominates at rate 1 and collapses as the")
print("ring widens; rare categories are what the loss reweighting targets.")
print("positive-signal frequency per rate:",
      np.round(hist.positive_frequency(), 4))
