#!/usr/bin/env python3
"""Affinity propagation refining corrupted predictions.

Generates a small corpus of Voronoi label maps, corrupts the one-hot
predictions (softening, boundary blur, isolated flips), then refines with
binary ground-truth affinity and tracks mIoU across iteration checkpoints.
"""

import numpy as np

from affinity_lab import (
    PropagationConfig,
    SynthConfig,
    corrupt_predictions,
    expand_rate_set,
    gen_voronoi_labels,
    ground_truth_affinity,
    miou,
    refine_step,
    steep_sigmoid,
)

print("=== steep sigmoid used on predicted logits ===")
for x in (-2.0, -1.0, 0.0, 0.5, 1.0, 2.0):
    print(f"  g({x:+.1f}) = {steep_sigmoid(x, 7.0):.4f}   "
          f"(plain sigmoid: {1 / (1 + np.exp(-x)):.4f})")
print("weak logits get squashed toward 0/1 harder than with base e.")

print()
print("=== refinement with ground-truth affinity ===")
rates = expand_rate_set("8,(12,24),16")
cfg = PropagationConfig(lam=6.0, iterations=1, affinity_mode="binary_gt")
checkpoints = (0, 1, 3, 6, 10)
scores = []
for seed in range(20):
    scfg = SynthConfig(seed=seed, height=64, width=64, num_classes=5,
                       num_cells=40, boundary_blur_radius=2, flip_rate=0.08,
                       temperature=0.35)
    lab = gen_voronoi_labels(scfg)
    cur = corrupt_predictions(lab, scfg)
    gt = ground_truth_affinity(lab, rates)
    row = {}
    for it in range(11):
        if it in checkpoints:
            pred = np.argmax(cur, axis=0).astype(np.uint8)
            row[it] = miou(pred, lab, num_classes=5)
        if it < 10:
            cur = refine_step(cur, gt, rates, cfg)
    scores.append([row[c] for c in checkpoints])
arr = np.array(scores)

print(f"{'iterations':>12s}" + "".join(f"{c:>9d}" for c in checkpoints))
print(f"{'mean mIoU':>12s}" + "".join(f"{m:9.4f}" for m in arr.mean(axis=0)))
improved = np.count_nonzero(arr[:, -1] > arr[:, 0])
print(f"\nimproved instances: {improved}/{len(scores)}")
print("confident regions vote their neighbors back to the right class, so")
print("isolated flips disappear first and blurred boundaries tighten next.")
