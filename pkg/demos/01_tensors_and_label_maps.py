#!/usr/bin/env python3
"""File formats walkthrough: label-map PNGs and AFT1 tensors.

Creates a tiny label map, saves it as a paletted PNG, round-trips a float
tensor through the AFT1 container, and dissects the resulting bytes.
"""

import os

import numpy as np

from affinity_lab import LabelMap, load_label_map, load_tensor, save_label_map, save_tensor

OUT = os.path.join(os.path.dirname(__file__), "out")
os.makedirs(OUT, exist_ok=True)

print("=== label maps ===")
labels = LabelMap(np.array([
    [0, 0, 1, 1],
    [0, 0, 1, 1],
    [2, 2, 255, 1],
    [2, 2, 2, 2],
], dtype=np.uint8))
png = os.path.join(OUT, "tiny_labels.png")
save_label_map(labels, png)
back = load_label_map(png)
print(f"wrote {png}")
print("round-tripped data:\n", back.data)
print("255 marks unlabeled pixels; they are excluded from affinity, loss,")
print("and metrics everywhere downstream.")

print()
print("=== AFT1 tensors ===")
t = np.arange(12, dtype=np.float32).reshape(3, 4) / 10
aft = os.path.join(OUT, "demo.aft")
save_tensor(t, aft)
blob = open(aft, "rb").read()
print(f"wrote {aft} ({len(blob)} bytes)")
print("magic:      ", blob[:4])
print("dtype code: ", blob[4], "(1 = float32)")
print("ndim:       ", blob[5])
print("extents:    ", np.frombuffer(blob[16:32], dtype='<u4'))
print("payload ok: ", np.array_equal(load_tensor(aft), t))
