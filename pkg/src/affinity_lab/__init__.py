"""Dilated pixel affinity toolkit.

Derive sparse pairwise-affinity ground truth from label maps, evaluate the
reweighted focal affinity loss (with analytic gradients, as a reference
for training frameworks), and refine class-probability maps by propagating
confident predictions along positive-affinity links.

Modules:
    tensor_io      label-map PNGs and the AFT1 binary tensor format
    affinity_core  rate sets, dilated neighbor offsets, ground-truth
                   affinity, neighbor-category statistics
    affinity_loss  focal loss, weighting schemes, loss value and gradient
    propagation    steep sigmoid and iterative refinement
    metrics        mIoU and per-category affinity accuracy
    synth          seeded Voronoi label maps and corrupted predictions
    rng            pinned bit-exact random primitives (see docs/PRNG.md)
    cli            the ``affinity-lab`` command-line front end
"""

from .affinity_core import (
    AffinityField,
    CategoryHistogram,
    RateSet,
    UNCOUNTED,
    category_histogram,
    expand_rate_set,
    grid_validity,
    ground_truth_affinity,
    neighbor_category,
    neighbor_offsets,
)
from .affinity_loss import (
    LossConfig,
    WeightTable,
    affinity_loss,
    affinity_loss_grad,
    bias_init,
    build_weight_table,
    focal_loss,
)
from .metrics import affinity_accuracy, confusion_matrix, miou
from .propagation import (
    PropagationConfig,
    propagate,
    refine_step,
    steep_sigmoid,
    validate_probability_map,
)
from .synth import SynthConfig, corrupt_predictions, gen_voronoi_labels
from .tensor_io import (
    IGNORE_VALUE,
    LabelMap,
    load_label_map,
    load_tensor,
    save_label_map,
    save_tensor,
)

__version__ = "0.1.0"

__all__ = [
    "AffinityField",
    "CategoryHistogram",
    "IGNORE_VALUE",
    "LabelMap",
    "LossConfig",
    "PropagationConfig",
    "RateSet",
    "SynthConfig",
    "UNCOUNTED",
    "WeightTable",
    "affinity_accuracy",
    "affinity_loss",
    "affinity_loss_grad",
    "bias_init",
    "build_weight_table",
    "category_histogram",
    "confusion_matrix",
    "corrupt_predictions",
    "expand_rate_set",
    "focal_loss",
    "gen_voronoi_labels",
    "grid_validity",
    "ground_truth_affinity",
    "load_label_map",
    "load_tensor",
    "miou",
    "neighbor_category",
    "neighbor_offsets",
    "propagate",
    "refine_step",
    "save_label_map",
    "save_tensor",
    "steep_sigmoid",
    "validate_probability_map",
]
