"""Affinity-guided refinement of class-probability maps.

Each refinement step recomputes every pixel's class vector as

    p_hat = normalize( lam * p * max(p) + sum over valid neighbors a_s * p_s )

where the sum runs over all 8 directions of every dilation rate. The
anchor term keeps confident predictions in place while positive-affinity
neighbors vote with their own class vectors. Iterating the step spreads
confident regions along affinity links.

Updates are synchronous (Jacobi style): one iteration reads only the
previous iterate, so results are independent of any evaluation order.
Predicted affinity logits are first pushed through a steep sigmoid
(base mu instead of e), which forces weak logits toward zero and
compresses differences between strong ones; binary ground-truth affinity
is used as-is.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .affinity_core import AffinityField, RateSet, neighbor_offsets, _shift_slices

AFFINITY_MODES = ("logits_steep_sigmoid", "binary_gt")


@dataclass(frozen=True)
class PropagationConfig:
    lam: float = 6.0
    mu: float = 7.0
    iterations: int = 10
    affinity_mode: str = "logits_steep_sigmoid"
    symmetrize: bool = False

    def __post_init__(self):
        if self.lam <= 0:
            raise ValueError("lam must be > 0")
        if self.mu <= 1:
            raise ValueError("mu must be > 1")
        if self.iterations < 0:
            raise ValueError("iterations must be >= 0")
        if self.affinity_mode not in AFFINITY_MODES:
            raise ValueError(f"unknown affinity_mode {self.affinity_mode!r}")


def steep_sigmoid(x, mu: float = 7.0):
    """mu**x / (1 + mu**x), evaluated in the overflow-safe branch.

    For x >= 0 this is computed as 1 / (1 + mu**(-x)) so mu**(-x) stays in
    (0, 1]; for x < 0 as mu**x / (1 + mu**x). Equals 0.5 at x = 0 and
    satisfies g(x) + g(-x) = 1.
    """
    x = np.asarray(x, dtype=np.float64)
    out = np.empty_like(x)
    pos = x >= 0
    out[pos] = 1.0 / (1.0 + np.power(mu, -x[pos]))
    u = np.power(mu, x[~pos])
    out[~pos] = u / (1.0 + u)
    if out.ndim == 0:
        return float(out)
    return out


def validate_probability_map(p: np.ndarray) -> np.ndarray:
    """Check [C, H, W] layout, entries in [0, 1], pixel sums 1 +- 1e-6."""
    p = np.asarray(p, dtype=np.float64)
    if p.ndim != 3 or p.shape[0] < 1:
        raise ValueError("probability map must be [C, H, W]")
    if np.any(p < 0) or np.any(p > 1):
        raise ValueError("probabilities must lie in [0, 1]")
    sums = p.sum(axis=0)
    if np.any(np.abs(sums - 1.0) > 1e-6):
        raise ValueError("pixel probability vectors must sum to 1 (+- 1e-6)")
    return p


def _check_field(p: np.ndarray, affinity: AffinityField, rates: RateSet) -> None:
    if affinity.values.shape[0] != rates.n_channels:
        raise ValueError(f"affinity has {affinity.values.shape[0]} channels, "
                         f"rate set implies {rates.n_channels}")
    if affinity.values.shape[1:] != p.shape[1:]:
        raise ValueError(f"affinity grid {affinity.values.shape[1:]} does not "
                         f"match probability grid {p.shape[1:]}")


def refine_step(
    p: np.ndarray,
    affinity: AffinityField,
    rates: RateSet,
    cfg: PropagationConfig,
) -> np.ndarray:
    """One synchronous refinement step. ``affinity`` values must be in [0, 1].

    Pixels receiving zero neighbor mass (no valid neighbor, or all
    affinities exactly 0) keep their input vector bitwise, which is what
    normalizing the pure anchor term yields mathematically.
    """
    p = np.asarray(p, dtype=np.float64)
    _check_field(p, affinity, rates)
    h, w = p.shape[1:]
    av = np.where(affinity.valid, np.asarray(affinity.values, dtype=np.float64), 0.0)

    contrib = np.zeros_like(p)
    for k, rate in enumerate(rates):
        for d, (s, t) in enumerate(neighbor_offsets(rate)):
            sl = _shift_slices(s, t, h, w)
            if sl is None:
                continue
            dst, src = sl
            a = av[8 * k + d][dst]
            if cfg.symmetrize:
                a = 0.5 * (a + av[8 * k + (7 - d)][src])
            contrib[(slice(None),) + dst] += a * p[(slice(None),) + src]

    anchor = cfg.lam * p * p.max(axis=0, keepdims=True)
    pre = anchor + contrib
    denom = pre.sum(axis=0, keepdims=True)
    if np.any(denom <= 0):
        raise ValueError("degenerate probability vector: "
                         "pre-normalization sum is not positive")
    out = pre / denom
    untouched = ~contrib.any(axis=0)
    out[:, untouched] = p[:, untouched]
    return out


def propagate(
    p: np.ndarray,
    affinity: AffinityField,
    rates: RateSet,
    cfg: PropagationConfig,
) -> np.ndarray:
    """Map affinity to [0, 1] once, then apply ``cfg.iterations`` steps.

    The affinity stays fixed across iterations; the anchor's max(p) is
    recomputed from the current iterate each step. iterations = 0 returns
    the validated input unchanged.
    """
    p = validate_probability_map(p)
    _check_field(p, affinity, rates)
    if cfg.affinity_mode == "logits_steep_sigmoid":
        mapped = AffinityField(
            values=steep_sigmoid(affinity.values, cfg.mu), valid=affinity.valid
        )
    else:
        vals = np.asarray(affinity.values, dtype=np.float64)
        if np.any(vals < 0) or np.any(vals > 1):
            raise ValueError("binary_gt affinity values must lie in [0, 1]")
        mapped = AffinityField(values=vals, valid=affinity.valid)
    for _ in range(cfg.iterations):
        p = refine_step(p, mapped, rates, cfg)
    return p
