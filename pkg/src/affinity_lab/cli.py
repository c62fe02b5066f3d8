"""Command-line front end wiring the library into file-based pipelines.

Subcommands: synth, gen-affinity, stats, loss, refine, eval, affinity-acc.
Exit codes: 0 success, 1 usage error, 2 data error (malformed or missing
files). Results go to stdout (one value, or CSV); diagnostics to stderr.
Numeric defaults follow the reference experiment configuration
(gamma 2, lambda 6, mu 7, beta 1.2, rates "8,(12,24),16").
"""

from __future__ import annotations

import argparse
import os
import sys

import numpy as np

from . import affinity_core, metrics, propagation, synth, tensor_io
from .affinity_loss import (
    SCHEMES,
    LossConfig,
    affinity_loss,
    affinity_loss_grad,
    build_weight_table,
)
from .tensor_io import atomic_write_bytes

DEFAULT_RATES = "8,(12,24),16"


class _Parser(argparse.ArgumentParser):
    """argparse variant that reports usage errors with exit code 1."""

    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(1, f"{self.prog}: error: {message}\n")


def _thread_count(args) -> int:
    n = args.threads
    if n is None:
        env = os.environ.get("AFFINITY_LAB_THREADS")
        n = int(env) if env else 1
    if n < 1:
        raise ValueError("--threads must be >= 1")
    return n


def _load_rates(args) -> affinity_core.RateSet:
    return affinity_core.expand_rate_set(args.rates)


def _load_probs(path: str) -> np.ndarray:
    t = tensor_io.load_tensor(path)
    if t.ndim != 3 or t.dtype != np.float32:
        raise ValueError(f"{path}: expected a float32 [C, H, W] tensor")
    return propagation.validate_probability_map(t.astype(np.float64))


def _load_affinity_values(path: str, rates, shape_hw) -> np.ndarray:
    t = tensor_io.load_tensor(path)
    expected = (rates.n_channels,) + tuple(shape_hw)
    if t.shape != expected:
        raise ValueError(f"{path}: expected shape {expected}, got {t.shape}")
    return t.astype(np.float64)


def _cmd_synth(args) -> int:
    cfg = synth.SynthConfig(
        seed=args.seed, height=args.height, width=args.width,
        num_classes=args.classes, num_cells=args.cells,
        boundary_blur_radius=args.blur_radius, flip_rate=args.flip_rate,
        temperature=args.temperature,
    )
    labels = synth.gen_voronoi_labels(cfg)
    probs = synth.corrupt_predictions(labels, cfg)
    tensor_io.save_label_map(labels, args.out_labels)
    tensor_io.save_tensor(probs.astype(np.float32), args.out_probs)
    return 0


def _cmd_gen_affinity(args) -> int:
    labels = tensor_io.load_label_map(args.labels)
    rates = _load_rates(args)
    gt = affinity_core.ground_truth_affinity(labels, rates)
    tensor_io.save_tensor(gt.values, args.out_values)
    if args.out_valid:
        tensor_io.save_tensor(gt.valid.astype(np.uint8), args.out_valid)
    return 0


def _label_files(path: str) -> list[str]:
    if os.path.isdir(path):
        names = sorted(n for n in os.listdir(path) if n.lower().endswith(".png"))
        if not names:
            raise ValueError(f"{path}: no PNG label maps in directory")
        return [os.path.join(path, n) for n in names]
    return [path]


def _cmd_stats(args) -> int:
    rates = _load_rates(args)
    maps = [tensor_io.load_label_map(f) for f in _label_files(args.labels)]
    hist = affinity_core.category_histogram(maps, rates)
    freq = hist.frequencies()
    lines = ["rate_h,rate_w,category,count,frequency"]
    for k, (r1, r2) in enumerate(rates):
        for cat in range(9):
            lines.append(f"{r1},{r2},{cat},{int(hist.counts[k, cat])},"
                         f"{float(freq[k, cat])!r}")
    csv = "\n".join(lines) + "\n"
    if args.out_csv:
        atomic_write_bytes(args.out_csv, csv.encode())
    else:
        sys.stdout.write(csv)
    return 0


def _cmd_loss(args) -> int:
    labels = tensor_io.load_label_map(args.labels)
    rates = _load_rates(args)
    gt = affinity_core.ground_truth_affinity(labels, rates)
    vals = _load_affinity_values(args.logits, rates, labels.data.shape)
    logits = affinity_core.AffinityField(values=vals, valid=gt.valid)
    hist = affinity_core.category_histogram(labels, rates)
    table = build_weight_table(hist, args.scheme)
    cfg = LossConfig(gamma=args.gamma, beta=args.beta,
                                   scheme=args.scheme)
    value = affinity_loss(logits, gt, table, cfg)
    print(f"{value:.12g}")
    if args.out_grad:
        grad = affinity_loss_grad(logits, gt, table, cfg)
        tensor_io.save_tensor(grad.astype(np.float32), args.out_grad)
    return 0


def _cmd_refine(args) -> int:
    probs = _load_probs(args.probs)
    rates = _load_rates(args)
    values = _load_affinity_values(args.affinity, rates, probs.shape[1:])
    if args.valid:
        v = tensor_io.load_tensor(args.valid)
        if v.shape != values.shape:
            raise ValueError(f"{args.valid}: validity shape {v.shape} does "
                             f"not match affinity {values.shape}")
        valid = v.astype(bool)
    else:
        valid = affinity_core.grid_validity(probs.shape[1], probs.shape[2], rates)
    field = affinity_core.AffinityField(values=values, valid=valid)
    mode = ("binary_gt" if args.mode == "gt" else "logits_steep_sigmoid")
    cfg = propagation.PropagationConfig(
        lam=args.lam, mu=args.mu, iterations=args.iters,
        affinity_mode=mode, symmetrize=args.symmetrize,
    )
    refined = propagation.propagate(probs, field, rates, cfg)
    tensor_io.save_tensor(refined.astype(np.float32), args.out)
    if args.gt:
        gt_map = tensor_io.load_label_map(args.gt)
        pred = np.argmax(refined, axis=0).astype(np.int64)
        score = metrics.miou(pred, gt_map, num_classes=refined.shape[0])
        print(f"{score:.12g}")
    return 0


def _cmd_eval(args) -> int:
    gt_map = tensor_io.load_label_map(args.gt)
    if args.pred.lower().endswith(".png"):
        pred = tensor_io.load_label_map(args.pred).data.astype(np.int64)
    else:
        probs = _load_probs(args.pred)
        pred = np.argmax(probs, axis=0).astype(np.int64)
    if args.classes is not None:
        num_classes = args.classes
    else:
        keep = gt_map.data != gt_map.ignore_value
        observed = int(pred.max())
        if keep.any():
            observed = max(observed, int(gt_map.data[keep].max()))
        num_classes = observed + 1
    score = metrics.miou(pred, gt_map, num_classes=num_classes)
    print(f"{score:.12g}")
    return 0


def _cmd_affinity_acc(args) -> int:
    labels = tensor_io.load_label_map(args.labels)
    rates = _load_rates(args)
    gt = affinity_core.ground_truth_affinity(labels, rates)
    vals = _load_affinity_values(args.pred, rates, labels.data.shape)
    pred = affinity_core.AffinityField(values=vals, valid=gt.valid)
    cats = np.stack([affinity_core.neighbor_category(gt, k)
                     for k in range(len(rates))])
    table = metrics.affinity_accuracy(pred, gt, cats, rates)
    csv = table.to_csv()
    if args.out_csv:
        atomic_write_bytes(args.out_csv, csv.encode())
    else:
        sys.stdout.write(csv)
    return 0


def build_parser() -> argparse.ArgumentParser:
    p = _Parser(prog="affinity-lab",
                description="Dilated pixel affinity toolkit")
    p.add_argument("--threads", type=int, default=None,
                   help="internal parallelism hint (outputs never depend on it; "
                        "falls back to AFFINITY_LAB_THREADS)")
    sub = p.add_subparsers(dest="command", required=True)

    sp = sub.add_parser("synth", parents=[], help="generate a seeded synthetic "
                        "label map and corrupted probability map")
    sp.add_argument("--seed", type=int, default=0)
    sp.add_argument("--height", type=int, default=64)
    sp.add_argument("--width", type=int, default=64)
    sp.add_argument("--classes", type=int, default=5)
    sp.add_argument("--cells", type=int, default=40)
    sp.add_argument("--blur-radius", type=int, default=2)
    sp.add_argument("--flip-rate", type=float, default=0.08)
    sp.add_argument("--temperature", type=float, default=0.35)
    sp.add_argument("--out-labels", required=True)
    sp.add_argument("--out-probs", required=True)
    sp.set_defaults(func=_cmd_synth)

    ga = sub.add_parser("gen-affinity",
                        help="derive binary ground-truth affinity from labels")
    ga.add_argument("--labels", required=True)
    ga.add_argument("--rates", default=DEFAULT_RATES)
    ga.add_argument("--out-values", required=True)
    ga.add_argument("--out-valid", default=None)
    ga.set_defaults(func=_cmd_gen_affinity)

    st = sub.add_parser("stats", help="neighbor-category histogram CSV over "
                        "a label map or a directory of label maps")
    st.add_argument("--labels", required=True)
    st.add_argument("--rates", default=DEFAULT_RATES)
    st.add_argument("--out-csv", default=None)
    st.set_defaults(func=_cmd_stats)

    lo = sub.add_parser("loss", help="reweighted focal affinity loss of a "
                        "logit tensor against labels")
    lo.add_argument("--logits", required=True)
    lo.add_argument("--labels", required=True)
    lo.add_argument("--rates", default=DEFAULT_RATES)
    lo.add_argument("--scheme", choices=SCHEMES, default="sqrt")
    lo.add_argument("--gamma", type=float, default=2.0)
    lo.add_argument("--beta", type=float, default=1.2)
    lo.add_argument("--out-grad", default=None)
    lo.set_defaults(func=_cmd_loss)

    rf = sub.add_parser("refine", help="propagate a probability map along "
                        "affinity links")
    rf.add_argument("--probs", required=True)
    rf.add_argument("--affinity", required=True)
    rf.add_argument("--rates", default=DEFAULT_RATES)
    rf.add_argument("--iters", type=int, default=10)
    rf.add_argument("--lam", type=float, default=6.0)
    rf.add_argument("--mu", type=float, default=7.0)
    rf.add_argument("--mode", choices=("logits", "gt"), default="logits")
    rf.add_argument("--valid", default=None)
    rf.add_argument("--symmetrize", action="store_true")
    rf.add_argument("--out", required=True)
    rf.add_argument("--gt", default=None,
                    help="label map; when given, prints the refined mIoU")
    rf.set_defaults(func=_cmd_refine)

    ev = sub.add_parser("eval", help="mIoU of a prediction against labels")
    ev.add_argument("--pred", required=True,
                    help="label-map PNG or float32 probability AFT1")
    ev.add_argument("--gt", required=True)
    ev.add_argument("--classes", type=int, default=None)
    ev.set_defaults(func=_cmd_eval)

    aa = sub.add_parser("affinity-acc", help="per-rate, per-category accuracy "
                        "of predicted affinity probabilities")
    aa.add_argument("--pred", required=True)
    aa.add_argument("--labels", required=True)
    aa.add_argument("--rates", default=DEFAULT_RATES)
    aa.add_argument("--out-csv", default=None)
    aa.set_defaults(func=_cmd_affinity_acc)
    return p


def run(argv: list[str]) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as e:
        return int(e.code or 0)
    try:
        _thread_count(args)
        return args.func(args)
    except (ValueError, OSError) as e:
        print(f"affinity-lab: error: {e}", file=sys.stderr)
        return 2


def main() -> None:
    sys.exit(run(sys.argv[1:]))
