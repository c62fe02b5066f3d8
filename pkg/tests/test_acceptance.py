"""Acceptance suite: one test per release criterion.

Each test prints a single PASS/FAIL line (visible with ``pytest -s`` or on
failure) and enforces the stated tolerance and runtime budget.
"""

import contextlib
import time

import numpy as np
import pytest

from affinity_lab import (
    AffinityField,
    LabelMap,
    LossConfig,
    PropagationConfig,
    RateSet,
    SynthConfig,
    affinity_loss,
    affinity_loss_grad,
    bias_init,
    build_weight_table,
    category_histogram,
    cli,
    corrupt_predictions,
    expand_rate_set,
    gen_voronoi_labels,
    ground_truth_affinity,
    miou,
    propagate,
    refine_step,
    steep_sigmoid,
    tensor_io,
)

from oracles import brute_force_affinity, central_difference_grad, masked_bce


@contextlib.contextmanager
def _criterion(num, desc):
    try:
        yield
    except BaseException:
        print(f"criterion {num}: FAIL - {desc}", flush=True)
        raise
    print(f"criterion {num}: PASS - {desc}", flush=True)


def test_criterion_1_gt_affinity_matches_brute_force():
    desc = "ground-truth affinity == double-loop brute force on 200 maps"
    with _criterion(1, desc):
        start = time.monotonic()
        rng = np.random.default_rng(20260808)
        rates = RateSet(((1, 1), (2, 2), (3, 5)))
        mismatches = 0
        for _ in range(200):
            h = int(rng.integers(1, 33))
            w = int(rng.integers(1, 33))
            data = rng.integers(0, 5, size=(h, w)).astype(np.uint8)
            data[rng.random((h, w)) < 0.05] = 255
            lm = LabelMap(data)
            gt = ground_truth_affinity(lm, rates)
            values, valid = brute_force_affinity(lm, rates)
            if not (np.array_equal(gt.valid, valid)
                    and np.array_equal(gt.values, values)):
                mismatches += 1
        elapsed = time.monotonic() - start
        assert mismatches == 0
        assert elapsed < 10.0, f"took {elapsed:.1f}s"


def test_criterion_2_loss_reductions_and_gradient():
    desc = "gamma=0 loss == masked BCE (1e-12); gradient vs FD (<1e-5)"
    with _criterion(2, desc):
        start = time.monotonic()
        rng = np.random.default_rng(77)
        rates = RateSet(((1, 1), (2, 2)))
        schemes = ("baseline", "signal", "neighbor", "sqrt")
        unit = build_weight_table(
            category_histogram(
                LabelMap(np.zeros((4, 4), dtype=np.uint8)), rates),
            "baseline")
        worst_bce = 0.0
        worst_rel = 0.0
        for trial in range(50):
            h = int(rng.integers(3, 9))
            w = int(rng.integers(3, 9))
            data = rng.integers(0, 4, size=(h, w)).astype(np.uint8)
            data[rng.random((h, w)) < 0.05] = 255
            labels = LabelMap(data)
            gt = ground_truth_affinity(labels, rates)
            z = rng.uniform(-3.0, 3.0, size=gt.values.shape)
            logits = AffinityField(values=z, valid=gt.valid)

            cfg0 = LossConfig(gamma=0.0, beta=1.0, scheme="baseline")
            got = affinity_loss(logits, gt, unit, cfg0)
            want = masked_bce(z, gt.values, gt.valid, beta=1.0)
            worst_bce = max(worst_bce, abs(got - want))

            scheme = schemes[trial % 4]
            table = build_weight_table(category_histogram(labels, rates),
                                       scheme)
            cfg = LossConfig(gamma=2.0, beta=1.2, scheme=scheme)
            analytic = affinity_loss_grad(logits, gt, table, cfg)

            def loss_of(zz, gt=gt, table=table, cfg=cfg):
                return affinity_loss(
                    AffinityField(values=zz, valid=gt.valid), gt, table, cfg)

            fd = central_difference_grad(loss_of, z.copy(), h=1e-4)
            mask = np.abs(analytic) > 1e-8
            if mask.any():
                rel = np.abs(analytic - fd)[mask] / np.maximum(
                    np.abs(analytic), np.abs(fd))[mask]
                worst_rel = max(worst_rel, float(rel.max()))
        elapsed = time.monotonic() - start
        assert worst_bce < 1e-12, f"BCE gap {worst_bce:g}"
        assert worst_rel < 1e-5, f"gradient rel err {worst_rel:g}"
        assert elapsed < 30.0, f"took {elapsed:.1f}s"


def test_criterion_3_weight_table_identities():
    desc = "weight(n8)=1 for neighbor/sqrt; sqrt == elementwise root"
    with _criterion(3, desc):
        rng = np.random.default_rng(5)
        rates = RateSet(((1, 1), (2, 2), (3, 5)))
        for seed in range(20):
            maps = [LabelMap(rng.integers(0, 4, size=(16, 16)).astype(np.uint8))
                    for _ in range(2)]
            hist = category_histogram(maps, rates)
            tn = build_weight_table(hist, "neighbor")
            ts = build_weight_table(hist, "sqrt")
            assert np.all(tn.category_weights[:, 8] == 1.0)
            assert np.all(ts.category_weights[:, 8] == 1.0)
            assert np.max(np.abs(
                ts.category_weights - np.sqrt(tn.category_weights))) <= 1e-12


def test_criterion_4_propagation_invariants():
    desc = "row sums, large-lambda argmax, GT fixed point, zero affinity"
    with _criterion(4, desc):
        start = time.monotonic()
        rates = expand_rate_set("2")
        for seed in range(100):
            scfg = SynthConfig(seed=seed, height=24, width=24, num_classes=4,
                               num_cells=12, boundary_blur_radius=0,
                               flip_rate=0.1)
            lab = gen_voronoi_labels(scfg)
            p = corrupt_predictions(lab, scfg)
            rng = np.random.default_rng(seed + 1000)
            field = AffinityField(
                values=rng.random((8, 24, 24)),
                valid=np.ones((8, 24, 24), dtype=bool))

            out = propagate(p, field, rates,
                            PropagationConfig(lam=6.0, iterations=2,
                                              affinity_mode="binary_gt"))
            assert np.max(np.abs(out.sum(axis=0) - 1.0)) <= 1e-9

            big = propagate(p, field, rates,
                            PropagationConfig(lam=1e6, iterations=1,
                                              affinity_mode="binary_gt"))
            assert np.array_equal(np.argmax(big, axis=0), np.argmax(p, axis=0))

            onehot = np.zeros((4, 24, 24))
            onehot[lab.data, np.arange(24)[:, None], np.arange(24)[None, :]] = 1.0
            gt = ground_truth_affinity(lab, rates)
            fixed = propagate(onehot, gt, rates,
                              PropagationConfig(lam=6.0, iterations=10,
                                                affinity_mode="binary_gt"))
            assert np.array_equal(np.argmax(fixed, axis=0), lab.data)

            zero = AffinityField(values=np.zeros((8, 24, 24)),
                                 valid=np.ones((8, 24, 24), dtype=bool))
            same = propagate(p, zero, rates,
                             PropagationConfig(lam=6.0, iterations=3,
                                               affinity_mode="binary_gt"))
            assert np.array_equal(same, p)
        elapsed = time.monotonic() - start
        assert elapsed < 20.0, f"took {elapsed:.1f}s"


def _trend_corpus():
    for seed in range(100):
        yield SynthConfig(seed=seed, height=64, width=64, num_classes=5,
                          num_cells=40, boundary_blur_radius=2,
                          flip_rate=0.08, temperature=0.35)


def test_criterion_5_refinement_trend():
    desc = "GT-affinity refinement: mean mIoU up, monotone over checkpoints"
    with _criterion(5, desc):
        start = time.monotonic()
        rates = expand_rate_set("8,(12,24),16")
        cfg = PropagationConfig(lam=6.0, iterations=1, affinity_mode="binary_gt")
        checkpoints = (0, 1, 3, 6, 10)
        scores = np.zeros((100, len(checkpoints)))
        for n, scfg in enumerate(_trend_corpus()):
            lab = gen_voronoi_labels(scfg)
            cur = corrupt_predictions(lab, scfg)
            gt = ground_truth_affinity(lab, rates)
            col = 0
            for it in range(11):
                if it in checkpoints:
                    pred = np.argmax(cur, axis=0).astype(np.uint8)
                    scores[n, col] = miou(pred, lab, num_classes=5)
                    col += 1
                if it < 10:
                    cur = refine_step(cur, gt, rates, cfg)
        elapsed = time.monotonic() - start
        mean = scores.mean(axis=0)
        assert mean[-1] - mean[0] > 0.0, f"mean change {mean[-1] - mean[0]:g}"
        assert np.all(np.diff(mean) >= 0.0), f"not monotone: {mean}"
        improved = np.count_nonzero(scores[:, -1] > scores[:, 0])
        assert improved >= 90, f"improved only {improved}/100"
        assert elapsed < 120.0, f"took {elapsed:.1f}s"


def test_criterion_6_n8_frequency_trend():
    desc = "freq(n8, r) non-increasing over scalar rates 1..64"
    with _criterion(6, desc):
        rates = expand_rate_set("1,2,4,8,16,32,64")
        maps = [gen_voronoi_labels(scfg) for scfg in _trend_corpus()]
        hist = category_histogram(maps, rates)
        f8 = hist.frequencies()[:, 8]
        assert np.all(np.diff(f8) <= 1e-15), f"freq(n8) rose: {f8}"


def test_criterion_7_hand_derived_pins():
    desc = "refine step, steep sigmoid, bias init, and mIoU pins"
    with _criterion(7, desc):
        p = np.zeros((2, 1, 2))
        p[:, 0, 0] = [0.6, 0.4]
        p[:, 0, 1] = [0.1, 0.9]
        values = np.zeros((8, 1, 2))
        valid = np.zeros((8, 1, 2), dtype=bool)
        values[4, 0, 0] = 1.0
        valid[4, 0, 0] = True
        out = refine_step(p, AffinityField(values=values, valid=valid),
                          expand_rate_set("1"),
                          PropagationConfig(lam=6.0, iterations=1,
                                            affinity_mode="binary_gt"))
        assert abs(out[0, 0, 0] - 0.49130434782608695) <= 1e-9
        assert abs(out[1, 0, 0] - 0.5086956521739131) <= 1e-9

        assert steep_sigmoid(1.0, 7.0) == 0.875
        assert bias_init(0.5) == 0.0

        gt = np.array([[0, 0], [1, 1]], dtype=np.uint8)
        pred = np.array([[0, 1], [1, 1]], dtype=np.uint8)
        assert abs(miou(pred, LabelMap(gt), num_classes=2)
                   - 0.5833333333333333) <= 1e-12


def _run_twice(argv_fn, tmp_path, capsys):
    """Run a subcommand twice into separate dirs; compare bytes and stdout."""
    outs = []
    for tag in ("a", "b"):
        d = tmp_path / tag
        d.mkdir(exist_ok=True)
        argv, files = argv_fn(d)
        assert cli.run(argv) == 0
        outs.append((capsys.readouterr().out,
                     [f.read_bytes() for f in files]))
    assert outs[0] == outs[1]


def test_criterion_8_cli_determinism(tmp_path, capsys):
    desc = "every subcommand byte-identical across repeat runs"
    with _criterion(8, desc):
        shared = tmp_path / "inputs"
        shared.mkdir()
        assert cli.run(["synth", "--seed", "9", "--height", "20", "--width",
                        "20", "--classes", "4", "--cells", "8",
                        "--out-labels", str(shared / "l.png"),
                        "--out-probs", str(shared / "p.aft")]) == 0
        capsys.readouterr()
        labels = str(shared / "l.png")
        probs = str(shared / "p.aft")
        assert cli.run(["gen-affinity", "--labels", labels, "--rates", "2,4",
                        "--out-values", str(shared / "gt.aft"),
                        "--out-valid", str(shared / "valid.aft")]) == 0
        capsys.readouterr()
        rng = np.random.default_rng(0)
        tensor_io.save_tensor(
            rng.normal(size=(16, 20, 20)).astype(np.float32),
            str(shared / "z.aft"))

        _run_twice(lambda d: (
            ["synth", "--seed", "9", "--height", "20", "--width", "20",
             "--classes", "4", "--cells", "8",
             "--out-labels", str(d / "l.png"),
             "--out-probs", str(d / "p.aft")],
            [d / "l.png", d / "p.aft"]), tmp_path, capsys)

        _run_twice(lambda d: (
            ["gen-affinity", "--labels", labels, "--rates", "2,4",
             "--out-values", str(d / "v.aft"),
             "--out-valid", str(d / "m.aft")],
            [d / "v.aft", d / "m.aft"]), tmp_path, capsys)

        _run_twice(lambda d: (
            ["stats", "--labels", labels, "--rates", "1,2,4",
             "--out-csv", str(d / "s.csv")],
            [d / "s.csv"]), tmp_path, capsys)

        _run_twice(lambda d: (
            ["loss", "--logits", str(shared / "z.aft"), "--labels", labels,
             "--rates", "2,4", "--scheme", "sqrt", "--gamma", "2",
             "--beta", "1.2", "--out-grad", str(d / "g.aft")],
            [d / "g.aft"]), tmp_path, capsys)

        _run_twice(lambda d: (
            ["refine", "--probs", probs, "--affinity", str(shared / "gt.aft"),
             "--valid", str(shared / "valid.aft"), "--rates", "2,4",
             "--mode", "gt", "--iters", "5", "--out", str(d / "r.aft"),
             "--gt", labels],
            [d / "r.aft"]), tmp_path, capsys)

        _run_twice(lambda d: (
            ["eval", "--pred", labels, "--gt", labels],
            []), tmp_path, capsys)

        _run_twice(lambda d: (
            ["affinity-acc", "--pred", str(shared / "gt.aft"),
             "--labels", labels, "--rates", "2,4",
             "--out-csv", str(d / "acc.csv")],
            [d / "acc.csv"]), tmp_path, capsys)
