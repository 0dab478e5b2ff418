import numpy as np
import pytest

from conftest import make_annotation
from mitodg import DetectionRecord, Label, MatchConfig, match_detections, optimize_threshold
from mitodg.evaluation import (
    THRESHOLD_KEEP_NONE,
    evaluate_at_threshold,
    evaluate_dataset_at_threshold,
    optimize_threshold_dataset,
)


def det(cx, cy, conf, label=Label.MITOTIC_FIGURE, image_id=1):
    return DetectionRecord(image_id, (cx, cy), (cx - 10, cy - 10, cx + 10, cy + 10), label, conf)


def gt(cx, cy, label=Label.MITOTIC_FIGURE, ann_id=1, image_id=1):
    return make_annotation(ann_id, image_id, (cx - 10, cy - 10, cx + 10, cy + 10), label)


def random_instance(g, n_gt=None, n_det=None, image_id=1):
    n_gt = int(g.integers(0, 12)) if n_gt is None else n_gt
    n_det = int(g.integers(0, 20)) if n_det is None else n_det
    gts = [gt(float(g.uniform(20, 480)), float(g.uniform(20, 480)), ann_id=k, image_id=image_id) for k in range(n_gt)]
    dets = []
    for _ in range(n_det):
        if gts and g.random() < 0.6:  # near some GT
            a = gts[int(g.integers(0, len(gts)))]
            cx = a.center[0] + float(g.normal(0, 15))
            cy = a.center[1] + float(g.normal(0, 15))
        else:
            cx, cy = float(g.uniform(20, 480)), float(g.uniform(20, 480))
        dets.append(det(min(max(cx, 0.0), 500.0), min(max(cy, 0.0), 500.0), float(g.uniform(0.01, 1.0)), image_id=image_id))
    return dets, gts


# -- matching -------------------------------------------------------------------


def test_perfect_detector():
    gts = [gt(100, 100, ann_id=1), gt(300, 300, ann_id=2), gt(100, 300, ann_id=3)]
    dets = [det(a.center[0], a.center[1], 1.0) for a in gts]
    tp, fp, fn, pairs = match_detections(dets, gts)
    assert (tp, fp, fn) == (3, 0, 0)
    assert len(pairs) == 3


def test_counting_example():
    # 3 GTs, 2 dets: one within radius, one 100px from everything
    gts = [gt(100, 100, ann_id=1), gt(300, 300, ann_id=2), gt(100, 300, ann_id=3)]
    dets = [det(110, 100, 0.9), det(480, 480, 0.8)]
    tp, fp, fn, _ = match_detections(dets, gts, MatchConfig(radius=30))
    assert (tp, fp, fn) == (1, 1, 2)
    report = evaluate_at_threshold(dets, gts, 0.0, MatchConfig(radius=30))
    assert report.precision == 0.5
    assert report.recall == pytest.approx(1 / 3)
    assert report.f1 == pytest.approx(0.4)


def test_greedy_one_to_one():
    gts = [gt(100, 100)]
    dets = [det(104, 100, 0.9), det(96, 100, 0.8)]
    tp, fp, fn, pairs = match_detections(dets, gts)
    assert (tp, fp, fn) == (1, 1, 0)
    assert pairs == [(0, 0)]  # higher-confidence detection takes the GT


def test_class_filter():
    gts = [gt(100, 100, ann_id=1), gt(200, 200, label=Label.IMPOSTER, ann_id=2)]
    dets = [det(100, 100, 0.9), det(200, 200, 0.8, label=Label.IMPOSTER)]
    tp, fp, fn, _ = match_detections(dets, gts)
    assert (tp, fp, fn) == (1, 0, 0)  # imposters ignored by default


def test_match_at_exact_radius():
    gts = [gt(100, 100)]
    dets = [det(130, 100, 0.9)]  # exactly 30 px away
    tp, fp, fn, _ = match_detections(dets, gts, MatchConfig(radius=30))
    assert (tp, fp, fn) == (1, 0, 0)


def test_counts_identity():
    g = np.random.default_rng(1)
    for _ in range(50):
        dets, gts = random_instance(g)
        t = float(g.uniform(0, 1))
        kept = [d for d in dets if d.confidence >= t]
        tp, fp, fn, _ = match_detections(kept, gts)
        n_gt = sum(1 for a in gts if a.label == Label.MITOTIC_FIGURE)
        n_det = sum(1 for d in kept if d.label == Label.MITOTIC_FIGURE)
        assert tp + fn == n_gt
        assert tp + fp == n_det


def test_matching_one_to_one_invariant():
    g = np.random.default_rng(2)
    for _ in range(30):
        dets, gts = random_instance(g)
        _, _, _, pairs = match_detections(dets, gts)
        det_ids = [i for i, _ in pairs]
        gt_ids = [j for _, j in pairs]
        assert len(det_ids) == len(set(det_ids))
        assert len(gt_ids) == len(set(gt_ids))


def test_greedy_vs_optimal_assignment():
    """Optimal-assignment oracle: greedy TP is never above the Hungarian
    matching and stays close on small instances."""
    from scipy.optimize import linear_sum_assignment

    g = np.random.default_rng(3)
    gaps = []
    for _ in range(40):
        dets, gts = random_instance(g, n_gt=int(g.integers(1, 6)), n_det=int(g.integers(1, 8)))
        tp, _, _, _ = match_detections(dets, gts, MatchConfig(radius=30))
        d_pts = np.array([d.center for d in dets if d.label == Label.MITOTIC_FIGURE])
        g_pts = np.array([a.center for a in gts if a.label == Label.MITOTIC_FIGURE])
        if len(d_pts) == 0 or len(g_pts) == 0:
            continue
        dist = np.linalg.norm(d_pts[:, None] - g_pts[None, :], axis=2)
        cost = (dist <= 30).astype(float)
        rows, cols = linear_sum_assignment(-cost)
        optimal_tp = int(cost[rows, cols].sum())
        assert tp <= optimal_tp
        gaps.append(optimal_tp - tp)
    assert np.mean(gaps) <= 0.5  # greedy rarely loses matches at this scale


# -- threshold optimization --------------------------------------------------------


def test_no_detections_sentinel():
    gts = [gt(100, 100, ann_id=1), gt(200, 200, ann_id=2)]
    report = optimize_threshold([], gts)
    assert report.threshold == THRESHOLD_KEEP_NONE
    assert report.f1 == 0.0
    assert report.fn == 2 and report.tp == 0 and report.fp == 0


def test_hand_swept_example():
    # 2 GTs; dets: conf 0.9 (TP), 0.8 (FP), 0.7 (TP)
    gts = [gt(100, 100, ann_id=1), gt(300, 300, ann_id=2)]
    dets = [det(100, 100, 0.9), det(200, 200, 0.8), det(300, 300, 0.7)]
    report = optimize_threshold(dets, gts)
    assert report.threshold == 0.7
    assert report.f1 == pytest.approx(0.8)
    # and the runner-up: keeping only conf >= 0.9 scores 2/3
    assert evaluate_at_threshold(dets, gts, 0.9).f1 == pytest.approx(2 / 3)


def test_optimum_beats_dense_sweep():
    g = np.random.default_rng(4)
    for _ in range(30):
        dets, gts = random_instance(g)
        best = optimize_threshold(dets, gts)
        sweep = [evaluate_at_threshold(dets, gts, t).f1 for t in np.linspace(0, 1, 1000)]
        assert best.f1 == pytest.approx(max(sweep), abs=1e-12)


def test_optimum_at_least_any_threshold():
    g = np.random.default_rng(5)
    dets, gts = random_instance(g, n_gt=8, n_det=15)
    best = optimize_threshold(dets, gts)
    for t in np.linspace(0, 1, 50):
        assert best.f1 >= evaluate_at_threshold(dets, gts, float(t)).f1


def test_monotone_confidence_map_keeps_selection():
    g = np.random.default_rng(6)
    dets, gts = random_instance(g, n_gt=6, n_det=12)
    best = optimize_threshold(dets, gts)
    squashed = [
        DetectionRecord(d.image_id, d.center, d.box, d.label, d.confidence**2) for d in dets
    ]
    best2 = optimize_threshold(squashed, gts)
    assert best2.f1 == pytest.approx(best.f1)
    assert (best2.tp, best2.fp, best2.fn) == (best.tp, best.fp, best.fn)
    if best.threshold <= 1.0:  # not the sentinel
        assert best2.threshold == pytest.approx(best.threshold**2)


def test_dataset_pooling():
    dets = [det(100, 100, 0.9, image_id=1), det(100, 100, 0.9, image_id=2)]
    gts = [gt(100, 100, ann_id=1, image_id=1), gt(400, 400, ann_id=2, image_id=2)]
    report = evaluate_dataset_at_threshold(dets, gts, 0.5)
    # image 1: TP; image 2: FP + FN (its GT is elsewhere)
    assert (report.tp, report.fp, report.fn) == (1, 1, 1)
    best = optimize_threshold_dataset(dets, gts)
    assert best.f1 == pytest.approx(0.5)


def test_invalid_radius():
    with pytest.raises(ValueError):
        MatchConfig(radius=0.0)
