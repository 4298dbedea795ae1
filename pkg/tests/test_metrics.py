import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from smen.metrics import (
    BANDS, Detection, GroundTruthSegment, average_precision, map_at, map_bands, per_class_ap,
    report_csv, report_table, slow_subset_filter, tiou_grid,
)

from oracles import FIXTURE_DETS, FIXTURE_GTS, oracle_map

GRID = tiou_grid(0.1, 0.7, 0.1)

def test_ap_hand_cases():
    gt = [GroundTruthSegment("v", 0, 0.0, 4.0)]
    assert average_precision([Detection("v", 0, 0.0, 4.0, 1.0)], gt, 0.5) == 1.0
    fp, tp = Detection("v", 0, 10.0, 12.0, 0.9), Detection("v", 0, 0.0, 4.0, 0.5)
    assert average_precision([fp, tp], gt, 0.5) == 0.5
    assert average_precision([], gt, 0.5) == 0.0
    assert average_precision([tp], [], 0.5) == 0.0


def test_duplicates_count_once():
    gt = [GroundTruthSegment("v", 0, 0.0, 4.0)]
    dup = [Detection("v", 0, 0.0, 4.0, 0.9), Detection("v", 0, 0.0, 4.0, 0.8)]
    assert average_precision(dup, gt, 0.5) == 1.0
    two = gt + [GroundTruthSegment("v", 0, 10.0, 14.0)]
    assert average_precision(dup, two, 0.5) == 0.5


def test_map_two_class_symmetric():
    gts = [GroundTruthSegment("v", 0, 0.0, 1.0), GroundTruthSegment("v", 1, 0.0, 1.0)]
    dets = [Detection("v", 0, 0.0, 1.0, 1.0)]
    assert per_class_ap(dets, gts, 0.5) == {0: 1.0, 1: 0.0}
    assert map_at(dets, gts, 0.5) == 0.5


def test_fixture_matches_brute_force():
    values = []
    for t in GRID:
        got = map_at(FIXTURE_DETS, FIXTURE_GTS, t)
        want = oracle_map(FIXTURE_DETS, FIXTURE_GTS, t)
        assert abs(got - want) <= 1e-12, t
        values.append(want)
    # hand-scored at 0.7: class 0 ranks TP,FP,FP,FP,TP over 3 GTs -> (1 + 2/5) / 3; class 1 has no TP
    assert values[-1] == pytest.approx((1 + 2 / 5) / 3 / 2, abs=1e-12)
    assert values[0] == 1.0
    report = map_bands(FIXTURE_DETS, FIXTURE_GTS, {"avg[0.1:0.7]": GRID})
    assert report["bands"]["avg[0.1:0.7]"] == pytest.approx(np.mean(values), abs=1e-12)


def test_random_fixtures_match_brute_force():
    rng = np.random.default_rng(8)
    for _ in range(100):
        gts, dets = [], []
        for _ in range(int(rng.integers(1, 6))):
            s = float(rng.integers(0, 20))
            gts.append(GroundTruthSegment(str(rng.integers(0, 3)), int(rng.integers(0, 2)),
                                          s, s + float(rng.integers(1, 8))))
        for _ in range(int(rng.integers(0, 9))):
            s = float(rng.uniform(0, 20))
            dets.append(Detection(str(rng.integers(0, 3)), int(rng.integers(0, 2)), s,
                                  s + float(rng.uniform(0.5, 8)), float(rng.integers(0, 4)) / 3))
        for t in GRID:
            assert abs(map_at(dets, gts, t) - oracle_map(dets, gts, t)) <= 1e-12


segments = st.tuples(st.integers(0, 2), st.integers(0, 30), st.integers(1, 10))


@settings(max_examples=100, deadline=None)
@given(st.lists(segments, min_size=1, max_size=6),
       st.lists(st.tuples(segments, st.floats(0, 1)), max_size=10))
def test_ap_bounded_and_monotone_in_threshold(gt_rows, det_rows):
    gts = [GroundTruthSegment(str(v), 0, s, s + n) for v, s, n in gt_rows]
    dets = [Detection(str(v), 0, s, s + n, c) for (v, s, n), c in det_rows]
    prev = 1.0
    for t in tiou_grid(0.05, 0.95, 0.05):
        ap = average_precision(dets, gts, t)
        assert 0.0 <= ap <= 1.0
        assert ap <= prev + 1e-12
        prev = ap


def test_order_invariance():
    rng = np.random.default_rng(2)
    base = map_at(FIXTURE_DETS, FIXTURE_GTS, 0.3)
    for _ in range(20):
        shuffled = [FIXTURE_DETS[i] for i in rng.permutation(len(FIXTURE_DETS))]
        assert map_at(shuffled, FIXTURE_GTS, 0.3) == base


def test_bands():
    gts = FIXTURE_GTS
    perfect = [Detection(g.video_id, g.class_id, g.start_sec, g.end_sec, 1.0) for g in gts]
    report = map_bands(perfect, gts)
    assert set(report["bands"]) == set(BANDS)
    assert all(v == 1.0 for v in report["bands"].values())
    one = map_bands(FIXTURE_DETS, gts, {"only": (0.4,)})
    assert one["bands"]["only"] == map_at(FIXTURE_DETS, gts, 0.4)
    assert BANDS["avg[0.5:0.95]"] == (0.5, 0.55, 0.6, 0.65, 0.7, 0.75, 0.8, 0.85, 0.9, 0.95)


def test_slow_subset():
    slow = slow_subset_filter(FIXTURE_GTS)
    assert len(slow) == 2 and all(g.slow_motion for g in slow)
    assert slow_subset_filter([g for g in FIXTURE_GTS if not g.slow_motion]) == []
    assert map_at(FIXTURE_DETS, [], 0.5) == 0.0
    every = [GroundTruthSegment("v", 0, 0.0, 1.0, True)]
    assert slow_subset_filter(every) == every


def test_report_formats():
    report = map_bands(FIXTURE_DETS, FIXTURE_GTS, {"avg[0.1:0.5]": BANDS["avg[0.1:0.5]"]})
    csv = report_csv(report).splitlines()
    assert csv[0] == "threshold,mAP" and csv[1].startswith("0.10,")
    assert "avg[0.1:0.5]=" in report_table(report)
