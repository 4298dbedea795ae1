import struct

import numpy as np
import pytest

from smen.dataio import (
    DataError, read_annotations, read_corpus, read_features, read_masks, read_proposals,
    write_annotations, write_corpus, write_features, write_masks, write_proposals,
)
from smen.metrics import Detection, GroundTruthSegment
from smen.mining import SlowMask
from smen.synthgen import SynthConfig, generate
from smen.tensorseq import FeatureSequence, FormatError


def test_feature_round_trip(tmp_path):
    rng = np.random.default_rng(0)
    for i in range(20):
        x = rng.normal(scale=10, size=(int(rng.integers(1, 50)), int(rng.integers(1, 9))))
        path = tmp_path / f"{i}.fea"
        write_features(path, FeatureSequence(x))
        np.testing.assert_array_equal(read_features(path).data, x.astype(np.float32))


def test_feature_file_layout(tmp_path):
    path = tmp_path / "x.fea"
    write_features(path, np.arange(6.0).reshape(2, 3))
    raw = path.read_bytes()
    assert len(raw) == 8 + 8 + 24
    assert raw[:8] == b"SMENFEA1"
    assert struct.unpack("<2i", raw[8:16]) == (2, 3)
    assert struct.unpack("<6f", raw[16:]) == (0, 1, 2, 3, 4, 5)


@pytest.mark.parametrize("mutate, offset", [
    (lambda raw: b"", 0),
    (lambda raw: b"SMENFEA2" + raw[8:], 0),
    (lambda raw: raw[:12], 12),
    (lambda raw: raw[:-1], 39),
    (lambda raw: raw + b"\0\0", 40),
])
def test_feature_corruption_positioned(tmp_path, mutate, offset):
    path = tmp_path / "x.fea"
    write_features(path, np.ones((2, 3)))
    path.write_bytes(mutate(path.read_bytes()))
    with pytest.raises(FormatError) as exc:
        read_features(path)
    assert exc.value.offset == offset
    assert f"offset {offset}" in str(exc.value)


MIXED = """#SMENANN1
video\ta\t0,2
video\tb\t1
video\tc\t-
video\td\t3
gt\ta\t0\t1.0\t2.5\t1
gt\ta\t2\t4.0\t6.0\t0
gt\tb\t1\t0.5\t1.5\t0
"""


def test_annotations_mixed_fixture(tmp_path):
    path = tmp_path / "ann.tsv"
    path.write_text(MIXED)
    labels, gts = read_annotations(path)
    assert len(labels) == 4 and len(gts) == 3
    assert labels["c"] == [] and labels["d"] == [3]
    assert sum(g.slow_motion for g in gts) == 1
    out = tmp_path / "again.tsv"
    write_annotations(out, labels, gts)
    assert out.read_text() == MIXED
    assert read_annotations(out) == (labels, gts)


def test_annotation_float_round_trip(tmp_path):
    gts = [GroundTruthSegment("v", 1, 0.1 + 0.2, 16 / 25 * 7, True)]
    path = tmp_path / "a.tsv"
    write_annotations(path, {"v": [1]}, gts)
    assert read_annotations(path)[1] == gts


@pytest.mark.parametrize("text, line", [
    ("video\ta\t0\n", 1),
    ("#SMENANN1\nvideo\ta\t0\ngt\ta\t0\t1.0\n", 3),
    ("#SMENANN1\nvideo\ta\tx\n", 2),
    ("#SMENANN1\nvideo\ta\t0\nvideo\ta\t1\n", 3),
    ("#SMENANN1\ngt\ta\t0\t3.0\t1.0\t0\n", 2),
    ("#SMENANN1\ngt\ta\t0\t1.0\t3.0\t2\n", 2),
])
def test_annotation_errors_name_line(tmp_path, text, line):
    path = tmp_path / "bad.tsv"
    path.write_text(text)
    with pytest.raises(DataError, match=f"bad.tsv:{line}:"):
        read_annotations(path)


def test_corpus_round_trip(tmp_path):
    videos = generate(SynthConfig(num_videos=5))
    write_corpus(tmp_path, videos, 4)
    back, manifest = read_corpus(tmp_path)
    assert manifest.num_classes == 4 and len(manifest.entries) == 5
    for a, b in zip(videos, back):
        assert a.video_id == b.video_id and a.label == b.label and a.gts == b.gts
        np.testing.assert_array_equal(b.features.data, a.features.data.astype(np.float32))
        assert b.features.snippet_seconds == a.features.snippet_seconds


def test_corpus_missing_feature_file(tmp_path):
    write_corpus(tmp_path, generate(SynthConfig(num_videos=2)), 4)
    (tmp_path / "features" / "v0001.fea").unlink()
    with pytest.raises(DataError, match="missing feature file"):
        read_corpus(tmp_path)


def test_masks_round_trip(tmp_path):
    masks = {"v0": SlowMask([0, 1, 1, 0]), "v1": SlowMask([1])}
    write_masks(tmp_path / "m.txt", masks)
    assert (tmp_path / "m.txt").read_text() == "v0\t0110\nv1\t1\n"
    assert read_masks(tmp_path / "m.txt") == masks
    (tmp_path / "bad.txt").write_text("v0\t0110\nv1\t01a\n")
    with pytest.raises(DataError, match="bad.txt:2"):
        read_masks(tmp_path / "bad.txt")


def test_proposals_round_trip(tmp_path):
    dets = [Detection("v0", 1, 0.64, 3.2, 0.875), Detection("v1", 0, 1 / 3, 2 / 3, -0.1)]
    write_proposals(tmp_path / "p.csv", dets)
    assert (tmp_path / "p.csv").read_text().splitlines()[0] == "video_id,class_id,start_sec,end_sec,confidence"
    assert read_proposals(tmp_path / "p.csv") == dets
    (tmp_path / "bad.csv").write_text("video_id,class_id,start_sec,end_sec,confidence\nv0,1,0.5\n")
    with pytest.raises(DataError, match="bad.csv:2"):
        read_proposals(tmp_path / "bad.csv")
