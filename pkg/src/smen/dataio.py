"""On-disk formats: feature binaries, annotation TSV, corpus manifest,
mask files and proposal CSV."""

from dataclasses import dataclass
import csv
import os
import struct

import numpy as np

from .metrics import Detection, GroundTruthSegment
from .mining import SlowMask
from .synthgen import SynthVideo
from .tensorseq import SNIPPET_SECONDS, FeatureSequence, FormatError, InvalidInput, VideoLabel

FEATURE_MAGIC = b"SMENFEA1"
ANNOTATION_TAG = "#SMENANN1"
MANIFEST_TAG = "SMENCORPUS1"
PROPOSAL_HEADER = ["video_id", "class_id", "start_sec", "end_sec", "confidence"]


class DataError(ValueError):
    """Malformed text file; message names the offending line."""


def write_features(path, x):
    data = x.data if isinstance(x, FeatureSequence) else np.asarray(x)
    T, d = data.shape
    with open(path, "wb") as f:
        f.write(FEATURE_MAGIC)
        f.write(struct.pack("<2i", T, d))
        f.write(np.ascontiguousarray(data, dtype="<f4").tobytes())


def read_features(path, snippet_seconds=SNIPPET_SECONDS):
    with open(path, "rb") as f:
        raw = f.read()
    if len(raw) < len(FEATURE_MAGIC):
        raise FormatError(f"{path}: file too short for magic", len(raw))
    if raw[:8] != FEATURE_MAGIC:
        raise FormatError(f"{path}: bad magic {raw[:8]!r}", 0)
    if len(raw) < 16:
        raise FormatError(f"{path}: truncated header", len(raw))
    T, d = struct.unpack_from("<2i", raw, 8)
    if T < 1 or d < 1:
        raise FormatError(f"{path}: invalid shape ({T}, {d})", 8)
    expected = 16 + 4 * T * d
    if len(raw) < expected:
        raise FormatError(f"{path}: truncated payload, expected {expected} bytes", len(raw))
    if len(raw) > expected:
        raise FormatError(f"{path}: trailing bytes after payload", expected)
    data = np.frombuffer(raw, dtype="<f4", count=T * d, offset=16).astype(np.float64).reshape(T, d)
    return FeatureSequence(data, snippet_seconds)


def write_annotations(path, labels, gts):
    """``labels`` maps video id -> list of class ids (the weak label)."""
    with open(path, "w", encoding="utf-8") as f:
        f.write(ANNOTATION_TAG + "\n")
        for vid, classes in labels.items():
            cls = ",".join(str(c) for c in classes) or "-"
            f.write(f"video\t{vid}\t{cls}\n")
        for g in gts:
            f.write(f"gt\t{g.video_id}\t{g.class_id}\t{g.start_sec!r}\t{g.end_sec!r}\t{int(g.slow_motion)}\n")


def read_annotations(path):
    """Returns ``(labels, gts)``; raises DataError with the line number."""
    labels, gts = {}, []
    with open(path, encoding="utf-8") as f:
        lines = f.read().split("\n")
    if lines and lines[-1] == "":
        lines.pop()
    if not lines or lines[0] != ANNOTATION_TAG:
        raise DataError(f"{path}:1: missing {ANNOTATION_TAG} header")
    for lineno, line in enumerate(lines[1:], 2):
        parts = line.split("\t")
        try:
            if parts[0] == "video" and len(parts) == 3:
                if parts[1] in labels:
                    raise ValueError(f"duplicate video {parts[1]}")
                labels[parts[1]] = [] if parts[2] == "-" else [int(c) for c in parts[2].split(",")]
            elif parts[0] == "gt" and len(parts) == 6:
                if parts[5] not in ("0", "1"):
                    raise ValueError("slow flag must be 0 or 1")
                gts.append(GroundTruthSegment(parts[1], int(parts[2]), float(parts[3]),
                                              float(parts[4]), parts[5] == "1"))
            else:
                raise ValueError("unrecognised record")
        except ValueError as exc:
            raise DataError(f"{path}:{lineno}: {exc}: {line!r}") from None
    return labels, gts


@dataclass
class CorpusManifest:
    num_classes: int
    snippet_seconds: float
    entries: list  # (video_id, feature_file, T, d)
    version: str = MANIFEST_TAG


def write_corpus(directory, videos, num_classes):
    os.makedirs(os.path.join(directory, "features"), exist_ok=True)
    seconds = videos[0].features.snippet_seconds if videos else SNIPPET_SECONDS
    entries = []
    for v in videos:
        rel = os.path.join("features", f"{v.video_id}.fea")
        write_features(os.path.join(directory, rel), v.features)
        entries.append((v.video_id, rel, v.features.T, v.features.d))
    with open(os.path.join(directory, "manifest.txt"), "w") as f:
        f.write(f"{MANIFEST_TAG}\nnum_classes={num_classes}\nsnippet_seconds={seconds!r}\n")
        for e in entries:
            f.write("\t".join(str(x) for x in e) + "\n")
    labels = {v.video_id: v.label.classes for v in videos}
    write_annotations(os.path.join(directory, "annotations.tsv"), labels,
                      [g for v in videos for g in v.gts])
    return CorpusManifest(num_classes, seconds, entries)


def read_manifest(directory):
    path = os.path.join(directory, "manifest.txt")
    with open(path) as f:
        lines = f.read().splitlines()
    if len(lines) < 3 or lines[0] != MANIFEST_TAG:
        raise DataError(f"{path}:1: missing {MANIFEST_TAG} header")
    try:
        num_classes = int(lines[1].split("=", 1)[1])
        seconds = float(lines[2].split("=", 1)[1])
    except (IndexError, ValueError):
        raise DataError(f"{path}:2: malformed corpus header") from None
    entries, seen = [], set()
    for lineno, line in enumerate(lines[3:], 4):
        parts = line.split("\t")
        if len(parts) != 4 or parts[0] in seen:
            raise DataError(f"{path}:{lineno}: bad or duplicate entry {line!r}")
        seen.add(parts[0])
        fpath = os.path.join(directory, parts[1])
        if not os.path.exists(fpath):
            raise DataError(f"{path}:{lineno}: missing feature file {parts[1]}")
        entries.append((parts[0], parts[1], int(parts[2]), int(parts[3])))
    return CorpusManifest(num_classes, seconds, entries)


def read_corpus(directory):
    """Load a corpus directory into a list of SynthVideo records (id order)."""
    manifest = read_manifest(directory)
    labels, gts = read_annotations(os.path.join(directory, "annotations.tsv"))
    by_video = {}
    for g in gts:
        by_video.setdefault(g.video_id, []).append(g)
    videos = []
    for vid, rel, T, d in manifest.entries:
        x = read_features(os.path.join(directory, rel), manifest.snippet_seconds)
        if x.data.shape != (T, d):
            raise DataError(f"{rel}: shape {x.data.shape} disagrees with manifest ({T}, {d})")
        if vid not in labels:
            raise DataError(f"video {vid} has no label record")
        label = VideoLabel.from_classes(labels[vid], manifest.num_classes)
        videos.append(SynthVideo(vid, x, label, by_video.get(vid, [])))
    return videos, manifest


def write_masks(path, masks):
    with open(path, "w") as f:
        for vid, m in masks.items():
            f.write(f"{vid}\t{m.to_bitstring()}\n")


def read_masks(path):
    masks = {}
    with open(path) as f:
        for lineno, line in enumerate(f, 1):
            line = line.rstrip("\n")
            if not line:
                continue
            vid, sep, bits = line.partition("\t")
            try:
                if not sep:
                    raise InvalidInput("expected video_id<TAB>bitstring")
                masks[vid] = SlowMask.from_bitstring(bits)
            except InvalidInput as exc:
                raise DataError(f"{path}:{lineno}: {exc}") from None
    return masks


def write_track_csv(path, tracks):
    """Pre-binarization smooth tracks: video_id,index,value."""
    with open(path, "w", newline="") as f:
        w = csv.writer(f)
        w.writerow(["video_id", "index", "value"])
        for vid, track in tracks.items():
            for i, v in enumerate(track):
                w.writerow([vid, i, repr(float(v))])


def write_proposals(path, dets):
    with open(path, "w", newline="") as f:
        w = csv.writer(f, lineterminator="\n")
        w.writerow(PROPOSAL_HEADER)
        for d in dets:
            w.writerow([d.video_id, d.class_id, repr(float(d.start_sec)),
                        repr(float(d.end_sec)), repr(float(d.confidence))])


def read_proposals(path):
    dets = []
    with open(path, newline="") as f:
        rows = list(csv.reader(f))
    if not rows or rows[0] != PROPOSAL_HEADER:
        raise DataError(f"{path}:1: expected header {','.join(PROPOSAL_HEADER)}")
    for lineno, row in enumerate(rows[1:], 2):
        try:
            if len(row) != 5:
                raise ValueError("expected 5 fields")
            dets.append(Detection(row[0], int(row[1]), float(row[2]), float(row[3]), float(row[4])))
        except ValueError as exc:
            raise DataError(f"{path}:{lineno}: {exc}") from None
    return dets
