"""Frame ingestion, matrix persistence, CSV schemas and run manifests.

File formats
------------
Frames: portable graymaps (P5 binary or P2 ascii), 8- or 16-bit; 16-bit
sample values are big-endian per the PGM convention. Intensities are
normalized by the file's maxval on load.

Raw matrix: 8-byte magic ``ELSDMTX1``, then little-endian uint64 ``p`` and
``n``, then ``p*n`` little-endian float64 values in column-major order.

CSV schemas: ground truth ``frame_id,target_id,x,y,w,h``; detections
``frame_id,det_id,x,y,w,h,score``; metrics
``iou_threshold,tp,fn,fp,recall,precision,f1,rank_b``; solver history
``batch,iteration,stop,objective,mu,rank``.
"""

import csv
import json
import struct
from dataclasses import asdict, dataclass, field
from pathlib import Path

import numpy as np

from .detection import Box, Detection, GtBox, MetricsReport
from .errors import DataFormatError
from .linalg import FrameMatrix

MATRIX_MAGIC = b"ELSDMTX1"


# ---------------------------------------------------------------------------
# portable graymaps


def write_pgm(path, image01, maxval=65535):
    """Write a [0,1] image as a P5 graymap (8-bit if maxval <= 255)."""
    image01 = np.asarray(image01, dtype=np.float64)
    if image01.ndim != 2:
        raise DataFormatError(f"expected a 2-D image, got shape {image01.shape}")
    levels = np.round(np.clip(image01, 0.0, 1.0) * maxval)
    dtype = ">u2" if maxval > 255 else "u1"
    with open(path, "wb") as fh:
        fh.write(b"P5\n%d %d\n%d\n" % (image01.shape[1], image01.shape[0], maxval))
        fh.write(levels.astype(dtype).tobytes())


def _pgm_tokens(data, count):
    """First ``count`` whitespace-separated header tokens, skipping comments.

    Returns (tokens, offset of the byte after the final token's single
    whitespace terminator).
    """
    tokens = []
    i = 0
    while len(tokens) < count:
        if i >= len(data):
            raise DataFormatError("truncated graymap header")
        c = data[i:i + 1]
        if c == b"#":
            while i < len(data) and data[i:i + 1] != b"\n":
                i += 1
        elif c.isspace():
            i += 1
        else:
            j = i
            while j < len(data) and not data[j:j + 1].isspace() \
                    and data[j:j + 1] != b"#":
                j += 1
            tokens.append(data[i:j])
            i = j
            if len(tokens) == count:
                i += 1  # single whitespace after maxval precedes raster data
    return tokens, i


def read_pgm(path):
    """Read a P5/P2 graymap as a [0,1] float image (normalized by maxval)."""
    data = Path(path).read_bytes()
    if data[:2] not in (b"P5", b"P2"):
        raise DataFormatError(f"{path}: not a portable graymap (P5/P2)")
    (magic, w, h, maxval), offset = _pgm_tokens(data, 4)
    try:
        w, h, maxval = int(w), int(h), int(maxval)
    except ValueError as exc:
        raise DataFormatError(f"{path}: bad graymap header") from exc
    if w < 1 or h < 1 or not 0 < maxval < 65536:
        raise DataFormatError(f"{path}: bad graymap dimensions or maxval")
    if magic == b"P5":
        dtype = ">u2" if maxval > 255 else "u1"
        raster = data[offset:]
        need = w * h * (2 if maxval > 255 else 1)
        if len(raster) < need:
            raise DataFormatError(f"{path}: truncated raster data")
        values = np.frombuffer(raster[:need], dtype=dtype).astype(np.float64)
    else:
        values = np.array(data[offset:].split(), dtype=np.float64)
        if values.size != w * h:
            raise DataFormatError(f"{path}: expected {w*h} samples, "
                                  f"got {values.size}")
    return (values / maxval).reshape(h, w)


def write_frames(directory, fm: FrameMatrix, maxval=65535):
    """Write every column of a FrameMatrix as frame_%05d.pgm."""
    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    paths = []
    for i in range(fm.n_frames):
        path = directory / f"frame_{i:05d}.pgm"
        write_pgm(path, fm.frame(i), maxval=maxval)
        paths.append(path)
    return paths


def load_frames(path, pattern=None, geometry=None):
    """Load a FrameMatrix from a frame directory or a raw matrix file.

    Directories are globbed (default ``*.pgm``) and stacked in lexicographic
    filename order. A raw matrix file needs its frame geometry, either
    passed explicitly or found in a ``<file>.json`` sidecar.
    """
    path = Path(path)
    if path.is_dir():
        files = sorted(path.glob(pattern or "*.pgm"))
        if not files:
            raise DataFormatError(f"no frames matching {pattern or '*.pgm'} "
                                  f"in {path}")
        frames = []
        shape = None
        for f in files:
            img = read_pgm(f)
            if shape is None:
                shape = img.shape
            elif img.shape != shape:
                raise DataFormatError(
                    f"{f}: geometry {img.shape[1]}x{img.shape[0]} does not "
                    f"match first frame {shape[1]}x{shape[0]}"
                )
            frames.append(img)
        return FrameMatrix.from_frames(frames)
    if not path.exists():
        raise DataFormatError(f"{path}: no such file or directory")
    M = load_matrix(path)
    if geometry is None:
        sidecar = path.with_name(path.name + ".json")
        if not sidecar.exists():
            raise DataFormatError(
                f"{path}: raw matrix needs frame geometry (no sidecar "
                f"{sidecar.name})"
            )
        meta = json.loads(sidecar.read_text())
        geometry = (meta["height"], meta["width"])
    return FrameMatrix(M, *geometry)


# ---------------------------------------------------------------------------
# raw matrices


def save_matrix(path, M, geometry=None):
    """Write a matrix in the documented raw format (+ optional geometry
    sidecar ``<file>.json``)."""
    M = np.asarray(M, dtype=np.float64)
    if M.ndim != 2:
        raise DataFormatError(f"expected a 2-D matrix, got shape {M.shape}")
    path = Path(path)
    with open(path, "wb") as fh:
        fh.write(MATRIX_MAGIC)
        fh.write(struct.pack("<QQ", M.shape[0], M.shape[1]))
        fh.write(np.asfortranarray(M, dtype="<f8").tobytes(order="F"))
    if geometry is not None:
        sidecar = path.with_name(path.name + ".json")
        sidecar.write_text(json.dumps(
            {"height": geometry[0], "width": geometry[1]}, sort_keys=True))
    return path


def load_matrix(path):
    data = Path(path).read_bytes()
    if len(data) < 24 or data[:8] != MATRIX_MAGIC:
        raise DataFormatError(f"{path}: not a raw matrix file (bad magic)")
    p, n = struct.unpack("<QQ", data[8:24])
    need = 24 + p * n * 8
    if len(data) != need:
        raise DataFormatError(
            f"{path}: expected {need} bytes for a {p}x{n} matrix, "
            f"got {len(data)}"
        )
    M = np.frombuffer(data[24:], dtype="<f8").reshape((p, n), order="F")
    return np.ascontiguousarray(M)


# ---------------------------------------------------------------------------
# CSV schemas


def write_gt_csv(path, boxes):
    with open(path, "w", newline="") as fh:
        wr = csv.writer(fh)
        wr.writerow(["frame_id", "target_id", "x", "y", "w", "h"])
        for frame_id, frame in enumerate(boxes):
            for gt in frame:
                wr.writerow([frame_id, gt.target_id, *gt.box])


def read_gt_csv(path, n_frames=None):
    rows = _read_csv(path, ["frame_id", "target_id", "x", "y", "w", "h"])
    return _group_by_frame(
        rows,
        lambda r: GtBox(int(r["target_id"]),
                        Box(int(r["x"]), int(r["y"]), int(r["w"]), int(r["h"]))),
        n_frames,
    )


def write_dets_csv(path, dets):
    with open(path, "w", newline="") as fh:
        wr = csv.writer(fh)
        wr.writerow(["frame_id", "det_id", "x", "y", "w", "h", "score"])
        for frame_id, frame in enumerate(dets):
            for det_id, det in enumerate(frame):
                wr.writerow([frame_id, det_id, *det.box, repr(det.score)])


def read_dets_csv(path, n_frames=None):
    rows = _read_csv(path, ["frame_id", "det_id", "x", "y", "w", "h", "score"])
    return _group_by_frame(
        rows,
        lambda r: Detection(
            Box(int(r["x"]), int(r["y"]), int(r["w"]), int(r["h"])),
            float(r["score"]),
        ),
        n_frames,
    )


def _read_csv(path, columns):
    path = Path(path)
    if not path.exists():
        raise DataFormatError(f"{path}: no such file")
    with open(path, newline="") as fh:
        reader = csv.DictReader(fh)
        missing = set(columns) - set(reader.fieldnames or ())
        if missing:
            raise DataFormatError(
                f"{path}: missing columns {sorted(missing)}"
            )
        try:
            return list(reader)
        except csv.Error as exc:
            raise DataFormatError(f"{path}: {exc}") from exc


def _group_by_frame(rows, build, n_frames):
    try:
        parsed = [(int(r["frame_id"]), build(r)) for r in rows]
    except (KeyError, ValueError) as exc:
        raise DataFormatError(f"bad CSV row: {exc}") from exc
    count = max((f for f, _ in parsed), default=-1) + 1
    if n_frames is not None:
        count = max(count, n_frames)
    frames = [[] for _ in range(count)]
    for f, item in parsed:
        if f < 0:
            raise DataFormatError(f"negative frame_id {f}")
        frames[f].append(item)
    return frames


def write_metrics_csv(path, reports):
    with open(path, "w", newline="") as fh:
        wr = csv.writer(fh)
        wr.writerow(["iou_threshold", "tp", "fn", "fp", "recall", "precision",
                     "f1", "rank_b"])
        for r in reports:
            wr.writerow([r.iou_threshold, r.tp, r.fn, r.fp,
                         f"{r.recall:.6f}", f"{r.precision:.6f}",
                         f"{r.f1:.6f}", "" if r.rank_B is None else r.rank_B])


def format_report(r: MetricsReport):
    rank = "" if r.rank_B is None else f" rank_B={r.rank_B}"
    return (f"iou>={r.iou_threshold:g}: tp={r.tp} fn={r.fn} fp={r.fp} "
            f"recall={r.recall:.4f} precision={r.precision:.4f} "
            f"f1={r.f1:.4f}{rank}")


def write_summary_csv(path, rows):
    """Write homogeneous dict rows (one per sweep grid point)."""
    with open(path, "w", newline="") as fh:
        wr = csv.DictWriter(fh, fieldnames=list(rows[0].keys()))
        wr.writeheader()
        wr.writerows(rows)


def write_history_csv(path, histories):
    """``histories`` is a list (one entry per batch) of DecompositionResult."""
    with open(path, "w", newline="") as fh:
        wr = csv.writer(fh)
        wr.writerow(["batch", "iteration", "stop", "objective", "mu", "rank"])
        for b, res in enumerate(histories):
            for i in range(res.iterations):
                wr.writerow([b, i + 1, repr(res.stop_history[i]),
                             repr(res.objective_history[i]),
                             repr(res.mu_history[i]),
                             int(res.rank_history[i])])


# ---------------------------------------------------------------------------
# run manifests


@dataclass
class RunManifest:
    """Reproducibility record written once per run directory."""

    command: list
    version: str
    config: dict = field(default_factory=dict)
    input: dict = field(default_factory=dict)
    timings: dict = field(default_factory=dict)
    outputs: dict = field(default_factory=dict)
    results: dict = field(default_factory=dict)

    def write(self, directory):
        path = Path(directory) / "manifest.json"
        path.write_text(json.dumps(asdict(self), indent=2, sort_keys=True) + "\n")
        return path

    @classmethod
    def read(cls, directory):
        path = Path(directory) / "manifest.json"
        if not path.exists():
            raise DataFormatError(f"{path}: no manifest found")
        try:
            return cls(**json.loads(path.read_text()))
        except (TypeError, ValueError) as exc:
            raise DataFormatError(f"{path}: bad manifest: {exc}") from exc
