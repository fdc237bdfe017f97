"""On-disk artifact formats.

Every artifact starts with a magic string and is rejected on mismatch:

  P5      binary PGM, used for images (intensity*255), label maps
          (pixel value = class index), certainty masks (255 = certain),
          and 8-bit uncertainty visualizations.
  PMAP1   "PMAP1 <width> <height> <classes>\\n" then row-major,
          class-fastest float32 little-endian probabilities.
  UMAP1   "UMAP1 <width> <height>\\n" then row-major float32 LE values.
  PLAN1   "PLAN1 <image_id> <stage_index> <count>\\n" then one
          "x0 y0 size" line per tile in scan order.
  SYNTH1  dataset manifest: "SYNTH1 <count>\\n" then one
          "image_path label_path seed" line per pair.

All writes go through a temp file in the target directory plus an atomic
rename, so readers never observe a partial artifact.
"""

from __future__ import annotations

import os
import tempfile
from pathlib import Path

import numpy as np

from .core import LabelMap, LargeImage, ProbabilityMap, Tile
from .curriculum import CurriculumPlan
from .uncertainty import CertaintyMask, UncertaintyMap


class FormatError(ValueError):
    """A file exists but is not a valid artifact of the expected kind."""


def atomic_write(path: str | Path, data: bytes) -> None:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=f".{path.name}.")
    try:
        with os.fdopen(fd, "wb") as fh:
            fh.write(data)
        os.replace(tmp, path)
    except BaseException:
        try:
            os.unlink(tmp)
        except OSError:
            pass
        raise


def atomic_write_text(path: str | Path, text: str) -> None:
    atomic_write(path, text.encode("ascii"))


# ---------------------------------------------------------------------------
# PGM (P5)
# ---------------------------------------------------------------------------

def write_pgm(path: str | Path, data: np.ndarray) -> None:
    data = np.asarray(data)
    if data.ndim != 2 or data.dtype != np.uint8:
        raise ValueError("PGM payload must be a 2-D uint8 array")
    h, w = data.shape
    header = f"P5\n{w} {h}\n255\n".encode("ascii")
    atomic_write(path, header + data.tobytes())


def read_pgm(path: str | Path) -> np.ndarray:
    raw = Path(path).read_bytes()
    if raw[:2] != b"P5":
        raise FormatError(f"{path}: not a binary PGM (P5) file")
    pos = 2
    fields: list[int] = []
    while len(fields) < 3:
        while pos < len(raw) and raw[pos : pos + 1].isspace():
            pos += 1
        if pos < len(raw) and raw[pos : pos + 1] == b"#":  # comment to end of line
            while pos < len(raw) and raw[pos : pos + 1] != b"\n":
                pos += 1
            continue
        start = pos
        while pos < len(raw) and not raw[pos : pos + 1].isspace():
            pos += 1
        token = raw[start:pos]
        if not token.isdigit():
            raise FormatError(f"{path}: malformed PGM header near byte {start}")
        fields.append(int(token))
    pos += 1  # single whitespace byte after maxval
    w, h, maxval = fields
    if maxval != 255:
        raise FormatError(f"{path}: unsupported PGM maxval {maxval} (expected 255)")
    payload = raw[pos:]
    if len(payload) != w * h:
        raise FormatError(f"{path}: PGM payload is {len(payload)} bytes, expected {w * h}")
    return np.frombuffer(payload, dtype=np.uint8).reshape(h, w).copy()


def write_image(path: str | Path, image: LargeImage) -> None:
    write_pgm(path, np.round(image.pixels * 255.0).astype(np.uint8))


def read_image(path: str | Path) -> LargeImage:
    return LargeImage(pixels=(read_pgm(path).astype(np.float32) / 255.0))


def write_labels(path: str | Path, labels: LabelMap) -> None:
    write_pgm(path, labels.labels.astype(np.uint8))


def read_labels(path: str | Path, class_names: tuple[str, ...]) -> LabelMap:
    data = read_pgm(path)
    if data.max() >= len(class_names):
        raise FormatError(
            f"{path}: label value {int(data.max())} exceeds class count {len(class_names)}"
        )
    return LabelMap(labels=data, class_names=class_names)


def write_mask(path: str | Path, mask: CertaintyMask) -> None:
    write_pgm(path, np.where(mask.certain, 255, 0).astype(np.uint8))


def read_mask(path: str | Path) -> CertaintyMask:
    data = read_pgm(path)
    bad = set(np.unique(data)) - {0, 255}
    if bad:
        raise FormatError(f"{path}: mask pixels must be 0 or 255, found {sorted(bad)}")
    return CertaintyMask(certain=data == 255)


def write_uncertainty_vis(path: str | Path, umap: UncertaintyMap) -> None:
    """8-bit rendering where high uncertainty shows as high intensity."""
    write_pgm(path, np.round(umap.values.astype(np.float64) * 255.0).astype(np.uint8))


# ---------------------------------------------------------------------------
# PMAP1 / UMAP1
# ---------------------------------------------------------------------------

def write_probability_map(path: str | Path, pmap: ProbabilityMap) -> None:
    header = f"PMAP1 {pmap.width} {pmap.height} {pmap.num_classes}\n".encode("ascii")
    payload = np.ascontiguousarray(pmap.probs, dtype="<f4").tobytes()
    atomic_write(path, header + payload)


def read_probability_map(path: str | Path) -> ProbabilityMap:
    raw = Path(path).read_bytes()
    header, _, payload = raw.partition(b"\n")
    parts = header.split()
    if len(parts) != 4 or parts[0] != b"PMAP1":
        raise FormatError(f"{path}: not a PMAP1 file")
    try:
        w, h, c = (int(p) for p in parts[1:])
    except ValueError as exc:
        raise FormatError(f"{path}: malformed PMAP1 header") from exc
    expected = w * h * c * 4
    if len(payload) != expected:
        raise FormatError(f"{path}: payload is {len(payload)} bytes, expected {expected}")
    probs = np.frombuffer(payload, dtype="<f4").reshape(h, w, c).copy()
    return ProbabilityMap(probs=probs)


def write_uncertainty_map(path: str | Path, umap: UncertaintyMap) -> None:
    header = f"UMAP1 {umap.width} {umap.height}\n".encode("ascii")
    payload = np.ascontiguousarray(umap.values, dtype="<f4").tobytes()
    atomic_write(path, header + payload)


def read_uncertainty_map(path: str | Path) -> UncertaintyMap:
    raw = Path(path).read_bytes()
    header, _, payload = raw.partition(b"\n")
    parts = header.split()
    if len(parts) != 3 or parts[0] != b"UMAP1":
        raise FormatError(f"{path}: not a UMAP1 file")
    try:
        w, h = (int(p) for p in parts[1:])
    except ValueError as exc:
        raise FormatError(f"{path}: malformed UMAP1 header") from exc
    expected = w * h * 4
    if len(payload) != expected:
        raise FormatError(f"{path}: payload is {len(payload)} bytes, expected {expected}")
    values = np.frombuffer(payload, dtype="<f4").reshape(h, w).copy()
    return UncertaintyMap(values=values)


# ---------------------------------------------------------------------------
# PLAN1
# ---------------------------------------------------------------------------

def write_plan(path: str | Path, plan: CurriculumPlan) -> None:
    image_id = plan.source_image_id or "-"
    if any(ch.isspace() for ch in image_id):
        raise ValueError(f"image id {image_id!r} must not contain whitespace")
    lines = [f"PLAN1 {image_id} {plan.stage_index} {len(plan.tiles)}"]
    lines.extend(f"{t.x0} {t.y0} {t.size}" for t in plan.tiles)
    atomic_write_text(path, "\n".join(lines) + "\n")


def read_plan(path: str | Path) -> CurriculumPlan:
    lines = Path(path).read_text(encoding="ascii").splitlines()
    if not lines:
        raise FormatError(f"{path}: empty plan file")
    head = lines[0].split()
    if len(head) != 4 or head[0] != "PLAN1":
        raise FormatError(f"{path}: not a PLAN1 file")
    image_id = "" if head[1] == "-" else head[1]
    try:
        stage_index, count = int(head[2]), int(head[3])
    except ValueError as exc:
        raise FormatError(f"{path}: malformed PLAN1 header") from exc
    body = [ln for ln in lines[1:] if ln.strip()]
    if len(body) != count:
        raise FormatError(f"{path}: plan lists {len(body)} tiles, header says {count}")
    tiles = []
    for ln in body:
        try:
            x0, y0, size = (int(p) for p in ln.split())
        except ValueError as exc:
            raise FormatError(f"{path}: malformed plan line {ln!r}") from exc
        tiles.append(Tile(x0, y0, size))
    return CurriculumPlan(tiles=tuple(tiles), stage_index=stage_index, source_image_id=image_id)


# ---------------------------------------------------------------------------
# dataset manifest
# ---------------------------------------------------------------------------

def write_manifest(path: str | Path, entries: list[tuple[str, str, int]]) -> None:
    for image_path, label_path, _ in entries:
        for p in (image_path, label_path):
            if any(ch.isspace() for ch in p):
                raise ValueError(f"manifest path {p!r} must not contain whitespace")
    lines = [f"SYNTH1 {len(entries)}"]
    lines.extend(f"{img} {lbl} {seed}" for img, lbl, seed in entries)
    atomic_write_text(path, "\n".join(lines) + "\n")


def read_manifest(path: str | Path) -> list[tuple[str, str, int]]:
    lines = Path(path).read_text(encoding="ascii").splitlines()
    if not lines:
        raise FormatError(f"{path}: empty manifest")
    head = lines[0].split()
    if len(head) != 2 or head[0] != "SYNTH1":
        raise FormatError(f"{path}: not a SYNTH1 manifest")
    try:
        count = int(head[1])
    except ValueError as exc:
        raise FormatError(f"{path}: malformed SYNTH1 header") from exc
    body = [ln for ln in lines[1:] if ln.strip()]
    if len(body) != count:
        raise FormatError(f"{path}: manifest lists {len(body)} pairs, header says {count}")
    entries = []
    for ln in body:
        parts = ln.split()
        if len(parts) != 3:
            raise FormatError(f"{path}: malformed manifest line {ln!r}")
        entries.append((parts[0], parts[1], int(parts[2])))
    return entries
