"""Dataset ingestion and image codecs.

CIFAR-10 binary batches: 3073-byte records, one label byte followed by three
1024-byte channel planes (R, G, B), each a row-major 32x32 grid. Pixels are
scaled to [0,1] by /255 with no mean/std normalization.

PPM: binary P6 with maxval 255, chosen because it is bit-exact specifiable
with no codec dependency. Encoding clamps to [0,1] and rounds half away
from zero.
"""

from __future__ import annotations

import glob
import os

import numpy as np

RECORD_BYTES = 3073
IMG_SIDE = 32
IMG_CHANNELS = 3

_KEY_SUBSET = 5


def _batch_files(path: str, split: str) -> list[str]:
    if os.path.isfile(path):
        return [path]
    pattern = "data_batch_*.bin" if split == "train" else "test_batch.bin"
    files = sorted(glob.glob(os.path.join(path, pattern)))
    if not files:
        raise FileNotFoundError(f"no {pattern} files under {path}")
    return files


def load_cifar10(path: str, subset: int | None = None, seed: int = 0,
                 split: str = "train"):
    """Load CIFAR-10 binary batches from a file or directory.

    Returns (images, labels): float64 (N, 32, 32, 3) in [0,1] and int64 (N,).
    `subset` draws that many records without replacement, seeded.
    """
    records = []
    for fname in _batch_files(path, split):
        raw = np.fromfile(fname, dtype=np.uint8)
        if raw.size == 0 or raw.size % RECORD_BYTES != 0:
            offset = (raw.size // RECORD_BYTES) * RECORD_BYTES
            raise ValueError(f"{fname}: truncated record at byte offset {offset} "
                             f"(file holds {raw.size} bytes)")
        records.append(raw.reshape(-1, RECORD_BYTES))
    data = np.concatenate(records)
    labels = data[:, 0].astype(np.int64)
    bad = np.nonzero(labels > 9)[0]
    if bad.size:
        raise ValueError(f"record {bad[0]}: label {labels[bad[0]]} out of range 0..9")
    images = data[:, 1:].reshape(-1, IMG_CHANNELS, IMG_SIDE, IMG_SIDE)
    images = images.transpose(0, 2, 3, 1).astype(np.float64) / 255.0
    if subset is not None and subset < len(images):
        rng = np.random.Generator(np.random.PCG64(
            np.random.SeedSequence([seed, _KEY_SUBSET])))
        idx = np.sort(rng.choice(len(images), size=subset, replace=False))
        images, labels = images[idx], labels[idx]
    return images, labels


def save_cifar10_batch(path: str, images: np.ndarray, labels: np.ndarray):
    """Write images (N, 32, 32, 3) uint8 and labels to one binary batch file."""
    images = np.asarray(images, dtype=np.uint8)
    labels = np.asarray(labels)
    n = images.shape[0]
    planes = images.transpose(0, 3, 1, 2).reshape(n, -1)
    out = np.empty((n, RECORD_BYTES), dtype=np.uint8)
    out[:, 0] = labels
    out[:, 1:] = planes
    out.tofile(path)


def hwc_to_planes(batch: np.ndarray) -> np.ndarray:
    """(B, H, W, C) -> (B, C, H*W) channel-plane layout."""
    b, h, w, c = batch.shape
    return np.ascontiguousarray(batch.transpose(0, 3, 1, 2).reshape(b, c, h * w))


def planes_to_hwc(planes: np.ndarray, h: int, w: int) -> np.ndarray:
    b, c, _ = planes.shape
    return np.ascontiguousarray(planes.reshape(b, c, h, w).transpose(0, 2, 3, 1))


# ---------------------------------------------------------------------------
# PPM P6


def read_ppm(path: str) -> np.ndarray:
    """Read a binary P6 PPM with maxval 255 into a float image in [0,1]."""
    with open(path, "rb") as f:
        blob = f.read()
    tokens = []
    pos = 0
    while len(tokens) < 4:
        if pos >= len(blob):
            raise ValueError(f"{path}: malformed PPM header")
        ch = blob[pos:pos + 1]
        if ch == b"#":
            while pos < len(blob) and blob[pos:pos + 1] != b"\n":
                pos += 1
        elif ch.isspace():
            pos += 1
        else:
            start = pos
            while pos < len(blob) and not blob[pos:pos + 1].isspace():
                pos += 1
            tokens.append(blob[start:pos])
    magic, width, height, maxval = tokens
    if magic != b"P6":
        raise ValueError(f"{path}: not a binary P6 PPM (magic {magic!r})")
    if maxval != b"255":
        raise ValueError(f"{path}: only maxval 255 is supported, got {maxval!r}")
    w, h = int(width), int(height)
    pos += 1  # single whitespace after maxval
    pixels = np.frombuffer(blob, dtype=np.uint8, offset=pos)
    if pixels.size != h * w * 3:
        raise ValueError(f"{path}: expected {h * w * 3} pixel bytes, got {pixels.size}")
    return pixels.reshape(h, w, 3).astype(np.float64) / 255.0


def write_ppm(path: str, image: np.ndarray):
    """Write a float image as P6; values are clamped to [0,1] then rounded."""
    image = np.asarray(image, dtype=np.float64)
    if image.ndim != 3 or image.shape[2] != 3:
        raise ValueError(f"expected an H x W x 3 image, got shape {image.shape}")
    h, w, _ = image.shape
    clamped = np.clip(image, 0.0, 1.0)
    bytes_ = np.floor(255.0 * clamped + 0.5).astype(np.uint8)
    with open(path, "wb") as f:
        f.write(f"P6\n{w} {h}\n255\n".encode("ascii"))
        f.write(bytes_.tobytes())
