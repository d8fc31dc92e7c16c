"""Fixed, parameter-free pre-processors: histogram equalization, CLAHE,
and gamma correction.

All operate per channel on float images in [0,1], deterministically and
statelessly. HE and CLAHE quantize to 256 levels with round-half-away-from-
zero; a channel or tile whose pixels occupy a single level is passed through
unchanged rather than hitting the 0/0 in the CDF remap.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

LEVELS = 256


@dataclass(frozen=True)
class ClassicalSpec:
    kind: str  # "he" | "clahe" | "gamma"
    gamma_value: float = 2.2
    clahe_tiles: int = 4
    clahe_clip: float = 2.0

    def __post_init__(self):
        if self.kind not in ("he", "clahe", "gamma"):
            raise ValueError(f"unknown classical pre-processor {self.kind!r}")
        if self.gamma_value <= 0.0:
            raise ValueError("gamma must be positive")
        if self.clahe_tiles < 1:
            raise ValueError("clahe tile grid must be at least 1")
        if self.clahe_clip < 1.0:
            raise ValueError("clahe clip multiplier must be at least 1")


def apply_classical(image: np.ndarray, spec: ClassicalSpec) -> np.ndarray:
    if spec.kind == "he":
        return hist_equalize(image)
    if spec.kind == "clahe":
        return clahe(image, tiles=spec.clahe_tiles, clip=spec.clahe_clip)
    return gamma_correct(image, spec.gamma_value)


def gamma_correct(image: np.ndarray, g: float) -> np.ndarray:
    """Pointwise power map x -> x^g; fixes 0 and 1, monotone on (0,1]."""
    if g <= 0.0:
        raise ValueError("gamma must be positive")
    return np.asarray(image, dtype=np.float64) ** g


def _round_half_away(x: np.ndarray) -> np.ndarray:
    # inputs are non-negative here, so half-away == floor(x + 0.5)
    return np.floor(x + 0.5)


def _quantize(channel: np.ndarray) -> np.ndarray:
    v = _round_half_away(255.0 * channel).astype(np.int64)
    return np.clip(v, 0, LEVELS - 1)


def _he_lut(hist: np.ndarray, npix: int) -> np.ndarray:
    """Level remap from a histogram; identity when one level holds all mass."""
    occupied = np.nonzero(hist)[0]
    cdf = np.cumsum(hist)
    cdf_min = cdf[occupied[0]]
    if cdf_min == npix:
        return np.arange(LEVELS, dtype=np.int64)
    lut = _round_half_away(255.0 * (cdf - cdf_min) / (npix - cdf_min))
    return np.clip(lut, 0, LEVELS - 1).astype(np.int64)


def hist_equalize(image: np.ndarray) -> np.ndarray:
    """Global per-channel equalization through the empirical CDF.

    A channel whose pixels all quantize to one level is returned as-is
    (degenerate rule: no quantization round-trip either).
    """
    image = np.asarray(image, dtype=np.float64)
    out = np.empty_like(image)
    for c in range(image.shape[2]):
        v = _quantize(image[:, :, c])
        hist = np.bincount(v.ravel(), minlength=LEVELS)
        if np.count_nonzero(hist) == 1:
            out[:, :, c] = image[:, :, c]
            continue
        lut = _he_lut(hist, v.size)
        out[:, :, c] = lut[v] / 255.0
    return out


def _clip_redistribute(hist: np.ndarray, limit: int) -> np.ndarray:
    """Clip bins at `limit`, spreading the excess uniformly in one pass.

    The integer-division residue goes to the lowest bins in index order, so
    the result is deterministic and conserves the total count.
    """
    excess = int(np.maximum(hist - limit, 0).sum())
    if excess == 0:
        return hist
    clipped = np.minimum(hist, limit)
    clipped += excess // LEVELS
    clipped[: excess % LEVELS] += 1
    return clipped


def _tile_edges(size: int, tiles: int) -> np.ndarray:
    """Start offsets (plus end sentinel) of ceil-division tiles along one axis."""
    span = math.ceil(size / tiles)
    edges = list(range(0, size, span)) + [size]
    return np.asarray(edges)


def clahe(image: np.ndarray, tiles: int = 4, clip: float = 2.0) -> np.ndarray:
    """Contrast-limited adaptive equalization with bilinear tile blending."""
    if tiles < 1:
        raise ValueError("tile grid must be at least 1")
    if clip < 1.0:
        raise ValueError("clip multiplier must be at least 1")
    image = np.asarray(image, dtype=np.float64)
    h, w, chans = image.shape
    ye = _tile_edges(h, tiles)
    xe = _tile_edges(w, tiles)
    nty, ntx = len(ye) - 1, len(xe) - 1
    cy = (ye[:-1] + ye[1:] - 1) / 2.0
    cx = (xe[:-1] + xe[1:] - 1) / 2.0

    out = np.empty_like(image)
    for c in range(chans):
        v = _quantize(image[:, :, c])
        if np.count_nonzero(np.bincount(v.ravel(), minlength=LEVELS)) == 1:
            out[:, :, c] = image[:, :, c]  # degenerate rule shared with HE
            continue
        luts = np.empty((nty, ntx, LEVELS), dtype=np.int64)
        for i in range(nty):
            for j in range(ntx):
                sub = v[ye[i]:ye[i + 1], xe[j]:xe[j + 1]]
                hist = np.bincount(sub.ravel(), minlength=LEVELS)
                if np.count_nonzero(hist) == 1:
                    luts[i, j] = np.arange(LEVELS)
                    continue
                if math.isfinite(clip):
                    limit = max(1, int(clip * sub.size / LEVELS))
                    hist = _clip_redistribute(hist, limit)
                luts[i, j] = _he_lut(hist, sub.size)

        def _axis_mix(coord, centers):
            idx = np.searchsorted(centers, coord, side="right")
            i0 = np.clip(idx - 1, 0, len(centers) - 1)
            i1 = np.clip(idx, 0, len(centers) - 1)
            span = centers[i1] - centers[i0]
            t = np.where(span > 0, (coord - centers[i0]) / np.where(span > 0, span, 1.0), 0.0)
            return i0, i1, np.clip(t, 0.0, 1.0)

        y0, y1, ty = _axis_mix(np.arange(h, dtype=np.float64), cy)
        x0, x1, tx = _axis_mix(np.arange(w, dtype=np.float64), cx)
        ty = ty[:, None]
        tx = tx[None, :]
        l00 = luts[y0[:, None], x0[None, :], v]
        l01 = luts[y0[:, None], x1[None, :], v]
        l10 = luts[y1[:, None], x0[None, :], v]
        l11 = luts[y1[:, None], x1[None, :], v]
        top = (1.0 - tx) * l00 + tx * l01
        bot = (1.0 - tx) * l10 + tx * l11
        out[:, :, c] = ((1.0 - ty) * top + ty * bot) / 255.0
    return out
