"""Synthetic illumination corruptions and training-time augmentations.

Three corruption families, each with five severities taken from fixed
tables: brightness (additive push on the HSV value channel), contrast
(shrink toward the per-channel spatial mean), and darken (global scaling).
Corruptions are pure functions applied on the fly; augmentation consumes an
explicit per-image RNG substream so batches stay reproducible.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

BRIGHTNESS_ADD = (0.1, 0.2, 0.3, 0.4, 0.5)
CONTRAST_SCALE = (0.4, 0.3, 0.2, 0.1, 0.05)
DARKEN_SCALE = (0.8, 0.6, 0.4, 0.25, 0.1)

KINDS = ("brightness", "contrast", "darken")

_TABLES = {
    "brightness": BRIGHTNESS_ADD,
    "contrast": CONTRAST_SCALE,
    "darken": DARKEN_SCALE,
}


@dataclass(frozen=True)
class CorruptionSpec:
    kind: str
    severity: int

    def __post_init__(self):
        if self.kind not in _TABLES:
            raise ValueError(f"unknown corruption {self.kind!r}")
        if not 1 <= self.severity <= 5:
            raise ValueError("severity must be in 1..5")

    @property
    def param(self) -> float:
        return _TABLES[self.kind][self.severity - 1]


@dataclass(frozen=True)
class AugmentSpec:
    jitter_low: float = 0.5
    jitter_high: float = 1.0
    crop_padding: int = 4
    hflip_prob: float = 0.5

    def __post_init__(self):
        if not 0.0 < self.jitter_low <= self.jitter_high <= 1.0:
            raise ValueError("jitter range must sit within (0, 1]")


def apply_corruption(image: np.ndarray, spec: CorruptionSpec) -> np.ndarray:
    if spec.kind == "brightness":
        return corrupt_brightness(image, spec.param)
    if spec.kind == "contrast":
        return corrupt_contrast(image, spec.param)
    return corrupt_darken(image, spec.param)


# ---------------------------------------------------------------------------
# HSV hexcone model; arrays of shape (..., 3)


def rgb_to_hsv(rgb: np.ndarray) -> np.ndarray:
    rgb = np.asarray(rgb, dtype=np.float64)
    r, g, b = rgb[..., 0], rgb[..., 1], rgb[..., 2]
    mx = rgb.max(axis=-1)
    mn = rgb.min(axis=-1)
    delta = mx - mn
    safe = np.where(delta == 0.0, 1.0, delta)
    h6 = np.select(
        [delta == 0.0, mx == r, mx == g],
        [0.0, np.mod((g - b) / safe, 6.0), (b - r) / safe + 2.0],
        default=(r - g) / safe + 4.0,
    )
    s = np.where(mx > 0.0, delta / np.where(mx > 0.0, mx, 1.0), 0.0)
    return np.stack([h6 / 6.0, s, mx], axis=-1)


def hsv_to_rgb(hsv: np.ndarray) -> np.ndarray:
    hsv = np.asarray(hsv, dtype=np.float64)
    h, s, v = hsv[..., 0], hsv[..., 1], hsv[..., 2]
    h6 = h * 6.0
    i = np.floor(h6).astype(np.int64) % 6
    f = h6 - np.floor(h6)
    p = v * (1.0 - s)
    q = v * (1.0 - f * s)
    t = v * (1.0 - (1.0 - f) * s)
    r = np.choose(i, [v, q, p, p, t, v])
    g = np.choose(i, [t, v, v, q, p, p])
    b = np.choose(i, [p, p, t, v, v, q])
    return np.stack([r, g, b], axis=-1)


def corrupt_brightness(image: np.ndarray, c: float) -> np.ndarray:
    """Add c to the HSV value channel (clamped at 1) and convert back."""
    hsv = rgb_to_hsv(image)
    hsv[..., 2] = np.minimum(1.0, hsv[..., 2] + c)
    return np.clip(hsv_to_rgb(hsv), 0.0, 1.0)


def corrupt_contrast(image: np.ndarray, s: float) -> np.ndarray:
    """Scale deviations from the per-channel spatial mean by s.

    s = 1 is the identity by definition and returns the input unchanged,
    sidestepping float round-off in the recentering.
    """
    image = np.asarray(image, dtype=np.float64)
    if s == 1.0:
        return image.copy()
    mean = image.mean(axis=(-3, -2), keepdims=True)
    return mean + s * (image - mean)


def corrupt_darken(image: np.ndarray, a: float) -> np.ndarray:
    return np.asarray(image, dtype=np.float64) * a


def augment(image: np.ndarray, spec: AugmentSpec, rng) -> np.ndarray:
    """Darkening jitter, zero-padded random crop, then horizontal flip.

    Draw order from rng is fixed: jitter factor, crop row, crop col, flip.
    """
    image = np.asarray(image, dtype=np.float64)
    h, w, c = image.shape
    u = rng.uniform(spec.jitter_low, spec.jitter_high)
    out = image * u
    pad = spec.crop_padding
    if pad > 0:
        padded = np.zeros((h + 2 * pad, w + 2 * pad, c))
        padded[pad:pad + h, pad:pad + w] = out
        r0 = int(rng.integers(0, 2 * pad + 1))
        c0 = int(rng.integers(0, 2 * pad + 1))
        out = padded[r0:r0 + h, c0:c0 + w]
    if rng.random() < spec.hflip_prob:
        out = out[:, ::-1]
    return np.ascontiguousarray(out)
