"""Differentiable per-channel soft histograms.

Each pixel contributes a Gaussian RBF response to every bin; the histogram
entry is the spatial mean of those responses. Depends only on the single
input image - no dataset-level statistics.

Rows are accumulated in sorted-value order. Sorting canonicalizes the
floating-point summation, which is what makes the histogram bitwise invariant
under spatial shuffles of the pixels (the derivative needs no such care: it
is a per-pixel function, independent of ordering).
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from gcart import kernels
from gcart.engine import Tensor, record_op


@dataclass(frozen=True)
class HistogramConfig:
    """Bin count, RBF bandwidth denominator, and derived bin centers."""

    bins: int = 16
    gamma: float = 0.01
    centers: np.ndarray = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        if self.bins < 2:
            raise ValueError("need at least 2 bins")
        if self.gamma <= 0.0:
            raise ValueError("gamma must be positive")
        # endpoint-inclusive uniform centers: 0, 1/(K-1), ..., 1
        c = np.linspace(0.0, 1.0, self.bins)
        c.flags.writeable = False
        object.__setattr__(self, "centers", c)


def hist_rows(rows: np.ndarray, cfg: HistogramConfig = HistogramConfig()) -> np.ndarray:
    """Histograms of (N, P) value rows, one row per image-channel pair."""
    rows = np.asarray(rows, dtype=np.float64)
    if rows.ndim != 2 or rows.shape[1] == 0:
        raise ValueError(f"expected non-empty (N, P) rows, got shape {rows.shape}")
    rows = np.sort(rows, axis=1)
    return kernels.hist_forward(rows, cfg.centers, cfg.gamma)


def soft_histogram(image: np.ndarray, cfg: HistogramConfig = HistogramConfig()) -> np.ndarray:
    """Soft histogram of an H x W x C image: returns a (C, K) matrix."""
    image = np.asarray(image, dtype=np.float64)
    if image.ndim != 3 or image.size == 0:
        raise ValueError(f"expected a non-empty H x W x C image, got shape {image.shape}")
    h, w, c = image.shape
    return hist_rows(image.transpose(2, 0, 1).reshape(c, h * w), cfg)


def soft_histogram_rows(x: Tensor, cfg: HistogramConfig = HistogramConfig()) -> Tensor:
    """Tape op: (N, P) rows of pixel values -> (N, K) histograms.

    Differentiable w.r.t. the pixel values; the derivative is evaluated
    directly on the unsorted rows since it is order-independent.
    """
    out = hist_rows(x.data, cfg)

    def vjp(g):
        return (kernels.hist_backward(x.data, cfg.centers, cfg.gamma, g),)

    return record_op("soft_histogram", out, (x,), vjp)
