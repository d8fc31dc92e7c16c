"""Vectorized numpy implementations of the hot kernels.

These are the fallback used when the compiled extension is unavailable, and
the reference the extension is tested against. Both backends accept the same
shapes: a batch of N independent rows (one per image-channel pair) of P
values each, with K histogram bin centers.
"""

import numpy as np

NAME = "numpy"

# Rows above this N*P*K volume are processed in chunks to bound the size of
# the (n, P, K) broadcast temporaries.
_CHUNK_VOLUME = 64 * 1024 * 1024


def _row_chunks(n_rows, per_row_volume):
    rows = max(1, _CHUNK_VOLUME // max(1, per_row_volume))
    for start in range(0, n_rows, rows):
        yield start, min(start + rows, n_rows)


def hist_forward(x, centers, gamma):
    """Mean Gaussian-RBF bin responses per row: (N, P) -> (N, K).

    Summation runs over axis 1 of the array exactly as given; callers that
    need permutation-invariant bits pass rows pre-sorted by value.
    """
    n, p = x.shape
    k = centers.shape[0]
    out = np.empty((n, k), dtype=np.float64)
    for lo, hi in _row_chunks(n, p * k):
        diff = x[lo:hi, :, None] - centers[None, None, :]
        np.square(diff, out=diff)
        diff /= -gamma
        np.exp(diff, out=diff)
        out[lo:hi] = diff.sum(axis=1)
    out /= p
    return out


def hist_backward(x, centers, gamma, gout):
    """Gradient of hist_forward w.r.t. x; order-independent by symmetry."""
    n, p = x.shape
    k = centers.shape[0]
    gx = np.empty((n, p), dtype=np.float64)
    for lo, hi in _row_chunks(n, p * k):
        diff = x[lo:hi, :, None] - centers[None, None, :]
        resp = np.exp(-(diff * diff) / gamma)
        resp *= diff
        resp *= -2.0 / gamma
        gx[lo:hi] = np.einsum("npk,nk->np", resp, gout[lo:hi])
    gx /= p
    return gx


def curve_forward(x, a, b, d, e):
    """Rational tone curve (a x^2 + b x) / (d x^2 + e x + 1) per row.

    x: (N, P); a, b, d, e: (N,) broadcast over the row axis.
    """
    a = a[:, None]
    b = b[:, None]
    d = d[:, None]
    e = e[:, None]
    xx = x * x
    return (a * xx + b * x) / (d * xx + e * x + 1.0)


def curve_backward(x, a, b, d, e, gy):
    """Gradients of curve_forward w.r.t. x and the four coefficient vectors.

    Returns (gx, ga, gb, gd, ge); the coefficient gradients are reduced over
    the row axis back to shape (N,).
    """
    a = a[:, None]
    b = b[:, None]
    d = d[:, None]
    e = e[:, None]
    xx = x * x
    den = d * xx + e * x + 1.0
    y = (a * xx + b * x) / den
    g_over_den = gy / den
    gx = g_over_den * ((2.0 * a * x + b) - y * (2.0 * d * x + e))
    ga = (g_over_den * xx).sum(axis=1)
    gb = (g_over_den * x).sum(axis=1)
    gd = -(g_over_den * y * xx).sum(axis=1)
    ge = -(g_over_den * y * x).sum(axis=1)
    return gx, ga, gb, gd, ge
