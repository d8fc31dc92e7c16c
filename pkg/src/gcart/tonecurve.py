"""Endpoint-pinned rational tone curves.

The curve f(x) = (a x^2 + b x) / (d x^2 + e x + 1) maps [0,1] with f(0) = 0
structurally (no constant numerator term) and f(1) = 1 via b = d + e + 1 - a.
Raw (a, d~, e~) triples are made safe by softplus on d~ and e~, which keeps
the denominator >= 1 on [0,1]. Outputs are intentionally not clamped; only
8-bit image export clamps.

Monotonicity is encouraged, not enforced: the penalty is the mean positive
part of negative adjacent finite differences of f on a uniform grid.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from gcart import engine, kernels
from gcart.engine import Tensor, record_op


@dataclass(frozen=True)
class RawCurveParams:
    """Unconstrained per-channel triple as predicted by the hypernetwork."""

    a: float
    d_raw: float
    e_raw: float


@dataclass(frozen=True)
class EffectiveCurveParams:
    """Coefficients actually evaluated; d, e > 0 and b pins f(1) = 1."""

    a: float
    b: float
    d: float
    e: float


@dataclass(frozen=True)
class MonoConfig:
    grid_size: int = 32
    weight: float = 10.0

    def __post_init__(self):
        if self.grid_size < 2:
            raise ValueError("monotonicity grid needs at least 2 points")
        if self.weight < 0.0:
            raise ValueError("penalty weight must be non-negative")


def _softplus(x):
    x = np.asarray(x, dtype=np.float64)
    return np.maximum(x, 0.0) + np.log1p(np.exp(-np.abs(x)))


def effective_params(raw: RawCurveParams) -> EffectiveCurveParams:
    d = float(_softplus(raw.d_raw))
    e = float(_softplus(raw.e_raw))
    b = d + e + 1.0 - raw.a
    return EffectiveCurveParams(a=raw.a, b=b, d=d, e=e)


def curve_eval(p: EffectiveCurveParams, x):
    """Evaluate f at x (scalar or array). Not clamped."""
    x = np.asarray(x, dtype=np.float64)
    xx = x * x
    out = (p.a * xx + p.b * x) / (p.d * xx + p.e * x + 1.0)
    return float(out) if out.ndim == 0 else out


def curve_derivative(p: EffectiveCurveParams, x):
    """Analytic f'(x) by the quotient rule."""
    x = np.asarray(x, dtype=np.float64)
    xx = x * x
    num = p.a * xx + p.b * x
    den = p.d * xx + p.e * x + 1.0
    out = ((2.0 * p.a * x + p.b) * den - num * (2.0 * p.d * x + p.e)) / (den * den)
    return float(out) if out.ndim == 0 else out


def apply_curve(image: np.ndarray, params) -> np.ndarray:
    """Pointwise per-channel application to an H x W x C image.

    params: one EffectiveCurveParams per channel. Output at a pixel depends
    only on that pixel's value and its channel's coefficients.
    """
    image = np.asarray(image, dtype=np.float64)
    h, w, c = image.shape
    if len(params) != c:
        raise ValueError(f"got {len(params)} parameter sets for {c} channels")
    rows = np.ascontiguousarray(image.transpose(2, 0, 1).reshape(c, h * w))
    a = np.array([p.a for p in params])
    b = np.array([p.b for p in params])
    d = np.array([p.d for p in params])
    e = np.array([p.e for p in params])
    out = kernels.curve_forward(rows, a, b, d, e)
    return out.reshape(c, h, w).transpose(1, 2, 0)


def uniform_grid(m: int) -> np.ndarray:
    return np.linspace(0.0, 1.0, m)


def mono_penalty_from_samples(samples: np.ndarray) -> float:
    """Penalty from already-sampled curve values along the last axis."""
    samples = np.asarray(samples, dtype=np.float64)
    if samples.shape[-1] < 2:
        raise ValueError("need at least 2 samples per curve")
    diffs = samples[..., 1:] - samples[..., :-1]
    return float(np.mean(np.maximum(0.0, -diffs)))


def mono_penalty(params, cfg: MonoConfig = MonoConfig()) -> float:
    """Mean hinge of negative adjacent differences over channels and grid."""
    t = uniform_grid(cfg.grid_size)
    samples = np.stack([curve_eval(p, t) for p in params])
    return mono_penalty_from_samples(samples)


# ---------------------------------------------------------------------------
# tape path

_SEL_A = np.array([[1.0], [0.0], [0.0]])
_SEL_D = np.array([[0.0], [1.0], [0.0]])
_SEL_E = np.array([[0.0], [0.0], [1.0]])


def effective_params_rows(raw: Tensor):
    """Raw (N, 3) triples -> column tensors a, b, d, e of shape (N, 1)."""
    a = engine.matmul(raw, Tensor(_SEL_A))
    d = engine.softplus(engine.matmul(raw, Tensor(_SEL_D)))
    e = engine.softplus(engine.matmul(raw, Tensor(_SEL_E)))
    b = engine.sub(engine.add(engine.add(d, e), Tensor(1.0)), a)
    return a, b, d, e


def curve_rows(x: Tensor, a: Tensor, b: Tensor, d: Tensor, e: Tensor) -> Tensor:
    """Fused tape op: rational curve over (N, P) rows with (N, 1) coefficients."""
    xv = x.data
    av, bv, dv, ev = (t.data.reshape(-1) for t in (a, b, d, e))
    out = kernels.curve_forward(xv, av, bv, dv, ev)

    def vjp(g):
        gx, ga, gb, gd, ge = kernels.curve_backward(xv, av, bv, dv, ev, g)
        col = (-1, 1)
        return (gx, ga.reshape(col), gb.reshape(col), gd.reshape(col), ge.reshape(col))

    return record_op("rational_curve", out, (x, a, b, d, e), vjp)


def _diff_matrix(m: int) -> np.ndarray:
    dm = np.zeros((m, m - 1))
    idx = np.arange(m - 1)
    dm[idx, idx] = -1.0
    dm[idx + 1, idx] = 1.0
    return dm


def mono_penalty_rows(a: Tensor, b: Tensor, d: Tensor, e: Tensor,
                      cfg: MonoConfig = MonoConfig()) -> Tensor:
    """Tape op chain for the penalty, flat-averaged over rows and differences."""
    n = a.data.shape[0]
    grid = np.broadcast_to(uniform_grid(cfg.grid_size), (n, cfg.grid_size)).copy()
    f = curve_rows(Tensor(grid), a, b, d, e)
    diffs = engine.matmul(f, Tensor(_diff_matrix(cfg.grid_size)))
    return engine.mean(engine.max0(engine.mul(diffs, Tensor(-1.0))))
