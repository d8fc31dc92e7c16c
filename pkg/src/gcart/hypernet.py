"""The small MLP that predicts raw curve parameters from a soft histogram.

One shared network (16 -> 32 -> 3, ReLU; 643 parameters at the default
shape) is applied independently to every channel's histogram. The final
layer starts at exactly zero weights with bias (0, -5, -5), so the initial
prediction ignores its input and the whole enhancer opens within about 1%
of the identity map.
"""

from __future__ import annotations

import json
from dataclasses import dataclass

import numpy as np

from gcart import engine
from gcart.engine import Tensor
from gcart.tonecurve import RawCurveParams

INIT_FINAL_BIAS = (0.0, -5.0, -5.0)


@dataclass
class HyperNetWeights:
    w1: np.ndarray  # (bins, hidden)
    b1: np.ndarray  # (hidden,)
    w2: np.ndarray  # (hidden, 3)
    b2: np.ndarray  # (3,)


def init_weights(rng: np.random.Generator, bins: int = 16, hidden: int = 32) -> HyperNetWeights:
    """Seeded init: first layer fan-in-scaled uniform, final layer zeroed."""
    bound = 1.0 / np.sqrt(bins)
    return HyperNetWeights(
        w1=rng.uniform(-bound, bound, size=(bins, hidden)),
        b1=np.zeros(hidden),
        w2=np.zeros((hidden, 3)),
        b2=np.array(INIT_FINAL_BIAS),
    )


def param_count(w: HyperNetWeights) -> int:
    return w.w1.size + w.b1.size + w.w2.size + w.b2.size


def predict_raw_rows(hists: np.ndarray, w: HyperNetWeights) -> np.ndarray:
    """Plain-numpy forward for a stack of histograms: (N, K) -> (N, 3)."""
    hists = np.asarray(hists, dtype=np.float64)
    if hists.ndim != 2 or hists.shape[1] != w.w1.shape[0]:
        raise ValueError(f"histogram rows of shape {hists.shape} do not match "
                         f"input width {w.w1.shape[0]}")
    hidden = np.maximum(hists @ w.w1 + w.b1, 0.0)
    return hidden @ w.w2 + w.b2


def predict_raw_params(hist: np.ndarray, w: HyperNetWeights) -> RawCurveParams:
    """Single histogram -> the raw per-channel parameter triple."""
    hist = np.asarray(hist, dtype=np.float64)
    if hist.ndim != 1:
        raise ValueError(f"expected a K-vector, got shape {hist.shape}")
    a, d_raw, e_raw = predict_raw_rows(hist[None, :], w)[0]
    return RawCurveParams(a=float(a), d_raw=float(d_raw), e_raw=float(e_raw))


def as_tensors(w: HyperNetWeights) -> dict[str, Tensor]:
    """Wrap the weights as gradient-tracked tensors sharing the same arrays."""
    return {name: Tensor(getattr(w, name), requires_grad=True)
            for name in ("w1", "b1", "w2", "b2")}


def predict_rows_tape(hists: Tensor, wt: dict[str, Tensor]) -> Tensor:
    """Tape forward: histogram rows (N, K) -> raw parameter rows (N, 3)."""
    if hists.data.shape[1] != wt["w1"].data.shape[0]:
        raise ValueError(f"histogram rows of shape {hists.data.shape} do not match "
                         f"input width {wt['w1'].data.shape[0]}")
    hidden = engine.relu(engine.add(engine.matmul(hists, wt["w1"]), wt["b1"]))
    return engine.add(engine.matmul(hidden, wt["w2"]), wt["b2"])


def save_checkpoint(path, w: HyperNetWeights):
    doc = {
        "version": 1,
        "w1": w.w1.tolist(),
        "b1": w.b1.tolist(),
        "w2": w.w2.tolist(),
        "b2": w.b2.tolist(),
    }
    with open(path, "w") as f:
        json.dump(doc, f)
        f.write("\n")


def load_checkpoint(path) -> HyperNetWeights:
    with open(path) as f:
        doc = json.load(f)
    if doc.get("version") != 1:
        raise ValueError(f"unsupported checkpoint version {doc.get('version')!r}")
    w = HyperNetWeights(
        w1=np.asarray(doc["w1"], dtype=np.float64),
        b1=np.asarray(doc["b1"], dtype=np.float64),
        w2=np.asarray(doc["w2"], dtype=np.float64),
        b2=np.asarray(doc["b2"], dtype=np.float64),
    )
    if w.w1.ndim != 2 or w.b1.shape != (w.w1.shape[1],) \
            or w.w2.shape != (w.w1.shape[1], 3) or w.b2.shape != (3,):
        raise ValueError("checkpoint arrays have inconsistent shapes")
    return w
