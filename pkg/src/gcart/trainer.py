"""Desk-scale end-to-end training of enhancer + classifier.

The classifier is a pluggable flatten -> hidden ReLU -> logits head standing
in for a full-size backbone. With the curve enhancer enabled, every step
runs soft histograms -> parameter MLP -> effective coefficients -> pointwise
curve -> head -> cross-entropy, adds the weighted monotonicity penalty, and
backpropagates through the whole chain before one Adam update.

The optimization loop is single-threaded and all randomness flows from the
config seed through fixed SeedSequence keys, so a rerun with the same seed
on the same platform reproduces the weights bit for bit.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from gcart import engine, hypernet, kernels
from gcart.classical import ClassicalSpec, apply_classical, gamma_correct
from gcart.corruptions import AugmentSpec, augment
from gcart.engine import Tape, Tensor
from gcart.hypernet import HyperNetWeights
from gcart.softhist import HistogramConfig, hist_rows, soft_histogram_rows
from gcart.tonecurve import (EffectiveCurveParams, MonoConfig, curve_rows,
                             effective_params_rows, mono_penalty_rows,
                             uniform_grid)

ENHANCERS = ("none", "gcart", "he", "clahe", "gamma")

# SeedSequence stream keys: (seed, key, ...) -> independent substream
_KEY_HYPER_INIT = 1
_KEY_HEAD_INIT = 2
_KEY_SHUFFLE = 3
_KEY_AUGMENT = 4


def _rng(*key) -> np.random.Generator:
    return np.random.Generator(np.random.PCG64(np.random.SeedSequence(list(key))))


def parse_enhancer(name: str, clahe_tiles: int = 4, clahe_clip: float = 2.0):
    """Split an enhancer flag into (kind, classical spec or None)."""
    if name in ("none", "gcart"):
        return name, None
    if name == "he":
        return "he", ClassicalSpec("he")
    if name == "clahe":
        return "clahe", ClassicalSpec("clahe", clahe_tiles=clahe_tiles, clahe_clip=clahe_clip)
    if name == "gamma":
        return "gamma", ClassicalSpec("gamma")
    if name.startswith("gamma:"):
        return "gamma", ClassicalSpec("gamma", gamma_value=float(name.split(":", 1)[1]))
    raise ValueError(f"unknown enhancer {name!r} "
                     "(expected none|gcart|he|clahe|gamma:<g>)")


# ---------------------------------------------------------------------------
# classifier head


@dataclass
class HeadWeights:
    w1: np.ndarray  # (input_dim, hidden)
    b1: np.ndarray
    w2: np.ndarray  # (hidden, classes)
    b2: np.ndarray


def init_head(rng: np.random.Generator, input_dim: int = 3072, hidden: int = 128,
              classes: int = 10) -> HeadWeights:
    return HeadWeights(
        w1=rng.uniform(-1.0, 1.0, size=(input_dim, hidden)) / np.sqrt(input_dim),
        b1=np.zeros(hidden),
        w2=rng.uniform(-1.0, 1.0, size=(hidden, classes)) / np.sqrt(hidden),
        b2=np.zeros(classes),
    )


def head_param_count(w: HeadWeights) -> int:
    return w.w1.size + w.b1.size + w.w2.size + w.b2.size


def head_as_tensors(w: HeadWeights) -> dict[str, Tensor]:
    return {name: Tensor(getattr(w, name), requires_grad=True)
            for name in ("w1", "b1", "w2", "b2")}


def head_logits_tape(x: Tensor, ht: dict[str, Tensor]) -> Tensor:
    hidden = engine.relu(engine.add(engine.matmul(x, ht["w1"]), ht["b1"]))
    return engine.add(engine.matmul(hidden, ht["w2"]), ht["b2"])


def head_logits_numpy(x: np.ndarray, w: HeadWeights) -> np.ndarray:
    return np.maximum(x @ w.w1 + w.b1, 0.0) @ w.w2 + w.b2


def save_head(path, w: HeadWeights):
    doc = {"version": 1, "w1": w.w1.tolist(), "b1": w.b1.tolist(),
           "w2": w.w2.tolist(), "b2": w.b2.tolist()}
    with open(path, "w") as f:
        json.dump(doc, f)
        f.write("\n")


def load_head(path) -> HeadWeights:
    with open(path) as f:
        doc = json.load(f)
    if doc.get("version") != 1:
        raise ValueError(f"unsupported checkpoint version {doc.get('version')!r}")
    return HeadWeights(*(np.asarray(doc[k], dtype=np.float64)
                         for k in ("w1", "b1", "w2", "b2")))


# ---------------------------------------------------------------------------
# losses and optimizer


def cross_entropy(logits: Tensor, labels: np.ndarray) -> Tensor:
    """Mean negative log softmax probability of the true class.

    Stabilized by subtracting the detached row max inside log-sum-exp; the
    shift cancels in the loss and its gradient.
    """
    labels = np.asarray(labels)
    n, k = logits.data.shape
    if labels.shape != (n,):
        raise ValueError(f"labels shape {labels.shape} does not match batch {n}")
    if labels.min() < 0 or labels.max() >= k:
        raise ValueError(f"labels must lie in [0, {k})")
    shift = Tensor(logits.data.max(axis=1, keepdims=True))
    z = engine.sub(logits, shift)
    lse = engine.log(engine.sum(engine.exp(z), axis=1))
    onehot = np.zeros((n, k))
    onehot[np.arange(n), labels] = 1.0
    picked = engine.sum(engine.mul(z, Tensor(onehot)), axis=1)
    return engine.mean(engine.sub(lse, picked))


def cross_entropy_numpy(logits: np.ndarray, labels: np.ndarray) -> float:
    shift = logits.max(axis=1, keepdims=True)
    z = logits - shift
    lse = np.log(np.exp(z).sum(axis=1))
    picked = z[np.arange(len(labels)), labels]
    return float(np.mean(lse - picked))


def cosine_lr(t: float, total: float, lr0: float) -> float:
    """Cosine annealing from lr0 at t=0 to 0 at t=total."""
    return lr0 * 0.5 * (1.0 + math.cos(math.pi * t / total))


@dataclass
class AdamState:
    m: list[np.ndarray]
    v: list[np.ndarray]


def adam_init(params: list[np.ndarray]) -> AdamState:
    return AdamState(m=[np.zeros_like(p) for p in params],
                     v=[np.zeros_like(p) for p in params])


def adam_step(params: list[np.ndarray], grads: list[np.ndarray], state: AdamState,
              t: int, lr: float, beta1: float = 0.9, beta2: float = 0.999,
              eps: float = 1e-8):
    """Bias-corrected Adam update, in place. t counts from 1."""
    for p, g, m, v in zip(params, grads, state.m, state.v):
        m *= beta1
        m += (1.0 - beta1) * g
        v *= beta2
        v += (1.0 - beta2) * g * g
        mhat = m / (1.0 - beta1 ** t)
        vhat = v / (1.0 - beta2 ** t)
        p -= lr * mhat / (np.sqrt(vhat) + eps)


# ---------------------------------------------------------------------------
# end-to-end model


def _rows(imgs: np.ndarray) -> np.ndarray:
    """(B, H, W, C) -> (B*C, H*W) with channels kept contiguous per image."""
    b, h, w, c = imgs.shape
    return np.ascontiguousarray(imgs.transpose(0, 3, 1, 2).reshape(b * c, h * w))


def gcart_curve_coeffs(rows: np.ndarray, hyper: HyperNetWeights,
                       hist_cfg: HistogramConfig = HistogramConfig()):
    """Plain-numpy histogram -> MLP -> effective coefficients for value rows."""
    hists = hist_rows(rows, hist_cfg)
    raw = hypernet.predict_raw_rows(hists, hyper)
    a = raw[:, 0]
    d = np.maximum(raw[:, 1], 0.0) + np.log1p(np.exp(-np.abs(raw[:, 1])))
    e = np.maximum(raw[:, 2], 0.0) + np.log1p(np.exp(-np.abs(raw[:, 2])))
    b = d + e + 1.0 - a
    return a, b, d, e


def gcart_enhance(image: np.ndarray, hyper: HyperNetWeights,
                  hist_cfg: HistogramConfig = HistogramConfig()) -> np.ndarray:
    """Full enhancement of one H x W x C image without a tape."""
    image = np.asarray(image, dtype=np.float64)
    h, w, c = image.shape
    rows = _rows(image[None])
    a, b, d, e = gcart_curve_coeffs(rows, hyper, hist_cfg)
    out = kernels.curve_forward(rows, a, b, d, e)
    return out.reshape(c, h, w).transpose(1, 2, 0)


class Model:
    """Enhancer + classifier pair with tape and plain-numpy forward paths."""

    def __init__(self, enhancer: str, head: HeadWeights,
                 hyper: Optional[HyperNetWeights] = None,
                 classical_spec: Optional[ClassicalSpec] = None,
                 hist_cfg: HistogramConfig = HistogramConfig(),
                 mono_cfg: MonoConfig = MonoConfig()):
        kind, parsed_spec = parse_enhancer(enhancer)
        self.enhancer = kind
        self.classical_spec = classical_spec if classical_spec is not None else parsed_spec
        self.head = head
        self.hyper = hyper
        if kind == "gcart" and hyper is None:
            raise ValueError("gcart enhancer needs hypernetwork weights")
        self.hist_cfg = hist_cfg
        self.mono_cfg = mono_cfg
        self.ht = head_as_tensors(head)
        self.wt = hypernet.as_tensors(hyper) if kind == "gcart" else None

    def params(self) -> list[tuple[str, Tensor]]:
        out = []
        if self.wt is not None:
            out += [(f"hyper.{k}", self.wt[k]) for k in ("w1", "b1", "w2", "b2")]
        out += [(f"head.{k}", self.ht[k]) for k in ("w1", "b1", "w2", "b2")]
        return out

    def _prepare(self, imgs: np.ndarray) -> np.ndarray:
        if self.classical_spec is None:
            return imgs
        if self.classical_spec.kind == "gamma":
            return gamma_correct(imgs, self.classical_spec.gamma_value)
        return np.stack([apply_classical(im, self.classical_spec) for im in imgs])

    def _curve_coeffs_numpy(self, rows: np.ndarray):
        return gcart_curve_coeffs(rows, self.hyper, self.hist_cfg)

    def loss_tape(self, imgs: np.ndarray, labels: np.ndarray, lambda_mono: float):
        """Build the training loss on the active tape.

        Returns (loss, ce, mono) tensors; mono is None for enhancers with no
        learned curve.
        """
        imgs = self._prepare(imgs)
        b = imgs.shape[0]
        rows = _rows(imgs)
        if self.enhancer == "gcart":
            x = Tensor(rows)
            hists = soft_histogram_rows(x, self.hist_cfg)
            raw = hypernet.predict_rows_tape(hists, self.wt)
            ca, cb, cd, ce_ = effective_params_rows(raw)
            enhanced = curve_rows(x, ca, cb, cd, ce_)
            flat = engine.reshape(enhanced, (b, -1))
            mono = mono_penalty_rows(ca, cb, cd, ce_, self.mono_cfg)
        else:
            flat = Tensor(rows.reshape(b, -1))
            mono = None
        logits = head_logits_tape(flat, self.ht)
        ce = cross_entropy(logits, labels)
        if mono is not None and lambda_mono != 0.0:
            loss = engine.add(ce, engine.mul(Tensor(float(lambda_mono)), mono))
        else:
            loss = ce
        return loss, ce, mono

    def loss_numpy(self, imgs: np.ndarray, labels: np.ndarray, lambda_mono: float) -> float:
        """Independent tape-free evaluation of the same training loss."""
        imgs = self._prepare(imgs)
        b = imgs.shape[0]
        rows = _rows(imgs)
        mono = 0.0
        if self.enhancer == "gcart":
            a, cb, d, e = self._curve_coeffs_numpy(rows)
            rows = kernels.curve_forward(rows, a, cb, d, e)
            grid = np.broadcast_to(uniform_grid(self.mono_cfg.grid_size),
                                   (len(a), self.mono_cfg.grid_size))
            f = kernels.curve_forward(np.ascontiguousarray(grid), a, cb, d, e)
            diffs = f[:, 1:] - f[:, :-1]
            mono = float(np.mean(np.maximum(0.0, -diffs)))
        logits = head_logits_numpy(rows.reshape(b, -1), self.head)
        return cross_entropy_numpy(logits, np.asarray(labels)) + lambda_mono * mono

    def logits(self, imgs: np.ndarray) -> np.ndarray:
        """Plain-numpy inference logits for a (B, H, W, C) batch."""
        imgs = self._prepare(imgs)
        b = imgs.shape[0]
        rows = _rows(imgs)
        if self.enhancer == "gcart":
            a, cb, d, e = self._curve_coeffs_numpy(rows)
            rows = kernels.curve_forward(rows, a, cb, d, e)
        return head_logits_numpy(rows.reshape(b, -1), self.head)

    def enhance(self, image: np.ndarray) -> np.ndarray:
        """Single-image enhancement as used by the CLI apply path."""
        if self.enhancer == "none":
            return np.asarray(image, dtype=np.float64).copy()
        if self.enhancer != "gcart":
            return apply_classical(image, self.classical_spec)
        return gcart_enhance(image, self.hyper, self.hist_cfg)

    def effective_params(self, image: np.ndarray) -> list[EffectiveCurveParams]:
        """Per-channel coefficients the enhancer would use on this image."""
        rows = _rows(np.asarray(image, dtype=np.float64)[None])
        a, cb, d, e = self._curve_coeffs_numpy(rows)
        return [EffectiveCurveParams(a=float(a[i]), b=float(cb[i]),
                                     d=float(d[i]), e=float(e[i]))
                for i in range(len(a))]


# ---------------------------------------------------------------------------
# training loop


@dataclass
class TrainConfig:
    seed: int = 42
    epochs: int = 5
    batch_size: int = 128
    lr0: float = 1e-3
    lambda_mono: float = 10.0
    enhancer: str = "gcart"
    augment: bool = True
    hist_bins: int = 16
    hist_gamma: float = 0.01
    mono_grid: int = 32
    head_hidden: int = 128
    num_classes: int = 10
    clahe_tiles: int = 4
    clahe_clip: float = 2.0
    adam_beta1: float = 0.9
    adam_beta2: float = 0.999
    adam_eps: float = 1e-8

    def validate(self):
        if self.batch_size < 1:
            raise ValueError("batch_size must be at least 1")
        if self.lr0 <= 0.0:
            raise ValueError("lr0 must be positive")
        if self.epochs < 1:
            raise ValueError("epochs must be at least 1")
        if self.lambda_mono < 0.0:
            raise ValueError("lambda must be non-negative")
        parse_enhancer(self.enhancer, self.clahe_tiles, self.clahe_clip)


@dataclass
class TrainResult:
    model: Model
    log: list[dict] = field(default_factory=list)


def build_model(config: TrainConfig, input_dim: int) -> Model:
    kind, spec = parse_enhancer(config.enhancer, config.clahe_tiles, config.clahe_clip)
    hyper = None
    if kind == "gcart":
        hyper = hypernet.init_weights(_rng(config.seed, _KEY_HYPER_INIT),
                                      bins=config.hist_bins)
    head = init_head(_rng(config.seed, _KEY_HEAD_INIT), input_dim=input_dim,
                     hidden=config.head_hidden, classes=config.num_classes)
    return Model(kind, head, hyper=hyper, classical_spec=spec,
                 hist_cfg=HistogramConfig(bins=config.hist_bins, gamma=config.hist_gamma),
                 mono_cfg=MonoConfig(grid_size=config.mono_grid, weight=config.lambda_mono))


def train(config: TrainConfig, images: np.ndarray, labels: np.ndarray,
          eval_images: Optional[np.ndarray] = None,
          eval_labels: Optional[np.ndarray] = None) -> TrainResult:
    """Train on (N, H, W, C) images in [0,1] with integer labels."""
    config.validate()
    images = np.asarray(images, dtype=np.float64)
    labels = np.asarray(labels)
    n = images.shape[0]
    if n == 0:
        raise ValueError("training set is empty")
    if labels.min() < 0 or labels.max() >= config.num_classes:
        raise ValueError("labels out of range for the configured class count")

    input_dim = int(np.prod(images.shape[1:]))
    model = build_model(config, input_dim)
    params = model.params()
    arrays = [p.data for _, p in params]
    state = adam_init(arrays)
    aug_spec = AugmentSpec()

    batches_per_epoch = math.ceil(n / config.batch_size)
    total_steps = config.epochs * batches_per_epoch
    log = []
    step = 0
    for epoch in range(config.epochs):
        order = _rng(config.seed, _KEY_SHUFFLE, epoch).permutation(n)
        ce_sum = 0.0
        mono_sum = 0.0
        for lo in range(0, n, config.batch_size):
            idx = order[lo:lo + config.batch_size]
            batch = images[idx]
            if config.augment:
                batch = np.stack([
                    augment(im, aug_spec, _rng(config.seed, _KEY_AUGMENT, epoch, int(i)))
                    for im, i in zip(batch, idx)])
            with Tape() as tape:
                loss, ce, mono = model.loss_tape(batch, labels[idx], config.lambda_mono)
            tape.backward(loss)
            grads = []
            for name, p in params:
                g = tape.grad(p)
                if g is None:
                    raise RuntimeError(f"no gradient reached parameter {name}")
                grads.append(g)
            lr = cosine_lr(step, total_steps, config.lr0)
            step += 1
            adam_step(arrays, grads, state, step, lr,
                      config.adam_beta1, config.adam_beta2, config.adam_eps)
            ce_sum += float(ce.data)
            mono_sum += float(mono.data) if mono is not None else 0.0
        epoch_ce = ce_sum / batches_per_epoch
        epoch_mono = mono_sum / batches_per_epoch
        entry = {
            "epoch": epoch + 1,
            "ce": epoch_ce,
            "mono": epoch_mono,
            "loss": epoch_ce + config.lambda_mono * epoch_mono,
        }
        if eval_images is not None and len(eval_images):
            from gcart.evalreport import evaluate

            entry["clean_acc"] = evaluate(model, eval_images, eval_labels, None)
        log.append(entry)
    return TrainResult(model=model, log=log)
