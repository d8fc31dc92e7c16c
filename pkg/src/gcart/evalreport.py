"""Severity-sweep evaluation, per-seed JSON reports, cross-seed aggregation,
and the operation-count accountant.

The FLOP numbers come from a calibrated cost model: per-pixel-bin, per-MAC
and per-pixel constants fitted so the three reproducible module totals at
32x32 come out exactly. They are configuration values, not measurements.
"""

from __future__ import annotations

import json
import warnings
from dataclasses import asdict, dataclass

import numpy as np

from gcart.corruptions import KINDS, CorruptionSpec, apply_corruption

_EVAL_BATCH = 256

# Calibrated cost-model constants (see module docstring).
COST_MODEL = {
    "hist_flops_per_pixel_bin": 5,
    "hypernet_macs_per_channel": 608,
    "curve_flops_per_pixel": 7,
    "gamma_flops_per_pixel": 2,
    "he_flops_per_pixel": 6,
    "he_flops_per_channel": 256,
}

# Published totals for the convolutional enhancers, kept for report display
# only; their architectures are not modeled by count_flops.
REFERENCE_FLOPS = {
    "zero_dce": {"params": 11011, "total": 11252736},
    "zero_dce_pp": {"params": 1953, "total": 1908736},
}


def evaluate(model, images: np.ndarray, labels: np.ndarray,
             spec: CorruptionSpec | None, batch_size: int = _EVAL_BATCH) -> float:
    """Accuracy percent of `model` on images, optionally corrupted first.

    The corruption is applied before the enhancer, which itself is part of
    the model's forward path.
    """
    images = np.asarray(images, dtype=np.float64)
    labels = np.asarray(labels)
    n = images.shape[0]
    if n == 0:
        raise ValueError("evaluation set is empty")
    correct = 0
    for lo in range(0, n, batch_size):
        batch = images[lo:lo + batch_size]
        if spec is not None:
            batch = apply_corruption(batch, spec)
        pred = model.logits(batch).argmax(axis=1)
        correct += int((pred == labels[lo:lo + batch_size]).sum())
    return 100.0 * correct / n


def corruption_sweep(model, images, labels, batch_size: int = _EVAL_BATCH) -> dict:
    """All corruption kinds at all severities -> per-kind accuracy lists."""
    out = {}
    for kind in KINDS:
        per_severity = [evaluate(model, images, labels, CorruptionSpec(kind, s), batch_size)
                        for s in range(1, 6)]
        out[kind] = {"per_severity": per_severity,
                     "mean": sum(per_severity) / len(per_severity)}
    return out


def build_report(seed: int, config: dict, clean_acc: float, corruptions: dict,
                 train_log: list[dict] | None = None) -> dict:
    report = {
        "version": 1,
        "seed": seed,
        "config": config,
        "clean_acc": clean_acc,
        "corruptions": corruptions,
    }
    if train_log is not None:
        report["train_log"] = train_log
    return report


def write_json(path, doc: dict):
    with open(path, "w") as f:
        json.dump(doc, f, indent=2, sort_keys=True)
        f.write("\n")


def _mean_sd(values: list[float]) -> dict:
    arr = np.asarray(values, dtype=np.float64)
    if arr.size == 1:
        warnings.warn("aggregating a single seed: standard deviation is 0 by convention")
        return {"mean": float(arr[0]), "sd": 0.0}
    return {"mean": float(arr.mean()), "sd": float(arr.std(ddof=1))}


def aggregate(reports: list[dict]) -> dict:
    """Cross-seed mean and sample standard deviation for every cell."""
    if not reports:
        raise ValueError("no reports to aggregate")
    configs = []
    for r in reports:
        cfg = dict(r.get("config", {}))
        cfg.pop("seed", None)
        configs.append(cfg)
    if any(c != configs[0] for c in configs[1:]):
        raise ValueError("reports were produced with inconsistent configs")

    summary = {
        "version": 1,
        "n_seeds": len(reports),
        "seeds": [r["seed"] for r in reports],
        "config": configs[0],
        "clean_acc": _mean_sd([r["clean_acc"] for r in reports]),
        "corruptions": {},
    }
    kinds = reports[0]["corruptions"].keys()
    for kind in kinds:
        per_sev = [_mean_sd([r["corruptions"][kind]["per_severity"][s] for r in reports])
                   for s in range(5)]
        summary["corruptions"][kind] = {
            "per_severity": per_sev,
            "mean": _mean_sd([r["corruptions"][kind]["mean"] for r in reports]),
        }
    return summary


def summary_csv(summary: dict) -> str:
    """One-row table mirroring the clean/per-corruption column layout."""
    kinds = list(summary["corruptions"].keys())
    header = ["enhancer", "clean_mean", "clean_sd"]
    for kind in kinds:
        header += [f"{kind}_mean", f"{kind}_sd"]
    row = [str(summary["config"].get("enhancer", "?")),
           f"{summary['clean_acc']['mean']:.4f}", f"{summary['clean_acc']['sd']:.4f}"]
    for kind in kinds:
        cell = summary["corruptions"][kind]["mean"]
        row += [f"{cell['mean']:.4f}", f"{cell['sd']:.4f}"]
    return ",".join(header) + "\n" + ",".join(row) + "\n"


# ---------------------------------------------------------------------------
# FLOPs accounting


@dataclass(frozen=True)
class FlopsReport:
    module: str
    h: int
    w: int
    c: int
    params: int
    param_prediction_flops: int  # resolution-independent component
    pixel_flops: int             # scales with h*w*c
    total: int

    def as_dict(self) -> dict:
        doc = asdict(self)
        doc["cost_model"] = dict(COST_MODEL)
        return doc


def count_flops(module: str, h: int, w: int, c: int = 3) -> FlopsReport:
    """Operation count for one forward enhancement of an h x w x c image.

    Models the default 16-bin, 643-parameter configuration.
    """
    if h < 1 or w < 1:
        raise ValueError("image dimensions must be positive")
    if c != 3:
        raise ValueError("the cost model is calibrated for 3-channel images")
    bins = 16
    pixels = h * w * c
    if module == "gcart":
        pixel = COST_MODEL["hist_flops_per_pixel_bin"] * bins * pixels \
            + COST_MODEL["curve_flops_per_pixel"] * pixels
        pred = COST_MODEL["hypernet_macs_per_channel"] * c
        params = bins * 32 + 32 + 32 * 3 + 3
    elif module == "he":
        pixel = COST_MODEL["he_flops_per_pixel"] * pixels
        pred = COST_MODEL["he_flops_per_channel"] * c
        params = 0
    elif module == "gamma":
        pixel = COST_MODEL["gamma_flops_per_pixel"] * pixels
        pred = 0
        params = 0
    else:
        raise ValueError(f"unknown module {module!r} (expected gcart|he|gamma)")
    return FlopsReport(module=module, h=h, w=w, c=c, params=params,
                       param_prediction_flops=pred, pixel_flops=pixel,
                       total=pred + pixel)
