"""Finite-difference verification of analytic gradients.

Two layers: every registered primitive is checked in isolation on random
inputs sampled away from kink points, and the full training loss is checked
end to end against central differences over every learnable parameter of a
small configured model. The reference values come from a tape-free numpy
evaluation of the loss, so the differentiation path under test contributes
nothing to the oracle.
"""

from __future__ import annotations

import numpy as np

from gcart import engine
from gcart.engine import Tape, Tensor
from gcart.softhist import HistogramConfig, soft_histogram_rows
from gcart.tonecurve import curve_rows

_FLOOR = 1e-6


def rel_error(analytic: np.ndarray, fd: np.ndarray, floor: float = _FLOOR) -> float:
    """Worst-case elementwise relative error with an absolute floor for
    near-zero gradients (FD noise dominates below it)."""
    denom = np.maximum(np.maximum(np.abs(analytic), np.abs(fd)), floor)
    return float(np.max(np.abs(analytic - fd) / denom))


def fd_gradient(f, arr: np.ndarray, h: float) -> np.ndarray:
    """Central finite differences of scalar f w.r.t. every entry of arr.

    Perturbs arr in place and restores it, so `f` may close over arr.
    """
    grad = np.empty_like(arr)
    flat = arr.reshape(-1)
    gflat = grad.reshape(-1)
    for i in range(flat.size):
        orig = flat[i]
        flat[i] = orig + h
        fp = f()
        flat[i] = orig - h
        fm = f()
        flat[i] = orig
        gflat[i] = (fp - fm) / (2.0 * h)
    return grad


# ---------------------------------------------------------------------------
# per-primitive checks


def _scalarize(out: Tensor, probe: np.ndarray) -> Tensor:
    return engine.sum(engine.mul(out, Tensor(probe)))


def _check(build, arrays: list[np.ndarray], probe_shape, rng, h=1e-6) -> float:
    """Gradcheck one op: `build` maps Tensors to the op output."""
    probe = rng.normal(size=probe_shape)
    tensors = [Tensor(a, requires_grad=True) for a in arrays]
    with Tape() as tape:
        loss = _scalarize(build(*tensors), probe)
    tape.backward(loss)
    worst = 0.0
    for t, a in zip(tensors, arrays):
        analytic = tape.grad(t)
        fd = fd_gradient(lambda: float(_scalarize(build(*[Tensor(x) for x in arrays]),
                                                  probe).data), a, h)
        worst = max(worst, rel_error(analytic, fd))
    return worst


def check_primitives(seed: int = 0) -> list[dict]:
    """FD-check every primitive plus the two fused kernel ops."""
    rng = np.random.default_rng(seed)
    u = lambda *s: rng.uniform(0.25, 1.75, size=s)  # positive, away from 0
    sgn = lambda *s: rng.uniform(0.25, 1.75, size=s) * rng.choice([-1.0, 1.0], size=s)
    cases = [
        ("add", lambda a, b: engine.add(a, b), [sgn(3, 4), sgn(3, 4)], (3, 4)),
        ("add_broadcast", lambda a, b: engine.add(a, b), [sgn(3, 4), sgn(4)], (3, 4)),
        ("sub", lambda a, b: engine.sub(a, b), [sgn(3, 4), sgn(1, 4)], (3, 4)),
        ("mul", lambda a, b: engine.mul(a, b), [sgn(3, 4), sgn(3, 1)], (3, 4)),
        ("div", lambda a, b: engine.div(a, b), [sgn(3, 4), u(3, 4)], (3, 4)),
        ("matmul", lambda a, b: engine.matmul(a, b), [sgn(3, 4), sgn(4, 2)], (3, 2)),
        ("exp", lambda a: engine.exp(a), [sgn(3, 4) * 0.5], (3, 4)),
        ("log", lambda a: engine.log(a), [u(3, 4)], (3, 4)),
        ("pow", lambda a: engine.pow(a, 2.5), [u(3, 4)], (3, 4)),
        ("relu", lambda a: engine.relu(a), [sgn(3, 4)], (3, 4)),
        ("max0", lambda a: engine.max0(a), [sgn(3, 4)], (3, 4)),
        ("softplus", lambda a: engine.softplus(a), [sgn(3, 4)], (3, 4)),
        ("sum_all", lambda a: engine.sum(a), [sgn(3, 4)], ()),
        ("sum_axis", lambda a: engine.sum(a, axis=1), [sgn(3, 4)], (3,)),
        ("mean_all", lambda a: engine.mean(a), [sgn(3, 4)], ()),
        ("mean_axis", lambda a: engine.mean(a, axis=0), [sgn(3, 4)], (4,)),
        ("reshape", lambda a: engine.reshape(a, (4, 3)), [sgn(3, 4)], (4, 3)),
        ("soft_histogram",
         lambda a: soft_histogram_rows(a, HistogramConfig(bins=8, gamma=0.05)),
         [rng.uniform(0.0, 1.0, size=(2, 12))], (2, 8)),
        ("rational_curve",
         lambda x, a, b, d, e: curve_rows(x, a, b, d, e),
         [rng.uniform(0.0, 1.0, size=(2, 9)), sgn(2, 1), u(2, 1), u(2, 1), u(2, 1)],
         (2, 9)),
    ]
    results = []
    for name, build, arrays, probe_shape in cases:
        err = _check(build, arrays, probe_shape, rng)
        results.append({"op": name, "max_rel_err": err, "ok": err <= 1e-6})
    return results


# ---------------------------------------------------------------------------
# end-to-end pipeline check


def check_pipeline(seed: int = 0, n_images: int = 2, side: int = 16,
                   hidden: int = 8, h: float = 1e-5, rtol: float = 1e-4) -> dict:
    """Exhaustive central-difference check of d(loss)/d(theta) for every
    hypernetwork and classifier-head parameter of a small configured model.

    The final-layer bias is shifted into strongly non-monotone curve
    territory so the monotonicity hinge is active and contributes gradient.
    """
    from gcart import hypernet
    from gcart.trainer import Model, init_head

    rng = np.random.default_rng(seed)
    imgs = rng.uniform(0.0, 1.0, size=(n_images, side, side, 3))
    labels = rng.integers(0, 10, size=n_images)
    lam = 10.0

    hyper = hypernet.init_weights(rng)
    hyper.w2 = rng.normal(0.0, 0.3, size=hyper.w2.shape)
    hyper.b1 = rng.normal(0.0, 0.2, size=hyper.b1.shape)
    hyper.b2 = np.array([-6.0, -4.0, -4.0])
    head = init_head(rng, input_dim=side * side * 3, hidden=hidden)
    model = Model("gcart", head, hyper=hyper)

    with Tape() as tape:
        loss, _, _ = model.loss_tape(imgs, labels, lam)
    tape.backward(loss)

    loss_np = model.loss_numpy(imgs, labels, lam)
    route_gap = abs(float(loss.data) - loss_np)

    results = {}
    worst = 0.0
    n_params = 0
    for name, p in model.params():
        analytic = tape.grad(p)
        fd = fd_gradient(lambda: model.loss_numpy(imgs, labels, lam), p.data, h)
        err = rel_error(analytic, fd)
        results[name] = err
        worst = max(worst, err)
        n_params += p.data.size
    return {
        "per_param": results,
        "max_rel_err": worst,
        "n_params": n_params,
        "route_gap": route_gap,
        "ok": worst <= rtol and route_gap <= 1e-9,
    }


def run_all(seed: int = 0, verbose: bool = True) -> bool:
    """Primitive suite plus pipeline check; returns overall pass/fail."""
    ok = True
    for r in check_primitives(seed):
        ok &= r["ok"]
        if verbose:
            status = "ok" if r["ok"] else "FAIL"
            print(f"primitive {r['op']:<16} max rel err {r['max_rel_err']:.3e}  {status}")
    pipe = check_pipeline(seed)
    ok &= pipe["ok"]
    if verbose:
        status = "ok" if pipe["ok"] else "FAIL"
        print(f"pipeline  ({pipe['n_params']} params) max rel err "
              f"{pipe['max_rel_err']:.3e}  route gap {pipe['route_gap']:.1e}  {status}")
    return bool(ok)
