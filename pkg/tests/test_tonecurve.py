import math

import numpy as np
import pytest


from gcart.engine import Tape, Tensor
from gcart.tonecurve import (EffectiveCurveParams, MonoConfig, RawCurveParams,
                             apply_curve, curve_derivative, curve_eval,
                             curve_rows, effective_params, effective_params_rows,
                             mono_penalty, mono_penalty_from_samples,
                             mono_penalty_rows, uniform_grid)

SOFTPLUS_M5 = 0.006715348489118068  # log(1 + e^-5)


def test_effective_params_at_init_bias():
    p = effective_params(RawCurveParams(0.0, -5.0, -5.0))
    assert p.a == 0.0
    assert p.d == pytest.approx(SOFTPLUS_M5, rel=1e-14)
    assert p.e == pytest.approx(SOFTPLUS_M5, rel=1e-14)
    assert p.b == pytest.approx(2.0 * SOFTPLUS_M5 + 1.0, rel=1e-14)


def test_reinhard_like_limit():
    # d -> 0+, e = 1 gives the pinned f(x) = 2x/(x+1)
    e_raw = math.log(math.e - 1.0)
    p = effective_params(RawCurveParams(0.0, -40.0, e_raw))
    assert p.d < 1e-15
    assert p.e == pytest.approx(1.0, abs=1e-12)
    assert p.b == pytest.approx(2.0, abs=1e-12)
    assert curve_eval(p, 0.5) == pytest.approx(2.0 / 3.0, abs=1e-12)
    v = np.linspace(0.0, 1.0, 11)
    assert np.allclose(curve_eval(p, v), 2.0 * v / (v + 1.0), atol=1e-12)


def test_pure_convex_limit():
    p = effective_params(RawCurveParams(1.0, -40.0, -40.0))
    assert p.b == pytest.approx(0.0, abs=1e-15)
    x = np.linspace(0.0, 1.0, 101)
    assert np.max(np.abs(curve_eval(p, x) - x * x)) <= 1e-12


def test_endpoints_pinned_for_random_draws():
    rng = np.random.default_rng(0)
    n = 10_000
    a = rng.uniform(-5.0, 5.0, size=n)
    d_raw = rng.uniform(-10.0, 10.0, size=n)
    e_raw = rng.uniform(-10.0, 10.0, size=n)
    d = np.log1p(np.exp(-np.abs(d_raw))) + np.maximum(d_raw, 0.0)
    e = np.log1p(np.exp(-np.abs(e_raw))) + np.maximum(e_raw, 0.0)
    b = d + e + 1.0 - a
    f0 = (a * 0.0 + b * 0.0) / (d * 0.0 + e * 0.0 + 1.0)
    f1 = (a + b) / (d + e + 1.0)
    assert np.max(np.abs(f0)) <= 1e-12
    assert np.max(np.abs(f1 - 1.0)) <= 1e-9


def test_denominator_at_least_one():
    rng = np.random.default_rng(1)
    x = np.linspace(0.0, 1.0, 64)
    for _ in range(200):
        p = effective_params(RawCurveParams(rng.uniform(-5, 5), rng.uniform(-10, 10),
                                            rng.uniform(-10, 10)))
        assert np.min(p.d * x * x + p.e * x + 1.0) >= 1.0


def test_output_is_not_clamped():
    p = effective_params(RawCurveParams(-5.0, -40.0, -40.0))  # b ~ 6
    x = np.linspace(0.0, 1.0, 101)
    assert np.any(curve_eval(p, x) > 1.0)


def test_derivative_examples():
    reinhard = EffectiveCurveParams(a=0.0, b=2.0, d=0.0, e=1.0)
    assert curve_derivative(reinhard, 0.0) == pytest.approx(2.0, abs=1e-15)
    assert curve_derivative(reinhard, 1.0) == pytest.approx(0.5, abs=1e-15)
    identity = EffectiveCurveParams(a=0.0, b=1.0, d=0.0, e=0.0)
    x = np.linspace(0.0, 1.0, 17)
    assert np.allclose(curve_derivative(identity, x), 1.0, atol=1e-15)


def test_derivative_matches_finite_differences():
    rng = np.random.default_rng(2)
    xs = np.linspace(0.05, 0.95, 19)
    h = 1e-6
    for _ in range(25):
        p = effective_params(RawCurveParams(rng.uniform(-3, 3), rng.uniform(-5, 5),
                                            rng.uniform(-5, 5)))
        fd = (curve_eval(p, xs + h) - curve_eval(p, xs - h)) / (2.0 * h)
        an = curve_derivative(p, xs)
        # relative with a unit floor: f' crosses zero for non-monotone draws
        scale = np.maximum(np.maximum(np.abs(an), np.abs(fd)), 1.0)
        assert np.max(np.abs(an - fd) / scale) <= 1e-8


def test_apply_curve_is_pointwise():
    rng = np.random.default_rng(3)
    params = [effective_params(RawCurveParams(*rng.uniform(-2, 2, size=3)))
              for _ in range(3)]
    img = rng.uniform(0.0, 1.0, size=(8, 8, 3))
    out = apply_curve(img, params)
    bumped = img.copy()
    bumped[4, 2, 1] = (bumped[4, 2, 1] + 0.41) % 1.0
    out2 = apply_curve(bumped, params)
    changed = np.nonzero(out != out2)
    assert set(zip(*changed)) <= {(4, 2, 1)}


def test_apply_curve_init_is_near_identity():
    params = [effective_params(RawCurveParams(0.0, -5.0, -5.0))] * 3
    rng = np.random.default_rng(4)
    img = rng.uniform(0.0, 1.0, size=(16, 16, 3))
    assert np.max(np.abs(apply_curve(img, params) - img)) <= 0.01


def test_init_curve_deviation_value():
    # frozen from direct evaluation on the 1001-point grid
    p = effective_params(RawCurveParams(0.0, -5.0, -5.0))
    x = np.linspace(0.0, 1.0, 1001)
    assert np.max(np.abs(curve_eval(p, x) - x)) == pytest.approx(
        0.004214267483568457, rel=1e-9)


def test_apply_curve_constant_image_reinhard():
    p = EffectiveCurveParams(a=0.0, b=2.0, d=0.0, e=1.0)
    img = np.full((5, 7, 3), 0.25)
    out = apply_curve(img, [p] * 3)
    assert np.allclose(out, 2.0 * 0.25 / 1.25, rtol=1e-15)


def test_apply_curve_channel_count_mismatch():
    with pytest.raises(ValueError):
        apply_curve(np.zeros((4, 4, 3)), [EffectiveCurveParams(0, 1, 0, 0)] * 2)


def test_mono_penalty_hand_example():
    samples = np.array([0.0, 0.5, 0.25, 1.0])
    assert mono_penalty_from_samples(samples) == pytest.approx(0.25 / 3.0, abs=1e-12)


def test_mono_penalty_zero_for_monotone_curves():
    rng = np.random.default_rng(5)
    for _ in range(100):
        samples = np.cumsum(rng.uniform(0.0, 0.1, size=32))
        assert mono_penalty_from_samples(samples) == 0.0


def test_mono_penalty_zero_at_init():
    params = [effective_params(RawCurveParams(0.0, -5.0, -5.0))] * 3
    assert mono_penalty(params, MonoConfig()) == 0.0


def test_mono_penalty_positive_for_decreasing_curve():
    p = effective_params(RawCurveParams(-6.0, -4.0, -4.0))
    assert mono_penalty([p], MonoConfig()) > 0.0


def test_mono_config_validation():
    with pytest.raises(ValueError):
        MonoConfig(grid_size=1)
    with pytest.raises(ValueError):
        MonoConfig(weight=-0.1)
    with pytest.raises(ValueError):
        mono_penalty_from_samples(np.array([1.0]))


def test_mono_penalty_gradient_matches_fd():
    """d(penalty)/d(raw) via the tape vs central differences, away from the
    hinge kink (the chosen raw triple keeps all grid differences far from 0)."""
    cfg = MonoConfig(grid_size=32)
    raw0 = np.array([[-6.0, -4.0, -4.0], [1.5, -2.0, 0.5]])

    def penalty_numpy():
        a = raw0[:, 0]
        d = np.maximum(raw0[:, 1], 0) + np.log1p(np.exp(-np.abs(raw0[:, 1])))
        e = np.maximum(raw0[:, 2], 0) + np.log1p(np.exp(-np.abs(raw0[:, 2])))
        b = d + e + 1.0 - a
        t = uniform_grid(cfg.grid_size)
        f = np.stack([curve_eval(EffectiveCurveParams(a[i], b[i], d[i], e[i]), t)
                      for i in range(len(a))])
        return mono_penalty_from_samples(f)

    raw = Tensor(raw0, requires_grad=True)
    with Tape() as tape:
        a, b, d, e = effective_params_rows(raw)
        pen = mono_penalty_rows(a, b, d, e, cfg)
    tape.backward(pen)
    assert float(pen.data) == pytest.approx(penalty_numpy(), abs=1e-14)

    from gcart.fdcheck import fd_gradient, rel_error

    fd = fd_gradient(penalty_numpy, raw0, 1e-6)
    assert rel_error(tape.grad(raw), fd) <= 1e-4


def test_curve_rows_matches_scalar_eval():
    rng = np.random.default_rng(6)
    raws = [RawCurveParams(*rng.uniform(-2, 2, size=3)) for _ in range(4)]
    ps = [effective_params(r) for r in raws]
    x = rng.uniform(0.0, 1.0, size=(4, 11))
    out = curve_rows(Tensor(x),
                     Tensor(np.array([[p.a] for p in ps])),
                     Tensor(np.array([[p.b] for p in ps])),
                     Tensor(np.array([[p.d] for p in ps])),
                     Tensor(np.array([[p.e] for p in ps])))
    want = np.stack([curve_eval(p, x[i]) for i, p in enumerate(ps)])
    assert np.allclose(out.data, want, rtol=1e-14)


def test_endpoints_exact_via_tape_path():
    rng = np.random.default_rng(7)
    raw = Tensor(rng.uniform(-5, 5, size=(6, 3)))
    a, b, d, e = effective_params_rows(raw)
    x = Tensor(np.tile(np.array([0.0, 1.0]), (6, 1)))
    out = curve_rows(x, a, b, d, e).data
    assert np.max(np.abs(out[:, 0])) <= 1e-12
    assert np.max(np.abs(out[:, 1] - 1.0)) <= 1e-9
