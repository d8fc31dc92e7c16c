import numpy as np
import pytest

from gcart import engine, hypernet
from gcart.engine import Tape, Tensor
from gcart.softhist import soft_histogram


def _init(seed=0, **kw):
    return hypernet.init_weights(np.random.default_rng(seed), **kw)


def test_param_count_default_shape():
    assert hypernet.param_count(_init()) == 643


@pytest.mark.parametrize("hidden,expected", [(64, 1283), (1, 23)])
def test_param_count_variants(hidden, expected):
    assert hypernet.param_count(_init(hidden=hidden)) == expected


def test_init_final_layer_is_exact():
    w = _init()
    assert np.all(w.w2 == 0.0)
    assert np.array_equal(w.b2, np.array([0.0, -5.0, -5.0]))
    assert np.all(w.b1 == 0.0)
    assert np.max(np.abs(w.w1)) <= 0.25  # fan-in-scaled uniform bound


def test_init_prediction_ignores_histogram():
    w = _init()
    rng = np.random.default_rng(1)
    for _ in range(5):
        raw = hypernet.predict_raw_params(rng.uniform(0, 1, size=16), w)
        assert (raw.a, raw.d_raw, raw.e_raw) == (0.0, -5.0, -5.0)


def test_zero_first_layer_passes_bias_through():
    w = _init()
    w.w1 = np.zeros_like(w.w1)
    w.w2 = np.ones_like(w.w2)
    w.b2 = np.array([0.7, -1.0, 2.0])
    raw = hypernet.predict_raw_rows(np.random.default_rng(2).uniform(0, 1, (4, 16)), w)
    assert np.array_equal(raw, np.tile(w.b2, (4, 1)))


def test_channel_sharing_is_permutation_equivariant():
    w = _init()
    w.w2 = np.random.default_rng(3).normal(size=w.w2.shape)
    img = np.random.default_rng(4).uniform(0, 1, size=(8, 8, 3))
    perm = [2, 0, 1]
    raw = hypernet.predict_raw_rows(soft_histogram(img), w)
    raw_perm = hypernet.predict_raw_rows(soft_histogram(img[:, :, perm]), w)
    assert np.array_equal(raw[perm], raw_perm)


def test_resolution_independent_prediction():
    w = _init()
    w.w2 = np.random.default_rng(5).normal(size=w.w2.shape)
    small = np.full((8, 8, 3), 0.4)
    large = np.full((64, 64, 3), 0.4)
    raw_s = hypernet.predict_raw_rows(soft_histogram(small), w)
    raw_l = hypernet.predict_raw_rows(soft_histogram(large), w)
    assert np.allclose(raw_s, raw_l, rtol=1e-12)


def test_dimension_mismatch_raises():
    w = _init()
    with pytest.raises(ValueError):
        hypernet.predict_raw_params(np.zeros(12), w)
    with pytest.raises(ValueError):
        hypernet.predict_rows_tape(Tensor(np.zeros((2, 12))), hypernet.as_tensors(w))


def test_init_blocks_first_layer_gradients():
    """Zero final weights stop gradient flow into w1/b1 while w2/b2 learn."""
    w = _init()
    wt = hypernet.as_tensors(w)
    hists = Tensor(np.random.default_rng(6).uniform(0, 1, size=(4, 16)))
    probe = Tensor(np.random.default_rng(7).normal(size=(4, 3)))
    with Tape() as tape:
        raw = hypernet.predict_rows_tape(hists, wt)
        loss = engine.sum(engine.mul(raw, probe))
    tape.backward(loss)
    assert np.all(tape.grad(wt["w1"]) == 0.0)
    assert np.all(tape.grad(wt["b1"]) == 0.0)
    assert np.any(tape.grad(wt["w2"]) != 0.0)
    assert np.any(tape.grad(wt["b2"]) != 0.0)


def test_init_blocks_first_layer_gradients_under_real_loss():
    from gcart.trainer import Model, init_head

    rng = np.random.default_rng(9)
    imgs = rng.uniform(0, 1, size=(4, 8, 8, 3))
    labels = rng.integers(0, 10, size=4)
    model = Model("gcart", init_head(rng, input_dim=192, hidden=8), hyper=_init())
    with Tape() as tape:
        loss, _, _ = model.loss_tape(imgs, labels, 10.0)
    tape.backward(loss)
    assert np.all(tape.grad(model.wt["w1"]) == 0.0)
    assert np.all(tape.grad(model.wt["b1"]) == 0.0)
    assert np.any(tape.grad(model.wt["w2"]) != 0.0)
    assert np.any(tape.grad(model.wt["b2"]) != 0.0)


def test_checkpoint_roundtrip_is_exact(tmp_path):
    w = _init()
    w.w2 = np.random.default_rng(8).normal(size=w.w2.shape)
    path = tmp_path / "hyper.json"
    hypernet.save_checkpoint(path, w)
    back = hypernet.load_checkpoint(path)
    for name in ("w1", "b1", "w2", "b2"):
        assert np.array_equal(getattr(w, name), getattr(back, name))


def test_checkpoint_rejects_bad_version(tmp_path):
    path = tmp_path / "bad.json"
    path.write_text('{"version": 9, "w1": [], "b1": [], "w2": [], "b2": []}')
    with pytest.raises(ValueError):
        hypernet.load_checkpoint(path)
