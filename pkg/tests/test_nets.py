import numpy as np
import pytest

from progct import autodiff as ad
from progct import nets


def _zero_store(store):
    for name in store.names():
        store[name].value = np.zeros_like(store[name].value)
    return store


def test_generator_parameter_count():
    g = nets.init_generator(0)
    assert g.size() == 62_337


def test_critic_parameter_count_at_64():
    assert nets.critic_param_count(64) == 17_923_521


def test_init_is_deterministic_per_seed():
    a, b = nets.init_generator(5), nets.init_generator(5)
    for name in a.names():
        assert np.array_equal(a[name].value, b[name].value)
    c = nets.init_generator(6)
    assert not np.array_equal(a["g.enc1.w"].value, c["g.enc1.w"].value)


def test_init_biases_are_zero():
    g, d = nets.init_params(3, patch=16)
    for store in (g, d):
        for name in store.names():
            if name.endswith(".b"):
                assert np.all(store[name].value == 0.0)


def test_first_layer_std_matches_he_init():
    w = nets.init_generator(0)["g.enc1.w"].value
    assert w.size == 288
    std = w.std()
    target = np.sqrt(2.0 / 9.0)
    assert abs(std - target) / target <= 0.10


def test_generator_preserves_spatial_size():
    g = nets.init_generator(1, dtype=np.float64)
    x = ad.constant(np.random.default_rng(0).uniform(size=(2, 1, 64, 64)))
    y = nets.residual_forward(g, x)
    assert y.value.shape == (2, 1, 64, 64)
    y2 = nets.residual_forward(g, ad.constant(np.random.default_rng(1).uniform(size=(1, 1, 9, 13))))
    assert y2.value.shape == (1, 1, 9, 13)


def test_generator_rejects_small_inputs():
    g = nets.init_generator(1)
    with pytest.raises(ad.ShapeError, match="minimum"):
        nets.residual_forward(g, ad.constant(np.zeros((1, 1, 8, 64))))


def test_zero_parameters_give_zero_residual_and_identity_stage():
    g = _zero_store(nets.init_generator(0, dtype=np.float64))
    x = np.random.default_rng(2).uniform(size=(1, 1, 16, 16))
    res = nets.residual_forward(g, ad.constant(x))
    assert np.all(res.value == 0.0)
    out = nets.denoise_once(g, ad.constant(x))
    np.testing.assert_array_equal(out.value, x)


def test_clipping_saturates_forced_residual():
    # zero weights with output bias 0.7 force a constant +0.7 residual
    g = _zero_store(nets.init_generator(0, dtype=np.float64))
    g["g.out.b"].value = np.array([0.7])
    x = np.full((1, 1, 12, 12), 0.5)
    out = nets.denoise_once(g, ad.constant(x))
    assert np.all(out.value == 1.0)


def test_stage_matches_unfused_oracle():
    g = nets.init_generator(7, dtype=np.float64)
    x = np.random.default_rng(3).uniform(size=(2, 1, 12, 12))
    res = nets.residual_forward(g, ad.constant(x)).value
    exp = np.clip(x + res, 0.0, 1.0)
    out = nets.denoise_once(g, ad.constant(x)).value
    assert np.array_equal(out, exp)


def test_progressive_depth_one_equals_single_stage():
    g = nets.init_generator(4, dtype=np.float64)
    x = np.random.default_rng(4).uniform(size=(1, 1, 12, 12))
    seq = nets.denoise_progressive(g, ad.constant(x), 1)
    assert len(seq) == 1
    one = nets.denoise_once(g, ad.constant(x))
    assert np.array_equal(seq[0].value, one.value)


def test_progressive_depth_three_equals_explicit_loop():
    g = nets.init_generator(8, dtype=np.float64)
    x = np.random.default_rng(5).uniform(size=(1, 1, 12, 12))
    seq = nets.denoise_progressive(g, ad.constant(x), 3)
    cur = ad.constant(x)
    for t in range(3):
        cur = nets.denoise_once(g, cur)
        assert np.array_equal(seq[t].value, cur.value)


def test_progressive_rejects_nonpositive_depth():
    g = nets.init_generator(0)
    with pytest.raises(ValueError):
        nets.denoise_progressive(g, ad.constant(np.zeros((1, 1, 12, 12))), 0)


@pytest.mark.parametrize("seed", range(6))
def test_outputs_stay_in_unit_range(seed):
    g = nets.init_generator(seed, dtype=np.float64)
    x = np.random.default_rng(seed).uniform(size=(1, 1, 12, 12))
    for out in nets.denoise_progressive(g, ad.constant(x), 4):
        assert out.value.min() >= 0.0 and out.value.max() <= 1.0
        assert np.isfinite(out.value).all()


def test_weight_sharing_single_store():
    g = nets.init_generator(9, dtype=np.float64)
    x = np.random.default_rng(6).uniform(size=(1, 1, 12, 12))
    before = [o.value.copy() for o in nets.denoise_progressive(g, ad.constant(x), 3)]
    g["g.enc1.w"].value = g["g.enc1.w"].value + 0.05
    after = [o.value for o in nets.denoise_progressive(g, ad.constant(x), 3)]
    for b, a in zip(before, after):
        assert not np.array_equal(b, a)
    # one store, canonical parameter count: no per-depth copies exist
    assert g.size() == nets.GEN_PARAM_COUNT


def test_critic_zero_weights_outputs_final_bias():
    d = _zero_store(nets.init_critic(0, patch=16, dtype=np.float64))
    d["d.fc2.b"].value = np.array([3.25])
    x = np.random.default_rng(7).uniform(size=(3, 1, 16, 16))
    y = nets.critic_forward(d, ad.constant(x))
    assert y.value.shape == (3, 1)
    assert np.all(y.value == 3.25)


def test_critic_flatten_length_for_64():
    layout = {name: shape for name, shape, _ in nets._critic_layout(64)}
    assert layout["d.fc1.w"][0] == 16384


def test_critic_rejects_wrong_input_size():
    d = nets.init_critic(0, patch=64)
    with pytest.raises(ad.ShapeError, match="64x64"):
        nets.critic_forward(d, ad.constant(np.zeros((1, 1, 32, 32))))


def test_critic_output_scalar_per_sample():
    d = nets.init_critic(1, patch=16, dtype=np.float64)
    x = np.random.default_rng(8).uniform(size=(5, 1, 16, 16))
    y = nets.critic_forward(d, ad.constant(x))
    assert y.value.shape == (5, 1)
    assert np.isfinite(y.value).all()
