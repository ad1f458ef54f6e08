import numpy as np
import pytest

from progct import autodiff as ad
from progct import optim


def _store(**arrays):
    s = ad.ParamStore()
    for k, v in arrays.items():
        s.register(k, np.asarray(v, dtype=np.float64))
    return s


def test_zero_gradient_leaves_fresh_parameter_unchanged():
    s = _store(w=[1.0, -2.0])
    st = optim.init_adam(s)
    optim.adam_step(st, s, {"w": np.zeros(2)}, lr=1e-4)
    np.testing.assert_array_equal(s["w"].value, [1.0, -2.0])


def test_first_step_closed_form():
    s = _store(w=[0.0])
    st = optim.init_adam(s)
    optim.adam_step(st, s, {"w": np.array([1.0])}, lr=1e-4)
    expected = -1e-4 / (1.0 + 1e-8)
    assert s["w"].value[0] == pytest.approx(expected, rel=1e-12)


def test_constant_gradient_descends_monotonically():
    s = _store(w=[0.5])
    st = optim.init_adam(s)
    vals = [0.5]
    for _ in range(5):
        optim.adam_step(st, s, {"w": np.array([2.0])}, lr=1e-3)
        vals.append(float(s["w"].value[0]))
    assert all(b < a for a, b in zip(vals, vals[1:]))


def test_first_step_magnitude_close_to_lr():
    rng = np.random.default_rng(0)
    s = _store(w=rng.normal(size=8))
    st = optim.init_adam(s)
    before = s["w"].value.copy()
    g = rng.normal(size=8) * 10
    optim.adam_step(st, s, {"w": g}, lr=1e-4)
    delta = np.abs(s["w"].value - before)
    assert np.all(delta <= 1e-4 * (1 + 1e-6))
    assert np.all(delta >= 1e-4 * 0.99)


def test_missing_grad_treated_as_zero_and_unknown_rejected():
    s = _store(a=[1.0], b=[2.0])
    st = optim.init_adam(s)
    optim.adam_step(st, s, {"a": np.array([1.0])}, lr=1e-3)
    assert s["b"].value[0] == 2.0
    with pytest.raises(KeyError):
        optim.adam_step(st, s, {"zzz": np.array([1.0])}, lr=1e-3)


def test_shape_mismatch_rejected():
    s = _store(w=[1.0, 2.0])
    st = optim.init_adam(s)
    with pytest.raises(ad.ShapeError):
        optim.adam_step(st, s, {"w": np.zeros(3)}, lr=1e-3)


def test_lr_schedule_values():
    assert optim.lr_schedule(1e-4, 1) == pytest.approx(1e-4)
    assert optim.lr_schedule(1e-4, 4) == pytest.approx(5e-5)
    assert optim.lr_schedule(1e-4, 100) == pytest.approx(1e-5)
    with pytest.raises(ValueError):
        optim.lr_schedule(1e-4, 0)


def test_defaults():
    s = _store(w=[1.0])
    st = optim.init_adam(s)
    assert (st.lr0, st.beta1, st.beta2, st.epsilon) == (1e-4, 0.9, 0.999, 1e-8)
