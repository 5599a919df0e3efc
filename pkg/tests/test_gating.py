import numpy as np
import pytest

from dcst.gating import apply_gate, gate2, gate_n, gate_weights, init_gate_params
from dcst.neural import tensor as T
from dcst.neural.gradcheck import grad_check
from dcst.neural.params import ParameterStore
from dcst.neural.tensor import ShapeError, Tensor


def _streams(rng, n, shape=(2, 3, 8)):
    return [rng.normal(size=shape) for _ in range(n + 1)]


def test_gate2_zero_params_is_mean(rng):
    hp, ht = _streams(rng, 1)
    g = gate2(Tensor(hp), Tensor(ht), Tensor(np.zeros((16, 8))), Tensor(np.zeros(8))).data
    np.testing.assert_allclose(g, (hp + ht) / 2, atol=1e-12)


def test_gate2_saturates_to_parser(rng):
    hp, ht = _streams(rng, 1)
    g = gate2(Tensor(hp), Tensor(ht), Tensor(np.zeros((16, 8))), Tensor(np.full(8, 1e3))).data
    np.testing.assert_allclose(g, hp, atol=1e-12)


def test_gate_n_zero_params_is_mean(rng):
    hs = _streams(rng, 2)
    Ws, bs = [Tensor(np.zeros((24, 8)))] * 3, [Tensor(np.zeros(8))] * 3
    a = gate_weights(Tensor(hs[0]), [Tensor(h) for h in hs[1:]], Ws, bs).data
    np.testing.assert_allclose(a, 1 / 3, atol=1e-15)
    g = gate_n(Tensor(hs[0]), [Tensor(h) for h in hs[1:]], Ws, bs).data
    np.testing.assert_allclose(g, sum(hs) / 3, atol=1e-12)


def test_gate_n_with_one_tagger_equals_gate2_at_zero(rng):
    hp, ht = _streams(rng, 1)
    a = gate_n(Tensor(hp), [Tensor(ht)], [Tensor(np.zeros((16, 8)))] * 2, [Tensor(np.zeros(8))] * 2).data
    b = gate2(Tensor(hp), Tensor(ht), Tensor(np.zeros((16, 8))), Tensor(np.zeros(8))).data
    np.testing.assert_allclose(a, b, atol=1e-12)


@pytest.mark.parametrize("n", [1, 2, 3])
def test_gates_are_convex(rng, n):
    st = ParameterStore()
    init_gate_params(st, "gate", 8, n, rng)
    for name in st:
        st.set(name, rng.normal(size=st[name].shape) * 3)
    hs = _streams(rng, n)
    g = apply_gate(st, "gate", Tensor(hs[0]), [Tensor(h) for h in hs[1:]]).data
    lo, hi = np.min(hs, axis=0), np.max(hs, axis=0)
    assert np.all(g >= lo - 1e-12) and np.all(g <= hi + 1e-12)
    if n > 1:
        a = gate_weights(Tensor(hs[0]), [Tensor(h) for h in hs[1:]], [st[f"gate.{i}.W"] for i in range(n + 1)],
                         [st[f"gate.{i}.b"] for i in range(n + 1)]).data
        assert np.all(a >= 0)
        np.testing.assert_allclose(a.sum(axis=0), 1.0, atol=1e-12)


@pytest.mark.parametrize("n", [1, 3])
def test_gate_gradients(rng, n):
    st = ParameterStore()
    init_gate_params(st, "gate", 8, n, rng)
    for i in range(n + 1):
        st.add(f"h{i}", rng.normal(size=(2, 3, 8)))
    w = Tensor(rng.normal(size=(2, 3, 8)))
    rep = grad_check(lambda: T.sum(apply_gate(st, "gate", st["h0"], [st[f"h{i}"] for i in range(1, n + 1)]) * w), st)
    assert rep.ok, rep.failed


def test_gate_shape_errors(rng):
    with pytest.raises(ShapeError):
        gate2(Tensor(np.zeros((2, 8))), Tensor(np.zeros((2, 7))), Tensor(np.zeros((16, 8))), Tensor(np.zeros(8)))
    with pytest.raises(ValueError):
        init_gate_params(ParameterStore(), "g", 8, 0, rng)
