import numpy as np
import pytest

from protqa import autograd as ag
from protqa.autograd import Tensor
from protqa.errors import DimensionError
from protqa.optim import AdamState, adam_step


def test_first_step_is_signed_lr():
    p = Tensor(np.zeros(3, dtype=np.float32), tracked=True)
    g = np.array([0.5, -2.0, 1e-3], dtype=np.float32)
    state = AdamState(lr=0.1, eps=1e-12)
    adam_step([p], [g], state)
    np.testing.assert_allclose(p.data, -0.1 * np.sign(g), rtol=1e-4)
    assert state.t == 1


def test_zero_grad_no_move():
    p = Tensor(np.array([1.0, 2.0], dtype=np.float32), tracked=True)
    state = AdamState(lr=0.1)
    adam_step([p], [np.zeros(2, dtype=np.float32)], state)
    np.testing.assert_allclose(p.data, [1.0, 2.0], atol=1e-6)


def test_shape_mismatch():
    p = Tensor(np.zeros(3), tracked=True)
    with pytest.raises(DimensionError):
        adam_step([p], [np.zeros(4, dtype=np.float32)], AdamState())


def test_converges_on_quadratic():
    # oracle: actually run 200 steps of the optimizer on f(x) = (x - 3)^2
    x = Tensor(np.array([0.0], dtype=np.float32), tracked=True)
    state = AdamState(lr=0.1)
    for _ in range(200):
        x.zero_grad()
        loss = ag.tsum((x - 3.0) ** 2.0)
        ag.backward(loss)
        adam_step([x], [x.grad], state)
    assert abs(float(x.data[0]) - 3.0) < 0.05


def test_grads_untouched():
    p = Tensor(np.zeros(2, dtype=np.float32), tracked=True)
    g = np.array([1.0, -1.0], dtype=np.float32)
    snapshot = g.copy()
    adam_step([p], [g], AdamState(lr=0.01))
    np.testing.assert_array_equal(g, snapshot)
