import numpy as np
import pytest

from src.errors import CheckpointError, ContractError, NumericFaultError, ShapeError
from src.numerics import tensor as T
from src.numerics.adam import AdamState, adam_step, clip_grad_norm, global_norm
from src.numerics.checkpoint import (
    decode_params, encode_params, load_checkpoint, manifest_path, save_checkpoint,
)
from src.numerics.gradcheck import check_gradients, op_battery, relative_error
from src.numerics.layers import init_matrix, lstm_cell
from src.numerics.tensor import Tensor


class TestGradients:
    @pytest.mark.parametrize("seed", [0, 1, 2, 3, 4])
    def test_every_op_within_tolerance(self, seed):
        for name, (error, tolerance) in op_battery(seed).items():
            assert error <= tolerance, f"{name}: {error:.2e} > {tolerance:.0e}"

    def test_shared_subexpression(self):
        x = Tensor([[0.3, -1.2]], requires_grad=True, name='x')
        errors = check_gradients(lambda: T.sum(T.mul(T.tanh(x), T.tanh(x))), [x])
        assert errors['x'] < 1e-6

    def test_leaf_gradients_accumulate(self):
        x = Tensor([[2.0]], requires_grad=True)
        T.backward(T.sum(T.scale(x, 3.0)))
        T.backward(T.sum(T.scale(x, 3.0)))
        assert x.grad[0, 0] == pytest.approx(6.0)
        T.zero_grad([x])
        assert x.grad is None

    def test_constants_get_no_gradient(self):
        x = Tensor([[1.0, 2.0]], requires_grad=True)
        c = Tensor([[5.0, 5.0]])
        T.backward(T.sum(T.mul(x, c)))
        assert c.grad is None
        np.testing.assert_allclose(x.grad, [[5.0, 5.0]])

    def test_relative_error_floor(self):
        assert relative_error(np.zeros(3), np.zeros(3)) == 0.0


class TestTensorContracts:
    def test_matmul_shape_mismatch(self):
        with pytest.raises(ShapeError) as info:
            T.matmul(Tensor(np.ones((2, 3))), Tensor(np.ones((2, 3))))
        assert info.value.shape_a == (2, 3)
        assert info.value.op == "matmul"

    def test_broadcast_mismatch(self):
        with pytest.raises(ShapeError):
            T.add(Tensor(np.ones((2, 3))), Tensor(np.ones((4, 3))))

    def test_rank_limit(self):
        with pytest.raises(ShapeError):
            Tensor(np.ones((1, 1, 1, 1)))

    def test_log_of_zero(self):
        with pytest.raises(NumericFaultError) as info:
            T.log(Tensor([0.0, 1.0]))
        assert info.value.op == "log"

    def test_exp_overflow(self):
        with pytest.raises(NumericFaultError):
            T.exp(Tensor([1000.0]))

    def test_nan_input(self):
        with pytest.raises(NumericFaultError):
            Tensor([np.nan])

    def test_backward_needs_scalar(self):
        x = Tensor(np.ones((2, 2)), requires_grad=True)
        with pytest.raises(ContractError):
            T.backward(T.scale(x, 2.0))

    def test_softmax_is_stable(self):
        out = T.softmax(Tensor([[1000.0, 1000.0, -1000.0]]))
        np.testing.assert_allclose(out.data, [[0.5, 0.5, 0.0]])


class TestLayers:
    def test_lstm_shapes(self, rng):
        d_in, d = 3, 4
        wx = Tensor(init_matrix(rng, d_in, 4 * d))
        wh = Tensor(init_matrix(rng, d, 4 * d))
        b = Tensor(np.zeros((1, 4 * d)))
        h, c = lstm_cell(Tensor(rng.normal(size=(1, d_in))), Tensor(np.zeros((1, d))), Tensor(np.zeros((1, d))),
                         wx, wh, b)
        assert h.shape == (1, d) and c.shape == (1, d)
        assert np.all(np.abs(h.data) < 1.0)

    def test_init_is_seeded(self):
        a = init_matrix(np.random.default_rng(3), 4, 5)
        b = init_matrix(np.random.default_rng(3), 4, 5)
        np.testing.assert_array_equal(a, b)


class TestAdam:
    def test_first_step_moves_by_learning_rate(self):
        state = AdamState(lr=0.01)
        params = {'w': np.array([1.0, -1.0])}
        updated = adam_step(state, params, {'w': np.array([0.5, -3.0])})
        np.testing.assert_allclose(updated['w'], [0.99, -0.99], atol=1e-6)
        assert state.step == 1

    def test_minimizes_quadratic(self):
        state = AdamState(lr=0.05)
        params = {'w': np.array([3.0, -2.0])}
        for _ in range(2000):
            params = adam_step(state, params, {'w': 2.0 * params['w']})
        np.testing.assert_allclose(params['w'], [0.0, 0.0], atol=0.05)

    def test_missing_gradient_is_zero(self):
        state = AdamState()
        params = {'w': np.ones(2), 'b': np.ones(1)}
        updated = adam_step(state, params, {'w': np.ones(2)})
        np.testing.assert_array_equal(updated['b'], params['b'])

    def test_shape_mismatch(self):
        with pytest.raises(ShapeError):
            adam_step(AdamState(), {'w': np.ones(2)}, {'w': np.ones(3)})

    def test_copy_is_independent(self):
        state = AdamState()
        adam_step(state, {'w': np.ones(2)}, {'w': np.ones(2)})
        clone = state.copy()
        adam_step(state, {'w': np.ones(2)}, {'w': np.ones(2)})
        assert clone.step == 1
        assert not np.array_equal(clone.m['w'], state.m['w'])

    def test_clip_grad_norm(self):
        grads = {'a': np.array([3.0]), 'b': np.array([4.0])}
        clipped = clip_grad_norm(grads, 1.0)
        assert global_norm(clipped) == pytest.approx(1.0)
        assert clip_grad_norm(grads, 10.0)['a'][0] == 3.0


class TestCheckpoint:
    def test_round_trip(self, tmp_path):
        params = {'w': np.arange(6.0).reshape(2, 3), 'b': np.array([0.5]), 's': np.array(2.0)}
        path = save_checkpoint(tmp_path / "policy.ddck", params, {'stage': 2})
        loaded, manifest = load_checkpoint(path)
        assert list(loaded) == ['w', 'b', 's']
        for name in params:
            np.testing.assert_array_equal(loaded[name], params[name])
        assert manifest['stage'] == 2
        assert manifest_path(path).exists()

    def test_header(self):
        blob = encode_params([np.zeros((2, 3))])
        assert blob[:4] == b"DDCK"
        assert len(blob) == 4 + 8 + 4 + 8 + 6 * 8

    def test_bad_magic(self):
        with pytest.raises(CheckpointError):
            decode_params(b"XXXX" + encode_params([np.zeros(2)])[4:])

    def test_truncated(self):
        blob = encode_params([np.zeros(4)])
        with pytest.raises(CheckpointError):
            decode_params(blob[:-8])

    def test_trailing_bytes(self):
        with pytest.raises(CheckpointError):
            decode_params(encode_params([np.zeros(2)]) + b"\x00")

    def test_missing_manifest(self, tmp_path):
        path = tmp_path / "orphan.ddck"
        path.write_bytes(encode_params([np.zeros(2)]))
        with pytest.raises(CheckpointError):
            load_checkpoint(path)
