# coding:utf-8

import math
import unittest

import numpy as np

from gridflare.errors import CheckpointError
from gridflare.errors import ContractError
from gridflare.errors import DimensionError
from gridflare.errors import NumericError
from gridflare.errors import TargetIndexError
from gridflare.grad import AdamState
from gridflare.grad import Tape
from gridflare.grad import Tensor
from gridflare.grad import backward
from gridflare.grad import clip_grad_norm
from gridflare.grad import global_grad_norm
from gridflare.grad import ops
from gridflare.grad.checkpoint import dumps
from gridflare.grad.checkpoint import loads


def numeric_gradient(build, value: np.ndarray, h: float = 1e-3) -> np.ndarray:
    grad = np.zeros_like(value)
    for index in np.ndindex(value.shape):
        plus, minus = value.copy(), value.copy()
        plus[index] += h
        minus[index] -= h
        grad[index] = (build(Tensor(plus)).item() - build(Tensor(minus)).item()) / (2 * h)  # noqa:E501
    return grad


def analytic_gradient(build, value: np.ndarray) -> np.ndarray:
    x = Tensor(value.copy(), requires_grad=True)
    with Tape():
        backward(build(x))
    return x.grad


class GradientCase(unittest.TestCase):

    def setUp(self):
        self.rng = np.random.default_rng(7)

    def weights(self, *shape) -> np.ndarray:
        return self.rng.normal(size=shape)

    def check(self, build, value: np.ndarray):
        value = np.asarray(value, dtype=np.float64)
        np.testing.assert_allclose(analytic_gradient(build, value), numeric_gradient(build, value),  # noqa:E501
                                   rtol=1e-4, atol=1e-6)


class TestTensor(GradientCase):

    def test_dtype(self):
        self.assertEqual(Tensor([1, 2]).dtype, np.float32)
        self.assertEqual(Tensor(np.ones(2)).dtype, np.float64)
        self.assertEqual(ops.add(Tensor(np.ones(2)), np.ones(2)).dtype, np.float64)  # noqa:E501

    def test_grad_only_when_required(self):
        self.assertIsNone(Tensor([1.0]).grad)
        np.testing.assert_array_equal(Tensor([1.0, 2.0], requires_grad=True).grad, [0.0, 0.0])  # noqa:E501

    def test_record_only_on_tape(self):
        x = Tensor(np.ones(3), requires_grad=True)
        ops.exp(x)
        with Tape() as tape:
            ops.exp(Tensor(np.ones(3)))
            self.assertEqual(len(tape), 0)
            ops.exp(x)
            self.assertEqual(len(tape), 1)

    def test_assign_shape(self):
        x = Tensor(np.zeros(3))
        self.assertRaises(ContractError, x.assign, np.zeros(4))


class TestMatmul(GradientCase):

    def test_identity(self):
        m = np.array([[1.0, 2.0], [3.0, 4.0]])
        np.testing.assert_array_equal(ops.matmul(np.eye(2), m).data, m)

    def test_hand_expansion(self):
        out = ops.matmul(np.array([[1.0, 2.0], [3.0, 4.0]]), np.array([[5.0], [6.0]]))  # noqa:E501
        np.testing.assert_array_equal(out.data, [[17.0], [39.0]])

    def test_shape_mismatch(self):
        with self.assertRaises(DimensionError) as context:
            ops.matmul(np.ones((2, 3)), np.ones((2, 3)))
        self.assertIn("(2, 3)", str(context.exception))

    def test_gradient(self):
        b = self.weights(3, 2)
        self.check(lambda a: ops.sum(ops.matmul(a, b)), self.weights(4, 3))
        a = self.weights(4, 3)
        self.check(lambda b: ops.sum(ops.mul(ops.matmul(a, b), np.full((4, 2), 1.5))), self.weights(3, 2))  # noqa:E501

    def test_batched_gradient(self):
        b = self.weights(2, 3, 4)
        w = self.weights(2, 5, 4)
        self.check(lambda a: ops.sum(ops.mul(ops.matmul(a, b), w)), self.weights(2, 5, 3))  # noqa:E501


class TestSoftmax(GradientCase):

    def test_uniform(self):
        np.testing.assert_allclose(ops.softmax(np.zeros(4)).data, [0.25] * 4)

    def test_closed_form(self):
        np.testing.assert_allclose(ops.softmax(np.array([0.0, math.log(3.0)])).data, [0.25, 0.75])  # noqa:E501

    def test_shift_invariance(self):
        logits = self.weights(3, 5)
        np.testing.assert_allclose(ops.softmax(logits).data, ops.softmax(logits + 100.0).data, atol=1e-12)  # noqa:E501

    def test_non_finite(self):
        self.assertRaises(NumericError, ops.softmax, np.array([0.0, np.inf]))
        self.assertRaises(NumericError, ops.log_softmax, np.array([np.nan, 1.0]))  # noqa:E501

    def test_gradient(self):
        w = self.weights(3, 5)
        self.check(lambda x: ops.sum(ops.mul(ops.softmax(x), w)), self.weights(3, 5))  # noqa:E501
        self.check(lambda x: ops.sum(ops.mul(ops.log_softmax(x), w)), self.weights(3, 5))  # noqa:E501

    def test_entropy_gradient(self):
        self.check(lambda x: ops.sum(ops.entropy(ops.log_softmax(x))), self.weights(2, 6))  # noqa:E501
        uniform = ops.entropy(ops.log_softmax(np.zeros((1, 4))))
        self.assertAlmostEqual(float(uniform.data[0]), math.log(4.0), places=10)  # noqa:E501


class TestLayerNorm(GradientCase):

    def test_constant_vector(self):
        out = ops.layer_norm(np.full((1, 4), 3.0), np.ones(4), np.zeros(4))
        np.testing.assert_allclose(out.data, np.zeros((1, 4)), atol=1e-12)

    def test_single_element_is_bias(self):
        out = ops.layer_norm(np.array([[5.0]]), np.array([2.0]), np.array([0.5]))  # noqa:E501
        np.testing.assert_allclose(out.data, [[0.5]])

    def test_closed_form(self):
        out = ops.layer_norm(np.array([1.0, 3.0]), np.ones(2), np.zeros(2))
        np.testing.assert_allclose(out.data, [-1.0, 1.0], atol=1e-4)

    def test_statistics(self):
        out = ops.layer_norm(self.weights(8, 32) * 4 + 2, np.ones(32), np.zeros(32)).data  # noqa:E501
        self.assertLess(np.abs(out.mean(axis=-1)).max(), 1e-6)
        self.assertLess(np.abs(out.var(axis=-1) - 1.0).max(), 1e-3)

    def test_gradient(self):
        gain, bias, w = self.weights(6), self.weights(6), self.weights(3, 6)
        self.check(lambda x: ops.sum(ops.mul(ops.layer_norm(x, gain, bias), w)), self.weights(3, 6))  # noqa:E501
        x = self.weights(3, 6)
        self.check(lambda g: ops.sum(ops.mul(ops.layer_norm(x, g, bias), w)), gain)  # noqa:E501


class TestCrossEntropy(GradientCase):

    def test_uniform(self):
        loss = ops.cross_entropy(np.zeros((2, 4)), np.array([0, 3]))
        self.assertAlmostEqual(loss.item(), math.log(4.0), places=10)

    def test_margin_limit(self):
        logits = np.zeros((1, 3))
        losses = []
        for margin in (1.0, 10.0, 40.0):
            logits[0, 1] = margin
            losses.append(ops.cross_entropy(logits, np.array([1])).item())
        self.assertEqual(losses, sorted(losses, reverse=True))
        self.assertLess(losses[-1], 1e-12)

    def test_target_out_of_range(self):
        self.assertRaises(TargetIndexError, ops.cross_entropy, np.zeros((2, 4)), np.array([0, 4]))  # noqa:E501
        self.assertRaises(IndexError, ops.cross_entropy, np.zeros((1, 4)), np.array([-1]))  # noqa:E501

    def test_gradient_closed_form(self):
        logits = self.weights(3, 4)
        targets = np.array([2, 0, 3])
        grad = analytic_gradient(lambda x: ops.cross_entropy(x, targets), logits)  # noqa:E501
        probs = np.exp(logits) / np.exp(logits).sum(axis=1, keepdims=True)
        probs[np.arange(3), targets] -= 1.0
        np.testing.assert_allclose(grad, probs / 3, atol=1e-12)

    def test_gradient(self):
        targets = np.array([1, 1, 4])
        self.check(lambda x: ops.cross_entropy(x, targets), self.weights(3, 5))


class TestElementwise(GradientCase):

    def test_arithmetic(self):
        w = self.weights(2, 3)
        bias = self.weights(3)
        self.check(lambda x: ops.sum(ops.mul(ops.add(x, bias), w)), self.weights(2, 3))  # noqa:E501
        self.check(lambda x: ops.sum(ops.mul(ops.sub(w, x), x)), self.weights(2, 3))  # noqa:E501
        self.check(lambda b: ops.sum(ops.mul(ops.add(w, b), w)), bias)

    def test_nonlinear(self):
        away = self.weights(4) + np.sign(self.weights(4)) * 0.1
        self.check(lambda x: ops.sum(ops.mul(ops.relu(x), np.full(4, 2.0))), np.array([0.5, -0.7, 1.2, -0.1]))  # noqa:E501
        self.check(lambda x: ops.sum(ops.exp(x)), away)
        self.check(lambda x: ops.sum(ops.log(x)), np.abs(away) + 0.5)

    def test_minimum_and_clip(self):
        other = np.array([0.0, 1.0, -1.0, 2.0])
        self.check(lambda x: ops.sum(ops.minimum(x, other)), np.array([0.5, 0.5, 0.5, 0.5]))  # noqa:E501
        self.check(lambda x: ops.sum(ops.mul(ops.clip(x, 0.9, 1.1), other)), np.array([0.5, 1.0, 1.05, 1.5]))  # noqa:E501

    def test_broadcast_is_leading_only(self):
        self.assertRaises(DimensionError, ops.add, np.ones((2, 3)), np.ones(2))

    def test_reductions(self):
        w = self.weights(3)
        self.check(lambda x: ops.sum(ops.mul(ops.sum(x, axis=0), w)), self.weights(4, 3))  # noqa:E501
        self.check(lambda x: ops.sum(ops.mul(ops.mean(x, axis=0), w)), self.weights(4, 3))  # noqa:E501
        self.assertAlmostEqual(ops.mean(np.arange(4.0)).item(), 1.5)

    def test_indexing(self):
        table_indices = np.array([[0, 2], [2, 2]])
        w = self.weights(2, 2, 3)
        self.check(lambda t: ops.sum(ops.mul(ops.embedding(t, table_indices), w)), self.weights(4, 3))  # noqa:E501
        self.check(lambda x: ops.sum(ops.pick(x, np.array([1, 0, 2]))), self.weights(3, 3))  # noqa:E501
        self.check(lambda x: ops.sum(ops.getitem(x, (slice(1, 3), 0))), self.weights(4, 2))  # noqa:E501
        other = self.weights(2, 2)
        self.check(lambda x: ops.sum(ops.mul(ops.concat([x, other], axis=1), np.full((2, 5), 3.0))), self.weights(2, 3))  # noqa:E501
        self.assertRaises(TargetIndexError, ops.pick, np.zeros((2, 3)), np.array([0, 3]))  # noqa:E501
        self.assertRaises(TargetIndexError, ops.embedding, np.zeros((2, 3)), np.array([2]))  # noqa:E501

    def test_reshape_transpose(self):
        w = self.weights(3, 2)
        self.check(lambda x: ops.sum(ops.mul(ops.transpose(ops.reshape(x, (2, 3)), (1, 0)), w)), self.weights(6))  # noqa:E501


class TestBackward(GradientCase):

    def test_linear(self):
        x = Tensor(np.arange(3.0), requires_grad=True)
        with Tape():
            backward(ops.sum(x))
        np.testing.assert_array_equal(x.grad, np.ones(3))

    def test_square(self):
        x = Tensor(np.array([1.0, 2.0, 3.0]), requires_grad=True)
        with Tape():
            backward(ops.sum(ops.mul(x, x)))
        np.testing.assert_array_equal(x.grad, [2.0, 4.0, 6.0])

    def test_accumulates(self):
        x = Tensor(np.array([1.0, 2.0, 3.0]), requires_grad=True)
        with Tape():
            loss = ops.sum(ops.mul(x, x))
            backward(loss)
            backward(loss)
        np.testing.assert_array_equal(x.grad, [4.0, 8.0, 12.0])
        x.zero_grad()
        np.testing.assert_array_equal(x.grad, np.zeros(3))

    def test_shared_subexpression(self):
        x = Tensor(np.array([2.0]), requires_grad=True)
        with Tape():
            y = ops.exp(x)
            backward(ops.sum(ops.add(y, y)))
        np.testing.assert_allclose(x.grad, 2 * np.exp([2.0]))

    def test_contract(self):
        x = Tensor(np.ones(3), requires_grad=True)
        with Tape():
            self.assertRaises(ContractError, backward, ops.exp(x))
        self.assertRaises(ContractError, backward, ops.sum(Tensor(np.ones(3))))

    def test_deterministic(self):
        def run():
            x = Tensor(np.random.default_rng(1).normal(size=(4, 5)).astype(np.float32), requires_grad=True)  # noqa:E501
            with Tape():
                loss = ops.cross_entropy(ops.layer_norm(x, np.ones(5, dtype=np.float32), np.zeros(5, dtype=np.float32)), np.array([0, 1, 2, 3]))  # noqa:E501
                backward(loss)
            return loss.item(), x.grad.copy()
        first, second = run(), run()
        self.assertEqual(first[0], second[0])
        np.testing.assert_array_equal(first[1], second[1])


class TestClipGradNorm(unittest.TestCase):

    def test_scales(self):
        param = Tensor(np.zeros(2), requires_grad=True)
        param.accumulate(np.array([3.0, 4.0]))
        self.assertAlmostEqual(clip_grad_norm([param], 0.5), 5.0)
        np.testing.assert_allclose(param.grad, [0.3, 0.4])

    def test_noop(self):
        param = Tensor(np.zeros(2), requires_grad=True)
        param.accumulate(np.array([0.3, 0.1]))
        clip_grad_norm([param], 0.5)
        np.testing.assert_array_equal(param.grad, [0.3, 0.1])

    def test_never_increases(self):
        rng = np.random.default_rng(3)
        for _ in range(20):
            params = [Tensor(np.zeros(shape), requires_grad=True) for shape in ((3,), (2, 2))]  # noqa:E501
            for param in params:
                param.accumulate(rng.normal(scale=rng.uniform(0.01, 3.0), size=param.shape))  # noqa:E501
            before = global_grad_norm(params)
            clip_grad_norm(params, 0.5)
            self.assertLessEqual(global_grad_norm(params), min(before, 0.5) + 1e-6)  # noqa:E501


class TestAdam(unittest.TestCase):

    def test_zero_gradient(self):
        param = Tensor(np.array([1.0, -2.0]), requires_grad=True)
        AdamState(0.1).step({"p": param})
        np.testing.assert_array_equal(param.data, [1.0, -2.0])

    def test_first_step(self):
        param = Tensor(np.array([1.0, 1.0]), requires_grad=True)
        param.accumulate(np.array([0.5, -2.0]))
        state = AdamState(0.01)
        state.step({"p": param})
        np.testing.assert_allclose(param.data, [0.99, 1.01], atol=1e-7)
        np.testing.assert_array_equal(param.grad, [0.0, 0.0])
        self.assertEqual(state.step_count, 1)
        self.assertEqual(state.moments("p")[0].shape, (2,))

    def test_quadratic(self):
        x = Tensor(np.array([0.0]), requires_grad=True)
        state = AdamState(0.1)
        for _ in range(200):
            with Tape():
                diff = ops.sub(x, np.array([3.0]))
                backward(ops.sum(ops.mul(diff, diff)))
            state.step({"x": x})
        self.assertLess(abs(x.item() - 3.0), 1e-2)


class TestCheckpointFormat(unittest.TestCase):

    def test_round_trip(self):
        tensors = {"a": np.arange(6, dtype=np.float32).reshape(2, 3), "b.c": np.array([0.1], dtype=np.float32)}  # noqa:E501
        payload = dumps(tensors)
        self.assertEqual(payload[:4], b"FLRB")
        loaded = loads(payload)
        self.assertEqual(list(loaded), ["a", "b.c"])
        for name, value in tensors.items():
            np.testing.assert_array_equal(loaded[name], value)
        self.assertEqual(dumps(loaded), payload)

    def test_corrupt(self):
        payload = dumps({"a": np.ones(3, dtype=np.float32)})
        self.assertRaises(CheckpointError, loads, b"XXXX" + payload[4:])
        self.assertRaises(CheckpointError, loads, payload[:-2])
        self.assertRaises(CheckpointError, loads, payload + b"\0")

    def test_name_not_utf8(self):
        payload = dumps({"a": np.ones(3, dtype=np.float32)})
        self.assertEqual(payload[16:17], b"a")
        self.assertRaises(CheckpointError, loads, payload[:16] + b"\xff" + payload[17:])  # noqa:E501
