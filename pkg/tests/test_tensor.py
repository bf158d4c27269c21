import zlib

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from realogic import tensor as T
from realogic.errors import IncompatibleShapes, InvalidAxis, InvalidExponent, NonScalarRoot, ShapeMismatch
from realogic.tensor import Tensor

from oracles import central_diff, loop_binary, loop_broadcast_shape, rel_err

SIGMOID_2 = 0.880797077977882444  # mpmath, 30 digits
SQRT_034 = 0.583095189484530047
ONE_MINUS_SQRT_034 = 0.416904810515469953


class TestBroadcastShapes:
    def test_grid_grid(self):
        assert T.broadcast_shapes([3, 1], [1, 2]) == (3, 2)

    def test_identity(self):
        assert T.broadcast_shapes([5], [5]) == (5,)

    def test_rank_extension(self):
        assert T.broadcast_shapes([4, 1, 6], [2, 6]) == (4, 2, 6)
        assert loop_broadcast_shape([4, 1, 6], [2, 6]) == (4, 2, 6)

    def test_incompatible(self):
        with pytest.raises(IncompatibleShapes):
            T.broadcast_shapes([3], [4])

    @given(
        st.lists(st.integers(1, 4), max_size=3),
        st.lists(st.integers(1, 4), max_size=3),
    )
    def test_matches_loop_oracle(self, a, b):
        expected = loop_broadcast_shape(a, b)
        if expected is None:
            with pytest.raises(IncompatibleShapes):
                T.broadcast_shapes(a, b)
        else:
            assert T.broadcast_shapes(a, b) == expected


shape_st = st.lists(st.integers(1, 4), max_size=3)


@settings(max_examples=200, deadline=None)
@given(shape_st, shape_st, st.sampled_from(["add", "sub", "mul"]), st.integers(0, 2**32 - 1))
def test_ew_binary_matches_nested_loops(sa, sb, kind, seed):
    if loop_broadcast_shape(sa, sb) is None:
        return
    rng = np.random.default_rng(seed)
    a, b = rng.uniform(-2, 2, sa), rng.uniform(-2, 2, sb)
    op = {"add": lambda x, y: x + y, "sub": lambda x, y: x - y, "mul": lambda x, y: x * y}[kind]
    got = T.ew_binary(kind, a, b).value
    # 0 ulps: same scalar operation on the same operands
    np.testing.assert_array_equal(got, loop_binary(op, a, b))


def test_ew_binary_examples():
    assert T.mul(0.5, 0.5).item() == 0.25
    np.testing.assert_array_equal(T.add([1, 2, 3], 0.0).value, [1, 2, 3])
    col = np.array([[2.0], [3.0], [5.0]])
    row = np.array([[7.0, 11.0]])
    np.testing.assert_array_equal(T.mul(col, row).value, [[14, 22], [21, 33], [35, 55]])
    with pytest.raises(IncompatibleShapes):
        T.add(np.ones(3), np.ones(2))


def test_ew_unary_examples():
    assert T.complement(0.3).item() == pytest.approx(0.7, abs=1e-15)
    assert T.sigmoid(0.0).item() == 0.5
    assert T.sigmoid(2.0).item() == pytest.approx(SIGMOID_2, abs=1e-15)
    assert T.affine_scalar(2.0, scale=3.0, shift=-1.0).item() == 5.0


def test_sigmoid_strictly_inside_unit_interval():
    v = T.sigmoid(np.array([-800.0, -40.0, 0.0, 40.0, 800.0])).value
    assert np.all(v > 0) and np.all(v < 1)


class TestPMean:
    def test_p1_is_mean(self):
        assert T.reduce_pmean([0.2, 0.8], 0, 1).item() == pytest.approx(0.5, abs=1e-15)

    def test_constant_ones(self):
        for p in (1, 2, 5.5):
            assert T.reduce_pmean([1.0, 1.0, 1.0], 0, p, stabilize=False).item() == 1.0
            assert T.reduce_pmean([1.0, 1.0, 1.0], 0, p).item() == pytest.approx(1.0, abs=1e-6)

    def test_p2_value(self):
        assert T.reduce_pmean([0.2, 0.8], 0, 2).item() == pytest.approx(SQRT_034, abs=1e-15)

    def test_errors(self):
        with pytest.raises(InvalidExponent):
            T.reduce_pmean([0.5], 0, 0.5)
        with pytest.raises(InvalidAxis):
            T.reduce_pmean([0.5], 1, 2)
        with pytest.raises(InvalidAxis):
            T.reduce_pmean(0.5, 0, 2)

    def test_reduces_requested_axis(self):
        a = np.array([[0.2, 0.8], [0.4, 0.4], [1.0, 0.0]])
        np.testing.assert_allclose(T.reduce_pmean(a, 1, 1, stabilize=False).value, [0.5, 0.4, 0.5])
        np.testing.assert_allclose(T.reduce_pmean(a, 0, 1, stabilize=False).value, [1.6 / 3, 1.2 / 3])
        np.testing.assert_allclose(T.reduce_pmean(a, -1, 1, stabilize=False).value, [0.5, 0.4, 0.5])

    def test_gradient_finite_at_zero(self):
        x = Tensor([0.0, 0.0], requires_grad=True)
        T.backward(T.reduce_pmean(x, 0, 2))
        assert np.all(np.isfinite(x.grad))


class TestPMeanError:
    def test_fully_satisfied(self):
        for p in (1, 2, 7):
            assert T.reduce_pmean_error([1.0, 1.0], 0, p, stabilize=False).item() == 1.0
            assert T.reduce_pmean_error([1.0, 1.0], 0, p).item() == pytest.approx(1.0, abs=1e-6)

    def test_p1(self):
        assert T.reduce_pmean_error([0.2, 0.8], 0, 1).item() == pytest.approx(0.5, abs=1e-15)

    def test_p2(self):
        assert T.reduce_pmean_error([0.2, 0.8], 0, 2).item() == pytest.approx(ONE_MINUS_SQRT_034, abs=1e-15)

    @given(st.lists(st.floats(0, 1), min_size=1, max_size=8), st.floats(1, 8))
    def test_complement_identity(self, us, p):
        a = np.array(us)
        lhs = T.reduce_pmean_error(a, 0, p).item()
        rhs = 1.0 - T.reduce_pmean(1.0 - a, 0, p).item()
        assert abs(lhs - rhs) <= 1e-12


class TestMinMax:
    def test_examples(self):
        assert T.reduce_min([0.3, 0.7], 0).item() == 0.3
        assert T.reduce_max([0.3, 0.7], 0).item() == 0.7
        np.testing.assert_array_equal(T.reduce_min([[0.1, 0.9], [0.5, 0.2]], 0).value, [0.1, 0.2])

    def test_tie_gradient_goes_to_lowest_index(self):
        x = Tensor([0.4, 0.2, 0.2, 0.9], requires_grad=True)
        T.backward(T.reduce_min(x, 0))
        np.testing.assert_array_equal(x.grad, [0, 1, 0, 0])
        y = Tensor([0.9, 0.2, 0.9], requires_grad=True)
        T.backward(T.reduce_max(y, 0))
        np.testing.assert_array_equal(y.grad, [1, 0, 0])

    def test_invalid_axis(self):
        with pytest.raises(InvalidAxis):
            T.reduce_max([[0.1]], 2)


class TestAffine:
    def test_identity(self):
        np.testing.assert_array_equal(T.affine(np.eye(2), [3.0, 4.0], np.zeros(2)).value, [3, 4])

    def test_hand_arithmetic(self):
        np.testing.assert_array_equal(T.affine([[1.0, 1.0]], [2.0, 3.0], [1.0]).value, [6])

    def test_batched_shape(self):
        assert T.affine(np.ones((3, 2)), np.ones((5, 2)), np.ones(3)).shape == (5, 3)

    def test_mismatch(self):
        with pytest.raises(ShapeMismatch):
            T.affine(np.ones((3, 2)), np.ones((5, 4)), np.ones(3))


class TestBackward:
    def test_square(self):
        x = Tensor(3.0, requires_grad=True)
        T.backward(T.mul(x, x))
        assert x.grad == 6.0

    def test_complement(self):
        x = Tensor(0.37, requires_grad=True)
        T.backward(T.complement(x))
        assert x.grad == -1.0

    def test_pmean_error_vs_finite_differences(self):
        u0 = np.array([0.3, 0.9])
        x = Tensor(u0, requires_grad=True)
        T.backward(T.reduce_pmean_error(x, 0, 2))
        numeric = central_diff(lambda u: T.reduce_pmean_error(u, 0, 2).item(), u0)
        assert rel_err(x.grad, numeric) < 1e-6

    def test_non_scalar_root(self):
        with pytest.raises(NonScalarRoot):
            T.backward(Tensor([1.0, 2.0], requires_grad=True))

    def test_accumulates_across_calls(self):
        x = Tensor(2.0, requires_grad=True)
        T.backward(T.mul(x, 3.0))
        T.backward(T.mul(x, 3.0))
        assert x.grad == 6.0

    def test_diamond_accumulates_each_path(self):
        x = Tensor(2.0, requires_grad=True)
        y = T.mul(x, x)
        z = T.add(y, T.mul(y, x))  # x^2 + x^3
        T.backward(z)
        assert x.grad == pytest.approx(2 * 2 + 3 * 4)

    def test_replay_is_deterministic(self):
        rng = np.random.default_rng(5)
        u = rng.uniform(0.05, 0.95, (4, 3))

        def run():
            x = Tensor(u, requires_grad=True)
            root = T.reduce_pmean_error(T.reduce_pmean(T.mul(x, T.sigmoid(x)), 1, 3), 0, 2)
            T.backward(root)
            return x.grad

        a, b = run(), run()
        assert a.tobytes() == b.tobytes()

    def test_tape_is_topological(self):
        x = Tensor([0.2, 0.5], requires_grad=True)
        root = T.reduce_pmean(T.mul(T.sigmoid(x), x), 0, 2)
        tape = T.Tape(root)
        position = {e.node_id: i for i, e in enumerate(tape.entries)}
        for i, e in enumerate(tape.entries):
            assert all(position[j] < i for j in e.inputs)
        assert tape.entries[-1].output is root


def _unary_cases():
    return {
        "complement": lambda x: T.complement(x),
        "sigmoid": lambda x: T.sigmoid(x),
        "affine_scalar": lambda x: T.affine_scalar(x, 1.7, -0.2),
        "elu": lambda x: T.elu(x - 0.5),
        "pmean_p1": lambda x: T.reduce_pmean(x, 0, 1),
        "pmean_p2": lambda x: T.reduce_pmean(x, 1, 2),
        "pmean_p6": lambda x: T.reduce_pmean(x, 0, 6),
        "pmean_error_p2": lambda x: T.reduce_pmean_error(x, 1, 2),
        "pmean_error_p3": lambda x: T.reduce_pmean_error(x, 0, 3.5),
        "min": lambda x: T.reduce_min(x, 0),
        "max": lambda x: T.reduce_max(x, 1),
        "sum": lambda x: T.reduce_sum(x, 0),
        "permute": lambda x: T.permute(x, (1, 0)),
        "reshape": lambda x: T.reshape(x, (6,)),
        "expand": lambda x: T.expand(T.reshape(x, (1, 3, 2)), (2, 3, 2)),
        "clamp": lambda x: T.clamp(x, 0.2, 0.8),
    }


@pytest.mark.parametrize("name", sorted(_unary_cases()))
def test_gradients_match_finite_differences(name):
    op = _unary_cases()[name]
    rng = np.random.default_rng(zlib.crc32(name.encode()))
    weights = rng.normal(size=op(Tensor(np.full((3, 2), 0.5))).shape)
    for _ in range(100):
        u0 = rng.uniform(0.05, 0.95, (3, 2))
        if name == "clamp" and np.min(np.abs(np.concatenate([u0 - 0.2, u0 - 0.8]))) < 1e-3:
            continue

        def f(u):
            return float(np.sum(op(Tensor(u)).value * weights))

        x = Tensor(u0, requires_grad=True)
        T.backward(T.reduce_sum(T.reshape(T.mul(op(x), weights), (-1,)), 0))
        assert rel_err(x.grad, central_diff(f, u0)) < 1e-4


@pytest.mark.parametrize("kind", ["add", "sub", "mul", "minimum", "maximum"])
def test_binary_gradients_with_broadcasting(kind):
    fn = {"minimum": T.minimum, "maximum": T.maximum}.get(kind, lambda a, b: T.ew_binary(kind, a, b))
    rng = np.random.default_rng(11)
    for _ in range(100):
        a0, b0 = rng.uniform(0.05, 0.95, (3, 1)), rng.uniform(0.05, 0.95, (1, 2))
        if np.min(np.abs(a0 - b0)) < 1e-3:
            continue
        w = rng.normal(size=(3, 2))
        a, b = Tensor(a0, requires_grad=True), Tensor(b0, requires_grad=True)
        T.backward(T.reduce_sum(T.reshape(T.mul(fn(a, b), w), (-1,)), 0))
        na = central_diff(lambda x: float(np.sum(fn(x, b0).value * w)), a0)
        nb = central_diff(lambda x: float(np.sum(fn(a0, x).value * w)), b0)
        assert rel_err(a.grad, na) < 1e-4
        assert rel_err(b.grad, nb) < 1e-4


def test_affine_gradients():
    rng = np.random.default_rng(3)
    for _ in range(20):
        W0, x0, b0 = rng.normal(size=(3, 2)), rng.normal(size=(5, 2)), rng.normal(size=3)
        w = rng.normal(size=(5, 3))
        W, x, b = (Tensor(v, requires_grad=True) for v in (W0, x0, b0))
        T.backward(T.reduce_sum(T.reshape(T.mul(T.affine(W, x, b), w), (-1,)), 0))
        assert rel_err(W.grad, central_diff(lambda v: float(np.sum(T.affine(v, x0, b0).value * w)), W0)) < 1e-4
        assert rel_err(x.grad, central_diff(lambda v: float(np.sum(T.affine(W0, v, b0).value * w)), x0)) < 1e-4
        assert rel_err(b.grad, central_diff(lambda v: float(np.sum(T.affine(W0, x0, v).value * w)), b0)) < 1e-4


def test_concat_and_stack_gradients():
    a, b = Tensor(np.ones((2, 1)), requires_grad=True), Tensor(np.ones((2, 3)), requires_grad=True)
    c = T.concat([a, b], axis=-1)
    assert c.shape == (2, 4)
    T.backward(T.reduce_sum(T.reshape(T.mul(c, np.arange(8.0).reshape(2, 4)), (-1,)), 0))
    np.testing.assert_array_equal(a.grad, [[0], [4]])
    np.testing.assert_array_equal(b.grad, [[1, 2, 3], [5, 6, 7]])
    s = [Tensor(0.5, requires_grad=True), Tensor(0.25, requires_grad=True)]
    T.backward(T.reduce_sum(T.mul(T.stack(s), [2.0, 3.0]), 0))
    assert (s[0].grad, s[1].grad) == (2.0, 3.0)


@settings(max_examples=300, deadline=None)
@given(st.lists(st.floats(0.0, 1.0), min_size=1, max_size=10))
def test_pmean_monotone_in_p(us):
    a = np.array(us)
    r1, r2, r6 = (T.reduce_pmean(a, 0, p, stabilize=False).item() for p in (1, 2, 6))
    assert r1 <= r2 + 1e-12 and r2 <= r6 + 1e-12 and r6 <= a.max() + 1e-12


def test_zero_extent_rejected():
    with pytest.raises(ShapeMismatch):
        Tensor(np.zeros((0, 2)))
