import numpy as np
import pytest

from numkit import tensor as nk
from numkit.gradcheck import grad_check
from numkit.tensor import ContractError, NonFiniteError, Tape, Tensor, backward


SOFT_TARGET = np.array([[0.2, 0.5, 0.3], [1.0, 0.0, 2.0]])


def param(values):
    return Tensor(np.asarray(values, dtype=float), requires_grad=True, name="p")


def test_product_rule():
    x, y = param([2.0]), param([3.0])
    with Tape() as tape:
        loss = nk.sum(x * y)
    grads = backward(loss, tape)
    np.testing.assert_allclose(grads[x], [3.0])
    np.testing.assert_allclose(grads[y], [2.0])


def test_sum_gives_all_ones():
    x = param(np.arange(6.0).reshape(2, 3))
    with Tape() as tape:
        loss = nk.sum(x)
    assert np.array_equal(backward(loss, tape)[x], np.ones((2, 3)))


def test_cross_entropy_matches_finite_differences(rng):
    x = param(rng.standard_normal(4))
    err = grad_check(lambda: nk.cross_entropy(x, 2), [x])
    assert err < 1e-6


def test_non_scalar_loss_rejected():
    x = param([1.0, 2.0])
    with Tape() as tape:
        y = x * 2.0
    with pytest.raises(ContractError):
        backward(y, tape)


def test_unreached_parameter_gets_zero_gradient():
    x, unused = param([1.0]), param([[1.0, 2.0]])
    with Tape() as tape:
        loss = nk.sum(x * x)
    grads = backward(loss, tape, [x, unused])
    assert np.array_equal(grads[unused], np.zeros((1, 2)))
    assert np.array_equal(unused.grad, np.zeros((1, 2)))


def test_nothing_recorded_without_tape():
    x = param([1.0])
    y = x * 3.0
    assert not y.requires_grad
    with Tape() as tape:
        x * 3.0
    assert len(tape) == 1


def test_non_finite_is_reported():
    with pytest.raises(NonFiniteError):
        nk.exp(Tensor([1000.0]))


def test_log_clamps_and_blocks_gradient_below_floor():
    x = param([0.0, 0.5])
    with Tape() as tape:
        loss = nk.sum(nk.log(x, lo=1e-12))
    g = backward(loss, tape)[x]
    assert np.isclose(loss.item(), np.log(1e-12) + np.log(0.5))
    np.testing.assert_allclose(g, [0.0, 2.0])


def test_item_requires_single_value():
    with pytest.raises(ContractError):
        Tensor([1.0, 2.0]).item()


def test_embedding_range_checked():
    table = param(np.zeros((3, 2)))
    with pytest.raises(ContractError):
        nk.embedding(table, 3)


def test_softmax_rows_sum_to_one(rng):
    out = nk.softmax(Tensor(rng.standard_normal((3, 5))))
    np.testing.assert_allclose(out.data.sum(axis=-1), np.ones(3), atol=1e-12)


@pytest.mark.parametrize("build", [
    lambda a, b: nk.sum(nk.tanh(a @ b)),
    lambda a, b: nk.sum(nk.sigmoid(a) * nk.softplus(a)),
    lambda a, b: nk.mean(nk.softmax(a, axis=0) * nk.exp(a)),
    lambda a, b: nk.sum(nk.concat([a[0], a[1]]) * nk.concat([b[:, 0], b[:, 1]])),
    lambda a, b: nk.sum(nk.log(nk.sigmoid(a), lo=1e-12)),
    lambda a, b: nk.sum(nk.mean(a, axis=1) + nk.sum(b, axis=0)[:2]),
    lambda a, b: nk.cross_entropy(a, SOFT_TARGET),
    lambda a, b: nk.sum(nk.embedding(b, [0, 2, 2]) * 1.5),
])
def test_primitive_gradients(build, rng):
    a = param(rng.standard_normal((2, 3)))
    b = param(rng.standard_normal((3, 2)))
    assert grad_check(lambda: build(a, b), [a, b]) < 1e-5


def test_grad_check_of_square_is_exact():
    x = param([3.0])
    assert grad_check(lambda: nk.sum(x * x), [x], eps=1e-4) < 1e-8


def test_grad_check_of_constant_is_zero():
    x = param([1.0, 2.0])
    assert grad_check(lambda: Tensor(4.0), [x]) == 0.0


def test_grad_check_names_the_perturbed_entry():
    x = Tensor([709.0], requires_grad=True, name="edge")

    with pytest.raises(NonFiniteError, match=r"edge\[0\]"):
        grad_check(lambda: nk.sum(nk.exp(x)), [x], eps=2.0)


def test_grad_check_rejects_non_positive_eps():
    with pytest.raises(ContractError):
        grad_check(lambda: Tensor(1.0), [param([1.0])], eps=0.0)


def test_grad_check_floor_absorbs_vanishing_gradients():
    # a tiny gradient riding on a large value is lost to rounding in the differences
    x = param([1.0])

    def fn():
        return nk.sum(x * x) * 1e-10 + 1000.0

    assert grad_check(fn, [x]) > 0.1
    assert grad_check(fn, [x], floor=1e-5) < 1e-4
    with pytest.raises(ContractError):
        grad_check(fn, [x], floor=0.0)


def test_backward_is_linear_in_the_loss(rng):
    a = param(rng.standard_normal((2, 3)))
    b = param(rng.standard_normal((3, 2)))

    def f():
        return nk.sum(nk.tanh(a @ b))

    def g():
        return nk.mean(nk.softmax(a, axis=1) * nk.exp(a))

    def grads_of(build):
        with Tape() as tape:
            loss = build()
        found = backward(loss, tape, [a, b])
        return found[a], found[b]

    fa, fb = grads_of(f)
    ga, gb = grads_of(g)
    ca, cb = grads_of(lambda: f() * 2.5 + g() * -0.75)
    np.testing.assert_allclose(ca, 2.5 * fa - 0.75 * ga, atol=1e-12)
    np.testing.assert_allclose(cb, 2.5 * fb - 0.75 * gb, atol=1e-12)


def test_non_finite_values_pass_through_when_allowed():
    x = Tensor([np.inf, 1.0])
    with pytest.raises(NonFiniteError):
        nk.softmax(x)
    with nk.allow_non_finite():
        out = nk.softmax(x)
    assert np.isnan(out.data).all()
    with pytest.raises(NonFiniteError):
        nk.softmax(x)
