import numpy as np
import pytest

from visplit import (
    AffineFunction,
    AffineOperator,
    ConstantFunction,
    DimensionMismatch,
    EmbeddedOperator,
    GradientOperator,
    LinearMap,
    LogSumExp,
    MaxOfAffine,
    NormFunction,
    Quadratic,
    ScaledOperator,
    ShiftedFunction,
    ZeroOperator,
    sum_select,
)
from visplit.oracle import fd_gradient_gap, subgradient_gap

PAIRS = 1000


def _shipped_functions(rng):
    n = 3
    B = rng.standard_normal((n, n))
    return [
        Quadratic(B @ B.T, rng.standard_normal(n), float(rng.standard_normal())),
        Quadratic.half_sq_distance(rng.standard_normal(n), 0.7),
        NormFunction(rng.standard_normal(n), 1.3, -0.2),
        MaxOfAffine(rng.standard_normal((4, n)), rng.standard_normal(4)),
        AffineFunction(rng.standard_normal(n), 0.4),
        LogSumExp(n),
        ConstantFunction(n, -2.0),
        ShiftedFunction(NormFunction(np.zeros(n)), 1.5),
    ]


def test_affine_select_matches_formula():
    A = np.array([[2.0, 1.0], [-1.0, 2.0]])  # symmetric part 2I, monotone
    b = np.array([0.5, -1.0])
    op = AffineOperator(A, b)
    x = np.array([1.0, 3.0])
    assert np.array_equal(op.select(x), A @ x + b)


def test_affine_operator_rejects_nonmonotone_matrix():
    with pytest.raises(ValueError):
        AffineOperator([[-1.0, 0.0], [0.0, 1.0]])
    with pytest.raises(DimensionMismatch):
        AffineOperator([[1.0, 0.0]])


def test_norm_subgradient_at_kink_is_minimum_norm():
    f = NormFunction([0.0])
    # |.| at 0 has subdifferential [-1, 1]; the selection is its center.
    assert np.array_equal(f.subgradient([0.0]), [0.0])
    assert np.array_equal(f.subgradient([-2.0]), [-1.0])
    assert f.value([-2.0]) == 2.0


def test_max_of_affine_first_argmax_tie_break():
    f = MaxOfAffine([[1.0, 0.0], [0.0, 0.0]], [0.0, 0.0])
    assert f.value([0.5, 7.0]) == 0.5
    assert np.array_equal(f.subgradient([0.5, 7.0]), [1.0, 0.0])
    # Both rows active at x1 = 0: the first row wins by convention.
    assert np.array_equal(f.subgradient([0.0, 7.0]), [1.0, 0.0])
    assert np.array_equal(f.subgradient([-1.0, 7.0]), [0.0, 0.0])


def test_quadratic_validation_and_symmetrization():
    with pytest.raises(ValueError):
        Quadratic([[0.0, 1.0], [1.0, 0.0]])  # eigenvalues +-1
    q = Quadratic([[2.0, 1.0], [0.0, 2.0]])  # silently symmetrized
    assert np.array_equal(q.Q, [[2.0, 0.5], [0.5, 2.0]])
    g = Quadratic.half_sq_distance([1.0, -2.0], 3.0)
    x = np.array([0.5, 0.5])
    assert g.value(x) == pytest.approx(0.5 * 3.0 * (0.25 + 6.25), abs=1e-12)
    assert np.allclose(g.subgradient(x), 3.0 * (x - [1.0, -2.0]), atol=1e-14)


def test_wrapper_operators():
    base = AffineOperator(np.eye(2), [1.0, 0.0])
    x = np.array([2.0, 3.0])
    assert np.array_equal(ScaledOperator(base, 0.5).select(x), [1.5, 1.5])
    assert np.array_equal(ZeroOperator(2).select(x), [0.0, 0.0])
    emb = EmbeddedOperator(3, AffineOperator([[2.0]]), 1)
    assert np.array_equal(emb.select([5.0, 4.0, 3.0]), [0.0, 8.0, 0.0])
    with pytest.raises(DimensionMismatch):
        EmbeddedOperator(2, AffineOperator(np.eye(2)), 1)
    with pytest.raises(ValueError):
        ScaledOperator(base, -1.0)


def test_sum_select_adds_selections():
    ops = [AffineOperator(np.eye(2), [1.0, 0.0]), ZeroOperator(2),
           GradientOperator(Quadratic.half_sq_distance([0.0, 0.0]))]
    x = np.array([2.0, 3.0])
    assert np.array_equal(sum_select(ops, x), [5.0, 6.0])
    with pytest.raises(ValueError):
        sum_select([], x)


def test_linear_map_adjoint_identity():
    rng = np.random.default_rng(3)
    worst = 0.0
    for _ in range(200):
        L = LinearMap(rng.standard_normal((3, 2)))
        x = rng.standard_normal(2)
        y = rng.standard_normal(3)
        worst = max(worst, abs(float(L.apply(x) @ y) - float(x @ L.adjoint_apply(y))))
    assert worst <= 1e-10
    assert LinearMap([[1.0, 2.0], [2.0, 5.0]]).is_self_adjoint()
    assert not LinearMap([[1.0, 2.0], [0.0, 5.0]]).is_self_adjoint()


def test_monotonicity_sweep():
    rng = np.random.default_rng(11)
    B = rng.standard_normal((3, 3))
    skew = rng.standard_normal((3, 3))
    skew = skew - skew.T
    oracles = [AffineOperator(B @ B.T + skew, rng.standard_normal(3))]
    oracles += [GradientOperator(f) for f in _shipped_functions(rng)]
    worst = 0.0
    for _ in range(PAIRS):
        x = 3.0 * rng.standard_normal(3)
        y = 3.0 * rng.standard_normal(3)
        for op in oracles:
            worst = min(worst, float((op.select(x) - op.select(y)) @ (x - y)))
    assert worst >= -1e-10


def test_subgradient_inequality_sweep():
    # f(y) >= f(x) + <g(x), y - x> for every shipped convex function.
    rng = np.random.default_rng(12)
    fns = _shipped_functions(rng)
    worst = 0.0
    for _ in range(PAIRS):
        x = 3.0 * rng.standard_normal(3)
        y = 3.0 * rng.standard_normal(3)
        for f in fns:
            gap = f.value(y) - f.value(x) - float(f.subgradient(x) @ (y - x))
            worst = min(worst, gap)
    assert worst >= -1e-10


def test_finite_difference_gradients():
    rng = np.random.default_rng(13)
    n = 3
    B = rng.standard_normal((n, n))
    smooth = [
        Quadratic(B @ B.T, rng.standard_normal(n)),
        LogSumExp(n),
        AffineFunction(rng.standard_normal(n), 1.0),
        ConstantFunction(n, 4.0),
        NormFunction(10.0 * np.ones(n)),  # smooth away from its center
    ]
    assert all(f.differentiable for f in smooth[:4])
    worst = 0.0
    for _ in range(100):
        x = rng.standard_normal(n)
        for f in smooth:
            worst = max(worst, fd_gradient_gap(f, x))
    assert worst <= 1e-4


def test_subgradient_gap_helper_sign():
    f = NormFunction([0.0, 0.0])
    rng = np.random.default_rng(14)
    for _ in range(100):
        x = rng.standard_normal(2)
        y = rng.standard_normal(2)
        assert subgradient_gap(f, x, y) >= -1e-12


def test_shifted_function_moves_the_level_set():
    base = Quadratic.half_sq_distance([0.0])
    f = ShiftedFunction(base, 0.5)
    assert f.value([1.0]) == 0.0
    assert np.array_equal(f.subgradient([1.0]), base.subgradient([1.0]))
    assert f.differentiable
