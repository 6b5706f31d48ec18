import numpy as np
import pytest

from matweight.errors import (IntegrabilityError, InvalidExponentError,
                              InvalidVariantError, SingularityError)
from matweight.geometry import CubeWindow, DyadicCube, cube_box
from matweight.weights import (ConjugatedBlockWeight, ConstantWeight,
                               GridSampledWeight, PowerLogWeight,
                               analytic_ball_average, ap_constant,
                               cube_average_matrix_norm, dual_weight,
                               identity_weight, two_singularity,
                               weight_from_descriptor)


def conjugated_block():
    return ConjugatedBlockWeight(PowerLogWeight(1, 1, -0.4),
                                 PowerLogWeight(1, 1, 0.3))


class TestEvaluate:
    def test_power_log_trivial(self):
        W = PowerLogWeight(1, 2, 0.0, 0.0)
        assert np.allclose(W.evaluate([0.37]), np.eye(2))

    def test_power_log_at_four(self):
        W = PowerLogWeight(1, 2, -0.5)
        assert np.allclose(W.evaluate([4.0]), 0.5 * np.eye(2))

    def test_two_singularity_formula(self):
        W = two_singularity(0.4, 0.3, 2.0)
        x = 0.1
        expected = abs(x) ** -0.4 * abs(x - 0.25) ** ((2.0 - 1.0) * 0.3)
        assert W.evaluate([x])[0, 0].real == pytest.approx(expected)

    def test_singular_point_raises(self):
        W = PowerLogWeight(1, 1, -0.5)
        with pytest.raises(SingularityError):
            W.evaluate([0.0])

    def test_conjugated_block_noncommuting(self):
        W = conjugated_block()
        A = W.evaluate([0.1])
        B = W.evaluate([0.3])
        assert np.max(np.abs(A @ B - B @ A)) > 1e-6

    def test_descriptor_roundtrip(self):
        for W in (PowerLogWeight(1, 2, -0.3, 1.0), two_singularity(0.2, 0.1, 3.0),
                  conjugated_block()):
            W2 = weight_from_descriptor(W.descriptor())
            x = np.array([0.17])
            assert np.allclose(W.evaluate(x), W2.evaluate(x))


class TestCubeAverage:
    def test_identity(self):
        val = cube_average_matrix_norm(identity_weight(1, 2), 2.0, DyadicCube(1, (0,)))
        assert val == pytest.approx(1.0)

    def test_constant_two(self):
        W = ConstantWeight(1, 2.0 * np.eye(2))
        val = cube_average_matrix_norm(W, 2.0, DyadicCube(1, (0,)))
        assert val == pytest.approx(np.sqrt(2.0))

    def test_power_log_exact_integral(self):
        # (avg over [0,1) of |x|^(-1/2))^(1/1) = 2
        val = cube_average_matrix_norm(PowerLogWeight(1, 1, -0.5), 1.0,
                                       DyadicCube(0, (0,)))
        assert val == pytest.approx(2.0, rel=1e-3)

    def test_shrinking_cube_tracks_closed_form(self):
        # avg over cubes near the origin behaves like (|c_Q| + l(Q))^a:
        # the comparison constant stays fixed as the cube shrinks
        a, p = -0.5, 2.0
        W = PowerLogWeight(1, 1, a)
        ratios = []
        for j in (2, 4, 6, 8):
            Q = DyadicCube(j, (0,))
            val = cube_average_matrix_norm(W, p, Q) ** p
            envelope = (abs(Q.center[0]) + Q.side) ** a
            ratios.append(val / envelope)
        assert all(0.25 <= r <= 4.0 for r in ratios)
        assert max(ratios) / min(ratios) <= 1.05

    def test_divergent_raises(self):
        with pytest.raises(IntegrabilityError):
            cube_average_matrix_norm(PowerLogWeight(1, 1, -1.2), 1.0,
                                     DyadicCube(1, (0,)))


class TestApConstant:
    def test_identity_all_variants(self):
        win = CubeWindow(1, 1, 3)
        assert ap_constant(identity_weight(1, 2), 2.0, win).value == pytest.approx(1.0)
        std = ap_constant(identity_weight(1, 2), 0.5, win, "standard")
        star = ap_constant(identity_weight(1, 2), 0.5, win, "star")
        assert std.value == pytest.approx(1.0)
        assert star.value == pytest.approx(1.0)

    def test_star_needs_small_p(self):
        with pytest.raises(InvalidVariantError):
            ap_constant(identity_weight(1, 1), 2.0, CubeWindow(1, 1, 2), "star")
        with pytest.raises(InvalidExponentError):
            ap_constant(identity_weight(1, 1), -1.0, CubeWindow(1, 1, 2))

    def test_power_weight_finite_and_stable(self):
        # |x|^(1/2) is A_2 on the line; refinement changes the value little
        W = PowerLogWeight(1, 1, 0.5)
        win = CubeWindow(1, 1, 4)
        coarse = ap_constant(W, 2.0, win, base_depth=3, grade_depth=10)
        fine = ap_constant(W, 2.0, win, base_depth=4, grade_depth=18)
        assert np.isfinite(fine.value)
        assert abs(fine.value - coarse.value) <= 0.05 * fine.value

    def test_standard_below_star(self):
        W = conjugated_block()
        win = CubeWindow(1, 1, 3)
        std = ap_constant(W, 0.5, win, "standard", base_depth=3, grade_depth=8)
        star = ap_constant(W, 0.5, win, "star", base_depth=3, grade_depth=8)
        assert std.value <= star.value * (1 + 1e-12)

    def test_window_monotonicity(self):
        W = PowerLogWeight(1, 1, 0.5)
        small = ap_constant(W, 2.0, CubeWindow(1, 1, 3))
        large = ap_constant(W, 2.0, CubeWindow(1, 1, 4))
        assert large.value >= small.value - 1e-12

    def test_inclusion_in_larger_class(self):
        # finite at p implies finite (and computed stable) at q > p
        W = PowerLogWeight(1, 1, -0.5)
        win = CubeWindow(1, 1, 3)
        for p in (2.0, 3.0):
            val = ap_constant(W, p, win)
            assert np.isfinite(val.value) and val.value >= 1.0 - 1e-6


class TestDualWeight:
    def test_identity(self):
        D = dual_weight(identity_weight(1, 2), 2.0)
        assert np.allclose(D.evaluate([0.2]), np.eye(2))

    def test_power_log_exponents(self):
        D = dual_weight(PowerLogWeight(1, 1, 0.6, 0.0), 3.0)
        assert D.a == pytest.approx(-0.3)

    def test_two_singularity_dual_formula(self):
        p = 2.0
        W = two_singularity(0.4, 0.3, p)
        D = dual_weight(W, p)
        x = 0.05
        expected = abs(x) ** (0.4 / (p - 1.0)) * abs(x - 0.25) ** -0.3
        assert D.evaluate([x])[0, 0].real == pytest.approx(expected)

    def test_involution(self):
        p = 2.5
        pprime = p / (p - 1.0)
        for W in (PowerLogWeight(1, 1, -0.5, 2.0), two_singularity(0.3, 0.2, p),
                  conjugated_block()):
            back = dual_weight(dual_weight(W, p), pprime)
            x = np.array([0.11])
            assert np.max(np.abs(back.evaluate(x) - W.evaluate(x))) <= 1e-10

    def test_small_p_rejected(self):
        with pytest.raises(InvalidExponentError):
            dual_weight(identity_weight(1, 1), 1.0)


class TestBallAverage:
    def test_trivial(self):
        val, env = analytic_ball_average(0.0, 0.0, [3.0], 0.5, 1)
        assert val == pytest.approx(1.0) and env == pytest.approx(1.0)

    def test_exact_antiderivative(self):
        val, env = analytic_ball_average(-0.5, 0.0, [0.0], 1.0, 1)
        assert val == pytest.approx(2.0, rel=1e-4)
        assert env == pytest.approx(1.0)

    def test_offset_oracle(self):
        val, env = analytic_ball_average(-0.5, 0.0, [4.0], 1.0, 1)
        assert val == pytest.approx(np.sqrt(5) - np.sqrt(3), rel=1e-4)

    def test_divergent_exponent(self):
        with pytest.raises(InvalidExponentError):
            analytic_ball_average(-1.0, 0.0, [0.0], 1.0, 1)

    @pytest.mark.parametrize("a,b", [(-0.5, 0.0), (0.75, 0.0), (-0.5, -1.0)])
    def test_ratio_bracket_over_sweep(self, a, b):
        ratios = []
        for x0 in np.logspace(-3, 3, 5):
            for r in np.logspace(-3, 3, 5):
                val, env = analytic_ball_average(a, b, [x0], r, 1)
                ratios.append(val / env)
        assert 0.05 <= min(ratios) and max(ratios) <= 10.0


def test_validate_on_window():
    from matweight.weights import validate_on_window

    win = CubeWindow(1, 1, 3)
    worst = validate_on_window(PowerLogWeight(1, 1, -0.5), 2.0, win)
    assert np.isfinite(worst) and worst > 0
    with pytest.raises(IntegrabilityError):
        validate_on_window(PowerLogWeight(1, 1, -1.5, 0.0, 1.0), 1.0, win)


class TestGridSampled:
    def test_piecewise_constant_eval(self):
        box = cube_box(1)
        samples = np.stack([np.eye(2) * (i + 1.0) for i in range(4)])
        W = GridSampledWeight(box, samples)
        assert np.allclose(W.evaluate([-0.4]), np.eye(2))
        assert np.allclose(W.evaluate([0.4]), 4.0 * np.eye(2))

    def test_power_and_dual(self):
        box = cube_box(1)
        samples = np.stack([np.eye(2) * 4.0, np.eye(2) * 9.0])
        W = GridSampledWeight(box, samples)
        assert np.allclose(W.power_at(np.array([[0.3]]), 0.5)[0], 3.0 * np.eye(2))
        D = W.dual(2.0)
        assert np.allclose(D.evaluate([0.3]), np.eye(2) / 9.0)
