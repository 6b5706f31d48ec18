import numpy as np
import pytest

from matweight.apdim import (ApDimConfig, ApDimensions, a_sequence,
                             a_sequence_via_reducing, abutting_cubes,
                             admissible_m, doubling_exponent,
                             estimate_dimensions, fit_growth,
                             growth_envelope_check, reverse_holder_probe,
                             swapped_slope, tail_slope)
from matweight.geometry import CubeWindow
from matweight.reducing import build_family, identity_family
from matweight.weights import (PowerLogWeight, identity_weight, two_singularity)

SMALL = ApDimConfig(i_max=4, domain_half=32.0, window_levels=(-1, 0),
                    abut_levels=(-1, 8))


def test_identity_sequence_is_one():
    vals, i_eff, cubes = a_sequence(identity_weight(1, 2), 2.0, config=SMALL)
    assert np.allclose(vals, 1.0, atol=1e-9)
    d, beta, _ = fit_growth(vals, 1)
    assert abs(d) <= 0.05


def test_slope_never_meaningfully_negative():
    for weight in (identity_weight(1, 1), PowerLogWeight(1, 1, 0.5)):
        vals, i_eff, _ = a_sequence(weight, 2.0, config=SMALL)
        d, _, _ = fit_growth(vals, 1)
        assert d >= -0.05


def test_monotone_in_p():
    # order q > p never増 the growth: d_q <= d_p + 0.1
    W = PowerLogWeight(1, 1, -0.5)
    cfg = ApDimConfig(i_max=6, domain_half=64.0, window_levels=(-1, 0),
                      abut_levels=(-1, 10))
    v2, i2, _ = a_sequence(W, 2.0, config=cfg)
    v3, i3, _ = a_sequence(W, 3.0, config=cfg)
    d2, _, _ = fit_growth(v2)
    d3, _, _ = fit_growth(v3)
    assert d3 <= d2 + 0.1


def test_two_routes_agree():
    # direct integrals vs reducing-operator products, uniformly over i
    W = PowerLogWeight(1, 1, -0.5)
    cfg = ApDimConfig(i_max=4, domain_half=32.0, window_levels=(0, 0),
                      abut_levels=(1, 4))
    cubes = abutting_cubes([0.0], (1, 4), cfg.domain(1))
    direct, i_eff, _ = a_sequence(W, 2.0, base_cubes=cubes, i_max=4, config=cfg)
    via_ops, _, _ = a_sequence_via_reducing(W, 2.0, cubes, 4, config=cfg)
    ratio = via_ops / direct
    assert ratio.max() <= 10.0 and ratio.min() >= 0.1
    assert ratio.max() / ratio.min() <= 4.0


def test_duality_relation_nontrivial_p():
    # p = 3: the swapped-route exponent matches (p-1) * dtilde
    p = 3.0
    W = two_singularity(0.3, 0.25, p)
    cfg = ApDimConfig(i_max=6, domain_half=64.0, window_levels=(-1, 0),
                      abut_levels=(-1, 12))
    dims, _ = estimate_dimensions(W, p, cfg)
    d2, _ = swapped_slope(W, p, cfg)
    assert abs(d2 - (p - 1.0) * dims.dtilde) <= 0.15


def test_tail_slope_on_synthetic_data():
    a = 2.0 ** (0.37 * np.arange(9)) * 3.0
    slope, window, resid = tail_slope(a)
    assert slope == pytest.approx(0.37, abs=1e-9)
    d, beta, _ = fit_growth(a)
    assert d == pytest.approx(0.37, abs=1e-6) and abs(beta) <= 1e-6


def test_fit_growth_splits_log_factor():
    ii = np.arange(9)
    a = 2.0 ** (0.5 * ii) * (ii + 1.0)
    d, beta, _ = fit_growth(a)
    assert d == pytest.approx(0.5, abs=1e-6)
    assert beta == pytest.approx(1.0, abs=1e-5)


class TestAdmissibleM:
    def test_trivial_case(self):
        dims = ApDimensions(0.0, 0.0, 0.0, 1)
        assert admissible_m(0.0, 0.0, 2.0, dims, 1, "general") == 1

    def test_arithmetic_case(self):
        dims = ApDimensions(0.4, 0.3, 0.35, 1)
        assert admissible_m(0.0, 0.0, 2.0, dims, 1, "general") == 1

    def test_infinity_variant(self):
        dims = ApDimensions(0.0, 0.0, 0.0, 1)
        assert admissible_m(1.0, 0.0, 2.0, dims, 1, "infinity") == 2


class TestGrowthEnvelope:
    def test_identity_below_envelope(self):
        win = CubeWindow(1, 1, 4)
        fam = identity_family(win, 2)
        ratio, witness, pairs = growth_envelope_check(
            fam, ApDimensions(0.0, 0.0, 0.0, 1))
        assert ratio <= 1.0 + 1e-12
        assert pairs == win.num_cubes() ** 2

    def test_power_weight_tracks_formula(self):
        # ||A_Q A_R^(-1)||^p ~ ((|c_R|+l(R)) / (|c_Q|+l(Q)))^d across the window
        d, p = 0.5, 2.0
        W = PowerLogWeight(1, 1, -d)
        win = CubeWindow(1, 1, 4)
        fam = build_family(W, p, win, method="exact_p2")
        from matweight import linalg

        cubes = win.cubes()
        worst_lo, worst_hi = np.inf, 0.0
        for Q in cubes[::3]:
            for R in cubes[::3]:
                val = float(linalg.op_norm(fam.matrix(Q) @ fam.inverse(R))) ** p
                ref = ((abs(R.center[0]) + R.side) / (abs(Q.center[0]) + Q.side)) ** d
                worst_lo = min(worst_lo, val / ref)
                worst_hi = max(worst_hi, val / ref)
        assert worst_hi <= 10.0 and worst_lo >= 0.1


class TestDoubling:
    def test_identity_exact(self):
        win = CubeWindow(1, 1, 4)
        beta = doubling_exponent(identity_weight(1, 2), 2.0, win)
        assert beta == pytest.approx(1.0, abs=1e-9)

    def test_negative_power(self):
        win = CubeWindow(1, 1, 4)
        beta = doubling_exponent(PowerLogWeight(1, 1, -0.5), 2.0, win)
        assert 1.0 - 1e-9 <= beta <= 1.6

    def test_positive_power_upper(self):
        win = CubeWindow(1, 1, 4)
        beta = doubling_exponent(PowerLogWeight(1, 1, 0.5), 2.0, win)
        assert beta <= 1.5 + 1e-6


class TestReverseHolder:
    def test_identity_all_stable(self):
        win = CubeWindow(1, 1, 2)
        r_hat, table = reverse_holder_probe(identity_weight(1, 2), 2.0, win,
                                            [1.25, 1.5, 2.0])
        assert r_hat == pytest.approx(2.0)
        assert all(v == pytest.approx(1.0, abs=1e-9) for v in table.values())

    def test_inverse_sqrt_at_p1(self):
        # w = |x|^(-1/2), p = 1: w^r integrable only for r < 2
        win = CubeWindow(1, 1, 3)
        r_grid = [1.25, 1.5, 1.75, 1.9, 2.0]
        r_hat, table = reverse_holder_probe(PowerLogWeight(1, 1, -0.5), 1.0,
                                            win, r_grid)
        assert 1.5 <= r_hat < 2.0
        assert np.isnan(table[2.0])

    def test_consistent_with_dimension(self):
        # n / r_hat bounds the growth exponent from above (up to slack)
        win = CubeWindow(1, 1, 3)
        for weight, p, d_ref in ((PowerLogWeight(1, 1, -0.5), 2.0, 0.5),
                                 (PowerLogWeight(1, 1, 0.5), 2.0, 0.0)):
            r_hat, _ = reverse_holder_probe(weight, p, win,
                                            [1.1, 1.25, 1.5, 1.75, 2.0])
            assert 1.0 / r_hat >= d_ref - 0.1


def test_base_cube_filter_reduces_imax():
    W = PowerLogWeight(1, 1, -0.5)
    cfg = ApDimConfig(i_max=12, domain_half=4.0, window_levels=(1, 2),
                      abut_levels=(1, 4))
    with pytest.warns(UserWarning):
        vals, i_eff, cubes = a_sequence(W, 2.0, config=cfg)
    assert i_eff < 12 and len(vals) == i_eff + 1
