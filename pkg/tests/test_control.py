import numpy as np
import pytest

from platoonlat.control import (
    DelayViolation,
    GainSet,
    LearnedSignal,
    delay_margin,
    ff_control,
    ff_reference_error,
    kff_formula,
    lead_learned_signal,
    learned_update,
    lfp_control,
    output_derivative,
)
from platoonlat.model import ErrorState


def test_ff_control_cases(gains):
    assert ff_control(gains, 10.0, ErrorState(0, 0), 0.0) == 0.0
    assert ff_control(gains, 10.0, ErrorState(0, 0), 0.02) == pytest.approx(1.59 * 0.02)
    u = ff_control(gains, 10.0, ErrorState(0.1, 0.05, 0.0, 0.001), 0.01)
    expected = -(0.06 * 0.1 + 0.96 * 0.05) - 10 * (0.08 * 0.001) + 1.59 * 0.01
    assert u == pytest.approx(expected, abs=1e-15)
    assert u == pytest.approx(-0.0389, abs=1e-12)


def test_ff_reference_error():
    e1 = ErrorState(0.1, 0.02, 0.0, 0.003)
    e2 = ErrorState(0.15, 0.01)
    ref, hp = ff_reference_error(1, {1: e1}, 0.01)
    assert ref is e1 and hp == 0.01
    ref, hp = ff_reference_error(2, {1: e1, 2: e1}, 0.01)
    np.testing.assert_array_equal(ref.as_array(), 0.0)
    ref, hp = ff_reference_error(2, {1: e1, 2: e2}, 0.01)
    assert (ref.e_lat, ref.theta_err) == pytest.approx((0.05, -0.01))
    assert hp == pytest.approx(0.013)
    with pytest.raises(ValueError):
        ff_reference_error(0, {1: e1}, 0.0)
    with pytest.raises(ValueError):
        ff_reference_error(3, {3: e1}, 0.0)


def test_kff_formula(params):
    assert kff_formula(params, 0.96) == pytest.approx(1.586, abs=5e-4)
    low = params.with_speed(1e-6)
    assert kff_formula(low, 0.96) == pytest.approx(params.a + params.b - params.b * 0.96)
    wb = params.a + params.b
    expected = wb + params.mass * 100 / wb * (params.b / params.cf - params.a / params.cr)
    assert kff_formula(params, 0.0) == pytest.approx(expected)


def test_gainset_validation():
    with pytest.raises(ValueError):
        GainSet(k_p=(1.0,), k_d=(0, 0), k_ff=0)
    with pytest.raises(ValueError):
        GainSet(k_p=(1, 1), k_d=(0, 0), k_ff=0, k_lp=(1.0, 2.0))
    with pytest.raises(ValueError):
        GainSet(k_p=(1, 1), k_d=(0, 0), k_ff=0, output="vector", k_lp=0.1, k_ld=(0, 0))
    with pytest.raises(ValueError):
        GainSet(k_p=(1, float("inf")), k_d=(0, 0), k_ff=0)
    g = GainSet(k_p=(1, 1), k_d=(0, 0), k_ff=0, output="vector", k_lp=(0.1, 0.2), k_ld=(0, 0))
    assert g.k_lp == (0.1, 0.2) and type(g.k_lp[0]) is float


def test_learned_update_identities(gains):
    grid = np.linspace(0, 10, 1001)
    prev = LearnedSignal(grid, np.cos(grid))
    z = np.zeros_like(grid)
    np.testing.assert_array_equal(learned_update(gains, prev, z, z).u_l, prev.u_l)
    y = np.sin(grid)
    zero_gain = gains.replace(k_lp=0.0, k_ld=0.0)
    np.testing.assert_array_equal(learned_update(zero_gain, prev, y, np.cos(grid)).u_l, prev.u_l)


def test_learned_update_pointwise(gains):
    grid = np.linspace(0, 20, 2001)
    y = 0.3 * np.sin(0.5 * grid)
    yp = output_derivative(y, grid[1] - grid[0])
    prev = lead_learned_signal(gains, grid, 0.01 * np.ones_like(grid))
    new = learned_update(gains, prev, y, yp)
    for k in (0, 17, 1000, 2000):
        assert new.u_l[k] == pytest.approx(1.59 * 0.01 + (-0.04) * y[k] + (-0.3) * yp[k], abs=1e-15)
    np.testing.assert_allclose(yp[1:-1], 0.15 * np.cos(0.5 * grid[1:-1]), atol=1e-5)


def test_learned_update_grid_mismatch(gains):
    prev = LearnedSignal(np.linspace(0, 1, 11), np.zeros(11))
    with pytest.raises(ValueError):
        learned_update(gains, prev, np.zeros(10), np.zeros(10))


def test_learned_update_commutes_with_restriction(gains, rng):
    grid = np.linspace(0, 5, 501)
    prev = LearnedSignal(grid, rng.normal(size=501))
    y, yp = rng.normal(size=501), rng.normal(size=501)
    full = learned_update(gains, prev, y, yp).restrict(200)
    part = learned_update(gains, prev.restrict(200), y[:200], yp[:200])
    np.testing.assert_array_equal(full.u_l, part.u_l)


def test_lead_signal_is_exact_feedforward(gains):
    grid = np.linspace(0, 1, 11)
    kappa = np.linspace(-0.1, 0.1, 11)
    np.testing.assert_array_equal(lead_learned_signal(gains, grid, kappa).u_l, gains.k_ff * kappa)


def test_lfp_control(gains):
    grid = np.linspace(0, 10, 101)
    sig = LearnedSignal(grid, 0.01 * grid)
    assert lfp_control(gains, 10.0, ErrorState(0, 0), sig, 5.05) == pytest.approx(0.0505)
    e = ErrorState(0.1, 0.05, 0.0, 0.001)
    assert lfp_control(gains, 10.0, e, lead_learned_signal(gains, grid, 0.01 * np.ones(101)), 3.0) == \
        pytest.approx(ff_control(gains, 10.0, e, 0.01))
    with pytest.raises(DelayViolation):
        sig.at(10.5)


def test_delay_margin_truth_table():
    assert delay_margin(20, 10, 1.0).feasible is True
    assert delay_margin(20, 10, 1.0).margin == 1.0
    assert delay_margin(20, 10, 2.0).feasible is False
    assert delay_margin(20, 10, 2.0).margin == 0.0
    dm = delay_margin(5, 10, 0.6)
    assert dm.feasible is False and dm.margin == pytest.approx(-0.1)
    with pytest.raises(ValueError):
        delay_margin(0, 10, 0.1)


def test_learned_csv(tmp_path, gains):
    grid = np.linspace(0, 1, 3)
    sig = learned_update(gains, LearnedSignal(grid, np.zeros(3)), np.ones(3), np.zeros(3))
    sig.write_csv(tmp_path / "l.csv")
    assert (tmp_path / "l.csv").read_text().splitlines()[0] == "l_d_m,u_l_rad,y_si,y_prime_si"
