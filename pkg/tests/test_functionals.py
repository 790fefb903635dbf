from __future__ import annotations

import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from twoch.dynamics import advance
from twoch.functionals import (
    Partition,
    convolution_bound_check,
    default_K,
    energy_E,
    energy_F,
    localized_energies,
    multiplier_bound_check,
    variational_derivatives,
)
from twoch.grid import Grid, State, l2_inner
from twoch.solitary import TrainSpec, profile, train
from twoch.weights import (
    WeightAuditError,
    WeightPsi,
    audit_weight,
    two_sided_lower_bound,
)

from conftest import smooth_field, smooth_state

seeds = st.integers(min_value=0, max_value=2**32 - 1)


# weight ------------------------------------------------------------------

def test_weight_tails_are_exact():
    w = WeightPsi(1.0)
    x = np.array([-5.0, -1.5, -1.0 - 1e-9])
    np.testing.assert_allclose(w(x), np.exp(-np.abs(x)), rtol=1e-15)
    x = -x
    np.testing.assert_allclose(w(x), 1 - np.exp(-np.abs(x)), rtol=1e-15)


def test_weight_audit():
    rep = audit_weight("smooth")
    assert rep.passed
    assert rep.points == 10_000
    assert rep.min_derivative > 0
    assert rep.max_ratio <= 10.0
    assert rep.jump < 1e-10


def test_weight_is_monotone_and_bounded():
    w = WeightPsi(6.0)
    x = np.linspace(-60, 60, 20001)
    v = w(x)
    assert np.all(v > 0) and np.all(v <= 1)
    assert np.all(w(x, 1) > 0)
    assert w(np.array([0.0]))[0] == pytest.approx(0.5, abs=1e-12)


def test_weight_derivatives_are_consistent():
    w = WeightPsi(1.0)
    x = np.linspace(-1.5, 1.5, 301)
    h = 1e-5
    for order in range(3):
        fd = (w(x + h, order) - w(x - h, order)) / (2 * h)
        np.testing.assert_allclose(fd, w(x, order + 1), atol=2e-6 * (1 + 50 * order))


def test_scaled_weight():
    w1, w6 = WeightPsi(1.0), WeightPsi(6.0)
    x = np.linspace(-20, 20, 11)
    np.testing.assert_allclose(w6(x), w1(x / 6), rtol=1e-15)
    np.testing.assert_allclose(w6(x, 1), w1(x / 6, 1) / 6, rtol=1e-15)


def test_quintic_blend_fails_audit():
    with pytest.raises(WeightAuditError):
        WeightPsi(5.0, "quintic")
    rep = audit_weight("quintic", strict=False)
    assert rep.min_derivative < 0


def test_two_sided_ratio_is_infeasible_at_ten():
    mass = 0.5 - math.exp(-1)
    assert two_sided_lower_bound(10.0) > mass
    assert two_sided_lower_bound(25.0) < mass


# E and F -------------------------------------------------------------------

def test_energy_examples():
    L = 16.0
    g = Grid(128, L)
    assert energy_E(State.zeros(g)) == 0
    assert energy_F(State.zeros(g)) == 0
    k = 2 * np.pi / L
    s = State.from_arrays(g, np.sin(k * g.x), np.zeros(g.n))
    assert energy_E(s) == pytest.approx(L / 4 * (1 + k**2), rel=1e-13)
    a = 0.7
    s = State.from_arrays(g, np.full(g.n, a), np.zeros(g.n))
    assert energy_F(s) == pytest.approx(0.5 * a**3 * L, rel=1e-13)


def test_energy_refinement():
    a = profile(2.0, 0.0, Grid(1024, 100.0)).state()
    b = profile(2.0, 0.0, Grid(4096, 100.0)).state()
    assert abs(energy_E(a) / energy_E(b) - 1) < 1e-8


@settings(max_examples=20, deadline=None)
@given(seeds)
def test_F_vanishes_for_odd_u_even_eta(seed):
    g = Grid(256, 30.0)
    rng = np.random.default_rng(seed)
    f = smooth_field(g, rng, 15)
    u = 0.5 * (f - np.roll(f[::-1], 1))
    e = smooth_field(g, rng, 15)
    e = 0.5 * (e + np.roll(e[::-1], 1))
    assert abs(energy_F(State.from_arrays(g, u, e))) < 1e-12


def test_gradients_of_zero_state():
    gr = variational_derivatives(State.zeros(Grid(64, 10.0)))
    for f in (gr.E_u, gr.E_eta, gr.F_u, gr.F_eta):
        assert not np.any(f.values)


def test_gateaux_derivative_converges_quadratically(rng):
    g = Grid(256, 30.0)
    s = smooth_state(g, rng, 12)
    h = smooth_state(g, rng, 12)
    gr = variational_derivatives(s)
    for func, grad in ((energy_F, gr.F), (energy_E, gr.E)):
        exact = l2_inner(grad, h)
        errs = []
        for eps in (1e-3, 1e-4):
            fd = (func(s + eps * h) - func(s - eps * h)) / (2 * eps)
            errs.append(abs(fd - exact))
        if func is energy_F:
            assert errs[0] / errs[1] == pytest.approx(100, rel=0.05)
        assert errs[1] < 1e-8 * max(1.0, abs(exact))


@pytest.mark.parametrize("c", [1.5, 2.0, 3.0])
def test_wave_is_critical_point_of_cE_minus_F(c):
    w = profile(c, 0.0, Grid(4096, 100.0))
    gr = variational_derivatives(w.state())
    du = c * gr.E_u.values - gr.F_u.values
    de = c * gr.E_eta.values - gr.F_eta.values
    scale = np.max(np.abs(gr.F_u.values))
    assert max(np.max(np.abs(du)), np.max(np.abs(de))) < 1e-6 * scale


# partition and localized energies -------------------------------------------

@pytest.fixture(scope="module")
def two_wave():
    g = Grid(4096, 204.8)
    spec = TrainSpec((2.0, 3.0), (-20.0, 20.0))
    return g, spec, train(spec, g)


def test_default_K():
    assert default_K(40) == 6
    assert default_K(9) == 5
    assert default_K(100) == 10


def test_partition_of_unity_and_localization(two_wave):
    g, spec, _ = two_wave
    for K in (5, 6, 10):
        part = Partition(g, spec.centers, K)
        assert np.max(np.abs(part.phis.sum(axis=0) - 1)) < 1e-12
        rep = part.localization(40.0)
        assert rep.passed, rep


def test_partition_contract():
    g = Grid(256, 100.0)
    with pytest.raises(ValueError):
        Partition(g, [10.0, 0.0], 5)
    with pytest.raises(ValueError):
        Partition(g, [], 5)
    with pytest.raises(IndexError):
        Partition(g, [0.0, 10.0], 5).psi(1)


def test_far_right_bump_carries_its_energy(two_wave):
    g, spec, s = two_wave
    K = 6
    part = Partition(g, spec.centers, K)
    le = localized_energies(s, part)
    E = energy_E(s)
    E3 = energy_E(profile(3.0, 0.0, g).state())
    assert abs(le.I[0] - E3) <= 4 * math.exp(-40.0 / (4 * K)) * E
    assert abs(le.E.sum() - E) < 1e-12 * E
    assert abs(le.F.sum() - energy_F(s)) < 1e-12 * abs(energy_F(s))
    np.testing.assert_allclose(le.I, le.I_from_E(), rtol=1e-12)


def test_wave_left_of_midpoint_has_small_I():
    g = Grid(2048, 200.0)
    K = 6.0
    part = Partition(g, [-20.0, 20.0], K)
    y2 = part.midpoints[0]
    s = profile(2.0, y2 - 3 * K, g).state()
    I = localized_energies(s, part).I[0]
    # direct weighted quadrature on a finer grid as the oracle
    gf = Grid(8192, 200.0)
    sf = profile(2.0, y2 - 3 * K, gf).state()
    from twoch.functionals import energy_density
    oracle = gf.integrate(WeightPsi(K)(gf.x - y2) * energy_density(sf))
    assert I == pytest.approx(oracle, rel=1e-10)
    assert I < 0.1 * energy_E(s)


def test_partition_midpoint_outside_grid():
    g = Grid(256, 100.0)
    with pytest.raises(ValueError):
        Partition(g, [-10.0, 200.0], 5)


def test_localized_energies_move_while_totals_do_not():
    g = Grid(2048, 204.8)
    spec = TrainSpec((2.0, 3.0), (-12.0, 12.0))
    s0 = train(spec, g)
    s1 = advance(s0, 1e-3, 2000)
    part = Partition(g, spec.centers, 5)
    a, b = localized_energies(s0, part), localized_energies(s1, part)
    assert abs(energy_E(s1) - energy_E(s0)) < 1e-9 * energy_E(s0)
    assert np.max(np.abs(b.E - a.E)) > 1e-3


@pytest.mark.parametrize("K", [5, 6, 10])
def test_multiplier_bound(K):
    rep = multiplier_bound_check(float(K))
    assert rep.passed, rep
    assert rep.min_relative_margin > 0


def test_multiplier_bound_on_partition(two_wave):
    g, spec, _ = two_wave
    assert multiplier_bound_check(Partition(g, spec.centers, 6)).passed


def test_multiplier_bound_needs_K_at_least_five():
    with pytest.raises(ValueError):
        multiplier_bound_check(2.0)


@settings(max_examples=40, deadline=None)
@given(seeds)
def test_convolution_bound_with_unit_factor(seed):
    g = Grid(512, 100.0)
    rng = np.random.default_rng(seed)
    eta = g.field(smooth_field(g, rng, 40, amp=rng.uniform(0.1, 3)))
    assert convolution_bound_check(eta, 1.0).passed()


def test_constants_break_the_half_factor():
    g = Grid(256, 50.0)
    eta = g.field(np.full(g.n, 0.5))
    rep = convolution_bound_check(eta, 0.5)
    assert rep.max_violation == pytest.approx(0.125, rel=1e-12)
    assert convolution_bound_check(eta, 1.0).max_violation == pytest.approx(0.0, abs=1e-15)
