from __future__ import annotations

import math
import warnings

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from twoch.functionals import energy_E, energy_F
from twoch.grid import Field, Grid, State, deriv, x_norm
from twoch.solitary import (
    OverlapWarning,
    ProfileError,
    SolitaryWave,
    TrainSpec,
    decay_rate,
    profile,
    profile_values,
    required_length,
    stationary_residual,
    train,
)

SPEEDS = (1.2, 1.5, 2.0, 3.0, 5.0)


@pytest.fixture(scope="module")
def waves():
    return {c: profile(c, 0.0, Grid(4096, 100.0 if c > 1.3 else 200.0)) for c in SPEEDS}


@pytest.mark.parametrize("c", SPEEDS)
def test_profile_matches_independent_quadrature(c, oracle):
    table = oracle["profile"][f"{c:g}"]
    r = np.array([float(k) for k in table])
    want = np.array(list(table.values()))
    np.testing.assert_allclose(profile_values(c, r), want, rtol=1e-12)


@pytest.mark.parametrize("c", SPEEDS)
def test_energies_match_oracle(c, waves, oracle):
    s = waves[c].state()
    ref = oracle["energy"][f"{c:g}"]
    assert energy_E(s) == pytest.approx(ref["E"], rel=1e-9)
    assert energy_F(s) == pytest.approx(ref["F"], rel=1e-9)


@pytest.mark.parametrize("c", SPEEDS)
def test_profile_invariants(c, waves):
    w = waves[c]
    phi, xi = w.phi.values, w.xi.values
    assert abs(np.max(phi) - (c - 1)) < 1e-8 * (c - 1)
    assert np.max(np.abs(xi * (c - phi) - phi)) < 1e-10
    assert stationary_residual(w) < 1e-8
    assert np.all(phi >= 0)
    assert max(phi[0], phi[-1]) < 1e-10 * (c - 1)
    # mirror pairs x_j and x_{n-j}
    assert np.max(np.abs(phi[1:] - phi[1:][::-1])) < 1e-10


@pytest.mark.parametrize("c", SPEEDS)
def test_single_crest(c, waves):
    phi = waves[c].phi.values
    top = int(np.argmax(phi))
    assert np.all(np.diff(phi[: top + 1]) >= 0)
    assert np.all(np.diff(phi[top:]) <= 0)


def test_c2_values():
    w = profile(2.0, 0.0, Grid(2048, 100.0))
    assert w.amplitude == 1.0
    assert w.decay_rate == pytest.approx(math.sqrt(3) / 2)
    assert w.xi.values[np.argmax(w.phi.values)] == pytest.approx(1.0, rel=1e-12)


@pytest.mark.parametrize("c", SPEEDS)
def test_tail_log_slope(c):
    r = np.linspace(15.0, 25.0, 41) / decay_rate(c) * decay_rate(2.0)
    slope = np.polyfit(r, np.log(profile_values(c, r)), 1)[0]
    assert abs(-slope / decay_rate(c) - 1) < 0.01


def test_amplitude_and_norm_increase_with_speed(waves):
    amps = [np.max(waves[c].phi.values) for c in SPEEDS]
    norms = [x_norm(waves[c].state()) for c in SPEEDS]
    assert np.all(np.diff(amps) > 0)
    assert np.all(np.diff(norms) > 0)


def test_impostors_fail_the_residual():
    g = Grid(2048, 100.0)
    w = profile(2.0, 0.0, g)
    b = decay_rate(2.0)
    sech2 = 1.0 / np.cosh(0.5 * b * g.x) ** 2
    fake = SolitaryWave(2.0, 0.0, Field(g, sech2), Field(g, sech2 / (2.0 - sech2)))
    assert stationary_residual(fake) > 1e-3
    scaled = w.phi * 1.05
    fake2 = SolitaryWave(2.0, 0.0, scaled, Field(g, scaled.values / (2.0 - scaled.values)))
    assert stationary_residual(fake2) > 1e-3


def test_profile_errors():
    g = Grid(1024, 100.0)
    for c in (1.0, 0.5, -2.0, float("nan")):
        with pytest.raises(ProfileError):
            profile(c, 0.0, g)
    with pytest.raises(ProfileError, match="too short"):
        profile(1.05, 0.0, g)
    with pytest.raises(ProfileError):
        profile(2.0, 80.0, g)


def test_required_length_is_sufficient():
    for c in (1.05, 2.0, 5.0):
        L = required_length(c)
        profile(c, 0.0, Grid(1024, L))
        with pytest.raises(ProfileError):
            profile(c, 0.0, Grid(1024, 0.9 * L))


def test_center_shift_is_translation():
    g = Grid(2048, 100.0)
    a = profile(2.0, 0.0, g)
    b = profile(2.0, 100 * g.spacing, g)
    np.testing.assert_allclose(np.roll(a.phi.values, 100), b.phi.values, atol=1e-15)


def test_table_has_three_columns():
    w = profile(3.0, 0.0, Grid(64, 64.0))
    lines = w.table().splitlines()
    assert lines[0] == "# x phi xi"
    assert len(lines) == 65
    assert all(len(l.split()) == 3 for l in lines[1:])


def test_train_spec_contract():
    spec = TrainSpec((2.0, 3.0, 3.5), (-40.0, 0.0, 50.0))
    assert spec.sigma0 == pytest.approx(0.25 * 0.5)
    assert spec.separation == 40.0
    with pytest.raises(ValueError):
        TrainSpec((3.0, 2.0), (0.0, 40.0))
    with pytest.raises(ValueError):
        TrainSpec((2.0, 3.0), (40.0, 0.0))
    with pytest.raises(ProfileError):
        TrainSpec((1.0, 3.0), (0.0, 40.0))


def test_single_wave_train_equals_profile():
    g = Grid(1024, 100.0)
    s = train(TrainSpec((2.0,), (3.0,)), g)
    w = profile(2.0, 3.0, g)
    np.testing.assert_array_equal(s.u.values, w.phi.values)
    np.testing.assert_array_equal(s.eta.values, w.xi.values)
    assert not s.overlap


def test_separated_train_energy_is_additive():
    g = Grid(4096, 204.8)
    spec = TrainSpec((2.0, 3.0), (-20.0, 20.0))
    s = train(spec, g)
    parts = sum(energy_E(profile(c, 0.0, g).state()) for c in spec.speeds)
    assert abs(energy_E(s) - parts) <= math.exp(-spec.sigma0 * 40.0) * parts


def test_overlapping_train_cross_term():
    g = Grid(2048, 100.0)
    spec = TrainSpec((2.0, 3.0), (-1.0, 1.0))
    with pytest.warns(OverlapWarning):
        s = train(spec, g)
    assert s.overlap
    a, b = s.waves
    cross = g.integrate(a.phi.values * b.phi.values + deriv(a.phi).values * deriv(b.phi).values
                        + a.xi.values * b.xi.values)
    sep = energy_E(a.state()) + energy_E(b.state())
    assert abs(energy_E(s) - sep) > 1e-2 * energy_E(s)
    assert energy_E(s) - sep == pytest.approx(cross, rel=1e-12)


@settings(max_examples=25, deadline=None)
@given(st.floats(min_value=1.02, max_value=8.0))
def test_crest_relations_for_any_speed(c):
    phi = profile_values(c, np.array([0.0, 1e-3, 1.0]))
    assert phi[0] == pytest.approx(c - 1, rel=1e-14)
    assert phi[0] >= phi[1] >= phi[2] > 0
    # quadrature relation phi'^2 = phi^2((c-phi)^2-1)/(c-phi)^2 at r = 1
    h = 1e-5
    d = (profile_values(c, np.array([1 + h]))[0] - profile_values(c, np.array([1 - h]))[0]) / (2 * h)
    p = phi[2]
    assert d**2 == pytest.approx(p**2 * ((c - p) ** 2 - 1) / (c - p) ** 2, rel=1e-6)


@settings(max_examples=20, deadline=None)
@given(st.floats(min_value=1.1, max_value=6.0), st.floats(min_value=-10, max_value=10))
def test_residual_small_for_any_resolved_wave(c, x0):
    L = max(60.0, math.ceil(required_length(c)))
    w = profile(c, x0, Grid(4096, L))
    assert stationary_residual(w) < 1e-8
    assert np.max(w.phi.values) <= (c - 1) * (1 + 1e-14)


def test_no_overlap_warning_when_separated():
    with warnings.catch_warnings():
        warnings.simplefilter("error")
        train(TrainSpec((2.0, 3.0), (-30.0, 30.0)), Grid(2048, 204.8))
