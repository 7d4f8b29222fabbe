import dataclasses
import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from irsgame.channel import (ChannelSet, absorption_loss, link_geometry, los_path_gain,
                             spreading_loss, steering_vector, synthesize_channels)
from irsgame.errors import DomainError, ValidationError
from irsgame.scenario import scenario_from_dict, with_override

C = 3e8


def test_steering_zero_direction():
    np.testing.assert_allclose(steering_vector(4, 0.0), 0.5 * np.ones(4))


def test_steering_two_elements_quarter_direction():
    # exponents -2 pi 0.25 (i - 1/2) for i = 0, 1
    expect = np.array([np.exp(1j * np.pi / 4), np.exp(-1j * np.pi / 4)]) / math.sqrt(2)
    np.testing.assert_allclose(steering_vector(2, 0.25), expect, atol=1e-15)


@settings(max_examples=100, deadline=None)
@given(n=st.integers(1, 256), phi=st.floats(-2, 2, allow_nan=False))
def test_steering_unit_norm(n, phi):
    assert np.linalg.norm(steering_vector(n, phi)) == pytest.approx(1.0, abs=1e-12)


def test_steering_rejects_empty_array():
    with pytest.raises(DomainError):
        steering_vector(0, 0.1)


def test_spreading_loss_value():
    assert spreading_loss(0.3e12, 50.0) == pytest.approx(1.5915494e-6, rel=1e-7)


def test_spreading_loss_inverse_distance():
    assert spreading_loss(0.3e12, 100.0) == pytest.approx(spreading_loss(0.3e12, 50.0) / 2)


@pytest.mark.parametrize("r", [0.0, -1.0])
def test_spreading_loss_singularity(r):
    with pytest.raises(DomainError):
        spreading_loss(0.3e12, r)


def test_absorption_loss_values():
    assert absorption_loss(2e12, 100.0, 2.3e-5) == pytest.approx(0.998851, abs=1e-6)
    assert absorption_loss(0.3e12, 123.0, 0.0) == 1.0
    assert absorption_loss(0.3e12, 0.0, 2.3e-5) == 1.0


@settings(max_examples=100, deadline=None)
@given(f=st.floats(1e9, 1e13), r=st.floats(0.1, 1e3), zeta=st.floats(0, 1e-2))
def test_los_gain_modulus(f, r, zeta):
    g = los_path_gain(f, r, zeta)
    assert abs(g) == pytest.approx(spreading_loss(f, r) * absorption_loss(f, r, zeta), rel=1e-12)


def test_los_gain_full_cycle_phases():
    f = 0.3e12
    g = los_path_gain(f, C / f)
    assert np.angle(g) == pytest.approx(0.0, abs=1e-12)
    g50 = los_path_gain(f, 50.0)  # 5e4 whole cycles
    assert abs(g50) == pytest.approx(1.5915494e-6, rel=1e-7)
    assert np.angle(g50) == pytest.approx(0.0, abs=1e-9)


def test_path_loss_decreases_in_distance_and_absorption():
    rs = np.linspace(1, 200, 50)
    mags = [abs(los_path_gain(0.3e12, r, 1e-3)) for r in rs]
    assert np.all(np.diff(mags) < 0)
    zs = np.linspace(0, 1e-2, 20)
    assert np.all(np.diff([absorption_loss(0.3e12, 50, z) for z in zs]) < 0)


def test_link_geometry():
    r, phi = link_geometry((0.0, 0.0), (3.0, 4.0))
    assert r == 5.0
    assert phi == pytest.approx(0.5 * 4 / 5)
    with pytest.raises(DomainError):
        link_geometry((1.0, 1.0), (1.0, 1.0))


def test_channel_dimensions_and_structure(table2):
    for s in table2.strategies:
        ch = synthesize_channels(table2, s)
        L, K = table2.provider_of(s).antennas, s.active_elements
        assert ch.direct.shape == (L,)
        assert ch.irs_user.shape == (K,)
        assert ch.bs_irs.shape == (K, L)
        assert np.linalg.matrix_rank(ch.bs_irs, tol=1e-6 * np.abs(ch.bs_irs).max()) == 1


def test_direct_channel_norm_is_los_gain(table2):
    s = table2.strategies[0]
    ch = synthesize_channels(table2, s)
    r, _ = link_geometry(table2.providers[0].bs_position, table2.user_position)
    assert np.linalg.norm(ch.direct) == pytest.approx(abs(los_path_gain(0.3e12, r)), rel=1e-12)


def test_bs_irs_frobenius_norm_product_model(table2):
    sc = dataclasses.replace(table2, cascade_model="product")
    s = sc.strategies[1]
    ch = synthesize_channels(sc, s)
    sp, panel = sc.provider_of(s), sc.panel_of(s)
    r1, _ = link_geometry(sp.bs_position, panel.position)
    r2, _ = link_geometry(panel.position, sc.user_position)
    L, K = sp.antennas, s.active_elements
    assert np.linalg.norm(ch.bs_irs) == pytest.approx(
        math.sqrt(L * K) * abs(los_path_gain(0.3e12, r1)), rel=1e-12)
    assert np.linalg.norm(ch.irs_user) == pytest.approx(abs(los_path_gain(0.3e12, r2)), rel=1e-12)


def test_specular_cascade_uses_unfolded_distance(table2):
    s = table2.strategies[0]
    ch = synthesize_channels(table2, s)
    sp, panel = table2.provider_of(s), table2.panel_of(s)
    r1, _ = link_geometry(sp.bs_position, panel.position)
    r2, _ = link_geometry(panel.position, table2.user_position)
    L, K = sp.antennas, s.active_elements
    cascade = np.linalg.norm(ch.bs_irs) / math.sqrt(L * K) * np.linalg.norm(ch.irs_user)
    assert cascade == pytest.approx(spreading_loss(0.3e12, r1 + r2), rel=1e-12)


def test_los_channels_are_bit_identical_on_repeat(table2):
    s = table2.strategies[3]
    a, b = synthesize_channels(table2, s, seed=4), synthesize_channels(table2, s, seed=4)
    for x, y in [(a.direct, b.direct), (a.irs_user, b.irs_user), (a.bs_irs, b.bs_irs)]:
        assert x.tobytes() == y.tobytes()


def test_nlos_paths_seeded_and_weak(table2):
    s = table2.strategies[0]
    los = synthesize_channels(table2, s)
    a = synthesize_channels(table2, s, nlos_paths=3, seed=1)
    b = synthesize_channels(table2, s, nlos_paths=3, seed=1)
    c = synthesize_channels(table2, s, nlos_paths=3, seed=2)
    assert np.array_equal(a.direct, b.direct) and np.array_equal(a.bs_irs, b.bs_irs)
    assert not np.array_equal(a.direct, c.direct)
    # scattered power is ~20 dB down per path
    extra = np.linalg.norm(a.direct - los.direct) / np.linalg.norm(los.direct)
    assert 0 < extra < 1.0
    assert np.all(np.isfinite(a.bs_irs))


def test_irs_disabled_zeroes_reflection(table2):
    off = dataclasses.replace(table2, irs_enabled=False)
    ch = synthesize_channels(off, off.strategies[0])
    assert not ch.bs_irs.any() and not ch.irs_user.any()
    assert np.linalg.norm(ch.direct) > 0


def test_user_on_top_of_irs_is_a_domain_error(table2_raw):
    raw = with_override(table2_raw, "user.position", [30.0, 20.0])
    s = scenario_from_dict(raw)
    with pytest.raises(DomainError):
        synthesize_channels(s, s.strategies[-1])


def test_channelset_rejects_bad_shapes():
    with pytest.raises(DomainError):
        ChannelSet(np.ones(4, complex), np.ones(3, complex), np.ones((2, 4), complex))
    with pytest.raises(DomainError):
        ChannelSet(np.array([np.nan, 1], complex), np.ones(1, complex), np.ones((1, 2), complex))


def test_unknown_cascade_model_rejected(table2_raw):
    raw = with_override(table2_raw, "physics.cascade_model", "mirror")
    with pytest.raises(ValidationError):
        scenario_from_dict(raw)
