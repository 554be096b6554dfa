import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from holotwin import (
    OpticalConfig,
    back_propagate,
    field_stats,
    forward_intensity,
    physics_loss,
    physics_loss_gradient,
    propagate,
    propagate_adjoint,
    transfer_function,
)
from holotwin.propagation import band_mask
from holotwin.simulation import EllipseSpec, ObjectSpec, render_object
from holotwin.verify import gradient_fd_error

from conftest import random_field


def dft_propagate(u, cfg, z):
    """Propagation via explicit DFT matrices and a per-bin loop (no np.fft)."""
    h, w = u.shape
    Fy = np.exp(-2j * np.pi * np.outer(np.arange(h), np.arange(h)) / h)
    Fx = np.exp(-2j * np.pi * np.outer(np.arange(w), np.arange(w)) / w)
    spec = Fy @ u @ Fx.T
    lam, k = cfg.wavelength, 2 * np.pi / cfg.wavelength
    for r in range(h):
        fy = (r if r < h / 2 else r - h) / (h * cfg.pixel_pitch)
        for c in range(w):
            fx = (c if c < w / 2 else c - w) / (w * cfg.pixel_pitch)
            rad = 1 - (lam * fx) ** 2 - (lam * fy) ** 2
            spec[r, c] *= np.exp(1j * k * z * np.sqrt(rad)) if rad >= 0 else 0
    return np.conj(Fy) @ spec @ np.conj(Fx).T / (h * w)


def test_dc_bin_value(default_cfg):
    tf = transfer_function(default_cfg)
    assert tf.values[0, 0] == pytest.approx(np.exp(1j * default_cfg.wavenumber * 20e-3), abs=1e-12)
    assert abs(tf.values[0, 0]) == pytest.approx(1.0, abs=1e-15)


def test_zero_distance_identity_transfer(small_cfg):
    np.testing.assert_array_equal(transfer_function(small_cfg, 0.0).values, 1.0)


def test_default_grid_has_no_evanescent_bins(default_cfg):
    # scan every bin: lam * f_nyquist ~ 0.0572, so the radicand stays near 1
    grid = default_cfg.spectral_grid()
    lam = default_cfg.wavelength
    worst = min(1 - (lam * fx) ** 2 - (lam * fy) ** 2 for fx in grid.fx for fy in grid.fy)
    assert worst > 0.99
    assert band_mask(default_cfg).all()
    assert lam / (2 * default_cfg.pixel_pitch) == pytest.approx(0.0572, abs=1e-4)


def test_evanescent_bins_are_zeroed():
    # pitch below lambda/2 puts the outer bins past the propagating band
    cfg = OpticalConfig(wavelength=532e-9, pixel_pitch=200e-9, height=16, width=16)
    mask = band_mask(cfg)
    assert not mask.all() and mask.any()
    tf = transfer_function(cfg, 1e-6).values
    assert np.all(tf[~mask] == 0)
    np.testing.assert_allclose(np.abs(tf[mask]), 1.0, atol=1e-15)
    np.testing.assert_allclose(np.conj(tf[mask]), transfer_function(cfg, -1e-6).values[mask], atol=1e-15)


def test_matches_explicit_dft_oracle(rng):
    cfg = OpticalConfig(height=12, width=16, distance_z=3e-3)
    u = random_field(rng, cfg.shape)
    np.testing.assert_allclose(propagate(u, cfg), dft_propagate(u, cfg, cfg.distance_z), atol=1e-11)


def test_constant_field(default_cfg):
    out = propagate(np.full(default_cfg.shape, 0.7 + 0.2j), default_cfg)
    np.testing.assert_allclose(out, (0.7 + 0.2j) * np.exp(1j * default_cfg.wavenumber * default_cfg.distance_z), atol=1e-12)
    back = back_propagate(np.ones(default_cfg.shape), default_cfg)
    np.testing.assert_allclose(back, np.exp(-1j * default_cfg.wavenumber * default_cfg.distance_z), atol=1e-12)


def test_round_trip_and_energy(default_cfg, rng):
    u = random_field(rng, default_cfg.shape)
    fwd = propagate(u, default_cfg)
    assert np.max(np.abs(back_propagate(fwd, default_cfg) - u)) / np.max(np.abs(u)) < 1e-10
    e0, e1 = field_stats(u).energy, field_stats(fwd).energy
    assert abs(e1 - e0) / e0 < 1e-10


def test_zero_distance_back_propagation_is_identity(small_cfg, rng):
    u = random_field(rng, small_cfg.shape)
    np.testing.assert_allclose(back_propagate(u, small_cfg, 0.0), u, atol=1e-14)


def test_dimension_mismatch(small_cfg):
    with pytest.raises(ValueError):
        propagate(np.ones((32, 64)), small_cfg)
    with pytest.raises(ValueError):
        forward_intensity(np.ones((32, 64)), small_cfg)


@settings(max_examples=30, deadline=None)
@given(st.integers(0, 2**32 - 1), st.floats(-50e-3, 50e-3))
def test_adjoint_identity_property(seed, z):
    cfg = OpticalConfig(height=16, width=24, distance_z=z)
    rng = np.random.default_rng(seed)
    x, y = random_field(rng, cfg.shape), random_field(rng, cfg.shape)
    lhs = np.vdot(y, propagate(x, cfg))
    rhs = np.vdot(propagate_adjoint(y, cfg), x)
    assert abs(lhs - rhs) <= 1e-10 * abs(lhs)


@settings(max_examples=30, deadline=None)
@given(st.integers(0, 2**32 - 1), st.floats(-30e-3, 30e-3), st.floats(-30e-3, 30e-3))
def test_composition_property(seed, z1, z2):
    cfg = OpticalConfig(height=16, width=16)
    u = random_field(np.random.default_rng(seed), cfg.shape)
    two_step = propagate(propagate(u, cfg, z1), cfg, z2)
    np.testing.assert_allclose(two_step, propagate(u, cfg, z1 + z2), atol=1e-10 * np.abs(u).max())


@settings(max_examples=30, deadline=None)
@given(st.integers(0, 2**32 - 1), st.floats(-30e-3, 30e-3))
def test_unitarity_property(seed, z):
    cfg = OpticalConfig(height=16, width=16)
    u = random_field(np.random.default_rng(seed), cfg.shape)
    e0, e1 = field_stats(u).energy, field_stats(propagate(u, cfg, z)).energy
    assert abs(e1 - e0) <= 1e-10 * e0


def test_forward_intensity_plane_waves(small_cfg):
    np.testing.assert_allclose(forward_intensity(np.ones(small_cfg.shape), small_cfg), 1.0, atol=1e-12)
    np.testing.assert_allclose(forward_intensity(np.full(small_cfg.shape, 0.6), small_cfg), 0.36, atol=1e-12)


def test_forward_intensity_ellipse_against_dft_oracle():
    cfg = OpticalConfig(height=24, width=24, distance_z=2e-3)
    obj = render_object(ObjectSpec((EllipseSpec(12, 11, 6, 5, 0.3, 0.4, 0.95),), 24, 24))
    holo = forward_intensity(obj, cfg)
    oracle = np.abs(dft_propagate(obj, cfg, cfg.distance_z)) ** 2
    assert np.all(holo >= 0)
    assert holo.mean() == pytest.approx(oracle.mean(), rel=1e-12)
    # fringes: the hologram is not flat around the object
    assert holo.std() > 1e-3


def test_physics_loss_zero_at_exact_fit(small_cfg, rng):
    obj = 1 + 0.1 * random_field(rng, small_cfg.shape)
    measured = forward_intensity(obj, small_cfg)
    loss, grad = physics_loss_gradient(obj, measured, small_cfg)
    assert loss == 0.0
    assert np.all(grad == 0)


def test_physics_loss_matches_elementwise_oracle(rng):
    cfg = OpticalConfig(height=8, width=8, distance_z=1e-3)
    obj = 1 + 0.2 * random_field(rng, cfg.shape)
    measured = rng.uniform(0, 2, cfg.shape)
    pred = np.abs(dft_propagate(obj, cfg, cfg.distance_z)) ** 2
    oracle = sum(abs(p - m) for p, m in zip(pred.ravel(), measured.ravel())) / 64
    assert physics_loss(obj, measured, cfg) == pytest.approx(oracle, rel=1e-10)
    assert physics_loss_gradient(obj, measured, cfg)[0] == pytest.approx(oracle, rel=1e-10)


def test_gradient_matches_central_differences(rng):
    cfg = OpticalConfig(height=16, width=16)
    errs = [gradient_fd_error(rng, cfg) for _ in range(10)]
    assert np.mean(np.array(errs) < 1e-4) >= 0.95


def test_small_step_along_negative_gradient_decreases_loss(small_cfg, rng):
    obj = 1 + 0.2 * random_field(rng, small_cfg.shape)
    measured = forward_intensity(1 + 0.2 * random_field(rng, small_cfg.shape), small_cfg)
    loss, grad = physics_loss_gradient(obj, measured, small_cfg)
    eta = 1e-3 / np.max(np.abs(grad))
    assert physics_loss(obj - eta * grad, measured, small_cfg) < loss
