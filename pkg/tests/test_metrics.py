import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy import ndimage
from skimage.metrics import structural_similarity

from holotwin import (
    LossWeights,
    NoiseConfig,
    bs_ratio,
    dirty_reconstruct,
    evaluate_fields,
    evaluate_method,
    forward_intensity,
    freq_ssim,
    psnr,
    simulate_sample,
    ssim,
    supervised_loss,
    total_loss,
)
from holotwin.core import substream
from holotwin.metrics import METRIC_NAMES

from conftest import random_field


def test_default_weights():
    w = LossWeights()
    assert (w.w_amp, w.w_phase, w.w_complex, w.w_freq, w.lambda_phy) == (0.4, 0.2, 0.2, 0.2, 0.1)
    with pytest.raises(ValueError):
        LossWeights(w_amp=-0.1)


def test_unit_components_total_exactly_one():
    assert LossWeights().combine(1.0, 1.0, 1.0, 1.0) == 1.0


def test_supervised_loss_identity(rng):
    gt = 1 + 0.2 * random_field(rng, (32, 32))
    assert supervised_loss(gt, gt) == (0.0, 0.0, 0.0, 0.0, 0.0)


def test_pi_phase_offset():
    gt = np.full((16, 16), 0.8 + 0j)
    loss = supervised_loss(gt * np.exp(1j * np.pi), gt)
    assert loss.phase == pytest.approx(math.pi, abs=1e-12)
    assert loss.amp == pytest.approx(0.0, abs=1e-15)
    assert loss.complex == pytest.approx(1.6)


def test_supervised_components_against_elementwise_oracle(rng):
    p, g = random_field(rng, (8, 8)), random_field(rng, (8, 8))
    loss = supervised_loss(p, g)
    amp = np.mean([abs(abs(a) - abs(b)) for a, b in zip(p.ravel(), g.ravel())])
    phase = np.mean([abs(math.remainder(np.angle(a) - np.angle(b), 2 * math.pi)) for a, b in zip(p.ravel(), g.ravel())])
    assert loss.amp == pytest.approx(amp, rel=1e-12)
    assert loss.phase == pytest.approx(phase, rel=1e-12)
    assert loss.total == pytest.approx(0.4 * loss.amp + 0.2 * (loss.phase + loss.complex + loss.freq), rel=1e-12)


def test_phase_wrapping_ignores_2pi():
    g = np.exp(1j * np.linspace(-3, 3, 64)).reshape(8, 8)
    assert supervised_loss(g * np.exp(2j * np.pi), g).phase < 1e-12


@settings(max_examples=25, deadline=None)
@given(st.integers(0, 2**32 - 1), st.integers(0, 15), st.integers(0, 15))
def test_loss_nonnegative_and_shift_invariant(seed, dy, dx):
    rng = np.random.default_rng(seed)
    p, g = random_field(rng, (16, 16)), random_field(rng, (16, 16))
    base = supervised_loss(p, g)
    shifted = supervised_loss(np.roll(p, (dy, dx), (0, 1)), np.roll(g, (dy, dx), (0, 1)))
    assert all(v >= 0 for v in base)
    np.testing.assert_allclose(shifted, base, rtol=1e-9)


def test_total_loss(small_cfg, rng):
    gt = 1 + 0.1 * random_field(rng, small_cfg.shape)
    measured = forward_intensity(gt, small_cfg)
    assert total_loss(gt, gt, measured, small_cfg) == 0.0
    pred = gt * 0.9
    no_phy = LossWeights(lambda_phy=0.0)
    assert total_loss(pred, gt, measured, small_cfg, no_phy) == supervised_loss(pred, gt, no_phy).total
    from holotwin import physics_loss

    expected = supervised_loss(pred, gt).total + 0.1 * physics_loss(pred, measured, small_cfg)
    assert total_loss(pred, gt, measured, small_cfg) == pytest.approx(expected, rel=1e-15)


def test_psnr_cases():
    a = np.zeros((16, 16))
    assert psnr(a, a, 1.0) == 100.0
    assert psnr(a, a + 1.0, 1.0) == pytest.approx(0.0, abs=1e-12)
    assert psnr(a, a + 0.01, 1.0) == pytest.approx(10 * math.log10(1 / 1e-4), abs=1e-9)
    with pytest.raises(ValueError):
        psnr(a, np.zeros((8, 8)), 1.0)


@pytest.mark.parametrize("data_range", [1.0, 0.1, math.pi])
def test_ssim_matches_skimage(rng, data_range):
    a = rng.uniform(0, data_range, (48, 40))
    b = ndimage.gaussian_filter(a, 1.0) + rng.normal(0, 0.05 * data_range, a.shape)
    ref = structural_similarity(
        a, b, data_range=data_range, gaussian_weights=True, sigma=1.5, use_sample_covariance=False
    )
    assert ssim(a, b, data_range) == pytest.approx(ref, abs=1e-10)


def test_ssim_identity_symmetry_and_noise(rng):
    a = rng.uniform(0, 1, (32, 32))
    b = rng.uniform(0, 1, (32, 32))
    assert ssim(a, a, 1.0) == pytest.approx(1.0, abs=1e-12)
    assert abs(ssim(a, b, 1.0) - ssim(b, a, 1.0)) <= 1e-12
    assert ssim(a, np.full_like(a, 0.5), 1.0) < 0.1
    with pytest.raises(ValueError):
        ssim(np.ones((10, 10)), np.ones((10, 10)), 1.0)


def test_freq_ssim(rng):
    g = 1 + 0.3 * random_field(rng, (32, 32))
    assert freq_ssim(g, g) == pytest.approx(1.0, abs=1e-12)
    assert freq_ssim(np.roll(g, (5, -3), (0, 1)), g) == pytest.approx(1.0, abs=1e-10)
    spec = np.fft.fft2(g)
    fy, fx = np.meshgrid(np.fft.fftfreq(32), np.fft.fftfreq(32), indexing="ij")
    lowpass = np.fft.ifft2(spec * (np.hypot(fx, fy) < 0.2))
    assert freq_ssim(lowpass, g) < 1.0


def test_bs_ratio():
    mask = np.zeros((16, 16), bool)
    mask[4:8, 4:8] = True
    gt = np.where(mask, 0.95 * np.exp(0.3j), 1.0)
    assert bs_ratio(gt, mask) == 0.0
    flat = np.where(mask, 0.5, 1.0)
    assert bs_ratio(flat, mask) == 0.0
    noisy = np.where(mask, 1.0, 1.1)
    assert bs_ratio(noisy, mask) == pytest.approx(0.1)
    with pytest.raises(ValueError):
        bs_ratio(gt, np.zeros((16, 16), bool))
    with pytest.raises(ValueError):
        bs_ratio(gt, np.ones((16, 16), bool))


def test_dirty_noisy_sample_has_worse_bs_than_truth(default_cfg):
    for i in range(3):
        rec = simulate_sample(substream(21, i), default_cfg, NoiseConfig("speckle+shot+read"))
        dirty = dirty_reconstruct(np.asarray(rec.hologram_norm, float), default_cfg)
        assert bs_ratio(dirty, rec.support_mask) > bs_ratio(rec.object_gt, rec.support_mask)


def test_evaluate_fields_identity(small_cfg):
    rec = simulate_sample(substream(2, 0), small_cfg, NoiseConfig("clean"))
    m = evaluate_fields(rec.object_gt, rec.object_gt, rec.support_mask)
    assert m.mse_amp == m.mse_phase == m.mse_complex == 0.0
    assert m.psnr_amp == m.psnr_phase == 100.0
    assert m.ssim_amp == pytest.approx(1.0) and m.ssim_phase == pytest.approx(1.0)
    assert m.freq_ssim == pytest.approx(1.0)
    assert m.bs_ratio == 0.0


def test_evaluate_method_aggregates(small_cfg):
    recs = [simulate_sample(substream(4, i), small_cfg, NoiseConfig("clean"), index=i) for i in range(4)]
    res = evaluate_method(dirty_reconstruct, recs)
    assert res.indices == [0, 1, 2, 3]
    for k in METRIC_NAMES:
        vals = [getattr(m, k) for m in res.per_sample]
        assert res.mean[k] == pytest.approx(sum(vals) / len(vals), abs=1e-12)
    one = evaluate_method(dirty_reconstruct, recs[:1])
    assert all(v == 0 for v in one.std.values())
    with pytest.raises(ValueError, match="empty dataset"):
        evaluate_method(dirty_reconstruct, [])


def test_evaluate_method_parallel_matches_serial(small_cfg):
    from holotwin.reconstruction import Method

    recs = [simulate_sample(substream(4, i), small_cfg, NoiseConfig("clean"), index=i) for i in range(3)]
    serial = evaluate_method(Method("dirty"), recs)
    parallel = evaluate_method(Method("dirty"), recs, workers=2)
    assert serial.per_sample == parallel.per_sample


def test_wrapped_phase_interval():
    from holotwin.metrics import wrapped_phase_difference

    g = np.ones((2, 2), complex)
    p = np.exp(1j * np.array([0.0, np.pi, -np.pi + 1e-9, 3.0])).reshape(2, 2)
    d = wrapped_phase_difference(p, g).ravel()
    assert d[0] == 0.0 and d[1] == pytest.approx(np.pi)
    assert np.all(d > -np.pi) and np.all(d <= np.pi)
    assert d[3] == pytest.approx(3.0)
