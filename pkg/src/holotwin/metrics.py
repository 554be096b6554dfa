"""Composite reconstruction loss and image-quality metrics."""

from __future__ import annotations

import csv
import math
import os
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, fields
from typing import Callable, NamedTuple, Sequence

import numpy as np
from scipy import fft as sfft
from scipy import ndimage

from .core import OpticalConfig, as_complex, as_real
from .propagation import physics_loss

PSNR_CAP = 100.0
SSIM_WIN = 11
SSIM_SIGMA = 1.5
SSIM_K1 = 0.01
SSIM_K2 = 0.03


@dataclass(frozen=True)
class LossWeights:
    w_amp: float = 0.4
    w_phase: float = 0.2
    w_complex: float = 0.2
    w_freq: float = 0.2
    lambda_phy: float = 0.1

    def __post_init__(self):
        for f in fields(self):
            if not getattr(self, f.name) >= 0:
                raise ValueError(f"{f.name} must be nonnegative")

    def combine(self, amp: float, phase: float, complex_: float, freq: float) -> float:
        # fsum keeps e.g. 0.4 + 0.2 + 0.2 + 0.2 == 1.0 exact
        return math.fsum(
            (self.w_amp * amp, self.w_phase * phase, self.w_complex * complex_, self.w_freq * freq)
        )


class LossBreakdown(NamedTuple):
    total: float
    amp: float
    phase: float
    complex: float
    freq: float


def _same_shape(a: np.ndarray, b: np.ndarray):
    if a.shape != b.shape:
        raise ValueError(f"shape mismatch: {a.shape} vs {b.shape}")


def wrapped_phase_difference(pred, gt) -> np.ndarray:
    """``arg(pred) - arg(gt)`` wrapped into (-pi, pi]."""
    d = np.angle(as_complex(pred)) - np.angle(as_complex(gt))
    return math.pi - np.remainder(math.pi - d, 2 * math.pi)


def log_spectrum(field, centered: bool = False) -> np.ndarray:
    spec = sfft.fft2(as_complex(field))
    if centered:
        spec = sfft.fftshift(spec)
    return np.log1p(np.abs(spec))


def supervised_loss(pred, gt, weights: LossWeights = LossWeights()) -> LossBreakdown:
    p, g = as_complex(pred), as_complex(gt)
    _same_shape(p, g)
    amp = float(np.mean(np.abs(np.abs(p) - np.abs(g))))
    phase = float(np.mean(np.abs(wrapped_phase_difference(p, g))))
    cplx = float(np.mean(np.abs(p - g)))
    freq = float(np.mean(np.abs(log_spectrum(p) - log_spectrum(g))))
    return LossBreakdown(weights.combine(amp, phase, cplx, freq), amp, phase, cplx, freq)


def total_loss(pred, gt, measured, config: OpticalConfig, weights: LossWeights = LossWeights()) -> float:
    sup = supervised_loss(pred, gt, weights)
    if weights.lambda_phy == 0:
        return sup.total
    return sup.total + weights.lambda_phy * physics_loss(pred, measured, config)


def psnr(a, b, data_range: float) -> float:
    """Peak SNR in dB, capped at 100 dB (identical inputs hit the cap)."""
    a, b = as_real(a), as_real(b)
    _same_shape(a, b)
    if data_range <= 0:
        raise ValueError("data_range must be positive")
    mse = float(np.mean((a - b) ** 2))
    if mse == 0:
        return PSNR_CAP
    return min(PSNR_CAP, 10.0 * math.log10(data_range**2 / mse))


def _gauss(x: np.ndarray) -> np.ndarray:
    truncate = ((SSIM_WIN - 1) // 2) / SSIM_SIGMA
    return ndimage.gaussian_filter(x, SSIM_SIGMA, truncate=truncate, mode="reflect")


def ssim_map(a, b, data_range: float) -> np.ndarray:
    a, b = as_real(a), as_real(b)
    _same_shape(a, b)
    if min(a.shape) < SSIM_WIN:
        raise ValueError(f"images must be at least {SSIM_WIN}x{SSIM_WIN} for SSIM")
    if data_range <= 0:
        raise ValueError("data_range must be positive")
    c1 = (SSIM_K1 * data_range) ** 2
    c2 = (SSIM_K2 * data_range) ** 2
    mu_a, mu_b = _gauss(a), _gauss(b)
    var_a = _gauss(a * a) - mu_a * mu_a
    var_b = _gauss(b * b) - mu_b * mu_b
    cov = _gauss(a * b) - mu_a * mu_b
    num = (2 * mu_a * mu_b + c1) * (2 * cov + c2)
    den = (mu_a * mu_a + mu_b * mu_b + c1) * (var_a + var_b + c2)
    return num / den


def ssim(a, b, data_range: float) -> float:
    """Mean SSIM with an 11x11 Gaussian window (sigma 1.5), border of 5 px excluded."""
    pad = (SSIM_WIN - 1) // 2
    return float(ssim_map(a, b, data_range)[pad:-pad, pad:-pad].mean())


def freq_ssim(pred, gt) -> float:
    """SSIM between centred log-magnitude spectra."""
    ls_p = log_spectrum(pred, centered=True)
    ls_g = log_spectrum(gt, centered=True)
    span = float(ls_g.max() - ls_g.min())
    return ssim(ls_p, ls_g, span if span > 0 else 1.0)


def bs_ratio(pred, gt_mask, background_level: float = 1.0) -> float:
    """Background-to-signal ratio; lower means a cleaner background.

    Mean background deviation of ``|pred|`` from the ground-truth background
    amplitude, divided by the mean of ``|pred|`` over the object support.
    """
    a = np.abs(as_complex(pred))
    mask = np.asarray(gt_mask, dtype=bool)
    _same_shape(a, mask)
    if mask.all() or not mask.any():
        raise ValueError("mask needs at least one signal and one background pixel")
    signal = float(np.mean(a[mask]))
    deviation = float(np.mean(np.abs(a[~mask] - background_level)))
    if signal == 0:
        return math.inf if deviation > 0 else 0.0
    return deviation / signal


@dataclass(frozen=True)
class Metrics:
    mse_amp: float
    mse_phase: float
    mse_complex: float
    psnr_amp: float
    psnr_phase: float
    ssim_amp: float
    ssim_phase: float
    freq_ssim: float
    bs_ratio: float

    def as_dict(self) -> dict:
        return asdict(self)


METRIC_NAMES = tuple(f.name for f in fields(Metrics))


def reference_range(ref: np.ndarray, nominal: float) -> float:
    span = float(ref.max() - ref.min())
    return span if span > 0 else nominal


def evaluate_fields(pred, gt, mask) -> Metrics:
    """Full metric suite.

    PSNR uses a data range of 1 for amplitude and pi for phase. SSIM uses
    the dynamic range of the ground-truth image, falling back to 1 / pi for
    a constant one.
    """
    p, g = as_complex(pred), as_complex(gt)
    _same_shape(p, g)
    amp_p, amp_g = np.abs(p), np.abs(g)
    ph_g = np.angle(g)
    # aligned so that pred - gt is the wrapped difference
    ph_p = ph_g + wrapped_phase_difference(p, g)
    return Metrics(
        mse_amp=float(np.mean((amp_p - amp_g) ** 2)),
        mse_phase=float(np.mean((ph_p - ph_g) ** 2)),
        mse_complex=float(np.mean(np.abs(p - g) ** 2)),
        psnr_amp=psnr(amp_p, amp_g, 1.0),
        psnr_phase=psnr(ph_p, ph_g, math.pi),
        ssim_amp=ssim(amp_p, amp_g, reference_range(amp_g, 1.0)),
        ssim_phase=ssim(ph_p, ph_g, reference_range(ph_g, math.pi)),
        freq_ssim=freq_ssim(p, g),
        bs_ratio=bs_ratio(p, mask),
    )


def default_workers() -> int:
    """Worker count from ``HOLOTWIN_WORKERS``; defaults to the logical core count."""
    env = os.environ.get("HOLOTWIN_WORKERS")
    if env:
        return max(1, int(env))
    return os.cpu_count() or 1


@dataclass
class EvaluationResult:
    name: str
    per_sample: list[Metrics]
    indices: list[int]
    times_ms: list[float]
    mean: dict
    std: dict

    @property
    def mean_time_ms(self) -> float:
        return float(np.mean(self.times_ms))


def _evaluate_one(args):
    method, record, config = args
    cfg = config or record.config
    t0 = time.perf_counter()
    pred = method(np.asarray(record.hologram_norm, dtype=np.float64), cfg)
    elapsed = (time.perf_counter() - t0) * 1e3
    return evaluate_fields(pred, record.object_gt, record.support_mask), elapsed


def aggregate(per_sample: Sequence[Metrics]) -> tuple[dict, dict]:
    table = np.array([[getattr(m, k) for k in METRIC_NAMES] for m in per_sample], dtype=np.float64)
    mean = dict(zip(METRIC_NAMES, (float(v) for v in table.mean(axis=0))))
    std = dict(zip(METRIC_NAMES, (float(v) for v in table.std(axis=0))))
    return mean, std


def evaluate_method(
    method: Callable,
    records: Sequence,
    config: OpticalConfig | None = None,
    *,
    name: str | None = None,
    workers: int = 1,
) -> EvaluationResult:
    """Run ``method(hologram_norm, config)`` on every record and score it.

    Results are ordered by input position whatever the worker count.
    Standard deviations are population (ddof=0).
    """
    records = list(records)
    if not records:
        raise ValueError("empty dataset")
    jobs = [(method, r, config) for r in records]
    if workers > 1:
        with ProcessPoolExecutor(max_workers=workers) as ex:
            results = list(ex.map(_evaluate_one, jobs))
    else:
        results = [_evaluate_one(j) for j in jobs]
    per_sample = [m for m, _ in results]
    mean, std = aggregate(per_sample)
    return EvaluationResult(
        name=name or getattr(method, "name", getattr(method, "__name__", "method")),
        per_sample=per_sample,
        indices=[r.index for r in records],
        times_ms=[t for _, t in results],
        mean=mean,
        std=std,
    )


AGGREGATE_COLUMNS = (
    ("method", "n")
    + tuple(f"{k}_{s}" for k in METRIC_NAMES for s in ("mean", "std"))
    + ("time_ms_mean",)
)
PER_SAMPLE_COLUMNS = ("method", "index") + METRIC_NAMES + ("time_ms",)


def write_aggregate_csv(path, results: Sequence[EvaluationResult]):
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(AGGREGATE_COLUMNS)
        for r in results:
            row = [r.name, len(r.per_sample)]
            for k in METRIC_NAMES:
                row += [repr(r.mean[k]), repr(r.std[k])]
            row.append(repr(r.mean_time_ms))
            w.writerow(row)


def write_per_sample_csv(path, results: Sequence[EvaluationResult]):
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(PER_SAMPLE_COLUMNS)
        for r in results:
            for idx, m, t in zip(r.indices, r.per_sample, r.times_ms):
                w.writerow([r.name, idx] + [repr(getattr(m, k)) for k in METRIC_NAMES] + [repr(t)])
