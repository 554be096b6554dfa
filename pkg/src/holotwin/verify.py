"""Self-checks run by ``holotwin verify``.

Each check returns a :class:`CheckResult`; the CLI exits nonzero if any fails.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable

import numpy as np

from .core import OpticalConfig, field_stats, make_rng
from .propagation import (
    back_propagate,
    band_mask,
    physics_loss,
    physics_loss_gradient,
    propagate,
    propagate_adjoint,
)
from .reconstruction import twin_decompose
from .simulation import (
    EllipseSpec,
    ObjectSpec,
    apply_dark,
    apply_read,
    apply_shot,
    render_object,
    speckle_phase,
)


@dataclass(frozen=True)
class CheckResult:
    name: str
    passed: bool
    detail: str


def _random_field(rng, shape):
    return rng.standard_normal(shape) + 1j * rng.standard_normal(shape)


def check_unitarity(rng, trials: int = 100) -> CheckResult:
    cfg = OpticalConfig()
    evanescent = int((~band_mask(cfg)).sum())
    worst = 0.0
    for _ in range(trials):
        u = _random_field(rng, cfg.shape)
        e0 = field_stats(u).energy
        e1 = field_stats(propagate(u, cfg)).energy
        worst = max(worst, abs(e1 - e0) / e0)
    return CheckResult("unitarity", bool(evanescent == 0 and worst < 1e-10), f"evanescent bins={evanescent}, max rel energy err={worst:.2e}")


def check_inverse(rng, trials: int = 100) -> CheckResult:
    cfg = OpticalConfig()
    worst = 0.0
    for _ in range(trials):
        u = _random_field(rng, cfg.shape)
        worst = max(worst, float(np.max(np.abs(back_propagate(propagate(u, cfg), cfg) - u))))
    return CheckResult("inverse pairing", bool(worst < 1e-10), f"max abs err={worst:.2e}")


def check_adjoint(rng, trials: int = 100) -> CheckResult:
    cfg = OpticalConfig(height=64, width=64)
    worst = 0.0
    for _ in range(trials):
        x, y = _random_field(rng, cfg.shape), _random_field(rng, cfg.shape)
        lhs = np.vdot(y, propagate(x, cfg))
        rhs = np.vdot(propagate_adjoint(y, cfg), x)
        worst = max(worst, abs(lhs - rhs) / abs(lhs))
    return CheckResult("adjoint identity", bool(worst < 1e-10), f"max rel err={worst:.2e}")


def gradient_fd_error(rng, cfg: OpticalConfig, eps: float = 1e-6, max_tries: int = 20) -> float:
    """Relative error of the analytic directional derivative vs central differences.

    Draws are repeated while any intensity residual lies within ``1e-8`` of
    an L1 kink or changes sign between the base and perturbed points.
    """
    for _ in range(max_tries):
        obj = 1.0 + 0.3 * _random_field(rng, cfg.shape)
        measured = np.abs(propagate(obj, cfg)) ** 2 * rng.uniform(0.5, 1.5, cfg.shape)
        d = _random_field(rng, cfg.shape)
        residuals = [np.abs(propagate(p, cfg)) ** 2 - measured for p in (obj, obj + eps * d, obj - eps * d)]
        if min(np.min(np.abs(r)) for r in residuals) < 1e-8:
            continue
        if not (np.array_equal(np.sign(residuals[0]), np.sign(residuals[1])) and np.array_equal(np.sign(residuals[0]), np.sign(residuals[2]))):
            continue
        _, grad = physics_loss_gradient(obj, measured, cfg)
        fd = (physics_loss(obj + eps * d, measured, cfg) - physics_loss(obj - eps * d, measured, cfg)) / (2 * eps)
        analytic = float(np.real(np.vdot(grad, d)))
        return abs(fd - analytic) / abs(analytic)
    raise RuntimeError("could not draw a point away from L1 kinks")


def check_gradient(rng, trials: int = 50) -> CheckResult:
    cfg = OpticalConfig(height=16, width=16)
    errs = np.array([gradient_fd_error(rng, cfg) for _ in range(trials)])
    frac = float(np.mean(errs < 1e-4))
    return CheckResult("gradient vs finite differences", bool(frac >= 0.95), f"pass fraction={frac:.2f}, median rel err={np.median(errs):.1e}")


def weak_disk(cfg: OpticalConfig, strength: float) -> np.ndarray:
    """Unit background with one centred disk of ``|O - 1| == strength`` (pure phase)."""
    e = EllipseSpec(cfg.width / 2, cfg.height / 2, 10.0, 10.0, 0.0, 0.3, 1.0)
    mask = render_object(ObjectSpec((e,), cfg.height, cfg.width)) != 1
    phi = 2 * math.asin(strength / 2)
    return np.where(mask, np.exp(1j * phi), 1.0)


def twin_scaling_exponent(cfg: OpticalConfig, strengths=(0.05, 0.1)) -> float:
    lo, hi = strengths
    r_lo = twin_decompose(weak_disk(cfg, lo), cfg).residual_norm
    r_hi = twin_decompose(weak_disk(cfg, hi), cfg).residual_norm
    return math.log(r_hi / r_lo) / math.log(hi / lo)


def check_twin(rng) -> CheckResult:
    p = twin_scaling_exponent(OpticalConfig())
    return CheckResult("twin-image residual order", bool(1.8 <= p <= 2.2), f"scaling exponent={p:.3f}")


def check_noise(rng) -> CheckResult:
    shape = (224, 224)
    shot = apply_shot(np.ones(shape), rng, 1000.0)
    read = apply_read(np.full(shape, 1000.0), rng, 10.0)
    dark = apply_dark(np.zeros(shape), rng, 20.0)
    theta = speckle_phase(rng, shape, 0.15, 1.0)

    def lag(k):
        return float(np.mean(theta * np.roll(theta, k, axis=1)) / np.var(theta))

    ok = (
        abs(shot.mean() / 1000 - 1) < 0.01
        and abs(shot.var() / shot.mean() - 1) < 0.05
        and abs(read.std() / 10 - 1) < 0.02
        and abs(dark.mean() / 20 - 1) < 0.02
        and abs(dark.var() / 20 - 1) < 0.05
        and abs(theta.std() - 0.15) < 1e-6
        and lag(1) > lag(10)
    )
    detail = (
        f"shot mean={shot.mean():.1f} var/mean={shot.var() / shot.mean():.3f}; read std={read.std():.2f}; "
        f"dark mean={dark.mean():.2f} var={dark.var():.2f}; speckle std={theta.std():.6f}"
    )
    return CheckResult("noise statistics", bool(ok), detail)


CHECKS: tuple[Callable, ...] = (
    check_unitarity,
    check_inverse,
    check_adjoint,
    check_gradient,
    check_twin,
    check_noise,
)


def run_checks(seed: int = 2024) -> list[CheckResult]:
    rng = make_rng(seed)
    return [check(rng) for check in CHECKS]
