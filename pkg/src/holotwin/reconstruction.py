"""Classical inverse solvers and the weak-object twin-image decomposition."""

from __future__ import annotations

import math
import time
from dataclasses import dataclass
from typing import Callable, Sequence

import numpy as np
from scipy import fft as sfft

from .core import OpticalConfig, as_complex, as_real, check_dims
from .metrics import Metrics, evaluate_fields
from .propagation import back_propagate, physics_loss_gradient, propagate, transfer_function

WEAK_OBJECT_LIMIT = 0.5
GS_PRESETS = (50, 100)


class RegimeError(ValueError):
    """Object perturbation too strong for the weak-object expansion."""


class DivergenceError(RuntimeError):
    def __init__(self, step: int):
        super().__init__(f"loss became non-finite at step {step}")
        self.step = step


class MethodError(ValueError):
    pass


def _sensor_amplitude(hologram, config: OpticalConfig) -> np.ndarray:
    h = as_real(hologram)
    check_dims(h, config, "hologram")
    if np.any(h < 0):
        raise ValueError("hologram intensities must be nonnegative")
    return np.sqrt(h)


def dirty_reconstruct(hologram, config: OpticalConfig, z: float | None = None) -> np.ndarray:
    """Back-propagate ``sqrt(H)`` with a flat sensor phase."""
    return back_propagate(_sensor_amplitude(hologram, config), config, z)


def project_amplitude(field) -> np.ndarray:
    """Clamp ``|field|`` to [0, 1], keeping the phase."""
    u = as_complex(field)
    a = np.abs(u)
    return u / np.maximum(a, 1.0)


@dataclass(frozen=True, eq=False)
class TwinDecomposition:
    """Weak-object split of the back-propagated field.

    All terms are expressed relative to the sensor-plane reference wave:
    the physical reconstruction equals ``carrier * u_rec`` with
    ``carrier = exp(-i k z)``, the value a unit hologram back-propagates to.
    ``u_rec == dc + true_term + twin_term + residual``.
    """

    u_rec: np.ndarray
    carrier: complex
    dc: complex
    true_term: np.ndarray
    twin_term: np.ndarray
    residual: np.ndarray

    @property
    def residual_norm(self) -> float:
        return float(np.linalg.norm(self.residual))


def twin_decompose(obj, config: OpticalConfig, z: float | None = None) -> TwinDecomposition:
    """Compare the full nonlinear reconstruction with ``1 + o/2 + P_{-2z}{o*}/2``."""
    o_field = as_complex(obj)
    check_dims(o_field, config)
    z = config.distance_z if z is None else float(z)
    o = o_field - 1.0
    if np.max(np.abs(o)) >= WEAK_OBJECT_LIMIT:
        raise RegimeError(f"max|O - 1| must be below {WEAK_OBJECT_LIMIT} for the weak-object expansion")

    carrier = complex(transfer_function(config, -z).values[0, 0])
    hologram = np.abs(propagate(o_field, config, z)) ** 2
    u_rec = dirty_reconstruct(hologram, config, z) / carrier
    dc = complex(np.mean(dirty_reconstruct(np.ones(config.shape), config, z)) / carrier)
    true_term = 0.5 * o
    twin_term = 0.5 * propagate(np.conj(o), config, -2.0 * z) / carrier**2
    residual = u_rec - dc - true_term - twin_term
    return TwinDecomposition(u_rec, carrier, dc, true_term, twin_term, residual)


@dataclass(frozen=True, eq=False)
class SolverReport:
    iterations: int
    objective_trace: np.ndarray
    final_field: np.ndarray
    wall_time: float


def _rms_mismatch(mag: np.ndarray, amp: np.ndarray) -> float:
    return math.sqrt(float(np.mean((mag - amp) ** 2)))


def gerchberg_saxton(hologram, config: OpticalConfig, iterations: int = 50, z: float | None = None) -> SolverReport:
    """Error-reduction phase retrieval between object and sensor planes.

    Sensor plane: impose ``sqrt(H)`` as the magnitude. Object plane: clamp the
    amplitude to [0, 1]. The start point is the dirty reconstruction after
    the object-plane projection. The trace holds the RMS sensor mismatch
    ``sqrt(mean((|P_z x| - sqrt(H))**2))`` before the first and after every
    iteration; it is the Euclidean distance to the magnitude constraint, so
    it cannot increase while ``P_z`` is unitary (no evanescent bins).
    """
    if iterations < 1:
        raise ValueError("iterations must be >= 1")
    t0 = time.perf_counter()
    amp = _sensor_amplitude(hologram, config)
    fwd = transfer_function(config, z).values
    bwd = np.conj(fwd)

    x = project_amplitude(sfft.ifft2(sfft.fft2(amp) * bwd, overwrite_x=True))
    u = sfft.ifft2(sfft.fft2(x) * fwd, overwrite_x=True)
    mag = np.abs(u)
    trace = [_rms_mismatch(mag, amp)]
    for _ in range(iterations):
        zero = mag == 0
        sensor = np.where(zero, amp, amp * u / np.where(zero, 1.0, mag))
        x = project_amplitude(sfft.ifft2(sfft.fft2(sensor) * bwd, overwrite_x=True))
        u = sfft.ifft2(sfft.fft2(x) * fwd, overwrite_x=True)
        mag = np.abs(u)
        trace.append(_rms_mismatch(mag, amp))
    return SolverReport(iterations, np.asarray(trace), x, time.perf_counter() - t0)


def default_step_size(config: OpticalConfig) -> float:
    # the loss is a pixel mean, so its gradient shrinks like 1/(H*W)
    return 0.05 * config.height * config.width


def gradient_refine(
    hologram,
    config: OpticalConfig,
    init=None,
    steps: int = 200,
    step_size: float | None = None,
    *,
    line_search: bool = True,
    max_halvings: int = 40,
    z: float | None = None,
) -> SolverReport:
    """Gradient descent on the physics loss, returning the best field seen.

    ``init`` defaults to the amplitude-projected dirty reconstruction. With
    ``line_search`` a trial step is halved until the loss does not increase;
    the reduced step carries over. If no step within ``max_halvings`` helps,
    the iteration stops early.
    """
    if steps < 1:
        raise ValueError("steps must be >= 1")
    if step_size is None:
        step_size = default_step_size(config)
    if step_size <= 0:
        raise ValueError("step_size must be positive")
    t0 = time.perf_counter()
    h = as_real(hologram)
    x = project_amplitude(dirty_reconstruct(h, config, z)) if init is None else as_complex(init).copy()
    check_dims(x, config)

    loss, grad = physics_loss_gradient(x, h, config, z)
    if not math.isfinite(loss):
        raise DivergenceError(0)
    trace = [loss]
    best_loss, best = loss, x
    eta = step_size
    done = 0
    for step in range(1, steps + 1):
        trial = x - eta * grad
        t_loss, t_grad = physics_loss_gradient(trial, h, config, z)
        if line_search:
            halvings = 0
            while not t_loss <= loss and halvings < max_halvings:
                eta *= 0.5
                halvings += 1
                trial = x - eta * grad
                t_loss, t_grad = physics_loss_gradient(trial, h, config, z)
            if not t_loss <= loss:
                break
        if not math.isfinite(t_loss):
            raise DivergenceError(step)
        x, loss, grad = trial, t_loss, t_grad
        trace.append(loss)
        done = step
        if loss < best_loss:
            best_loss, best = loss, x
    return SolverReport(done, np.asarray(trace), best, time.perf_counter() - t0)


@dataclass(frozen=True)
class Method:
    """Named reconstruction method, callable as ``method(hologram, config)``.

    ``kind`` is ``dirty``, ``gs`` (param = iterations) or ``grad``
    (param = gradient steps).
    """

    kind: str
    param: int = 0

    @property
    def name(self) -> str:
        return self.kind if self.kind == "dirty" else f"{self.kind}:{self.param}"

    def __call__(self, hologram, config: OpticalConfig) -> np.ndarray:
        if self.kind == "dirty":
            return dirty_reconstruct(hologram, config)
        if self.kind == "gs":
            return gerchberg_saxton(hologram, config, self.param).final_field
        if self.kind == "grad":
            return gradient_refine(hologram, config, steps=self.param).final_field
        raise MethodError(f"unknown method kind {self.kind!r}")


def parse_method(text: str) -> Method:
    """Parse ``dirty``, ``gs:ITERS`` or ``grad:STEPS``."""
    text = text.strip()
    if text == "dirty":
        return Method("dirty")
    kind, sep, arg = text.partition(":")
    if kind in ("gs", "grad") and sep:
        try:
            n = int(arg)
        except ValueError:
            raise MethodError(f"bad iteration count in {text!r}") from None
        if n < 1:
            raise MethodError(f"iteration count must be >= 1 in {text!r}")
        return Method(kind, n)
    raise MethodError(f"unknown method {text!r}; expected dirty, gs:ITERS or grad:STEPS")


def z_sweep(
    method: Callable,
    hologram,
    config: OpticalConfig,
    offsets: Sequence[float],
    ground_truth,
    mask,
) -> list[tuple[float, Metrics]]:
    """Reconstruct at ``z + offset`` for each offset and score against the ground truth."""
    out = []
    for off in offsets:
        off = float(off)
        if not math.isfinite(off):
            raise ValueError("offsets must be finite")
        pred = method(hologram, config.with_distance(config.distance_z + off))
        out.append((off, evaluate_fields(pred, ground_truth, mask)))
    return out
