"""Angular spectrum propagation, the intensity forward model and its gradient."""

from __future__ import annotations

from dataclasses import dataclass
from functools import lru_cache

import numpy as np
from scipy import fft as sfft

from .core import OpticalConfig, as_complex, as_real, check_dims


@dataclass(frozen=True, eq=False)
class TransferFunction:
    config: OpticalConfig
    z: float
    values: np.ndarray

    @property
    def propagating(self) -> np.ndarray:
        return band_mask(self.config)


def _radicand(config: OpticalConfig) -> np.ndarray:
    fx, fy = config.spectral_grid().mesh()
    lam = config.wavelength
    return 1.0 - (lam * fx) ** 2 - (lam * fy) ** 2


def band_mask(config: OpticalConfig) -> np.ndarray:
    """True on propagating bins, where ``1 - (lam fx)^2 - (lam fy)^2 >= 0``."""
    return _radicand(config) >= 0


@lru_cache(maxsize=64)
def _transfer_values(config: OpticalConfig, z: float) -> np.ndarray:
    rad = _radicand(config)
    on = rad >= 0
    kz = config.wavenumber * np.sqrt(np.where(on, rad, 0.0))
    values = np.where(on, np.exp(1j * z * kz), 0.0).astype(np.complex128)
    values.setflags(write=False)
    return values


def transfer_function(config: OpticalConfig, z: float | None = None) -> TransferFunction:
    """Free-space transfer function ``exp(i k z sqrt(1 - (lam fx)^2 - (lam fy)^2))``.

    Evanescent bins are set to zero so that ``z`` and ``-z`` are exact
    inverses on the propagating band.
    """
    z = config.distance_z if z is None else float(z)
    return TransferFunction(config, z, _transfer_values(config, z))


def _apply(field, config: OpticalConfig, values: np.ndarray) -> np.ndarray:
    u = as_complex(field)
    check_dims(u, config)
    return sfft.ifft2(sfft.fft2(u) * values, overwrite_x=True)


def propagate(field, config: OpticalConfig, z: float | None = None) -> np.ndarray:
    """Propagate ``field`` by ``z`` (defaults to ``config.distance_z``)."""
    return _apply(field, config, transfer_function(config, z).values)


def back_propagate(field, config: OpticalConfig, z: float | None = None) -> np.ndarray:
    z = config.distance_z if z is None else float(z)
    return propagate(field, config, -z)


def propagate_adjoint(field, config: OpticalConfig, z: float | None = None) -> np.ndarray:
    """Hilbert adjoint of ``propagate(., z)``: same map with the conjugated transfer function."""
    return _apply(field, config, np.conj(transfer_function(config, z).values))


def forward_intensity(obj, config: OpticalConfig, z: float | None = None) -> np.ndarray:
    """Sensor-plane intensity ``|P_z obj|^2`` for unit-amplitude illumination."""
    return np.abs(propagate(obj, config, z)) ** 2


def physics_loss(obj, measured, config: OpticalConfig, z: float | None = None) -> float:
    """Mean absolute mismatch between ``|P_z obj|^2`` and the measured hologram."""
    h = as_real(measured)
    check_dims(h, config, "hologram")
    return float(np.mean(np.abs(forward_intensity(obj, config, z) - h)))


def physics_loss_gradient(obj, measured, config: OpticalConfig, z: float | None = None):
    """Physics loss and its gradient with respect to ``(Re obj, Im obj)``.

    The gradient is returned as one complex array ``g = dL/dRe + i dL/dIm``,
    so the first-order change of the loss along ``d`` is
    ``Re(sum(conj(g) * d))``. The chain is: sign of the intensity residual,
    times twice the sensor field, pulled back through the adjoint
    propagator, divided by the pixel count. The L1 subgradient at a zero
    residual is taken as 0.
    """
    h = as_real(measured)
    check_dims(h, config, "hologram")
    u = propagate(obj, config, z)
    residual = np.abs(u) ** 2 - h
    n = residual.size
    loss = float(np.mean(np.abs(residual)))
    grad = propagate_adjoint(2.0 * np.sign(residual) * u / n, config, z)
    return loss, grad
