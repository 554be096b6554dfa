"""Shared types: optical geometry, field containers, seeded random streams.

Conventions used throughout the package:

* arrays are ``(rows, cols) = (y, x)``, row-major;
* ``fft2`` has a negative exponent and no scaling, ``ifft2`` carries the
  ``1/(H*W)`` factor, so ``ifft2(fft2(u)) == u``;
* spatial frequencies follow ``numpy.fft.fftfreq`` ordering.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import NamedTuple

import numpy as np

MIN_GRID = 8

#: Bit generator behind every random stream. PCG64 output is fixed by its
#: published reference and is identical on every platform numpy supports.
RNG_ALGORITHM = "PCG64"


class ConfigError(ValueError):
    """Invalid optical or generation parameter. ``field`` names the culprit."""

    def __init__(self, field: str, message: str):
        super().__init__(message)
        self.field = field


@dataclass(frozen=True)
class OpticalConfig:
    """Inline holography geometry.

    Defaults are a 532 nm source, 4.65 um pixels, 20 mm object-sensor
    distance and a 224 x 224 sensor. ``distance_z`` may be negative
    (back-propagation) or zero (identity).
    """

    wavelength: float = 532e-9
    pixel_pitch: float = 4.65e-6
    distance_z: float = 20e-3
    height: int = 224
    width: int = 224

    def __post_init__(self):
        for name in ("wavelength", "pixel_pitch"):
            value = getattr(self, name)
            if not math.isfinite(value):
                raise ConfigError(name, f"{name} must be finite")
            if value <= 0:
                raise ConfigError(name, f"{name} must be positive")
        if not math.isfinite(self.distance_z):
            raise ConfigError("distance_z", "distance_z must be finite")
        for name in ("height", "width"):
            value = getattr(self, name)
            if isinstance(value, bool) or int(value) != value:
                raise ConfigError(name, f"{name} must be an integer")
            if value < MIN_GRID:
                raise ConfigError(name, f"{name} must be at least {MIN_GRID}")
            object.__setattr__(self, name, int(value))

    @property
    def wavenumber(self) -> float:
        return 2.0 * math.pi / self.wavelength

    @property
    def shape(self) -> tuple[int, int]:
        return (self.height, self.width)

    def with_distance(self, distance_z: float) -> "OpticalConfig":
        return OpticalConfig(self.wavelength, self.pixel_pitch, distance_z, self.height, self.width)

    def spectral_grid(self) -> "SpectralGrid":
        return SpectralGrid(
            fx=np.fft.fftfreq(self.width, d=self.pixel_pitch),
            fy=np.fft.fftfreq(self.height, d=self.pixel_pitch),
        )

    def to_dict(self) -> dict:
        return {
            "wavelength": self.wavelength,
            "pixel_pitch": self.pixel_pitch,
            "distance_z": self.distance_z,
            "height": self.height,
            "width": self.width,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "OpticalConfig":
        return cls(**{k: d[k] for k in ("wavelength", "pixel_pitch", "distance_z", "height", "width") if k in d})


def make_config(wavelength, pixel_pitch, distance_z, height, width) -> OpticalConfig:
    return OpticalConfig(float(wavelength), float(pixel_pitch), float(distance_z), height, width)


class SpectralGrid(NamedTuple):
    """Per-column ``fx`` and per-row ``fy`` in cycles per meter."""

    fx: np.ndarray
    fy: np.ndarray

    def mesh(self) -> tuple[np.ndarray, np.ndarray]:
        """Broadcastable ``(FX, FY)`` of shape ``(1, W)`` and ``(H, 1)``."""
        return self.fx[None, :], self.fy[:, None]


def _check_shape(height: int, width: int, values) -> np.ndarray:
    arr = np.asarray(values)
    if arr.ndim == 1:
        if arr.size != height * width:
            raise ValueError(f"data length {arr.size} does not match {height}x{width}")
        arr = arr.reshape(height, width)
    if arr.shape != (height, width):
        raise ValueError(f"data shape {arr.shape} does not match {height}x{width}")
    return arr


@dataclass(frozen=True, eq=False)
class ComplexField:
    """Immutable ``H x W`` complex amplitude. Usable anywhere an array is."""

    data: np.ndarray

    def __post_init__(self):
        arr = np.array(self.data, dtype=np.result_type(self.data, np.complex64), copy=True)
        if arr.ndim != 2:
            raise ValueError(f"field must be 2-D, got shape {arr.shape}")
        if not np.all(np.isfinite(arr)):
            raise ValueError("field contains non-finite values")
        arr.setflags(write=False)
        object.__setattr__(self, "data", arr)

    @classmethod
    def from_values(cls, height: int, width: int, values) -> "ComplexField":
        return cls(_check_shape(height, width, values))

    @property
    def height(self) -> int:
        return self.data.shape[0]

    @property
    def width(self) -> int:
        return self.data.shape[1]

    def __array__(self, dtype=None, copy=None):
        return self.data if dtype is None else self.data.astype(dtype)


@dataclass(frozen=True, eq=False)
class Hologram:
    """Immutable ``H x W`` nonnegative intensity."""

    data: np.ndarray

    def __post_init__(self):
        arr = np.array(self.data, dtype=np.result_type(self.data, np.float32), copy=True)
        if arr.ndim != 2:
            raise ValueError(f"hologram must be 2-D, got shape {arr.shape}")
        if np.iscomplexobj(arr):
            raise ValueError("hologram must be real")
        if not np.all(np.isfinite(arr)):
            raise ValueError("hologram contains non-finite values")
        if np.any(arr < 0):
            raise ValueError("hologram intensities must be nonnegative")
        arr.setflags(write=False)
        object.__setattr__(self, "data", arr)

    @classmethod
    def from_values(cls, height: int, width: int, values) -> "Hologram":
        return cls(_check_shape(height, width, values))

    @property
    def height(self) -> int:
        return self.data.shape[0]

    @property
    def width(self) -> int:
        return self.data.shape[1]

    def __array__(self, dtype=None, copy=None):
        return self.data if dtype is None else self.data.astype(dtype)


class FieldStats(NamedTuple):
    min_abs: float
    max_abs: float
    energy: float


def field_stats(field) -> FieldStats:
    a = np.abs(np.asarray(field))
    return FieldStats(float(a.min()), float(a.max()), float(np.sum(a.astype(np.float64) ** 2)))


def derive_seed(base_seed: int, index: int, domain: int = 0) -> int:
    """64-bit seed for substream ``index`` of ``base_seed``.

    ``domain`` separates seed spaces (e.g. train pool vs external test set).
    """
    ss = np.random.SeedSequence(entropy=int(base_seed), spawn_key=(int(domain), int(index)))
    return int(ss.generate_state(1, dtype=np.uint64)[0])


def make_rng(seed: int) -> np.random.Generator:
    return np.random.Generator(np.random.PCG64(int(seed)))


def substream(base_seed: int, index: int, domain: int = 0) -> np.random.Generator:
    return make_rng(derive_seed(base_seed, index, domain))


def as_complex(field) -> np.ndarray:
    arr = np.asarray(field)
    if arr.ndim != 2:
        raise ValueError(f"expected a 2-D field, got shape {arr.shape}")
    return arr.astype(np.complex128, copy=False)


def as_real(image) -> np.ndarray:
    arr = np.asarray(image)
    if arr.ndim != 2:
        raise ValueError(f"expected a 2-D image, got shape {arr.shape}")
    if np.iscomplexobj(arr):
        raise ValueError("expected a real image")
    return arr.astype(np.float64, copy=False)


def check_dims(arr: np.ndarray, config: OpticalConfig, what: str = "field"):
    if arr.shape != config.shape:
        raise ValueError(f"{what} shape {arr.shape} does not match config {config.shape}")
