"""Synthetic phase objects, hologram formation and sensor noise."""

from __future__ import annotations

import math
from dataclasses import asdict, dataclass, field

import numpy as np
from scipy import ndimage

from .core import ComplexField, Hologram, OpticalConfig, as_complex, as_real
from .propagation import forward_intensity

#: Divisor taking raw sensor counts to the nominal ~1.0 range.
NORMALIZATION = 1000.0

NOISE_TAGS = (
    "clean",
    "speckle",
    "shot",
    "read",
    "dark",
    "speckle+shot",
    "shot+read",
    "speckle+shot+read",
)
_STAGES = ("speckle", "shot", "read", "dark")


@dataclass(frozen=True)
class EllipseSpec:
    center_x: float
    center_y: float
    semi_major: float
    semi_minor: float
    rotation: float
    phase: float
    amplitude: float

    def __post_init__(self):
        for name in ("semi_major", "semi_minor"):
            if not 5.0 <= getattr(self, name) <= 15.0:
                raise ValueError(f"{name} must lie in [5, 15] pixels")
        if not 0.1 <= self.phase <= 0.5:
            raise ValueError("phase must lie in [0.1, 0.5] rad")
        if not 0.9 <= self.amplitude <= 1.0:
            raise ValueError("amplitude must lie in [0.9, 1.0]")

    def covers(self, xx: np.ndarray, yy: np.ndarray) -> np.ndarray:
        dx, dy = xx - self.center_x, yy - self.center_y
        c, s = math.cos(self.rotation), math.sin(self.rotation)
        u = dx * c + dy * s
        v = -dx * s + dy * c
        return (u / self.semi_major) ** 2 + (v / self.semi_minor) ** 2 <= 1.0

    @property
    def transmittance(self) -> complex:
        return self.amplitude * complex(math.cos(self.phase), math.sin(self.phase))


@dataclass(frozen=True)
class ObjectSpec:
    ellipses: tuple[EllipseSpec, ...]
    height: int
    width: int

    def __post_init__(self):
        object.__setattr__(self, "ellipses", tuple(self.ellipses))
        if self.height < 1 or self.width < 1:
            raise ValueError("object grid must be non-empty")
        for e in self.ellipses:
            if not (0 <= e.center_x < self.width and 0 <= e.center_y < self.height):
                raise ValueError("ellipse center outside the field")

    def to_dict(self) -> dict:
        return {"height": self.height, "width": self.width, "ellipses": [asdict(e) for e in self.ellipses]}

    @classmethod
    def from_dict(cls, d: dict) -> "ObjectSpec":
        return cls(tuple(EllipseSpec(**e) for e in d["ellipses"]), d["height"], d["width"])


@dataclass(frozen=True)
class ObjectParams:
    """Sampling ranges for :func:`sample_object` (all uniform)."""

    min_objects: int = 1
    max_objects: int = 8
    semi_axis: tuple[float, float] = (5.0, 15.0)
    phase: tuple[float, float] = (0.1, 0.5)
    amplitude: tuple[float, float] = (0.9, 1.0)

    def __post_init__(self):
        if not 1 <= self.min_objects <= self.max_objects:
            raise ValueError("need 1 <= min_objects <= max_objects")


def _pixel_grid(height: int, width: int):
    return np.meshgrid(np.arange(width, dtype=float), np.arange(height, dtype=float))


def render_object(spec: ObjectSpec) -> np.ndarray:
    """Transmittance map: 1 in the background, products of ellipse transmittances inside."""
    xx, yy = _pixel_grid(spec.height, spec.width)
    out = np.ones((spec.height, spec.width), dtype=np.complex128)
    for e in spec.ellipses:
        inside = e.covers(xx, yy)
        out[inside] *= e.transmittance
    return out


def object_support_mask(spec: ObjectSpec) -> np.ndarray:
    xx, yy = _pixel_grid(spec.height, spec.width)
    mask = np.zeros((spec.height, spec.width), dtype=bool)
    for e in spec.ellipses:
        mask |= e.covers(xx, yy)
    return mask


def sample_object(rng: np.random.Generator, params: ObjectParams, height: int, width: int):
    """Draw random ellipses and render them. Returns ``(ObjectSpec, field)``."""
    if height < 1 or width < 1:
        raise ValueError("degenerate object grid")
    count = int(rng.integers(params.min_objects, params.max_objects + 1))
    ellipses = []
    for _ in range(count):
        cx = float(rng.uniform(0, width))
        cy = float(rng.uniform(0, height))
        a, b = sorted(rng.uniform(*params.semi_axis, size=2), reverse=True)
        ellipses.append(
            EllipseSpec(
                center_x=cx,
                center_y=cy,
                semi_major=float(a),
                semi_minor=float(b),
                rotation=float(rng.uniform(0, math.pi)),
                phase=float(rng.uniform(*params.phase)),
                amplitude=float(rng.uniform(*params.amplitude)),
            )
        )
    spec = ObjectSpec(tuple(ellipses), height, width)
    return spec, render_object(spec)


def speckle_phase(rng: np.random.Generator, shape, sigma: float, roughness: float) -> np.ndarray:
    """Zero-mean correlated phase screen with empirical std exactly ``sigma``.

    White Gaussian noise is smoothed by a periodic Gaussian filter whose
    standard deviation is ``roughness`` pixels.
    """
    if sigma < 0 or roughness <= 0:
        raise ValueError("need sigma >= 0 and roughness > 0")
    theta = ndimage.gaussian_filter(rng.standard_normal(shape), roughness, mode="wrap")
    theta -= theta.mean()
    std = theta.std()
    if std == 0:
        return np.zeros(shape)
    return theta * (sigma / std)


def apply_speckle(field, rng: np.random.Generator, sigma: float = 0.15, roughness: float = 1.0) -> np.ndarray:
    u = as_complex(field)
    if sigma == 0:
        if roughness <= 0:
            raise ValueError("roughness must be positive")
        return u.copy()
    return u * np.exp(1j * speckle_phase(rng, u.shape, sigma, roughness))


def apply_shot(hologram, rng: np.random.Generator, baseline: float = 1000.0) -> np.ndarray:
    """Photon counts: unit intensity maps to a Poisson mean of ``baseline``."""
    if baseline <= 0:
        raise ValueError("baseline must be positive")
    h = as_real(hologram)
    if np.any(h < 0):
        raise ValueError("intensities must be nonnegative")
    return rng.poisson(h * baseline).astype(np.float64)


def apply_read(hologram, rng: np.random.Generator, sigma: float = 10.0) -> np.ndarray:
    """Additive zero-mean Gaussian read noise in counts, clamped at zero."""
    if sigma < 0:
        raise ValueError("sigma must be nonnegative")
    h = as_real(hologram)
    if sigma == 0:
        return h.copy()
    return np.maximum(h + rng.normal(0.0, sigma, h.shape), 0.0)


def apply_dark(hologram, rng: np.random.Generator, lam: float = 20.0) -> np.ndarray:
    """Additive Poisson dark current, ``lam`` electrons per pixel."""
    if lam < 0:
        raise ValueError("lam must be nonnegative")
    h = as_real(hologram)
    if lam == 0:
        return h.copy()
    return h + rng.poisson(lam, h.shape)


@dataclass(frozen=True)
class NoiseConfig:
    """One of the eight noise configurations plus every stage parameter.

    The tag only switches stages on; the order is always
    speckle (field) -> shot -> read -> dark (counts).
    """

    tag: str = "clean"
    speckle_sigma: float = 0.15
    speckle_roughness: float = 1.0
    shot_baseline: float = 1000.0
    read_sigma: float = 10.0
    dark_lambda: float = 20.0

    def __post_init__(self):
        if self.tag not in NOISE_TAGS:
            raise ValueError(f"unknown noise tag {self.tag!r}; expected one of {NOISE_TAGS}")
        for name in ("speckle_sigma", "speckle_roughness", "shot_baseline", "read_sigma", "dark_lambda"):
            if not getattr(self, name) >= 0:
                raise ValueError(f"{name} must be nonnegative")

    @property
    def stages(self) -> tuple[str, ...]:
        active = set() if self.tag == "clean" else set(self.tag.split("+"))
        return tuple(s for s in _STAGES if s in active)

    def to_dict(self) -> dict:
        return asdict(self)


@dataclass(frozen=True, eq=False)
class SampleRecord:
    """A hologram/object pair with everything needed to regenerate it.

    Arrays are held at storage precision (float32 / complex64) so a record
    round-trips through disk unchanged.
    """

    index: int
    seed: int
    noise_tag: str
    hologram_raw: Hologram
    hologram_norm: Hologram
    object_gt: ComplexField
    object_spec: ObjectSpec
    config: OpticalConfig
    noise: NoiseConfig = field(default_factory=NoiseConfig)

    def __post_init__(self):
        if self.noise_tag != self.noise.tag:
            raise ValueError("noise_tag disagrees with noise config")
        if not np.array_equal(self.hologram_norm.data, normalize_counts(self.hologram_raw.data)):
            raise ValueError("hologram_norm must equal hologram_raw / 1000")

    @property
    def support_mask(self) -> np.ndarray:
        return object_support_mask(self.object_spec)


def normalize_counts(raw) -> np.ndarray:
    return np.asarray(raw, dtype=np.float32) / np.float32(NORMALIZATION)


def simulate_sample(
    rng: np.random.Generator,
    config: OpticalConfig,
    noise: NoiseConfig = NoiseConfig(),
    object_params: ObjectParams = ObjectParams(),
    *,
    index: int = 0,
    seed: int = 0,
    obj=None,
    spec: ObjectSpec | None = None,
) -> SampleRecord:
    """Run the full acquisition chain for one sample.

    A fixed ``obj``/``spec`` pair may be supplied in place of a random draw.
    """
    if obj is None:
        spec, obj = sample_object(rng, object_params, config.height, config.width)
    elif spec is None:
        spec = ObjectSpec((), config.height, config.width)
    obj = as_complex(obj)

    stages = noise.stages
    illuminated = obj
    if "speckle" in stages:
        illuminated = apply_speckle(obj, rng, noise.speckle_sigma, noise.speckle_roughness)
    intensity = forward_intensity(illuminated, config)
    if "shot" in stages:
        counts = apply_shot(intensity, rng, noise.shot_baseline)
    else:
        counts = intensity * noise.shot_baseline
    if "read" in stages:
        counts = apply_read(counts, rng, noise.read_sigma)
    if "dark" in stages:
        counts = apply_dark(counts, rng, noise.dark_lambda)

    raw = np.maximum(counts, 0.0).astype(np.float32)
    return SampleRecord(
        index=index,
        seed=seed,
        noise_tag=noise.tag,
        hologram_raw=Hologram(raw),
        hologram_norm=Hologram(normalize_counts(raw)),
        object_gt=ComplexField(obj.astype(np.complex64)),
        object_spec=spec,
        config=config,
        noise=noise,
    )
