"""On-disk dataset format, deterministic generation and PNG export.

Layout of a dataset directory::

    manifest.json
    samples/NNNNNN.f32    little-endian float32 payload
    samples/NNNNNN.json   scalar metadata, array shapes and byte offsets

The payload holds ``hologram_raw``, ``hologram_norm`` (H x W each) and
``object_gt`` (H x W complex stored as interleaved real/imag pairs), in that
order, row-major.
"""

from __future__ import annotations

import json
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field
from pathlib import Path

import numpy as np
from PIL import Image

from .core import RNG_ALGORITHM, ComplexField, Hologram, OpticalConfig, derive_seed, make_rng
from .simulation import (
    NOISE_TAGS,
    NORMALIZATION,
    NoiseConfig,
    ObjectParams,
    ObjectSpec,
    SampleRecord,
    simulate_sample,
)

FORMAT_VERSION = 1
MANIFEST_VERSION = 1
POOL_DOMAIN, TEST_DOMAIN, SPLIT_DOMAIN = 0, 1, 2
_F32 = np.dtype("<f4")


class DatasetError(Exception):
    pass


class SampleFormatError(DatasetError):
    """Malformed sample on disk. ``field`` names the offending entry."""

    def __init__(self, field: str, message: str):
        super().__init__(f"{field}: {message}")
        self.field = field


def sample_stem(index: int) -> str:
    return f"{index:06d}"


def _array_entries(height: int, width: int):
    n = height * width * _F32.itemsize
    return [
        {"name": "hologram_raw", "kind": "real", "shape": [height, width], "offset": 0, "nbytes": n},
        {"name": "hologram_norm", "kind": "real", "shape": [height, width], "offset": n, "nbytes": n},
        {"name": "object_gt", "kind": "complex", "shape": [height, width], "offset": 2 * n, "nbytes": 2 * n},
    ]


def _dumps(obj) -> str:
    return json.dumps(obj, indent=2, sort_keys=True) + "\n"


def write_sample(directory, record: SampleRecord) -> tuple[Path, Path]:
    """Write ``record`` under ``directory``; returns the payload and sidecar paths."""
    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    stem = sample_stem(record.index)
    h, w = record.config.shape
    obj = np.asarray(record.object_gt)
    payload = b"".join(
        (
            np.asarray(record.hologram_raw).astype(_F32).tobytes(),
            np.asarray(record.hologram_norm).astype(_F32).tobytes(),
            np.stack([obj.real, obj.imag], axis=-1).astype(_F32).tobytes(),
        )
    )
    meta = {
        "format_version": FORMAT_VERSION,
        "index": record.index,
        "seed": record.seed,
        "noise_tag": record.noise_tag,
        "noise": record.noise.to_dict(),
        "config": record.config.to_dict(),
        "object_spec": record.object_spec.to_dict(),
        "normalization": NORMALIZATION,
        "payload": stem + ".f32",
        "arrays": _array_entries(h, w),
    }
    data_path = directory / (stem + ".f32")
    meta_path = directory / (stem + ".json")
    data_path.write_bytes(payload)
    meta_path.write_text(_dumps(meta))
    return data_path, meta_path


def _require(meta: dict, key: str):
    if key not in meta:
        raise SampleFormatError(key, "missing")
    return meta[key]


def read_sample(directory, index: int) -> SampleRecord:
    directory = Path(directory)
    meta_path = directory / (sample_stem(index) + ".json")
    try:
        meta = json.loads(meta_path.read_text())
    except FileNotFoundError:
        raise DatasetError(f"no sample {index} in {directory}") from None
    except json.JSONDecodeError as exc:
        raise SampleFormatError("sidecar", f"invalid JSON ({exc})") from None

    version = _require(meta, "format_version")
    if version != FORMAT_VERSION:
        raise SampleFormatError("format_version", f"expected {FORMAT_VERSION}, found {version}")
    try:
        config = OpticalConfig.from_dict(_require(meta, "config"))
    except (TypeError, ValueError) as exc:
        raise SampleFormatError("config", str(exc)) from None
    h, w = config.shape

    arrays = {a.get("name"): a for a in _require(meta, "arrays")}
    expected = {a["name"]: a for a in _array_entries(h, w)}
    for name, exp in expected.items():
        got = arrays.get(name)
        if got is None:
            raise SampleFormatError(f"arrays.{name}", "missing")
        for key in ("shape", "offset", "nbytes", "kind"):
            if got.get(key) != exp[key]:
                raise SampleFormatError(f"arrays.{name}.{key}", f"expected {exp[key]}, found {got.get(key)}")

    raw_bytes = (directory / _require(meta, "payload")).read_bytes()
    total = sum(a["nbytes"] for a in expected.values())
    if len(raw_bytes) != total:
        raise SampleFormatError("payload", f"expected {total} bytes, found {len(raw_bytes)}")

    def take(name):
        a = expected[name]
        return np.frombuffer(raw_bytes, dtype=_F32, count=a["nbytes"] // 4, offset=a["offset"])

    obj = take("object_gt").reshape(h, w, 2)
    try:
        return SampleRecord(
            index=int(_require(meta, "index")),
            seed=int(_require(meta, "seed")),
            noise_tag=_require(meta, "noise_tag"),
            hologram_raw=Hologram(take("hologram_raw").reshape(h, w).astype(np.float32)),
            hologram_norm=Hologram(take("hologram_norm").reshape(h, w).astype(np.float32)),
            object_gt=ComplexField((obj[..., 0] + 1j * obj[..., 1]).astype(np.complex64)),
            object_spec=ObjectSpec.from_dict(_require(meta, "object_spec")),
            config=config,
            noise=NoiseConfig(**_require(meta, "noise")),
        )
    except (TypeError, ValueError) as exc:
        raise SampleFormatError("record", str(exc)) from None


def parse_noise_distribution(text: str | dict | None) -> dict[str, float]:
    """``'uniform'`` or ``'clean:1,shot:2,...'`` -> normalized weights over all eight tags."""
    if text is None or text == "uniform":
        return {t: 1.0 / len(NOISE_TAGS) for t in NOISE_TAGS}
    if isinstance(text, str):
        weights = {}
        for part in text.split(","):
            tag, sep, val = part.strip().rpartition(":")
            if not sep:
                raise ValueError(f"bad noise distribution entry {part!r}; expected tag:weight")
            weights[tag] = float(val)
    else:
        weights = {k: float(v) for k, v in text.items()}
    for tag, w in weights.items():
        if tag not in NOISE_TAGS:
            raise ValueError(f"unknown noise tag {tag!r}")
        if not (w >= 0 and math.isfinite(w)):
            raise ValueError(f"weight for {tag!r} must be finite and nonnegative")
    total = sum(weights.values())
    if total <= 0:
        raise ValueError("noise distribution has zero total weight")
    return {t: weights.get(t, 0.0) / total for t in NOISE_TAGS}


def choose_tag(rng: np.random.Generator, dist: dict[str, float]) -> str:
    cdf = np.cumsum([dist[t] for t in NOISE_TAGS])
    i = int(np.searchsorted(cdf, rng.random() * cdf[-1], side="right"))
    return NOISE_TAGS[min(i, len(NOISE_TAGS) - 1)]


@dataclass
class DatasetManifest:
    sample_count: int
    base_seed: int
    config: OpticalConfig
    noise_distribution: dict
    splits: dict
    noise_params: dict = field(default_factory=lambda: NoiseConfig().to_dict())
    object_params: dict = field(default_factory=lambda: asdict(ObjectParams()))
    version: int = MANIFEST_VERSION

    def to_dict(self) -> dict:
        params = {k: v for k, v in self.noise_params.items() if k != "tag"}
        return {
            "version": self.version,
            "sample_count": self.sample_count,
            "base_seed": self.base_seed,
            "rng": RNG_ALGORITHM,
            "normalization": NORMALIZATION,
            "optics": self.config.to_dict(),
            "noise_distribution": self.noise_distribution,
            "noise_params": params,
            "object_params": {k: list(v) if isinstance(v, tuple) else v for k, v in self.object_params.items()},
            "splits": self.splits,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "DatasetManifest":
        if d.get("version") != MANIFEST_VERSION:
            raise SampleFormatError("version", f"expected manifest version {MANIFEST_VERSION}, found {d.get('version')}")
        return cls(
            sample_count=d["sample_count"],
            base_seed=d["base_seed"],
            config=OpticalConfig.from_dict(d["optics"]),
            noise_distribution=d["noise_distribution"],
            splits=d["splits"],
            noise_params=d.get("noise_params", {}),
            object_params=d.get("object_params", {}),
            version=d["version"],
        )


def split_indices(count: int, test_count: int, base_seed: int, val_fraction: float = 0.2) -> dict:
    """Shuffle the pool into train/val; the test set follows the pool."""
    perm = make_rng(derive_seed(base_seed, 0, SPLIT_DOMAIN)).permutation(count)
    n_val = int(round(count * val_fraction))
    return {
        "train": sorted(int(i) for i in perm[n_val:]),
        "val": sorted(int(i) for i in perm[:n_val]),
        "test": list(range(count, count + test_count)),
    }


def _generate_one(args) -> int:
    out, index, domain_index, domain, base_seed, config, dist, noise_params, object_params = args
    seed = derive_seed(base_seed, domain_index, domain)
    rng = make_rng(seed)
    noise = NoiseConfig(choose_tag(rng, dist), **noise_params)
    record = simulate_sample(rng, config, noise, object_params, index=index, seed=seed)
    write_sample(Path(out) / "samples", record)
    return index


def generate_dataset(
    out,
    count: int = 200,
    seed: int = 0,
    *,
    test_count: int = 32,
    noise_dist=None,
    config: OpticalConfig = OpticalConfig(),
    noise_params: dict | None = None,
    object_params: ObjectParams = ObjectParams(),
    val_fraction: float = 0.2,
    workers: int = 1,
) -> DatasetManifest:
    """Generate ``count`` pool samples plus ``test_count`` external test samples.

    Sample ``i`` draws from its own substream, so the output does not depend
    on the worker count. Test samples use a disjoint seed domain. The
    manifest is written last.
    """
    if count <= 0:
        raise ValueError("empty dataset")
    if test_count < 0:
        raise ValueError("test_count must be nonnegative")
    if not 0 <= val_fraction < 1:
        raise ValueError("val_fraction must lie in [0, 1)")
    dist = parse_noise_distribution(noise_dist)
    noise_params = {k: v for k, v in (noise_params or {}).items() if k != "tag"}
    NoiseConfig(**noise_params)  # validate early
    out = Path(out)
    (out / "samples").mkdir(parents=True, exist_ok=True)

    jobs = [(str(out), i, i, POOL_DOMAIN, seed, config, dist, noise_params, object_params) for i in range(count)]
    jobs += [
        (str(out), count + j, j, TEST_DOMAIN, seed, config, dist, noise_params, object_params) for j in range(test_count)
    ]
    if workers > 1:
        with ProcessPoolExecutor(max_workers=workers) as ex:
            list(ex.map(_generate_one, jobs, chunksize=8))
    else:
        for j in jobs:
            _generate_one(j)

    manifest = DatasetManifest(
        sample_count=count + test_count,
        base_seed=seed,
        config=config,
        noise_distribution=dist,
        splits=split_indices(count, test_count, seed, val_fraction),
        noise_params={**NoiseConfig().to_dict(), **noise_params},
        object_params=asdict(object_params),
    )
    (out / "manifest.json").write_text(_dumps(manifest.to_dict()))
    return manifest


def load_manifest(directory) -> DatasetManifest:
    path = Path(directory) / "manifest.json"
    if not path.exists():
        raise DatasetError(f"no dataset at {directory} (manifest.json missing)")
    try:
        return DatasetManifest.from_dict(json.loads(path.read_text()))
    except (json.JSONDecodeError, KeyError, TypeError) as exc:
        raise SampleFormatError("manifest", str(exc)) from None


def load_records(directory, split: str | None = None, limit: int | None = None) -> list[SampleRecord]:
    """Read records of ``split`` (or every record) in index order."""
    manifest = load_manifest(directory)
    if split is None or split == "all":
        indices = list(range(manifest.sample_count))
    elif split in manifest.splits:
        indices = list(manifest.splits[split])
    else:
        raise DatasetError(f"unknown split {split!r}")
    if limit is not None:
        indices = indices[:limit]
    return [read_sample(Path(directory) / "samples", i) for i in indices]


CHANNELS = ("amplitude", "phase", "hologram")


def channel_image(source, channel: str) -> np.ndarray:
    if channel not in CHANNELS:
        raise ValueError(f"unknown channel {channel!r}; expected one of {CHANNELS}")
    if isinstance(source, SampleRecord):
        source = source.hologram_norm if channel == "hologram" else source.object_gt
    arr = np.asarray(source)
    if channel == "amplitude":
        return np.abs(arr).astype(np.float64)
    if channel == "phase":
        return np.angle(arr).astype(np.float64)
    if np.iscomplexobj(arr):
        raise ValueError("hologram channel needs a real intensity image")
    return arr.astype(np.float64)


def to_uint16(values: np.ndarray, channel: str) -> np.ndarray:
    """Map to 16 bits with a 1st-99th percentile window (clipped to (-pi, pi] for phase)."""
    lo, hi = np.percentile(values, [1.0, 99.0])
    if channel == "phase":
        lo, hi = max(lo, -math.pi), min(hi, math.pi)
    if not hi > lo:
        return np.full(values.shape, 32768, dtype=np.uint16)
    scaled = np.clip((values - lo) / (hi - lo), 0.0, 1.0)
    return np.round(scaled * 65535).astype(np.uint16)


def export_png(source, path, channel: str = "amplitude") -> Path:
    """Write a 16-bit grayscale PNG of one channel of a record or field."""
    img = to_uint16(channel_image(source, channel), channel)
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    Image.fromarray(img).save(path)
    return path
