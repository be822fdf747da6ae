"""Deterministic synthetic fixtures: feature fields whose pixel vectors form
directional Gaussian clusters, matching label masks, and piecewise-constant
intensity images.

Scenarios model the failure mode that motivates trained adapters: slices
drift in scale, and a confound background cluster can sit close enough (in
cosine) to the foreground direction that a fixed similarity threshold
mislabels it while the clusters stay linearly separable.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, asdict
from pathlib import Path

import numpy as np

from .errors import DataError
from .formats import FeatureMap, LabelMask, write_feature_map, write_label_mask


@dataclass(frozen=True)
class Region:
    """One painted cluster: a labelled shape with a feature direction.

    Shapes: ``rectangle`` geometry (top, left, height, width), ``disk``
    geometry (row, col, radius), ``fill`` geometry () claiming every pixel
    left unclaimed (background clusters only).
    """

    label: int
    shape: str
    geometry: tuple[int, ...]
    direction: tuple[float, ...]
    noise: float = 0.1
    intensity: float = 0.0

    def __post_init__(self) -> None:
        if self.shape not in ("rectangle", "disk", "fill"):
            raise DataError(f"unknown region shape {self.shape!r}")
        if self.shape == "fill" and self.label != 0:
            raise DataError("fill regions are background clusters (label 0)")
        if self.noise < 0:
            raise DataError(f"noise scale must be >= 0, got {self.noise}")
        object.__setattr__(self, "geometry", tuple(int(g) for g in self.geometry))
        object.__setattr__(self, "direction", tuple(float(d) for d in self.direction))

    def footprint(self, height: int, width: int) -> np.ndarray:
        if self.shape == "fill":
            return np.ones((height, width), dtype=bool)
        if self.shape == "rectangle":
            top, left, h, w = self.geometry
            if top < 0 or left < 0 or top + h > height or left + w > width or h < 1 or w < 1:
                raise DataError(f"rectangle {self.geometry} out of bounds for {height}x{width}")
            out = np.zeros((height, width), dtype=bool)
            out[top : top + h, left : left + w] = True
            return out
        row, col, radius = self.geometry
        if not (0 <= row < height and 0 <= col < width) or radius < 1:
            raise DataError(f"disk {self.geometry} out of bounds for {height}x{width}")
        rr, cc = np.ogrid[:height, :width]
        return (rr - row) ** 2 + (cc - col) ** 2 <= radius**2


@dataclass(frozen=True)
class ScenarioSpec:
    height: int
    width: int
    dim: int
    regions: tuple[Region, ...]  # foreground, labels 1..L
    background: tuple[Region, ...]  # label-0 clusters, at least one
    drift: tuple[float, ...]  # per-slice feature/intensity scale
    seed: int = 0
    declared_labels: int | None = None

    def __post_init__(self) -> None:
        if min(self.height, self.width, self.dim) < 1:
            raise DataError("scenario dimensions must be >= 1")
        if not self.background:
            raise DataError("scenario needs at least one background cluster")
        if not self.drift:
            raise DataError("scenario needs at least one slice (drift factor)")
        for region in self.background:
            if region.label != 0:
                raise DataError("background clusters must carry label 0")
        labels = sorted({r.label for r in self.regions})
        if labels and labels != list(range(1, len(labels) + 1)):
            raise DataError(f"foreground labels must be contiguous from 1, got {labels}")
        for region in (*self.regions, *self.background):
            if len(region.direction) != self.dim:
                raise DataError(
                    f"region direction has {len(region.direction)} components, scenario dim is {self.dim}"
                )
        object.__setattr__(self, "regions", tuple(self.regions))
        object.__setattr__(self, "background", tuple(self.background))
        object.__setattr__(self, "drift", tuple(float(d) for d in self.drift))

    @property
    def label_count(self) -> int:
        found = max((r.label for r in self.regions), default=0)
        return max(found, self.declared_labels or 0)

    @property
    def slice_count(self) -> int:
        return len(self.drift)


def _unit(v: np.ndarray) -> np.ndarray:
    return v / np.linalg.norm(v)


def _assignment(spec: ScenarioSpec) -> tuple[np.ndarray, np.ndarray]:
    """Region index per pixel (into regions+background) and the label mask."""
    owner = np.full((spec.height, spec.width), -1, dtype=np.int64)
    labels = np.zeros((spec.height, spec.width), dtype=np.uint8)
    for i, region in enumerate(spec.regions):
        fp = region.footprint(spec.height, spec.width)
        clash = fp & (owner >= 0) & (labels != region.label)
        if clash.any():
            raise DataError(
                f"region with label {region.label} overlaps a different label at "
                f"{np.argwhere(clash)[0].tolist()}"
            )
        claim = fp & (owner < 0)
        owner[claim] = i
        labels[claim] = region.label
    for j, region in enumerate(spec.background):
        claim = region.footprint(spec.height, spec.width) & (owner < 0)
        owner[claim] = len(spec.regions) + j
    if (owner < 0).any():
        raise DataError(
            "scenario leaves pixels unassigned; add a fill background cluster"
        )
    return owner, labels


def generate_scenario(
    spec: ScenarioSpec,
) -> tuple[list[FeatureMap], list[LabelMask], list[np.ndarray]]:
    """Per slice: features = (direction + noise * N(0,I)) * drift, a label
    mask, and an intensity image with each region's gray level * drift."""
    owner, labels = _assignment(spec)
    all_regions = (*spec.regions, *spec.background)
    directions = np.stack([_unit(np.asarray(r.direction, dtype=np.float64)) for r in all_regions])
    noises = np.array([r.noise for r in all_regions])
    levels = np.array([r.intensity for r in all_regions])

    slice_seeds = np.random.SeedSequence(spec.seed).generate_state(spec.slice_count)
    feature_maps = []
    masks = []
    intensities = []
    for s, drift in enumerate(spec.drift):
        rng = np.random.default_rng(int(slice_seeds[s]))
        base = directions[owner]  # (H, W, D)
        noise = rng.standard_normal((spec.height, spec.width, spec.dim))
        feats = (base + noises[owner][:, :, None] * noise) * drift
        feature_maps.append(FeatureMap(feats.astype(np.float32)))
        masks.append(LabelMask(labels.copy(), spec.label_count))
        intensities.append((levels[owner] * drift).astype(np.float64))
    return feature_maps, masks, intensities


def _orthonormal_directions(dim: int, count: int, rng: np.random.Generator) -> np.ndarray:
    """Mutually orthogonal unit directions via QR of a random matrix."""
    if count > dim:
        raise DataError(f"cannot draw {count} orthogonal directions in {dim} dimensions")
    q, _ = np.linalg.qr(rng.standard_normal((dim, count)))
    return q.T


def separable_scenario(
    seed: int = 0,
    height: int = 64,
    width: int = 64,
    dim: int = 32,
    n_slices: int = 6,
    noise: float = 0.1,
    drift_step: float = 0.03,
) -> ScenarioSpec:
    """Three well-separated RoI clusters plus one background cluster.

    Directions are mutually orthogonal, so every adapter (including the
    cosine threshold) can solve the scenario.
    """
    rng = np.random.default_rng(seed)
    dirs = _orthonormal_directions(dim, 4, rng)
    r = max(4, height // 10)
    regions = (
        Region(1, "disk", (height // 4, width // 4, r), tuple(dirs[0]), noise, 1.0),
        Region(2, "rectangle", (height // 8, width - width // 3, height // 5, width // 5), tuple(dirs[1]), noise, 0.75),
        Region(3, "disk", (height - height // 4, width // 2, r), tuple(dirs[2]), noise, 0.5),
    )
    background = (Region(0, "fill", (), tuple(dirs[3]), noise, 0.0),)
    drift = tuple(1.0 + drift_step * i for i in range(n_slices))
    return ScenarioSpec(height, width, dim, regions, background, drift, seed)


def background_only_scenario(source: ScenarioSpec, seed: int, n_slices: int = 1) -> ScenarioSpec:
    """Slices drawn from the source's background clusters only; masks stay
    empty but declare the source's label count (true-negative fixtures)."""
    background = tuple(
        Region(0, "fill", (), r.direction, r.noise, r.intensity) if i == len(source.background) - 1
        else r
        for i, r in enumerate(source.background)
    )
    return ScenarioSpec(
        source.height,
        source.width,
        source.dim,
        (),
        background,
        source.drift[:1] * n_slices,
        seed,
        declared_labels=source.label_count,
    )


def confound_scenario(
    seed: int = 0,
    height: int = 64,
    width: int = 64,
    dim: int = 32,
    n_slices: int = 4,
    confound_cosine: float = 0.78,
    noise: float = 0.11,
    drift_step: float = 0.03,
) -> tuple[ScenarioSpec, dict]:
    """A scenario where the fixed 0.5 cosine threshold fails.

    One background cluster points within `confound_cosine` of the RoI
    direction, so cosine thresholding at 0.5 floods it with false
    positives, while the clusters remain linearly separable for trained
    adapters.  Returns the scenario spec and its construction parameters.
    """
    rng = np.random.default_rng(seed)
    dirs = _orthonormal_directions(dim, 3, rng)
    fg_dir = dirs[0]
    confound_dir = confound_cosine * fg_dir + np.sqrt(1.0 - confound_cosine**2) * dirs[1]
    far_dir = dirs[2]

    r = max(4, height // 8)
    confound_geometry = (height // 2 + height // 16, width // 2 + width // 16, height // 4, width // 4)
    regions = (Region(1, "disk", (height // 4, width // 4, r), tuple(fg_dir), noise, 1.0),)
    background = (
        Region(0, "rectangle", confound_geometry, tuple(confound_dir), noise, 0.5),
        Region(0, "fill", (), tuple(far_dir), noise, 0.0),
    )
    drift = tuple(1.0 + drift_step * i for i in range(n_slices))
    spec = ScenarioSpec(height, width, dim, regions, background, drift, seed)
    params = {
        "confound_cosine": confound_cosine,
        "confound_region": list(confound_geometry),
        "noise": noise,
        "drift": list(drift),
        "seed": seed,
    }
    return spec, params


def two_intensity_scenario(
    seed: int = 0, height: int = 32, width: int = 32, dim: int = 8
) -> ScenarioSpec:
    """Single object at intensity 1.0 on a 0.0 background, one slice; the
    flood-fill refiner recovers the object exactly at tolerance 0.5."""
    rng = np.random.default_rng(seed)
    dirs = _orthonormal_directions(dim, 2, rng)
    regions = (
        Region(1, "rectangle", (height // 4, width // 4, height // 2, width // 2), tuple(dirs[0]), 0.05, 1.0),
    )
    background = (Region(0, "fill", (), tuple(dirs[1]), 0.05, 0.0),)
    return ScenarioSpec(height, width, dim, regions, background, (1.0,), seed)


def spec_to_dict(spec: ScenarioSpec) -> dict:
    return asdict(spec)


def spec_from_dict(payload: dict) -> ScenarioSpec:
    try:
        regions = tuple(Region(**r) for r in payload["regions"])
        background = tuple(Region(**r) for r in payload["background"])
        return ScenarioSpec(
            int(payload["height"]),
            int(payload["width"]),
            int(payload["dim"]),
            regions,
            background,
            tuple(payload["drift"]),
            int(payload.get("seed", 0)),
            payload.get("declared_labels"),
        )
    except (KeyError, TypeError) as exc:
        raise DataError(f"malformed scenario spec: {exc}") from exc


def read_scenario_spec(path: str | Path) -> ScenarioSpec:
    path = Path(path)
    if not path.exists():
        raise FileNotFoundError(f"no such file: {path}")
    try:
        payload = json.loads(path.read_text())
    except json.JSONDecodeError as exc:
        raise DataError(f"{path}: malformed scenario spec: {exc}") from exc
    return spec_from_dict(payload.get("spec", payload))


def materialize_scenario(
    spec: ScenarioSpec, out_dir: str | Path, params: dict | None = None
) -> dict:
    """Generate the scenario and write every slice as PXF1/PXM1 files plus a
    scenario.json manifest; returns the manifest."""
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    features, masks, intensities = generate_scenario(spec)
    slices = []
    for i, (fmap, mask, intensity) in enumerate(zip(features, masks, intensities)):
        names = {
            "features": f"slice_{i:03d}.features.pxf",
            "mask": f"slice_{i:03d}.mask.pxm",
            "intensity": f"slice_{i:03d}.intensity.pxf",
        }
        write_feature_map(fmap, out_dir / names["features"])
        write_label_mask(mask, out_dir / names["mask"])
        write_feature_map(FeatureMap(intensity[:, :, None].astype(np.float32)), out_dir / names["intensity"])
        slices.append(names)
    manifest = {
        "spec": spec_to_dict(spec),
        "params": params or {},
        "label_count": spec.label_count,
        "slices": slices,
    }
    (out_dir / "scenario.json").write_text(json.dumps(manifest, indent=2, sort_keys=True) + "\n")
    return manifest
