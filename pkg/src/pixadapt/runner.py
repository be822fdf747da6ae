"""End-to-end orchestration: scenario in, run directory of artifacts out.

A run loads a materialized scenario, prepares the configured adapter from
the training slices, localizes every test slice, filters small components,
derives landmarks and prompt points, optionally refines with the built-in
flood-fill segmenter, and scores the result.  Every artifact lands under
one run directory; rerunning with the same configuration and seed
reproduces the bytes (the manifest's ``created_at`` stamp is the only
field that may differ).
"""

from __future__ import annotations

import json
import time
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import adapters, metrics, nn, pipeline, sampling
from .config import RunConfig, config_hash
from .errors import ConfigError, DataError, PipelineError
from .formats import FeatureMap, LabelMask, l2_normalize, read_feature_map, read_label_mask, write_label_mask
from .synth import spec_from_dict


@dataclass(frozen=True)
class SliceData:
    name: str
    features: FeatureMap
    mask: LabelMask
    intensity: np.ndarray


@dataclass(frozen=True)
class Scenario:
    directory: Path
    manifest: dict
    slices: tuple[SliceData, ...]

    @property
    def label_count(self) -> int:
        return int(self.manifest["label_count"])


@dataclass
class RunResult:
    run_dir: Path
    config: RunConfig
    report: metrics.MetricReport
    manifest: dict
    localized: dict[str, LabelMask] = field(default_factory=dict)
    refined: dict[str, LabelMask] = field(default_factory=dict)
    landmarks: dict[str, dict[int, tuple[int, int] | None]] = field(default_factory=dict)
    prompt_counts: dict[str, dict[int, int]] = field(default_factory=dict)


def load_scenario(directory: str | Path) -> Scenario:
    """Read a materialized scenario directory (scenario.json plus slices)."""
    directory = Path(directory)
    manifest_path = directory / "scenario.json"
    if not manifest_path.exists():
        raise FileNotFoundError(f"no such file: {manifest_path}")
    try:
        manifest = json.loads(manifest_path.read_text())
    except json.JSONDecodeError as exc:
        raise DataError(f"{manifest_path}: malformed scenario manifest: {exc}") from exc
    if "slices" not in manifest or "label_count" not in manifest:
        raise DataError(f"{manifest_path}: scenario manifest lacks slices/label_count")
    if "spec" in manifest:
        spec_from_dict(manifest["spec"])  # validates the recorded construction
    slices = []
    for i, names in enumerate(manifest["slices"]):
        feats = read_feature_map(directory / names["features"])
        mask = read_label_mask(directory / names["mask"])
        intensity = read_feature_map(directory / names["intensity"]).data[:, :, 0].astype(np.float64)
        if (mask.height, mask.width) != (feats.height, feats.width):
            raise DataError(f"slice {i}: mask and features disagree on shape")
        slices.append(SliceData(names["features"].split(".")[0], feats, mask, intensity))
    return Scenario(directory, manifest, tuple(slices))


def _pick(scenario: Scenario, indices: list[int], role: str) -> list[SliceData]:
    out = []
    for i in indices:
        if not 0 <= i < len(scenario.slices):
            raise ConfigError(
                f"{role} slice {i} out of range; scenario has {len(scenario.slices)} slices"
            )
        out.append(scenario.slices[i])
    if not out:
        raise ConfigError(f"need at least one {role} slice")
    return out


def _merge_classification_sets(sets: list[sampling.ClassificationSet]) -> sampling.ClassificationSet:
    return sampling.ClassificationSet(
        np.concatenate([s.coords for s in sets]),
        np.concatenate([s.features for s in sets]),
        np.concatenate([s.classes for s in sets]),
        sets[0].class_count,
    )


def _merge_pair_sets(sets: list[sampling.PairSet]) -> sampling.PairSet:
    return sampling.PairSet(
        np.concatenate([s.features_a for s in sets]),
        np.concatenate([s.features_b for s in sets]),
        np.concatenate([s.pair_classes for s in sets]),
        np.concatenate([s.coords_a for s in sets]),
        np.concatenate([s.coords_b for s in sets]),
        sets[0].pair_class_count,
    )


def _slice_seed(base: int, *parts: int) -> int:
    return int(np.random.SeedSequence((base, *parts)).generate_state(1)[0])


@dataclass(frozen=True)
class _Adapter:
    """Prepared adapter closed over its training data."""

    kind: str
    localize: object  # callable(SliceData) -> (LabelMask, ScoreMap | None)
    model: object = None


def prepare_adapter(config: RunConfig, train: list[SliceData], label_count: int) -> _Adapter:
    """Train (or merely bind) the configured adapter on the training slices."""
    if label_count < 1:
        raise DataError("training slices declare no labels")
    seeds = np.random.SeedSequence(config.seed).generate_state(3)

    if config.adapter == "basic":
        template = train[0]

        def localize(target: SliceData):
            claims = []
            for label in range(1, label_count + 1):
                sims = adapters.basic_similarity_map(
                    template.features, template.mask, label, target.features, config.score_reduction
                )
                scores = sims.values[:, :, 0]
                claims.append((label, scores >= config.threshold, scores))
            return metrics.aggregate_binary_multilabel(claims), None

        return _Adapter("basic", localize)

    if config.adapter == "classification":
        dataset = _merge_classification_sets(
            [
                sampling.sample_classification_set(s.features, s.mask, _slice_seed(int(seeds[0]), i))
                for i, s in enumerate(train)
            ]
        )
        model = adapters.train_classification_adapter(dataset, config.train_config(), int(seeds[1]))

        def localize(target: SliceData):
            return adapters.predict_classification(model, target.features)

        return _Adapter("classification", localize, model)

    pairs = _merge_pair_sets(
        [
            sampling.sample_contrastive_pairs(
                s.features, s.mask, config.pairs_per_label, config.min_negative_offset,
                _slice_seed(int(seeds[0]), i),
            )
            for i, s in enumerate(train)
        ]
    )
    model = adapters.train_contrastive_adapter(pairs, config.train_config(), int(seeds[1]))
    references = [
        sampling.select_reference_pixels(
            train[0].features, train[0].mask, label, config.k_references, _slice_seed(int(seeds[2]), label)
        )
        for label in range(1, label_count + 1)
    ]

    def localize(target: SliceData):
        return adapters.contrastive_localize(
            model, references, target.features, config.background_margin, config.score_reduction
        )

    return _Adapter("contrastive", localize, model)


def _landmark_cases(
    predicted: LabelMask, truth: LabelMask, label: int, slice_id: str, connectivity: int
) -> tuple[tuple[int, int] | None, metrics.LocalizationCase | None]:
    pred_lm = pipeline.landmark_from_mask(predicted, label, connectivity)
    true_lm = pipeline.landmark_from_mask(truth, label, connectivity)
    if true_lm is None:
        return pred_lm, None
    return pred_lm, metrics.LocalizationCase(pred_lm, true_lm, label, slice_id)


def _refine_slice(
    data: SliceData, filtered: LabelMask, config: RunConfig, prompt_sets: dict[int, pipeline.PromptSet]
) -> LabelMask:
    out = np.zeros_like(filtered.labels)
    for label in sorted(prompt_sets):
        grown = pipeline.mock_refine(data.intensity, prompt_sets[label], config.refine_tolerance)
        out[(grown.labels == 1) & (out == 0)] = label
    return LabelMask(out, filtered.label_count)


def _threshold_sweep(
    config: RunConfig, template: SliceData, tests: list[SliceData], label_count: int, run_dir: Path
) -> None:
    """CSV + figure of mean IoU per cosine threshold for the fixed adapter."""
    thresholds = np.round(np.arange(-1.0, 1.0001, 0.1), 2)
    per_label_sims = {
        label: [
            adapters.basic_similarity_map(
                template.features, template.mask, label, t.features, config.score_reduction
            ).values[:, :, 0]
            for t in tests
        ]
        for label in range(1, label_count + 1)
    }
    rows = []
    for thr in thresholds:
        label_means = []
        for label in range(1, label_count + 1):
            vals = [
                metrics.iou(sims >= thr, t.mask.labels == label)
                for sims, t in zip(per_label_sims[label], tests)
            ]
            label_means.append(float(np.mean(vals)))
        rows.append((float(thr), float(np.mean(label_means)), label_means))

    lines = ["threshold,mean_iou," + ",".join(f"label_{l}_iou" for l in range(1, label_count + 1))]
    for thr, mean_iou, label_means in rows:
        lines.append(f"{thr:.2f},{mean_iou:.6f}," + ",".join(f"{v:.6f}" for v in label_means))
    (run_dir / "threshold_sweep.csv").write_text("\n".join(lines) + "\n")

    import matplotlib

    matplotlib.use("Agg")
    import matplotlib.pyplot as plt

    fig, ax = plt.subplots(figsize=(6, 4))
    ax.plot([r[0] for r in rows], [r[1] for r in rows], marker="o", label="mean")
    for li in range(label_count):
        ax.plot([r[0] for r in rows], [r[2][li] for r in rows], alpha=0.5, label=f"label {li + 1}")
    ax.set_xlabel("cosine threshold")
    ax.set_ylabel("IoU")
    ax.set_ylim(-0.02, 1.02)
    ax.legend(fontsize=8)
    ax.grid(True, alpha=0.3)
    fig.tight_layout()
    fig.savefig(run_dir / "threshold_sweep.png", dpi=120, metadata={"Software": None})
    plt.close(fig)


def run_pipeline(
    config: RunConfig,
    scenario_dir: str | Path,
    train_slices: list[int],
    test_slices: list[int],
    run_name: str | None = None,
    refine: bool = True,
) -> RunResult:
    scenario = load_scenario(scenario_dir)
    train = _pick(scenario, train_slices, "train")
    tests = _pick(scenario, test_slices, "test")
    label_count = scenario.label_count

    if config.normalize_features:
        train = [SliceData(s.name, l2_normalize(s.features), s.mask, s.intensity) for s in train]
        tests = [SliceData(s.name, l2_normalize(s.features), s.mask, s.intensity) for s in tests]

    cfg_hash = config_hash(config)
    run_dir = Path(config.output_root) / (run_name or f"run_{cfg_hash}")
    run_dir.mkdir(parents=True, exist_ok=True)

    adapter = prepare_adapter(config, train, label_count)
    if adapter.kind == "classification":
        nn.write_model(adapter.model, run_dir / "model.pxn")
    elif adapter.kind == "contrastive":
        adapters.write_contrastive_model(adapter.model, run_dir / "model.pxc")

    result = RunResult(run_dir, config, None, {})  # report filled below
    iou_cases: dict[int, list[float]] = {l: [] for l in range(1, label_count + 1)}
    loc_cases: dict[int, list[metrics.LocalizationCase]] = {l: [] for l in range(1, label_count + 1)}

    for index, data in zip(test_slices, tests):
        slice_dir = run_dir / "slices" / data.name
        slice_dir.mkdir(parents=True, exist_ok=True)
        raw, _scores = adapter.localize(data)
        filtered = pipeline.filter_components(raw, config.connectivity, config.min_size)
        write_label_mask(filtered, slice_dir / "localized.pxm")

        landmarks: dict[int, tuple[int, int] | None] = {}
        prompt_sets: dict[int, pipeline.PromptSet] = {}
        for label in range(1, label_count + 1):
            lm, case = _landmark_cases(filtered, data.mask, label, data.name, config.connectivity)
            landmarks[label] = lm
            if case is not None:
                loc_cases[label].append(case)
            try:
                prompt_sets[label] = pipeline.select_prompts(
                    filtered, label, config.prompt_count, _slice_seed(config.seed, index, label)
                )
            except PipelineError:
                continue  # label absent after filtering: nothing to prompt
        result.landmarks[data.name] = landmarks
        result.prompt_counts[data.name] = {l: ps.count for l, ps in prompt_sets.items()}
        (slice_dir / "landmarks.json").write_text(
            json.dumps(
                {str(l): (list(lm) if lm is not None else None) for l, lm in landmarks.items()},
                indent=2,
                sort_keys=True,
            )
            + "\n"
        )
        if prompt_sets:
            request = pipeline.RefinerRequest(
                f"{data.name}.intensity.pxf", data.features.height, data.features.width,
                tuple(prompt_sets[l] for l in sorted(prompt_sets)),
            )
            pipeline.export_prompts(request, slice_dir / "prompts.json")

        result.localized[data.name] = filtered
        final = filtered
        if refine:
            refined = _refine_slice(data, filtered, config, prompt_sets)
            write_label_mask(refined, slice_dir / "refined.pxm")
            result.refined[data.name] = refined
            final = refined

        for label in range(1, label_count + 1):
            iou_cases[label].append(metrics.iou(final.labels == label, data.mask.labels == label))

    per_label = {}
    for label in range(1, label_count + 1):
        cases = loc_cases[label]
        per_label[label] = metrics.LabelMetrics(
            iou=float(np.mean(iou_cases[label])) if iou_cases[label] else None,
            localization_accuracy=(
                metrics.localization_accuracy(cases, config.radius) if cases else None
            ),
            cases=len(cases),
        )
    all_cases = [c for cs in loc_cases.values() for c in cs]
    all_ious = [v for vs in iou_cases.values() for v in vs]
    aggregate = metrics.LabelMetrics(
        iou=float(np.mean(all_ious)) if all_ious else None,
        localization_accuracy=(
            metrics.localization_accuracy(all_cases, config.radius) if all_cases else None
        ),
        cases=len(all_cases),
    )
    report = metrics.MetricReport(
        task="segmentation" if refine else "localization",
        adapter=config.adapter,
        per_label=per_label,
        aggregate=aggregate,
        radius=config.radius,
        seeds={"seed": config.seed},
        config_hash=cfg_hash,
    )
    metrics.emit_report(report, run_dir / "report.json")

    if config.adapter == "basic":
        _threshold_sweep(config, train[0], tests, label_count, run_dir)

    manifest = {
        "config": config.as_dict(),
        "config_hash": cfg_hash,
        "scenario": str(scenario.directory),
        "train_slices": [int(i) for i in train_slices],
        "test_slices": [int(i) for i in test_slices],
        "label_count": label_count,
        "refine": bool(refine),
        "artifacts": sorted(
            str(p.relative_to(run_dir)) for p in run_dir.rglob("*") if p.is_file() and p.name != "manifest.json"
        ),
        "created_at": time.strftime("%Y-%m-%dT%H:%M:%S", time.gmtime()),
    }
    (run_dir / "manifest.json").write_text(json.dumps(manifest, indent=2, sort_keys=True) + "\n")
    result.report = report
    result.manifest = manifest
    return result
