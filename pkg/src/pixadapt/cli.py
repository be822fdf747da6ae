"""Command-line front end.

Subcommands: ``synth`` (build a fixture scenario), ``train`` (fit an
adapter and save it), ``localize`` (run the pipeline without refinement),
``segment`` (full pipeline with the flood-fill refiner), ``eval`` (rescore
a finished run directory), ``inspect`` (describe any artifact file).

Exit codes: 0 success, 2 configuration problems, 3 bad or missing data,
4 pipeline failures.
"""

from __future__ import annotations

import argparse
import json
import struct
import sys
from pathlib import Path

import numpy as np

from . import __version__, adapters, metrics, nn, pipeline, synth
from .config import RunConfig, resolve_config
from .errors import ConfigError, DataError, PipelineError
from .formats import read_feature_map, read_label_mask
from .runner import load_scenario, prepare_adapter, run_pipeline


def _int_tuple(text: str) -> tuple[int, ...]:
    try:
        return tuple(int(part) for part in text.split(",") if part.strip())
    except ValueError as exc:
        raise argparse.ArgumentTypeError(f"expected comma-separated integers, got {text!r}") from exc


def _int_list(text: str) -> list[int]:
    return list(_int_tuple(text))


def _add_config_flags(parser: argparse.ArgumentParser) -> None:
    """One flag per configuration key; unset flags fall back to the config
    file and then to the built-in defaults."""
    g = parser.add_argument_group("configuration")
    g.add_argument("--config", metavar="FILE", help="JSON config file merged under the flags")
    g.add_argument("--adapter", choices=("basic", "classification", "contrastive"))
    g.add_argument("--threshold", type=float, help="cosine cut for the basic adapter, in [-1, 1]")
    g.add_argument("--score-reduction", choices=("mean", "max"), dest="score_reduction")
    g.add_argument("--k-references", type=int, dest="k_references", help="reference pixels per label")
    g.add_argument("--pairs-per-label", type=int, dest="pairs_per_label")
    g.add_argument("--min-negative-offset", type=int, dest="min_negative_offset",
                   help="least Chebyshev distance from a negative partner to the RoI")
    g.add_argument("--background-margin", type=float, dest="background_margin")
    g.add_argument("--normalize-features", action="store_true", default=None, dest="normalize_features")
    g.add_argument("--epochs", type=int)
    g.add_argument("--batch-size", type=int, dest="batch_size")
    g.add_argument("--learning-rate", type=float, dest="learning_rate")
    g.add_argument("--embed-dim", type=int, dest="embed_dim")
    g.add_argument("--clf-hidden", type=_int_tuple, dest="clf_hidden", metavar="N,N,...")
    g.add_argument("--twin-hidden", type=_int_tuple, dest="twin_hidden", metavar="N,N,...")
    g.add_argument("--head-hidden", type=_int_tuple, dest="head_hidden", metavar="N,N,...")
    g.add_argument("--connectivity", type=int, choices=(4, 8))
    g.add_argument("--min-size", type=int, dest="min_size", help="drop smaller components; 0 disables")
    g.add_argument("--prompt-count", type=int, dest="prompt_count")
    g.add_argument("--refine-tolerance", type=float, dest="refine_tolerance")
    g.add_argument("--radius", type=float, help="hit radius in pixels for landmark accuracy")
    g.add_argument("--seed", type=int)
    g.add_argument("--output-root", dest="output_root")


_CONFIG_KEYS = (
    "adapter", "threshold", "score_reduction", "k_references", "pairs_per_label",
    "min_negative_offset", "background_margin", "normalize_features", "epochs",
    "batch_size", "learning_rate", "embed_dim", "clf_hidden", "twin_hidden",
    "head_hidden", "connectivity", "min_size", "prompt_count", "refine_tolerance",
    "radius", "seed", "output_root",
)


def _config_from_args(args: argparse.Namespace) -> RunConfig:
    overrides = {key: getattr(args, key, None) for key in _CONFIG_KEYS}
    return resolve_config(args.config, overrides)


def _cmd_synth(args: argparse.Namespace) -> int:
    if args.spec:
        spec = synth.read_scenario_spec(args.spec)
        params: dict = {}
    elif args.scenario == "separable":
        spec = synth.separable_scenario(args.seed, args.height, args.width, args.dim, args.slices)
        params = {}
    elif args.scenario == "confound":
        spec, params = synth.confound_scenario(args.seed, args.height, args.width, args.dim, args.slices)
    elif args.scenario == "two-intensity":
        spec = synth.two_intensity_scenario(args.seed, args.height, args.width, max(2, args.dim))
        params = {}
    else:
        raise ConfigError("pass --scenario NAME or --spec FILE")
    manifest = synth.materialize_scenario(spec, args.out, params)
    print(f"wrote {len(manifest['slices'])} slices ({spec.label_count} labels) to {args.out}")
    return 0


def _cmd_train(args: argparse.Namespace) -> int:
    config = _config_from_args(args)
    if config.adapter == "basic":
        raise ConfigError("the basic adapter keeps no trained state; nothing to save")
    scenario = load_scenario(args.scenario_dir)
    train = [scenario.slices[i] for i in args.train if 0 <= i < len(scenario.slices)]
    if len(train) != len(args.train):
        raise ConfigError(f"train slices {args.train} out of range for {len(scenario.slices)} slices")
    adapter = prepare_adapter(config, train, scenario.label_count)
    out = Path(args.out)
    out.parent.mkdir(parents=True, exist_ok=True)
    if config.adapter == "classification":
        nn.write_model(adapter.model, out)
    else:
        adapters.write_contrastive_model(adapter.model, out)
    print(f"trained {config.adapter} adapter on {len(train)} slices -> {out}")
    return 0


def _run(args: argparse.Namespace, refine: bool) -> int:
    config = _config_from_args(args)
    result = run_pipeline(
        config, args.scenario_dir, args.train, args.test, run_name=args.run_name, refine=refine
    )
    print(metrics.render_table(result.report))
    print(f"run directory: {result.run_dir}")
    return 0


def _cmd_eval(args: argparse.Namespace) -> int:
    run_dir = Path(args.run_dir)
    manifest_path = run_dir / "manifest.json"
    if not manifest_path.exists():
        raise FileNotFoundError(f"no such file: {manifest_path}")
    manifest = json.loads(manifest_path.read_text())
    config = resolve_config(overrides=manifest["config"])
    scenario = load_scenario(args.scenario_dir or manifest["scenario"])
    label_count = scenario.label_count

    per_label_iou: dict[int, list[float]] = {l: [] for l in range(1, label_count + 1)}
    loc_cases: dict[int, list[metrics.LocalizationCase]] = {l: [] for l in range(1, label_count + 1)}
    for index in manifest["test_slices"]:
        data = scenario.slices[index]
        slice_dir = run_dir / "slices" / data.name
        localized = read_label_mask(slice_dir / "localized.pxm")
        refined_path = slice_dir / "refined.pxm"
        final = read_label_mask(refined_path) if refined_path.exists() else localized
        for label in range(1, label_count + 1):
            per_label_iou[label].append(
                metrics.iou(final.labels == label, data.mask.labels == label)
            )
            pred_lm = pipeline.landmark_from_mask(localized, label, config.connectivity)
            true_lm = pipeline.landmark_from_mask(data.mask, label, config.connectivity)
            if true_lm is not None:
                loc_cases[label].append(metrics.LocalizationCase(pred_lm, true_lm, label, data.name))

    per_label = {
        label: metrics.LabelMetrics(
            iou=float(np.mean(vals)) if vals else None,
            localization_accuracy=(
                metrics.localization_accuracy(loc_cases[label], config.radius)
                if loc_cases[label] else None
            ),
            cases=len(loc_cases[label]),
        )
        for label, vals in per_label_iou.items()
    }
    all_cases = [c for cs in loc_cases.values() for c in cs]
    all_ious = [v for vs in per_label_iou.values() for v in vs]
    report = metrics.MetricReport(
        task="segmentation" if manifest.get("refine") else "localization",
        adapter=config.adapter,
        per_label=per_label,
        aggregate=metrics.LabelMetrics(
            iou=float(np.mean(all_ious)) if all_ious else None,
            localization_accuracy=(
                metrics.localization_accuracy(all_cases, config.radius) if all_cases else None
            ),
            cases=len(all_cases),
        ),
        radius=config.radius,
        seeds={"seed": config.seed},
        config_hash=manifest["config_hash"],
    )
    print(metrics.render_table(report))
    if args.out:
        paths = metrics.emit_report(report, args.out)
        print(f"wrote {paths['json']}")
    return 0


def _describe_mlp(model) -> list[str]:
    dims = " -> ".join([str(model.in_dim), *[str(s.out_dim) for s in model.specs]])
    params = sum(w.size + b.size for w, b in zip(model.weights, model.biases))
    return [f"layers: {dims}", f"parameters: {params}"]


def _cmd_inspect(args: argparse.Namespace) -> int:
    path = Path(args.path)
    if not path.exists():
        raise FileNotFoundError(f"no such file: {path}")
    if path.suffix == ".json":
        payload = json.loads(path.read_text())
        print(f"{path}: JSON with keys {sorted(payload)}" if isinstance(payload, dict)
              else f"{path}: JSON array of {len(payload)} items")
        return 0
    magic = path.open("rb").read(4)
    lines = [f"{path}: {magic.decode('ascii', 'replace')}"]
    if magic == b"PXF1":
        fmap = read_feature_map(path)
        lines.append(f"shape: {fmap.height} x {fmap.width} x {fmap.dim}")
        lines.append(
            f"range: [{fmap.data.min():.4f}, {fmap.data.max():.4f}], mean {fmap.data.mean():.4f}"
        )
    elif magic == b"PXM1":
        mask = read_label_mask(path)
        lines.append(f"shape: {mask.height} x {mask.width}, labels up to {mask.label_count}")
        counts = np.bincount(mask.labels.ravel(), minlength=mask.label_count + 1)
        lines.extend(f"label {l}: {int(c)} px" for l, c in enumerate(counts))
    elif magic == b"PXN1":
        lines.extend(_describe_mlp(nn.read_model(path)))
    elif magic == b"PXC1":
        model = adapters.read_contrastive_model(path)
        lines.append(f"pair classes: {model.pair_class_count}")
        lines.append("twin: " + "; ".join(_describe_mlp(model.twin)))
        lines.append("head: " + "; ".join(_describe_mlp(model.head)))
    else:
        raise DataError(f"{path}: unrecognized magic {magic!r}")
    print("\n".join(lines))
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="pixadapt",
        description="Few-shot region localization over pixel-level feature maps.",
    )
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("synth", help="materialize a synthetic scenario directory")
    p.add_argument("--scenario", choices=("separable", "confound", "two-intensity"))
    p.add_argument("--spec", metavar="FILE", help="scenario spec JSON instead of a builtin")
    p.add_argument("--out", required=True, metavar="DIR")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--height", type=int, default=64)
    p.add_argument("--width", type=int, default=64)
    p.add_argument("--dim", type=int, default=32)
    p.add_argument("--slices", type=int, default=6)
    p.set_defaults(func=_cmd_synth)

    p = sub.add_parser("train", help="fit an adapter and write the model file")
    p.add_argument("--scenario-dir", required=True)
    p.add_argument("--train", type=_int_list, required=True, metavar="I,J,...")
    p.add_argument("--out", required=True, metavar="FILE")
    _add_config_flags(p)
    p.set_defaults(func=_cmd_train)

    for name, refine, blurb in (
        ("localize", False, "localize test slices (no refinement)"),
        ("segment", True, "full pipeline including flood-fill refinement"),
    ):
        p = sub.add_parser(name, help=blurb)
        p.add_argument("--scenario-dir", required=True)
        p.add_argument("--train", type=_int_list, required=True, metavar="I,J,...")
        p.add_argument("--test", type=_int_list, required=True, metavar="I,J,...")
        p.add_argument("--run-name", dest="run_name")
        _add_config_flags(p)
        p.set_defaults(func=lambda a, r=refine: _run(a, r))

    p = sub.add_parser("eval", help="rescore a finished run directory")
    p.add_argument("--run-dir", required=True)
    p.add_argument("--scenario-dir", help="defaults to the scenario recorded in the manifest")
    p.add_argument("--out", metavar="FILE", help="also write report JSON/table/CSV/figure here")
    p.set_defaults(func=_cmd_eval)

    p = sub.add_parser("inspect", help="describe a feature map, mask, model, or JSON artifact")
    p.add_argument("path")
    p.set_defaults(func=_cmd_inspect)

    return parser


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except ConfigError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except (DataError, FileNotFoundError, struct.error) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 3
    except PipelineError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 4


if __name__ == "__main__":
    sys.exit(main())
