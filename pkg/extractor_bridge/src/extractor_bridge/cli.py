"""Command-line front end: export features, convert masks, run the segmenter."""

import argparse
import sys

from . import __version__
from .errors import BridgeError, InputError, PromptError
from .extractors import ExportJob, export_features
from .images import convert_mask
from .segmenter import refine_with_segmenter


def _size(text: str) -> tuple[int, int]:
    try:
        h, w = text.lower().split("x")
        return int(h), int(w)
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected HxW, got {text!r}") from None


def _cmd_export(args: argparse.Namespace) -> int:
    job = ExportJob(tuple(args.images), args.extractor, args.out, args.resolution)
    written = export_features(job)
    for path in written:
        print(path)
    print(f"exported {len(written)} feature map(s) with {args.extractor}")
    return 0


def _cmd_convert_mask(args: argparse.Namespace) -> int:
    path = convert_mask(args.image, args.out)
    print(f"wrote {path}")
    return 0


def _cmd_refine(args: argparse.Namespace) -> int:
    path = refine_with_segmenter(args.prompts, args.image, args.out, args.tolerance)
    print(f"wrote {path}")
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="extractor-bridge",
        description="File-level on-ramp for the pixel-feature localization toolkit.",
    )
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("export", help="extract patch features and write PXF1 maps")
    p.add_argument("images", nargs="+", metavar="IMAGE")
    p.add_argument("--extractor", default="patch-moments")
    p.add_argument("--out", default="features", metavar="DIR")
    p.add_argument("--resolution", type=_size, default=(64, 64), metavar="HxW")
    p.set_defaults(func=_cmd_export)

    p = sub.add_parser("convert-mask", help="turn an annotation image into a PXM1 mask")
    p.add_argument("image")
    p.add_argument("--out", required=True, metavar="FILE")
    p.set_defaults(func=_cmd_convert_mask)

    p = sub.add_parser("refine", help="segment prompted regions and write a PXM1 mask")
    p.add_argument("--prompts", required=True, metavar="FILE")
    p.add_argument("--image", required=True, metavar="FILE")
    p.add_argument("--out", required=True, metavar="FILE")
    p.add_argument("--tolerance", type=float, default=None,
                   help="intensity tolerance; default derives from the image range")
    p.set_defaults(func=_cmd_refine)

    return parser


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except PromptError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 4
    except (InputError, BridgeError, FileNotFoundError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 3


if __name__ == "__main__":
    sys.exit(main())
