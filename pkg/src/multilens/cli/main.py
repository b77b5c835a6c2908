"""``multilens`` command line.

Exit status: 0 on success, 2 on invalid input, 3 on runtime failure.
"""

from __future__ import annotations

import argparse
import json
import logging
import sys
from pathlib import Path

from ..annotio import TransformRegistry, load_registry, save_registry, write_text_atomic
from ..errors import InputError
from ..synth import SynthSpec
from . import commands
from .manifest import RunManifest

EXIT_OK = 0
EXIT_INPUT = 2
EXIT_RUNTIME = 3


def _scales(text: str) -> tuple[float, ...]:
    try:
        return tuple(float(s) for s in text.split(",") if s.strip())
    except ValueError:
        raise argparse.ArgumentTypeError(f"invalid scale list {text!r}") from None


def _offsets(text: str) -> list[tuple[float, float]]:
    out = []
    for chunk in text.split(";"):
        if not chunk.strip():
            continue
        try:
            dx, dy = (float(v) for v in chunk.split(","))
        except ValueError:
            raise argparse.ArgumentTypeError(f"invalid offset {chunk!r}, want dx,dy") from None
        out.append((dx, dy))
    return out


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--manifest", type=Path, help="run manifest (JSON)")
    common.add_argument("--registry", type=Path, help="transform registry (JSON)")
    common.add_argument("--out", type=Path, help="output directory")
    common.add_argument("--bit-depth", type=int, choices=(8, 12, 16))
    common.add_argument("--label-kind", choices=("bb", "mask"), default="bb")
    common.add_argument("--refine-n", type=int, default=None)
    common.add_argument("--scales", type=_scales, default=None)
    common.add_argument("--supersample", type=int, default=None)
    common.add_argument("--seed", type=int, default=0)
    common.add_argument("--json", action="store_true", help="machine-readable report on stdout")
    common.add_argument("-v", "--verbose", action="store_true")

    parser = argparse.ArgumentParser(
        prog="multilens",
        description="Register multilens camera bands and transfer labels between them.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("calibrate", parents=[common], help="estimate band transforms")
    p.add_argument("--bands", help="comma-separated target bands (default: all)")
    p.add_argument("--both-kinds", action="store_true", help="calibrate bb and mask")
    p.add_argument("--timing-repeats", type=int, default=5)

    p = sub.add_parser("transfer", parents=[common], help="translate reference labels to bands")
    p.add_argument("--source", type=Path, help="directory of <stem>__band<ref>.json files")

    sub.add_parser("compose-rgb", parents=[common], help="write artificial RGB images")

    p = sub.add_parser("backprop", parents=[common], help="push RGB labels into every band")
    p.add_argument("--rgb-labels", type=Path, required=True, help="directory of <stem>__rgb.json")

    p = sub.add_parser("evaluate", parents=[common], help="score predictions against ground truth")
    p.add_argument("--pred", type=Path, required=True)
    p.add_argument("--gt", type=Path, required=True)
    p.add_argument("--pattern", default="*.json")
    p.add_argument("--allow-extra-gt", action="store_true")

    p = sub.add_parser("synth", parents=[common], help="render a synthetic dataset")
    p.add_argument("--width", type=int, default=640)
    p.add_argument("--height", type=int, default=480)
    p.add_argument("--bands", default="1,2,3,4,5")
    p.add_argument("--reference", default="5")
    p.add_argument(
        "--offsets",
        type=_offsets,
        default=None,
        help="dx,dy;dx,dy;... for the non-reference bands in order (use --offsets=...)",
    )
    p.add_argument("--objects", type=int, default=16)
    p.add_argument("--noise", type=float, default=0.005, help="sigma as a fraction of range")
    p.add_argument("--calibration", type=int, default=4)
    p.add_argument("--evaluation", type=int, default=2)
    p.add_argument("--shift-mode", choices=("circular", "crop_fill"), default="crop_fill")
    return parser


def _require(args, *names):
    for name in names:
        if getattr(args, name) is None:
            raise InputError(f"--{name.replace('_', '-')} is required for {args.command}")


def _manifest(args) -> RunManifest:
    _require(args, "manifest")
    m = RunManifest.load(args.manifest)
    if args.bit_depth is not None:
        m.bit_depth = args.bit_depth
    return m


def _emit(args, payload: dict, table: str) -> None:
    if args.json:
        print(json.dumps(payload, indent=2))
    else:
        print(table)


def run(args) -> None:
    cmd = args.command
    if cmd == "calibrate":
        _require(args, "registry")
        m = _manifest(args)
        overrides = {
            k: v
            for k, v in (("n", args.refine_n), ("scales", args.scales), ("supersample", args.supersample))
            if v is not None
        }
        existing = load_registry(args.registry) if args.registry.exists() else TransformRegistry()
        bands = args.bands.split(",") if args.bands else None
        kinds = ("bb", "mask") if args.both_kinds else (args.label_kind,)
        registry, report = commands.cmd_calibrate(
            m, kinds, bands, overrides, args.timing_repeats, existing
        )
        save_registry(registry, args.registry)
        if args.out is not None:
            write_text_atomic(
                args.out / "calibration_report.json", json.dumps(report.as_dict(), indent=2) + "\n"
            )
        _emit(args, report.as_dict(), report.table())

    elif cmd == "transfer":
        _require(args, "registry", "out")
        paths = commands.cmd_transfer(
            _manifest(args), load_registry(args.registry), args.label_kind, args.out, args.source
        )
        _emit(args, {"written": [str(p) for p in paths]}, "\n".join(map(str, paths)))

    elif cmd == "compose-rgb":
        _require(args, "registry", "out")
        paths = commands.cmd_compose_rgb(
            _manifest(args), load_registry(args.registry), args.label_kind, args.out
        )
        _emit(args, {"written": [str(p) for p in paths]}, "\n".join(map(str, paths)))

    elif cmd == "backprop":
        _require(args, "registry", "out")
        paths = commands.cmd_backprop(
            _manifest(args), load_registry(args.registry), args.label_kind, args.rgb_labels, args.out
        )
        _emit(args, {"written": [str(p) for p in paths]}, "\n".join(map(str, paths)))

    elif cmd == "evaluate":
        report = commands.cmd_evaluate(
            args.pred,
            args.gt,
            args.label_kind,
            args.pattern,
            args.supersample or 8,
            args.allow_extra_gt,
        )
        if args.out is not None:
            write_text_atomic(
                args.out / "evaluation_report.json", json.dumps(report.as_dict(), indent=2) + "\n"
            )
        _emit(args, report.as_dict(), report.table())

    elif cmd == "synth":
        _require(args, "out")
        bands = tuple(b.strip() for b in args.bands.split(",") if b.strip())
        spec = SynthSpec(
            width=args.width,
            height=args.height,
            bands=bands,
            reference=args.reference,
            n_objects=args.objects,
            noise=args.noise,
            seed=args.seed,
            n_calibration=args.calibration,
            n_evaluation=args.evaluation,
            shift_mode=args.shift_mode,
            bit_depth=args.bit_depth or 12,
        )
        if args.offsets is not None:
            targets = [b for b in bands if b != args.reference]
            if len(args.offsets) != len(targets):
                raise InputError(
                    f"--offsets gives {len(args.offsets)} offsets for {len(targets)} bands"
                )
            spec.offsets = dict(zip(targets, args.offsets))
        mpath = commands.cmd_synth(spec, args.out)
        _emit(args, {"manifest": str(mpath)}, f"wrote dataset, manifest at {mpath}")


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:  # usage errors and --help
        return exc.code if isinstance(exc.code, int) else EXIT_INPUT
    logging.basicConfig(
        level=logging.INFO if args.verbose else logging.WARNING,
        format="%(levelname)s %(name)s: %(message)s",
    )
    try:
        run(args)
    except InputError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INPUT
    except Exception as exc:  # noqa: BLE001
        print(f"failed: {exc}", file=sys.stderr)
        return EXIT_RUNTIME
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
