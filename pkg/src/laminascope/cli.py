"""Command-line interface.

Exit codes: 0 success, 2 detection failure (a ``failed-*`` status),
1 usage, configuration or I/O error.
"""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

from . import evaluation, phantom, pipeline
from .config import ConfigError, load_config
from .imagecore import ImageIOError, load_image, save_image

EXIT_OK, EXIT_ERROR, EXIT_FAILED = 0, 1, 2
IMAGE_SUFFIXES = (".pgm", ".png")


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        raise UsageError(f"{self.prog}: error: {message}")


def _add_config_args(p: argparse.ArgumentParser) -> None:
    p.add_argument("--config", help="INI file (default: $LAMINA_SCOPE_CONFIG if set)")
    p.add_argument("--set", dest="overrides", action="append", default=[],
                   metavar="SECTION.KEY=VALUE", help="override one config key (repeatable)")
    p.add_argument("--mm-per-px", type=float, help="pixel pitch; same as --set pipeline.mm-per-px")
    p.add_argument("--method", choices=pipeline.METHODS, help="detection method")


def build_parser() -> argparse.ArgumentParser:
    ap = _Parser(prog="laminascope", description="Lamina detection and epidural depth "
                 "measurement in paramedian ultrasound.")
    sub = ap.add_subparsers(dest="command", required=True, parser_class=_Parser)

    p = sub.add_parser("detect", help="detect on one image")
    p.add_argument("--input", required=True)
    p.add_argument("--out", help="result JSON path (default: stdout)")
    p.add_argument("--overlay", help="write an overlay PNG here")
    _add_config_args(p)

    p = sub.add_parser("detect-seq", help="detect on every frame in a directory")
    p.add_argument("--input-dir", required=True)
    p.add_argument("--out", help="JSON array path (default: stdout)")
    _add_config_args(p)

    p = sub.add_parser("phantom", help="render a synthetic lamina image")
    p.add_argument("--out", required=True, help="image path (.pgm or .png)")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--spec", help="phantom spec JSON (seed flag still applies)")
    p.add_argument("--speckle-sigma", type=float)
    p.add_argument("--truth", help="ground-truth JSON path (default: <out>.truth.json)")

    p = sub.add_parser("bench", help="time the detection methods stage by stage")
    p.add_argument("--image", required=True)
    p.add_argument("--methods", default="main,alternative,baseline")
    p.add_argument("--repeats", type=int, default=5)
    p.add_argument("--json", help="also write the report as JSON")
    _add_config_args(p)

    p = sub.add_parser("eval", help="agreement statistics against manual depths")
    p.add_argument("--results-dir", required=True)
    p.add_argument("--manual", required=True, help="CSV with columns image_id, manual_mm")
    p.add_argument("--bins", type=int, default=4, help="bins for the normality test")
    p.add_argument("--json", help="also write the report as JSON")
    p.add_argument("--bland-altman", help="write Bland-Altman points as CSV")
    return ap


def _config(args) -> pipeline.PipelineConfig:
    overrides = list(args.overrides)
    if args.mm_per_px is not None:
        overrides.append(f"pipeline.mm-per-px={args.mm_per_px}")
    if args.method is not None:
        overrides.append(f"pipeline.method={args.method}")
    return load_config(args.config, overrides)


def _emit(text: str, path) -> None:
    if path:
        Path(path).write_text(text + "\n")
    else:
        sys.stdout.write(text + "\n")


def cmd_detect(args) -> int:
    cfg = _config(args)
    img = load_image(args.input)
    res = pipeline.detect(img, cfg)
    _emit(res.to_json(), args.out)
    if args.overlay:
        pipeline.save_overlay(img, res, args.overlay)
    if not res.ok:
        print(f"detection failed: {res.status}: {res.message}", file=sys.stderr)
        return EXIT_FAILED
    return EXIT_OK


def cmd_detect_seq(args) -> int:
    cfg = _config(args)
    d = Path(args.input_dir)
    if not d.is_dir():
        raise ImageIOError(f"not a directory: {d}")
    files = sorted(f for f in d.iterdir() if f.suffix.lower() in IMAGE_SUFFIXES)
    if not files:
        raise ImageIOError(f"no .pgm or .png frames in {d}")
    results = pipeline.detect_sequence([load_image(f) for f in files], cfg)
    payload = []
    for f, r in zip(files, results):
        item = r.to_dict()
        item["frame"] = f.name
        payload.append(item)
    _emit(json.dumps(payload, indent=2, sort_keys=True), args.out)
    bad = [f.name for f, r in zip(files, results) if not r.ok]
    if bad:
        print(f"detection failed on {len(bad)} frame(s): {', '.join(bad)}", file=sys.stderr)
        return EXIT_FAILED
    return EXIT_OK


def cmd_phantom(args) -> int:
    if args.spec:
        spec = phantom.PhantomSpec.from_dict(json.loads(Path(args.spec).read_text()))
    else:
        spec = phantom.PhantomSpec()
    spec.seed = args.seed
    if args.speckle_sigma is not None:
        spec.speckle_sigma = args.speckle_sigma
    img, truth = phantom.render(spec)
    save_image(img, args.out)
    out = Path(args.out)
    truth_path = args.truth or str(out.with_suffix("")) + ".truth.json"
    phantom.write_truth(truth, spec, truth_path)
    print(f"wrote {out} and {truth_path} (depth {truth.depth_px:.0f} px)", file=sys.stderr)
    return EXIT_OK


def cmd_bench(args) -> int:
    cfg = _config(args)
    img = load_image(args.image)
    methods = [m.strip() for m in args.methods.split(",") if m.strip()]
    for m in methods:
        if m not in pipeline.METHODS:
            raise UsageError(f"unknown method {m!r}; choose from {', '.join(pipeline.METHODS)}")
    report = evaluation.benchmark(methods, img, args.repeats, cfg)
    print(evaluation.format_benchmark(report))
    if args.json:
        Path(args.json).write_text(json.dumps(report, indent=2, sort_keys=True) + "\n")
    return EXIT_OK


def cmd_eval(args) -> int:
    report = evaluation.evaluate_directory(args.results_dir, args.manual, args.bins)
    pairs = report.pop("pairs")
    print(evaluation.format_accuracy_table({"automatic": report["accuracy"]}))
    for name in ("t_test", "normality"):
        print(f"{name}: " + ", ".join(f"{k}={v}" for k, v in report[name].items()))
    if report["skipped"]:
        print(f"skipped: {report['skipped']}")
    if args.json:
        Path(args.json).write_text(json.dumps(report, indent=2, sort_keys=True) + "\n")
    if args.bland_altman:
        evaluation.write_bland_altman_csv(pairs, args.bland_altman, report["ids"])
    return EXIT_OK


COMMANDS = {"detect": cmd_detect, "detect-seq": cmd_detect_seq, "phantom": cmd_phantom,
            "bench": cmd_bench, "eval": cmd_eval}


def run(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
        return COMMANDS[args.command](args)
    except UsageError as exc:
        print(str(exc), file=sys.stderr)
        return EXIT_ERROR
    except (ConfigError, ImageIOError, OSError, ValueError, json.JSONDecodeError) as exc:
        print(f"laminascope: error: {exc}", file=sys.stderr)
        return EXIT_ERROR


def main() -> None:
    sys.exit(run())
