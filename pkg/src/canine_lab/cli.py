"""Command-line entry points.

Subcommands: classify (geometry labels), kappa (agreement report),
metrics (confusion-matrix evaluation), distill (teacher/student
training), synth (dataset generation), serve (HTTP service).  Exit
codes: 0 success, 1 input error, 2 configuration error, 3
runtime/numeric failure.
"""

from __future__ import annotations

import argparse
import json
import socket
import sys

from . import agreement, distill, geometry, metrics
from .errors import (
    CanineLabError,
    InvalidConfig,
    InvalidParameter,
    InvalidProportions,
    InvalidTemperature,
    NonFiniteLoss,
)
from .geometry import MERGE3_PRESETS, DEFAULT_MERGE3_PRESET, MergeMap3, Space


def _write_json(doc: dict, path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(doc, fh, indent=2, sort_keys=True)
        fh.write("\n")


def _comma_floats(text: str) -> tuple[float, ...]:
    try:
        return tuple(float(v) for v in text.split(","))
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated numbers, got {text!r}")


# ---------------------------------------------------------------------------
# subcommand implementations
# ---------------------------------------------------------------------------


def cmd_classify(args) -> int:
    space = Space(args.space.upper())
    merge = MergeMap3.from_preset(args.preset)
    groups = geometry.load_annotations(args.inp)
    labeled = errors = 0
    with open(args.out, "w", encoding="utf-8") as fh:
        for radiograph_id, cases in groups:
            for case in cases:
                line = {"radiograph": radiograph_id, "case": case.case_id}
                try:
                    line["label"] = geometry.classify(case, space, merge, args.eps).value
                    labeled += 1
                except geometry.GeometryError as exc:
                    line["error"] = str(exc)
                    errors += 1
                fh.write(json.dumps(line, sort_keys=True) + "\n")
    print(f"classified {labeled} case(s), {errors} error(s) -> {args.out}")
    return 0


def cmd_kappa(args) -> int:
    records = agreement.load_ratings(args.inp)
    grouping = None
    if args.grouping:
        with open(args.grouping, encoding="utf-8") as fh:
            grouping = {str(k): str(v) for k, v in json.load(fh).items()}
    report = agreement.study_tables(
        records, grouping, bootstrap_b=args.bootstrap, seed=args.seed
    )
    _write_json(report, args.out)
    if args.text:
        print(agreement.render_study_tables(report))
    else:
        print(f"agreement report -> {args.out}")
    return 0


def cmd_metrics(args) -> int:
    _, true, pred = metrics.load_predictions(args.inp)
    both, order = metrics.labels_to_indices(list(true) + list(pred))
    report = metrics.evaluate_labels(
        both[: len(true)],
        both[len(true):],
        k=len(order),
        class_names=order,
        class_values=args.values,
    )
    if args.reference:
        with open(args.reference, encoding="utf-8") as fh:
            report.compare(json.load(fh), tolerance=args.tolerance)
    with open(args.out, "w", encoding="utf-8") as fh:
        fh.write(report.to_json(sort_keys=True) + "\n")
    if args.text:
        print(report.to_text())
    else:
        print(f"metric report ({len(true)} predictions) -> {args.out}")
    return 0


def cmd_synth(args) -> int:
    samples = distill.synth_generate(
        n=args.n,
        proportions=args.proportions,
        sigma=args.sigma,
        n_features=args.features,
        seed=args.seed,
    )
    distill.save_manifest(samples, args.out)
    shares = {name: 0 for name in distill.THREE_LABELS}
    for s in samples:
        shares[s.label.value] += 1
    print(f"wrote {len(samples)} samples -> {args.out} " +
          " ".join(f"{k}={v}" for k, v in shares.items()))
    return 0


def cmd_distill(args) -> int:
    samples = distill.load_manifest(args.manifest)
    doc = {}
    if args.config:
        with open(args.config, encoding="utf-8") as fh:
            doc = json.load(fh)
    if args.seed is not None:
        doc["seed"] = args.seed
    try:
        config = distill.DistillConfig(**doc)
    except TypeError as exc:
        raise InvalidConfig(str(exc))

    train, val = distill.split(samples, distill.SplitSpec(seed=config.seed))
    print(f"split: n={len(samples)} train={len(train)} val={len(val)}")

    out = args.out_dir
    out.mkdir(parents=True, exist_ok=True)

    teacher_history: list = []
    teacher = distill.train_teacher(train, config, val, teacher_history)
    teacher_acc = distill.model_accuracy(teacher, val)
    print(f"teacher validation accuracy: {teacher_acc:.4f}")

    student_history: list = []
    student = distill.distill_student(teacher, train, config, val, student_history)
    student_acc = distill.model_accuracy(student, val)
    print(f"student validation accuracy: {student_acc:.4f}")

    distill.save_model(teacher, out / "teacher_model.json", config)
    distill.save_model(student, out / "student_model.json", config)
    distill.save_history(teacher_history, out / "teacher_history.jsonl")
    distill.save_history(student_history, out / "student_history.jsonl")

    names = distill.THREE_LABELS
    reports = {}
    for tag, model in (("teacher", teacher), ("student", student)):
        _, probs = distill.forward_batch(model, distill.model_inputs(model, val))
        pred = probs.argmax(axis=1)
        true = distill.label_indices(val)
        reports[tag] = metrics.evaluate_labels(true, pred, k=3, class_names=names)
        with open(out / f"{tag}_metrics.json", "w", encoding="utf-8") as fh:
            fh.write(reports[tag].to_json(sort_keys=True) + "\n")
        with open(out / f"{tag}_predictions.jsonl", "w", encoding="utf-8") as fh:
            for sample, p in zip(val, pred):
                fh.write(json.dumps(
                    {"case": sample.case_id, "true": sample.label.value,
                     "pred": names[int(p)]}, sort_keys=True) + "\n")

    _write_json(
        {
            "n": len(samples),
            "n_train": len(train),
            "n_val": len(val),
            "seed": config.seed,
            "teacher_val_accuracy": teacher_acc,
            "student_val_accuracy": student_acc,
        },
        out / "summary.json",
    )
    print(f"artifacts -> {out}")
    return 0


def cmd_serve(args) -> int:
    import uvicorn

    from .server import create_app

    with socket.socket() as probe:
        try:
            probe.bind((args.host, args.port))
        except OSError as exc:
            print(f"cannot bind {args.host}:{args.port}: {exc}", file=sys.stderr)
            return 3
    app = create_app(args.studies, static_dir=args.static)
    uvicorn.run(app, host=args.host, port=args.port, log_level="warning")
    return 0


# ---------------------------------------------------------------------------
# parser
# ---------------------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="canine-lab",
        description="Sector classification lab: geometry, agreement, distillation.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("classify", help="label annotated cases by sector")
    p.add_argument("--in", dest="inp", required=True, help="annotation JSON file")
    p.add_argument("--out", required=True, help="output labels JSONL")
    p.add_argument("--space", choices=("five", "four", "three"), default="five")
    p.add_argument("--preset", choices=sorted(MERGE3_PRESETS),
                   default=DEFAULT_MERGE3_PRESET, help="5-to-3 sector merge preset")
    p.add_argument("--eps", type=float, default=geometry.DEFAULT_EPS,
                   help="tie band half-width for on-boundary points")
    p.set_defaults(func=cmd_classify)

    p = sub.add_parser("kappa", help="agreement report from a ratings log")
    p.add_argument("--in", dest="inp", required=True, help="ratings JSONL")
    p.add_argument("--out", required=True, help="output report JSON")
    p.add_argument("--grouping", help="JSON file mapping rater id to group")
    p.add_argument("--bootstrap", type=int, default=1000,
                   help="bootstrap replicates for Fleiss CIs")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--text", action="store_true", help="print the table rendering")
    p.set_defaults(func=cmd_kappa)

    p = sub.add_parser("metrics", help="evaluate a predictions file")
    p.add_argument("--in", dest="inp", required=True, help="predictions JSONL")
    p.add_argument("--out", required=True, help="output report JSON")
    p.add_argument("--values", type=_comma_floats,
                   help="ordinal class codes (default 1..k)")
    p.add_argument("--reference", help="JSON of externally reported values to cross-check")
    p.add_argument("--tolerance", type=float, default=0.005,
                   help="allowed |computed - reference| before a note is emitted")
    p.add_argument("--text", action="store_true", help="print the text rendering")
    p.set_defaults(func=cmd_metrics)

    p = sub.add_parser("synth", help="generate a synthetic dataset manifest")
    p.add_argument("--out", required=True, help="output manifest CSV")
    p.add_argument("--n", type=int, default=1528)
    p.add_argument("--proportions", type=_comma_floats,
                   default=distill.DEFAULT_PROPORTIONS, help="three class shares")
    p.add_argument("--sigma", type=float, default=0.05, help="feature noise")
    p.add_argument("--features", type=int, default=12, help="image-feature dimension")
    p.add_argument("--seed", type=int, default=0)
    p.set_defaults(func=cmd_synth)

    p = sub.add_parser("distill", help="train teacher and distilled student")
    p.add_argument("--manifest", required=True, help="dataset manifest CSV")
    p.add_argument("--config", help="JSON file of DistillConfig fields")
    p.add_argument("--seed", type=int, help="overrides the config seed")
    p.add_argument("--out-dir", type=_path_arg, required=True,
                   help="directory for models, logs, and reports")
    p.set_defaults(func=cmd_distill)

    p = sub.add_parser("serve", help="run the study HTTP service")
    p.add_argument("--studies", required=True, help="studies directory")
    p.add_argument("--host", default="127.0.0.1")
    p.add_argument("--port", type=int, default=8000)
    p.add_argument("--static", help="static frontend directory to serve at /")
    p.set_defaults(func=cmd_serve)

    return parser


def _path_arg(text: str):
    from pathlib import Path

    return Path(text)


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except (InvalidConfig, InvalidTemperature, InvalidProportions, InvalidParameter) as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2
    except NonFiniteLoss as exc:
        print(f"numeric failure: {exc}", file=sys.stderr)
        return 3
    except (OSError, json.JSONDecodeError, CanineLabError) as exc:
        print(f"input error: {exc}", file=sys.stderr)
        return 1
    except Exception as exc:  # unexpected: runtime failure
        print(f"runtime failure: {exc!r}", file=sys.stderr)
        return 3


if __name__ == "__main__":
    sys.exit(main())
