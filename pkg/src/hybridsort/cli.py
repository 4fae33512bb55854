"""Command line entry point: ``track``, ``simulate``, ``evaluate``, ``ablate``, ``overlay``.

Exit codes: 0 success, 2 bad input (files, flags, config), 3 internal error.
Log verbosity comes from ``HYBRIDSORT_LOG_LEVEL`` (default WARNING).
"""
from __future__ import annotations

import argparse
import hashlib
import json
import logging
import os
import statistics
import sys
import time
from pathlib import Path
from typing import Optional, Sequence

from . import __version__
from .ablation import SUITES, ablate, make_suite, parse_grid
from .config import TOGGLES, TRACKERS, TrackerConfig, load_config
from .io_mot import (
    FormatError,
    _atomic_write,
    attach_embeddings,
    read_detections,
    read_embeddings,
    read_ground_truth,
    read_results,
    read_seqinfo,
    write_results,
)
from .kalman import KalmanError
from .metrics import FrameMismatchError, aggregate, evaluate, format_keyvalue, format_table
from .simulator import MOTIONS, ScenarioSpec, export, generate
from .tracker import TrackerInputError, make_tracker

log = logging.getLogger("hybridsort")

EXIT_OK = 0
EXIT_INPUT = 2
EXIT_INTERNAL = 3
MANIFEST_VERSION = 1

# Color tokens for overlays; an id always maps to palette[id % len(palette)].
PALETTE = (
    "#e6194b", "#3cb44b", "#4363d8", "#f58231", "#911eb4", "#46f0f0",
    "#f032e6", "#bcf60c", "#008080", "#9a6324", "#800000", "#000075",
)


class InputError(Exception):
    pass


def _sha256(path) -> str:
    h = hashlib.sha256()
    with open(path, "rb") as fh:
        for chunk in iter(lambda: fh.read(1 << 16), b""):
            h.update(chunk)
    return h.hexdigest()


def _write_json(path, doc) -> None:
    _atomic_write(path, json.dumps(doc, indent=2, sort_keys=True) + "\n")


def _read_config_doc(path) -> dict:
    """Config file, or the config section of a run manifest."""
    try:
        return load_config(path)
    except OSError as exc:
        raise InputError(f"cannot read config {path}: {exc}") from None
    except ValueError as exc:
        raise InputError(str(exc)) from None


def _tracker_config(args) -> TrackerConfig:
    cfg = TrackerConfig()
    if getattr(args, "config", None):
        cfg = _read_config_doc(args.config)["tracker"]
    changes = {}
    for flag, field in (
        ("tracker", "tracker"),
        ("lambda1", "lambda_velocity"),
        ("lambda2", "lambda_conf_stage1"),
        ("lambda2_stage2", "lambda_conf_stage2"),
        ("lambda3", "lambda_appearance"),
        ("gate", "gate"),
        ("high_thresh", "high_threshold"),
        ("low_thresh", "low_threshold"),
        ("min_hits", "min_hits"),
        ("max_age", "max_age"),
    ):
        val = getattr(args, flag, None)
        if val is not None:
            changes[field] = val
    try:
        cfg = cfg.replace(**changes)
        for item in getattr(args, "toggle", None) or []:
            name, sep, value = item.partition("=")
            if not sep or name not in TOGGLES or value not in ("on", "off"):
                raise InputError(f"bad --toggle {item!r}; expected <{'|'.join(TOGGLES)}>=<on|off>")
            cfg = cfg.with_toggle(name, value == "on")
    except ValueError as exc:
        raise InputError(str(exc)) from None
    return cfg


def _frame_count(det_path: Path, frames: dict, explicit: Optional[int]) -> int:
    if explicit is not None:
        return explicit
    seqinfo = det_path.parent / "seqinfo.ini"
    if seqinfo.exists():
        return read_seqinfo(seqinfo)
    return max(frames, default=0)


def cmd_track(args) -> int:
    cfg = _tracker_config(args)
    det_path = Path(args.dets)
    if cfg.appearance:
        if not args.embeddings:
            raise InputError("appearance is enabled but no --embeddings file was given")
        if not Path(args.embeddings).is_file():
            raise InputError(f"embedding file not found: {args.embeddings}")
    frames = read_detections(det_path)
    inputs = {"dets": {"path": str(det_path.resolve()), "sha256": _sha256(det_path)}}
    if args.embeddings:
        n_rows = sum(len(v) for v in frames.values())
        frames = attach_embeddings(frames, read_embeddings(args.embeddings, expected_rows=n_rows))
        inputs["embeddings"] = {"path": str(Path(args.embeddings).resolve()), "sha256": _sha256(args.embeddings)}
    n_frames = _frame_count(det_path, frames, args.frames)

    tracker = make_tracker(cfg)
    outputs = []
    per_frame = []
    for f in range(1, n_frames + 1):
        dets = frames.get(f, [])
        t0 = time.perf_counter()
        res = tracker.step(f, dets)
        per_frame.append(time.perf_counter() - t0)
        outputs.extend((f, o) for o in res)
    total = sum(per_frame)
    log.info("tracked %d frames, %d output rows, %.3fs association", n_frames, len(outputs), total)

    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    result_path = out / "results.txt"
    write_results(result_path, outputs)
    manifest = {
        "manifest_version": MANIFEST_VERSION,
        "command": "track",
        "tool_version": __version__,
        "config": {"schema_version": 1, "tracker": cfg.to_dict()},
        "inputs": inputs,
        "frames": n_frames,
        "seed": args.seed,
        "outputs": {"results": {"path": str(result_path.resolve()), "sha256": _sha256(result_path)}},
        "timing": {
            "association_seconds": total,
            "fps": n_frames / total if total > 0 else None,
            "per_frame_mean": statistics.fmean(per_frame) if per_frame else 0.0,
            "per_frame_median": statistics.median(per_frame) if per_frame else 0.0,
            "per_frame_max": max(per_frame, default=0.0),
        },
    }
    _write_json(out / "manifest.json", manifest)
    print(f"{len(outputs)} rows -> {result_path}")
    return EXIT_OK


def cmd_simulate(args) -> int:
    spec = ScenarioSpec()
    if args.config:
        loaded = _read_config_doc(args.config)["scenario"]
        if loaded is not None:
            spec = loaded
    elif args.suite:
        spec = SUITES[args.suite]
    changes = {}
    if args.seed is not None:
        changes["seed"] = args.seed
    if args.objects is not None:
        changes["n_objects"] = args.objects
    if args.frames is not None:
        changes["frame_count"] = args.frames
    if args.motion:
        changes["motions"] = tuple(args.motion)
    try:
        spec = spec.replace(**changes)
    except ValueError as exc:
        raise InputError(str(exc)) from None
    gt, dets = generate(spec)
    paths = export(gt, dets, args.out)
    manifest = {
        "manifest_version": MANIFEST_VERSION,
        "command": "simulate",
        "tool_version": __version__,
        "config": {"schema_version": 1, "tracker": TrackerConfig().to_dict(), "scenario": spec.to_dict()},
        "seed": spec.seed,
        "outputs": {k: {"path": str(p.resolve()), "sha256": _sha256(p)} for k, p in paths.items()},
    }
    _write_json(Path(args.out) / "manifest.json", manifest)
    print(f"{spec.frame_count} frames, {spec.n_objects} objects -> {args.out}")
    return EXIT_OK


def _evaluate_pair(gt_path: Path, res_path: Path, threshold: float):
    gt = read_ground_truth(gt_path)
    hyp = read_results(res_path)
    seqinfo = gt_path.parent / "seqinfo.ini"
    if seqinfo.exists():
        frame_range = range(1, read_seqinfo(seqinfo) + 1)
    else:
        frame_range = range(1, max((r.frame for r in gt), default=0) + 1)
    return evaluate(
        [(r.frame, r.object_id, r.box) for r in gt],
        [(r.frame, r.track_id, r.box) for r in hyp],
        threshold,
        frame_range=frame_range,
    )


def cmd_evaluate(args) -> int:
    if len(args.gt) != len(args.results):
        raise InputError(f"{len(args.gt)} --gt files but {len(args.results)} --results files")
    reports = {}
    for g, r in zip(args.gt, args.results):
        name = Path(g).parent.name or Path(g).stem
        if name in reports:
            name = f"{name}#{len(reports)}"
        reports[name] = _evaluate_pair(Path(g), Path(r), args.iou)
    total = aggregate(reports)
    if args.format == "kv":
        sys.stdout.write(format_keyvalue(total))
    else:
        rows = sorted(reports.items()) + [("OVERALL", total)]
        sys.stdout.write(format_table(rows))
    return EXIT_OK


def cmd_ablate(args) -> int:
    base = TrackerConfig() if args.tracker in (None, "hybrid_sort") else TrackerConfig(tracker=args.tracker).all_off()
    if args.config:
        base = _read_config_doc(args.config)["tracker"]
    try:
        grid = parse_grid(args.grid or [], base)
    except ValueError as exc:
        raise InputError(str(exc)) from None
    scenes = make_suite(args.suite, args.scenes, args.seed) if grid else []
    rows = ablate(grid, scenes, jobs=args.jobs)
    table = format_table(rows, label="config")
    sys.stdout.write(table)
    if args.out:
        doc = {
            "suite": args.suite,
            "scenes": args.scenes,
            "seed": args.seed,
            "tool_version": __version__,
            "rows": [{"label": label, "config": cfg.to_dict(), **rep.as_dict()} for (label, cfg), (_, rep) in zip(grid, rows)],
        }
        _write_json(args.out, doc)
    return EXIT_OK


def overlay_records(results, gt=None) -> list[dict]:
    """Rectangle records sorted by (frame, source, id); ``results`` first."""
    recs = []
    for source, rows in (("result", results), ("gt", gt or [])):
        for frame, oid, box in rows:
            recs.append({
                "frame": int(frame), "source": source, "id": int(oid),
                "x1": box.x1, "y1": box.y1, "x2": box.x2, "y2": box.y2,
                "color": PALETTE[int(oid) % len(PALETTE)],
                "label": f"{'' if source == 'result' else 'gt '}{int(oid)}",
            })
    order = {"result": 0, "gt": 1}
    recs.sort(key=lambda r: (r["frame"], order[r["source"]], r["id"], r["x1"], r["y1"]))
    return recs


def render_svg(records: Sequence[dict]) -> str:
    width = max([r["x2"] for r in records] + [1.0])
    height = max([r["y2"] for r in records] + [1.0])
    lines = [f'<svg xmlns="http://www.w3.org/2000/svg" width="{width:.0f}" height="{height:.0f}">']
    frame = None
    for r in records:
        if r["frame"] != frame:
            if frame is not None:
                lines.append("</g>")
            frame = r["frame"]
            lines.append(f'<g class="frame" data-frame="{frame}">')
        dash = ' stroke-dasharray="4 2"' if r["source"] == "gt" else ""
        lines.append(
            f'<rect x="{r["x1"]:.2f}" y="{r["y1"]:.2f}" width="{r["x2"] - r["x1"]:.2f}" '
            f'height="{r["y2"] - r["y1"]:.2f}" fill="none" stroke="{r["color"]}"{dash}/>'
        )
        lines.append(f'<text x="{r["x1"]:.2f}" y="{r["y1"]:.2f}" fill="{r["color"]}">{r["label"]}</text>')
    if frame is not None:
        lines.append("</g>")
    lines.append("</svg>")
    return "\n".join(lines) + "\n"


def cmd_overlay(args) -> int:
    results = [(r.frame, r.track_id, r.box) for r in read_results(args.results)]
    gt = [(r.frame, r.object_id, r.box) for r in read_ground_truth(args.gt)] if args.gt else None
    recs = overlay_records(results, gt)
    out = Path(args.out)
    out.parent.mkdir(parents=True, exist_ok=True)
    cols = ("frame", "source", "id", "x1", "y1", "x2", "y2", "color")
    csv_lines = [",".join(cols)]
    for r in recs:
        csv_lines.append(",".join(f"{r[c]:.2f}" if isinstance(r[c], float) else str(r[c]) for c in cols))
    _atomic_write(out.with_suffix(".csv"), "\n".join(csv_lines) + "\n")
    _atomic_write(out.with_suffix(".svg"), render_svg(recs))
    print(f"{len(recs)} rectangles -> {out.with_suffix('.csv')}, {out.with_suffix('.svg')}")
    return EXIT_OK


def _add_tracker_flags(p: argparse.ArgumentParser) -> None:
    p.add_argument("--config", help="JSON config file or a previous run manifest")
    p.add_argument("--tracker", choices=TRACKERS)
    p.add_argument("--toggle", action="append", metavar="NAME=on|off", help=f"one of {', '.join(TOGGLES)}")
    p.add_argument("--lambda1", type=float, help="velocity direction weight")
    p.add_argument("--lambda2", type=float, help="confidence weight, first stage")
    p.add_argument("--lambda2-stage2", type=float, help="confidence weight, low-confidence stage")
    p.add_argument("--lambda3", type=float, help="appearance weight")
    p.add_argument("--gate", type=float)
    p.add_argument("--high-thresh", type=float)
    p.add_argument("--low-thresh", type=float)
    p.add_argument("--min-hits", type=int)
    p.add_argument("--max-age", type=int)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="hybridsort", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("track", help="run a tracker over a MOT detection file")
    p.add_argument("--dets", required=True)
    p.add_argument("--embeddings")
    p.add_argument("--out", required=True, help="output directory")
    p.add_argument("--frames", type=int, help="sequence length (default: seqinfo.ini or last detection frame)")
    p.add_argument("--seed", type=int, help="recorded in the manifest; tracking itself is deterministic")
    _add_tracker_flags(p)
    p.set_defaults(func=cmd_track)

    p = sub.add_parser("simulate", help="write a synthetic sequence (gt.txt, det.txt, seqinfo.ini)")
    p.add_argument("--out", required=True)
    p.add_argument("--config", help="config file with a 'scenario' section")
    p.add_argument("--suite", choices=sorted(SUITES))
    p.add_argument("--seed", type=int)
    p.add_argument("--objects", type=int)
    p.add_argument("--frames", type=int)
    p.add_argument("--motion", action="append", choices=MOTIONS)
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("evaluate", help="score result files against ground truth")
    p.add_argument("--gt", action="append", required=True)
    p.add_argument("--results", action="append", required=True)
    p.add_argument("--iou", type=float, default=0.5)
    p.add_argument("--format", choices=("table", "kv"), default="table")
    p.set_defaults(func=cmd_evaluate)

    p = sub.add_parser("ablate", help="evaluate a toggle grid on a synthetic suite")
    p.add_argument("--suite", choices=sorted(SUITES), default="crossing_weave")
    p.add_argument("--scenes", type=int, default=200)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--grid", action="append", metavar="AXIS", help="e.g. tcm, rocm, similarity=iou,hmiou,wmiou")
    p.add_argument("--tracker", choices=TRACKERS)
    p.add_argument("--config")
    p.add_argument("--jobs", type=int, default=1)
    p.add_argument("--out", help="optional JSON dump of the table")
    p.set_defaults(func=cmd_ablate)

    p = sub.add_parser("overlay", help="CSV + SVG rectangles per frame")
    p.add_argument("--results", required=True)
    p.add_argument("--gt")
    p.add_argument("--out", required=True, help="output path prefix (.csv and .svg are added)")
    p.set_defaults(func=cmd_overlay)
    return parser


def main(argv: Optional[Sequence[str]] = None) -> int:
    logging.basicConfig(
        level=os.environ.get("HYBRIDSORT_LOG_LEVEL", "WARNING").upper(),
        format="%(levelname)s %(name)s: %(message)s",
    )
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except (InputError, FormatError, TrackerInputError, FrameMismatchError, FileNotFoundError, IsADirectoryError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INPUT
    except KalmanError as exc:
        print(f"internal error: {exc}", file=sys.stderr)
        return EXIT_INTERNAL
    except Exception as exc:  # noqa: BLE001
        log.debug("unhandled", exc_info=True)
        print(f"internal error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_INTERNAL


if __name__ == "__main__":
    sys.exit(main())
