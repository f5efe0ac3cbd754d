"""Command-line surface: track, hcp, eval, synth, simulate and plot.

Every subcommand writes only inside its declared output location and
drops a manifest recording inputs, the effective configuration, the
seed and a checksum per output file.

Exit codes: 0 success, 1 evaluation or validation failure, 2 usage or
I/O error. The environment variable RESUSTRACK_CONFIG names a default
pipeline config file; an explicit --config beats it and --param
key=value flags beat both.
"""

from __future__ import annotations

import argparse
import hashlib
import json
import os
import sys
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass, field
from pathlib import Path

import numpy as np
from PIL import Image

from . import __version__
from .core import (
    Episode,
    ObjectClass,
    PipelineConfig,
    StreamError,
    TRACKED_CLASSES,
    apply_nms,
    load_config_file,
    parse_detection_streams,
    serialize_detection_stream,
)
from .hcp import hcp_timeline
from .metrics import (
    build_report,
    evaluate_detections,
    format_annotations,
    format_report_text,
    parse_annotations,
    parse_box_ground_truth,
    parse_box_predictions,
)
from .plotting import render_timeline_plot
from .simulate import generate_episode, load_scenario, true_boxes
from .synthgen import (
    ObjectMask,
    SynthConfig,
    extract_mask,
    scene_for_index,
    split_image,
)
from .trackpost import track_object_stages

CONFIG_ENV_VAR = "RESUSTRACK_CONFIG"
IMAGE_SUFFIXES = (".png", ".jpg", ".jpeg", ".bmp")


class CliError(Exception):
    """Fatal CLI failure carrying its exit code."""

    def __init__(self, message: str, code: int = 1):
        super().__init__(message)
        self.code = code


@dataclass
class RunManifest:
    """Reproducibility record emitted by every subcommand run."""

    command: str
    version: str
    inputs: list[str]
    config: dict
    seed: int | None = None
    outputs: dict[str, str] = field(default_factory=dict)
    extra: dict = field(default_factory=dict)

    def add_output(self, root: Path, path: Path):
        digest = hashlib.sha256(path.read_bytes()).hexdigest()
        self.outputs[str(path.relative_to(root))] = digest

    def write(self, path: Path):
        record = asdict(self)
        record["outputs"] = dict(sorted(record["outputs"].items()))
        if not record["extra"]:
            del record["extra"]
        path.write_text(json.dumps(record, indent=2, default=str) + "\n",
                        encoding="utf-8")


def _fmt6(value: float) -> str:
    return f"{value:.6f}"


def _fmt_pixels(value: float) -> str:
    return str(int(value)) if float(value).is_integer() else _fmt6(value)


def _require_file(path: str) -> Path:
    p = Path(path)
    if not p.is_file():
        raise CliError(f"input file not found: {path}", code=2)
    return p


def _require_dir(path: str) -> Path:
    p = Path(path)
    if not p.is_dir():
        raise CliError(f"input directory not found: {path}", code=2)
    return p


def _parse_params(pairs: list[str]) -> dict:
    values = {}
    for pair in pairs or []:
        if "=" not in pair:
            raise CliError(f"--param expects key=value, got {pair!r}", code=2)
        key, _, value = pair.partition("=")
        values[key.strip()] = value.strip()
    return values


def _pipeline_config(args) -> PipelineConfig:
    cfg = PipelineConfig()
    config_path = getattr(args, "config", None) or os.environ.get(CONFIG_ENV_VAR)
    if config_path:
        cfg = cfg.with_overrides(load_config_file(_require_file(config_path)))
    cfg = cfg.with_overrides(_parse_params(getattr(args, "param", None)))
    return cfg


def _load_episodes(path: Path, cfg: PipelineConfig) -> list[Episode]:
    episodes = parse_detection_streams(path.read_text(encoding="utf-8"))
    if cfg.apply_nms:
        episodes = [apply_nms(e, cfg.t_o, cfg.t_iou) for e in episodes]
    return episodes


# ---------------------------------------------------------------------------
# track

def _map_episodes(episodes, worker, workers: int):
    """Apply a per-episode writer, optionally across a thread pool.

    Episode outputs are disjoint files, so concurrent runs cannot
    contend; results come back in episode order either way.
    """
    if workers > 1 and len(episodes) > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            return list(pool.map(worker, episodes))
    return [worker(e) for e in episodes]


def _cmd_track(args) -> int:
    cfg = _pipeline_config(args)
    in_path = _require_file(args.input)
    out_dir = Path(args.out)
    episodes = _load_episodes(in_path, cfg)
    out_dir.mkdir(parents=True, exist_ok=True)

    def write_episode(episode) -> list[Path]:
        written = []
        for cls in TRACKED_CLASSES:
            stages = track_object_stages(episode, cls, cfg)
            track_path = out_dir / f"{episode.episode_id}_track_{cls.name}.csv"
            lines = ["frame,class,box_x,box_y,box_w,box_h"]
            for frame, box in zip(episode.frames, stages.timeline.boxes):
                if box is None:
                    lines.append(f"{frame.frame_index},{cls.name},,,,")
                else:
                    lines.append(
                        f"{frame.frame_index},{cls.name},{_fmt6(box.x)},"
                        f"{_fmt6(box.y)},{_fmt6(box.w)},{_fmt6(box.h)}")
            track_path.write_text("\n".join(lines) + "\n", encoding="utf-8")
            written.append(track_path)

            if args.emit_locate:
                loc_path = out_dir / f"{episode.episode_id}_locate_{cls.name}.csv"
                loc_lines = ["frame,x_c,y_c"]
                raw = stages.raw
                for frame, x, y in zip(episode.frames, raw.x, raw.y):
                    if np.isnan(x):
                        loc_lines.append(f"{frame.frame_index},,")
                    else:
                        loc_lines.append(
                            f"{frame.frame_index},{_fmt6(x)},{_fmt6(y)}")
                loc_path.write_text("\n".join(loc_lines) + "\n", encoding="utf-8")
                written.append(loc_path)
        return written

    manifest = RunManifest("track", __version__, [str(in_path)], cfg.as_dict())
    for paths in _map_episodes(episodes, write_episode, args.workers):
        for path in paths:
            manifest.add_output(out_dir, path)
    manifest.write(out_dir / "manifest.json")
    return 0


# ---------------------------------------------------------------------------
# hcp

def _cmd_hcp(args) -> int:
    cfg = _pipeline_config(args)
    in_path = _require_file(args.input)
    out_dir = Path(args.out)
    episodes = _load_episodes(in_path, cfg)
    out_dir.mkdir(parents=True, exist_ok=True)

    def write_episode(episode) -> list[Path]:
        timeline = hcp_timeline(episode, cfg)
        path = out_dir / f"{episode.episode_id}_hcp.csv"
        lines = ["frame,nh,nh_smooth,nhcp"]
        for frame, nh, sm, pred in zip(
                episode.frames, timeline.counts, timeline.smoothed, timeline.providers):
            lines.append(f"{frame.frame_index},{nh},{_fmt6(sm)},{pred}")
        path.write_text("\n".join(lines) + "\n", encoding="utf-8")
        return [path]

    manifest = RunManifest("hcp", __version__, [str(in_path)], cfg.as_dict())
    for paths in _map_episodes(episodes, write_episode, args.workers):
        for path in paths:
            manifest.add_output(out_dir, path)
    manifest.write(out_dir / "manifest.json")
    return 0


# ---------------------------------------------------------------------------
# eval

def _read_hcp_csv(path: Path) -> np.ndarray:
    lines = path.read_text(encoding="utf-8").splitlines()
    if not lines or lines[0] != "frame,nh,nh_smooth,nhcp":
        raise CliError(f"{path}: not a provider-count CSV", code=2)
    try:
        return np.array([int(line.split(",")[3]) for line in lines[1:]], dtype=np.int64)
    except (IndexError, ValueError) as exc:
        raise CliError(f"{path}: malformed row ({exc})", code=1)


def _cmd_eval(args) -> int:
    ann_path = _require_file(args.annotations)
    hcp_paths = [_require_file(p) for p in args.hcp]
    out_dir = Path(args.out)

    predictions = {}
    for path in hcp_paths:
        stem = path.name
        if not stem.endswith("_hcp.csv"):
            raise CliError(
                f"{path}: expected a file named <episode>_hcp.csv", code=2)
        predictions[stem[:-len("_hcp.csv")]] = _read_hcp_csv(path)

    try:
        annotations = parse_annotations(ann_path.read_text(encoding="utf-8"))
    except ValueError as exc:
        raise CliError(f"{ann_path}: {exc}", code=1)

    mismatched = sorted(set(annotations) ^ set(predictions))
    if mismatched:
        raise CliError(
            "episode ids do not line up between annotations and timelines: "
            + ", ".join(mismatched), code=1)

    try:
        report = build_report(annotations, predictions)
    except ValueError as exc:
        raise CliError(str(exc), code=1)

    box_inputs = []
    if bool(args.pred_boxes) != bool(args.true_boxes):
        raise CliError("--pred-boxes and --true-boxes must be given together",
                       code=2)
    if args.pred_boxes:
        pred_path = _require_file(args.pred_boxes)
        true_path = _require_file(args.true_boxes)
        box_inputs = [str(pred_path), str(true_path)]
        try:
            report["single_image_detection"] = evaluate_detections(
                parse_box_predictions(pred_path.read_text(encoding="utf-8")),
                parse_box_ground_truth(true_path.read_text(encoding="utf-8")))
        except ValueError as exc:
            raise CliError(str(exc), code=1)

    out_dir.mkdir(parents=True, exist_ok=True)
    manifest = RunManifest(
        "eval", __version__,
        [str(ann_path), *map(str, hcp_paths), *box_inputs], {})
    json_path = out_dir / "report.json"
    json_path.write_text(json.dumps(report, indent=2) + "\n", encoding="utf-8")
    text = format_report_text(report)
    text_path = out_dir / "report.txt"
    text_path.write_text(text, encoding="utf-8")
    manifest.add_output(out_dir, json_path)
    manifest.add_output(out_dir, text_path)
    manifest.write(out_dir / "manifest.json")
    sys.stdout.write(text)
    return 0


# ---------------------------------------------------------------------------
# synth

def _load_backgrounds(directory: Path) -> list[np.ndarray]:
    files = sorted(
        p for p in directory.iterdir()
        if p.suffix.lower() in IMAGE_SUFFIXES)
    if not files:
        raise CliError(f"no background images in {directory}", code=2)
    return [np.asarray(Image.open(p).convert("RGB")) for p in files]


def _load_object_masks(directory: Path, cfg: SynthConfig) -> dict[ObjectClass, list[ObjectMask]]:
    masks: dict[ObjectClass, list[ObjectMask]] = {}
    for cls in ObjectClass:
        class_dir = directory / cls.name
        if not class_dir.is_dir():
            raise CliError(f"missing object directory {class_dir}", code=2)
        pool = []
        for path in sorted(class_dir.iterdir()):
            if path.suffix.lower() not in IMAGE_SUFFIXES:
                continue
            frame = np.asarray(Image.open(path).convert("RGB"))
            pool.append(extract_mask(frame, cls, cfg.t_ck[cls]))
        if not pool:
            raise CliError(f"no usable object frames in {class_dir}", code=2)
        masks[cls] = pool
    return masks


def _synth_config(args) -> SynthConfig:
    cfg = SynthConfig()
    if args.config:
        values = load_config_file(_require_file(args.config))
        cfg = _synth_overrides(cfg, values)
    if args.seed is not None:
        cfg = SynthConfig(**{**_synth_as_kwargs(cfg), "seed": args.seed})
    return cfg


def _synth_as_kwargs(cfg: SynthConfig) -> dict:
    return {
        "t_ck": dict(cfg.t_ck),
        "scale_ranges": dict(cfg.scale_ranges),
        "hsl_range": cfg.hsl_range,
        "blur_len_range": cfg.blur_len_range,
        "blur_angle_range": cfg.blur_angle_range,
        "hands_range": cfg.hands_range,
        "seed": cfg.seed,
    }


def _synth_overrides(cfg: SynthConfig, values: dict) -> SynthConfig:
    kwargs = _synth_as_kwargs(cfg)
    by_class = {cls.name.lower(): cls for cls in ObjectClass}
    for key, raw in values.items():
        if key == "seed":
            kwargs["seed"] = int(raw)
        elif key in ("hsl_range", "blur_angle_range"):
            lo, hi = (float(v) for v in raw.split(","))
            kwargs[key] = (lo, hi)
        elif key in ("blur_len_range", "hands_range"):
            lo, hi = (int(v) for v in raw.split(","))
            kwargs[key] = (lo, hi)
        elif key.startswith("t_ck_") and key[5:] in by_class:
            kwargs["t_ck"][by_class[key[5:]]] = float(raw)
        elif key.startswith("scale_") and key[6:] in by_class:
            lo, hi = (float(v) for v in raw.split(","))
            kwargs["scale_ranges"][by_class[key[6:]]] = (lo, hi)
        else:
            raise CliError(f"unknown synth config key {key!r}", code=2)
    return SynthConfig(**kwargs)


def _write_annotation_file(path: Path, annotations) -> None:
    lines = [
        f"{cls.name} {_fmt_pixels(box.x)} {_fmt_pixels(box.y)} "
        f"{_fmt_pixels(box.w)} {_fmt_pixels(box.h)}"
        for cls, box in annotations
    ]
    path.write_text("\n".join(lines) + ("\n" if lines else ""), encoding="utf-8")


def _cmd_synth(args) -> int:
    cfg = _synth_config(args)
    backgrounds = _load_backgrounds(_require_dir(args.backgrounds))
    masks = _load_object_masks(_require_dir(args.objects), cfg)
    out_dir = Path(args.out)
    out_dir.mkdir(parents=True, exist_ok=True)

    def render(index: int) -> list[Path]:
        scene = scene_for_index(backgrounds, masks, cfg, index)
        written = []
        img_path = out_dir / f"scene_{index:05d}.png"
        Image.fromarray(scene.image).save(img_path)
        ann_path = out_dir / f"scene_{index:05d}.txt"
        _write_annotation_file(ann_path, scene.annotations)
        written += [img_path, ann_path]
        if args.split:
            for t, tile in enumerate(split_image(scene.image, scene.annotations)):
                tile_img = out_dir / f"scene_{index:05d}_s{t}.png"
                Image.fromarray(tile.image).save(tile_img)
                tile_ann = out_dir / f"scene_{index:05d}_s{t}.txt"
                _write_annotation_file(tile_ann, tile.annotations)
                written += [tile_img, tile_ann]
        return written

    indices = range(args.count)
    if args.workers > 1:
        with ThreadPoolExecutor(max_workers=args.workers) as pool:
            produced = list(pool.map(render, indices))
    else:
        produced = [render(i) for i in indices]

    manifest = RunManifest(
        "synth", __version__, [args.backgrounds, args.objects],
        {k: str(v) for k, v in _synth_as_kwargs(cfg).items()},
        seed=cfg.seed)
    pairs = []
    for paths in produced:
        for path in paths:
            manifest.add_output(out_dir, path)
        for img in paths:
            if img.suffix == ".png":
                pairs.append({"image": img.name,
                              "annotations": img.with_suffix(".txt").name})
    manifest.extra["pairs"] = pairs
    manifest.write(out_dir / "manifest.json")
    return 0


# ---------------------------------------------------------------------------
# simulate

def _cmd_simulate(args) -> int:
    scenario_path = _require_file(args.scenario)
    try:
        scenario = load_scenario(scenario_path.read_text(encoding="utf-8"))
    except (ValueError, KeyError) as exc:
        raise CliError(f"{scenario_path}: {exc}", code=1)

    episode, annotation = generate_episode(scenario)

    out_path = Path(args.out)
    truth_path = Path(args.truth)
    for p in (out_path, truth_path):
        p.parent.mkdir(parents=True, exist_ok=True)
    out_path.write_text(serialize_detection_stream(episode), encoding="utf-8")
    truth_path.write_text(format_annotations([annotation]), encoding="utf-8")

    manifest = RunManifest(
        "simulate", __version__, [str(scenario_path)], {},
        seed=scenario.seed)
    manifest.outputs[str(out_path)] = hashlib.sha256(out_path.read_bytes()).hexdigest()
    manifest.outputs[str(truth_path)] = hashlib.sha256(truth_path.read_bytes()).hexdigest()

    if args.boxes:
        boxes_path = Path(args.boxes)
        boxes_path.parent.mkdir(parents=True, exist_ok=True)
        lines = ["episode,frame,class,x,y,w,h"]
        for cls, series in true_boxes(scenario).items():
            for i, box in enumerate(series):
                if box is None:
                    continue
                lines.append(
                    f"{scenario.name},{i},{cls.name},{_fmt6(box.x)},"
                    f"{_fmt6(box.y)},{_fmt6(box.w)},{_fmt6(box.h)}")
        boxes_path.write_text("\n".join(lines) + "\n", encoding="utf-8")
        manifest.outputs[str(boxes_path)] = hashlib.sha256(
            boxes_path.read_bytes()).hexdigest()

    manifest.write(out_path.parent / (out_path.stem + ".manifest.json"))
    return 0


# ---------------------------------------------------------------------------
# plot

def _cmd_plot(args) -> int:
    cfg = _pipeline_config(args)
    in_path = _require_file(args.input)
    episodes = _load_episodes(in_path, cfg)
    cls = ObjectClass[args.object_class]
    axis = args.axis

    out_path = Path(args.out)
    out_path.parent.mkdir(parents=True, exist_ok=True)

    stage_names = ("raw", "filled", "despiked", "smoothed")
    if episodes:
        episode = episodes[0]
        stages = track_object_stages(episode, cls, cfg)
        pick = (lambda s: s.x) if axis == "x" else (lambda s: s.y)
        series = {
            "raw": pick(stages.raw),
            "filled": pick(stages.filled),
            "despiked": pick(stages.despiked),
            "smoothed": pick(stages.smoothed),
        }
        title = f"{episode.episode_id}: {cls.name} {axis}-position"
    else:
        series = {name: [] for name in stage_names}
        title = f"{cls.name} {axis}-position"

    out_path.write_text(render_timeline_plot(series, title=title), encoding="utf-8")
    manifest = RunManifest("plot", __version__, [str(in_path)], cfg.as_dict())
    manifest.outputs[str(out_path)] = hashlib.sha256(out_path.read_bytes()).hexdigest()
    manifest.write(out_path.parent / (out_path.stem + ".manifest.json"))
    return 0


# ---------------------------------------------------------------------------

def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="resustrack",
        description="Detection-stream tracking, provider counting, "
                    "evaluation and synthetic-scene generation.")
    sub = parser.add_subparsers(dest="command", required=True)

    def add_pipeline_flags(p):
        p.add_argument("--config", help="pipeline config file (key=value lines)")
        p.add_argument("--param", action="append", metavar="KEY=VALUE",
                       help="override a single config value (repeatable)")

    p_track = sub.add_parser("track", help="emit tracking-box timelines")
    p_track.add_argument("--input", required=True, help="detection stream file")
    p_track.add_argument("--out", required=True, help="output directory")
    p_track.add_argument("--emit-locate", action="store_true",
                         help="also write raw centroid CSVs")
    p_track.add_argument("--workers", type=int, default=1,
                         help="episodes processed in parallel")
    add_pipeline_flags(p_track)
    p_track.set_defaults(func=_cmd_track)

    p_hcp = sub.add_parser("hcp", help="emit provider-count timelines")
    p_hcp.add_argument("--input", required=True, help="detection stream file")
    p_hcp.add_argument("--out", required=True, help="output directory")
    p_hcp.add_argument("--workers", type=int, default=1,
                       help="episodes processed in parallel")
    add_pipeline_flags(p_hcp)
    p_hcp.set_defaults(func=_cmd_hcp)

    p_eval = sub.add_parser("eval", help="evaluate timelines against annotations")
    p_eval.add_argument("--annotations", required=True, help="annotation CSV")
    p_eval.add_argument("--hcp", required=True, nargs="+",
                        help="provider-count CSVs named <episode>_hcp.csv")
    p_eval.add_argument("--pred-boxes",
                        help="scored box predictions (image,class,x,y,w,h,score)"
                             " for an AP/mAP section")
    p_eval.add_argument("--true-boxes",
                        help="ground-truth boxes (image,class,x,y,w,h)")
    p_eval.add_argument("--out", required=True, help="output directory")
    p_eval.set_defaults(func=_cmd_eval)

    p_synth = sub.add_parser("synth", help="generate synthetic training scenes")
    p_synth.add_argument("--backgrounds", required=True, help="background image directory")
    p_synth.add_argument("--objects", required=True,
                         help="blue-screen directory with one subfolder per class")
    p_synth.add_argument("--out", required=True, help="output directory")
    p_synth.add_argument("--count", type=int, required=True, help="number of scenes")
    p_synth.add_argument("--seed", type=int, default=None, help="RNG seed override")
    p_synth.add_argument("--config", help="synth config file (key=value lines)")
    p_synth.add_argument("--workers", type=int, default=1, help="parallel workers")
    p_synth.add_argument("--split", action="store_true",
                         help="also emit the five-way split of every scene")
    p_synth.set_defaults(func=_cmd_synth)

    p_sim = sub.add_parser("simulate", help="render a scripted scenario")
    p_sim.add_argument("--scenario", required=True, help="scenario JSON file")
    p_sim.add_argument("--out", required=True, help="detection stream to write")
    p_sim.add_argument("--truth", required=True, help="annotation CSV to write")
    p_sim.add_argument("--boxes", help="optional per-frame true-box CSV to write")
    p_sim.set_defaults(func=_cmd_simulate)

    p_plot = sub.add_parser(
        "plot", help="render stage timelines of a stream's first episode as SVG")
    p_plot.add_argument("--input", required=True, help="detection stream file")
    p_plot.add_argument("--class", dest="object_class", default="BMR",
                        choices=[c.name for c in TRACKED_CLASSES],
                        help="tracked class to plot")
    p_plot.add_argument("--axis", choices=["x", "y"], default="x")
    p_plot.add_argument("--out", required=True, help="SVG file to write")
    add_pipeline_flags(p_plot)
    p_plot.set_defaults(func=_cmd_plot)

    return parser


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    try:
        return args.func(args)
    except CliError as exc:
        print(f"resustrack {args.command}: {exc}", file=sys.stderr)
        return exc.code
    except StreamError as exc:
        print(f"resustrack {args.command}: {exc}", file=sys.stderr)
        return 1
    except ValueError as exc:
        print(f"resustrack {args.command}: {exc}", file=sys.stderr)
        return 1
    except OSError as exc:
        print(f"resustrack {args.command}: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
