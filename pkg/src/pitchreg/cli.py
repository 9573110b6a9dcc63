"""Command-line interface: build-dict, register, register-video and eval.

Every output file embeds a fingerprint of the resolved run configuration;
re-running a command with identical inputs reproduces byte-identical
outputs (generation is deterministic and ordering is by frame index).

Exit codes: 0 success, 1 partial or quality failure, 2 usage/IO error.
"""

from __future__ import annotations

import argparse
import hashlib
import json
import logging
import sys
from pathlib import Path

import numpy as np

from .dictionary import (
    Dictionary,
    PtzGrid,
    build_dictionary,
    geometric_zooms,
    read_seed_file,
    symmetric_steps,
)
from .errors import PitchRegError
from .evaluate import (
    GroundTruthRecord,
    evaluate,
    format_report_table,
    make_synthetic_testset,
    noise_sweep,
    report_csv,
)
from .features import HogConfig
from .geometry import check_homography, estimate_dlt, format_homography
from .matcher import register_frame
from .pitch import load_pitch_file, render_camera_view, standard_pitch
from .preprocess import (
    PreprocessConfig,
    load_frame,
    preprocess_frame,
    read_pbm,
    save_png,
    write_pbm,
)
from .temporal import (
    CameraParams,
    SmoothingWeights,
    camera_path_to_homographies,
    mrf_smooth,
    stabilize,
)

log = logging.getLogger("pitchreg")

IMAGE_SUFFIXES = {".png", ".ppm", ".jpg", ".jpeg"}


def _fingerprint(args: argparse.Namespace) -> str:
    payload = {k: repr(v) for k, v in sorted(vars(args).items()) if k != "func"}
    return hashlib.sha256(json.dumps(payload, sort_keys=True).encode()).hexdigest()[:16]


def _parse_raster(text: str) -> tuple[int, int]:
    w, _, h = text.partition("x")
    return int(w), int(h)


def _load_model(args: argparse.Namespace):
    if getattr(args, "pitch_file", None):
        return load_pitch_file(args.pitch_file, px_per_m=args.px_per_m)
    return standard_pitch(args.px_per_m)


def _grid_from_args(args: argparse.Namespace) -> PtzGrid:
    if args.zoom_factors:
        zooms = tuple(float(z) for z in args.zoom_factors.split(","))
    else:
        zooms = geometric_zooms(args.zoom_ratio, args.zoom_steps)
    return PtzGrid(
        pan_steps=symmetric_steps(args.pan_extent, args.pan_steps),
        tilt_steps=symmetric_steps(args.tilt_extent, args.tilt_steps),
        zoom_factors=zooms,
    )


def _preprocess_config(args: argparse.Namespace) -> PreprocessConfig:
    return PreprocessConfig(
        max_stroke_px=args.max_stroke,
        gradient_threshold=args.gradient_threshold,
    )


def _load_query(path: Path, args: argparse.Namespace, raster_size) -> np.ndarray:
    """Edge map from a PBM (verbatim) or an RGB frame (preprocessed)."""
    if path.suffix.lower() == ".pbm":
        return read_pbm(str(path))
    frame = load_frame(str(path))
    edges = preprocess_frame(frame, _preprocess_config(args), out_size=raster_size)
    if args.dump_edges:
        out_dir = Path(args.out_dir)
        write_pbm(str(out_dir / f"{path.stem}.edges.pbm"), edges)
    return edges


def cmd_build_dict(args: argparse.Namespace) -> int:
    seeds = read_seed_file(args.seeds)
    model = _load_model(args)
    grid = _grid_from_args(args)
    raster = _parse_raster(args.raster)
    cfg = HogConfig(blur=args.hog_blur == "on")
    dct = build_dictionary(
        seeds, grid, model, raster_size=raster, hog_config=cfg, n_jobs=args.n_jobs
    )
    dct.save(args.out)
    print(f"wrote {len(dct)} entries to {args.out} (fingerprint {_fingerprint(args)})")
    return 0


def _candidate_lines(frame_id: str, cs, dct: Dictionary) -> list[str]:
    lines = []
    for rank, cand in enumerate(cs.candidates, start=1):
        h_text = format_homography(dct.homographies[cand.entry_index])
        lines.append(
            f"{frame_id} {rank} {cand.entry_index} {cand.distance!r} {h_text}"
        )
    return lines


def cmd_register(args: argparse.Namespace) -> int:
    dct = Dictionary.load(args.dict)
    out_dir = Path(args.out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    fp = _fingerprint(args)
    model = _load_model(args) if args.overlay else None
    failures = 0
    for name in args.inputs:
        path = Path(name)
        frame_id = path.stem
        try:
            edges = _load_query(path, args, dct.raster_size)
            cs = register_frame(
                edges, dct, metric=args.metric, k=args.k, eps=args.eps,
                query_id=frame_id,
            )
        except (PitchRegError, OSError, ValueError) as exc:
            log.warning("frame %s failed: %s", frame_id, exc)
            failures += 1
            continue
        best = dct.homographies[cs[0].entry_index]
        lines = [f"# fingerprint={fp}"] + _candidate_lines(frame_id, cs, dct)
        (out_dir / f"{frame_id}.candidates.txt").write_text("\n".join(lines) + "\n")
        (out_dir / f"{frame_id}.homography.txt").write_text(
            f"# fingerprint={fp}\n{format_homography(best)}\n"
        )
        if args.overlay and path.suffix.lower() in IMAGE_SUFFIXES:
            frame = load_frame(str(path))
            fh, fw = frame.shape[:2]
            rw, rh = dct.raster_size
            scale = np.diag([rw / fw, rh / fh, 1.0])
            lines_map = render_camera_view(model, best @ scale, fw, fh)
            overlay = frame.copy()
            overlay[lines_map > 0] = (255, 64, 64)
            save_png(str(out_dir / f"{frame_id}.overlay.png"), overlay)
    if failures == len(args.inputs):
        log.error("all %d frames failed", failures)
        return 1
    return 1 if failures else 0


def _interpolate_params(
    raw: dict[int, np.ndarray], n_frames: int
) -> tuple[np.ndarray, list[int]]:
    """Fill registration gaps linearly in six-parameter space."""
    good = sorted(raw)
    filled = np.empty((n_frames, 6))
    flagged = []
    for t in range(n_frames):
        if t in raw:
            filled[t] = raw[t]
            continue
        flagged.append(t)
        before = [g for g in good if g < t]
        after = [g for g in good if g > t]
        if before and after:
            a, b = before[-1], after[0]
            w = (t - a) / (b - a)
            filled[t] = (1 - w) * raw[a] + w * raw[b]
        elif before:
            filled[t] = raw[before[-1]]
        else:
            filled[t] = raw[after[0]]
    return filled, flagged


def cmd_register_video(args: argparse.Namespace) -> int:
    dct = Dictionary.load(args.dict)
    frame_dir = Path(args.frames)
    paths = sorted(
        p
        for p in frame_dir.iterdir()
        if p.suffix.lower() in IMAGE_SUFFIXES | {".pbm"}
    )
    if not paths:
        log.error("no frames found in %s", frame_dir)
        return 2
    out_dir = Path(args.out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    fp = _fingerprint(args)

    candidate_sets = {}
    for t, path in enumerate(paths):
        try:
            edges = _load_query(path, args, dct.raster_size)
            candidate_sets[t] = register_frame(
                edges, dct, metric=args.metric, k=args.k, eps=args.eps,
                query_id=path.stem,
            )
        except (PitchRegError, OSError, ValueError) as exc:
            log.warning("frame %s failed: %s", path.stem, exc)
    if not candidate_sets:
        log.error("all frames failed to register")
        return 1

    good = sorted(candidate_sets)
    path_states = mrf_smooth(
        [candidate_sets[t] for t in good],
        dct.homographies,
        dct.h_scales,
        w_smooth=args.w_smooth,
    )
    raw = {
        t: dct.cams[candidate_sets[t][s].entry_index]
        for t, s in zip(good, path_states.states)
    }
    filled, flagged = _interpolate_params(raw, len(paths))
    filled[:, 2] = np.unwrap(filled[:, 2])
    raw_params = [CameraParams.from_array(row) for row in filled]
    weights = SmoothingWeights(
        lambda1=args.lambda1, lambda2=args.lambda2, lambda3=args.lambda3
    )
    if len(raw_params) >= 4:
        smooth_params = stabilize(raw_params, weights)
    else:
        smooth_params = list(raw_params)
    homographies = camera_path_to_homographies(smooth_params, dct.raster_size)

    cand_lines = [f"# fingerprint={fp}"]
    for t in good:
        cand_lines += _candidate_lines(paths[t].stem, candidate_sets[t], dct)
    (out_dir / "candidates.txt").write_text("\n".join(cand_lines) + "\n")
    for fname, params in (
        ("raw_trajectory.csv", raw_params),
        ("stabilized_trajectory.csv", smooth_params),
    ):
        rows = [f"# fingerprint={fp}", "frame,cx,cy,theta,phi,r1,r2"]
        rows += [
            f"{paths[t].stem},{p.cx!r},{p.cy!r},{p.theta!r},{p.phi!r},{p.r1!r},{p.r2!r}"
            for t, p in enumerate(params)
        ]
        (out_dir / fname).write_text("\n".join(rows) + "\n")
    h_lines = [f"# fingerprint={fp}"]
    h_lines += [
        f"{paths[t].stem} {format_homography(homographies[t])}"
        for t in range(len(paths))
    ]
    (out_dir / "homographies.txt").write_text("\n".join(h_lines) + "\n")
    metadata = {
        "fingerprint": fp,
        "n_frames": len(paths),
        "n_registered": len(good),
        "interpolated_frames": [paths[t].stem for t in flagged],
        "metric": args.metric,
        "k": args.k,
        "eps": args.eps,
        "w_smooth": args.w_smooth,
        "lambdas": [args.lambda1, args.lambda2, args.lambda3],
        "param_scales": list(weights.param_scales),
    }
    (out_dir / "metadata.json").write_text(
        json.dumps(metadata, sort_keys=True, indent=2) + "\n"
    )
    return 1 if flagged else 0


def _read_truth_file(path: str) -> list[GroundTruthRecord]:
    records = []
    with open(path, "r", encoding="utf-8") as fh:
        for lineno, rawline in enumerate(fh, start=1):
            line = rawline.strip()
            if not line or line.startswith("#"):
                continue
            tok = line.split()
            vals = [float(v) for v in tok[1:]]
            if len(vals) == 9:
                h = check_homography(np.array(vals).reshape(3, 3))
            elif len(vals) == 16:
                pairs = np.array(vals).reshape(4, 4)
                h = estimate_dlt(pairs[:, :2], pairs[:, 2:])
            else:
                raise ValueError(
                    f"{path}:{lineno}: expected 9 or 16 values, got {len(vals)}"
                )
            records.append(GroundTruthRecord(tok[0], h))
    return records


def cmd_eval(args: argparse.Namespace) -> int:
    dct = Dictionary.load(args.dict)
    out_dir = Path(args.out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    if args.truth:
        truth = _read_truth_file(args.truth)
        edges_dir = Path(args.edges_dir)
        queries = [
            (read_pbm(str(edges_dir / f"{rec.frame_id}.pbm")), rec) for rec in truth
        ]
    else:
        seeds = read_seed_file(args.synthetic_seeds)
        model = _load_model(args)
        grid = _grid_from_args(args)
        queries = make_synthetic_testset(
            seeds, grid, args.n_queries, args.rng_seed, model,
            raster_size=dct.raster_size,
        )
    reports = [evaluate(queries, dct, metric=args.metric, k=args.k)]
    if args.noise:
        dropout, salt = (float(v) for v in args.noise.split(":"))
        reports += noise_sweep(
            queries, dct, args.metric, [dropout], [salt], args.rng_seed, k=args.k
        )
    for i, report in enumerate(reports):
        name = "report.csv" if i == 0 else f"report_noise{i}.csv"
        (out_dir / name).write_text(report_csv(report))
    print(format_report_table(reports))
    mean_ok = reports[0].mean >= args.min_mean_iou
    return 0 if mean_ok else 1


def _add_common_query_flags(p: argparse.ArgumentParser) -> None:
    p.add_argument("--metric", choices=("chamfer", "hog"), default="hog")
    p.add_argument("--k", type=int, default=5)
    p.add_argument("--eps", type=float, default=0.0,
                   help="approximate-NN band for the chamfer metric")
    p.add_argument("--max-stroke", type=int, default=10)
    p.add_argument("--gradient-threshold", type=float, default=15.0)
    p.add_argument("--dump-edges", action="store_true",
                   help="write preprocessed edge maps as PBM")


def _add_grid_flags(p: argparse.ArgumentParser) -> None:
    p.add_argument("--pan-extent", type=float, default=0.35)
    p.add_argument("--pan-steps", type=int, default=21)
    p.add_argument("--tilt-extent", type=float, default=12.0)
    p.add_argument("--tilt-steps", type=int, default=9)
    p.add_argument("--zoom-factors", default="0.7,0.85,1.0,1.2,1.45",
                   help="comma-separated zoom factors (must include 1.0)")
    p.add_argument("--zoom-ratio", type=float, default=1.07,
                   help="geometric zoom ratio, used with --zoom-steps when "
                        "--zoom-factors is empty")
    p.add_argument("--zoom-steps", type=int, default=11)


def _add_model_flags(p: argparse.ArgumentParser) -> None:
    p.add_argument("--pitch-file", default=None,
                   help="text pitch description (default: standard 105x68 pitch)")
    p.add_argument("--px-per-m", type=float, default=10.0)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="pitchreg",
        description="Register broadcast football frames onto a top-view pitch model.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("build-dict", help="expand seed annotations into a dictionary")
    p.add_argument("--seeds", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--raster", default="256x144")
    p.add_argument("--hog-blur", choices=("on", "off"), default="on")
    p.add_argument("--n-jobs", type=int, default=None)
    _add_grid_flags(p)
    _add_model_flags(p)
    p.set_defaults(func=cmd_build_dict)

    p = sub.add_parser("register", help="register single frames or edge maps")
    p.add_argument("inputs", nargs="+", help="PBM edge maps or PNG/PPM frames")
    p.add_argument("--dict", required=True)
    p.add_argument("--out-dir", default=".")
    p.add_argument("--overlay", action="store_true",
                   help="write projected model lines over image inputs")
    _add_common_query_flags(p)
    _add_model_flags(p)
    p.set_defaults(func=cmd_register)

    p = sub.add_parser("register-video", help="register and stabilize a frame folder")
    p.add_argument("--frames", required=True)
    p.add_argument("--dict", required=True)
    p.add_argument("--out-dir", required=True)
    p.add_argument("--w-smooth", type=float, default=1.0)
    p.add_argument("--lambda1", type=float, default=0.1)
    p.add_argument("--lambda2", type=float, default=1.0)
    p.add_argument("--lambda3", type=float, default=10.0)
    _add_common_query_flags(p)
    p.set_defaults(func=cmd_register_video)

    p = sub.add_parser("eval", help="score registrations against ground truth")
    p.add_argument("--dict", required=True)
    p.add_argument("--out-dir", default=".")
    p.add_argument("--truth", default=None,
                   help="ground-truth file: frame_id + 9 homography values or "
                        "16 correspondence values per line")
    p.add_argument("--edges-dir", default=None,
                   help="directory of <frame_id>.pbm query edge maps")
    p.add_argument("--synthetic-seeds", default=None,
                   help="seed file for a generated synthetic test set")
    p.add_argument("--n-queries", type=int, default=500)
    p.add_argument("--rng-seed", type=int, default=0)
    p.add_argument("--noise", default=None,
                   help="dropout:salt fractions for an extra noisy run")
    p.add_argument("--min-mean-iou", type=float, default=0.0,
                   help="exit 1 when the clean mean IOU falls below this")
    _add_common_query_flags(p)
    _add_grid_flags(p)
    _add_model_flags(p)
    p.set_defaults(func=cmd_eval)
    return parser


def main(argv=None) -> int:
    logging.basicConfig(level=logging.INFO, format="%(levelname)s %(message)s")
    parser = build_parser()
    args = parser.parse_args(argv)
    if args.command == "eval":
        if bool(args.truth) == bool(args.synthetic_seeds):
            parser.error("eval needs exactly one of --truth or --synthetic-seeds")
        if args.truth and not args.edges_dir:
            parser.error("--truth requires --edges-dir")
    try:
        return args.func(args)
    except FileNotFoundError as exc:
        log.error("%s", exc)
        return 2
    except (PitchRegError, ValueError, OSError) as exc:
        log.error("%s", exc)
        return 2


if __name__ == "__main__":
    sys.exit(main())
