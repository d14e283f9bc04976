"""Command line pipeline: simulate, register, mosaic, evaluate, run-all.

Exit codes: 0 success, 2 input error, 3 numerical failure.
"""

from __future__ import annotations

import argparse
import hashlib
import json
import logging
import os
import platform
import sys
from concurrent.futures import ProcessPoolExecutor
from pathlib import Path

import numpy as np

from . import __version__
from .errors import InputError, MosaicError, NumericalError
from .evaluation import evaluate_sequence
from .frames import read_frames, write_frame
from .geometry import CameraIntrinsics
from .imaging import write_png
from .mosaic import build_mosaic, read_ply_vertices, write_ply
from .registration import RegistrationConfig, RegistrationResult, register_pair
from .simulator import GroundTruth, build_scene, preset, simulate_sequence
from .simulator.surfaces import make_phantom
from .triangulation import ProjectorModel

log = logging.getLogger("slmosaic")

EXIT_OK, EXIT_INPUT, EXIT_NUMERICAL = 0, 2, 3


def config_hash(config) -> str:
    blob = json.dumps(config, sort_keys=True, separators=(",", ":"))
    return hashlib.sha256(blob.encode()).hexdigest()


def _dump(path: Path, data) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(json.dumps(data, indent=2, sort_keys=True) + "\n")


def _load(path) -> dict:
    path = Path(path)
    if not path.exists():
        raise InputError(f"no such file: {path}")
    try:
        return json.loads(path.read_text())
    except json.JSONDecodeError as exc:
        raise InputError(f"{path.name} is not valid JSON: {exc}") from exc


def _metadata(command: str, config, **extra) -> dict:
    import numba
    import scipy

    return {
        "command": command,
        "config": config,
        "config_hash": config_hash(config),
        "versions": {
            "slmosaic": __version__,
            "python": platform.python_version(),
            "numpy": np.__version__,
            "scipy": scipy.__version__,
            "numba": numba.__version__,
        },
        **extra,
    }


def read_calibration(path) -> tuple[CameraIntrinsics, ProjectorModel]:
    data = _load(path)
    try:
        return CameraIntrinsics.from_dict(data["camera"]), ProjectorModel.from_records(data["projector"])
    except (KeyError, TypeError, ValueError) as exc:
        raise InputError(f"malformed calibration file: {exc}") from exc


def write_calibration(path, K: CameraIntrinsics, projector: ProjectorModel) -> None:
    _dump(Path(path), {"camera": K.to_dict(), "projector": projector.to_records()})


def read_transforms(path) -> list[RegistrationResult]:
    data = _load(path)
    try:
        return [RegistrationResult.from_record(r) for r in data["pairs"]]
    except (KeyError, TypeError, ValueError) as exc:
        raise InputError(f"malformed transforms file: {exc}") from exc


def _scene_config(args) -> dict:
    if args.config:
        scene = _load(args.config)
    elif getattr(args, "preset", None):
        scene = preset(args.preset, scale=args.scale)
    else:
        raise InputError("give a scene with --config or --preset")
    if args.seed is not None:
        scene = dict(scene)
        scene["texture"] = {**scene.get("texture", {}), "seed": args.seed}
        scene["noise"] = {**scene.get("noise", {}), "seed": args.seed}
    return scene


def cmd_simulate(args) -> int:
    scene_cfg = _scene_config(args)
    scene = build_scene(scene_cfg)
    frames, gt = simulate_sequence(scene.surface, scene.texture, scene.trajectory, scene.camera, scene.projector, scene.noise)
    out = Path(args.out)
    for frame in frames:
        write_frame(out, frame)
    write_calibration(out / "calibration.json", scene.camera, scene.projector)
    _dump(out / "scene.json", scene_cfg)
    _dump(out / "ground_truth.json", gt.to_dict())
    _dump(out / "metadata.json", _metadata("simulate", scene_cfg, n_frames=len(frames)))
    log.info("wrote %d frames to %s", len(frames), out)
    return EXIT_OK


def _register_one(job):
    prev, cur, K, cfg = job
    return register_pair(prev, cur, K, cfg)


def register_frames(frames, K, cfg: RegistrationConfig, workers: int = 1) -> list[RegistrationResult]:
    for f in frames:
        if len(f.observations) < 4:
            raise InputError(f"frame {f.index} has {len(f.observations)} laser points, need at least 4")
    jobs = [(a, b, K, cfg) for a, b in zip(frames[:-1], frames[1:])]
    if workers > 1 and len(jobs) > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            results = list(pool.map(_register_one, jobs))
    else:
        results = [_register_one(j) for j in jobs]
    for (a, b, _, _), r in zip(jobs, results):
        if not r.converged:
            log.warning("pair %d-%d did not converge", a.index, b.index)
    return results


def _frames_and_calibration(args):
    frames_dir = Path(args.frames)
    calib = Path(args.calibration) if args.calibration else frames_dir / "calibration.json"
    K, _ = read_calibration(calib)
    frames = read_frames(frames_dir)
    return frames, K


def cmd_register(args) -> int:
    frames, K = _frames_and_calibration(args)
    if len(frames) < 2:
        raise InputError("registration needs at least 2 frames")
    cfg = RegistrationConfig.from_dict(_load(args.config) if args.config else None)
    results = register_frames(frames, K, cfg, args.workers)
    pairs = [{"k_prev": a.index, "k": b.index, **r.to_record()} for a, b, r in zip(frames[:-1], frames[1:], results)]
    out = Path(args.out)
    _dump(
        out,
        {
            **_metadata("register", cfg.to_dict(), n_frames=len(frames), converged=[r.converged for r in results]),
            "pairs": pairs,
        },
    )
    log.info("registered %d pairs -> %s", len(results), out)
    return EXIT_OK


def cmd_mosaic(args) -> int:
    frames, K = _frames_and_calibration(args)
    results = read_transforms(args.transforms)
    if len(results) != len(frames) - 1:
        raise InputError(f"{len(results)} transforms for {len(frames)} frames")
    mosaic = build_mosaic(frames, [(r.t3d, r.t2d) for r in results], K)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    write_ply(out / "cloud.ply", mosaic.cloud)
    if mosaic.mesh is not None:
        write_ply(out / "mesh.ply", mosaic.mesh.vertices, mosaic.mesh.faces, mosaic.mesh.colors)
    flat = mosaic.mosaic_2d
    if flat is not None:
        write_png(out / "mosaic.png", flat.image)
        write_png(out / "mosaic_holes.png", flat.holes)
    else:
        log.warning("2D mosaic canvas too large; skipping mosaic.png")
    _dump(
        out / "globals.json",
        {
            "global_3d": [g.to_record() for g in mosaic.global_3d],
            "global_2d": [g.to_list() for g in mosaic.global_2d],
            "canvas_offset": None if flat is None else list(flat.offset),
        },
    )
    config = {"transforms": _load(args.transforms).get("config_hash"), "frames": [f.index for f in frames]}
    _dump(
        out / "metadata.json",
        _metadata(
            "mosaic",
            config,
            n_frames=len(frames),
            n_points=int(len(mosaic.cloud)),
            n_faces=0 if mosaic.mesh is None else int(len(mosaic.mesh.faces)),
            unfilled_dot_pixels=None if flat is None else flat.n_holes,
            converged=[r.converged for r in results],
        ),
    )
    return EXIT_OK


def cmd_evaluate(args) -> int:
    frames, K = _frames_and_calibration(args)
    results = read_transforms(args.transforms)
    gt = GroundTruth.from_dict(_load(args.ground_truth))
    if len(gt.poses) != len(frames):
        raise InputError(f"ground truth has {len(gt.poses)} poses for {len(frames)} frames")
    cloud = surface = None
    if args.cloud:
        cloud = read_ply_vertices(args.cloud)
    if args.scene:
        phantom = dict(_load(args.scene)["phantom"])
        surface = make_phantom(phantom.pop("kind", None), phantom)
    name = surface.kind if surface is not None else "sequence"
    report = evaluate_sequence(name, [r.t3d for r in results], gt.pairs, frames, K, cloud, surface, gt.poses[0])
    report.write(args.out)
    summary = report.summary()
    log.info(
        "eps3d %.4f +- %.4f mm, eps2d %.3f +- %.3f px",
        summary["eps3d_mm"]["mean"],
        summary["eps3d_mm"]["std"],
        summary["eps2d_px"]["mean"],
        summary["eps2d_px"]["std"],
    )
    return EXIT_OK


def cmd_run_all(args) -> int:
    out = Path(args.out)
    frames_dir = out / "frames"
    sim = argparse.Namespace(**{**vars(args), "out": str(frames_dir)})
    cmd_simulate(sim)
    reg = argparse.Namespace(
        frames=str(frames_dir), calibration=None, config=args.registration, out=str(out / "transforms.json"), workers=args.workers
    )
    cmd_register(reg)
    cmd_mosaic(argparse.Namespace(frames=str(frames_dir), calibration=None, transforms=reg.out, out=str(out / "mosaic")))
    return cmd_evaluate(
        argparse.Namespace(
            frames=str(frames_dir),
            calibration=None,
            transforms=reg.out,
            ground_truth=str(frames_dir / "ground_truth.json"),
            cloud=str(out / "mosaic" / "cloud.ply"),
            scene=str(frames_dir / "scene.json"),
            out=str(out / "report"),
        )
    )


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="slmosaic", description=__doc__.splitlines()[0])
    parser.add_argument("--verbose", "-v", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    def scene_args(p):
        p.add_argument("--config", help="scene JSON file")
        p.add_argument("--preset", choices=["plane", "wave", "half_cylinder", "half_cylinder_190", "ovoid"])
        p.add_argument("--scale", type=float, default=1.0, help="image scale for presets (0.5 = half size)")
        p.add_argument("--seed", type=int, default=None, help="overrides texture and noise seeds")
        p.add_argument("--out", required=True)

    def frame_args(p):
        p.add_argument("frames", help="directory of frame_NNNN.png / .laser.json files")
        p.add_argument("--calibration", help="defaults to FRAMES/calibration.json")

    p = sub.add_parser("simulate", help="render a synthetic sequence with ground truth")
    scene_args(p)
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("register", help="estimate pairwise motions")
    frame_args(p)
    p.add_argument("--config", help="registration config JSON")
    p.add_argument("--out", required=True, help="transforms JSON")
    p.add_argument("--workers", type=int, default=os.cpu_count() or 1)
    p.set_defaults(func=cmd_register)

    p = sub.add_parser("mosaic", help="chain transforms and build cloud, mesh and 2D mosaic")
    frame_args(p)
    p.add_argument("--transforms", required=True)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_mosaic)

    p = sub.add_parser("evaluate", help="compare transforms with ground truth")
    frame_args(p)
    p.add_argument("--transforms", required=True)
    p.add_argument("--ground-truth", required=True)
    p.add_argument("--cloud", help="PLY cloud in the frame of viewpoint 1")
    p.add_argument("--scene", help="scene JSON naming the phantom")
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_evaluate)

    p = sub.add_parser("run-all", help="simulate, register, mosaic and evaluate")
    scene_args(p)
    p.add_argument("--registration", help="registration config JSON")
    p.add_argument("--workers", type=int, default=os.cpu_count() or 1)
    p.set_defaults(func=cmd_run_all)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.DEBUG if args.verbose else logging.INFO, format="%(levelname)s %(message)s")
    try:
        return args.func(args)
    except InputError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INPUT
    except NumericalError as exc:
        print(f"numerical failure: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL
    except MosaicError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL


if __name__ == "__main__":
    sys.exit(main())
