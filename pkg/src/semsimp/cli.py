"""Command-line driver: label, simplify, reconstruct, render-depth, evaluate, stats, pipeline.

Options can also come from a ``key = value`` file passed with ``--config``;
command-line flags win over the file, which wins over built-in defaults.
Every command writes a JSON manifest (inputs with hashes, resolved
parameters, seed, output hashes) next to its outputs.

Exit codes: 0 success, 1 invalid input or configuration, 2 runtime failure.
"""

from __future__ import annotations

import argparse
import hashlib
import json
import logging
import os
import sys
from typing import Dict, List, Optional

import numpy as np

from . import __version__
from .delaunay import SIGMA_FREE, SIGMA_MATTER, DelaunayError, reconstruct
from .evaluate import (EvaluationError, cloud_stats, evaluate_mesh, stats_csv,
                       stats_table)
from .geometry import RANSAC_INLIER_THRESHOLD, RANSAC_ITERATIONS
from .io import (ParseError, read_cameras, read_depth, read_label_raster, read_off, read_palette,
                 read_ply, read_visibility, write_depth, write_off, write_ply, write_visibility)
from .labeling import LabelingError, label_cloud
from .model import LabeledCloud, Palette, ValidationError
from .render import render_depth
from .simplify import DEFAULT_STRETCH, DEFAULT_TARGET, METHODS, SimplifyConfig, SimplifyError, simplify
from .spatial import RegionSpec

log = logging.getLogger("semsimp")

DEFAULT_SEED = 42

EXIT_OK, EXIT_INVALID, EXIT_RUNTIME = 0, 1, 2

# built-in defaults, applied after flags and the config file
DEFAULTS = {
    "method": "ps",
    "region": "radius",
    "k": 16,
    "radius": 0.5,
    "target": DEFAULT_TARGET,
    "stretch": DEFAULT_STRETCH,
    "sigma": None,
    "seed": DEFAULT_SEED,
    "ransac_iterations": RANSAC_ITERATIONS,
    "ransac_threshold": RANSAC_INLIER_THRESHOLD,
    "negate_density_axis": False,
    "sigma_free": SIGMA_FREE,
    "sigma_matter": SIGMA_MATTER,
    "fallback": None,
    "no_simplify": False,
    "scene_seed": 0,
    "log_level": "INFO",
}


class UsageError(ValueError):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(message)


# ---------------------------------------------------------------------------
# configuration


def read_config_file(path) -> Dict[str, str]:
    """Parse ``key = value`` lines; ``#`` starts a comment, dashes in keys become underscores."""
    out = {}
    with open(path) as f:
        for lineno, line in enumerate(f, 1):
            line = line.split("#", 1)[0].strip()
            if not line:
                continue
            if "=" not in line:
                raise ParseError(path, lineno, "expected 'key = value'")
            key, value = (s.strip() for s in line.split("=", 1))
            out[key.replace("-", "_")] = value
    return out


def _parse_bool(text: str) -> bool:
    t = text.strip().lower()
    if t in ("1", "true", "yes", "on"):
        return True
    if t in ("0", "false", "no", "off"):
        return False
    raise ValidationError(f"not a boolean: {text!r}")


def resolve(args: argparse.Namespace, parser: argparse.ArgumentParser) -> argparse.Namespace:
    """Fill unset options from the config file, then from the defaults."""
    file_values = read_config_file(args.config) if getattr(args, "config", None) else {}
    actions = {a.dest: a for a in parser._actions}
    unknown = sorted(k for k in file_values if k not in actions)
    if unknown:
        raise ValidationError(f"unknown keys in config file: {', '.join(unknown)}")
    for dest, action in actions.items():
        if dest in ("help", "config", "command"):
            continue
        if getattr(args, dest, None) is not None:
            continue
        if dest in file_values:
            raw = file_values[dest]
            if isinstance(action, argparse._StoreTrueAction):
                value = _parse_bool(raw)
            elif action.type is not None:
                try:
                    value = action.type(raw)
                except ValueError:
                    raise ValidationError(f"config value for {dest!r} is invalid: {raw!r}") from None
            else:
                value = raw
        else:
            value = DEFAULTS.get(dest)
        setattr(args, dest, value)
    return args


def _require(args, *names):
    missing = [n for n in names if getattr(args, n, None) in (None, "")]
    if missing:
        raise ValidationError("missing required option(s): " + ", ".join("--" + m.replace("_", "-") for m in missing))


def _existing(path: str, what: str) -> str:
    if not os.path.exists(path):
        raise ValidationError(f"{what} not found: {path}")
    return path


# ---------------------------------------------------------------------------
# manifest


def sha256_of(path: str) -> str:
    h = hashlib.sha256()
    if os.path.isdir(path):
        for name in sorted(os.listdir(path)):
            h.update(name.encode())
            h.update(sha256_of(os.path.join(path, name)).encode())
        return h.hexdigest()
    with open(path, "rb") as f:
        for chunk in iter(lambda: f.read(1 << 20), b""):
            h.update(chunk)
    return h.hexdigest()


def write_manifest(path: str, command: str, inputs: Dict[str, str], params: Dict, outputs: Dict[str, str]):
    """Inputs and outputs are recorded with SHA-256 digests; output keys are relative to the manifest."""
    base = os.path.dirname(os.path.abspath(path))
    doc = {
        "tool": "semsimp",
        "version": __version__,
        "command": command,
        "seed": params.get("seed"),
        "parameters": params,
        "inputs": {k: {"path": v, "sha256": sha256_of(v)} for k, v in sorted(inputs.items()) if v},
        "outputs": {k: {"path": os.path.relpath(os.path.abspath(v), base), "sha256": sha256_of(v)}
                    for k, v in sorted(outputs.items())},
    }
    with open(path, "w", newline="\n") as f:
        json.dump(doc, f, indent=2, sort_keys=True)
        f.write("\n")
    return doc


def _manifest_path(output: str) -> str:
    return output + ".manifest.json"


# ---------------------------------------------------------------------------
# loaders


def _load_rasters(directory: str, camera_ids) -> Dict:
    out = {}
    for cid in camera_ids:
        p = os.path.join(directory, f"cam_{cid}.pgm")
        if os.path.exists(p):
            out[cid] = read_label_raster(p)
    return out


def _load_truth(directory: str, camera_ids) -> Dict:
    out = {}
    for cid in camera_ids:
        p = os.path.join(directory, f"cam_{cid}.depth")
        if os.path.exists(p):
            out[cid] = read_depth(p)
    if not out:
        raise ValidationError(f"no ground-truth depth files (cam_<id>.depth) in {directory}")
    return out


def _fallback_label(args, palette: Palette) -> int:
    if args.fallback is not None:
        if args.fallback not in palette:
            raise ValidationError(f"fallback label {args.fallback} is not in the palette")
        return int(args.fallback)
    for lab in palette.labels:
        if lab.name.lower() == "unknown":
            return lab.id
    raise ValidationError("palette has no 'unknown' label; pass --fallback")


def _check_labels(cloud: LabeledCloud, palette: Palette):
    if cloud.labels is None:
        raise ValidationError("cloud has no 'label' property; run the label command first")
    extra = sorted(set(np.unique(cloud.labels).tolist()) - set(palette.ids))
    if extra:
        raise ValidationError(f"palette mismatch: labels {extra} are not declared in the palette")


def _simplify_config(args, palette: Palette) -> SimplifyConfig:
    method = str(args.method).lower()
    if method not in METHODS:
        raise ValidationError(f"unknown method {args.method!r}; expected one of {{{', '.join(METHODS)}}}")
    if args.region == "knn":
        region = RegionSpec.knn(int(args.k))
    elif args.region == "radius":
        region = RegionSpec.sphere(float(args.radius))
    else:
        raise ValidationError(f"unknown region mode {args.region!r}; expected knn or radius")
    return SimplifyConfig(method=method, region=region, target=args.target, stretch=args.stretch,
                          sigma=args.sigma, seed=int(args.seed), simplifiable=palette.simplifiable,
                          ransac_iterations=int(args.ransac_iterations),
                          ransac_threshold=float(args.ransac_threshold),
                          negate_density_axis=bool(args.negate_density_axis))


def _simplify_params(args) -> Dict:
    return {k: getattr(args, k) for k in ("method", "region", "k", "radius", "target", "stretch", "sigma",
                                          "seed", "ransac_iterations", "ransac_threshold",
                                          "negate_density_axis")}


def _ensure_parent(path: str):
    d = os.path.dirname(os.path.abspath(path))
    os.makedirs(d, exist_ok=True)


# ---------------------------------------------------------------------------
# stages (shared by the single commands and the pipeline)


def stage_label(cloud_path, cameras_path, rasters_dir, palette_path, out, fallback_arg, visibility_path=None):
    palette = read_palette(palette_path)
    cameras = read_cameras(cameras_path)
    cloud = read_ply(cloud_path)
    if visibility_path:
        cloud = cloud.replace(visibility=read_visibility(visibility_path, len(cloud)))
    rasters = _load_rasters(rasters_dir, cameras.ids)
    for r in rasters.values():
        r.check_palette(palette)
    ns = argparse.Namespace(fallback=fallback_arg)
    labeled = label_cloud(cloud, cameras, rasters, _fallback_label(ns, palette))
    _ensure_parent(out)
    write_ply(labeled.replace(visibility=None), out)
    log.info("labeled %d points -> %s", len(labeled), out)
    return labeled


def stage_simplify(cloud_path, palette_path, cfg: SimplifyConfig, out, visibility_path=None,
                   out_visibility=None):
    palette = read_palette(palette_path)
    cloud = read_ply(cloud_path)
    _check_labels(cloud, palette)
    vis = read_visibility(visibility_path, len(cloud)) if visibility_path else None
    result = simplify(cloud, cfg)
    kept = cloud.subset(result.keep)
    _ensure_parent(out)
    write_ply(kept, out)
    if vis is not None and out_visibility:
        idx = np.flatnonzero(result.keep)
        write_visibility([vis[i] for i in idx], out_visibility)
    log.info("kept %d of %d points -> %s", len(kept), len(cloud), out)
    return cloud, kept, palette


def stage_reconstruct(cloud_path, cameras_path, visibility_path, sigma_free, sigma_matter, out):
    cloud = read_ply(cloud_path)
    cameras = read_cameras(cameras_path)
    vis = read_visibility(visibility_path, len(cloud))
    unknown = sorted({c for row in vis for c in row} - set(cameras.ids))
    if unknown:
        raise ValidationError(f"visibility references unknown cameras {unknown}")
    surface, _ = reconstruct(cloud, cameras, vis, sigma_free, sigma_matter)
    _ensure_parent(out)
    write_off(surface, out)
    log.info("surface: %d vertices, %d triangles -> %s", len(surface.vertices), len(surface.triangles), out)
    return surface


def stage_render(mesh_path, cameras_path, out_dir, camera_ids=None) -> Dict[str, str]:
    mesh = read_off(mesh_path)
    cameras = read_cameras(cameras_path)
    os.makedirs(out_dir, exist_ok=True)
    written = {}
    for cam in cameras:
        if camera_ids and cam.id not in camera_ids:
            continue
        p = os.path.join(out_dir, f"cam_{cam.id}.depth")
        write_depth(render_depth(mesh, cam), p)
        written[f"depth_{cam.id}"] = p
    log.info("rendered %d depth maps -> %s", len(written), out_dir)
    return written


def stage_evaluate(mesh_path, cameras_path, truth_dir, report_path, rendered_dir=None,
                   before=None, after=None, palette_path=None, csv_path=None):
    mesh = read_off(mesh_path)
    cameras = read_cameras(cameras_path)
    truth = _load_truth(truth_dir, cameras.ids)
    rendered = None
    if rendered_dir:
        rendered = {}
        for cid in truth:
            p = os.path.join(rendered_dir, f"cam_{cid}.depth")
            rendered[cid] = read_depth(p) if os.path.exists(p) else render_depth(mesh, cameras[cid])
    report = evaluate_mesh(mesh, cameras, truth, rendered)
    if before and after and palette_path:
        palette = read_palette(palette_path)
        b, a = read_ply(before), read_ply(after)
        _check_labels(b, palette)
        _check_labels(a, palette)
        report.class_rows = cloud_stats(b, a, palette)
        if csv_path:
            with open(csv_path, "w", newline="\n") as f:
                f.write(stats_csv(report.class_rows))
    _ensure_parent(report_path)
    with open(report_path, "w", newline="\n") as f:
        f.write(report.text())
    log.info("global depth RMSE %.6f m over %d pixels", report.global_rmse, report.valid)
    return report


# ---------------------------------------------------------------------------
# commands


def cmd_label(args) -> int:
    _require(args, "cloud", "cameras", "rasters", "palette", "out")
    for p, what in ((args.cloud, "cloud"), (args.cameras, "cameras file"), (args.rasters, "raster directory"),
                    (args.palette, "palette")):
        _existing(p, what)
    stage_label(args.cloud, args.cameras, args.rasters, args.palette, args.out, args.fallback, args.visibility)
    write_manifest(_manifest_path(args.out), "label",
                   {"cloud": args.cloud, "cameras": args.cameras, "rasters": args.rasters,
                    "palette": args.palette, "visibility": args.visibility},
                   {"fallback": args.fallback, "seed": None}, {"cloud": args.out})
    return EXIT_OK


def cmd_simplify(args) -> int:
    _require(args, "cloud", "palette", "out")
    _existing(args.cloud, "cloud")
    _existing(args.palette, "palette")
    palette = read_palette(args.palette)
    cfg = _simplify_config(args, palette)
    if args.out_visibility and not args.visibility:
        raise ValidationError("--out-visibility needs --visibility")
    stage_simplify(args.cloud, args.palette, cfg, args.out, args.visibility, args.out_visibility)
    outputs = {"cloud": args.out}
    if args.out_visibility:
        outputs["visibility"] = args.out_visibility
    write_manifest(_manifest_path(args.out), "simplify",
                   {"cloud": args.cloud, "palette": args.palette, "visibility": args.visibility},
                   _simplify_params(args), outputs)
    return EXIT_OK


def cmd_reconstruct(args) -> int:
    _require(args, "cloud", "cameras", "visibility", "out")
    for p, what in ((args.cloud, "cloud"), (args.cameras, "cameras file"), (args.visibility, "visibility file")):
        _existing(p, what)
    stage_reconstruct(args.cloud, args.cameras, args.visibility, args.sigma_free, args.sigma_matter, args.out)
    write_manifest(_manifest_path(args.out), "reconstruct",
                   {"cloud": args.cloud, "cameras": args.cameras, "visibility": args.visibility},
                   {"sigma_free": args.sigma_free, "sigma_matter": args.sigma_matter, "seed": None},
                   {"mesh": args.out})
    return EXIT_OK


def cmd_render_depth(args) -> int:
    _require(args, "mesh", "cameras", "out_dir")
    _existing(args.mesh, "mesh")
    _existing(args.cameras, "cameras file")
    written = stage_render(args.mesh, args.cameras, args.out_dir, args.camera)
    write_manifest(os.path.join(args.out_dir, "render.manifest.json"), "render-depth",
                   {"mesh": args.mesh, "cameras": args.cameras}, {"camera": args.camera, "seed": None}, written)
    return EXIT_OK


def cmd_evaluate(args) -> int:
    _require(args, "mesh", "cameras", "truth", "report")
    for p, what in ((args.mesh, "mesh"), (args.cameras, "cameras file"), (args.truth, "truth directory")):
        _existing(p, what)
    stage_evaluate(args.mesh, args.cameras, args.truth, args.report, args.rendered,
                   args.before, args.after, args.palette, args.csv)
    outputs = {"report": args.report}
    if args.csv:
        outputs["csv"] = args.csv
    write_manifest(_manifest_path(args.report), "evaluate",
                   {"mesh": args.mesh, "cameras": args.cameras, "truth": args.truth, "rendered": args.rendered,
                    "before": args.before, "after": args.after, "palette": args.palette},
                   {"seed": None}, outputs)
    return EXIT_OK


def cmd_stats(args) -> int:
    if args.gen_synthetic:
        from .synthetic import make_main_scene, write_scene
        paths = write_scene(make_main_scene(seed=int(args.scene_seed)), args.gen_synthetic)
        write_manifest(os.path.join(args.gen_synthetic, "scene.manifest.json"), "stats --gen-synthetic", {},
                       {"seed": int(args.scene_seed)}, paths)
        log.info("synthetic scene written to %s", args.gen_synthetic)
        return EXIT_OK
    _require(args, "before", "after", "palette")
    palette = read_palette(_existing(args.palette, "palette"))
    b = read_ply(_existing(args.before, "cloud"))
    a = read_ply(_existing(args.after, "cloud"))
    _check_labels(b, palette)
    _check_labels(a, palette)
    rows = cloud_stats(b, a, palette)
    outputs = {}
    if args.csv:
        with open(args.csv, "w", newline="\n") as f:
            f.write(stats_csv(rows))
        outputs["csv"] = args.csv
    if args.table:
        with open(args.table, "w", newline="\n") as f:
            f.write(stats_table(rows))
        outputs["table"] = args.table
    if outputs:
        first = outputs.get("csv") or outputs["table"]
        write_manifest(_manifest_path(first), "stats",
                       {"before": args.before, "after": args.after, "palette": args.palette},
                       {"seed": None}, outputs)
    else:
        sys.stderr.write(stats_table(rows))
    return EXIT_OK


def cmd_pipeline(args) -> int:
    _require(args, "cloud", "cameras", "rasters", "visibility", "truth", "palette", "out_dir")
    for p, what in ((args.cloud, "cloud"), (args.cameras, "cameras file"), (args.rasters, "raster directory"),
                    (args.visibility, "visibility file"), (args.truth, "truth directory"),
                    (args.palette, "palette")):
        _existing(p, what)
    palette = read_palette(args.palette)
    cfg = None if args.no_simplify else _simplify_config(args, palette)
    out = args.out_dir
    os.makedirs(out, exist_ok=True)
    labeled = os.path.join(out, "labeled.ply")
    stage_label(args.cloud, args.cameras, args.rasters, args.palette, labeled, args.fallback, args.visibility)
    outputs = {"labeled": labeled}
    if cfg is not None:
        cloud_for_mesh = os.path.join(out, "simplified.ply")
        vis_for_mesh = os.path.join(out, "simplified_visibility.txt")
        stage_simplify(labeled, args.palette, cfg, cloud_for_mesh, args.visibility, vis_for_mesh)
        outputs.update(simplified=cloud_for_mesh, simplified_visibility=vis_for_mesh)
    else:
        cloud_for_mesh, vis_for_mesh = labeled, args.visibility
    mesh = os.path.join(out, "mesh.off")
    stage_reconstruct(cloud_for_mesh, args.cameras, vis_for_mesh, args.sigma_free, args.sigma_matter, mesh)
    outputs["mesh"] = mesh
    outputs.update(stage_render(mesh, args.cameras, os.path.join(out, "depth")))
    report = os.path.join(out, "report.txt")
    csv_path = os.path.join(out, "stats.csv")
    stage_evaluate(mesh, args.cameras, args.truth, report, os.path.join(out, "depth"),
                   labeled, cloud_for_mesh, args.palette, csv_path)
    outputs.update(report=report, stats=csv_path)
    params = _simplify_params(args)
    params.update(no_simplify=bool(args.no_simplify), sigma_free=args.sigma_free,
                  sigma_matter=args.sigma_matter, fallback=args.fallback)
    write_manifest(os.path.join(out, "manifest.json"), "pipeline",
                   {"cloud": args.cloud, "cameras": args.cameras, "rasters": args.rasters,
                    "visibility": args.visibility, "truth": args.truth, "palette": args.palette},
                   params, outputs)
    return EXIT_OK


# ---------------------------------------------------------------------------
# parser


def _add_simplify_options(p):
    p.add_argument("--method", help="one of ls, as, acs, ps (default ps)")
    p.add_argument("--region", help="region mode: knn or radius (default radius)")
    p.add_argument("--k", type=int, help="neighbours per knn region (default 16)")
    p.add_argument("--radius", type=float, help="region radius in meters (default 0.5)")
    p.add_argument("--target", type=float, help="target conservation factor in (0, 1) (default 0.4)")
    p.add_argument("--stretch", type=float, help="stretching factor of the adaptive curve (default 1)")
    p.add_argument("--sigma", type=float, help="Gaussian width in meters for ps (default half the region size)")
    p.add_argument("--ransac-iterations", type=int)
    p.add_argument("--ransac-threshold", type=float)
    p.add_argument("--negate-density-axis", action="store_true", default=None,
                   help="make denser regions keep fewer points in as/acs")


def _add_recon_options(p):
    p.add_argument("--sigma-free", type=float, help="free-space weight width in meters (default 0.05)")
    p.add_argument("--sigma-matter", type=float, help="matter weight width in meters (default 0.01)")


def build_parser() -> argparse.ArgumentParser:
    common = _Parser(add_help=False)
    common.add_argument("--config", help="key = value file; flags override it")
    common.add_argument("--seed", type=int, help=f"random seed (default {DEFAULT_SEED})")
    common.add_argument("--log-level", help="DEBUG, INFO, WARNING or ERROR")

    parser = _Parser(prog="semsimp", description=__doc__.split("\n")[0])
    parser.add_argument("--version", action="version", version=__version__)
    sub = parser.add_subparsers(dest="command", parser_class=_Parser)

    p = sub.add_parser("label", parents=[common], help="assign labels from segmentation rasters")
    p.add_argument("--cloud")
    p.add_argument("--cameras")
    p.add_argument("--rasters", help="directory with cam_<id>.pgm")
    p.add_argument("--palette")
    p.add_argument("--visibility", help="used when the cloud has no first_observer property")
    p.add_argument("--fallback", type=int, help="label for points projecting outside their raster")
    p.add_argument("--out")
    p.set_defaults(func=cmd_label)

    p = sub.add_parser("simplify", parents=[common], help="decimate simplifiable classes")
    p.add_argument("--cloud")
    p.add_argument("--palette")
    p.add_argument("--visibility", help="visibility file of the input cloud")
    p.add_argument("--out-visibility", help="write the visibility of the kept points here")
    p.add_argument("--out")
    _add_simplify_options(p)
    p.set_defaults(func=cmd_simplify)

    p = sub.add_parser("reconstruct", parents=[common], help="visibility-carved manifold surface")
    p.add_argument("--cloud")
    p.add_argument("--cameras")
    p.add_argument("--visibility")
    p.add_argument("--out")
    _add_recon_options(p)
    p.set_defaults(func=cmd_reconstruct)

    p = sub.add_parser("render-depth", parents=[common], help="render depth maps of a mesh")
    p.add_argument("--mesh")
    p.add_argument("--cameras")
    p.add_argument("--out-dir")
    p.add_argument("--camera", type=int, action="append", help="restrict to this camera id (repeatable)")
    p.set_defaults(func=cmd_render_depth)

    p = sub.add_parser("evaluate", parents=[common], help="depth RMSE against ground truth")
    p.add_argument("--mesh")
    p.add_argument("--cameras")
    p.add_argument("--truth", help="directory with cam_<id>.depth")
    p.add_argument("--rendered", help="directory with already rendered depth maps")
    p.add_argument("--before", help="cloud before simplification (for class counts)")
    p.add_argument("--after", help="cloud after simplification")
    p.add_argument("--palette")
    p.add_argument("--csv", help="write per-class counts as CSV")
    p.add_argument("--report")
    p.set_defaults(func=cmd_evaluate)

    p = sub.add_parser("stats", parents=[common], help="per-class retention table, or write the synthetic scene")
    p.add_argument("--before")
    p.add_argument("--after")
    p.add_argument("--palette")
    p.add_argument("--csv")
    p.add_argument("--table")
    p.add_argument("--gen-synthetic", metavar="DIR", help="write the bundled synthetic scene to DIR")
    p.add_argument("--scene-seed", type=int, help="noise seed of the synthetic scene (default 0)")
    p.set_defaults(func=cmd_stats)

    p = sub.add_parser("pipeline", parents=[common], help="label, simplify, reconstruct, render and evaluate")
    p.add_argument("--cloud")
    p.add_argument("--cameras")
    p.add_argument("--rasters")
    p.add_argument("--visibility")
    p.add_argument("--truth")
    p.add_argument("--palette")
    p.add_argument("--fallback", type=int)
    p.add_argument("--out-dir")
    p.add_argument("--no-simplify", action="store_true", default=None, help="skip the simplification stage")
    _add_simplify_options(p)
    _add_recon_options(p)
    p.set_defaults(func=cmd_pipeline)
    parser._subparsers_by_name = sub.choices
    return parser


def main(argv: Optional[List[str]] = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
        if not args.command:
            raise UsageError("a command is required: " + ", ".join(parser._subparsers_by_name))
        args = resolve(args, parser._subparsers_by_name[args.command])
    except (UsageError, ValidationError, ParseError, OSError) as exc:
        sys.stderr.write(f"semsimp: error: {exc}\n")
        return EXIT_INVALID
    logging.basicConfig(level=getattr(logging, str(args.log_level).upper(), logging.INFO),
                        format="%(levelname)s %(name)s: %(message)s", stream=sys.stderr)
    try:
        return args.func(args)
    except (ValidationError, ParseError, LabelingError, SimplifyError) as exc:
        log.error("%s", exc)
        return EXIT_INVALID
    except (DelaunayError, EvaluationError, OSError, RuntimeError, ValueError) as exc:
        log.error("%s", exc)
        return EXIT_RUNTIME


if __name__ == "__main__":
    sys.exit(main())
