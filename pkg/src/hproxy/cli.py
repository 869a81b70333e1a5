"""Command-line pipeline: build, train, render, eval, edit, fixture, serve.

Exit codes: 0 success, 1 usage/validation, 2 I/O or file format, 3 numeric
failure. Every command is reproducible from its config file and seed.
"""

import argparse
import json
import os
import sys
from dataclasses import dataclass, fields
from pathlib import Path

import numpy as np

from . import __version__
from .container import ContainerError
from .edit import DragEdit, ScriptError, SolverError, apply_edit, parse_edit_script, transfer_features
from .fixtures import fixture_mesh
from .hierarchy import HierarchyConfig, build_hierarchy, hierarchy_debug_json, load_hierarchy, save_hierarchy
from .mesh import Mesh, chamfer_distance, compute_vertex_normals, normalize_to_cube, sample_surface
from .meshio import MeshFormatError, load_mesh, save_mesh
from .render import Camera, fibonacci_cameras, psnr, rasterize, ssim, write_png
from .texture import (
    TextureConfig,
    count_parameters,
    decode_vertex_colors,
    init_model,
    load_model,
    save_model,
    train_render_loss,
    train_vertex_colors,
    validate_model,
)


class UsageError(ValueError):
    pass


@dataclass
class RunConfig:
    """Every tunable of the pipeline with its documented default.

    Hierarchy: 3 levels, octree resolution exponent 7, clustering error
    threshold 5.0. Texture: feature dims 32,24,12, positional embedding
    dimension 60 (10 bands), decoder 2x128, auxiliary loss weight 0.5.
    Editing: drag temperature 1.0. The rest is artifact plumbing.
    """

    levels: int = 3
    max_resolution_exponent: int = 7
    error_threshold: float = 5.0
    rank_tolerance: float = 1e-8
    half_extent: float = 0.9
    feature_dims: str = "32,24,12"
    pe_bands: int = 10
    hidden_width: int = 128
    hidden_layers: int = 2
    aux_weight: float = 0.5
    use_positional_encoding: bool = True
    seed: int = 0
    iterations: int = 2000
    batch_size: int = 128
    lr_features: float = 1e-2
    lr_decoder: float = 1e-3
    train_views: int = 8
    train_resolution: int = 96
    eval_views: int = 50
    eval_resolution: int = 128
    camera_radius: float = 2.5
    camera_fov: float = 40.0
    cd_samples: int = 100000
    constraint_strength: float = 10.0

    @classmethod
    def from_file(cls, path) -> "RunConfig":
        cfg = cls()
        text = Path(path).read_text()
        known = {f.name: f for f in fields(cls)}
        for lineno, raw in enumerate(text.splitlines(), start=1):
            line = raw.split("#", 1)[0].strip()
            if not line:
                continue
            if "=" not in line:
                raise UsageError(f"{path}:{lineno}: expected 'key = value'")
            key, _, value = line.partition("=")
            key = key.strip()
            value = value.strip()
            if key not in known:
                raise UsageError(f"{path}:{lineno}: unknown config key {key!r}")
            ftype = known[key].type
            try:
                if ftype == "bool" or ftype is bool:
                    parsed = value.lower() in ("1", "true", "yes")
                elif ftype == "int" or ftype is int:
                    parsed = int(value)
                elif ftype == "float" or ftype is float:
                    parsed = float(value)
                else:
                    parsed = value
            except ValueError:
                raise UsageError(f"{path}:{lineno}: bad value for {key}: {value!r}")
            setattr(cfg, key, parsed)
        return cfg

    def to_file(self, path) -> None:
        lines = [f"{f.name} = {getattr(self, f.name)}" for f in fields(self)]
        Path(path).write_text("\n".join(lines) + "\n")

    def hierarchy_config(self) -> HierarchyConfig:
        return HierarchyConfig(
            levels=self.levels,
            max_resolution_exponent=self.max_resolution_exponent,
            error_threshold=self.error_threshold,
            rank_tolerance=self.rank_tolerance,
        )

    def texture_config(self) -> TextureConfig:
        dims = tuple(int(t) for t in str(self.feature_dims).split(",") if t.strip())
        return TextureConfig(
            feature_dims=dims,
            pe_bands=self.pe_bands,
            hidden_width=self.hidden_width,
            hidden_layers=self.hidden_layers,
            aux_weight=self.aux_weight,
            use_positional_encoding=self.use_positional_encoding,
        )

    def eval_cameras(self, width=None, height=None):
        side = self.eval_resolution
        return fibonacci_cameras(
            count=self.eval_views,
            radius=self.camera_radius,
            vertical_fov=self.camera_fov,
            width=width or side,
            height=height or side,
            seed=self.seed,
        )


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(message)


def _add_config_args(p: _Parser) -> None:
    p.add_argument("--config", help="key = value config file; flags override it")
    p.add_argument("--save-config", help="write the effective config to this path")
    for f in fields(RunConfig):
        flag = "--" + f.name.replace("_", "-")
        if f.type == "bool" or f.type is bool:
            p.add_argument(flag, type=lambda s: s.lower() in ("1", "true", "yes"), default=None, metavar="BOOL")
        else:
            p.add_argument(flag, type=type(f.default), default=None, help=f"default: {f.default}")


def _effective_config(args) -> RunConfig:
    cfg = RunConfig.from_file(args.config) if args.config else RunConfig()
    for f in fields(RunConfig):
        value = getattr(args, f.name, None)
        if value is not None:
            setattr(cfg, f.name, value)
    if args.save_config:
        cfg.to_file(args.save_config)
    return cfg


def _parse_vec3(text: str) -> np.ndarray:
    parts = [p for p in text.replace(",", " ").split() if p]
    if len(parts) != 3:
        raise UsageError(f"expected 3 comma-separated numbers, got {text!r}")
    return np.array([float(p) for p in parts])


def _camera_from_args(args, cfg: RunConfig) -> Camera:
    return Camera(
        position=_parse_vec3(args.camera),
        look_at=_parse_vec3(args.look_at),
        up=_parse_vec3(args.up),
        vertical_fov=args.fov if args.fov is not None else cfg.camera_fov,
        width=args.width,
        height=args.height,
    )


def cmd_build(args) -> int:
    cfg = _effective_config(args)
    mesh = load_mesh(args.mesh)
    if args.no_normalize:
        normalized = mesh
    else:
        normalized, _ = normalize_to_cube(mesh, cfg.half_extent)
    if normalized.normals is None:
        normalized.normals = compute_vertex_normals(normalized)
    hierarchy = build_hierarchy(normalized, cfg.hierarchy_config())
    save_hierarchy(hierarchy, args.output)
    if args.normalized_mesh_out:
        save_mesh(normalized, args.normalized_mesh_out)
    if args.debug_json:
        Path(args.debug_json).write_text(hierarchy_debug_json(hierarchy))
    sizes = hierarchy.level_sizes()
    rates = hierarchy.merge_rates()
    for l, n in enumerate(sizes, start=1):
        print(f"level {l}: {n} proxy points")
    for l, r in enumerate(rates, start=1):
        print(f"merge rate {l}->{l + 1}: {r:.4f}")
    print(f"hierarchy written to {args.output}")
    return 0


def cmd_train(args) -> int:
    cfg = _effective_config(args)
    mesh = load_mesh(args.mesh)
    hierarchy = load_hierarchy(args.hierarchy)
    if mesh.n_vertices != len(hierarchy.levels[0]):
        raise UsageError(
            f"mesh has {mesh.n_vertices} vertices but hierarchy level 1 has {len(hierarchy.levels[0])}"
        )
    if mesh.colors is None:
        raise UsageError("training needs a mesh with vertex colors")
    tex_cfg = cfg.texture_config()
    if tex_cfg.levels != hierarchy.n_levels:
        raise UsageError(
            f"feature_dims has {tex_cfg.levels} entries for a {hierarchy.n_levels}-level hierarchy"
        )
    model = init_model(hierarchy, tex_cfg, seed=cfg.seed)
    if args.mode == "vertex":
        history = train_vertex_colors(
            model,
            hierarchy,
            mesh,
            iterations=cfg.iterations,
            batch_size=cfg.batch_size,
            lr_features=cfg.lr_features,
            lr_decoder=cfg.lr_decoder,
            seed=cfg.seed,
        )
    else:
        if cfg.train_views < 1:
            raise UsageError("render mode needs at least 1 view")
        cams = fibonacci_cameras(
            count=cfg.train_views,
            radius=cfg.camera_radius,
            vertical_fov=cfg.camera_fov,
            width=cfg.train_resolution,
            height=cfg.train_resolution,
            seed=cfg.seed,
        )
        views = [(cam, rasterize(mesh, mesh.colors, cam)) for cam in cams]
        history = train_render_loss(
            model,
            hierarchy,
            mesh,
            views,
            iterations=cfg.iterations,
            lr_features=cfg.lr_features,
            lr_decoder=cfg.lr_decoder,
            seed=cfg.seed,
        )
    save_model(model, args.output)
    if args.loss_csv:
        with open(args.loss_csv, "w") as fh:
            fh.write("iteration,loss\n")
            for i, loss in enumerate(history):
                fh.write(f"{i},{loss!r}\n")
    final = history[-1] if history else float("nan")
    print(f"trained {len(history)} iterations, final loss {final:.6e}")
    print(f"model written to {args.output}")
    return 0


def cmd_render(args) -> int:
    cfg = _effective_config(args)
    mesh = load_mesh(args.mesh)
    if args.model and args.hierarchy:
        hierarchy = load_hierarchy(args.hierarchy)
        model = load_model(args.model)
        validate_model(model, hierarchy)
        colors = decode_vertex_colors(model, hierarchy)
    elif mesh.colors is not None:
        colors = mesh.colors
    else:
        raise UsageError("mesh has no colors; pass --model and --hierarchy to decode them")
    camera = _camera_from_args(args, cfg)
    image = rasterize(mesh, colors, camera, background=_parse_vec3(args.background))
    write_png(image, args.output)
    print(f"render written to {args.output}")
    return 0


def cmd_eval(args) -> int:
    cfg = _effective_config(args)
    mesh = load_mesh(args.mesh)
    hierarchy = load_hierarchy(args.hierarchy)
    model = load_model(args.model)
    validate_model(model, hierarchy)
    reference = load_mesh(args.reference)
    if reference.colors is None:
        raise UsageError("reference mesh needs vertex colors for PSNR/SSIM")

    cloud_a = sample_surface(mesh, cfg.cd_samples, seed=cfg.seed)
    cloud_b = sample_surface(reference, cfg.cd_samples, seed=cfg.seed)
    cd = chamfer_distance(cloud_a, cloud_b)

    decoded = decode_vertex_colors(model, hierarchy)
    cams = cfg.eval_cameras()
    psnrs = []
    ssims = []
    for cam in cams:
        img_ref = rasterize(reference, reference.colors, cam)
        img_pred = rasterize(mesh, decoded, cam)
        psnrs.append(psnr(img_ref, img_pred))
        ssims.append(ssim(img_ref, img_pred))
    params = count_parameters(hierarchy, model)
    metrics = {
        "cd": cd,
        "psnr_mean": float(np.mean(psnrs)),
        "ssim_mean": float(np.mean(ssims)),
        "psnr_per_view": [float(x) for x in psnrs],
        "ssim_per_view": [float(x) for x in ssims],
        "params": params,
        "protocol": {
            "views": cfg.eval_views,
            "resolution": cfg.eval_resolution,
            "camera_radius": cfg.camera_radius,
            "camera_fov": cfg.camera_fov,
            "cd_samples": cfg.cd_samples,
            "seed": cfg.seed,
        },
    }
    Path(args.output).write_text(json.dumps(metrics, indent=1) + "\n")
    print(f"cd {cd:.6e}  psnr {metrics['psnr_mean']:.2f} dB  ssim {metrics['ssim_mean']:.4f}")
    print(f"params (G) {params['geometry']}  (G+T) {params['geometry_plus_texture']}")
    print(f"metrics written to {args.output}")
    return 0


def cmd_edit(args) -> int:
    cfg = _effective_config(args)
    mesh = load_mesh(args.mesh)
    hierarchy = load_hierarchy(args.hierarchy)
    model = load_model(args.model)
    validate_model(model, hierarchy)
    if mesh.n_vertices != len(hierarchy.levels[0]):
        raise UsageError("mesh and hierarchy vertex counts differ")
    script = Path(args.script).read_text()
    edits = parse_edit_script(script)
    for edit in edits:
        if isinstance(edit, DragEdit):
            mesh, hierarchy = apply_edit(mesh, hierarchy, edit, cfg.constraint_strength)
        else:
            model = transfer_features(model, hierarchy, edit)
    outdir = Path(args.outdir)
    outdir.mkdir(parents=True, exist_ok=True)
    save_mesh(mesh, outdir / "edited.obj")
    save_model(model, outdir / "edited_model.hpm")
    save_hierarchy(hierarchy, outdir / "edited_hierarchy.hpx")
    if args.render:
        camera = _camera_from_args(args, cfg)
        colors = decode_vertex_colors(model, hierarchy)
        write_png(rasterize(mesh, colors, camera), outdir / "edited.png")
    print(f"applied {len(edits)} edits; outputs in {outdir}")
    return 0


def cmd_fixture(args) -> int:
    mesh = fixture_mesh(args.name, colors=args.colors)
    save_mesh(mesh, args.output)
    print(f"{args.name}: {mesh.n_vertices} vertices, {mesh.n_faces} faces -> {args.output}")
    return 0


def cmd_serve(args) -> int:
    import uvicorn

    from .service import create_app

    app = create_app(allow_origin=args.allow_origin)
    uvicorn.run(app, host=args.host, port=args.port, log_level="warning")
    return 0


def build_parser() -> _Parser:
    parser = _Parser(prog="hproxy", description=__doc__)
    parser.add_argument("--version", action="version", version=f"hproxy {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("build", help="normalize a mesh and build its proxy hierarchy")
    p.add_argument("mesh")
    p.add_argument("-o", "--output", required=True, help="hierarchy file to write (.hpx)")
    p.add_argument("--normalized-mesh-out", help="write the normalized mesh here")
    p.add_argument("--no-normalize", action="store_true", help="mesh is already in the grid domain")
    p.add_argument("--debug-json", help="write a human-readable JSON dump (debug only)")
    _add_config_args(p)
    p.set_defaults(func=cmd_build)

    p = sub.add_parser("train", help="fit texture features and decoder")
    p.add_argument("mesh")
    p.add_argument("hierarchy")
    p.add_argument("-o", "--output", required=True, help="model file to write (.hpm)")
    p.add_argument("--mode", choices=("vertex", "render"), default="vertex")
    p.add_argument("--loss-csv", help="write per-iteration loss CSV here")
    _add_config_args(p)
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("render", help="rasterize a mesh to PNG")
    p.add_argument("mesh")
    p.add_argument("-o", "--output", required=True)
    p.add_argument("--model", help="decode colors from this model")
    p.add_argument("--hierarchy", help="hierarchy for --model")
    p.add_argument("--camera", default="0,0,2.5", help="camera position x,y,z")
    p.add_argument("--look-at", default="0,0,0")
    p.add_argument("--up", default="0,1,0")
    p.add_argument("--fov", type=float, default=None)
    p.add_argument("--width", type=int, default=256)
    p.add_argument("--height", type=int, default=256)
    p.add_argument("--background", default="0,0,0")
    _add_config_args(p)
    p.set_defaults(func=cmd_render)

    p = sub.add_parser("eval", help="CD / PSNR / SSIM / parameter counts")
    p.add_argument("mesh")
    p.add_argument("hierarchy")
    p.add_argument("model")
    p.add_argument("--reference", required=True, help="ground-truth colored mesh")
    p.add_argument("-o", "--output", required=True, help="metrics JSON to write")
    _add_config_args(p)
    p.set_defaults(func=cmd_eval)

    p = sub.add_parser("edit", help="replay an edit script")
    p.add_argument("mesh")
    p.add_argument("hierarchy")
    p.add_argument("model")
    p.add_argument("script")
    p.add_argument("-o", "--outdir", required=True)
    p.add_argument("--render", action="store_true", help="also render the edited mesh")
    p.add_argument("--camera", default="0,0,2.5")
    p.add_argument("--look-at", default="0,0,0")
    p.add_argument("--up", default="0,1,0")
    p.add_argument("--fov", type=float, default=None)
    p.add_argument("--width", type=int, default=256)
    p.add_argument("--height", type=int, default=256)
    _add_config_args(p)
    p.set_defaults(func=cmd_edit)

    p = sub.add_parser("fixture", help="write a procedural test mesh")
    p.add_argument("name", choices=("icosphere", "torus", "cube"))
    p.add_argument("-o", "--output", required=True)
    p.add_argument("--colors", choices=("bands", "gradient", "none"), default="bands")
    p.set_defaults(func=cmd_fixture)

    p = sub.add_parser("serve", help="run the HTTP editing service")
    p.add_argument("--host", default=os.environ.get("HPROXY_HOST", "127.0.0.1"))
    p.add_argument("--port", type=int, default=int(os.environ.get("HPROXY_PORT", "8008")))
    p.add_argument("--allow-origin", default=os.environ.get("HPROXY_ALLOW_ORIGIN", "*"))
    p.set_defaults(func=cmd_serve)

    return parser


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
        return args.func(args)
    except UsageError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except ScriptError as exc:
        print(f"error: edit script {exc}", file=sys.stderr)
        return 1
    except (SolverError, np.linalg.LinAlgError, FloatingPointError) as exc:
        print(f"numeric error: {exc}", file=sys.stderr)
        return 3
    except (MeshFormatError, ContainerError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except ValueError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
