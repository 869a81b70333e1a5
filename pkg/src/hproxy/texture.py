"""Multi-level texture features, positional-encoding fusion, MLP decoder, training.

Every level-1 vertex fuses the feature tables along its ancestor chain with
positional encodings of the parent-child offsets, top level first:

    fused = [ f_L | f_{L-1} | PE(p_{L-1} - p_L) | ... | f_1 | PE(p_1 - p_2) ]

The fused vector is decoded to RGB by a small dense network (tanh hidden
layers, sigmoid output). Training supports direct vertex-color regression
and the multi-view render loss; both use hand-rolled reverse-mode gradients
and an Adam optimizer with separate learning rates for feature tables and
decoder weights.
"""

from dataclasses import dataclass, field, replace
from typing import Callable, Iterable, Optional

import numpy as np

from .container import PayloadReader, PayloadWriter, read_container, write_container
from .hierarchy import ProxyHierarchy
from .mesh import Mesh
from .render import Camera, Image, rasterize

MODEL_MAGIC = b"HPXT"
MODEL_VERSION = 1


@dataclass
class TextureConfig:
    """Texture model shape. Defaults: per-level feature dims (32, 24, 12) for
    levels 1..3, 10 positional-encoding bands (60 dims), decoder with two
    hidden layers of 128, auxiliary-loss weight 0.5."""

    feature_dims: tuple = (32, 24, 12)
    pe_bands: int = 10
    hidden_width: int = 128
    hidden_layers: int = 2
    aux_weight: float = 0.5
    use_positional_encoding: bool = True

    def __post_init__(self):
        self.feature_dims = tuple(int(d) for d in self.feature_dims)

    @property
    def levels(self) -> int:
        return len(self.feature_dims)

    @property
    def pe_dim(self) -> int:
        return 6 * self.pe_bands if self.use_positional_encoding else 0

    @property
    def fused_dim(self) -> int:
        dims = self.feature_dims
        return dims[-1] + sum(dims[l] + self.pe_dim for l in range(len(dims) - 1))

    def validate(self) -> None:
        if self.levels < 2:
            raise ValueError("need at least 2 feature levels")
        if any(d < 1 for d in self.feature_dims):
            raise ValueError("feature dims must be positive")
        if self.pe_bands < 1:
            raise ValueError("pe_bands must be >= 1")
        if self.hidden_width < 1 or self.hidden_layers < 1:
            raise ValueError("decoder needs positive width and depth")


@dataclass
class TextureModel:
    """Per-level feature tables plus decoder weights."""

    features: list
    weights: list
    biases: list
    config: TextureConfig

    def copy(self) -> "TextureModel":
        return TextureModel(
            [f.copy() for f in self.features],
            [w.copy() for w in self.weights],
            [b.copy() for b in self.biases],
            replace(self.config),
        )

    def decoder_size(self) -> int:
        return sum(w.size for w in self.weights) + sum(b.size for b in self.biases)


def positional_encoding(delta: np.ndarray, bands: int = 10) -> np.ndarray:
    """Sinusoidal encoding of 3D offsets at frequencies 2^b * pi, b = 0..bands-1.

    Layout per axis: [sin(2^0 pi d), cos(2^0 pi d), ..., sin(2^{B-1} pi d),
    cos(2^{B-1} pi d)], axes concatenated; output length 6 * bands.
    """
    if bands < 1:
        raise ValueError("bands must be >= 1")
    d = np.asarray(delta, dtype=np.float64)
    single = d.ndim == 1
    d = d.reshape(-1, 3)
    freqs = (2.0 ** np.arange(bands)) * np.pi
    ang = d[:, :, None] * freqs  # (n, 3, B)
    enc = np.stack([np.sin(ang), np.cos(ang)], axis=-1).reshape(len(d), 6 * bands)
    return enc[0] if single else enc


def init_model(hierarchy: ProxyHierarchy, config: Optional[TextureConfig] = None, seed: int = 0) -> TextureModel:
    """Seeded initialization: features ~ U(-0.01, 0.01), decoder weights
    fan-in-scaled uniform, biases zero."""
    config = config or TextureConfig()
    config.validate()
    if config.levels != hierarchy.n_levels:
        raise ValueError(
            f"config has {config.levels} feature levels but hierarchy has {hierarchy.n_levels}"
        )
    rng = np.random.default_rng(seed)
    features = [
        rng.uniform(-0.01, 0.01, size=(len(hierarchy.levels[l]), config.feature_dims[l]))
        for l in range(config.levels)
    ]
    dims = [config.fused_dim] + [config.hidden_width] * config.hidden_layers + [3]
    weights = []
    biases = []
    for i in range(len(dims) - 1):
        bound = 1.0 / np.sqrt(dims[i])
        weights.append(rng.uniform(-bound, bound, size=(dims[i], dims[i + 1])))
        biases.append(np.zeros(dims[i + 1]))
    return TextureModel(features, weights, biases, config)


def validate_model(model: TextureModel, hierarchy: ProxyHierarchy) -> None:
    """Check the model's tables match the hierarchy's level sizes."""
    if model.config.levels != hierarchy.n_levels:
        raise ValueError(
            f"model has {model.config.levels} levels, hierarchy has {hierarchy.n_levels}"
        )
    for l, table in enumerate(model.features):
        if len(table) != len(hierarchy.levels[l]):
            raise ValueError(
                f"feature table at level {l + 1} has {len(table)} rows, "
                f"hierarchy has {len(hierarchy.levels[l])} points"
            )


@dataclass
class FusionPlan:
    """Cached per-vertex fusion structure: ancestor chains, fixed PE blocks,
    and the block layout of the fused vector.

    Positions (hence PE blocks) are frozen at plan construction; geometry
    edits mark the hierarchy dirty rather than silently changing fusions.
    """

    ancestors: np.ndarray  # (n1, L)
    pe_blocks: list  # per transition l -> l+1, (n1, pe_dim)
    layout: list  # ("feature", level) / ("pe", transition) with slices
    fused_dim: int


def build_fusion_plan(hierarchy: ProxyHierarchy, config: TextureConfig) -> FusionPlan:
    L = hierarchy.n_levels
    n1 = len(hierarchy.levels[0])
    ancestors = np.empty((n1, L), dtype=np.int64)
    ancestors[:, 0] = np.arange(n1)
    for l in range(1, L):
        parents = hierarchy.levels[l - 1].parents
        prev = ancestors[:, l - 1]
        nxt = parents[prev]
        if (nxt < 0).any():
            bad = int(prev[np.nonzero(nxt < 0)[0][0]])
            raise ValueError(f"broken parent chain: point {bad} at level {l} has no parent")
        ancestors[:, l] = nxt
    pe_blocks = []
    if config.use_positional_encoding:
        for l in range(L - 1):
            delta = (
                hierarchy.levels[l].positions[ancestors[:, l]]
                - hierarchy.levels[l + 1].positions[ancestors[:, l + 1]]
            )
            pe_blocks.append(positional_encoding(delta, config.pe_bands))
    layout = []
    offset = 0

    def block(kind, which, size):
        nonlocal offset
        layout.append((kind, which, slice(offset, offset + size)))
        offset += size

    block("feature", L - 1, config.feature_dims[L - 1])
    for l in range(L - 2, -1, -1):
        block("feature", l, config.feature_dims[l])
        if config.use_positional_encoding:
            block("pe", l, config.pe_dim)
    assert offset == config.fused_dim
    return FusionPlan(ancestors, pe_blocks, layout, offset)


def fuse_batch(model: TextureModel, plan: FusionPlan, idx: np.ndarray) -> np.ndarray:
    """Assemble the fused decoder inputs for a batch of level-1 vertices."""
    parts = []
    for kind, which, _ in plan.layout:
        if kind == "feature":
            parts.append(model.features[which][plan.ancestors[idx, which]])
        else:
            parts.append(plan.pe_blocks[which][idx])
    return np.concatenate(parts, axis=1)


def fuse_features(hierarchy: ProxyHierarchy, model: TextureModel, vertex_index: int) -> np.ndarray:
    """Fused feature vector of one vertex: top-level feature, then per level
    going down its own feature and PE(child - parent offset)."""
    validate_model(model, hierarchy)
    plan = build_fusion_plan(hierarchy, model.config)
    return fuse_batch(model, plan, np.array([vertex_index]))[0]


def decode_color(model: TextureModel, fused: np.ndarray) -> np.ndarray:
    """Forward pass of the decoder; output RGB in [0, 1]^3."""
    fused = np.asarray(fused, dtype=np.float64)
    single = fused.ndim == 1
    x = fused.reshape(1, -1) if single else fused
    if x.shape[1] != model.config.fused_dim:
        raise ValueError(f"fused input has dim {x.shape[1]}, decoder expects {model.config.fused_dim}")
    rgb, _ = _forward(model, x)
    return rgb[0] if single else rgb


def _sigmoid(z: np.ndarray) -> np.ndarray:
    out = np.empty_like(z)
    pos = z >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-z[pos]))
    ez = np.exp(z[~pos])
    out[~pos] = ez / (1.0 + ez)
    return out


def _forward(model: TextureModel, x: np.ndarray):
    hs = [x]
    for w, b in zip(model.weights[:-1], model.biases[:-1]):
        hs.append(np.tanh(hs[-1] @ w + b))
    z = hs[-1] @ model.weights[-1] + model.biases[-1]
    rgb = _sigmoid(z)
    return rgb, (hs, rgb)


@dataclass
class Gradients:
    """Dense gradients for every parameter; feature grads are full tables."""

    features: list
    weights: list
    biases: list


def backward(
    model: TextureModel,
    hierarchy_or_plan,
    batch_idx: np.ndarray,
    color_grad: np.ndarray,
    cache=None,
) -> Gradients:
    """Exact reverse-mode gradients of the decoded colors.

    color_grad is dLoss/dRGB per batch vertex. PE blocks are constants
    (positions fixed during texture training) so they receive no gradient;
    feature rows off the batch's ancestor chains stay zero.
    """
    plan = hierarchy_or_plan if isinstance(hierarchy_or_plan, FusionPlan) else build_fusion_plan(
        hierarchy_or_plan, model.config
    )
    batch_idx = np.asarray(batch_idx, dtype=np.int64)
    if cache is None:
        x = fuse_batch(model, plan, batch_idx)
        _, cache = _forward(model, x)
    hs, rgb = cache
    dz = np.asarray(color_grad, dtype=np.float64) * rgb * (1.0 - rgb)
    g_w = [np.zeros_like(w) for w in model.weights]
    g_b = [np.zeros_like(b) for b in model.biases]
    for i in range(len(model.weights) - 1, -1, -1):
        g_w[i] = hs[i].T @ dz
        g_b[i] = dz.sum(axis=0)
        if i > 0:
            dh = dz @ model.weights[i].T
            dz = dh * (1.0 - hs[i] * hs[i])
    dx = dz @ model.weights[0].T
    g_f = [np.zeros_like(f) for f in model.features]
    for kind, which, sl in plan.layout:
        if kind == "feature":
            np.add.at(g_f[which], plan.ancestors[batch_idx, which], dx[:, sl])
    return Gradients(g_f, g_w, g_b)


class Adam:
    """Adaptive-moment optimizer over a flat parameter list."""

    def __init__(self, params: list, beta1: float = 0.9, beta2: float = 0.999, eps: float = 1e-8):
        self.m = [np.zeros_like(p) for p in params]
        self.v = [np.zeros_like(p) for p in params]
        self.beta1 = beta1
        self.beta2 = beta2
        self.eps = eps
        self.t = 0

    def step(self, params: list, grads: list, lrs: list) -> None:
        self.t += 1
        b1c = 1.0 - self.beta1**self.t
        b2c = 1.0 - self.beta2**self.t
        for p, g, m, v, lr in zip(params, grads, self.m, self.v, lrs):
            m *= self.beta1
            m += (1.0 - self.beta1) * g
            v *= self.beta2
            v += (1.0 - self.beta2) * (g * g)
            p -= lr * (m / b1c) / (np.sqrt(v / b2c) + self.eps)


def _param_lists(model: TextureModel, lr_features: float, lr_decoder: float, frozen_levels: Iterable[int]):
    frozen = {int(l) for l in frozen_levels}
    params, lrs, keys = [], [], []
    for l, f in enumerate(model.features):
        if (l + 1) not in frozen:
            params.append(f)
            lrs.append(lr_features)
            keys.append(("feature", l))
    for i, (w, b) in enumerate(zip(model.weights, model.biases)):
        params.append(w)
        lrs.append(lr_decoder)
        keys.append(("weight", i))
        params.append(b)
        lrs.append(lr_decoder)
        keys.append(("bias", i))
    return params, lrs, keys


def _pick_grads(grads: Gradients, keys) -> list:
    out = []
    for kind, i in keys:
        if kind == "feature":
            out.append(grads.features[i])
        elif kind == "weight":
            out.append(grads.weights[i])
        else:
            out.append(grads.biases[i])
    return out


def train_vertex_colors(
    model: TextureModel,
    hierarchy: ProxyHierarchy,
    mesh: Mesh,
    iterations: int,
    batch_size: int = 128,
    lr_features: float = 1e-2,
    lr_decoder: float = 1e-3,
    seed: int = 0,
    frozen_feature_levels: Iterable[int] = (),
) -> list:
    """Fit decoded colors to the mesh's per-vertex colors by MSE.

    In-place on the model; returns the per-iteration loss history.
    Deterministic for a fixed seed.
    """
    if mesh.colors is None:
        raise ValueError("mesh has no vertex colors to fit")
    validate_model(model, hierarchy)
    if mesh.n_vertices != len(hierarchy.levels[0]):
        raise ValueError("mesh and hierarchy vertex counts differ")
    plan = build_fusion_plan(hierarchy, model.config)
    targets = mesh.colors
    n = mesh.n_vertices
    rng = np.random.default_rng(seed)
    params, lrs, keys = _param_lists(model, lr_features, lr_decoder, frozen_feature_levels)
    opt = Adam(params)
    history = []
    for _ in range(int(iterations)):
        idx = rng.integers(0, n, size=batch_size)
        x = fuse_batch(model, plan, idx)
        rgb, cache = _forward(model, x)
        err = rgb - targets[idx]
        loss = float(np.mean(err**2))
        grad = 2.0 * err / err.size
        grads = backward(model, plan, idx, grad, cache)
        opt.step(params, _pick_grads(grads, keys), lrs)
        history.append(loss)
    return history


def render_views(
    mesh: Mesh, colors: np.ndarray, cameras: list, background=(0.0, 0.0, 0.0)
) -> list:
    return [rasterize(mesh, colors, cam, background) for cam in cameras]


def train_render_loss(
    model: TextureModel,
    hierarchy: ProxyHierarchy,
    mesh: Mesh,
    views: list,
    iterations: int,
    aux_weight: Optional[float] = None,
    aux_loss: Optional[Callable[[TextureModel], float]] = None,
    lr_features: float = 1e-2,
    lr_decoder: float = 1e-3,
    seed: int = 0,
    frozen_feature_levels: Iterable[int] = (),
    background=(0.0, 0.0, 0.0),
) -> list:
    """Fit the model through the rasterizer: MSE over covered pixels of all views.

    views is a list of (Camera, target Image). Geometry is fixed, so each
    view's coverage is rasterized once and pixel gradients flow to vertex
    colors through the cached barycentric records. The auxiliary term is a
    hook (weight defaults to the config's aux_weight); no auxiliary head
    ships, so it contributes exactly zero unless a callable is supplied.
    """
    if not views:
        raise ValueError("need at least one view")
    validate_model(model, hierarchy)
    lam = model.config.aux_weight if aux_weight is None else float(aux_weight)
    plan = build_fusion_plan(hierarchy, model.config)
    n = mesh.n_vertices
    packs = []
    for cam, target in views:
        tgt = target.pixels if isinstance(target, Image) else np.asarray(target, dtype=np.float64)
        if tgt.shape[:2] != (cam.height, cam.width):
            raise ValueError(
                f"target resolution {tgt.shape[1]}x{tgt.shape[0]} does not match "
                f"camera {cam.width}x{cam.height}"
            )
        cov = rasterize(mesh, np.zeros((n, 3)), cam, background).coverage
        m = cov.mask
        tri = cov.faces[cov.face_index[m]]
        packs.append((tri, cov.bary[m], tgt[m]))
    n_cov = sum(len(p[0]) for p in packs)
    if n_cov == 0:
        raise ValueError("no view covers the mesh")
    all_idx = np.arange(n)
    params, lrs, keys = _param_lists(model, lr_features, lr_decoder, frozen_feature_levels)
    opt = Adam(params)
    history = []
    for _ in range(int(iterations)):
        x = fuse_batch(model, plan, all_idx)
        colors, cache = _forward(model, x)
        loss = 0.0
        dcol = np.zeros((n, 3))
        for tri, b, tgt in packs:
            c0 = colors[tri[:, 0]]
            pred = c0 + b[:, 1, None] * (colors[tri[:, 1]] - c0) + b[:, 2, None] * (colors[tri[:, 2]] - c0)
            err = pred - tgt
            loss += float(np.sum(err**2))
            g = 2.0 * err / (n_cov * 3)
            for k in range(3):
                np.add.at(dcol, tri[:, k], b[:, k, None] * g)
        loss /= n_cov * 3
        if aux_loss is not None:
            loss += lam * float(aux_loss(model))
        grads = backward(model, plan, all_idx, dcol, cache)
        opt.step(params, _pick_grads(grads, keys), lrs)
        history.append(loss)
    return history


def decode_vertex_colors(model: TextureModel, hierarchy: ProxyHierarchy, plan: Optional[FusionPlan] = None) -> np.ndarray:
    """Decoded RGB for every level-1 vertex."""
    validate_model(model, hierarchy)
    if plan is None:
        plan = build_fusion_plan(hierarchy, model.config)
    x = fuse_batch(model, plan, np.arange(len(hierarchy.levels[0])))
    rgb, _ = _forward(model, x)
    return rgb


def count_parameters(hierarchy: ProxyHierarchy, model: Optional[TextureModel] = None) -> dict:
    """Parameter accounting: geometry = 6 scalars per proxy point (position +
    normal); texture adds the feature tables and decoder weights."""
    sizes = hierarchy.level_sizes()
    geometry = sum(n * 6 for n in sizes)
    out = {"geometry": geometry}
    if model is not None:
        feat = sum(f.size for f in model.features)
        dec = model.decoder_size()
        out.update(
            {
                "texture_features": feat,
                "decoder": dec,
                "geometry_plus_texture": geometry + feat + dec,
            }
        )
    return out


def save_model(model: TextureModel, path, optimizer: Optional[Adam] = None) -> None:
    """Versioned, checksummed binary model container (optimizer state optional)."""
    w = PayloadWriter()
    cfg = model.config
    w.scalar("I", cfg.levels)
    for d in cfg.feature_dims:
        w.scalar("I", d)
    w.scalar("I", cfg.pe_bands).scalar("B", 1 if cfg.use_positional_encoding else 0)
    w.scalar("I", cfg.hidden_width).scalar("I", cfg.hidden_layers).scalar("d", cfg.aux_weight)
    for table in model.features:
        w.scalar("Q", table.shape[0]).scalar("I", table.shape[1]).array(table, "<f8")
    w.scalar("I", len(model.weights))
    for wm, bm in zip(model.weights, model.biases):
        w.scalar("I", wm.shape[0]).scalar("I", wm.shape[1])
        w.array(wm, "<f8").array(bm, "<f8")
    if optimizer is None:
        w.scalar("B", 0)
    else:
        w.scalar("B", 1).scalar("Q", optimizer.t)
        w.scalar("d", optimizer.beta1).scalar("d", optimizer.beta2).scalar("d", optimizer.eps)
        for slot in (optimizer.m, optimizer.v):
            for arr in slot:
                w.array(arr, "<f8")
    write_container(path, MODEL_MAGIC, MODEL_VERSION, w.bytes())


def load_model(path) -> TextureModel:
    _, payload = read_container(path, MODEL_MAGIC, MODEL_VERSION)
    r = PayloadReader(payload)
    levels = r.scalar("I")
    dims = tuple(r.scalar("I") for _ in range(levels))
    pe_bands = r.scalar("I")
    use_pe = bool(r.scalar("B"))
    hidden_width = r.scalar("I")
    hidden_layers = r.scalar("I")
    aux_weight = r.scalar("d")
    cfg = TextureConfig(dims, pe_bands, hidden_width, hidden_layers, aux_weight, use_pe)
    features = []
    for _ in range(levels):
        n = r.scalar("Q")
        k = r.scalar("I")
        features.append(r.array(n * k, "<f8").reshape(n, k))
    weights, biases = [], []
    for _ in range(r.scalar("I")):
        din = r.scalar("I")
        dout = r.scalar("I")
        weights.append(r.array(din * dout, "<f8").reshape(din, dout))
        biases.append(r.array(dout, "<f8"))
    return TextureModel(features, weights, biases, cfg)
