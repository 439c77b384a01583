"""Dataset construction, training, and the evaluation protocol.

Degradation is separable bicubic resampling (Catmull-Rom kernel,
a = -0.5) with kernel widening on downscale for anti-aliasing.  The
resampler is orientation-canonical: results commute exactly with flips
(and with 90-degree rotation on square images), which keeps geometric
augmentation and degradation interchangeable bit for bit.

Metrics follow a fixed aggregation order: PSNR/SSIM per view, averaged
into a per-scene value (angular-super-resolution scoring skips the
views that were network inputs), then averaged over scenes.
"""

from __future__ import annotations

import json
import math
import struct
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import autodiff as ad
from . import core, optics
from .autodiff import Tensor
from .core import LightField4D

LF4D_MAGIC = b"LF4D"


# ---------------------------------------------------------------------------
# bicubic resampling

def _cubic_kernel(x: np.ndarray) -> np.ndarray:
    """Catmull-Rom kernel (bicubic convolution, a = -0.5), support (-2, 2)."""
    ax = np.abs(x)
    near = (1.5 * ax - 2.5) * ax * ax + 1.0
    far = ((-0.5 * ax + 2.5) * ax - 4.0) * ax + 2.0
    return np.where(ax <= 1.0, near, np.where(ax < 2.0, far, 0.0))


_MATRIX_CACHE: dict[tuple[int, int], np.ndarray] = {}


def _resize_matrix(n_in: int, n_out: int) -> np.ndarray:
    """Dense 1D resampling matrix for one axis.

    Output sample i reads source coordinate (i + 0.5) / f - 0.5 with
    f = n_out / n_in; on downscale the kernel is widened by 1 / f.  Taps
    beyond the ends fold onto the edge sample (replication).  Rows are
    normalized to unit sum; at the supported power-of-two factors the
    sums are already exactly 1, so this is a no-op there.
    """
    key = (n_in, n_out)
    if key in _MATRIX_CACHE:
        return _MATRIX_CACHE[key]
    f = n_out / n_in
    scale = min(f, 1.0)
    radius = 2.0 / scale
    m = np.zeros((n_out, n_in), dtype=np.float64)
    for i in range(n_out):
        src = (i + 0.5) / f - 0.5
        j0 = int(math.ceil(src - radius))
        j1 = int(math.floor(src + radius))
        w = _cubic_kernel((np.arange(j0, j1 + 1) - src) * scale) * scale
        total = w.sum()
        for j, wj in zip(range(j0, j1 + 1), w / total):
            m[i, min(max(j, 0), n_in - 1)] += wj
    _MATRIX_CACHE[key] = m
    return m


def _resize_once(a: np.ndarray, ny: int, nx: int) -> np.ndarray:
    my = _resize_matrix(a.shape[-2], ny)
    mx = _resize_matrix(a.shape[-1], nx)
    return np.matmul(np.matmul(my, a), mx.T)


def bicubic_resize(img: np.ndarray, factor: float) -> np.ndarray:
    """Bicubic resampling of the last two axes by ``factor``.

    Factors 2, 4, 1/2 and 1/4 are the supported degradation settings
    (other positive factors work but are not pinned by reference
    vectors).  The result is averaged with its flip-conjugate
    evaluations, which makes the operation exactly equivariant to
    horizontal/vertical flips, and to transposition (hence rot90) on
    square inputs.
    """
    a = np.asarray(img, dtype=np.float64)
    if a.ndim < 2:
        raise ValueError("need at least 2 axes to resize")
    ny = max(1, round(a.shape[-2] * factor))
    nx = max(1, round(a.shape[-1] * factor))
    if factor <= 0:
        raise ValueError("resize factor must be positive")

    def f0(v):
        return _resize_once(v, ny, nx)

    def f1(v):  # exact fliplr equivariance
        return 0.5 * (f0(v) + f0(v[..., ::-1])[..., ::-1])

    def f2(v):  # exact flipud equivariance on top
        return 0.5 * (f1(v) + f1(v[..., ::-1, :])[..., ::-1, :])

    if a.shape[-1] == a.shape[-2] and ny == nx:
        swap = tuple(range(a.ndim - 2)) + (a.ndim - 1, a.ndim - 2)
        return 0.5 * (f2(a) + f2(a.transpose(swap)).transpose(swap))
    return f2(a)


# ---------------------------------------------------------------------------
# color protocol

def rgb_to_y(img: np.ndarray) -> np.ndarray:
    """BT.601 luma of an RGB image in [0, 1]: leading axis is channels."""
    if img.shape[0] != 3:
        raise ValueError(f"rgb_to_y expects 3 channels first, got shape {img.shape}")
    r, g, b = img[0], img[1], img[2]
    y = (65.481 * r + 128.553 * g + 24.966 * b + 16.0) / 255.0
    return y[None]


# ---------------------------------------------------------------------------
# dataset construction

def make_ssr_pair(hr_lf: LightField4D, scale: int) -> tuple[LightField4D, LightField4D]:
    """Degrade a high-resolution light field per view by bicubic 1/scale."""
    y, x = hr_lf.spatial
    if y % scale or x % scale:
        raise ValueError(f"spatial size {(y, x)} not divisible by scale {scale}")
    lr = bicubic_resize(hr_lf.data, 1.0 / scale)
    return LightField4D(lr), hr_lf


def make_asr_pair(dense_lf: LightField4D) -> tuple[LightField4D, LightField4D]:
    """Select the four corner views of a 7x7 light field as the sparse input."""
    u, v = dense_lf.angular
    if (u, v) != (7, 7):
        raise ValueError(f"angular super-resolution pairing expects 7x7 views, got {u}x{v}")
    sparse = dense_lf.data[:, ::6, ::6].copy()
    return LightField4D(sparse), dense_lf


def crop_patches(lf: LightField4D, size: int, stride: int) -> np.ndarray:
    """Deterministic spatial patch grid; returns [N, C, U, V, size, size]."""
    y, x = lf.spatial
    if size > y or size > x:
        raise ValueError(f"patch size {size} exceeds spatial dims {(y, x)}")
    out = []
    for iy in range(0, y - size + 1, stride):
        for ix in range(0, x - size + 1, stride):
            out.append(lf.data[:, :, :, iy: iy + size, ix: ix + size])
    return np.stack(out)


AUGMENT_OPS = ("none", "flip_h", "flip_v", "rot90")


def augment(pair: tuple[LightField4D, LightField4D], op: str) -> tuple[LightField4D, LightField4D]:
    """Apply one geometry-consistent transform to both halves of a pair."""
    if op == "none":
        return pair
    fn = {"flip_h": core.flip_h_lf, "flip_v": core.flip_v_lf, "rot90": core.rot90_lf}.get(op)
    if fn is None:
        raise ValueError(f"unknown augmentation {op!r}")
    return fn(pair[0]), fn(pair[1])


# ---------------------------------------------------------------------------
# metrics

PSNR_CAP_DB = 100.0


def psnr(a: np.ndarray, b: np.ndarray) -> float:
    """Peak signal-to-noise ratio for [0, 1] images, capped at 100 dB."""
    a = np.asarray(a, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    if a.shape != b.shape:
        raise ValueError(f"psnr shape mismatch {a.shape} vs {b.shape}")
    mse = float(np.mean((a - b) ** 2))
    if mse == 0.0:
        return PSNR_CAP_DB
    return min(10.0 * math.log10(1.0 / mse), PSNR_CAP_DB)


def _gaussian_window(size: int = 11, sigma: float = 1.5) -> np.ndarray:
    r = np.arange(size) - (size - 1) / 2.0
    g = np.exp(-(r * r) / (2.0 * sigma * sigma))
    w = np.outer(g, g)
    return w / w.sum()


def _window_mean(img: np.ndarray, w: np.ndarray) -> np.ndarray:
    view = np.lib.stride_tricks.sliding_window_view(img, w.shape)
    return np.tensordot(view, w, axes=([2, 3], [0, 1]))


def ssim(a: np.ndarray, b: np.ndarray) -> float:
    """Structural similarity with an 11x11 Gaussian window (sigma 1.5).

    Constants K1 = 0.01, K2 = 0.03 at dynamic range 1; windows are taken
    over the valid interior only.  Identical inputs give exactly 1.0.
    """
    a = np.asarray(a, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    if a.shape != b.shape:
        raise ValueError(f"ssim shape mismatch {a.shape} vs {b.shape}")
    if a.ndim != 2:
        raise ValueError("ssim expects 2D images")
    if min(a.shape) < 11:
        raise ValueError("ssim needs images at least 11x11")
    w = _gaussian_window()
    c1 = 0.01 ** 2
    c2 = 0.03 ** 2
    mu1 = _window_mean(a, w)
    mu2 = _window_mean(b, w)
    s11 = _window_mean(a * a, w) - mu1 * mu1
    s22 = _window_mean(b * b, w) - mu2 * mu2
    s12 = _window_mean(a * b, w) - mu1 * mu2
    num = (2.0 * mu1 * mu2 + c1) * (2.0 * s12 + c2)
    den = (mu1 * mu1 + mu2 * mu2 + c1) * (s11 + s22 + c2)
    return float(np.mean(num / den))


@dataclass
class SceneMetrics:
    name: str
    psnr_views: np.ndarray          # [U, V]
    ssim_views: np.ndarray          # [U, V]
    excluded: tuple[tuple[int, int], ...]
    psnr: float = 0.0
    ssim: float = 0.0

    def __post_init__(self):
        keep = np.ones(self.psnr_views.shape, dtype=bool)
        for (iu, iv) in self.excluded:
            keep[iu, iv] = False
        self.psnr = float(self.psnr_views[keep].mean())
        self.ssim = float(self.ssim_views[keep].mean())


@dataclass
class MetricReport:
    """Per-scene and dataset-level quality, averaged view -> scene -> dataset."""

    scenes: list[SceneMetrics]
    psnr: float = 0.0
    ssim: float = 0.0

    def __post_init__(self):
        if self.scenes:
            self.psnr = float(np.mean([s.psnr for s in self.scenes]))
            self.ssim = float(np.mean([s.ssim for s in self.scenes]))

    def to_csv(self, path) -> None:
        lines = ["scene,view_u,view_v,psnr,ssim,excluded"]
        for s in self.scenes:
            nu, nv = s.psnr_views.shape
            for iu in range(nu):
                for iv in range(nv):
                    ex = int((iu, iv) in s.excluded)
                    lines.append(f"{s.name},{iu},{iv},{s.psnr_views[iu, iv]:.6f},"
                                 f"{s.ssim_views[iu, iv]:.6f},{ex}")
            lines.append(f"{s.name},scene,,{s.psnr:.6f},{s.ssim:.6f},")
        lines.append(f"dataset,,,{self.psnr:.6f},{self.ssim:.6f},")
        Path(path).parent.mkdir(parents=True, exist_ok=True)
        Path(path).write_text("\n".join(lines) + "\n")


def compare_views(out_lf: np.ndarray, ref_lf: np.ndarray, name: str,
                  excluded: tuple[tuple[int, int], ...] = ()) -> SceneMetrics:
    """Per-view Y-channel PSNR/SSIM between two [C, U, V, Y, X] fields."""
    if out_lf.shape != ref_lf.shape:
        raise ValueError(f"shape mismatch {out_lf.shape} vs {ref_lf.shape}")
    a = rgb_to_y(out_lf) if out_lf.shape[0] == 3 else out_lf
    b = rgb_to_y(ref_lf) if ref_lf.shape[0] == 3 else ref_lf
    nu, nv = a.shape[1], a.shape[2]
    pv = np.zeros((nu, nv))
    sv = np.zeros((nu, nv))
    for iu in range(nu):
        for iv in range(nv):
            pv[iu, iv] = psnr(a[0, iu, iv], b[0, iu, iv])
            sv[iu, iv] = ssim(a[0, iu, iv], b[0, iu, iv])
    return SceneMetrics(name=name, psnr_views=pv, ssim_views=sv, excluded=tuple(excluded))


def asr_excluded_views(a_out: int) -> tuple[tuple[int, int], ...]:
    hi = a_out - 1
    return ((0, 0), (0, hi), (hi, 0), (hi, hi))


# ---------------------------------------------------------------------------
# tiled inference with reflective padding

def tile_process(fn, lf: np.ndarray, tile: int, overlap: int, scale: int = 1) -> np.ndarray:
    """Run ``fn`` over overlapping spatial tiles and stitch core regions.

    The input [..., Y, X] is reflectively padded so every tile is full
    size; ``fn`` maps a tile to one scaled by ``scale``; only the central
    (tile - 2 * overlap) region of each output tile is kept.
    """
    if tile <= 2 * overlap:
        raise ValueError("tile must exceed twice the overlap")
    y, x = lf.shape[-2:]
    step = tile - 2 * overlap
    ny = (y + step - 1) // step
    nx = (x + step - 1) // step
    pad_y = ny * step + 2 * overlap - y
    pad_x = nx * step + 2 * overlap - x
    pad = [(0, 0)] * (lf.ndim - 2) + [(overlap, pad_y - overlap), (overlap, pad_x - overlap)]
    padded = np.pad(lf, pad, mode="reflect")
    out = None
    for iy in range(ny):
        for ix in range(nx):
            patch = padded[..., iy * step: iy * step + tile, ix * step: ix * step + tile]
            res = fn(patch)
            if out is None:
                out = np.zeros(res.shape[:-2] + (ny * step * scale, nx * step * scale),
                               dtype=res.dtype)
            core_res = res[..., overlap * scale: (overlap + step) * scale,
                           overlap * scale: (overlap + step) * scale]
            out[..., iy * step * scale: (iy + 1) * step * scale,
                ix * step * scale: (ix + 1) * step * scale] = core_res
    return out[..., : y * scale, : x * scale]


def evaluate(model, scenes: list[tuple[str, LightField4D]], task: str | None = None,
             tile: int | None = None, overlap: int = 8) -> MetricReport:
    """Score a model over ground-truth scenes.

    Each scene is degraded by the task's protocol (bicubic downscale for
    SSR, corner sampling for ASR), reconstructed, and compared per view
    on the Y channel; ASR scoring excludes the four input views.  Scene
    order does not affect the dataset averages.
    """
    task = task or model.cfg.task
    results = []
    for name, hr in scenes:
        data = rgb_to_y(hr.data) if hr.channels == 3 else hr.data
        hr1 = LightField4D(data)
        if task == "ssr":
            lr, _ = make_ssr_pair(hr1, model.cfg.scale)
            if tile:
                out = tile_process(lambda p: model.predict(p), lr.data, tile, overlap,
                                   scale=model.cfg.scale)
            else:
                out = model.predict(lr.data)
            excluded = ()
        else:
            sparse, _ = make_asr_pair(hr1)
            if tile:
                out = tile_process(lambda p: model.predict(p), sparse.data, tile, overlap)
            else:
                out = model.predict(sparse.data)
            excluded = asr_excluded_views(model.cfg.a_out)
        out = np.clip(out, 0.0, 1.0)
        results.append(compare_views(out, hr1.data, name, excluded))
    return MetricReport(scenes=results)


# ---------------------------------------------------------------------------
# training

@dataclass
class TrainConfig:
    task: str = "ssr"
    batch_size: int = 8
    lr: float = 2e-4
    lr_halve_epochs: int = 15
    epochs: int = 80
    beta1: float = 0.9
    beta2: float = 0.999
    patch_size: int = 64
    patch_stride: int = 32
    seed: int = 0
    augment: bool = True
    max_steps: int | None = None
    checkpoint_dir: str | None = None

    def __post_init__(self):
        if min(self.batch_size, self.epochs, self.patch_size, self.patch_stride,
               self.lr_halve_epochs) < 1 or self.lr <= 0:
            raise ValueError("training hyperparameters must be positive")


def lr_at_epoch(epoch: int, cfg: TrainConfig) -> float:
    """Learning rate during 1-indexed ``epoch``: halved every period."""
    if epoch < 1:
        raise ValueError("epochs are 1-indexed")
    return cfg.lr * 0.5 ** ((epoch - 1) // cfg.lr_halve_epochs)


def train(model, pairs: list[tuple[np.ndarray, np.ndarray]], cfg: TrainConfig,
          val_scenes: list[tuple[str, LightField4D]] | None = None,
          log=None) -> dict:
    """L1 training loop over (input, target) patch pairs.

    Patches are shuffled each epoch with a seeded generator, optionally
    augmented with a geometry-consistent flip/rotation, and optimized
    with bias-corrected Adam under the halving schedule.  Returns a
    history dict with per-step losses and per-epoch validation PSNR.
    Deterministic for a fixed seed; a non-finite loss aborts.
    """
    if not pairs:
        raise ValueError("no training pairs")
    params = model.params()
    state = ad.AdamState(lr=cfg.lr, beta1=cfg.beta1, beta2=cfg.beta2)
    rng = np.random.default_rng(cfg.seed)
    dtype = model.cfg.np_dtype()
    history = {"loss": [], "lr": [], "val_psnr": []}
    step = 0
    done = False
    for epoch in range(1, cfg.epochs + 1):
        state.lr = lr_at_epoch(epoch, cfg)
        order = rng.permutation(len(pairs))
        for start in range(0, len(order) - cfg.batch_size + 1, cfg.batch_size):
            batch = [pairs[i] for i in order[start: start + cfg.batch_size]]
            if cfg.augment:
                ops = rng.choice(AUGMENT_OPS, size=len(batch))
                batch = [tuple(p.data for p in augment((LightField4D(a), LightField4D(b)), op))
                         for (a, b), op in zip(batch, ops)]
            xb = np.stack([a for a, _ in batch]).astype(dtype)
            yb = np.stack([b for _, b in batch]).astype(dtype)
            ad.zero_grads(params)
            try:
                loss = ad.l1_loss(model.forward(xb), Tensor(yb))
            except FloatingPointError as exc:
                raise RuntimeError(f"non-finite loss at step {step} (epoch {epoch}): {exc}") from exc
            loss.backward()
            ad.adam_step(params, state)
            val = float(loss.data)
            history["loss"].append(val)
            history["lr"].append(state.lr)
            if log:
                log(step, epoch, val)
            step += 1
            if cfg.max_steps is not None and step >= cfg.max_steps:
                done = True
                break
        if val_scenes:
            history["val_psnr"].append(evaluate(model, val_scenes).psnr)
        if cfg.checkpoint_dir:
            model.save(Path(cfg.checkpoint_dir) / f"epoch_{epoch:04d}.lfck")
        if done:
            break
    return history


def write_loss_csv(path, history: dict) -> None:
    lines = ["step,loss,lr"]
    for i, (loss, lr) in enumerate(zip(history["loss"], history["lr"])):
        lines.append(f"{i},{loss:.8f},{lr:.8g}")
    Path(path).parent.mkdir(parents=True, exist_ok=True)
    Path(path).write_text("\n".join(lines) + "\n")


# ---------------------------------------------------------------------------
# light-field container files and dataset manifests

def save_lf4d(path, lf: LightField4D) -> None:
    """Binary container: magic "LF4D", five LE u32 dims (C, U, V, Y, X),
    a u32 dtype tag (0 = float32), then planar LE float32 data."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "wb") as fh:
        fh.write(LF4D_MAGIC)
        fh.write(struct.pack("<5I", *lf.shape))
        fh.write(struct.pack("<I", 0))
        fh.write(np.ascontiguousarray(lf.data, dtype="<f4").tobytes())


def load_lf4d(path) -> LightField4D:
    with open(path, "rb") as fh:
        magic = fh.read(4)
        if magic != LF4D_MAGIC:
            raise ValueError(f"{path}: bad magic {magic!r}")
        dims = struct.unpack("<5I", fh.read(20))
        (tag,) = struct.unpack("<I", fh.read(4))
        if tag != 0:
            raise ValueError(f"{path}: unsupported dtype tag {tag}")
        count = int(np.prod(dims))
        buf = fh.read(count * 4)
        if len(buf) != count * 4:
            raise ValueError(f"{path}: truncated data")
        data = np.frombuffer(buf, dtype="<f4").reshape(dims).astype(np.float64)
    return LightField4D(data)


def save_scene_png(dirpath, lf: LightField4D, bit_depth: int = 16) -> None:
    """Write a scene directory: view_u{i}_v{j}.png per view plus meta.json."""
    from .imageio import save_png

    d = Path(dirpath)
    d.mkdir(parents=True, exist_ok=True)
    if lf.channels != 1:
        raise ValueError("PNG scene directories store single-channel fields")
    nu, nv = lf.angular
    for iu in range(nu):
        for iv in range(nv):
            save_png(d / f"view_u{iu}_v{iv}.png", lf.data[0, iu, iv], bit_depth)
    (d / "meta.json").write_text(json.dumps({"U": nu, "V": nv, "bit_depth": bit_depth}))


def load_scene_png(dirpath) -> LightField4D:
    from .imageio import load_png

    d = Path(dirpath)
    meta = json.loads((d / "meta.json").read_text())
    nu, nv = int(meta["U"]), int(meta["V"])
    views = []
    for iu in range(nu):
        row = []
        for iv in range(nv):
            img = load_png(d / f"view_u{iu}_v{iv}.png")
            if img.ndim != 2:
                raise ValueError(f"view_u{iu}_v{iv}.png is not grayscale")
            row.append(img)
        views.append(row)
    data = np.asarray(views)            # [U, V, Y, X]
    return LightField4D(data[None])


def load_dataset(manifest_path) -> list[tuple[str, LightField4D]]:
    """Manifest JSON {"scenes": [paths...]}; entries are .lf4d files or
    PNG scene directories, relative to the manifest."""
    mp = Path(manifest_path)
    doc = json.loads(mp.read_text())
    if set(doc) - {"scenes"}:
        raise ValueError(f"unknown manifest keys: {sorted(set(doc) - {'scenes'})}")
    out = []
    for entry in doc["scenes"]:
        p = mp.parent / entry
        if p.is_dir():
            out.append((Path(entry).name, load_scene_png(p)))
        else:
            out.append((Path(entry).stem, load_lf4d(p)))
    return out


# ---------------------------------------------------------------------------
# synthetic desk-scale scenes

def smooth_noise(rng: np.random.Generator, size: int, passes: int = 4) -> np.ndarray:
    """Band-limited random texture in [0, 1] ([1, 2, 1] smoothing passes)."""
    t = rng.random((size, size))
    for _ in range(passes):
        for ax in (0, 1):
            t = 0.25 * np.roll(t, 1, ax) + 0.5 * t + 0.25 * np.roll(t, -1, ax)
    lo, hi = t.min(), t.max()
    return (t - lo) / (hi - lo)


def random_scene(rng: np.random.Generator, z0: float, max_disparity: float,
                 optics_cfg: optics.OpticsConfig, n_layers: int = 2,
                 texture_size: int = 192, passes: int = 2) -> optics.SceneSpec:
    """A background plane plus occluding patches, depths capped so the
    per-view pixel shift stays within ``max_disparity``."""
    # disparity d = b z / (p (z + z0))  =>  z = d p z0 / (b - d p)
    def depth_for(d):
        return d * optics_cfg.pixel_pitch * z0 / (optics_cfg.baseline - d * optics_cfg.pixel_pitch)

    extent_y = optics_cfg.spatial[0] * optics_cfg.pixel_pitch * 4.0
    extent_x = optics_cfg.spatial[1] * optics_cfg.pixel_pitch * 4.0
    layers = [optics.LayerSpec(
        depth=depth_for(rng.uniform(-max_disparity, -0.3 * max_disparity)),
        texture=smooth_noise(rng, texture_size, passes),
        extent=(extent_y, extent_x),
        oob_value=0.5,
    )]
    for _ in range(n_layers - 1):
        size = texture_size // 3
        mask = np.zeros((size, size))
        r = size // 2 - 2
        yy, xx = np.mgrid[0:size, 0:size] - (size - 1) / 2.0
        mask[yy * yy + xx * xx <= r * r] = 1.0
        layers.append(optics.LayerSpec(
            depth=depth_for(rng.uniform(0.3 * max_disparity, max_disparity)),
            texture=smooth_noise(rng, size, passes),
            extent=(extent_y / 4.0, extent_x / 4.0),
            oob_value=0.0,
            opacity=mask,
        ))
    return optics.SceneSpec(layers=tuple(layers))


def render_synthetic_scenes(n_scenes: int, optics_cfg: optics.OpticsConfig,
                            max_disparity: float, seed: int = 0,
                            n_layers: int = 2) -> list[tuple[str, LightField4D]]:
    rng = np.random.default_rng(seed)
    out = []
    for i in range(n_scenes):
        scene = random_scene(rng, optics_cfg.z0, max_disparity, optics_cfg, n_layers)
        out.append((f"scene_{i:03d}", optics.render_lf(scene, optics_cfg)))
    return out
