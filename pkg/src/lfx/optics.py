"""Synthetic light-field rendering for layered Lambertian scenes.

The imaging model: a camera focused at distance ``z0`` records, for the
view with physical angular offset (u, v) and pixel at physical position
(x, y), the scene radiance at world point

    (s(z) * x - u * z / z0,  s(z) * y - v * z / z0),   s(z) = 1 + z / z0,

where ``z`` is the depth of the surface hit, measured from the focus
plane (camera sits at z = -z0).  There is no blur: the point-spread
function is a delta, so each ray samples exactly one scene point.
Occlusion is resolved by nearest-opaque-layer visibility.

Scene points at depth z trace lines of slope (z + z0) / z across an
(u, x) epipolar plane; their per-view pixel shift (disparity) is
``baseline * z / (pitch * (z + z0))``.  Both relations are exposed here
together with a shear-and-score line fitter used to verify them on
rendered data.
"""

from __future__ import annotations

import json
import math
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .core import LightField4D


@dataclass(frozen=True)
class OpticsConfig:
    """Camera geometry for rendering.

    ``z0``: focus distance (> 0).  ``baseline``: physical spacing of the
    angular grid, per angular index.  ``pixel_pitch``: physical size of a
    pixel.  Angular index i in [0, U) maps to the centered physical
    offset (i - (U - 1) / 2) * baseline; pixels are centered the same way.
    """

    z0: float
    angular: tuple[int, int]      # (U, V)
    spatial: tuple[int, int]      # (Y, X)
    baseline: float = 1.0
    pixel_pitch: float = 1.0

    def __post_init__(self):
        if self.z0 <= 0:
            raise ValueError("z0 must be > 0")
        if self.baseline <= 0 or self.pixel_pitch <= 0:
            raise ValueError("baseline and pixel_pitch must be > 0")
        if any(n < 1 for n in (*self.angular, *self.spatial)):
            raise ValueError("grid dimensions must be >= 1")

    def angular_offsets(self) -> tuple[np.ndarray, np.ndarray]:
        """Physical (u, v) offsets of the angular grid, centered."""
        nu, nv = self.angular
        u = (np.arange(nu) - (nu - 1) / 2.0) * self.baseline
        v = (np.arange(nv) - (nv - 1) / 2.0) * self.baseline
        return u, v

    def pixel_coords(self) -> tuple[np.ndarray, np.ndarray]:
        """Physical (y, x) coordinates of the pixel grid, centered."""
        ny, nx = self.spatial
        y = (np.arange(ny) - (ny - 1) / 2.0) * self.pixel_pitch
        x = (np.arange(nx) - (nx - 1) / 2.0) * self.pixel_pitch
        return y, x


@dataclass(frozen=True)
class LayerSpec:
    """One fronto-parallel textured plane.

    ``texture``: 2D intensity image in [0, 1] with physical size
    ``extent`` = (height, width), centered on the optical axis.
    ``opacity``: binary mask over the texture grid; ``None`` means the
    layer is opaque everywhere (an infinite plane whose out-of-extent
    samples take ``oob_value``).  With a mask, points outside the extent
    are transparent.
    """

    depth: float
    texture: np.ndarray
    extent: tuple[float, float]
    oob_value: float = 0.0
    opacity: np.ndarray | None = None

    def __post_init__(self):
        t = np.asarray(self.texture, dtype=np.float64)
        if t.ndim != 2:
            raise ValueError("layer texture must be 2D")
        if not np.isfinite(t).all():
            raise ValueError("layer texture contains non-finite values")
        if t.min() < 0.0 or t.max() > 1.0:
            raise ValueError("layer texture values must lie in [0, 1]")
        object.__setattr__(self, "texture", t)
        if self.opacity is not None:
            m = np.asarray(self.opacity, dtype=np.float64)
            if m.shape != t.shape:
                raise ValueError("opacity mask must match texture shape")
            object.__setattr__(self, "opacity", m)
        if self.extent[0] <= 0 or self.extent[1] <= 0:
            raise ValueError("layer extent must be positive")


@dataclass(frozen=True)
class SceneSpec:
    """An ordered stack of layers; depths measured from the focus plane."""

    layers: tuple[LayerSpec, ...]

    def __post_init__(self):
        if not self.layers:
            raise ValueError("scene needs at least one layer")
        object.__setattr__(self, "layers", tuple(self.layers))
        for layer in self.layers:
            if not math.isfinite(layer.depth):
                raise ValueError("layer depths must be finite")

    def validate_against(self, optics: OpticsConfig) -> None:
        for layer in self.layers:
            if layer.depth <= -optics.z0:
                raise ValueError(f"layer depth {layer.depth} not in (-z0, inf) for z0 = {optics.z0}")


def scaling_factor(z: float, z0: float) -> float:
    """Lateral magnification s(z) = 1 + z / z0 of a plane at depth z."""
    return 1.0 + z / z0


def sample_layer(layer: LayerSpec, wy: np.ndarray, wx: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Sample a layer at world points; returns (value, opaque) arrays.

    Bilinear interpolation with half-pixel centers: texture pixel (r, c)
    sits at world y = (r + 0.5) / H * ey - ey / 2 (and likewise x), where
    (ey, ex) is the physical extent.  A point is in bounds when its
    continuous pixel coordinate lies in [0, H - 1] x [0, W - 1]; outside
    that the value is ``oob_value``.  Opacity uses nearest-neighbor
    lookup so it stays binary.
    """
    h, w = layer.texture.shape
    ey, ex = layer.extent
    fr = wy * (h / ey) + (h / 2.0 - 0.5)
    fc = wx * (w / ex) + (w / 2.0 - 0.5)
    inside = (fr >= 0.0) & (fr <= h - 1.0) & (fc >= 0.0) & (fc <= w - 1.0)

    r0 = np.clip(np.floor(fr).astype(np.int64), 0, h - 1)
    c0 = np.clip(np.floor(fc).astype(np.int64), 0, w - 1)
    r1 = np.minimum(r0 + 1, h - 1)
    c1 = np.minimum(c0 + 1, w - 1)
    tr = np.clip(fr - r0, 0.0, 1.0)
    tc = np.clip(fc - c0, 0.0, 1.0)

    t = layer.texture
    top = t[r0, c0] * (1.0 - tc) + t[r0, c1] * tc
    bot = t[r1, c0] * (1.0 - tc) + t[r1, c1] * tc
    value = top * (1.0 - tr) + bot * tr
    value = np.where(inside, value, layer.oob_value)

    if layer.opacity is None:
        opaque = np.ones_like(value, dtype=bool)
    else:
        rn = np.clip(np.rint(fr).astype(np.int64), 0, h - 1)
        cn = np.clip(np.rint(fc).astype(np.int64), 0, w - 1)
        opaque = inside & (layer.opacity[rn, cn] >= 0.5)
    return value, opaque


def _worker_count() -> int:
    try:
        n = int(os.environ.get("LFX_THREADS", "1"))
    except ValueError:
        n = 1
    return max(1, n)


def render_lf(scene: SceneSpec, optics: OpticsConfig) -> LightField4D:
    """Render the scene into a single-channel 4D light field.

    Per ray: walk layers from nearest to farthest (smallest depth first,
    camera at -z0) and take the first opaque hit; rays that hit nothing
    are 0.  Deterministic; views are independent, so rendering honors
    LFX_THREADS for parallelism without changing the output.
    """
    scene.validate_against(optics)
    nu, nv = optics.angular
    ny, nx = optics.spatial
    u_off, v_off = optics.angular_offsets()
    y_phys, x_phys = optics.pixel_coords()
    gy, gx = np.meshgrid(y_phys, x_phys, indexing="ij")
    order = sorted(range(len(scene.layers)), key=lambda i: scene.layers[i].depth)

    out = np.zeros((1, nu, nv, ny, nx), dtype=np.float64)

    def render_view(iu: int, iv: int) -> None:
        img = np.zeros((ny, nx), dtype=np.float64)
        undecided = np.ones((ny, nx), dtype=bool)
        for li in order:
            layer = scene.layers[li]
            z = layer.depth
            s = scaling_factor(z, optics.z0)
            wy = s * gy - v_off[iv] * z / optics.z0
            wx = s * gx - u_off[iu] * z / optics.z0
            value, opaque = sample_layer(layer, wy, wx)
            take = undecided & opaque
            img[take] = value[take]
            undecided &= ~opaque
            if not undecided.any():
                break
        out[0, iu, iv] = img

    views = [(iu, iv) for iu in range(nu) for iv in range(nv)]
    workers = _worker_count()
    if workers > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            list(pool.map(lambda t: render_view(*t), views))
    else:
        for iu, iv in views:
            render_view(iu, iv)
    return LightField4D(out)


def epi_line_slope(z: float, z0: float) -> float:
    """Slope (z + z0) / z traced in an (angle, same-axis pixel) plane.

    The slope is measured as angular steps per pixel step in units where
    baseline equals pixel pitch.  At z = 0 the line is vertical (zero
    disparity) and the slope diverges; positive infinity is returned as
    the sentinel.
    """
    if z == 0.0:
        return math.inf
    return (z + z0) / z


def disparity_pixels(z: float, optics: OpticsConfig) -> float:
    """Pixel shift per angular step of a point at depth z; 0 at z = 0."""
    return optics.baseline * z / (optics.pixel_pitch * (z + optics.z0))


def vsi_equivalent_depth(z_vsi: float, z0: float) -> float:
    """Depth whose monocular sampling rate matches a VSI row at z_vsi.

    A virtual-slit image samples the scene's cross axis at rate
    -z_vsi / z0 per angular step; a plain view of the same object moved
    to depth -z_vsi - z0 has the identical rate, so the two images agree
    up to a fixed resampling of the other axis.
    """
    return -z_vsi - z0


def fit_epi_slope(plane: np.ndarray, max_shear: float = 3.0, step: float = 0.002) -> float:
    """Recover the dominant line slope of a 2D plane by shear and score.

    For each shear s (column shift per row) swept densely over
    [-max_shear, max_shear] in increments of ``step``, every row is
    resampled at columns ``c + s * (row - center)`` and the rows are
    averaged; the variance of that shear-integrated profile is the
    score, maximal when the shear matches the line direction.  The peak
    is refined by a least-squares parabola over its 15-step
    neighborhood, and the slope 1 / s is returned (infinity for vertical
    structure, |s| below half a step).

    Resampling uses a cubic kernel on a column grid jittered by the
    golden ratio: with integer columns and linear taps the interpolation
    attenuates variance by an amount periodic in s, which skews the peak;
    the jitter equidistributes those phases so the score depends only on
    alignment.

    Raises ``ValueError`` for a constant plane.
    """
    p = np.asarray(plane, dtype=np.float64)
    if p.ndim != 2:
        raise ValueError("plane must be 2D")
    if p.shape[0] < 2:
        raise ValueError("need at least 2 rows to fit a slope")
    if float(p.max() - p.min()) < 1e-12:
        raise ValueError("constant plane has no oriented structure")

    # A shear of max_shear over (rows - 1) / 2 centered rows must stay inside
    # the columns; when the plane is too tall for its width, integrate over
    # the largest central band of rows that fits.
    cols = p.shape[1]
    rows = p.shape[0]
    while rows > 2:
        if int(math.ceil(max_shear * (rows - 1) / 2.0)) + 2 <= (cols - 8) // 2:
            break
        rows -= 1
    start = (p.shape[0] - rows) // 2
    p = p[start: start + rows]
    margin = int(math.ceil(max_shear * (rows - 1) / 2.0)) + 2
    ncols = cols - 2 * margin
    if ncols < 8:
        raise ValueError(f"plane too narrow ({cols} cols) for max_shear {max_shear}")

    shears = np.arange(-max_shear, max_shear + step / 2, step)
    centered = np.arange(rows) - (rows - 1) / 2.0
    golden = 0.6180339887498949
    base = margin + np.arange(ncols) + (np.arange(ncols) * golden) % 1.0 - 0.5

    pos = base[None, None, :] + shears[:, None, None] * centered[None, :, None]
    i0 = np.floor(pos).astype(np.int64)
    t = pos - i0
    ridx = np.arange(rows)[None, :, None]
    # Catmull-Rom taps at i0 - 1 .. i0 + 2
    w0 = ((-0.5 * t + 1.0) * t - 0.5) * t
    w1 = (1.5 * t - 2.5) * t * t + 1.0
    w2 = ((-1.5 * t + 2.0) * t + 0.5) * t
    w3 = (0.5 * t - 0.5) * t * t
    sheared = p[ridx, i0 - 1] * w0 + p[ridx, i0] * w1 + p[ridx, i0 + 1] * w2 + p[ridx, i0 + 2] * w3
    profile = sheared.mean(axis=1)
    scores = profile.var(axis=1)

    k = int(np.argmax(scores))
    lo, hi = max(0, k - 7), min(len(shears), k + 8)
    xs, ys = shears[lo:hi], scores[lo:hi]
    design = np.vstack([xs * xs, xs, np.ones_like(xs)]).T
    a, b, _ = np.linalg.lstsq(design, ys, rcond=None)[0]
    best = shears[k]
    if a < 0:
        best = float(np.clip(-b / (2.0 * a), xs[0], xs[-1]))
    if abs(best) < step / 2:
        return math.inf
    return 1.0 / best


# ---------------------------------------------------------------------------
# JSON interchange: scenes and optics as documents, textures as PNG files.

def optics_from_json(path: str | Path) -> OpticsConfig:
    with open(path) as fh:
        doc = json.load(fh)
    known = {"z0", "angular", "spatial", "baseline", "pixel_pitch"}
    unknown = set(doc) - known
    if unknown:
        raise ValueError(f"unknown optics keys: {sorted(unknown)}")
    return OpticsConfig(
        z0=float(doc["z0"]),
        angular=tuple(int(n) for n in doc["angular"]),
        spatial=tuple(int(n) for n in doc["spatial"]),
        baseline=float(doc.get("baseline", 1.0)),
        pixel_pitch=float(doc.get("pixel_pitch", 1.0)),
    )


def scene_from_json(path: str | Path) -> SceneSpec:
    """Load a scene document; texture/opacity paths resolve relative to it.

    Layout: {"layers": [{"depth": float, "texture": "t.png",
    "extent": [ey, ex], "oob_value": float, "opacity": "m.png" | null}]}.
    """
    from .imageio import load_png

    path = Path(path)
    with open(path) as fh:
        doc = json.load(fh)
    if set(doc) - {"layers"}:
        raise ValueError(f"unknown scene keys: {sorted(set(doc) - {'layers'})}")
    layers = []
    for entry in doc["layers"]:
        unknown = set(entry) - {"depth", "texture", "extent", "oob_value", "opacity"}
        if unknown:
            raise ValueError(f"unknown layer keys: {sorted(unknown)}")
        texture = load_png(path.parent / entry["texture"])
        opacity = None
        if entry.get("opacity"):
            opacity = load_png(path.parent / entry["opacity"])
        layers.append(LayerSpec(
            depth=float(entry["depth"]),
            texture=texture,
            extent=tuple(float(e) for e in entry["extent"]),
            oob_value=float(entry.get("oob_value", 0.0)),
            opacity=opacity,
        ))
    return SceneSpec(layers=tuple(layers))
