"""Light-field super-resolution networks.

The trunk pairs two ideas:

* An ensemble feature extractor that convolves each of the six 2D
  subspaces of the 4D feature field with its own kernel (spatial planes
  with a 3x3, the angular plane with an AxA stride-A kernel, and each
  epipolar / virtual-slit plane with an AxA kernel striding over the
  full angular extent), restoring the angular dims by channel-to-angle
  rearrangement and fusing all branches with a residual connection.

* A geometry-aware attention decoder: tokens are pixels of an epipolar
  plane, and an additive mask admits a key for a query only when the
  two could observe the same scene point, i.e. when the pixel offset
  per angular step stays within ``d_max``.  Over all depths those
  admissible positions form an X shape around each query.

Feature fields flow through the trunk as tensors ``[B, C, U, V, Y, X]``.
All residual output projections are zero-initialized, so a freshly
built trunk is the identity map.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, asdict

import numpy as np

from . import autodiff as ad
from .autodiff import Tensor
from .core import SubspaceId


# ---------------------------------------------------------------------------
# configuration

@dataclass
class C42BlockConfig:
    channels: int = 64
    angular: int = 5          # assumes a square U = V = A grid
    include_vsi: bool = True  # ablation toggle: drop the two VSI branches

    def __post_init__(self):
        if self.angular < 1:
            raise ValueError("angular size must be >= 1")


@dataclass
class MHXAConfig:
    channels: int = 64
    heads: int = 4
    d_max: float = 2.0

    def __post_init__(self):
        if self.channels % self.heads:
            raise ValueError(f"channels {self.channels} not divisible by heads {self.heads}")
        if not (self.d_max > 0):
            raise ValueError("d_max must be > 0 (may be inf)")


@dataclass
class NetworkConfig:
    """Hyperparameters of an assembled network.

    ``task`` is "ssr" (spatial, scale in {2, 4}) or "asr" (angular,
    a_in x a_in corner views to a_out x a_out).  ``d_max`` defaults per
    task: 2 for SSR, 6 for ASR.
    """

    task: str = "ssr"
    in_channels: int = 1
    channels: int = 64
    n_c42: int = 6
    n_epix: int = 6
    heads: int = 4
    d_max: float | None = None
    scale: int = 2            # SSR upsampling factor
    a_in: int = 5             # angular size of the input
    a_out: int | None = None  # ASR output angular size (default 7)
    use_skip: bool = True     # SSR: add the bicubic-upsampled input
    copy_inputs: bool = False  # ASR: paste input views into the output grid
    include_vsi: bool = True
    dtype: str = "float32"

    def __post_init__(self):
        if self.task not in ("ssr", "asr"):
            raise ValueError(f"unknown task {self.task!r}")
        if self.task == "ssr" and self.scale not in (2, 4):
            raise ValueError("SSR scale must be 2 or 4")
        if self.d_max is None:
            self.d_max = 2.0 if self.task == "ssr" else 6.0
        if self.task == "asr":
            if self.a_out is None:
                self.a_out = 7
            if self.a_out <= self.a_in:
                raise ValueError("ASR needs a_out > a_in")
        if self.channels % self.heads:
            raise ValueError("channels must be divisible by heads")

    def np_dtype(self):
        return np.float32 if self.dtype == "float32" else np.float64


# ---------------------------------------------------------------------------
# parameter initialization

def _kaiming(rng: np.random.Generator, shape: tuple[int, ...], fan_in: int, dtype) -> Tensor:
    bound = math.sqrt(6.0 / fan_in)
    return Tensor(rng.uniform(-bound, bound, size=shape).astype(dtype), requires_grad=True)


def _zeros(shape, dtype) -> Tensor:
    return Tensor(np.zeros(shape, dtype=dtype), requires_grad=True)


def _conv_param(rng, c_out, c_in, kh, kw, dtype, zero=False) -> Tensor:
    if zero:
        return _zeros((c_out, c_in, kh, kw), dtype)
    return _kaiming(rng, (c_out, c_in, kh, kw), c_in * kh * kw, dtype)


# ---------------------------------------------------------------------------
# 6D feature-field plumbing (differentiable views of [B, C, U, V, Y, X])

# permutation bringing (batch, batch-dim-a, batch-dim-b, C, plane-row, plane-col)
_BRANCH_PERMUTE = {
    SubspaceId.SAI: (0, 2, 3, 1, 4, 5),      # batch (u, v), plane (y, x)
    SubspaceId.MACPI: (0, 4, 5, 1, 2, 3),    # batch (y, x), plane (u, v)
    SubspaceId.EPI_UX: (0, 3, 4, 1, 2, 5),   # batch (v, y), plane (u, x)
    SubspaceId.EPI_VY: (0, 2, 5, 1, 3, 4),   # batch (u, x), plane (v, y)
    SubspaceId.VSI_VX: (0, 2, 4, 1, 3, 5),   # batch (u, y), plane (v, x)
    SubspaceId.VSI_UY: (0, 3, 5, 1, 2, 4),   # batch (v, x), plane (u, y)
}


def _to_planes(f: Tensor, sid: SubspaceId) -> tuple[Tensor, tuple[int, ...]]:
    """[B, C, U, V, Y, X] -> ([B*b0*b1, C, p0, p1], permuted shape)."""
    perm = _BRANCH_PERMUTE[sid]
    moved = ad.permute(f, perm)
    b, b0, b1, c, p0, p1 = moved.shape
    return ad.reshape(moved, (b * b0 * b1, c, p0, p1)), moved.shape


def _from_planes(x: Tensor, sid: SubspaceId, moved_shape: tuple[int, ...]) -> Tensor:
    """Inverse of :func:`_to_planes`, allowing changed C / plane sizes."""
    perm = _BRANCH_PERMUTE[sid]
    b, b0, b1 = moved_shape[:3]
    _, c, p0, p1 = x.shape
    back = ad.reshape(x, (b, b0, b1, c, p0, p1))
    return ad.permute(back, tuple(np.argsort(perm)))


def _c2a(f: Tensor, ku: int, kv: int) -> Tensor:
    """Differentiable channel-to-angle on [B, C*ku*kv, U, V, Y, X]."""
    if ku == 1 and kv == 1:
        return f
    b, ckk, u, v, y, x = f.shape
    c = ckk // (ku * kv)
    t = ad.reshape(f, (b, c, ku, kv, u, v, y, x))
    t = ad.permute(t, (0, 1, 4, 2, 5, 3, 6, 7))  # (b, c, u, du, v, dv, y, x)
    return ad.reshape(t, (b, c, u * ku, v * kv, y, x))


def _pixel_shuffle(x: Tensor, r: int) -> Tensor:
    """Differentiable sub-pixel rearrangement [B, C*r*r, H, W] -> [B, C, H*r, W*r]."""
    b, crr, h, w = x.shape
    c = crr // (r * r)
    t = ad.reshape(x, (b, c, r, r, h, w))
    t = ad.permute(t, (0, 1, 4, 2, 5, 3))
    return ad.reshape(t, (b, c, h * r, w * r))


# ---------------------------------------------------------------------------
# C42 ensemble extractor

# (channel expansion of the 1x1 mix conv, C2A factors) per branch
def _branch_plan(sid: SubspaceId, a: int) -> tuple[int, int, int]:
    if sid is SubspaceId.SAI:
        return 1, 1, 1
    if sid is SubspaceId.MACPI:
        return a * a, a, a
    if sid in (SubspaceId.EPI_UX, SubspaceId.VSI_UY):
        return a, a, 1          # these collapse the u axis
    return a, 1, a              # EPI_VY / VSI_VX collapse the v axis


class C42Branch:
    """One subspace-specific convolution with its bottleneck and C2A.

    Pipeline: subspace conv, LeakyReLU, 1x1 conv (expanding channels for
    branches whose conv strides over an angular axis), LeakyReLU, then
    channel-to-angle to restore the input shape.
    """

    def __init__(self, sid: SubspaceId, cfg: C42BlockConfig, rng, dtype):
        self.sid = sid
        self.cfg = cfg
        c, a = cfg.channels, cfg.angular
        expand, self.ku, self.kv = _branch_plan(sid, a)
        if sid is SubspaceId.SAI:
            self.conv = _conv_param(rng, c, c, 3, 3, dtype)
            self.stride = (1, 1)
            self.padding = (1, 1)
        elif sid is SubspaceId.MACPI:
            self.conv = _conv_param(rng, c, c, a, a, dtype)
            self.stride = (a, a)
            self.padding = (0, 0)
        else:
            # the plane's angular axis is collapsed by a stride-A read of
            # an AxA window; the spatial axis keeps its length
            self.conv = _conv_param(rng, c, c, a, a, dtype)
            self.stride = (a, 1)
            left = (a - 1) // 2
            self.padding = ((0, 0), (left, a - 1 - left))
        self.mix = _conv_param(rng, c * expand, c, 1, 1, dtype)

    def params(self, prefix: str) -> dict[str, Tensor]:
        return {f"{prefix}.conv": self.conv, f"{prefix}.mix": self.mix}

    def forward(self, f: Tensor) -> Tensor:
        planes, moved = _to_planes(f, self.sid)
        h = ad.conv2d(planes, self.conv, stride=self.stride, padding=self.padding)
        h = ad.leaky_relu(h)
        h = ad.conv2d(h, self.mix)
        h = ad.leaky_relu(h)
        out = _from_planes(h, self.sid, moved)
        return _c2a(out, self.ku, self.kv)


def branch_forward(features: Tensor, sid: SubspaceId, cfg: C42BlockConfig,
                   rng=None, dtype=np.float32) -> Tensor:
    """Run a freshly initialized subspace branch (testing convenience)."""
    if rng is None:
        rng = np.random.default_rng(0)
    return C42Branch(sid, cfg, rng, dtype).forward(features)


class C42Block:
    """Six subspace branches, concatenated, fused, and residually added."""

    def __init__(self, cfg: C42BlockConfig, rng, dtype):
        self.cfg = cfg
        order = [SubspaceId.SAI, SubspaceId.MACPI, SubspaceId.EPI_UX,
                 SubspaceId.EPI_VY, SubspaceId.VSI_VX, SubspaceId.VSI_UY]
        if not cfg.include_vsi:
            order = order[:4]
        self.branches = [(sid, C42Branch(sid, cfg, rng, dtype)) for sid in order]
        c = cfg.channels
        self.fuse1 = _conv_param(rng, c, c * len(order), 1, 1, dtype)
        self.fuse2 = _conv_param(rng, c, c, 3, 3, dtype, zero=True)  # residual output: zero-init

    def params(self, prefix: str) -> dict[str, Tensor]:
        out = {}
        for sid, br in self.branches:
            out.update(br.params(f"{prefix}.{sid.value}"))
        out[f"{prefix}.fuse1"] = self.fuse1
        out[f"{prefix}.fuse2"] = self.fuse2
        return out

    def forward(self, f: Tensor) -> Tensor:
        feats = [br.forward(f) for _, br in self.branches]
        cat = ad.concat(feats, axis=1)
        planes, moved = _to_planes(cat, SubspaceId.SAI)
        h = ad.conv2d(planes, self.fuse1)
        h = ad.leaky_relu(h)
        h = ad.conv2d(h, self.fuse2, padding=1)
        fused = _from_planes(h, SubspaceId.SAI, moved)
        return ad.add(fused, f)


def c42_block(features: Tensor, cfg: C42BlockConfig, rng=None, dtype=np.float32) -> Tensor:
    if rng is None:
        rng = np.random.default_rng(0)
    return C42Block(cfg, rng, dtype).forward(features)


# ---------------------------------------------------------------------------
# X-masked multi-head attention

def build_xmask(s: int, length: int, d_max: float) -> np.ndarray:
    """Additive attention mask over tokens of an (angle, position) plane.

    Tokens index an S x L grid flattened angle-major (token = a * L + p).
    The entry for query (a_q, p_q) and key (a_k, p_k) is 0 when
    |p_k - p_q| <= d_max * |a_k - a_q| and -inf otherwise; at equal
    angles only the query's own position is admitted.  Infinite d_max
    admits everything.  The matrix is symmetric with a zero diagonal,
    and the admitted set grows monotonically with d_max.
    """
    if s < 1 or length < 1:
        raise ValueError("mask grid dims must be >= 1")
    if not (d_max > 0):
        raise ValueError("d_max must be > 0 (may be inf)")
    n = s * length
    if math.isinf(d_max):
        return np.zeros((n, n), dtype=np.float64)
    idx = np.arange(n)
    a = idx // length
    p = idx % length
    da = np.abs(a[:, None] - a[None, :])
    dp = np.abs(p[:, None] - p[None, :])
    admitted = dp <= d_max * da
    np.fill_diagonal(admitted, True)
    return np.where(admitted, 0.0, -np.inf)


@dataclass
class MHXAWeights:
    ln_gamma: Tensor
    ln_beta: Tensor
    wq: Tensor
    wk: Tensor
    wv: Tensor
    wo: Tensor

    @classmethod
    def create(cls, c: int, rng, dtype) -> "MHXAWeights":
        return cls(
            ln_gamma=Tensor(np.ones(c, dtype=dtype), requires_grad=True),
            ln_beta=_zeros((c,), dtype),
            wq=_kaiming(rng, (c, c), c, dtype),
            wk=_kaiming(rng, (c, c), c, dtype),
            wv=_kaiming(rng, (c, c), c, dtype),
            wo=_zeros((c, c), dtype),  # residual output: zero-init
        )

    def params(self, prefix: str) -> dict[str, Tensor]:
        return {f"{prefix}.{name}": getattr(self, name)
                for name in ("ln_gamma", "ln_beta", "wq", "wk", "wv", "wo")}


def mhxa(tokens: Tensor, mask: np.ndarray, weights: MHXAWeights, n_heads: int) -> Tensor:
    """Masked multi-head self-attention with a residual update.

    ``tokens`` is [B, N, C].  Value is the raw token; query and key are
    its layer norm.  Per head: softmax(Q Wq (K Wk)^T / sqrt(C / heads)
    + mask) applied to V Wv; heads concatenate, project through Wo, and
    add back onto the input.
    """
    b, n, c = tokens.shape
    if c % n_heads:
        raise ValueError(f"channels {c} not divisible by heads {n_heads}")
    dh = c // n_heads
    qk = ad.layer_norm(tokens, weights.ln_gamma, weights.ln_beta)

    def split_heads(t: Tensor) -> Tensor:
        t = ad.reshape(t, (b, n, n_heads, dh))
        return ad.permute(t, (0, 2, 1, 3))  # [B, H, N, dh]

    q = split_heads(ad.matmul(qk, weights.wq))
    k = split_heads(ad.matmul(qk, weights.wk))
    v = split_heads(ad.matmul(tokens, weights.wv))
    scores = ad.mul(ad.matmul(q, ad.permute(k, (0, 1, 3, 2))), 1.0 / math.sqrt(dh))
    attn = ad.softmax_masked(scores, mask)
    heads = ad.matmul(attn, v)                      # [B, H, N, dh]
    merged = ad.reshape(ad.permute(heads, (0, 2, 1, 3)), (b, n, c))
    return ad.add(ad.matmul(merged, weights.wo), tokens)


class EPIXformer:
    """Two successive masked-attention passes on the two EPI pairings.

    The horizontal pass forms tokens over (v, y) with batch (B, u, x);
    the vertical pass over (u, x) with batch (B, v, y).  Weights of the
    two passes are independent unless ``tied``.  Output shape equals
    input shape.
    """

    def __init__(self, cfg: MHXAConfig, rng, dtype, tied: bool = False):
        self.cfg = cfg
        self.horizontal = MHXAWeights.create(cfg.channels, rng, dtype)
        self.vertical = self.horizontal if tied else MHXAWeights.create(cfg.channels, rng, dtype)
        self._masks: dict[tuple[int, int], np.ndarray] = {}

    def params(self, prefix: str) -> dict[str, Tensor]:
        out = self.horizontal.params(f"{prefix}.h")
        if self.vertical is not self.horizontal:
            out.update(self.vertical.params(f"{prefix}.v"))
        return out

    def _mask(self, s: int, length: int) -> np.ndarray:
        key = (s, length)
        if key not in self._masks:
            self._masks[key] = build_xmask(s, length, self.cfg.d_max)
        return self._masks[key]

    def _pass(self, f: Tensor, weights: MHXAWeights, angle_axis: int, pos_axis: int) -> Tensor:
        b, c, u, v, y, x = f.shape
        batch_axes = tuple(ax for ax in (2, 3, 4, 5) if ax not in (angle_axis, pos_axis))
        perm = (0, *batch_axes, angle_axis, pos_axis, 1)
        moved = ad.permute(f, perm)
        b_, b0, b1, s, length, c_ = moved.shape
        tokens = ad.reshape(moved, (b_ * b0 * b1, s * length, c_))
        tokens = mhxa(tokens, self._mask(s, length), weights, self.cfg.heads)
        back = ad.reshape(tokens, (b_, b0, b1, s, length, c_))
        return ad.permute(back, tuple(np.argsort(perm)))

    def forward(self, f: Tensor, order: str = "hv") -> Tensor:
        for which in order:
            if which == "h":
                f = self._pass(f, self.horizontal, angle_axis=3, pos_axis=4)  # (v, y)
            elif which == "v":
                f = self._pass(f, self.vertical, angle_axis=2, pos_axis=5)    # (u, x)
            else:
                raise ValueError(f"bad pass id {which!r}")
        return f


def epixformer(features: Tensor, cfg: MHXAConfig, rng=None, dtype=np.float32) -> Tensor:
    if rng is None:
        rng = np.random.default_rng(0)
    return EPIXformer(cfg, rng, dtype).forward(features)


# ---------------------------------------------------------------------------
# task heads

class SSRHead:
    """Per-view conv + sub-pixel shuffle, plus a bicubic skip connection."""

    def __init__(self, cfg: NetworkConfig, rng, dtype):
        self.cfg = cfg
        c, a, cin = cfg.channels, cfg.scale, cfg.in_channels
        self.up = _conv_param(rng, c * a * a, c, 1, 1, dtype)
        self.out = _conv_param(rng, cin, c, 3, 3, dtype, zero=True)  # start at the skip
        self._skip_cache: dict[bytes, np.ndarray] = {}

    def params(self, prefix: str) -> dict[str, Tensor]:
        return {f"{prefix}.up": self.up, f"{prefix}.out": self.out}

    def _skip(self, lf_in: np.ndarray, dtype) -> np.ndarray:
        # the skip depends only on the input batch; memoize by content so
        # repeated batches (overfit runs, evaluation sweeps) pay it once
        import hashlib

        from .pipeline import bicubic_resize

        key = hashlib.blake2b(lf_in.tobytes(), digest_size=16).digest() + bytes(str(lf_in.shape), "ascii")
        if key not in self._skip_cache:
            if len(self._skip_cache) > 32:
                self._skip_cache.clear()
            self._skip_cache[key] = bicubic_resize(lf_in, self.cfg.scale).astype(dtype)
        return self._skip_cache[key]

    def forward(self, f: Tensor, lf_in: np.ndarray) -> Tensor:
        a = self.cfg.scale
        planes, moved = _to_planes(f, SubspaceId.SAI)
        h = ad.conv2d(planes, self.up)
        h = _pixel_shuffle(h, a)
        h = ad.conv2d(h, self.out, padding=1)
        out = _from_planes(h, SubspaceId.SAI, moved)
        if self.cfg.use_skip:
            out = ad.add(out, Tensor(self._skip(lf_in, f.data.dtype)))
        return out


class ASRHead:
    """Angular upsampling by a 1x1 remap of each macro-pixel.

    The a_in x a_in angular block at every (y, x) is flattened into
    channels, mapped by one 1x1 convolution to a_out^2 * C_out channels,
    and unflattened into the a_out x a_out output grid; spatial size is
    untouched.
    """

    def __init__(self, cfg: NetworkConfig, rng, dtype):
        self.cfg = cfg
        c, cin = cfg.channels, cfg.in_channels
        self.map = _conv_param(rng, cfg.a_out ** 2 * cin, cfg.a_in ** 2 * c, 1, 1, dtype)

    def params(self, prefix: str) -> dict[str, Tensor]:
        return {f"{prefix}.map": self.map}

    def forward(self, f: Tensor) -> Tensor:
        b, c, u, v, y, x = f.shape
        if u != self.cfg.a_in or v != self.cfg.a_in:
            raise ValueError(f"ASR head expects angular {self.cfg.a_in}, got {u}x{v}")
        a_out, cin = self.cfg.a_out, self.cfg.in_channels
        flat = ad.reshape(f, (b, c * u * v, y, x))       # channels group as (c, u, v)
        h = ad.conv2d(flat, self.map)
        return ad.reshape(h, (b, cin, a_out, a_out, y, x))


def ssr_head(features: Tensor, lf_in: np.ndarray, scale: int, rng=None) -> Tensor:
    cfg = NetworkConfig(task="ssr", channels=features.shape[1], scale=scale,
                        a_in=features.shape[2], heads=1)
    if rng is None:
        rng = np.random.default_rng(0)
    return SSRHead(cfg, rng, features.data.dtype).forward(features, lf_in)


def asr_head(features: Tensor, a_in: int, a_out: int, rng=None) -> Tensor:
    cfg = NetworkConfig(task="asr", channels=features.shape[1], a_in=a_in, a_out=a_out, heads=1)
    if rng is None:
        rng = np.random.default_rng(0)
    return ASRHead(cfg, rng, features.data.dtype).forward(features)


# ---------------------------------------------------------------------------
# assembled network

class LFNet:
    """Initial spatial conv, C42 blocks, EPIXformers, then the task head."""

    def __init__(self, cfg: NetworkConfig, seed: int = 0):
        self.cfg = cfg
        dtype = cfg.np_dtype()
        rng = np.random.default_rng(seed)
        c = cfg.channels
        self.init_conv = _conv_param(rng, c, cfg.in_channels, 3, 3, dtype)
        c42_cfg = C42BlockConfig(channels=c, angular=cfg.a_in, include_vsi=cfg.include_vsi)
        mhxa_cfg = MHXAConfig(channels=c, heads=cfg.heads, d_max=cfg.d_max)
        self.c42 = [C42Block(c42_cfg, rng, dtype) for _ in range(cfg.n_c42)]
        self.epix = [EPIXformer(mhxa_cfg, rng, dtype) for _ in range(cfg.n_epix)]
        if cfg.task == "ssr":
            self.head = SSRHead(cfg, rng, dtype)
        else:
            self.head = ASRHead(cfg, rng, dtype)

    def params(self) -> dict[str, Tensor]:
        out = {"init.conv": self.init_conv}
        for i, blk in enumerate(self.c42):
            out.update(blk.params(f"c42.{i}"))
        for i, blk in enumerate(self.epix):
            out.update(blk.params(f"epix.{i}"))
        out.update(self.head.params("head"))
        return out

    def trunk(self, x: Tensor) -> Tensor:
        planes, moved = _to_planes(x, SubspaceId.SAI)
        h = ad.conv2d(planes, self.init_conv, padding=1)
        f = _from_planes(h, SubspaceId.SAI, moved)
        for blk in self.c42:
            f = blk.forward(f)
        for blk in self.epix:
            f = blk.forward(f)
        return f

    def forward(self, lf_in: np.ndarray | Tensor) -> Tensor:
        """Map [B, C_in, U, V, Y, X] input to the super-resolved output."""
        x = lf_in if isinstance(lf_in, Tensor) else Tensor(np.asarray(lf_in, dtype=self.cfg.np_dtype()))
        if x.data.ndim != 6:
            raise ValueError(f"expected a batched 6D light field, got shape {x.shape}")
        if x.shape[2] != self.cfg.a_in or x.shape[3] != self.cfg.a_in:
            raise ValueError(f"network built for angular {self.cfg.a_in}, got {x.shape[2]}x{x.shape[3]}")
        f = self.trunk(x)
        if self.cfg.task == "ssr":
            return self.head.forward(f, x.data)
        return self.head.forward(f)

    def predict(self, lf: np.ndarray) -> np.ndarray:
        """Inference on one unbatched [C, U, V, Y, X] light field."""
        out = self.forward(np.asarray(lf)[None]).data[0]
        if self.cfg.task == "asr" and self.cfg.copy_inputs:
            hi = self.cfg.a_out - 1
            for iu, su in ((0, 0), (hi, 1)):
                for iv, sv in ((0, 0), (hi, 1)):
                    out[:, iu, iv] = lf[:, su, sv]
        return out

    def save(self, path) -> None:
        ad.save_checkpoint(path, self.params(), meta={"network": asdict(self.cfg)})

    @classmethod
    def load(cls, path) -> "LFNet":
        arrays, meta = ad.load_checkpoint(path)
        if "network" not in meta:
            raise ValueError(f"{path}: checkpoint carries no network config")
        net = cls(NetworkConfig(**meta["network"]))
        params = net.params()
        missing = set(params) - set(arrays)
        extra = set(arrays) - set(params)
        if missing or extra:
            raise ValueError(f"checkpoint mismatch: missing {sorted(missing)}, extra {sorted(extra)}")
        for name, p in params.items():
            if tuple(arrays[name].shape) != p.data.shape:
                raise ValueError(f"checkpoint shape mismatch for {name}")
            p.data = arrays[name].astype(net.cfg.np_dtype())
        return net
