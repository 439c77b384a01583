"""Minimal reverse-mode differentiation over numpy arrays.

Covers exactly the operator set the networks need: conv2d, matmul,
leaky ReLU, layer norm, masked softmax, concatenation, permutation,
reshape, elementwise add/mul, reductions, and L1 loss.  Each op records
a closure that propagates gradients to its parents; ``Tensor.backward``
runs them in reverse topological order.

Values are checked finite after every op (NaN or Inf raises
``FloatingPointError``).  Training runs in float32; gradient checks run
the same graph in float64.
"""

from __future__ import annotations

import json
import struct
from pathlib import Path

import numpy as np

CHECKPOINT_MAGIC = b"LFCK"

_DTYPE_TAGS = {"float32": "<f4", "float64": "<f8"}


def _ensure_finite(arr: np.ndarray, op: str) -> None:
    if arr.size == 0:
        raise ValueError(f"{op}: empty result")
    lo, hi = arr.min(), arr.max()
    if not (np.isfinite(lo) and np.isfinite(hi)):
        raise FloatingPointError(f"{op}: non-finite values in result")


_REARRANGEMENTS = frozenset({"permute", "reshape", "concat"})


class Tensor:
    """An n-D array with an optional gradient and a reverse-pass record."""

    __slots__ = ("data", "grad", "requires_grad", "_backward", "_parents")

    def __init__(self, data, requires_grad: bool = False, dtype=None, _op: str = "leaf"):
        a = np.asarray(data)
        if dtype is not None:
            a = a.astype(dtype, copy=False)
        if a.dtype not in (np.float32, np.float64):
            a = a.astype(np.float64)
        if _op not in _REARRANGEMENTS:  # rearrangements preserve already-checked values
            _ensure_finite(a, _op)
        self.data = a
        self.grad = None
        self.requires_grad = bool(requires_grad)
        self._backward = None
        self._parents = ()

    @property
    def shape(self) -> tuple[int, ...]:
        return self.data.shape

    @property
    def dtype(self):
        return self.data.dtype

    def __repr__(self):
        return f"Tensor(shape={self.data.shape}, dtype={self.data.dtype}, requires_grad={self.requires_grad})"

    def _accumulate(self, g: np.ndarray) -> None:
        if self.grad is None:
            self.grad = g.copy()
        else:
            self.grad += g

    def _accumulate_owned(self, g: np.ndarray) -> None:
        """Like ``_accumulate`` for freshly allocated arrays the caller
        relinquishes; skips the defensive copy."""
        if self.grad is None:
            self.grad = g
        else:
            self.grad += g

    def backward(self) -> None:
        """Reverse pass from a scalar; fills ``grad`` on every reachable tensor."""
        if self.data.size != 1:
            raise ValueError(f"backward requires a scalar loss, got shape {self.data.shape}")
        topo: list[Tensor] = []
        seen: set[int] = set()
        stack: list[tuple[Tensor, bool]] = [(self, False)]
        while stack:
            node, expanded = stack.pop()
            if expanded:
                topo.append(node)
                continue
            if id(node) in seen:
                continue
            seen.add(id(node))
            stack.append((node, True))
            for p in node._parents:
                if id(p) not in seen:
                    stack.append((p, False))
        self.grad = np.ones_like(self.data)
        for node in reversed(topo):
            if node._backward is not None and node.grad is not None:
                node._backward(node.grad)

    # operator sugar
    def __add__(self, other):
        return add(self, other)

    def __sub__(self, other):
        return add(self, mul(other, -1.0) if isinstance(other, Tensor) else -other)

    def __mul__(self, other):
        return mul(self, other)

    def __neg__(self):
        return mul(self, -1.0)

    def __matmul__(self, other):
        return matmul(self, other)


def _result(data, parents: tuple[Tensor, ...], op: str) -> Tensor:
    out = Tensor(data, _op=op)
    out.requires_grad = any(p.requires_grad for p in parents)
    if out.requires_grad:
        out._parents = tuple(parents)
    return out


def _same_dtype(*tensors: Tensor) -> None:
    dts = {t.dtype for t in tensors}
    if len(dts) > 1:
        raise TypeError(f"mixed tensor dtypes {dts}; cast explicitly")


def add(a: Tensor, b) -> Tensor:
    """Elementwise sum; ``b`` may be a tensor of the same shape or a scalar."""
    if isinstance(b, Tensor):
        _same_dtype(a, b)
        if a.shape != b.shape:
            raise ValueError(f"add shape mismatch {a.shape} vs {b.shape}")
        out = _result(a.data + b.data, (a, b), "add")
        if out.requires_grad:
            def _bwd(g):
                if a.requires_grad:
                    a._accumulate(g)
                if b.requires_grad:
                    b._accumulate(g)
            out._backward = _bwd
        return out
    out = _result(a.data + float(b), (a,), "add")
    if out.requires_grad:
        out._backward = lambda g: a._accumulate(g)
    return out


def mul(a: Tensor, b) -> Tensor:
    """Elementwise product; ``b`` may be a tensor of the same shape or a scalar."""
    if isinstance(b, Tensor):
        _same_dtype(a, b)
        if a.shape != b.shape:
            raise ValueError(f"mul shape mismatch {a.shape} vs {b.shape}")
        out = _result(a.data * b.data, (a, b), "mul")
        if out.requires_grad:
            def _bwd(g):
                if a.requires_grad:
                    a._accumulate(g * b.data)
                if b.requires_grad:
                    b._accumulate(g * a.data)
            out._backward = _bwd
        return out
    bb = float(b)
    out = _result(a.data * bb, (a,), "mul")
    if out.requires_grad:
        out._backward = lambda g: a._accumulate(g * bb)
    return out


def matmul(a: Tensor, b: Tensor) -> Tensor:
    """Matrix product ``[..., n, k] @ [k, m]`` or batched ``[..., k, m]``."""
    _same_dtype(a, b)
    out = _result(a.data @ b.data, (a, b), "matmul")
    if out.requires_grad:
        def _bwd(g):
            if a.requires_grad:
                ga = g @ np.swapaxes(b.data, -1, -2)
                extra = ga.ndim - a.data.ndim
                if extra > 0:
                    ga = ga.sum(axis=tuple(range(extra)))
                a._accumulate(ga)
            if b.requires_grad:
                gb = np.swapaxes(a.data, -1, -2) @ g
                extra = gb.ndim - b.data.ndim
                if extra > 0:
                    gb = gb.sum(axis=tuple(range(extra)))
                b._accumulate(gb)
        out._backward = _bwd
    return out


def linear(x: Tensor, w: Tensor) -> Tensor:
    """Token projection ``[..., n, c_in] @ [c_in, c_out]`` (no bias)."""
    return matmul(x, w)


def _pair(v) -> tuple[int, int]:
    if isinstance(v, (tuple, list)):
        if len(v) != 2:
            raise ValueError(f"expected 2 entries, got {v}")
        return int(v[0]), int(v[1])
    return int(v), int(v)


def _pad_spec(padding):
    """Normalize padding to ((top, bottom), (left, right))."""
    if isinstance(padding, (tuple, list)) and len(padding) == 2 and \
            all(isinstance(p, (tuple, list)) for p in padding):
        (a, b), (c, d) = padding
        return (int(a), int(b)), (int(c), int(d))
    ph, pw = _pair(padding)
    return (ph, ph), (pw, pw)


def conv2d(x: Tensor, kernel: Tensor, stride=1, dilation=1, padding=0) -> Tensor:
    """2D cross-correlation of ``x [B, Cin, H, W]`` with ``kernel [Cout, Cin, kh, kw]``.

    No kernel flip (deep-learning convention).  ``padding`` may be an
    int, an (h, w) pair, or ((top, bottom), (left, right)) for
    asymmetric cases.  Implemented as im2col plus one batched matmul.
    """
    _same_dtype(x, kernel)
    if x.data.ndim != 4 or kernel.data.ndim != 4:
        raise ValueError(f"conv2d expects 4D input and kernel, got {x.shape} and {kernel.shape}")
    bsz, cin, h, w = x.shape
    cout, cin_k, kh, kw = kernel.shape
    if cin != cin_k:
        raise ValueError(f"conv2d channel mismatch: input {cin}, kernel {cin_k}")
    sh, sw = _pair(stride)
    dh, dw = _pair(dilation)
    (pt, pb), (pl, pr) = _pad_spec(padding)
    eff_kh = (kh - 1) * dh + 1
    eff_kw = (kw - 1) * dw + 1
    ho = (h + pt + pb - eff_kh) // sh + 1
    wo = (w + pl + pr - eff_kw) // sw + 1
    if ho < 1 or wo < 1:
        raise ValueError(f"conv2d output would be empty for input {x.shape}, kernel {kernel.shape}")

    pointwise = (kh == 1 and kw == 1 and (sh, sw) == (1, 1)
                 and (pt, pb, pl, pr) == (0, 0, 0, 0))
    if pointwise:
        col = x.data.reshape(bsz, cin, ho * wo)
    else:
        xp = np.pad(x.data, ((0, 0), (0, 0), (pt, pb), (pl, pr)))
        st = xp.strides
        view = np.lib.stride_tricks.as_strided(
            xp,
            shape=(bsz, cin, kh, kw, ho, wo),
            strides=(st[0], st[1], st[2] * dh, st[3] * dw, st[2] * sh, st[3] * sw),
            writeable=False,
        )
        col = np.ascontiguousarray(view).reshape(bsz, cin * kh * kw, ho * wo)
    w2 = kernel.data.reshape(cout, cin * kh * kw)
    out_data = (w2[None] @ col).reshape(bsz, cout, ho, wo)

    out = _result(out_data, (x, kernel), "conv2d")
    if out.requires_grad:
        pad_shape = (bsz, cin, h + pt + pb, w + pl + pr)

        def _bwd(g):
            g2 = g.reshape(bsz, cout, ho * wo)
            if kernel.requires_grad:
                gw = np.matmul(g2, col.transpose(0, 2, 1)).sum(axis=0)
                kernel._accumulate(gw.reshape(kernel.shape))
            if x.requires_grad:
                gcol = np.matmul(w2.T[None], g2)
                if pointwise:
                    x._accumulate(gcol.reshape(x.shape))
                    return
                gcol = gcol.reshape(bsz, cin, kh, kw, ho, wo)
                gxp = np.zeros(pad_shape, dtype=g.dtype)
                for p in range(kh):
                    for q in range(kw):
                        gxp[:, :, p * dh: p * dh + ho * sh: sh,
                            q * dw: q * dw + wo * sw: sw] += gcol[:, :, p, q]
                x._accumulate(gxp[:, :, pt: pt + h, pl: pl + w])
        out._backward = _bwd
    return out


def leaky_relu(x: Tensor, slope: float = 0.1) -> Tensor:
    neg = x.data < 0
    y = np.where(neg, slope * x.data, x.data)
    out = _result(y, (x,), "leaky_relu")
    if out.requires_grad:
        out._backward = lambda g: x._accumulate(np.where(neg, slope * g, g))
    return out


def layer_norm(x: Tensor, gamma: Tensor, beta: Tensor, eps: float = 1e-5) -> Tensor:
    """Normalize over the last axis to zero mean and unit variance, then
    apply the learnable per-channel scale and shift."""
    _same_dtype(x, gamma, beta)
    c = x.shape[-1]
    if gamma.shape != (c,) or beta.shape != (c,):
        raise ValueError(f"layer_norm scale/shift must have shape ({c},)")
    mu = x.data.mean(axis=-1, keepdims=True)
    xc = x.data - mu
    var = np.mean(xc * xc, axis=-1, keepdims=True)
    inv = 1.0 / np.sqrt(var + eps)
    xhat = xc * inv
    out = _result(xhat * gamma.data + beta.data, (x, gamma, beta), "layer_norm")
    if out.requires_grad:
        def _bwd(g):
            lead = tuple(range(g.ndim - 1))
            if gamma.requires_grad:
                gamma._accumulate((g * xhat).sum(axis=lead))
            if beta.requires_grad:
                beta._accumulate(g.sum(axis=lead))
            if x.requires_grad:
                gh = g * gamma.data
                term = gh - gh.mean(axis=-1, keepdims=True) \
                    - xhat * np.mean(gh * xhat, axis=-1, keepdims=True)
                x._accumulate(inv * term)
        out._backward = _bwd
    return out


def softmax_masked(x: Tensor, mask: np.ndarray) -> Tensor:
    """Softmax over the last axis of ``x + mask``.

    ``mask`` is a constant additive array (entries 0 or -inf)
    broadcastable against ``x``.  A row with every entry masked cannot
    normalize and raises ``ValueError``.
    """
    z = x.data + np.asarray(mask, dtype=x.data.dtype)
    zmax = z.max(axis=-1, keepdims=True)
    if not np.isfinite(zmax).all():
        raise ValueError("softmax_masked: some rows are entirely masked")
    e = np.exp(z - zmax)
    y = e / e.sum(axis=-1, keepdims=True)
    out = _result(y, (x,), "softmax_masked")
    if out.requires_grad:
        def _bwd(g):
            dot = (g * y).sum(axis=-1, keepdims=True)
            x._accumulate((g - dot) * y)
        out._backward = _bwd
    return out


def softmax(x: Tensor) -> Tensor:
    return softmax_masked(x, np.zeros((1,), dtype=x.data.dtype))


def concat(tensors: list[Tensor], axis: int) -> Tensor:
    _same_dtype(*tensors)
    out = _result(np.concatenate([t.data for t in tensors], axis=axis), tuple(tensors), "concat")
    if out.requires_grad:
        sizes = [t.shape[axis] for t in tensors]
        splits = np.cumsum(sizes)[:-1]

        def _bwd(g):
            for t, piece in zip(tensors, np.split(g, splits, axis=axis)):
                if t.requires_grad:
                    t._accumulate(piece)
        out._backward = _bwd
    return out


def permute(x: Tensor, axes: tuple[int, ...]) -> Tensor:
    """Axis permutation; its reverse pass applies the inverse permutation.

    The result may alias the input's buffer (a transposed view); ops
    never mutate their inputs, so this is safe and avoids a copy when a
    following reshape would copy anyway.
    """
    out = _result(np.transpose(x.data, axes), (x,), "permute")
    if out.requires_grad:
        inverse = tuple(np.argsort(axes))
        out._backward = lambda g: x._accumulate(np.transpose(g, inverse))
    return out


def reshape(x: Tensor, shape: tuple[int, ...]) -> Tensor:
    out = _result(x.data.reshape(shape), (x,), "reshape")
    if out.requires_grad:
        orig = x.shape
        out._backward = lambda g: x._accumulate(g.reshape(orig))
    return out


def sum_all(x: Tensor) -> Tensor:
    out = _result(x.data.sum(), (x,), "sum")
    if out.requires_grad:
        out._backward = lambda g: x._accumulate(np.broadcast_to(g, x.shape).astype(x.data.dtype))
    return out


def mean_all(x: Tensor) -> Tensor:
    return mul(sum_all(x), 1.0 / x.data.size)


def l1_loss(pred: Tensor, target: Tensor) -> Tensor:
    """Mean absolute error; the subgradient at zero difference is 0."""
    _same_dtype(pred, target)
    if pred.shape != target.shape:
        raise ValueError(f"l1_loss shape mismatch {pred.shape} vs {target.shape}")
    diff = pred.data - target.data
    out = _result(np.abs(diff).mean(), (pred, target), "l1_loss")
    if out.requires_grad:
        n = diff.size

        def _bwd(g):
            s = np.sign(diff) * (float(g) / n)
            if pred.requires_grad:
                pred._accumulate(s.astype(pred.data.dtype))
            if target.requires_grad:
                target._accumulate(-s.astype(target.data.dtype))
        out._backward = _bwd
    return out


def zero_grads(params) -> None:
    for p in (params.values() if isinstance(params, dict) else params):
        p.grad = None


# ---------------------------------------------------------------------------
# Adam

class AdamState:
    """Bias-corrected Adam state: per-parameter moments and a step counter."""

    def __init__(self, lr: float = 2e-4, beta1: float = 0.9, beta2: float = 0.999, eps: float = 1e-8):
        self.lr = lr
        self.beta1 = beta1
        self.beta2 = beta2
        self.eps = eps
        self.step = 0
        self.m: dict[str, np.ndarray] = {}
        self.v: dict[str, np.ndarray] = {}


def adam_step(params: dict[str, Tensor], state: AdamState) -> None:
    """One Adam update from the accumulated ``grad`` of each parameter.

    m <- b1 m + (1 - b1) g;  v <- b2 v + (1 - b2) g^2;
    p <- p - lr * (m / (1 - b1^t)) / (sqrt(v / (1 - b2^t)) + eps).
    Parameters without a gradient are skipped.  Deterministic.
    """
    state.step += 1
    t = state.step
    bc1 = 1.0 - state.beta1 ** t
    bc2 = 1.0 - state.beta2 ** t
    for name, p in params.items():
        if p.grad is None:
            continue
        g = p.grad
        if name not in state.m:
            state.m[name] = np.zeros_like(p.data, dtype=np.float64)
            state.v[name] = np.zeros_like(p.data, dtype=np.float64)
        m = state.m[name]
        v = state.v[name]
        m *= state.beta1
        m += (1.0 - state.beta1) * g
        v *= state.beta2
        v += (1.0 - state.beta2) * (g * g)
        update = state.lr * (m / bc1) / (np.sqrt(v / bc2) + state.eps)
        p.data = (p.data - update).astype(p.data.dtype)
        _ensure_finite(p.data, "adam_step")


# ---------------------------------------------------------------------------
# Finite-difference gradient checking

def gradcheck(loss_fn, params: dict[str, Tensor], eps: float = 1e-5,
              max_entries: int | None = None, rng: np.random.Generator | None = None) -> float:
    """Compare reverse-mode gradients against central finite differences.

    ``loss_fn()`` must rebuild the scalar loss from ``params``; all
    parameters must be float64.  Checks every coordinate, or a random
    subset of ``max_entries`` per parameter when given.  Returns the
    maximum relative error |a - n| / max(|a|, |n|, 1e-6).
    """
    for name, p in params.items():
        if p.data.dtype != np.float64:
            raise TypeError(f"gradcheck requires float64 parameters ({name} is {p.data.dtype})")
    zero_grads(params)
    loss = loss_fn()
    loss.backward()
    analytic = {name: (np.zeros_like(p.data) if p.grad is None else p.grad.copy())
                for name, p in params.items()}

    worst = 0.0
    for name, p in params.items():
        flat = p.data.reshape(-1)
        idx = np.arange(flat.size)
        if max_entries is not None and flat.size > max_entries:
            if rng is None:
                rng = np.random.default_rng(0)
            idx = rng.choice(flat.size, size=max_entries, replace=False)
        for i in idx:
            orig = flat[i]
            flat[i] = orig + eps
            hi = float(loss_fn().data)
            flat[i] = orig - eps
            lo = float(loss_fn().data)
            flat[i] = orig
            numeric = (hi - lo) / (2.0 * eps)
            a = float(analytic[name].reshape(-1)[i])
            rel = abs(a - numeric) / max(abs(a), abs(numeric), 1e-6)
            worst = max(worst, rel)
    return worst


# ---------------------------------------------------------------------------
# Checkpoint container: magic, JSON manifest, raw little-endian buffers.

def save_checkpoint(path: str | Path, tensors: dict[str, Tensor | np.ndarray],
                    meta: dict | None = None) -> None:
    """Write named arrays plus a JSON manifest into one binary file.

    Layout: magic "LFCK", a little-endian u32 manifest byte length, the
    UTF-8 JSON manifest {"meta": ..., "tensors": [{name, shape, dtype}]},
    then each buffer raw little-endian in manifest order.
    """
    entries = []
    blobs = []
    for name, t in tensors.items():
        a = t.data if isinstance(t, Tensor) else np.asarray(t)
        dtype = str(a.dtype)
        if dtype not in _DTYPE_TAGS:
            raise TypeError(f"checkpoint supports float32/float64, got {dtype} for {name}")
        entries.append({"name": name, "shape": list(a.shape), "dtype": dtype})
        blobs.append(np.ascontiguousarray(a, dtype=_DTYPE_TAGS[dtype]).tobytes())
    manifest = json.dumps({"meta": meta or {}, "tensors": entries}).encode("utf-8")
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "wb") as fh:
        fh.write(CHECKPOINT_MAGIC)
        fh.write(struct.pack("<I", len(manifest)))
        fh.write(manifest)
        for blob in blobs:
            fh.write(blob)


def load_checkpoint(path: str | Path) -> tuple[dict[str, np.ndarray], dict]:
    """Read back a checkpoint; returns (name -> array, manifest meta)."""
    with open(path, "rb") as fh:
        magic = fh.read(4)
        if magic != CHECKPOINT_MAGIC:
            raise ValueError(f"{path}: bad checkpoint magic {magic!r}")
        (mlen,) = struct.unpack("<I", fh.read(4))
        manifest = json.loads(fh.read(mlen).decode("utf-8"))
        arrays: dict[str, np.ndarray] = {}
        for entry in manifest["tensors"]:
            shape = tuple(entry["shape"])
            dt = np.dtype(_DTYPE_TAGS[entry["dtype"]])
            count = int(np.prod(shape)) if shape else 1
            buf = fh.read(count * dt.itemsize)
            if len(buf) != count * dt.itemsize:
                raise ValueError(f"{path}: truncated buffer for {entry['name']}")
            arrays[entry["name"]] = np.frombuffer(buf, dtype=dt).reshape(shape).astype(entry["dtype"])
    return arrays, manifest.get("meta", {})
