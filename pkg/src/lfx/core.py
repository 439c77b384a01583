"""Canonical 4D light-field container and exact 2D-subspace rearrangements.

A light field is stored as a 5D array indexed ``[c, u, v, y, x]``:
channels, vertical angle, horizontal angle, vertical pixel, horizontal
pixel.  This index order is canonical for the whole package.  The angular
axes are paired with the spatial axes they displace: ``u`` pairs with
``x`` and ``v`` pairs with ``y``.

All functions here are pure index permutations or reshapes (bijections
on index tuples); each documents its mapping.  They copy rather than
alias, so inputs are never mutated.
"""

from __future__ import annotations

from dataclasses import dataclass
from enum import Enum

import numpy as np


class SubspaceId(Enum):
    """The six 2D coordinate-pair slices of a 4D light field.

    Each member names the pair of dimensions forming the 2D plane; the
    remaining two dimensions are flattened into a batch axis.
    """

    SAI = "sai"          # plane (y, x),  batch (u, v)
    MACPI = "macpi"      # plane (u, v),  batch (y, x)
    EPI_UX = "epi_ux"    # plane (u, x),  batch (v, y)
    EPI_VY = "epi_vy"    # plane (v, y),  batch (u, x)
    VSI_VX = "vsi_vx"    # plane (v, x),  batch (u, y)
    VSI_UY = "vsi_uy"    # plane (u, y),  batch (v, x)


# Axis indices into [c, u, v, y, x] for each subspace: (plane_row, plane_col).
# Batch axes are the two remaining non-channel axes, kept in canonical order.
_PLANE_AXES = {
    SubspaceId.SAI: (3, 4),
    SubspaceId.MACPI: (1, 2),
    SubspaceId.EPI_UX: (1, 4),
    SubspaceId.EPI_VY: (2, 3),
    SubspaceId.VSI_VX: (2, 4),
    SubspaceId.VSI_UY: (1, 3),
}


def _axis_split(sid: SubspaceId) -> tuple[tuple[int, int], tuple[int, int]]:
    plane = _PLANE_AXES[sid]
    batch = tuple(a for a in (1, 2, 3, 4) if a not in plane)
    return batch, plane


@dataclass(frozen=True)
class LightField4D:
    """A 4D light field (plus channels) in canonical ``[c, u, v, y, x]`` order.

    Invariants: all values finite; all five dimensions >= 1.  ``u`` indexes
    the angular direction that displaces ``x``, and ``v`` the one that
    displaces ``y``.
    """

    data: np.ndarray

    def __post_init__(self):
        a = np.asarray(self.data)
        if a.ndim != 5:
            raise ValueError(f"light field must be 5D [c,u,v,y,x], got shape {a.shape}")
        if any(s < 1 for s in a.shape):
            raise ValueError(f"all dimensions must be >= 1, got shape {a.shape}")
        if not (np.isfinite(a.min()) and np.isfinite(a.max())):
            raise ValueError("light field contains non-finite values")
        object.__setattr__(self, "data", a)

    @property
    def channels(self) -> int:
        return self.data.shape[0]

    @property
    def angular(self) -> tuple[int, int]:
        """(U, V) angular sample counts."""
        return self.data.shape[1], self.data.shape[2]

    @property
    def spatial(self) -> tuple[int, int]:
        """(Y, X) pixel counts."""
        return self.data.shape[3], self.data.shape[4]

    @property
    def shape(self) -> tuple[int, ...]:
        return self.data.shape

    def view(self, u: int, v: int) -> np.ndarray:
        """The sub-aperture image [c, y, x] at angular index (u, v)."""
        return self.data[:, u, v]


def subspace_view(lf: LightField4D, sid: SubspaceId) -> np.ndarray:
    """Rearrange a light field into a batch of 2D subspace planes.

    Returns an array ``[c, batch, plane_rows, plane_cols]``.  The mapping
    is a bijection: with plane axes (p0, p1) and batch axes (b0, b1) of
    the subspace (see :class:`SubspaceId`), output element
    ``[c, i0 * len(b1) + i1, j0, j1]`` equals input element with index
    ``i0`` on axis b0, ``i1`` on b1, ``j0`` on p0 and ``j1`` on p1.
    """
    batch, plane = _axis_split(sid)
    a = lf.data
    moved = np.transpose(a, (0, *batch, *plane))
    c, b0, b1, p0, p1 = moved.shape
    return np.ascontiguousarray(moved).reshape(c, b0 * b1, p0, p1)


def subspace_unview(pb: np.ndarray, sid: SubspaceId, dims: tuple[int, int, int, int, int]) -> LightField4D:
    """Exact inverse of :func:`subspace_view`.

    ``dims`` is the target ``(C, U, V, Y, X)``.  Raises ``ValueError`` if
    ``pb`` is inconsistent with ``dims`` and ``sid``.
    """
    c, u, v, y, x = dims
    batch, plane = _axis_split(sid)
    full = (c, u, v, y, x)
    b_shape = (full[batch[0]], full[batch[1]])
    p_shape = (full[plane[0]], full[plane[1]])
    expect = (c, b_shape[0] * b_shape[1], p_shape[0], p_shape[1])
    if tuple(pb.shape) != expect:
        raise ValueError(f"plane batch shape {pb.shape} inconsistent with dims {dims} for {sid}: expected {expect}")
    a = pb.reshape(c, *b_shape, *p_shape)
    # Invert the transpose (0, b0, b1, p0, p1) -> (0, 1, 2, 3, 4).
    order = (0, *batch, *plane)
    inverse = np.argsort(order)
    return LightField4D(np.ascontiguousarray(np.transpose(a, inverse)))


def to_macpi_image(lf: LightField4D) -> np.ndarray:
    """Pack a light field into a macro-pixel image per channel.

    Output ``[c, Y*U, X*V]`` with element ``(c, y*U + u, x*V + v)`` taken
    from ``lf[c, u, v, y, x]``: each spatial position (y, x) becomes a
    U-by-V macro-pixel holding all its angular samples.
    """
    c, u, v, y, x = lf.shape
    a = np.transpose(lf.data, (0, 3, 1, 4, 2))  # [c, y, u, x, v]
    return np.ascontiguousarray(a).reshape(c, y * u, x * v)


def from_macpi_image(img: np.ndarray, angular: tuple[int, int]) -> LightField4D:
    """Inverse of :func:`to_macpi_image` given the angular counts (U, V)."""
    u, v = angular
    c, yu, xv = img.shape
    if yu % u or xv % v:
        raise ValueError(f"macro-pixel image {img.shape} not divisible by angular grid {angular}")
    y, x = yu // u, xv // v
    a = img.reshape(c, y, u, x, v)
    return LightField4D(np.ascontiguousarray(np.transpose(a, (0, 2, 4, 1, 3))))


def pixel_shuffle_spatial(x: np.ndarray, r: int) -> np.ndarray:
    """Sub-pixel rearrangement ``[c*r*r, y, x] -> [c, y*r, x*r]``.

    Channel index ``c*r*r + dy*r + dx`` lands at spatial offset (dy, dx)
    inside each r-by-r output block; bijective.
    """
    cr, h, w = x.shape
    if cr % (r * r):
        raise ValueError(f"channel count {cr} not divisible by r*r = {r * r}")
    c = cr // (r * r)
    a = x.reshape(c, r, r, h, w)
    a = np.transpose(a, (0, 3, 1, 4, 2))  # [c, y, dy, x, dx]
    return np.ascontiguousarray(a).reshape(c, h * r, w * r)


def pixel_unshuffle_spatial(x: np.ndarray, r: int) -> np.ndarray:
    """Inverse of :func:`pixel_shuffle_spatial`."""
    c, hr, wr = x.shape
    if hr % r or wr % r:
        raise ValueError(f"spatial dims {(hr, wr)} not divisible by r = {r}")
    h, w = hr // r, wr // r
    a = x.reshape(c, h, r, w, r)
    a = np.transpose(a, (0, 2, 4, 1, 3))
    return np.ascontiguousarray(a).reshape(c * r * r, h, w)


def channel_to_angle(x: np.ndarray, ku: int, kv: int | None = None) -> np.ndarray:
    """Move channel groups onto the angular grid of a 5D feature field.

    Input ``[c*ku*kv, u, v, y, x]``; output ``[c, u*ku, v*kv, y, x]``.
    Channels are grouped ``(c, du, dv)`` row-major, so channel
    ``c*ku*kv + du*kv + dv`` fills angular offset (du, dv) inside each
    ku-by-kv block.  ``kv`` defaults to ``ku``.
    """
    if kv is None:
        kv = ku
    ckk, u, v, y, x_ = x.shape
    if ckk % (ku * kv):
        raise ValueError(f"channel count {ckk} not divisible by ku*kv = {ku * kv}")
    c = ckk // (ku * kv)
    a = x.reshape(c, ku, kv, u, v, y, x_)
    a = np.transpose(a, (0, 3, 1, 4, 2, 5, 6))  # [c, u, du, v, dv, y, x]
    return np.ascontiguousarray(a).reshape(c, u * ku, v * kv, y, x_)


def angle_to_channel(x: np.ndarray, ku: int, kv: int | None = None) -> np.ndarray:
    """Inverse of :func:`channel_to_angle`."""
    if kv is None:
        kv = ku
    c, uku, vkv, y, x_ = x.shape
    if uku % ku or vkv % kv:
        raise ValueError(f"angular dims {(uku, vkv)} not divisible by ({ku}, {kv})")
    u, v = uku // ku, vkv // kv
    a = x.reshape(c, u, ku, v, kv, y, x_)
    a = np.transpose(a, (0, 2, 4, 1, 3, 5, 6))
    return np.ascontiguousarray(a).reshape(c * ku * kv, u, v, y, x_)


def flip_h_lf(lf: LightField4D) -> LightField4D:
    """Horizontal flip: reverses x and, to keep geometry consistent, u.

    Flipping pixels alone would negate every EPI slope; the paired
    angular axis must flip with its spatial axis.
    """
    return LightField4D(lf.data[:, ::-1, :, :, ::-1].copy())


def flip_v_lf(lf: LightField4D) -> LightField4D:
    """Vertical flip: reverses y together with its paired angle v."""
    return LightField4D(lf.data[:, :, ::-1, ::-1, :].copy())


def rot90_lf(lf: LightField4D) -> LightField4D:
    """Rotate the light field 90 degrees, spatially and angularly.

    Spatial planes rotate counterclockwise (new row axis takes values
    from the reversed old column axis); the angular grid rotates the
    same way so that u keeps pairing with x and v with y:
    ``out[c, u, v, y, x] = in[c, U-1-v, u, x, X-1-y]``.
    Requires a square angular grid.
    """
    c, u, v, y, x = lf.shape
    if u != v:
        raise ValueError(f"rot90 needs a square angular grid, got {u}x{v}")
    a = np.transpose(lf.data, (0, 2, 1, 4, 3))  # swap (u,v) and (y,x)
    a = a[:, :, ::-1, ::-1, :]                  # reverse new v and new y
    return LightField4D(np.ascontiguousarray(a))
