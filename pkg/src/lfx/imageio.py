"""PNG helpers: float images in [0, 1] against 8- or 16-bit files."""

from __future__ import annotations

from pathlib import Path

import numpy as np
from PIL import Image


def save_png(path: str | Path, img: np.ndarray, bit_depth: int = 16) -> None:
    """Write a 2D array in [0, 1] as a grayscale PNG (rounded quantization)."""
    a = np.asarray(img, dtype=np.float64)
    if a.ndim != 2:
        raise ValueError(f"expected a 2D image, got shape {a.shape}")
    a = np.clip(a, 0.0, 1.0)
    if bit_depth == 16:
        q = np.rint(a * 65535.0).astype(np.uint16)
    elif bit_depth == 8:
        q = np.rint(a * 255.0).astype(np.uint8)
    else:
        raise ValueError("bit_depth must be 8 or 16")
    Path(path).parent.mkdir(parents=True, exist_ok=True)
    Image.fromarray(q).save(path)


def load_png(path: str | Path) -> np.ndarray:
    """Read a grayscale PNG into a 2D float64 array scaled to [0, 1].

    RGB files come back as [3, H, W]; 8- and 16-bit depths are handled.
    """
    with Image.open(path) as im:
        a = np.array(im)
    if a.dtype == np.uint8:
        scale = 255.0
    elif a.dtype == np.uint16:
        scale = 65535.0
    elif a.dtype == np.int32:  # PIL mode "I" for some 16-bit files
        scale = 65535.0
    else:
        raise ValueError(f"unsupported PNG dtype {a.dtype} in {path}")
    f = a.astype(np.float64) / scale
    if f.ndim == 3:
        return np.ascontiguousarray(np.transpose(f[:, :, :3], (2, 0, 1)))
    return f
