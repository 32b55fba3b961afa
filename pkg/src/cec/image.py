"""Raster input: grayscale loading, binarization, foreground extraction.

The pipeline feeding the clustering engine from an image is deliberately
small: load a grayscale raster, threshold it (Otsu or fixed), and turn the
foreground pixels into points. Points are pixel centers, x growing right and
y growing DOWN (raster convention, shared by the SVG output, so nothing is
ever flipped).
"""

from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .errors import ConfigError, ConstantImage

__all__ = [
    "BinaryMask",
    "load_image",
    "otsu_threshold",
    "binarize",
    "mask_to_points",
]

# ITU-R BT.709 luma weights for RGB input
_LUMA = np.array([0.2126, 0.7152, 0.0722])


@dataclass
class BinaryMask:
    """Thresholded raster; True pixels are foreground."""

    width: int
    height: int
    pixels: np.ndarray  # bool, shape (height, width)
    foreground: str     # which side of the threshold is foreground: 'dark' | 'bright'

    def __post_init__(self):
        self.pixels = np.asarray(self.pixels, dtype=bool)
        if self.pixels.shape != (self.height, self.width):
            raise ConfigError(
                f"mask pixels of shape {self.pixels.shape} do not match "
                f"{self.height}x{self.width}"
            )

    @property
    def bits(self) -> np.ndarray:
        """Row-major flattened foreground flags (length width*height)."""
        return self.pixels.reshape(-1)

    @property
    def foreground_count(self) -> int:
        return int(np.count_nonzero(self.pixels))


def _load_pgm(path: Path) -> np.ndarray:
    data = path.read_bytes()
    # header: magic, width, height, maxval, separated by whitespace/comments
    tokens = []
    pos = 0
    while len(tokens) < 4:
        if pos >= len(data):
            raise ConfigError(f"{path}: truncated PGM header")
        ch = data[pos:pos + 1]
        if ch == b"#":
            while pos < len(data) and data[pos:pos + 1] != b"\n":
                pos += 1
        elif ch.isspace():
            pos += 1
        else:
            start = pos
            while pos < len(data) and not data[pos:pos + 1].isspace():
                pos += 1
            tokens.append(data[start:pos])
    if tokens[0] != b"P5":
        raise ConfigError(f"{path}: only binary (P5) PGM is supported, got {tokens[0]!r}")
    try:
        width, height, maxval = (int(t) for t in tokens[1:4])
    except ValueError:
        raise ConfigError(f"{path}: malformed PGM header") from None
    if maxval <= 0 or maxval > 255:
        raise ConfigError(f"{path}: only 8-bit PGM is supported (maxval {maxval})")
    pos += 1  # single whitespace byte after maxval
    raster = np.frombuffer(data, dtype=np.uint8, count=width * height, offset=pos)
    if raster.size != width * height:
        raise ConfigError(f"{path}: PGM raster is truncated")
    return raster.reshape(height, width).astype(np.float64)


def _load_png(path: Path) -> np.ndarray:
    from PIL import Image

    with Image.open(path) as img:
        if img.mode in ("I", "I;16", "I;16B", "F"):
            raise ConfigError(f"{path}: only 8-bit images are supported (mode {img.mode})")
        if img.mode == "L":
            return np.asarray(img, dtype=np.float64)
        if img.mode != "RGB":
            img = img.convert("RGB")
        rgb = np.asarray(img, dtype=np.float64)
    return rgb @ _LUMA


def load_image(path) -> np.ndarray:
    """Load PNG or PGM as a float grayscale array in [0, 255].

    RGB images are reduced with the 709 luma weights 0.2126/0.7152/0.0722.
    """
    p = Path(path)
    if not p.exists():
        raise ConfigError(f"cannot read image {p}")
    suffix = p.suffix.lower()
    if suffix == ".pgm":
        return _load_pgm(p)
    if suffix == ".png":
        return _load_png(p)
    raise ConfigError(f"unsupported image format {suffix!r} (expected .png or .pgm)")


def otsu_threshold(image) -> float:
    """Threshold maximizing between-class variance of the 256-bin histogram.

    Returns k + 0.5 for the best split (levels <= k versus > k), so the
    threshold never coincides with a pixel level. Raises ConstantImage when
    the image has a single gray level.
    """
    img = np.asarray(image, dtype=np.float64)
    if img.size == 0:
        raise ConfigError("cannot threshold an empty image")
    levels = np.clip(np.rint(img), 0, 255).astype(np.int64)
    hist = np.bincount(levels.reshape(-1), minlength=256).astype(np.float64)
    total = hist.sum()
    w0 = np.cumsum(hist)                  # points in class 0 for split k
    m0 = np.cumsum(hist * np.arange(256))  # level mass in class 0
    valid = (w0 > 0) & (w0 < total)
    if not np.any(valid):
        raise ConstantImage(
            "image has a single gray level; supply a fixed threshold instead"
        )
    w1 = total - w0
    with np.errstate(divide="ignore", invalid="ignore"):
        mu0 = m0 / w0
        mu1 = (m0[-1] - m0) / w1
        between = w0 * w1 * (mu0 - mu1) ** 2
    between[~valid] = -1.0
    k = int(np.argmax(between))  # ties resolve to the lowest split
    return k + 0.5


def binarize(image, method: str = "otsu", threshold=None, polarity: str = "dark") -> BinaryMask:
    """Threshold a grayscale raster into a BinaryMask.

    ``method`` is ``"otsu"`` or ``"fixed"``; a fixed threshold ``t`` marks
    pixels strictly beyond it for the chosen polarity (dark: value < t,
    bright: value > t).
    """
    img = np.asarray(image, dtype=np.float64)
    if img.ndim != 2 or img.size == 0:
        raise ConfigError(f"expected a nonempty 2-D grayscale image, got shape {img.shape}")
    if polarity not in ("dark", "bright"):
        raise ConfigError(f"polarity must be 'dark' or 'bright', got {polarity!r}")
    if method == "otsu":
        t = otsu_threshold(img)
    elif method == "fixed":
        if threshold is None:
            raise ConfigError("fixed thresholding needs a threshold value")
        t = float(threshold)
        if not (0.0 <= t <= 255.0):
            raise ConfigError(f"fixed threshold must lie in [0, 255], got {t}")
    else:
        raise ConfigError(f"unknown thresholding method {method!r}")
    fg = img < t if polarity == "dark" else img > t
    return BinaryMask(width=img.shape[1], height=img.shape[0], pixels=fg, foreground=polarity)


def mask_to_points(mask: BinaryMask) -> np.ndarray:
    """Pixel-center point per foreground pixel, row-major order.

    A foreground pixel at column x, row y becomes the point (x+0.5, y+0.5);
    an empty mask yields an empty (0, 2) array.
    """
    ys, xs = np.nonzero(mask.pixels)
    return np.column_stack([xs + 0.5, ys + 0.5]).astype(np.float64)
