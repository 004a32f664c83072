"""Wire vectors as gray images: 4x4 encoding, permutation augmentation, 16x16 upscaling."""
from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path

import numpy as np

DEFAULT_SCALE_MAX = 6.0
BLOCK = 4


@dataclass(frozen=True, eq=False)
class GrayImage:
    pixels: np.ndarray  # (height, width), values in [0, 1]
    scale_max: float = DEFAULT_SCALE_MAX

    def __post_init__(self):
        px = np.array(self.pixels, dtype=float)
        if px.ndim != 2:
            raise ValueError("pixels must be 2-D")
        if not self.scale_max > 0:
            raise ValueError("scale_max must be > 0")
        if not (np.all(np.isfinite(px)) and px.min() >= 0.0 and px.max() <= 1.0):
            raise ValueError("pixels must lie in [0, 1]")
        px.setflags(write=False)
        object.__setattr__(self, "pixels", px)

    @property
    def height(self) -> int:
        return self.pixels.shape[0]

    @property
    def width(self) -> int:
        return self.pixels.shape[1]

    def __eq__(self, other):
        if not isinstance(other, GrayImage):
            return NotImplemented
        return self.scale_max == other.scale_max and np.array_equal(self.pixels, other.pixels)

    __hash__ = None  # type: ignore[assignment]


def _check_scale(x: np.ndarray, scale_max: float) -> None:
    if not scale_max > 0:
        raise ValueError("scale_max must be > 0")
    if x.max(initial=0.0) > scale_max:
        raise ValueError(f"cross-section {x.max()} exceeds scale_max {scale_max}")


def encode(x, scale_max: float = DEFAULT_SCALE_MAX) -> GrayImage:
    """Place the 16 slots row-major into a 4x4 image, intensity = section / scale_max."""
    x = np.asarray(getattr(x, "sections", x), dtype=float)
    if x.shape != (16,):
        raise ValueError(f"expected 16 cross-sections, got shape {x.shape}")
    _check_scale(x, scale_max)
    return GrayImage((x / scale_max).reshape(4, 4), scale_max)


def encode_batch(X: np.ndarray, scale_max: float = DEFAULT_SCALE_MAX) -> np.ndarray:
    """Vectorized ``upscale(encode(x))`` for the rows of ``X``; shape (n, 16, 16)."""
    X = np.atleast_2d(np.asarray(X, dtype=float))
    _check_scale(X, scale_max)
    small = (X / scale_max).reshape(-1, 4, 4)
    return np.repeat(np.repeat(small, BLOCK, axis=1), BLOCK, axis=2)


def augment(img: GrayImage, k: int = 6, seed: int | np.random.Generator = 0,
            max_attempts: int = 20) -> list[GrayImage]:
    """``k`` random permutations of the 16 cells.

    A draw equal to the original or to an earlier draw is redrawn, up to
    ``max_attempts`` times; after that it is kept.
    """
    if img.pixels.shape != (4, 4):
        raise ValueError(f"augment expects a 4x4 image, got {img.pixels.shape}")
    if k < 1:
        raise ValueError("k must be >= 1")
    rng = seed if isinstance(seed, np.random.Generator) else np.random.default_rng(seed)
    flat = img.pixels.ravel()
    seen = [flat]
    out = []
    for _ in range(k):
        for _attempt in range(max_attempts):
            cand = flat[rng.permutation(16)]
            if not any(np.array_equal(cand, s) for s in seen):
                break
        seen.append(cand)
        out.append(GrayImage(cand.reshape(4, 4), img.scale_max))
    return out


def upscale(img: GrayImage) -> GrayImage:
    """Nearest-neighbour x4: every source pixel becomes a constant 4x4 block."""
    if img.pixels.shape != (4, 4):
        raise ValueError(f"upscale expects a 4x4 image, got {img.pixels.shape}")
    big = np.repeat(np.repeat(img.pixels, BLOCK, axis=0), BLOCK, axis=1)
    return GrayImage(big, img.scale_max)


def build_image_dataset(ds, augment_k: int = 6, scale_max: float = DEFAULT_SCALE_MAX,
                        seed: int = 0) -> tuple[np.ndarray, np.ndarray]:
    """Images ``(n*(augment_k+1), 16, 16)`` and their labels.

    Per record: the original image first, then its permutations. Each record
    draws from its own generator seeded by ``(seed, index)``.
    """
    X = np.asarray(ds.X, dtype=float)
    Y = np.asarray(ds.Y, dtype=float)
    images, labels = [], []
    for idx, (x, y) in enumerate(zip(X, Y)):
        small = encode(x, scale_max)
        group = [small]
        if augment_k > 0:
            group += augment(small, augment_k, np.random.default_rng([seed, idx]))
        for g in group:
            images.append(upscale(g).pixels)
            labels.append(y)
    return np.array(images), np.array(labels)


def write_pgm(img: GrayImage, path: str | Path) -> None:
    """Plain PGM (P2, maxval 255)."""
    vals = np.rint(img.pixels * 255).astype(int)
    lines = ["P2", f"{img.width} {img.height}", "255"]
    lines += [" ".join(str(v) for v in row) for row in vals]
    Path(path).write_text("\n".join(lines) + "\n", encoding="ascii")
