"""Minimal PGM/PPM image I/O and grayscale conversion.

Frames are ingested as image files; only the binary netpbm formats (P5
grayscale, P6 color, maxval 255) are produced, and both binary and the
ascii variants (P2/P3) are read. Gray images are float64 arrays in [0, 1].
"""

from __future__ import annotations

import re
from pathlib import Path

import numpy as np

from .errors import DataError

# ITU-R 601 luma weights
_LUMA = np.array([0.299, 0.587, 0.114])


def to_gray(image: np.ndarray) -> np.ndarray:
    """Color (H,W,3) uint8 or float to grayscale float64 in [0,1]."""
    img = np.asarray(image)
    if img.dtype == np.uint8:
        img = img.astype(np.float64) / 255.0
    else:
        img = img.astype(np.float64)
    if img.ndim == 2:
        return img
    if img.ndim == 3 and img.shape[2] == 3:
        return img @ _LUMA
    raise DataError(f"unsupported image shape {img.shape}")


def write_pgm(path, image: np.ndarray) -> None:
    """Write a grayscale image (float in [0,1] or uint8) as binary P5."""
    img = np.asarray(image)
    if img.dtype != np.uint8:
        img = np.clip(np.rint(img * 255.0), 0, 255).astype(np.uint8)
    h, w = img.shape
    with open(path, "wb") as f:
        f.write(f"P5\n{w} {h}\n255\n".encode("ascii"))
        f.write(img.tobytes())


def write_ppm(path, image: np.ndarray) -> None:
    """Write a color image (H,W,3) as binary P6."""
    img = np.asarray(image)
    if img.dtype != np.uint8:
        img = np.clip(np.rint(img * 255.0), 0, 255).astype(np.uint8)
    h, w, _ = img.shape
    with open(path, "wb") as f:
        f.write(f"P6\n{w} {h}\n255\n".encode("ascii"))
        f.write(img.tobytes())


def _read_tokens(data: bytes, count: int, offset: int) -> tuple[list[int], int]:
    """Read whitespace/comment-separated ascii integers from a netpbm header."""
    tokens: list[int] = []
    i = offset
    while len(tokens) < count and i < len(data):
        c = data[i : i + 1]
        if c == b"#":
            while i < len(data) and data[i : i + 1] not in (b"\n", b"\r"):
                i += 1
        elif c.isspace():
            i += 1
        else:
            j = i
            while j < len(data) and not data[j : j + 1].isspace():
                j += 1
            tok = data[i:j]
            if not re.fullmatch(rb"\d+", tok):
                raise DataError(f"bad netpbm token {tok!r}")
            tokens.append(int(tok))
            i = j
    if len(tokens) < count:
        raise DataError("truncated netpbm header")
    return tokens, i


def read_image(path) -> np.ndarray:
    """Read a PGM/PPM file; returns uint8 (H,W) or (H,W,3)."""
    data = Path(path).read_bytes()
    if len(data) < 2:
        raise DataError(f"{path}: not a netpbm file")
    magic = data[:2]
    if magic not in (b"P5", b"P6", b"P2", b"P3"):
        raise DataError(f"{path}: unsupported magic {magic!r}")
    (w, h, maxval), i = _read_tokens(data, 3, 2)
    if maxval <= 0 or maxval > 255:
        raise DataError(f"{path}: unsupported maxval {maxval}")
    channels = 3 if magic in (b"P6", b"P3") else 1
    n = w * h * channels
    if magic in (b"P5", b"P6"):
        i += 1  # single whitespace byte after maxval
        raw = data[i : i + n]
        if len(raw) < n:
            raise DataError(f"{path}: truncated pixel data")
        img = np.frombuffer(raw, dtype=np.uint8, count=n)
    else:
        vals, _ = _read_tokens(data, n, i)
        img = np.array(vals, dtype=np.uint8)
    if channels == 3:
        return img.reshape(h, w, 3)
    return img.reshape(h, w)


def load_gray(path) -> np.ndarray:
    return to_gray(read_image(path))


def list_frames(directory) -> list[Path]:
    """Image files in a directory in lexicographic filename order."""
    d = Path(directory)
    if not d.is_dir():
        raise DataError(f"frames directory not found: {directory}")
    frames = sorted(
        p for p in d.iterdir() if p.suffix.lower() in (".pgm", ".ppm", ".pnm")
    )
    if not frames:
        raise DataError(f"no PGM/PPM frames in {directory}")
    return frames
