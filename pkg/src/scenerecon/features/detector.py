"""Multi-octave difference-of-gaussians feature detector and descriptor.

A configurable scale-space detector: DoG extrema over ``octaves`` octaves
with ``layers_per_octave`` scales per octave, quadratic subpixel refinement,
single dominant gradient orientation, and a grid-of-orientation-histograms
descriptor (4x4 cells x 8 bins = 128 values at the default configuration),
gradient-magnitude weighted, trilinearly interpolated, L2-normalized with
0.2 clamping.

Detection is fully deterministic: identical image and configuration produce
byte-identical keypoints and descriptors.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy import ndimage

from ..errors import BadParameters, ImageTooSmall

_BASE_SIGMA = 1.6
_ASSUMED_BLUR = 0.5
_EDGE_RATIO = 10.0
_MAX_REFINE_STEPS = 5
_ORI_BINS = 36


@dataclass
class DetectorConfig:
    octaves: int = 4
    layers_per_octave: int = 5
    descriptor_bins: int = 128
    contrast_threshold: float = 0.03
    ratio_test: float = 0.8

    def __post_init__(self):
        if self.octaves < 1:
            raise BadParameters("octaves must be >= 1")
        if self.layers_per_octave < 1:
            raise BadParameters("layers_per_octave must be >= 1")
        if self.descriptor_bins <= 0 or self.descriptor_bins % 8 != 0:
            raise BadParameters("descriptor_bins must be a positive multiple of 8")
        grid = math.isqrt(self.descriptor_bins // 8)
        if grid * grid * 8 != self.descriptor_bins:
            raise BadParameters("descriptor_bins must be 8 * (grid size)^2")
        if not 0.0 < self.ratio_test < 1.0:
            raise BadParameters("ratio_test must be in (0, 1)")

    @property
    def descriptor_grid(self) -> int:
        return math.isqrt(self.descriptor_bins // 8)


# detector presets standing in for the SIFT/SURF parameter shapes
PRESETS = {
    "sift-like": DetectorConfig(layers_per_octave=5),
    "surf-like": DetectorConfig(layers_per_octave=2),
}


@dataclass
class Keypoint:
    u: float
    v: float
    octave: int
    scale: float  # absolute sigma in input-image pixels
    orientation: float  # radians in [0, 2*pi)
    response: float


@dataclass
class Features:
    """Parallel keypoint/descriptor lists; iterates as (Keypoint, Descriptor)."""

    keypoints: list[Keypoint]
    descriptors: np.ndarray  # (N, descriptor_bins), rows L2-normalized

    def __len__(self) -> int:
        return len(self.keypoints)

    def __iter__(self):
        return zip(self.keypoints, self.descriptors)

    def positions(self) -> np.ndarray:
        return np.array([[kp.u, kp.v] for kp in self.keypoints]).reshape(-1, 2)


def _gaussian_pyramid(image: np.ndarray, cfg: DetectorConfig):
    """Per-octave lists of progressively blurred images."""
    n_levels = cfg.layers_per_octave + 3
    k = 2.0 ** (1.0 / cfg.layers_per_octave)
    sigmas = [_BASE_SIGMA * k**i for i in range(n_levels)]

    first_blur = math.sqrt(max(_BASE_SIGMA**2 - _ASSUMED_BLUR**2, 0.01))
    base = ndimage.gaussian_filter(image, first_blur, mode="nearest")
    pyramid = []
    for octave in range(cfg.octaves):
        levels = [base]
        for i in range(1, n_levels):
            inc = math.sqrt(sigmas[i] ** 2 - sigmas[i - 1] ** 2)
            levels.append(ndimage.gaussian_filter(levels[-1], inc, mode="nearest"))
        pyramid.append(levels)
        # next octave starts from the level with doubled sigma
        nxt = levels[cfg.layers_per_octave][::2, ::2]
        if min(nxt.shape) < 16:
            break
        base = nxt
    return pyramid, sigmas


def _dog_stack(levels) -> np.ndarray:
    g = np.stack(levels)
    return g[1:] - g[:-1]


def _local_extrema(dog: np.ndarray, threshold: float) -> np.ndarray:
    """Strict 26-neighbourhood extrema of the (L,H,W) DoG stack."""
    footprint = np.ones((3, 3, 3), dtype=bool)
    footprint[1, 1, 1] = False
    mx = ndimage.maximum_filter(dog, footprint=footprint, mode="nearest")
    mn = ndimage.minimum_filter(dog, footprint=footprint, mode="nearest")
    strong = np.abs(dog) > 0.8 * threshold
    cand = strong & ((dog > mx) | (dog < mn))
    cand[0] = cand[-1] = False
    cand[:, :1, :] = cand[:, -1:, :] = False
    cand[:, :, :1] = cand[:, :, -1:] = False
    return np.argwhere(cand)


def _refine_extremum(dog: np.ndarray, layer: int, row: int, col: int, threshold: float):
    """Quadratic subpixel refinement; returns (layer_f, row_f, col_f, value) or None.

    The scale offset may legitimately oscillate when an extremum sits on a
    DoG layer boundary, so once the spatial offset has converged the scale
    offset is clamped to half a layer instead of discarding the point.
    """
    n_layers, h, w = dog.shape
    offset = None
    for attempt in range(_MAX_REFINE_STEPS):
        if not (1 <= layer < n_layers - 1 and 1 <= row < h - 1 and 1 <= col < w - 1):
            return None
        cube = dog[layer - 1 : layer + 2, row - 1 : row + 2, col - 1 : col + 2]
        grad = 0.5 * np.array(
            [
                cube[2, 1, 1] - cube[0, 1, 1],
                cube[1, 2, 1] - cube[1, 0, 1],
                cube[1, 1, 2] - cube[1, 1, 0],
            ]
        )
        c = cube[1, 1, 1]
        dss = cube[2, 1, 1] - 2 * c + cube[0, 1, 1]
        drr = cube[1, 2, 1] - 2 * c + cube[1, 0, 1]
        dcc = cube[1, 1, 2] - 2 * c + cube[1, 1, 0]
        dsr = 0.25 * (cube[2, 2, 1] - cube[2, 0, 1] - cube[0, 2, 1] + cube[0, 0, 1])
        dsc = 0.25 * (cube[2, 1, 2] - cube[2, 1, 0] - cube[0, 1, 2] + cube[0, 1, 0])
        drc = 0.25 * (cube[1, 2, 2] - cube[1, 2, 0] - cube[1, 0, 2] + cube[1, 0, 0])
        hess = np.array([[dss, dsr, dsc], [dsr, drr, drc], [dsc, drc, dcc]])
        try:
            offset = -np.linalg.solve(hess, grad)
        except np.linalg.LinAlgError:
            return None
        converged = np.all(np.abs(offset) < 0.5)
        spatial_done = abs(offset[1]) < 0.5 and abs(offset[2]) < 0.5
        if converged or (spatial_done and attempt == _MAX_REFINE_STEPS - 1):
            offset = np.clip(offset, -0.5, 0.5)
            value = c + 0.5 * grad @ offset
            if abs(value) < threshold:
                return None
            # edge rejection on the 2x2 spatial Hessian
            tr = drr + dcc
            det = drr * dcc - drc * drc
            if det <= 0 or tr * tr * _EDGE_RATIO >= det * (_EDGE_RATIO + 1) ** 2:
                return None
            return (layer + offset[0], row + offset[1], col + offset[2], value)
        layer += max(-1, min(1, int(round(offset[0]))))
        row += max(-1, min(1, int(round(offset[1]))))
        col += max(-1, min(1, int(round(offset[2]))))
    return None


def _gradients(level: np.ndarray):
    gy, gx = np.gradient(level)
    mag = np.hypot(gx, gy)
    ang = np.mod(np.arctan2(gy, gx), 2.0 * math.pi)
    return mag, ang


def _orientations(mag, ang, row: float, col: float, sigma_oct: float) -> list[float]:
    """Orientation peaks >= 0.8 * max of the smoothed gradient histogram.

    Symmetric structures produce near-equal opposite peaks whose winner is
    numerically fragile, so every qualifying peak yields its own keypoint
    (at most 4, strongest first).
    """
    h, w = mag.shape
    radius = max(int(round(4.5 * sigma_oct)), 3)
    r0, r1 = int(row) - radius, int(row) + radius + 1
    c0, c1 = int(col) - radius, int(col) + radius + 1
    cr0, cr1 = max(r0, 0), min(r1, h)
    cc0, cc1 = max(c0, 0), min(c1, w)
    if cr0 >= cr1 or cc0 >= cc1:
        return []
    m = mag[cr0:cr1, cc0:cc1]
    a = ang[cr0:cr1, cc0:cc1]
    rr = np.arange(cr0, cr1)[:, None] - row
    cc = np.arange(cc0, cc1)[None, :] - col
    weight = np.exp(-(rr * rr + cc * cc) / (2.0 * (1.5 * sigma_oct) ** 2))
    bins = np.floor(a / (2.0 * math.pi) * _ORI_BINS).astype(int) % _ORI_BINS
    hist = np.bincount(bins.ravel(), weights=(m * weight).ravel(), minlength=_ORI_BINS)
    # two passes of circular [1,1,1]/3 smoothing
    for _ in range(2):
        hist = (np.roll(hist, 1) + hist + np.roll(hist, -1)) / 3.0
    top = float(hist.max())
    if top <= 0:
        return []
    peaks = []
    for i in range(_ORI_BINS):
        left = hist[(i - 1) % _ORI_BINS]
        right = hist[(i + 1) % _ORI_BINS]
        if hist[i] > left and hist[i] > right and hist[i] >= 0.8 * top:
            denom = left - 2.0 * hist[i] + right
            delta = 0.0 if abs(denom) < 1e-12 else 0.5 * (left - right) / denom
            theta = ((i + 0.5 + delta) / _ORI_BINS) * 2.0 * math.pi % (2.0 * math.pi)
            peaks.append((float(hist[i]), theta))
    peaks.sort(key=lambda p: (-p[0], p[1]))
    return [theta for _, theta in peaks[:4]]


def _descriptor(mag, ang, row, col, sigma_oct, orientation, grid, n_bins=8):
    """Rotated grid of orientation histograms, trilinearly interpolated.

    Cell width 2 sigma: tight enough that the descriptor is dominated by
    the feature itself rather than by unrelated structure nearby.
    """
    h, w = mag.shape
    hist_width = 2.0 * sigma_oct
    radius = int(round(hist_width * math.sqrt(2) * (grid + 1) * 0.5))
    radius = min(radius, int(math.hypot(h, w)))
    r0, r1 = max(int(row) - radius, 0), min(int(row) + radius + 1, h)
    c0, c1 = max(int(col) - radius, 0), min(int(col) + radius + 1, w)
    if r0 >= r1 or c0 >= c1:
        return None
    rr = np.arange(r0, r1)[:, None] - row
    cc = np.arange(c0, c1)[None, :] - col
    cos_t, sin_t = math.cos(orientation), math.sin(orientation)
    # rotate into the keypoint frame, express in cell units
    r_rot = (-sin_t * cc + cos_t * rr) / hist_width
    c_rot = (cos_t * cc + sin_t * rr) / hist_width
    rbin = r_rot + grid / 2.0 - 0.5
    cbin = c_rot + grid / 2.0 - 0.5
    obin = (ang[r0:r1, c0:c1] - orientation) % (2.0 * math.pi) / (2.0 * math.pi) * n_bins
    weight = mag[r0:r1, c0:c1] * np.exp(
        -(r_rot**2 + c_rot**2) / (0.5 * grid * grid)
    )
    valid = (rbin > -1) & (rbin < grid) & (cbin > -1) & (cbin < grid) & (weight > 0)
    if not np.any(valid):
        return None
    rbin, cbin, obin, weight = rbin[valid], cbin[valid], obin[valid], weight[valid]

    hist = np.zeros((grid + 2, grid + 2, n_bins))
    r_floor = np.floor(rbin).astype(int)
    c_floor = np.floor(cbin).astype(int)
    o_floor = np.floor(obin).astype(int)
    dr = rbin - r_floor
    dc = cbin - c_floor
    do = obin - o_floor
    for ir in (0, 1):
        wr = weight * (dr if ir else 1 - dr)
        for ic in (0, 1):
            wc = wr * (dc if ic else 1 - dc)
            for io in (0, 1):
                wo = wc * (do if io else 1 - do)
                np.add.at(
                    hist,
                    (r_floor + ir + 1, c_floor + ic + 1, (o_floor + io) % n_bins),
                    wo,
                )
    vec = hist[1:-1, 1:-1, :].ravel()
    norm = np.linalg.norm(vec)
    if norm < 1e-12:
        return None
    vec = np.minimum(vec / norm, 0.2)
    norm = np.linalg.norm(vec)
    if norm < 1e-12:
        return None
    return vec / norm


def detect_and_describe(image: np.ndarray, cfg: DetectorConfig | None = None) -> Features:
    """Detect scale-space keypoints and compute their descriptors.

    ``image`` is a grayscale array (float in [0,1] or uint8) of at least
    32x32 pixels. Keypoints are returned sorted by response strength with a
    deterministic tie-break; flat patches yield no descriptors.
    """
    cfg = cfg or DetectorConfig()
    img = np.asarray(image)
    if img.ndim != 2:
        raise BadParameters("detector expects a single-channel image")
    if min(img.shape) < 32:
        raise ImageTooSmall(f"image {img.shape[1]}x{img.shape[0]} below 32x32 minimum")
    if img.dtype == np.uint8:
        img = img.astype(np.float64) / 255.0
    else:
        img = img.astype(np.float64)

    pyramid, sigmas = _gaussian_pyramid(img, cfg)
    k = 2.0 ** (1.0 / cfg.layers_per_octave)
    h, w = img.shape

    found = []  # (keypoint, octave data for descriptor)
    for octave, levels in enumerate(pyramid):
        dog = _dog_stack(levels)
        grads = {}
        scale_factor = float(2**octave)
        for layer, row, col in _local_extrema(dog, cfg.contrast_threshold):
            refined = _refine_extremum(dog, int(layer), int(row), int(col), cfg.contrast_threshold)
            if refined is None:
                continue
            layer_f, row_f, col_f, value = refined
            u = col_f * scale_factor
            v = row_f * scale_factor
            if not (0 <= u <= w - 1 and 0 <= v <= h - 1):
                continue
            sigma_oct = _BASE_SIGMA * k**layer_f
            level_idx = int(np.clip(round(layer_f), 0, len(levels) - 1))
            if level_idx not in grads:
                grads[level_idx] = _gradients(levels[level_idx])
            mag, ang = grads[level_idx]
            for orientation in _orientations(mag, ang, row_f, col_f, sigma_oct):
                desc = _descriptor(
                    mag, ang, row_f, col_f, sigma_oct, orientation, cfg.descriptor_grid
                )
                if desc is None:
                    continue
                kp = Keypoint(
                    u=float(u),
                    v=float(v),
                    octave=octave,
                    scale=float(sigma_oct * scale_factor),
                    orientation=float(orientation),
                    response=float(value),
                )
                found.append((kp, desc))

    found.sort(
        key=lambda t: (-abs(t[0].response), t[0].u, t[0].v, t[0].octave, t[0].orientation)
    )
    if not found:
        return Features([], np.zeros((0, cfg.descriptor_bins)))
    keypoints = [t[0] for t in found]
    descriptors = np.array([t[1] for t in found])
    return Features(keypoints, descriptors)
