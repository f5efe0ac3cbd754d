"""Synthetic training-scene generation and image augmentation.

Object patches are cut from blue-screen recordings with a chroma-key
test (blue channel minus luminance under a per-class threshold), then
scaled, color-jittered and pasted onto random backgrounds. Composites
carry auto-generated box annotations and get a light motion blur.
Histogram matching and five-way image splitting provide two further
dataset augmentations.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Mapping, Sequence

import numpy as np
from scipy import ndimage

from .core import BBox, ObjectClass, TRACKED_CLASSES

LUMA_WEIGHTS = (0.3, 0.59, 0.11)  # R, G, B

# Placeholder object sizes relative to the frame width; not measured from
# any recorded footage, tune per deployment via SynthConfig.
DEFAULT_SCALE_RANGES = {
    ObjectClass.BMR: (0.10, 0.18),
    ObjectClass.SP: (0.05, 0.10),
    ObjectClass.HRS: (0.05, 0.10),
    ObjectClass.HCPH: (0.08, 0.15),
}


class MaskExtractionError(ValueError):
    """Chroma keying found no object pixels."""


@dataclass
class ObjectMask:
    """A tight-cropped object patch with its boolean cutout mask."""

    patch: np.ndarray  # (H, W, 3) uint8
    mask: np.ndarray   # (H, W) bool
    cls: ObjectClass

    def __post_init__(self):
        if self.patch.shape[:2] != self.mask.shape:
            raise ValueError("patch and mask dimensions differ")
        if not self.mask.any():
            raise ValueError("mask must contain at least one object pixel")


@dataclass
class SynthScene:
    """A composited frame and its generated box annotations."""

    image: np.ndarray  # (H, W, 3) uint8
    annotations: list[tuple[ObjectClass, BBox]]


@dataclass(frozen=True)
class SynthConfig:
    """Knobs for scene composition; fixed seed means fixed output."""

    t_ck: Mapping[ObjectClass, float] = field(
        default_factory=lambda: {cls: 80.0 for cls in ObjectClass})
    scale_ranges: Mapping[ObjectClass, tuple[float, float]] = field(
        default_factory=lambda: dict(DEFAULT_SCALE_RANGES))
    hsl_range: tuple[float, float] = (0.60, 1.00)
    blur_len_range: tuple[int, int] = (3, 7)
    blur_angle_range: tuple[float, float] = (3.0, 10.0)
    hands_range: tuple[int, int] = (1, 3)
    seed: int = 0

    def __post_init__(self):
        for lo, hi in (self.hsl_range, self.blur_len_range,
                       self.blur_angle_range, self.hands_range,
                       *self.scale_ranges.values()):
            if hi < lo:
                raise ValueError("config ranges must be ordered (lo, hi)")
        if self.blur_len_range[0] < 1:
            raise ValueError("blur length must be >= 1")
        if self.hands_range[0] < 0:
            raise ValueError("hand count cannot be negative")
        if not 0.0 < self.hsl_range[0] <= self.hsl_range[1] <= 1.0:
            raise ValueError("hsl factors must lie in (0, 1]")


def luminance(image: np.ndarray) -> np.ndarray:
    """Weighted RGB luminance as float."""
    rgb = image.astype(np.float64)
    return (LUMA_WEIGHTS[0] * rgb[..., 0]
            + LUMA_WEIGHTS[1] * rgb[..., 1]
            + LUMA_WEIGHTS[2] * rgb[..., 2])


def chroma_mask(frame: np.ndarray, t_ck: float) -> np.ndarray:
    """Boolean object mask over a blue-screen frame.

    A pixel belongs to the object when blue minus luminance stays below
    the threshold; strongly blue pixels (the screen) fail the test.
    Raising t_ck never shrinks the mask.
    """
    return frame[..., 2].astype(np.float64) - luminance(frame) < t_ck


def extract_mask(frame: np.ndarray, cls: ObjectClass, t_ck: float) -> ObjectMask:
    """Cut the object out of a blue-screen frame, tight-cropped."""
    mask = chroma_mask(frame, t_ck)
    ys, xs = np.nonzero(mask)
    if len(xs) == 0:
        raise MaskExtractionError(
            f"no {cls.name} pixels found at threshold {t_ck}")
    y0, y1 = ys.min(), ys.max() + 1
    x0, x1 = xs.min(), xs.max() + 1
    return ObjectMask(frame[y0:y1, x0:x1].copy(), mask[y0:y1, x0:x1], cls)


# ---------------------------------------------------------------------------
# Hue/saturation/lightness jitter

def rgb_to_hls(rgb: np.ndarray) -> np.ndarray:
    """Vectorized RGB (floats in [0,1]) to hue/lightness/saturation."""
    r, g, b = rgb[..., 0], rgb[..., 1], rgb[..., 2]
    maxc = np.maximum(np.maximum(r, g), b)
    minc = np.minimum(np.minimum(r, g), b)
    sumc = maxc + minc
    rangec = maxc - minc
    l = sumc / 2.0
    gray = rangec == 0
    with np.errstate(divide="ignore", invalid="ignore"):
        s = np.where(l <= 0.5, rangec / sumc, rangec / (2.0 - sumc))
        rc = (maxc - r) / rangec
        gc = (maxc - g) / rangec
        bc = (maxc - b) / rangec
    h = np.where(r == maxc, bc - gc,
                 np.where(g == maxc, 2.0 + rc - bc, 4.0 + gc - rc))
    h = (h / 6.0) % 1.0
    h = np.where(gray, 0.0, h)
    s = np.where(gray, 0.0, s)
    return np.stack([h, l, s], axis=-1)


def hls_to_rgb(hls: np.ndarray) -> np.ndarray:
    """Inverse of rgb_to_hls, returning floats in [0,1]."""
    h, l, s = hls[..., 0], hls[..., 1], hls[..., 2]
    m2 = np.where(l <= 0.5, l * (1.0 + s), l + s - l * s)
    m1 = 2.0 * l - m2

    def ramp(hue):
        hue = hue % 1.0
        return np.where(
            hue < 1.0 / 6.0, m1 + (m2 - m1) * hue * 6.0,
            np.where(hue < 0.5, m2,
                     np.where(hue < 2.0 / 3.0,
                              m1 + (m2 - m1) * (2.0 / 3.0 - hue) * 6.0,
                              m1)))

    return np.stack(
        [ramp(h + 1.0 / 3.0), ramp(h), ramp(h - 1.0 / 3.0)], axis=-1)


def hsl_jitter(patch: np.ndarray, factors: tuple[float, float, float]) -> np.ndarray:
    """Scale hue, saturation and lightness each by a factor in (0, 1].

    Black stays black; factors of 1 reproduce the input up to 8-bit
    round-trip quantization.
    """
    fh, fs, fl = factors
    for f in (fh, fs, fl):
        if not 0.0 < f <= 1.0:
            raise ValueError(f"jitter factors must be in (0, 1], got {factors}")
    hls = rgb_to_hls(patch.astype(np.float64) / 255.0)
    hls[..., 0] *= fh
    hls[..., 1] *= fl
    hls[..., 2] *= fs
    rgb = np.clip(hls_to_rgb(hls), 0.0, 1.0)
    return np.rint(rgb * 255.0).astype(np.uint8)


# ---------------------------------------------------------------------------
# Motion blur

def motion_kernel(length: int, theta_degrees: float) -> np.ndarray:
    """Normalized line kernel of a given pixel length and angle."""
    if length < 1:
        raise ValueError("blur length must be >= 1")
    if length == 1:
        return np.ones((1, 1))
    angle = math.radians(theta_degrees)
    dx, dy = math.cos(angle), -math.sin(angle)
    points: dict[tuple[int, int], int] = {}
    for t in range(length):
        off = t - (length - 1) / 2.0
        px = math.floor(off * dx + 0.5)
        py = math.floor(off * dy + 0.5)
        points[(py, px)] = points.get((py, px), 0) + 1
    extent = max(max(abs(py), abs(px)) for py, px in points)
    kernel = np.zeros((2 * extent + 1, 2 * extent + 1))
    for (py, px), weight in points.items():
        kernel[extent + py, extent + px] = weight
    return kernel / kernel.sum()


def motion_blur(image: np.ndarray, length: int, theta_degrees: float) -> np.ndarray:
    """Convolve with a line kernel; edges are handled by replication."""
    kernel = motion_kernel(length, theta_degrees)
    if kernel.shape == (1, 1):
        return image.copy()
    blurred = np.empty_like(image)
    channels = image.shape[2] if image.ndim == 3 else 1
    src = image if image.ndim == 3 else image[..., None]
    dst = blurred if image.ndim == 3 else blurred[..., None]
    for c in range(channels):
        plane = ndimage.convolve(src[..., c].astype(np.float64), kernel, mode="nearest")
        dst[..., c] = np.clip(np.rint(plane), 0, 255).astype(image.dtype)
    return blurred


# ---------------------------------------------------------------------------
# Histogram matching

def histogram_match(image: np.ndarray, reference: np.ndarray) -> np.ndarray:
    """Map pixel values so each channel's CDF follows the reference.

    Value v maps to the smallest reference value whose cumulative share
    reaches v's cumulative share (computed with exact integer
    cross-multiplication, so self-matching is the identity on values
    that occur in the image).
    """
    if (image.ndim != reference.ndim
            or (image.ndim == 3 and image.shape[2] != reference.shape[2])):
        raise ValueError("image and reference must have the same channel count")
    src = image if image.ndim == 3 else image[..., None]
    ref = reference if reference.ndim == 3 else reference[..., None]
    out = np.empty_like(src)
    for c in range(src.shape[2]):
        out[..., c] = _match_channel(src[..., c], ref[..., c])
    return out if image.ndim == 3 else out[..., 0]


def _match_channel(src: np.ndarray, ref: np.ndarray) -> np.ndarray:
    cum_src = np.cumsum(np.bincount(src.ravel(), minlength=256)).astype(np.int64)
    cum_ref = np.cumsum(np.bincount(ref.ravel(), minlength=256)).astype(np.int64)
    total_src, total_ref = cum_src[-1], cum_ref[-1]
    # smallest r with cum_ref[r]/total_ref >= cum_src[v]/total_src
    mapping = np.searchsorted(cum_ref * total_src, cum_src * total_ref, side="left")
    mapping = np.clip(mapping, 0, 255).astype(np.uint8)
    return mapping[src]


# ---------------------------------------------------------------------------
# Five-way split with fragment filtering

@dataclass
class SplitTile:
    """One sub-image of a five-way split with rebased annotations."""

    origin_x: int
    origin_y: int
    image: np.ndarray
    annotations: list[tuple[ObjectClass, BBox]]


def split_image(
    image: np.ndarray,
    annotations: Sequence[tuple[ObjectClass, BBox]],
    min_fragment_ratio: float = 0.4,
) -> list[SplitTile]:
    """Cut an image into four quadrants plus a same-sized center crop.

    Boxes are clipped into each tile. A clipped fragment is dropped when
    its area falls below min_fragment_ratio of the largest fragment of
    the same source box in any other tile, so only tiles showing a
    significant part of an object keep its annotation.
    """
    height, width = image.shape[:2]
    tile_w, tile_h = width // 2, height // 2
    if tile_w == 0 or tile_h == 0:
        raise ValueError("image too small to split")
    origins = [
        (0, 0), (tile_w, 0), (0, tile_h), (tile_w, tile_h),
        ((width - tile_w) // 2, (height - tile_h) // 2),
    ]

    # fragments[obj_idx][tile_idx] = clipped box in tile coordinates
    fragments: list[dict[int, BBox]] = [dict() for _ in annotations]
    for obj_idx, (_, box) in enumerate(annotations):
        for tile_idx, (ox, oy) in enumerate(origins):
            x0 = max(box.x, ox)
            y0 = max(box.y, oy)
            x1 = min(box.x + box.w, ox + tile_w)
            y1 = min(box.y + box.h, oy + tile_h)
            if x1 - x0 > 0 and y1 - y0 > 0:
                fragments[obj_idx][tile_idx] = BBox(x0 - ox, y0 - oy, x1 - x0, y1 - y0)

    tiles = []
    for tile_idx, (ox, oy) in enumerate(origins):
        kept = []
        for obj_idx, (cls, _) in enumerate(annotations):
            frag = fragments[obj_idx].get(tile_idx)
            if frag is None:
                continue
            others = [
                b.area for t, b in fragments[obj_idx].items() if t != tile_idx
            ]
            if others and frag.area < min_fragment_ratio * max(others):
                continue
            kept.append((cls, frag))
        tiles.append(SplitTile(
            ox, oy, image[oy:oy + tile_h, ox:ox + tile_w].copy(), kept))
    return tiles


# ---------------------------------------------------------------------------
# Scene composition

def _resize_nearest(arr: np.ndarray, new_h: int, new_w: int) -> np.ndarray:
    h, w = arr.shape[:2]
    ys = np.minimum((np.arange(new_h) + 0.5) * (h / new_h), h - 1).astype(int)
    xs = np.minimum((np.arange(new_w) + 0.5) * (w / new_w), w - 1).astype(int)
    return arr[ys][:, xs]


def composite_scene(
    backgrounds: Sequence[np.ndarray],
    masks: Mapping[ObjectClass, Sequence[ObjectMask]],
    cfg: SynthConfig,
    rng: np.random.Generator,
) -> SynthScene:
    """Paste one instance of each tracked object and 1..3 hands onto a
    random background, then blur the whole composite.

    Objects are scaled to a class-typical width relative to the frame,
    color-jittered and hard-edge composited through their masks. The
    function is a pure consumer of the generator: identical rng state
    gives identical scenes.
    """
    if not backgrounds:
        raise ValueError("background pool is empty")
    scene = backgrounds[int(rng.integers(len(backgrounds)))].copy()
    bg_h, bg_w = scene.shape[:2]

    n_hands = int(rng.integers(cfg.hands_range[0], cfg.hands_range[1] + 1))
    plan = list(TRACKED_CLASSES) + [ObjectClass.HCPH] * n_hands

    annotations: list[tuple[ObjectClass, BBox]] = []
    for cls in plan:
        pool = masks.get(cls)
        if not pool:
            raise ValueError(f"no object masks available for {cls.name}")
        om = pool[int(rng.integers(len(pool)))]
        ph, pw = om.mask.shape

        lo, hi = cfg.scale_ranges[cls]
        target_w = max(1, round(float(rng.uniform(lo, hi)) * bg_w))
        target_h = max(1, round(target_w * ph / pw))
        if target_w > bg_w or target_h > bg_h:
            shrink = min(bg_w / target_w, bg_h / target_h)
            target_w = max(1, math.floor(target_w * shrink))
            target_h = max(1, math.floor(target_h * shrink))
        patch = _resize_nearest(om.patch, target_h, target_w)
        mask = _resize_nearest(om.mask, target_h, target_w)
        if not mask.any():
            mask = np.ones((target_h, target_w), dtype=bool)

        factors = tuple(float(f) for f in rng.uniform(
            cfg.hsl_range[0], cfg.hsl_range[1], size=3))
        patch = hsl_jitter(patch, factors)

        x0 = int(rng.integers(0, bg_w - target_w + 1))
        y0 = int(rng.integers(0, bg_h - target_h + 1))
        region = scene[y0:y0 + target_h, x0:x0 + target_w]
        region[mask] = patch[mask]
        annotations.append((cls, BBox(x0, y0, target_w, target_h)))

    length = int(rng.integers(cfg.blur_len_range[0], cfg.blur_len_range[1] + 1))
    theta = float(rng.uniform(cfg.blur_angle_range[0], cfg.blur_angle_range[1]))
    return SynthScene(motion_blur(scene, length, theta), annotations)


def scene_for_index(
    backgrounds: Sequence[np.ndarray],
    masks: Mapping[ObjectClass, Sequence[ObjectMask]],
    cfg: SynthConfig,
    index: int,
) -> SynthScene:
    """Scene number `index` of a dataset run.

    Each scene draws from its own generator seeded with (seed, index),
    so serial and parallel generation produce identical images.
    """
    rng = np.random.default_rng([cfg.seed, index])
    return composite_scene(backgrounds, masks, cfg, rng)
