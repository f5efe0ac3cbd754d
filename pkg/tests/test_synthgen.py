import colorsys

import numpy as np
import pytest

from resustrack.core import BBox, ObjectClass
from resustrack.synthgen import (
    MaskExtractionError,
    ObjectMask,
    SynthConfig,
    chroma_mask,
    composite_scene,
    extract_mask,
    histogram_match,
    hls_to_rgb,
    hsl_jitter,
    motion_blur,
    motion_kernel,
    rgb_to_hls,
    scene_for_index,
    split_image,
)

BLUE = np.array([0, 0, 255], dtype=np.uint8)
GRAY = np.array([128, 128, 128], dtype=np.uint8)
GREEN = np.array([0, 255, 0], dtype=np.uint8)


def blue_screen(height, width):
    frame = np.zeros((height, width, 3), dtype=np.uint8)
    frame[:] = BLUE
    return frame


class TestChromaKey:
    def test_pure_blue_is_background(self):
        # 255 - (0.11 * 255) = 226.95, not below 80
        frame = blue_screen(4, 4)
        assert not chroma_mask(frame, 80.0).any()

    def test_gray_is_object(self):
        frame = np.tile(GRAY, (4, 4, 1))
        assert chroma_mask(frame, 80.0).all()

    def test_green_is_object(self):
        frame = np.tile(GREEN, (4, 4, 1))
        assert chroma_mask(frame, 80.0).all()

    def test_silhouette_recovered_exactly(self):
        frame = blue_screen(40, 60)
        silhouette = np.zeros((40, 60), dtype=bool)
        silhouette[10:30, 15:45] = True
        frame[silhouette] = GRAY
        mask = chroma_mask(frame, 80.0)
        assert np.array_equal(mask, silhouette)

    def test_extract_mask_tight_crop(self):
        frame = blue_screen(40, 60)
        frame[10:30, 15:45] = GRAY
        om = extract_mask(frame, ObjectClass.BMR, 80.0)
        assert om.mask.shape == (20, 30)
        assert om.mask.all()
        assert np.all(om.patch == GRAY)

    def test_empty_mask_rejected(self):
        with pytest.raises(MaskExtractionError):
            extract_mask(blue_screen(8, 8), ObjectClass.SP, 80.0)

    def test_monotone_in_threshold(self):
        rng = np.random.default_rng(51)
        frame = rng.integers(0, 256, (30, 30, 3), dtype=np.uint8)
        previous = None
        for t_ck in np.linspace(-50, 250, 20):
            mask = chroma_mask(frame, float(t_ck))
            if previous is not None:
                assert np.all(previous <= mask)  # raising never shrinks
            previous = mask


class TestHslJitter:
    def test_identity_factors(self):
        rng = np.random.default_rng(52)
        patch = rng.integers(0, 256, (16, 16, 3), dtype=np.uint8)
        out = hsl_jitter(patch, (1.0, 1.0, 1.0))
        assert np.max(np.abs(out.astype(int) - patch.astype(int))) <= 1

    def test_lightness_scales_white_to_gray(self):
        white = np.full((2, 2, 3), 255, dtype=np.uint8)
        out = hsl_jitter(white, (1.0, 1.0, 0.6))
        assert np.all(out == 153)

    def test_black_fixed_point(self):
        black = np.zeros((3, 3, 3), dtype=np.uint8)
        for factors in [(1, 1, 1), (0.6, 0.6, 0.6), (0.7, 1.0, 0.8)]:
            assert not hsl_jitter(black, factors).any()

    def test_factor_range_enforced(self):
        patch = np.zeros((2, 2, 3), dtype=np.uint8)
        with pytest.raises(ValueError):
            hsl_jitter(patch, (1.2, 1.0, 1.0))
        with pytest.raises(ValueError):
            hsl_jitter(patch, (0.0, 1.0, 1.0))

    def test_conversion_matches_colorsys(self):
        rng = np.random.default_rng(53)
        rgb = rng.uniform(0, 1, (40, 3))
        ours = rgb_to_hls(rgb)
        for pixel, (h, l, s) in zip(rgb, ours):
            want = colorsys.rgb_to_hls(*pixel)
            assert np.allclose((h, l, s), want, atol=1e-12)
        back = hls_to_rgb(ours)
        for pixel, (h, l, s) in zip(back, ours):
            want = colorsys.hls_to_rgb(h, l, s)
            assert np.allclose(pixel, want, atol=1e-12)


class TestMotionBlur:
    def test_length_one_identity(self):
        rng = np.random.default_rng(54)
        image = rng.integers(0, 256, (10, 12, 3), dtype=np.uint8)
        assert np.array_equal(motion_blur(image, 1, 45.0), image)

    def test_constant_image_unchanged(self):
        image = np.full((12, 12, 3), 77, dtype=np.uint8)
        assert np.array_equal(motion_blur(image, 5, 7.0), image)

    def test_horizontal_impulse_spreads_thirds(self):
        kernel = motion_kernel(3, 0.0)
        assert kernel.shape == (3, 3)
        assert np.allclose(kernel[1], [1 / 3, 1 / 3, 1 / 3])
        assert np.allclose(kernel[(0, 2), :], 0)

    def test_kernel_weights_sum_to_one(self):
        for length in range(1, 9):
            for theta in (0.0, 3.0, 7.5, 10.0, 45.0, 90.0):
                assert motion_kernel(length, theta).sum() == pytest.approx(1.0)

    def test_grayscale_input_supported(self):
        image = np.full((8, 8), 10, dtype=np.uint8)
        assert np.array_equal(motion_blur(image, 3, 0.0), image)


class TestHistogramMatch:
    def test_self_match_identity(self):
        rng = np.random.default_rng(55)
        image = rng.integers(0, 256, (20, 20, 3), dtype=np.uint8)
        assert np.array_equal(histogram_match(image, image), image)

    def test_constant_reference_maps_to_constant(self):
        image = np.full((5, 5), 37, dtype=np.uint8)
        reference = np.full((9, 9), 200, dtype=np.uint8)
        assert np.all(histogram_match(image, reference) == 200)

    def test_hand_computed_cdf_mapping(self):
        # source CDF: 0 -> .5, 128 -> .75, 255 -> 1
        # reference CDF: 0 -> .25, then flat until 255 -> 1
        # smallest reference value reaching each source share is 255
        image = np.array([[0, 0], [128, 255]], dtype=np.uint8)
        reference = np.array([[0, 255], [255, 255]], dtype=np.uint8)
        out = histogram_match(image, reference)
        assert np.array_equal(out, np.full((2, 2), 255, dtype=np.uint8))

    def test_mapping_monotone(self):
        rng = np.random.default_rng(56)
        for _ in range(30):
            image = rng.integers(0, 256, (15, 15), dtype=np.uint8)
            reference = rng.integers(0, 256, (10, 30), dtype=np.uint8)
            out = histogram_match(image, reference)
            flat_in = image.ravel()
            flat_out = out.ravel()
            order = np.argsort(flat_in, kind="stable")
            assert np.all(np.diff(flat_out[order].astype(int)) >= -0)

    def test_idempotent_up_to_quantization(self):
        rng = np.random.default_rng(57)
        image = rng.integers(0, 256, (25, 25, 3), dtype=np.uint8)
        reference = rng.integers(0, 256, (25, 25, 3), dtype=np.uint8)
        once = histogram_match(image, reference)
        twice = histogram_match(once, reference)
        assert np.max(np.abs(once.astype(int) - twice.astype(int))) <= 1

    def test_shape_and_channels_preserved(self):
        image = np.zeros((7, 9, 3), dtype=np.uint8)
        reference = np.full((3, 3, 3), 10, dtype=np.uint8)
        assert histogram_match(image, reference).shape == (7, 9, 3)

    def test_channel_count_mismatch_rejected(self):
        with pytest.raises(ValueError):
            histogram_match(np.zeros((4, 4, 3), dtype=np.uint8),
                            np.zeros((4, 4), dtype=np.uint8))


class TestSplitImage:
    def image(self, h=100, w=100):
        return np.arange(h * w * 3, dtype=np.uint8).reshape(h, w, 3)

    def test_tile_geometry(self):
        tiles = split_image(self.image(), [])
        origins = [(t.origin_x, t.origin_y) for t in tiles]
        assert origins == [(0, 0), (50, 0), (0, 50), (50, 50), (25, 25)]
        assert all(t.image.shape == (50, 50, 3) for t in tiles)

    def test_tiles_copy_pixels(self):
        img = self.image()
        tiles = split_image(img, [])
        assert np.array_equal(tiles[4].image, img[25:75, 25:75])

    def test_box_inside_one_quadrant(self):
        box = BBox(5, 5, 10, 10)
        tiles = split_image(self.image(), [(ObjectClass.BMR, box)])
        assert tiles[0].annotations == [(ObjectClass.BMR, BBox(5, 5, 10, 10))]
        assert all(not t.annotations for t in tiles[1:4])

    def test_small_fragment_dropped(self):
        # 30x30 in the left quadrant, 10x30 spilling into the right one
        box = BBox(20, 0, 40, 30)
        tiles = split_image(self.image(), [(ObjectClass.SP, box)])
        assert len(tiles[0].annotations) == 1
        assert tiles[0].annotations[0][1].area == 900
        assert tiles[1].annotations == []  # 300 < 0.4 * 900

    def test_largest_fragment_always_survives(self):
        rng = np.random.default_rng(58)
        tile_w = tile_h = 50
        origins = [(0, 0), (50, 0), (0, 50), (50, 50), (25, 25)]
        for _ in range(100):
            boxes = []
            for _ in range(int(rng.integers(1, 6))):
                x, y = rng.uniform(0, 90, 2)
                w, h = rng.uniform(2, 60, 2)
                boxes.append((ObjectClass.BMR,
                              BBox(float(x), float(y),
                                   float(min(w, 100 - x)), float(min(h, 100 - y)))))
            tiles = split_image(self.image(), boxes)
            for cls, box in boxes:
                survivors = sum(
                    1 for t, tile in enumerate(tiles)
                    for _, frag in tile.annotations
                    if _same_fragment(frag, box, origins[t], tile_w, tile_h))
                assert survivors >= 1

    def test_matches_brute_force_rule(self):
        rng = np.random.default_rng(59)
        for _ in range(60):
            h = int(rng.integers(40, 120))
            w = int(rng.integers(40, 120))
            image = np.zeros((h, w, 3), dtype=np.uint8)
            boxes = []
            for _ in range(int(rng.integers(0, 7))):
                x = float(rng.uniform(0, w - 2))
                y = float(rng.uniform(0, h - 2))
                boxes.append((ObjectClass(int(rng.integers(1, 5))),
                              BBox(x, y, float(rng.uniform(1, w - x)),
                                   float(rng.uniform(1, h - y)))))
            tiles = split_image(image, boxes)

            tile_w, tile_h = w // 2, h // 2
            origins = [(0, 0), (tile_w, 0), (0, tile_h), (tile_w, tile_h),
                       ((w - tile_w) // 2, (h - tile_h) // 2)]
            # brute force: clip every box to every tile, apply the rule
            for obj_idx, (cls, box) in enumerate(boxes):
                frags = {}
                for t, (ox, oy) in enumerate(origins):
                    ix0 = max(box.x, ox)
                    iy0 = max(box.y, oy)
                    ix1 = min(box.x + box.w, ox + tile_w)
                    iy1 = min(box.y + box.h, oy + tile_h)
                    if ix1 > ix0 and iy1 > iy0:
                        frags[t] = (ix1 - ix0) * (iy1 - iy0)
                for t in range(5):
                    in_tile = [
                        frag for cls2, frag in tiles[t].annotations
                        if _same_fragment(frag, boxes[obj_idx][1], origins[t],
                                          tile_w, tile_h)
                    ]
                    if t not in frags:
                        continue
                    others = [a for tt, a in frags.items() if tt != t]
                    expect_kept = not others or frags[t] >= 0.4 * max(others)
                    assert (len(in_tile) > 0) == expect_kept


def _same_fragment(frag, box, origin, tile_w, tile_h):
    ox, oy = origin
    ix0 = max(box.x, ox)
    iy0 = max(box.y, oy)
    ix1 = min(box.x + box.w, ox + tile_w)
    iy1 = min(box.y + box.h, oy + tile_h)
    if ix1 <= ix0 or iy1 <= iy0:
        return False
    return (abs(frag.x - (ix0 - ox)) < 1e-9 and abs(frag.y - (iy0 - oy)) < 1e-9
            and abs(frag.w - (ix1 - ix0)) < 1e-9 and abs(frag.h - (iy1 - iy0)) < 1e-9)


class TestCompositeScene:
    def _pools(self):
        rng = np.random.default_rng(60)
        backgrounds = [
            rng.integers(0, 256, (240, 320, 3), dtype=np.uint8) for _ in range(3)
        ]
        masks = {}
        for cls in ObjectClass:
            frame = blue_screen(60, 60)
            frame[10:50, 15:45] = (200, 50, 50) if cls == ObjectClass.BMR else GRAY
            masks[cls] = [extract_mask(frame, cls, 80.0)]
        return backgrounds, masks

    def test_deterministic_given_seed(self):
        backgrounds, masks = self._pools()
        cfg = SynthConfig(seed=99)
        a = scene_for_index(backgrounds, masks, cfg, 0)
        b = scene_for_index(backgrounds, masks, cfg, 0)
        assert np.array_equal(a.image, b.image)
        assert a.annotations == b.annotations
        c = scene_for_index(backgrounds, masks, cfg, 1)
        assert not np.array_equal(a.image, c.image)

    def test_annotation_count_and_bounds(self):
        backgrounds, masks = self._pools()
        cfg = SynthConfig(seed=7)
        for index in range(20):
            scene = scene_for_index(backgrounds, masks, cfg, index)
            assert 4 <= len(scene.annotations) <= 6
            classes = [cls for cls, _ in scene.annotations]
            for cls in (ObjectClass.BMR, ObjectClass.SP, ObjectClass.HRS):
                assert classes.count(cls) == 1
            assert 1 <= classes.count(ObjectClass.HCPH) <= 3
            h, w = scene.image.shape[:2]
            for _, box in scene.annotations:
                assert box.x >= 0 and box.y >= 0
                assert box.x + box.w <= w and box.y + box.h <= h

    def test_empty_background_pool_rejected(self):
        _, masks = self._pools()
        with pytest.raises(ValueError):
            composite_scene([], masks, SynthConfig(), np.random.default_rng(0))


class TestObjectMask:
    def test_dimension_mismatch_rejected(self):
        with pytest.raises(ValueError):
            ObjectMask(np.zeros((4, 4, 3), dtype=np.uint8),
                       np.ones((5, 4), dtype=bool), ObjectClass.BMR)

    def test_empty_mask_rejected(self):
        with pytest.raises(ValueError):
            ObjectMask(np.zeros((4, 4, 3), dtype=np.uint8),
                       np.zeros((4, 4), dtype=bool), ObjectClass.BMR)
