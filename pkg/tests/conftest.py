import numpy as np
from PIL import Image


def make_synth_pools(root):
    """Write a tiny on-disk background/object pool for synth runs."""
    rng = np.random.default_rng(77)
    bg_dir = root / "bg"
    bg_dir.mkdir(parents=True)
    for i in range(2):
        img = rng.integers(0, 256, (120, 160, 3), dtype=np.uint8)
        Image.fromarray(img).save(bg_dir / f"bg{i}.png")
    obj_dir = root / "obj"
    for cls in ("BMR", "SP", "HRS", "HCPH"):
        d = obj_dir / cls
        d.mkdir(parents=True)
        frame = np.zeros((60, 60, 3), dtype=np.uint8)
        frame[:, :, 2] = 255
        frame[15:45, 20:40] = (170, 60, 60)
        Image.fromarray(frame).save(d / "take0.png")
    return bg_dir, obj_dir
