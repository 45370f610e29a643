import numpy as np
import pytest
from PIL import Image

FAST_SIM_CONFIG = """\
[phantom]
axial_extent = 20
lateral_extent = 16
elevational_extent = 8
standoff = 10
scatterer_density = 1.0

[lesions]
radius_min = 2
radius_max = 3
margin = 1

[grid]
height = 64
width = 48
"""


def write_pair(dirpath, pair_id, image, mask):
    Image.fromarray(image, mode="L").save(dirpath / f"{pair_id}.png")
    Image.fromarray((mask != 0).astype(np.uint8) * 255, mode="L").save(
        dirpath / f"{pair_id}_mask.png"
    )


def make_corpus(dirpath, n, size=(24, 24), seed=0, rgb=False):
    """Write n valid image/mask PNG pairs; returns the pair ids."""
    dirpath.mkdir(parents=True, exist_ok=True)
    rng = np.random.default_rng(seed)
    ids = []
    for i in range(n):
        pair_id = f"case_{i:04d}"
        img = rng.integers(0, 256, size=size, dtype=np.uint8)
        if rgb:
            img = np.stack([img, rng.integers(0, 256, size=size, dtype=np.uint8), img], axis=-1)
            Image.fromarray(img, mode="RGB").save(dirpath / f"{pair_id}.png")
        else:
            Image.fromarray(img, mode="L").save(dirpath / f"{pair_id}.png")
        mask = np.zeros(size, dtype=np.uint8)
        if rng.random() > 0.3:
            r0, c0 = rng.integers(0, size[0] - 8), rng.integers(0, size[1] - 8)
            mask[r0 : r0 + 8, c0 : c0 + 8] = 1
        Image.fromarray(mask * 255, mode="L").save(dirpath / f"{pair_id}_mask.png")
        ids.append(pair_id)
    return ids


@pytest.fixture
def fast_config_file(tmp_path):
    path = tmp_path / "fast.ini"
    path.write_text(FAST_SIM_CONFIG)
    return path
