import numpy as np
import pytest
from PIL import Image

from culvert_select.synth import preset_scene, render_scene


def smooth_texture(seed, shape=(240, 320), cells=(30, 40)):
    """Band-limited random texture: bicubic upsampling of a coarse noise grid."""
    rng = np.random.default_rng(seed)
    coarse = (rng.random(cells) * 255).astype(np.uint8)
    return np.array(Image.fromarray(coarse).resize(shape[::-1], Image.BICUBIC))


@pytest.fixture
def texture():
    return smooth_texture(1)


@pytest.fixture(scope="session")
def spiral_scene():
    return render_scene(preset_scene("spiral", n=9, seed=2, step=0.03, angle_deg=7.0))


ACCEPTANCE = {}


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for k in sorted(ACCEPTANCE):
        ok, detail = ACCEPTANCE[k]
        terminalreporter.write_line(f"criterion {k}: {'PASS' if ok else 'FAIL'}  {detail}")
