import logging
import numpy as np
from PIL import Image

from analysis.raster import rasterize
from svg.types import SvgScript

logger = logging.getLogger(__name__)


def render_input(s: SvgScript, size: int, channels: int = 1) -> np.ndarray:
    """Model input image: black glyph (0.0) on a white background (1.0), shape (size, size, channels)."""
    mask = rasterize(s, size)
    img = 1. - mask.bits.astype(np.float32)
    return np.repeat(img[..., None], channels, axis=-1)


def load_image(path: str, size: int, channels: int = 1) -> np.ndarray:
    with Image.open(path) as im:
        im = im.convert('L' if channels == 1 else 'RGB')
        if im.size != (size, size):
            logger.info(f'resizing {path} from {im.size} to {size}x{size}')
            im = im.resize((size, size), Image.Resampling.BILINEAR)

        arr = np.asarray(im, dtype=np.float32) / 255.

    if arr.ndim == 2:
        arr = arr[..., None]
    return arr
