"""sRGB -> CIELAB conversion and the Delta E (CIE 1976) color difference.

Conversion chain: 8-bit sRGB -> linear RGB (IEC 61966-2-1 transfer curve)
-> XYZ under D65 -> L*a*b*. The white point is taken as the image of
RGB (1, 1, 1) under the sRGB matrix so that white maps to zero chroma exactly.
"""

import re
from dataclasses import dataclass
from pathlib import Path
from typing import NamedTuple

import numpy as np
from PIL import Image

from .basis import Trajectory
from .errors import EmptyMask, NonMonotonicTime, ParseError

SRGB_TO_XYZ = np.array(
    [
        [0.4124, 0.3576, 0.1805],
        [0.2126, 0.7152, 0.0722],
        [0.0193, 0.1192, 0.9505],
    ]
)
D65_WHITE = SRGB_TO_XYZ.sum(axis=1)

_DELTA = 6.0 / 29.0
MAX_FRAME_DIM = 4096


class RgbColor(NamedTuple):
    r: int
    g: int
    b: int


class LabColor(NamedTuple):
    l_star: float
    a_star: float
    b_star: float


@dataclass(frozen=True, eq=False)
class MaskedFrame:
    pixels: np.ndarray  # (height, width, 3) uint8
    mask: np.ndarray  # (height, width) bool
    timestamp: float

    def __post_init__(self):
        pixels = np.asarray(self.pixels)
        mask = np.asarray(self.mask, dtype=bool)
        if pixels.ndim != 3 or pixels.shape[2] != 3:
            raise ValueError("pixels must have shape (height, width, 3)")
        if mask.shape != pixels.shape[:2]:
            raise ValueError(
                f"mask shape {mask.shape} does not match pixel grid {pixels.shape[:2]}"
            )
        object.__setattr__(self, "pixels", pixels)
        object.__setattr__(self, "mask", mask)

    @property
    def height(self):
        return self.pixels.shape[0]

    @property
    def width(self):
        return self.pixels.shape[1]


def srgb_to_lab_array(rgb):
    """Vectorized conversion of ``(..., 3)`` 8-bit sRGB values to L*a*b*."""
    c = np.asarray(rgb, dtype=np.float64) / 255.0
    linear = np.where(c <= 0.04045, c / 12.92, ((c + 0.055) / 1.055) ** 2.4)
    xyz = linear @ SRGB_TO_XYZ.T / D65_WHITE
    f = np.where(xyz > _DELTA**3, np.cbrt(xyz), xyz / (3 * _DELTA**2) + 4.0 / 29.0)
    lab = np.empty_like(f)
    lab[..., 0] = 116.0 * f[..., 1] - 16.0
    lab[..., 1] = 500.0 * (f[..., 0] - f[..., 1])
    lab[..., 2] = 200.0 * (f[..., 1] - f[..., 2])
    return lab


def srgb_to_lab(c):
    r, g, b = c
    for name, v in zip("rgb", (r, g, b)):
        if not 0 <= v <= 255:
            raise ValueError(f"channel {name}={v} outside [0, 255]")
    return LabColor(*(float(v) for v in srgb_to_lab_array([r, g, b])))


def delta_e(current, initial):
    """Euclidean distance between two L*a*b* colors."""
    dl = current[0] - initial[0]
    da = current[1] - initial[1]
    db = current[2] - initial[2]
    return float(np.sqrt(dl * dl + da * da + db * db))


def frame_mean_lab(frame):
    """Average of the per-pixel L*a*b* values inside the mask.

    Pixels are converted first and averaged in Lab, not in RGB.
    """
    selected = frame.pixels[frame.mask]
    if selected.shape[0] == 0:
        raise EmptyMask(f"frame at t={frame.timestamp} has no masked pixels")
    return LabColor(*(float(v) for v in srgb_to_lab_array(selected).mean(axis=0)))


def trajectory_delta_e(frames):
    frames = list(frames)
    if len(frames) < 2:
        raise ValueError("need at least two frames")
    stamps = np.array([f.timestamp for f in frames], dtype=np.float64)
    if np.any(np.diff(stamps) <= 0):
        i = int(np.argmax(np.diff(stamps) <= 0)) + 1
        raise NonMonotonicTime(
            f"frame {i} timestamp {stamps[i]} does not follow {stamps[i - 1]}"
        )
    if stamps[0] < 0:
        raise NonMonotonicTime("timestamps must be non-negative")
    labs = [frame_mean_lab(f) for f in frames]
    values = np.array([delta_e(lab, labs[0]) for lab in labs])
    values[0] = 0.0
    return Trajectory(stamps / stamps[-1], values)


_DIGITS = re.compile(r"(\d+)$")


def _read_netpbm(path, mode):
    try:
        with Image.open(path) as im:
            if im.format not in ("PPM",):
                raise ParseError(f"expected a netpbm file, got {im.format}", path=path)
            if im.width > MAX_FRAME_DIM or im.height > MAX_FRAME_DIM:
                raise ParseError(
                    f"image {im.width}x{im.height} exceeds {MAX_FRAME_DIM}x{MAX_FRAME_DIM}",
                    path=path,
                )
            return np.asarray(im.convert(mode))
    except OSError as exc:
        raise ParseError(str(exc), path=path) from exc


def load_frames(image_dir, mask_dir, frame_interval=None):
    """Read matching PPM frames and PGM masks from two directories.

    Frames are ordered by filename. Timestamps come from ``frame_interval``
    (seconds between frames) when given, otherwise from the trailing integer
    in each file stem, read as seconds.
    """
    image_dir, mask_dir = Path(image_dir), Path(mask_dir)
    images = sorted(image_dir.glob("*.ppm"))
    if not images:
        raise ParseError("no .ppm frames found", path=image_dir)
    frames = []
    for i, img_path in enumerate(images):
        mask_path = mask_dir / (img_path.stem + ".pgm")
        if not mask_path.exists():
            raise ParseError("missing mask for frame", path=mask_path)
        if frame_interval is not None:
            stamp = i * float(frame_interval)
        else:
            m = _DIGITS.search(img_path.stem)
            if m is None:
                raise ParseError("cannot read timestamp from filename", path=img_path)
            stamp = float(m.group(1))
        pixels = _read_netpbm(img_path, "RGB")
        mask = _read_netpbm(mask_path, "L") != 0
        if mask.shape != pixels.shape[:2]:
            raise ParseError(
                f"mask {mask.shape} does not match frame {pixels.shape[:2]}", path=mask_path
            )
        frames.append(MaskedFrame(pixels, mask, stamp))
    return frames


def write_ppm(path, pixels):
    Image.fromarray(np.asarray(pixels, dtype=np.uint8)).save(path, format="PPM")


def write_pgm(path, values):
    Image.fromarray(np.asarray(values, dtype=np.uint8)).save(path, format="PPM")
