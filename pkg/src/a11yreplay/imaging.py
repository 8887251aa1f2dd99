"""Pixel buffers, classic edge/line kernels and the synthetic screen renderer.

Everything here is a pure function over numpy-backed buffers. The underline
detector chains ``extract_patch -> to_grayscale -> binarize(otsu) ->
canny_edges -> hough_horizontal_lines``.
"""

from __future__ import annotations

from dataclasses import dataclass
from fractions import Fraction
from pathlib import Path
from typing import TYPE_CHECKING

import numpy as np
from PIL import Image
from scipy import ndimage

from .ui_model import BoundingBox, ElementKind

if TYPE_CHECKING:
    from .device_sim import AccessibilityFeatureState, ScreenDef

CANNY_LOW = 40.0
CANNY_HIGH = 100.0
HOUGH_GAP_PX = 1


class PatchError(ValueError):
    pass


@dataclass(frozen=True, eq=False)
class PixelBuffer:
    """Row-major uint8 samples, shape (h, w) for gray or (h, w, 3) for RGB."""

    data: np.ndarray

    def __post_init__(self) -> None:
        arr = np.ascontiguousarray(self.data, dtype=np.uint8)
        if arr.ndim not in (2, 3) or (arr.ndim == 3 and arr.shape[2] != 3):
            raise ValueError(f"unsupported buffer shape {arr.shape}")
        if arr.shape[0] < 1 or arr.shape[1] < 1:
            raise ValueError("empty buffer")
        object.__setattr__(self, "data", arr)

    @property
    def width(self) -> int:
        return self.data.shape[1]

    @property
    def height(self) -> int:
        return self.data.shape[0]

    @property
    def channels(self) -> int:
        return 1 if self.data.ndim == 2 else 3

    def tobytes(self) -> bytes:
        return self.data.tobytes()

    def copy(self) -> "PixelBuffer":
        return PixelBuffer(self.data.copy())

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, PixelBuffer):
            return NotImplemented
        return self.data.shape == other.data.shape and bool(np.array_equal(self.data, other.data))

    @classmethod
    def blank(cls, width: int, height: int, value: int | tuple[int, int, int] = 255) -> "PixelBuffer":
        if isinstance(value, tuple):
            arr = np.empty((height, width, 3), dtype=np.uint8)
            arr[:] = value
        else:
            arr = np.full((height, width), value, dtype=np.uint8)
        return cls(arr)


@dataclass(frozen=True, eq=False)
class EdgeMap:
    bits: np.ndarray

    @property
    def width(self) -> int:
        return self.bits.shape[1]

    @property
    def height(self) -> int:
        return self.bits.shape[0]


def save_png(buf: PixelBuffer, path: str | Path) -> None:
    mode = "L" if buf.channels == 1 else "RGB"
    Image.fromarray(buf.data, mode=mode).save(path, format="PNG")


def load_png(path: str | Path) -> PixelBuffer:
    with Image.open(path) as img:
        if img.mode not in ("L", "RGB"):
            img = img.convert("RGB")
        return PixelBuffer(np.array(img))


def to_grayscale(buf: PixelBuffer) -> PixelBuffer:
    if buf.channels == 1:
        return buf
    rgb = buf.data.astype(np.int64)
    # integer form of round(0.299R + 0.587G + 0.114B), halves rounded up
    luma = (299 * rgb[..., 0] + 587 * rgb[..., 1] + 114 * rgb[..., 2] + 500) // 1000
    return PixelBuffer(luma.astype(np.uint8))


def otsu_threshold(gray: PixelBuffer) -> int:
    """Threshold maximizing between-class variance; smallest on ties.

    Class 0 holds values <= t. A constant image returns its value.
    Comparisons are exact (integer numerators over integer denominators).
    """
    if gray.channels != 1:
        raise ValueError("otsu_threshold expects a single-channel buffer")
    hist = np.bincount(gray.data.ravel(), minlength=256).tolist()
    nonzero = [v for v in range(256) if hist[v]]
    if len(nonzero) == 1:
        return nonzero[0]
    total_n = sum(hist)
    total_s = sum(v * c for v, c in enumerate(hist))
    best_t, best_num, best_den = 0, -1, 1
    n0 = s0 = 0
    for t in range(256):
        n0 += hist[t]
        s0 += t * hist[t]
        n1 = total_n - n0
        if n0 == 0 or n1 == 0:
            num, den = 0, 1
        else:
            # sigma_b^2 * N^2 = (n0*S - N*s0)^2 / (n0*n1)
            diff = n0 * total_s - total_n * s0
            num, den = diff * diff, n0 * n1
        if num * best_den > best_num * den:
            best_t, best_num, best_den = t, num, den
    return best_t


def binarize(gray: PixelBuffer, threshold: int) -> PixelBuffer:
    """Foreground (value > threshold) becomes 255, the rest 0."""
    return PixelBuffer(np.where(gray.data > threshold, 255, 0).astype(np.uint8))


# classic integer approximation of a 5x5 Gaussian with sigma 1.4 (sum 159)
_GAUSS = np.array(
    [
        [2, 4, 5, 4, 2],
        [4, 9, 12, 9, 4],
        [5, 12, 15, 12, 5],
        [4, 9, 12, 9, 4],
        [2, 4, 5, 4, 2],
    ],
    dtype=np.float64,
)
_GAUSS_SUM = 159
_SOBEL_X = np.array([[-1, 0, 1], [-2, 0, 2], [-1, 0, 1]], dtype=np.float64)
_SOBEL_Y = _SOBEL_X.T


def _correlate(img: np.ndarray, kernel: np.ndarray) -> np.ndarray:
    # integer-valued inputs and kernels stay exact in float64 at these magnitudes
    return ndimage.correlate(img, kernel, mode="nearest")


def canny_edges(gray: PixelBuffer, low: float = CANNY_LOW, high: float = CANNY_HIGH) -> EdgeMap:
    """Gaussian 5x5 (sigma 1.4), Sobel, 4-direction non-maximum suppression,
    double threshold and 8-connected hysteresis.

    Gradients are kept as exact integers scaled by the kernel sum, so the
    result does not depend on a constant brightness offset.
    """
    if gray.channels != 1:
        raise ValueError("canny_edges expects a single-channel buffer")
    if not 0 <= low < high:
        raise ValueError("need 0 <= low < high")
    blurred = _correlate(gray.data.astype(np.float64), _GAUSS)
    gx = _correlate(blurred, _SOBEL_X).astype(np.int64)
    gy = _correlate(blurred, _SOBEL_Y).astype(np.int64)
    mag2 = gx * gx + gy * gy

    angle = np.rad2deg(np.arctan2(gy, gx)) % 180.0
    h, w = mag2.shape
    padded = np.pad(mag2, 1, mode="constant")
    center = padded[1:-1, 1:-1]

    def shifted(dy: int, dx: int) -> np.ndarray:
        return padded[1 + dy : 1 + dy + h, 1 + dx : 1 + dx + w]

    # neighbours along the gradient direction
    horiz = (angle < 22.5) | (angle >= 157.5)
    diag45 = (angle >= 22.5) & (angle < 67.5)
    vert = (angle >= 67.5) & (angle < 112.5)
    diag135 = (angle >= 112.5) & (angle < 157.5)
    n1 = np.select(
        [horiz, diag45, vert, diag135],
        [shifted(0, 1), shifted(1, 1), shifted(1, 0), shifted(1, -1)],
    )
    n2 = np.select(
        [horiz, diag45, vert, diag135],
        [shifted(0, -1), shifted(-1, -1), shifted(-1, 0), shifted(-1, 1)],
    )
    # >= on one side, > on the other keeps exactly one pixel of a symmetric ridge
    ridge = (center > 0) & (center >= n1) & (center > n2)

    scale = float(_GAUSS_SUM)
    strong = ridge & (mag2 >= (high * scale) ** 2)
    weak = ridge & (mag2 >= (low * scale) ** 2)
    labels, count = ndimage.label(weak, structure=np.ones((3, 3), dtype=bool))
    if count == 0:
        return EdgeMap(np.zeros((h, w), dtype=bool))
    keep = np.zeros(count + 1, dtype=bool)
    keep[np.unique(labels[strong])] = True
    keep[0] = False
    return EdgeMap(keep[labels])


def _longest_run(row: np.ndarray, gap: int) -> int:
    """Span of the longest run of set pixels allowing gaps of <= ``gap``."""
    idx = np.flatnonzero(row)
    if idx.size == 0:
        return 0
    best = 1
    start = idx[0]
    for prev, cur in zip(idx[:-1], idx[1:]):
        if cur - prev - 1 > gap:
            best = max(best, prev - start + 1)
            start = cur
    return max(best, int(idx[-1] - start + 1))


def hough_horizontal_lines(
    edges: EdgeMap, min_width_frac: float, gap_px: int = HOUGH_GAP_PX
) -> list[tuple[int, int]]:
    """Horizontal (theta = 0) line votes: rows whose longest gap-tolerant run
    covers at least ``min_width_frac`` of the width."""
    if not 0 < min_width_frac <= 1:
        raise ValueError("min_width_frac must be in (0, 1]")
    frac = Fraction(str(min_width_frac))
    out = []
    for r in range(edges.height):
        span = _longest_run(edges.bits[r], gap_px)
        if span and span * frac.denominator >= frac.numerator * edges.width:
            out.append((r, span))
    return out


def extract_patch(buf: PixelBuffer, box: BoundingBox) -> PixelBuffer:
    x0, y0 = min(box.x0, buf.width), min(box.y0, buf.height)
    x1, y1 = min(box.x1, buf.width), min(box.y1, buf.height)
    if x1 <= x0 or y1 <= y0:
        raise PatchError(f"zero-area patch for {box}")
    return PixelBuffer(buf.data[y0:y1, x0:x1].copy())


def has_underline(
    buf: PixelBuffer,
    box: BoundingBox,
    min_width_frac: float,
    low: float = CANNY_LOW,
    high: float = CANNY_HIGH,
) -> bool:
    gray = to_grayscale(extract_patch(buf, box))
    binary = binarize(gray, otsu_threshold(gray))
    return bool(hough_horizontal_lines(canny_edges(binary, low, high), min_width_frac))


# ---------------------------------------------------------------- renderer

WHITE = (255, 255, 255)
INK = (20, 20, 20)
SHAPE_FILL = (222, 226, 232)
ICON_FILL = (90, 110, 140)
IMAGE_FILL = (180, 180, 180)
FIELD_BORDER = (150, 150, 150)
TOGGLE_FILL = (52, 199, 89)

TEXT_PAD = 1
UNDERLINE_GAP = 2
UNDERLINE_PX = 2
# clear space under the underline keeps its lower edge crisp after blurring
BOTTOM_PAD = 5
SEGMENT_CHARS = 3
SEGMENT_GAP_MIN = 10


def text_metrics(box: BoundingBox) -> tuple[int, int]:
    """(font height, character advance) for text drawn into ``box``.

    Room is left under the glyph blobs for a gap and a 2px underline.
    """
    font_h = max(2, box.height - TEXT_PAD - UNDERLINE_GAP - UNDERLINE_PX - BOTTOM_PAD)
    return font_h, max(2, (font_h * 11) // 20)


def _fill(arr: np.ndarray, x0: int, y0: int, x1: int, y1: int, color) -> None:
    h, w = arr.shape[:2]
    x0, x1 = max(0, x0), min(w, x1)
    y0, y1 = max(0, y0), min(h, y1)
    if x1 > x0 and y1 > y0:
        arr[y0:y1, x0:x1] = color


def _rounded_rect(arr: np.ndarray, box: BoundingBox, color, radius: int) -> None:
    r = max(0, min(radius, box.width // 2, box.height // 2))
    _fill(arr, box.x0 + r, box.y0, box.x1 - r, box.y1, color)
    _fill(arr, box.x0, box.y0 + r, box.x1, box.y1 - r, color)
    if r == 0:
        return
    yy, xx = np.mgrid[0:r, 0:r]
    quarter = (xx - r + 0.5) ** 2 + (yy - r + 0.5) ** 2 <= r * r
    corners = [
        (box.x0, box.y0, quarter),
        (box.x1 - r, box.y0, quarter[:, ::-1]),
        (box.x0, box.y1 - r, quarter[::-1, :]),
        (box.x1 - r, box.y1 - r, quarter[::-1, ::-1]),
    ]
    for cx, cy, mask in corners:
        view = arr[cy : cy + r, cx : cx + r]
        view[mask[: view.shape[0], : view.shape[1]]] = color


def _segments(text: str, box: BoundingBox, bold: bool) -> list[tuple[int, int]]:
    """Horizontal extents of the word-blob dashes for ``text`` inside ``box``.

    Each word is split into chunks of at most three characters and no chunk
    may exceed half the box width, so no single stroke can pass for an
    underline.
    """
    font_h, adv = text_metrics(box)
    gap = max(SEGMENT_GAP_MIN, font_h // 2)
    max_seg = max(1, box.width // 2 - 2 * int(bold))
    x = box.x0 + TEXT_PAD
    limit = box.x1 - TEXT_PAD
    out = []
    for word in text.split():
        chunks = [word[i : i + SEGMENT_CHARS] for i in range(0, len(word), SEGMENT_CHARS)]
        for chunk in chunks:
            seg = min(len(chunk) * adv, max_seg)
            if x + seg > limit:
                return out
            out.append((x, x + seg))
            x += seg + gap
    return out


def draw_text(arr: np.ndarray, text: str, box: BoundingBox, *, underline: bool, bold: bool) -> None:
    font_h, _ = text_metrics(box)
    top = box.y0 + TEXT_PAD
    thick = int(bold)
    for sx0, sx1 in _segments(text, box, bold):
        _fill(arr, sx0 - thick, top - thick, sx1 + thick, top + font_h + thick, INK)
    if underline:
        uy = top + font_h + UNDERLINE_GAP
        _fill(arr, box.x0, uy, box.x1, uy + UNDERLINE_PX, INK)


def render_screen(
    screen: "ScreenDef",
    feature: "AccessibilityFeatureState",
    width: int,
    height: int,
    page: int = 0,
    field_values: dict[str, str] | None = None,
) -> PixelBuffer:
    """Rasterize the visible elements of ``screen`` for the given feature state.

    Deterministic: the same inputs always give byte-identical buffers.
    """
    arr = np.empty((height, width, 3), dtype=np.uint8)
    arr[:] = WHITE
    visible = [el for el in screen.elements if el.visible_on(page)]
    shaped = (ElementKind.BUTTON, ElementKind.TAB, ElementKind.CONTAINER)
    # backgrounds first so text lands on top
    for el in visible:
        box = el.box_for(feature)
        if el.kind in shaped and feature.button_shapes_on:
            _rounded_rect(arr, box, SHAPE_FILL, radius=min(24, box.height // 4))
        elif el.kind is ElementKind.IMAGE:
            _fill(arr, box.x0, box.y0, box.x1, box.y1, IMAGE_FILL)
        elif el.kind is ElementKind.TOGGLE:
            _rounded_rect(arr, box, TOGGLE_FILL, radius=box.height // 2)
        elif el.kind is ElementKind.TEXT_FIELD:
            _fill(arr, box.x0, box.y0, box.x1, box.y1, FIELD_BORDER)
            _fill(arr, box.x0 + 2, box.y0 + 2, box.x1 - 2, box.y1 - 2, WHITE)
    for el in visible:
        box = el.box_for(feature)
        if el.kind is ElementKind.ICON:
            _rounded_rect(arr, box, ICON_FILL, radius=box.width // 5)
        elif el.kind is ElementKind.TEXT and el.text:
            draw_text(arr, el.text, box, underline=el.underline, bold=feature.bold_text_on)
        elif el.kind is ElementKind.TEXT_FIELD:
            value = (field_values or {}).get(el.ref) or el.text
            if value:
                inner = BoundingBox(box.x0 + 8, box.y0 + 4, max(box.x0 + 8, box.x1 - 8), max(box.y0 + 4, box.y1 - 4))
                draw_text(arr, value, inner, underline=False, bold=feature.bold_text_on)
    return PixelBuffer(arr)
