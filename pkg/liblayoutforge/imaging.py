"""
 layoutforge: raster preprocessing

 Binarization, speck removal, connected components, skew and perspective
 correction. A raster image is a 2D uint8 numpy array of luminance values,
 a binary image wraps a boolean array where True marks ink.

 Copyright (C) 2026  layoutforge developers

 This work is licensed under the terms of the GNU GPL, version 3.  See
 the LICENSE file in the top-level directory.
"""
import io
import math
import logging
from dataclasses import dataclass, field
from typing import Tuple

import cv2
import fitz
import numpy as np
from PIL import Image, UnidentifiedImageError

from liblayoutforge import lib
from liblayoutforge.docmodel import BoundingBox
from liblayoutforge.errors import (
    CorruptSource,
    DegenerateQuad,
    EmptyDocument,
    InsufficientInk,
    RasterizeFailure,
    UnsupportedFormat,
)

log = logging.getLogger(__name__)

FORMATS = ("png", "pdf")

# points used for the projection profile search
SKEW_MAX_POINTS = 60000


@dataclass(frozen=True)
class BinaryImage:
    """Ink bitmap; degenerate is set when binarization found no contrast"""

    bits: np.ndarray
    degenerate: bool = field(default=False, compare=False)

    @property
    def w(self):
        """Width in px"""
        return self.bits.shape[1]

    @property
    def h(self):
        """Height in px"""
        return self.bits.shape[0]

    @property
    def ink(self):
        """Number of ink pixels"""
        return int(np.count_nonzero(self.bits))

    def crop(self, bbox):
        """Bits inside a bounding box"""
        return self.bits[bbox.y : bbox.y1, bbox.x : bbox.x1]

    def __eq__(self, other):
        if not isinstance(other, BinaryImage):
            return NotImplemented
        return np.array_equal(self.bits, other.bits)

    __hash__ = None


@dataclass(frozen=True)
class ConnectedComponent:
    """8-connected ink component. label indexes the labeling it came from."""

    bbox: BoundingBox
    pixel_count: int
    centroid: Tuple[float, float]
    label: int = field(default=0, compare=False)

    @property
    def density(self):
        """Fill ratio of the bounding box"""
        return self.pixel_count / float(self.bbox.area)


def _bits(image):
    if isinstance(image, BinaryImage):
        return image.bits
    return np.asarray(image, dtype=bool)


def as_raster(pixels):
    """Validate and return a raster image"""
    pixels = np.asarray(pixels)
    if pixels.ndim != 2 or pixels.shape[0] < 1 or pixels.shape[1] < 1:
        raise ValueError(f"Raster image must be a non-empty 2D array, got {pixels.shape}")
    return np.ascontiguousarray(pixels, dtype=np.uint8)


def modal_luminance(img):
    """Most frequent luminance value, used as background fill"""
    hist = np.bincount(np.asarray(img, dtype=np.uint8).ravel(), minlength=256)
    return int(np.argmax(hist))


def otsu_threshold(img):
    """Global Otsu threshold. Ink is every pixel below the returned value.
    Split levels between the Otsu level and the next populated level give
    the same classes; the midpoint of that run is chosen. Returns
    (threshold, degenerate)."""
    img = as_raster(img)
    hist = np.bincount(img.ravel(), minlength=256)
    levels = np.flatnonzero(hist)
    if len(levels) < 2:
        return int(np.argmax(hist)), True
    value, _ = cv2.threshold(img, 0, 255, cv2.THRESH_BINARY + cv2.THRESH_OTSU)
    # cv2 keeps pixels <= value in the dark class
    first = int(value) + 1
    last = int(levels[levels >= first][0])
    return (first + last + 1) // 2, False


def binarize(img):
    """Global Otsu binarization; returns (BinaryImage, threshold)"""
    img = as_raster(img)
    threshold, degenerate = otsu_threshold(img)
    if degenerate:
        log.warning("Image without contrast, binarization degenerate at [%s]", threshold)
        return BinaryImage(np.zeros(img.shape, dtype=bool), True), threshold
    log.debug("Otsu threshold: [%s]", threshold)
    return BinaryImage(img < threshold), threshold


def label(image):
    """8-connectivity labeling; returns (count, labels, stats, centroids) the
    way cv2 reports them, background is label 0"""
    bits = _bits(image).astype(np.uint8)
    return cv2.connectedComponentsWithStats(bits, connectivity=8, ltype=cv2.CV_32S)


def denoise(image, min_component_px):
    """Remove every component with fewer than min_component_px pixels"""
    if min_component_px < 0:
        raise ValueError("min_component_px must not be negative")
    bits = _bits(image)
    if min_component_px <= 1 or not bits.any():
        return BinaryImage(bits.copy(), getattr(image, "degenerate", False))
    count, labels, stats, _ = label(bits)
    keep = stats[:, cv2.CC_STAT_AREA] >= min_component_px
    keep[0] = False
    log.debug(
        "Denoise removed [%d] of [%d] components below [%d] px",
        int(count - 1 - keep[1:].sum()),
        count - 1,
        min_component_px,
    )
    return BinaryImage(keep[labels], getattr(image, "degenerate", False))


def connected_components(image):
    """Connected components sorted by (bbox.y, bbox.x)"""
    bits = _bits(image)
    if not bits.any():
        return []
    count, _, stats, centroids = label(bits)
    comps = []
    for idx in range(1, count):
        x, y, w, h, area = (int(v) for v in stats[idx])
        comps.append(
            ConnectedComponent(
                BoundingBox(x, y, w, h),
                area,
                (float(centroids[idx][0]), float(centroids[idx][1])),
                idx,
            )
        )
    comps.sort(key=lambda c: (c.bbox.y, c.bbox.x, c.label))
    return comps


def _profile_scores(ys, xs, angles):
    """Sum of squared row counts of the rotated ink coordinates for every
    candidate angle. With a fixed pixel total this orders candidates the
    same way as the profile variance."""
    diag = int(math.ceil(math.hypot(xs.max() - xs.min() + 1, ys.max() - ys.min() + 1)))
    cx, cy = xs.mean(), ys.mean()
    xs = xs - cx
    ys = ys - cy
    scores = np.empty(len(angles))
    for idx, angle in enumerate(angles):
        rad = math.radians(angle)
        # row coordinate after applying the cv2 rotation matrix of angle
        rows = np.rint(-math.sin(rad) * xs + math.cos(rad) * ys).astype(np.int64) + diag
        hist = np.bincount(rows, minlength=2 * diag + 1).astype(np.float64)
        scores[idx] = float(np.dot(hist, hist))
    return scores


def estimate_skew(image, config=None):
    """Angle in degrees that deskew() must rotate by to level the text
    lines, searched over [-range, +range] by projection profile variance"""
    skew_range = config.skew_range_deg if config else 15.0
    step = config.skew_step_deg if config else 0.1
    min_components = config.skew_min_components if config else 50
    bits = _bits(image)
    count = label(bits)[0] - 1 if bits.any() else 0
    if count < min_components:
        raise InsufficientInk(
            f"Need at least {min_components} components to estimate skew, found {count}"
        )
    ys, xs = np.nonzero(bits)
    if len(xs) > SKEW_MAX_POINTS:
        stride = int(math.ceil(len(xs) / SKEW_MAX_POINTS))
        ys, xs = ys[::stride], xs[::stride]
    ys = ys.astype(np.float64)
    xs = xs.astype(np.float64)
    steps = int(round(skew_range / step))
    angles = np.arange(-steps, steps + 1) * step
    scores = _profile_scores(ys, xs, angles)
    best = scores.max()
    # among equal scores prefer the smallest correction
    candidates = np.nonzero(scores >= best)[0]
    angle = float(angles[min(candidates, key=lambda i: abs(angles[i]))])
    angle = round(angle, 4) + 0.0
    log.debug("Estimated skew correction: [%s] degrees", angle)
    return angle


def rotation_matrix(w, h, angle, expand=True):
    """2x3 cv2 rotation matrix about the image center and the output size.
    With expand the canvas grows to contain the rotated content."""
    center = ((w - 1) / 2.0, (h - 1) / 2.0)
    matrix = cv2.getRotationMatrix2D(center, angle, 1.0)
    if not expand:
        return matrix, (w, h)
    cos = abs(matrix[0, 0])
    sin = abs(matrix[0, 1])
    new_w = int(math.ceil(h * sin + w * cos - 1e-9))
    new_h = int(math.ceil(h * cos + w * sin - 1e-9))
    matrix[0, 2] += (new_w - 1) / 2.0 - center[0]
    matrix[1, 2] += (new_h - 1) / 2.0 - center[1]
    return matrix, (new_w, new_h)


def deskew(img, angle):
    """Rotate about the image center with bilinear sampling; the canvas
    expands to hold the rotated content and is filled with the modal
    luminance"""
    img = as_raster(img)
    if abs(angle) > 45:
        raise ValueError(f"Deskew angle out of range: [{angle}]")
    if angle == 0:
        return img.copy()
    h, w = img.shape
    matrix, size = rotation_matrix(w, h, angle, expand=True)
    fill = modal_luminance(img)
    log.debug("Rotating page by [%s] degrees, canvas [%sx%s]", angle, *size)
    return cv2.warpAffine(
        img,
        matrix,
        size,
        flags=cv2.INTER_LINEAR,
        borderMode=cv2.BORDER_CONSTANT,
        borderValue=fill,
    )


def _interior_angles(quad):
    angles = []
    for idx in range(4):
        prev_pt = quad[idx - 1]
        point = quad[idx]
        next_pt = quad[(idx + 1) % 4]
        v1 = prev_pt - point
        v2 = next_pt - point
        norm = np.linalg.norm(v1) * np.linalg.norm(v2)
        if norm == 0:
            return [0.0] * 4
        cosine = float(np.clip(np.dot(v1, v2) / norm, -1.0, 1.0))
        angles.append(math.degrees(math.acos(cosine)))
    return angles


def page_quad(bits, config=None):
    """Page quadrilateral (TL, TR, BR, BL) from the extremes of the convex
    hull of the ink"""
    min_angle = config.perspective_min_angle_deg if config else 20.0
    min_area = config.perspective_min_area if config else 0.10
    ys, xs = np.nonzero(bits)
    if len(xs) < 3:
        raise DegenerateQuad("Not enough ink to establish the page quadrilateral")
    points = np.stack([xs, ys], axis=1).astype(np.int32)
    hull = cv2.convexHull(points).reshape(-1, 2).astype(np.float64)
    h, w = bits.shape
    area = cv2.contourArea(hull.astype(np.float32))
    if area < min_area * w * h:
        raise DegenerateQuad(
            f"Page content covers {area / float(w * h):.3f} of the image, need {min_area}"
        )
    sums = hull[:, 0] + hull[:, 1]
    diffs = hull[:, 0] - hull[:, 1]
    quad = np.array(
        [
            hull[np.argmin(sums)],
            hull[np.argmax(diffs)],
            hull[np.argmax(sums)],
            hull[np.argmin(diffs)],
        ]
    )
    angles = _interior_angles(quad)
    if min(angles) < min_angle:
        raise DegenerateQuad(f"Page quadrilateral near collinear, angles {angles}")
    return quad


def perspective_correct(img, config=None):
    """Map the ink quadrilateral onto an axis aligned rectangle anchored at
    its top left corner; returns (corrected image, quad)"""
    img = as_raster(img)
    binary, _ = binarize(img)
    min_px = config.denoise_min_px if config else 4
    bits = denoise(binary, min_px).bits
    quad = page_quad(bits, config)
    top_left, top_right, bottom_right, bottom_left = quad
    width = (np.linalg.norm(top_right - top_left) + np.linalg.norm(bottom_right - bottom_left)) / 2
    height = (np.linalg.norm(bottom_left - top_left) + np.linalg.norm(bottom_right - top_right)) / 2
    target = np.array(
        [
            top_left,
            top_left + (width, 0),
            top_left + (width, height),
            top_left + (0, height),
        ],
        dtype=np.float32,
    )
    matrix = cv2.getPerspectiveTransform(quad.astype(np.float32), target)
    h, w = img.shape
    corrected = cv2.warpPerspective(
        img,
        matrix,
        (w, h),
        flags=cv2.INTER_LINEAR,
        borderMode=cv2.BORDER_CONSTANT,
        borderValue=modal_luminance(img),
    )
    log.debug("Perspective quad: [%s]", quad.tolist())
    return corrected, [tuple(float(v) for v in corner) for corner in quad]


def preprocess(img, config):
    """Page preprocessing: optional perspective correction on grayscale,
    binarization, speck removal and skew correction. Returns the corrected
    raster and its cleaned binary image."""
    img = as_raster(img)
    if config.perspective:
        try:
            img, _ = perspective_correct(img, config)
        except DegenerateQuad as errmsg:
            log.warning("Skipping perspective correction: [%s]", errmsg)
    binary, _ = binarize(img)
    binary = denoise(binary, config.denoise_min_px)
    try:
        angle = estimate_skew(binary, config)
    except InsufficientInk as errmsg:
        log.debug("Skipping skew correction: [%s]", errmsg)
        angle = 0.0
    if abs(angle) >= config.skew_apply_min_deg:
        log.info("Correcting page skew by [%s] degrees", angle)
        img = deskew(img, angle)
        binary, _ = binarize(img)
        binary = denoise(binary, config.denoise_min_px)
    return img, binary


def detect_format(data):
    """Sniff png or pdf from the leading bytes"""
    if data[:8] == b"\x89PNG\r\n\x1a\n":
        return "png"
    if data[:5] == b"%PDF-":
        return "pdf"
    return None


def load_png(data):
    """Decode PNG bytes into a raster image"""
    try:
        with Image.open(io.BytesIO(data)) as image:
            if image.format != "PNG":
                raise CorruptSource(f"Source is not a PNG image: [{image.format}]")
            image.load()
            return lib.gray_from_pil(image)
    except (UnidentifiedImageError, OSError, SyntaxError, ValueError) as errmsg:
        raise CorruptSource(f"Unable to decode PNG: [{errmsg}]") from errmsg


def open_pdf(data):
    """Open PDF bytes, rejecting sources that need repair"""
    if b"%%EOF" not in data[-2048:]:
        raise CorruptSource("PDF trailer missing, source truncated")
    try:
        doc = fitz.open(stream=data, filetype="pdf")
    except Exception as errmsg:
        raise CorruptSource(f"Unable to open PDF: [{errmsg}]") from errmsg
    if doc.is_repaired:
        doc.close()
        raise CorruptSource("PDF structure is damaged")
    return doc


def validate_source(data, fmt):
    """Check that source bytes parse as the declared format; returns the
    number of pages"""
    if fmt not in FORMATS:
        raise UnsupportedFormat(f"Unsupported source format: [{fmt}]")
    if not data:
        raise CorruptSource("Empty source")
    if fmt == "png":
        load_png(data)
        return 1
    doc = open_pdf(data)
    try:
        return doc.page_count
    finally:
        doc.close()


def _pixmap_gray(pix):
    samples = np.frombuffer(pix.samples, dtype=np.uint8)
    array = samples.reshape(pix.height, pix.stride)[:, : pix.width * pix.n]
    if pix.n == 1:
        return array.copy()
    rgb = array.reshape(pix.height, pix.width, pix.n)[:, :, :3]
    return lib.gray_from_pil(Image.fromarray(np.ascontiguousarray(rgb)))


def rasterize(data, fmt, dpi=300):
    """Convert a source into one raster image per page"""
    if fmt not in FORMATS:
        raise UnsupportedFormat(f"Unsupported source format: [{fmt}]")
    if fmt == "png":
        try:
            return [load_png(data)]
        except CorruptSource as errmsg:
            raise RasterizeFailure(f"Unable to rasterize PNG: [{errmsg}]") from errmsg
    try:
        doc = open_pdf(data)
    except CorruptSource as errmsg:
        raise RasterizeFailure(f"Unable to rasterize PDF: [{errmsg}]") from errmsg
    try:
        if doc.page_count == 0:
            raise EmptyDocument("PDF contains no pages")
        pages = []
        for page in doc:
            pix = page.get_pixmap(dpi=dpi, colorspace=fitz.csGRAY, alpha=False)
            pages.append(_pixmap_gray(pix))
        log.info("Rasterized [%d] PDF pages at [%d] dpi", len(pages), dpi)
        return pages
    except EmptyDocument:
        raise
    except Exception as errmsg:
        raise RasterizeFailure(f"Unable to rasterize PDF: [{errmsg}]") from errmsg
    finally:
        doc.close()


def read_source(path):
    """Read a PNG or PDF file from disk; returns (bytes, format)"""
    try:
        with open(path, "rb") as source_file:
            data = source_file.read()
    except OSError as errmsg:
        raise CorruptSource(f"Unable to read source [{path}]: [{errmsg}]") from errmsg
    fmt = detect_format(data)
    if fmt is None:
        raise UnsupportedFormat(f"Source [{path}] is neither PNG nor PDF")
    return data, fmt
