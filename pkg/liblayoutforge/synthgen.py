"""
 layoutforge: synthetic page generator

 Renders pages from the procedural glyph atlas and returns the exact
 ground truth layout next to the image. Text boxes, baselines, reading
 order and crop names are built with the same helpers the detectors use,
 so a noise free page must be reproduced exactly by the pipeline.

 Copyright (C) 2026  layoutforge developers

 This work is licensed under the terms of the GNU GPL, version 3.  See
 the LICENSE file in the top-level directory.
"""
import json
import os
import random
import logging
from dataclasses import dataclass, field, replace
from typing import Optional, Tuple

import cv2
import numpy as np

from liblayoutforge import glyphs, imaging, layout
from liblayoutforge.docmodel import (
    Alignment,
    BoundingBox,
    ListItemPayload,
    NonTextKind,
    NonTextPayload,
    ParagraphPayload,
    Region,
    RegionKind,
    TableCell,
    TableGrid,
    TableKind,
    WordBox,
    union_all,
)
from liblayoutforge.errors import OverlapInSpec, ValidationError
from liblayoutforge.recognize import GraphemeSpec, compose_grapheme, valid_graphemes

log = logging.getLogger(__name__)

# A4 at 150 dpi
PAGE_W = 1240
PAGE_H = 1754
MARGIN = 96

LEADING = 12
WORD_SPACE = 18
JUSTIFY_MAX_SPACE = 22
BLOCK_GAP = 36
GUTTER = 3 * glyphs.GLYPH_PX
TABLE_PAD = 12
CELL_MIN_W = 120
CHANNEL = 36
LIST_INDENT = 2 * glyphs.GLYPH_PX

PUNCTUATION = ("।", ",", "?", "!")
BENGALI_DIGITS = "০১২৩৪৫৬৭৮৯"


@dataclass(frozen=True)
class ParagraphSpec:
    """Paragraph text, words separated by blanks. column None spans the
    page."""

    text: str
    alignment: Alignment = Alignment.LEFT
    column: Optional[int] = 0


@dataclass(frozen=True)
class ListSpec:
    """Numbered list; every item renders as one line"""

    items: Tuple[str, ...]
    level: int = 0
    column: Optional[int] = 0


@dataclass(frozen=True)
class TableSpec:
    """Table with cell texts row by row. spans holds (row, col, rowspan,
    colspan) of merged cells; their text is the one of the top left
    position."""

    kind: TableKind
    cells: Tuple[Tuple[str, ...], ...]
    spans: Tuple[Tuple[int, int, int, int], ...] = ()
    column: Optional[int] = 0

    @property
    def rows(self):
        """Row count"""
        return len(self.cells)

    @property
    def cols(self):
        """Column count"""
        return len(self.cells[0]) if self.cells else 0


@dataclass(frozen=True)
class BlockSpec:
    """Picture, logo or signature block"""

    kind: NonTextKind
    w: int = 240
    h: int = 120
    column: Optional[int] = 0


@dataclass(frozen=True)
class SynthSpec:
    """Page description. Geometry and noise are applied after rendering;
    the ground truth stays in the coordinates of the clean page."""

    seed: int = 0
    page_w: int = PAGE_W
    page_h: int = PAGE_H
    margin: int = MARGIN
    columns: int = 1
    elements: tuple = ()
    glyph_px: int = glyphs.GLYPH_PX
    atlas: Optional[str] = None
    rotation: float = 0.0
    homography: Optional[Tuple[float, ...]] = None
    noise: float = 0.0

    def column_ranges(self):
        """Column x-ranges of the page"""
        x0, x1 = self.margin, self.page_w - self.margin
        if self.columns == 1:
            return [(x0, x1)]
        width = (x1 - x0 - GUTTER * (self.columns - 1)) // self.columns
        return [
            (x0 + idx * (width + GUTTER), x0 + idx * (width + GUTTER) + width)
            for idx in range(self.columns)
        ]


@dataclass(frozen=True)
class SynthPage:
    """Rendered page with its ground truth"""

    image: np.ndarray = field(compare=False)
    truth: object
    text: str
    ink: np.ndarray = field(compare=False, repr=False)
    transform: Optional[np.ndarray] = field(default=None, compare=False, repr=False)


def grapheme_table(alphabet):
    """Composed text of every valid grapheme to its first GraphemeSpec"""
    table = {}
    for spec in valid_graphemes(alphabet):
        table.setdefault(compose_grapheme(spec, alphabet), spec)
    return table


def parse_word(word, table):
    """Graphemes of a word, longest match first"""
    longest = max(len(k) for k in table)
    memo = {}

    def parse(pos):
        if pos == len(word):
            return ()
        if pos in memo:
            return memo[pos]
        memo[pos] = None
        for size in range(min(longest, len(word) - pos), 0, -1):
            spec = table.get(word[pos : pos + size])
            if spec is None:
                continue
            rest = parse(pos + size)
            if rest is not None:
                memo[pos] = (spec,) + rest
                break
        return memo[pos]

    result = parse(0)
    if not result:
        raise ValidationError(f"Word cannot be written with the alphabet: [{word}]")
    return result


@dataclass(frozen=True)
class _Word:
    text: str
    graphemes: tuple
    texts: tuple
    x0: int
    y0: int
    x1: int
    y1: int

    @property
    def width(self):
        return self.x1 - self.x0


class _Canvas:
    """Ink mask with glyph and block drawing"""

    def __init__(self, spec, atlas):
        self.log = logging.getLogger(__name__)
        if spec.glyph_px < glyphs.GLYPH_PX or spec.glyph_px % glyphs.GLYPH_PX:
            raise ValidationError(
                f"Glyph height must be a multiple of {glyphs.GLYPH_PX} px: [{spec.glyph_px}]"
            )
        self.spec = spec
        self.atlas = atlas
        self.alphabet = atlas.alphabet
        self.table = grapheme_table(self.alphabet)
        self.ink = np.zeros((spec.page_h, spec.page_w), dtype=bool)
        self.placed = []
        self.scale = spec.glyph_px // glyphs.GLYPH_PX
        self.glyph_px = spec.glyph_px
        self.cell_w = glyphs.CELL_W * self.scale

    def ink_box(self, root_id):
        """Glyph ink box at the page glyph height"""
        return tuple(v * self.scale for v in self.atlas.ink_box(root_id))

    def cell(self, grapheme):
        """Glyph cell, upscaled by pixel replication"""
        cell = self.atlas.render(*grapheme.ids)
        if self.scale == 1:
            return cell
        return cell.repeat(self.scale, axis=0).repeat(self.scale, axis=1)

    def word(self, text):
        """Measured word"""
        graphemes = parse_word(text, self.table)
        boxes = []
        for idx, g in enumerate(graphemes):
            x0, y0, x1, y1 = self.ink_box(g.root_id)
            boxes.append((x0 + idx * self.cell_w, y0, x1 + idx * self.cell_w, y1))
        texts = tuple(compose_grapheme(g, self.alphabet) for g in graphemes)
        return _Word(
            text,
            graphemes,
            texts,
            min(b[0] for b in boxes),
            min(b[1] for b in boxes),
            max(b[2] for b in boxes),
            max(b[3] for b in boxes),
        )

    def words(self, text):
        """Measured words of a text"""
        return [self.word(w) for w in text.split()]

    def claim(self, bbox):
        """Reserve a page area; overlaps and page overflow are spec errors"""
        if bbox.x < 0 or bbox.y < 0 or bbox.x1 > self.spec.page_w or bbox.y1 > self.spec.page_h:
            raise OverlapInSpec(f"Element {bbox.as_list()} does not fit the page")
        for other in self.placed:
            if other.intersects(bbox):
                raise OverlapInSpec(f"Element {bbox.as_list()} overlaps {other.as_list()}")
        self.placed.append(bbox)

    def draw_word(self, word, x, top):
        """Draw a word with its ink starting at x on the line whose cell row
        starts at top"""
        origin = x - word.x0
        if origin < 0 or top < 0 or origin + len(word.graphemes) * self.cell_w > self.spec.page_w or top + self.glyph_px > self.spec.page_h:
            raise OverlapInSpec(f"Word [{word.text}] leaves the page at ({x}, {top})")
        glyph_boxes = []
        for idx, g in enumerate(word.graphemes):
            cx = origin + idx * self.cell_w
            cell = self.cell(g)
            self.ink[top : top + self.glyph_px, cx : cx + self.cell_w] |= cell
            gx0, gy0, gx1, gy1 = self.ink_box(g.root_id)
            glyph_boxes.append(BoundingBox.from_extent(cx + gx0, top + gy0, cx + gx1, top + gy1))
        bbox = BoundingBox.from_extent(x, top + word.y0, x + word.width, top + word.y1)
        return WordBox(bbox, tuple(glyph_boxes), word.text, word.texts)

    def draw_line(self, words, x, top, spaces=None):
        """Draw words left to right; spaces are the gaps between them"""
        spaces = spaces or [WORD_SPACE] * (len(words) - 1)
        boxes = []
        for idx, word in enumerate(words):
            boxes.append(self.draw_word(word, x, top))
            x += word.width + (spaces[idx] if idx < len(spaces) else 0)
        return layout.make_line(boxes)


def line_width(words, space=WORD_SPACE):
    """Ink width of words set with a fixed space"""
    return sum(w.width for w in words) + space * max(0, len(words) - 1)


def wrap(words, limits):
    """Greedy line breaking; limits(i) is the width allowed for line i"""
    lines = [[]]
    for word in words:
        current = lines[-1]
        if current and line_width(current + [word]) > limits(len(lines) - 1):
            lines.append([word])
        else:
            current.append(word)
    return [l for l in lines if l]


def _justify_spaces(words, width):
    gaps = len(words) - 1
    extra = width - line_width(words)
    base, rem = divmod(extra, gaps)
    return [WORD_SPACE + base + (1 if idx < rem else 0) for idx in range(gaps)]


def _column_span(spec, column):
    ranges = spec.column_ranges()
    if column is None:
        return ranges[0][0], ranges[-1][1]
    if not 0 <= column < len(ranges):
        raise OverlapInSpec(f"Element assigned to unknown column [{column}]")
    return ranges[column]


def _render_paragraph(canvas, element, top):
    x0, x1 = _column_span(canvas.spec, element.column)
    width = x1 - x0
    alignment = element.alignment
    if alignment == Alignment.JUSTIFY:
        limits = lambda i: width
    elif alignment == Alignment.LEFT:
        limits = lambda i: int(width * 0.7)
    else:
        # alternate long and short lines so that the free edge varies
        limits = lambda i: int(width * (0.7 if i % 2 == 0 else 0.45))
    # newlines force a break
    lines = []
    for chunk in element.text.split("\n"):
        lines += wrap(canvas.words(chunk), lambda i: limits(len(lines) + i))
    if not lines:
        return [], top
    drawn = []
    y = top
    for idx, line in enumerate(lines):
        natural = line_width(line)
        if natural > width:
            raise OverlapInSpec(f"Word wider than its column at y={y}")
        body = idx < len(lines) - 1
        if alignment == Alignment.JUSTIFY and body and len(line) > 1:
            drawn.append(canvas.draw_line(line, x0, y, _justify_spaces(line, width)))
        elif alignment == Alignment.RIGHT:
            drawn.append(canvas.draw_line(line, x1 - natural, y))
        elif alignment == Alignment.CENTER:
            drawn.append(canvas.draw_line(line, x0 + (width - natural) // 2, y))
        else:
            drawn.append(canvas.draw_line(line, x0, y))
        y += canvas.glyph_px + LEADING
    if alignment == Alignment.JUSTIFY and len(drawn) == 1:
        alignment = Alignment.LEFT
    bbox = union_all(l.bbox for l in drawn)
    canvas.claim(bbox)
    region = Region(RegionKind.PARAGRAPH, bbox, ParagraphPayload(tuple(drawn), alignment))
    return [region], y - LEADING


def marker_text(number):
    """Bengali list marker"""
    return "".join(BENGALI_DIGITS[int(d)] for d in str(number)) + "."


def _render_list(canvas, element, top):
    x0, x1 = _column_span(canvas.spec, element.column)
    regions = []
    y = top
    for idx, item in enumerate(element.items):
        marker = marker_text(idx + 1)
        words = [canvas.word(marker)] + canvas.words(item)
        x = x0 + element.level * LIST_INDENT
        if x + line_width(words) > x1:
            raise OverlapInSpec(f"List item wider than its column at y={y}")
        line = canvas.draw_line(words, x, y)
        canvas.claim(line.bbox)
        item_line = replace(line, words=line.words[1:])
        payload = ListItemPayload(marker, element.level, (item_line,))
        regions.append(Region(RegionKind.LIST_ITEM, line.bbox, payload))
        y += canvas.glyph_px + LEADING
    return regions, y - LEADING


def _span_map(element):
    owner = {}
    for row, col, rowspan, colspan in element.spans:
        if element.kind != TableKind.BORDERED:
            raise ValidationError("Merged cells need a bordered table")
        for r in range(row, row + rowspan):
            for c in range(col, col + colspan):
                if (r, c) in owner or r >= element.rows or c >= element.cols:
                    raise ValidationError(f"Invalid span ({row},{col},{rowspan},{colspan})")
                owner[(r, c)] = (row, col, rowspan, colspan)
    for r in range(element.rows):
        for c in range(element.cols):
            owner.setdefault((r, c), (r, c, 1, 1))
    return owner


def _render_bordered(canvas, element, top):
    x0, x1 = _column_span(canvas.spec, element.column)
    owner = _span_map(element)
    words = [[canvas.words(text) for text in row] for row in element.cells]
    widths = []
    for c in range(element.cols):
        need = [
            line_width(words[r][c]) + 2 * TABLE_PAD
            for r in range(element.rows)
            if owner[(r, c)][3] == 1 and owner[(r, c)][:2] == (r, c)
        ]
        widths.append(max([CELL_MIN_W] + need))
    rule = glyphs.STROKE
    xs = [x0]
    for w in widths:
        xs.append(xs[-1] + rule + w)
    row_h = canvas.glyph_px + 2 * TABLE_PAD
    ys = [top]
    for _ in range(element.rows):
        ys.append(ys[-1] + rule + row_h)
    bbox = BoundingBox.from_extent(xs[0], ys[0], xs[-1] + rule, ys[-1] + rule)
    if bbox.x1 > x1:
        raise OverlapInSpec(f"Table wider than its column: {bbox.as_list()}")
    canvas.claim(bbox)
    ink = canvas.ink
    # outer frame, then internal rules outside merged cells
    ink[ys[0] : ys[0] + rule, bbox.x : bbox.x1] = True
    ink[ys[-1] : ys[-1] + rule, bbox.x : bbox.x1] = True
    ink[bbox.y : bbox.y1, xs[0] : xs[0] + rule] = True
    ink[bbox.y : bbox.y1, xs[-1] : xs[-1] + rule] = True
    for r in range(element.rows):
        for c in range(element.cols):
            if c + 1 < element.cols and owner[(r, c)] != owner[(r, c + 1)]:
                ink[ys[r] : ys[r + 1] + rule, xs[c + 1] : xs[c + 1] + rule] = True
            if r + 1 < element.rows and owner[(r, c)] != owner[(r + 1, c)]:
                ink[ys[r + 1] : ys[r + 1] + rule, xs[c] : xs[c + 1] + rule] = True
    centers_x = [x + rule // 2 for x in xs]
    centers_y = [y + rule // 2 for y in ys]
    cells = []
    for row, col, rowspan, colspan in sorted(set(owner.values())):
        cell_words = words[row][col]
        lines = ()
        if cell_words:
            if line_width(cell_words) + 2 * TABLE_PAD > xs[col + colspan] - xs[col] - rule:
                raise OverlapInSpec(f"Cell ({row},{col}) text wider than the cell")
            lines = (canvas.draw_line(cell_words, xs[col] + rule + TABLE_PAD, ys[row] + rule + TABLE_PAD),)
        cell_box = BoundingBox.from_extent(
            centers_x[col], centers_y[row], centers_x[col + colspan], centers_y[row + rowspan]
        )
        cells.append(TableCell(row, col, rowspan, colspan, cell_box, lines))
    grid = TableGrid(TableKind.BORDERED, element.rows, element.cols, tuple(cells))
    return [Region(RegionKind.TABLE, bbox, grid)], bbox.y1


def _render_aligned(canvas, element, top):
    """Semi bordered and borderless tables: left aligned columns separated
    by whitespace channels"""
    x0, x1 = _column_span(canvas.spec, element.column)
    if element.spans:
        raise ValidationError("Merged cells need a bordered table")
    words = [[canvas.words(text) for text in row] for row in element.cells]
    if any(not cell for row in words for cell in row):
        raise ValidationError("Tables without rulings need text in every cell")
    widths = [max(line_width(words[r][c]) for r in range(element.rows)) for c in range(element.cols)]
    starts = [x0]
    for w in widths[:-1]:
        starts.append(starts[-1] + w + CHANNEL)
    right = starts[-1] + widths[-1]
    if right > x1:
        raise OverlapInSpec(f"Table wider than its column at y={top}")
    semi = element.kind == TableKind.SEMI_BORDERED
    rule = glyphs.STROKE
    rules_y = []
    y = top
    if semi:
        rules_y.append(y)
        y += rule + LEADING
    rows = []
    for r in range(element.rows):
        line_boxes = [canvas.draw_line(words[r][c], starts[c], y) for c in range(element.cols)]
        rows.append(line_boxes)
        y += canvas.glyph_px
        if semi and r == 0:
            y += LEADING
            rules_y.append(y)
            y += rule + LEADING
        elif r + 1 < element.rows:
            y += LEADING
    if semi:
        y += LEADING
        rules_y.append(y)
        y += rule
        for ry in rules_y:
            canvas.ink[ry : ry + rule, x0:right] = True
    boxes = [l.bbox for row in rows for l in row]
    bbox = union_all(boxes)
    if semi:
        bbox = bbox.union(BoundingBox.from_extent(x0, rules_y[0], right, rules_y[-1] + rule))
    canvas.claim(bbox)
    # channel centers and row gap midpoints bound the cells
    xs = [bbox.x]
    for c in range(element.cols - 1):
        lo = max(rows[r][c].bbox.x1 for r in range(element.rows))
        hi = min(rows[r][c + 1].bbox.x for r in range(element.rows))
        xs.append((lo + hi) // 2)
    xs.append(bbox.x1)
    ys = [bbox.y]
    for r in range(element.rows - 1):
        lower = max(l.bbox.y1 for l in rows[r])
        upper = min(l.bbox.y for l in rows[r + 1])
        ys.append((lower + upper) // 2)
    ys.append(bbox.y1)
    cells = []
    for r in range(element.rows):
        for c in range(element.cols):
            cell_box = BoundingBox.from_extent(xs[c], ys[r], xs[c + 1], ys[r + 1])
            cells.append(TableCell(r, c, 1, 1, cell_box, (rows[r][c],)))
    grid = TableGrid(element.kind, element.rows, element.cols, tuple(cells))
    return [Region(RegionKind.TABLE, bbox, grid)], bbox.y1


def _render_table(canvas, element, top):
    if element.rows < 1 or element.cols < 1:
        raise ValidationError("Table without cells")
    if any(len(row) != element.cols for row in element.cells):
        raise ValidationError("Table rows differ in length")
    if element.kind == TableKind.BORDERED:
        return _render_bordered(canvas, element, top)
    return _render_aligned(canvas, element, top)


def picture_block(w, h):
    """Checkerboard of stroke sized squares; 8-connected, half filled"""
    ys, xs = np.indices((h, w))
    return ((ys // glyphs.STROKE) + (xs // glyphs.STROKE)) % 2 == 0


def logo_block(size):
    """Ring of a quarter of its radius width"""
    radius = (size - 1) / 2.0
    ys, xs = np.indices((size, size))
    dist = (xs - radius) ** 2 + (ys - radius) ** 2
    return (dist <= radius**2) & (dist >= (0.8 * radius) ** 2)


def signature_block(w, h):
    """Zigzag stroke; no long horizontal or vertical runs"""
    canvas = np.zeros((h, w), dtype=np.uint8)
    step = max(8, h // 3)
    points = []
    for idx, x in enumerate(range(1, w - 1, step)):
        points.append((x, 1 if idx % 2 == 0 else h - 2))
    cv2.polylines(
        canvas,
        [np.array(points, dtype=np.int32)],
        False,
        1,
        thickness=glyphs.STROKE,
        lineType=cv2.LINE_8,
    )
    return canvas > 0


def _render_block(canvas, element, top):
    x0, x1 = _column_span(canvas.spec, element.column)
    if element.kind == NonTextKind.LOGO:
        pixels = logo_block(min(element.w, element.h))
    elif element.kind == NonTextKind.SIGNATURE:
        pixels = signature_block(element.w, element.h)
    else:
        pixels = picture_block(element.w, element.h)
    h, w = pixels.shape
    if x0 + w > x1:
        raise OverlapInSpec(f"Block wider than its column at y={top}")
    if element.kind == NonTextKind.SIGNATURE:
        # signatures sit below the letter head zone
        top = max(top, int(0.15 * canvas.spec.page_h) + 1)
    if top + h > canvas.spec.page_h:
        raise OverlapInSpec(f"Block leaves the page at y={top}")
    canvas.ink[top : top + h, x0 : x0 + w] |= pixels
    rows = np.nonzero(pixels.any(axis=1))[0]
    cols = np.nonzero(pixels.any(axis=0))[0]
    bbox = BoundingBox.from_extent(x0 + cols[0], top + rows[0], x0 + cols[-1] + 1, top + rows[-1] + 1)
    canvas.claim(bbox)
    return [Region(RegionKind.NONTEXT, bbox, NonTextPayload(element.kind))], bbox.y1


_RENDERERS = {
    ParagraphSpec: _render_paragraph,
    ListSpec: _render_list,
    TableSpec: _render_table,
    BlockSpec: _render_block,
}


def atlas_for(spec, atlas):
    """Atlas a spec renders with: the directory it names, read with the
    alphabet of the given atlas, or the given atlas itself"""
    if not spec.atlas:
        return atlas
    log.debug("Loading glyph atlas [%s]", spec.atlas)
    return glyphs.load_atlas(spec.atlas, atlas.alphabet)


def render_clean(spec, atlas, source_id="page"):
    """Noise free render; returns (image, ground truth layout, ink mask)"""
    canvas = _Canvas(spec, atlas_for(spec, atlas))
    columns = spec.column_ranges()
    cursors = [spec.margin] * len(columns)
    regions = []
    for element in spec.elements:
        if element.column is None:
            top = max(cursors)
        else:
            top = cursors[element.column] if 0 <= element.column < len(cursors) else 0
        made, bottom = _RENDERERS[type(element)](canvas, element, top)
        regions += made
        if element.column is None:
            cursors = [bottom + BLOCK_GAP] * len(columns)
        else:
            cursors[element.column] = bottom + BLOCK_GAP
    image = np.where(canvas.ink, 0, 255).astype(np.uint8)
    truth = layout.assemble_layout(spec.page_w, spec.page_h, columns, regions, 0, source_id)
    log.debug("Rendered page with [%d] regions", len(truth.regions))
    return image, truth, canvas.ink


def apply_geometry(img, rotation=0.0, homography=None):
    """Rotate about the page center, then warp by a homography, both with
    bilinear sampling on a canvas of unchanged size. Returns the image and
    the 3x3 matrix mapping clean to distorted coordinates."""
    img = imaging.as_raster(img)
    if abs(rotation) > 15:
        raise ValueError(f"Rotation out of range: [{rotation}]")
    h, w = img.shape
    total = np.eye(3)
    out = img.copy()
    if rotation:
        matrix, _ = imaging.rotation_matrix(w, h, rotation, expand=False)
        out = cv2.warpAffine(
            out, matrix, (w, h), flags=cv2.INTER_LINEAR, borderMode=cv2.BORDER_CONSTANT, borderValue=255
        )
        total = np.vstack([matrix, [0.0, 0.0, 1.0]]) @ total
    if homography is not None:
        matrix = np.asarray(homography, dtype=np.float64).reshape(3, 3)
        out = cv2.warpPerspective(
            out, matrix, (w, h), flags=cv2.INTER_LINEAR, borderMode=cv2.BORDER_CONSTANT, borderValue=255
        )
        total = matrix @ total
    return out, total


def random_homography(seed, w, h, strength=0.02):
    """Homography moving the top right, bottom right and bottom left page
    corners inwards by up to strength of the page size"""
    rng = random.Random(seed)
    src = np.float32([[0, 0], [w, 0], [w, h], [0, h]])
    dst = src.copy()
    for idx in (1, 2, 3):
        dst[idx][0] += (-1 if src[idx][0] else 1) * rng.uniform(0, strength) * w
        dst[idx][1] += (-1 if src[idx][1] else 1) * rng.uniform(0, strength) * h
    return tuple(float(v) for v in cv2.getPerspectiveTransform(src, dst).ravel())


def inject_noise(img, level, seed=0):
    """Salt and pepper: flip a fraction level of the pixels, chosen by seed"""
    if not 0.0 <= level <= 1.0:
        raise ValueError(f"Noise level out of range: [{level}]")
    img = imaging.as_raster(img)
    out = img.copy()
    count = int(round(level * img.size))
    if count == 0:
        return out
    rng = np.random.default_rng(seed)
    picks = rng.choice(img.size, size=count, replace=False)
    flat = out.reshape(-1)
    flat[picks] = np.where(flat[picks] >= 128, 0, 255)
    log.debug("Flipped [%d] pixels", count)
    return out


def render_page(spec, atlas, source_id="page"):
    """Render a spec: clean page, ground truth and ink mask, then geometry
    and noise"""
    image, truth, ink = render_clean(spec, atlas, source_id)
    transform = None
    if spec.rotation or spec.homography is not None:
        image, transform = apply_geometry(image, spec.rotation, spec.homography)
    if spec.noise:
        image = inject_noise(image, spec.noise, spec.seed)
    return SynthPage(image, truth, truth.text(), ink, transform)


class _TextSource:
    """Random words over the letter classes of the alphabet"""

    def __init__(self, rng, alphabet):
        self.rng = rng
        self.alphabet = alphabet
        self.letters = [i for i in range(len(alphabet.roots)) if not alphabet.is_tight(i)]
        self.punct = [p for p in PUNCTUATION if p in alphabet.roots]

    def grapheme(self):
        root = self.rng.choice(self.letters)
        modifier = diacritic = None
        if self.alphabet.accepts_modifier(root) and self.rng.random() < 0.3:
            modifier = self.rng.randrange(len(self.alphabet.modifiers))
        if self.alphabet.accepts_diacritic(root) and self.rng.random() < 0.15:
            diacritic = self.rng.randrange(len(self.alphabet.diacritics))
        return compose_grapheme(GraphemeSpec(root, modifier, diacritic), self.alphabet)

    def word(self, size=None, punctuation=True):
        size = size or self.rng.randint(1, 5)
        text = "".join(self.grapheme() for _ in range(size))
        # the headline must cover most of the word
        if punctuation and size >= 2 and self.punct and self.rng.random() < 0.08:
            text += self.rng.choice(self.punct)
        return text

    def words(self, count, punctuation=True):
        return " ".join(self.word(punctuation=punctuation) for _ in range(count))


def _justified_text(source, canvas, width, lines):
    """Words that fill lines of the column width with spaces close to the
    normal word space, followed by a short last line"""
    result = []
    stretch = JUSTIFY_MAX_SPACE - WORD_SPACE
    for _ in range(lines):
        line = []
        while True:
            word = canvas.word(source.word(punctuation=False))
            if line and line_width(line + [word]) > width:
                break
            line.append(word)
        # top up with short words until the spaces stay narrow
        while width - line_width(line) > stretch * max(1, len(line) - 1):
            size = min(5, (width - line_width(line) - WORD_SPACE) // canvas.cell_w)
            if size < 1:
                break
            line.append(canvas.word(source.word(size, punctuation=False)))
        result.append(" ".join(w.text for w in line))
    tail = source.rng.randint(2, 3)
    result.append(" ".join(source.word(punctuation=False) for _ in range(tail)))
    return "\n".join(result)


def random_spec(seed, atlas, columns=None):
    """Seeded random page mixing paragraphs of all alignments, lists, the
    three table kinds and non-text blocks"""
    rng = random.Random(seed)
    source = _TextSource(rng, atlas.alphabet)
    columns = columns or rng.choice((1, 1, 2))
    spec = SynthSpec(seed=seed, columns=columns)
    canvas = _Canvas(spec, atlas)
    ranges = spec.column_ranges()
    elements = []
    if columns == 1:
        width = ranges[0][1] - ranges[0][0]
        if rng.random() < 0.3:
            elements.append(BlockSpec(NonTextKind.LOGO, 81, 81))
        elements.append(
            ParagraphSpec(_justified_text(source, canvas, width, rng.randint(1, 3)), Alignment.JUSTIFY)
        )
        choices = ["left", "center", "right", "list", "table", "picture", "signature", "justify"]
        room = spec.page_h - 2 * spec.margin - 450
        for _ in range(rng.randint(3, 5)):
            kind = rng.choice(choices)
            if kind == "justify":
                text = _justified_text(source, canvas, width, rng.randint(1, 2))
                elements.append(ParagraphSpec(text, Alignment.JUSTIFY))
                cost = 150
            elif kind in ("left", "center", "right"):
                count = rng.randint(3, 14)
                elements.append(ParagraphSpec(source.words(count), Alignment(kind)))
                cost = 180
            elif kind == "list":
                items = tuple(source.words(rng.randint(2, 5)) for _ in range(rng.randint(2, 3)))
                elements.append(ListSpec(items, level=rng.randint(0, 1)))
                cost = 150
            elif kind == "table":
                elements.append(_random_table(rng, source, wide=True))
                cost = 260
            elif kind == "picture":
                elements.append(BlockSpec(NonTextKind.PICTURE, rng.randrange(160, 400, 2), rng.randrange(100, 180, 2)))
                cost = 220
            else:
                elements.append(BlockSpec(NonTextKind.SIGNATURE, rng.randint(200, 320), rng.randint(80, 110)))
                cost = 150
            room -= cost
            if room < 0:
                elements.pop()
                break
    else:
        width = ranges[0][1] - ranges[0][0]
        elements.append(ParagraphSpec(source.words(rng.randint(3, 5), punctuation=False), Alignment.CENTER, None))
        for column in range(columns):
            for _ in range(rng.randint(2, 3)):
                text = _justified_text(source, canvas, width, rng.randint(2, 4))
                elements.append(ParagraphSpec(text, Alignment.JUSTIFY, column))
            extra = rng.choice(("list", "table", "picture", None))
            if extra == "list":
                items = tuple(source.words(rng.randint(2, 3)) for _ in range(2))
                elements.append(ListSpec(items, column=column))
            elif extra == "table":
                elements.append(replace(_random_table(rng, source, wide=False), column=column))
            elif extra == "picture":
                elements.append(BlockSpec(NonTextKind.PICTURE, rng.randrange(160, 300, 2), rng.randrange(100, 160, 2), column))
            text = _justified_text(source, canvas, width, 2)
            elements.append(ParagraphSpec(text, Alignment.JUSTIFY, column))
    # drop trailing elements that do not fit the page
    while elements:
        candidate = replace(spec, elements=tuple(elements))
        try:
            render_clean(candidate, atlas)
            return candidate
        except OverlapInSpec as errmsg:
            log.debug("Dropping last element of random page [%s]: [%s]", seed, errmsg)
            elements.pop()
    return spec


def _random_table(rng, source, wide):
    kind = rng.choice(list(TableKind))
    rows = rng.randint(3, 4)
    cols = rng.randint(3, 4) if wide else 3
    if kind == TableKind.BORDERED:
        cols = rng.randint(2, cols)
    per_cell = 2 if wide and kind == TableKind.BORDERED else 1
    cells = tuple(
        tuple(source.words(rng.randint(1, per_cell), punctuation=False) for _ in range(cols))
        for _ in range(rows)
    )
    spans = ()
    if kind == TableKind.BORDERED and rng.random() < 0.4:
        spans = ((0, 0, 1, 2),)
        cells = (tuple(cells[0][:1]) + ("",) * (cols - 1),) + cells[1:]
    return TableSpec(kind, cells, spans)


def spec_to_dict(spec):
    """JSON ready dict of a SynthSpec"""
    elements = []
    for element in spec.elements:
        if isinstance(element, ParagraphSpec):
            item = {"type": "paragraph", "text": element.text, "alignment": element.alignment.value}
        elif isinstance(element, ListSpec):
            item = {"type": "list", "items": list(element.items), "level": element.level}
        elif isinstance(element, TableSpec):
            item = {
                "type": "table",
                "kind": element.kind.value,
                "cells": [list(row) for row in element.cells],
                "spans": [list(s) for s in element.spans],
            }
        else:
            item = {"type": "nontext", "kind": element.kind.value, "w": element.w, "h": element.h}
        item["column"] = element.column
        elements.append(item)
    return {
        "seed": spec.seed,
        "page": [spec.page_w, spec.page_h],
        "margin": spec.margin,
        "columns": spec.columns,
        "glyph_px": spec.glyph_px,
        "atlas": spec.atlas,
        "rotation": spec.rotation,
        "homography": list(spec.homography) if spec.homography is not None else None,
        "noise": spec.noise,
        "elements": elements,
    }


def spec_from_dict(values):
    """SynthSpec from its JSON dict"""
    try:
        elements = []
        for item in values.get("elements", []):
            column = item.get("column", 0)
            kind = item["type"]
            if kind == "paragraph":
                elements.append(ParagraphSpec(item["text"], Alignment(item.get("alignment", "left")), column))
            elif kind == "list":
                elements.append(ListSpec(tuple(item["items"]), int(item.get("level", 0)), column))
            elif kind == "table":
                elements.append(
                    TableSpec(
                        TableKind(item.get("kind", "bordered")),
                        tuple(tuple(row) for row in item["cells"]),
                        tuple(tuple(int(v) for v in s) for s in item.get("spans", [])),
                        column,
                    )
                )
            elif kind == "nontext":
                elements.append(
                    BlockSpec(NonTextKind(item["kind"]), int(item.get("w", 240)), int(item.get("h", 120)), column)
                )
            else:
                raise ValidationError(f"Unknown element type: [{kind}]")
        page_w, page_h = values.get("page", [PAGE_W, PAGE_H])
        homography = values.get("homography")
        noise = float(values.get("noise", 0.0))
        if not 0.0 <= noise <= 1.0:
            raise ValidationError(f"Noise level out of range: [{noise}]")
        return SynthSpec(
            seed=int(values.get("seed", 0)),
            page_w=int(page_w),
            page_h=int(page_h),
            margin=int(values.get("margin", MARGIN)),
            columns=int(values.get("columns", 1)),
            elements=tuple(elements),
            glyph_px=int(values.get("glyph_px", glyphs.GLYPH_PX)),
            atlas=values.get("atlas"),
            rotation=float(values.get("rotation", 0.0)),
            homography=tuple(float(v) for v in homography) if homography is not None else None,
            noise=noise,
        )
    except (KeyError, TypeError, ValueError) as errmsg:
        raise ValidationError(f"Invalid page spec: [{errmsg}]") from errmsg


def load_spec(path):
    """Read a SynthSpec JSON file"""
    try:
        with open(path, "r", encoding="utf-8") as spec_file:
            values = json.load(spec_file)
    except (OSError, json.decoder.JSONDecodeError) as errmsg:
        raise ValidationError(f"Unable to read page spec [{path}]: [{errmsg}]") from errmsg
    spec = spec_from_dict(values)
    # atlas paths are relative to the spec file
    if spec.atlas and not os.path.isabs(spec.atlas):
        spec = replace(spec, atlas=os.path.join(os.path.dirname(os.path.abspath(path)), spec.atlas))
    return spec
