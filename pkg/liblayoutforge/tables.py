"""
 layoutforge: table detection and cell grid extraction

 Ruling lines are found by morphological opening of the ink with long
 horizontal and vertical kernels. Closed rectangles of rulings with
 internal separators are bordered tables, open groups of rulings around
 column aligned text are semi bordered tables, and runs of text rows that
 share whitespace channels are borderless tables.

 Copyright (C) 2026  layoutforge developers

 This work is licensed under the terms of the GNU GPL, version 3.  See
 the LICENSE file in the top-level directory.
"""
import bisect
import logging
import math
from dataclasses import dataclass, field, replace
from typing import Tuple

import cv2
import numpy as np

from liblayoutforge import imaging
from liblayoutforge.config import RuleConfig
from liblayoutforge.docmodel import (
    BoundingBox,
    Region,
    RegionKind,
    TableCell,
    TableGrid,
    TableKind,
    union_all,
)
from liblayoutforge.errors import GridInconsistent
from liblayoutforge.layout import make_line

log = logging.getLogger(__name__)

HORIZONTAL = "h"
VERTICAL = "v"


@dataclass(frozen=True)
class Segment:
    """Ruling segment. pos is the center row (horizontal) or column
    (vertical), start and end the half open extent along the line."""

    orientation: str
    pos: int
    start: int
    end: int
    thickness: int = 1

    @property
    def length(self):
        """Extent along the line"""
        return self.end - self.start

    @property
    def bbox(self):
        """Pixel box of the segment"""
        top = self.pos - self.thickness // 2
        if self.orientation == HORIZONTAL:
            return BoundingBox(self.start, top, self.length, self.thickness)
        return BoundingBox(top, self.start, self.thickness, self.length)


@dataclass(frozen=True)
class RulingLines:
    """Horizontal and vertical ruling segments of a page and the mask of
    their pixels"""

    horizontals: Tuple[Segment, ...] = ()
    verticals: Tuple[Segment, ...] = ()
    stroke_width: int = 1
    mask: np.ndarray = field(default=None, compare=False, repr=False)

    @property
    def segments(self):
        """All segments, horizontals first"""
        return self.horizontals + self.verticals

    def __bool__(self):
        return bool(self.horizontals or self.verticals)


def estimate_stroke_width(image):
    """Most frequent horizontal ink run length"""
    bits = imaging._bits(image)
    if not bits.any():
        return 1
    padded = np.zeros((bits.shape[0], bits.shape[1] + 2), dtype=np.int8)
    padded[:, 1:-1] = bits
    edges = np.diff(padded, axis=1)
    starts = np.nonzero(edges == 1)
    ends = np.nonzero(edges == -1)
    lengths = ends[1] - starts[1]
    counts = np.bincount(lengths)
    counts[0] = 0
    return max(1, int(np.argmax(counts)))


def _opened(bits, length, horizontal):
    size = (length, 1) if horizontal else (1, length)
    kernel = cv2.getStructuringElement(cv2.MORPH_RECT, size)
    return cv2.morphologyEx(bits, cv2.MORPH_OPEN, kernel) > 0


def _merge_segments(segments, gap):
    """Join collinear segments whose ends lie within gap px"""
    merged = []
    for seg in sorted(segments, key=lambda s: (s.pos, s.start)):
        for idx, other in enumerate(merged):
            if abs(other.pos - seg.pos) <= gap and seg.start <= other.end + gap:
                keep = other if other.length >= seg.length else seg
                merged[idx] = Segment(
                    seg.orientation,
                    keep.pos,
                    min(other.start, seg.start),
                    max(other.end, seg.end),
                    max(other.thickness, seg.thickness),
                )
                break
        else:
            merged.append(seg)
    return tuple(sorted(merged, key=lambda s: (s.pos, s.start)))


def detect_ruling_lines(image, config=None, stroke_width=None):
    """Ruling segments of a binary page: components of the opened ink that
    are long and at most a few strokes thick"""
    config = config or RuleConfig()
    bits = imaging._bits(image)
    if not bits.any():
        return RulingLines(mask=np.zeros(bits.shape, dtype=bool))
    sw = stroke_width or estimate_stroke_width(bits)
    max_thickness = config.ruling_thickness_factor * sw
    data = bits.astype(np.uint8)
    mask = np.zeros(bits.shape, dtype=bool)
    found = {}
    for orientation, horizontal in ((HORIZONTAL, True), (VERTICAL, False)):
        extent = bits.shape[1] if horizontal else bits.shape[0]
        length = max(
            math.ceil(config.ruling_length_factor * sw),
            math.ceil(config.ruling_min_page_ratio * extent),
        )
        opened = _opened(data, length, horizontal)
        count, labels, stats, _ = imaging.label(opened)
        segments = []
        for idx in range(1, count):
            x, y, w, h, _ = (int(v) for v in stats[idx])
            along, across = (w, h) if horizontal else (h, w)
            if along < length or across > max_thickness:
                continue
            mask |= labels == idx
            if horizontal:
                segments.append(Segment(HORIZONTAL, y + h // 2, x, x + w, h))
            else:
                segments.append(Segment(VERTICAL, x + w // 2, y, y + h, w))
        found[orientation] = _merge_segments(segments, config.ruling_merge_px)
    rules = RulingLines(found[HORIZONTAL], found[VERTICAL], sw, mask)
    log.debug(
        "Ruling lines: [%d] horizontal, [%d] vertical, stroke [%d] px",
        len(rules.horizontals),
        len(rules.verticals),
        sw,
    )
    return rules


def remove_rulings(image, rules):
    """Binary page without the ruling pixels"""
    bits = imaging._bits(image)
    if rules.mask is None or not rules:
        return imaging.BinaryImage(bits.copy(), getattr(image, "degenerate", False))
    return imaging.BinaryImage(bits & ~rules.mask, getattr(image, "degenerate", False))


def _crosses(hseg, vseg, tol):
    return (
        hseg.start - tol <= vseg.pos < hseg.end + tol
        and vseg.start - tol <= hseg.pos < vseg.end + tol
    )


class _Union:
    """Union find over integer ids"""

    def __init__(self, size):
        self.parent = list(range(size))

    def find(self, idx):
        while self.parent[idx] != idx:
            self.parent[idx] = self.parent[self.parent[idx]]
            idx = self.parent[idx]
        return idx

    def join(self, a, b):
        ra, rb = self.find(a), self.find(b)
        if ra != rb:
            self.parent[max(ra, rb)] = min(ra, rb)

    def groups(self):
        result = {}
        for idx in range(len(self.parent)):
            result.setdefault(self.find(idx), []).append(idx)
        return [members for _, members in sorted(result.items())]


def _covered(spans, lo, hi, tol):
    """True when the spans cover [lo, hi) up to gaps of tol px"""
    cursor = lo
    for start, end in sorted(spans):
        if start > cursor + tol:
            return False
        cursor = max(cursor, end)
    return cursor >= hi - tol


@dataclass
class _RuleGroup:
    horizontals: list
    verticals: list

    @property
    def bbox(self):
        return union_all(s.bbox for s in self.horizontals + self.verticals)

    def frame(self):
        """(left, top, right, bottom) ruling positions"""
        return (
            min(v.pos for v in self.verticals),
            min(h.pos for h in self.horizontals),
            max(v.pos for v in self.verticals),
            max(h.pos for h in self.horizontals),
        )

    def closed(self, tol):
        """Outer rectangle fully ruled"""
        if not self.horizontals or not self.verticals:
            return False
        left, top, right, bottom = self.frame()
        if right - left <= tol or bottom - top <= tol:
            return False
        sides = (
            ([(h.start, h.end) for h in self.horizontals if abs(h.pos - top) <= tol], left, right),
            ([(h.start, h.end) for h in self.horizontals if abs(h.pos - bottom) <= tol], left, right),
            ([(v.start, v.end) for v in self.verticals if abs(v.pos - left) <= tol], top, bottom),
            ([(v.start, v.end) for v in self.verticals if abs(v.pos - right) <= tol], top, bottom),
        )
        return all(spans and _covered(spans, lo, hi, tol) for spans, lo, hi in sides)

    def internal(self, tol):
        """Number of segments strictly inside the frame"""
        left, top, right, bottom = self.frame()
        inner = [h for h in self.horizontals if top + tol < h.pos < bottom - tol]
        inner += [v for v in self.verticals if left + tol < v.pos < right - tol]
        return len(inner)

    def table_bbox(self):
        return BoundingBox.from_extent(
            min(h.start for h in self.horizontals),
            min(v.start for v in self.verticals),
            max(h.end for h in self.horizontals),
            max(v.end for v in self.verticals),
        ).union(self.bbox)


def _rule_groups(rules, tol):
    """Groups of horizontals and verticals connected by crossings"""
    hs, vs = list(rules.horizontals), list(rules.verticals)
    union = _Union(len(hs) + len(vs))
    for i, hseg in enumerate(hs):
        for j, vseg in enumerate(vs):
            if _crosses(hseg, vseg, tol):
                union.join(i, len(hs) + j)
    groups = []
    for members in union.groups():
        groups.append(
            _RuleGroup(
                [hs[i] for i in members if i < len(hs)],
                [vs[i - len(hs)] for i in members if i >= len(hs)],
            )
        )
    return groups


def _chain_horizontals(groups, est, config):
    """Merge open rule groups whose horizontals stack above each other"""
    max_gap = config.rule_gap_factor * est
    union = _Union(len(groups))
    for i, first in enumerate(groups):
        for j in range(i + 1, len(groups)):
            second = groups[j]
            for a in first.horizontals:
                for b in second.horizontals:
                    overlap = min(a.end, b.end) - max(a.start, b.start)
                    shorter = min(a.length, b.length)
                    if overlap >= 0.5 * shorter and abs(a.pos - b.pos) <= max_gap:
                        union.join(i, j)
    chained = []
    for members in union.groups():
        chained.append(
            _RuleGroup(
                [h for i in members for h in groups[i].horizontals],
                [v for i in members for v in groups[i].verticals],
            )
        )
    return chained


def group_rows(lines, config=None):
    """Lines grouped into table rows by vertical overlap, top to bottom"""
    config = config or RuleConfig()
    rows = []
    for line in sorted(lines, key=lambda l: (l.bbox.y, l.bbox.x)):
        if rows:
            extent = union_all(l.bbox for l in rows[-1])
            overlap = extent.voverlap(line.bbox)
            if overlap >= config.line_overlap * min(extent.h, line.bbox.h):
                rows[-1].append(line)
                continue
        rows.append([line])
    return rows


def row_gaps(row, min_width):
    """Whitespace gaps between the words of a row at least min_width wide"""
    words = sorted((w.bbox for line in row for w in line.words), key=lambda b: b.x)
    if not words:
        words = sorted((line.bbox for line in row), key=lambda b: b.x)
    gaps = []
    right = None
    for box in words:
        if right is not None and box.x - right >= min_width:
            gaps.append((right, box.x))
        right = box.x1 if right is None else max(right, box.x1)
    return gaps


@dataclass(frozen=True)
class Channel:
    """Whitespace channel shared by table rows; left and right are the gap
    edges of the first row for the alignment check"""

    x0: int
    x1: int
    left: int
    right: int

    @property
    def center(self):
        """Column boundary"""
        return (self.x0 + self.x1) // 2


def _channels_of(row, est, config):
    min_width = config.channel_min_factor * est
    return [Channel(a, b, a, b) for a, b in row_gaps(row, min_width)]


def _intersect(channels, row, est, config):
    """Channels that continue through the next row"""
    min_width = config.channel_min_factor * est
    align = config.channel_align_factor * est
    result = []
    for channel in channels:
        for a, b in row_gaps(row, min_width):
            lo, hi = max(channel.x0, a), min(channel.x1, b)
            if hi - lo < min_width:
                continue
            if abs(b - channel.right) <= align or abs(a - channel.left) <= align:
                result.append(Channel(lo, hi, channel.left, channel.right))
                break
    return result


def shared_channels(rows, est, config=None):
    """Whitespace channels common to all rows"""
    config = config or RuleConfig()
    if not rows:
        return []
    channels = _channels_of(rows[0], est, config)
    for row in rows[1:]:
        channels = _intersect(channels, row, est, config)
    return channels


def _table_region(kind, bbox, lines):
    """Table region holding its claimed lines in a single provisional cell
    until the grid is extracted"""
    cell = TableCell(0, 0, 1, 1, bbox, tuple(sorted(lines, key=lambda l: (l.bbox.y, l.bbox.x))))
    return Region(RegionKind.TABLE, bbox, TableGrid(kind, 1, 1, (cell,)))


def _free(lines, claimed):
    return [l for l in lines if id(l) not in claimed]


def _extend_rows(all_rows, start, stop, est, config):
    """Grow a row run up and down over adjacent rows sharing its channels"""
    max_gap = config.row_gap_factor * est
    channels = shared_channels(all_rows[start:stop], est, config)
    while start > 0:
        above = all_rows[start - 1]
        gap = union_all(l.bbox for l in all_rows[start]).y - union_all(l.bbox for l in above).y1
        narrowed = _intersect(channels, above, est, config)
        if gap > max_gap or len(narrowed) < len(channels):
            break
        channels, start = narrowed, start - 1
    while stop < len(all_rows):
        below = all_rows[stop]
        gap = union_all(l.bbox for l in below).y - union_all(l.bbox for l in all_rows[stop - 1]).y1
        narrowed = _intersect(channels, below, est, config)
        if gap > max_gap or len(narrowed) < len(channels):
            break
        channels, stop = narrowed, stop + 1
    return start, stop


def detect_ruled_tables(lines, rules, metrics, config=None):
    """Bordered and semi bordered tables; every table claims the lines
    whose center lies inside it"""
    config = config or RuleConfig()
    est = metrics.est_line_height
    tol = config.closure_tolerance_px
    tables = []
    claimed = set()
    open_groups = []
    for group in _rule_groups(rules, tol):
        if group.closed(tol):
            if group.internal(tol) < 1:
                log.debug("Framed box without separators: %s", group.bbox.as_list())
                continue
            bbox = group.table_bbox()
            members = [l for l in _free(lines, claimed) if bbox.contains_point(*l.bbox.center)]
            claimed.update(id(l) for l in members)
            if members:
                bbox = bbox.union(union_all(l.bbox for l in members))
            log.debug("Bordered table: %s with [%d] lines", bbox.as_list(), len(members))
            tables.append(_table_region(TableKind.BORDERED, bbox, members))
        else:
            open_groups.append(group)
    for group in _chain_horizontals(open_groups, est, config):
        if len(group.horizontals) < 2 and not (group.horizontals and group.verticals):
            continue
        extent = group.bbox
        free = _free(lines, claimed)
        inside = [l for l in free if extent.contains_point(*l.bbox.center)]
        if not inside:
            continue
        all_rows = group_rows(free, config)
        inside_ids = {id(l) for l in inside}
        index = [i for i, row in enumerate(all_rows) if any(id(l) in inside_ids for l in row)]
        start, stop = index[0], index[-1] + 1
        if len(shared_channels(all_rows[start:stop], est, config)) < 1:
            log.debug("Rules at %s enclose no aligned columns", extent.as_list())
            continue
        start, stop = _extend_rows(all_rows, start, stop, est, config)
        members = [l for row in all_rows[start:stop] for l in row]
        claimed.update(id(l) for l in members)
        bbox = extent.union(union_all(l.bbox for l in members))
        log.debug("Semi bordered table: %s with [%d] lines", bbox.as_list(), len(members))
        tables.append(_table_region(TableKind.SEMI_BORDERED, bbox, members))
    return tables


def detect_borderless_tables(lines, metrics, config=None):
    """Runs of at least the configured number of rows sharing whitespace
    channels, scanned top to bottom over the lines of one column"""
    config = config or RuleConfig()
    est = metrics.est_line_height
    max_gap = config.row_gap_factor * est
    rows = group_rows(lines, config)
    tables = []
    idx = 0
    while idx < len(rows):
        channels = _channels_of(rows[idx], est, config)
        if len(channels) < config.borderless_min_channels:
            idx += 1
            continue
        stop = idx + 1
        while stop < len(rows):
            gap = union_all(l.bbox for l in rows[stop]).y - union_all(l.bbox for l in rows[stop - 1]).y1
            if gap > max_gap:
                break
            narrowed = _intersect(channels, rows[stop], est, config)
            if len(narrowed) < config.borderless_min_channels:
                break
            channels = narrowed
            stop += 1
        if stop - idx >= config.borderless_min_rows:
            members = [l for row in rows[idx:stop] for l in row]
            bbox = union_all(l.bbox for l in members)
            log.debug("Borderless table: %s over [%d] rows", bbox.as_list(), stop - idx)
            tables.append(_table_region(TableKind.BORDERLESS, bbox, members))
            idx = stop
        else:
            idx += 1
    return tables


def detect_tables(lines, rules, metrics, config=None):
    """All tables of a single column page: ruled tables first, borderless
    tables over the lines they left"""
    config = config or RuleConfig()
    tables = detect_ruled_tables(lines, rules, metrics, config)
    rest = unclaimed(lines, tables)
    tables += detect_borderless_tables(rest, metrics, config)
    return tables


def unclaimed(lines, tables):
    """Lines not held by any table region"""
    taken = {id(l) for table in tables for l in table.lines}
    return [l for l in lines if id(l) not in taken]


def _cluster_positions(values, tol):
    """Sorted distinct positions, values within tol merged to their mean"""
    clusters = []
    for value in sorted(values):
        if clusters and value - clusters[-1][-1] <= tol:
            clusters[-1].append(value)
        else:
            clusters.append([value])
    return [int(round(sum(c) / len(c))) for c in clusters]


def _slot(bounds, value):
    """Index of the interval of bounds holding value, clamped"""
    idx = bisect.bisect_right(bounds, value) - 1
    return min(max(idx, 0), len(bounds) - 2)


def _split_lines(lines, xs, ys, owner):
    """Line fragments per owning cell. owner maps an elementary (row, col)
    to the cell key; words go to the cell holding their center."""
    per_cell = {}
    for line in lines:
        parts = {}
        for word in line.words:
            cx, cy = word.bbox.center
            key = owner(_slot(ys, cy), _slot(xs, cx))
            parts.setdefault(key, []).append(word)
        for key, words in parts.items():
            per_cell.setdefault(key, []).append(make_line(words))
    return {
        key: tuple(sorted(frags, key=lambda l: (l.bbox.y, l.bbox.x)))
        for key, frags in per_cell.items()
    }


def _near_grid(value, positions, tol):
    return any(abs(value - p) <= tol for p in positions)


def _bordered_grid(table, rules, config):
    tol = config.closure_tolerance_px
    bbox = table.bbox
    hs = [h for h in rules.horizontals if bbox.contains(h.bbox)]
    vs = [v for v in rules.verticals if bbox.contains(v.bbox)]
    if len(hs) < 2 or len(vs) < 2:
        raise GridInconsistent(f"Table {bbox.as_list()} lost its ruling frame")
    xs = _cluster_positions([v.pos for v in vs], tol)
    ys = _cluster_positions([h.pos for h in hs], tol)
    slack = tol + rules.stroke_width
    for seg in vs:
        if not (_near_grid(seg.start, ys, slack) and _near_grid(seg.end, ys, slack)):
            raise GridInconsistent(f"Vertical ruling at x={seg.pos} ends off the grid")
    for seg in hs:
        if not (_near_grid(seg.start, xs, slack) and _near_grid(seg.end, xs, slack)):
            raise GridInconsistent(f"Horizontal ruling at y={seg.pos} ends off the grid")
    rows, cols = len(ys) - 1, len(xs) - 1

    def ruled(segments, pos, mid):
        return any(abs(s.pos - pos) <= tol and s.start <= mid < s.end for s in segments)

    union = _Union(rows * cols)
    for r in range(rows):
        ymid = (ys[r] + ys[r + 1]) // 2
        for c in range(cols):
            xmid = (xs[c] + xs[c + 1]) // 2
            if c + 1 < cols and not ruled(vs, xs[c + 1], ymid):
                union.join(r * cols + c, r * cols + c + 1)
            if r + 1 < rows and not ruled(hs, ys[r + 1], xmid):
                union.join(r * cols + c, (r + 1) * cols + c)
    spans = {}
    for members in union.groups():
        cells = {(m // cols, m % cols) for m in members}
        r0, r1 = min(r for r, _ in cells), max(r for r, _ in cells)
        c0, c1 = min(c for _, c in cells), max(c for _, c in cells)
        if len(cells) != (r1 - r0 + 1) * (c1 - c0 + 1):
            raise GridInconsistent(
                f"Merged cells at ({r0},{c0}) of table {bbox.as_list()} are not rectangular"
            )
        for cell in cells:
            spans[cell] = (r0, c0, r1, c1)
    fragments = _split_lines(table.lines, xs, ys, lambda r, c: spans[(r, c)])
    cells = []
    for r0, c0, r1, c1 in sorted(set(spans.values())):
        cell_box = BoundingBox.from_extent(xs[c0], ys[r0], xs[c1 + 1], ys[r1 + 1])
        lines = fragments.get((r0, c0, r1, c1), ())
        cells.append(TableCell(r0, c0, r1 - r0 + 1, c1 - c0 + 1, cell_box, lines))
    return TableGrid(TableKind.BORDERED, rows, cols, tuple(cells))


def _channel_grid(table, kind, metrics, config):
    est = metrics.est_line_height
    bbox = table.bbox
    rows = group_rows(table.lines, config)
    channels = shared_channels(rows, est, config) if rows else []
    xs = [bbox.x] + [ch.center for ch in channels] + [bbox.x1]
    ys = [bbox.y]
    for upper, lower in zip(rows, rows[1:]):
        top = union_all(l.bbox for l in upper).y1
        bottom = union_all(l.bbox for l in lower).y
        ys.append((top + bottom) // 2)
    ys.append(bbox.y1)
    fragments = _split_lines(table.lines, xs, ys, lambda r, c: (r, c))
    cells = []
    for r in range(len(ys) - 1):
        for c in range(len(xs) - 1):
            cell_box = BoundingBox.from_extent(xs[c], ys[r], xs[c + 1], ys[r + 1])
            cells.append(TableCell(r, c, 1, 1, cell_box, fragments.get((r, c), ())))
    return TableGrid(kind, len(ys) - 1, len(xs) - 1, tuple(cells))


def extract_cell_grid(table, rules, metrics, config=None):
    """Aligned cell grid of a detected table. Bordered grids come from the
    ruling positions with spans where internal rulings are missing; the
    other kinds split at channel centers and row gap midpoints."""
    config = config or RuleConfig()
    kind = table.payload.kind
    if kind == TableKind.BORDERED:
        grid = _bordered_grid(table, rules, config)
    else:
        grid = _channel_grid(table, kind, metrics, config)
    log.debug("Extracted [%s] grid [%dx%d]", kind.value, grid.rows, grid.cols)
    return grid


def with_grid(table, grid):
    """Table region carrying its extracted grid"""
    return replace(table, payload=grid)
