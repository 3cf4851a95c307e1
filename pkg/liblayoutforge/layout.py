"""
 layoutforge: page layout rules

 Line height and gap statistics, text line generation, column layout,
 paragraphs, numbered lists and non-text blocks. Tables live in their own
 module and run before paragraph detection.

 Copyright (C) 2026  layoutforge developers

 This work is licensed under the terms of the GNU GPL, version 3.  See
 the LICENSE file in the top-level directory.
"""
import logging
import statistics
from dataclasses import dataclass, replace
from typing import Optional

import cv2
import numpy as np
import regex

from liblayoutforge.config import RuleConfig
from liblayoutforge.docmodel import (
    Alignment,
    ListItemPayload,
    NonTextKind,
    NonTextPayload,
    PageLayout,
    ParagraphPayload,
    Region,
    RegionKind,
    TextLine,
    WordBox,
    reading_order,
    union_all,
)
from liblayoutforge.errors import OverlapConflict, TooFewComponents

log = logging.getLogger(__name__)

# numbered markers: digits followed by a closing sign, or a lone bullet
MARKER = regex.compile(r"^(?:[০-৯]+|[0-9]+)[.)।]$|^[•]$")


@dataclass(frozen=True)
class LineMetrics:
    """Page wide line statistics in px"""

    est_line_height: int
    median_line_gap: int
    median_intra_word_gap: Optional[int] = None
    median_inter_word_gap: Optional[int] = None


def estimate_baseline(bbox):
    """Baseline row of a text line box"""
    return bbox.y1 - 1 - int(bbox.h * 0.2)


def make_line(words):
    """TextLine over words sorted by x"""
    words = tuple(sorted(words, key=lambda w: w.bbox.x))
    bbox = union_all(w.bbox for w in words)
    return TextLine(bbox, estimate_baseline(bbox), words, bbox.h)


def estimate_line_height(comps, config=None):
    """Most common height inside the most populated height bin after
    discarding heights far from the median; ties go to the smaller height"""
    config = config or RuleConfig()
    if len(comps) < config.min_components:
        raise TooFewComponents(
            f"Need at least {config.min_components} components, found {len(comps)}"
        )
    heights = [c.bbox.h for c in comps]
    median = statistics.median(heights)
    kept = [
        h
        for h in heights
        if config.height_min_ratio * median <= h <= config.height_max_ratio * median
    ]
    bins = {}
    for height in kept:
        bins.setdefault(height // config.height_bin_px, []).append(height)
    modal = max(sorted(bins), key=lambda b: len(bins[b]))
    return max(1, min(statistics.multimode(bins[modal])))


def _cluster_rows(comps, config):
    """Group components whose boxes overlap vertically by at least the
    configured share of the smaller height"""
    rows = []
    for comp in sorted(comps, key=lambda c: (c.bbox.y, c.bbox.x)):
        best = None
        best_overlap = 0
        for idx, row in enumerate(rows):
            overlap = min(row["y1"], comp.bbox.y1) - max(row["y0"], comp.bbox.y)
            if overlap <= 0:
                continue
            height = min(row["y1"] - row["y0"], comp.bbox.h)
            if overlap >= config.line_overlap * height and overlap > best_overlap:
                best, best_overlap = idx, overlap
        if best is None:
            rows.append({"y0": comp.bbox.y, "y1": comp.bbox.y1, "comps": [comp]})
        else:
            row = rows[best]
            row["y0"] = min(row["y0"], comp.bbox.y)
            row["y1"] = max(row["y1"], comp.bbox.y1)
            row["comps"].append(comp)
    return [row["comps"] for row in rows]


def _words_and_gaps(row, est, config):
    """Split a row of components into fragments of words; returns the
    fragments and the intra and inter word gaps seen"""
    word_limit = config.word_gap_factor * est
    split_limit = config.line_split_factor * est
    fragments = []
    intra, inter = [], []
    words = []
    current = []
    right = None
    for comp in sorted(row, key=lambda c: (c.bbox.x, c.bbox.y)):
        if current:
            gap = comp.bbox.x - right
            if gap <= word_limit:
                if gap > 0:
                    intra.append(gap)
                current.append(comp)
                right = max(right, comp.bbox.x1)
                continue
            words.append(current)
            if gap > split_limit:
                fragments.append(words)
                words = []
            else:
                inter.append(gap)
        current = [comp]
        right = comp.bbox.x1
    if current:
        words.append(current)
    if words:
        fragments.append(words)
    return fragments, intra, inter


def _lines_from_comps(comps, est, config):
    lines = []
    intra, inter = [], []
    for row in _cluster_rows(comps, config):
        fragments, row_intra, row_inter = _words_and_gaps(row, est, config)
        intra += row_intra
        inter += row_inter
        for fragment in fragments:
            words = [WordBox(union_all(c.bbox for c in word)) for word in fragment]
            lines.append(make_line(words))
    lines.sort(key=lambda l: (l.bbox.y, l.bbox.x))
    return lines, intra, inter


def line_gaps(lines):
    """Vertical gap from every line to the nearest following line it
    overlaps horizontally"""
    gaps = []
    ordered = sorted(lines, key=lambda l: (l.bbox.y, l.bbox.x))
    for idx, line in enumerate(ordered):
        for other in ordered[idx + 1 :]:
            if other.bbox.y < line.bbox.y1 or line.bbox.hoverlap(other.bbox) <= 0:
                continue
            gaps.append(other.bbox.y - line.bbox.y1)
            break
    return gaps


def estimate_line_metrics(comps, config=None):
    """Line height and gap statistics of a page"""
    config = config or RuleConfig()
    est = estimate_line_height(comps, config)
    lines, intra, inter = _lines_from_comps(comps, est, config)
    gaps = [g for g in line_gaps(lines) if g > 0]
    if gaps:
        smallest = min(gaps)
        # paragraph breaks are wider than twice the leading
        line_gap = statistics.median([g for g in gaps if g <= 2 * smallest + 2])
        line_gap = max(1, int(round(line_gap)))
    else:
        line_gap = est
    intra_gap = max(1, int(round(statistics.median(intra)))) if intra else None
    inter_gap = max(1, int(round(statistics.median(inter)))) if inter else None
    if intra_gap is not None and inter_gap is not None and intra_gap >= inter_gap:
        intra_gap = max(1, inter_gap - 1)
    metrics = LineMetrics(est, line_gap, intra_gap, inter_gap)
    log.debug("Line metrics: [%s]", metrics)
    return metrics


def fallback_metrics(comps, default_height):
    """Metrics for pages with too few components for statistics"""
    if comps:
        est = max(1, int(statistics.median(c.bbox.h for c in comps)))
        est = min(est, default_height)
    else:
        est = default_height
    return LineMetrics(est, est)


def build_text_lines(comps, metrics, config=None):
    """Cluster components into text lines of words. Lines are split into
    fragments at horizontal gaps wider than the split factor."""
    config = config or RuleConfig()
    lines, _, _ = _lines_from_comps(comps, metrics.est_line_height, config)
    log.debug("Built [%d] text lines from [%d] components", len(lines), len(comps))
    return lines


def _longest_free(spans, y0, y1):
    """Longest interval of [y0, y1) not covered by any span"""
    best = (y0, y0)
    cursor = y0
    for top, bottom in sorted(spans):
        if top > cursor and top - cursor > best[1] - best[0]:
            best = (cursor, min(top, y1))
        cursor = max(cursor, bottom)
    if y1 - cursor > best[1] - best[0]:
        best = (cursor, y1)
    return best


def _free_run(boxes, x0, x1, block):
    spans = [(b.y, b.y1) for b in boxes if min(b.x1, x1) - max(b.x, x0) > 0]
    return _longest_free(spans, block.y, block.y1)


def detect_columns(lines, page_w, metrics, config=None, obstacles=()):
    """Column x-ranges separated by vertical whitespace channels that are
    free over most of the text block height and have text on both sides"""
    config = config or RuleConfig()
    if not lines:
        return [(0, page_w)]
    boxes = [l.bbox for l in lines] + list(obstacles)
    block = union_all(boxes)
    min_width = config.column_gap_factor * metrics.est_line_height
    min_run = config.column_span_ratio * block.h
    edges = sorted({block.x, block.x1} | {b.x for b in boxes} | {b.x1 for b in boxes})
    # elementary intervals between box edges share one set of boxes
    candidates = []
    for x0, x1 in zip(edges, edges[1:]):
        top, bottom = _free_run(boxes, x0, x1, block)
        if bottom - top >= min_run:
            if candidates and candidates[-1][1] == x0:
                candidates[-1][1] = x1
            else:
                candidates.append([x0, x1])
    separators = []
    for gx0, gx1 in candidates:
        if gx1 - gx0 < min_width or gx0 <= block.x or gx1 >= block.x1:
            continue
        top, bottom = _free_run(boxes, gx0, gx1, block)
        if bottom - top < min_run:
            continue
        beside = [l.bbox for l in lines if l.bbox.y >= top and l.bbox.y1 <= bottom]
        if any(b.x1 <= gx0 for b in beside) and any(b.x >= gx1 for b in beside):
            separators.append((gx0, gx1))
    columns = []
    left_edge = block.x
    for gx0, gx1 in separators:
        columns.append((left_edge, gx0))
        left_edge = gx1
    columns.append((left_edge, block.x1))
    log.debug("Detected columns: [%s]", columns)
    return columns


def column_of(bbox, columns):
    """Index of the single column a box overlaps, None when it spans
    several"""
    hits = [i for i, (x0, x1) in enumerate(columns) if min(bbox.x1, x1) - max(bbox.x, x0) > 0]
    if len(hits) == 1:
        return hits[0]
    if not hits:
        cx = bbox.center[0]
        return min(range(len(columns)), key=lambda i: abs((columns[i][0] + columns[i][1]) / 2 - cx))
    return None


def group_by_column(lines, columns):
    """Lines per column index; key None collects lines spanning columns"""
    groups = {}
    for line in lines:
        groups.setdefault(column_of(line.bbox, columns), []).append(line)
    return groups


def starts_with_marker(line):
    """True when the first word of a line is a list marker"""
    return bool(line.words) and bool(MARKER.match(line.words[0].text))


def _std(values):
    return float(np.std(values)) if len(values) > 1 else 0.0


def classify_alignment(lines, metrics, column, config=None):
    """Alignment from edge statistics of the lines against the column"""
    config = config or RuleConfig()
    est = metrics.est_line_height
    tol = config.align_tolerance * est
    col_x0, col_x1 = column
    if len(lines) == 1:
        box = lines[0].bbox
        if box.x - col_x0 <= est:
            return Alignment.LEFT
        if abs(box.center[0] - (col_x0 + col_x1) / 2.0) <= est:
            return Alignment.CENTER
        if col_x1 - box.x1 <= est:
            return Alignment.RIGHT
        return Alignment.LEFT
    lefts = [l.bbox.x for l in lines]
    rights = [l.bbox.x1 for l in lines]
    centers = [l.bbox.center[0] for l in lines]
    left = _std(lefts) < tol
    right_all = _std(rights) < tol
    right_body = _std(rights[:-1]) < tol
    reaches = col_x1 - max(rights[:-1]) <= est
    if left and right_body and not right_all and reaches:
        return Alignment.JUSTIFY
    if left and right_all:
        return Alignment.JUSTIFY if col_x1 - max(rights) <= est else Alignment.LEFT
    if left:
        return Alignment.LEFT
    if right_all:
        return Alignment.RIGHT
    if _std(centers) < tol:
        return Alignment.CENTER
    return Alignment.LEFT


def _is_short_final(previous_lines, line, column, est):
    """line closes a justified run: earlier lines reach the column edge, this
    one stops short"""
    if not previous_lines:
        return False
    reached = all(column[1] - l.bbox.x1 <= est for l in previous_lines)
    return reached and column[1] - line.bbox.x1 > est


def detect_paragraphs(lines, metrics, column, config=None):
    """Paragraph regions of the lines of one column"""
    config = config or RuleConfig()
    est = metrics.est_line_height
    max_gap = config.para_gap_factor * metrics.median_line_gap
    edge = config.para_indent_factor * est
    groups = []
    for line in sorted(lines, key=lambda l: (l.bbox.y, l.bbox.x)):
        if groups:
            current = groups[-1]
            prev = current[-1]
            gap = line.bbox.y - prev.bbox.y1
            aligned = (
                abs(line.bbox.x - prev.bbox.x) <= edge
                or abs(line.bbox.x1 - prev.bbox.x1) <= edge
                or abs(line.bbox.center[0] - prev.bbox.center[0]) <= edge
            )
            closes = _is_short_final(current[:-1], prev, column, est)
            if 0 <= gap <= max_gap and aligned and not starts_with_marker(line) and not closes:
                current.append(line)
                continue
            log.debug("Paragraph break before line %s (gap [%s])", line.bbox.as_list(), gap)
        groups.append([line])
    regions = []
    for group in groups:
        alignment = classify_alignment(group, metrics, column, config)
        bbox = union_all(l.bbox for l in group)
        regions.append(
            Region(RegionKind.PARAGRAPH, bbox, ParagraphPayload(tuple(group), alignment))
        )
    return regions


def detect_list_items(paragraphs, metrics, column=None, config=None):
    """Turn paragraphs opening with a list marker into list items"""
    config = config or RuleConfig()
    result = []
    for region in paragraphs:
        if region.kind != RegionKind.PARAGRAPH or not region.payload.lines:
            result.append(region)
            continue
        first = region.payload.lines[0]
        if not starts_with_marker(first):
            result.append(region)
            continue
        marker = first.words[0].text
        origin = column[0] if column is not None else region.bbox.x
        indent = max(0, region.bbox.x - origin)
        level = int(indent // (config.list_indent_factor * metrics.est_line_height))
        lines = (replace(first, words=first.words[1:]),) + region.payload.lines[1:]
        log.debug("List item [%s] level [%d]", marker, level)
        result.append(
            Region(
                RegionKind.LIST_ITEM,
                region.bbox,
                ListItemPayload(marker, level, lines),
                region.column,
            )
        )
    return result


def cluster_density(bbox, bits):
    """Ink density of a box"""
    crop = bits[bbox.y : bbox.y1, bbox.x : bbox.x1]
    return float(np.count_nonzero(crop)) / float(bbox.area)


def classify_nontext(cluster, metrics, bits, page_h, config=None):
    """NonTextKind of a component cluster, None when it is text"""
    config = config or RuleConfig()
    bbox = union_all(c.bbox for c in cluster)
    if bbox.h <= config.nontext_height_factor * metrics.est_line_height:
        return None
    density = cluster_density(bbox, bits)
    if not config.nontext_density_min <= density <= config.nontext_density_max:
        return None
    if density > config.picture_density:
        kind = NonTextKind.PICTURE
    elif bbox.y1 <= config.logo_top_ratio * page_h:
        kind = NonTextKind.LOGO
    elif density <= config.signature_density and all(
        c.density < config.stroke_fill_ratio for c in cluster if c.bbox.h > metrics.est_line_height
    ):
        kind = NonTextKind.SIGNATURE
    else:
        kind = NonTextKind.PICTURE
    log.debug("Cluster %s density [%.3f]: [%s]", bbox.as_list(), density, kind.value)
    return kind


def _dense_seeds(comps, metrics, shape, config):
    """Boxes of dense clusters of components too small to be text, such as
    halftone dots"""
    est = metrics.est_line_height
    small = [c for c in comps if c.bbox.h < config.dense_small_factor * est]
    if len(small) < config.dense_min_components:
        return []
    mask = np.zeros(shape, dtype=np.uint8)
    for comp in small:
        mask[comp.bbox.y : comp.bbox.y1, comp.bbox.x : comp.bbox.x1] = 1
    gap = max(2, int(round(config.dense_gap_factor * est)))
    mask = cv2.dilate(mask, np.ones((gap, gap), dtype=np.uint8))
    _, labels = cv2.connectedComponents(mask, connectivity=8)
    clusters = {}
    for comp in small:
        clusters.setdefault(int(labels[comp.bbox.y, comp.bbox.x]), []).append(comp.bbox)
    seeds = []
    for members in clusters.values():
        if len(members) < config.dense_min_components:
            continue
        bbox = union_all(members)
        if bbox.h > config.nontext_height_factor * est:
            log.debug("Dense cluster of [%d] components at %s", len(members), bbox.as_list())
            seeds.append(bbox)
    return seeds


def find_nontext(comps, metrics, bits, page_h, config=None):
    """Non-text regions seeded by tall components and by dense clusters of
    small ones; each seed absorbs the components inside its box. Returns
    (regions, remaining components)."""
    config = config or RuleConfig()
    limit = config.nontext_height_factor * metrics.est_line_height
    boxes = [c.bbox for c in comps if c.bbox.h > limit]
    boxes += _dense_seeds(comps, metrics, bits.shape, config)
    # merge overlapping seeds
    merged = True
    while merged:
        merged = False
        for i in range(len(boxes)):
            for j in range(i + 1, len(boxes)):
                if boxes[i].intersects(boxes[j]):
                    boxes[i] = boxes[i].union(boxes[j])
                    del boxes[j]
                    merged = True
                    break
            if merged:
                break
    regions = []
    claimed = set()
    for bbox in sorted(boxes, key=lambda b: (b.y, b.x)):
        members = [c for c in comps if bbox.contains(c.bbox)]
        kind = classify_nontext(members, metrics, bits, page_h, config)
        if kind is None:
            continue
        claimed.update(id(c) for c in members)
        regions.append(Region(RegionKind.NONTEXT, bbox, NonTextPayload(kind)))
    remaining = [c for c in comps if id(c) not in claimed]
    return regions, remaining


def image_ref(source_id, page_index, region_index):
    """File name of a restored region crop"""
    return f"{source_id}_p{page_index}_r{region_index}.png"


def assemble_layout(page_w, page_h, columns, regions, page_index=0, source_id="page"):
    """PageLayout over the regions of all detectors in reading order"""
    seen = {}
    for idx, region in enumerate(regions):
        for line in region.lines:
            key = line.bbox
            if key in seen and seen[key] != idx:
                raise OverlapConflict(f"Line {key.as_list()} claimed by two regions")
            seen[key] = idx
    if not columns:
        columns = [(0, page_w)]
    ordered = reading_order(regions, columns)
    named = []
    for idx, region in enumerate(ordered):
        if region.kind == RegionKind.NONTEXT:
            payload = replace(region.payload, image_ref=image_ref(source_id, page_index, idx))
            region = replace(region, payload=payload)
        named.append(region)
    layout = PageLayout(page_w, page_h, tuple(tuple(c) for c in columns), tuple(named))
    return layout.validate()
