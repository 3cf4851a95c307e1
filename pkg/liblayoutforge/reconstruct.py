"""
 layoutforge: layout faithful output

 Serializes a DocumentTree as canonical JSON, HTML and a monospace text
 grid, restores the crops of non-text regions and draws region overlays.

 Copyright (C) 2026  layoutforge developers

 This work is licensed under the terms of the GNU GPL, version 3.  See
 the LICENSE file in the top-level directory.
"""
import os
import html
import json
import logging
import statistics
from dataclasses import dataclass
from typing import Optional

import cv2
import numpy as np
import regex

from liblayoutforge import lib
from liblayoutforge.docmodel import (
    Alignment,
    BoundingBox,
    DocumentTree,
    ListItemPayload,
    NonTextKind,
    NonTextPayload,
    PageLayout,
    ParagraphPayload,
    Region,
    RegionKind,
    TableCell,
    TableGrid,
    TableKind,
    TextLine,
    WordBox,
    assign_columns,
)
from liblayoutforge.errors import MissingCrop, ValidationError
from liblayoutforge.version import SCHEMA

log = logging.getLogger(__name__)

FORMATS = ("json", "html", "text")

OVERLAY_COLORS = {
    RegionKind.PARAGRAPH: (0, 160, 0),
    RegionKind.TABLE: (0, 0, 255),
    RegionKind.NONTEXT: (255, 0, 0),
    RegionKind.LIST_ITEM: (255, 165, 0),
}

CELL_SEPARATOR = " | "
GRAPHEME = regex.compile(r"\X")


@dataclass(frozen=True)
class RenderOptions:
    """Output format, crop directory and text grid cell width; text_cell_px
    None selects the median glyph advance of the document"""

    format: str = "json"
    image_dir: str = "images"
    text_cell_px: Optional[int] = None

    def __post_init__(self):
        if self.format not in FORMATS:
            raise ValueError(f"Unknown output format: [{self.format}]")
        if self.text_cell_px is not None and self.text_cell_px < 1:
            raise ValueError(f"text_cell_px must be at least 1, got [{self.text_cell_px}]")


def graphemes(text):
    """Grapheme clusters of a string"""
    return GRAPHEME.findall(text)


def _line_json(line):
    return {
        "bbox": line.bbox.as_list(),
        "baseline_y": line.baseline_y,
        "words": [{"bbox": w.bbox.as_list(), "text": w.text} for w in line.words],
    }


def _region_json(region):
    item = {"kind": region.kind.value, "bbox": region.bbox.as_list()}
    payload = region.payload
    if region.kind == RegionKind.PARAGRAPH:
        item["alignment"] = payload.alignment.value
    elif region.kind == RegionKind.LIST_ITEM:
        item["marker"] = payload.marker
        item["level"] = payload.level
    if region.kind != RegionKind.NONTEXT:
        item["lines"] = [_line_json(l) for l in region.lines]
    if region.kind == RegionKind.TABLE:
        item["table"] = {
            "kind": payload.kind.value,
            "rows": payload.rows,
            "cols": payload.cols,
            "cells": [
                {
                    "row": c.row,
                    "col": c.col,
                    "rowspan": c.rowspan,
                    "colspan": c.colspan,
                    "bbox": c.bbox.as_list(),
                    "text": c.text,
                }
                for c in payload.cells
            ],
        }
    if region.kind == RegionKind.NONTEXT:
        item["image_ref"] = payload.image_ref
        item["nontext_kind"] = payload.kind.value
    return item


def layout_dict(doc):
    """Canonical JSON structure of a document"""
    return {
        "schema": SCHEMA,
        "source_id": doc.source_id,
        "pages": [
            {
                "w": page.page_w,
                "h": page.page_h,
                "columns": [[x0, x1] for x0, x1 in page.columns],
                "regions": [_region_json(r) for r in page.regions],
            }
            for page in doc.pages
        ],
    }


def to_layout_json(doc):
    """Canonical layout JSON as UTF-8 bytes"""
    text = json.dumps(layout_dict(doc), ensure_ascii=False, indent=2)
    return (text + "\n").encode("utf-8")


def _parse_line(item):
    bbox = BoundingBox.from_list(item["bbox"])
    words = tuple(WordBox(BoundingBox.from_list(w["bbox"]), text=w["text"]) for w in item["words"])
    return TextLine(bbox, int(item["baseline_y"]), words, bbox.h)


def _parse_region(item):
    kind = RegionKind(item["kind"])
    bbox = BoundingBox.from_list(item["bbox"])
    lines = tuple(_parse_line(l) for l in item.get("lines", []))
    if kind == RegionKind.PARAGRAPH:
        payload = ParagraphPayload(lines, Alignment(item["alignment"]))
    elif kind == RegionKind.LIST_ITEM:
        payload = ListItemPayload(item["marker"], int(item["level"]), lines)
    elif kind == RegionKind.NONTEXT:
        payload = NonTextPayload(NonTextKind(item["nontext_kind"]), item.get("image_ref", ""))
    else:
        table = item["table"]
        cells = []
        pending = list(lines)
        for cell in table["cells"]:
            cell_box = BoundingBox.from_list(cell["bbox"])
            own = tuple(l for l in pending if cell_box.contains_point(*l.bbox.center))
            pending = [l for l in pending if l not in own]
            cells.append(
                TableCell(
                    int(cell["row"]), int(cell["col"]), int(cell["rowspan"]), int(cell["colspan"]), cell_box, own
                )
            )
        if pending:
            raise ValidationError(f"Table {bbox.as_list()} has lines outside its cells")
        payload = TableGrid(TableKind(table["kind"]), int(table["rows"]), int(table["cols"]), tuple(cells))
    return Region(kind, bbox, payload)


def parse_layout_json(data):
    """DocumentTree from canonical layout JSON"""
    try:
        values = json.loads(data)
        if values.get("schema", SCHEMA) != SCHEMA:
            raise ValidationError(f"Unsupported layout schema: [{values.get('schema')}]")
        pages = []
        for page in values["pages"]:
            columns = tuple((int(x0), int(x1)) for x0, x1 in page["columns"])
            regions = assign_columns([_parse_region(r) for r in page["regions"]], columns)
            pages.append(PageLayout(int(page["w"]), int(page["h"]), columns, tuple(regions)))
        return DocumentTree(tuple(pages), values.get("source_id", "")).validate()
    except (KeyError, TypeError, ValueError) as errmsg:
        raise ValidationError(f"Invalid layout JSON: [{errmsg}]") from errmsg


def restore_crops(doc, page_images, image_dir):
    """Write the crop of every non-text region as PNG named by its
    image_ref; returns the written paths"""
    written = []
    for page, image in zip(doc.pages, page_images):
        for region in page.regions:
            if region.kind != RegionKind.NONTEXT:
                continue
            box = region.bbox
            crop = np.asarray(image)[box.y : box.y1, box.x : box.x1]
            target = os.path.join(image_dir, region.payload.image_ref)
            lib.write_file(target, lib.png_bytes(crop))
            written.append(target)
    log.debug("Restored [%d] crops to [%s]", len(written), image_dir)
    return written


def _text_html(lines):
    return "<br>\n".join(html.escape(l.text) for l in lines)


def _table_html(grid):
    out = [f'<table class="{grid.kind.value}">']
    for row in range(grid.rows):
        out.append("<tr>")
        for cell in sorted((c for c in grid.cells if c.row == row), key=lambda c: c.col):
            span = ""
            if cell.rowspan > 1:
                span += f' rowspan="{cell.rowspan}"'
            if cell.colspan > 1:
                span += f' colspan="{cell.colspan}"'
            out.append(f"<td{span}>{html.escape(cell.text)}</td>")
        out.append("</tr>")
    out.append("</table>")
    return "\n".join(out)


def _page_html(page, page_index, opts):
    out = [f'<section class="page" data-page="{page_index}" style="width:{page.page_w}px">']
    open_list = False
    for idx, region in enumerate(page.regions):
        if region.kind != RegionKind.LIST_ITEM and open_list:
            out.append("</ol>")
            open_list = False
        if region.kind == RegionKind.PARAGRAPH:
            align = region.payload.alignment.value
            out.append(f'<p style="text-align:{align}">{_text_html(region.lines)}</p>')
        elif region.kind == RegionKind.LIST_ITEM:
            if not open_list:
                out.append('<ol style="list-style-type:none">')
                open_list = True
            payload = region.payload
            marker = html.escape(payload.marker)
            out.append(
                f'<li data-level="{payload.level}"><span class="marker">{marker}</span> '
                f"{_text_html(region.lines)}</li>"
            )
        elif region.kind == RegionKind.TABLE:
            out.append(_table_html(region.payload))
        else:
            ref = region.payload.image_ref
            if not os.path.exists(os.path.join(opts.image_dir, ref)):
                raise MissingCrop(f"Crop of region {idx} on page {page_index} not found: [{ref}]")
            src = html.escape(f"{os.path.basename(os.path.normpath(opts.image_dir))}/{ref}")
            kind = region.payload.kind.value
            out.append(
                f'<img class="{kind}" src="{src}" alt="{kind}" '
                f'width="{region.bbox.w}" height="{region.bbox.h}">'
            )
    if open_list:
        out.append("</ol>")
    out.append("</section>")
    return "\n".join(out)


def to_html(doc, opts=None):
    """HTML rendering in reading order; non-text regions reference their
    restored crops"""
    opts = opts or RenderOptions(format="html")
    title = html.escape(doc.source_id or "layoutforge")
    body = "\n".join(_page_html(page, idx, opts) for idx, page in enumerate(doc.pages))
    text = (
        "<!DOCTYPE html>\n"
        f'<html>\n<head>\n<meta charset="utf-8">\n<title>{title}</title>\n</head>\n<body>\n'
        f"{body}\n</body>\n</html>\n"
    )
    return text.encode("utf-8")


def glyph_advance(doc):
    """Median px per grapheme over all words, the default text cell"""
    advances = []
    for page in doc.pages:
        for region in page.regions:
            for line in region.lines:
                for word in line.words:
                    count = len(graphemes(word.text))
                    if count:
                        advances.append(word.bbox.w / count)
    if not advances:
        return 1
    return max(1, int(round(statistics.median(advances))))


def _place(row, col, text):
    """Write text into a character row at col or right after the previous
    content, separated by a blank"""
    if row:
        col = max(col, len(row) + 1)
    row.extend([" "] * (col - len(row)))
    row.extend(graphemes(text))
    return row


def _line_row(line, cell, prefix=None):
    row = []
    if prefix:
        _place(row, line.bbox.x // cell, prefix)
    for word in line.words:
        if word.text:
            _place(row, word.bbox.x // cell, word.text)
    return "".join(row)


def _column_widths(grid):
    widths = [0] * grid.cols
    for c in grid.cells:
        if c.colspan == 1:
            widths[c.col] = max(widths[c.col], len(graphemes(c.text)))
    return widths


def _row_parts(grid, widths, row):
    """(text, padded width) of every cell span of a table row"""
    parts = []
    col = 0
    while col < grid.cols:
        c = grid.cell_at(row, col)
        span = c.colspan if c is not None else 1
        width = sum(widths[col : col + span]) + len(CELL_SEPARATOR) * (span - 1)
        text = c.text if c is not None and c.row == row else ""
        parts.append((text, max(width, len(graphemes(text)))))
        col += span
    return parts


def _table_rows(region, cell):
    grid = region.payload
    widths = _column_widths(grid)
    lead = " " * (region.bbox.x // cell)
    rows = []
    for row in range(grid.rows):
        parts = [text + " " * (width - len(graphemes(text))) for text, width in _row_parts(grid, widths, row)]
        rows.append((lead + CELL_SEPARATOR.join(parts)).rstrip())
    return rows


def _placeholder(region, cell):
    return f"{' ' * (region.bbox.x // cell)}[IMAGE:{region.payload.image_ref}]"


def _block_rows(region):
    """Number of text rows the block of a region occupies"""
    if region.kind == RegionKind.NONTEXT:
        return 1
    if region.kind == RegionKind.TABLE:
        return max(1, region.payload.rows)
    return max(1, len(region.lines))


def to_plain_text(doc, opts=None):
    """Monospace projection: one row per text line, words at x divided by
    the cell width, tables with padded cells, images as placeholders"""
    opts = opts or RenderOptions(format="text")
    cell = opts.text_cell_px or glyph_advance(doc)
    pages = []
    for page in doc.pages:
        blocks = []
        for region in page.regions:
            if region.kind == RegionKind.NONTEXT:
                blocks.append([_placeholder(region, cell)])
            elif region.kind == RegionKind.TABLE:
                blocks.append(_table_rows(region, cell))
            elif region.kind == RegionKind.LIST_ITEM:
                lines = region.payload.lines
                rows = [_line_row(lines[0], cell, region.payload.marker)] if lines else [region.payload.marker]
                rows += [_line_row(l, cell) for l in lines[1:]]
                blocks.append(rows)
            else:
                blocks.append([_line_row(l, cell) for l in region.lines])
        pages.append("\n\n".join("\n".join(rows) for rows in blocks))
    return "\n\f\n".join(pages) + "\n" if pages else ""


def _region_pieces(region):
    if region.kind == RegionKind.NONTEXT:
        return []
    if region.kind == RegionKind.TABLE:
        return [c.text for c in sorted(region.payload.cells, key=lambda c: (c.row, c.col)) if c.text]
    pieces = [region.payload.marker] if region.kind == RegionKind.LIST_ITEM and region.payload.marker else []
    return pieces + [l.text for l in region.lines if l.text]


def _table_pieces(rows, region, cell):
    """Cell texts of the rows of a table block; the separators must sit
    exactly where the renderer put them"""
    grid = region.payload
    widths = _column_widths(grid)
    lead = region.bbox.x // cell
    pieces = []
    for row, line in enumerate(rows[: grid.rows]):
        parts = _row_parts(grid, widths, row)
        full = lead + sum(w for _, w in parts) + len(CELL_SEPARATOR) * (len(parts) - 1)
        chars = graphemes(line)
        if len(chars) > full or "".join(chars[:lead]).strip():
            raise ValidationError(f"Table row does not fit its grid: [{line}]")
        chars += [" "] * (full - len(chars))
        pos = lead
        for idx, (_, width) in enumerate(parts):
            if idx:
                if "".join(chars[pos : pos + len(CELL_SEPARATOR)]) != CELL_SEPARATOR:
                    raise ValidationError(f"Missing cell separator at column {pos}: [{line}]")
                pos += len(CELL_SEPARATOR)
            pieces.append(" ".join("".join(chars[pos : pos + width]).split()))
            pos += width
    return pieces


def _plain_page_pieces(text, page, cell):
    rows = text.split("\n")
    expected = sum(_block_rows(r) for r in page.regions) + len(page.regions) - 1
    if not page.regions:
        expected = 1
    if len(rows) != expected:
        raise ValidationError(f"Page has {len(rows)} rows, layout needs {expected}")
    pieces = []
    pos = 0
    for region in page.regions:
        block = rows[pos : pos + _block_rows(region)]
        pos += len(block) + 1
        if region.kind == RegionKind.NONTEXT:
            if block[0] != _placeholder(region, cell):
                raise ValidationError(f"Expected image placeholder: [{block[0]}]")
        elif region.kind == RegionKind.TABLE:
            pieces += _table_pieces(block, region, cell)
        else:
            # grid padding between words collapses to one blank
            pieces += [" ".join(row.split()) for row in block]
    return pieces


def _html_page_pieces(body):
    return [html.unescape(p.strip()) for p in regex.split(r"<[^>]*>", body) if p.strip()]


def page_texts(data, fmt, doc=None, opts=None):
    """Text content of every page of a rendering: line, cell and marker
    texts joined by single blanks. Only the cell separators and image
    placeholders the renderer inserted are dropped, so plain text needs
    the document and options it was rendered with to locate them."""
    text = data.decode("utf-8") if isinstance(data, bytes) else data
    if fmt == "json":
        pages = [[p for r in page.regions for p in _region_pieces(r)] for page in parse_layout_json(text).pages]
    elif fmt == "html":
        sections = regex.findall(r'<section class="page"[^>]*>(.*?)</section>', text, flags=regex.S)
        pages = [_html_page_pieces(body) for body in sections]
    elif fmt == "text":
        if doc is None:
            raise ValueError("Plain text content needs its document")
        opts = opts or RenderOptions(format="text")
        cell = opts.text_cell_px or glyph_advance(doc)
        chunks = text[:-1].split("\n\f\n") if text else []
        if len(chunks) != len(doc.pages):
            raise ValidationError(f"Text has {len(chunks)} pages, document has {len(doc.pages)}")
        pages = [_plain_page_pieces(chunk, page, cell) for chunk, page in zip(chunks, doc.pages)]
    else:
        raise ValueError(f"Unknown format: [{fmt}]")
    return [" ".join(p for p in pieces if p) for pieces in pages]


def render_overlay(page_image, page):
    """RGB copy of the page with region boxes in their kind colors"""
    gray = np.asarray(page_image, dtype=np.uint8)
    overlay = np.stack([gray] * 3, axis=-1).copy()
    for region in page.regions:
        box = region.bbox
        cv2.rectangle(
            overlay,
            (box.x, box.y),
            (box.x1 - 1, box.y1 - 1),
            OVERLAY_COLORS[region.kind],
            thickness=2,
        )
    return overlay


def render(doc, opts):
    """Output bytes of a document in the format of the options"""
    if opts.format == "json":
        return to_layout_json(doc)
    if opts.format == "html":
        return to_html(doc, opts)
    return to_plain_text(doc, opts).encode("utf-8")
