"""
 layoutforge: page processing

 Runs one page image through preprocessing, ruling and table detection,
 column layout, recognition, paragraph and list detection and assembles
 its PageLayout. Documents fan out over a thread pool, one page per task.

 Copyright (C) 2026  layoutforge developers

 This work is licensed under the terms of the GNU GPL, version 3.  See
 the LICENSE file in the top-level directory.
"""
import os
import logging
import functools
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, replace

import numpy as np

from liblayoutforge import glyphs, imaging, lib, layout, reconstruct, recognize, tables
from liblayoutforge.config import RuleConfig, dump_config
from liblayoutforge.docmodel import DocumentTree, PageLayout, RegionKind
from liblayoutforge.errors import GridInconsistent, TooFewComponents

log = logging.getLogger(__name__)

# line height assumed for pages without any text component
FALLBACK_LINE_HEIGHT = glyphs.GLYPH_PX

OUTPUT_NAMES = {"json": "layout.json", "html": "document.html", "text": "document.txt"}


@dataclass(frozen=True)
class PageResult:
    """Layout of a page with the corrected raster it was read from"""

    layout: PageLayout
    image: np.ndarray
    binary: imaging.BinaryImage


@functools.lru_cache(maxsize=1)
def default_atlas():
    """Procedural atlas over the shipped alphabet"""
    return glyphs.build_atlas(recognize.load_alphabet())


def load_atlas(path=None):
    """Glyph atlas directory over the shipped alphabet, the procedural
    atlas if path is unset"""
    if not path:
        return default_atlas()
    return glyphs.load_atlas(path, recognize.load_alphabet())


class Engine:
    """Rule based layout analysis with a pluggable glyph recognizer"""

    def __init__(self, config=None, recognizer=None, atlas=None):
        self.log = logging.getLogger(__name__)
        self.config = config or RuleConfig()
        self.atlas = atlas or default_atlas()
        self.alphabet = self.atlas.alphabet
        self.recognizer = recognizer or recognize.reference_recognizer(self.atlas, self.config)

    def _metrics(self, comps):
        try:
            return layout.estimate_line_metrics(comps, self.config)
        except TooFewComponents as errmsg:
            self.log.debug("Using fallback line metrics: [%s]", errmsg)
            return layout.fallback_metrics(comps, FALLBACK_LINE_HEIGHT)

    def _gridded(self, found, rules, metrics):
        """Tables with their cell grids; tables whose grid cannot be built
        are dropped and their lines released"""
        kept = []
        for table in found:
            try:
                grid = tables.extract_cell_grid(table, rules, metrics, self.config)
            except GridInconsistent as errmsg:
                self.log.warning(
                    "Treating table %s as text: [%s]", table.bbox.as_list(), errmsg
                )
                continue
            kept.append(tables.with_grid(table, grid))
        return kept

    def _read(self, line, binary, metrics):
        return recognize.read_line(
            line, binary, metrics, self.recognizer, self.alphabet, self.config
        )

    def _read_table(self, table, binary, metrics):
        grid = table.payload
        cells = tuple(
            replace(cell, lines=tuple(self._read(l, binary, metrics) for l in cell.lines))
            for cell in grid.cells
        )
        return replace(table, payload=replace(grid, cells=cells))

    def analyze_page(self, img, page_index=0, source_id="page"):
        """PageLayout of one raster page"""
        config = self.config
        img, binary = imaging.preprocess(img, config)
        page_h, page_w = img.shape
        rules = tables.detect_ruling_lines(binary, config)
        text_image = tables.remove_rulings(binary, rules) if rules else binary
        comps = imaging.connected_components(text_image)
        if not comps and not rules:
            page = layout.assemble_layout(page_w, page_h, [(0, page_w)], [], page_index, source_id)
            return PageResult(page, img, binary)
        metrics = self._metrics(comps)
        nontext, comps = layout.find_nontext(comps, metrics, text_image.bits, page_h, config)
        lines = layout.build_text_lines(comps, metrics, config)

        found = self._gridded(tables.detect_ruled_tables(lines, rules, metrics, config), rules, metrics)
        free = tables.unclaimed(lines, found)
        obstacles = [t.bbox for t in found] + [n.bbox for n in nontext]
        columns = layout.detect_columns(free, page_w, metrics, config, obstacles)

        text_regions = []
        for key, group in sorted(
            layout.group_by_column(free, columns).items(), key=lambda kv: -1 if kv[0] is None else kv[0]
        ):
            column = columns[key] if key is not None else (columns[0][0], columns[-1][1])
            borderless = self._gridded(
                tables.detect_borderless_tables(group, metrics, config), rules, metrics
            )
            found += borderless
            rest = [self._read(l, text_image, metrics) for l in tables.unclaimed(group, borderless)]
            paragraphs = layout.detect_paragraphs(rest, metrics, column, config)
            text_regions += layout.detect_list_items(paragraphs, metrics, column, config)

        found = [self._read_table(t, text_image, metrics) for t in found]
        page = layout.assemble_layout(
            page_w, page_h, columns, nontext + found + text_regions, page_index, source_id
        )
        self.log.info(
            "Page [%d]: [%d] regions in [%d] columns", page_index, len(page.regions), page.column_count
        )
        return PageResult(page, img, binary)

    def process_document(self, pages, source_id="document", workers=1):
        """DocumentTree and per page results of raster pages; pages keep
        their source order for every worker count"""
        pages = list(pages)
        if workers > 1 and len(pages) > 1:
            with ThreadPoolExecutor(max_workers=workers) as pool:
                futures = [
                    pool.submit(self.analyze_page, img, idx, source_id) for idx, img in enumerate(pages)
                ]
                results = [f.result() for f in futures]
        else:
            results = [self.analyze_page(img, idx, source_id) for idx, img in enumerate(pages)]
        doc = DocumentTree(tuple(r.layout for r in results), source_id).validate()
        return doc, results


def export_document(doc, results, out_dir, opts, config):
    """Write crops, the rendered document and the config snapshot into
    out_dir; returns the path of the rendered document"""
    image_dir = os.path.join(out_dir, os.path.basename(os.path.normpath(opts.image_dir)))
    opts = replace(opts, image_dir=image_dir)
    if any(r.kind == RegionKind.NONTEXT for page in doc.pages for r in page.regions):
        reconstruct.restore_crops(doc, [r.image for r in results], image_dir)
    target = os.path.join(out_dir, OUTPUT_NAMES[opts.format])
    lib.write_file(target, reconstruct.render(doc, opts))
    lib.write_file(os.path.join(out_dir, "config.json"), dump_config(config))
    log.info("Wrote document: [%s]", target)
    return target


def export_layout(doc, results, out_dir):
    """Write layout.json and one region overlay PNG per page"""
    target = os.path.join(out_dir, OUTPUT_NAMES["json"])
    lib.write_file(target, reconstruct.to_layout_json(doc))
    written = [target]
    for idx, (page, result) in enumerate(zip(doc.pages, results)):
        overlay = reconstruct.render_overlay(result.image, page)
        path = os.path.join(out_dir, f"overlay_p{idx}.png")
        lib.write_file(path, lib.png_bytes(overlay))
        written.append(path)
    log.info("Wrote layout and [%d] overlays to [%s]", len(doc.pages), out_dir)
    return written
