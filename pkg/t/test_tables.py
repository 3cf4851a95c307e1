import numpy as np
import pytest

from conftest import words
from liblayoutforge import imaging, layout, synthgen, tables
from liblayoutforge.docmodel import (
    BoundingBox,
    Region,
    RegionKind,
    TableCell,
    TableGrid,
    TableKind,
)
from liblayoutforge.errors import GridInconsistent

CELLS = (
    ("কলম", "বই", "নদী"),
    ("গান", "পাখি", "জল"),
    ("ফুল", "ঘর", "পথ"),
)


def table_page(render, table):
    page = render([synthgen.ParagraphSpec(words(30)), table])
    binary, _ = imaging.binarize(page.image)
    rules = tables.detect_ruling_lines(binary)
    text = tables.remove_rulings(binary, rules)
    comps = imaging.connected_components(text)
    metrics = layout.estimate_line_metrics(comps)
    lines = layout.build_text_lines(comps, metrics)
    truth = [r for r in page.truth.regions if r.kind == RegionKind.TABLE]
    return binary, rules, lines, metrics, truth


def cells_of(grid):
    return [
        (c.row, c.col, c.rowspan, c.colspan, c.bbox, [l.bbox for l in c.lines]) for c in grid.cells
    ]


def frame(verticals, horizontals):
    return tables.RulingLines(
        tuple(tables.Segment(tables.HORIZONTAL, *h) for h in horizontals),
        tuple(tables.Segment(tables.VERTICAL, *v) for v in verticals),
        1,
    )


def empty_table(bbox):
    return Region(
        RegionKind.TABLE, bbox, TableGrid(TableKind.BORDERED, 1, 1, (TableCell(0, 0, 1, 1, bbox),))
    )


def test_stroke_width():
    assert tables.estimate_stroke_width(np.zeros((10, 10), dtype=bool)) == 1
    bits = np.zeros((40, 40), dtype=bool)
    for x in range(2, 38, 6):
        bits[5:35, x : x + 3] = True
    assert tables.estimate_stroke_width(bits) == 3


def test_no_rulings_on_blank():
    rules = tables.detect_ruling_lines(np.zeros((100, 100), dtype=bool))
    assert not rules
    assert rules.segments == ()


def test_ruling_segment_geometry():
    bits = np.zeros((200, 400), dtype=bool)
    bits[50:52, 40:340] = True
    bits[100:104, 100:300] = True
    rules = tables.detect_ruling_lines(bits, stroke_width=2)
    assert [(s.pos, s.start, s.end, s.thickness) for s in rules.horizontals] == [
        (51, 40, 340, 2),
        (102, 100, 300, 4),
    ]
    assert rules.verticals == ()
    assert rules.mask.sum() == bits.sum()


def test_thick_bars_are_not_rulings():
    bits = np.zeros((200, 400), dtype=bool)
    bits[50:70, 40:340] = True
    assert not tables.detect_ruling_lines(bits, stroke_width=2)


def test_collinear_segments_merge():
    bits = np.zeros((100, 300), dtype=bool)
    bits[20, 10:100] = True
    bits[20, 102:200] = True
    rules = tables.detect_ruling_lines(bits, stroke_width=1)
    assert [(s.start, s.end) for s in rules.horizontals] == [(10, 200)]


def test_bordered_table(render):
    spec = synthgen.TableSpec(TableKind.BORDERED, CELLS)
    _, rules, lines, metrics, truth = table_page(render, spec)
    found = tables.detect_ruled_tables(lines, rules, metrics)
    assert [t.payload.kind for t in found] == [TableKind.BORDERED]
    assert found[0].bbox == truth[0].bbox
    grid = tables.extract_cell_grid(found[0], rules, metrics)
    assert (grid.rows, grid.cols) == (3, 3)
    assert cells_of(grid) == cells_of(truth[0].payload)
    grid.validate(found[0].bbox)


def test_bordered_table_with_merged_cells(render):
    cells = (("সকাল", "", "মেঘ"),) + CELLS[1:]
    spec = synthgen.TableSpec(TableKind.BORDERED, cells, spans=((0, 0, 1, 2),))
    _, rules, lines, metrics, truth = table_page(render, spec)
    found = tables.detect_ruled_tables(lines, rules, metrics)
    grid = tables.extract_cell_grid(found[0], rules, metrics)
    assert grid.cell_at(0, 1).colspan == 2
    assert cells_of(grid) == cells_of(truth[0].payload)


def test_semi_bordered_table(render):
    spec = synthgen.TableSpec(TableKind.SEMI_BORDERED, CELLS)
    _, rules, lines, metrics, truth = table_page(render, spec)
    assert len(rules.horizontals) == 3 and not rules.verticals
    found = tables.detect_ruled_tables(lines, rules, metrics)
    assert [t.payload.kind for t in found] == [TableKind.SEMI_BORDERED]
    assert found[0].bbox == truth[0].bbox
    grid = tables.extract_cell_grid(found[0], rules, metrics)
    assert cells_of(grid) == cells_of(truth[0].payload)


def test_borderless_table(render):
    spec = synthgen.TableSpec(TableKind.BORDERLESS, CELLS)
    _, rules, lines, metrics, truth = table_page(render, spec)
    assert not rules
    found = tables.detect_tables(lines, rules, metrics)
    assert [t.payload.kind for t in found] == [TableKind.BORDERLESS]
    assert found[0].bbox == truth[0].bbox
    grid = tables.extract_cell_grid(found[0], rules, metrics)
    assert cells_of(grid) == cells_of(truth[0].payload)
    claimed = {id(l) for l in found[0].lines}
    assert all(id(l) not in claimed for l in tables.unclaimed(lines, found))


def test_two_column_rows_are_not_a_borderless_table(render):
    spec = synthgen.TableSpec(TableKind.BORDERLESS, tuple(row[:2] for row in CELLS))
    _, rules, lines, metrics, _ = table_page(render, spec)
    assert tables.detect_borderless_tables(lines, metrics) == []


def test_single_cell_frame_is_not_a_table(render):
    spec = synthgen.TableSpec(TableKind.BORDERED, (("কলম",),))
    _, rules, lines, metrics, _ = table_page(render, spec)
    assert tables.detect_ruled_tables(lines, rules, metrics) == []


def test_table_without_rulings_is_never_bordered(render):
    spec = synthgen.TableSpec(TableKind.BORDERED, CELLS)
    binary, rules, lines, metrics, _ = table_page(render, spec)
    cleaned = tables.remove_rulings(binary, rules)
    assert cleaned.ink == binary.ink - int(rules.mask.sum())
    left = tables.detect_ruling_lines(cleaned)
    assert not left
    kinds = [t.payload.kind for t in tables.detect_tables(lines, left, metrics)]
    assert TableKind.BORDERED not in kinds


def test_ruling_ending_off_grid():
    rules = frame(
        [(10, 10, 111), (210, 10, 111), (110, 10, 60)],
        [(10, 10, 211), (110, 10, 211)],
    )
    with pytest.raises(GridInconsistent):
        tables.extract_cell_grid(empty_table(BoundingBox(0, 0, 220, 120)), rules, layout.LineMetrics(24, 12))


def test_non_rectangular_merge():
    rules = frame(
        [(10, 10, 111), (210, 10, 111), (110, 60, 111)],
        [(10, 10, 211), (110, 10, 211), (60, 110, 211)],
    )
    with pytest.raises(GridInconsistent):
        tables.extract_cell_grid(empty_table(BoundingBox(0, 0, 220, 120)), rules, layout.LineMetrics(24, 12))


def test_frame_grid_without_text():
    rules = frame(
        [(10, 10, 111), (210, 10, 111), (110, 10, 111)],
        [(10, 10, 211), (110, 10, 211)],
    )
    grid = tables.extract_cell_grid(empty_table(BoundingBox(0, 0, 220, 120)), rules, layout.LineMetrics(24, 12))
    assert (grid.rows, grid.cols) == (1, 2)
    assert [c.bbox.as_list() for c in grid.cells] == [[10, 10, 100, 100], [110, 10, 100, 100]]
