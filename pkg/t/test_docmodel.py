import random
import functools

import pytest

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
    reading_order,
    region_text,
)
from liblayoutforge.errors import ValidationError


def box_region(x, y, w=50, h=20, kind=RegionKind.NONTEXT):
    return Region(kind, BoundingBox(x, y, w, h), NonTextPayload(NonTextKind.PICTURE))


def word(x, y, w, text=""):
    return WordBox(BoundingBox(x, y, w, 20), text=text)


def line(words):
    x0 = min(w.bbox.x for w in words)
    x1 = max(w.bbox.x1 for w in words)
    y = words[0].bbox.y
    return TextLine(BoundingBox(x0, y, x1 - x0, 20), y + 16, tuple(words), 20)


def test_box_geometry():
    box = BoundingBox.from_extent(10, 20, 30, 60)
    assert box.as_list() == [10, 20, 20, 40]
    assert (box.x1, box.y1, box.area) == (30, 60, 800)
    assert box.contains(BoundingBox(10, 20, 20, 40))
    assert not box.contains(BoundingBox(10, 20, 21, 40))
    assert box.contains_point(29, 59)
    assert not box.contains_point(30, 59)
    assert box.union(BoundingBox(0, 0, 5, 5)).as_list() == [0, 0, 30, 60]
    assert box.hoverlap(BoundingBox(40, 20, 5, 5)) == -10
    assert not box.intersects(BoundingBox(30, 20, 5, 5))


@pytest.mark.parametrize(
    "box, page",
    [
        (BoundingBox(0, 0, 0, 5), (None, None)),
        (BoundingBox(-1, 0, 5, 5), (None, None)),
        (BoundingBox(0, 0, 11, 5), (10, 10)),
        (BoundingBox(0, 6, 5, 5), (10, 10)),
    ],
)
def test_box_validate_rejects(box, page):
    with pytest.raises(ValidationError):
        box.validate(*page)


def test_reading_order_empty():
    assert reading_order([], [(0, 100)]) == []


def test_reading_order_single_column_by_y():
    lower = box_region(10, 50)
    upper = box_region(10, 10)
    assert reading_order([lower, upper], [(0, 200)]) == [upper.with_column(0), lower.with_column(0)]


def _column_of(region, columns):
    cx = region.bbox.center[0]
    return next(idx for idx, (x0, x1) in enumerate(columns) if x0 <= cx < x1)


def _compare(columns):
    def cmp(a, b):
        ka = (_column_of(a, columns), a.bbox.y, a.bbox.x)
        kb = (_column_of(b, columns), b.bbox.y, b.bbox.x)
        return (ka > kb) - (ka < kb)

    return cmp


@pytest.mark.parametrize("seed", range(20))
def test_reading_order_two_columns_matches_comparator(seed):
    rng = random.Random(seed)
    columns = [(0, 300), (400, 700)]
    regions = []
    for x0, _ in columns:
        for _ in range(3):
            regions.append(box_region(x0 + rng.randrange(0, 200), rng.randrange(0, 900)))
    shuffled = regions[:]
    rng.shuffle(shuffled)
    expected = sorted(regions, key=functools.cmp_to_key(_compare(columns)))
    got = reading_order(shuffled, columns)
    assert [r.bbox for r in got] == [r.bbox for r in expected]


@pytest.mark.parametrize("seed", range(10))
def test_reading_order_permutation_and_idempotent(seed):
    rng = random.Random(seed)
    columns = [(0, 300), (400, 700)]
    regions = [box_region(rng.randrange(0, 600), rng.randrange(0, 900)) for _ in range(12)]
    once = reading_order(regions, columns)
    assert sorted(r.bbox.as_list() for r in once) == sorted(r.bbox.as_list() for r in regions)
    assert reading_order(once, columns) == once


def test_page_spanning_region_closes_band():
    columns = [(0, 300), (400, 700)]
    left_top = box_region(10, 10)
    right_top = box_region(410, 20)
    spanning = box_region(10, 200, w=650)
    left_low = box_region(10, 400)
    right_low = box_region(410, 300)
    got = reading_order([right_low, spanning, left_low, right_top, left_top], columns)
    assert [r.bbox.y for r in got] == [10, 20, 200, 400, 300]
    assert got[2].column is None


def test_assign_columns_gutter_goes_to_nearest():
    columns = [(0, 300), (400, 700)]
    region = box_region(340, 10, w=50)
    assert assign_columns([region], columns)[0].column == 1


def test_region_validate_payload_kind():
    region = Region(RegionKind.PARAGRAPH, BoundingBox(0, 0, 10, 10), NonTextPayload(NonTextKind.LOGO))
    with pytest.raises(ValidationError):
        region.validate()


def test_region_validate_line_containment():
    text = line([word(0, 0, 40, "ক")])
    region = Region(RegionKind.PARAGRAPH, BoundingBox(0, 0, 30, 20), ParagraphPayload((text,)))
    with pytest.raises(ValidationError):
        region.validate()


def test_overlapping_words_rejected():
    text = TextLine(BoundingBox(0, 0, 100, 20), 16, (word(0, 0, 50), word(40, 0, 50)))
    region = Region(RegionKind.PARAGRAPH, BoundingBox(0, 0, 100, 20), ParagraphPayload((text,)))
    with pytest.raises(ValidationError):
        region.validate()


def _grid(cells, rows=2, cols=2):
    return TableGrid(TableKind.BORDERED, rows, cols, tuple(cells))


def test_grid_tiling():
    cells = [
        TableCell(0, 0, 1, 2, BoundingBox(0, 0, 100, 50)),
        TableCell(1, 0, 1, 1, BoundingBox(0, 50, 50, 50)),
        TableCell(1, 1, 1, 1, BoundingBox(50, 50, 50, 50)),
    ]
    grid = _grid(cells)
    grid.validate(BoundingBox(0, 0, 100, 100))
    assert grid.cell_at(0, 1) is grid.cells[0]
    with pytest.raises(ValidationError):
        _grid(cells[:2]).validate()
    overlapping = cells + [TableCell(0, 1, 1, 1, BoundingBox(50, 0, 50, 50))]
    with pytest.raises(ValidationError):
        _grid(overlapping).validate()


def test_page_validate_columns():
    with pytest.raises(ValidationError):
        PageLayout(100, 100, ((0, 60), (50, 100))).validate()
    with pytest.raises(ValidationError):
        PageLayout(100, 100, ()).validate()
    region = box_region(0, 0, 10, 10).with_column(3)
    with pytest.raises(ValidationError):
        PageLayout(100, 100, ((0, 100),), (region,)).validate()


def test_region_text_list_marker():
    text = line([word(40, 0, 20, "ক"), word(70, 0, 20, "খ")])
    item = Region(RegionKind.LIST_ITEM, text.bbox, ListItemPayload("১.", 0, (text,)))
    assert region_text(item) == "১. ক খ"
    para = Region(RegionKind.PARAGRAPH, text.bbox, ParagraphPayload((text,), Alignment.CENTER))
    page = PageLayout(200, 100, ((0, 200),), (para,))
    assert page.text() == "ক খ"
    assert DocumentTree((page,), "doc").validate().pages[0] is page
