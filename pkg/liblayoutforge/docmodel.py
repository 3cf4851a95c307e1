"""
 layoutforge: geometric and document tree types, reading order

 Coordinates are integer pixels with the origin at the top left corner of
 the page. Boxes are half open: a box covers columns x .. x+w-1 and rows
 y .. y+h-1. All types are frozen and can be shared between workers.

 Copyright (C) 2026  layoutforge developers

 This work is licensed under the terms of the GNU GPL, version 3.  See
 the LICENSE file in the top-level directory.
"""
import enum
import logging
from dataclasses import dataclass, field
from typing import Optional, Tuple, Union

from liblayoutforge.errors import ValidationError

log = logging.getLogger(__name__)


@dataclass(frozen=True)
class BoundingBox:
    """Axis aligned pixel rectangle"""

    x: int
    y: int
    w: int
    h: int

    @classmethod
    def from_extent(cls, x0, y0, x1, y1):
        """Build from half open extents"""
        return cls(int(x0), int(y0), int(x1 - x0), int(y1 - y0))

    @classmethod
    def from_list(cls, values):
        """Build from [x, y, w, h]"""
        x, y, w, h = values
        return cls(int(x), int(y), int(w), int(h))

    @property
    def x1(self):
        """Exclusive right edge"""
        return self.x + self.w

    @property
    def y1(self):
        """Exclusive bottom edge"""
        return self.y + self.h

    @property
    def area(self):
        """Pixel area"""
        return self.w * self.h

    @property
    def center(self):
        """Fractional center point"""
        return (self.x + self.w / 2.0, self.y + self.h / 2.0)

    def as_list(self):
        """Serialize as [x, y, w, h]"""
        return [self.x, self.y, self.w, self.h]

    def contains(self, other):
        """True if other lies completely inside this box"""
        return (
            other.x >= self.x
            and other.y >= self.y
            and other.x1 <= self.x1
            and other.y1 <= self.y1
        )

    def contains_point(self, px, py):
        """True if the point lies inside the half open box"""
        return self.x <= px < self.x1 and self.y <= py < self.y1

    def union(self, other):
        """Smallest box containing both"""
        return BoundingBox.from_extent(
            min(self.x, other.x),
            min(self.y, other.y),
            max(self.x1, other.x1),
            max(self.y1, other.y1),
        )

    def translate(self, dx, dy):
        """Shifted copy"""
        return BoundingBox(self.x + dx, self.y + dy, self.w, self.h)

    def hoverlap(self, other):
        """Width of the horizontal overlap, negative for a gap"""
        return min(self.x1, other.x1) - max(self.x, other.x)

    def voverlap(self, other):
        """Height of the vertical overlap, negative for a gap"""
        return min(self.y1, other.y1) - max(self.y, other.y)

    def intersects(self, other):
        """True if the boxes share at least one pixel"""
        return self.hoverlap(other) > 0 and self.voverlap(other) > 0

    def validate(self, page_w=None, page_h=None):
        """Check the box invariants"""
        if self.w < 1 or self.h < 1:
            raise ValidationError(f"Box with empty extent: {self.as_list()}")
        if self.x < 0 or self.y < 0:
            raise ValidationError(f"Box with negative offset: {self.as_list()}")
        if page_w is not None and self.x1 > page_w:
            raise ValidationError(f"Box exceeds page width {page_w}: {self.as_list()}")
        if page_h is not None and self.y1 > page_h:
            raise ValidationError(f"Box exceeds page height {page_h}: {self.as_list()}")


def union_all(boxes):
    """Union of a non-empty iterable of boxes"""
    boxes = list(boxes)
    if not boxes:
        raise ValueError("union of no boxes")
    result = boxes[0]
    for box in boxes[1:]:
        result = result.union(box)
    return result


@dataclass(frozen=True)
class WordBox:
    """Word with its glyph boxes. Glyph boxes and per glyph texts are
    recognition intermediates and do not take part in equality."""

    bbox: BoundingBox
    glyph_boxes: Tuple[BoundingBox, ...] = field(default=(), compare=False)
    text: str = ""
    glyph_texts: Tuple[str, ...] = field(default=(), compare=False)


@dataclass(frozen=True)
class TextLine:
    """Words on one text line, sorted by x"""

    bbox: BoundingBox
    baseline_y: int
    words: Tuple[WordBox, ...]
    line_height: int = field(default=0, compare=False)

    @property
    def text(self):
        """Line text: word texts separated by single spaces"""
        return " ".join(w.text for w in self.words if w.text)


class RegionKind(str, enum.Enum):
    """Region tags"""

    PARAGRAPH = "paragraph"
    TABLE = "table"
    LIST_ITEM = "list_item"
    NONTEXT = "nontext"


class Alignment(str, enum.Enum):
    """Paragraph alignment"""

    LEFT = "left"
    RIGHT = "right"
    CENTER = "center"
    JUSTIFY = "justify"


class NonTextKind(str, enum.Enum):
    """Non-text region classes"""

    PICTURE = "picture"
    LOGO = "logo"
    SIGNATURE = "signature"


class TableKind(str, enum.Enum):
    """Table border classes"""

    BORDERED = "bordered"
    SEMI_BORDERED = "semi_bordered"
    BORDERLESS = "borderless"


@dataclass(frozen=True)
class ParagraphPayload:
    """Paragraph lines and alignment"""

    lines: Tuple[TextLine, ...]
    alignment: Alignment = Alignment.LEFT


@dataclass(frozen=True)
class ListItemPayload:
    """List item: marker stripped from the first line"""

    marker: str
    level: int
    lines: Tuple[TextLine, ...]


@dataclass(frozen=True)
class NonTextPayload:
    """Picture, logo or signature with the reference of its restored crop"""

    kind: NonTextKind
    image_ref: str = ""


@dataclass(frozen=True)
class TableCell:
    """One cell of a table grid"""

    row: int
    col: int
    rowspan: int
    colspan: int
    bbox: BoundingBox
    lines: Tuple[TextLine, ...] = ()

    @property
    def text(self):
        """Cell text, line texts joined by single spaces"""
        return " ".join(l.text for l in self.lines if l.text)


@dataclass(frozen=True)
class TableGrid:
    """Aligned cell grid"""

    kind: TableKind
    rows: int
    cols: int
    cells: Tuple[TableCell, ...]

    def cell_at(self, row, col):
        """Cell covering grid position (row, col)"""
        for cell in self.cells:
            if (
                cell.row <= row < cell.row + cell.rowspan
                and cell.col <= col < cell.col + cell.colspan
            ):
                return cell
        return None

    def validate(self, table_bbox=None):
        """Check the tiling invariant"""
        if self.rows < 1 or self.cols < 1:
            raise ValidationError(f"Table grid without cells: {self.rows}x{self.cols}")
        covered = [[False] * self.cols for _ in range(self.rows)]
        for cell in self.cells:
            if cell.rowspan < 1 or cell.colspan < 1:
                raise ValidationError(f"Cell with empty span at ({cell.row},{cell.col})")
            if cell.row + cell.rowspan > self.rows or cell.col + cell.colspan > self.cols:
                raise ValidationError(f"Cell ({cell.row},{cell.col}) leaves the grid")
            for row in range(cell.row, cell.row + cell.rowspan):
                for col in range(cell.col, cell.col + cell.colspan):
                    if covered[row][col]:
                        raise ValidationError(f"Cells overlap at ({row},{col})")
                    covered[row][col] = True
            if table_bbox is not None and not table_bbox.contains(cell.bbox):
                raise ValidationError(f"Cell ({cell.row},{cell.col}) outside table box")
            for line in cell.lines:
                if not cell.bbox.contains_point(*line.bbox.center):
                    raise ValidationError(
                        f"Line center outside cell ({cell.row},{cell.col})"
                    )
        if not all(all(row) for row in covered):
            raise ValidationError("Cells do not tile the grid")


Payload = Union[ParagraphPayload, ListItemPayload, NonTextPayload, TableGrid]

_PAYLOAD_TYPES = {
    RegionKind.PARAGRAPH: ParagraphPayload,
    RegionKind.TABLE: TableGrid,
    RegionKind.LIST_ITEM: ListItemPayload,
    RegionKind.NONTEXT: NonTextPayload,
}


@dataclass(frozen=True)
class Region:
    """Typed layout region. column is the index of the owning column, None
    for regions spanning more than one column."""

    kind: RegionKind
    bbox: BoundingBox
    payload: Payload
    column: Optional[int] = 0

    @property
    def lines(self):
        """Text lines of the region in reading order"""
        if self.kind == RegionKind.TABLE:
            return tuple(l for cell in self.payload.cells for l in cell.lines)
        if self.kind == RegionKind.NONTEXT:
            return ()
        return self.payload.lines

    def with_column(self, column):
        """Copy assigned to another column"""
        return Region(self.kind, self.bbox, self.payload, column)

    def validate(self, page_w=None, page_h=None):
        """Check payload kind and containment"""
        self.bbox.validate(page_w, page_h)
        if not isinstance(self.payload, _PAYLOAD_TYPES[self.kind]):
            raise ValidationError(
                f"Payload {type(self.payload).__name__} does not match kind {self.kind.value}"
            )
        for line in self.lines:
            if not self.bbox.contains(line.bbox):
                raise ValidationError(
                    f"Line {line.bbox.as_list()} outside region {self.bbox.as_list()}"
                )
            validate_line(line)
        if self.kind == RegionKind.TABLE:
            for cell in self.payload.cells:
                cell.bbox.validate(page_w, page_h)
            self.payload.validate(self.bbox)


def validate_line(line):
    """Check word ordering and containment on a text line"""
    previous = None
    for word in line.words:
        if not line.bbox.contains(word.bbox):
            raise ValidationError(
                f"Word {word.bbox.as_list()} outside line {line.bbox.as_list()}"
            )
        if previous is not None and word.bbox.x < previous.bbox.x1:
            raise ValidationError("Words overlap or are not sorted by x")
        previous = word
        xs = [g.x for g in word.glyph_boxes]
        if xs != sorted(xs):
            raise ValidationError("Glyph boxes not sorted by x")


@dataclass(frozen=True)
class PageLayout:
    """Layout of one page; regions in reading order"""

    page_w: int
    page_h: int
    columns: Tuple[Tuple[int, int], ...]
    regions: Tuple[Region, ...] = ()

    @property
    def column_count(self):
        """Number of columns"""
        return len(self.columns)

    def text(self):
        """Page text: region texts in reading order, one line per text line"""
        return "\n".join(region_text(r) for r in self.regions if region_text(r))

    def validate(self):
        """Check page level invariants"""
        if self.page_w < 1 or self.page_h < 1:
            raise ValidationError("Page without extent")
        if not self.columns:
            raise ValidationError("Page without columns")
        previous_end = None
        for x0, x1 in self.columns:
            if x1 <= x0:
                raise ValidationError(f"Empty column range [{x0}, {x1}]")
            if previous_end is not None and x0 < previous_end:
                raise ValidationError("Column ranges overlap or are unsorted")
            previous_end = x1
        for region in self.regions:
            region.validate(self.page_w, self.page_h)
            if region.column is not None and not 0 <= region.column < len(self.columns):
                raise ValidationError(f"Region assigned to unknown column {region.column}")
        return self


@dataclass(frozen=True)
class DocumentTree:
    """Pages in source order"""

    pages: Tuple[PageLayout, ...]
    source_id: str = ""

    def validate(self):
        """Validate every page"""
        for page in self.pages:
            page.validate()
        return self


def region_text(region):
    """Text content of a region, lines separated by newlines. List markers
    are emitted in front of the first line."""
    if region.kind == RegionKind.NONTEXT:
        return ""
    if region.kind == RegionKind.TABLE:
        return "\n".join(c.text for c in region.payload.cells if c.text)
    lines = [l.text for l in region.payload.lines]
    if region.kind == RegionKind.LIST_ITEM:
        if lines:
            lines[0] = f"{region.payload.marker} {lines[0]}".strip()
        else:
            lines = [region.payload.marker]
    return "\n".join(l for l in lines if l)


def assign_columns(regions, columns):
    """Assign each region to the single column its x-range overlaps; regions
    overlapping several columns are page-spanning (column None). Regions in
    a gutter go to the column with the nearest center."""
    if len(columns) <= 1:
        return [r.with_column(0) if r.column != 0 else r for r in regions]
    assigned = []
    for region in regions:
        hits = [
            idx
            for idx, (x0, x1) in enumerate(columns)
            if min(region.bbox.x1, x1) - max(region.bbox.x, x0) > 0
        ]
        if len(hits) == 1:
            column = hits[0]
        elif len(hits) > 1:
            column = None
        else:
            cx = region.bbox.center[0]
            column = min(
                range(len(columns)),
                key=lambda i: abs((columns[i][0] + columns[i][1]) / 2.0 - cx),
            )
        assigned.append(region if region.column == column else region.with_column(column))
    return assigned


def reading_order(regions, columns):
    """Column-major reading order. Page-spanning regions cut the page into
    horizontal bands; each band is read column by column (top to bottom,
    ties by x) before the spanning region that closes it."""
    if not regions:
        return []
    regions = assign_columns(list(regions), list(columns))
    spanning = sorted(
        (r for r in regions if r.column is None), key=lambda r: (r.bbox.y, r.bbox.x)
    )
    cuts = [r.bbox.y for r in spanning]

    def band(region):
        return sum(1 for y in cuts if y <= region.bbox.y)

    in_columns = sorted(
        (r for r in regions if r.column is not None),
        key=lambda r: (band(r), r.column, r.bbox.y, r.bbox.x),
    )
    ordered = []
    pos = 0
    for idx in range(len(spanning) + 1):
        while pos < len(in_columns) and band(in_columns[pos]) == idx:
            ordered.append(in_columns[pos])
            pos += 1
        if idx < len(spanning):
            ordered.append(spanning[idx])
    return ordered
