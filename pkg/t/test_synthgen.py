import json
from dataclasses import replace

import numpy as np
import pytest

from conftest import blank_page, text_spec, words
from liblayoutforge import glyphs, lib, synthgen
from liblayoutforge.docmodel import Alignment, NonTextKind, RegionKind, TableKind
from liblayoutforge.errors import AtlasError, OverlapInSpec, ValidationError


@pytest.fixture(scope="module")
def table(alphabet):
    return synthgen.grapheme_table(alphabet)


def test_parse_word(table, alphabet):
    parsed = synthgen.parse_word("ক্রমে", table)
    assert len(parsed) == 2
    assert parsed[0].root_id == alphabet.roots.index("ক")
    assert parsed[0].diacritic_id == alphabet.diacritics.index("্র")
    assert [g.root_id for g in synthgen.parse_word("কলম", table)] == [
        alphabet.roots.index(c) for c in "কলম"
    ]


def test_parse_word_outside_alphabet(table):
    with pytest.raises(ValidationError):
        synthgen.parse_word("abc", table)


def test_marker_text():
    assert synthgen.marker_text(3) == "৩."
    assert synthgen.marker_text(12) == "১২."


def test_wrap():
    measured = [synthgen._Word("w", (), (), 0, 0, 40, 24) for _ in range(5)]
    lines = synthgen.wrap(measured, lambda i: 100)
    assert [len(l) for l in lines] == [2, 2, 1]
    assert synthgen.line_width(lines[0]) == 40 + synthgen.WORD_SPACE + 40


def test_column_ranges():
    assert synthgen.SynthSpec().column_ranges() == [(96, 1144)]
    assert synthgen.SynthSpec(columns=2).column_ranges() == [(96, 584), (656, 1144)]


def test_render_clean_page(render):
    page = render(text_spec(paragraphs=2))
    assert page.image.shape == (synthgen.PAGE_H, synthgen.PAGE_W)
    assert np.array_equal(page.image == 0, page.ink)
    assert page.transform is None
    assert page.text.split() == (words(30, 0) + " " + words(30, 1)).split()
    page.truth.validate()


def test_glyph_boxes_cover_ink(render):
    page = render([synthgen.ParagraphSpec(words(10))])
    covered = np.zeros_like(page.ink)
    for line in page.truth.regions[0].lines:
        for word in line.words:
            assert len(word.glyph_boxes) == len(word.glyph_texts)
            assert "".join(word.glyph_texts) == word.text
            for box in word.glyph_boxes:
                covered[box.y : box.y1, box.x : box.x1] = True
    assert not (page.ink & ~covered).any()


def test_alignments_of_rendered_paragraphs(render):
    specs = [
        synthgen.ParagraphSpec(words(40), Alignment.JUSTIFY),
        synthgen.ParagraphSpec(words(3), Alignment.JUSTIFY),
        synthgen.ParagraphSpec(words(30), Alignment.RIGHT),
    ]
    page = render(specs)
    assert [r.payload.alignment for r in page.truth.regions] == [
        Alignment.JUSTIFY,
        Alignment.LEFT,
        Alignment.RIGHT,
    ]
    right = page.truth.regions[2]
    assert all(l.bbox.x1 == synthgen.PAGE_W - synthgen.MARGIN for l in right.lines)
    justified = page.truth.regions[0].lines
    assert all(l.bbox.x1 == synthgen.PAGE_W - synthgen.MARGIN for l in justified[:-1])


def test_list_render(render):
    page = render([synthgen.ListSpec((words(3), words(2, 4)), level=1)])
    items = page.truth.regions
    assert [r.kind for r in items] == [RegionKind.LIST_ITEM] * 2
    assert [r.payload.marker for r in items] == ["১.", "২."]
    assert items[0].bbox.x == synthgen.MARGIN + synthgen.LIST_INDENT
    assert items[0].payload.lines[0].text == words(3)


def test_bordered_table_truth(render):
    cells = (("কলম", "", "বই"), ("নদী", "গান", "জল"))
    page = render([synthgen.TableSpec(TableKind.BORDERED, cells, spans=((0, 0, 1, 2),))])
    region = page.truth.regions[0]
    grid = region.payload
    assert (grid.rows, grid.cols, len(grid.cells)) == (2, 3, 5)
    assert grid.cell_at(0, 1).text == "কলম"
    grid.validate(region.bbox)
    assert page.ink[region.bbox.y, region.bbox.x : region.bbox.x1].all()


@pytest.mark.parametrize(
    "spec",
    [
        synthgen.TableSpec(TableKind.BORDERLESS, (("কলম", "বই"),), spans=((0, 0, 1, 2),)),
        synthgen.TableSpec(TableKind.BORDERLESS, (("কলম", ""),)),
        synthgen.TableSpec(TableKind.BORDERED, (("কলম", "বই"), ("জল",))),
        synthgen.TableSpec(TableKind.BORDERED, (("কলম", "বই"),), spans=((0, 1, 1, 2),)),
    ],
)
def test_invalid_tables(render, spec):
    with pytest.raises(ValidationError):
        render([spec])


@pytest.mark.parametrize(
    "elements",
    [
        [synthgen.ParagraphSpec(words(5), column=2)],
        [synthgen.BlockSpec(NonTextKind.PICTURE, 2000, 100)],
        [synthgen.BlockSpec(NonTextKind.PICTURE, 400, 1000), synthgen.BlockSpec(NonTextKind.PICTURE, 400, 1000)],
        [synthgen.ParagraphSpec("কলম" * 80)],
    ],
)
def test_overlap_in_spec(render, elements):
    with pytest.raises(OverlapInSpec):
        render(elements)


def test_signature_below_letter_head(render):
    page = render([synthgen.BlockSpec(NonTextKind.SIGNATURE, 240, 90)])
    assert page.truth.regions[0].bbox.y > 0.15 * synthgen.PAGE_H


def test_blocks_fill_their_boxes():
    assert synthgen.picture_block(10, 6).mean() == pytest.approx(0.5, abs=0.1)
    logo = synthgen.logo_block(81)
    assert logo[40, 0] and not logo[40, 40]
    signature = synthgen.signature_block(240, 90)
    assert signature.any(axis=1)[2:-2].all()
    assert not signature.all(axis=1).any()


def test_inject_noise():
    img = blank_page(100, 50)
    assert np.array_equal(synthgen.inject_noise(img, 0.0), img)
    noisy = synthgen.inject_noise(img, 0.1, seed=3)
    assert int((noisy == 0).sum()) == 500
    assert np.array_equal(noisy, synthgen.inject_noise(img, 0.1, seed=3))
    with pytest.raises(ValueError):
        synthgen.inject_noise(img, 1.5)


def test_apply_geometry():
    img = blank_page(100, 50)
    img[10:20, 10:20] = 0
    out, matrix = synthgen.apply_geometry(img)
    assert np.array_equal(out, img)
    assert np.allclose(matrix, np.eye(3))
    with pytest.raises(ValueError):
        synthgen.apply_geometry(img, 20.0)


def test_random_homography_keeps_top_left_corner():
    values = synthgen.random_homography(4, 600, 400)
    matrix = np.asarray(values).reshape(3, 3)
    origin = matrix @ np.array([0.0, 0.0, 1.0])
    assert np.allclose(origin[:2] / origin[2], [0.0, 0.0], atol=1e-6)
    corner = matrix @ np.array([600.0, 400.0, 1.0])
    x, y = corner[:2] / corner[2]
    assert 600 * 0.98 - 1e-6 <= x <= 600 and 400 * 0.98 - 1e-6 <= y <= 400
    assert values == synthgen.random_homography(4, 600, 400)


def test_render_page_applies_distortions(atlas):
    spec = text_spec(paragraphs=1, rotation=2.0, noise=0.01, seed=9)
    page = synthgen.render_page(spec, atlas)
    clean = synthgen.render_page(text_spec(paragraphs=1), atlas)
    assert page.transform is not None and page.transform.shape == (3, 3)
    assert not np.array_equal(page.image, clean.image)
    assert page.truth == clean.truth


@pytest.mark.parametrize("glyph_px", [12, 32, 0])
def test_glyph_size_must_be_atlas_multiple(atlas, glyph_px):
    with pytest.raises(ValidationError):
        synthgen.render_page(text_spec(paragraphs=1, glyph_px=glyph_px), atlas)


def test_double_glyph_size(render):
    page = render([synthgen.ParagraphSpec(words(10))], glyph_px=2 * glyphs.GLYPH_PX)
    covered = np.zeros_like(page.ink)
    for line in page.truth.regions[0].lines:
        assert line.bbox.h == 2 * glyphs.GLYPH_PX
        for word in line.words:
            for box in word.glyph_boxes:
                assert (box.w, box.h) == (2 * glyphs.CELL_W, 2 * glyphs.GLYPH_PX)
                covered[box.y : box.y1, box.x : box.x1] = True
    assert not (page.ink & ~covered).any()
    single = render([synthgen.ParagraphSpec(words(10))])
    assert page.ink.sum() > 3 * single.ink.sum()


def test_render_with_saved_atlas(atlas, tmp_path):
    target = str(tmp_path / "atlas")
    glyphs.save_atlas(atlas, target)
    spec = synthgen.SynthSpec(elements=(synthgen.ParagraphSpec(words(12)),))
    page = synthgen.render_page(replace(spec, atlas=target), atlas)
    clean = synthgen.render_page(spec, atlas)
    assert np.array_equal(page.image, clean.image)
    assert page.truth == clean.truth


def test_render_uses_atlas_of_spec(atlas, alphabet, tmp_path):
    target = tmp_path / "atlas"
    glyphs.save_atlas(atlas, str(target))
    solid = np.zeros((glyphs.GLYPH_PX, glyphs.CELL_W), dtype=np.uint8)
    lib.write_file(str(target / f"root_{alphabet.roots.index('ক')}.png"), lib.png_bytes(solid))
    spec = synthgen.SynthSpec(elements=(synthgen.ParagraphSpec("কলম"),), atlas=str(target))
    page = synthgen.render_page(spec, atlas)
    box = page.truth.regions[0].lines[0].words[0].glyph_boxes[0]
    assert page.ink[box.y : box.y1, box.x : box.x1].all()
    clean = synthgen.render_page(replace(spec, atlas=None), atlas)
    assert not clean.ink[box.y : box.y1, box.x : box.x1].all()


def test_render_with_missing_atlas(atlas, tmp_path):
    spec = text_spec(paragraphs=1, atlas=str(tmp_path / "none"))
    with pytest.raises(AtlasError):
        synthgen.render_page(spec, atlas)


def test_load_spec_resolves_atlas_path(tmp_path):
    path = tmp_path / "spec.json"
    path.write_text(json.dumps({"atlas": "glyphs"}), encoding="utf-8")
    assert synthgen.load_spec(str(path)).atlas == str(tmp_path / "glyphs")
    path.write_text(json.dumps({"atlas": "/srv/glyphs"}), encoding="utf-8")
    assert synthgen.load_spec(str(path)).atlas == "/srv/glyphs"


@pytest.mark.parametrize("seed", range(4))
def test_random_spec_is_deterministic(atlas, seed):
    spec = synthgen.random_spec(seed, atlas)
    assert spec == synthgen.random_spec(seed, atlas)
    assert spec.elements
    page = synthgen.render_page(spec, atlas)
    page.truth.validate()


def test_random_spec_two_columns(atlas):
    spec = synthgen.random_spec(11, atlas, columns=2)
    assert spec.columns == 2
    page = synthgen.render_page(spec, atlas)
    assert page.truth.column_count == 2
    assert any(r.column is None for r in page.truth.regions)


@pytest.mark.parametrize("seed", range(4))
def test_spec_dict_round_trip(atlas, seed):
    spec = synthgen.random_spec(seed, atlas)
    values = json.loads(json.dumps(synthgen.spec_to_dict(spec), ensure_ascii=False))
    assert synthgen.spec_from_dict(values) == spec


def test_spec_from_dict_defaults():
    spec = synthgen.spec_from_dict({"elements": [{"type": "paragraph", "text": "কলম"}]})
    assert spec == synthgen.SynthSpec(elements=(synthgen.ParagraphSpec("কলম"),))


@pytest.mark.parametrize(
    "values",
    [
        {"elements": [{"type": "circle"}]},
        {"elements": [{"type": "paragraph"}]},
        {"elements": [{"type": "nontext", "kind": "chart"}]},
        {"noise": 2.0},
        {"page": [100]},
    ],
)
def test_spec_from_dict_rejects(values):
    with pytest.raises(ValidationError):
        synthgen.spec_from_dict(values)


def test_load_spec(tmp_path):
    path = tmp_path / "spec.json"
    path.write_text(json.dumps({"columns": 2, "seed": 4}), encoding="utf-8")
    assert synthgen.load_spec(str(path)) == synthgen.SynthSpec(seed=4, columns=2)
    path.write_text("{", encoding="utf-8")
    with pytest.raises(ValidationError):
        synthgen.load_spec(str(path))
    with pytest.raises(ValidationError):
        synthgen.load_spec(str(tmp_path / "missing.json"))
