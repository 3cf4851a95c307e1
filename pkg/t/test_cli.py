import json
import os

import pytest
from PIL import Image

from conftest import pdf_bytes, text_block_page, words
from liblayoutforge import cli, glyphs, lib, reconstruct, synthgen


@pytest.fixture
def small_page(tmp_path):
    """Synthesized 600x500 page with two paragraphs; returns its directory"""
    spec = {
        "page": [600, 500],
        "margin": 40,
        "elements": [
            {"type": "paragraph", "text": words(20)},
            {"type": "paragraph", "text": words(12, 3), "alignment": "center"},
        ],
    }
    spec_path = tmp_path / "spec.json"
    spec_path.write_text(json.dumps(spec, ensure_ascii=False), encoding="utf-8")
    out = tmp_path / "synth"
    assert cli.main(["synth", "--spec", str(spec_path), "--out", str(out)]) == 0
    return out


def test_no_arguments_is_usage_error():
    with pytest.raises(SystemExit) as failure:
        cli.main([])
    assert failure.value.code == 2


def test_eval_needs_inputs():
    with pytest.raises(SystemExit) as failure:
        cli.main(["eval", "--gt", "somewhere"])
    assert failure.value.code == 2


def test_unknown_doc_type_is_usage_error(tmp_path):
    with pytest.raises(SystemExit) as failure:
        cli.main(["process", "x.png", "--out", str(tmp_path), "--doc-type", "newspaper"])
    assert failure.value.code == 2


def test_eval_scores(tmp_path, capsys):
    scores = {
        "computer_compose": [99.56, 90.06],
        "letterpress": [99.33, 88.53],
        "typewriter": [97.98, 83.38],
        "handwritten": [95.32, 86.84],
    }
    path = tmp_path / "scores.json"
    path.write_text(json.dumps(scores), encoding="utf-8")
    assert cli.main(["eval", "--scores", str(path)]) == 0
    last = capsys.readouterr().out.splitlines()[-1].split()
    assert last == ["Average", "98.05%", "87.20%"]
    assert cli.main(["eval", "--scores", str(path), "--json"]) == 0
    report = json.loads(capsys.readouterr().out)
    assert report["average"] == {"cm_accuracy": 98.05, "lev_accuracy": 87.2}


def test_eval_bad_scores(tmp_path):
    path = tmp_path / "scores.json"
    path.write_text('{"letterpress": 5}', encoding="utf-8")
    assert cli.main(["eval", "--scores", str(path)]) == 1


def test_eval_corpus(tmp_path, capsys):
    for root, text in (("gt", "কলম বই"), ("pred", "কলম বই")):
        target = tmp_path / root / "letterpress"
        target.mkdir(parents=True)
        (target / "a.txt").write_text(text, encoding="utf-8")
    assert cli.main(["eval", "--gt", str(tmp_path / "gt"), "--pred", str(tmp_path / "pred")]) == 0
    assert "100.00%" in capsys.readouterr().out


def test_synth_outputs(small_page):
    assert sorted(os.listdir(small_page)) == ["mask.png", "page.png", "spec.json", "truth.json", "truth.txt"]
    with Image.open(small_page / "page.png") as page:
        assert page.size == (600, 500)
    doc = reconstruct.parse_layout_json((small_page / "truth.json").read_bytes())
    assert len(doc.pages[0].regions) == 2
    text = (small_page / "truth.txt").read_text(encoding="utf-8")
    assert text.split() == (words(20) + " " + words(12, 3)).split()
    spec = synthgen.load_spec(str(small_page / "spec.json"))
    assert (spec.page_w, spec.page_h, spec.margin) == (600, 500, 40)


def test_synth_random_seed(tmp_path, atlas):
    out = tmp_path / "seeded"
    assert cli.main(["synth", "--seed", "5", "--out", str(out)]) == 0
    spec = synthgen.load_spec(str(out / "spec.json"))
    assert spec == synthgen.random_spec(5, atlas)


def test_synth_bad_spec(tmp_path):
    path = tmp_path / "spec.json"
    path.write_text('{"elements": [{"type": "circle"}]}', encoding="utf-8")
    assert cli.main(["synth", "--spec", str(path), "--out", str(tmp_path / "out")]) == 1


def test_process_recovers_synthetic_text(small_page, tmp_path):
    out = tmp_path / "text"
    args = ["process", str(small_page / "page.png"), "--out", str(out), "--format", "text"]
    assert cli.main(args) == 0
    text = (out / "document.txt").read_text(encoding="utf-8")
    expected = (small_page / "truth.txt").read_text(encoding="utf-8")
    assert text.split() == expected.split()
    assert json.loads((out / "config.json").read_text(encoding="utf-8"))


def test_process_is_deterministic(small_page, tmp_path):
    outputs = []
    for run in ("first", "second"):
        out = tmp_path / run
        assert cli.main(["process", str(small_page / "page.png"), "--out", str(out), "--workers", "2"]) == 0
        outputs.append((out / "layout.json").read_bytes())
    assert outputs[0] == outputs[1]
    doc = reconstruct.parse_layout_json(outputs[0])
    assert doc.source_id == "page"
    assert [r.kind.value for r in doc.pages[0].regions] == ["paragraph", "paragraph"]


def test_process_html(small_page, tmp_path):
    out = tmp_path / "html"
    args = ["process", str(small_page / "page.png"), "--out", str(out), "--format", "html", "--source-id", "doc"]
    assert cli.main(args) == 0
    data = (out / "document.html").read_text(encoding="utf-8")
    assert "<title>doc</title>" in data
    assert 'style="text-align:center"' in data


def test_layout_overlay(small_page, tmp_path):
    out = tmp_path / "layout"
    assert cli.main(["layout", str(small_page / "page.png"), "--out", str(out)]) == 0
    assert sorted(os.listdir(out)) == ["layout.json", "overlay_p0.png"]
    with Image.open(out / "overlay_p0.png") as overlay:
        assert overlay.size == (600, 500)
        assert overlay.mode == "RGB"


def test_process_missing_input(tmp_path):
    assert cli.main(["process", str(tmp_path / "none.png"), "--out", str(tmp_path)]) == 1


def test_process_unsupported_input(tmp_path):
    path = tmp_path / "page.gif"
    path.write_bytes(b"GIF89a")
    assert cli.main(["process", str(path), "--out", str(tmp_path / "out")]) == 1


def test_process_pdf(tmp_path):
    path = tmp_path / "doc.pdf"
    path.write_bytes(pdf_bytes([text_block_page(), text_block_page(w=300)]))
    out = tmp_path / "out"
    assert cli.main(["process", str(path), "--out", str(out), "--dpi", "72"]) == 0
    doc = reconstruct.parse_layout_json((out / "layout.json").read_bytes())
    assert [p.page_w for p in doc.pages] == [400, 300]
    assert doc.source_id == "doc"


def test_status_without_service(tmp_path):
    assert cli.main(["status", "abc", "--url", "http://127.0.0.1:9"]) == 1


def test_mask_matches_page(small_page):
    mask = lib.read_png(str(small_page / "mask.png"))
    page = lib.read_png(str(small_page / "page.png"))
    assert ((mask == 255) == (page == 0)).all()


def test_process_with_saved_atlas(small_page, atlas, tmp_path):
    glyph_dir = tmp_path / "atlas"
    glyphs.save_atlas(atlas, str(glyph_dir))
    out = tmp_path / "text"
    args = ["process", str(small_page / "page.png"), "--out", str(out), "--format", "text", "--atlas", str(glyph_dir)]
    assert cli.main(args) == 0
    expected = (small_page / "truth.txt").read_text(encoding="utf-8")
    assert (out / "document.txt").read_text(encoding="utf-8").split() == expected.split()


def test_missing_atlas(small_page, tmp_path):
    missing = str(tmp_path / "none")
    assert cli.main(["layout", str(small_page / "page.png"), "--out", str(tmp_path / "out"), "--atlas", missing]) == 1
    assert cli.main(["synth", "--seed", "2", "--out", str(tmp_path / "synth"), "--atlas", missing]) == 1


def test_synth_records_atlas(atlas, tmp_path):
    glyph_dir = tmp_path / "atlas"
    glyphs.save_atlas(atlas, str(glyph_dir))
    out = tmp_path / "seeded"
    assert cli.main(["synth", "--seed", "5", "--out", str(out), "--atlas", str(glyph_dir)]) == 0
    spec = synthgen.load_spec(str(out / "spec.json"))
    assert spec.atlas == str(glyph_dir)
    assert synthgen.render_page(spec, atlas).text == (out / "truth.txt").read_text(encoding="utf-8").rstrip("\n")


def test_serve_atlas_option():
    args = cli.build_parser().parse_args(["serve", "--atlas", "glyphs"])
    assert args.atlas == "glyphs"
