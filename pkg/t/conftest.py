import os
import sys

import fitz
import numpy as np
import pytest

sys.path.insert(0, os.path.join(os.path.dirname(__file__), ".."))

from liblayoutforge import engine, lib, synthgen
from liblayoutforge.recognize import load_alphabet


WORDS = (
    "আমার", "বাংলা", "দেশ", "কলম", "বই", "কবিতা", "মানুষ", "নদী", "গান",
    "পাখি", "সকাল", "রাতে", "জল", "ফুল", "শিশু", "লেখা", "পথ", "ঘর", "মেঘ",
)


def words(count, offset=0):
    """Deterministic text of count words"""
    return " ".join(WORDS[(offset + idx * 7) % len(WORDS)] for idx in range(count))


def text_spec(paragraphs=4, per_paragraph=30, **kwargs):
    """Page of left aligned paragraphs; at least 50 words for skew
    estimation"""
    elements = tuple(
        synthgen.ParagraphSpec(words(per_paragraph, idx)) for idx in range(paragraphs)
    )
    return synthgen.SynthSpec(elements=elements, **kwargs)


@pytest.fixture(scope="session")
def alphabet():
    return load_alphabet()


@pytest.fixture(scope="session")
def atlas():
    return engine.default_atlas()


@pytest.fixture(scope="session")
def page_engine(atlas):
    return engine.Engine(atlas=atlas)


@pytest.fixture
def render(atlas):
    """Render a SynthSpec or a list of elements"""

    def _render(spec, source_id="page", **kwargs):
        if not isinstance(spec, synthgen.SynthSpec):
            spec = synthgen.SynthSpec(elements=tuple(spec), **kwargs)
        return synthgen.render_page(spec, atlas, source_id)

    return _render


def blank_page(w=200, h=100):
    """White 8 bit page"""
    return np.full((h, w), 255, dtype=np.uint8)


def text_block_page(words=3, w=400, h=120):
    """Small page carrying one line of black bars, enough for a one line
    layout"""
    img = blank_page(w, h)
    for idx in range(words):
        x = 20 + idx * 60
        img[40:64, x : x + 40] = 0
        img[46:58, x + 4 : x + 36] = 255
    return img


def pdf_bytes(pages):
    """PDF with one page per raster image, at 72 dpi page size"""
    doc = fitz.open()
    for img in pages:
        h, w = img.shape[:2]
        page = doc.new_page(width=w, height=h)
        page.insert_image(fitz.Rect(0, 0, w, h), stream=lib.png_bytes(img))
    data = doc.tobytes()
    doc.close()
    return data


def empty_pdf_bytes():
    """Valid PDF with a page tree of zero pages"""
    objects = [
        b"<< /Type /Catalog /Pages 2 0 R >>",
        b"<< /Type /Pages /Kids [] /Count 0 >>",
    ]
    out = bytearray(b"%PDF-1.4\n")
    offsets = []
    for idx, body in enumerate(objects, 1):
        offsets.append(len(out))
        out += b"%d 0 obj\n" % idx + body + b"\nendobj\n"
    xref = len(out)
    out += b"xref\n0 %d\n" % (len(objects) + 1)
    out += b"0000000000 65535 f \n"
    for offset in offsets:
        out += b"%010d 00000 n \n" % offset
    out += b"trailer\n<< /Size %d /Root 1 0 R >>\n" % (len(objects) + 1)
    out += b"startxref\n%d\n%%%%EOF\n" % xref
    return bytes(out)
