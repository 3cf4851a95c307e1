"""
 layoutforge: procedural glyph atlas

 Every class of the alphabet gets a distinct bar pattern drawn on a fixed
 cell. Letters sit on the headline (matra) with a stem on the left and a
 spine at the bottom of the body; the root code is a set of bars hanging
 from the matra and rising from the spine. Vowel signs are bars below the
 spine, consonant diacritics bars above the matra, so every mark touches
 its letter and a word stays one 8-connected component. Digits and
 punctuation have no matra and no stem and are stored tight cropped.

 Cell rows for the default 24 px glyph height:

   0..4    upper zone (consonant diacritics)
   5..6    matra
   7..18   body, spine on rows 17..18
   19..23  lower zone (vowel signs)

 Copyright (C) 2026  layoutforge developers

 This work is licensed under the terms of the GNU GPL, version 3.  See
 the LICENSE file in the top-level directory.
"""
import os
import logging
import itertools

import numpy as np
from PIL import Image

from liblayoutforge import lib
from liblayoutforge.errors import AtlasError

log = logging.getLogger(__name__)

GLYPH_PX = 24
STROKE = max(2, GLYPH_PX // 12)
PAD = 1
BODY_W = 12
CELL_W = BODY_W + 2 * PAD

UPPER = (0, 5)
MATRA = (5, 7)
BODY = (7, 19)
SPINE = (17, 19)
LOWER = (19, 24)

STEM_COLS = (0, 2)
SLOT_COLS = (3, 6, 9)

# tight glyphs: spine plus bars of up to three units
TIGHT_H = SPINE[1] - SPINE[0] + 3 * STROKE
TIGHT_TOP = SPINE[1] - TIGHT_H

HEADS = ("root", "modifier", "diacritic")


def _cols(body_col):
    """Cell column range of a two pixel wide body slot"""
    start = PAD + body_col
    return slice(start, start + STROKE)


def base_cell():
    """Matra, stem and spine shared by every letter"""
    cell = np.zeros((GLYPH_PX, CELL_W), dtype=bool)
    cell[MATRA[0] : MATRA[1], :] = True
    cell[:, PAD + STEM_COLS[0] : PAD + STEM_COLS[1]] = True
    cell[SPINE[0] : SPINE[1], PAD : PAD + BODY_W] = True
    return cell


def root_cell(code):
    """Letter cell; code holds (hanging, rising) bar units per slot"""
    cell = base_cell()
    for col, (top, bottom) in zip(SLOT_COLS, code):
        if top:
            cell[BODY[0] : BODY[0] + top * STROKE, _cols(col)] = True
        if bottom:
            cell[SPINE[0] - bottom * STROKE : SPINE[0], _cols(col)] = True
    return cell


def tight_glyph(code):
    """Digit or punctuation glyph: spine with bars rising from it"""
    glyph = np.zeros((TIGHT_H, BODY_W), dtype=bool)
    glyph[TIGHT_H - STROKE :, :] = True
    for col, height in zip(SLOT_COLS, code):
        if height:
            glyph[TIGHT_H - STROKE - height * STROKE : TIGHT_H - STROKE, col : col + STROKE] = True
    return glyph


def upper_mark(code):
    """Consonant diacritic bars standing on the matra"""
    mark = np.zeros((GLYPH_PX, CELL_W), dtype=bool)
    for col, height in zip(SLOT_COLS, code):
        if height:
            mark[MATRA[0] - height * STROKE : MATRA[0], _cols(col)] = True
    return mark


def lower_mark(code):
    """Vowel sign bars hanging from the spine"""
    mark = np.zeros((GLYPH_PX, CELL_W), dtype=bool)
    for col, height in zip(SLOT_COLS, code):
        if height:
            mark[LOWER[0] : LOWER[0] + height * STROKE, _cols(col)] = True
    return mark


def choose_codes(candidates, draw, count):
    """Greedy code selection in candidate order: a candidate is taken when its
    pixel Hamming distance to every chosen code reaches the separation. The
    largest separation that still yields count codes wins."""
    rendered = np.array([draw(code).ravel() for code in candidates])
    for separation in range(4 * STROKE * STROKE, 0, -STROKE * STROKE):
        chosen = []
        for idx in range(len(candidates)):
            if chosen:
                dist = np.count_nonzero(rendered[chosen] != rendered[idx], axis=1)
                if dist.min() < separation:
                    continue
            chosen.append(idx)
            if len(chosen) == count:
                log.debug("Selected [%d] codes with separation [%d] px", count, separation)
                return [candidates[i] for i in chosen]
    raise AtlasError(f"Unable to find {count} distinct glyph codes")


def _root_candidates():
    states = [(a, b) for a in range(4) for b in range(4) if a + b <= 3]
    return list(itertools.product(states, repeat=len(SLOT_COLS)))


def _tight_candidates():
    return [
        code for code in itertools.product(range(4), repeat=len(SLOT_COLS)) if max(code) == 3
    ]


def _mark_candidates():
    return [code for code in itertools.product(range(3), repeat=len(SLOT_COLS)) if any(code)]


class GlyphAtlas:
    """Templates per (head, class id). Root templates of letters are full
    cells, digit and punctuation templates are tight crops; modifier and
    diacritic templates are the bare letter cell carrying only that mark."""

    def __init__(self, templates, alphabet):
        self.log = logging.getLogger(__name__)
        self.alphabet = alphabet
        self.templates = {key: np.asarray(value, dtype=bool) for key, value in templates.items()}
        missing = [key for key in self.required_keys() if key not in self.templates]
        if missing:
            raise AtlasError(f"Glyph atlas misses classes: {missing[:5]} ({len(missing)} total)")
        base = base_cell()
        for key, template in self.templates.items():
            expected = (TIGHT_H, BODY_W) if self.is_tight(key) else (GLYPH_PX, CELL_W)
            if template.shape != expected:
                raise AtlasError(f"Template {key} has shape {template.shape}, expected {expected}")
        self.base = base
        self.marks = {
            key: value & ~base for key, value in self.templates.items() if key[0] != "root"
        }

    def required_keys(self):
        """All (head, class id) pairs the alphabet defines"""
        keys = [("root", idx) for idx in range(len(self.alphabet.roots))]
        keys += [("modifier", idx) for idx in range(len(self.alphabet.modifiers))]
        keys += [("diacritic", idx) for idx in range(len(self.alphabet.diacritics))]
        return keys

    def is_tight(self, key):
        """True for tight cropped digit and punctuation templates"""
        return key[0] == "root" and self.alphabet.is_tight(key[1])

    def template(self, head, class_id):
        """Template bitmap"""
        try:
            return self.templates[(head, class_id)]
        except KeyError as errmsg:
            raise AtlasError(f"No template for [{head} {class_id}]") from errmsg

    def render(self, root_id, modifier_id=None, diacritic_id=None):
        """Glyph cell for a grapheme"""
        if self.alphabet.is_tight(root_id):
            cell = np.zeros((GLYPH_PX, CELL_W), dtype=bool)
            cell[TIGHT_TOP : SPINE[1], PAD : PAD + BODY_W] = self.template("root", root_id)
            return cell
        cell = self.template("root", root_id).copy()
        if modifier_id is not None:
            cell |= self.marks[("modifier", modifier_id)]
        if diacritic_id is not None:
            cell |= self.marks[("diacritic", diacritic_id)]
        return cell

    def ink_box(self, root_id):
        """(x0, y0, x1, y1) of the ink of a glyph inside its cell; letters
        cover the whole cell, tight glyphs only their crop"""
        if self.alphabet.is_tight(root_id):
            return (PAD, TIGHT_TOP, PAD + BODY_W, SPINE[1])
        return (0, 0, CELL_W, GLYPH_PX)


def build_atlas(alphabet):
    """Procedural atlas for every class of the alphabet"""
    tight_ids = [idx for idx in range(len(alphabet.roots)) if alphabet.is_tight(idx)]
    letter_ids = [idx for idx in range(len(alphabet.roots)) if not alphabet.is_tight(idx)]
    templates = {}
    root_codes = choose_codes(_root_candidates(), root_cell, len(letter_ids))
    for class_id, code in zip(letter_ids, root_codes):
        templates[("root", class_id)] = root_cell(code)
    tight_codes = choose_codes(_tight_candidates(), tight_glyph, len(tight_ids))
    for class_id, code in zip(tight_ids, tight_codes):
        templates[("root", class_id)] = tight_glyph(code)
    base = base_cell()
    lower_codes = choose_codes(_mark_candidates(), lower_mark, len(alphabet.modifiers))
    for class_id, code in enumerate(lower_codes):
        templates[("modifier", class_id)] = base | lower_mark(code)
    upper_codes = choose_codes(_mark_candidates(), upper_mark, len(alphabet.diacritics))
    for class_id, code in enumerate(upper_codes):
        templates[("diacritic", class_id)] = base | upper_mark(code)
    log.debug("Built glyph atlas with [%d] templates", len(templates))
    return GlyphAtlas(templates, alphabet)


def save_atlas(atlas, target):
    """Write the atlas as head_classid.png crops, ink black on white"""
    os.makedirs(target, exist_ok=True)
    for (head, class_id), template in sorted(atlas.templates.items()):
        pixels = np.where(template, 0, 255).astype(np.uint8)
        lib.write_file(os.path.join(target, f"{head}_{class_id}.png"), lib.png_bytes(pixels))
    log.info("Saved glyph atlas: [%s]", target)


def load_atlas(source, alphabet):
    """Read a glyph atlas directory"""
    if not os.path.isdir(source):
        raise AtlasError(f"Glyph atlas directory not found: [{source}]")
    templates = {}
    for head, count in (
        ("root", len(alphabet.roots)),
        ("modifier", len(alphabet.modifiers)),
        ("diacritic", len(alphabet.diacritics)),
    ):
        for class_id in range(count):
            path = os.path.join(source, f"{head}_{class_id}.png")
            if not os.path.exists(path):
                continue
            try:
                with Image.open(path) as image:
                    image.load()
                    templates[(head, class_id)] = lib.gray_from_pil(image) < 128
            except OSError as errmsg:
                raise AtlasError(f"Unable to read template [{path}]: [{errmsg}]") from errmsg
    log.info("Loaded [%d] glyph templates from [%s]", len(templates), source)
    return GlyphAtlas(templates, alphabet)
