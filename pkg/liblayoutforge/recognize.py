"""
 layoutforge: character segmentation, glyph recognition and grapheme
 composition

 Copyright (C) 2026  layoutforge developers

 This work is licensed under the terms of the GNU GPL, version 3.  See
 the LICENSE file in the top-level directory.
"""
import os
import abc
import logging
import unicodedata
from dataclasses import dataclass, replace
from typing import Optional, Tuple

import numpy as np

from liblayoutforge import glyphs
from liblayoutforge.config import RuleConfig
from liblayoutforge.docmodel import BoundingBox, WordBox, union_all
from liblayoutforge.errors import AlphabetError, AtlasError, NoInk, RangeError

log = logging.getLogger(__name__)

ROOT_COUNT = 207
MODIFIER_COUNT = 10
DIACRITIC_COUNT = 6

VIRAMA = "্"
NUKTA = "়"
CONSONANTS = (0x0995, 0x09B9)
VOWELS = (0x0985, 0x0994)
DIGITS = (0x09E6, 0x09EF)
SIGNS = ("ৎ", "ং", "ঃ")

DEFAULT_ALPHABET = os.path.join(os.path.dirname(__file__), "data", "alphabet.csv")


def _in(cp, bounds):
    return bounds[0] <= cp <= bounds[1]


@dataclass(frozen=True)
class AlphabetSpec:
    """Class id to codepoint sequence, per recognition head"""

    roots: Tuple[str, ...]
    modifiers: Tuple[str, ...]
    diacritics: Tuple[str, ...]

    def head(self, name):
        """Classes of a head by name"""
        return {"root": self.roots, "modifier": self.modifiers, "diacritic": self.diacritics}[name]

    def root_kind(self, root_id):
        """vowel, consonant, conjunct, digit, sign or symbol"""
        text = self.roots[root_id]
        first = ord(text[0])
        if VIRAMA in text:
            return "conjunct"
        if len(text) == 1 and _in(first, VOWELS):
            return "vowel"
        if _in(first, CONSONANTS) and (len(text) == 1 or text[1:] == NUKTA):
            return "consonant"
        if len(text) == 1 and _in(first, DIGITS):
            return "digit"
        if text in SIGNS:
            return "sign"
        return "symbol"

    def is_tight(self, root_id):
        """Digits and punctuation are drawn without matra"""
        return self.root_kind(root_id) in ("digit", "symbol")

    def accepts_modifier(self, root_id):
        """Vowel signs attach to consonants and conjuncts"""
        return self.root_kind(root_id) in ("consonant", "conjunct")

    def accepts_diacritic(self, root_id):
        """Consonant diacritics need a plain consonant at both ends"""
        text = self.roots[root_id]
        return _in(ord(text[0]), CONSONANTS) and _in(ord(text[-1]), CONSONANTS)


def _parse_codepoints(field, lineno):
    try:
        cps = [int(tok, 16) for tok in field.split()]
    except ValueError as errmsg:
        raise AlphabetError(f"Line {lineno}: invalid codepoint list [{field}]") from errmsg
    if not cps:
        raise AlphabetError(f"Line {lineno}: empty codepoint list")
    for cp in cps:
        if cp > 0x10FFFF or 0xD800 <= cp <= 0xDFFF:
            raise AlphabetError(f"Line {lineno}: invalid codepoint [{cp:04X}]")
        if unicodedata.category(chr(cp)) == "Cn":
            raise AlphabetError(f"Line {lineno}: unassigned codepoint [{cp:04X}]")
    return "".join(chr(cp) for cp in cps)


def load_alphabet(path=None):
    """Read and validate the alphabet mapping file"""
    path = path or DEFAULT_ALPHABET
    try:
        with open(path, "r", encoding="utf-8") as alphabet_file:
            lines = alphabet_file.read().splitlines()
    except (OSError, UnicodeDecodeError) as errmsg:
        raise AlphabetError(f"Unable to read alphabet [{path}]: [{errmsg}]") from errmsg
    heads = {"root": {}, "modifier": {}, "diacritic": {}}
    for lineno, line in enumerate(lines, 1):
        line = line.strip()
        if not line or line.startswith("#"):
            continue
        parts = line.split(",")
        if len(parts) != 3:
            raise AlphabetError(f"Line {lineno}: expected head,class_id,codepoints")
        head, class_id, codepoints = parts
        if head not in heads:
            raise AlphabetError(f"Line {lineno}: unknown head [{head}]")
        try:
            class_id = int(class_id)
        except ValueError as errmsg:
            raise AlphabetError(f"Line {lineno}: invalid class id [{class_id}]") from errmsg
        if class_id in heads[head]:
            raise AlphabetError(f"Line {lineno}: duplicate class [{head} {class_id}]")
        heads[head][class_id] = _parse_codepoints(codepoints, lineno)
    expected = {"root": ROOT_COUNT, "modifier": MODIFIER_COUNT, "diacritic": DIACRITIC_COUNT}
    for head, count in expected.items():
        if sorted(heads[head]) != list(range(count)):
            raise AlphabetError(
                f"Head [{head}] needs class ids 0..{count - 1}, found {len(heads[head])}"
            )
        values = list(heads[head].values())
        if len(set(values)) != len(values):
            raise AlphabetError(f"Head [{head}] maps two classes to the same sequence")
    log.debug("Loaded alphabet: [%s]", path)
    return AlphabetSpec(
        tuple(heads["root"][i] for i in range(ROOT_COUNT)),
        tuple(heads["modifier"][i] for i in range(MODIFIER_COUNT)),
        tuple(heads["diacritic"][i] for i in range(DIACRITIC_COUNT)),
    )


@dataclass(frozen=True)
class GraphemeSpec:
    """One recognized grapheme with per head confidence"""

    root_id: int
    modifier_id: Optional[int] = None
    diacritic_id: Optional[int] = None
    root_conf: float = 1.0
    modifier_conf: float = 1.0
    diacritic_conf: float = 1.0

    @property
    def confidence(self):
        """Combined confidence"""
        return self.root_conf * self.modifier_conf * self.diacritic_conf

    @property
    def ids(self):
        """(root, modifier, diacritic) ids"""
        return (self.root_id, self.modifier_id, self.diacritic_id)


def check_grapheme(g, alphabet):
    """Raise RangeError for ids outside the alphabet or marks the root
    cannot carry"""
    if not 0 <= g.root_id < len(alphabet.roots):
        raise RangeError(f"Root id out of range: [{g.root_id}]")
    if g.modifier_id is not None:
        if not 0 <= g.modifier_id < len(alphabet.modifiers):
            raise RangeError(f"Modifier id out of range: [{g.modifier_id}]")
        if not alphabet.accepts_modifier(g.root_id):
            raise RangeError(f"Root [{g.root_id}] takes no vowel sign")
    if g.diacritic_id is not None:
        if not 0 <= g.diacritic_id < len(alphabet.diacritics):
            raise RangeError(f"Diacritic id out of range: [{g.diacritic_id}]")
        if not alphabet.accepts_diacritic(g.root_id):
            raise RangeError(f"Root [{g.root_id}] takes no consonant diacritic")


def compose_grapheme(g, alphabet):
    """Unicode text of a grapheme in logical order: reph, root, phala,
    vowel sign, then chandrabindu"""
    check_grapheme(g, alphabet)
    pre = post = final = ""
    if g.diacritic_id is not None:
        mark = alphabet.diacritics[g.diacritic_id]
        if mark.endswith(VIRAMA):
            pre = mark
        elif mark.startswith(VIRAMA):
            post = mark
        else:
            final = mark
    vowel = alphabet.modifiers[g.modifier_id] if g.modifier_id is not None else ""
    return f"{pre}{alphabet.roots[g.root_id]}{post}{vowel}{final}"


def valid_graphemes(alphabet):
    """Every valid (root, modifier, diacritic) combination"""
    for root_id in range(len(alphabet.roots)):
        modifiers = [None]
        if alphabet.accepts_modifier(root_id):
            modifiers += list(range(len(alphabet.modifiers)))
        diacritics = [None]
        if alphabet.accepts_diacritic(root_id):
            diacritics += list(range(len(alphabet.diacritics)))
        for modifier_id in modifiers:
            for diacritic_id in diacritics:
                yield GraphemeSpec(root_id, modifier_id, diacritic_id)


def normalize_crop(bits, size=32):
    """Nearest neighbour resample of a crop to size x size"""
    bits = np.asarray(bits, dtype=bool)
    h, w = bits.shape
    rows = (np.arange(size) * h) // size
    cols = (np.arange(size) * w) // size
    return bits[rows][:, cols].astype(np.float32)


def zone_rows(zone, size=32):
    """Rows of the normalized frame that sample a cell zone"""
    src = (np.arange(size) * glyphs.GLYPH_PX) // size
    return np.nonzero((src >= zone[0]) & (src < zone[1]))[0]


def _unit_rows(matrix):
    """Center and scale each row; constant rows become zero"""
    centered = matrix - matrix.mean(axis=1, keepdims=True)
    norms = np.linalg.norm(centered, axis=1, keepdims=True)
    return np.divide(centered, norms, out=np.zeros_like(centered), where=norms > 1e-9)


class RecognizerContract(abc.ABC):
    """Glyph recognizer: ranked candidates for a binary crop. Implementations
    keep read only state and must be deterministic."""

    @abc.abstractmethod
    def recognize(self, crop):
        """Candidates sorted by descending combined confidence, at least one"""


class TemplateRecognizer(RecognizerContract):
    """Normalized cross correlation against the glyph atlas, one score per
    head over the cell zone that head reads"""

    def __init__(self, atlas, config=None):
        self.log = logging.getLogger(__name__)
        self.config = config or RuleConfig()
        self.atlas = atlas
        self.alphabet = atlas.alphabet
        size = self.config.recognizer_size
        self.size = size
        self.root_zone = zone_rows((glyphs.MATRA[0], glyphs.BODY[1]), size)
        self.upper_zone = zone_rows(glyphs.UPPER, size)
        self.lower_zone = zone_rows(glyphs.LOWER, size)
        roots = range(len(self.alphabet.roots))
        self.letter_ids = np.array([i for i in roots if not self.alphabet.is_tight(i)])
        self.tight_ids = np.array([i for i in roots if self.alphabet.is_tight(i)])
        norm = {key: normalize_crop(t, size) for key, t in atlas.templates.items()}
        base = normalize_crop(atlas.base, size)
        self.letter_templates = _unit_rows(
            np.array([norm[("root", i)][self.root_zone].ravel() for i in self.letter_ids])
        )
        self.tight_templates = _unit_rows(
            np.array([norm[("root", i)].ravel() for i in self.tight_ids])
        )
        # row 0 is the bare cell: no mark on that head
        self.modifier_templates = _unit_rows(
            np.array(
                [base[self.lower_zone].ravel()]
                + [norm[("modifier", i)][self.lower_zone].ravel() for i in range(len(self.alphabet.modifiers))]
            )
        )
        self.diacritic_templates = _unit_rows(
            np.array(
                [base[self.upper_zone].ravel()]
                + [norm[("diacritic", i)][self.upper_zone].ravel() for i in range(len(self.alphabet.diacritics))]
            )
        )

    def _scores(self, templates, vector):
        unit = _unit_rows(vector.reshape(1, -1))[0]
        return np.clip(templates @ unit, 0.0, 1.0)

    def root_scores(self, norm):
        """Confidence per root class id"""
        scores = np.zeros(len(self.alphabet.roots))
        scores[self.letter_ids] = self._scores(self.letter_templates, norm[self.root_zone].ravel())
        scores[self.tight_ids] = self._scores(self.tight_templates, norm.ravel())
        return scores

    @staticmethod
    def _best(scores):
        idx = int(np.argmax(scores))
        return (None if idx == 0 else idx - 1), float(scores[idx])

    def recognize(self, crop):
        norm = normalize_crop(crop, self.size)
        root_scores = self.root_scores(norm)
        order = sorted(range(len(root_scores)), key=lambda i: (-root_scores[i], i))
        modifier = self._best(self._scores(self.modifier_templates, norm[self.lower_zone].ravel()))
        diacritic = self._best(self._scores(self.diacritic_templates, norm[self.upper_zone].ravel()))
        candidates = []
        for root_id in order[: max(1, self.config.top_k)]:
            spec = GraphemeSpec(root_id, root_conf=float(root_scores[root_id]))
            if self.alphabet.accepts_modifier(root_id):
                spec = replace(spec, modifier_id=modifier[0], modifier_conf=modifier[1])
            if self.alphabet.accepts_diacritic(root_id):
                spec = replace(spec, diacritic_id=diacritic[0], diacritic_conf=diacritic[1])
            candidates.append(spec)
        candidates.sort(key=lambda c: (-c.confidence, c.root_id))
        return candidates


def reference_recognizer(atlas, config=None):
    """Template matching recognizer over a complete atlas"""
    missing = [key for key in atlas.required_keys() if key not in atlas.templates]
    if missing:
        raise AtlasError(f"Glyph atlas misses classes: {missing[:5]}")
    return TemplateRecognizer(atlas, config)


def matra_band(crop, config=None):
    """Rows of the headline: the densest row in the top of the word and its
    contiguous neighbours, all at least the configured share of the word
    width. None when the word carries no matra."""
    config = config or RuleConfig()
    h, w = crop.shape
    top = max(1, int(np.ceil(config.matra_top_ratio * h)))
    density = crop.sum(axis=1)
    best = int(np.argmax(density[:top]))
    needed = config.matra_width_ratio * w
    if density[best] < needed:
        return None
    start = best
    while start > 0 and density[start - 1] >= needed:
        start -= 1
    end = best + 1
    while end < top and density[end] >= needed:
        end += 1
    return start, end


def _runs(mask):
    runs = []
    start = None
    for idx, value in enumerate(mask):
        if value and start is None:
            start = idx
        elif not value and start is not None:
            runs.append([start, idx])
            start = None
    if start is not None:
        runs.append([start, len(mask)])
    return runs


def segment_characters(word, binary, metrics=None, config=None):
    """Glyph boxes of a word: suppress the matra band, split at empty
    columns, then hand the band pixels of each gap column to the nearest
    glyph"""
    bits = binary.bits if hasattr(binary, "bits") else np.asarray(binary, dtype=bool)
    bbox = word.bbox
    crop = bits[bbox.y : bbox.y1, bbox.x : bbox.x1]
    if crop.size == 0 or not crop.any():
        raise NoInk(f"Word box {bbox.as_list()} contains no ink")
    band = matra_band(crop, config)
    work = crop.copy()
    if band is not None:
        work[band[0] : band[1], :] = False
    runs = _runs(work.any(axis=0))
    if not runs:
        runs = [[0, crop.shape[1]]]
    inked = crop.any(axis=0)
    # gap columns go to the nearest run, ties to the left one
    for col in np.nonzero(inked & ~work.any(axis=0))[0]:
        dist = [
            (0 if r[0] <= col < r[1] else min(abs(col - r[0]), abs(col - (r[1] - 1))), i)
            for i, r in enumerate(runs)
        ]
        nearest = min(dist)[1]
        runs[nearest][0] = min(runs[nearest][0], col)
        runs[nearest][1] = max(runs[nearest][1], col + 1)
    boxes = []
    for x0, x1 in runs:
        rows = np.nonzero(crop[:, x0:x1].any(axis=1))[0]
        cols = np.nonzero(crop[:, x0:x1].any(axis=0))[0]
        boxes.append(
            BoundingBox.from_extent(
                bbox.x + x0 + cols[0], bbox.y + rows[0], bbox.x + x0 + cols[-1] + 1, bbox.y + rows[-1] + 1
            )
        )
    boxes.sort(key=lambda b: b.x)
    log.debug("Segmented word %s into [%d] glyphs", bbox.as_list(), len(boxes))
    return boxes


def merge_words(line, metrics, config=None):
    """Concatenate glyph texts per word and join words whose gap is below
    the word gap threshold"""
    config = config or RuleConfig()
    limit = config.word_gap_factor * metrics.est_line_height
    merged = []
    for word in line.words:
        text = "".join(word.glyph_texts) if word.glyph_texts else word.text
        word = replace(word, text=text)
        if merged and word.bbox.x - merged[-1].bbox.x1 < limit:
            last = merged[-1]
            merged[-1] = WordBox(
                union_all([last.bbox, word.bbox]),
                last.glyph_boxes + word.glyph_boxes,
                last.text + word.text,
                last.glyph_texts + word.glyph_texts,
            )
        else:
            merged.append(word)
    return replace(line, words=tuple(merged))


def read_line(line, binary, metrics, recognizer, alphabet, config=None):
    """Segment and recognize every word of a line and merge the results"""
    words = []
    for word in line.words:
        try:
            boxes = segment_characters(word, binary, metrics, config)
        except NoInk:
            words.append(word)
            continue
        texts = []
        for box in boxes:
            best = recognizer.recognize(binary.crop(box))[0]
            texts.append(compose_grapheme(best, alphabet))
        words.append(replace(word, glyph_boxes=tuple(boxes), glyph_texts=tuple(texts)))
    return merge_words(replace(line, words=tuple(words)), metrics, config)
