"""
 layoutforge: recognition accuracy and annotation statistics

 Distances and alignments are computed over grapheme clusters. Percentages
 are rounded half-up; averages are the arithmetic mean of the rounded
 inputs of the present document types.

 Copyright (C) 2026  layoutforge developers

 This work is licensed under the terms of the GNU GPL, version 3.  See
 the LICENSE file in the top-level directory.
"""
import os
import json
import logging
from collections import Counter
from dataclasses import dataclass, field
from decimal import ROUND_HALF_UP, Decimal
from typing import Dict, Optional, Tuple

import regex
from rapidfuzz.distance import Levenshtein

from liblayoutforge.errors import EmptyGroundTruth, EmptyInput, ValidationError

log = logging.getLogger(__name__)

DOC_TYPES = ("computer_compose", "letterpress", "typewriter", "handwritten")

MATCH = "match"
SUBSTITUTE = "substitute"
DELETE = "delete"
INSERT = "insert"

# empty side of an insert or delete in the confusion counts
EPSILON = ""

AGREED = "agreed"
DISAGREED = "disagreed"
SKIPPED = "skipped"
DECISIONS = (AGREED, DISAGREED, SKIPPED)

GRAPHEME = regex.compile(r"\X")


def tokens(text):
    """Grapheme clusters of a string"""
    return GRAPHEME.findall(text)


def round_half_up(value, places=2):
    """Round a number half-up to a fixed count of decimals"""
    quantum = Decimal(1).scaleb(-places)
    return float(Decimal(str(value)).quantize(quantum, rounding=ROUND_HALF_UP))


def mean_half_up(values, places=2):
    """Arithmetic mean of decimal values, rounded half-up"""
    values = [Decimal(str(v)) for v in values]
    if not values:
        raise EmptyInput("Mean of no values")
    return round_half_up(sum(values) / len(values), places)


def levenshtein(a, b):
    """Unit cost edit distance over grapheme clusters"""
    return Levenshtein.distance(tokens(a), tokens(b))


@dataclass(frozen=True)
class EditOp:
    """Alignment step; gt or pred is EPSILON for insert and delete"""

    op: str
    gt: str = EPSILON
    pred: str = EPSILON

    @property
    def cost(self):
        """Unit cost of the step"""
        return 0 if self.op == MATCH else 1


def edit_alignment(gt, pred):
    """One optimal alignment of gt onto pred. Traceback runs from the end
    of both strings and prefers match, then substitute, delete, insert."""
    a, b = tokens(gt), tokens(pred)
    rows, cols = len(a) + 1, len(b) + 1
    dist = [[0] * cols for _ in range(rows)]
    for i in range(rows):
        dist[i][0] = i
    for j in range(cols):
        dist[0][j] = j
    for i in range(1, rows):
        for j in range(1, cols):
            dist[i][j] = min(
                dist[i - 1][j - 1] + (a[i - 1] != b[j - 1]),
                dist[i - 1][j] + 1,
                dist[i][j - 1] + 1,
            )
    ops = []
    i, j = len(a), len(b)
    while i or j:
        here = dist[i][j]
        if i and j and a[i - 1] == b[j - 1] and here == dist[i - 1][j - 1]:
            ops.append(EditOp(MATCH, a[i - 1], b[j - 1]))
            i, j = i - 1, j - 1
        elif i and j and here == dist[i - 1][j - 1] + 1:
            ops.append(EditOp(SUBSTITUTE, a[i - 1], b[j - 1]))
            i, j = i - 1, j - 1
        elif i and here == dist[i - 1][j] + 1:
            ops.append(EditOp(DELETE, a[i - 1], EPSILON))
            i -= 1
        else:
            ops.append(EditOp(INSERT, EPSILON, b[j - 1]))
            j -= 1
    ops.reverse()
    return tuple(ops)


def replay(gt, ops):
    """Apply an alignment to gt; yields the prediction it was built for"""
    source = tokens(gt)
    out = []
    pos = 0
    for step in ops:
        if step.op == INSERT:
            out.append(step.pred)
            continue
        if pos >= len(source) or source[pos] != step.gt:
            raise ValidationError(f"Alignment does not fit ground truth at [{pos}]")
        pos += 1
        if step.op != DELETE:
            out.append(step.pred)
    if pos != len(source):
        raise ValidationError("Alignment leaves ground truth unconsumed")
    return "".join(out)


def lev_accuracy(gt, pred):
    """(1 - distance / max(|gt|, |pred|)) * 100 in grapheme units"""
    gt_len = len(tokens(gt))
    if not gt_len:
        raise EmptyGroundTruth("Levenshtein accuracy needs a non-empty ground truth")
    longest = max(gt_len, len(tokens(pred)))
    value = (1.0 - levenshtein(gt, pred) / longest) * 100.0
    return min(100.0, max(0.0, value))


@dataclass(frozen=True)
class Confusion:
    """Per grapheme confusion counts keyed by (gt, pred)"""

    counts: Dict[Tuple[str, str], int]
    matches: int
    total: int

    @property
    def accuracy(self):
        """Matches per aligned step in percent"""
        return 100.0 if not self.total else self.matches * 100.0 / self.total


def confusion_accuracy(pairs, include_whitespace=True):
    """Confusion counts and accuracy over the alignments of (gt, pred)
    pairs; insertions count in the EPSILON row, deletions in the EPSILON
    column"""
    pairs = list(pairs)
    if not pairs:
        raise EmptyInput("Confusion accuracy needs at least one pair")
    counts = Counter()
    matches = 0
    total = 0
    for gt, pred in pairs:
        for step in edit_alignment(gt, pred):
            if not include_whitespace and not step.gt.strip() and not step.pred.strip():
                continue
            counts[(step.gt, step.pred)] += 1
            total += 1
            matches += step.op == MATCH
    result = Confusion(dict(counts), matches, total)
    return result.counts, result.accuracy


@dataclass(frozen=True)
class TypeScore:
    """Accuracies of one document type"""

    doc_type: str
    cm_accuracy: float
    lev_accuracy: float


def _check_percent(value, what):
    if not 0.0 <= float(value) <= 100.0:
        raise ValueError(f"{what} outside [0, 100]: [{value}]")


def _type_order(doc_types):
    known = [t for t in DOC_TYPES if t in doc_types]
    return known + sorted(t for t in doc_types if t not in DOC_TYPES)


@dataclass(frozen=True)
class EvalReport:
    """Per document type accuracies with their averages"""

    rows: Tuple[TypeScore, ...]
    cm_average: float
    lev_average: float

    def to_dict(self):
        """JSON structure of the report"""
        return {
            "types": {
                r.doc_type: {"cm_accuracy": r.cm_accuracy, "lev_accuracy": r.lev_accuracy}
                for r in self.rows
            },
            "average": {"cm_accuracy": self.cm_average, "lev_accuracy": self.lev_average},
            "lev_accuracy_formula": "(1 - distance / max(|gt|, |pred|)) * 100",
        }

    def to_json(self):
        """Report as JSON text"""
        return json.dumps(self.to_dict(), indent=2) + "\n"

    def to_text(self):
        """Aligned table: document type, confusion matrix accuracy,
        Levenshtein accuracy"""
        header = ("Document type", "Confusion matrix", "Levenshtein")
        body = [(r.doc_type, f"{r.cm_accuracy:.2f}%", f"{r.lev_accuracy:.2f}%") for r in self.rows]
        body.append(("Average", f"{self.cm_average:.2f}%", f"{self.lev_average:.2f}%"))
        return _table_text(header, body)


def _table_text(header, body):
    widths = [max(len(row[i]) for row in [header] + body) for i in range(len(header))]
    out = []
    for idx, row in enumerate([header] + body):
        cells = [row[0].ljust(widths[0])] + [c.rjust(w) for c, w in zip(row[1:], widths[1:])]
        out.append("  ".join(cells))
        if idx == 0:
            out.append("  ".join("-" * w for w in widths))
    return "\n".join(out) + "\n"


def build_report(per_type):
    """EvalReport from a map of document type to (cm %, lev %)"""
    if not per_type:
        raise EmptyInput("Report needs at least one document type")
    rows = []
    for doc_type in _type_order(per_type):
        cm, lev = per_type[doc_type]
        _check_percent(cm, f"{doc_type} confusion accuracy")
        _check_percent(lev, f"{doc_type} Levenshtein accuracy")
        rows.append(TypeScore(doc_type, round_half_up(cm), round_half_up(lev)))
    report = EvalReport(
        tuple(rows),
        mean_half_up(r.cm_accuracy for r in rows),
        mean_half_up(r.lev_accuracy for r in rows),
    )
    log.debug("Report averages: cm [%s] lev [%s]", report.cm_average, report.lev_average)
    return report


@dataclass(frozen=True)
class AgreementStats:
    """Share of annotation decisions in percent, one decimal"""

    agreed: float
    disagreed: float
    skipped: float
    count: int = field(default=0, compare=False)


def agreement_stats(decisions):
    """Agreement percentages of a list of annotation decisions"""
    counts = Counter(decisions)
    unknown = set(counts) - set(DECISIONS)
    if unknown:
        raise ValueError(f"Unknown annotation decisions: [{', '.join(sorted(unknown))}]")
    total = sum(counts.values())
    if not total:
        raise EmptyInput("Agreement statistics need at least one decision")

    def share(key):
        return round_half_up(Decimal(counts[key] * 100) / Decimal(total), 1)

    return AgreementStats(share(AGREED), share(DISAGREED), share(SKIPPED), total)


def agreement_by_type(decisions_by_type):
    """agreement_stats per document type"""
    return {t: agreement_stats(decisions_by_type[t]) for t in _type_order(decisions_by_type)}


def retention(before, after):
    """Percentage of items kept after annotation per document type"""
    result = {}
    for doc_type in _type_order(before):
        if not before[doc_type]:
            raise EmptyInput(f"No items before annotation for [{doc_type}]")
        kept = Decimal(after.get(doc_type, 0) * 100) / Decimal(before[doc_type])
        result[doc_type] = round_half_up(kept)
    return result


@dataclass(frozen=True)
class HeadAccuracy:
    """Recognition accuracy per classifier head and their mean"""

    root: float
    modifier: float
    diacritic: float

    @property
    def mean(self):
        """Mean of the three heads"""
        return mean_half_up((self.root, self.modifier, self.diacritic))


def head_accuracy(pairs):
    """Per head accuracy over (expected, predicted) GraphemeSpec pairs"""
    pairs = list(pairs)
    if not pairs:
        raise EmptyInput("Head accuracy needs at least one pair")
    root = sum(e.root_id == p.root_id for e, p in pairs)
    modifier = sum(e.modifier_id == p.modifier_id for e, p in pairs)
    diacritic = sum(e.diacritic_id == p.diacritic_id for e, p in pairs)
    total = Decimal(len(pairs))
    return HeadAccuracy(
        round_half_up(Decimal(root * 100) / total),
        round_half_up(Decimal(modifier * 100) / total),
        round_half_up(Decimal(diacritic * 100) / total),
    )


@dataclass(frozen=True)
class Comparison:
    """Levenshtein accuracy of several systems per document type"""

    systems: Tuple[str, ...]
    rows: Tuple[Tuple[str, Tuple[Optional[float], ...]], ...]
    averages: Tuple[float, ...]

    def to_text(self):
        """Aligned comparison table"""
        header = ("Document type",) + self.systems
        body = [
            (t, *("-" if v is None else f"{v:.2f}%" for v in values)) for t, values in self.rows
        ]
        body.append(("Average", *(f"{v:.2f}%" for v in self.averages)))
        return _table_text(header, body)


def build_comparison(systems):
    """Comparison table from a map of system name to {doc_type: lev %};
    averages run over the types each system reports"""
    if len(systems) < 2:
        raise EmptyInput("Comparison needs at least two systems")
    names = tuple(systems)
    doc_types = _type_order(set(t for scores in systems.values() for t in scores))
    rows = []
    for doc_type in doc_types:
        values = []
        for name in names:
            value = systems[name].get(doc_type)
            values.append(None if value is None else round_half_up(value))
        rows.append((doc_type, tuple(values)))
    averages = tuple(
        mean_half_up(values[idx] for _, values in rows if values[idx] is not None)
        for idx in range(len(names))
    )
    return Comparison(names, tuple(rows), averages)


def _read_text(path):
    try:
        with open(path, "r", encoding="utf-8") as handle:
            return handle.read().strip()
    except (OSError, UnicodeDecodeError) as errmsg:
        raise ValidationError(f"Unable to read corpus file: [{errmsg}]") from errmsg


def corpus_pairs(gt_dir, pred_dir):
    """Map of document type to sorted (name, gt, pred) triples. Files in
    a subdirectory of gt_dir belong to the type named by it, top level
    files to "unknown". Missing predictions count as empty."""
    groups = {}
    for root, _, files in sorted(os.walk(gt_dir)):
        rel = os.path.relpath(root, gt_dir)
        doc_type = "unknown" if rel == "." else rel.split(os.sep)[0]
        for name in sorted(f for f in files if f.endswith(".txt")):
            pred_path = os.path.join(pred_dir, "" if rel == "." else rel, name)
            pred = ""
            if os.path.exists(pred_path):
                pred = _read_text(pred_path)
            else:
                log.warning("No prediction for [%s], counted as empty", os.path.join(rel, name))
            groups.setdefault(doc_type, []).append((name, _read_text(os.path.join(root, name)), pred))
    return groups


def evaluate_corpus(gt_dir, pred_dir, include_whitespace=True):
    """EvalReport over a ground truth and prediction directory pair"""
    groups = corpus_pairs(gt_dir, pred_dir)
    if not groups:
        raise EmptyInput(f"No ground truth files found in [{gt_dir}]")
    per_type = {}
    for doc_type, triples in groups.items():
        pairs = [(gt, pred) for _, gt, pred in triples if gt]
        if not pairs:
            log.warning("Skipping [%s]: all ground truth files are empty", doc_type)
            continue
        _, cm = confusion_accuracy(pairs, include_whitespace)
        lev = sum(lev_accuracy(gt, pred) for gt, pred in pairs) / len(pairs)
        per_type[doc_type] = (cm, lev)
        log.info("Evaluated [%s]: [%d] files", doc_type, len(pairs))
    return build_report(per_type)
