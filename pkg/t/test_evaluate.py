import functools
import json
import random

import pytest

from liblayoutforge import evaluate
from liblayoutforge.errors import EmptyGroundTruth, EmptyInput, ValidationError
from liblayoutforge.recognize import GraphemeSpec

ALPHABET = ["ক", "কি", "র্ক", "ম", "া", " ", "১", "x"]

ACCURACIES = {
    "computer_compose": (99.56, 90.06),
    "letterpress": (99.33, 88.53),
    "typewriter": (97.98, 83.38),
    "handwritten": (95.32, 86.84),
}


def brute_distance(a, b):
    a, b = evaluate.tokens(a), evaluate.tokens(b)

    @functools.lru_cache(maxsize=None)
    def dist(i, j):
        if i == len(a):
            return len(b) - j
        if j == len(b):
            return len(a) - i
        return min(
            dist(i + 1, j + 1) + (a[i] != b[j]),
            dist(i + 1, j) + 1,
            dist(i, j + 1) + 1,
        )

    return dist(0, 0)


def random_text(rng):
    return "".join(rng.choice(ALPHABET) for _ in range(rng.randrange(0, 9)))


def write(path, text):
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(text, encoding="utf-8")


def test_tokens_are_grapheme_clusters():
    assert evaluate.tokens("কিতাব") == ["কি", "তা", "ব"]
    assert evaluate.tokens("") == []


@pytest.mark.parametrize(
    "value, expected",
    [(98.0475, 98.05), (87.2025, 87.2), (0.125, 0.13), (99.999, 100.0)],
)
def test_round_half_up(value, expected):
    assert evaluate.round_half_up(value) == expected


def test_mean_of_nothing():
    with pytest.raises(EmptyInput):
        evaluate.mean_half_up([])


@pytest.mark.parametrize(
    "a, b, expected",
    [("", "", 0), ("abc", "", 3), ("kitten", "sitting", 3), ("কি", "ক", 1), ("আমার", "আমার", 0)],
)
def test_levenshtein_examples(a, b, expected):
    assert evaluate.levenshtein(a, b) == expected


@pytest.mark.parametrize("seed", range(50))
def test_levenshtein_matches_recursion(seed):
    rng = random.Random(seed)
    a, b = random_text(rng), random_text(rng)
    assert evaluate.levenshtein(a, b) == brute_distance(a, b)
    assert evaluate.levenshtein(a, b) == evaluate.levenshtein(b, a)


@pytest.mark.slow
def test_levenshtein_full_grid():
    rng = random.Random(7)
    texts = [random_text(rng) for _ in range(1000)]
    for a in texts:
        for b in texts:
            assert evaluate.levenshtein(a, b) == brute_distance(a, b)


@pytest.mark.parametrize("seed", range(50))
def test_alignment_is_optimal_and_replays(seed):
    rng = random.Random(seed)
    gt, pred = random_text(rng), random_text(rng)
    ops = evaluate.edit_alignment(gt, pred)
    assert sum(op.cost for op in ops) == evaluate.levenshtein(gt, pred)
    assert evaluate.replay(gt, ops) == pred


def test_alignment_steps():
    ops = evaluate.edit_alignment("কলম", "কম")
    assert [op.op for op in ops] == [evaluate.MATCH, evaluate.DELETE, evaluate.MATCH]
    assert ops[1] == evaluate.EditOp(evaluate.DELETE, "ল", evaluate.EPSILON)


def test_replay_rejects_foreign_alignment():
    ops = evaluate.edit_alignment("ab", "ab")
    with pytest.raises(ValidationError):
        evaluate.replay("xb", ops)
    with pytest.raises(ValidationError):
        evaluate.replay("abc", ops)


def test_lev_accuracy():
    assert evaluate.lev_accuracy("abcd", "abcd") == 100.0
    assert evaluate.lev_accuracy("abcd", "abxd") == pytest.approx(75.0)
    assert evaluate.lev_accuracy("ab", "abcd") == pytest.approx(50.0)
    assert evaluate.lev_accuracy("ab", "") == 0.0
    with pytest.raises(EmptyGroundTruth):
        evaluate.lev_accuracy("", "abc")


def test_confusion_accuracy():
    counts, accuracy = evaluate.confusion_accuracy([("ab", "ab"), ("ab", "ax")])
    assert accuracy == pytest.approx(75.0)
    assert counts[("a", "a")] == 2 and counts[("b", "x")] == 1
    counts, _ = evaluate.confusion_accuracy([("a", "ab")])
    assert counts[(evaluate.EPSILON, "b")] == 1
    with pytest.raises(EmptyInput):
        evaluate.confusion_accuracy([])


def test_confusion_skips_whitespace_on_request():
    _, with_space = evaluate.confusion_accuracy([("a b", "a  b")])
    _, without = evaluate.confusion_accuracy([("a b", "a  b")], include_whitespace=False)
    assert with_space == pytest.approx(75.0)
    assert without == 100.0


def test_report_averages():
    report = evaluate.build_report(ACCURACIES)
    assert (report.cm_average, report.lev_average) == (98.05, 87.2)
    assert [r.doc_type for r in report.rows] == list(evaluate.DOC_TYPES)
    text = report.to_text()
    assert "98.05%" in text and "87.20%" in text
    assert text.splitlines()[-1].startswith("Average")
    values = json.loads(report.to_json())
    assert values["average"] == {"cm_accuracy": 98.05, "lev_accuracy": 87.2}
    assert values["types"]["letterpress"]["lev_accuracy"] == 88.53


def test_report_checks():
    with pytest.raises(EmptyInput):
        evaluate.build_report({})
    with pytest.raises(ValueError):
        evaluate.build_report({"letterpress": (101.0, 50.0)})


def test_comparison_table():
    comparison = evaluate.build_comparison(
        {
            "ours": {t: lev for t, (_, lev) in ACCURACIES.items()},
            "other": {
                "computer_compose": 73.49,
                "letterpress": 84.16,
                "typewriter": 36.78,
                "handwritten": 35.80,
            },
            "partial": {"computer_compose": 50.0},
        }
    )
    assert comparison.averages == (87.2, 57.56, 50.0)
    assert comparison.rows[1] == ("letterpress", (88.53, 84.16, None))
    assert "-" in comparison.to_text().splitlines()[3].split()
    with pytest.raises(EmptyInput):
        evaluate.build_comparison({"ours": {}})


def test_head_accuracy():
    pairs = [
        (GraphemeSpec(1, 2, None), GraphemeSpec(1, 2, None)),
        (GraphemeSpec(1, None, 0), GraphemeSpec(1, None, 1)),
        (GraphemeSpec(3, 0, None), GraphemeSpec(4, None, None)),
        (GraphemeSpec(5), GraphemeSpec(5)),
    ]
    heads = evaluate.head_accuracy(pairs)
    assert (heads.root, heads.modifier, heads.diacritic) == (75.0, 75.0, 75.0)
    assert evaluate.HeadAccuracy(86.09, 95.56, 93.99).mean == 91.88
    with pytest.raises(EmptyInput):
        evaluate.head_accuracy([])


def test_agreement_stats():
    decisions = [evaluate.AGREED] * 813 + [evaluate.DISAGREED] * 153 + [evaluate.SKIPPED] * 34
    stats = evaluate.agreement_stats(decisions)
    assert (stats.agreed, stats.disagreed, stats.skipped, stats.count) == (81.3, 15.3, 3.4, 1000)
    with pytest.raises(ValueError):
        evaluate.agreement_stats(["maybe"])
    with pytest.raises(EmptyInput):
        evaluate.agreement_stats([])


def test_agreement_by_type():
    per_type = {
        "typewriter": [evaluate.AGREED] * 642 + [evaluate.DISAGREED] * 358,
        "computer_compose": [evaluate.AGREED] * 918 + [evaluate.SKIPPED] * 82,
        "letterpress": [evaluate.AGREED] * 803 + [evaluate.DISAGREED] * 197,
    }
    stats = evaluate.agreement_by_type(per_type)
    assert list(stats) == ["computer_compose", "letterpress", "typewriter"]
    assert [s.agreed for s in stats.values()] == [91.8, 80.3, 64.2]


def test_retention():
    before = {
        "computer_compose": 837379,
        "letterpress": 1104304,
        "typewriter": 773043,
        "handwritten": 1674270,
    }
    after = {
        "computer_compose": 720754,
        "letterpress": 496543,
        "typewriter": 251332,
        "handwritten": 1594924,
    }
    assert evaluate.retention(before, after) == {
        "computer_compose": 86.07,
        "letterpress": 44.96,
        "typewriter": 32.51,
        "handwritten": 95.26,
    }
    with pytest.raises(EmptyInput):
        evaluate.retention({"typewriter": 0}, {})


def test_evaluate_corpus(tmp_path):
    gt, pred = tmp_path / "gt", tmp_path / "pred"
    write(gt / "letterpress" / "a.txt", "abcd\n")
    write(pred / "letterpress" / "a.txt", "abxd\n")
    write(gt / "letterpress" / "b.txt", "ab")
    write(pred / "letterpress" / "b.txt", "ab")
    write(gt / "typewriter" / "c.txt", "ab")
    report = evaluate.evaluate_corpus(str(gt), str(pred))
    rows = {r.doc_type: r for r in report.rows}
    assert (rows["letterpress"].cm_accuracy, rows["letterpress"].lev_accuracy) == (83.33, 87.5)
    assert (rows["typewriter"].cm_accuracy, rows["typewriter"].lev_accuracy) == (0.0, 0.0)
    assert [r.doc_type for r in report.rows] == ["letterpress", "typewriter"]


def test_evaluate_corpus_without_files(tmp_path):
    with pytest.raises(EmptyInput):
        evaluate.evaluate_corpus(str(tmp_path), str(tmp_path))


def test_corpus_top_level_files_are_unknown(tmp_path):
    write(tmp_path / "gt" / "a.txt", "ক")
    groups = evaluate.corpus_pairs(str(tmp_path / "gt"), str(tmp_path / "pred"))
    assert groups == {"unknown": [("a.txt", "ক", "")]}
