"""Annotation corpus curation: bounding-box text verification, rare-table
filtering, HTML normalization and balanced sampling."""

from __future__ import annotations

import math
import random
import re
from collections import Counter
from dataclasses import asdict, dataclass, field
from typing import Iterable, Optional, Sequence

from .adjacency import cell_text
from .table_model import (
    Complexity,
    Mode,
    TableParseError,
    TableTree,
    classify_complexity,
    is_tag_token,
    parse_table,
    serialize,
)

SIMILARITY_THRESHOLD = 0.90
LENGTH_DIFF_THRESHOLD = 0.10
MAX_SPAN = 10
MIN_CHAR_COUNT = 50

_WORD = re.compile(r"\w+")
_MATH = re.compile(r"<\s*/?\s*(?:[\w-]+:)?(?:math|inline-formula)\b", re.IGNORECASE)


class MissingExtractedText(ValueError):
    pass


class UnparseableGroundTruth(ValueError):
    def __init__(self, sample_id: str, reason: str) -> None:
        super().__init__(f"sample {sample_id!r}: {reason}")
        self.sample_id = sample_id


class InsufficientSamples(ValueError):
    def __init__(self, k: int, available: dict) -> None:
        super().__init__(f"need {k} per class, available {available}")
        self.available = available


@dataclass
class CorpusSample:
    id: str
    gt_html: str
    pred_html: Optional[str] = None
    extracted_text: Optional[str] = None
    split: Optional[str] = None

    @classmethod
    def from_dict(cls, record: dict) -> CorpusSample:
        if not record.get("id"):
            raise ValueError("sample without an id")
        if not isinstance(record.get("gt_html"), str):
            raise ValueError(f"sample {record['id']!r} has no gt_html")
        return cls(
            id=str(record["id"]),
            gt_html=record["gt_html"],
            pred_html=record.get("pred_html"),
            extracted_text=record.get("extracted_text"),
            split=record.get("split"),
        )

    def to_dict(self) -> dict:
        return {k: v for k, v in asdict(self).items() if v is not None}


@dataclass
class FilterReport:
    kept: int = 0
    dropped_span: int = 0
    dropped_rare_char: int = 0
    dropped_math: int = 0
    dropped_invalid_bbox: int = 0
    dropped_ids: dict = field(default_factory=dict)

    @property
    def total(self) -> int:
        return (
            self.kept
            + self.dropped_span
            + self.dropped_rare_char
            + self.dropped_math
            + self.dropped_invalid_bbox
        )

    def to_dict(self) -> dict:
        return {
            "kept": self.kept,
            "dropped_span": self.dropped_span,
            "dropped_rare_char": self.dropped_rare_char,
            "dropped_math": self.dropped_math,
            "dropped_invalid_bbox": self.dropped_invalid_bbox,
            "dropped_ids": self.dropped_ids,
        }


# --------------------------------------------------------------------------
# text verification

def words(text: str) -> list[str]:
    return _WORD.findall(text.lower())


def idf_table(corpus: Iterable[str]) -> tuple[int, Counter]:
    docs = [set(words(d)) for d in corpus]
    df: Counter = Counter()
    for d in docs:
        df.update(d)
    return len(docs), df


def tfidf_cosine(text_a: str, text_b: str, corpus: Sequence[str] | tuple[int, Counter]) -> float:
    """Cosine of raw-count tf times ``ln(N / (1 + df)) + 1`` idf vectors.

    ``corpus`` is the list of documents supplying the document frequencies,
    or a precomputed ``(N, df)`` pair from :func:`idf_table`.
    """
    if isinstance(corpus, tuple) and len(corpus) == 2 and isinstance(corpus[1], Counter):
        n_docs, df = corpus
    else:
        n_docs, df = idf_table(corpus)
    if n_docs == 0:
        raise ValueError("tf-idf needs a non-empty corpus")

    def vector(text: str) -> dict[str, float]:
        return {
            term: count * (math.log(n_docs / (1 + df[term])) + 1.0)
            for term, count in Counter(words(text)).items()
        }

    va, vb = vector(text_a), vector(text_b)
    dot = math.fsum(w * vb[t] for t, w in va.items() if t in vb)
    norm_a = math.sqrt(math.fsum(w * w for w in va.values()))
    norm_b = math.sqrt(math.fsum(w * w for w in vb.values()))
    if norm_a == 0.0 or norm_b == 0.0:
        return 0.0
    return max(0.0, min(1.0, dot / (norm_a * norm_b)))


def annotation_text(tree: TableTree) -> str:
    """Plain text of all non-empty cells, joined by single spaces."""
    return " ".join(t for t in (cell_text(c.content) for c in tree.cells()) if t)


def length_difference(a: str, b: str) -> float:
    longest = max(len(a), len(b))
    return 0.0 if longest == 0 else abs(len(a) - len(b)) / longest


def validate_bbox(sample: CorpusSample, corpus) -> bool:
    """Accept a bounding box when the text extracted from it matches the
    annotation: tf-idf cosine above 0.90 and length difference below 10%."""
    if sample.extracted_text is None:
        raise MissingExtractedText(f"sample {sample.id!r} has no extracted_text")
    text = annotation_text(parse_table(sample.gt_html, Mode.LENIENT))
    return (
        length_difference(text, sample.extracted_text) < LENGTH_DIFF_THRESHOLD
        and tfidf_cosine(text, sample.extracted_text, corpus) > SIMILARITY_THRESHOLD
    )


# --------------------------------------------------------------------------
# filtering

def has_math(raw_html: str) -> bool:
    return _MATH.search(raw_html) is not None


def content_characters(tree: TableTree) -> Counter:
    return Counter(t for c in tree.cells() for t in c.content if not is_tag_token(t))


def _parse_gt(sample: CorpusSample) -> TableTree:
    try:
        return parse_table(sample.gt_html, Mode.LENIENT)
    except TableParseError as exc:
        raise UnparseableGroundTruth(sample.id, str(exc)) from exc


def corpus_statistics(corpus: Sequence[CorpusSample]) -> tuple[Counter, tuple[int, Counter]]:
    """Cell-text character counts and tf-idf document frequencies of a corpus."""
    trees = [_parse_gt(s) for s in corpus]
    char_counts: Counter = Counter()
    for tree in trees:
        char_counts.update(content_characters(tree))
    docs = [annotation_text(t) for t in trees]
    docs += [s.extracted_text for s in corpus if s.extracted_text is not None]
    return char_counts, idf_table(docs)


def filter_tables(
    corpus: Sequence[CorpusSample],
    check_bbox: bool = True,
    char_counts: Optional[Counter] = None,
    idf: Optional[tuple[int, Counter]] = None,
) -> tuple[list[CorpusSample], FilterReport]:
    """Drop rare or inconsistent tables.

    Reasons are checked in the order span, math, rare character, bounding box;
    the first that applies is the one tallied. Character counts cover the cell
    text of the whole input corpus. The bounding-box check runs only for
    samples carrying ``extracted_text`` (idf over all annotation and extracted
    texts of the corpus) and can be turned off with ``check_bbox=False``.
    Precomputed ``char_counts``/``idf`` (see :func:`corpus_statistics`) replace
    the statistics of ``corpus`` itself, e.g. when filtering one shard.
    """
    trees = [_parse_gt(s) for s in corpus]
    texts = [annotation_text(t) for t in trees]
    if char_counts is None or idf is None:
        own_counts, own_idf = corpus_statistics(corpus)
        char_counts = own_counts if char_counts is None else char_counts
        idf = own_idf if idf is None else idf

    kept, report = [], FilterReport()
    for sample, tree, text in zip(corpus, trees, texts):
        reason = None
        if any(c.rowspan > MAX_SPAN or c.colspan > MAX_SPAN for c in tree.cells()):
            reason = "dropped_span"
        elif has_math(sample.gt_html):
            reason = "dropped_math"
        elif any(char_counts[ch] < MIN_CHAR_COUNT for ch in content_characters(tree)):
            reason = "dropped_rare_char"
        elif check_bbox and sample.extracted_text is not None and not (
            length_difference(text, sample.extracted_text) < LENGTH_DIFF_THRESHOLD
            and tfidf_cosine(text, sample.extracted_text, idf) > SIMILARITY_THRESHOLD
        ):
            reason = "dropped_invalid_bbox"
        if reason is None:
            kept.append(sample)
            report.kept += 1
        else:
            setattr(report, reason, getattr(report, reason) + 1)
            report.dropped_ids.setdefault(reason, []).append(sample.id)
    return kept, report


# --------------------------------------------------------------------------
# normalization and splits

def curate_html(raw_html: str) -> str:
    """Canonical table HTML: ``th`` becomes ``td``, only span attributes
    survive, and non-table wrappers such as hyperlinks are unwrapped."""
    return serialize(parse_table(raw_html, Mode.LENIENT))


def sample_balanced(corpus: Sequence[CorpusSample], k: int, seed: int = 0) -> list[CorpusSample]:
    """Draw ``k`` complex and ``k`` simple samples without replacement."""
    if k < 1:
        raise ValueError("k must be positive")
    by_class: dict[Complexity, list[CorpusSample]] = {Complexity.COMPLEX: [], Complexity.SIMPLE: []}
    for sample in corpus:
        by_class[classify_complexity(_parse_gt(sample))].append(sample)
    available = {c.value: len(v) for c, v in by_class.items()}
    if min(available.values()) < k:
        raise InsufficientSamples(k, available)
    rng = random.Random(seed)
    return rng.sample(by_class[Complexity.COMPLEX], k) + rng.sample(by_class[Complexity.SIMPLE], k)


def random_partition(
    corpus: Sequence[CorpusSample],
    fractions: Sequence[float] = (0.6, 0.2, 0.2),
    names: Sequence[str] = ("train", "dev", "test"),
    seed: int = 0,
) -> dict[str, list[CorpusSample]]:
    if len(fractions) != len(names) or not math.isclose(sum(fractions), 1.0):
        raise ValueError("fractions must match names and sum to 1")
    order = list(range(len(corpus)))
    random.Random(seed).shuffle(order)
    bounds = [round(sum(fractions[: i + 1]) * len(corpus)) for i in range(len(fractions))]
    parts, start = {}, 0
    for name, stop in zip(names, bounds):
        parts[name] = [corpus[i] for i in sorted(order[start:stop])]
        start = stop
    return parts
