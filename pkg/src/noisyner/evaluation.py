"""Exact-match chunk scoring in the style of conlleval, plus significance testing."""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from typing import Mapping, Optional

import numpy as np

from .conll_io import (ENTITY_TYPES, Corpus, InvalidLabelSequence, Sentence, TagScheme,
                       decode_spans, is_valid)


class StructureMismatch(ValueError):
    def __init__(self, message: str, sentence: Optional[int] = None):
        self.sentence = sentence
        super().__init__(message)


@dataclass(frozen=True, order=True)
class EntitySpan:
    sentence_index: int
    token_start: int
    token_end: int  # inclusive
    entity_type: str


def extract_entities(sentence: Sentence, scheme: TagScheme,
                     sentence_index: int = 0) -> list[EntitySpan]:
    labels = sentence.labels
    if not is_valid(labels, scheme):
        raise InvalidLabelSequence(
            f"sentence {sentence_index} is not valid {TagScheme(scheme).value}")
    return [EntitySpan(sentence_index, s, e, t) for s, e, t in decode_spans(labels)]


def corpus_entities(corpus: Corpus) -> list[EntitySpan]:
    spans = []
    for i, sent in enumerate(corpus.sentences):
        spans.extend(extract_entities(sent, corpus.scheme, i))
    return spans


@dataclass
class Counts:
    tp: int = 0
    fp: int = 0
    fn: int = 0

    @property
    def precision(self) -> float:
        return self.tp / (self.tp + self.fp) if self.tp + self.fp else 0.0

    @property
    def recall(self) -> float:
        return self.tp / (self.tp + self.fn) if self.tp + self.fn else 0.0

    @property
    def f1(self) -> float:
        p, r = self.precision, self.recall
        return 2 * p * r / (p + r) if p + r else 0.0

    def as_dict(self) -> dict:
        return {"tp": self.tp, "fp": self.fp, "fn": self.fn,
                "precision": self.precision, "recall": self.recall, "f1": self.f1}


@dataclass
class EvalReport:
    per_type: dict[str, Counts] = field(default_factory=dict)
    token_count: int = 0
    correct_tags: int = 0

    @property
    def overall(self) -> Counts:
        return Counts(sum(c.tp for c in self.per_type.values()),
                      sum(c.fp for c in self.per_type.values()),
                      sum(c.fn for c in self.per_type.values()))

    @property
    def precision(self) -> float:
        return self.overall.precision

    @property
    def recall(self) -> float:
        return self.overall.recall

    @property
    def f1(self) -> float:
        return self.overall.f1

    def to_dict(self) -> dict:
        return {"overall": self.overall.as_dict(),
                "per_type": {t: c.as_dict() for t, c in sorted(self.per_type.items())}}

    def to_json(self, **kwargs) -> str:
        return json.dumps(self.to_dict(), **kwargs)

    def to_text(self) -> str:
        """Plain-text table laid out like conlleval's output."""
        o = self.overall
        found_guessed, found_correct = o.tp + o.fp, o.tp + o.fn
        acc = 100.0 * self.correct_tags / self.token_count if self.token_count else 0.0
        lines = [
            f"processed {self.token_count} tokens with {found_correct} phrases; "
            f"found: {found_guessed} phrases; correct: {o.tp}.",
            f"accuracy: {acc:6.2f}%; precision: {100 * o.precision:6.2f}%; "
            f"recall: {100 * o.recall:6.2f}%; FB1: {100 * o.f1:6.2f}",
        ]
        for t, c in sorted(self.per_type.items()):
            lines.append(
                f"{t:>17}: precision: {100 * c.precision:6.2f}%; "
                f"recall: {100 * c.recall:6.2f}%; FB1: {100 * c.f1:6.2f}  {c.tp + c.fp}")
        return "\n".join(lines) + "\n"


def check_structure(gold: Corpus, *others: Corpus) -> None:
    for other in others:
        if len(other.sentences) != len(gold.sentences):
            raise StructureMismatch(
                f"sentence counts differ: {len(gold.sentences)} vs {len(other.sentences)}",
                min(len(gold.sentences), len(other.sentences)))
        for i, (g, p) in enumerate(zip(gold.sentences, other.sentences)):
            if g.surfaces != p.surfaces:
                raise StructureMismatch(f"sentence {i} differs in its tokens", i)


def _empty_report() -> EvalReport:
    return EvalReport({t: Counts() for t in ENTITY_TYPES})


def _token_accuracy(report: EvalReport, gold: Corpus, pred: Corpus) -> None:
    for g, p in zip(gold.sentences, pred.sentences):
        report.token_count += len(g)
        report.correct_tags += sum(a == b for a, b in zip(g.labels, p.labels))


def _count(gold_spans, pred_spans, report: EvalReport) -> None:
    gold_set = set(gold_spans)
    pred_set = set(pred_spans)
    for s in pred_set:
        if s in gold_set:
            report.per_type[s.entity_type].tp += 1
        else:
            report.per_type[s.entity_type].fp += 1
    for s in gold_set - pred_set:
        report.per_type[s.entity_type].fn += 1


def evaluate(gold: Corpus, pred: Corpus) -> EvalReport:
    """Exact-match precision, recall and F1 per entity type and micro-averaged."""
    check_structure(gold, pred)
    report = _empty_report()
    _count(corpus_entities(gold), corpus_entities(pred), report)
    _token_accuracy(report, gold, pred)
    return report


def evaluate_subset(gold: Corpus, pred: Corpus, flagged: Mapping[EntitySpan, bool]
                    ) -> EvalReport:
    """Score only the gold entities marked in ``flagged``.

    Predictions matching a flagged gold entity are true positives; predictions
    that overlap one without matching are false positives; predictions away
    from all flagged entities are not counted.
    """
    check_structure(gold, pred)
    gold_spans = corpus_entities(gold)
    missing = [s for s in gold_spans if s not in flagged]
    if missing:
        raise KeyError(f"flag map lacks gold entity {missing[0]}")
    targets = {s for s in gold_spans if flagged[s]}
    by_sentence: dict[int, list[EntitySpan]] = {}
    for s in targets:
        by_sentence.setdefault(s.sentence_index, []).append(s)

    report = _empty_report()
    for p in set(corpus_entities(pred)):
        if p in targets:
            report.per_type[p.entity_type].tp += 1
        elif any(g.token_start <= p.token_end and p.token_start <= g.token_end
                 for g in by_sentence.get(p.sentence_index, ())):
            report.per_type[p.entity_type].fp += 1
    pred_set = set(corpus_entities(pred))
    for g in targets - pred_set:
        report.per_type[g.entity_type].fn += 1
    _token_accuracy(report, gold, pred)
    return report


@dataclass(frozen=True)
class SigTestResult:
    observed_diff: float
    p_value: float
    iterations: int
    seed: int

    @property
    def significant(self) -> bool:
        return self.p_value < 0.05


def _sentence_counts(gold: Corpus, pred: Corpus) -> np.ndarray:
    counts = np.zeros((len(gold.sentences), 3), dtype=np.int64)
    for i, (g, p) in enumerate(zip(gold.sentences, pred.sentences)):
        gs = set(extract_entities(g, gold.scheme, i))
        ps = set(extract_entities(p, pred.scheme, i))
        tp = len(gs & ps)
        counts[i] = (tp, len(ps) - tp, len(gs) - tp)
    return counts


def _f1(tp, fp, fn):
    denom = 2 * tp + fp + fn
    return np.divide(2 * tp, denom, out=np.zeros(np.shape(tp), dtype=float), where=denom > 0)


def significance_test(gold: Corpus, pred_a: Corpus, pred_b: Corpus,
                      iterations: int = 1000, seed: int = 0) -> SigTestResult:
    """Approximate randomization test on the micro F1 difference.

    Each resample swaps the two systems' outputs sentence by sentence with
    probability 1/2.  p = (r + 1) / (R + 1), r counting resamples whose
    difference is at least the observed one.
    """
    check_structure(gold, pred_a, pred_b)
    ca = _sentence_counts(gold, pred_a)
    cb = _sentence_counts(gold, pred_b)
    ta, tb = ca.sum(0), cb.sum(0)
    observed = float(abs(_f1(*ta) - _f1(*tb)))

    rng = np.random.default_rng(seed)
    delta = cb - ca
    hits = 0
    chunk = max(1, 2_000_000 // max(1, len(ca)))
    done = 0
    while done < iterations:
        k = min(chunk, iterations - done)
        swap = rng.random((k, len(ca))) < 0.5
        moved = swap.astype(np.int64) @ delta  # (k, 3) change applied to A
        a_tot = ta + moved
        b_tot = tb - moved
        stats = np.abs(_f1(*a_tot.T) - _f1(*b_tot.T))
        hits += int(np.count_nonzero(stats >= observed - 1e-12))
        done += k
    return SigTestResult(observed, (hits + 1) / (iterations + 1), iterations, seed)
