"""Reading, writing and transforming CoNLL-style NER corpora.

A corpus is a list of sentences, each a list of tokens carrying a surface
string and an IOB label.  Three tag schemes are understood:

* ``IO``   -- only ``I-X`` and ``O``; adjacent same-type entities merge.
* ``IOB1`` -- ``B-X`` appears only to separate two adjacent entities of type X.
* ``IOB2`` -- every entity starts with ``B-X``.
"""

from __future__ import annotations

import enum
import logging
import math
import random
import re
from dataclasses import dataclass, field, replace
from typing import Iterable, Mapping, Optional, Sequence

log = logging.getLogger(__name__)

ENTITY_TYPES = ("PER", "ORG", "LOC", "MISC")

# WikiNER / CoNLL-02 -> Europeana newspapers tag set
EUROPEANA_MAPPING = {"PER": "PER", "ORG": "ORG", "LOC": "LOC", "MISC": None}

DOCSTART = "-DOCSTART-"


class ConllFormatError(ValueError):
    """Raised for malformed CoNLL input; carries the 1-based line number."""

    def __init__(self, message: str, line: Optional[int] = None):
        self.line = line
        if line is not None:
            message = f"line {line}: {message}"
        super().__init__(message)


class InvalidLabelSequence(ValueError):
    pass


class TagScheme(str, enum.Enum):
    IO = "IO"
    IOB1 = "IOB1"
    IOB2 = "IOB2"


@dataclass(frozen=True)
class Label:
    kind: str  # "O", "I" or "B"
    type: Optional[str] = None

    def __post_init__(self):
        if self.kind == "O":
            if self.type is not None:
                raise ValueError("Outside label cannot carry an entity type")
        elif self.kind in ("I", "B"):
            if self.type not in ENTITY_TYPES:
                raise ValueError(f"unknown entity type {self.type!r}")
        else:
            raise ValueError(f"unknown label kind {self.kind!r}")

    @classmethod
    def parse(cls, text: str) -> "Label":
        if text == "O":
            return OUTSIDE
        m = re.fullmatch(r"([IB])-(.+)", text)
        if not m or m.group(2) not in ENTITY_TYPES:
            raise ValueError(f"unknown label {text!r}")
        return cls(m.group(1), m.group(2))

    @property
    def is_outside(self) -> bool:
        return self.kind == "O"

    def __str__(self) -> str:
        return "O" if self.kind == "O" else f"{self.kind}-{self.type}"


OUTSIDE = Label("O")


@dataclass(frozen=True)
class Token:
    surface: str
    label: Label = OUTSIDE
    ocr_error: bool = False

    def __post_init__(self):
        if not self.surface or any(ch.isspace() for ch in self.surface):
            raise ValueError(f"invalid token surface {self.surface!r}")


@dataclass
class Sentence:
    tokens: list[Token]

    def __post_init__(self):
        if not self.tokens:
            raise ValueError("a sentence needs at least one token")

    def __len__(self) -> int:
        return len(self.tokens)

    def __iter__(self):
        return iter(self.tokens)

    @property
    def labels(self) -> list[Label]:
        return [t.label for t in self.tokens]

    @property
    def surfaces(self) -> list[str]:
        return [t.surface for t in self.tokens]

    def with_labels(self, labels: Sequence[Label]) -> "Sentence":
        assert len(labels) == len(self.tokens)
        return Sentence([replace(t, label=l) for t, l in zip(self.tokens, labels)])


@dataclass
class Corpus:
    sentences: list[Sentence] = field(default_factory=list)
    scheme: TagScheme = TagScheme.IOB1
    language: str = "und"

    def __len__(self) -> int:
        return len(self.sentences)

    def __iter__(self):
        return iter(self.sentences)

    @property
    def token_count(self) -> int:
        return sum(len(s) for s in self.sentences)

    def validate(self) -> None:
        for i, sent in enumerate(self.sentences):
            if not is_valid(sent.labels, self.scheme):
                raise InvalidLabelSequence(
                    f"sentence {i} is not valid {self.scheme.value}: "
                    + " ".join(map(str, sent.labels)))


@dataclass(frozen=True)
class ColumnSpec:
    """Where to find token, label and (optional) OCR-error flag columns.

    Negative indices count from the end of the line, as in Python.
    """
    token_column: int = 0
    label_column: int = -1
    separator: str = "whitespace"  # or "tab"
    flag_column: Optional[int] = None

    def __post_init__(self):
        cols = [self.token_column, self.label_column, self.flag_column]
        cols = [c for c in cols if c is not None]
        if len(set(cols)) != len(cols):
            raise ValueError(f"column indices must differ: {cols}")
        if self.separator not in ("whitespace", "tab"):
            raise ValueError(f"unknown separator {self.separator!r}")

    def split(self, line: str) -> list[str]:
        return line.split("\t") if self.separator == "tab" else line.split()

    def required_columns(self) -> int:
        """Smallest column count at which all configured columns are distinct."""
        cols = [self.token_column, self.label_column]
        if self.flag_column is not None:
            cols.append(self.flag_column)
        n = max(c + 1 if c >= 0 else -c for c in cols)
        while len({c % n for c in cols}) < len(cols):
            n += 1
        return n


# --- scheme semantics -------------------------------------------------------

def is_valid(labels: Sequence[Label], scheme: TagScheme) -> bool:
    prev = OUTSIDE
    for lab in labels:
        if scheme == TagScheme.IO:
            if lab.kind == "B":
                return False
        elif scheme == TagScheme.IOB1:
            if lab.kind == "B" and prev.type != lab.type:
                return False
        else:
            if lab.kind == "I" and prev.type != lab.type:
                return False
        prev = lab
    return True


def infer_scheme(label_seqs: Iterable[Sequence[Label]]) -> Optional[TagScheme]:
    seqs = list(label_seqs)
    for scheme in (TagScheme.IOB1, TagScheme.IOB2, TagScheme.IO):
        if all(is_valid(s, scheme) for s in seqs):
            return scheme
    return None


def decode_spans(labels: Sequence[Label]) -> list[tuple[int, int, str]]:
    """Lenient chunk decoding shared by all schemes.

    ``B-X`` always opens a new chunk; ``I-X`` continues the current chunk if it
    has type X and opens a new one otherwise.  On a sequence that is valid
    under its scheme this yields exactly that scheme's chunks.
    Returns ``(start, end_inclusive, type)`` triples.
    """
    spans: list[tuple[int, int, str]] = []
    start = None
    cur = None
    for i, lab in enumerate(labels):
        if lab.kind == "O":
            if cur is not None:
                spans.append((start, i - 1, cur))
            start = cur = None
        elif lab.kind == "B" or lab.type != cur:
            if cur is not None:
                spans.append((start, i - 1, cur))
            start, cur = i, lab.type
    if cur is not None:
        spans.append((start, len(labels) - 1, cur))
    return spans


def encode_spans(length: int, spans: Iterable[tuple[int, int, str]],
                 scheme: TagScheme) -> list[Label]:
    """Inverse of :func:`decode_spans` for non-overlapping spans."""
    labels = [OUTSIDE] * length
    prev_end, prev_type = -2, None
    for start, end, etype in sorted(spans):
        for k in range(start, end + 1):
            labels[k] = Label("I", etype)
        if scheme == TagScheme.IOB2:
            labels[start] = Label("B", etype)
        elif scheme == TagScheme.IOB1 and prev_end == start - 1 and prev_type == etype:
            labels[start] = Label("B", etype)
        prev_end, prev_type = end, etype
    return labels


def repair_labels(labels: Sequence[Label], scheme: TagScheme) -> tuple[list[Label], int]:
    """Coerce a label sequence to the nearest valid one under ``scheme``.

    Returns the repaired labels and how many positions changed.
    """
    fixed = encode_spans(len(labels), decode_spans(labels), scheme)
    return fixed, sum(a != b for a, b in zip(labels, fixed))


# --- I/O --------------------------------------------------------------------

def parse_conll(text: str, column_spec: ColumnSpec = ColumnSpec(), *,
                scheme: Optional[TagScheme] = None, language: str = "und",
                repair: bool = False) -> Corpus:
    """Parse CoNLL text into a :class:`Corpus`.

    The tag scheme is inferred (IOB1, then IOB2, then IO) unless ``scheme`` is
    given.  Invalid label sequences raise :class:`ConllFormatError` unless
    ``repair`` is set, in which case they are coerced and the number of
    changed labels is logged.
    """
    need = column_spec.required_columns()
    sentences: list[list[Token]] = []
    first_lines: list[int] = []
    current: list[Token] = []

    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.rstrip("\r\n")
        if not line.strip():
            if current:
                sentences.append(current)
                current = []
            continue
        cols = column_spec.split(line)
        if cols and cols[0] == DOCSTART:
            continue
        if len(cols) < need:
            raise ConllFormatError(
                f"expected at least {need} columns, got {len(cols)}", lineno)
        try:
            label = Label.parse(cols[column_spec.label_column])
        except ValueError as exc:
            raise ConllFormatError(str(exc), lineno) from None
        flag = False
        if column_spec.flag_column is not None:
            flag = cols[column_spec.flag_column] not in ("0", "-", "false", "False")
        surface = cols[column_spec.token_column]
        try:
            tok = Token(surface, label, flag)
        except ValueError as exc:
            raise ConllFormatError(str(exc), lineno) from None
        if not current:
            first_lines.append(lineno)
        current.append(tok)
    if current:
        sentences.append(current)

    label_seqs = [[t.label for t in s] for s in sentences]
    if scheme is None:
        scheme = infer_scheme(label_seqs)
        if scheme is None:
            if not repair:
                bad = next(i for i, s in enumerate(label_seqs)
                           if not is_valid(s, TagScheme.IOB1))
                raise ConllFormatError(
                    "no single tag scheme fits the whole file; first sentence "
                    "not valid IOB1 starts here", first_lines[bad])
            scheme = TagScheme.IOB1
    scheme = TagScheme(scheme)

    out = []
    changed = 0
    for toks, labels, first in zip(sentences, label_seqs, first_lines):
        sent = Sentence(toks)
        if not is_valid(labels, scheme):
            if not repair:
                raise ConllFormatError(
                    f"label sequence is not valid {scheme.value}", first)
            fixed, n = repair_labels(labels, scheme)
            changed += n
            sent = sent.with_labels(fixed)
        out.append(sent)
    if changed:
        log.warning("repaired %d labels to make the corpus valid %s",
                    changed, scheme.value)
    return Corpus(out, scheme, language)


def write_conll(corpus: Corpus, column_spec: ColumnSpec = ColumnSpec()) -> str:
    ncols = column_spec.required_columns()
    sep = "\t" if column_spec.separator == "tab" else " "
    lines = []
    for sent in corpus.sentences:
        for tok in sent.tokens:
            cols = ["_"] * ncols
            cols[column_spec.token_column] = tok.surface
            cols[column_spec.label_column] = str(tok.label)
            if column_spec.flag_column is not None:
                cols[column_spec.flag_column] = "1" if tok.ocr_error else "0"
            lines.append(sep.join(cols) + "\n")
        lines.append("\n")
    return "".join(lines)


def plain_text(corpus: Corpus) -> str:
    """Tokens joined by single spaces, one sentence per line."""
    return "".join(" ".join(s.surfaces) + "\n" for s in corpus.sentences)


# --- transformations ----------------------------------------------------------

def convert_scheme(corpus: Corpus, target: TagScheme) -> Corpus:
    target = TagScheme(target)
    sents = [s.with_labels(encode_spans(len(s), decode_spans(s.labels), target))
             for s in corpus.sentences]
    return Corpus(sents, target, corpus.language)


def map_tagset(corpus: Corpus, mapping: Mapping[str, Optional[str]] = EUROPEANA_MAPPING
               ) -> Corpus:
    """Rename or drop entity types; ``None`` as target drops the type."""
    sents = []
    for s in corpus.sentences:
        spans = []
        for start, end, etype in decode_spans(s.labels):
            if etype not in mapping:
                raise KeyError(f"no mapping given for entity type {etype!r}")
            new = mapping[etype]
            if new is not None:
                if new not in ENTITY_TYPES:
                    raise ValueError(f"unknown target entity type {new!r}")
                spans.append((start, end, new))
        sents.append(s.with_labels(encode_spans(len(s), spans, corpus.scheme)))
    return Corpus(sents, corpus.scheme, corpus.language)


def split_corpus(corpus: Corpus, ratios: Sequence[float] = (0.8, 0.1, 0.1)
                 ) -> tuple[Corpus, Corpus, Corpus]:
    """Contiguous train/dev/test split; sizes are floored, test takes the rest."""
    if len(ratios) != 3 or any(r <= 0 for r in ratios) or abs(sum(ratios) - 1.0) > 1e-9:
        raise ValueError(f"ratios must be three positive fractions summing to 1, got {ratios}")
    n = len(corpus.sentences)
    n_train = math.floor(n * ratios[0] + 1e-9)
    n_dev = math.floor(n * ratios[1] + 1e-9)
    cuts = [0, n_train, n_train + n_dev, n]
    return tuple(Corpus(corpus.sentences[a:b], corpus.scheme, corpus.language)
                 for a, b in zip(cuts, cuts[1:]))


def downsample(corpus: Corpus, target_tokens: int, seed: int = 0) -> Corpus:
    """Draw whole sentences without replacement until the token budget is hit.

    Sampling stops at the first drawn sentence that would overflow the budget;
    the surviving sentences keep their original order.
    """
    if target_tokens < 0:
        raise ValueError("target_tokens must be non-negative")
    order = random.Random(seed).sample(range(len(corpus.sentences)), len(corpus.sentences))
    picked = []
    total = 0
    for idx in order:
        n = len(corpus.sentences[idx])
        if total + n > target_tokens:
            break
        total += n
        picked.append(idx)
    picked.sort()
    return Corpus([corpus.sentences[i] for i in picked], corpus.scheme, corpus.language)


def corpus_stats(corpus: Corpus) -> dict:
    entity_counts = {t: 0 for t in ENTITY_TYPES}
    for s in corpus.sentences:
        for _, _, etype in decode_spans(s.labels):
            entity_counts[etype] += 1
    return {
        "token_count": corpus.token_count,
        "sentence_count": len(corpus.sentences),
        "entity_counts": entity_counts,
    }
