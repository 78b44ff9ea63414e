"""Character alignment of clean and noisy text, and label transfer across it.

The dynamic program is the textbook Wagner-Fischer recurrence, filled one row
at a time with numpy.  Within a row the insert dependency
``D[i, j] = min(T[j], D[i, j-1] + ins)`` unrolls to
``D[i, j] = min_k (T[k] + (j - k) * ins)``, which is a running minimum.
"""

from __future__ import annotations

import logging
from collections import defaultdict
from dataclasses import dataclass, field
from typing import Iterable, Optional

import numpy as np

from .conll_io import (Corpus, Label, OUTSIDE, Sentence, TagScheme, Token,
                       decode_spans, encode_spans, plain_text)

log = logging.getLogger(__name__)

MATCH, SUBSTITUTE, DELETE, INSERT = "Match", "Substitute", "Delete", "Insert"


@dataclass(frozen=True)
class EditOp:
    kind: str
    clean_pos: Optional[int] = None
    noisy_pos: Optional[int] = None


@dataclass(frozen=True)
class Costs:
    """Edit costs.  Characters in ``anchors`` (newline by default) may only be
    matched, deleted or inserted, never substituted for another character."""
    match: float = 0
    substitute: float = 1
    insert: float = 1
    delete: float = 1
    anchors: str = "\n"

    def swapped(self) -> "Costs":
        return Costs(self.match, self.substitute, self.delete, self.insert, self.anchors)

    def op_cost(self, kind: str) -> float:
        return {MATCH: self.match, SUBSTITUTE: self.substitute,
                INSERT: self.insert, DELETE: self.delete}[kind]


UNIT_COSTS = Costs()


@dataclass
class AlignmentPath:
    ops: list[EditOp]
    total_cost: float
    # windowed_align diagnostics: (clean_start, clean_end, noisy_start, noisy_end)
    # ranges committed without meeting the cost threshold, and how often a
    # window had to grow
    low_quality: list[tuple[int, int, int, int]] = field(default_factory=list)
    growth_events: int = 0

    @property
    def clean_length(self) -> int:
        return sum(op.clean_pos is not None for op in self.ops)

    @property
    def noisy_length(self) -> int:
        return sum(op.noisy_pos is not None for op in self.ops)

    def is_valid(self, clean_length: int, noisy_length: int) -> bool:
        """Monotone and covering every clean and noisy index exactly once."""
        cp = [op.clean_pos for op in self.ops if op.clean_pos is not None]
        npos = [op.noisy_pos for op in self.ops if op.noisy_pos is not None]
        shape_ok = all(
            (op.kind in (MATCH, SUBSTITUTE) and op.clean_pos is not None and op.noisy_pos is not None)
            or (op.kind == DELETE and op.clean_pos is not None and op.noisy_pos is None)
            or (op.kind == INSERT and op.clean_pos is None and op.noisy_pos is not None)
            for op in self.ops)
        return shape_ok and cp == list(range(clean_length)) and npos == list(range(noisy_length))


def _codes(s: str) -> np.ndarray:
    return np.frombuffer(s.encode("utf-32-le"), dtype=np.uint32)


def _row_sub_costs(ch: int, b: np.ndarray, b_anchor: np.ndarray, anchors: np.ndarray,
                   costs: Costs, forbidden) -> np.ndarray:
    sub = np.where(b == ch, costs.match, costs.substitute)
    if anchors.size:
        is_anchor = bool(np.isin(ch, anchors))
        clash = (b_anchor != is_anchor) | ((b != ch) & b_anchor & is_anchor)
        sub = np.where(clash, forbidden, sub)
    return sub


def _fill(a: str, b: str, costs: Costs, keep_matrix: bool):
    av, bv = _codes(a), _codes(b)
    n, m = len(av), len(bv)
    integral = all(float(c).is_integer() for c in
                   (costs.match, costs.substitute, costs.insert, costs.delete))
    dtype = np.int64 if integral else np.float64
    # anything dearer than delete+insert is never chosen
    forbidden = costs.insert + costs.delete + abs(costs.substitute) + 1
    anchors = _codes(costs.anchors)
    b_anchor = np.isin(bv, anchors)
    ins_ramp = np.arange(m + 1, dtype=dtype) * dtype(costs.insert)

    prev = ins_ramp.copy()
    matrix = None
    if keep_matrix:
        store = np.int32 if integral else np.float64
        matrix = np.empty((n + 1, m + 1), dtype=store)
        matrix[0] = prev
    row_cache: dict[int, np.ndarray] = {}
    t = np.empty(m + 1, dtype=dtype)
    for i in range(1, n + 1):
        ch = int(av[i - 1])
        sub = row_cache.get(ch)
        if sub is None:
            sub = _row_sub_costs(ch, bv, b_anchor, anchors, costs, forbidden).astype(dtype)
            row_cache[ch] = sub
        t[0] = prev[0] + costs.delete
        np.minimum(prev[:-1] + sub, prev[1:] + costs.delete, out=t[1:])
        row = np.minimum.accumulate(t - ins_ramp) + ins_ramp
        if keep_matrix:
            matrix[i] = row
        prev = row
    return av, bv, prev[-1], matrix


def _small_edit_distance(a: str, b: str, costs: Costs) -> float:
    # plain loops beat per-row numpy overhead on short strings
    anchors = set(costs.anchors)
    forbidden = costs.insert + costs.delete + abs(costs.substitute) + 1
    prev = [j * costs.insert for j in range(len(b) + 1)]
    for ca in a:
        row = [prev[0] + costs.delete]
        for j, cb in enumerate(b, 1):
            if ca == cb:
                sub = costs.match
            elif ca in anchors or cb in anchors:
                sub = forbidden
            else:
                sub = costs.substitute
            row.append(min(prev[j - 1] + sub, prev[j] + costs.delete, row[j - 1] + costs.insert))
        prev = row
    return prev[-1]


def edit_distance(a: str, b: str, costs: Costs = UNIT_COSTS) -> float:
    """Minimal edit cost only, in O(len(b)) memory."""
    if len(a) * len(b) <= 4096:
        return _small_edit_distance(a, b, costs)
    return _fill(a, b, costs, keep_matrix=False)[2].item()


def wagner_fischer(a: str, b: str, costs: Costs = UNIT_COSTS) -> AlignmentPath:
    """Optimal alignment of ``a`` (clean) onto ``b`` (noisy).

    Traceback prefers the diagonal, then deletion, then insertion.
    """
    av, bv, total, D = _fill(a, b, costs, keep_matrix=True)
    anchor_set = set(costs.anchors)
    forbidden = costs.insert + costs.delete + abs(costs.substitute) + 1

    def sub_cost(x: str, y: str) -> float:
        if x == y:
            return costs.match
        if x in anchor_set or y in anchor_set:
            return forbidden
        return costs.substitute

    ops: list[EditOp] = []
    i, j = len(a), len(b)
    while i > 0 or j > 0:
        here = D[i, j]
        if i > 0 and j > 0 and here == D[i - 1, j - 1] + sub_cost(a[i - 1], b[j - 1]):
            kind = MATCH if a[i - 1] == b[j - 1] else SUBSTITUTE
            i, j = i - 1, j - 1
            ops.append(EditOp(kind, i, j))
        elif i > 0 and here == D[i - 1, j] + costs.delete:
            i -= 1
            ops.append(EditOp(DELETE, i, None))
        else:
            j -= 1
            ops.append(EditOp(INSERT, None, j))
    ops.reverse()
    return AlignmentPath(ops, total.item())


@dataclass
class WindowConfig:
    initial_window: int = 500
    cost_threshold: float = 0.3
    growth_factor: float = 2.0
    max_window: int = 8000

    def __post_init__(self):
        if self.initial_window < 1:
            raise ValueError("initial_window must be at least 1")
        if self.cost_threshold <= 0:
            raise ValueError("cost_threshold must be positive")
        if self.growth_factor <= 1:
            raise ValueError("growth_factor must exceed 1")
        if self.max_window < self.initial_window:
            raise ValueError("max_window must be at least initial_window")


def _shift(ops: Iterable[EditOp], di: int, dj: int) -> list[EditOp]:
    return [EditOp(op.kind,
                   None if op.clean_pos is None else op.clean_pos + di,
                   None if op.noisy_pos is None else op.noisy_pos + dj)
            for op in ops]


def _midpoint_prefix(ops: list[EditOp], clean_span: int) -> int:
    """Number of leading ops that cover the first half of the clean window."""
    half = max(1, clean_span // 2)
    for k, op in enumerate(ops):
        if op.clean_pos is not None and op.clean_pos == half - 1:
            return k + 1
    return len(ops)


def windowed_align(clean: str, noisy: str, config: WindowConfig = WindowConfig(),
                   costs: Costs = UNIT_COSTS) -> AlignmentPath:
    """Align two long texts window by window.

    A window pair is aligned with :func:`wagner_fischer`.  If its cost per clean
    character is within ``cost_threshold`` the path is committed up to its
    midpoint and the window slides there; otherwise the window grows by
    ``growth_factor`` and is re-aligned.  A window that still fails at
    ``max_window`` is committed anyway and reported in ``low_quality``.
    """
    n, m = len(clean), len(noisy)
    ratio = m / n if n else 1.0
    ops: list[EditOp] = []
    low_quality: list[tuple[int, int, int, int]] = []
    growth_events = 0
    i = j = 0
    w = config.initial_window

    while i < n or j < m:
        best = None
        while True:
            wc = min(w, n - i)
            wn = min(max(1, round(w * ratio)), m - j)
            final = i + wc >= n or j + wn >= m
            if final:
                wc, wn = n - i, m - j
            path = wagner_fischer(clean[i:i + wc], noisy[j:j + wn], costs)
            norm = path.total_cost / max(wc, 1)
            if best is None or norm < best[0]:
                best = (norm, path, wc, wn, final)
            if norm <= config.cost_threshold or final or w >= config.max_window:
                break
            w = min(int(w * config.growth_factor), config.max_window)
            growth_events += 1

        norm, path, wc, wn, final = best
        if final:
            taken = path.ops
        else:
            taken = path.ops[:_midpoint_prefix(path.ops, wc)]
        di = sum(op.clean_pos is not None for op in taken)
        dj = sum(op.noisy_pos is not None for op in taken)
        if norm > config.cost_threshold:
            low_quality.append((i, i + di, j, j + dj))
            log.debug("low-quality region clean[%d:%d] noisy[%d:%d] (cost %.3f/char)",
                      i, i + di, j, j + dj, norm)
        ops.extend(_shift(taken, i, j))
        i, j = i + di, j + dj
        w = config.initial_window
        if final:
            break

    total = sum(costs.op_cost(op.kind) for op in ops)
    return AlignmentPath(ops, total, low_quality, growth_events)


def dump_alignment(path: AlignmentPath) -> str:
    """One op per line: ``kind<TAB>clean_pos<TAB>noisy_pos`` ("-" when absent)."""
    def fmt(v):
        return "-" if v is None else str(v)
    return "".join(f"{op.kind}\t{fmt(op.clean_pos)}\t{fmt(op.noisy_pos)}\n" for op in path.ops)


def load_alignment(text: str, costs: Costs = UNIT_COSTS) -> AlignmentPath:
    ops = []
    for line in text.splitlines():
        if not line:
            continue
        kind, c, nz = line.split("\t")
        ops.append(EditOp(kind, None if c == "-" else int(c), None if nz == "-" else int(nz)))
    return AlignmentPath(ops, sum(costs.op_cost(op.kind) for op in ops))


# --- label transfer -----------------------------------------------------------

def _char_owners(corpus: Corpus) -> list[Optional[tuple[int, int]]]:
    """For each character of ``plain_text(corpus)``: (sentence, token) or None."""
    owners: list[Optional[tuple[int, int]]] = []
    for si, sent in enumerate(corpus.sentences):
        for ti, tok in enumerate(sent.tokens):
            if ti:
                owners.append(None)
            owners.extend([(si, ti)] * len(tok.surface))
        owners.append(None)
    return owners


def tokenize_noisy(text: str) -> list[list[tuple[int, int]]]:
    """Split raw text into lines of whitespace-separated tokens.

    Tokens are ``(start, end)`` character offsets; empty lines are dropped.
    """
    lines = []
    offset = 0
    for line in text.split("\n"):
        toks = []
        k = 0
        while k < len(line):
            if line[k].isspace():
                k += 1
                continue
            start = k
            while k < len(line) and not line[k].isspace():
                k += 1
            toks.append((offset + start, offset + k))
        if toks:
            lines.append(toks)
        offset += len(line) + 1
    return lines


def labels_from_sources(clean_corpus: Corpus,
                        sources: list[list[Optional[tuple[int, int]]]]) -> list[list[Label]]:
    """IOB1 labels for noisy sentences given each noisy token's source token.

    Consecutive noisy tokens descending from the same clean entity form one
    entity; everything without a source is Outside.
    """
    entity_of: dict[tuple[int, int], tuple[int, int, str]] = {}
    for si, sent in enumerate(clean_corpus.sentences):
        for ei, (start, end, etype) in enumerate(decode_spans(sent.labels)):
            for ti in range(start, end + 1):
                entity_of[(si, ti)] = (si, ei, etype)

    result = []
    for line in sources:
        spans = []
        prev = None
        for k, src in enumerate(line):
            ent = entity_of.get(src) if src is not None else None
            if ent is not None and ent == prev:
                s, _, t = spans[-1]
                spans[-1] = (s, k, t)
            elif ent is not None:
                spans.append((k, k, ent[2]))
            prev = ent
        result.append(encode_spans(len(line), spans, TagScheme.IOB1))
    return result


def transfer_labels(clean_corpus: Corpus, noisy_text: str, path: AlignmentPath) -> Corpus:
    """Project labels from ``clean_corpus`` onto ``noisy_text`` via ``path``.

    ``path`` must align ``plain_text(clean_corpus)`` with ``noisy_text``.  Each
    noisy token takes the clean token it shares most aligned characters with
    (earlier token on ties).  ``ocr_error`` marks noisy tokens whose surface
    differs from that clean token, or that have no clean source at all.
    """
    clean_text = plain_text(clean_corpus)
    if path.clean_length != len(clean_text) or path.noisy_length != len(noisy_text):
        raise ValueError(
            f"alignment covers {path.clean_length}/{path.noisy_length} characters, "
            f"texts have {len(clean_text)}/{len(noisy_text)}")
    owners = _char_owners(clean_corpus)

    noisy_lines = tokenize_noisy(noisy_text)
    noisy_tok_of = np.full(len(noisy_text), -1, dtype=np.int64)
    flat: list[tuple[int, int]] = []
    for line in noisy_lines:
        for start, end in line:
            noisy_tok_of[start:end] = len(flat)
            flat.append((start, end))

    overlap: list[dict] = [defaultdict(int) for _ in flat]
    for op in path.ops:
        if op.clean_pos is None or op.noisy_pos is None:
            continue
        nt = noisy_tok_of[op.noisy_pos]
        owner = owners[op.clean_pos]
        if nt >= 0 and owner is not None:
            overlap[nt][owner] += 1

    best: list[Optional[tuple[int, int]]] = []
    for counts in overlap:
        if counts:
            best.append(min(counts, key=lambda o: (-counts[o], o)))
        else:
            best.append(None)

    sources = []
    k = 0
    for line in noisy_lines:
        sources.append(best[k:k + len(line)])
        k += len(line)
    label_lines = labels_from_sources(clean_corpus, sources)

    sentences = []
    k = 0
    for line, labels in zip(noisy_lines, label_lines):
        toks = []
        for (start, end), label in zip(line, labels):
            surface = noisy_text[start:end]
            src = best[k]
            if src is None:
                error = True
            else:
                error = surface != clean_corpus.sentences[src[0]].tokens[src[1]].surface
            toks.append(Token(surface, label, error))
            k += 1
        sentences.append(Sentence(toks))
    return Corpus(sentences, TagScheme.IOB1, clean_corpus.language)


def align_and_transfer(clean_corpus: Corpus, noisy_text: str,
                       config: WindowConfig = WindowConfig()) -> tuple[Corpus, AlignmentPath]:
    path = windowed_align(plain_text(clean_corpus), noisy_text, config)
    if path.low_quality:
        log.info("%d low-quality alignment regions", len(path.low_quality))
    return transfer_labels(clean_corpus, noisy_text, path), path


def flag_entity_ocr_errors(corpus: Corpus) -> dict:
    """Map every entity (as an ``EntitySpan``) to whether any of its tokens
    carries an OCR error."""
    from .evaluation import extract_entities

    flags = {}
    for si, sent in enumerate(corpus.sentences):
        for span in extract_entities(sent, corpus.scheme, sentence_index=si):
            flags[span] = any(t.ocr_error for t in
                              sent.tokens[span.token_start:span.token_end + 1])
    return flags
