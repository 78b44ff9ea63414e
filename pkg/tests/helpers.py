"""Corpus builders and independent oracles shared by the test modules."""

import itertools
import random
from functools import lru_cache

from noisyner.conll_io import Corpus, Label, Sentence, TagScheme, Token

TYPES = ("PER", "ORG", "LOC")


def sent(labels, words=None):
    labels = labels.split() if isinstance(labels, str) else list(labels)
    words = words.split() if isinstance(words, str) else words
    if words is None:
        words = [f"w{i}" for i in range(len(labels))]
    return Sentence([Token(w, Label.parse(l)) for w, l in zip(words, labels)])


def corpus(*label_lines, scheme=TagScheme.IOB1):
    return Corpus([sent(l) for l in label_lines], scheme)


def random_spans(rng, length, max_entities, types=TYPES):
    """Random non-overlapping (start, end, type) spans."""
    spans = []
    k = 0
    while k < length and len(spans) < max_entities:
        if rng.random() < 0.4:
            end = min(length - 1, k + rng.randrange(3))
            spans.append((k, end, rng.choice(types)))
            k = end + 1
        else:
            k += 1
    return spans


def labels_for(length, spans, scheme):
    """Encode spans by hand, straight from the scheme definitions."""
    out = ["O"] * length
    prev = None
    for start, end, t in sorted(spans):
        for i in range(start, end + 1):
            out[i] = f"I-{t}"
        adjacent = prev is not None and prev[1] == start - 1 and prev[2] == t
        if scheme == TagScheme.IOB2 or (scheme == TagScheme.IOB1 and adjacent):
            out[start] = f"B-{t}"
        prev = (start, end, t)
    return out


def random_corpus(rng, n_sent=5, max_len=10, scheme=TagScheme.IOB1, max_entities=4):
    sents = []
    for _ in range(n_sent):
        length = rng.randint(1, max_len)
        spans = random_spans(rng, length, max_entities)
        sents.append(sent(labels_for(length, spans, scheme),
                          [rng.choice(["le", "Paris", "van", "Jan", "de", "a", ","])
                           for _ in range(length)]))
    return Corpus(sents, scheme)


def brute_force_spans(labels, scheme):
    """Every (start, end, type) that the scheme definition makes an entity.

    Checks each candidate interval directly instead of scanning left to right.
    """
    labels = [str(l) for l in labels]
    n = len(labels)
    found = set()
    for start in range(n):
        for end in range(start, n):
            kind0, _, t = labels[start].partition("-")
            if kind0 == "O":
                continue
            inner = labels[start + 1:end + 1]
            if any(l != f"I-{t}" for l in inner):
                continue
            prev = labels[start - 1] if start else "O"
            if scheme == TagScheme.IOB2:
                opens = kind0 == "B"
            elif scheme == TagScheme.IO:
                opens = not prev.endswith(f"-{t}")
            else:
                opens = kind0 == "B" or not prev.endswith(f"-{t}")
            nxt = labels[end + 1] if end + 1 < n else "O"
            closes = nxt != f"I-{t}"
            if opens and closes:
                found.add((start, end, t))
    return found


def brute_force_match(gold_spans, pred_spans):
    """tp/fp/fn by comparing every gold/pred pair."""
    tp = sum(1 for p in pred_spans if any(p == g for g in gold_spans))
    return tp, len(pred_spans) - tp, sum(1 for g in gold_spans if not any(p == g for p in pred_spans))


@lru_cache(maxsize=None)
def _suffix_cost(a, b):
    if not a:
        return len(b)
    if not b:
        return len(a)
    return min(_suffix_cost(a[1:], b[1:]) + (a[0] != b[0]),
               _suffix_cost(a[1:], b) + 1,
               _suffix_cost(a, b[1:]) + 1)


def recursive_edit_cost(a, b):
    """Top-down recursion over string suffixes (unit costs)."""
    try:
        return _suffix_cost(a, b)
    finally:
        _suffix_cost.cache_clear()


def enumerate_edit_cost(a, b):
    """Minimum over every alignment of a and b, enumerated explicitly.

    Only feasible for very short strings.
    """
    best = None

    def walk(i, j, cost):
        nonlocal best
        if best is not None and cost >= best:
            return
        if i == len(a) and j == len(b):
            best = cost
            return
        if i < len(a) and j < len(b):
            walk(i + 1, j + 1, cost + (a[i] != b[j]))
        if i < len(a):
            walk(i + 1, j, cost + 1)
        if j < len(b):
            walk(i, j + 1, cost + 1)

    walk(0, 0, 0)
    return best


def all_strings(alphabet, max_len):
    for n in range(max_len + 1):
        for t in itertools.product(alphabet, repeat=n):
            yield "".join(t)


def synthetic_text(rng, n_chars, line_words=(5, 15)):
    words = []
    total = 0
    while total < n_chars:
        w = "".join(rng.choice("abcdefghijklmnopqrstuvwxyzéè") for _ in range(rng.randint(1, 9)))
        words.append(w)
        total += len(w) + 1
    lines = []
    k = 0
    while k < len(words):
        step = rng.randint(*line_words)
        lines.append(" ".join(words[k:k + step]))
        k += step
    return "\n".join(lines)[:n_chars]


def add_noise(rng, text, rate):
    out = []
    for ch in text:
        r = rng.random()
        if ch == "\n" or r >= rate:
            out.append(ch)
            continue
        kind = rng.randrange(3)
        if kind == 0:
            out.append(rng.choice("abcdefghijklmnopqrstuvwxyz0123456789.,"))
        elif kind == 1:
            out.append(ch)
            out.append(rng.choice("abcdefghijklmnopqrstuvwxyz.,"))
        # kind 2 deletes
    return "".join(out)


def seeded(seed):
    return random.Random(seed)
