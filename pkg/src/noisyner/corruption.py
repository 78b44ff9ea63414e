"""Synthetic misspellings: one random insert, removal or transposition per word.

Word boundaries never move, so labels carry over token by token.
"""

from __future__ import annotations

import random
from dataclasses import dataclass, field, replace
from importlib import resources
from pathlib import Path
from typing import Optional, Union

from .conll_io import Corpus, Sentence, Token

OPERATIONS = ("insert", "remove", "transpose")


def load_alphabet(name_or_path: Union[str, Path]) -> str:
    """Load an alphabet file (one character per line).

    ``"fr"`` and ``"nl"`` resolve to the bundled alphabets.
    """
    if str(name_or_path) in ("fr", "nl"):
        text = resources.files("noisyner.data").joinpath(
            f"alphabet_{name_or_path}.txt").read_text(encoding="utf-8")
    else:
        text = Path(name_or_path).read_text(encoding="utf-8")
    chars = [line for line in text.split("\n") if line]
    bad = [c for c in chars if len(c) != 1 or c.isspace()]
    if bad:
        raise ValueError(f"alphabet lines must hold exactly one character: {bad[:3]}")
    return "".join(dict.fromkeys(chars))


@dataclass
class CorruptionConfig:
    rate: float = 0.2
    operations: tuple[str, ...] = OPERATIONS
    alphabet: str = field(default_factory=lambda: load_alphabet("fr"))
    seed: int = 0

    def __post_init__(self):
        if not 0.0 <= self.rate <= 1.0:
            raise ValueError("rate must lie in [0, 1]")
        self.operations = tuple(self.operations)
        if not self.operations or set(self.operations) - set(OPERATIONS):
            raise ValueError(f"operations must be a non-empty subset of {OPERATIONS}")
        if not self.alphabet:
            raise ValueError("alphabet must not be empty")


def is_eligible(surface: str) -> bool:
    return any(ch.isalpha() for ch in surface)


def _applicable(op: str, word: str) -> bool:
    if op == "insert":
        return True
    if op == "remove":
        return len(word) >= 2
    # a swap of two equal characters would be a no-op
    return any(a != b for a, b in zip(word, word[1:]))


def corrupt_word(word: str, rng: random.Random, operations=OPERATIONS,
                 alphabet: str = "") -> tuple[str, Optional[str]]:
    """Apply one uniformly chosen applicable operation.

    Returns the new word and the operation name (``None`` if nothing applied).
    """
    ops = [op for op in operations if _applicable(op, word)]
    if not ops:
        return word, None
    op = rng.choice(ops)
    if op == "insert":
        pos = rng.randrange(len(word) + 1)
        return word[:pos] + rng.choice(alphabet) + word[pos:], op
    if op == "remove":
        pos = rng.randrange(len(word))
        return word[:pos] + word[pos + 1:], op
    pairs = [k for k in range(len(word) - 1) if word[k] != word[k + 1]]
    k = rng.choice(pairs)
    return word[:k] + word[k + 1] + word[k] + word[k + 2:], op


def _token_rng(seed: int, sent_idx: int, tok_idx: int) -> random.Random:
    return random.Random(f"corrupt:{seed}:{sent_idx}:{tok_idx}")


def corrupt_sentence(sentence: Sentence, sent_idx: int, config: CorruptionConfig) -> Sentence:
    tokens = []
    for tok_idx, tok in enumerate(sentence.tokens):
        if is_eligible(tok.surface):
            rng = _token_rng(config.seed, sent_idx, tok_idx)
            if rng.random() < config.rate:
                new, _ = corrupt_word(tok.surface, rng, config.operations, config.alphabet)
                tok = replace(tok, surface=new)
        tokens.append(tok)
    return Sentence(tokens)


def corrupt_corpus(corpus: Corpus, config: CorruptionConfig) -> Corpus:
    """Corrupt each eligible token with probability ``config.rate``.

    Randomness is a pure function of (seed, sentence index, token index), so
    sentences can be processed in any order with the same result.
    """
    sents = [corrupt_sentence(s, i, config) for i, s in enumerate(corpus.sentences)]
    return Corpus(sents, corpus.scheme, corpus.language)
