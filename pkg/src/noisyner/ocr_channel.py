"""OCR-like noise: a built-in character channel and an external-command bridge."""

from __future__ import annotations

import logging
import random
import shlex
import subprocess
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from importlib import resources
from pathlib import Path
from typing import Optional, Union

from .conll_io import Corpus, plain_text

log = logging.getLogger(__name__)

DEFAULT_GARBLE = "-\u2014\u2013_=~^*#%|/\\.,:;'\"<>"
DEFAULT_INSERT = ".,'`-:;|il"


def load_confusions(path: Union[str, Path, None] = None) -> dict[str, list[tuple[str, float]]]:
    """Read a ``source<TAB>replacement<TAB>weight`` file.

    Without a path the bundled table of common OCR confusions is used.
    """
    if path is None:
        text = resources.files("noisyner.data").joinpath(
            "ocr_confusions.tsv").read_text(encoding="utf-8")
    else:
        text = Path(path).read_text(encoding="utf-8")
    table: dict[str, list[tuple[str, float]]] = {}
    for lineno, line in enumerate(text.splitlines(), start=1):
        if not line.strip() or line.startswith("#"):
            continue
        parts = line.split("\t")
        if len(parts) != 3:
            raise ValueError(f"line {lineno}: expected source<TAB>replacement<TAB>weight")
        src, repl, weight = parts[0], parts[1], float(parts[2])
        table.setdefault(src, []).append((repl, weight))
    return table


@dataclass
class OcrNoiseConfig:
    substitution_table: dict = field(default_factory=load_confusions)
    p_substitute: float = 0.02
    p_delete: float = 0.005
    p_insert: float = 0.005
    p_space_split: float = 0.01
    p_space_merge: float = 0.01
    p_illegible_line: float = 0.01
    garble_alphabet: str = DEFAULT_GARBLE
    insert_alphabet: str = DEFAULT_INSERT
    seed: int = 0

    def __post_init__(self):
        for name in ("p_substitute", "p_delete", "p_insert", "p_space_split",
                     "p_space_merge", "p_illegible_line"):
            p = getattr(self, name)
            if not 0.0 <= p <= 1.0:
                raise ValueError(f"{name} must lie in [0, 1], got {p}")
        for src, options in self.substitution_table.items():
            if not 1 <= len(src) <= 2:
                raise ValueError(f"substitution source {src!r} must be 1-2 characters")
            if not options or any(w <= 0 for _, w in options):
                raise ValueError(f"substitution weights for {src!r} must be positive")
            if any(not r or any(c.isspace() for c in r) for r, _ in options):
                raise ValueError(f"replacements for {src!r} must be non-empty, without spaces")
        for alpha in (self.garble_alphabet, self.insert_alphabet):
            if not alpha or any(c.isspace() for c in alpha):
                raise ValueError("garble/insert alphabets must be non-empty and whitespace-free")

    @classmethod
    def quiet(cls, **overrides) -> "OcrNoiseConfig":
        """A channel with every probability set to zero."""
        params = dict(p_substitute=0.0, p_delete=0.0, p_insert=0.0, p_space_split=0.0,
                      p_space_merge=0.0, p_illegible_line=0.0)
        params.update(overrides)
        return cls(**params)


def _noisify_line(line: str, rng: random.Random, cfg: OcrNoiseConfig
                  ) -> tuple[list[str], list[int]]:
    """Return output characters and, for each, the index of its source character
    in ``line`` (-1 for inserted material)."""
    if rng.random() < cfg.p_illegible_line:
        return [rng.choice(cfg.garble_alphabet) for _ in line], list(range(len(line)))

    table = cfg.substitution_table
    out: list[str] = []
    src: list[int] = []
    n = len(line)
    p = 0
    while p < n:
        ch = line[p]
        if ch == " ":
            if rng.random() >= cfg.p_space_merge:
                out.append(" ")
                src.append(p)
            p += 1
            continue

        step = 1
        emitted: Optional[str] = None
        pair = line[p:p + 2]
        if len(pair) == 2 and pair in table and " " not in pair and rng.random() < cfg.p_substitute:
            emitted, step = _weighted(table[pair], rng), 2
        elif ch in table and rng.random() < cfg.p_substitute:
            emitted = _weighted(table[ch], rng)
        elif rng.random() < cfg.p_delete:
            emitted = ""
        else:
            emitted = ch
        out.extend(emitted)
        src.extend([p] * len(emitted))
        p += step

        if rng.random() < cfg.p_insert:
            out.append(rng.choice(cfg.insert_alphabet))
            src.append(-1)
        if p < n and line[p] != " " and rng.random() < cfg.p_space_split:
            out.append(" ")
            src.append(-1)
    return out, src


def _weighted(options: list[tuple[str, float]], rng: random.Random) -> str:
    if len(options) == 1:
        return options[0][0]
    return rng.choices([r for r, _ in options], weights=[w for _, w in options])[0]


def simulate_ocr_with_provenance(corpus: Corpus, config: OcrNoiseConfig
                                 ) -> tuple[str, list[int]]:
    """Like :func:`simulate_ocr`, also returning, for every output character,
    the offset of the clean character it came from in ``plain_text(corpus)``
    (-1 for inserted characters and inserted spaces)."""
    chars: list[str] = []
    prov: list[int] = []
    offset = 0
    for idx, sent in enumerate(corpus.sentences):
        line = " ".join(sent.surfaces)
        rng = random.Random(f"ocr:{config.seed}:{idx}")
        out, src = _noisify_line(line, rng, config)
        chars.extend(out)
        prov.extend(s + offset if s >= 0 else -1 for s in src)
        chars.append("\n")
        prov.append(offset + len(line))
        offset += len(line) + 1
    return "".join(chars), prov


def simulate_ocr(corpus: Corpus, config: OcrNoiseConfig) -> str:
    """Render a corpus as OCR-damaged raw text, one line per sentence.

    Each sentence is independently either replaced by a same-length garble
    line or scanned left to right: two-character confusion rules win over
    single-character ones, then deletion, then a possible inserted character;
    spaces may be dropped (merging tokens) or added inside tokens.
    """
    return simulate_ocr_with_provenance(corpus, config)[0]


# --- external render/recognize pipeline ---------------------------------------

class ExternalOcrError(RuntimeError):
    def __init__(self, batch: int, message: str):
        self.batch = batch
        super().__init__(f"batch {batch}: {message}")


@dataclass
class ExternalPipelineConfig:
    """``channel_command`` reads clean text on stdin and prints recognized text.

    ``{batch}`` in the command is replaced by the 1-based batch number.
    """
    channel_command: str
    batch_size_sentences: int = 150
    timeout: Optional[float] = 600.0
    max_workers: int = 1

    def __post_init__(self):
        if self.batch_size_sentences < 1:
            raise ValueError("batch_size_sentences must be at least 1")
        if self.max_workers < 1:
            raise ValueError("max_workers must be at least 1")


def _run_batch(number: int, text: str, cfg: ExternalPipelineConfig) -> str:
    argv = [a.replace("{batch}", str(number)) for a in shlex.split(cfg.channel_command)]
    try:
        proc = subprocess.run(argv, input=text, capture_output=True, text=True,
                              encoding="utf-8", timeout=cfg.timeout)
    except subprocess.TimeoutExpired:
        raise ExternalOcrError(number, f"timed out after {cfg.timeout}s") from None
    except OSError as exc:
        raise ExternalOcrError(number, f"cannot run {argv[0]!r}: {exc}") from None
    if proc.returncode != 0:
        raise ExternalOcrError(
            number, f"command exited with status {proc.returncode}: {proc.stderr.strip()[:200]}")
    out = proc.stdout
    if not out.strip():
        log.warning("batch %d: external OCR produced no output", number)
        return ""
    return out if out.endswith("\n") else out + "\n"


def external_ocr(corpus: Corpus, config: ExternalPipelineConfig) -> str:
    """Send the corpus through an external OCR pipeline in sentence batches.

    Outputs are concatenated in batch order whatever order batches finish in.
    """
    size = config.batch_size_sentences
    batches = [plain_text(Corpus(corpus.sentences[k:k + size]))
               for k in range(0, len(corpus.sentences), size)]
    if config.max_workers == 1:
        outputs = [_run_batch(i + 1, b, config) for i, b in enumerate(batches)]
    else:
        with ThreadPoolExecutor(config.max_workers) as pool:
            futures = [pool.submit(_run_batch, i + 1, b, config) for i, b in enumerate(batches)]
            outputs = [f.result() for f in futures]
    return "".join(outputs)
