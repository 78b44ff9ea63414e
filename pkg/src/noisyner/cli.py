"""Command-line front end: ``noisyner <subcommand> ...``.

Every subcommand prints one JSON summary line on stdout.  Exit status is 0 on
success, 1 for usage errors and 2 for bad input data.
"""

from __future__ import annotations

import argparse
import configparser
import hashlib
import json
import logging
import sys
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional

from . import alignment, conll_io, corruption, evaluation, ocr_channel
from .conll_io import ColumnSpec, TagScheme

log = logging.getLogger("noisyner")

# align-transfer output keeps the label last so default readers ignore the flag
FLAGGED_COLUMNS = ColumnSpec(token_column=0, flag_column=1, label_column=-1)


class UsageError(Exception):
    pass


class DataError(Exception):
    pass


def stage_seed(global_seed: int, stage: str) -> int:
    digest = hashlib.sha256(f"{global_seed}:{stage}".encode()).digest()
    return int.from_bytes(digest[:8], "big")


@dataclass
class PipelineConfig:
    """Flat key/value settings, e.g. ``rate = 0.2`` or ``cost_threshold = 0.3``."""
    values: dict = field(default_factory=dict)

    @classmethod
    def load(cls, path: Optional[str]) -> "PipelineConfig":
        if not path:
            return cls()
        parser = configparser.ConfigParser(interpolation=None)
        try:
            text = Path(path).read_text(encoding="utf-8")
            parser.read_string("[pipeline]\n" + text)
        except (OSError, configparser.Error) as exc:
            raise UsageError(f"cannot read config {path}: {exc}") from None
        return cls({k.replace("-", "_"): v for k, v in parser["pipeline"].items()})


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        print(f"{self.prog}: error: {message}", file=sys.stderr)
        sys.exit(1)


def _columns(args) -> ColumnSpec:
    flag_col = args.flag_col if getattr(args, "flag_col", None) is not None else None
    return ColumnSpec(args.token_col, args.label_col,
                      "tab" if args.tab else "whitespace", flag_col)


def _read(path: str, args, scheme: Optional[str] = None, columns: Optional[ColumnSpec] = None
          ) -> conll_io.Corpus:
    try:
        text = Path(path).read_text(encoding="utf-8")
    except OSError as exc:
        raise DataError(f"{path}: {exc}") from None
    except UnicodeDecodeError as exc:
        raise DataError(f"{path}: not UTF-8 ({exc})") from None
    try:
        return conll_io.parse_conll(text, columns or _columns(args),
                                    scheme=TagScheme(scheme) if scheme else None,
                                    language=args.language, repair=args.repair)
    except conll_io.ConllFormatError as exc:
        raise DataError(f"{path}: {exc}") from None


def _write(path: str, text: str) -> None:
    Path(path).parent.mkdir(parents=True, exist_ok=True)
    Path(path).write_text(text, encoding="utf-8")


def _summary(**kw) -> None:
    print(json.dumps(kw, sort_keys=True, ensure_ascii=False))


def _setting(args, cfg: PipelineConfig, name: str, default, cast=None):
    """Flag value if given, else config file value, else default."""
    val = getattr(args, name, None)
    if val is not None:
        return val
    if name in cfg.values:
        raw = cfg.values[name]
        try:
            return (cast or type(default))(raw)
        except ValueError:
            raise UsageError(f"config value {name}={raw!r} is not valid") from None
    return default


def _seed_for(args, cfg, stage: str) -> int:
    seed = _setting(args, cfg, "seed", None, int)
    return stage_seed(0, stage) if seed is None else stage_seed(seed, stage)


# --- subcommands ----------------------------------------------------------------

def cmd_convert(args, cfg):
    corpus = _read(args.input, args, args.scheme)
    out = conll_io.convert_scheme(corpus, TagScheme(args.to))
    _write(args.output, conll_io.write_conll(out, _columns(args)))
    _summary(command="convert", sentences=len(out), tokens=out.token_count, scheme=out.scheme.value)


def _parse_mapping(spec: Optional[str]) -> dict:
    if not spec:
        return dict(conll_io.EUROPEANA_MAPPING)
    mapping = {t: t for t in conll_io.ENTITY_TYPES}
    for item in spec.split(","):
        if "=" not in item:
            raise UsageError(f"bad mapping entry {item!r}; expected SRC=DST or SRC=drop")
        src, dst = (x.strip() for x in item.split("=", 1))
        mapping[src] = None if dst.lower() == "drop" else dst
    return mapping


def cmd_map_tags(args, cfg):
    corpus = _read(args.input, args, args.scheme)
    try:
        out = conll_io.map_tagset(corpus, _parse_mapping(args.map))
    except (KeyError, ValueError) as exc:
        raise UsageError(str(exc)) from None
    _write(args.output, conll_io.write_conll(out, _columns(args)))
    _summary(command="map-tags", sentences=len(out), tokens=out.token_count)


def cmd_split(args, cfg):
    ratios_s = _setting(args, cfg, "ratios", "0.8,0.1,0.1", str)
    try:
        ratios = tuple(float(x) for x in ratios_s.split(","))
    except ValueError:
        raise UsageError(f"bad --ratios {ratios_s!r}") from None
    corpus = _read(args.input, args, args.scheme)
    try:
        parts = conll_io.split_corpus(corpus, ratios)
    except ValueError as exc:
        raise UsageError(str(exc)) from None
    outdir = Path(args.outdir)
    sizes = {}
    for name, part in zip(("train", "dev", "test"), parts):
        _write(str(outdir / f"{args.prefix}{name}.conll"), conll_io.write_conll(part, _columns(args)))
        sizes[name] = {"sentences": len(part), "tokens": part.token_count}
    _summary(command="split", **sizes)


def cmd_downsample(args, cfg):
    target = _setting(args, cfg, "target_tokens", 525_000, int)
    corpus = _read(args.input, args, args.scheme)
    out = conll_io.downsample(corpus, target, _seed_for(args, cfg, "downsample"))
    _write(args.output, conll_io.write_conll(out, _columns(args)))
    _summary(command="downsample", sentences=len(out), tokens=out.token_count, target=target)


def cmd_corrupt(args, cfg):
    rate = _setting(args, cfg, "rate", 0.2, float)
    ops = _setting(args, cfg, "operations", ",".join(corruption.OPERATIONS), str)
    alpha_src = _setting(args, cfg, "alphabet", args.language if args.language in ("fr", "nl") else "fr", str)
    try:
        config = corruption.CorruptionConfig(
            rate=rate, operations=tuple(o.strip() for o in ops.split(",") if o.strip()),
            alphabet=corruption.load_alphabet(alpha_src), seed=_seed_for(args, cfg, "corrupt"))
    except (ValueError, OSError) as exc:
        raise UsageError(str(exc)) from None
    corpus = _read(args.input, args, args.scheme)
    out = corruption.corrupt_corpus(corpus, config)
    changed = sum(a.surface != b.surface for s, t in zip(corpus, out) for a, b in zip(s, t))
    _write(args.output, conll_io.write_conll(out, _columns(args)))
    _summary(command="corrupt", sentences=len(out), tokens=out.token_count, corrupted=changed)


def cmd_synocr(args, cfg):
    corpus = _read(args.input, args, args.scheme)
    command = _setting(args, cfg, "external", None, str)
    try:
        if command:
            ext = ocr_channel.ExternalPipelineConfig(
                command, _setting(args, cfg, "batch_size", 150, int),
                _setting(args, cfg, "timeout", 600.0, float),
                _setting(args, cfg, "workers", 1, int))
            try:
                text = ocr_channel.external_ocr(corpus, ext)
            except ocr_channel.ExternalOcrError as exc:
                raise DataError(str(exc)) from None
            channel = "external"
        else:
            table_path = _setting(args, cfg, "confusions", None, str)
            defaults = ocr_channel.OcrNoiseConfig()
            params = {name: _setting(args, cfg, name, getattr(defaults, name), float)
                      for name in ("p_substitute", "p_delete", "p_insert", "p_space_split",
                                   "p_space_merge", "p_illegible_line")}
            noise = ocr_channel.OcrNoiseConfig(
                substitution_table=ocr_channel.load_confusions(table_path),
                seed=_seed_for(args, cfg, "synocr"), **params)
            text = ocr_channel.simulate_ocr(corpus, noise)
            channel = "simulated"
    except (ValueError, OSError) as exc:
        raise UsageError(str(exc)) from None
    _write(args.output, text)
    _summary(command="synocr", channel=channel, sentences_in=len(corpus),
             lines_out=text.count("\n"), characters=len(text))


def cmd_align_transfer(args, cfg):
    clean = _read(args.clean, args, args.scheme)
    try:
        noisy = Path(args.noisy).read_text(encoding="utf-8")
    except (OSError, UnicodeDecodeError) as exc:
        raise DataError(f"{args.noisy}: {exc}") from None
    d = alignment.WindowConfig()
    try:
        window = alignment.WindowConfig(
            _setting(args, cfg, "initial_window", d.initial_window, int),
            _setting(args, cfg, "cost_threshold", d.cost_threshold, float),
            _setting(args, cfg, "growth_factor", d.growth_factor, float),
            _setting(args, cfg, "max_window", d.max_window, int))
    except ValueError as exc:
        raise UsageError(str(exc)) from None
    if not noisy.strip() or not clean.sentences:
        raise DataError("nothing to align: clean corpus or noisy text is empty")
    labeled, path = alignment.align_and_transfer(clean, noisy, window)
    _write(args.output, conll_io.write_conll(labeled, FLAGGED_COLUMNS))
    if args.dump_alignment:
        _write(args.dump_alignment, alignment.dump_alignment(path))
    flags = alignment.flag_entity_ocr_errors(labeled)
    _summary(command="align-transfer", sentences=len(labeled), tokens=labeled.token_count,
             alignment_cost=path.total_cost, low_quality_regions=len(path.low_quality),
             ocr_error_tokens=sum(t.ocr_error for s in labeled for t in s),
             entities=len(flags), entities_with_ocr_errors=sum(flags.values()))


def _emit_report(report: evaluation.EvalReport, args, command: str) -> None:
    if args.json:
        _write(args.json, report.to_json(indent=2) + "\n")
    if args.table:
        sys.stderr.write(report.to_text())
    o = report.overall
    _summary(command=command, tp=o.tp, fp=o.fp, fn=o.fn, precision=round(o.precision, 6),
             recall=round(o.recall, 6), f1=round(o.f1, 6))


def cmd_eval(args, cfg):
    gold = _read(args.gold, args)
    pred = _read(args.pred, args)
    try:
        report = evaluation.evaluate(gold, pred)
    except evaluation.StructureMismatch as exc:
        raise DataError(str(exc)) from None
    _emit_report(report, args, "eval")


def cmd_eval_ocr_subset(args, cfg):
    gold_cols = ColumnSpec(args.token_col, args.label_col, "tab" if args.tab else "whitespace",
                           args.flag_col if args.flag_col is not None else 1)
    gold = _read(args.gold, args, columns=gold_cols)
    pred = _read(args.pred, args)
    flags = alignment.flag_entity_ocr_errors(gold)
    try:
        report = evaluation.evaluate_subset(gold, pred, flags)
    except evaluation.StructureMismatch as exc:
        raise DataError(str(exc)) from None
    _emit_report(report, args, "eval-ocr-subset")


def cmd_sigtest(args, cfg):
    iterations = _setting(args, cfg, "iterations", 1000, int)
    gold = _read(args.gold, args)
    a = _read(args.pred_a, args)
    b = _read(args.pred_b, args)
    seed = _setting(args, cfg, "seed", 0, int)
    try:
        res = evaluation.significance_test(gold, a, b, iterations, stage_seed(seed, "sigtest"))
    except evaluation.StructureMismatch as exc:
        raise DataError(str(exc)) from None
    _summary(command="sigtest", observed_diff=res.observed_diff, p_value=res.p_value,
             iterations=res.iterations, significant=res.significant)


def cmd_stats(args, cfg):
    out = {}
    for path in args.inputs:
        out[path] = conll_io.corpus_stats(_read(path, args, args.scheme))
    _summary(command="stats", files=out)


# --- parser ----------------------------------------------------------------------

def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="flat key = value settings file (flags win)")
    common.add_argument("--seed", type=int, default=None, help="global seed")
    common.add_argument("--language", default="fr")
    common.add_argument("--token-col", type=int, default=0)
    common.add_argument("--label-col", type=int, default=-1)
    common.add_argument("--flag-col", type=int, default=None)
    common.add_argument("--tab", action="store_true", help="columns are tab separated")
    common.add_argument("--scheme", choices=[s.value for s in TagScheme], default=None,
                        help="force the input tag scheme instead of detecting it")
    common.add_argument("--repair", action="store_true",
                        help="coerce invalid label sequences instead of failing")
    common.add_argument("-v", "--verbose", action="store_true")

    parser = _Parser(prog="noisyner", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", parser_class=_Parser, required=True)

    p = sub.add_parser("convert", parents=[common], help="convert tag scheme")
    p.add_argument("input"); p.add_argument("output")
    p.add_argument("--to", choices=[s.value for s in TagScheme], default="IOB1")
    p.set_defaults(func=cmd_convert)

    p = sub.add_parser("map-tags", parents=[common], help="rename/drop entity types")
    p.add_argument("input"); p.add_argument("output")
    p.add_argument("--map", help="e.g. MISC=drop,PER=PER (default: Europeana PER/ORG/LOC)")
    p.set_defaults(func=cmd_map_tags)

    p = sub.add_parser("split", parents=[common], help="contiguous train/dev/test split")
    p.add_argument("input"); p.add_argument("outdir")
    p.add_argument("--ratios", default=None)
    p.add_argument("--prefix", default="")
    p.set_defaults(func=cmd_split)

    p = sub.add_parser("downsample", parents=[common], help="sentence-wise random downsampling")
    p.add_argument("input"); p.add_argument("output")
    p.add_argument("--target-tokens", type=int, default=None)
    p.set_defaults(func=cmd_downsample)

    p = sub.add_parser("corrupt", parents=[common], help="inject synthetic misspellings")
    p.add_argument("input"); p.add_argument("output")
    p.add_argument("--rate", type=float, default=None)
    p.add_argument("--operations", default=None, help="comma list of insert,remove,transpose")
    p.add_argument("--alphabet", default=None, help="fr, nl or a file with one char per line")
    p.set_defaults(func=cmd_corrupt)

    p = sub.add_parser("synocr", parents=[common], help="produce OCR-like raw text")
    p.add_argument("input"); p.add_argument("output")
    p.add_argument("--external", default=None, help="command reading text on stdin")
    p.add_argument("--batch-size", type=int, default=None)
    p.add_argument("--timeout", type=float, default=None)
    p.add_argument("--workers", type=int, default=None)
    p.add_argument("--confusions", default=None, help="source<TAB>replacement<TAB>weight file")
    for name in ("p_substitute", "p_delete", "p_insert", "p_space_split",
                 "p_space_merge", "p_illegible_line"):
        p.add_argument("--" + name.replace("_", "-"), dest=name, type=float, default=None)
    p.set_defaults(func=cmd_synocr)

    p = sub.add_parser("align-transfer", parents=[common],
                       help="align noisy text to a clean corpus and transfer labels")
    p.add_argument("clean"); p.add_argument("noisy"); p.add_argument("output")
    p.add_argument("--initial-window", type=int, default=None)
    p.add_argument("--cost-threshold", type=float, default=None)
    p.add_argument("--growth-factor", type=float, default=None)
    p.add_argument("--max-window", type=int, default=None)
    p.add_argument("--dump-alignment", default=None)
    p.set_defaults(func=cmd_align_transfer)

    for name, func, help_ in (("eval", cmd_eval, "exact-match chunk F1"),
                              ("eval-ocr-subset", cmd_eval_ocr_subset,
                               "F1 on gold entities containing OCR errors")):
        p = sub.add_parser(name, parents=[common], help=help_)
        p.add_argument("gold"); p.add_argument("pred")
        p.add_argument("--json", default=None, help="write the JSON report here")
        p.add_argument("--table", action="store_true", help="print a conlleval-style table to stderr")
        p.set_defaults(func=func)

    p = sub.add_parser("sigtest", parents=[common], help="approximate randomization test")
    p.add_argument("gold"); p.add_argument("pred_a"); p.add_argument("pred_b")
    p.add_argument("--iterations", type=int, default=None)
    p.set_defaults(func=cmd_sigtest)

    p = sub.add_parser("stats", parents=[common], help="token/sentence/entity counts")
    p.add_argument("inputs", nargs="+")
    p.set_defaults(func=cmd_stats)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.DEBUG if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        cfg = PipelineConfig.load(args.config)
        args.func(args, cfg)
    except UsageError as exc:
        print(f"noisyner {args.command}: {exc}", file=sys.stderr)
        return 1
    except DataError as exc:
        print(f"noisyner {args.command}: {exc}", file=sys.stderr)
        return 2
    return 0


if __name__ == "__main__":
    sys.exit(main())
