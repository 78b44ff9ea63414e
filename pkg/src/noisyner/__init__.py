"""Noise, alignment and evaluation tools for NER on OCR'd historical text."""

from .alignment import (AlignmentPath, Costs, EditOp, WindowConfig, align_and_transfer,
                        edit_distance, flag_entity_ocr_errors, transfer_labels,
                        wagner_fischer, windowed_align)
from .conll_io import (ColumnSpec, ConllFormatError, Corpus, Label, Sentence, TagScheme,
                       Token, convert_scheme, corpus_stats, downsample, map_tagset,
                       parse_conll, plain_text, split_corpus, write_conll)
from .corruption import CorruptionConfig, corrupt_corpus, load_alphabet
from .evaluation import (EntitySpan, EvalReport, SigTestResult, evaluate, evaluate_subset,
                         extract_entities, significance_test)
from .ocr_channel import (ExternalPipelineConfig, OcrNoiseConfig, external_ocr,
                          load_confusions, simulate_ocr)

__version__ = "0.1.0"
