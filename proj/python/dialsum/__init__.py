"""Dialogue corpus tools: corpus loading, tokenization, pretext corruption,
ROUGE and a tiny trainable transformer."""

import json

from ._core import (  # noqa: F401
    CorpusFormat,
    Corpus,
    Dialogue,
    DialsumError,
    EvalReport,
    ModelConfig,
    PretextConfig,
    RougeScore,
    Split,
    StatsReport,
    Task,
    Utterance,
    Vocab,
    build_emoji_vocab,
    canonicalize_names,
    corpus_stats,
    cosine,
    format_dialogue,
    load_corpus,
    parameter_count,
    parse_dialogue,
    read_corpus_jsonl,
    rouge_l,
    rouge_n,
    rouge_report,
    tokenize,
)
from ._core import _generate_dataset, _run_cli


def generate_dataset(corpus, config, vocab, threads=1):
    """Returns (examples, skipped) where examples are dicts in the jsonl
    record layout and skipped maps reason -> count."""
    records, skipped = _generate_dataset(corpus, config, vocab, threads)
    return [json.loads(r) for r in records], dict(skipped)


def run_cli(*args):
    """Runs a CLI subcommand in-process. Returns (exit_code, stdout, stderr)."""
    return _run_cli([str(a) for a in args])
