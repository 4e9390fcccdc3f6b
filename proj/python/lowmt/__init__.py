"""Low-resource MT toolkit: subword models, metrics, search and human evaluation."""

import json

from ._core import (
    LowmtError,
    agreement_band,
    bpe_train,
    bpe_train_counts,
    categories,
    chrf,
    cohen_kappa,
    decode,
    emissions_kg,
    encode,
    merges,
    normalize,
    render_report,
    ter,
    tokenize_words,
    unigram_train,
    bleu_sentence,
)
from . import _core


def evaluate(hypotheses, references, lc=False):
    """BLEU, TER and ChrF3 for a corpus as a dict."""
    return json.loads(_core.evaluate_json(list(hypotheses), list(references), lc))


def staged_search_toy(seed=0, cycle_steps=5000):
    return json.loads(_core.staged_search_toy_json(seed, cycle_steps))


__all__ = [
    "LowmtError",
    "agreement_band",
    "bleu_sentence",
    "bpe_train",
    "bpe_train_counts",
    "categories",
    "chrf",
    "cohen_kappa",
    "decode",
    "emissions_kg",
    "encode",
    "evaluate",
    "merges",
    "normalize",
    "render_report",
    "staged_search_toy",
    "ter",
    "tokenize_words",
    "unigram_train",
]
