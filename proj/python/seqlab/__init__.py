"""LSTM sequence-modeling laboratory.

Thin re-export of the compiled ``_seqlab`` module: fp64 LSTM language models
trained by truncated BPTT, with dropout applied to the non-recurrent
connections only, plus perplexity evaluation, sampling, beam search,
probability-averaging ensembles, and binary checkpoints.
"""

from _seqlab import (
    Checkpoint,
    Corpus,
    ModelParams,
    TrainConfig,
    Vocabulary,
    beam_search,
    corpus_from_text,
    cyclic_toy_text,
    ensemble_perplexity,
    init_params,
    load_checkpoint,
    load_corpus,
    markov_text,
    perplexity,
    preset,
    preset_names,
    sample,
    save_checkpoint,
    train,
)

__all__ = [
    "Checkpoint",
    "Corpus",
    "ModelParams",
    "TrainConfig",
    "Vocabulary",
    "beam_search",
    "corpus_from_text",
    "cyclic_toy_text",
    "ensemble_perplexity",
    "init_params",
    "load_checkpoint",
    "load_corpus",
    "markov_text",
    "perplexity",
    "preset",
    "preset_names",
    "sample",
    "save_checkpoint",
    "train",
]
