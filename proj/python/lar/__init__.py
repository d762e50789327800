"""Latent action reparameterization: mine, compress, expand, distill-prep."""

from lar._core import (
    Corpus,
    DualPair,
    Error,
    IoError,
    LatentAction,
    ParseError,
    SpanReplacement,
    Token,
    ValidationError,
    Vocabulary,
    __version__,
    alignment_mask,
    compress,
    identify,
    kl_distill_loss,
    load_corpus,
    load_pairs,
    load_vocabulary,
    rate,
    save_pairs,
    save_vocabulary,
    sweep,
    tokenize,
    verify_pairs,
)

__all__ = [
    "Corpus",
    "DualPair",
    "Error",
    "IoError",
    "LatentAction",
    "ParseError",
    "SpanReplacement",
    "Token",
    "ValidationError",
    "Vocabulary",
    "__version__",
    "alignment_mask",
    "compress",
    "identify",
    "kl_distill_loss",
    "load_corpus",
    "load_pairs",
    "load_vocabulary",
    "rate",
    "save_pairs",
    "save_vocabulary",
    "sweep",
    "tokenize",
    "verify_pairs",
]
