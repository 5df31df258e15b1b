"""VAUQ hallucination scoring for vision-language models.

Thin Python layer over the native ``_vauq`` extension. Dict arguments are
serialized to JSON before they cross into C++.
"""

import json as _json

from . import _vauq
from ._vauq import (
    BackendError,
    ConfigError,
    DataError,
    DegenerateSample,
    InvalidArgument,
    Trace,
    VauqError,
    aggregate_attention,
    auroc,
    chain_of_embeddings,
    eigenscore,
    ingest_judgments,
    known_scores,
    mask_cardinality,
    mean_entropy,
    normalize_answer,
    parse_confidence,
    perplexity,
    random_mask,
    semantic_entropy,
    sweep,
    synth,
    top_k_mask,
    vauq_score,
    vauq_score_expanded,
    verbalized_prompt,
)

__all__ = [
    "BackendError", "ConfigError", "DataError", "DegenerateSample", "InvalidArgument", "ToyModel", "Trace",
    "VauqError", "aggregate_attention", "auroc", "chain_of_embeddings", "eigenscore", "ingest_judgments",
    "known_scores", "mask_cardinality", "mean_entropy", "normalize_answer", "parse_confidence", "perplexity",
    "random_mask", "score", "evaluate", "semantic_entropy", "sweep", "synth", "top_k_mask", "vauq_score",
    "vauq_score_expanded", "verbalized_prompt",
]


class ToyModel(_vauq.ToyModel):
    """Deterministic toy backend. ``config`` may hold ``arch`` and ``scene`` dicts."""

    def __init__(self, config=None):
        super().__init__(_json.dumps(config) if config else "")

    def add_scene(self, image_ref, scene):
        super().add_scene(image_ref, _json.dumps(scene))


def score(config):
    """Runs the ``score`` command from a run-config dict; returns (exit_code, log)."""
    return _vauq.run_score(_json.dumps(config))


def evaluate(config):
    """Runs the ``eval`` command from a run-config dict; returns (exit_code, log)."""
    return _vauq.run_eval(_json.dumps(config))
