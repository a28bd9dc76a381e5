"""Prompt rendering, completion client and outcome metrics."""

from __future__ import annotations

from dataclasses import dataclass

from .metrics import (bleu, codebleu, levenshtein, weighted_bleu, ast_match,
                      dataflow_match, MetricError)
from .prompts import (TreatmentSpec, default_treatments, render_prompts,
                      treatments_from_config, PromptError, TREATMENT_IDS)
from .client import (CompletionClient, ReplayCache, ClientError,
                     ReplayMissError, extract_code, request_hash)


@dataclass(frozen=True)
class EvalRecord:
    """Per-point, per-treatment outcome row."""

    point_id: str
    treatment: str
    prompt_size: int
    generated: str
    y_bleu: float
    y_codebleu: float
    y_lev_distance: int
    y_lev_similarity: float

    def __post_init__(self):
        if self.prompt_size < 1:
            raise ValueError("prompt_size must be at least 1")
        if self.y_lev_distance < 0:
            raise ValueError("distance must be non-negative")


def evaluate_point(point_id: str, treatment: str, prompt_size: int,
                   generated: str, reference: str) -> EvalRecord:
    """Score one generated completion against its reference."""
    dist, sim = levenshtein(generated, reference)
    return EvalRecord(
        point_id=point_id,
        treatment=treatment,
        prompt_size=prompt_size,
        generated=generated,
        y_bleu=bleu(generated, reference),
        y_codebleu=codebleu(generated, reference),
        y_lev_distance=dist,
        y_lev_similarity=sim,
    )


__all__ = [
    "EvalRecord", "evaluate_point",
    "bleu", "codebleu", "levenshtein", "weighted_bleu", "ast_match",
    "dataflow_match", "MetricError",
    "TreatmentSpec", "default_treatments", "render_prompts",
    "treatments_from_config", "PromptError", "TREATMENT_IDS",
    "CompletionClient", "ReplayCache", "ClientError", "ReplayMissError",
    "extract_code", "request_hash",
]
