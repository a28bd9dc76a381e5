"""Pipeline configuration: one JSON document drives every command."""

from __future__ import annotations

import json
import os
from dataclasses import dataclass, field
from datetime import date


class ConfigError(Exception):
    pass


@dataclass
class PipelineConfig:
    # repo query + window
    repo_language: str = "Python"
    repo_fork_allowed: bool = False
    repo_min_size_kb: int = 30_000
    repo_pushed_after: str = "2021-12-31"
    repo_min_stars: int = 1_000
    window_start: str = "2022-01-02"
    window_end: str = "2023-01-01"

    # paths
    clones: list[str] = field(default_factory=list)
    corpus: str = "work/corpus.jsonl"
    work_dir: str = "work"
    output_dir: str = "out"
    cache_path: str = "work/replay_cache.jsonl"

    # tokenizer
    bpe_vocab_size: int = 500

    # dedup / testbeds
    dedup_threshold: float = 0.7
    testbed_size: int = 3000
    seed: int = 0

    # treatments / llm
    treatment_templates: dict = field(default_factory=dict)
    study_testbed: str = "WithDocstring"
    llm_model: str = "gpt-3.5-turbo"
    llm_params: dict = field(default_factory=lambda: {"temperature": 0})
    llm_mode: str = "replay"

    # scm / estimators
    scm_outcome: str = "y_lev_similarity"
    scm_confounders: list[str] = field(default_factory=lambda: [
        "prompt_size", "n_whitespaces", "token_count", "nloc"])
    scm_effect_modifiers: list[str] = field(default_factory=lambda: [
        "complexity", "n_ast_nodes", "n_ast_errors", "n_ast_levels"])
    estimator_params: dict = field(default_factory=dict)
    min_per_arm: int = 30
    eps_placebo: float = 0.05
    refuter_delta: float = 0.10

    jobs: int = 1

    def __post_init__(self):
        if not 0.0 < self.dedup_threshold <= 1.0:
            raise ConfigError("dedup_threshold must be in (0, 1]")
        date.fromisoformat(self.window_start)
        date.fromisoformat(self.window_end)

    # -- path helpers --------------------------------------------------------

    def resolve(self, base_dir: str) -> "PipelineConfig":
        """Anchor all relative paths at the config file's directory."""
        def fix(p: str) -> str:
            return p if os.path.isabs(p) else os.path.join(base_dir, p)
        self.clones = [fix(p) for p in self.clones]
        self.corpus = fix(self.corpus)
        self.work_dir = fix(self.work_dir)
        self.output_dir = fix(self.output_dir)
        self.cache_path = fix(self.cache_path)
        return self

    def work_path(self, name: str) -> str:
        return os.path.join(self.work_dir, name)

    def out_path(self, *parts: str) -> str:
        return os.path.join(self.output_dir, *parts)


def load_config(path: str, seed_override: int | None = None) -> PipelineConfig:
    try:
        with open(path, encoding="utf-8") as fh:
            doc = json.load(fh)
    except FileNotFoundError as exc:
        raise ConfigError(f"config file not found: {path}") from exc
    except json.JSONDecodeError as exc:
        raise ConfigError(f"config is not valid JSON: {exc}") from exc
    known = {f for f in PipelineConfig.__dataclass_fields__}
    unknown = set(doc) - known
    if unknown:
        raise ConfigError(f"unknown config keys: {sorted(unknown)}")
    cfg = PipelineConfig(**doc)
    if seed_override is not None:
        cfg.seed = seed_override
    return cfg.resolve(os.path.dirname(os.path.abspath(path)))
