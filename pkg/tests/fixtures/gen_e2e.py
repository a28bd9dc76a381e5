"""Regenerate the end-to-end fixtures: a 60-method corpus and a replay
cache holding deterministic fake completions for control/T1/T2.

Run from the repo root:  python3 tests/fixtures/gen_e2e.py

The corpus is synthetic but shaped like mined code: unique identifiers that
repeat within each method, docstrings and commit messages long enough for
every testbed filter, a spread of lengths (so outcome distances correlate
with size features) and a few methods with deliberate syntax damage (so
n_ast_errors varies). Responses are seeded mutations of the true method:
T2 mutates least, T1 most, so the study has a known effect direction.
"""

import hashlib
import json
import os
import random
import sys
import tempfile

FIXDIR = os.path.dirname(os.path.abspath(__file__))
E2E = os.path.join(FIXDIR, "e2e")

STEMS = ["ledger", "voyage", "granite", "copper", "willow", "ember",
         "harbor", "falcon", "quartz", "meadow", "cobalt", "saffron",
         "timber", "lagoon", "drift", "summit", "basalt", "orchid",
         "tundra", "cinder", "maple", "fjord", "prairie", "garnet",
         "breeze", "canyon", "heron", "jasper", "krill", "lumen",
         "marble", "nectar", "osprey", "pebble", "quiver", "raven",
         "sequoia", "thistle", "umber", "vessel", "walnut", "xenon",
         "yarrow", "zephyr", "anchor", "bramble", "crest", "dune",
         "eddy", "flint", "grove", "hollow", "inlet", "juniper",
         "kelp", "loam", "mesa", "notch", "oasis", "pinnacle",
         "reef", "shale", "trellis", "updraft", "verge", "wharf",
         "yonder", "zenith", "arbor", "bluff", "cairn", "delta",
         "estuary", "fen", "gorge", "headland", "isle", "knoll",
         "lichen", "moraine"]


def _method_code(i: int, rng: random.Random, docstring: str) -> str:
    stem = STEMS[i]
    arg = f"{stem}_items"
    acc = f"{stem}_total"
    limit = rng.randint(3, 40)
    scale = rng.randint(2, 19)
    kind = i % 6
    # heavy-tailed size mix: most methods short, some an order of magnitude
    # longer, so per-treatment prompt sizes overlap across arms
    extra_lines = rng.choice((0, 1, 2, 3, 5, 8, 13, 21, 34))
    pad_shapes = [
        lambda j: f"    {stem}_aux{j} = {acc} * {rng.randint(2, 9)} + {j}\n",
        lambda j: f"    {stem}_tag{j} = '{stem}:{rng.randint(100, 999)}'\n",
        lambda j: (f"    if {stem}_aux{j - 1} < {rng.randint(5, 60)}:\n"
                   f"        {stem}_aux{j - 1} += {scale}\n")
        if j else f"    {stem}_aux0 = {rng.randint(1, 8)}\n",
        lambda j: f"    {stem}_pair{j} = ({acc}, '{stem}_{j}')\n",
    ]
    pad = "".join(pad_shapes[(i + j) % len(pad_shapes)](j)
                  for j in range(extra_lines))
    if kind == 0:
        body = (f"    {acc} = 0\n"
                f"    for {stem}_one in {arg}:\n"
                f"        if {stem}_one > {limit}:\n"
                f"            {acc} += {stem}_one * {scale}\n"
                f"{pad}"
                f"    return {acc}\n")
    elif kind == 1:
        body = (f"    {acc} = len({arg}) * {scale}\n"
                f"    while {acc} > {limit}:\n"
                f"        {acc} -= {limit}\n"
                f"{pad}"
                f"    return {acc}\n")
    elif kind == 2:
        body = (f"    try:\n"
                f"        {acc} = {arg}[{rng.randint(0, 3)}] / {scale}\n"
                f"    except (IndexError, ZeroDivisionError):\n"
                f"        {acc} = {limit}\n"
                f"{pad}"
                f"    return {acc} + {limit}\n")
    elif kind == 3:
        body = (f"    {acc} = [{stem}_v * {scale} for {stem}_v in {arg} "
                f"if {stem}_v != {limit}]\n"
                f"{pad}"
                f"    return sorted({acc})\n")
    elif kind == 4:
        body = (f"    {acc} = {{}}\n"
                f"    for {stem}_key in {arg}:\n"
                f"        {acc}[{stem}_key] = {acc}.get({stem}_key, 0) + {scale}\n"
                f"{pad}"
                f"    return {acc}\n")
    else:
        body = (f"    if not {arg}:\n"
                f"        return '{stem}-empty'\n"
                f"    {acc} = '-'.join(str({stem}_s) for {stem}_s in {arg})\n"
                f"{pad}"
                f"    return {acc}[:{limit + 20}]\n")
    code = (f"def {stem}_process({arg}):\n"
            f'    """{docstring}"""\n'
            f"{body}")
    if i in (7, 23, 41, 61):  # mined code is not always syntactically clean
        code = code.replace("    return ", f"    {stem}_note = 'unterminated\n    return ", 1)
    return code


DOC_VERBS = ["Aggregate", "Filter", "Normalize", "Collapse", "Partition",
             "Index", "Accumulate", "Transform", "Summarize", "Reconcile"]

MSG_HEADS = ["rework", "tighten", "refactor", "speed up", "simplify",
             "harden", "extend", "align", "repair", "streamline"]


def _docstring(i: int, rng: random.Random) -> str:
    stem = STEMS[i]
    verb = DOC_VERBS[i % len(DOC_VERBS)]
    return (f"{verb} the {stem} records over every batch and return the "
            f"combined result for downstream consumers of size "
            f"{rng.randint(2, 99)}.")


def _message(i: int, rng: random.Random) -> str:
    stem = STEMS[i]
    head = MSG_HEADS[i % len(MSG_HEADS)]
    return (f"{head} {stem} handling so edge cases around empty batches "
            f"and oversized payloads stay covered by ticket "
            f"{rng.randint(100, 999)}")


def make_corpus(path: str) -> None:
    from codecausal.ingest import RawSample, export_jsonl
    from datetime import datetime, timezone

    rng = random.Random(99)
    samples = []
    for i in range(80):
        doc = _docstring(i, rng)
        code = _method_code(i, rng, doc)
        day = 1 + (i * 5) % 330
        committed = datetime(2022, 1, 2, 12, 0, tzinfo=timezone.utc)
        committed = committed.fromtimestamp(committed.timestamp() + day * 86_400,
                                            tz=timezone.utc)
        samples.append(RawSample(
            commit_id=hashlib.sha1(f"fixture-{i}".encode()).hexdigest(),
            repository="fixture-repo",
            path=f"pkg/{STEMS[i]}.py",
            file_name=f"{STEMS[i]}.py",
            fun_name=f"{STEMS[i]}_process",
            commit_message=_message(i, rng),
            docstring=doc,
            code=code,
            committed_at=committed,
        ))
    with open(path, "wb") as fh:
        fh.write(export_jsonl(samples))


FIXTURE_CONFIG = {
    "window_start": "2022-01-02",
    "window_end": "2023-01-01",
    "corpus": "corpus.jsonl",
    "work_dir": "work",
    "output_dir": "out",
    "cache_path": "replay_cache.jsonl",
    "bpe_vocab_size": 1200,
    "dedup_threshold": 0.7,
    "testbed_size": 50,
    "seed": 20220102,
    "study_testbed": "WithDocstring",
    "llm_model": "replay-llm",
    "llm_params": {"temperature": 0},
    "llm_mode": "replay",
    "estimator_params": {"n_strata": 5, "ridge": 1.0},
    "min_per_arm": 30,
}

MUTATION_FACTOR = {"control": 0.12, "T1": 0.22, "T2": 0.06}
MUTATION_JITTER = {"control": 0.05, "T1": 0.06, "T2": 0.03}


def _mutate(code: str, point_id: str, treatment: str) -> str:
    rng = random.Random(f"{point_id}:{treatment}")
    factor = MUTATION_FACTOR[treatment] + rng.random() * MUTATION_JITTER[treatment]
    chars = list(code)
    n_edits = max(1, int(len(code) * factor))
    for _ in range(n_edits):
        op = rng.choice(("del", "sub", "ins"))
        pos = rng.randrange(len(chars))
        if op == "del" and len(chars) > 20:
            del chars[pos]
        elif op == "sub":
            chars[pos] = rng.choice("abcdexyz_ 0123")
        else:
            chars.insert(pos, rng.choice("abcdexyz_ 0123"))
    return "".join(chars)


def make_cache(corpus_path: str, cache_path: str) -> None:
    from codecausal.cli import (run_extract, run_validate, run_dedup,
                                run_build_testbeds, run_prompt)
    from codecausal.config import PipelineConfig
    from codecausal.llm_eval import request_hash
    from codecausal._io import read_jsonl

    with tempfile.TemporaryDirectory() as tmp:
        cfg_doc = dict(FIXTURE_CONFIG)
        cfg_doc["corpus"] = corpus_path
        cfg_doc["cache_path"] = os.path.join(tmp, "cache.jsonl")
        cfg = PipelineConfig(**cfg_doc).resolve(tmp)
        run_extract(cfg)
        run_validate(cfg)
        run_dedup(cfg)
        run_build_testbeds(cfg)
        run_prompt(cfg)
        prompts = read_jsonl(cfg.work_path("prompts.jsonl"))

    entries = []
    for row in prompts:
        generated = _mutate_response(row)
        entries.append({
            "request_hash": request_hash(FIXTURE_CONFIG["llm_model"],
                                         FIXTURE_CONFIG["llm_params"],
                                         row["prompts"]),
            "model": FIXTURE_CONFIG["llm_model"],
            "params": FIXTURE_CONFIG["llm_params"],
            "prompts": row["prompts"],
            "response": generated,
            "timestamp": 0,
        })
    with open(cache_path, "w", encoding="utf-8") as fh:
        for entry in entries:
            fh.write(json.dumps(entry, sort_keys=True) + "\n")


def _mutate_response(prompt_row: dict) -> str:
    # reconstruct the full method from the prompt's code payload: the last
    # fenced/backticked chunk of the final step is the cut prefix; the
    # response pretends to complete it, then we mutate the whole method
    from codecausal._io import read_jsonl  # noqa: F401  (kept for parity)
    point_id = prompt_row["point_id"]
    treatment = prompt_row["treatment"]
    code = _FULL_CODE[point_id]
    mutated = _mutate(code, point_id, treatment)
    return ("Here is the completed method:\n"
            f"```python\n{mutated}\n```\n"
            "Let me know if anything else is needed.")


_FULL_CODE: dict = {}


def main() -> None:
    os.makedirs(E2E, exist_ok=True)
    corpus_path = os.path.join(E2E, "corpus.jsonl")
    make_corpus(corpus_path)

    # learn point_id -> full code from a pipeline run, then record responses
    from codecausal.cli import (run_extract, run_validate, run_dedup,
                                run_build_testbeds)
    from codecausal.config import PipelineConfig
    from codecausal._io import read_jsonl

    with tempfile.TemporaryDirectory() as tmp:
        cfg_doc = dict(FIXTURE_CONFIG)
        cfg_doc["corpus"] = corpus_path
        cfg = PipelineConfig(**cfg_doc).resolve(tmp)
        run_extract(cfg)
        run_validate(cfg)
        run_dedup(cfg)
        run_build_testbeds(cfg)
        bed_rows = read_jsonl(cfg.work_path("testbeds/WithDocstring.jsonl"))
        _FULL_CODE.update({row["point_id"]: row["code"] for row in bed_rows})

    make_cache(corpus_path, os.path.join(E2E, "replay_cache.jsonl"))
    with open(os.path.join(E2E, "pipeline.json"), "w", encoding="utf-8") as fh:
        json.dump(FIXTURE_CONFIG, fh, indent=2, sort_keys=True)
        fh.write("\n")
    print(f"fixtures written under {E2E}")


if __name__ == "__main__":
    sys.exit(main())
