"""Pipeline commands.

Each command reads its predecessor's artifacts, writes its own atomically,
and records a manifest (input content hashes, config hash, seed, version)
alongside. A command whose manifest still matches its inputs is skipped, so
re-running the chain is cheap and `run-all` is idempotent. Logs go to
stderr; data only ever goes to files.

Exit codes: 0 success, 1 usage error, 2 data error, 3 upstream-service
error.
"""

from __future__ import annotations

import functools
import json
import os
import sys
from datetime import date

import click

from . import __version__, causal, report, testbeds, tokenization
from ._io import (atomic_write_bytes, atomic_write_text, csv_text, dump_json,
                  load_json, read_csv, read_jsonl, sha256_file, write_jsonl)
from .config import ConfigError, PipelineConfig, load_config
from .features import DataPoint
from .ingest import (DateWindow, IngestError, export_jsonl, import_jsonl,
                     harvest_many, validate_sample)
from .llm_eval import (ClientError, CompletionClient, EvalRecord, PromptError,
                       ReplayCache, evaluate_point, extract_code,
                       render_prompts, treatments_from_config)

EXIT_USAGE = 1
EXIT_DATA = 2
EXIT_UPSTREAM = 3

_DATA_ERRORS = (IngestError, testbeds.TestbedError, causal.CausalError,
                report.ReportError, tokenization.TokenizationError,
                PromptError, ValueError, KeyError, OSError)


class MissingArtifact(Exception):
    def __init__(self, path: str, producer: str):
        super().__init__(f"missing {path}; run {producer} first")


def _config_sha(cfg: PipelineConfig) -> str:
    from hashlib import sha256
    doc = json.dumps(cfg.__dict__, sort_keys=True, default=str)
    return sha256(doc.encode()).hexdigest()


def _manifest_path(cfg: PipelineConfig, command: str) -> str:
    return cfg.work_path(os.path.join("manifests", f"{command}.json"))


def _require(path: str, producer: str) -> str:
    if not os.path.exists(path):
        raise MissingArtifact(path, producer)
    return path


def step(command: str, inputs, outputs):
    """Wrap a command body with manifest bookkeeping and content-hash skip.

    ``inputs``/``outputs`` are functions of the config returning path lists.
    """
    def deco(fn):
        @functools.wraps(fn)
        def wrapper(cfg: PipelineConfig, *args, **kwargs):
            in_paths = inputs(cfg)
            out_paths = outputs(cfg)
            in_hashes = {p: sha256_file(p) for p in in_paths
                         if os.path.exists(p)}
            manifest = {
                "command": command,
                "version": __version__,
                "seed": cfg.seed,
                "config_sha256": _config_sha(cfg),
                "inputs": in_hashes,
            }
            man_path = _manifest_path(cfg, command)
            if os.path.exists(man_path) and all(map(os.path.exists, out_paths)):
                previous = load_json(man_path)
                if {k: previous.get(k) for k in manifest} == manifest:
                    click.echo(f"[{command}] up to date, skipping", err=True)
                    return
            fn(cfg, *args, **kwargs)
            manifest["outputs"] = sorted(os.path.relpath(p, cfg.work_dir)
                                         if p.startswith(cfg.work_dir)
                                         else p for p in out_paths)
            dump_json(manifest, man_path)
            click.echo(f"[{command}] done", err=True)
        return wrapper
    return deco


# ---------------------------------------------------------------------------
# Step implementations
# ---------------------------------------------------------------------------

@step("mine", inputs=lambda c: list(c.clones),
      outputs=lambda c: [c.corpus])
def run_mine(cfg: PipelineConfig) -> None:
    if not cfg.clones:
        if os.path.exists(cfg.corpus):
            click.echo("[mine] no clones configured, using existing corpus",
                       err=True)
            return
        raise IngestError("no clones configured and no corpus file present")
    window = DateWindow(date.fromisoformat(cfg.window_start),
                        date.fromisoformat(cfg.window_end))
    samples = harvest_many(cfg.clones, window, jobs=cfg.jobs)
    atomic_write_bytes(cfg.corpus, export_jsonl(samples))


@step("extract", inputs=lambda c: [c.corpus],
      outputs=lambda c: [c.work_path("corpus_features.jsonl")])
def run_extract(cfg: PipelineConfig) -> None:
    _require(cfg.corpus, "mine")
    with open(cfg.corpus, "rb") as fh:
        samples = import_jsonl(fh.read())
    rows = [testbeds.point_to_row(DataPoint.from_sample(s)) for s in samples]
    write_jsonl(cfg.work_path("corpus_features.jsonl"), rows)


@step("validate", inputs=lambda c: [c.work_path("corpus_features.jsonl")],
      outputs=lambda c: [c.work_path("corpus_valid.jsonl"),
                         c.work_path("validation.csv")])
def run_validate(cfg: PipelineConfig) -> None:
    path = _require(cfg.work_path("corpus_features.jsonl"), "extract")
    window = DateWindow(date.fromisoformat(cfg.window_start),
                        date.fromisoformat(cfg.window_end))
    rows = read_jsonl(path)
    kept, audit = [], []
    for row in rows:
        dp = testbeds.point_from_row(row)
        rep = validate_sample(dp.raw, window)
        audit.append([row.get("commit_id"), row.get("fun_name"),
                      "pass" if rep.passed else "fail",
                      ";".join(rep.reasons)])
        if rep.passed:
            kept.append(row)
    write_jsonl(cfg.work_path("corpus_valid.jsonl"), kept)
    atomic_write_text(cfg.work_path("validation.csv"),
                      csv_text(["commit_id", "fun_name", "status", "reasons"],
                               audit))


@step("dedup", inputs=lambda c: [c.work_path("corpus_valid.jsonl")],
      outputs=lambda c: [c.work_path("bpe_model.json"),
                         c.work_path("rawdata.jsonl"),
                         c.work_path("rawdata_docstring.jsonl"),
                         c.work_path("dedup_raw.json")])
def run_dedup(cfg: PipelineConfig, threshold: float | None = None) -> None:
    path = _require(cfg.work_path("corpus_valid.jsonl"), "validate")
    rows = read_jsonl(path)
    if not rows:
        raise IngestError("validated corpus is empty")
    points = [testbeds.point_from_row(r) for r in rows]
    bpe = tokenization.train_bpe([dp.raw.code for dp in points],
                                 cfg.bpe_vocab_size)
    atomic_write_text(cfg.work_path("bpe_model.json"), bpe.to_json() + "\n")
    beds, reports = testbeds.build_raw_testbeds(
        points, bpe, seed=cfg.seed,
        threshold=threshold if threshold is not None else cfg.dedup_threshold)
    write_jsonl(cfg.work_path("rawdata.jsonl"),
                testbeds.testbed_to_rows(beds["RawData"]))
    write_jsonl(cfg.work_path("rawdata_docstring.jsonl"),
                testbeds.testbed_to_rows(beds["RawDataDocstring"]))
    dump_json({name: {"before": r.before, "dupes": r.dupes, "after": r.after}
               for name, r in reports.items()},
              cfg.work_path("dedup_raw.json"))


TASK_TESTBEDS = ("RandomCut", "WithDocstring", "FromDocstring", "CommitGen",
                 "SummarizationGen")


@step("build-testbeds",
      inputs=lambda c: [c.work_path("rawdata.jsonl"),
                        c.work_path("rawdata_docstring.jsonl"),
                        c.work_path("bpe_model.json")],
      outputs=lambda c: [c.work_path(os.path.join("testbeds", f"{n}.jsonl"))
                         for n in TASK_TESTBEDS] + [c.work_path("dedup_testbeds.json")])
def run_build_testbeds(cfg: PipelineConfig) -> None:
    raw_rows = read_jsonl(_require(cfg.work_path("rawdata.jsonl"), "dedup"))
    doc_rows = read_jsonl(_require(cfg.work_path("rawdata_docstring.jsonl"),
                                   "dedup"))
    bpe = tokenization.BpeModel.from_json(
        open(_require(cfg.work_path("bpe_model.json"), "dedup")).read())
    raw = testbeds.testbed_from_rows(raw_rows, seed=cfg.seed)
    raw_doc = testbeds.testbed_from_rows(doc_rows, seed=cfg.seed)
    beds, reports = testbeds.derive_task_testbeds(
        raw, raw_doc, bpe, n=cfg.testbed_size, seed=cfg.seed,
        threshold=cfg.dedup_threshold)
    for name, bed in beds.items():
        write_jsonl(cfg.work_path(os.path.join("testbeds", f"{name}.jsonl")),
                    testbeds.testbed_to_rows(bed))
    dump_json({name: {"before": r.before, "dupes": r.dupes, "after": r.after}
               for name, r in reports.items()},
              cfg.work_path("dedup_testbeds.json"))


def _study_testbed_path(cfg: PipelineConfig) -> str:
    return cfg.work_path(os.path.join("testbeds", f"{cfg.study_testbed}.jsonl"))


@step("prompt", inputs=lambda c: [_study_testbed_path(c),
                                  c.work_path("bpe_model.json")],
      outputs=lambda c: [c.work_path("prompts.jsonl")])
def run_prompt(cfg: PipelineConfig) -> None:
    rows = read_jsonl(_require(_study_testbed_path(cfg), "build-testbeds"))
    bpe = tokenization.BpeModel.from_json(
        open(_require(cfg.work_path("bpe_model.json"), "dedup")).read())
    specs = treatments_from_config(cfg.treatment_templates)
    bed = testbeds.testbed_from_rows(rows, seed=cfg.seed)
    out = []
    for row, tp in zip(rows, bed.points):
        for tid in ("control", "T1", "T2"):
            prompts = render_prompts(tp, specs[tid])
            size = sum(len(tokenization.encode(bpe, p)) for p in prompts)
            out.append({"point_id": row["point_id"], "treatment": tid,
                        "prompts": prompts, "prompt_size": size})
    write_jsonl(cfg.work_path("prompts.jsonl"), out)


EVAL_COLUMNS = ("point_id", "treatment", "prompt_size", "y_bleu",
                "y_codebleu", "y_lev_distance", "y_lev_similarity")


@step("eval", inputs=lambda c: [c.work_path("prompts.jsonl"),
                                _study_testbed_path(c)],
      outputs=lambda c: [c.work_path("evals.csv"),
                         c.work_path("generations.jsonl")])
def run_eval(cfg: PipelineConfig) -> None:
    prompt_rows = read_jsonl(_require(cfg.work_path("prompts.jsonl"), "prompt"))
    bed_rows = read_jsonl(_require(_study_testbed_path(cfg), "build-testbeds"))
    reference = {row["point_id"]: row["code"] for row in bed_rows}
    client = CompletionClient(cache=ReplayCache(cfg.cache_path),
                              model=cfg.llm_model,
                              params=dict(cfg.llm_params),
                              mode=cfg.llm_mode)
    records: list[EvalRecord] = []
    generations = []
    for row in prompt_rows:
        response = client.complete(row["prompts"])
        generated = extract_code(response)
        rec = evaluate_point(row["point_id"], row["treatment"],
                             row["prompt_size"], generated,
                             reference[row["point_id"]])
        records.append(rec)
        generations.append({"point_id": rec.point_id,
                            "treatment": rec.treatment,
                            "generated": generated})
    rows = [[r.point_id, r.treatment, r.prompt_size,
             f"{r.y_bleu:.12f}", f"{r.y_codebleu:.12f}",
             r.y_lev_distance, f"{r.y_lev_similarity:.12f}"]
            for r in records]
    atomic_write_text(cfg.work_path("evals.csv"),
                      csv_text(EVAL_COLUMNS, rows))
    write_jsonl(cfg.work_path("generations.jsonl"), generations)


def _load_study_records(cfg: PipelineConfig) -> list[dict]:
    """Eval rows joined with their point's code features."""
    header, rows = read_csv(_require(cfg.work_path("evals.csv"), "eval"))
    bed_rows = read_jsonl(_require(_study_testbed_path(cfg), "build-testbeds"))
    features_of = {row["point_id"]: row for row in bed_rows}
    records = []
    for row in rows:
        rec = dict(zip(header, row))
        feats = features_of[rec["point_id"]]
        for key in ("n_whitespaces", "token_count", "nloc", "complexity",
                    "n_ast_nodes", "n_ast_errors", "n_ast_levels",
                    "n_identifiers"):
            rec[key] = feats[key]
        for key in ("prompt_size", "y_lev_distance"):
            rec[key] = int(rec[key])
        for key in ("y_bleu", "y_codebleu", "y_lev_similarity"):
            rec[key] = float(rec[key])
        records.append(rec)
    return records


@step("correlate", inputs=lambda c: [c.work_path("evals.csv")],
      outputs=lambda c: [c.work_path("correlations.json")])
def run_correlate(cfg: PipelineConfig) -> None:
    records = _load_study_records(cfg)
    groups: dict[str, list[dict]] = {}
    for rec in records:
        groups.setdefault(rec["treatment"], []).append(rec)
    variables = list(cfg.scm_confounders) + list(cfg.scm_effect_modifiers)
    out: dict[str, dict] = {}
    for group, rows in sorted(groups.items()):
        out[group] = {}
        for var in variables:
            cell = {}
            for label, outcome in (("dist", "y_lev_distance"),
                                   ("sim", "y_lev_similarity")):
                try:
                    cell[label] = causal.pearson_correlation(
                        [r[var] for r in rows], [r[outcome] for r in rows])
                except causal.CausalError:
                    cell[label] = None  # constant series: undefined
            out[group][var] = cell
    dump_json(out, cfg.work_path("correlations.json"))


@step("ate", inputs=lambda c: [c.work_path("evals.csv")],
      outputs=lambda c: [c.work_path("ate.json")])
def run_ate(cfg: PipelineConfig) -> None:
    records = _load_study_records(cfg)
    out: dict[str, dict] = {}
    for outcome in ("y_lev_distance", "y_lev_similarity"):
        scm = causal.ScmSpec(treatment="T", outcome=outcome,
                             confounders=tuple(cfg.scm_confounders),
                             effect_modifiers=tuple(cfg.scm_effect_modifiers))
        out[outcome] = {}
        for tid in ("T1", "T2"):
            study = causal.run_contrast(
                records, tid, scm, seed=cfg.seed,
                params=cfg.estimator_params,
                eps_placebo=cfg.eps_placebo, delta=cfg.refuter_delta,
                min_per_arm=cfg.min_per_arm)
            out[outcome][tid] = {
                method: {
                    "ate": res.ate,
                    "ate_pct": res.ate_pct,
                    "n_treated": res.n_treated,
                    "n_control": res.n_control,
                    "refutations": {
                        refuter: {"refuted_ate": rr.refuted_ate,
                                  "stable": rr.stable}
                        for refuter, rr in study.refutations[method].items()
                    },
                }
                for method, res in study.results.items()
            }
    dump_json(out, cfg.work_path("ate.json"))


@step("report", inputs=lambda c: [c.work_path("evals.csv"),
                                  c.work_path("correlations.json"),
                                  c.work_path("ate.json"),
                                  c.work_path("dedup_raw.json"),
                                  c.work_path("dedup_testbeds.json"),
                                  c.work_path("generations.jsonl")],
      outputs=lambda c: [c.out_path("reports", "descriptive.csv"),
                         c.out_path("reports", "dedup.csv"),
                         c.out_path("reports", "results.csv"),
                         c.out_path("reports", "results.md"),
                         c.out_path("figures", "taxonomy_counts.csv"),
                         c.out_path("figures", "token_dist.csv"),
                         c.out_path("figures", "similarity_proportion.csv")])
def run_report(cfg: PipelineConfig) -> None:
    # descriptive table over every testbed we built
    beds = []
    for name in ("rawdata", "rawdata_docstring"):
        rows = read_jsonl(_require(cfg.work_path(f"{name}.jsonl"), "dedup"))
        beds.append(testbeds.testbed_from_rows(rows, seed=cfg.seed))
    for name in TASK_TESTBEDS:
        path = cfg.work_path(os.path.join("testbeds", f"{name}.jsonl"))
        beds.append(testbeds.testbed_from_rows(
            read_jsonl(_require(path, "build-testbeds")), seed=cfg.seed))
    atomic_write_text(cfg.out_path("reports", "descriptive.csv"),
                      report.descriptive_table(beds))

    dedup_reports = {}
    for path in ("dedup_raw.json", "dedup_testbeds.json"):
        for name, d in load_json(_require(cfg.work_path(path),
                                          "dedup")).items():
            dedup_reports[name] = testbeds.DedupReport(**d)
    atomic_write_text(cfg.out_path("reports", "dedup.csv"),
                      report.dedup_table(dedup_reports))

    # results table
    records = _load_study_records(cfg)
    groups: dict[str, list[dict]] = {}
    for rec in records:
        groups.setdefault(rec["treatment"], []).append(rec)
    metrics = {}
    for group, rows in groups.items():
        sims = [r["y_lev_similarity"] for r in rows]
        avg, std = report._mean_std(sims)
        metrics[group] = {
            "bleu": sum(r["y_bleu"] for r in rows) / len(rows),
            "codebleu": sum(r["y_codebleu"] for r in rows) / len(rows),
            "lev_sim_avg": avg,
            "lev_sim_std": std,
        }
    correlations = load_json(_require(cfg.work_path("correlations.json"),
                                      "correlate"))
    ate_doc = load_json(_require(cfg.work_path("ate.json"), "ate"))
    ates: dict[str, dict] = {}
    refutations: dict[str, dict] = {}
    for tid in ("T1", "T2"):
        for method in causal.ESTIMATION_METHODS:
            dist = ate_doc["y_lev_distance"][tid][method]
            sim = ate_doc["y_lev_similarity"][tid][method]
            ates.setdefault(method, {})[tid] = {
                "dist": dist["ate"], "sim_pct": sim["ate_pct"]}
            cell = {}
            for refuter_key, name in (("placebo", "placebo"),
                                      ("random_common_cause", "rcc"),
                                      ("subset", "subset")):
                cell[name] = {
                    "dist": dist["refutations"][refuter_key]["refuted_ate"],
                    "sim_pct": sim["refutations"][refuter_key]["refuted_ate"] * 100.0,
                    "stable": sim["refutations"][refuter_key]["stable"],
                }
            refutations.setdefault(method, {})[tid] = cell
    csv_out, md_out = report.results_table(correlations, ates, refutations,
                                           metrics)
    atomic_write_text(cfg.out_path("reports", "results.csv"), csv_out)
    atomic_write_text(cfg.out_path("reports", "results.md"), md_out)

    # exploratory figures
    gens = read_jsonl(cfg.work_path("generations.jsonl"))
    generated_by_group: dict[str, list[str]] = {}
    for g in gens:
        generated_by_group.setdefault(g["treatment"], []).append(g["generated"])
    bed_rows = read_jsonl(_study_testbed_path(cfg))
    ground_truth = [row["code"] for row in bed_rows]
    sims_by_group = {g: [r["y_lev_similarity"] for r in rows]
                     for g, rows in groups.items()}
    bpe = tokenization.BpeModel.from_json(
        open(cfg.work_path("bpe_model.json")).read())
    figures = report.exploratory_figures(generated_by_group, ground_truth,
                                         sims_by_group, bpe)
    for filename, text in figures.items():
        atomic_write_text(cfg.out_path("figures", filename), text)


# ---------------------------------------------------------------------------
# Click wiring
# ---------------------------------------------------------------------------

_STEPS = {
    "mine": run_mine,
    "extract": run_extract,
    "validate": run_validate,
    "dedup": run_dedup,
    "build-testbeds": run_build_testbeds,
    "prompt": run_prompt,
    "eval": run_eval,
    "correlate": run_correlate,
    "ate": run_ate,
    "report": run_report,
}

RUN_ALL_ORDER = ("mine", "extract", "validate", "dedup", "build-testbeds",
                 "prompt", "eval", "correlate", "ate", "report")


def _dispatch(name: str, config_path: str, seed: int | None,
              jobs: int | None, **kwargs) -> None:
    try:
        cfg = load_config(config_path, seed_override=seed)
        if jobs is not None:
            cfg.jobs = jobs
        _STEPS[name](cfg, **kwargs)
    except (ConfigError, click.UsageError) as exc:
        click.echo(f"error: {exc}", err=True)
        sys.exit(EXIT_USAGE)
    except MissingArtifact as exc:
        click.echo(f"error: {exc}", err=True)
        sys.exit(EXIT_DATA)
    except ClientError as exc:
        click.echo(f"error: {exc}", err=True)
        sys.exit(EXIT_UPSTREAM)
    except _DATA_ERRORS as exc:
        click.echo(f"error: {exc}", err=True)
        sys.exit(EXIT_DATA)


def _common_options(fn):
    fn = click.option("--config", "config_path", default="pipeline.json",
                      show_default=True, help="Pipeline config JSON.")(fn)
    fn = click.option("--seed", type=int, default=None,
                      help="Override the config seed.")(fn)
    fn = click.option("--jobs", type=int, default=None,
                      help="Intra-command parallelism bound.")(fn)
    return fn


@click.group()
@click.version_option(__version__)
def main() -> None:
    """Curate code testbeds and causally evaluate prompt treatments."""


def _register(name: str, extra_options=()):
    def deco(fn):
        cmd = fn
        for opt in extra_options:
            cmd = opt(cmd)
        cmd = _common_options(cmd)
        main.command(name=name)(cmd)
        return fn
    return deco


@_register("mine")
def cmd_mine(config_path, seed, jobs):
    """Harvest methods from the configured clones."""
    _dispatch("mine", config_path, seed, jobs)


@_register("extract")
def cmd_extract(config_path, seed, jobs):
    """Compute code features for every mined sample."""
    _dispatch("extract", config_path, seed, jobs)


@_register("validate")
def cmd_validate(config_path, seed, jobs):
    """Apply the machine validation checklist."""
    _dispatch("validate", config_path, seed, jobs)


@_register("dedup", extra_options=(
        click.option("--threshold", type=float, default=None,
                     help="Similarity threshold override."),))
def cmd_dedup(config_path, seed, jobs, threshold):
    """Train the BPE model and near-dedup the corpus."""
    _dispatch("dedup", config_path, seed, jobs, threshold=threshold)


@_register("build-testbeds")
def cmd_build_testbeds(config_path, seed, jobs):
    """Derive the five task testbeds."""
    _dispatch("build-testbeds", config_path, seed, jobs)


@_register("prompt")
def cmd_prompt(config_path, seed, jobs):
    """Render control/T1/T2 prompts for the study testbed."""
    _dispatch("prompt", config_path, seed, jobs)


@_register("eval")
def cmd_eval(config_path, seed, jobs):
    """Obtain completions (replay cache or live) and score them."""
    _dispatch("eval", config_path, seed, jobs)


@_register("correlate")
def cmd_correlate(config_path, seed, jobs):
    """Correlate code features with the outcome metrics per group."""
    _dispatch("correlate", config_path, seed, jobs)


@_register("ate")
def cmd_ate(config_path, seed, jobs):
    """Estimate and refute average treatment effects."""
    _dispatch("ate", config_path, seed, jobs)


@_register("report")
def cmd_report(config_path, seed, jobs):
    """Emit tables and figure data."""
    _dispatch("report", config_path, seed, jobs)


@_register("run-all")
def cmd_run_all(config_path, seed, jobs):
    """Run the whole pipeline in order."""
    for name in RUN_ALL_ORDER:
        _dispatch(name, config_path, seed, jobs)


if __name__ == "__main__":
    main()
