"""Mining candidate methods from git history, plus JSONL import/export.

The mining path walks local clones: every commit whose committer date (UTC)
falls inside the anti-contamination window contributes the Python methods it
added or whose body it changed. A small repository-search client is included
for pre-fetching a repo catalog; all of its responses are cached to disk so
runs replay offline.
"""

from __future__ import annotations

import ast
import hashlib
import json
import os
import re
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from datetime import date, datetime, timezone
from typing import Any, Iterable, Iterator, Sequence

from .features import is_valid_docstring
from .pyparse import Node, parse

_HEX_RE = re.compile(r"^[0-9a-f]{7,40}$")

JSONL_KEYS = ("commit_id", "repo", "path", "file_name", "fun_name",
              "commit_message", "docstring", "code", "committed_at")


class IngestError(Exception):
    """Raised for unreadable repositories and malformed sample streams."""


@dataclass(frozen=True)
class RepoQuery:
    """Predicate over a repository catalog."""

    language: str = "Python"
    fork_allowed: bool = False
    min_size_kb: int = 30_000
    pushed_after: date = date(2021, 12, 31)
    min_stars: int = 1_000

    def __post_init__(self):
        if self.min_size_kb < 0 or self.min_stars < 0:
            raise ValueError("size and star floors must be non-negative")


@dataclass(frozen=True)
class DateWindow:
    """Inclusive calendar window for commit dates."""

    start: date
    end: date

    def __post_init__(self):
        if self.start > self.end:
            raise ValueError("window start is after its end")

    def contains(self, ts: datetime) -> bool:
        return self.start <= ts.astimezone(timezone.utc).date() <= self.end


@dataclass(frozen=True)
class RawSample:
    commit_id: str
    repository: str
    path: str
    file_name: str
    fun_name: str
    commit_message: str
    docstring: str | None
    code: str
    committed_at: datetime
    extras: dict = field(default_factory=dict, compare=False)

    def __post_init__(self):
        if not self.code:
            raise ValueError("sample code must be non-empty")
        if not _HEX_RE.match(self.commit_id):
            raise ValueError(f"not a commit hash: {self.commit_id!r}")
        if self.committed_at.tzinfo is None:
            raise ValueError("committed_at must be timezone-aware")


@dataclass(frozen=True)
class ValidationReport:
    passed: bool
    reasons: tuple[str, ...]


# ---------------------------------------------------------------------------
# Repository selection
# ---------------------------------------------------------------------------

def select_repositories(query: RepoQuery,
                        catalog: Sequence[dict]) -> list[dict]:
    """Filter a repo catalog down to the entries matching every predicate.

    Catalog entries carry ``language``, ``fork``, ``size`` (KB), ``pushed_at``
    (date or ISO string) and ``stars``. Input order is preserved.
    """
    out = []
    for entry in catalog:
        if entry.get("language") != query.language:
            continue
        if not query.fork_allowed and entry.get("fork"):
            continue
        if entry.get("size", 0) < query.min_size_kb:
            continue
        pushed = entry.get("pushed_at")
        if isinstance(pushed, str):
            pushed = date.fromisoformat(pushed[:10])
        if pushed is None or pushed <= query.pushed_after:
            continue
        if entry.get("stars", 0) <= query.min_stars:
            continue
        out.append(entry)
    return out


# ---------------------------------------------------------------------------
# Method extraction from source
# ---------------------------------------------------------------------------

def _qualified_functions(code: str) -> dict[str, Node]:
    """Map qualified function name -> def node for all functions in a file."""
    tree = parse(code)
    found: dict[str, Node] = {}

    def visit(node: Node, prefix: str) -> None:
        for child in node.children:
            if child.kind in ("function_definition", "class_definition"):
                name_node = next((c for c in child.children
                                  if c.kind == "identifier"), None)
                name = name_node.token.text if name_node else "<anon>"
                qual = f"{prefix}{name}"
                if child.kind == "function_definition":
                    found[qual] = child
                visit(child, qual + ".")
            else:
                visit(child, prefix)

    visit(tree, "")
    return found


def method_source(code: str, def_node: Node) -> str:
    """Source of one method: from its first token through the end of the
    last physical line its tokens reach. Trailing same-line comments stay
    part of the method, so comment-only edits register as changes."""
    first, last = def_node.first_token(), def_node.last_token()
    if first is None or last is None:
        return ""
    line_end = code.find("\n", last.end)
    return code[first.start:line_end if line_end != -1 else len(code)]


def function_docstring(def_node: Node, code: str) -> str | None:
    """Leading string literal of the function body; inline comments are
    never part of it (the lexer drops them before the tree is built)."""
    block = next((c for c in def_node.children if c.kind == "block"), None)
    if block is None or not block.children:
        return None
    first = block.children[0]
    if first.kind != "expression_statement" or not first.children:
        return None
    expr = first.children[0]
    if expr.kind not in ("string", "concatenated_string"):
        return None
    literal = expr.text(code)
    try:
        value = ast.literal_eval(literal)
    except (ValueError, SyntaxError):
        return literal
    return value if isinstance(value, str) else literal


# ---------------------------------------------------------------------------
# Git harvesting
# ---------------------------------------------------------------------------

def harvest_methods(repo_path: str, window: DateWindow) -> list[RawSample]:
    """One RawSample per Python method added or updated by an in-window
    commit of the clone at ``repo_path``.

    A method counts as updated when the source of its def changed between
    the commit and its first parent; renamed-but-unchanged methods are
    excluded. Output is ordered by (committed_at, path, fun_name).
    """
    try:
        import git
        repo = git.Repo(repo_path)
    except Exception as exc:
        raise IngestError(f"unreadable repository {repo_path!r}: {exc}") from exc

    repo_name = os.path.basename(os.path.normpath(repo_path))
    samples: list[RawSample] = []
    try:
        commits = list(repo.iter_commits())
    except Exception as exc:
        raise IngestError(f"cannot walk history of {repo_path!r}: {exc}") from exc

    for commit in commits:
        committed_at = commit.committed_datetime.astimezone(timezone.utc)
        if not window.contains(committed_at):
            continue
        parent = commit.parents[0] if commit.parents else None
        for path, new_code, old_code in _changed_python_files(commit, parent):
            new_funcs = _qualified_functions(new_code)
            old_funcs = _qualified_functions(old_code) if old_code else {}
            for qual, node in new_funcs.items():
                source = method_source(new_code, node)
                if qual in old_funcs \
                        and method_source(old_code, old_funcs[qual]) == source:
                    continue
                samples.append(RawSample(
                    commit_id=commit.hexsha,
                    repository=repo_name,
                    path=path,
                    file_name=os.path.basename(path),
                    fun_name=qual.rsplit(".", 1)[-1],
                    commit_message=commit.message.strip(),
                    docstring=function_docstring(node, new_code),
                    code=source,
                    committed_at=committed_at,
                ))
    samples.sort(key=lambda s: (s.committed_at, s.path, s.fun_name))
    return samples


def _changed_python_files(commit, parent) -> Iterator[tuple[str, str, str | None]]:
    """(path, new_source, old_source) for each .py file touched by commit."""
    if parent is None:
        # root commit: everything it contains is new
        for blob in commit.tree.traverse():
            if blob.type == "blob" and blob.path.endswith(".py"):
                yield blob.path, _blob_text(blob), None
        return
    for d in parent.diff(commit):
        path = d.b_path or d.a_path
        if not path or not path.endswith(".py"):
            continue
        if d.deleted_file or d.b_blob is None:
            continue
        new_code = _blob_text(d.b_blob)
        old_code = _blob_text(d.a_blob) if d.a_blob is not None else None
        yield path, new_code, old_code


def _blob_text(blob) -> str:
    data = blob.data_stream.read()
    return data.decode("utf-8", errors="replace")


def harvest_many(repo_paths: Sequence[str], window: DateWindow,
                 jobs: int = 1) -> list[RawSample]:
    """Harvest several clones, one worker per repository, merged in input
    order so the result is deterministic regardless of scheduling."""
    if jobs <= 1 or len(repo_paths) <= 1:
        batches = [harvest_methods(p, window) for p in repo_paths]
    else:
        with ThreadPoolExecutor(max_workers=min(jobs, len(repo_paths))) as pool:
            batches = list(pool.map(lambda p: harvest_methods(p, window),
                                    repo_paths))
    merged: list[RawSample] = []
    for batch in batches:
        merged.extend(batch)
    return merged


# ---------------------------------------------------------------------------
# Validation
# ---------------------------------------------------------------------------

def validate_sample(sample: RawSample, window: DateWindow) -> ValidationReport:
    """Machine checklist for one sample; lists every violated rule."""
    reasons = []
    if not window.contains(sample.committed_at):
        reasons.append("outside window")
    if not sample.code.strip():
        reasons.append("empty code")
    if sample.docstring is not None and not is_valid_docstring(sample.docstring):
        reasons.append("docstring not larger than 3 words")
    return ValidationReport(passed=not reasons, reasons=tuple(reasons))


# ---------------------------------------------------------------------------
# JSONL round-trip
# ---------------------------------------------------------------------------

def sample_to_dict(sample: RawSample) -> dict:
    d = {
        "commit_id": sample.commit_id,
        "repo": sample.repository,
        "path": sample.path,
        "file_name": sample.file_name,
        "fun_name": sample.fun_name,
        "commit_message": sample.commit_message,
        "docstring": sample.docstring,
        "code": sample.code,
        "committed_at": sample.committed_at.astimezone(timezone.utc).isoformat(),
    }
    d.update(sample.extras)
    return d


def sample_from_dict(obj: dict, lineno: int | None = None) -> RawSample:
    where = f" (line {lineno})" if lineno is not None else ""
    for key in JSONL_KEYS:
        if key not in obj:
            raise IngestError(f"missing required field {key!r}{where}")
    extras = {k: v for k, v in obj.items() if k not in JSONL_KEYS}
    try:
        committed_at = datetime.fromisoformat(obj["committed_at"])
    except ValueError as exc:
        raise IngestError(f"bad committed_at{where}: {exc}") from exc
    if committed_at.tzinfo is None:
        committed_at = committed_at.replace(tzinfo=timezone.utc)
    try:
        return RawSample(
            commit_id=obj["commit_id"],
            repository=obj["repo"],
            path=obj["path"],
            file_name=obj["file_name"],
            fun_name=obj["fun_name"],
            commit_message=obj["commit_message"],
            docstring=obj["docstring"],
            code=obj["code"],
            committed_at=committed_at,
            extras=extras,
        )
    except ValueError as exc:
        raise IngestError(f"invalid sample{where}: {exc}") from exc


def export_jsonl(samples: Iterable[RawSample]) -> bytes:
    lines = [json.dumps(sample_to_dict(s), ensure_ascii=False, sort_keys=True)
             for s in samples]
    return ("\n".join(lines) + ("\n" if lines else "")).encode("utf-8")


def import_jsonl(stream: bytes | str) -> list[RawSample]:
    if isinstance(stream, bytes):
        stream = stream.decode("utf-8")
    samples = []
    for lineno, line in enumerate(stream.splitlines(), start=1):
        if not line.strip():
            continue
        try:
            obj = json.loads(line)
        except json.JSONDecodeError as exc:
            raise IngestError(f"malformed JSON on line {lineno}: {exc}") from exc
        samples.append(sample_from_dict(obj, lineno))
    return samples


# ---------------------------------------------------------------------------
# Repository-search client (optional, replayable)
# ---------------------------------------------------------------------------

class RepoSearchClient:
    """Minimal HTTPS repo-search client with a disk cache.

    Every response is cached under ``cache_dir`` keyed by the query, so a
    recorded catalog can be replayed without network access or a token.
    """

    def __init__(self, base_url: str, cache_dir: str,
                 token_env: str = "REPO_SEARCH_TOKEN", transport=None):
        self.base_url = base_url
        self.cache_dir = cache_dir
        self.token_env = token_env
        self._transport = transport  # injectable for tests
        os.makedirs(cache_dir, exist_ok=True)

    def _params(self, query: RepoQuery) -> dict[str, Any]:
        return {
            "language": query.language,
            "fork": str(query.fork_allowed).lower(),
            "size": f">={query.min_size_kb}",
            "pushed": f">{query.pushed_after.isoformat()}",
            "stars": f">{query.min_stars}",
        }

    def _cache_path(self, params: dict) -> str:
        digest = hashlib.sha256(
            json.dumps(params, sort_keys=True).encode()).hexdigest()[:24]
        return os.path.join(self.cache_dir, f"repo_search_{digest}.json")

    def search(self, query: RepoQuery) -> list[dict]:
        params = self._params(query)
        cache = self._cache_path(params)
        if os.path.exists(cache):
            with open(cache, encoding="utf-8") as fh:
                return json.load(fh)
        if self._transport is not None:
            payload = self._transport(self.base_url, params)
        else:
            import requests
            headers = {}
            token = os.environ.get(self.token_env)
            if token:
                headers["Authorization"] = f"Bearer {token}"
            resp = requests.get(self.base_url, params=params,
                                headers=headers, timeout=30)
            resp.raise_for_status()
            payload = resp.json()
        tmp = cache + ".tmp"
        with open(tmp, "w", encoding="utf-8") as fh:
            json.dump(payload, fh, sort_keys=True)
        os.replace(tmp, cache)
        return payload
