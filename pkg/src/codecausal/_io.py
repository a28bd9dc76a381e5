"""Deterministic file helpers shared by the pipeline commands."""

from __future__ import annotations

import csv
import hashlib
import io
import json
import os
from typing import Iterable, Sequence


def atomic_write_text(path: str, text: str) -> None:
    """Write-temp-then-rename so readers never observe partial files."""
    os.makedirs(os.path.dirname(path) or ".", exist_ok=True)
    tmp = path + ".tmp"
    with open(tmp, "w", encoding="utf-8", newline="") as fh:
        fh.write(text)
    os.replace(tmp, path)


def atomic_write_bytes(path: str, data: bytes) -> None:
    os.makedirs(os.path.dirname(path) or ".", exist_ok=True)
    tmp = path + ".tmp"
    with open(tmp, "wb") as fh:
        fh.write(data)
    os.replace(tmp, path)


def sha256_bytes(data: bytes) -> str:
    return hashlib.sha256(data).hexdigest()


def sha256_file(path: str) -> str:
    h = hashlib.sha256()
    with open(path, "rb") as fh:
        for chunk in iter(lambda: fh.read(1 << 16), b""):
            h.update(chunk)
    return h.hexdigest()


def csv_text(header: Sequence[str], rows: Iterable[Sequence]) -> str:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(header)
    for row in rows:
        writer.writerow(row)
    return buf.getvalue()


def read_csv(path_or_text: str, from_text: bool = False) -> tuple[list[str], list[list[str]]]:
    if from_text:
        fh = io.StringIO(path_or_text)
        rows = list(csv.reader(fh))
    else:
        with open(path_or_text, encoding="utf-8", newline="") as f:
            rows = list(csv.reader(f))
    return rows[0], rows[1:]


def dump_json(obj, path: str) -> None:
    atomic_write_text(path, json.dumps(obj, indent=2, sort_keys=True) + "\n")


def load_json(path: str):
    with open(path, encoding="utf-8") as fh:
        return json.load(fh)


def write_jsonl(path: str, objs: Iterable[dict]) -> None:
    lines = [json.dumps(o, ensure_ascii=False, sort_keys=True) for o in objs]
    atomic_write_text(path, "\n".join(lines) + ("\n" if lines else ""))


def read_jsonl(path: str) -> list[dict]:
    out = []
    with open(path, encoding="utf-8") as fh:
        for line in fh:
            if line.strip():
                out.append(json.loads(line))
    return out
