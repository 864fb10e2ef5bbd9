"""Line-delimited record files, atomic writes, and run manifests."""

from __future__ import annotations

import hashlib
import json
import os
import tempfile
from collections.abc import Iterable, Iterator, Mapping
from pathlib import Path
from typing import Any

from .errors import RecordError

FORMAT_VERSION = 1


def dump_record(obj: Mapping[str, Any]) -> str:
    return json.dumps(obj, ensure_ascii=False)


def read_jsonl(path: str | Path) -> Iterator[tuple[int, dict[str, Any]]]:
    """Yield (line_number, record) pairs; blank lines are skipped."""
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            if not line.strip():
                continue
            try:
                obj = json.loads(line)
            except json.JSONDecodeError as exc:
                raise RecordError(lineno, f"invalid JSON: {exc}") from exc
            if not isinstance(obj, dict):
                raise RecordError(lineno, "record is not a JSON object")
            yield lineno, obj


def atomic_write_text(path: str | Path, text: str) -> Path:
    """Write text to a temporary file and rename it into place."""
    path = Path(path)
    fd, tmp = tempfile.mkstemp(dir=path.parent or Path("."), prefix=path.name + ".", suffix=".tmp")
    try:
        with os.fdopen(fd, "w", encoding="utf-8") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise
    return path


def write_jsonl(path: str | Path, records: Iterable[Mapping[str, Any]]) -> Path:
    lines = [dump_record(rec) for rec in records]
    body = "\n".join(lines)
    if lines:
        body += "\n"
    return atomic_write_text(path, body)


def write_json(path: str | Path, obj: Mapping[str, Any]) -> Path:
    return atomic_write_text(path, json.dumps(obj, ensure_ascii=False, indent=2, sort_keys=True) + "\n")


def file_sha256(path: str | Path) -> str:
    digest = hashlib.sha256()
    with open(path, "rb") as fh:
        for chunk in iter(lambda: fh.read(1 << 16), b""):
            digest.update(chunk)
    return digest.hexdigest()


def config_hash(config: Mapping[str, Any]) -> str:
    canonical = json.dumps(config, ensure_ascii=False, sort_keys=True, separators=(",", ":"))
    return hashlib.sha256(canonical.encode("utf-8")).hexdigest()


def manifest_path(output_path: str | Path) -> Path:
    output_path = Path(output_path)
    return output_path.with_name(output_path.name + ".manifest.json")


def write_manifest(
    output_path: str | Path,
    *,
    command: str,
    tool_version: str,
    inputs: Mapping[str, str | Path],
    config: Mapping[str, Any],
    seed: int | None = None,
) -> Path:
    """Write the run manifest that accompanies an output file.

    The manifest is fully determined by the inputs and configuration (no
    timestamps), so identical reruns produce identical bytes.
    """
    manifest = {
        "format_version": FORMAT_VERSION,
        "tool": {"name": "medsql", "version": tool_version},
        "command": command,
        "seed": seed,
        "config": dict(config),
        "config_hash": config_hash(config),
        "inputs": {
            name: {"path": str(path), "sha256": file_sha256(path)}
            for name, path in sorted(inputs.items())
        },
        "output": Path(output_path).name,
    }
    return write_json(manifest_path(output_path), manifest)
