"""Prediction files: one JSON record per sample id.

A record is either a single prediction ``{"id", "sql"}`` or a scored beam
``{"id", "candidates": [{"sql", "score"}, ...]}``. Beams are kept sorted
by non-increasing score; ties keep their file order.
"""

from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path
from typing import Union

from .errors import RecordError
from .records import read_jsonl, write_jsonl


@dataclass(frozen=True)
class Candidate:
    sql: str
    score: float


@dataclass(frozen=True)
class CandidateSet:
    id: str
    candidates: tuple[Candidate, ...]

    def __post_init__(self):
        ordered = sorted(self.candidates, key=lambda c: -c.score)
        object.__setattr__(self, "candidates", tuple(ordered))
        if not self.candidates:
            raise ValueError("a candidate set needs at least one candidate")


Prediction = Union[str, CandidateSet]


def top_sql(pred: Prediction) -> str:
    return pred if isinstance(pred, str) else pred.candidates[0].sql


def load_predictions(path: str | Path) -> dict[str, Prediction]:
    """Load a prediction file keyed by id, preserving file order."""
    preds: dict[str, Prediction] = {}
    for lineno, rec in read_jsonl(path):
        if "id" not in rec:
            raise RecordError(lineno, "missing id")
        sid = str(rec["id"])
        if sid in preds:
            raise RecordError(lineno, f"duplicate id {sid!r}")
        if "candidates" in rec:
            raw = rec["candidates"]
            if not isinstance(raw, list) or not raw:
                raise RecordError(lineno, "candidates must be a non-empty list")
            try:
                cands = tuple(Candidate(str(c["sql"]), float(c["score"])) for c in raw)
            except (KeyError, TypeError, ValueError) as exc:
                raise RecordError(lineno, f"malformed candidate: {exc}") from exc
            if any(not c.sql for c in cands):
                raise RecordError(lineno, "empty SQL string in candidates")
            preds[sid] = CandidateSet(sid, cands)
        elif "sql" in rec:
            sql = rec["sql"]
            if not isinstance(sql, str) or not sql:
                raise RecordError(lineno, "sql must be a non-empty string")
            preds[sid] = sql
        else:
            raise RecordError(lineno, "record has neither sql nor candidates")
    return preds


def save_predictions(preds: dict[str, Prediction], path: str | Path) -> Path:
    records = []
    for sid, pred in preds.items():
        if isinstance(pred, str):
            records.append({"id": sid, "sql": pred})
        else:
            records.append(
                {
                    "id": sid,
                    "candidates": [{"sql": c.sql, "score": c.score} for c in pred.candidates],
                }
            )
    return write_jsonl(path, records)
