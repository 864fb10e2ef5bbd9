"""Execution-guided reranking of candidate beams.

Candidates are tried from highest to lowest score; the first one that
executes without error (and, optionally, returns at least one row) wins.
If every candidate fails, the rank-1 candidate is returned with
``all_failed`` set so downstream scoring still has a prediction.
"""

from __future__ import annotations

import sqlite3
import threading
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from pathlib import Path

from .errors import QueryExecutionError, RecordError
from .predictions import CandidateSet, Prediction
from .store import open_exec_db, run_select

DEFAULT_TIMEOUT_MS = 5000


@dataclass(frozen=True)
class RerankChoice:
    id: str
    sql: str
    chosen_rank: int
    all_failed: bool


def rerank(
    candidates: CandidateSet,
    db: str | Path | sqlite3.Connection,
    *,
    require_nonempty: bool = False,
    timeout_ms: int = DEFAULT_TIMEOUT_MS,
) -> RerankChoice:
    """Pick the first executable candidate, in descending score order.

    Execution stops at the first success. A timed-out candidate counts as
    failed. ``chosen_rank`` is 1-based over the sorted beam.
    """
    conn = db if isinstance(db, sqlite3.Connection) else open_exec_db(db)
    close = not isinstance(db, sqlite3.Connection)
    try:
        for rank, cand in enumerate(candidates.candidates, start=1):
            try:
                rows = run_select(conn, cand.sql, timeout_ms)
            except QueryExecutionError:
                continue
            if require_nonempty and not rows:
                continue
            return RerankChoice(candidates.id, cand.sql, rank, False)
        top = candidates.candidates[0]
        return RerankChoice(candidates.id, top.sql, 1, True)
    finally:
        if close:
            conn.close()


def rerank_file(
    preds: dict[str, Prediction],
    db: str | Path,
    *,
    require_nonempty: bool = False,
    timeout_ms: int = DEFAULT_TIMEOUT_MS,
    jobs: int = 1,
) -> dict[str, RerankChoice]:
    """Rerank every beam in a prediction file.

    Single-prediction records have no beam to rerank and raise
    :class:`RecordError`. Records are processed independently (optionally
    in parallel with one connection per worker) and returned in input
    order regardless of completion order.
    """
    items: list[CandidateSet] = []
    for idx, (sid, pred) in enumerate(preds.items(), start=1):
        if not isinstance(pred, CandidateSet):
            raise RecordError(idx, f"id {sid!r} has no candidate beam to rerank")
        items.append(pred)

    local = threading.local()
    owned: list[sqlite3.Connection] = []
    owned_lock = threading.Lock()

    def get_conn() -> sqlite3.Connection:
        conn = getattr(local, "conn", None)
        if conn is None:
            conn = open_exec_db(db)
            local.conn = conn
            with owned_lock:
                owned.append(conn)
        return conn

    def work(cs: CandidateSet) -> RerankChoice:
        return rerank(cs, get_conn(), require_nonempty=require_nonempty, timeout_ms=timeout_ms)

    try:
        if jobs <= 1 or len(items) <= 1:
            choices = [work(cs) for cs in items]
        else:
            with ThreadPoolExecutor(max_workers=jobs) as pool:
                choices = list(pool.map(work, items))
    finally:
        for conn in owned:
            conn.close()
    return {choice.id: choice for choice in choices}
