"""Logic-form and execution accuracy for prediction files.

Logic-form accuracy compares normalized token sequences element-wise, so
it is order-sensitive: ``SELECT A,B`` and ``SELECT B,A`` do not match.
Execution accuracy compares result multisets row by row with column names
ignored and duplicates significant; numeric cells compare with relative
tolerance 1e-9 and text cells byte-exact.
"""

from __future__ import annotations

import math
import sqlite3
import threading
from collections import Counter
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from pathlib import Path
from typing import Any, Sequence

from .errors import MedsqlError, MissingPrediction, UnterminatedLiteral
from .predictions import Prediction, top_sql
from .query import SqlQuery, Star, parse_sql, tokenize_sql
from .records import FORMAT_VERSION
from .store import Sample, open_exec_db, run_select

REL_TOLERANCE = 1e-9
ABS_TOLERANCE = 1e-12


def _safe_tokens(sql: str) -> list[str] | None:
    try:
        return tokenize_sql(sql)
    except UnterminatedLiteral:
        return None


def logic_form_match(gold_sql: str, pred_sql: str) -> bool:
    """Element-wise equality of the normalized token sequences.

    A side with an unterminated literal cannot match anything.
    """
    gold = _safe_tokens(gold_sql)
    pred = _safe_tokens(pred_sql)
    return gold is not None and pred is not None and gold == pred


def _sort_key(value: Any):
    if value is None:
        return (0, "")
    if isinstance(value, (int, float)):
        return (1, float(value))
    if isinstance(value, bytes):
        return (2, value.decode("utf-8", "replace"))
    return (3, str(value))


def _values_equal(a: Any, b: Any) -> bool:
    if a is None or b is None:
        return a is None and b is None
    a_num = isinstance(a, (int, float))
    b_num = isinstance(b, (int, float))
    if a_num != b_num:
        return False
    if a_num:
        return math.isclose(float(a), float(b), rel_tol=REL_TOLERANCE, abs_tol=ABS_TOLERANCE)
    return a == b


def results_equal(rows_a: list[tuple], rows_b: list[tuple]) -> bool:
    """Multiset equality of two result sets under the value tolerance."""
    if len(rows_a) != len(rows_b):
        return False
    key = lambda row: tuple(_sort_key(v) for v in row)
    for ra, rb in zip(sorted(rows_a, key=key), sorted(rows_b, key=key)):
        if len(ra) != len(rb) or not all(_values_equal(x, y) for x, y in zip(ra, rb)):
            return False
    return True


@dataclass(frozen=True)
class ExecutionOutcome:
    ex_match: bool
    gold_error: bool
    pred_error: bool


def execution_match(
    gold_sql: str,
    pred_sql: str,
    db: str | Path | sqlite3.Connection,
    *,
    timeout_ms: int | None = None,
) -> ExecutionOutcome:
    """Execute both queries and compare result multisets.

    A failing query sets its error flag; any error means no match.
    """
    conn = db if isinstance(db, sqlite3.Connection) else open_exec_db(db)
    close = not isinstance(db, sqlite3.Connection)
    try:
        gold_rows = pred_rows = None
        gold_error = pred_error = False
        try:
            gold_rows = run_select(conn, gold_sql, timeout_ms)
        except MedsqlError:
            gold_error = True
        try:
            pred_rows = run_select(conn, pred_sql, timeout_ms)
        except MedsqlError:
            pred_error = True
        matched = not gold_error and not pred_error and results_equal(gold_rows, pred_rows)
        return ExecutionOutcome(matched, gold_error, pred_error)
    finally:
        if close:
            conn.close()


@dataclass(frozen=True)
class ComponentFlags:
    agg_op: bool
    agg_col: bool
    table_joins: bool
    cond_col_op: bool
    cond_val: bool

    def as_dict(self) -> dict[str, bool]:
        return {
            "agg_op": self.agg_op,
            "agg_col": self.agg_col,
            "table_joins": self.table_joins,
            "cond_col_op": self.cond_col_op,
            "cond_val": self.cond_val,
        }


_ALL_FALSE = ComponentFlags(False, False, False, False, False)


def _column_label(column) -> str:
    return "*" if isinstance(column, Star) else column.render()


def component_breakdown(gold: SqlQuery, pred: SqlQuery) -> ComponentFlags:
    """Order-insensitive per-component comparison of two parsed queries.

    Each flag compares one component as a multiset: aggregation operations,
    aggregated (selected) columns, the main table plus join clauses,
    (condition column, operator) pairs, and condition values.
    """
    joins = lambda q: Counter(
        (j.table, frozenset((j.left.render(), j.right.render()))) for j in q.joins
    )
    return ComponentFlags(
        agg_op=Counter(i.agg_op for i in gold.select_items)
        == Counter(i.agg_op for i in pred.select_items),
        agg_col=Counter(_column_label(i.column) for i in gold.select_items)
        == Counter(_column_label(i.column) for i in pred.select_items),
        table_joins=gold.main_table == pred.main_table and joins(gold) == joins(pred),
        cond_col_op=Counter((c.column.render(), c.op) for c in gold.conditions)
        == Counter((c.column.render(), c.op) for c in pred.conditions),
        cond_val=Counter((c.value.kind, c.value.value) for c in gold.conditions)
        == Counter((c.value.kind, c.value.value) for c in pred.conditions),
    )


@dataclass(frozen=True)
class SampleEval:
    id: str
    lf_match: bool
    ex_match: bool
    gold_error: bool
    pred_error: bool

    def to_dict(self) -> dict[str, Any]:
        return {
            "id": self.id,
            "lf_match": self.lf_match,
            "ex_match": self.ex_match,
            "gold_error": self.gold_error,
            "pred_error": self.pred_error,
        }


@dataclass(frozen=True)
class EvalReport:
    acc_lf: float
    acc_ex: float
    n: int
    per_sample: tuple[SampleEval, ...]
    breakdown: dict[str, float] | None = None

    def to_dict(self) -> dict[str, Any]:
        out: dict[str, Any] = {
            "format_version": FORMAT_VERSION,
            "acc_lf": self.acc_lf,
            "acc_ex": self.acc_ex,
            "n": self.n,
            "per_sample": [s.to_dict() for s in self.per_sample],
        }
        if self.breakdown is not None:
            out["breakdown"] = self.breakdown
        return out


def _breakdown_flags(gold_sql: str, pred_sql: str | None) -> ComponentFlags:
    if pred_sql is None:
        return _ALL_FALSE
    try:
        gold = parse_sql(gold_sql)
        pred = parse_sql(pred_sql)
    except MedsqlError:
        return _ALL_FALSE
    return component_breakdown(gold, pred)


def evaluate(
    samples: Sequence[Sample],
    preds: dict[str, Prediction],
    db: str | Path,
    *,
    strict: bool = False,
    with_breakdown: bool = True,
    timeout_ms: int | None = None,
    jobs: int = 1,
) -> EvalReport:
    """Score a prediction file against gold SQL over one split.

    Beam-shaped records are scored on their top candidate. A sample
    without a prediction counts as both matches false (``pred_error``
    set), or raises :class:`MissingPrediction` listing every such id when
    ``strict``. ``jobs`` parallelizes execution across samples with one
    database connection per worker; results are reduced in sample order,
    so the report does not depend on ``jobs``.
    """
    samples = list(samples)
    if strict:
        missing = [s.id for s in samples if s.id not in preds]
        if missing:
            raise MissingPrediction(missing)

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

    def score(sample: Sample) -> tuple[SampleEval, ComponentFlags]:
        pred = preds.get(sample.id)
        if pred is None:
            flags = _ALL_FALSE
            return SampleEval(sample.id, False, False, False, True), flags
        pred_sql = top_sql(pred)
        lf = logic_form_match(sample.gold_sql, pred_sql)
        outcome = execution_match(sample.gold_sql, pred_sql, get_conn(), timeout_ms=timeout_ms)
        flags = _breakdown_flags(sample.gold_sql, pred_sql) if with_breakdown else _ALL_FALSE
        return (
            SampleEval(sample.id, lf, outcome.ex_match, outcome.gold_error, outcome.pred_error),
            flags,
        )

    try:
        if jobs <= 1 or len(samples) <= 1:
            scored = [score(s) for s in samples]
        else:
            with ThreadPoolExecutor(max_workers=jobs) as pool:
                scored = list(pool.map(score, samples))
    finally:
        for conn in owned:
            conn.close()

    per_sample = tuple(entry for entry, _ in scored)
    n = len(per_sample)
    acc_lf = sum(e.lf_match for e in per_sample) / n if n else 0.0
    acc_ex = sum(e.ex_match for e in per_sample) / n if n else 0.0
    breakdown = None
    if with_breakdown and n:
        flag_dicts = [flags.as_dict() for _, flags in scored]
        breakdown = {
            name: sum(d[name] for d in flag_dicts) / n for name in flag_dicts[0]
        }
    return EvalReport(acc_lf=acc_lf, acc_ex=acc_ex, n=n, per_sample=per_sample, breakdown=breakdown)
