"""Condition-value recovery against a database value lookup.

A predicted text value is replaced by the most similar value that actually
occurs in the referenced column. Similarity is the mean of two ROUGE-L F1
scores (beta = 1), one over case-folded whitespace words and one over
case-folded characters:

    P = LCS / len(candidate),  R = LCS / len(reference)
    F1 = 2 * P * R / (P + R)   (0 when P + R = 0)
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

from .errors import MedsqlError, UnknownColumn
from .query import (
    Condition,
    Literal,
    LiteralKind,
    SqlQuery,
    parse_sql,
    serialize_sql,
)
from .store import ATTR_TEXT, ValueLookup

# Above this many values in one column, candidates are pruned with a
# length-based upper bound on the achievable score before exact scoring.
PREFILTER_THRESHOLD = 50_000


def lcs_len(a: Sequence, b: Sequence) -> int:
    """Length of the longest common subsequence of two sequences."""
    if not a or not b:
        return 0
    if len(b) > len(a):
        a, b = b, a
    prev = [0] * (len(b) + 1)
    for x in a:
        cur = [0]
        for j, y in enumerate(b, start=1):
            if x == y:
                cur.append(prev[j - 1] + 1)
            else:
                cur.append(max(prev[j], cur[j - 1]))
        prev = cur
    return prev[len(b)]


def rouge_l_f1(candidate: Sequence, reference: Sequence) -> float:
    """ROUGE-L F1 with beta = 1 over two token sequences."""
    if not candidate or not reference:
        return 0.0
    lcs = lcs_len(candidate, reference)
    precision = lcs / len(candidate)
    recall = lcs / len(reference)
    if precision + recall == 0.0:
        return 0.0
    return 2.0 * precision * recall / (precision + recall)


@dataclass(frozen=True)
class SimilarityScore:
    word_f: float
    char_f: float

    @property
    def combined(self) -> float:
        return (self.word_f + self.char_f) / 2.0


def similarity(predicted: str, db_value: str) -> SimilarityScore:
    """Word-level and char-level ROUGE-L F1 between a predicted value and a
    database value, both case-folded."""
    pred = predicted.casefold()
    ref = db_value.casefold()
    return SimilarityScore(
        word_f=rouge_l_f1(pred.split(), ref.split()),
        char_f=rouge_l_f1(pred, ref),
    )


def _score_bound(pred: str, pred_words: int, value: str) -> float:
    """Upper bound on the combined score, from LCS <= min(len).

    F1 <= 2 * min(m, n) / (m + n) for sequence lengths m, n, so a
    candidate whose length differs too much from the prediction cannot
    reach a given score. Sound for any candidate, so pruning on a strict
    comparison never changes the argmax.
    """
    m, n = len(pred), len(value)
    char_ub = 2.0 * min(m, n) / (m + n) if m and n else 0.0
    wm, wn = pred_words, len(value.split())
    word_ub = 2.0 * min(wm, wn) / (wm + wn) if wm and wn else 0.0
    return (char_ub + word_ub) / 2.0


def recover_value(
    predicted: str, values: Sequence[str], *, prefilter: bool = True
) -> tuple[str, float]:
    """Pick the most similar value from a column's value set.

    Returns (value, combined score). An exact member is returned as-is.
    Ties go to the lexicographically smallest value. The prefilter kicks
    in above :data:`PREFILTER_THRESHOLD` values and only skips candidates
    whose score bound is strictly below the current best, so results are
    identical with it on or off.
    """
    if not values:
        raise UnknownColumn("empty value set")
    if predicted in values:
        return predicted, 1.0
    ordered = sorted(values)
    use_bound = prefilter and len(ordered) > PREFILTER_THRESHOLD
    pred_folded = predicted.casefold()
    pred_words = len(pred_folded.split())
    best_value: str | None = None
    best_score = -1.0
    for value in ordered:
        if use_bound and _score_bound(pred_folded, pred_words, value.casefold()) < best_score:
            continue
        score = similarity(predicted, value).combined
        if score > best_score:
            best_value, best_score = value, score
    return best_value, best_score


@dataclass(frozen=True)
class RecoveredQuery:
    sql: str
    parsed: bool
    replacements: tuple[tuple[str, str], ...] = ()
    unresolved: tuple[str, ...] = ()


def _resolve_column(cond: Condition, lookup: ValueLookup) -> tuple[str, str] | None:
    ref = cond.column
    if ref.table is not None:
        return (ref.table, ref.column)
    tables = lookup.tables_for_column(ref.column)
    if len(tables) == 1:
        return (tables[0], ref.column)
    return None


def recover_query(pred_sql: str, lookup: ValueLookup, *, prefilter: bool = True) -> RecoveredQuery:
    """Rewrite every text condition value of a predicted query to its most
    similar database value.

    Unparseable input is returned unchanged with ``parsed=False``. Only
    conditions on text-attributed columns are touched; a condition whose
    column cannot be resolved in the lookup is left unchanged and listed
    in ``unresolved``. Output SQL is in canonical serialized form, so the
    operation is idempotent.
    """
    try:
        query = parse_sql(pred_sql)
    except MedsqlError:
        return RecoveredQuery(sql=pred_sql, parsed=False)
    replacements: list[tuple[str, str]] = []
    unresolved: list[str] = []
    new_conditions = []
    for cond in query.conditions:
        if cond.value.kind is not LiteralKind.TEXT:
            new_conditions.append(cond)
            continue
        resolved = _resolve_column(cond, lookup)
        if resolved is None:
            unresolved.append(cond.column.render())
            new_conditions.append(cond)
            continue
        table, column = resolved
        try:
            if lookup.attr(table, column) != ATTR_TEXT:
                new_conditions.append(cond)
                continue
            values = lookup.values(table, column)
            chosen, _ = recover_value(cond.value.value, values, prefilter=prefilter)
        except UnknownColumn:
            unresolved.append(cond.column.render())
            new_conditions.append(cond)
            continue
        if chosen != cond.value.value:
            replacements.append((cond.value.value, chosen))
            cond = Condition(cond.column, cond.op, Literal(LiteralKind.TEXT, chosen), cond.connector)
        new_conditions.append(cond)
    recovered = SqlQuery(query.select_items, query.main_table, query.joins, tuple(new_conditions))
    return RecoveredQuery(
        sql=serialize_sql(recovered),
        parsed=True,
        replacements=tuple(replacements),
        unresolved=tuple(unresolved),
    )
