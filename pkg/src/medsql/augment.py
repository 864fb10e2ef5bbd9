"""Corpus growth: back-translation paraphrases and template instantiation.

Back-translation round-trips a question through a pivot language using a
translation endpoint (``POST {base_url}/translate`` with ``{"text",
"src", "tgt"}`` returning ``{"text"}``). Round trips that come back
byte-equal to the source are degenerate and dropped. A deterministic
offline stub translator stands in for the endpoint in tests and in
``--stub`` runs.
"""

from __future__ import annotations

import hashlib
import itertools
import json
import threading
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from pathlib import Path
from typing import Any, Iterable, Protocol

from .errors import (
    DataError,
    EmptyValueSet,
    TranslateError,
    UnboundSlot,
    UnknownColumn,
    UnknownPivot,
)
from .query import parse_sql
from .store import Paraphrase, Sample, ValueLookup, with_synthetic

DEFAULT_PIVOTS = ("fr", "de")
TRANSLATE_URL_ENV = "MEDSQL_TRANSLATE_URL"


@dataclass(frozen=True)
class TranslatorEndpoint:
    base_url: str
    timeout_ms: int = 10_000
    retries: int = 2


class Translator(Protocol):
    def translate(self, text: str, src: str, tgt: str) -> str: ...


class HttpTranslator:
    """Client for the translation endpoint, with bounded retries."""

    def __init__(self, endpoint: TranslatorEndpoint):
        self.endpoint = endpoint

    def translate(self, text: str, src: str, tgt: str) -> str:
        import requests

        url = self.endpoint.base_url.rstrip("/") + "/translate"
        attempts = self.endpoint.retries + 1
        last = "no attempt made"
        for _ in range(attempts):
            try:
                resp = requests.post(
                    url,
                    json={"text": text, "src": src, "tgt": tgt},
                    timeout=self.endpoint.timeout_ms / 1000.0,
                )
            except requests.RequestException as exc:
                last = str(exc)
                continue
            if resp.status_code == 200:
                try:
                    return resp.json()["text"]
                except (ValueError, KeyError) as exc:
                    raise TranslateError(f"malformed 200 response from {url}: {exc}") from exc
            last = f"HTTP {resp.status_code}"
        raise TranslateError(f"{url} failed after {attempts} attempt(s): {last}")


class StubTranslator:
    """Deterministic offline translator with a reversible token mapping.

    en -> pivot wraps the text in a pivot marker; pivot -> en strips the
    marker and applies a pivot-specific rewrite: ``fr`` case-folds the
    text to lowercase, ``de`` swaps the first two words. A round trip is
    therefore degenerate exactly when the rewrite is a no-op, which makes
    expected synthetic counts computable in tests.
    """

    def translate(self, text: str, src: str, tgt: str) -> str:
        if src == "en":
            return f"[{tgt}] {text}"
        marker = f"[{src}] "
        inner = text[len(marker):] if text.startswith(marker) else text
        if src == "fr":
            return inner.lower()
        if src == "de":
            words = inner.split()
            if len(words) >= 2:
                words[0], words[1] = words[1], words[0]
            return " ".join(words)
        return inner


def back_translate(
    question: str,
    pivot: str,
    translator: Translator,
    *,
    pivots: Iterable[str] = DEFAULT_PIVOTS,
) -> str:
    """Round-trip a question en -> pivot -> en, whitespace-normalized.

    The pivot is validated against the configured set before any call is
    made; unknown pivots raise :class:`UnknownPivot`.
    """
    allowed = tuple(pivots)
    if pivot not in allowed:
        raise UnknownPivot(f"pivot {pivot!r} is not in the configured set {sorted(allowed)}")
    forward = translator.translate(question, "en", pivot)
    back = translator.translate(forward, pivot, "en")
    return " ".join(back.split())


@dataclass(frozen=True)
class AugmentReport:
    added: int
    dropped_degenerate: int
    errors: tuple[tuple[str, str, str], ...]  # (sample id, pivot, message)

    def to_dict(self) -> dict[str, Any]:
        return {
            "added": self.added,
            "dropped_degenerate": self.dropped_degenerate,
            "errors": [list(e) for e in self.errors],
        }


@dataclass(frozen=True)
class AugmentResult:
    samples: list[Sample]
    report: AugmentReport


def augment_corpus(
    corpus: list[Sample],
    pivots: Iterable[str],
    translator: Translator,
    *,
    jobs: int = 1,
) -> AugmentResult:
    """Back-translate every sample's template question through each pivot.

    Ids, gold SQL, and existing question fields are never altered; the
    round trips land in ``synthetic_paraphrases`` with their pivot as
    provenance. Degenerate round trips are dropped and counted. A failed
    translation is recorded per (sample, pivot) and the sample is kept
    without that pivot. Output order matches input order whatever ``jobs``
    is.
    """
    pivot_list = tuple(pivots)

    def work(sample: Sample) -> tuple[tuple[Paraphrase, ...], int, tuple[tuple[str, str, str], ...]]:
        added: list[Paraphrase] = []
        degenerate = 0
        errors: list[tuple[str, str, str]] = []
        for pivot in pivot_list:
            try:
                text = back_translate(
                    sample.template_question, pivot, translator, pivots=pivot_list
                )
            except TranslateError as exc:
                errors.append((sample.id, pivot, str(exc)))
                continue
            if text == sample.template_question:
                degenerate += 1
                continue
            added.append(Paraphrase(text, pivot))
        return tuple(added), degenerate, tuple(errors)

    if jobs <= 1 or len(corpus) <= 1:
        results = [work(s) for s in corpus]
    else:
        with ThreadPoolExecutor(max_workers=jobs) as pool:
            results = list(pool.map(work, corpus))

    out: list[Sample] = []
    total_added = 0
    total_degenerate = 0
    all_errors: list[tuple[str, str, str]] = []
    for sample, (added, degenerate, errors) in zip(corpus, results):
        out.append(with_synthetic(sample, added) if added else sample)
        total_added += len(added)
        total_degenerate += degenerate
        all_errors.extend(errors)
    report = AugmentReport(total_added, total_degenerate, tuple(all_errors))
    return AugmentResult(samples=out, report=report)


@dataclass(frozen=True)
class QuestionTemplate:
    name: str
    text_pattern: str
    sql_pattern: str
    slot_bindings: tuple[tuple[str, tuple[str, str]], ...]  # (slot, (table, column))

    def slots(self) -> tuple[str, ...]:
        return tuple(slot for slot, _ in self.slot_bindings)

    def binding(self, slot: str) -> tuple[str, str]:
        for name, binding in self.slot_bindings:
            if name == slot:
                return binding
        raise UnboundSlot(f"template {self.name}: slot {slot!r} has no binding")


def load_templates(path: str | Path) -> list[QuestionTemplate]:
    """Read a template file: a JSON array of ``{name, question, sql,
    slots}`` objects where slots maps slot names to [table, column]."""
    with open(path, encoding="utf-8") as fh:
        try:
            entries = json.load(fh)
        except json.JSONDecodeError as exc:
            raise DataError(f"template file is not valid JSON: {exc}") from exc
    templates: list[QuestionTemplate] = []
    for idx, entry in enumerate(entries):
        try:
            templates.append(
                QuestionTemplate(
                    name=entry.get("name", f"t{idx}"),
                    text_pattern=entry["question"],
                    sql_pattern=entry["sql"],
                    slot_bindings=tuple(
                        (slot, (table, column))
                        for slot, (table, column) in sorted(entry["slots"].items())
                    ),
                )
            )
        except (KeyError, TypeError, ValueError) as exc:
            raise DataError(f"template {idx}: malformed entry: {exc}") from exc
    return templates


def _slot_token(slot: str) -> str:
    return f"[{slot}]"


def _substitute(pattern: str, slot: str, value: str, *, sql_side: bool) -> str:
    token = _slot_token(slot)
    if token not in pattern:
        raise UnboundSlot(f"slot {slot!r} does not appear in pattern {pattern!r}")
    replacement = value.replace('"', '""') if sql_side else value
    return pattern.replace(token, replacement)


def instantiate_templates(
    templates: Iterable[QuestionTemplate],
    lookup: ValueLookup,
    *,
    limit_per_template: int = 200,
) -> list[Sample]:
    """Generate samples by filling template slots with database values.

    Values are drawn in canonical (sorted) order; multi-slot templates
    take the cartesian product. Sample ids are deterministic: the template
    name plus a digest of the chosen values. Every generated SQL string
    must parse; quotes inside values are escaped on the SQL side.
    """
    samples: list[Sample] = []
    for template in templates:
        if not template.slot_bindings:
            raise UnboundSlot(f"template {template.name} has no slots")
        value_sets: list[tuple[str, tuple[str, ...]]] = []
        for slot, (table, column) in template.slot_bindings:
            try:
                values = lookup.values(table, column)
            except UnknownColumn as exc:
                raise UnboundSlot(f"template {template.name}: {exc}") from exc
            if not values:
                raise EmptyValueSet(f"template {template.name}: {table}.{column} has no values")
            value_sets.append((slot, values))
        produced = 0
        for combo in itertools.product(*(values for _, values in value_sets)):
            if produced >= limit_per_template:
                break
            question = template.text_pattern
            sql = template.sql_pattern
            for (slot, _), value in zip(value_sets, combo):
                question = _substitute(question, slot, value, sql_side=False)
                sql = _substitute(sql, slot, value, sql_side=True)
            parse_sql(sql)
            digest = hashlib.sha256("\x1f".join(combo).encode("utf-8")).hexdigest()[:10]
            samples.append(
                Sample(
                    id=f"{template.name}-{digest}",
                    template_question=question,
                    gold_sql=sql,
                )
            )
            produced += 1
    return samples
