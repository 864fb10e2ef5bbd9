"""Schema linearization and training-file export for seq2seq models.

A schema flattens to ``*`` followed by, for each table, its name and then
each column name with its attribute word. The model input is that string,
a separator token, and the question.
"""

from __future__ import annotations

from dataclasses import dataclass
from enum import Enum
from pathlib import Path
from typing import Any

from .errors import DataError, EmptyQuestion, ReservedToken
from .records import write_jsonl
from .splits import Split, SplitAssignment
from .store import Sample, SchemaDef

DEFAULT_SEPARATOR = "[SEP]"


class QuestionSource(Enum):
    TEMPLATE = "template"
    PARAPHRASE = "paraphrase"
    SYNTHETIC = "synthetic"
    ALL = "all"


def linearize_schema(schema: SchemaDef) -> str:
    """Flatten a schema, starting with the all-columns symbol."""
    parts = ["*"]
    for table in schema.tables:
        parts.append(table.name)
        for column in table.columns:
            parts.append(column.name)
            parts.append(column.attr)
    return " ".join(parts)


@dataclass(frozen=True)
class ModelInput:
    text: str


def build_model_input(schema: SchemaDef, question: str, sep: str = DEFAULT_SEPARATOR) -> ModelInput:
    """Join the linearized schema and the question with the separator.

    Raises :class:`EmptyQuestion` for blank questions and
    :class:`ReservedToken` if the question already contains the separator.
    """
    if not question or not question.strip():
        raise EmptyQuestion("question is empty")
    if sep in question:
        raise ReservedToken(f"question contains the separator token {sep!r}")
    return ModelInput(f"{linearize_schema(schema)} {sep} {question}")


@dataclass(frozen=True)
class ExportReport:
    n_records: int
    n_samples: int
    per_source: dict[str, int]
    missing_paraphrase: int

    def to_dict(self) -> dict[str, Any]:
        return {
            "n_records": self.n_records,
            "n_samples": self.n_samples,
            "per_source": dict(self.per_source),
            "missing_paraphrase": self.missing_paraphrase,
        }


def export_training_file(
    corpus: list[Sample],
    assignment: SplitAssignment,
    split: Split,
    schema: SchemaDef,
    question_source: QuestionSource,
    out_path: str | Path,
    *,
    sep: str = DEFAULT_SEPARATOR,
) -> ExportReport:
    """Write one ``{"input", "target"}`` record per question variant.

    ``question_source`` picks template questions, human paraphrases,
    synthetic paraphrases, or all of them. Samples carrying their own
    schema (out-of-domain merges) are linearized against it; everything
    else uses ``schema``. Samples lacking a paraphrase are counted, not
    exported, under the paraphrase source.
    """
    unassigned = [s.id for s in corpus if s.id not in assignment.by_id]
    if unassigned:
        raise DataError(f"{len(unassigned)} sample(s) missing from the assignment: {unassigned[:5]}")
    records: list[dict[str, str]] = []
    per_source = {"template": 0, "paraphrase": 0, "synthetic": 0}
    missing_paraphrase = 0
    n_samples = 0
    want = question_source
    for sample in corpus:
        if assignment.by_id[sample.id] is not split:
            continue
        n_samples += 1
        sample_schema = sample.schema if sample.schema is not None else schema
        questions: list[tuple[str, str]] = []
        if want in (QuestionSource.TEMPLATE, QuestionSource.ALL):
            questions.append(("template", sample.template_question))
        if want in (QuestionSource.PARAPHRASE, QuestionSource.ALL):
            if sample.paraphrase_question is None:
                missing_paraphrase += 1
            else:
                questions.append(("paraphrase", sample.paraphrase_question))
        if want in (QuestionSource.SYNTHETIC, QuestionSource.ALL):
            for paraphrase in sample.synthetic_paraphrases:
                questions.append(("synthetic", paraphrase.text))
        for source, question in questions:
            model_input = build_model_input(sample_schema, question, sep)
            records.append({"input": model_input.text, "target": sample.gold_sql})
            per_source[source] += 1
    write_jsonl(out_path, records)
    return ExportReport(
        n_records=len(records),
        n_samples=n_samples,
        per_source=per_source,
        missing_paraphrase=missing_paraphrase,
    )
