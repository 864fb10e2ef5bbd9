"""Corpus, schema, and execution-database storage.

File formats: the corpus is UTF-8 JSON Lines with one sample per line
(fields ``id``, ``question_template``, ``question_paraphrase``,
``synthetic``, ``sql``; unknown fields survive a load/save round trip),
the schema is a JSON document mirroring :class:`SchemaDef`, table data is
RFC 4180 CSV with a header row, and the execution database is a single
SQLite file.
"""

from __future__ import annotations

import csv
import json
import sqlite3
import time
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Any, Iterable, Mapping

from .errors import (
    ColumnTypeError,
    CsvError,
    DataError,
    DbError,
    EmptyCorpus,
    QueryExecutionError,
    RecordError,
    UnknownColumn,
)
from .query import AggOp, parse_sql, tokenize_sql
from .records import read_jsonl, write_jsonl

ATTR_TEXT = "text"
ATTR_NUMBER = "number"
ATTR_DATETIME = "datetime"
ATTRS = frozenset({ATTR_TEXT, ATTR_NUMBER, ATTR_DATETIME})

_SQLITE_TYPES = {ATTR_TEXT: "TEXT", ATTR_NUMBER: "NUMERIC", ATTR_DATETIME: "TEXT"}


@dataclass(frozen=True)
class ColumnDef:
    name: str
    attr: str

    def __post_init__(self):
        if self.attr not in ATTRS:
            raise DataError(f"column {self.name}: unknown attribute {self.attr!r}")


@dataclass(frozen=True)
class TableDef:
    name: str
    columns: tuple[ColumnDef, ...]

    def __post_init__(self):
        object.__setattr__(self, "columns", tuple(self.columns))
        names = [c.name.upper() for c in self.columns]
        if len(set(names)) != len(names):
            raise DataError(f"table {self.name}: duplicate column names")

    def column(self, name: str) -> ColumnDef | None:
        wanted = name.upper()
        for col in self.columns:
            if col.name.upper() == wanted:
                return col
        return None


@dataclass(frozen=True)
class SchemaDef:
    tables: tuple[TableDef, ...]

    def __post_init__(self):
        object.__setattr__(self, "tables", tuple(self.tables))
        names = [t.name.upper() for t in self.tables]
        if len(set(names)) != len(names):
            raise DataError("duplicate table names in schema")

    def table(self, name: str) -> TableDef | None:
        wanted = name.upper()
        for tab in self.tables:
            if tab.name.upper() == wanted:
                return tab
        return None

    def attr_of(self, table: str, column: str) -> str | None:
        tab = self.table(table)
        if tab is None:
            return None
        col = tab.column(column)
        return col.attr if col else None

    def to_dict(self) -> dict[str, Any]:
        return {
            "tables": [
                {"name": t.name, "columns": [{"name": c.name, "attr": c.attr} for c in t.columns]}
                for t in self.tables
            ]
        }

    @classmethod
    def from_dict(cls, obj: Mapping[str, Any]) -> "SchemaDef":
        try:
            tables = tuple(
                TableDef(
                    t["name"],
                    tuple(ColumnDef(c["name"], c["attr"]) for c in t["columns"]),
                )
                for t in obj["tables"]
            )
        except (KeyError, TypeError) as exc:
            raise DataError(f"malformed schema document: {exc}") from exc
        return cls(tables)


def load_schema(path: str | Path) -> SchemaDef:
    with open(path, encoding="utf-8") as fh:
        try:
            obj = json.load(fh)
        except json.JSONDecodeError as exc:
            raise DataError(f"schema file is not valid JSON: {exc}") from exc
    return SchemaDef.from_dict(obj)


def save_schema(schema: SchemaDef, path: str | Path) -> Path:
    from .records import write_json

    return write_json(path, schema.to_dict())


@dataclass(frozen=True)
class Paraphrase:
    text: str
    pivot: str


_SAMPLE_KEYS = ("id", "question_template", "question_paraphrase", "synthetic", "sql", "schema")


@dataclass(frozen=True)
class Sample:
    id: str
    template_question: str
    gold_sql: str
    paraphrase_question: str | None = None
    synthetic_paraphrases: tuple[Paraphrase, ...] = ()
    schema: SchemaDef | None = None
    extra: dict[str, Any] = field(default_factory=dict)

    def __post_init__(self):
        object.__setattr__(self, "synthetic_paraphrases", tuple(self.synthetic_paraphrases))

    def to_record(self) -> dict[str, Any]:
        rec: dict[str, Any] = {"id": self.id, "question_template": self.template_question}
        if self.paraphrase_question is not None:
            rec["question_paraphrase"] = self.paraphrase_question
        if self.synthetic_paraphrases:
            rec["synthetic"] = [{"text": p.text, "pivot": p.pivot} for p in self.synthetic_paraphrases]
        rec["sql"] = self.gold_sql
        if self.schema is not None:
            rec["schema"] = self.schema.to_dict()
        rec.update(self.extra)
        return rec

    @classmethod
    def from_record(cls, rec: Mapping[str, Any]) -> "Sample":
        missing = [k for k in ("id", "question_template", "sql") if k not in rec]
        if missing:
            raise DataError("missing field(s): " + ", ".join(missing))
        synthetic = tuple(
            Paraphrase(entry["text"], entry["pivot"]) for entry in rec.get("synthetic", ())
        )
        schema = rec.get("schema")
        return cls(
            id=str(rec["id"]),
            template_question=rec["question_template"],
            gold_sql=rec["sql"],
            paraphrase_question=rec.get("question_paraphrase"),
            synthetic_paraphrases=synthetic,
            schema=SchemaDef.from_dict(schema) if schema is not None else None,
            extra={k: v for k, v in rec.items() if k not in _SAMPLE_KEYS},
        )


def load_corpus(path: str | Path) -> list[Sample]:
    """Load and validate a corpus file.

    Every id must be unique, every ``question_template`` non-empty, and
    every ``sql`` must parse under the dialect; violations raise
    :class:`RecordError` carrying the line number.
    """
    samples: list[Sample] = []
    seen: set[str] = set()
    for lineno, rec in read_jsonl(path):
        try:
            sample = Sample.from_record(rec)
            if not sample.template_question or not str(sample.template_question).strip():
                raise DataError("question_template is empty")
            parse_sql(sample.gold_sql)
        except RecordError:
            raise
        except DataError as exc:
            raise RecordError(lineno, str(exc)) from exc
        if sample.id in seen:
            raise RecordError(lineno, f"duplicate id {sample.id!r}")
        seen.add(sample.id)
        samples.append(sample)
    return samples


def save_corpus(samples: list[Sample], path: str | Path) -> Path:
    return write_jsonl(path, (s.to_record() for s in samples))


def build_exec_db(schema: SchemaDef, table_files: Mapping[str, str | Path], out_path: str | Path) -> Path:
    """Build a SQLite database from per-table CSV files.

    Every schema table needs an entry in ``table_files``. Number columns
    must parse as int or float (empty cells become NULL); offending cells
    raise :class:`ColumnTypeError` with their row and column.
    """
    out_path = Path(out_path)
    for table in schema.tables:
        if table.name not in table_files:
            raise DataError(f"no CSV provided for table {table.name}")
    if out_path.exists():
        out_path.unlink()
    conn = sqlite3.connect(out_path)
    try:
        for table in schema.tables:
            decls = ", ".join(f'"{c.name}" {_SQLITE_TYPES[c.attr]}' for c in table.columns)
            conn.execute(f'CREATE TABLE "{table.name}" ({decls})')
            rows = _read_table_csv(table, table_files[table.name])
            placeholders = ", ".join("?" for _ in table.columns)
            conn.executemany(f'INSERT INTO "{table.name}" VALUES ({placeholders})', rows)
        conn.commit()
    finally:
        conn.close()
    return out_path


def _read_table_csv(table: TableDef, path: str | Path) -> list[tuple]:
    expected = [c.name for c in table.columns]
    rows: list[tuple] = []
    if not Path(path).is_file():
        raise DataError(f"CSV for table {table.name} not found: {path}")
    with open(path, encoding="utf-8", newline="") as fh:
        reader = csv.reader(fh)
        try:
            header = next(reader)
        except StopIteration:
            raise CsvError(1, f"{path}: missing header row") from None
        if [h.upper() for h in header] != [c.upper() for c in expected]:
            raise CsvError(1, f"{path}: header {header!r} does not match columns {expected!r}")
        for rownum, cells in enumerate(reader, start=2):
            if not cells:
                continue
            if len(cells) != len(expected):
                raise CsvError(rownum, f"{path}: expected {len(expected)} fields, got {len(cells)}")
            rows.append(tuple(_convert_cell(table, rownum, name, cell) for name, cell in zip(expected, cells)))
    return rows


def _convert_cell(table: TableDef, rownum: int, column: str, cell: str):
    # CSV cannot distinguish "missing" from "empty"; treat both as NULL.
    if cell == "":
        return None
    attr = table.column(column).attr
    if attr != ATTR_NUMBER:
        return cell
    try:
        return int(cell)
    except ValueError:
        pass
    try:
        return float(cell)
    except ValueError:
        raise ColumnTypeError(rownum, f"{cell!r} is not a number", column=column) from None


def open_exec_db(path: str | Path, *, readonly: bool = True) -> sqlite3.Connection:
    """Open the execution database; read-only by default so that executing
    untrusted predicted SQL cannot mutate it."""
    path = Path(path)
    try:
        if readonly:
            conn = sqlite3.connect(f"file:{path}?mode=ro", uri=True, check_same_thread=False)
            conn.execute("SELECT 1").fetchone()
        else:
            conn = sqlite3.connect(path)
        return conn
    except sqlite3.Error as exc:
        raise DbError(f"cannot open database {path}: {exc}") from exc


def run_select(conn: sqlite3.Connection, sql: str, timeout_ms: int | None = None) -> list[tuple]:
    """Execute one query and fetch all rows.

    Any SQLite error or an elapsed per-query timeout raises
    :class:`QueryExecutionError`; the timeout is enforced with a progress
    handler so runaway queries are interrupted.
    """
    if timeout_ms is not None:
        deadline = time.monotonic() + timeout_ms / 1000.0
        conn.set_progress_handler(lambda: 1 if time.monotonic() > deadline else 0, 2000)
    try:
        return conn.execute(sql).fetchall()
    except sqlite3.Error as exc:
        raise QueryExecutionError(str(exc)) from exc
    except sqlite3.Warning as exc:
        raise QueryExecutionError(str(exc)) from exc
    finally:
        if timeout_ms is not None:
            conn.set_progress_handler(None, 0)


def canonical_value(value: Any) -> str:
    """Render a database cell as its canonical string form."""
    if isinstance(value, float):
        return str(int(value)) if value.is_integer() else repr(value)
    return str(value)


@dataclass(frozen=True)
class ValueLookup:
    """Distinct values per (table, column), canonically ordered.

    Keys are uppercase; ``values`` raises :class:`UnknownColumn` for pairs
    outside the schema the lookup was built from.
    """

    _values: dict[tuple[str, str], tuple[str, ...]]
    _attrs: dict[tuple[str, str], str]

    def values(self, table: str, column: str) -> tuple[str, ...]:
        key = (table.upper(), column.upper())
        if key not in self._values:
            raise UnknownColumn(f"no values recorded for {table}.{column}")
        return self._values[key]

    def attr(self, table: str, column: str) -> str:
        key = (table.upper(), column.upper())
        if key not in self._attrs:
            raise UnknownColumn(f"no such column {table}.{column}")
        return self._attrs[key]

    def columns(self) -> list[tuple[str, str]]:
        return sorted(self._values)

    def tables_for_column(self, column: str) -> tuple[str, ...]:
        wanted = column.upper()
        return tuple(sorted({t for (t, c) in self._values if c == wanted}))


def build_value_lookup(db: str | Path | sqlite3.Connection, schema: SchemaDef) -> ValueLookup:
    conn = db if isinstance(db, sqlite3.Connection) else open_exec_db(db)
    close = not isinstance(db, sqlite3.Connection)
    values: dict[tuple[str, str], tuple[str, ...]] = {}
    attrs: dict[tuple[str, str], str] = {}
    try:
        for table in schema.tables:
            for col in table.columns:
                rows = run_select(
                    conn,
                    f'SELECT DISTINCT "{col.name}" FROM "{table.name}" WHERE "{col.name}" IS NOT NULL',
                )
                key = (table.name.upper(), col.name.upper())
                values[key] = tuple(sorted(canonical_value(r[0]) for r in rows))
                attrs[key] = col.attr
    finally:
        if close:
            conn.close()
    return ValueLookup(values, attrs)


@dataclass(frozen=True)
class CorpusStats:
    n_samples: int
    n_tables: int
    columns_per_table: tuple[int, ...]
    avg_template_question_len: float
    avg_paraphrase_question_len: float
    avg_sql_len: float
    avg_agg_columns: float
    avg_conditions: float

    def to_dict(self) -> dict[str, Any]:
        return {
            "n_samples": self.n_samples,
            "n_tables": self.n_tables,
            "columns_per_table": list(self.columns_per_table),
            "avg_template_question_len": self.avg_template_question_len,
            "avg_paraphrase_question_len": self.avg_paraphrase_question_len,
            "avg_sql_len": self.avg_sql_len,
            "avg_agg_columns": self.avg_agg_columns,
            "avg_conditions": self.avg_conditions,
        }


def _mean2(total: float, count: int) -> float:
    return round(total / count, 2) if count else 0.0


def corpus_stats(corpus: list[Sample], schema: SchemaDef) -> CorpusStats:
    """Descriptive statistics: question/SQL lengths are word/token counts,
    averages are rounded to two decimals."""
    if not corpus:
        raise EmptyCorpus("cannot compute statistics for an empty corpus")
    template_words = 0
    paraphrase_words = 0
    paraphrase_count = 0
    sql_tokens = 0
    select_items = 0
    conditions = 0
    for sample in corpus:
        template_words += len(sample.template_question.split())
        if sample.paraphrase_question is not None:
            paraphrase_words += len(sample.paraphrase_question.split())
            paraphrase_count += 1
        sql_tokens += len(tokenize_sql(sample.gold_sql))
        query = parse_sql(sample.gold_sql)
        select_items += len(query.select_items)
        conditions += len(query.conditions)
    n = len(corpus)
    return CorpusStats(
        n_samples=n,
        n_tables=len(schema.tables),
        columns_per_table=tuple(len(t.columns) for t in schema.tables),
        avg_template_question_len=_mean2(template_words, n),
        avg_paraphrase_question_len=_mean2(paraphrase_words, paraphrase_count),
        avg_sql_len=_mean2(sql_tokens, n),
        avg_agg_columns=_mean2(select_items, n),
        avg_conditions=_mean2(conditions, n),
    )


_EXTERNAL_ATTR_MAP = {
    "text": ATTR_TEXT,
    "number": ATTR_NUMBER,
    "time": ATTR_DATETIME,
    "boolean": ATTR_NUMBER,
    "others": ATTR_TEXT,
}


@dataclass(frozen=True)
class MergeResult:
    samples: list[Sample]
    skipped: tuple[RecordError, ...]


def _external_schemas(tables_path: Path) -> dict[str, SchemaDef]:
    with open(tables_path, encoding="utf-8") as fh:
        entries = json.load(fh)
    schemas: dict[str, SchemaDef] = {}
    for entry in entries:
        table_names = entry.get("table_names_original") or entry["table_names"]
        column_names = entry.get("column_names_original") or entry["column_names"]
        column_types = entry["column_types"]
        columns: list[list[ColumnDef]] = [[] for _ in table_names]
        for (tab_idx, col_name), col_type in zip(column_names, column_types):
            if tab_idx < 0:
                continue
            attr = _EXTERNAL_ATTR_MAP.get(col_type, ATTR_TEXT)
            columns[tab_idx].append(ColumnDef(col_name, attr))
        schemas[entry["db_id"]] = SchemaDef(
            tuple(TableDef(name, tuple(cols)) for name, cols in zip(table_names, columns))
        )
    return schemas


def merge_out_of_domain(
    primary: list[Sample],
    examples_path: str | Path,
    tables_path: str | Path | None = None,
    *,
    lenient: bool = False,
) -> MergeResult:
    """Append an external (question, SQL, per-database schema) corpus.

    The external release is an examples JSON array of ``{db_id, question,
    query}`` records plus a ``tables.json`` schema file (defaulting to the
    sibling of the examples file). Converted samples carry their own
    schema and ids prefixed with the examples file stem. Records whose SQL
    falls outside the dialect raise :class:`RecordError`, or are skipped
    and reported when ``lenient``.
    """
    examples_path = Path(examples_path)
    tables_path = Path(tables_path) if tables_path else examples_path.with_name("tables.json")
    schemas = _external_schemas(tables_path)
    prefix = examples_path.stem
    with open(examples_path, encoding="utf-8") as fh:
        entries = json.load(fh)

    existing = {s.id for s in primary}
    converted: list[Sample] = []
    skipped: list[RecordError] = []
    for idx, entry in enumerate(entries):
        # Id collisions are corpus-integrity failures; lenient mode only
        # forgives records that are malformed or outside the dialect.
        sample_id = f"{prefix}-{idx:05d}"
        if sample_id in existing:
            raise RecordError(idx, f"id collision with primary corpus: {sample_id!r}")
        try:
            question = entry["question"]
            sql = entry["query"]
            db_id = entry["db_id"]
            if db_id not in schemas:
                raise DataError(f"unknown db_id {db_id!r}")
            parse_sql(sql)
            sample = Sample(
                id=sample_id,
                template_question=question,
                gold_sql=sql,
                schema=schemas[db_id],
            )
        except (DataError, KeyError, TypeError) as exc:
            err = RecordError(idx, str(exc))
            if lenient:
                skipped.append(err)
                continue
            raise err from exc
        converted.append(sample)
    return MergeResult(samples=list(primary) + converted, skipped=tuple(skipped))


def with_synthetic(sample: Sample, paraphrases: Iterable[Paraphrase]) -> Sample:
    return replace(
        sample, synthetic_paraphrases=sample.synthetic_paraphrases + tuple(paraphrases)
    )
