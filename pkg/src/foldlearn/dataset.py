"""Tabular ingestion: CSV loading, schemas, binning and ground predicates."""

from __future__ import annotations

import bisect
import csv
import math
import re
from collections import Counter
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Iterable, Sequence

from .exceptions import ParseError, SchemaError
from .logic import Atom, BackgroundTheory

__all__ = [
    "MISSING",
    "Column",
    "FeatureSchema",
    "Sample",
    "BinEdges",
    "load_csv",
    "discretize",
    "entropy_discretize",
    "discretize_schema",
    "propositionalize",
    "make_predicates",
    "make_examples",
    "read_schema",
    "write_schema",
    "format_schema",
    "parse_schema",
    "sanitize",
    "bin_index",
]

MISSING = None

_POSITIVE_TOKENS = ("1", "true", "yes", "y", "t", "pos", "positive", ">50k")


def sanitize(text: str) -> str:
    """Map arbitrary text to a lowercase identifier fragment."""
    text = str(text).strip().lower().replace("-", "m").replace("+", "p")
    text = re.sub(r"[^a-z0-9]+", "_", text).strip("_")
    return text or "v"


def _constant(value: str) -> str:
    name = sanitize(value)
    return name if name[0].isalpha() else f"s{name}"


@dataclass(frozen=True)
class Column:
    """A feature column.

    ``kind`` is ``"numeric"``, ``"categorical"`` or ``"binary"``. Categorical
    columns carry their value domain; numeric columns carry bin edges once
    discretized (``None`` before). Binary columns come from
    propositionalization and remember the ``(column, value)`` they test.
    """

    name: str
    kind: str
    domain: tuple = ()
    edges: tuple[float, ...] | None = None
    source: tuple[str, str] | None = None

    @property
    def prefix(self) -> str:
        """Predicate-safe form of the column name."""
        name = sanitize(self.name)
        return name if name[0].isalpha() else f"c{name}"

    @property
    def n_bins(self) -> int:
        return len(self.edges or ()) + 1

    def predicate(self, value) -> str | None:
        """Name of the predicate a value satisfies for this column."""
        if value is MISSING:
            return None
        if self.kind == "categorical":
            return f"{self.prefix}_{sanitize(value)}"
        if self.kind == "binary":
            return self.prefix if value else None
        if self.edges is None:
            raise SchemaError(f"numeric column {self.name!r} has no bin edges")
        return f"{self.prefix}_bin{bin_index(self.edges, value)}"

    def predicates(self) -> list[str]:
        if self.kind == "categorical":
            return [f"{self.prefix}_{sanitize(v)}" for v in self.domain]
        if self.kind == "binary":
            return [self.prefix]
        return [f"{self.prefix}_bin{i}" for i in range(self.n_bins)]


@dataclass(frozen=True)
class FeatureSchema:
    columns: tuple[Column, ...]
    label_column: str
    id_column: str | None = None
    positive_label: str = "1"
    negative_label: str = "0"

    def __post_init__(self):
        names = [c.name for c in self.columns] + [self.label_column]
        if self.id_column:
            names.append(self.id_column)
        dupes = sorted(n for n, k in Counter(names).items() if k > 1)
        if dupes:
            raise SchemaError(f"duplicate column names: {', '.join(dupes)}")
        for c in self.columns:
            if c.kind not in ("numeric", "categorical", "binary"):
                raise SchemaError(f"column {c.name!r}: unknown kind {c.kind!r}")
            if c.kind == "categorical":
                if not c.domain:
                    raise SchemaError(f"categorical column {c.name!r} has an empty domain")
                if len(set(c.domain)) != len(c.domain):
                    raise SchemaError(f"categorical column {c.name!r} has duplicate values")
            if c.kind == "numeric" and c.edges is not None:
                if any(b <= a for a, b in zip(c.edges, c.edges[1:])):
                    raise SchemaError(f"bin edges of {c.name!r} are not strictly increasing")

    @property
    def feature_names(self) -> list[str]:
        return [c.name for c in self.columns]

    def column(self, name: str) -> Column:
        for c in self.columns:
            if c.name == name:
                return c
        raise KeyError(name)

    def replace_column(self, column: Column) -> FeatureSchema:
        cols = tuple(column if c.name == column.name else c for c in self.columns)
        return replace(self, columns=cols)

    def predicate_names(self) -> list[str]:
        return [p for c in self.columns for p in c.predicates()]


@dataclass(frozen=True)
class Sample:
    id: str
    values: dict
    label: bool

    def __hash__(self):
        return hash(self.id)


@dataclass(frozen=True)
class BinEdges:
    edges: tuple[float, ...]
    policy: str = "equal-frequency"

    def __len__(self) -> int:
        return len(self.edges)

    @property
    def n_intervals(self) -> int:
        return len(self.edges) + 1

    def index(self, value: float) -> int:
        return bin_index(self.edges, value)


def bin_index(edges: Sequence[float], value: float) -> int:
    """Interval of ``value`` among half-open bins ``[e_i, e_{i+1})``."""
    return bisect.bisect_right(edges, float(value))


# ---------------------------------------------------------------------------
# CSV


def _is_number(text: str) -> bool:
    try:
        float(text)
    except ValueError:
        return False
    return True


def _label_polarity(values: Sequence[str], positive: str | None) -> tuple[str, str]:
    distinct = sorted(set(values))
    if len(distinct) > 2:
        raise SchemaError(f"label column is not binary: {distinct[:5]}")
    if positive is not None:
        if positive not in distinct and distinct:
            raise SchemaError(f"positive label {positive!r} not present in label column")
        others = [v for v in distinct if v != positive]
        return positive, others[0] if others else ""
    for v in distinct:
        if v.strip().lower() in _POSITIVE_TOKENS:
            others = [o for o in distinct if o != v]
            return v, others[0] if others else ""
    if len(distinct) == 2:
        return distinct[1], distinct[0]
    return (distinct[0] if distinct else "1"), ""


def load_csv(
    path: str | Path,
    schema: FeatureSchema | None = None,
    *,
    label: str = "label",
    id_column: str | None = None,
    positive: str | None = None,
    categorical: Iterable[str] = (),
) -> tuple[FeatureSchema, list[Sample]]:
    """Read a CSV file into a schema and samples, preserving row order.

    Without ``schema`` column kinds are inferred: a column whose non-empty
    cells all parse as numbers is numeric unless listed in ``categorical``.
    Empty cells become :data:`MISSING`.
    """
    path = Path(path)
    with path.open(newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh, strict=True)
        try:
            rows = list(reader)
        except csv.Error as exc:
            raise ParseError(f"malformed CSV: {exc}", reader.line_num, 1) from exc
    if not rows:
        raise ParseError("missing header row", 1, 1)
    header = [h.strip() for h in rows[0]]
    dupes = sorted(h for h, k in Counter(header).items() if k > 1)
    if dupes:
        raise SchemaError(f"duplicate header names: {', '.join(dupes)}")
    body = rows[1:]
    for i, row in enumerate(body, start=2):
        if len(row) != len(header):
            raise ParseError(
                f"expected {len(header)} fields, found {len(row)}", i, min(len(row), len(header)) + 1
            )
    if schema is not None:
        label, id_column = schema.label_column, schema.id_column
        expected = set(schema.feature_names) | {label} | ({id_column} if id_column else set())
        if set(header) != expected:
            raise SchemaError(
                f"header {sorted(header)} does not match schema columns {sorted(expected)}"
            )
    if label not in header:
        raise SchemaError(f"label column {label!r} not found in header")
    if id_column is not None and id_column not in header:
        raise SchemaError(f"id column {id_column!r} not found in header")

    col = {name: [row[j].strip() for row in body] for j, name in enumerate(header)}

    if schema is None:
        pos, neg = _label_polarity([v for v in col[label] if v != ""], positive)
        categorical = set(categorical)
        columns = []
        for name in header:
            if name in (label, id_column):
                continue
            cells = [v for v in col[name] if v != ""]
            if cells and name not in categorical and all(_is_number(v) for v in cells):
                columns.append(Column(name, "numeric"))
            else:
                domain = tuple(sorted(set(cells), key=_natural_key))
                columns.append(Column(name, "categorical", domain or ("",)))
        schema = FeatureSchema(tuple(columns), label, id_column, pos, neg)
    else:
        labels = set(v for v in col[label] if v != "")
        allowed = {schema.positive_label, schema.negative_label}
        if not labels <= allowed:
            raise SchemaError(f"label values {sorted(labels - allowed)} not in schema")

    samples = []
    seen_ids: set[str] = set()
    for i, row in enumerate(body):
        raw_id = col[id_column][i] if id_column else f"s{i}"
        sid = _constant(raw_id)
        if sid in seen_ids:
            raise SchemaError(f"duplicate sample id {sid!r} (row {i + 2})")
        seen_ids.add(sid)
        lab = col[label][i]
        if lab == "":
            raise SchemaError(f"missing label at row {i + 2}")
        values = {}
        for c in schema.columns:
            cell = col[c.name][i]
            if cell == "":
                values[c.name] = MISSING
            elif c.kind == "numeric":
                try:
                    values[c.name] = float(cell)
                except ValueError:
                    raise ParseError(
                        f"non-numeric value {cell!r} in column {c.name!r}",
                        i + 2,
                        header.index(c.name) + 1,
                    ) from None
            else:
                if cell not in c.domain:
                    raise SchemaError(f"value {cell!r} outside domain of {c.name!r} (row {i + 2})")
                values[c.name] = cell
        samples.append(Sample(sid, values, lab == schema.positive_label))
    return schema, samples


def _natural_key(value: str):
    try:
        return (0, float(value), value)
    except ValueError:
        return (1, 0.0, value)


# ---------------------------------------------------------------------------
# Discretization


def _numeric_values(samples: Sequence[Sample], column: str) -> list[float]:
    values = []
    for s in samples:
        v = s.values.get(column, MISSING)
        if v is MISSING:
            continue
        if isinstance(v, bool) or not isinstance(v, (int, float)):
            raise TypeError(f"column {column!r} is not numeric (value {v!r})")
        values.append(float(v))
    return values


def discretize(samples: Sequence[Sample], column: str, bins: int) -> BinEdges:
    """Equal-frequency cut points for a numeric column.

    The i-th edge sits midway between the ``i*n/bins``-th order statistic and
    its successor. Duplicate edges and edges that would leave the first bin
    empty are dropped.
    """
    if bins < 1:
        raise ValueError(f"bins must be >= 1, got {bins}")
    values = sorted(_numeric_values(samples, column))
    if not values:
        raise ValueError(f"column {column!r} has no non-missing values")
    n = len(values)
    edges: list[float] = []
    for i in range(1, bins):
        k = (i * n) // bins
        if k <= 0 or k >= n:
            continue
        edge = (values[k - 1] + values[k]) / 2.0
        if edge > values[0] and (not edges or edge > edges[-1]):
            edges.append(edge)
    return BinEdges(tuple(edges), "equal-frequency")


def _entropy(pos: int, total: int) -> float:
    if total == 0 or pos in (0, total):
        return 0.0
    p = pos / total
    return -(p * math.log2(p) + (1 - p) * math.log2(1 - p))


def entropy_discretize(
    samples: Sequence[Sample], column: str, bins: int, min_leaf: int = 5
) -> BinEdges:
    """Label-aware cut points by recursive binary entropy splitting.

    Intervals are split best-first by information gain; a split is allowed
    only if both sides keep ``min_leaf`` values, and splitting stops at
    ``bins`` intervals or when no split reduces entropy.
    """
    if bins < 1:
        raise ValueError(f"bins must be >= 1, got {bins}")
    pairs = sorted(
        (float(s.values[column]), s.label)
        for s in samples
        if s.values.get(column, MISSING) is not MISSING
    )
    _numeric_values(samples, column)
    if not pairs:
        raise ValueError(f"column {column!r} has no non-missing values")

    def best_split(lo: int, hi: int):
        seg = pairs[lo:hi]
        total, pos_total = len(seg), sum(lab for _, lab in seg)
        base = _entropy(pos_total, total)
        best = None
        pos_left = 0
        for k in range(1, total):
            pos_left += seg[k - 1][1]
            if seg[k - 1][0] == seg[k][0] or k < min_leaf or total - k < min_leaf:
                continue
            rem = (k * _entropy(pos_left, k) + (total - k) * _entropy(pos_total - pos_left, total - k)) / total
            gain = base - rem
            if gain > 1e-12 and (best is None or gain > best[0]):
                best = (gain, lo + k)
        return best

    segments = [(0, len(pairs))]
    cuts: list[int] = []
    while len(segments) < bins:
        options = [(best_split(lo, hi), (lo, hi)) for lo, hi in segments]
        options = [(b, seg) for b, seg in options if b is not None]
        if not options:
            break
        (gain, k), (lo, hi) = max(options, key=lambda o: (o[0][0], -o[1][0]))
        segments.remove((lo, hi))
        segments += [(lo, k), (k, hi)]
        cuts.append(k)
    edges = sorted((pairs[k - 1][0] + pairs[k][0]) / 2.0 for k in cuts)
    return BinEdges(tuple(edges), "entropy")


def discretize_schema(
    schema: FeatureSchema,
    samples: Sequence[Sample],
    bins: int = 4,
    supervised: bool = False,
) -> FeatureSchema:
    """Assign edges to every numeric column that has none yet."""
    for c in schema.columns:
        if c.kind != "numeric" or c.edges is not None:
            continue
        if not any(s.values.get(c.name) is not MISSING for s in samples):
            edges = BinEdges(())
        elif supervised:
            edges = entropy_discretize(samples, c.name, bins)
        else:
            edges = discretize(samples, c.name, bins)
        schema = schema.replace_column(replace(c, edges=edges.edges))
    return schema


# ---------------------------------------------------------------------------
# Propositionalization and predicates


def propositionalize(schema: FeatureSchema) -> FeatureSchema:
    """Replace each categorical column of cardinality n with n binary columns.

    Generated columns are named ``<column>_<value>`` and keep the originating
    ``(column, value)`` in :attr:`Column.source`.
    """
    columns: list[Column] = []
    for c in schema.columns:
        if c.kind != "categorical":
            columns.append(c)
            continue
        for v in c.domain:
            columns.append(Column(f"{c.prefix}_{sanitize(v)}", "binary", source=(c.name, v)))
    names = [c.prefix for c in columns] + [sanitize(schema.label_column)]
    dupes = sorted(n for n, k in Counter(names).items() if k > 1)
    if dupes:
        raise SchemaError(f"propositionalization produced colliding names: {', '.join(dupes)}")
    return replace(schema, columns=tuple(columns))


def _column_value(column: Column, sample: Sample):
    if column.kind == "binary":
        orig, value = column.source
        v = sample.values.get(orig, MISSING)
        if v is MISSING:
            return MISSING
        return v == value
    return sample.values.get(column.name, MISSING)


def make_predicates(schema: FeatureSchema, samples: Iterable[Sample]) -> BackgroundTheory:
    """One unary ground fact per sample and satisfied feature constraint."""
    names = [p for c in schema.columns for p in c.predicates()]
    dupes = sorted(n for n, k in Counter(names).items() if k > 1)
    if dupes:
        raise SchemaError(f"predicate names collide: {', '.join(dupes)}")
    facts = set()
    for s in samples:
        for c in schema.columns:
            name = c.predicate(_column_value(c, s))
            if name is not None:
                facts.add(Atom(name, (s.id,)))
    return BackgroundTheory((), frozenset(facts))


def make_examples(samples: Iterable[Sample], target: str) -> tuple[list[Atom], list[Atom]]:
    pos, neg = [], []
    for s in samples:
        (pos if s.label else neg).append(Atom(target, (s.id,)))
    return pos, neg


# ---------------------------------------------------------------------------
# Schema sidecar files: one ``name:kind[:v1|v2|...]`` line per column.


def format_schema(schema: FeatureSchema) -> str:
    lines = []
    if schema.id_column:
        lines.append(f"{schema.id_column}:id")
    for c in schema.columns:
        if c.kind == "categorical":
            lines.append(f"{c.name}:categorical:{'|'.join(c.domain)}")
        elif c.kind == "numeric":
            if c.edges is None:
                lines.append(f"{c.name}:numeric")
            else:
                lines.append(f"{c.name}:numeric:{'|'.join(repr(e) for e in c.edges)}")
        else:
            raise SchemaError("binary columns are derived and cannot be written to a schema file")
    lines.append(f"{schema.label_column}:label:{schema.negative_label}|{schema.positive_label}")
    return "\n".join(lines) + "\n"


def parse_schema(text: str) -> FeatureSchema:
    columns: list[Column] = []
    label = id_column = None
    pos, neg = "1", "0"
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        parts = line.split(":", 2)
        if len(parts) < 2:
            raise ParseError(f"expected name:kind, got {line!r}", lineno, 1)
        name, kind = parts[0].strip(), parts[1].strip()
        extra = [v.strip() for v in parts[2].split("|")] if len(parts) == 3 and parts[2].strip() else []
        if kind == "label":
            label = name
            if extra:
                if len(extra) != 2:
                    raise SchemaError(f"label line needs negative|positive values (line {lineno})")
                neg, pos = extra
        elif kind == "id":
            id_column = name
        elif kind == "categorical":
            columns.append(Column(name, "categorical", tuple(extra)))
        elif kind == "numeric":
            try:
                edges = tuple(float(e) for e in extra) if extra else None
            except ValueError:
                raise ParseError(f"bad bin edge in {line!r}", lineno, len(parts[0]) + len(parts[1]) + 3) from None
            columns.append(Column(name, "numeric", edges=edges))
        else:
            raise SchemaError(f"unknown column kind {kind!r} (line {lineno})")
    if label is None:
        raise SchemaError("schema declares no label column")
    return FeatureSchema(tuple(columns), label, id_column, pos, neg)


def read_schema(path: str | Path) -> FeatureSchema:
    return parse_schema(Path(path).read_text(encoding="utf-8"))


def write_schema(schema: FeatureSchema, path: str | Path) -> None:
    Path(path).write_text(format_schema(schema), encoding="utf-8")
