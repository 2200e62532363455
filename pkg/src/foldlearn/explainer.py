"""Local linear explanations of a black-box classifier.

A sample is perturbed feature by feature, each perturbation is scored by the
classifier and weighted by its similarity to the original, and a weighted
linear model fitted over "matches the original" indicator features gives the
explanation. Categorical columns contribute one indicator per domain value,
so a value the sample does *not* have can appear as ``not <column>_<value>``.
"""

from __future__ import annotations

import hashlib
import math
import subprocess
import warnings
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable, Mapping, Sequence

import numpy as np

from .dataset import MISSING, FeatureSchema, Sample, bin_index, format_schema, sanitize
from .exceptions import ClassifierError, SchemaError

__all__ = [
    "Table",
    "ClassifierHandle",
    "TreeEnsembleConfig",
    "BaggedTreeModel",
    "ExternalClassifier",
    "PerturbationConfig",
    "PerturbationSpace",
    "Explanation",
    "train_builtin_classifier",
    "sample_around",
    "kernel_weight",
    "lwr_fit",
    "explain_instance",
    "schema_hash",
    "samples_to_table",
    "table_to_samples",
]

Table = dict  # column name -> np.ndarray of values, one entry per row


def samples_to_table(schema: FeatureSchema, samples: Sequence[Sample]) -> Table:
    table: Table = {}
    for c in schema.columns:
        vals = [s.values.get(c.name, MISSING) for s in samples]
        if c.kind == "numeric":
            table[c.name] = np.array([np.nan if v is MISSING else float(v) for v in vals], dtype=float)
        else:
            table[c.name] = np.array(vals, dtype=object)
    return table


def table_to_samples(schema: FeatureSchema, table: Table, ids: Sequence[str] | None = None) -> list[Sample]:
    n = len(next(iter(table.values()))) if table else 0
    out = []
    for i in range(n):
        values = {}
        for c in schema.columns:
            v = table[c.name][i]
            if c.kind == "numeric":
                values[c.name] = MISSING if np.isnan(v) else float(v)
            else:
                values[c.name] = v
        out.append(Sample(ids[i] if ids else f"p{i}", values, False))
    return out


def schema_hash(schema: FeatureSchema) -> str:
    return hashlib.sha256(format_schema(schema).encode()).hexdigest()[:16]


# ---------------------------------------------------------------------------
# Classifiers


@dataclass
class ClassifierHandle:
    """Probability-of-positive scorer over tables of original column values."""

    predict_table: Callable[[Table], np.ndarray]
    schema: FeatureSchema
    provenance: str = "builtin"

    def predict_many(self, table: Table) -> np.ndarray:
        try:
            proba = np.asarray(self.predict_table(table), dtype=float)
        except ClassifierError:
            raise
        except Exception as exc:
            raise ClassifierError(f"classifier failed: {exc}") from exc
        if proba.ndim != 1 or np.any(~np.isfinite(proba)) or np.any((proba < 0) | (proba > 1)):
            raise ClassifierError("classifier returned values outside [0, 1]")
        return proba

    def predict(self, sample: Sample) -> float:
        return float(self.predict_many(samples_to_table(self.schema, [sample]))[0])


@dataclass(frozen=True)
class TreeEnsembleConfig:
    n_estimators: int = 25
    max_depth: int = 4
    seed: int = 0


class BaggedTreeModel:
    """Bagged depth-limited decision trees over one-hot/numeric encodings.

    ``__call__`` returns the fraction of trees voting positive.
    """

    def __init__(self, schema: FeatureSchema, config: TreeEnsembleConfig):
        self.schema = schema
        self.config = config
        self.constant: float | None = None
        self.ensemble = None
        self.fill: dict[str, float] = {}

    def encode(self, table: Table) -> np.ndarray:
        cols = []
        for c in self.schema.columns:
            arr = table[c.name]
            if c.kind == "numeric":
                x = np.asarray(arr, dtype=float)
                cols.append(np.where(np.isnan(x), self.fill.get(c.name, 0.0), x))
            else:
                for v in c.domain:
                    cols.append((arr == v).astype(float))
        if not cols:
            n = len(next(iter(table.values()))) if table else 0
            return np.zeros((n, 0))
        return np.column_stack(cols)

    def fit(self, table: Table, labels: np.ndarray) -> BaggedTreeModel:
        from sklearn.ensemble import BaggingClassifier
        from sklearn.tree import DecisionTreeClassifier

        labels = np.asarray(labels, dtype=int)
        for c in self.schema.columns:
            if c.kind == "numeric":
                x = np.asarray(table[c.name], dtype=float)
                x = x[~np.isnan(x)]
                self.fill[c.name] = float(np.median(x)) if len(x) else 0.0
        if len(set(labels.tolist())) < 2:
            self.constant = float(labels[0]) if len(labels) else 0.0
            warnings.warn(
                "training set has a single class; the classifier is constant",
                RuntimeWarning,
                stacklevel=3,
            )
            return self
        X = self.encode(table)
        self.ensemble = BaggingClassifier(
            estimator=DecisionTreeClassifier(max_depth=self.config.max_depth),
            n_estimators=self.config.n_estimators,
            random_state=self.config.seed,
        ).fit(X, labels)
        return self

    def __call__(self, table: Table) -> np.ndarray:
        n = len(next(iter(table.values()))) if table else 0
        if self.constant is not None:
            return np.full(n, self.constant)
        X = self.encode(table)
        votes = np.zeros(n)
        for tree, feats in zip(self.ensemble.estimators_, self.ensemble.estimators_features_):
            votes += tree.predict(X[:, feats]) == 1
        return votes / len(self.ensemble.estimators_)


def train_builtin_classifier(
    samples: Sequence[Sample],
    schema: FeatureSchema,
    config: TreeEnsembleConfig | None = None,
) -> ClassifierHandle:
    """Fit the bundled black-box model; deterministic for a fixed seed."""
    if len(samples) < 2:
        raise ValueError("need at least two samples to train a classifier")
    config = config or TreeEnsembleConfig()
    model = BaggedTreeModel(schema, config).fit(
        samples_to_table(schema, samples), np.array([s.label for s in samples])
    )
    return ClassifierHandle(model, schema, "builtin")


class ExternalClassifier:
    """Child-process classifier speaking a line protocol on stdin/stdout.

    On start the child prints ``schema <hash>`` where the hash identifies the
    schema it was trained on. Each request is one CSV row of feature values
    in schema column order (empty for missing); each reply is one line with a
    decimal probability.
    """

    def __init__(self, command: Sequence[str], schema: FeatureSchema, timeout: float = 30.0):
        self.command = list(command)
        self.schema = schema
        self.timeout = timeout
        self.proc = subprocess.Popen(
            self.command,
            stdin=subprocess.PIPE,
            stdout=subprocess.PIPE,
            text=True,
            bufsize=1,
        )
        line = self.proc.stdout.readline().strip()
        expected = f"schema {schema_hash(schema)}"
        if line != expected:
            self.close()
            raise ClassifierError(f"handshake mismatch: expected {expected!r}, got {line!r}")

    def _row(self, table: Table, i: int) -> str:
        import csv
        import io

        cells = []
        for c in self.schema.columns:
            v = table[c.name][i]
            if v is MISSING or (isinstance(v, float) and math.isnan(v)):
                cells.append("")
            else:
                cells.append(repr(float(v)) if c.kind == "numeric" else str(v))
        buf = io.StringIO()
        csv.writer(buf, lineterminator="").writerow(cells)
        return buf.getvalue()

    def __call__(self, table: Table) -> np.ndarray:
        n = len(next(iter(table.values()))) if table else 0
        out = np.empty(n)
        for i in range(n):
            if self.proc.poll() is not None:
                raise ClassifierError(f"classifier process exited with status {self.proc.returncode}")
            self.proc.stdin.write(self._row(table, i) + "\n")
            self.proc.stdin.flush()
            reply = self.proc.stdout.readline()
            try:
                out[i] = float(reply)
            except ValueError:
                raise ClassifierError(f"bad classifier reply {reply!r}") from None
        return out

    def handle(self) -> ClassifierHandle:
        return ClassifierHandle(self, self.schema, "external")

    def close(self) -> None:
        if self.proc.poll() is None:
            try:
                self.proc.stdin.close()
            except BrokenPipeError:
                pass
            try:
                self.proc.wait(timeout=self.timeout)
            except subprocess.TimeoutExpired:
                self.proc.kill()
                self.proc.wait()
        for stream in (self.proc.stdin, self.proc.stdout, self.proc.stderr):
            if stream is not None and not stream.closed:
                try:
                    stream.close()
                except BrokenPipeError:
                    pass

    def __enter__(self):
        return self

    def __exit__(self, *exc):
        self.close()


# ---------------------------------------------------------------------------
# Perturbation


@dataclass(frozen=True)
class PerturbationConfig:
    n_samples: int = 1000
    kernel_width: float = 0.75
    seed: int = 0
    k: int = 3
    keep_prob: float = 0.5

    def __post_init__(self):
        if not self.n_samples >= self.k >= 1:
            raise ValueError("need n_samples >= k >= 1")
        if self.kernel_width <= 0:
            raise ValueError("kernel_width must be positive")


_MATCH = object()  # two-valued column: one feature, "same value as x"


@dataclass(frozen=True)
class _Feature:
    column: str
    value: object = None  # categorical value, _MATCH, or None for numeric


class PerturbationSpace:
    """Valid range of every column, used to draw perturbations.

    Numeric columns are sampled uniformly inside a uniformly chosen bin; the
    two unbounded end bins are clipped to the range seen in training data.
    """

    def __init__(self, schema: FeatureSchema, bounds: Mapping[str, tuple[float, float]] | None = None):
        for c in schema.columns:
            if c.kind == "numeric" and c.edges is None:
                raise SchemaError(f"numeric column {c.name!r} must be discretized first")
            if c.kind == "binary":
                raise SchemaError("perturbation works on original columns, not propositionalized ones")
        self.schema = schema
        self.bounds = dict(bounds or {})
        self.features: list[_Feature] = []
        for c in schema.columns:
            if c.kind == "numeric":
                self.features.append(_Feature(c.name))
            elif len(c.domain) == 2:
                self.features.append(_Feature(c.name, _MATCH))
            else:
                self.features.extend(_Feature(c.name, v) for v in c.domain)

    @classmethod
    def from_samples(cls, schema: FeatureSchema, samples: Sequence[Sample]) -> PerturbationSpace:
        bounds = {}
        for c in schema.columns:
            if c.kind != "numeric":
                continue
            vals = [s.values[c.name] for s in samples if s.values.get(c.name) is not MISSING]
            if vals:
                bounds[c.name] = (float(min(vals)), float(max(vals)))
        return cls(schema, bounds)

    def _bin_range(self, column, b: int) -> tuple[float, float]:
        edges = column.edges
        lo_b, hi_b = self.bounds.get(column.name, (edges[0] if edges else 0.0, edges[-1] if edges else 0.0))
        lo = edges[b - 1] if b > 0 else min(lo_b, edges[0] if edges else lo_b)
        hi = edges[b] if b < len(edges) else max(hi_b, edges[-1] if edges else hi_b)
        return lo, hi

    def constraint(self, feature: _Feature, x: Sample) -> str:
        column = self.schema.column(feature.column)
        xv = x.values.get(feature.column, MISSING)
        if column.kind == "numeric":
            if xv is MISSING:
                return f"{column.prefix}_missing"
            return f"{column.prefix}_bin{bin_index(column.edges, xv)}"
        if feature.value is _MATCH:
            if xv is MISSING:
                return f"{column.prefix}_missing"
            return f"{column.prefix}_{sanitize(xv)}"
        name = f"{column.prefix}_{sanitize(feature.value)}"
        return name if xv == feature.value else f"not {name}"

    def constraints(self, x: Sample) -> list[str]:
        return [self.constraint(f, x) for f in self.features]


def sample_around(
    x: Sample,
    space: PerturbationSpace,
    config: PerturbationConfig,
    rng: np.random.Generator | None = None,
) -> tuple[Table, np.ndarray]:
    """Draw ``n_samples`` perturbations of ``x``; row 0 is ``x`` itself.

    Each original column independently keeps ``x``'s value with probability
    ``keep_prob`` and is otherwise redrawn uniformly from its domain. Returns
    the perturbed table and the binary matrix marking which interpretable
    features still match ``x``.
    """
    rng = rng if rng is not None else np.random.default_rng(config.seed)
    n = config.n_samples
    table: Table = {}
    for c in space.schema.columns:
        xv = x.values.get(c.name, MISSING)
        keep = rng.random(n) < config.keep_prob
        keep[0] = True
        if c.kind == "numeric":
            n_bins = c.n_bins
            bins = rng.integers(0, n_bins, size=n)
            u = rng.random(n)
            ranges = np.array([space._bin_range(c, b) for b in range(n_bins)])
            lo, hi = ranges[bins, 0], ranges[bins, 1]
            drawn = lo + u * (hi - lo)
            if xv is MISSING:
                table[c.name] = np.full(n, np.nan)
            else:
                table[c.name] = np.where(keep, float(xv), drawn)
        else:
            idx = rng.integers(0, len(c.domain), size=n)
            domain = np.empty(len(c.domain), dtype=object)
            domain[:] = list(c.domain)
            drawn = domain[idx]
            if xv is MISSING:
                col = np.empty(n, dtype=object)
                col[:] = None
                table[c.name] = col
            else:
                col = drawn.copy()
                col[keep] = xv
                table[c.name] = col
    Z = interpretable(x, table, space)
    return table, Z


def interpretable(x: Sample, table: Table, space: PerturbationSpace) -> np.ndarray:
    n = len(next(iter(table.values()))) if table else 0
    Z = np.ones((n, len(space.features)), dtype=np.int8)
    for j, f in enumerate(space.features):
        column = space.schema.column(f.column)
        xv = x.values.get(f.column, MISSING)
        arr = table[f.column]
        if xv is MISSING:
            continue
        if column.kind == "numeric":
            xb = bin_index(column.edges, xv)
            Z[:, j] = np.searchsorted(column.edges, arr, side="right") == xb
        elif f.value is _MATCH:
            Z[:, j] = arr == xv
        else:
            Z[:, j] = (arr == f.value) == (xv == f.value)
    return Z


def kernel_weight(z: np.ndarray, z_prime: np.ndarray | None = None, width: float = 0.75) -> np.ndarray | float:
    """``exp(-d**2 / width**2)`` where ``d`` is the fraction of mismatched features.

    With one argument, ``z`` holds match indicators against the original
    (rows of ones mean identical); with two, the vectors are compared.
    """
    z = np.asarray(z)
    if z_prime is not None:
        z = (z == np.asarray(z_prime)).astype(float)
    n_features = z.shape[-1]
    if n_features == 0:
        d = np.zeros(z.shape[:-1])
    else:
        d = (n_features - z.sum(axis=-1)) / n_features
    w = np.exp(-(d**2) / width**2)
    return float(w) if np.ndim(w) == 0 else w


# ---------------------------------------------------------------------------
# Weighted regression


@dataclass(frozen=True)
class Explanation:
    entries: tuple[tuple[str, float], ...]
    intercept: float
    coefficients: tuple[float, ...] = field(default=(), compare=False)
    names: tuple[str, ...] = field(default=(), compare=False)

    def to_text(self, with_intercept: bool = True) -> str:
        lines = [f"{name}\t{weight:.12g}" for name, weight in self.entries]
        if with_intercept:
            lines.append(f"(intercept)\t{self.intercept:.12g}")
        return "\n".join(lines) + "\n"

    @classmethod
    def from_text(cls, text: str) -> Explanation:
        entries, intercept = [], 0.0
        for line in text.splitlines():
            if not line.strip():
                continue
            name, weight = line.rsplit("\t", 1)
            if name == "(intercept)":
                intercept = float(weight)
            else:
                entries.append((name, float(weight)))
        return cls(tuple(entries), intercept)


RIDGE = 1e-6


def lwr_fit(
    Z: np.ndarray,
    y: np.ndarray,
    weights: np.ndarray,
    k: int,
    names: Sequence[str] | None = None,
) -> Explanation:
    """Weighted least squares of ``y`` on the columns of ``Z`` plus an intercept.

    The intercept is left unpenalized by centering on weighted means. A ridge
    term of 1e-6 is added only when the weighted normal matrix is singular
    or badly conditioned. The ``k`` largest coefficients in absolute value
    are kept, ties resolved by column order.
    """
    Z = np.asarray(Z, dtype=float)
    y = np.asarray(y, dtype=float)
    w = np.asarray(weights, dtype=float)
    if Z.ndim != 2 or len(Z) != len(y) or len(y) != len(w):
        raise ValueError("Z, y and weights must have matching lengths")
    if np.any(w < 0) or not np.any(w > 0):
        raise ValueError("weights must be non-negative and not all zero")
    n_features = Z.shape[1]
    names = list(names) if names is not None else [f"f{j}" for j in range(n_features)]
    wsum = w.sum()
    z_mean = w @ Z / wsum
    y_mean = w @ y / wsum
    Zc = Z - z_mean
    yc = y - y_mean
    A = Zc.T @ (Zc * w[:, None])
    b = Zc.T @ (w * yc)
    if n_features:
        scale = max(np.abs(A).max(), 1.0)
        if np.linalg.matrix_rank(A, tol=1e-10 * scale) < n_features or np.linalg.cond(A) > 1e12:
            A = A + RIDGE * np.eye(n_features)
        coef = np.linalg.solve(A, b)
    else:
        coef = np.zeros(0)
    intercept = float(y_mean - z_mean @ coef)
    k = min(k, n_features)
    order = sorted(range(n_features), key=lambda j: (-abs(coef[j]), j))[:k]
    entries = tuple((names[j], float(coef[j])) for j in order)
    return Explanation(entries, intercept, tuple(float(c) for c in coef), tuple(names))


def explain_instance(
    f: ClassifierHandle,
    x: Sample,
    space: PerturbationSpace,
    config: PerturbationConfig | None = None,
    rng: np.random.Generator | None = None,
) -> Explanation:
    """Perturb ``x``, score with ``f``, weight by similarity and fit a local linear model."""
    config = config or PerturbationConfig()
    table, Z = sample_around(x, space, config, rng)
    y = f.predict_many(table)
    weights = kernel_weight(Z, width=config.kernel_width)
    return lwr_fit(Z, y, weights, config.k, space.constraints(x))
