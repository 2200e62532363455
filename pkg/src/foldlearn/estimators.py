"""scikit-learn style wrappers around the rule learners.

The estimators take a 2-D table (a DataFrame or any array-like) whose
columns are numeric or categorical. Numeric columns are binned, categorical
ones expanded into one predicate per value, and each row becomes a
constant with unary facts describing it. Rule learning then runs on that
relational encoding, and ``rules_`` holds the learned program.
"""

from __future__ import annotations

import numbers

import numpy as np
from sklearn.base import BaseEstimator, ClassifierMixin, TransformerMixin, clone
from sklearn.utils.multiclass import type_of_target
from sklearn.utils.validation import check_is_fitted, column_or_1d

from .dataset import (
    MISSING,
    Column,
    FeatureSchema,
    Sample,
    discretize_schema,
    make_examples,
    make_predicates,
    propositionalize,
)
from .explainer import (
    ClassifierHandle,
    PerturbationConfig,
    PerturbationSpace,
    TreeEnsembleConfig,
    train_builtin_classifier,
)
from .foil import FoilConfig, foil_learn
from .fold import FoldConfig, fold_learn
from .limefold import RelevantFeatureMap, lime_fold_learn, transform_dataset
from .logic import Atom, Hypothesis, build_model, render_asp

__all__ = ["PredicateEncoder", "FoilClassifier", "FoldClassifier", "LimeFoldClassifier"]


def _is_missing(v) -> bool:
    return v is None or (isinstance(v, float) and np.isnan(v))


def _is_number(v) -> bool:
    if isinstance(v, (bool, np.bool_)):
        return False
    if isinstance(v, numbers.Real):
        return True
    try:
        float(v)
    except (TypeError, ValueError):
        return False
    return True


def _columns(X) -> tuple[list[str], np.ndarray]:
    """Column names and a 2-D object array of cell values."""
    if hasattr(X, "columns") and hasattr(X, "to_numpy"):
        names = [str(c) for c in X.columns]
        values = X.to_numpy(dtype=object)
    else:
        values = np.asarray(X, dtype=object)
        if values.ndim == 1:
            raise ValueError("expected a 2-D table; reshape a single feature with X.reshape(-1, 1)")
        names = [f"x{j}" for j in range(values.shape[1] if values.ndim == 2 else 0)]
    if values.ndim != 2:
        raise ValueError(f"expected a 2-D table, got {values.ndim} dimensions")
    if values.shape[0] == 0:
        raise ValueError("empty table")
    return names, values


class PredicateEncoder(TransformerMixin, BaseEstimator):
    """Bin numeric columns and expand categorical ones into predicate indicators.

    ``transform`` returns a 0/1 matrix with one column per predicate in
    ``get_feature_names_out()``; missing cells satisfy no predicate.

    Parameters
    ----------
    bins : int
        Bins per numeric column.
    supervised : bool
        Use entropy-based splits (needs ``y``) instead of equal frequency.
    categorical : sequence of column names or indices, optional
        Columns to treat as categorical even if all values are numbers.
    """

    def __init__(self, bins=4, supervised=False, categorical=None):
        self.bins = bins
        self.supervised = supervised
        self.categorical = categorical

    def fit(self, X, y=None):
        names, values = _columns(X)
        if self.bins < 1:
            raise ValueError("bins must be >= 1")
        if self.supervised and y is None:
            raise ValueError("supervised binning needs y")
        forced = set()
        for c in self.categorical or ():
            forced.add(names[c] if isinstance(c, numbers.Integral) else str(c))
        unknown = forced - set(names)
        if unknown:
            raise ValueError(f"unknown categorical columns: {sorted(unknown)}")

        columns = []
        for j, name in enumerate(names):
            cells = [v for v in values[:, j] if not _is_missing(v)]
            if name not in forced and all(_is_number(v) for v in cells):
                columns.append(Column(name, "numeric"))
            else:
                domain = tuple(sorted({str(v) for v in cells}))
                columns.append(Column(name, "categorical", domain or ("",)))
        schema = FeatureSchema(tuple(columns), "__label__")
        self.feature_names_in_ = np.array(names, dtype=object)
        self.n_features_in_ = len(names)
        self.schema_ = schema
        labels = None if y is None else self._binary(y, len(values))
        samples = self._samples(values, labels, "s")
        self.schema_ = discretize_schema(schema, samples, self.bins, self.supervised)
        self.predicate_schema_ = propositionalize(self.schema_)
        return self

    @staticmethod
    def _binary(y, n: int) -> np.ndarray:
        y = column_or_1d(y)
        if len(y) != n:
            raise ValueError(f"X has {n} rows but y has {len(y)}")
        classes = np.unique(y)
        return y == classes[-1]

    def _samples(self, values: np.ndarray, labels, prefix: str) -> list[Sample]:
        out = []
        for i, row in enumerate(values):
            cells = {}
            for c, v in zip(self.schema_.columns, row):
                if _is_missing(v):
                    cells[c.name] = MISSING
                elif c.kind == "numeric":
                    cells[c.name] = float(v)
                else:
                    v = str(v)
                    if v not in c.domain:
                        raise ValueError(f"unseen value {v!r} in column {c.name!r}")
                    cells[c.name] = v
            out.append(Sample(f"{prefix}{i}", cells, bool(labels[i]) if labels is not None else False))
        return out

    def to_samples(self, X, labels=None, prefix: str = "s") -> list[Sample]:
        """Rows of ``X`` as samples with ids ``<prefix>0``, ``<prefix>1``, ..."""
        check_is_fitted(self, "schema_")
        names, values = _columns(X)
        if len(names) != self.n_features_in_:
            raise ValueError(f"X has {len(names)} features, expected {self.n_features_in_}")
        if hasattr(X, "columns") and list(names) != list(self.feature_names_in_):
            raise ValueError("column names differ from those seen in fit")
        return self._samples(values, labels, prefix)

    def get_feature_names_out(self, input_features=None):
        check_is_fitted(self, "predicate_schema_")
        return np.array(self.predicate_schema_.predicate_names(), dtype=object)

    def transform(self, X):
        samples = self.to_samples(X)
        names = list(self.get_feature_names_out())
        index = {p: j for j, p in enumerate(names)}
        out = np.zeros((len(samples), len(names)), dtype=np.int8)
        theory = make_predicates(self.predicate_schema_, samples)
        row = {s.id: i for i, s in enumerate(samples)}
        for atom in theory.facts:
            out[row[atom.args[0]], index[atom.predicate]] = 1
        return out


class _RuleClassifier(ClassifierMixin, BaseEstimator):
    """Shared fit/predict plumbing; subclasses implement ``_learn``."""

    def fit(self, X, y):
        y = column_or_1d(y, warn=True)
        if type_of_target(y) not in ("binary", "unknown") or len(np.unique(y)) != 2:
            raise ValueError("rule learners need exactly two classes in y")
        self.classes_ = np.unique(y)
        self.encoder_ = PredicateEncoder(self.bins, self.supervised_bins, self.categorical).fit(X, y)
        self.feature_names_in_ = self.encoder_.feature_names_in_
        self.n_features_in_ = self.encoder_.n_features_in_
        labels = y == self.classes_[1]
        samples = self.encoder_.to_samples(X, labels)
        theory = make_predicates(self.encoder_.predicate_schema_, samples)
        pos, neg = make_examples(samples, self.target)
        self.hypothesis_ = self._learn(X, y, samples, theory, pos, neg)
        return self

    @property
    def rules_(self) -> str:
        check_is_fitted(self, "hypothesis_")
        return render_asp(self.hypothesis_)

    def predict(self, X):
        check_is_fitted(self, "hypothesis_")
        # fresh ids so ground facts enumerated for training rows cannot fire
        samples = self.encoder_.to_samples(X, prefix="q")
        theory = make_predicates(self.encoder_.predicate_schema_, samples)
        model = build_model(theory.with_clauses(self.hypothesis_.clauses), [s.id for s in samples])
        hits = np.array([model.holds(Atom(self.target, (s.id,))) for s in samples])
        return np.where(hits, self.classes_[1], self.classes_[0])

    def _learn(self, X, y, samples, theory, pos, neg) -> Hypothesis:
        raise NotImplementedError


class FoilClassifier(_RuleClassifier):
    """FOIL with negated literals over the predicate encoding of ``X``."""

    def __init__(
        self,
        max_length=6,
        max_clauses=64,
        bins=4,
        supervised_bins=False,
        categorical=None,
        target="target",
        n_jobs=1,
    ):
        self.max_length = max_length
        self.max_clauses = max_clauses
        self.bins = bins
        self.supervised_bins = supervised_bins
        self.categorical = categorical
        self.target = target
        self.n_jobs = n_jobs

    def _learn(self, X, y, samples, theory, pos, neg):
        config = FoilConfig(self.max_length, self.max_clauses, self.n_jobs)
        return foil_learn(self.target, theory, pos, neg, config)


class FoldClassifier(_RuleClassifier):
    """FOLD: default clauses with learned exceptions."""

    def __init__(
        self,
        max_rule_length=6,
        mdl=False,
        exception_depth_cap=3,
        bins=4,
        supervised_bins=False,
        categorical=None,
        target="target",
        n_jobs=1,
    ):
        self.max_rule_length = max_rule_length
        self.mdl = mdl
        self.exception_depth_cap = exception_depth_cap
        self.bins = bins
        self.supervised_bins = supervised_bins
        self.categorical = categorical
        self.target = target
        self.n_jobs = n_jobs

    def _fold_config(self) -> FoldConfig:
        return FoldConfig(self.max_rule_length, self.mdl, self.exception_depth_cap, self.n_jobs)

    def _learn(self, X, y, samples, theory, pos, neg):
        return fold_learn(self.target, theory, pos, neg, self._fold_config())


class LimeFoldClassifier(FoldClassifier):
    """FOLD guided by local explanations of a black-box classifier.

    ``black_box`` is any classifier with ``predict_proba``; it is cloned and
    fitted on the raw ``X``. Left as ``None``, a bagged tree ensemble is
    trained on the encoded columns. The fitted relevant-feature map is kept
    in ``relevant_``.
    """

    def __init__(
        self,
        black_box=None,
        n_samples=1000,
        k=3,
        kernel_width=0.75,
        n_estimators=25,
        max_depth=4,
        random_state=0,
        max_rule_length=6,
        mdl=False,
        exception_depth_cap=3,
        bins=4,
        supervised_bins=False,
        categorical=None,
        target="target",
        n_jobs=1,
    ):
        super().__init__(
            max_rule_length, mdl, exception_depth_cap, bins, supervised_bins, categorical, target, n_jobs
        )
        self.black_box = black_box
        self.n_samples = n_samples
        self.k = k
        self.kernel_width = kernel_width
        self.n_estimators = n_estimators
        self.max_depth = max_depth
        self.random_state = random_state

    def _handle(self, X, y, samples) -> ClassifierHandle:
        schema = self.encoder_.schema_
        seed = int(self.random_state or 0)
        if self.black_box is None:
            return train_builtin_classifier(samples, schema, TreeEnsembleConfig(self.n_estimators, self.max_depth, seed))
        model = clone(self.black_box).fit(X, y)
        col = list(model.classes_).index(self.classes_[1])
        frame_like = hasattr(X, "columns")
        names = [c.name for c in schema.columns]

        def predict_table(table):
            rows = np.column_stack([np.asarray(table[n], dtype=object) for n in names])
            for j, c in enumerate(schema.columns):
                if c.kind == "numeric":
                    rows[:, j] = rows[:, j].astype(float)
            data = rows
            if frame_like:
                data = X.__class__(rows, columns=X.columns).astype(X.dtypes.to_dict())
            return model.predict_proba(data)[:, col]

        return ClassifierHandle(predict_table, schema, "external")

    def _learn(self, X, y, samples, theory, pos, neg):
        f = self._handle(X, y, samples)
        self.black_box_ = f
        space = PerturbationSpace.from_samples(self.encoder_.schema_, samples)
        config = PerturbationConfig(self.n_samples, self.kernel_width, int(self.random_state or 0), self.k)
        self.relevant_ = transform_dataset(f, samples, space, config, self.n_jobs)
        return lime_fold_learn(self.target, theory, pos, neg, RelevantFeatureMap(self.relevant_), self._fold_config())
