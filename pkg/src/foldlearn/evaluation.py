"""Scoring learned hypotheses on held-out examples."""

from __future__ import annotations

import statistics
import warnings
from dataclasses import asdict, dataclass, field
from typing import Callable, Iterable, Sequence

import numpy as np

from .logic import Atom, BackgroundTheory, Hypothesis, build_model

__all__ = ["Metrics", "evaluate_hypothesis", "metrics_from_counts", "stratified_folds", "cross_validate", "CVResult"]


@dataclass(frozen=True)
class Metrics:
    tp: int
    fp: int
    tn: int
    fn: int
    precision: float
    recall: float
    accuracy: float
    f1: float
    n_clauses: int = 0
    n_literals: int = 0
    undefined: tuple[str, ...] = ()

    def to_text(self) -> str:
        lines = [
            "confusion matrix",
            f"  tp={self.tp} fp={self.fp}",
            f"  fn={self.fn} tn={self.tn}",
            f"precision  {self.precision:.4f}",
            f"recall     {self.recall:.4f}",
            f"accuracy   {self.accuracy:.4f}",
            f"f1         {self.f1:.4f}",
            f"clauses    {self.n_clauses}",
            f"literals   {self.n_literals}",
        ]
        if self.undefined:
            lines.append(f"note: 0/0 taken as 0 for {', '.join(self.undefined)}")
        lines.append("")
        lines.append(self.to_kv())
        return "\n".join(lines)

    def to_kv(self) -> str:
        out = []
        for key, value in asdict(self).items():
            if isinstance(value, float):
                value = f"{value:.12g}"
            elif isinstance(value, tuple):
                value = ",".join(value)
            out.append(f"{key}={value}")
        return "\n".join(out) + "\n"


def _ratio(num: int, den: int, name: str, undefined: list[str]) -> float:
    if den == 0:
        undefined.append(name)
        return 0.0
    return num / den


def metrics_from_counts(tp: int, fp: int, tn: int, fn: int, n_clauses: int = 0, n_literals: int = 0) -> Metrics:
    undefined: list[str] = []
    precision = _ratio(tp, tp + fp, "precision", undefined)
    recall = _ratio(tp, tp + fn, "recall", undefined)
    accuracy = _ratio(tp + tn, tp + fp + tn + fn, "accuracy", undefined)
    f1 = _ratio(2 * tp, 2 * tp + fp + fn, "f1", undefined)
    return Metrics(tp, fp, tn, fn, precision, recall, accuracy, f1, n_clauses, n_literals, tuple(undefined))


def evaluate_hypothesis(
    h: Hypothesis,
    theory: BackgroundTheory,
    pos: Iterable[Atom],
    neg: Iterable[Atom],
) -> Metrics:
    """Confusion-matrix metrics; an example is predicted positive iff entailed."""
    pos, neg = list(pos), list(neg)
    if set(pos) & set(neg):
        raise ValueError("test positives and negatives overlap")
    consts = {t for e in pos + neg for t in e.args}
    model = build_model(theory.with_clauses(h.clauses), consts)
    tp = sum(model.holds(e) for e in pos)
    fp = sum(model.holds(e) for e in neg)
    return metrics_from_counts(tp, fp, len(neg) - fp, len(pos) - tp, h.n_clauses, h.n_literals)


def stratified_folds(labels: Sequence[bool], folds: int, seed: int) -> list[np.ndarray]:
    """Test-index arrays of a seeded stratified split; they partition ``range(len(labels))``.

    When ``folds`` exceeds the size of every class (leave-one-out being the
    usual case) stratification is impossible and a plain shuffled split is used.
    """
    from sklearn.model_selection import KFold, StratifiedKFold

    if folds < 2:
        raise ValueError("need at least 2 folds")
    y = np.asarray(labels, dtype=int)
    if folds > len(y):
        raise ValueError(f"{folds} folds for {len(y)} examples")
    if folds > np.bincount(y).max():
        splitter = KFold(n_splits=folds, shuffle=True, random_state=seed)
    else:
        splitter = StratifiedKFold(n_splits=folds, shuffle=True, random_state=seed)
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", UserWarning)
        return [test for _, test in splitter.split(np.zeros(len(y)), y)]


@dataclass(frozen=True)
class CVResult:
    folds: tuple[Metrics, ...]
    mean: dict = field(default_factory=dict)
    stddev: dict = field(default_factory=dict)

    def to_text(self) -> str:
        lines = []
        for i, m in enumerate(self.folds):
            lines.append(
                f"fold {i}: accuracy={m.accuracy:.4f} precision={m.precision:.4f} "
                f"recall={m.recall:.4f} f1={m.f1:.4f} clauses={m.n_clauses}"
            )
        for key in self.mean:
            lines.append(f"mean_{key}={self.mean[key]:.12g}")
            lines.append(f"stddev_{key}={self.stddev[key]:.12g}")
        return "\n".join(lines) + "\n"


Learner = Callable[[BackgroundTheory, list, list], Hypothesis]


def cross_validate(
    learner: Learner,
    theory: BackgroundTheory,
    pos: Sequence[Atom],
    neg: Sequence[Atom],
    folds: int = 5,
    seed: int = 0,
    retries: int = 3,
) -> CVResult:
    """Seeded stratified k-fold evaluation of ``learner(theory, pos, neg)``.

    If some training fold misses a class the split is retried with the next
    seed; after ``retries`` failures a ``ValueError`` is raised.
    """
    examples = list(pos) + list(neg)
    labels = [True] * len(pos) + [False] * len(neg)
    for attempt in range(retries):
        split = stratified_folds(labels, folds, seed + attempt)
        ok = all(
            len({labels[i] for i in range(len(labels)) if i not in set(test)}) == 2 for test in split
        )
        if ok:
            break
        warnings.warn(f"split with seed {seed + attempt} left a training fold single-class; retrying")
    else:
        raise ValueError("could not build folds with both classes in every training set")

    results = []
    for test in split:
        test_set = set(test.tolist())
        train_pos = [e for i, e in enumerate(examples) if i not in test_set and labels[i]]
        train_neg = [e for i, e in enumerate(examples) if i not in test_set and not labels[i]]
        test_pos = [examples[i] for i in sorted(test_set) if labels[i]]
        test_neg = [examples[i] for i in sorted(test_set) if not labels[i]]
        h = learner(theory, train_pos, train_neg)
        results.append(evaluate_hypothesis(h, theory, test_pos, test_neg))
    keys = ("precision", "recall", "accuracy", "f1", "n_clauses", "n_literals")
    mean = {k: statistics.fmean(getattr(m, k) for m in results) for k in keys}
    stddev = {k: (statistics.pstdev(getattr(m, k) for m in results)) for k in keys}
    return CVResult(tuple(results), mean, stddev)
