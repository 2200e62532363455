"""FOIL: sequential covering with greedy information-gain specialization."""

from __future__ import annotations

import math
import warnings
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from typing import Iterable, Mapping, Sequence

from .exceptions import ConvergenceWarning, StratificationError
from .logic import (
    Atom,
    BackgroundTheory,
    Clause,
    Hypothesis,
    Model,
    build_model,
    check_stratified,
    covers,
    most_general_clause,
    refine_candidates,
)

__all__ = [
    "GainStats",
    "FoilConfig",
    "information_gain",
    "score_candidates",
    "best_literal",
    "foil_learn",
    "target_arity",
    "default_language",
    "prepare_model",
]


@dataclass(frozen=True)
class GainStats:
    p0: int
    n0: int
    p1: int
    n1: int
    t: int

    def __post_init__(self):
        if min(self.p0, self.n0, self.p1, self.n1, self.t) < 0:
            raise ValueError(f"negative count in {self}")
        if self.t > min(self.p0, self.p1):
            raise ValueError(f"t exceeds min(p0, p1) in {self}")


@dataclass(frozen=True)
class FoilConfig:
    max_length: int = 6
    max_clauses: int = 64
    n_jobs: int = 1


def information_gain(stats: GainStats) -> float:
    """``t * (log2(p1/(p1+n1)) - log2(p0/(p0+n0)))``, zero when p1 or t is zero."""
    if stats.p0 == 0:
        raise ValueError("information gain is undefined for a rule covering no positives")
    if stats.p1 == 0 or stats.t == 0:
        return 0.0
    before = math.log2(stats.p0 / (stats.p0 + stats.n0))
    after = math.log2(stats.p1 / (stats.p1 + stats.n1))
    return stats.t * (after - before)


def score_candidates(
    candidates: Sequence[Clause],
    pos: Sequence[Atom],
    neg: Sequence[Atom],
    model: Model,
    n_jobs: int = 1,
) -> list[float]:
    """Gain of each candidate, given the examples its parent clause covers."""
    p0, n0 = len(pos), len(neg)

    def score(cand: Clause) -> float:
        p1 = len(covers(cand, pos, model))
        n1 = len(covers(cand, neg, model)) if p1 else 0
        return information_gain(GainStats(p0, n0, p1, n1, p1))

    if n_jobs > 1 and len(candidates) > 1:
        with ThreadPoolExecutor(max_workers=n_jobs) as pool:
            return list(pool.map(score, candidates))
    return [score(c) for c in candidates]


def _argmax(gains: Sequence[float]) -> int:
    best = 0
    for i, g in enumerate(gains):
        if g > gains[best]:
            best = i
    return best


def best_literal(
    clause: Clause,
    pos: Iterable[Atom],
    neg: Iterable[Atom],
    theory: Model | BackgroundTheory,
    language: Mapping[str, int],
    mode: str = "positive",
    n_jobs: int = 1,
) -> tuple[Clause, float]:
    """Highest-gain one-literal refinement of ``clause``; ties go to the earlier candidate."""
    model = _as_model(theory, pos, neg)
    pos0 = covers(clause, pos, model)
    neg0 = covers(clause, neg, model)
    if not pos0:
        raise ValueError(f"clause {clause} covers no positive example")
    candidates = refine_candidates(clause, language, mode)
    if not candidates:
        return clause, 0.0
    gains = score_candidates(candidates, pos0, neg0, model, n_jobs)
    i = _argmax(gains)
    return candidates[i], gains[i]


def _as_model(theory, *example_sets) -> Model:
    if isinstance(theory, Model):
        return theory
    return prepare_model(theory, *example_sets)


def prepare_model(theory: BackgroundTheory, *example_sets: Iterable[Atom]) -> Model:
    """Deduce the background model, with example constants in the universe."""
    strat = check_stratified(theory)
    if not strat:
        raise StratificationError(f"background theory rejected; {strat.describe()}", strat.cycle)
    consts = {t for examples in example_sets for e in examples for t in e.args}
    return build_model(theory, consts)


def target_arity(target: str, *example_sets: Iterable[Atom]) -> int:
    arities = {e.arity for examples in example_sets for e in examples}
    for examples in example_sets:
        for e in examples:
            if e.predicate != target:
                raise ValueError(f"example {e} is not an instance of {target!r}")
    if len(arities) > 1:
        raise ValueError(f"examples of {target!r} have mixed arities {sorted(arities)}")
    return arities.pop() if arities else 1


def default_language(theory: BackgroundTheory, target: str) -> dict[str, int]:
    return {p: a for p, a in theory.predicates().items() if p != target}


def _check_disjoint(pos: Sequence[Atom], neg: Sequence[Atom]) -> None:
    overlap = set(pos) & set(neg)
    if overlap:
        raise ValueError(f"positive and negative examples overlap: {sorted(map(str, overlap))[:5]}")


def foil_learn(
    target: str,
    theory: BackgroundTheory,
    pos: Iterable[Atom],
    neg: Iterable[Atom],
    config: FoilConfig | None = None,
    language: Mapping[str, int] | None = None,
) -> Hypothesis:
    """Learn default clauses for ``target`` with FOIL, allowing negated literals.

    Each clause starts from the most general clause and is specialized until it
    covers no negatives, reaches ``max_length``, or no candidate has positive
    gain. Covered positives are then removed and the next clause is learned.
    """
    config = config or FoilConfig()
    pos, neg = list(dict.fromkeys(pos)), list(dict.fromkeys(neg))
    _check_disjoint(pos, neg)
    arity = target_arity(target, pos, neg)
    model = prepare_model(theory, pos, neg)
    if language is None:
        language = default_language(theory, target)

    clauses: list[Clause] = []
    remaining = pos
    while remaining:
        if len(clauses) >= config.max_clauses:
            warnings.warn(
                f"FOIL stopped at {config.max_clauses} clauses with "
                f"{len(remaining)} positives uncovered",
                ConvergenceWarning,
                stacklevel=2,
            )
            break
        clause = most_general_clause(target, arity)
        cur_pos, cur_neg = remaining, neg
        while cur_neg and clause.length < config.max_length:
            candidates = refine_candidates(clause, language, "negation")
            if not candidates:
                break
            gains = score_candidates(candidates, cur_pos, cur_neg, model, config.n_jobs)
            i = _argmax(gains)
            if gains[i] <= 0:
                warnings.warn(
                    f"no literal with positive gain for {clause}; emitting it "
                    f"while it covers {len(cur_neg)} negatives",
                    ConvergenceWarning,
                    stacklevel=2,
                )
                break
            clause = candidates[i]
            cur_pos = covers(clause, cur_pos, model)
            cur_neg = covers(clause, cur_neg, model)
        if cur_neg and clause.length >= config.max_length:
            warnings.warn(
                f"{clause} reached max_length while covering {len(cur_neg)} negatives",
                ConvergenceWarning,
                stacklevel=2,
            )
        covered = set(covers(clause, remaining, model))
        clauses.append(clause)
        remaining = [e for e in remaining if e not in covered]
    return Hypothesis(tuple(clauses))
