"""FOLD: learning default theories with invented abnormality predicates.

Defaults are specialized with positive literals only. When no positive
literal has gain but negatives are still covered, those negatives are
treated as exceptions: the example sets are swapped and FOLD recurses, and
the learned clauses become the body of a fresh ``ab<k>`` predicate that the
default negates. Residual examples that no literal separates are enumerated
as ground facts.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass, field
from typing import Iterable, Mapping, Sequence

from .exceptions import ConvergenceWarning
from .foil import (
    _argmax,
    _check_disjoint,
    default_language,
    prepare_model,
    score_candidates,
    target_arity,
)
from .logic import (
    Atom,
    BackgroundTheory,
    Clause,
    Hypothesis,
    Literal,
    Model,
    covers,
    extend_model,
    most_general_clause,
    refine_candidates,
)

__all__ = [
    "AbCounter",
    "FoldConfig",
    "FoldSearch",
    "fold_learn",
    "description_length",
    "mdl_guard",
]


@dataclass
class AbCounter:
    """Mints ``ab0``, ``ab1``, ... skipping names already in use."""

    next_index: int = 0
    reserved: frozenset[str] = frozenset()
    prefix: str = "ab"

    def __post_init__(self):
        if self.next_index < 0:
            raise ValueError("next_index must be non-negative")

    def next(self) -> str:
        while True:
            name = f"{self.prefix}{self.next_index}"
            self.next_index += 1
            if name not in self.reserved:
                return name


@dataclass(frozen=True)
class FoldConfig:
    max_rule_length: int = 6
    mdl_enabled: bool = False
    exception_depth_cap: int = 3
    n_jobs: int = 1

    def __post_init__(self):
        if self.max_rule_length < 1 or self.exception_depth_cap < 1:
            raise ValueError("max_rule_length and exception_depth_cap must be >= 1")


def description_length(clauses: Iterable[Clause]) -> int:
    """Literal count plus clause count."""
    return sum(1 + len(c) for c in clauses)


def mdl_guard(extension: Iterable[Clause], residual: int, enabled: bool = True) -> bool:
    """True to keep the extension, False to stop and enumerate the residual.

    Enumerating costs one unit per residual example.
    """
    if not enabled:
        return True
    return description_length(extension) <= residual


class FoldSearch:
    """Mutable state of one FOLD run: the model, the abnormality set and the counter.

    The methods mirror the algorithm's functions and may be called directly;
    ``abnormalities`` accumulates across calls.
    """

    def __init__(
        self,
        target: str,
        model: Model,
        language: Mapping[str, int],
        config: FoldConfig | None = None,
        counter: AbCounter | None = None,
        arity: int = 1,
    ):
        self.target = target
        self.arity = arity
        self.model = model
        self.language = dict(language)
        self.config = config or FoldConfig()
        self.counter = counter or AbCounter(reserved=frozenset(self.language) | {target})
        self.abnormalities: list[Clause] = []

    # -- hooks overridden by LIME-FOLD ------------------------------------

    def candidates(self, clause: Clause, pos: Sequence[Atom], depth: int) -> list[Clause]:
        return refine_candidates(clause, self.language, "positive")

    def cover_pos(self, clause: Clause, pos: Sequence[Atom], depth: int) -> list[Atom]:
        """Positives that count as covered while scoring ``clause``."""
        return covers(clause, pos, self.model)

    def exhausted(self, pos: Sequence[Atom], depth: int) -> bool:
        """True when no clause can be searched for ``pos``; they get enumerated."""
        return False

    def best(
        self, clause: Clause, pos: Sequence[Atom], neg: Sequence[Atom], depth: int
    ) -> tuple[Clause, float]:
        """Best positive-literal refinement; ``pos`` and ``neg`` are already covered by ``clause``."""
        if not pos:
            return clause, 0.0
        cands = self.candidates(clause, pos, depth)
        if not cands:
            return clause, 0.0
        gains = self._score(cands, pos, neg, depth)
        i = _argmax(gains)
        return cands[i], gains[i]

    def _score(self, cands, pos, neg, depth) -> list[float]:
        return score_candidates(cands, pos, neg, self.model, self.config.n_jobs)

    # -- the algorithm -----------------------------------------------------

    def fold(self, pos: Sequence[Atom], neg: Sequence[Atom], depth: int = 0) -> list[Clause]:
        """Sequential covering of ``pos``; returns default clauses for the target."""
        clauses: list[Clause] = []
        remaining = list(pos)
        while remaining:
            if self.exhausted(remaining, depth):
                clauses.extend(self._facts(remaining))
                break
            mark = len(self.abnormalities)
            learned = self.specialize(most_general_clause(self.target, self.arity), remaining, neg, depth)
            covered: set[Atom] = set()
            for c in learned:
                covered.update(covers(c, remaining, self.model))
            if not covered:
                self._rollback(mark)
                clauses.extend(self._facts(remaining))
                break
            extension = learned + self.abnormalities[mark:]
            if not mdl_guard(extension, len(remaining), self.config.mdl_enabled):
                self._rollback(mark)
                clauses.extend(self._facts(remaining))
                break
            clauses.extend(learned)
            remaining = [e for e in remaining if e not in covered]
        return clauses

    def specialize(
        self, clause: Clause, pos: Sequence[Atom], neg: Sequence[Atom], depth: int = 0
    ) -> list[Clause]:
        """Refine ``clause`` until it covers no negatives.

        Returns a single clause, or the covered positives as ground facts when
        enumerating them is the cheaper way out.
        """
        pos = self.cover_pos(clause, pos, depth)
        neg = covers(clause, neg, self.model)
        while neg and clause.length < self.config.max_rule_length:
            cand, gain = self.best(clause, pos, neg, depth)
            if gain <= 0:
                break
            clause = cand
            pos = self.cover_pos(clause, pos, depth)
            neg = covers(clause, neg, self.model)
        if not neg:
            return [clause]
        resolved = self.exception(clause, neg, pos, depth)
        if resolved is not None:
            left = covers(resolved, neg, self.model)
            if not left:
                return [resolved]
            return self.enumerate_noise(resolved, left, "negative", pos)
        return self.enumerate_noise(clause, neg, "auto", pos)

    def exception(
        self, c_def: Clause, pos: Sequence[Atom], neg: Sequence[Atom], depth: int = 0
    ) -> Clause | None:
        """Learn why ``pos`` (negatives still covered by ``c_def``) are exceptions.

        ``pos`` and ``neg`` arrive already swapped. Returns ``c_def`` extended
        with ``not ab<k>(...)``, or ``None`` when no literal has positive gain
        on the swapped problem or the depth cap is reached.
        """
        if depth + 1 > self.config.exception_depth_cap:
            return None
        pos = list(pos)
        _, gain = self.best(c_def, self.cover_pos(c_def, pos, depth + 1), covers(c_def, neg, self.model), depth + 1)
        if gain <= 0:
            return None
        learned = self.fold(pos, neg, depth + 1)
        ab = self.counter.next()
        ab_clauses = [Clause(Atom(ab, c.head.args), c.body) for c in learned]
        self._add_abnormalities(ab_clauses)
        return c_def.add_literal(Literal(Atom(ab, c_def.head.args), True))

    def enumerate_noise(
        self,
        clause: Clause,
        residual: Sequence[Atom],
        mode: str = "auto",
        pos: Sequence[Atom] = (),
    ) -> list[Clause]:
        """Emit residual examples as ground facts.

        ``"positive"`` returns one target fact per residual positive.
        ``"negative"`` mints an abnormality predicate holding exactly for the
        residual negatives and returns ``clause`` guarded by it. ``"auto"``
        treats ``residual`` as negatives and picks whichever of the two
        (negatives vs. the covered ``pos``) is smaller.
        """
        if mode == "auto":
            mode = "negative" if len(residual) <= len(pos) else "positive"
            if mode == "positive":
                residual = pos
        if mode == "positive":
            return self._facts(residual)
        if mode != "negative":
            raise ValueError(f"unknown enumeration mode {mode!r}")
        if not residual:
            return [clause]
        ab = self.counter.next()
        self._add_abnormalities([Clause(Atom(ab, e.args)) for e in residual])
        return [clause.add_literal(Literal(Atom(ab, clause.head.args), True))]

    # -- helpers ------------------------------------------------------------

    def _facts(self, examples: Iterable[Atom]) -> list[Clause]:
        return [Clause(Atom(self.target, e.args)) for e in examples]

    def _add_abnormalities(self, clauses: list[Clause]) -> None:
        self.abnormalities.extend(clauses)
        extend_model(self.model, clauses)

    def _rollback(self, mark: int) -> None:
        dropped = {c.head.predicate for c in self.abnormalities[mark:]}
        del self.abnormalities[mark:]
        for p in dropped:
            self.model.discard_predicate(p)

    def hypothesis(self, defaults: Iterable[Clause]) -> Hypothesis:
        return Hypothesis(tuple(defaults), tuple(self.abnormalities))


def fold_learn(
    target: str,
    theory: BackgroundTheory,
    pos: Iterable[Atom],
    neg: Iterable[Atom],
    config: FoldConfig | None = None,
    language: Mapping[str, int] | None = None,
) -> Hypothesis:
    """Learn a default theory for ``target`` from background knowledge and examples."""
    config = config or FoldConfig()
    pos, neg = list(dict.fromkeys(pos)), list(dict.fromkeys(neg))
    _check_disjoint(pos, neg)
    arity = target_arity(target, pos, neg)
    model = prepare_model(theory, pos, neg)
    if language is None:
        language = default_language(theory, target)
    search = FoldSearch(target, model, language, config, arity=arity)
    defaults = search.fold(pos, neg)
    return search.hypothesis(defaults)
