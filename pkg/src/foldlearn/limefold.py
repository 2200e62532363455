"""LIME-FOLD: FOLD guided by per-sample explanations of a black-box model.

Every training sample is explained locally; the feature constraints that
push the model toward the sample's predicted class become its relevant set.
The FOLD search then only proposes literals drawn from the relevant sets of
the positives a clause currently covers, and a positive only counts toward
a literal's gain when that literal is among its own relevant features.
Samples that the same features explain therefore end up under one clause.
"""

from __future__ import annotations

import hashlib
import warnings
from concurrent.futures import ThreadPoolExecutor
from pathlib import Path
from typing import Iterable, Mapping, Sequence

import numpy as np

from .dataset import Sample
from .exceptions import ConvergenceWarning, ParseError
from .explainer import (
    ClassifierHandle,
    PerturbationConfig,
    PerturbationSpace,
    explain_instance,
)
from .foil import GainStats, _check_disjoint, information_gain, default_language, prepare_model, target_arity
from .fold import FoldConfig, FoldSearch, fold_learn
from .logic import Atom, BackgroundTheory, Clause, Hypothesis, Model, covers, refine_candidates

__all__ = [
    "RelevantFeatureMap",
    "LimeFoldSearch",
    "sample_rng",
    "transform_dataset",
    "lime_fold_learn",
]

SUPPORTS, OPPOSES = "+", "-"


class RelevantFeatureMap(dict):
    """Sample id -> tuple of ``(constraint, sign)`` pairs.

    ``sign`` is ``"+"`` when the constraint pushes the model toward the
    sample's predicted class and ``"-"`` when it pushes away from it.
    """

    def supporting(self, sample_id: str) -> set[str]:
        return {c for c, s in self.get(sample_id, ()) if s == SUPPORTS}

    def all_constraints(self, sample_id: str) -> set[str]:
        return {c for c, _ in self.get(sample_id, ())}

    def is_empty(self) -> bool:
        return not any(self.values())

    def to_text(self) -> str:
        lines = []
        for sid, entries in self.items():
            lines.append(sid + "\t" + ",".join(f"{c}:{s}" for c, s in entries))
        return "\n".join(lines) + ("\n" if lines else "")

    @classmethod
    def from_text(cls, text: str) -> RelevantFeatureMap:
        rmap = cls()
        for lineno, line in enumerate(text.splitlines(), start=1):
            if not line.strip():
                continue
            sid, _, rest = line.partition("\t")
            entries = []
            for item in filter(None, (p.strip() for p in rest.split(","))):
                name, sep, sign = item.rpartition(":")
                if not sep:
                    name, sign = item, SUPPORTS
                if sign not in (SUPPORTS, OPPOSES):
                    raise ParseError(f"bad sign {sign!r} in {item!r}", lineno, len(sid) + 2)
                entries.append((name, sign))
            rmap[sid.strip()] = tuple(entries)
        return rmap

    def save(self, path: str | Path) -> None:
        Path(path).write_text(self.to_text(), encoding="utf-8")

    @classmethod
    def load(cls, path: str | Path) -> RelevantFeatureMap:
        return cls.from_text(Path(path).read_text(encoding="utf-8"))


def _relevant(expl, predicted_positive: bool, tol: float) -> tuple[tuple[str, str], ...]:
    out = []
    for name, weight in expl.entries:
        if abs(weight) <= tol:
            continue
        toward_positive = weight > 0
        out.append((name, SUPPORTS if toward_positive == predicted_positive else OPPOSES))
    return tuple(out)


def sample_rng(seed: int, x: Sample, space: PerturbationSpace) -> np.random.Generator:
    """Generator keyed by ``seed`` and the content of ``x`` (not its id)."""
    text = "\x1f".join(repr(x.values.get(c.name)) for c in space.schema.columns)
    digest = hashlib.sha256(text.encode("utf-8")).digest()
    key = [int.from_bytes(digest[i : i + 4], "little") for i in range(0, 16, 4)]
    return np.random.default_rng(np.random.SeedSequence([seed, *key]))


def transform_dataset(
    f: ClassifierHandle,
    samples: Sequence[Sample],
    space: PerturbationSpace,
    config: PerturbationConfig | None = None,
    n_jobs: int = 1,
    tol: float = 1e-9,
) -> RelevantFeatureMap:
    """Explain every sample and keep its top-K constraints with their signs.

    Each explanation draws from its own generator, derived from
    ``config.seed`` and the sample's feature values. Results therefore do not
    depend on ``n_jobs`` or sample order, and identical rows get identical sets.
    """
    config = config or PerturbationConfig()

    def one(x: Sample):
        expl = explain_instance(f, x, space, config, sample_rng(config.seed, x, space))
        predicted = f.predict(x) >= 0.5
        return x.id, _relevant(expl, predicted, tol)

    if n_jobs > 1:
        with ThreadPoolExecutor(max_workers=n_jobs) as pool:
            results = list(pool.map(one, samples))
    else:
        results = [one(x) for x in samples]
    return RelevantFeatureMap(results)


class LimeFoldSearch(FoldSearch):
    """FOLD search restricted to each example's relevant feature constraints.

    At the top level only supporting constraints are usable; while learning
    exceptions the opposing ones are usable as well.
    """

    def __init__(self, *args, rmap: RelevantFeatureMap, **kwargs):
        super().__init__(*args, **kwargs)
        self.rmap = rmap

    def relevant(self, example: Atom, depth: int) -> set[str]:
        sid = example.args[0]
        found = self.rmap.supporting(sid) if depth == 0 else self.rmap.all_constraints(sid)
        return {c for c in found if c in self.language}

    def _pool(self, pos: Sequence[Atom], depth: int) -> dict[str, int]:
        pool: set[str] = set()
        for e in pos:
            pool |= self.relevant(e, depth)
        return {p: self.language[p] for p in sorted(pool)}

    def candidates(self, clause: Clause, pos: Sequence[Atom], depth: int) -> list[Clause]:
        return refine_candidates(clause, self._pool(pos, depth), "positive")

    def cover_pos(self, clause: Clause, pos: Sequence[Atom], depth: int) -> list[Atom]:
        used = [lit.atom.predicate for lit in clause.body if not lit.negated and lit.atom.predicate in self.language]
        satisfied = covers(clause, pos, self.model)
        if not used:
            return satisfied
        return [e for e in satisfied if self.relevant(e, depth).issuperset(used)]

    def _score(self, cands, pos, neg, depth) -> list[float]:
        p0, n0 = len(pos), len(neg)
        gains = []
        for cand in cands:
            p1 = len(self.cover_pos(cand, pos, depth))
            n1 = len(covers(cand, neg, self.model)) if p1 else 0
            gains.append(information_gain(GainStats(p0, n0, p1, n1, p1)))
        return gains

    def exhausted(self, pos: Sequence[Atom], depth: int) -> bool:
        return not self._pool(pos, depth)


def lime_fold_learn(
    target: str,
    theory: BackgroundTheory,
    pos: Iterable[Atom],
    neg: Iterable[Atom],
    rmap: RelevantFeatureMap,
    config: FoldConfig | None = None,
    language: Mapping[str, int] | None = None,
) -> Hypothesis:
    """FOLD with candidate literals and positive coverage limited by ``rmap``.

    Falls back to plain FOLD (with a warning) when every relevant set is empty.
    """
    config = config or FoldConfig()
    pos, neg = list(dict.fromkeys(pos)), list(dict.fromkeys(neg))
    if rmap.is_empty():
        warnings.warn("all relevant feature sets are empty; running plain FOLD", ConvergenceWarning, stacklevel=2)
        return fold_learn(target, theory, pos, neg, config, language)
    _check_disjoint(pos, neg)
    arity = target_arity(target, pos, neg)
    if arity != 1:
        raise ValueError("LIME-FOLD needs a unary target keyed by sample id")
    model = prepare_model(theory, pos, neg)
    if language is None:
        language = default_language(theory, target)
    search = LimeFoldSearch(target, model, language, config, arity=1, rmap=rmap)
    return search.hypothesis(search.fold(pos, neg))
