"""Planted default-theory datasets with known sub-concepts."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .dataset import Column, FeatureSchema, Sample, make_examples, make_predicates, propositionalize
from .logic import Atom, BackgroundTheory

__all__ = ["PlantedTask", "make_planted"]


@dataclass
class PlantedTask:
    """A generated task: samples plus its relational encoding and ground truth."""

    schema: FeatureSchema
    samples: list[Sample]
    theory: BackgroundTheory
    pos: list[Atom]
    neg: list[Atom]
    concepts: list[tuple[str, ...]]
    exceptions: list[str | None]
    target: str = "target"
    truth: dict = field(default_factory=dict)

    def split(self, fraction: float, seed: int = 0) -> tuple[PlantedTask, PlantedTask]:
        rng = np.random.default_rng(seed)
        order = rng.permutation(len(self.samples))
        cut = int(round(fraction * len(order)))
        parts = []
        for idx in (sorted(order[:cut]), sorted(order[cut:])):
            samples = [self.samples[i] for i in idx]
            pos, neg = make_examples(samples, self.target)
            theory = make_predicates(propositionalize(self.schema), samples)
            parts.append(PlantedTask(self.schema, samples, theory, pos, neg, self.concepts, self.exceptions, self.target))
        return parts[0], parts[1]


def make_planted(
    n_samples: int = 200,
    n_concepts: int = 3,
    core_size: int = 2,
    n_redundant: int = 0,
    redundancy_noise: float = 0.1,
    exceptions: bool = False,
    exception_rate: float = 0.25,
    n_distractors: int = 2,
    seed: int = 0,
    target: str = "target",
) -> PlantedTask:
    """Binary-feature task whose label is a disjunction of planted sub-concepts.

    Sub-concept ``j`` holds when its ``core_size`` core features ``c<j>_<i>``
    are all 1 and, with ``exceptions``, its exception feature ``x<j>`` is 0.
    Each of the ``n_redundant`` features ``r<j>_<m>`` copies the sub-concept
    indicator with probability ``1 - redundancy_noise`` and is flipped
    otherwise. Labels are noise-free.
    """
    rng = np.random.default_rng(seed)
    p_core = 0.5 ** (1.0 / core_size) * 0.8
    cols: dict[str, np.ndarray] = {}
    concepts, excs = [], []
    label = np.zeros(n_samples, dtype=bool)
    for j in range(n_concepts):
        core = [f"c{j}_{i}" for i in range(core_size)]
        member = np.ones(n_samples, dtype=bool)
        for name in core:
            cols[name] = rng.random(n_samples) < p_core
            member &= cols[name]
        concepts.append(tuple(name + "_1" for name in core))
        if exceptions:
            xname = f"x{j}"
            cols[xname] = rng.random(n_samples) < exception_rate
            member &= ~cols[xname]
            excs.append(xname + "_1")
        else:
            excs.append(None)
        for m in range(n_redundant):
            flip = rng.random(n_samples) < redundancy_noise
            cols[f"r{j}_{m}"] = member ^ flip
        label |= member
    for d in range(n_distractors):
        cols[f"d{d}"] = rng.random(n_samples) < 0.5
    columns = tuple(Column(name, "categorical", ("0", "1")) for name in cols)
    schema = FeatureSchema(columns, "label")
    samples = [
        Sample(f"s{i}", {name: "1" if cols[name][i] else "0" for name in cols}, bool(label[i]))
        for i in range(n_samples)
    ]
    theory = make_predicates(propositionalize(schema), samples)
    pos, neg = make_examples(samples, target)
    return PlantedTask(schema, samples, theory, pos, neg, concepts, excs, target)
