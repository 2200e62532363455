import warnings

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from foldlearn.dataset import Column, FeatureSchema, Sample, make_examples, make_predicates, propositionalize
from foldlearn.exceptions import ConvergenceWarning, ParseError
from foldlearn.explainer import ClassifierHandle, PerturbationConfig, PerturbationSpace
from foldlearn.fold import FoldConfig, fold_learn
from foldlearn.limefold import RelevantFeatureMap, lime_fold_learn, transform_dataset
from foldlearn.logic import check_stratified, covers, deduce
from foldlearn.foil import prepare_model
from foldlearn.synthetic import make_planted

ABC = FeatureSchema(tuple(Column(n, "categorical", ("0", "1")) for n in "abc"), "label")


def linear(t):
    # exactly linear in the match indicators, so the local fit recovers it
    a, b, c = ((t[n] == "1").astype(float) for n in "abc")
    return 0.2 + 0.4 * a - 0.2 * b + 0.1 * c


def task_parts(samples, schema):
    theory = make_predicates(propositionalize(schema), samples)
    pos, neg = make_examples(samples, "target")
    return theory, pos, neg


def truth_map(task):
    """Each positive gets the core literals of the first sub-concept it satisfies."""
    rmap = RelevantFeatureMap()
    for s in task.samples:
        entries = ()
        if s.label:
            for core in task.concepts:
                if all(s.values[lit.rsplit("_", 1)[0]] == "1" for lit in core):
                    entries = tuple((lit, "+") for lit in core)
                    break
        rmap[s.id] = entries
    return rmap


def entails_exactly(theory, h, pos, neg):
    model = deduce(theory.with_clauses(h.clauses), [e.args[0] for e in pos + neg])
    return all(e in model for e in pos) and not any(e in model for e in neg)


# -- transform_dataset -----------------------------------------------------


def test_signs_follow_predicted_class():
    f = ClassifierHandle(linear, ABC)
    x = Sample("x", {"a": "1", "b": "1", "c": "1"}, True)  # f(x) = 0.5, predicted positive
    rmap = transform_dataset(f, [x], PerturbationSpace(ABC), PerturbationConfig(500))
    assert dict(rmap["x"]) == {"a_1": "+", "b_1": "-", "c_1": "+"}
    assert rmap.supporting("x") == {"a_1", "c_1"}


def test_signs_flip_for_predicted_negative():
    f = ClassifierHandle(linear, ABC)
    x = Sample("x", {"a": "0", "b": "1", "c": "0"}, False)  # f(x) = 0.0
    rmap = transform_dataset(f, [x], PerturbationSpace(ABC), PerturbationConfig(500))
    # matching a=0 lowers the score, which supports the negative prediction
    assert dict(rmap["x"]) == {"a_0": "+", "b_1": "+", "c_0": "+"}


def test_constant_classifier_gives_empty_sets():
    f = ClassifierHandle(lambda t: np.full(len(t["a"]), 0.7), ABC)
    xs = [Sample(f"s{i}", {"a": "1", "b": str(i % 2), "c": "0"}, True) for i in range(4)]
    rmap = transform_dataset(f, xs, PerturbationSpace(ABC), PerturbationConfig(200))
    assert rmap.is_empty()


def test_identical_samples_identical_sets():
    f = ClassifierHandle(lambda t: 0.9 * (t["a"] == "1") + 0.05 * (t["c"] == "1"), ABC)
    v = {"a": "1", "b": "0", "c": "1"}
    rmap = transform_dataset(f, [Sample("p", v, True), Sample("q", dict(v), True)], PerturbationSpace(ABC))
    assert rmap["p"] == rmap["q"]


def test_thread_count_does_not_change_map():
    task = make_planted(80, n_concepts=2, seed=5)
    f = ClassifierHandle(lambda t: ((t["c0_0"] == "1") & (t["c0_1"] == "1")).astype(float), task.schema)
    space = PerturbationSpace(task.schema)
    cfg = PerturbationConfig(300, seed=2)
    assert transform_dataset(f, task.samples, space, cfg, n_jobs=1) == transform_dataset(
        f, task.samples, space, cfg, n_jobs=4
    )


# -- relevant map text -----------------------------------------------------


names = st.from_regex(r"[a-z][a-z0-9_]{0,8}", fullmatch=True)
entry = st.tuples(st.one_of(names, names.map(lambda n: "not " + n)), st.sampled_from("+-"))


@given(st.dictionaries(st.from_regex(r"s[0-9]{1,3}", fullmatch=True), st.lists(entry, max_size=4).map(tuple)))
def test_map_text_round_trip(d):
    rmap = RelevantFeatureMap(d)
    assert RelevantFeatureMap.from_text(rmap.to_text()) == rmap


def test_map_file_round_trip(tmp_path):
    rmap = RelevantFeatureMap({"s0": (("a_1", "+"), ("not b_2", "-")), "s1": ()})
    rmap.save(tmp_path / "r.txt")
    assert RelevantFeatureMap.load(tmp_path / "r.txt") == rmap


def test_map_rejects_bad_sign():
    with pytest.raises(ParseError):
        RelevantFeatureMap.from_text("s0\ta_1:?\n")


# -- lime_fold_learn -------------------------------------------------------


def test_empty_map_falls_back_to_fold(fly):
    theory, pos, neg = fly
    empty = RelevantFeatureMap({e.args[0]: () for e in pos + neg})
    with pytest.warns(ConvergenceWarning, match="plain FOLD"):
        h = lime_fold_learn("fly", theory, pos, neg, empty)
    assert h == fold_learn("fly", theory, pos, neg)


@pytest.mark.parametrize("n_concepts,seed", [(2, 0), (2, 1), (3, 2), (3, 3)])
def test_truth_map_gives_one_clause_per_concept(n_concepts, seed):
    task = make_planted(200, n_concepts=n_concepts, seed=seed)
    h = lime_fold_learn("target", task.theory, task.pos, task.neg, truth_map(task))
    bodies = {tuple(sorted(l.atom.predicate for l in c.body)) for c in h.defaults}
    assert len(h.defaults) == n_concepts
    assert bodies == {tuple(sorted(core)) for core in task.concepts}
    assert entails_exactly(task.theory, h, task.pos, task.neg)


def test_restriction_ignores_redundant_copy():
    # r0_0 copies the label exactly, so plain FOLD takes it as a single literal
    task = make_planted(150, n_concepts=1, n_redundant=1, redundancy_noise=0.0, seed=4)
    plain = fold_learn("target", task.theory, task.pos, task.neg)
    assert [l.atom.predicate for l in plain.defaults[0].body] == ["r0_0_1"]
    h = lime_fold_learn("target", task.theory, task.pos, task.neg, truth_map(task))
    used = {l.atom.predicate for c in h.defaults for l in c.body}
    assert used == set(task.concepts[0])


def test_two_clusters_two_clauses():
    schema = FeatureSchema(tuple(Column(n, "categorical", ("0", "1")) for n in ("a", "b", "c", "d")), "label")
    rows = []
    for i in range(12):
        rows.append(Sample(f"p{i}", {"a": "1", "b": "1", "c": "0", "d": str(i % 2)}, True))
        rows.append(Sample(f"q{i}", {"a": "0", "b": str(i % 2), "c": "1", "d": "1"}, True))
        rows.append(Sample(f"n{i}", {"a": "0", "b": "0", "c": "0", "d": str(i % 2)}, False))
    theory, pos, neg = task_parts(rows, schema)
    f = ClassifierHandle(
        lambda t: (((t["a"] == "1") & (t["b"] == "1")) | ((t["c"] == "1") & (t["d"] == "1"))).astype(float), schema
    )
    rmap = transform_dataset(f, rows, PerturbationSpace(schema), PerturbationConfig(800, k=2))
    h = lime_fold_learn("target", theory, pos, neg, rmap)
    assert len(h.defaults) == 2
    assert entails_exactly(theory, h, pos, neg)


@settings(max_examples=25)
@given(st.integers(0, 10_000))
def test_literals_come_from_covered_relevant_sets(seed):
    rng = np.random.default_rng(seed)
    task = make_planted(60, n_concepts=2, n_distractors=2, seed=seed)
    preds = [p for p in sorted({a.predicate for a in task.theory.facts})]
    rmap = RelevantFeatureMap(
        {s.id: tuple((p, "+") for p in rng.choice(preds, size=3, replace=False)) for s in task.samples}
    )
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", ConvergenceWarning)
        h = lime_fold_learn("target", task.theory, task.pos, task.neg, rmap)
    check_stratified(h.clauses)
    model = prepare_model(task.theory, task.pos, task.neg)
    for clause in h.defaults:
        covered = covers(clause, task.pos, model)
        for lit in clause.body:
            if lit.negated:
                continue
            assert any(lit.atom.predicate in rmap.supporting(e.args[0]) for e in covered)


def test_learner_thread_count_invariance():
    task = make_planted(120, n_concepts=2, exceptions=True, seed=7)
    rmap = truth_map(task)
    one = lime_fold_learn("target", task.theory, task.pos, task.neg, rmap, FoldConfig(n_jobs=1))
    four = lime_fold_learn("target", task.theory, task.pos, task.neg, rmap, FoldConfig(n_jobs=4))
    assert one == four
