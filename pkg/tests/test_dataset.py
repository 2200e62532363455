import math

import pytest
from hypothesis import given
from hypothesis import strategies as st

from foldlearn.dataset import (
    MISSING,
    Column,
    FeatureSchema,
    Sample,
    bin_index,
    discretize,
    discretize_schema,
    entropy_discretize,
    format_schema,
    load_csv,
    make_examples,
    make_predicates,
    parse_schema,
    propositionalize,
)
from foldlearn.exceptions import ParseError, SchemaError
from foldlearn.logic import Atom

from oracles import equal_frequency_edges


def write(tmp_path, text, name="d.csv"):
    p = tmp_path / name
    p.write_text(text)
    return p


def numeric_samples(values):
    return [Sample(f"s{i}", {"v": v}, False) for i, v in enumerate(values)]


# -- loading ---------------------------------------------------------------


def test_load_small_file(tmp_path):
    p = write(tmp_path, "chest_pain,chol,label\n4,250,1\n1,180,0\n3,210,0\n4,300,1\n")
    schema, samples = load_csv(p, categorical=["chest_pain"])
    assert schema.feature_names == ["chest_pain", "chol"]
    assert [c.kind for c in schema.columns] == ["categorical", "numeric"]
    assert len(samples) == 4 and [s.label for s in samples] == [True, False, False, True]
    assert samples[0].values == {"chest_pain": "4", "chol": 250.0}


def test_duplicate_header(tmp_path):
    with pytest.raises(SchemaError):
        load_csv(write(tmp_path, "a,a,label\n1,2,0\n"))


def test_missing_cell(tmp_path):
    _, samples = load_csv(write(tmp_path, "a,b,label\n1,,0\n2,x,1\n"))
    assert samples[0].values["b"] is MISSING


def test_missing_label_column(tmp_path):
    with pytest.raises(SchemaError):
        load_csv(write(tmp_path, "a,b\n1,2\n"))


def test_non_binary_label(tmp_path):
    with pytest.raises(SchemaError):
        load_csv(write(tmp_path, "a,label\n1,x\n2,y\n3,z\n"))


def test_ragged_row_position(tmp_path):
    with pytest.raises(ParseError) as info:
        load_csv(write(tmp_path, "a,b,label\n1,2,0\n1,0\n"))
    assert info.value.line == 3


def test_schema_mismatch(tmp_path):
    schema = FeatureSchema((Column("a", "numeric"),), "label")
    with pytest.raises(SchemaError):
        load_csv(write(tmp_path, "a,b,label\n1,2,0\n"), schema)


def test_id_column_and_positive_label(tmp_path):
    schema, samples = load_csv(
        write(tmp_path, "id,x,y\nP-1,a,yes\nP-2,b,no\n"), label="y", id_column="id", positive="yes"
    )
    assert [s.id for s in samples] == ["pm1", "pm2"]
    assert [s.label for s in samples] == [True, False]


# -- discretization --------------------------------------------------------


def test_discretize_hundred():
    assert discretize(numeric_samples(range(1, 101)), "v", 4).edges == (25.5, 50.5, 75.5)


def test_discretize_constant():
    assert discretize(numeric_samples([7.0] * 10), "v", 4).edges == ()


def test_discretize_one_bin():
    assert discretize(numeric_samples([1, 2, 3]), "v", 1).edges == ()


def test_discretize_rejects_bad_input():
    with pytest.raises(ValueError):
        discretize(numeric_samples([1, 2]), "v", 0)
    with pytest.raises(TypeError):
        discretize([Sample("s", {"v": "red"}, False)], "v", 2)


values = st.lists(st.integers(-20, 20).map(float), min_size=1, max_size=60)


@given(values, st.integers(1, 6))
def test_discretize_matches_sort_oracle(xs, bins):
    assert list(discretize(numeric_samples(xs), "v", bins).edges) == equal_frequency_edges(xs, bins)


@given(values, st.integers(1, 6))
def test_equal_frequency_bin_sizes(xs, bins):
    edges = discretize(numeric_samples(xs), "v", bins).edges
    assert len(edges) + 1 <= bins
    assert list(edges) == sorted(set(edges))
    counts = [0] * (len(edges) + 1)
    tied = [0] * (len(edges) + 1)
    for x in xs:
        counts[bin_index(edges, x)] += 1
        tied[bin_index(edges, x)] += xs.count(x) > 1
    for count, ties in zip(counts, tied):
        assert count <= math.ceil(len(xs) / bins) + ties


def test_half_open_intervals():
    assert bin_index((200.0,), 199.9) == 0
    assert bin_index((200.0,), 200.0) == 1
    assert bin_index((200.0,), 250.0) == 1


def test_entropy_discretize_finds_the_boundary():
    samples = [Sample(f"s{i}", {"v": float(i)}, i >= 30) for i in range(60)]
    assert entropy_discretize(samples, "v", 2).edges == (29.5,)


def test_discretize_schema_fills_numeric_only():
    schema = FeatureSchema((Column("v", "numeric"), Column("c", "categorical", ("a", "b"))), "label")
    out = discretize_schema(schema, numeric_samples(range(8)), bins=2)
    assert out.column("v").edges == (3.5,) and out.column("c") == schema.column("c")


# -- propositionalization and predicates ----------------------------------


def test_propositionalize_chest_pain():
    schema = FeatureSchema((Column("chest_pain", "categorical", ("1", "2", "3", "4")),), "label")
    cols = propositionalize(schema).columns
    assert [c.name for c in cols] == ["chest_pain_1", "chest_pain_2", "chest_pain_3", "chest_pain_4"]
    assert cols[3].source == ("chest_pain", "4")


def test_propositionalize_identity_without_categoricals():
    schema = FeatureSchema((Column("v", "numeric", edges=(1.0,)),), "label")
    assert propositionalize(schema) == schema


def test_propositionalize_counts_and_order():
    schema = FeatureSchema(
        (Column("a", "categorical", ("x", "y")), Column("n", "numeric"), Column("b", "categorical", ("p", "q", "r"))),
        "label",
    )
    names = [c.name for c in propositionalize(schema).columns]
    assert names == ["a_x", "a_y", "n", "b_p", "b_q", "b_r"]


def test_propositionalize_collision():
    schema = FeatureSchema((Column("a", "categorical", ("x",)), Column("a_x", "numeric")), "label")
    with pytest.raises(SchemaError):
        propositionalize(schema)


@given(st.lists(st.sampled_from(["x", "y", "z", None]), min_size=1, max_size=12))
def test_propositionalization_preserves_value(cells):
    schema = FeatureSchema((Column("a", "categorical", ("x", "y", "z")),), "label")
    samples = [Sample(f"s{i}", {"a": v}, False) for i, v in enumerate(cells)]
    facts = make_predicates(propositionalize(schema), samples).facts
    for s, v in zip(samples, cells):
        held = [f.predicate for f in facts if f.args == (s.id,)]
        assert held == ([] if v is None else [f"a_{v}"])


def test_make_predicates_examples():
    schema = FeatureSchema(
        (Column("chest_pain", "categorical", ("1", "4")), Column("chol", "numeric", edges=(200.0,))), "label"
    )
    samples = [Sample("s1", {"chest_pain": "4", "chol": 250.0}, True), Sample("s2", {"chest_pain": "1", "chol": MISSING}, False)]
    facts = make_predicates(propositionalize(schema), samples).facts
    assert Atom("chest_pain_4", ("s1",)) in facts
    assert Atom("chol_bin1", ("s1",)) in facts
    assert not any(f.args == ("s2",) and f.predicate.startswith("chol") for f in facts)


@given(st.lists(st.one_of(st.none(), st.floats(-100, 100)), min_size=1, max_size=30))
def test_one_bin_fact_per_numeric_value(cells):
    schema = FeatureSchema((Column("v", "numeric", edges=(-10.0, 0.0, 10.0)),), "label")
    samples = [Sample(f"s{i}", {"v": v}, False) for i, v in enumerate(cells)]
    facts = make_predicates(schema, samples).facts
    for s, v in zip(samples, cells):
        assert sum(f.args == (s.id,) for f in facts) == (0 if v is None else 1)


def test_make_examples():
    pos, neg = make_examples([Sample("a", {}, True), Sample("b", {}, False)], "t")
    assert pos == [Atom("t", ("a",))] and neg == [Atom("t", ("b",))]


def test_schema_text_round_trip():
    schema = FeatureSchema(
        (Column("age", "numeric", edges=(40.5, 61.0)), Column("pain", "categorical", ("a", "b"))),
        "label",
        "id",
        "yes",
        "no",
    )
    assert parse_schema(format_schema(schema)) == schema
