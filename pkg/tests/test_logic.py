import random

import pytest
from hypothesis import given
from hypothesis import strategies as st

from foldlearn.exceptions import ConsistencyError, ParseError, StratificationError
from foldlearn.logic import (
    Atom,
    BackgroundTheory,
    Clause,
    Hypothesis,
    Literal,
    build_model,
    check_stratified,
    covers,
    deduce,
    parse_atom,
    parse_clauses,
    parse_program,
    refine_candidates,
    render_asp,
    theta_subsumes,
)

from oracles import brute_covers, brute_subsumes, naive_fixpoint, random_stratified


def A(text):
    return parse_atom(text)


def C(text):
    (clause,) = parse_clauses(text)
    return clause


# -- parsing and rendering -------------------------------------------------


def test_parse_clause_and_fact():
    theory = parse_program("bird(X) :- penguin(X). penguin(polly).")
    assert len(theory.clauses) == 1
    assert theory.facts == {A("penguin(polly)")}


def test_parse_empty():
    theory = parse_program("")
    assert theory.clauses == () and not theory.facts


def test_parse_negated_literal():
    c = C("fly(X) :- bird(X), not ab0(X).")
    assert [lit.negated for lit in c.body] == [False, True]
    assert c.body[1].atom == A("ab0(X)")


def test_parse_comments_and_true_body():
    (c,) = parse_clauses("% heading\nfly(X) :- true. % trailing\n")
    assert c.body == () and c.head == A("fly(X)")


def test_parse_error_position():
    with pytest.raises(ParseError) as info:
        parse_program("p(a).\nq(X :- r(X).")
    assert info.value.line == 2


def test_arity_conflict():
    with pytest.raises(ConsistencyError):
        parse_program("p(a). p(a, b).")


def test_render_fly_program():
    h = Hypothesis((C("fly(X) :- bird(X), not ab0(X)."),), (C("ab0(X) :- penguin(X)."),))
    assert render_asp(h) == "fly(X) :- bird(X), not ab0(X).\nab0(X) :- penguin(X).\n"


def test_render_empty():
    assert render_asp(Hypothesis()) == ""


clause_text = st.sampled_from(
    [
        "fly(X) :- bird(X), not ab0(X).",
        "ab0(X) :- penguin(X).",
        "p(X) :- q(X, Y), not r(Y).",
        "fly(tweety).",
        "t(X) :- true.",
        "s(X, Y) :- e(X, Z), e(Z, Y).",
    ]
)


@given(st.lists(clause_text, min_size=0, max_size=6))
def test_render_parse_round_trip(texts):
    clauses = [C(t) for t in texts]
    h = Hypothesis(tuple(clauses))
    assert tuple(parse_clauses(render_asp(h))) == h.clauses


# -- stratification --------------------------------------------------------


def test_even_cycle_rejected():
    s = check_stratified(parse_program("p :- not q. q :- not p."))
    assert not s and set(s.cycle) == {"p", "q"}
    assert "cycle through negation" in s.describe()


def test_negative_self_loop_rejected():
    s = check_stratified(parse_program("p :- not p."))
    assert not s and s.cycle == ("p",)


def test_positive_recursion_accepted():
    assert check_stratified(parse_program("a(X) :- e(X, Y), a(Y). a(X) :- s(X)."))


def test_deduce_refuses_unstratified():
    with pytest.raises(StratificationError):
        deduce(parse_program("p :- not q. q :- not p."))


# -- deduction -------------------------------------------------------------


def test_deduce_fly(fly):
    theory, _, _ = fly
    model = deduce(theory)
    assert A("bird(polly)") in model
    assert theory.facts <= model


def test_deduce_empty():
    assert deduce(BackgroundTheory()) == frozenset()


def test_deduce_two_strata():
    model = deduce(parse_program("q(a). r(b). p(X) :- not q(X)."))
    assert A("p(b)") in model and A("p(a)") not in model


@pytest.mark.parametrize("seed", range(25))
def test_deduce_matches_naive_fixpoint(seed):
    rng = random.Random(seed)
    theory, strata, consts = random_stratified(rng)
    got = deduce(theory, consts)
    assert got == naive_fixpoint(theory.clauses, theory.facts, set(consts) | theory.constants(), strata)


@pytest.mark.parametrize("seed", range(10))
def test_deduce_is_fixpoint(seed):
    theory, _, consts = random_stratified(random.Random(100 + seed))
    model = deduce(theory, consts)
    again = deduce(BackgroundTheory(theory.clauses, frozenset(model)), consts)
    assert again == model


@pytest.mark.parametrize("seed", range(10))
def test_adding_a_fact_is_monotone_for_positive_programs(seed):
    rng = random.Random(200 + seed)
    theory, _, consts = random_stratified(rng)
    positive = tuple(c for c in theory.clauses if not any(l.negated for l in c.body))
    base = BackgroundTheory(positive, theory.facts)
    extra = Atom("p0", ("c0",) * dict(base.predicates()).get("p0", 1))
    before = deduce(base, consts)
    after = deduce(base.with_facts([extra]), consts)
    assert before <= after


# -- coverage --------------------------------------------------------------


def test_covers_fly(fly):
    theory, pos, neg = fly
    assert covers(C("fly(X) :- bird(X)."), neg, theory) == [A("fly(polly)")]
    assert covers(C("fly(X) :- penguin(X)."), pos, theory) == []
    assert covers(C("fly(X) :- true."), pos + neg, theory) == pos + neg


def test_covers_predicate_mismatch(fly):
    theory, _, _ = fly
    with pytest.raises(ValueError):
        covers(C("walk(X) :- bird(X)."), [A("fly(et)")], theory)


@pytest.mark.parametrize("seed", range(20))
def test_covers_matches_brute_force(seed):
    rng = random.Random(300 + seed)
    theory, _, consts = random_stratified(rng, n_rules=3)
    model = build_model(theory, consts)
    universe = set(model.constants)
    names = sorted(theory.predicates())
    body = []
    for _ in range(rng.randint(0, 3)):
        p = rng.choice(names)
        arity = theory.predicates()[p]
        body.append(Literal(Atom(p, tuple(rng.choice("XY") for _ in range(arity))), rng.random() < 0.3))
    clause = Clause(Atom("t", ("X",)), tuple(body))
    examples = [Atom("t", (c,)) for c in sorted(universe)]
    assert covers(clause, examples, model) == brute_covers(clause, examples, model.atoms(), universe)


# -- θ-subsumption and refinement -----------------------------------------


def test_subsumes_reflexive_identity():
    c = C("p(X) :- q(X, Y), not r(Y).")
    ok, theta = theta_subsumes(c, c)
    assert ok and all(theta[v] == v for v in theta)


def test_empty_body_subsumes():
    assert theta_subsumes(C("fly(X) :- true."), C("fly(X) :- bird(X)."))[0]


def test_subsumes_with_substitution():
    ok, theta = theta_subsumes(C("p(X) :- q(X, Y)."), C("p(a) :- q(a, b), r(b)."))
    assert ok and theta == {"X": "a", "Y": "b"}


def test_more_specific_does_not_subsume():
    assert not theta_subsumes(C("fly(X) :- bird(X)."), C("fly(X) :- true."))[0]


atoms2 = st.tuples(st.sampled_from("qr"), st.sampled_from(["X", "Y", "Z", "a", "b"]), st.sampled_from(["X", "Y", "a"]))


def _clause(parts, negs):
    body = tuple(Literal(Atom(p, (s, t)), n) for (p, s, t), n in zip(parts, negs))
    return Clause(Atom("p", ("X",)), body)


@given(st.lists(atoms2, max_size=3), st.lists(atoms2, max_size=4), st.lists(st.booleans(), min_size=4, max_size=4))
def test_subsumption_matches_brute_force(a, b, negs):
    c, d = _clause(a, negs), _clause(b, negs[::-1])
    assert theta_subsumes(c, d)[0] == brute_subsumes(c, d)


@given(st.lists(atoms2, max_size=3), st.lists(atoms2, max_size=3), st.lists(atoms2, max_size=3))
def test_subsumption_transitive(a, b, c):
    ca, cb, cc = (_clause(x, [False] * 3) for x in (a, b, c))
    if theta_subsumes(ca, cb)[0] and theta_subsumes(cb, cc)[0]:
        assert theta_subsumes(ca, cc)[0]


@pytest.mark.parametrize("seed", range(10))
def test_generality_soundness(seed):
    """If c subsumes d then c covers everything d covers."""
    rng = random.Random(400 + seed)
    theory, _, consts = random_stratified(rng, n_rules=2)
    model = build_model(theory, consts)
    lang = {p: a for p, a in theory.predicates().items()}
    c = Clause(Atom("t", ("X",)))
    examples = [Atom("t", (k,)) for k in sorted(model.constants)]
    for _ in range(3):
        cands = refine_candidates(c, lang, "negation")
        d = rng.choice(cands)
        assert theta_subsumes(c, d)[0]
        assert set(covers(d, examples, model)) <= set(covers(c, examples, model))
        c = d


def test_refine_counts_fly():
    lang = {"bird": 1, "penguin": 1, "cat": 1}
    top = C("fly(X) :- true.")
    assert len(refine_candidates(top, lang, "positive")) == 3
    assert len(refine_candidates(top, lang, "negation")) == 6


def test_refine_binary_binding_patterns():
    cands = {str(c) for c in refine_candidates(C("p(X) :- q(X)."), {"r": 2}, "positive")}
    assert "p(X) :- q(X), r(X,Y)." in cands
    assert "p(X) :- q(X), r(Y,X)." in cands
    assert "p(X) :- q(X), r(Y,Y)." not in cands  # not linked


def test_refine_order_deterministic():
    lang = {"b": 1, "a": 1, "c": 2}
    first = refine_candidates(C("t(X) :- true."), lang, "negation")
    assert first == refine_candidates(C("t(X) :- true."), dict(reversed(list(lang.items()))), "negation")


@given(st.lists(st.sampled_from(["a", "b", "c"]), max_size=2))
def test_refinements_strictly_more_specific(body_preds):
    clause = Clause(Atom("t", ("X",)), tuple(Literal(Atom(p, ("X",))) for p in body_preds))
    for cand in refine_candidates(clause, {"a": 1, "b": 1, "e": 2}, "negation"):
        assert theta_subsumes(clause, cand)[0]
        assert not theta_subsumes(cand, clause)[0]
