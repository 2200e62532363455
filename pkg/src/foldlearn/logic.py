"""Function-free clauses with negation-as-failure.

Terms are plain strings: an identifier starting with an uppercase letter or
``_`` is a variable, anything else (lowercase identifiers, integers) is a
constant. Ground models are computed bottom-up, stratum by stratum, under
domain closure: a variable not bound by a positive body literal ranges over
every constant known to the model.
"""

from __future__ import annotations

import itertools
import re
from dataclasses import dataclass, field
from typing import Iterable, Iterator, Mapping

import networkx as nx

from .exceptions import ConsistencyError, ParseError, StratificationError

__all__ = [
    "Atom",
    "Literal",
    "Clause",
    "Hypothesis",
    "BackgroundTheory",
    "Model",
    "Stratification",
    "is_variable",
    "parse_program",
    "parse_clauses",
    "parse_atom",
    "check_stratified",
    "build_model",
    "extend_model",
    "deduce",
    "covers",
    "theta_subsumes",
    "refine_candidates",
    "render_asp",
    "most_general_clause",
]


def is_variable(term: str) -> bool:
    return term[0].isupper() or term[0] == "_"


@dataclass(frozen=True, order=True)
class Atom:
    predicate: str
    args: tuple[str, ...] = ()

    @property
    def arity(self) -> int:
        return len(self.args)

    @property
    def signature(self) -> tuple[str, int]:
        return (self.predicate, len(self.args))

    def variables(self) -> tuple[str, ...]:
        return tuple(t for t in self.args if is_variable(t))

    def is_ground(self) -> bool:
        return not any(is_variable(t) for t in self.args)

    def substitute(self, theta: Mapping[str, str]) -> Atom:
        return Atom(self.predicate, tuple(theta.get(t, t) for t in self.args))

    def __str__(self) -> str:
        if not self.args:
            return self.predicate
        return f"{self.predicate}({','.join(self.args)})"


@dataclass(frozen=True, order=True)
class Literal:
    atom: Atom
    negated: bool = False

    def __str__(self) -> str:
        return f"not {self.atom}" if self.negated else str(self.atom)


@dataclass(frozen=True)
class Clause:
    head: Atom
    body: tuple[Literal, ...] = ()

    def __len__(self) -> int:
        return len(self.body)

    @property
    def length(self) -> int:
        return len(self.body)

    def variables(self) -> list[str]:
        """Variables in order of first appearance, head first."""
        seen: dict[str, None] = {}
        for t in self.head.args:
            if is_variable(t):
                seen.setdefault(t)
        for lit in self.body:
            for t in lit.atom.args:
                if is_variable(t):
                    seen.setdefault(t)
        return list(seen)

    def is_fact(self) -> bool:
        return not self.body and self.head.is_ground()

    def add_literal(self, literal: Literal) -> Clause:
        return Clause(self.head, self.body + (literal,))

    def __str__(self) -> str:
        if not self.body:
            if self.head.is_ground():
                return f"{self.head}."
            return f"{self.head} :- true."
        return f"{self.head} :- {', '.join(map(str, self.body))}."


def most_general_clause(target: str, arity: int) -> Clause:
    if arity == 1:
        names: tuple[str, ...] = ("X",)
    else:
        names = tuple(f"X{i + 1}" for i in range(arity))
    return Clause(Atom(target, names))


@dataclass(frozen=True)
class Hypothesis:
    """Learned program: default clauses for the target plus abnormality clauses."""

    defaults: tuple[Clause, ...] = ()
    abnormalities: tuple[Clause, ...] = ()

    @property
    def clauses(self) -> tuple[Clause, ...]:
        return self.defaults + self.abnormalities

    @property
    def n_clauses(self) -> int:
        return len(self.defaults) + len(self.abnormalities)

    @property
    def n_literals(self) -> int:
        return sum(len(c) for c in self.clauses)

    @classmethod
    def from_clauses(cls, clauses: Iterable[Clause], target: str) -> Hypothesis:
        clauses = list(clauses)
        return cls(
            tuple(c for c in clauses if c.head.predicate == target),
            tuple(c for c in clauses if c.head.predicate != target),
        )

    def __str__(self) -> str:
        return render_asp(self)


@dataclass(frozen=True)
class BackgroundTheory:
    clauses: tuple[Clause, ...] = ()
    facts: frozenset[Atom] = frozenset()

    def with_clauses(self, clauses: Iterable[Clause]) -> BackgroundTheory:
        rules, facts = list(self.clauses), set(self.facts)
        for c in clauses:
            if c.is_fact():
                facts.add(c.head)
            else:
                rules.append(c)
        return BackgroundTheory(tuple(rules), frozenset(facts))

    def with_facts(self, atoms: Iterable[Atom]) -> BackgroundTheory:
        return BackgroundTheory(self.clauses, self.facts | frozenset(atoms))

    def predicates(self) -> dict[str, int]:
        """Predicate name to arity, in sorted name order."""
        preds: dict[str, int] = {}
        for a in self.facts:
            preds[a.predicate] = a.arity
        for c in self.clauses:
            preds[c.head.predicate] = c.head.arity
            for lit in c.body:
                preds[lit.atom.predicate] = lit.atom.arity
        return dict(sorted(preds.items()))

    def constants(self) -> set[str]:
        consts = {t for a in self.facts for t in a.args}
        for c in self.clauses:
            for atom in (c.head, *(lit.atom for lit in c.body)):
                consts.update(t for t in atom.args if not is_variable(t))
        return consts


# ---------------------------------------------------------------------------
# Parsing

_TOKEN = re.compile(
    r"""
    (?P<ws>[ \t\r]+)
  | (?P<nl>\n)
  | (?P<comment>%[^\n]*)
  | (?P<neck>:-)
  | (?P<punct>[(),.])
  | (?P<var>[A-Z_][A-Za-z0-9_]*)
  | (?P<ident>[a-z][A-Za-z0-9_]*)
  | (?P<num>-?[0-9]+)
    """,
    re.VERBOSE,
)


def _tokenize(text: str) -> list[tuple[str, str, int, int]]:
    tokens = []
    line, line_start, pos = 1, 0, 0
    while pos < len(text):
        m = _TOKEN.match(text, pos)
        if m is None:
            raise ParseError(f"unexpected character {text[pos]!r}", line, pos - line_start + 1)
        kind = m.lastgroup
        if kind == "nl":
            line += 1
            line_start = m.end()
        elif kind not in ("ws", "comment"):
            tokens.append((kind, m.group(), line, pos - line_start + 1))
        pos = m.end()
    tokens.append(("eof", "", line, pos - line_start + 1))
    return tokens


class _Parser:
    def __init__(self, text: str):
        self.tokens = _tokenize(text)
        self.i = 0
        self.arities: dict[str, int] = {}

    def peek(self):
        return self.tokens[self.i]

    def take(self, kind=None, value=None):
        tok = self.tokens[self.i]
        if (kind and tok[0] != kind) or (value and tok[1] != value):
            want = value or kind
            got = tok[1] or "end of input"
            raise ParseError(f"expected {want!r}, got {got!r}", tok[2], tok[3])
        self.i += 1
        return tok

    def atom(self) -> Atom:
        kind, name, line, col = self.take("ident")
        if name == "not":
            raise ParseError("'not' cannot be used as a predicate", line, col)
        args: list[str] = []
        if self.peek()[1] == "(":
            self.take()
            while True:
                tok = self.peek()
                if tok[0] not in ("var", "ident", "num"):
                    raise ParseError(f"expected a term, got {tok[1]!r}", tok[2], tok[3])
                args.append(self.take()[1])
                if self.peek()[1] == ",":
                    self.take()
                    continue
                self.take("punct", ")")
                break
        known = self.arities.setdefault(name, len(args))
        if known != len(args):
            raise ConsistencyError(
                f"predicate {name!r} used with arity {len(args)} and {known} "
                f"(line {line}, column {col})"
            )
        return Atom(name, tuple(args))

    def literal(self) -> Literal | None:
        tok = self.peek()
        if tok[0] == "ident" and tok[1] == "not":
            self.take()
            return Literal(self.atom(), True)
        if tok[0] == "ident" and tok[1] == "true" and self.tokens[self.i + 1][1] != "(":
            self.take()
            return None
        return Literal(self.atom(), False)

    def clauses(self) -> list[Clause]:
        out = []
        while self.peek()[0] != "eof":
            head = self.atom()
            body: list[Literal] = []
            if self.peek()[0] == "neck":
                self.take()
                while True:
                    lit = self.literal()
                    if lit is not None:
                        body.append(lit)
                    if self.peek()[1] == ",":
                        self.take()
                        continue
                    break
            self.take("punct", ".")
            out.append(Clause(head, tuple(body)))
        return out


def parse_clauses(text: str) -> list[Clause]:
    """Parse clauses in source order, keeping ground facts as bodyless clauses."""
    return _Parser(text).clauses()


def parse_program(text: str) -> BackgroundTheory:
    """Parse ``head :- body.`` text into rules plus a set of ground facts."""
    return BackgroundTheory().with_clauses(parse_clauses(text))


def parse_atom(text: str) -> Atom:
    text = text.strip()
    if text.endswith("."):
        text = text[:-1]
    parser = _Parser(text)
    atom = parser.atom()
    tok = parser.peek()
    if tok[0] != "eof":
        raise ParseError(f"trailing input {tok[1]!r}", tok[2], tok[3])
    return atom


# ---------------------------------------------------------------------------
# Stratification


@dataclass(frozen=True)
class Stratification:
    """Result of :func:`check_stratified`.

    ``strata`` lists predicate groups in evaluation order when the program is
    accepted; ``cycle`` names one dependency cycle through negation otherwise.
    """

    ok: bool
    strata: tuple[frozenset[str], ...] = ()
    cycle: tuple[str, ...] = ()

    def __bool__(self) -> bool:
        return self.ok

    def describe(self) -> str:
        if self.ok:
            return f"stratified ({len(self.strata)} strata)"
        return "cycle through negation: " + " -> ".join(self.cycle + self.cycle[:1])


def _dependency_graph(clauses: Iterable[Clause]) -> nx.DiGraph:
    graph = nx.DiGraph()
    for c in clauses:
        head = c.head.predicate
        graph.add_node(head)
        for lit in c.body:
            body = lit.atom.predicate
            if graph.has_edge(body, head):
                graph[body][head]["negative"] |= lit.negated
            else:
                graph.add_edge(body, head, negative=lit.negated)
    return graph


def _stratify(clauses: Iterable[Clause]) -> Stratification:
    graph = _dependency_graph(clauses)
    condensed = nx.condensation(graph)
    members = condensed.graph["mapping"]
    for u, v, neg in sorted(graph.edges(data="negative")):
        if neg and members[u] == members[v]:
            scc = graph.subgraph(condensed.nodes[members[u]]["members"])
            path = nx.shortest_path(scc, v, u) if u != v else [u]
            return Stratification(False, cycle=tuple(path))
    order = nx.lexicographical_topological_sort(
        condensed, key=lambda n: min(condensed.nodes[n]["members"])
    )
    strata = tuple(frozenset(condensed.nodes[n]["members"]) for n in order)
    return Stratification(True, strata=strata)


def check_stratified(theory: BackgroundTheory | Iterable[Clause]) -> Stratification:
    """Reject any dependency cycle that passes through a negated literal.

    This is stricter than forbidding only even cycles; it guarantees that the
    bottom-up model is unique.
    """
    clauses = theory.clauses if isinstance(theory, BackgroundTheory) else theory
    return _stratify(clauses)


# ---------------------------------------------------------------------------
# Ground models


class Model:
    """Mutable set of ground atoms indexed by predicate, plus the constant universe."""

    def __init__(self, atoms: Iterable[Atom] = (), constants: Iterable[str] = ()):
        self._rel: dict[str, set[tuple[str, ...]]] = {}
        self.constants: set[str] = set(constants)
        for a in atoms:
            self.add(a)

    def add(self, atom: Atom) -> bool:
        rel = self._rel.setdefault(atom.predicate, set())
        if atom.args in rel:
            return False
        rel.add(atom.args)
        self.constants.update(atom.args)
        return True

    def tuples(self, predicate: str) -> set[tuple[str, ...]]:
        return self._rel.get(predicate, set())

    def holds(self, atom: Atom) -> bool:
        return atom.args in self._rel.get(atom.predicate, ())

    __contains__ = holds

    def atoms(self) -> frozenset[Atom]:
        return frozenset(Atom(p, args) for p, rel in self._rel.items() for args in rel)

    def predicates(self) -> list[str]:
        return sorted(p for p, rel in self._rel.items() if rel)

    def discard_predicate(self, predicate: str) -> None:
        self._rel.pop(predicate, None)

    def copy(self) -> Model:
        other = Model(constants=self.constants)
        other._rel = {p: set(rel) for p, rel in self._rel.items()}
        return other

    def __len__(self) -> int:
        return sum(len(rel) for rel in self._rel.values())


def _unify(atom: Atom, args: tuple[str, ...], theta: dict[str, str]) -> dict[str, str] | None:
    out = theta
    for term, value in zip(atom.args, args):
        if is_variable(term):
            bound = out.get(term)
            if bound is None:
                if out is theta:
                    out = dict(theta)
                out[term] = value
            elif bound != value:
                return None
        elif term != value:
            return None
    return out


def _solutions(
    body: tuple[Literal, ...],
    theta: dict[str, str],
    model: Model,
    universe: list[str],
    delta: tuple[int, set[tuple[str, ...]]] | None = None,
) -> Iterator[dict[str, str]]:
    """Enumerate substitutions satisfying ``body``.

    Positive literals are joined in order, then negated literals are checked
    with any still-unbound variables ranging over ``universe``. ``delta``
    optionally restricts body position ``i`` to the given tuples.
    """
    positives = [(i, lit.atom) for i, lit in enumerate(body) if not lit.negated]
    negatives = [lit.atom for lit in body if lit.negated]

    def join(k: int, theta: dict[str, str]) -> Iterator[dict[str, str]]:
        if k == len(positives):
            yield from check(0, theta)
            return
        i, atom = positives[k]
        rel = delta[1] if delta is not None and delta[0] == i else model.tuples(atom.predicate)
        if not rel:
            return
        grounded = atom.substitute(theta)
        if grounded.is_ground():
            if grounded.args in rel:
                yield from join(k + 1, theta)
            return
        for args in rel:
            t2 = _unify(grounded, args, theta)
            if t2 is not None:
                yield from join(k + 1, t2)

    def check(k: int, theta: dict[str, str]) -> Iterator[dict[str, str]]:
        if k == len(negatives):
            yield theta
            return
        atom = negatives[k].substitute(theta)
        free = list(dict.fromkeys(atom.variables()))
        if not free:
            if not model.holds(atom):
                yield from check(k + 1, theta)
            return
        for values in itertools.product(universe, repeat=len(free)):
            t2 = dict(theta)
            t2.update(zip(free, values))
            if not model.holds(atom.substitute(t2)):
                yield from check(k + 1, t2)

    yield from join(0, theta)


def _ground_heads(head: Atom, theta: dict[str, str], universe: list[str]) -> Iterator[Atom]:
    atom = head.substitute(theta)
    free = list(dict.fromkeys(atom.variables()))
    if not free:
        yield atom
        return
    for values in itertools.product(universe, repeat=len(free)):
        yield atom.substitute(dict(zip(free, values)))


def extend_model(model: Model, clauses: Iterable[Clause]) -> Model:
    """Add the consequences of ``clauses`` to ``model`` in place.

    Predicates used in bodies but not defined by ``clauses`` are taken as
    complete in ``model``. Evaluation is semi-naive within each stratum.
    """
    clauses = list(clauses)
    for c in clauses:
        model.constants.update(t for t in c.head.args if not is_variable(t))
        for lit in c.body:
            model.constants.update(t for t in lit.atom.args if not is_variable(t))
    strat = _stratify(clauses)
    if not strat:
        raise StratificationError(
            f"program is not stratified; {strat.describe()}", strat.cycle
        )
    universe = sorted(model.constants)
    by_head: dict[str, list[Clause]] = {}
    for c in clauses:
        by_head.setdefault(c.head.predicate, []).append(c)

    for stratum in strat.strata:
        rules = [c for p in sorted(stratum) for c in by_head.get(p, ())]
        if not rules:
            continue
        new: set[Atom] = set()
        for c in rules:
            for theta in _solutions(c.body, {}, model, universe):
                new.update(_ground_heads(c.head, theta, universe))
        delta_atoms = {a for a in new if not model.holds(a)}
        recursive = [
            (c, [i for i, lit in enumerate(c.body) if not lit.negated and lit.atom.predicate in stratum])
            for c in rules
        ]
        recursive = [(c, idx) for c, idx in recursive if idx]
        while delta_atoms:
            for a in delta_atoms:
                model.add(a)
            if not recursive:
                break
            delta: dict[str, set[tuple[str, ...]]] = {}
            for a in delta_atoms:
                delta.setdefault(a.predicate, set()).add(a.args)
            new = set()
            for c, positions in recursive:
                for i in positions:
                    rel = delta.get(c.body[i].atom.predicate)
                    if not rel:
                        continue
                    for theta in _solutions(c.body, {}, model, universe, (i, rel)):
                        new.update(_ground_heads(c.head, theta, universe))
            delta_atoms = {a for a in new if not model.holds(a)}
    return model


def build_model(theory: BackgroundTheory, constants: Iterable[str] = ()) -> Model:
    model = Model(theory.facts, constants)
    model.constants.update(theory.constants())
    return extend_model(model, theory.clauses)


def deduce(theory: BackgroundTheory, constants: Iterable[str] = ()) -> frozenset[Atom]:
    """The unique stratified model of ``theory``.

    ``constants`` extends the domain-closure universe (e.g. example identifiers).
    Raises :class:`StratificationError` for programs with recursion through
    negation.
    """
    return build_model(theory, constants).atoms()


def covers(
    clause: Clause,
    examples: Iterable[Atom],
    theory: Model | BackgroundTheory,
) -> list[Atom]:
    """Examples whose ground head is entailed by ``clause`` over ``theory``.

    ``theory`` may be a prebuilt :class:`Model` (reused across calls) or a
    background theory, in which case its model is deduced first. The result
    keeps the input order.
    """
    examples = list(examples)
    for e in examples:
        if e.predicate != clause.head.predicate or e.arity != clause.head.arity:
            raise ValueError(f"example {e} does not match clause head {clause.head}")
    if isinstance(theory, BackgroundTheory):
        model = build_model(theory, {t for e in examples for t in e.args})
    else:
        model = theory
    if not clause.body:
        return [e for e in examples if _unify(clause.head, e.args, {}) is not None]
    universe: list[str] | None = None
    if any(lit.negated for lit in clause.body):
        universe = sorted(model.constants | {t for e in examples for t in e.args})
    out = []
    for e in examples:
        theta = _unify(clause.head, e.args, {})
        if theta is None:
            continue
        if next(_solutions(clause.body, theta, model, universe or []), None) is not None:
            out.append(e)
    return out


# ---------------------------------------------------------------------------
# Generality and refinement


def _match_atom(general: Atom, specific: Atom, theta: dict[str, str]) -> dict[str, str] | None:
    if general.predicate != specific.predicate or general.arity != specific.arity:
        return None
    return _unify(general, specific.args, theta)


def theta_subsumes(c: Clause, d: Clause) -> tuple[bool, dict[str, str]]:
    """Whether ``c`` θ-subsumes ``d``, with a witnessing substitution.

    Variables of ``d`` are treated as constants. Negated literals only match
    negated literals.
    """
    theta = _match_atom(c.head, d.head, {})
    if theta is None:
        return False, {}
    body = sorted(c.body, key=lambda lit: -len(lit.atom.args))

    def search(i: int, theta: dict[str, str]) -> dict[str, str] | None:
        if i == len(body):
            return theta
        lit = body[i]
        for other in d.body:
            if other.negated != lit.negated:
                continue
            t2 = _match_atom(lit.atom, other.atom, theta)
            if t2 is not None:
                found = search(i + 1, t2)
                if found is not None:
                    return found
        return None

    result = search(0, theta)
    if result is None:
        return False, {}
    return True, dict(result)


def _fresh_variable(used: Iterable[str]) -> str:
    used = set(used)
    for name in itertools.chain(("Y", "Z", "W"), (f"V{i}" for i in itertools.count())):
        if name not in used:
            return name
    raise AssertionError("unreachable")


def refine_candidates(
    clause: Clause,
    language: Mapping[str, int] | Iterable[tuple[str, int]],
    mode: str = "positive",
) -> list[Clause]:
    """One-literal specializations of ``clause``.

    Every new literal shares at least one variable with the clause and
    introduces at most one fresh variable. Candidates equivalent to the input
    under θ-subsumption are dropped. Output is ordered by predicate name then
    binding pattern; in ``"negation"`` mode the negated twins come first as a
    block, followed by the positive candidates.
    """
    if mode not in ("positive", "negation"):
        raise ValueError(f"mode must be 'positive' or 'negation', got {mode!r}")
    items = language.items() if isinstance(language, Mapping) else language
    existing = clause.variables()
    fresh = _fresh_variable(existing)
    pool = existing + [fresh]
    positive: list[Clause] = []
    negated: list[Clause] = []
    for name, arity in sorted(set(items)):
        if arity == 0:
            patterns: Iterable[tuple[str, ...]] = [()]
        else:
            patterns = itertools.product(pool, repeat=arity)
        for args in patterns:
            if arity and not any(a != fresh for a in args):
                continue
            atom = Atom(name, tuple(args))
            cand = clause.add_literal(Literal(atom))
            if not theta_subsumes(cand, clause)[0]:
                positive.append(cand)
            if mode == "negation":
                twin = clause.add_literal(Literal(atom, True))
                if not theta_subsumes(twin, clause)[0]:
                    negated.append(twin)
    return negated + positive


def render_asp(hypothesis: Hypothesis) -> str:
    """One clause per line, defaults first."""
    return "".join(f"{c}\n" for c in hypothesis.clauses)
