"""Command-line entry point: ``foldlearn <command> ...``.

Exit status is 0 on success, 1 on a usage error and 2 when the input data
or a program is rejected. ``FOLDLEARN_SEED`` and ``FOLDLEARN_THREADS`` fill
in ``--seed`` and ``--threads`` when those flags are not given.
"""

from __future__ import annotations

import argparse
import os
import pickle
import sys
import warnings
from pathlib import Path


from .dataset import (
    discretize_schema,
    format_schema,
    load_csv,
    make_examples,
    make_predicates,
    propositionalize,
    read_schema,
    sanitize,
)
from .evaluation import cross_validate, evaluate_hypothesis
from .exceptions import FoldLearnError, StratificationError
from .explainer import (
    PerturbationConfig,
    PerturbationSpace,
    TreeEnsembleConfig,
    explain_instance,
    train_builtin_classifier,
)
from .foil import FoilConfig, foil_learn
from .fold import FoldConfig, fold_learn
from .limefold import RelevantFeatureMap, lime_fold_learn, sample_rng, transform_dataset
from .logic import Hypothesis, check_stratified, parse_atom, parse_clauses, parse_program, render_asp

MODEL_FORMAT = "foldlearn-model/1"


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(f"{self.prog}: {message}\n{self.format_usage()}")


# ---------------------------------------------------------------------------
# Input helpers


def _seed(args, required: bool) -> int | None:
    if args.seed is not None:
        return args.seed
    env = os.environ.get("FOLDLEARN_SEED")
    if env not in (None, ""):
        try:
            return int(env)
        except ValueError:
            raise UsageError(f"FOLDLEARN_SEED must be an integer, got {env!r}") from None
    if required:
        raise UsageError(f"{args.command}: --seed is required (or set FOLDLEARN_SEED)")
    return None


def _threads(args) -> int:
    if getattr(args, "threads", None) is not None:
        n = args.threads
    else:
        env = os.environ.get("FOLDLEARN_THREADS", "1") or "1"
        try:
            n = int(env)
        except ValueError:
            raise UsageError(f"FOLDLEARN_THREADS must be an integer, got {env!r}") from None
    if n < 1:
        raise UsageError("thread count must be >= 1")
    return n


def _read_atoms(path: str) -> list:
    atoms = []
    for lineno, raw in enumerate(Path(path).read_text(encoding="utf-8").splitlines(), start=1):
        line = raw.split("%", 1)[0].strip().rstrip(".").strip()
        if not line:
            continue
        try:
            atoms.append(parse_atom(line))
        except FoldLearnError as exc:
            raise type(exc)(f"{path}:{lineno}: {exc}") from None
        if not atoms[-1].is_ground():
            raise ValueError(f"{path}:{lineno}: example {atoms[-1]} is not ground")
    return atoms


def _write(text: str, out: str | None) -> None:
    if out:
        with open(out, "w", encoding="utf-8", newline="\n") as fh:
            fh.write(text)
    else:
        sys.stdout.write(text)
        sys.stdout.flush()


def _load_model(path: str) -> dict:
    with open(path, "rb") as fh:
        try:
            model = pickle.load(fh)
        except (pickle.UnpicklingError, EOFError, AttributeError) as exc:
            raise ValueError(f"{path}: not a model file ({exc})") from None
    if not isinstance(model, dict) or model.get("format") != MODEL_FORMAT:
        raise ValueError(f"{path}: not a model file")
    return model


def _categorical(args) -> tuple[str, ...]:
    return tuple(c for c in (args.categorical or "").split(",") if c)


def _tabular(args):
    """Schema and samples from ``--csv`` (with optional ``--schema``) or a model file."""
    if getattr(args, "csv", None):
        if getattr(args, "schema", None):
            schema, samples = load_csv(args.csv, read_schema(args.schema))
        else:
            schema, samples = load_csv(
                args.csv,
                label=args.label,
                id_column=args.id_column,
                positive=args.positive,
                categorical=_categorical(args),
            )
        schema = discretize_schema(schema, samples, args.bins, args.supervised)
        return schema, samples
    if getattr(args, "model", None):
        model = _load_model(args.model)
        return model["schema"], model["samples"]
    raise UsageError(f"{args.command}: give --csv (optionally with --schema) or --model")


def _problem(args):
    """Target, background theory and examples from atom files or a table."""
    if args.bk or args.pos or args.neg:
        if not (args.bk and args.pos and args.neg):
            raise UsageError(f"{args.command}: --bk, --pos and --neg go together")
        theory = parse_program(Path(args.bk).read_text(encoding="utf-8"))
        pos, neg = _read_atoms(args.pos), _read_atoms(args.neg)
        preds = {e.predicate for e in pos + neg}
        target = args.target or (preds.pop() if len(preds) == 1 else None)
        if target is None:
            raise ValueError("examples mix several predicates; pass --target")
        return target, theory, pos, neg, None
    schema, samples = _tabular(args)
    target = args.target or sanitize(schema.label_column)
    theory = make_predicates(propositionalize(schema), samples)
    pos, neg = make_examples(samples, target)
    return target, theory, pos, neg, (schema, samples)


def _fold_config(args, threads: int) -> FoldConfig:
    return FoldConfig(args.max_rule_length, args.mdl, args.exception_depth, threads)


def _relevant_map(args, table) -> RelevantFeatureMap:
    if args.rmap:
        return RelevantFeatureMap.load(args.rmap)
    if not args.model:
        raise UsageError("learn --algo lime-fold needs --rmap or --model")
    seed = _seed(args, True)
    model = _load_model(args.model)
    schema, samples = table if table else (model["schema"], model["samples"])
    space = PerturbationSpace(model["schema"], model["bounds"])
    config = PerturbationConfig(args.n_samples, args.kernel_width, seed, args.k)
    return transform_dataset(model["classifier"], samples, space, config, _threads(args))


def _learner(args, threads: int, rmap: RelevantFeatureMap | None = None):
    if args.algo == "foil":
        config = FoilConfig(args.max_rule_length, args.max_clauses, threads)
        return lambda target, theory, pos, neg: foil_learn(target, theory, pos, neg, config)
    if args.algo == "fold":
        config = _fold_config(args, threads)
        return lambda target, theory, pos, neg: fold_learn(target, theory, pos, neg, config)
    config = _fold_config(args, threads)
    return lambda target, theory, pos, neg: lime_fold_learn(target, theory, pos, neg, rmap, config)


def _find_sample(samples, key: str):
    for s in samples:
        if s.id == key:
            return s
    try:
        i = int(key)
    except ValueError:
        raise ValueError(f"no sample with id {key!r}") from None
    if not 0 <= i < len(samples):
        raise ValueError(f"sample index {i} out of range (0..{len(samples) - 1})")
    return samples[i]


# ---------------------------------------------------------------------------
# Commands


def cmd_ingest(args) -> None:
    schema, samples = _tabular(args)
    target = args.target or sanitize(schema.label_column)
    theory = make_predicates(propositionalize(schema), samples)
    pos, neg = make_examples(samples, target)
    _write(format_schema(schema), args.schema_out)
    if args.bk_out:
        _write("".join(f"{a}.\n" for a in sorted(theory.facts, key=str)), args.bk_out)
    if args.pos_out:
        _write("".join(f"{a}.\n" for a in pos), args.pos_out)
    if args.neg_out:
        _write("".join(f"{a}.\n" for a in neg), args.neg_out)


def cmd_train_model(args) -> None:
    seed = _seed(args, True)
    schema, samples = _tabular(args)
    config = TreeEnsembleConfig(args.n_estimators, args.max_depth, seed)
    with warnings.catch_warnings():
        warnings.simplefilter("always")
        handle = train_builtin_classifier(samples, schema, config)
    space = PerturbationSpace.from_samples(schema, samples)
    model = {
        "format": MODEL_FORMAT,
        "schema": schema,
        "classifier": handle,
        "bounds": dict(sorted(space.bounds.items())),
        "samples": samples,
        "seed": seed,
    }
    with open(args.out, "wb") as fh:
        pickle.dump(model, fh, protocol=4)


def cmd_explain(args) -> None:
    seed = _seed(args, True)
    model = _load_model(args.model)
    samples = load_csv(args.csv, model["schema"])[1] if args.csv else model["samples"]
    x = _find_sample(samples, args.sample)
    space = PerturbationSpace(model["schema"], model["bounds"])
    config = PerturbationConfig(args.n_samples, args.kernel_width, seed, args.k)
    expl = explain_instance(model["classifier"], x, space, config, sample_rng(seed, x, space))
    _write(expl.to_text(with_intercept=args.intercept), args.out)


def cmd_transform(args) -> None:
    seed = _seed(args, True)
    model = _load_model(args.model)
    samples = load_csv(args.csv, model["schema"])[1] if args.csv else model["samples"]
    space = PerturbationSpace(model["schema"], model["bounds"])
    config = PerturbationConfig(args.n_samples, args.kernel_width, seed, args.k)
    rmap = transform_dataset(model["classifier"], samples, space, config, _threads(args))
    _write(rmap.to_text(), args.out)


def cmd_learn(args) -> None:
    threads = _threads(args)
    target, theory, pos, neg, table = _problem(args)
    rmap = _relevant_map(args, table) if args.algo == "lime-fold" else None
    h = _learner(args, threads, rmap)(target, theory, pos, neg)
    _write(render_asp(h), args.out)


def cmd_eval(args) -> None:
    if args.cv:
        _cross_validate(args)
        return
    if not args.program:
        raise UsageError("eval: give --program, or --cv with --algo")
    target, theory, pos, neg, _ = _problem(args)
    h = _read_program(args.program, target)
    _write(evaluate_hypothesis(h, theory, pos, neg).to_text(), args.out)


def _cross_validate(args) -> None:
    seed = _seed(args, args.algo == "lime-fold")
    seed = 0 if seed is None else seed
    threads = _threads(args)
    target, theory, pos, neg, table = _problem(args)
    if args.algo != "lime-fold":
        learner = _learner(args, threads)
        result = cross_validate(lambda t, p, n: learner(target, t, p, n), theory, pos, neg, args.cv, seed)
        _write(result.to_text(), args.out)
        return
    if table is None:
        raise UsageError("eval --cv --algo lime-fold needs tabular input (--csv)")
    schema, samples = table
    by_id = {s.id: s for s in samples}
    config = _fold_config(args, threads)
    pconfig = PerturbationConfig(args.n_samples, args.kernel_width, seed, args.k)

    def learner(t, p, n):
        train = [by_id[e.args[0]] for e in p + n]
        f = train_builtin_classifier(train, schema, TreeEnsembleConfig(args.n_estimators, args.max_depth, seed))
        space = PerturbationSpace.from_samples(schema, train)
        rmap = transform_dataset(f, train, space, pconfig, threads)
        return lime_fold_learn(target, t, p, n, rmap, config)

    _write(cross_validate(learner, theory, pos, neg, args.cv, seed).to_text(), args.out)


def _read_program(path: str, target: str | None = None) -> Hypothesis:
    clauses = parse_clauses(Path(path).read_text(encoding="utf-8"))
    strat = check_stratified(clauses)
    if not strat:
        raise StratificationError(f"{path}: program rejected; {strat.describe()}", strat.cycle)
    if target is None:
        return Hypothesis(tuple(clauses))
    return Hypothesis.from_clauses(clauses, target)


def cmd_render(args) -> None:
    h = _read_program(args.program, args.target)
    _write(render_asp(h), args.out)


# ---------------------------------------------------------------------------
# Argument parsing


def _add_table_args(p, csv_required: bool = False) -> None:
    p.add_argument("--csv", required=csv_required, help="tabular data file")
    p.add_argument("--schema", help="schema sidecar written by ingest")
    p.add_argument("--label", default="label", help="label column when inferring the schema")
    p.add_argument("--id-column", help="column holding sample ids")
    p.add_argument("--positive", help="label value of the positive class")
    p.add_argument("--categorical", help="comma-separated columns to treat as categorical")
    p.add_argument("--bins", type=int, default=4, help="bins per numeric column (default 4)")
    p.add_argument("--supervised", action="store_true", help="entropy-based binning")


def _add_relational_args(p) -> None:
    p.add_argument("--bk", help="background program")
    p.add_argument("--pos", help="positive examples, one ground atom per line")
    p.add_argument("--neg", help="negative examples, one ground atom per line")
    p.add_argument("--target", help="target predicate (default: from the examples or label column)")


def _add_lime_args(p) -> None:
    p.add_argument("--n-samples", type=int, default=1000, help="perturbations per explanation")
    p.add_argument("--k", type=int, default=3, help="features kept per explanation")
    p.add_argument("--kernel-width", type=float, default=0.75)


def _add_learner_args(p) -> None:
    p.add_argument("--algo", choices=("foil", "fold", "lime-fold"), default="fold")
    p.add_argument("--max-rule-length", type=int, default=6)
    p.add_argument("--max-clauses", type=int, default=64, help="FOIL clause cap")
    p.add_argument("--exception-depth", type=int, default=3)
    p.add_argument("--mdl", action="store_true", help="stop refining when enumeration is cheaper")
    p.add_argument("--rmap", help="relevant-feature map written by transform")
    p.add_argument("--model", help="model file; explains the samples when no --rmap is given")
    p.add_argument("--n-estimators", type=int, default=25)
    p.add_argument("--max-depth", type=int, default=4)


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="foldlearn", description="Learn default theories with exceptions.")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    p = sub.add_parser("ingest", help="CSV to schema, background facts and examples")
    _add_table_args(p, csv_required=True)
    p.add_argument("--target")
    p.add_argument("--schema-out", help="schema file (default stdout)")
    p.add_argument("--bk-out")
    p.add_argument("--pos-out")
    p.add_argument("--neg-out")
    p.set_defaults(func=cmd_ingest)

    p = sub.add_parser("train-model", help="train the built-in tree ensemble")
    _add_table_args(p, csv_required=True)
    p.add_argument("--seed", type=int)
    p.add_argument("--n-estimators", type=int, default=25)
    p.add_argument("--max-depth", type=int, default=4)
    p.add_argument("--out", required=True, help="model file")
    p.set_defaults(func=cmd_train_model)

    p = sub.add_parser("explain", help="local explanation of one sample")
    p.add_argument("--model", required=True)
    p.add_argument("--csv", help="explain a row of this file instead of the training data")
    p.add_argument("--sample", required=True, help="sample id or 0-based row index")
    p.add_argument("--seed", type=int)
    p.add_argument("--intercept", action="store_true", help="append the intercept line")
    p.add_argument("--out")
    _add_lime_args(p)
    p.set_defaults(func=cmd_explain)

    p = sub.add_parser("transform", help="relevant-feature map for every sample")
    p.add_argument("--model", required=True)
    p.add_argument("--csv")
    p.add_argument("--seed", type=int)
    p.add_argument("--threads", type=int)
    p.add_argument("--out")
    _add_lime_args(p)
    p.set_defaults(func=cmd_transform)

    for name, func, text in (
        ("learn", cmd_learn, "learn a program"),
        ("eval", cmd_eval, "score a program or cross-validate a learner"),
    ):
        p = sub.add_parser(name, help=text)
        _add_relational_args(p)
        _add_table_args(p)
        _add_learner_args(p)
        _add_lime_args(p)
        p.add_argument("--seed", type=int)
        p.add_argument("--threads", type=int)
        p.add_argument("--out")
        if name == "eval":
            p.add_argument("--program", help="program to score")
            p.add_argument("--cv", type=int, help="number of cross-validation folds")
        p.set_defaults(func=func)

    p = sub.add_parser("render", help="check and pretty-print a program")
    p.add_argument("--program", required=True)
    p.add_argument("--target", help="list this predicate's clauses first")
    p.add_argument("--out")
    p.set_defaults(func=cmd_render)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
        args.func(args)
    except UsageError as exc:
        sys.stderr.write(f"{exc}\n")
        return 1
    except SystemExit as exc:  # --help
        return int(exc.code or 0)
    except (FoldLearnError, ValueError, KeyError, OSError) as exc:
        sys.stderr.write(f"error: {exc}\n")
        return 2
    return 0


if __name__ == "__main__":
    sys.exit(main())
