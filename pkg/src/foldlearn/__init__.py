"""Learning default theories with exceptions from relational and tabular data.

The learners (FOIL, FOLD, LIME-FOLD) produce stratified normal logic
programs; :mod:`foldlearn.estimators` wraps them as scikit-learn classifiers.
"""

from .dataset import FeatureSchema, Sample, load_csv, make_examples, make_predicates, propositionalize
from .estimators import FoilClassifier, FoldClassifier, LimeFoldClassifier, PredicateEncoder
from .evaluation import Metrics, cross_validate, evaluate_hypothesis
from .exceptions import (
    ClassifierError,
    ConsistencyError,
    ConvergenceWarning,
    FoldLearnError,
    ParseError,
    SchemaError,
    StratificationError,
)
from .foil import FoilConfig, foil_learn
from .fold import FoldConfig, fold_learn
from .limefold import RelevantFeatureMap, lime_fold_learn, transform_dataset
from .logic import (
    Atom,
    BackgroundTheory,
    Clause,
    Hypothesis,
    Literal,
    check_stratified,
    deduce,
    parse_program,
    render_asp,
)

__version__ = "0.1.0"

__all__ = [
    "Atom",
    "BackgroundTheory",
    "ClassifierError",
    "Clause",
    "ConsistencyError",
    "ConvergenceWarning",
    "FeatureSchema",
    "FoilClassifier",
    "FoilConfig",
    "FoldClassifier",
    "FoldConfig",
    "FoldLearnError",
    "Hypothesis",
    "LimeFoldClassifier",
    "Literal",
    "Metrics",
    "ParseError",
    "PredicateEncoder",
    "RelevantFeatureMap",
    "Sample",
    "SchemaError",
    "StratificationError",
    "check_stratified",
    "cross_validate",
    "deduce",
    "evaluate_hypothesis",
    "foil_learn",
    "fold_learn",
    "lime_fold_learn",
    "load_csv",
    "make_examples",
    "make_predicates",
    "parse_program",
    "propositionalize",
    "render_asp",
    "transform_dataset",
]
