import warnings
from pathlib import Path

import pytest
from hypothesis import HealthCheck, settings

from foldlearn.logic import parse_atom, parse_program

settings.register_profile(
    "default", deadline=None, max_examples=60, suppress_health_check=[HealthCheck.too_slow]
)
settings.load_profile("default")

DATA = Path(__file__).resolve().parents[1] / "src" / "foldlearn" / "data"


def read_atoms(path):
    return [parse_atom(line.strip().rstrip(".")) for line in Path(path).read_text().splitlines() if line.strip()]


@pytest.fixture
def fly():
    theory = parse_program((DATA / "fly.bk").read_text())
    return theory, read_atoms(DATA / "fly.pos"), read_atoms(DATA / "fly.neg")


@pytest.fixture(autouse=True)
def _quiet_convergence():
    with warnings.catch_warnings():
        warnings.simplefilter("default")
        yield


def write_planted_csv(path, n=120, seed=0, **kw):
    """Planted task as a CSV with an id column, one numeric column and y/n cells."""
    import csv

    import numpy as np

    from foldlearn.synthetic import make_planted

    task = make_planted(n, seed=seed, **kw)
    names = [c.name for c in task.schema.columns]
    rng = np.random.default_rng(seed)
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["id", *names, "age", "label"])
        for s in task.samples:
            cells = ["y" if s.values[c] == "1" else "n" for c in names]
            w.writerow([s.id, *cells, f"{rng.uniform(18, 90):.1f}", "yes" if s.label else "no"])
    return task


@pytest.fixture
def planted_csv(tmp_path):
    path = tmp_path / "planted.csv"
    write_planted_csv(path)
    return path


ACCEPTANCE: list[str] = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE:
        terminalreporter.write_sep("=", "acceptance criteria")
        for line in sorted(ACCEPTANCE, key=lambda s: int(s.split()[1].rstrip(":"))):
            terminalreporter.write_line(line)
