import os
from pathlib import Path

import numpy as np
import pytest

from granimpute.data_model import from_matrix

TOY_NAMES = ["net_profit", "total_liabilities", "working_capital", "current_assets",
             "retained_earnings", "ebit", "class"]
NAN = np.nan
# six firms, '?' at row 4 / current assets and at row 6 / total liabilities (1-based)
TOY_VALUES = np.array([
    [1.2, 29.3, 10, 30, 5, 2.0, 0],
    [-0.5, 39.4, 14, 41, 3, 2.5, 0],
    [0.8, 27.1, 9, 28, 7, 1.5, 1],
    [0.3, 55.0, 20, NAN, 2, 3.1, 0],
    [-1.1, 45.7, 16, 47, 6, 1.2, 1],
    [0.9, NAN, 12, 36, 4, 2.2, 0],
])
TL, WC, CA = 1, 2, 3


@pytest.fixture
def toy_table():
    return from_matrix(TOY_VALUES, TOY_NAMES, label_col=6)


def affine_table(n=1000, d=10, seed=0, coefs=(3.0, -2.0, 0.5), intercept=1.0, target=3):
    """Gaussian features with column ``target`` an exact affine map of columns 0..2."""
    rng = np.random.default_rng(seed)
    X = rng.normal(size=(n, d))
    X[:, target] = X[:, :len(coefs)] @ np.array(coefs) + intercept
    return X


@pytest.fixture
def affine_matrix():
    return affine_table()


POLISH_FILES = ["1year.arff", "2year.arff", "3year.arff", "4year.arff", "5year.arff"]


def polish_dir():
    """Directory holding the Polish bankruptcy ARFF files, or None."""
    candidates = [os.environ.get("GRANIMPUTE_POLISH_DIR"),
                  Path(__file__).resolve().parent.parent / "data" / "polish"]
    for c in candidates:
        if c and (Path(c) / POLISH_FILES[0]).is_file():
            return Path(c)
    return None


# one line per acceptance criterion, printed after the run
ACCEPTANCE_LINES: list[str] = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in sorted(ACCEPTANCE_LINES):
            terminalreporter.write_line(line)
