import csv
import time

import numpy as np
import pytest

from divjudge.harness import ExperimentConfig, run

ADULT_COLUMNS = [
    "age", "workclass", "fnlwgt", "education", "education-num", "marital-status", "occupation",
    "relationship", "race", "sex", "capital-gain", "capital-loss", "hours-per-week", "native-country",
]
WORKCLASS = ["Private", "Self-emp-not-inc", "Local-gov", "State-gov", "Federal-gov"]
EDUCATION = [("HS-grad", 9), ("Some-college", 10), ("Bachelors", 13), ("Masters", 14), ("11th", 7), ("Doctorate", 16)]
MARITAL = ["Married-civ-spouse", "Never-married", "Divorced", "Separated", "Widowed"]
OCCUPATION = ["Prof-specialty", "Craft-repair", "Exec-managerial", "Adm-clerical", "Sales", "Other-service"]
RELATIONSHIP = ["Husband", "Not-in-family", "Own-child", "Unmarried", "Wife"]
RACE = ["White", "Black", "Asian-Pac-Islander", "Other"]
COUNTRY = ["United-States", "Mexico", "Philippines", "Germany", "India"]


def adult_like_rows(n: int, seed: int, shuffle_columns: bool = False):
    """Adult-format rows with correlated features and '?' missing tokens.

    ``shuffle_columns`` permutes each column independently, keeping every
    marginal but destroying the joint structure.
    """
    rng = np.random.default_rng(seed)
    age = np.clip(rng.normal(38, 13, n), 17, 90).astype(int)
    edu = rng.choice(len(EDUCATION), n, p=[0.32, 0.22, 0.17, 0.06, 0.15, 0.08])
    married = (rng.random(n) < 0.2 + 0.01 * (age - 17).clip(0, 40)).astype(int)
    edu_num = np.array([EDUCATION[e][1] for e in edu])
    hours = np.clip(rng.normal(30 + 0.8 * edu_num + 4 * married, 10), 1, 99)
    sex = np.where(rng.random(n) < 0.67, "Male", "Female")
    rows = []
    for i in range(n):
        gain = int(rng.exponential(3000)) if rng.random() < 0.08 + 0.02 * edu[i] else 0
        loss = int(rng.exponential(800)) if rng.random() < 0.05 else 0
        wc = "?" if rng.random() < 0.05 else WORKCLASS[rng.choice(5, p=[0.7, 0.1, 0.08, 0.07, 0.05])]
        occ = "?" if wc == "?" else OCCUPATION[(edu[i] + rng.integers(0, 3)) % len(OCCUPATION)]
        country = "?" if rng.random() < 0.02 else COUNTRY[rng.choice(5, p=[0.9, 0.04, 0.02, 0.02, 0.02])]
        rel = RELATIONSHIP[0 if married[i] and sex[i] == "Male" else 4 if married[i] else rng.integers(1, 4)]
        rows.append([
            str(age[i]), wc, str(abs(int(rng.normal(190000, 100000)))),
            EDUCATION[edu[i]][0], str(EDUCATION[edu[i]][1]),
            MARITAL[0] if married[i] else MARITAL[rng.integers(1, 5)], occ, rel,
            RACE[rng.choice(4, p=[0.85, 0.09, 0.04, 0.02])], sex[i], str(gain), str(loss),
            str(int(hours[i])), country,
        ])
    if shuffle_columns:
        cols = list(zip(*rows))
        cols = [list(np.array(c, dtype=object)[rng.permutation(n)]) for c in cols]
        rows = [list(r) for r in zip(*cols)]
    return rows


def write_csv(path, header, rows):
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh)
        w.writerow(header)
        w.writerows(rows)
    return path


@pytest.fixture(scope="session")
def adult_csv(tmp_path_factory):
    path = tmp_path_factory.mktemp("adult") / "adult.csv"
    return write_csv(path, ADULT_COLUMNS, adult_like_rows(3000, seed=7))


@pytest.fixture(scope="session")
def adult_halves(tmp_path_factory, adult_csv):
    """The Adult-format file split 50/50 into two CSVs."""
    d = tmp_path_factory.mktemp("halves")
    with open(adult_csv, newline="", encoding="utf-8") as fh:
        rows = list(csv.reader(fh))
    header, body = rows[0], rows[1:]
    half = len(body) // 2
    return (write_csv(d / "a.csv", header, body[:half]), write_csv(d / "b.csv", header, body[half:]))


def _timed(cfg):
    t0 = time.perf_counter()
    result = run(cfg)
    return result, time.perf_counter() - t0


# full-size experiment runs shared by the acceptance and experiment tests
@pytest.fixture(scope="session")
def exp1_run():
    return _timed(ExperimentConfig("exp1", M_grid=[20, 2000], L_grid=[20, 2000]))


@pytest.fixture(scope="session")
def exp2_run():
    return _timed(ExperimentConfig("exp2", M_grid=[20, 2000], L_grid=[20, 2000]))[0]


@pytest.fixture(scope="session")
def exp3_run():
    return _timed(ExperimentConfig("exp3", N_grid=[10, 150]))[0]


@pytest.fixture(scope="session")
def sweep_run():
    return _timed(ExperimentConfig("sweep"))[0]


# acceptance verdicts, filled by tests/test_acceptance.py::check
VERDICTS: list = []


def pytest_terminal_summary(terminalreporter):
    if not VERDICTS:
        return
    terminalreporter.section("acceptance criteria")
    for line in VERDICTS:
        terminalreporter.write_line(line)
