"""Titanic passenger data for the Bayesian logistic regression example.

The loader expects the usual ``train.csv`` layout (columns ``Survived``,
``Pclass``, ``Sex``, ``Age``, ``SibSp``, ``Parch``, ``Fare``, ``Embarked``;
other columns are ignored).  Rows missing any of those values are dropped,
which leaves 712 of the 891 passengers in the standard file.

Design matrix, ``p = 10``::

    intercept, Pclass=2, Pclass=3, Sex=male, Age, SibSp, Parch, Fare,
    Embarked=Q, Embarked=S

The data file is not shipped; ``scripts/fetch_titanic.py`` downloads it, or
writes a synthetic stand-in with the same schema.
"""

import csv
from pathlib import Path

import numpy as np

from .targets import Logistic

COLUMNS = ("Survived", "Pclass", "Sex", "Age", "SibSp", "Parch", "Fare", "Embarked")
DESIGN_NAMES = (
    "intercept", "pclass2", "pclass3", "male", "age", "sibsp", "parch", "fare", "embarkedQ", "embarkedS",
)


class DatasetError(ValueError):
    pass


def load_titanic(path):
    """Read the CSV and return ``(X, y)`` after listwise deletion."""
    path = Path(path)
    if not path.is_file():
        raise DatasetError(f"titanic dataset not found at {path}")
    with path.open(encoding="utf-8", newline="") as fh:
        reader = csv.DictReader(fh)
        missing = [c for c in COLUMNS if c not in (reader.fieldnames or ())]
        if missing:
            raise DatasetError(f"{path}: missing columns {', '.join(missing)}")
        rows = [r for r in reader if all((r[c] or "").strip() for c in COLUMNS)]
    X = np.empty((len(rows), len(DESIGN_NAMES)))
    y = np.empty(len(rows))
    for i, r in enumerate(rows):
        try:
            pclass = int(float(r["Pclass"]))
            emb = r["Embarked"].strip()
            X[i] = (
                1.0,
                pclass == 2,
                pclass == 3,
                r["Sex"].strip().lower() == "male",
                float(r["Age"]),
                float(r["SibSp"]),
                float(r["Parch"]),
                float(r["Fare"]),
                emb == "Q",
                emb == "S",
            )
            y[i] = float(r["Survived"])
        except ValueError as exc:
            raise DatasetError(f"{path}: bad value in data row {i + 1}: {exc}") from None
    return X, y


def titanic_target(path, prior_var=100.0):
    X, y = load_titanic(path)
    return Logistic(X, y, prior_var=prior_var, names=DESIGN_NAMES)


def logistic_setup(target, m, scale=1.0):
    """Starting values and proposal covariance for random-walk sampling.

    Starts are spread evenly from -3 to +3 standard errors around the
    maximum likelihood estimate, one offset per chain, using the standard
    errors from the inverse Fisher information.  The proposal covariance is
    ``scale * 2.38^2 / p`` times the posterior-mode covariance.
    """
    mle, mle_cov = target.mode(prior=False)
    offsets = np.linspace(-3.0, 3.0, m) if m > 1 else np.zeros(1)
    starts = mle + offsets[:, None] * np.sqrt(np.diag(mle_cov))
    _, post_cov = target.mode(prior=True)
    prop = scale * 2.38**2 / target.p * post_cov
    return starts, prop


def write_synthetic_titanic(path, n=891, seed=1912):
    """Write a passenger file with the real schema and plausible marginals.

    177 of every 891 ages are left blank and two embarkation ports are
    missing (712 complete rows at the default size), so the loader's listwise deletion is exercised as with the real
    file.  Survival follows a logistic model in the encoded covariates.
    """
    rng = np.random.Generator(np.random.Philox(np.random.SeedSequence([int(seed)])))
    pclass = rng.choice([1, 2, 3], size=n, p=[0.24, 0.21, 0.55])
    male = rng.random(n) < 0.65
    age = np.clip(rng.normal(30 - 4 * (pclass - 2), 13, size=n), 0.42, 80).round(1)
    sibsp = rng.poisson(0.5, size=n)
    parch = rng.poisson(0.4, size=n)
    fare = np.round(np.exp(rng.normal(4.3 - 0.8 * (pclass - 1), 0.6, size=n)), 4)
    emb = rng.choice(["C", "Q", "S"], size=n, p=[0.19, 0.09, 0.72])
    eta = 3.5 - 1.0 * (pclass == 2) - 2.2 * (pclass == 3) - 2.6 * male - 0.04 * age - 0.35 * sibsp
    eta += -0.05 * parch + 0.002 * fare - 0.1 * (emb == "Q") - 0.4 * (emb == "S")
    surv = (rng.random(n) < 1.0 / (1.0 + np.exp(-eta))).astype(int)
    no_age = np.zeros(n, dtype=bool)
    no_age[rng.choice(n, size=round(n * 177 / 891), replace=False)] = True
    no_emb = set(rng.choice(np.flatnonzero(~no_age), size=2, replace=False).tolist())
    with Path(path).open("w", encoding="utf-8", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["PassengerId", *COLUMNS])
        for i in range(n):
            w.writerow([
                i + 1,
                surv[i],
                pclass[i],
                "male" if male[i] else "female",
                "" if no_age[i] else f"{age[i]:g}",
                sibsp[i],
                parch[i],
                f"{fare[i]:.4f}",
                "" if i in no_emb else emb[i],
            ])
    return path

