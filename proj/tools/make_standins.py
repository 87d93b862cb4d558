"""Regenerate the synthetic stand-in data sets under data/.

housing_standin.csv: 506 rows, 13 numeric features and a numeric target
`medv`, shaped like the classic housing-price regression table.
mushroom_standin.csv: categorical features and an edible/poisonous `class`
column, shaped like the mushroom classification table.
"""
import csv
import pathlib

import numpy as np

OUT = pathlib.Path(__file__).resolve().parent.parent / "data"


def housing(rng):
    n = 506
    names = ["crim", "zn", "indus", "chas", "nox", "rm", "age", "dis", "rad",
             "tax", "ptratio", "b", "lstat"]
    crim = rng.lognormal(-0.5, 1.5, n)
    zn = np.where(rng.random(n) < 0.7, 0.0, rng.uniform(10, 100, n))
    indus = rng.uniform(0.5, 28, n)
    chas = (rng.random(n) < 0.07).astype(float)
    nox = 0.35 + 0.01 * indus + rng.normal(0, 0.05, n)
    rm = rng.normal(6.3, 0.7, n)
    age = np.clip(rng.normal(68, 28, n), 3, 100)
    dis = np.clip(12 - 0.08 * age + rng.normal(0, 1.5, n), 1.1, 12)
    rad = rng.choice([1, 2, 3, 4, 5, 6, 7, 8, 24], n).astype(float)
    tax = 190 + 20 * rad + rng.normal(0, 40, n)
    ptratio = rng.uniform(12.6, 22, n)
    b = np.clip(rng.normal(357, 90, n), 0.3, 397)
    lstat = np.clip(30 - 3.2 * (rm - 4) + rng.normal(0, 4, n), 1.7, 38)
    feats = np.column_stack([crim, zn, indus, chas, nox, rm, age, dis, rad, tax,
                             ptratio, b, lstat])
    medv = (22 + 5.0 * (rm - 6.3) - 0.55 * (lstat - 12) - 0.9 * (ptratio - 18)
            - 8 * (nox - 0.55) + 2.5 * chas - 0.1 * crim + rng.normal(0, 3, n))
    medv = np.clip(medv, 5, 50)
    with open(OUT / "housing_standin.csv", "w", newline="") as f:
        w = csv.writer(f)
        w.writerow(names + ["medv"])
        for row, y in zip(feats, medv):
            w.writerow([f"{v:.5g}" for v in row] + [f"{y:.3g}"])


def mushroom(rng):
    n = 2000
    columns = {
        "cap-shape": "bcfksx", "cap-surface": "fgsy", "cap-color": "bcegnpuwy",
        "bruises": "ft", "odor": "acflmnpsy", "gill-size": "bn",
        "gill-color": "bghknopuwy", "stalk-shape": "et", "ring-type": "eflnp",
        "spore-print-color": "bhknortuw", "population": "acnsvy",
        "habitat": "dglmpuw",
    }
    # a hidden score decides the class; odor and spore print dominate
    weights = {c: rng.normal(0, 1, len(v)) for c, v in columns.items()}
    weights["odor"] *= 3
    weights["spore-print-color"] *= 2
    rows = []
    for _ in range(n):
        picks = {c: rng.integers(len(v)) for c, v in columns.items()}
        score = sum(weights[c][k] for c, k in picks.items()) + rng.normal(0, 1)
        label = "p" if score > 0 else "e"
        rows.append([label] + [columns[c][picks[c]] for c in columns])
    with open(OUT / "mushroom_standin.csv", "w", newline="") as f:
        w = csv.writer(f)
        w.writerow(["class"] + list(columns))
        w.writerows(rows)


if __name__ == "__main__":
    OUT.mkdir(exist_ok=True)
    housing(np.random.default_rng(506))
    mushroom(np.random.default_rng(8124))
