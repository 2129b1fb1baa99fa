"""Writes 200-row synthetic CSVs with the Adult and Law School schemas."""

import csv
import math
import random
from pathlib import Path

HERE = Path(__file__).parent
N = 200


def adult(rng):
    work = ["Private", "Self-emp-not-inc", "Self-emp-inc", "Federal-gov", "Local-gov", "State-gov", "Without-pay"]
    edu = [("HS-grad", 9), ("Some-college", 10), ("Bachelors", 13), ("Masters", 14), ("11th", 7), ("Doctorate", 16)]
    marital = ["Married-civ-spouse", "Never-married", "Divorced", "Separated", "Widowed"]
    occ = ["Tech-support", "Craft-repair", "Sales", "Exec-managerial", "Prof-specialty", "Adm-clerical"]
    rel = ["Husband", "Wife", "Own-child", "Not-in-family", "Unmarried"]
    race = ["White", "Black", "Asian-Pac-Islander", "Amer-Indian-Eskimo", "Other"]
    country = ["United-States", "Mexico", "India", "Germany", "Canada"]
    rows = []
    for _ in range(N):
        male = rng.random() < 0.67
        age = rng.randint(17, 90)
        e, enum = rng.choice(edu)
        hours = rng.randint(1, 99)
        gain = rng.choice([0] * 9 + [rng.randint(1, 99999)])
        z = -4.0 + 0.04 * age + 0.3 * enum + 0.02 * hours + 0.8 * male + (1.5 if gain > 5000 else 0)
        rich = rng.random() < 1 / (1 + math.exp(-z))
        rows.append([
            age,
            rng.choice(work) if rng.random() > 0.05 else "?",
            rng.randint(13492, 1490400),
            e,
            enum,
            rng.choice(marital),
            rng.choice(occ) if rng.random() > 0.05 else "?",
            rng.choice(rel),
            rng.choice(race),
            "Male" if male else "Female",
            gain,
            rng.choice([0] * 15 + [rng.randint(1, 4356)]),
            hours,
            rng.choice(country),
            ">50K" if rich else "<=50K",
        ])
    header = ["age", "workclass", "fnlwgt", "education", "educational-num", "marital-status",
              "occupation", "relationship", "race", "gender", "capital-gain", "capital-loss",
              "hours-per-week", "native-country", "income"]
    return header, rows


def law(rng):
    races = ["White", "Black", "Asian", "Hisp", "Puertorican", "Other"]
    rows = []
    for _ in range(N):
        male = int(rng.random() < 0.56)
        lsat = round(rng.uniform(11, 48), 1)
        ugpa = round(rng.uniform(1.5, 4.0), 1)
        zfygpa = round(rng.uniform(-3.35, 3.48), 2)
        z = -6.0 + 0.18 * lsat + 0.6 * ugpa + 0.5 * zfygpa
        passed = int(rng.random() < 1 / (1 + math.exp(-z)))
        rows.append([
            round(rng.uniform(1, 10)),
            round(rng.uniform(1, 10)),
            lsat,
            ugpa,
            zfygpa,
            round(rng.uniform(-6.44, 4.01), 2),
            rng.choice([1, 2]),
            rng.randint(1, 5),
            male,
            rng.randint(1, 6),
            rng.choice(races),
            passed,
        ])
    header = ["decile1b", "decile3", "lsat", "ugpa", "zfygpa", "zgpa", "fulltime", "fam_inc",
              "male", "tier", "racetxt", "pass_bar"]
    return header, rows


def write(name, table):
    header, rows = table
    with open(HERE / name, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(header)
        w.writerows(rows)


if __name__ == "__main__":
    write("adult_200.csv", adult(random.Random(7)))
    write("law_200.csv", law(random.Random(11)))
