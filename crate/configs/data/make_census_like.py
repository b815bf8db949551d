"""Regenerates census_like.csv: a known linear rule plus 10% label noise."""
import csv
import numpy as np

rng = np.random.default_rng(20240611)
n = 2000
occupations = ["service", "manual", "clerical", "technical", "professional"]
workclasses = ["private", "self_employed", "government"]
marital = ["single", "married"]

with open("census_like.csv", "w", newline="") as f:
    w = csv.writer(f)
    w.writerow(["age", "education_num", "hours_per_week", "occupation", "capital_gain", "workclass", "marital", "label"])
    for _ in range(n):
        age = int(rng.integers(18, 71))
        edu = int(rng.integers(1, 17))
        hours = int(rng.integers(2, 17)) * 5
        occ = int(rng.integers(0, 5))
        gain = int(rng.integers(0, 11))
        wc = int(rng.integers(0, 3))
        mar = int(rng.integers(0, 2))
        z = -9.0 + 0.35 * edu + 0.05 * hours + 0.5 * occ + 0.4 * gain + 0.02 * age + 0.3 * mar + 0.2 * (wc == 2)
        y = int(z > 0)
        if rng.random() < 0.10:
            y = 1 - y
        w.writerow([age, edu, hours, occupations[occ], gain, workclasses[wc], marital[mar], y])
