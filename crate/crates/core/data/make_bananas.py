"""Regenerate bananas.csv: two interleaved banana-shaped classes, 5300 rows.

Features are standardised to zero mean and unit variance over the whole file.
Rows are emitted in a fixed random order (seed 2024).
"""
import numpy as np

rng = np.random.default_rng(2024)
n_pos, n_neg = 2376, 2924

def banana(n, flip):
    t = rng.uniform(-np.pi / 2, np.pi / 2 + 0.6, n)
    r = 3.0 + rng.normal(0.0, 0.55, n)
    x = r * np.sin(t)
    y = r * np.cos(t) - 1.5
    if flip:
        x, y = -x + 1.2, -y + 0.2
    return np.column_stack([x, y])

X = np.vstack([banana(n_pos, False), banana(n_neg, True)])
y = np.concatenate([np.ones(n_pos, dtype=int), np.zeros(n_neg, dtype=int)])
X = (X - X.mean(axis=0)) / X.std(axis=0)
order = rng.permutation(len(y))
X, y = X[order], y[order]

with open("bananas.csv", "w") as f:
    f.write("x1,x2,y\n")
    for (a, b), label in zip(X, y):
        f.write(f"{a:.6f},{b:.6f},{label}\n")
