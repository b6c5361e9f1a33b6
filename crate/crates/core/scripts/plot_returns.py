"""Evaluated return per episode, mean and standard deviation over runs.

One panel per task, one curve per strategy. Reads returns_smoothed.csv
(or the file given as the first argument) and writes returns.png.
"""
import csv
import sys
from collections import defaultdict
from pathlib import Path

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt
import numpy as np

here = Path(__file__).resolve().parent
src = Path(sys.argv[1]) if len(sys.argv) > 1 else here / "returns_smoothed.csv"

curves = defaultdict(lambda: defaultdict(dict))  # task -> strategy -> run -> [values]
with open(src, newline="") as f:
    for row in csv.DictReader(f):
        per_run = curves[int(row["task"])][row["strategy"]]
        per_run.setdefault(int(row["run"]), []).append(float(row["avg_return"]))

tasks = sorted(curves)
fig, axes = plt.subplots(1, len(tasks), figsize=(4 * len(tasks), 3.5), squeeze=False, sharey=True)
for ax, task in zip(axes[0], tasks):
    for strategy, runs in sorted(curves[task].items()):
        n = min(len(v) for v in runs.values())
        data = np.array([v[:n] for v in runs.values()])
        mean, std = data.mean(axis=0), data.std(axis=0)
        x = np.arange(1, n + 1)
        ax.plot(x, mean, label=strategy.replace("_", " "))
        ax.fill_between(x, mean - std, mean + std, alpha=0.2)
    ax.set_title(f"task {task}")
    ax.set_xlabel("episode")
axes[0][0].set_ylabel("average return")
axes[0][-1].legend()
fig.tight_layout()
fig.savefig(here / "returns.png", dpi=150)
