"""Best-source cosine similarity while a task is learned.

Reads similarity_smoothed.csv and plots the mean over runs for the task
given as the first argument (default: the last task). Writes similarity.png.
"""
import csv
import math
import sys
from collections import defaultdict
from pathlib import Path

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt
import numpy as np

here = Path(__file__).resolve().parent

runs = defaultdict(lambda: defaultdict(list))  # task -> run -> [values]
with open(here / "similarity_smoothed.csv", newline="") as f:
    for row in csv.DictReader(f):
        runs[int(row["task"])][int(row["run"])].append(float(row["best_similarity"]))

task = int(sys.argv[1]) if len(sys.argv) > 1 else max(runs)
n = min(len(v) for v in runs[task].values())
data = np.array([v[:n] for v in runs[task].values()])
mean = np.array([np.nanmean(c) if not all(math.isnan(x) for x in c) else np.nan for c in data.T])

fig, ax = plt.subplots(figsize=(5, 3.5))
for v in data:
    ax.plot(np.arange(1, n + 1), v, color="grey", alpha=0.3, linewidth=0.8)
ax.plot(np.arange(1, n + 1), mean, color="C0", label="mean over runs")
ax.set_xlabel("episode")
ax.set_ylabel("best-source similarity")
ax.set_title(f"task {task}")
ax.legend()
fig.tight_layout()
fig.savefig(here / "similarity.png", dpi=150)
