"""Map size against the number of stored tasks, one curve per growth
threshold. Reads scaling.csv and writes scaling.png.
"""
import csv
from collections import defaultdict
from pathlib import Path

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt

here = Path(__file__).resolve().parent
series = defaultdict(list)
with open(here / "scaling.csv", newline="") as f:
    for row in csv.DictReader(f):
        series[float(row["g_t"])].append((int(row["task_count"]), int(row["node_count"])))

fig, (left, right) = plt.subplots(1, 2, figsize=(9, 3.5))
for g_t, points in sorted(series.items()):
    points.sort()
    tasks = [t for t, _ in points]
    nodes = [n for _, n in points]
    left.plot(tasks, nodes, marker="o", label=f"G_T = {g_t}")
    right.plot(tasks, [n / t for t, n in points], marker="o", label=f"G_T = {g_t}")
for ax in (left, right):
    ax.set_xscale("log")
    ax.set_xlabel("tasks stored")
left.set_ylabel("nodes")
right.set_ylabel("nodes per task")
right.set_yscale("log")
left.legend()
fig.tight_layout()
fig.savefig(here / "scaling.png", dpi=150)
