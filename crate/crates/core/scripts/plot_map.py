"""Knowledge map: each node coloured by the task it matches best, annotated
with the similarity. Reads som_nodes.csv (written by `somrl replay`) and
writes som_map.png.
"""
import csv
from pathlib import Path

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt
import numpy as np

here = Path(__file__).resolve().parent
with open(here / "som_nodes.csv", newline="") as f:
    nodes = list(csv.DictReader(f))

rows = 1 + max(int(n["row"]) for n in nodes)
cols = 1 + max(int(n["col"]) for n in nodes)
task = np.zeros((rows, cols), dtype=int)
for n in nodes:
    task[int(n["row"]), int(n["col"])] = int(n["best_task"])

fig, ax = plt.subplots(figsize=(0.7 * cols + 2, 0.7 * rows + 1))
im = ax.imshow(task, cmap="tab10", vmin=0.5, vmax=10.5)
for n in nodes:
    ax.text(int(n["col"]), int(n["row"]), f'{float(n["similarity"]):.2f}', ha="center", va="center", fontsize=7)
ax.set_xticks([])
ax.set_yticks([])
fig.colorbar(im, ax=ax, label="best-matching task", ticks=sorted(set(task.ravel())))
fig.tight_layout()
fig.savefig(here / "som_map.png", dpi=150)
