"""Parameter error against EM iteration, one line per seed.

usage: python scripts/plot_em.py out/desk
"""
import sys
from pathlib import Path

import matplotlib.pyplot as plt
import pandas as pd

out = Path(sys.argv[1] if len(sys.argv) > 1 else "out/desk")
it = pd.read_csv(out / "plot-data" / "em_iterations.csv")

fig, ax = plt.subplots(figsize=(4.5, 3.5))
for seed, g in it.groupby("seed"):
    ax.plot(g["iteration"], g["mse_aligned_joint"], label=f"seed {seed}")
ax.set_xlabel("EM iteration")
ax.set_ylabel("MSE (aligned)")
ax.set_yscale("log")
ax.legend(fontsize=7)
fig.tight_layout()
fig.savefig(out / "em_iterations.png", dpi=150)
