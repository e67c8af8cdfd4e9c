"""Sociality box plots by alpha/eta ratio, and interevent histograms.

usage: python scripts/plot_sociality.py out/desk
"""
import sys
from pathlib import Path

import matplotlib.pyplot as plt
import pandas as pd

out = Path(sys.argv[1] if len(sys.argv) > 1 else "out/desk")
data = out / "plot-data"
soc = pd.read_csv(data / "sociality.csv")
hist = pd.read_csv(data / "interevent.csv")

ratios = sorted(soc["ratio"].unique())
betas = sorted(hist["beta"].unique())
fig, ax = plt.subplots(1, 1 + len(betas), figsize=(4 * (1 + len(betas)), 3.5))
ax[0].boxplot([soc.loc[soc["ratio"] == r, "sociality"] for r in ratios], tick_labels=[f"{r:g}" for r in ratios])
ax[0].set_xlabel("mean alpha / mean eta")
ax[0].set_ylabel("sociality")
for a, beta in zip(ax[1:], betas):
    h = hist[hist["beta"] == beta].groupby("bin_start")["count"].sum()
    h = h[h.index < 72]
    a.bar(h.index, h.values, width=h.index[1] - h.index[0] if len(h) > 1 else 1.0, align="edge")
    a.set_title(f"beta = {beta:g}")
    a.set_xlabel("interevent time (h)")
fig.tight_layout()
fig.savefig(out / "sociality.png", dpi=150)
