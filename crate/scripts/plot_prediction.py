"""Time-threshold curves, Accuracy@k and NDCG@k.

usage: python scripts/plot_prediction.py out/desk
"""
import sys
from pathlib import Path

import matplotlib.pyplot as plt
import pandas as pd

out = Path(sys.argv[1] if len(sys.argv) > 1 else "out/desk")
data = out / "plot-data"
time = pd.read_csv(data / "time_threshold.csv")
rank = pd.read_csv(data / "ranking.csv")

fig, ax = plt.subplots(1, 3, figsize=(12, 3.5))
for mode, g in time.groupby("mode"):
    m = g.groupby("threshold")["fraction_within"].median()
    ax[0].plot(m.index, m.values, "o-", label=mode)
ax[0].set_xlabel("threshold (h)")
ax[0].set_ylabel("share of test events within threshold")
ax[0].legend()
for col, a in [("accuracy", ax[1]), ("ndcg", ax[2])]:
    for model, g in rank.groupby("model"):
        m = g.groupby("k")[col].median()
        a.plot(m.index, m.values, "o-", label=model)
    a.set_xlabel("k")
    a.set_ylabel(col)
    a.legend(fontsize=7)
fig.tight_layout()
fig.savefig(out / "prediction.png", dpi=150)
