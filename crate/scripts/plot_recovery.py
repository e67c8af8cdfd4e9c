"""MSE, held-out log-likelihood and edge AUC against the train fraction.

usage: python scripts/plot_recovery.py out/desk
"""
import sys
from pathlib import Path

import matplotlib.pyplot as plt
import pandas as pd

out = Path(sys.argv[1] if len(sys.argv) > 1 else "out/desk")
rec = pd.read_csv(out / "plot-data" / "recovery.csv")
med = rec.groupby("fraction").median(numeric_only=True)

fig, ax = plt.subplots(1, 3, figsize=(12, 3.5))
ax[0].plot(med.index, med["mse_aligned_joint"], "o-", label="joint (aligned)")
ax[0].plot(med.index, med["mse_temporal"], "s--", label="temporal")
ax[0].set_yscale("log")
ax[0].set_ylabel("MSE")
ax[0].legend()
ax[1].plot(med.index, med["test_loglik"], "o-")
ax[1].set_ylabel("AvgPredLogLik")
ax[2].plot(med.index, med["auc"], "o-")
ax[2].set_ylabel("edge AUC")
for a in ax:
    a.set_xlabel("train fraction")
fig.tight_layout()
fig.savefig(out / "recovery.png", dpi=150)
