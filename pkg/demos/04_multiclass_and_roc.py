#!/usr/bin/env python3
"""Locate the diseased vessel: multiclass strategies and the healthy ROC.

Needs the dataset from 02_virtual_cohort.py (or a CSV path argument).
Compares one-vs-all, one-vs-one and the probabilistic default-to-healthy
configuration, then sweeps the decision boundary into an ROC curve.
"""

import sys
from pathlib import Path

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt

from stenokit.tasks import MethodConfig, cpc_roc, multiclass_evaluate, split_folds
from stenokit.vpd import load_dataset

OUT = Path(__file__).parent / "output"
OUT.mkdir(exist_ok=True)
default_csv = OUT / "cohort80.csv"
csv_path = sys.argv[1] if len(sys.argv) > 1 else str(default_csv)
if not Path(csv_path).exists():
    raise SystemExit(f"{csv_path} not found - run 02_virtual_cohort.py first")

ids, classes, features, meta = load_dataset(csv_path)
folds = split_folds(classes, seed=42)
config = MethodConfig()
names = ("healthy", "aorta", "iliac 1", "iliac 2")

print(f"{len(ids)} patients; per-class sensitivity / specificity:")
for strategy in ("ova", "ovo", "cpc"):
    result = multiclass_evaluate(features, classes, strategy, folds, config)
    cells = "  ".join(f"{names[c]} {result.mean_sensitivity(c):.2f}/"
                      f"{result.mean_specificity(c):.2f}" for c in range(4))
    print(f"  {strategy:4s} {cells}")

print("\nsweeping the disease-certainty boundary into a healthy-class ROC ...")
curve = cpc_roc(features, classes, folds, config)
print(f"  AUC = {curve.auc:.3f}")

fig, ax = plt.subplots(figsize=(5, 5))
ax.plot(curve.fpr, curve.tpr, label=f"probabilistic config (AUC {curve.auc:.2f})")
ax.plot([0, 1], [0, 1], "k--", lw=0.8, label="naive (AUC 0.5)")
ax.set_xlabel("false positive rate")
ax.set_ylabel("true positive rate")
ax.set_title("healthy-class ROC")
ax.legend()
fig.tight_layout()
fig.savefig(OUT / "healthy_roc.png", dpi=130)
print(f"wrote {OUT / 'healthy_roc.png'}")
