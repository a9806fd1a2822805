#!/usr/bin/env python3
"""Train the four classifier families on a saved cohort.

Needs the dataset written by 02_virtual_cohort.py (or any dataset CSV passed
as the first argument). Evaluates whole-network and single-vessel binary
classifiers over five folds and prints a compact comparison, then runs a
small combination search over the iliac measurement pairs.
"""

import sys
from pathlib import Path

from stenokit.tasks import (MethodConfig, combination_label, evaluate,
                            like_for_like_pairs, split_folds)
from stenokit.vpd import MEASUREMENT_ORDER, load_dataset

OUT = Path(__file__).parent / "output"
default_csv = OUT / "cohort80.csv"
csv_path = sys.argv[1] if len(sys.argv) > 1 else str(default_csv)
if not Path(csv_path).exists():
    raise SystemExit(f"{csv_path} not found - run 02_virtual_cohort.py first")

ids, classes, features, meta = load_dataset(csv_path)
print(f"loaded {len(ids)} patients from {csv_path}")
folds = split_folds(classes, seed=42)
config = MethodConfig()

print("\nwhole-network classifiers (healthy vs any disease), six inputs:")
for method in ("lr", "svm", "svm_linear", "nb", "rf"):
    cell = evaluate(features, classes, "enbc", method, MEASUREMENT_ORDER,
                    folds, config)
    print(f"  {method:10s} F={cell.f_mean:.3f}  Se={cell.sensitivity_mean:.3f}"
          f"  Sp={cell.specificity_mean:.3f}")

print("\nsingle-vessel classifiers (weighted logistic), six inputs:")
for scheme in ("ivbc:aorta", "ivbc:iliac1", "ivbc:iliac2"):
    cell = evaluate(features, classes, scheme, "lr", MEASUREMENT_ORDER, folds,
                    config)
    print(f"  {scheme:12s} F={cell.f_mean:.3f}  Se={cell.sensitivity_mean:.3f}"
          f"  Sp={cell.specificity_mean:.3f}")

print("\nmirror-image measurement pairs should score alike (logistic):")
for combo, twin in like_for_like_pairs()[:4]:
    f_a = evaluate(features, classes, "enbc", "lr", combo, folds, config).f_mean
    f_b = evaluate(features, classes, "enbc", "lr", twin, folds, config).f_mean
    print(f"  {combination_label(combo):12s} F={f_a:.3f}   "
          f"{combination_label(twin):12s} F={f_b:.3f}   |dF|={abs(f_a - f_b):.3f}")
