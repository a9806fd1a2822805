#!/usr/bin/env python3
"""Build a small virtual patient cohort and inspect its feature space.

Generates 80 patients (sampling, simulation, pressure filters, Fourier
features), saves the dataset CSV, and plots how the iliac flow features
separate the disease classes.
"""

from pathlib import Path

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt
import numpy as np

from stenokit.solver import NumericsConfig
from stenokit.vpd import build_vpd, feature_names, save_dataset, standardize

OUT = Path(__file__).parent / "output"
OUT.mkdir(exist_ok=True)

print("building an 80-patient cohort (this runs ~80 simulations) ...")
dataset = build_vpd(80, seed=2024, numerics=NumericsConfig(cells_per_vessel=48),
                    workers=2)
meta = dataset.metadata
print(f"  accepted {len(dataset)} of {meta['attempts']} candidates")
print(f"  class counts: {meta['class_counts']}")
print(f"  rejections:   {meta['rejections']}")

csv_path = OUT / "cohort80.csv"
save_dataset(dataset, csv_path)
print(f"wrote {csv_path} (+ metadata JSON)")

# standardize with the recorded reference split and look at two iliac features
stats = meta["standardization"]
x, _, _ = standardize(dataset.features, np.asarray(stats["train_rows"]))
names = feature_names()
fx, fy = names.index("q2_a1"), names.index("q3_a1")
classes = dataset.classes
fig, ax = plt.subplots(figsize=(5.5, 5))
for cls, label, marker in ((0, "healthy", "o"), (1, "aorta", "s"),
                           (2, "iliac 1", "^"), (3, "iliac 2", "v")):
    rows = classes == cls
    ax.scatter(x[rows, fx], x[rows, fy], label=label, marker=marker, alpha=0.75)
ax.set_xlabel("q2_a1 (standardized)")
ax.set_ylabel("q3_a1 (standardized)")
ax.legend()
ax.set_title("iliac first-harmonic flow features")
fig.tight_layout()
fig.savefig(OUT / "cohort_features.png", dpi=130)
print(f"wrote {OUT / 'cohort_features.png'}")
print("note the mirror structure: the two iliac disease classes push the")
print("flow harmonics apart in opposite directions")
