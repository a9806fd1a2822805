#!/usr/bin/env python3
"""Simulate one virtual patient and plot the probe waveforms.

Builds the mean arterial network, runs it healthy and with a severe iliac
stenosis, and compares pressure/flow at the three probes. Figures land in
demos/output/.
"""

from pathlib import Path

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt
import numpy as np

from stenokit import (NetworkParameters, NumericsConfig, StenosisSpec,
                      VesselGeometry, WindkesselParams, default_inlet_series,
                      normalized_area, simulate)

OUT = Path(__file__).parent / "output"
OUT.mkdir(exist_ok=True)

MMHG = 133.322387415

aorta = VesselGeometry(length=0.086, diastolic_diameter=0.0172,
                       wall_thickness=1.03e-3, youngs_modulus=500e3)
iliac = VesselGeometry(length=0.085, diastolic_diameter=0.012,
                       wall_thickness=0.72e-3, youngs_modulus=700e3)
windkessel = WindkesselParams(proximal_resistance=6.81e7,
                              distal_resistance=3.10e9, compliance=3.67e-10)
inlet = default_inlet_series()

healthy = NetworkParameters(aorta=aorta, iliac=iliac, windkessel_1=windkessel,
                            windkessel_2=windkessel, inlet=inlet)
lesion = StenosisSpec(severity=0.85, start=0.3, end=0.7, reference_location=0.5)
diseased = NetworkParameters(aorta=aorta, iliac=iliac, windkessel_1=windkessel,
                             windkessel_2=windkessel, inlet=inlet,
                             stenosis=("iliac1", lesion))

numerics = NumericsConfig(periodicity_tolerance=2e-4)
print("running healthy patient ...")
res_h = simulate(healthy, numerics)
print(f"  converged in {res_h.cycles_run} cycles, "
      f"mass residual {res_h.mass_residual:.1e}")
print("running iliac-1 stenosis (85% area loss) ...")
res_d = simulate(diseased, numerics)
print(f"  converged in {res_d.cycles_run} cycles")

t = np.arange(res_h.waveforms.samples_per_cycle) / res_h.waveforms.samples_per_cycle

fig, axes = plt.subplots(2, 3, figsize=(12, 6), sharex=True)
for col, (p_name, q_name, title) in enumerate(
        [("p1", "q1", "aorta inlet"), ("p2", "q2", "iliac 1 outlet"),
         ("p3", "q3", "iliac 2 outlet")]):
    for res, style, label in ((res_h, "-", "healthy"), (res_d, "--", "iliac-1 stenosis")):
        axes[0, col].plot(t, res.waveforms.signals()[p_name] / MMHG, style, label=label)
        axes[1, col].plot(t, res.waveforms.signals()[q_name] * 1e6, style, label=label)
    axes[0, col].set_title(title)
    axes[1, col].set_xlabel("t / T")
axes[0, 0].set_ylabel("pressure [mmHg]")
axes[1, 0].set_ylabel("flow [ml/s]")
axes[0, 0].legend()
fig.tight_layout()
fig.savefig(OUT / "single_patient_waveforms.png", dpi=130)
print(f"wrote {OUT / 'single_patient_waveforms.png'}")

# lesion geometry
x = np.linspace(0, 1, 400)
fig, ax = plt.subplots(figsize=(5, 3))
ax.plot(x, normalized_area(lesion, x))
ax.set_xlabel("normalized position")
ax.set_ylabel("normalized reference area")
ax.set_title(f"{lesion.severity:.0%} stenosis, [{lesion.start}, {lesion.end}]")
fig.tight_layout()
fig.savefig(OUT / "stenosis_profile.png", dpi=130)
print(f"wrote {OUT / 'stenosis_profile.png'}")
