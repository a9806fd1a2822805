"""Synthetic arterial pulse-wave cohorts and stenosis-detecting classifiers."""

from .model import (BloodProperties, InletFlowSeries, NetworkParameters,
                    StenosisSpec, VesselGeometry, WindkesselParams,
                    default_inlet_series, inlet_flow, normalized_area,
                    reference_area_profile, tube_law_pressure, tube_law_stiffness)
from .solver import (NumericsConfig, SimulationResult, Waveforms, simulate,
                     windkessel_advance)

__all__ = [
    "BloodProperties", "InletFlowSeries", "NetworkParameters", "StenosisSpec",
    "VesselGeometry", "WindkesselParams", "default_inlet_series", "inlet_flow",
    "normalized_area", "reference_area_profile", "tube_law_pressure",
    "tube_law_stiffness", "NumericsConfig", "SimulationResult", "Waveforms",
    "simulate", "windkessel_advance",
]

__version__ = "0.1.0"
