"""Arterial network description: vessel geometry, tube law, stenosis shape, inlet flow.

The network is an abdominal aorta bifurcating into two common iliacs. Every
quantity is SI (m, s, Pa, m^3/s). A patient is fully described by a
:class:`NetworkParameters` instance; the two iliacs share geometry and wall
mechanics but have independent Windkessel outlets, and at most one vessel may
carry a stenosis.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field

import numpy as np

SQRT_PI = math.sqrt(math.pi)

VESSEL_IDS = ("aorta", "iliac1", "iliac2")


def _require(cond: bool, msg: str) -> None:
    if not cond:
        raise ValueError(msg)


@dataclass(frozen=True)
class BloodProperties:
    """Bulk fluid properties: density (kg/m^3), dynamic viscosity (Pa.s) and the
    dimensionless velocity-profile constant entering the wall friction term."""

    density: float = 1060.0
    dynamic_viscosity: float = 4.0e-3
    velocity_profile_constant: float = 9.0

    def __post_init__(self) -> None:
        _require(self.density > 0, "density must be positive")
        _require(self.dynamic_viscosity > 0, "dynamic_viscosity must be positive")
        _require(self.velocity_profile_constant >= 0,
                 "velocity_profile_constant must be non-negative")


@dataclass(frozen=True)
class VesselGeometry:
    """Uniform vessel segment: length, diastolic diameter, wall thickness and
    Young's modulus. The diastolic cross-sectional area is derived."""

    length: float
    diastolic_diameter: float
    wall_thickness: float
    youngs_modulus: float

    def __post_init__(self) -> None:
        for name in ("length", "diastolic_diameter", "wall_thickness", "youngs_modulus"):
            _require(getattr(self, name) > 0, f"{name} must be positive")

    @property
    def diastolic_area(self) -> float:
        return math.pi * (0.5 * self.diastolic_diameter) ** 2


@dataclass(frozen=True)
class StenosisSpec:
    """Cosine-shaped narrowing of a vessel's reference area.

    Positions are normalized by vessel length. The reference location sits
    strictly inside the lesion and enforces a minimum lesion length of 10% of
    the vessel: start <= reference - 0.05 and end >= reference + 0.05.
    """

    severity: float
    start: float
    end: float
    reference_location: float

    def __post_init__(self) -> None:
        _require(0.2 <= self.reference_location <= 0.8,
                 "reference_location must lie in [0.2, 0.8]")
        _require(0.1 <= self.start <= self.reference_location - 0.05,
                 "start must lie in [0.1, reference_location - 0.05]")
        _require(self.reference_location + 0.05 <= self.end <= 0.9,
                 "end must lie in [reference_location + 0.05, 0.9]")
        _require(0.5 <= self.severity <= 0.9, "severity must lie in [0.5, 0.9]")


@dataclass(frozen=True)
class InletFlowSeries:
    """Periodic volumetric inflow as a 5th-order Fourier series.

    Eleven free coefficients: the constant cosine term plus five
    sine/cosine harmonics; the zeroth sine coefficient is identically zero.
    """

    period: float
    sine_coeffs: tuple[float, ...]
    cosine_coeffs: tuple[float, ...]

    def __post_init__(self) -> None:
        _require(self.period > 0, "period must be positive")
        _require(len(self.sine_coeffs) == 6 and len(self.cosine_coeffs) == 6,
                 "series is truncated at order 5: six sine and six cosine coefficients")
        _require(self.sine_coeffs[0] == 0.0, "zeroth sine coefficient is fixed to 0")

    @property
    def free_coefficients(self) -> tuple[float, ...]:
        """The 11 free coefficients in (b0, a1, b1, ..., a5, b5) order."""
        out = [self.cosine_coeffs[0]]
        for n in range(1, 6):
            out.append(self.sine_coeffs[n])
            out.append(self.cosine_coeffs[n])
        return tuple(out)

    @staticmethod
    def from_free_coefficients(period: float, coeffs) -> "InletFlowSeries":
        coeffs = tuple(float(c) for c in coeffs)
        _require(len(coeffs) == 11, "expected 11 coefficients (b0, a1, b1, ..., a5, b5)")
        sines = (0.0,) + coeffs[1::2]
        cosines = (coeffs[0],) + coeffs[2::2]
        return InletFlowSeries(period=period, sine_coeffs=sines, cosine_coeffs=cosines)


@dataclass(frozen=True)
class WindkesselParams:
    """Three-element RCR outlet: proximal/distal resistances (Pa.s/m^3),
    compliance (m^3/Pa) and the distal outflow pressure (Pa)."""

    proximal_resistance: float
    distal_resistance: float
    compliance: float
    outflow_pressure: float = 0.0

    def __post_init__(self) -> None:
        for name in ("proximal_resistance", "distal_resistance", "compliance"):
            _require(getattr(self, name) > 0, f"{name} must be positive")


@dataclass(frozen=True)
class NetworkParameters:
    """One virtual patient's arterial system.

    ``stenosis`` is either None (healthy) or a (vessel_id, StenosisSpec) pair
    with vessel_id in {"aorta", "iliac1", "iliac2"}; at most one vessel is
    diseased. The iliacs share ``iliac`` geometry but keep independent
    Windkessel parameters.
    """

    aorta: VesselGeometry
    iliac: VesselGeometry
    windkessel_1: WindkesselParams
    windkessel_2: WindkesselParams
    inlet: InletFlowSeries
    blood: BloodProperties = field(default_factory=BloodProperties)
    external_pressure: float = 0.0
    diastolic_pressure: float = 10.0e3
    stenosis: tuple[str, StenosisSpec] | None = None

    def __post_init__(self) -> None:
        if self.stenosis is not None:
            vessel_id, spec = self.stenosis
            _require(vessel_id in VESSEL_IDS,
                     f"stenosis vessel_id must be one of {VESSEL_IDS}")
            _require(isinstance(spec, StenosisSpec), "stenosis needs a StenosisSpec")

    def geometry_of(self, vessel_id: str) -> VesselGeometry:
        _require(vessel_id in VESSEL_IDS, f"unknown vessel {vessel_id!r}")
        return self.aorta if vessel_id == "aorta" else self.iliac

    def stenosis_of(self, vessel_id: str) -> StenosisSpec | None:
        if self.stenosis is not None and self.stenosis[0] == vessel_id:
            return self.stenosis[1]
        return None


def tube_law_stiffness(geometry: VesselGeometry) -> float:
    """Wall stiffness (Pa.m) of the pressure-area law: (4/3) E h sqrt(pi)."""
    return (4.0 / 3.0) * geometry.youngs_modulus * geometry.wall_thickness * SQRT_PI


def tube_law_pressure(area, diastolic_area, stiffness, external_pressure, diastolic_pressure):
    """Pressure (Pa) from the elastic tube law.

    P = P_ext + P_d + beta (sqrt(A) - sqrt(A_d)) / A_d. Accepts scalars or
    arrays; at A = A_d this returns exactly P_ext + P_d.
    """
    area = np.asarray(area, dtype=float)
    return (external_pressure + diastolic_pressure
            + stiffness * (np.sqrt(area) - np.sqrt(diastolic_area)) / diastolic_area)


def normalized_area(spec: StenosisSpec, x_n):
    """Normalized reference area at normalized position(s) x_n in [0, 1].

    Inside [start, end] the area follows a full cosine dip reaching
    1 - severity at the lesion midpoint; outside it is exactly 1. Continuous
    at both lesion ends.
    """
    x = np.asarray(x_n, dtype=float)
    if np.any(x < 0.0) or np.any(x > 1.0):
        raise ValueError("normalized position must lie in [0, 1]")
    inside = (x >= spec.start) & (x <= spec.end)
    phase = 2.0 * math.pi * (x - spec.start) / (spec.end - spec.start)
    dipped = (1.0 - 0.5 * spec.severity) + 0.5 * spec.severity * np.cos(phase)
    out = np.where(inside, dipped, 1.0)
    return float(out) if np.isscalar(x_n) else out


def inlet_flow(series: InletFlowSeries, t):
    """Volumetric inflow (m^3/s) at time(s) t; exactly periodic in the period."""
    t = np.asarray(t, dtype=float)
    omega = 2.0 * math.pi / series.period
    q = np.zeros_like(t)
    for n in range(6):
        q = q + series.sine_coeffs[n] * np.sin(n * omega * t)
        q = q + series.cosine_coeffs[n] * np.cos(n * omega * t)
    return float(q) if q.ndim == 0 else q


def reference_area_profile(geometry: VesselGeometry, stenosis: StenosisSpec | None, grid):
    """Diastolic area (m^2) at axial positions ``grid`` (m) along the vessel.

    Healthy vessels have a constant profile; a stenosis scales it by the
    normalized area map evaluated at x / length.
    """
    x = np.asarray(grid, dtype=float)
    if np.any(x < 0.0) or np.any(x > geometry.length):
        raise ValueError("grid point outside vessel")
    base = geometry.diastolic_area
    if stenosis is None:
        return np.full_like(x, base)
    return base * normalized_area(stenosis, x / geometry.length)


# --- flat key/value serialization ------------------------------------------

def to_flat_dict(params: NetworkParameters) -> dict:
    """Flatten a patient to a JSON-compatible key/value document (SI units)."""
    doc: dict[str, float | str] = {}
    for prefix, geom in (("aorta", params.aorta), ("iliac", params.iliac)):
        doc[f"{prefix}_length"] = geom.length
        doc[f"{prefix}_diastolic_diameter"] = geom.diastolic_diameter
        doc[f"{prefix}_wall_thickness"] = geom.wall_thickness
        doc[f"{prefix}_youngs_modulus"] = geom.youngs_modulus
    for prefix, wk in (("windkessel_1", params.windkessel_1),
                       ("windkessel_2", params.windkessel_2)):
        doc[f"{prefix}_proximal_resistance"] = wk.proximal_resistance
        doc[f"{prefix}_distal_resistance"] = wk.distal_resistance
        doc[f"{prefix}_compliance"] = wk.compliance
        doc[f"{prefix}_outflow_pressure"] = wk.outflow_pressure
    doc["inlet_period"] = params.inlet.period
    for n in range(6):
        doc[f"inlet_sine_{n}"] = params.inlet.sine_coeffs[n]
        doc[f"inlet_cosine_{n}"] = params.inlet.cosine_coeffs[n]
    doc["blood_density"] = params.blood.density
    doc["blood_dynamic_viscosity"] = params.blood.dynamic_viscosity
    doc["blood_velocity_profile_constant"] = params.blood.velocity_profile_constant
    doc["external_pressure"] = params.external_pressure
    doc["diastolic_pressure"] = params.diastolic_pressure
    if params.stenosis is not None:
        vessel_id, spec = params.stenosis
        doc["stenosis_vessel"] = vessel_id
        doc["stenosis_severity"] = spec.severity
        doc["stenosis_start"] = spec.start
        doc["stenosis_end"] = spec.end
        doc["stenosis_reference_location"] = spec.reference_location
    return doc


def from_flat_dict(doc: dict) -> NetworkParameters:
    """Inverse of :func:`to_flat_dict`."""
    def geom(prefix: str) -> VesselGeometry:
        return VesselGeometry(
            length=doc[f"{prefix}_length"],
            diastolic_diameter=doc[f"{prefix}_diastolic_diameter"],
            wall_thickness=doc[f"{prefix}_wall_thickness"],
            youngs_modulus=doc[f"{prefix}_youngs_modulus"],
        )

    def wk(prefix: str) -> WindkesselParams:
        return WindkesselParams(
            proximal_resistance=doc[f"{prefix}_proximal_resistance"],
            distal_resistance=doc[f"{prefix}_distal_resistance"],
            compliance=doc[f"{prefix}_compliance"],
            outflow_pressure=doc.get(f"{prefix}_outflow_pressure", 0.0),
        )

    inlet = InletFlowSeries(
        period=doc["inlet_period"],
        sine_coeffs=tuple(doc[f"inlet_sine_{n}"] for n in range(6)),
        cosine_coeffs=tuple(doc[f"inlet_cosine_{n}"] for n in range(6)),
    )
    stenosis = None
    if "stenosis_vessel" in doc:
        stenosis = (doc["stenosis_vessel"], StenosisSpec(
            severity=doc["stenosis_severity"],
            start=doc["stenosis_start"],
            end=doc["stenosis_end"],
            reference_location=doc["stenosis_reference_location"],
        ))
    return NetworkParameters(
        aorta=geom("aorta"),
        iliac=geom("iliac"),
        windkessel_1=wk("windkessel_1"),
        windkessel_2=wk("windkessel_2"),
        inlet=inlet,
        blood=BloodProperties(
            density=doc["blood_density"],
            dynamic_viscosity=doc["blood_dynamic_viscosity"],
            velocity_profile_constant=doc["blood_velocity_profile_constant"],
        ),
        external_pressure=doc["external_pressure"],
        diastolic_pressure=doc["diastolic_pressure"],
        stenosis=stenosis,
    )


def to_json(params: NetworkParameters) -> str:
    return json.dumps(to_flat_dict(params), sort_keys=True)


def from_json(text: str) -> NetworkParameters:
    return from_flat_dict(json.loads(text))


# --- reference inflow pulse --------------------------------------------------

#: Default systolic inflow pulse (m^3/s peak; fractions of the period). A
#: short, sharp ejection with a pronounced reverse-flow notch: the mean flow
#: against the default Windkessel resistances puts the inlet pressure near
#: 85-120 mmHg, comfortably inside the cohort filters, and the strong
#: harmonic content keeps the stenosis reflection signatures visible at the
#: probes.
DEFAULT_PULSE_PEAK = 8.0e-5
DEFAULT_SYSTOLE = 0.18
DEFAULT_NOTCH_FRACTION = 0.25
DEFAULT_NOTCH_DURATION = 0.05


def reference_inflow_samples(period: float = 1.0, n_samples: int = 512,
                             peak: float = DEFAULT_PULSE_PEAK) -> tuple[np.ndarray, np.ndarray]:
    """Synthetic aortic inflow pulse sampled over one period.

    A half-sine systolic ejection followed by a brief reverse-flow notch and a
    flat diastole. Used to derive the default inlet Fourier coefficients.
    """
    t = np.arange(n_samples) * (period / n_samples)
    q = np.zeros(n_samples)
    systole = DEFAULT_SYSTOLE * period
    notch_end = systole + DEFAULT_NOTCH_DURATION * period
    eject = t < systole
    q[eject] = peak * np.sin(math.pi * t[eject] / systole)
    notch = (t >= systole) & (t < notch_end)
    q[notch] = -DEFAULT_NOTCH_FRACTION * peak * np.sin(
        math.pi * (t[notch] - systole) / (notch_end - systole))
    return t, q


def fit_inlet_series(t: np.ndarray, q: np.ndarray, period: float) -> InletFlowSeries:
    """Least-squares 5th-order Fourier fit of a sampled inflow pulse."""
    omega = 2.0 * math.pi / period
    cols = [np.ones_like(t)]
    for n in range(1, 6):
        cols.append(np.sin(n * omega * t))
        cols.append(np.cos(n * omega * t))
    design = np.column_stack(cols)
    coeffs, *_ = np.linalg.lstsq(design, q, rcond=None)
    return InletFlowSeries.from_free_coefficients(period, coeffs)


def default_inlet_series(period: float = 1.0) -> InletFlowSeries:
    """The reference 11-coefficient inlet series for the default pulse."""
    t, q = reference_inflow_samples(period=period)
    return fit_inlet_series(t, q, period)
