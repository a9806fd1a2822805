"""Virtual patient database construction.

Sampling of network parameters from the cohort distributions, disease
assignment, simulation, hard pressure filters, Fourier feature extraction,
Z-score standardization and CSV/JSON persistence. Per-patient randomness is
drawn from substreams keyed by (global seed, patient id), so generation is
reproducible independent of ordering and worker count.
"""

from __future__ import annotations

import json
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from enum import IntEnum

import numpy as np

from .model import (BloodProperties, InletFlowSeries, NetworkParameters,
                    StenosisSpec, VesselGeometry, WindkesselParams,
                    default_inlet_series)
from .solver import NumericsConfig, SolverError, Waveforms, simulate

MMHG = 133.322387415  # Pa per mmHg

#: ordering of the six measurement blocks in every feature vector
MEASUREMENT_ORDER = ("q3", "q2", "q1", "p3", "p2", "p1")
COEFFS_PER_MEASUREMENT = 11
N_FEATURES = len(MEASUREMENT_ORDER) * COEFFS_PER_MEASUREMENT


class HealthClass(IntEnum):
    HEALTHY = 0
    AORTA = 1
    ILIAC1 = 2
    ILIAC2 = 3


_CLASS_TO_VESSEL = {HealthClass.AORTA: "aorta", HealthClass.ILIAC1: "iliac1",
                    HealthClass.ILIAC2: "iliac2"}


@dataclass(frozen=True)
class ParameterDistributions:
    """Independent normal distributions of the healthy network parameters.

    Every (mean, std) pair keeps std = 0.2 * mean. Inlet coefficients are also
    normal around the reference pulse coefficients with std = 0.2 * |mean|,
    except exactly-zero means, which get 0.05 * 0.2 * max|mean|. Disease
    parameters are sampled uniformly inside the constraint box.
    """

    aorta_length: float = 0.086
    aorta_wall_thickness: float = 1.03e-3
    aorta_diameter: float = 0.0172
    aorta_youngs_modulus: float = 500e3
    iliac_length: float = 0.085
    iliac_wall_thickness: float = 0.72e-3
    iliac_diameter: float = 0.012
    iliac_youngs_modulus: float = 700e3
    proximal_resistance: float = 6.81e7
    distal_resistance: float = 3.10e9
    compliance: float = 3.67e-10
    inlet_means: tuple[float, ...] = field(
        default_factory=lambda: default_inlet_series().free_coefficients)
    relative_std: float = 0.2

    def __post_init__(self) -> None:
        for name in ("aorta_length", "aorta_wall_thickness", "aorta_diameter",
                     "aorta_youngs_modulus", "iliac_length", "iliac_wall_thickness",
                     "iliac_diameter", "iliac_youngs_modulus",
                     "proximal_resistance", "distal_resistance", "compliance"):
            if getattr(self, name) <= 0:
                raise ValueError(f"{name} mean must be positive")
        if len(self.inlet_means) != 11:
            raise ValueError("expected 11 inlet coefficient means")
        if not 0 < self.relative_std < 1:
            raise ValueError("relative_std must lie in (0, 1)")

    def vessel_means(self) -> dict[str, float]:
        return {name: getattr(self, name) for name in (
            "aorta_length", "aorta_wall_thickness", "aorta_diameter",
            "aorta_youngs_modulus", "iliac_length", "iliac_wall_thickness",
            "iliac_diameter", "iliac_youngs_modulus")}

    def std_of(self, name: str) -> float:
        return self.relative_std * getattr(self, name)

    def inlet_stds(self) -> np.ndarray:
        means = np.asarray(self.inlet_means)
        ref = np.max(np.abs(means))
        stds = self.relative_std * np.abs(means)
        stds[means == 0.0] = 0.05 * self.relative_std * ref
        return stds


@dataclass(frozen=True)
class CohortDefaults:
    """Per-cohort constants that are not sampled."""

    blood: BloodProperties = field(default_factory=BloodProperties)
    external_pressure: float = 0.0
    diastolic_pressure: float = 10.0e3
    outflow_pressure: float = 0.0
    period: float = 1.0


# disease constraint box: reference location, then start/end around it,
# then severity, sampled sequentially
DISEASE_REFERENCE_RANGE = (0.2, 0.8)
DISEASE_START_MIN = 0.1
DISEASE_END_MAX = 0.9
DISEASE_HALF_GAP = 0.05
DISEASE_SEVERITY_RANGE = (0.5, 0.9)

_POSITIVE_RETRIES = 100


def _positive_normal(rng: np.random.Generator, mean: float, std: float, name: str) -> float:
    for _ in range(_POSITIVE_RETRIES):
        value = rng.normal(mean, std)
        if value > 0:
            return value
    raise ValueError(f"could not draw a positive value for {name} "
                     f"(mean {mean:g}, std {std:g})")


def patient_rng(global_seed: int, patient_id: int) -> np.random.Generator:
    """Independent substream for one patient, order- and worker-invariant."""
    return np.random.default_rng(np.random.SeedSequence(
        entropy=global_seed, spawn_key=(patient_id,)))


def sample_stenosis(rng: np.random.Generator) -> StenosisSpec:
    r_lo, r_hi = DISEASE_REFERENCE_RANGE
    ref = rng.uniform(r_lo, r_hi)
    start = rng.uniform(DISEASE_START_MIN, ref - DISEASE_HALF_GAP)
    end = rng.uniform(ref + DISEASE_HALF_GAP, DISEASE_END_MAX)
    s_lo, s_hi = DISEASE_SEVERITY_RANGE
    severity = rng.uniform(s_lo, s_hi)
    return StenosisSpec(severity=severity, start=start, end=end, reference_location=ref)


def sample_patient(rng: np.random.Generator,
                   distributions: ParameterDistributions | None = None,
                   defaults: CohortDefaults | None = None,
                   ) -> tuple[NetworkParameters, HealthClass]:
    """Draw one virtual patient: healthy with probability 1/2, otherwise a
    stenosis in one of the three vessels with equal probability."""
    dist = distributions or ParameterDistributions()
    defaults = defaults or CohortDefaults()

    def draw(name: str) -> float:
        return _positive_normal(rng, getattr(dist, name), dist.std_of(name), name)

    aorta = VesselGeometry(length=draw("aorta_length"),
                           diastolic_diameter=draw("aorta_diameter"),
                           wall_thickness=draw("aorta_wall_thickness"),
                           youngs_modulus=draw("aorta_youngs_modulus"))
    iliac = VesselGeometry(length=draw("iliac_length"),
                           diastolic_diameter=draw("iliac_diameter"),
                           wall_thickness=draw("iliac_wall_thickness"),
                           youngs_modulus=draw("iliac_youngs_modulus"))
    wks = []
    for _ in range(2):
        wks.append(WindkesselParams(
            proximal_resistance=draw("proximal_resistance"),
            distal_resistance=draw("distal_resistance"),
            compliance=draw("compliance"),
            outflow_pressure=defaults.outflow_pressure))
    inlet_stds = dist.inlet_stds()
    coeffs = [rng.normal(m, s) for m, s in zip(dist.inlet_means, inlet_stds)]
    inlet = InletFlowSeries.from_free_coefficients(defaults.period, coeffs)

    u = rng.random()
    if u < 0.5:
        health = HealthClass.HEALTHY
        stenosis = None
    else:
        vessel_idx = int(rng.integers(3))
        health = HealthClass(1 + vessel_idx)
        stenosis = (_CLASS_TO_VESSEL[health], sample_stenosis(rng))

    params = NetworkParameters(aorta=aorta, iliac=iliac,
                               windkessel_1=wks[0], windkessel_2=wks[1],
                               inlet=inlet, blood=defaults.blood,
                               external_pressure=defaults.external_pressure,
                               diastolic_pressure=defaults.diastolic_pressure,
                               stenosis=stenosis)
    return params, health


# --- hard pressure filters ----------------------------------------------------

FILTER_MAX_PRESSURE = 225.0 * MMHG
FILTER_MIN_PRESSURE = 25.0 * MMHG
FILTER_MAX_PULSE = 120.0 * MMHG

FILTER_RULES = ("max_pressure", "min_pressure", "pulse_pressure")


@dataclass(frozen=True)
class FilterResult:
    accepted: bool
    failed_rule: str | None = None


def apply_filters(inlet_pressure: np.ndarray) -> FilterResult:
    """Accept a patient iff the inlet pressure stays inside the cohort bounds:
    max < 225 mmHg, min > 25 mmHg, pulse pressure < 120 mmHg."""
    p = np.asarray(inlet_pressure, dtype=float)
    p_max = float(np.max(p))
    p_min = float(np.min(p))
    if not p_max < FILTER_MAX_PRESSURE:
        return FilterResult(False, "max_pressure")
    if not p_min > FILTER_MIN_PRESSURE:
        return FilterResult(False, "min_pressure")
    if not p_max - p_min < FILTER_MAX_PULSE:
        return FilterResult(False, "pulse_pressure")
    return FilterResult(True)


# --- Fourier features -----------------------------------------------------------

def _design_matrix(n_samples: int, order: int) -> np.ndarray:
    t = np.arange(n_samples) / n_samples
    cols = [np.ones(n_samples)]
    for n in range(1, order + 1):
        cols.append(np.sin(2.0 * math.pi * n * t))
        cols.append(np.cos(2.0 * math.pi * n * t))
    return np.column_stack(cols)


def fit_fourier(signal: np.ndarray, order: int = 5) -> tuple[np.ndarray, float]:
    """Least-squares Fourier fit of one uniformly sampled period.

    Returns the coefficients in (b0, a1, b1, ..., a5, b5) order and the
    relative L2 reconstruction error.
    """
    signal = np.asarray(signal, dtype=float)
    n_coeffs = 2 * order + 1
    if signal.ndim != 1 or len(signal) < n_coeffs:
        raise ValueError(f"need at least {n_coeffs} samples, got {signal.shape}")
    design = _design_matrix(len(signal), order)
    coeffs, *_ = np.linalg.lstsq(design, signal, rcond=None)
    recon = design @ coeffs
    denom = float(np.linalg.norm(signal))
    err = float(np.linalg.norm(signal - recon)) / (denom if denom > 0 else 1.0)
    return coeffs, err


def fourier_reconstruct(coeffs: np.ndarray, n_samples: int, order: int = 5) -> np.ndarray:
    """Evaluate a fitted series back on the uniform cycle grid."""
    return _design_matrix(n_samples, order) @ np.asarray(coeffs, dtype=float)


def extract_features(waveforms: Waveforms, order: int = 5) -> tuple[np.ndarray, np.ndarray]:
    """Fourier coefficients of the six probes in block order Q3, Q2, Q1,
    P3, P2, P1; returns (66-vector, per-block reconstruction errors)."""
    signals = waveforms.signals()
    blocks = []
    errors = []
    for name in MEASUREMENT_ORDER:
        coeffs, err = fit_fourier(signals[name], order)
        blocks.append(coeffs)
        errors.append(err)
    return np.concatenate(blocks), np.asarray(errors)


def feature_names() -> list[str]:
    names = []
    for block in MEASUREMENT_ORDER:
        names.append(f"{block}_b0")
        for n in range(1, 6):
            names.append(f"{block}_a{n}")
            names.append(f"{block}_b{n}")
    return names


def standardize(features: np.ndarray, train_rows: np.ndarray,
                ) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Z-score all rows using mean/std of the training rows only.

    Returns (standardized matrix, train means, train stds). A zero-variance
    training column is an error naming the feature.
    """
    x = np.asarray(features, dtype=float)
    train_rows = np.asarray(train_rows)
    if len(train_rows) < 2:
        raise ValueError("need at least 2 training rows")
    mean = x[train_rows].mean(axis=0)
    std = x[train_rows].std(axis=0)
    bad = np.nonzero(std == 0.0)[0]
    if len(bad):
        names = feature_names()
        label = names[bad[0]] if bad[0] < len(names) else f"column {bad[0]}"
        raise ValueError(f"zero training variance in feature {label}")
    return (x - mean) / std, mean, std


# --- database construction -------------------------------------------------------

#: cohort size from the events-per-variable rule: 12 events per class and
#: 66 inputs with a 2/3 training split gives 1188 per diseased vessel and
#: 3564 healthy
DEFAULT_N_PATIENTS = 7128

RECONSTRUCTION_THRESHOLD = 0.05


@dataclass
class VirtualPatient:
    id: int
    seed: int
    params: NetworkParameters
    health_class: HealthClass
    features: np.ndarray
    reconstruction_errors: np.ndarray
    waveforms: Waveforms | None = None


@dataclass
class Dataset:
    patients: list[VirtualPatient]
    metadata: dict

    def __len__(self) -> int:
        return len(self.patients)

    @property
    def features(self) -> np.ndarray:
        return np.array([p.features for p in self.patients])

    @property
    def classes(self) -> np.ndarray:
        return np.array([int(p.health_class) for p in self.patients], dtype=np.int64)


def class_targets(n_target: int) -> dict[HealthClass, int]:
    """Half healthy, the remainder spread evenly across the three vessels
    (earlier vessels absorb any remainder)."""
    healthy = round(n_target / 2)
    diseased = n_target - healthy
    base = diseased // 3
    extra = diseased - 3 * base
    targets = {HealthClass.HEALTHY: healthy}
    for k, cls in enumerate((HealthClass.AORTA, HealthClass.ILIAC1, HealthClass.ILIAC2)):
        targets[cls] = base + (1 if k < extra else 0)
    return targets


@dataclass
class _Candidate:
    patient_id: int
    health_class: int
    params_doc: dict | None
    features: np.ndarray | None
    reconstruction_errors: np.ndarray | None
    rejection: str | None
    waveforms: Waveforms | None


def _simulate_candidate(args) -> _Candidate:
    (pid, seed, dist, defaults, numerics, keep_waveforms) = args
    from .model import to_flat_dict
    rng = patient_rng(seed, pid)
    params, health = sample_patient(rng, dist, defaults)
    try:
        result = simulate(params, numerics)
    except SolverError:
        return _Candidate(pid, int(health), None, None, None, "simulation_failure", None)
    verdict = apply_filters(result.waveforms.p1)
    if not verdict.accepted:
        return _Candidate(pid, int(health), None, None, None,
                          f"filter_{verdict.failed_rule}", None)
    features, errors = extract_features(result.waveforms)
    return _Candidate(pid, int(health), to_flat_dict(params), features, errors,
                      None, result.waveforms if keep_waveforms else None)


def build_vpd(n_target: int, seed: int,
              distributions: ParameterDistributions | None = None,
              numerics: NumericsConfig | None = None,
              defaults: CohortDefaults | None = None,
              workers: int = 1,
              keep_waveforms: bool = False,
              max_attempt_factor: float = 20.0,
              progress=None) -> Dataset:
    """Generate patients until the per-class targets are met.

    Candidates are processed in patient-id order regardless of worker count,
    so the accepted set is a pure function of (n_target, seed, config).
    """
    if n_target < 4:
        raise ValueError("n_target must be at least 4")
    dist = distributions or ParameterDistributions()
    defaults = defaults or CohortDefaults()
    numerics = numerics or NumericsConfig()
    targets = class_targets(n_target)
    counts = {cls: 0 for cls in HealthClass}
    rejections: dict[str, int] = {}
    recon_violations: list[tuple[int, str, float]] = []
    patients: list[VirtualPatient] = []
    max_attempts = max(50, int(max_attempt_factor * n_target))

    from .model import from_flat_dict

    def commit(cand: _Candidate) -> None:
        cls = HealthClass(cand.health_class)
        if cand.rejection is not None:
            rejections[cand.rejection] = rejections.get(cand.rejection, 0) + 1
            return
        if counts[cls] >= targets[cls]:
            rejections["class_quota_full"] = rejections.get("class_quota_full", 0) + 1
            return
        counts[cls] += 1
        for block, err in zip(MEASUREMENT_ORDER, cand.reconstruction_errors):
            if err > RECONSTRUCTION_THRESHOLD:
                recon_violations.append((cand.patient_id, block, float(err)))
        patients.append(VirtualPatient(
            id=cand.patient_id, seed=seed,
            params=from_flat_dict(cand.params_doc),
            health_class=cls, features=cand.features,
            reconstruction_errors=cand.reconstruction_errors,
            waveforms=cand.waveforms))

    def done() -> bool:
        return all(counts[cls] >= targets[cls] for cls in HealthClass)

    attempts = 0
    if workers <= 1:
        pid = 0
        while not done():
            if attempts >= max_attempts:
                raise RuntimeError(
                    f"gave up after {attempts} attempts; counts={dict(counts)}, "
                    f"rejections={rejections}")
            commit(_simulate_candidate((pid, seed, dist, defaults, numerics,
                                        keep_waveforms)))
            attempts += 1
            pid += 1
            if progress is not None and attempts % 50 == 0:
                progress(attempts, sum(counts.values()))
    else:
        chunk = max(2 * workers, 8)
        next_pid = 0
        with ProcessPoolExecutor(max_workers=workers) as pool:
            while not done():
                if attempts >= max_attempts:
                    raise RuntimeError(
                        f"gave up after {attempts} attempts; counts={dict(counts)}, "
                        f"rejections={rejections}")
                ids = range(next_pid, next_pid + chunk)
                next_pid += chunk
                args = [(pid, seed, dist, defaults, numerics, keep_waveforms)
                        for pid in ids]
                for cand in pool.map(_simulate_candidate, args):
                    if done():
                        break
                    commit(cand)
                    attempts += 1
                if progress is not None:
                    progress(attempts, sum(counts.values()))

    # reference standardization statistics from a deterministic stratified
    # 2/3 training split; evaluation refits its own statistics per fold
    features = np.array([p.features for p in patients])
    classes = np.array([int(p.health_class) for p in patients])
    train_rows = _stratified_train_rows(classes, seed, 2.0 / 3.0)
    _, mean, std = standardize(features, train_rows)

    metadata = {
        "global_seed": seed,
        "n_target": n_target,
        "class_counts": {cls.name.lower(): counts[cls] for cls in HealthClass},
        "class_targets": {cls.name.lower(): targets[cls] for cls in HealthClass},
        "attempts": attempts,
        "rejections": dict(sorted(rejections.items())),
        "distribution_version": "table1-normal-20pct-v1",
        "feature_order": feature_names(),
        "reconstruction_threshold": RECONSTRUCTION_THRESHOLD,
        "reconstruction_violations": [
            [pid, block, err] for pid, block, err in recon_violations],
        "standardization": {
            "train_rows": [int(i) for i in train_rows],
            "mean": [float(v) for v in mean],
            "std": [float(v) for v in std],
        },
        "config": {
            "numerics": _numerics_doc(numerics),
            "defaults": _defaults_doc(defaults),
            "distributions": _distributions_doc(dist),
        },
    }
    return Dataset(patients=patients, metadata=metadata)


def _stratified_train_rows(classes: np.ndarray, seed: int, fraction: float) -> np.ndarray:
    rng = np.random.default_rng(np.random.SeedSequence(entropy=seed,
                                                       spawn_key=(0xA11C,)))
    rows = []
    for cls in np.unique(classes):
        idx = np.nonzero(classes == cls)[0]
        perm = rng.permutation(len(idx))
        n_train = int(round(fraction * len(idx)))
        rows.extend(idx[perm[:n_train]])
    return np.sort(np.array(rows, dtype=np.int64))


def _numerics_doc(numerics: NumericsConfig) -> dict:
    return {
        "cells_per_vessel": numerics.cells_per_vessel,
        "cfl_number": numerics.cfl_number,
        "max_cycles": numerics.max_cycles,
        "periodicity_tolerance": numerics.periodicity_tolerance,
        "samples_per_cycle": numerics.samples_per_cycle,
        "max_steps_per_cycle": numerics.max_steps_per_cycle,
        "junction_total_pressure": numerics.junction_total_pressure,
    }


def _defaults_doc(defaults: CohortDefaults) -> dict:
    return {
        "blood_density": defaults.blood.density,
        "blood_dynamic_viscosity": defaults.blood.dynamic_viscosity,
        "blood_velocity_profile_constant": defaults.blood.velocity_profile_constant,
        "external_pressure": defaults.external_pressure,
        "diastolic_pressure": defaults.diastolic_pressure,
        "outflow_pressure": defaults.outflow_pressure,
        "period": defaults.period,
    }


def _distributions_doc(dist: ParameterDistributions) -> dict:
    doc = {name: getattr(dist, name) for name in (
        "aorta_length", "aorta_wall_thickness", "aorta_diameter",
        "aorta_youngs_modulus", "iliac_length", "iliac_wall_thickness",
        "iliac_diameter", "iliac_youngs_modulus", "proximal_resistance",
        "distal_resistance", "compliance", "relative_std")}
    doc["inlet_means"] = list(dist.inlet_means)
    return doc


# --- persistence ---------------------------------------------------------------

_PARAM_COLUMNS = (
    "aorta_length", "aorta_wall_thickness", "aorta_diastolic_diameter",
    "aorta_youngs_modulus", "iliac_length", "iliac_wall_thickness",
    "iliac_diastolic_diameter", "iliac_youngs_modulus",
    "wk1_proximal_resistance", "wk1_distal_resistance", "wk1_compliance",
    "wk2_proximal_resistance", "wk2_distal_resistance", "wk2_compliance",
    "inlet_b0", "inlet_a1", "inlet_b1", "inlet_a2", "inlet_b2", "inlet_a3",
    "inlet_b3", "inlet_a4", "inlet_b4", "inlet_a5", "inlet_b5",
    "stenosis_severity", "stenosis_start", "stenosis_end",
)


def _param_row(params: NetworkParameters) -> list[float]:
    row = [params.aorta.length, params.aorta.wall_thickness,
           params.aorta.diastolic_diameter, params.aorta.youngs_modulus,
           params.iliac.length, params.iliac.wall_thickness,
           params.iliac.diastolic_diameter, params.iliac.youngs_modulus]
    for wk in (params.windkessel_1, params.windkessel_2):
        row.extend([wk.proximal_resistance, wk.distal_resistance, wk.compliance])
    row.extend(params.inlet.free_coefficients)
    if params.stenosis is None:
        row.extend([0.0, 0.0, 0.0])
    else:
        spec = params.stenosis[1]
        row.extend([spec.severity, spec.start, spec.end])
    return row


def save_dataset(dataset: Dataset, csv_path) -> None:
    """Write the patient table as CSV plus a metadata JSON sidecar.

    Floats are written as shortest round-trip decimals, so a rerun with the
    same seed reproduces the file byte for byte.
    """
    csv_path = str(csv_path)
    header = ["id", "seed", "class", *_PARAM_COLUMNS, *feature_names()]
    lines = [",".join(header)]
    for p in dataset.patients:
        row = [str(p.id), str(p.seed), str(int(p.health_class))]
        row.extend(repr(v) for v in _param_row(p.params))
        row.extend(repr(float(v)) for v in p.features)
        lines.append(",".join(row))
    with open(csv_path, "w") as fh:
        fh.write("\n".join(lines) + "\n")
    with open(_metadata_path(csv_path), "w") as fh:
        json.dump(dataset.metadata, fh, indent=1, sort_keys=True)
        fh.write("\n")


def _metadata_path(csv_path: str) -> str:
    stem = csv_path[:-4] if csv_path.endswith(".csv") else csv_path
    return stem + "_meta.json"


def load_dataset(csv_path) -> tuple[np.ndarray, np.ndarray, np.ndarray, dict]:
    """Read a dataset CSV (and metadata JSON if present).

    Returns (ids, classes, feature matrix, metadata). Parameter columns are
    not needed for classification work; reread them with numpy if required.
    """
    csv_path = str(csv_path)
    with open(csv_path) as fh:
        header = fh.readline().strip().split(",")
        expected = ["id", "seed", "class", *_PARAM_COLUMNS, *feature_names()]
        if header != expected:
            raise ValueError("dataset file does not match the expected schema")
        ids = []
        classes = []
        rows = []
        for line in fh:
            parts = line.rstrip("\n").split(",")
            ids.append(int(parts[0]))
            classes.append(int(parts[2]))
            rows.append([float(v) for v in parts[3 + len(_PARAM_COLUMNS):]])
    metadata = {}
    try:
        with open(_metadata_path(csv_path)) as fh:
            metadata = json.load(fh)
    except FileNotFoundError:
        pass
    return (np.asarray(ids, dtype=np.int64), np.asarray(classes, dtype=np.int64),
            np.asarray(rows, dtype=float), metadata)
