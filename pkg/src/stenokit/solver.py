"""Time-domain solution of the bifurcation network and probe extraction.

``simulate`` marches the 1D mass/momentum system (closed by the elastic tube
law) cycle by cycle until two consecutive cycles agree at all six probes, then
returns the converged cycle uniformly resampled. Probes are the aorta inlet
cell (P1, Q1) and the two iliac outlet cells (P2, Q2 and P3, Q3).
"""

from __future__ import annotations

import math
import struct
from dataclasses import dataclass

import numpy as np

from . import _kernels
from .model import (NetworkParameters, WindkesselParams, inlet_flow,
                    reference_area_profile, tube_law_pressure, tube_law_stiffness)


class SolverError(RuntimeError):
    """Base class for simulation failures."""


class NonConvergenceError(SolverError):
    """The periodicity criterion was not met within the cycle budget."""

    def __init__(self, cycles: int, residual: float):
        super().__init__(f"no periodic state after {cycles} cycles "
                         f"(last residual {residual:.3e})")
        self.cycles = cycles
        self.residual = residual


class NumericalBlowupError(SolverError):
    """Non-finite or non-positive state encountered."""


class StepUnderflowError(SolverError):
    """The time step collapsed below the per-cycle step budget; usually a
    pathological parameter draw."""


class JunctionSolveError(SolverError):
    """The bifurcation coupling failed to converge."""

    def __init__(self, iterations: int):
        super().__init__(f"junction solve failed after {iterations} iterations")
        self.iterations = iterations


@dataclass(frozen=True)
class NumericsConfig:
    cells_per_vessel: int = 64
    cfl_number: float = 0.9
    max_cycles: int = 50
    periodicity_tolerance: float = 1e-3
    samples_per_cycle: int = 256
    max_steps_per_cycle: int = 500_000
    junction_total_pressure: bool = False

    def __post_init__(self) -> None:
        if self.cells_per_vessel < 16:
            raise ValueError("cells_per_vessel must be at least 16")
        if not 0.0 < self.cfl_number <= 1.0:
            raise ValueError("cfl_number must lie in (0, 1]")
        if self.periodicity_tolerance <= 0:
            raise ValueError("periodicity_tolerance must be positive")
        if self.samples_per_cycle < 64:
            raise ValueError("samples_per_cycle must be at least 64")
        if self.max_cycles < 1:
            raise ValueError("max_cycles must be at least 1")


@dataclass(frozen=True)
class Waveforms:
    """One converged cycle at the six probes, uniformly sampled (Pa, m^3/s)."""

    period: float
    p1: np.ndarray
    q1: np.ndarray
    p2: np.ndarray
    q2: np.ndarray
    p3: np.ndarray
    q3: np.ndarray

    @property
    def samples_per_cycle(self) -> int:
        return len(self.p1)

    def signals(self) -> dict[str, np.ndarray]:
        return {"p1": self.p1, "q1": self.q1, "p2": self.p2,
                "q2": self.q2, "p3": self.p3, "q3": self.q3}


@dataclass(frozen=True)
class SimulationResult:
    waveforms: Waveforms
    cycles_run: int
    periodicity_residual: float
    mass_residual: float


def windkessel_advance(node_pressure: float, inflow: float,
                       params: WindkesselParams, dt: float) -> tuple[float, float]:
    """One time step of the RCR outlet.

    The node pressure obeys dP_c/dt = (Q - (P_c - P_out)/R2)/C and is advanced
    exactly with the inflow held fixed over the step; the boundary pressure is
    P = Q R1 + P_c. Returns (new node pressure, boundary pressure).
    """
    if dt <= 0:
        raise ValueError("dt must be positive")
    p_eq = params.outflow_pressure + inflow * params.distal_resistance
    tau = params.distal_resistance * params.compliance
    p_new = p_eq + (node_pressure - p_eq) * math.exp(-dt / tau)
    return p_new, inflow * params.proximal_resistance + p_new


def bifurcation_coupling(parent_state: tuple[float, float],
                         daughter_states: tuple[tuple[float, float], tuple[float, float]],
                         parent_refs: tuple[float, float],
                         daughter_refs: tuple[float, float],
                         blood_density: float,
                         total_pressure: bool = False):
    """Face states where the parent end meets the two daughter starts.

    ``parent_state`` / ``daughter_states`` are (area, velocity) at the cells
    adjacent to the junction; ``*_refs`` are (reference area, wall stiffness)
    pairs, the daughters sharing one. Returns ((A, U) per side, interface
    volumetric fluxes per side); daughter fluxes sum to the parent flux by
    construction.
    """
    (a_p, u_p) = parent_state
    (a_1, u_1), (a_2, u_2) = daughter_states
    ad_p, beta_p = parent_refs
    ad_d, beta_d = daughter_refs
    rho = blood_density
    w1 = u_p + 4.0 * _kernels._celerity(a_p, ad_p, beta_p, rho)
    w2a = u_1 - 4.0 * _kernels._celerity(a_1, ad_d, beta_d, rho)
    w2b = u_2 - 4.0 * _kernels._celerity(a_2, ad_d, beta_d, rho)
    if total_pressure:
        phi_p, phi_a, phi_b, iters, ok = _kernels._junction_total(
            w1, w2a, w2b, ad_p, ad_d, ad_d, beta_p, beta_d, rho)
    else:
        phi, iters, ok = _kernels._junction_static(
            w1, w2a, w2b, ad_p, ad_d, ad_d, beta_p, beta_d, rho)
        phi_p = phi_a = phi_b = phi
    if not ok:
        raise JunctionSolveError(iters)
    out_states = []
    for phi_s, ad_s, beta_s, w, sgn in ((phi_p, ad_p, beta_p, w1, -1.0),
                                        (phi_a, ad_d, beta_d, w2a, 1.0),
                                        (phi_b, ad_d, beta_d, w2b, 1.0)):
        a_s = _kernels._area_from_phi(phi_s, ad_s, beta_s)
        u_s = w + sgn * 4.0 * _kernels._celerity(a_s, ad_s, beta_s, rho)
        out_states.append((a_s, u_s))
    fluxes = tuple(a * u for a, u in out_states)
    return tuple(out_states), fluxes


def _geometry_arrays(params: NetworkParameters, n: int):
    """Cell/face reference areas, stiffnesses and spacings for the 3 vessels."""
    ad_c = np.empty((3, n))
    ad_f = np.empty((3, n + 1))
    beta = np.empty(3)
    dx = np.empty(3)
    for v, vessel_id in enumerate(("aorta", "iliac1", "iliac2")):
        geom = params.geometry_of(vessel_id)
        sten = params.stenosis_of(vessel_id)
        dx[v] = geom.length / n
        faces = np.linspace(0.0, geom.length, n + 1)  # endpoints exact
        centers = 0.5 * (faces[:-1] + faces[1:])
        ad_c[v] = reference_area_profile(geom, sten, centers)
        ad_f[v] = reference_area_profile(geom, sten, faces)
        beta[v] = tube_law_stiffness(geom)
    return ad_c, ad_f, beta, dx


def probe_waveforms(times: np.ndarray, areas: np.ndarray, velocities: np.ndarray,
                    probe_refs, probe_betas, period: float, samples_per_cycle: int,
                    external_pressure: float, diastolic_pressure: float) -> Waveforms:
    """Resample recorded probe samples onto the uniform cycle grid.

    ``areas``/``velocities`` are (3, m) records at the inlet and two outlet
    probe cells over one cycle starting at times[0]; pressure is computed from
    the resampled areas through the tube law, flow as area times velocity, so
    the pressure-area relation holds exactly at every output sample.
    """
    t_rel = times - times[0]
    grid = period * np.arange(samples_per_cycle) / samples_per_cycle
    out_p = []
    out_q = []
    for k in range(3):
        a = np.interp(grid, t_rel, areas[k])
        u = np.interp(grid, t_rel, velocities[k])
        p = tube_law_pressure(a, probe_refs[k], probe_betas[k],
                              external_pressure, diastolic_pressure)
        out_p.append(p)
        out_q.append(a * u)
    return Waveforms(period=period, p1=out_p[0], q1=out_q[0],
                     p2=out_p[1], q2=out_q[1], p3=out_p[2], q3=out_q[2])


def _cycle_residual(current: Waveforms, previous: Waveforms) -> float:
    worst = 0.0
    for name, sig in current.signals().items():
        prev = previous.signals()[name]
        denom = math.sqrt(float(np.sum(sig * sig))) + 1e-300
        diff = math.sqrt(float(np.sum((sig - prev) ** 2)))
        worst = max(worst, diff / denom)
    return worst


def _mass_residual(w: Waveforms) -> float:
    q_in = float(np.mean(w.q1))
    q_out = float(np.mean(w.q2) + np.mean(w.q3))
    return abs(q_in - q_out) / max(abs(q_in), 1e-300)


def simulate(params: NetworkParameters, numerics: NumericsConfig | None = None) -> SimulationResult:
    """Run the network to a periodic state and return the converged cycle.

    Raises :class:`NonConvergenceError`, :class:`NumericalBlowupError`,
    :class:`StepUnderflowError` or :class:`JunctionSolveError` on failure.
    """
    numerics = numerics or NumericsConfig()
    n = numerics.cells_per_vessel
    ad_c, ad_f, beta, dx = _geometry_arrays(params, n)

    p0 = params.external_pressure + params.diastolic_pressure
    blood = params.blood
    fric_coef = 2.0 * (blood.velocity_profile_constant + 2.0) * \
        blood.dynamic_viscosity * math.pi

    wk = (params.windkessel_1, params.windkessel_2)
    r1 = np.array([w.proximal_resistance for w in wk])
    r2 = np.array([w.distal_resistance for w in wk])
    cwk = np.array([w.compliance for w in wk])
    pout_rel = np.array([w.outflow_pressure - p0 for w in wk])

    # quasi-steady start at the mean-flow operating point: a uniform
    # transmural pressure balancing the mean inflow against the outlet
    # resistances, velocities from steady mass conservation, Windkessel nodes
    # at their matching values; the slow volume-relaxation mode then starts
    # near zero amplitude
    q_mean = float(params.inlet.cosine_coeffs[0])
    r_branch = r1 + r2
    phi_init = ((q_mean + np.sum(pout_rel / r_branch)) / np.sum(1.0 / r_branch))
    phi_floor = -0.9 * min(beta[v] / math.sqrt(ad_c[v].min()) for v in range(3))
    if not np.isfinite(phi_init) or phi_init <= phi_floor:
        phi_init = 0.0
    sqrt_area = np.sqrt(ad_c) + phi_init * ad_c / beta[:, None]
    area = sqrt_area ** 2
    q_branch = (phi_init - pout_rel) / r_branch
    q_init = np.array([q_mean, q_branch[0], q_branch[1]])
    vel = q_init[:, None] / area
    pc_rel = pout_rel + q_branch * r2

    inlet = params.inlet
    sines = np.asarray(inlet.sine_coeffs)
    cosines = np.asarray(inlet.cosine_coeffs)
    period = inlet.period
    omega = 2.0 * math.pi / period

    max_steps = numerics.max_steps_per_cycle
    tbuf = np.empty(max_steps + 2)
    probe_a = np.empty((3, max_steps + 2))
    probe_u = np.empty((3, max_steps + 2))
    probe_refs = (ad_c[0, 0], ad_c[1, n - 1], ad_c[2, n - 1])
    probe_betas = (beta[0], beta[1], beta[2])
    junction_mode = 1 if numerics.junction_total_pressure else 0

    previous: Waveforms | None = None
    residual = math.inf
    for cycle in range(1, numerics.max_cycles + 1):
        t0 = (cycle - 1) * period
        status, rec, jiters = _kernels.advance_cycle(
            area, vel, pc_rel, ad_c, ad_f, beta, dx, blood.density, fric_coef,
            r1, r2, cwk, pout_rel, sines, cosines, omega, t0, period,
            numerics.cfl_number, junction_mode, max_steps,
            tbuf, probe_a, probe_u)
        if status == _kernels.STATUS_BLOWUP:
            raise NumericalBlowupError(f"non-finite or non-positive state in cycle {cycle}")
        if status == _kernels.STATUS_STEP_BUDGET:
            raise StepUnderflowError(
                f"cycle {cycle} exceeded {max_steps} steps; time step collapsed")
        if status == _kernels.STATUS_JUNCTION_FAIL:
            raise JunctionSolveError(jiters)
        if status == _kernels.STATUS_BOUNDARY_FAIL:
            raise NumericalBlowupError(f"boundary solve failed in cycle {cycle}")
        current = probe_waveforms(tbuf[:rec], probe_a[:, :rec], probe_u[:, :rec],
                                  probe_refs, probe_betas, period,
                                  numerics.samples_per_cycle,
                                  params.external_pressure, params.diastolic_pressure)
        if previous is not None:
            residual = _cycle_residual(current, previous)
            if residual < numerics.periodicity_tolerance:
                return SimulationResult(waveforms=current, cycles_run=cycle,
                                        periodicity_residual=residual,
                                        mass_residual=_mass_residual(current))
        previous = current
    raise NonConvergenceError(numerics.max_cycles, residual)


# --- raw waveform dump --------------------------------------------------------

_WAVE_MAGIC = b"1DWAVEBN"
_WAVE_VERSION = 1
_SIGNAL_ORDER = ("p1", "q1", "p2", "q2", "p3", "q3")


def write_waveforms(path, waveforms: Waveforms) -> None:
    """Binary dump: 32-byte header (magic, version, samples, period) then six
    little-endian float64 arrays in P1, Q1, P2, Q2, P3, Q3 order."""
    header = struct.pack("<8sII d 8x", _WAVE_MAGIC, _WAVE_VERSION,
                         waveforms.samples_per_cycle, waveforms.period)
    assert len(header) == 32
    with open(path, "wb") as fh:
        fh.write(header)
        for name in _SIGNAL_ORDER:
            fh.write(np.ascontiguousarray(
                waveforms.signals()[name], dtype="<f8").tobytes())


def read_waveforms(path) -> Waveforms:
    with open(path, "rb") as fh:
        header = fh.read(32)
        magic, version, samples, period = struct.unpack("<8sII d 8x", header)
        if magic != _WAVE_MAGIC:
            raise ValueError("not a waveform dump")
        if version != _WAVE_VERSION:
            raise ValueError(f"unsupported waveform dump version {version}")
        arrays = {}
        for name in _SIGNAL_ORDER:
            arrays[name] = np.frombuffer(fh.read(8 * samples), dtype="<f8").copy()
    return Waveforms(period=period, **arrays)
