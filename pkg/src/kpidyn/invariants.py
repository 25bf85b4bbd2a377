"""Conserved quantities along trajectories and drift alarms.

Along an optimal path the business power E = U + K is constant and the
stationarity residual D vanishes; in the harmonic regime each mode also
conserves an amplitude/phase pair.  Watching these series drift is the
cheapest early-warning signal that the evolution left the optimum.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import DimensionMismatch, ZeroFrequency
from .model import FloatArray, GainModel, LossModel, Trajectory
from .transforms import ModalBasis
from .variational import el_residual

_DRIFT_FLOOR = 1e-30   # reference floor so E(0) = 0 stays well-defined


def power_series(loss: LossModel, gain: GainModel, trajectory: Trajectory) -> FloatArray:
    """Business power E(t) = U(x) + K(v) sample by sample.

    K being quadratic collapses the defining combination
    v . dK/dv - K + U to U + K; both are evaluated and cross-checked to
    1e-12 as an internal consistency guard.
    """
    if trajectory.n != loss.n:
        raise DimensionMismatch(f"trajectory dimension {trajectory.n} != loss {loss.n}")
    u = gain.values(trajectory.states)
    k = loss.values(trajectory.velocities)
    reduced = u + k
    vg = 2.0 * (trajectory.velocities @ loss.k_matrix)
    general = np.einsum("ij,ij->i", trajectory.velocities, vg) - k + u
    scale = max(1.0, float(np.abs(reduced).max()))
    if float(np.abs(general - reduced).max()) > 1e-12 * scale:
        raise RuntimeError("power formulas disagree beyond 1e-12; loss form corrupted")
    return reduced


@dataclass
class ModalInvariantSeries:
    """Per-mode amplitude/phase series; phase is flagged where undefined."""

    amplitudes: FloatArray          # (M, N)
    phases: FloatArray              # (M, N), in [0, 2*pi/omega_i)
    phase_defined: np.ndarray       # (M, N) bool; False at exact rest


def harmonic_invariants(basis: ModalBasis, trajectory: Trajectory) -> ModalInvariantSeries:
    """Amplitude a_i(t) and phase shift c_i(t) of each mode.

    Both are constant along exact harmonic motion, which makes them
    first-order conserved quantities of the stationary regime.
    """
    omega = basis.frequencies
    if np.any(omega <= 1e-12):
        raise ZeroFrequency("harmonic invariants require strictly positive frequencies")
    if trajectory.n != basis.n:
        raise DimensionMismatch(f"trajectory dimension {trajectory.n} != basis {basis.n}")
    y, v = basis.to_modal_many(trajectory.states, trajectory.velocities)
    amp = np.hypot(y, v / omega[None, :])
    period = 2.0 * np.pi / omega
    t = trajectory.times[:, None]
    phase = (t - np.arctan2(y * omega[None, :], v) / omega[None, :]) % period[None, :]
    defined = amp > 0.0
    phase = np.where(defined, phase, 0.0)
    return ModalInvariantSeries(amplitudes=amp, phases=phase, phase_defined=defined)


@dataclass
class Alarm:
    time: float
    invariant: str
    deviation: float


@dataclass
class InvariantReport:
    """Everything the monitor computed for one trajectory."""

    times: FloatArray
    power_series: FloatArray            # length M
    residual_series: FloatArray         # |D| at interior points, length M-2
    modal_series: ModalInvariantSeries | None
    drift: float                        # max relative E deviation from E(0)
    alarms: list[Alarm] = field(default_factory=list)


def drift_alarm(report: InvariantReport, rel_tol: float) -> list[Alarm]:
    """First-crossing alarms for each monitored invariant.

    Monitors the power series and, when modal data is present, each
    mode's amplitude.  Deviation is relative to the series' initial
    value (floored so a zero start does not divide out).  Phases are
    not monitored: a relative deviation is ill-defined under their
    modular wrap-around.
    """
    if rel_tol <= 0.0:
        raise ValueError("rel_tol must be positive")
    alarms: list[Alarm] = []
    _scan(report.times, report.power_series, "power", rel_tol, alarms)
    if report.modal_series is not None:
        for i in range(report.modal_series.amplitudes.shape[1]):
            _scan(report.times, report.modal_series.amplitudes[:, i],
                  f"amplitude[{i}]", rel_tol, alarms)
    return alarms


def _scan(times, series, name, rel_tol, alarms):
    ref = float(series[0])
    denom = max(abs(ref), _DRIFT_FLOOR)
    dev = np.abs(series - ref) / denom
    over = np.nonzero(dev > rel_tol)[0]
    if over.size:
        k = int(over[0])
        alarms.append(Alarm(time=float(times[k]), invariant=name,
                            deviation=float(dev[k])))


def build_report(loss: LossModel, gain: GainModel, trajectory: Trajectory,
                 basis: ModalBasis | None = None,
                 rel_tol: float = 1e-3) -> InvariantReport:
    """Assemble the full invariant report for a trajectory."""
    power = power_series(loss, gain, trajectory)
    resid = el_residual(loss, gain, trajectory)
    resid_norm = np.linalg.norm(resid, axis=1)
    modal = harmonic_invariants(basis, trajectory) if basis is not None else None
    denom = max(abs(float(power[0])), _DRIFT_FLOOR)
    drift = float(np.abs(power - power[0]).max() / denom)
    report = InvariantReport(times=trajectory.times, power_series=power,
                             residual_series=resid_norm, modal_series=modal,
                             drift=drift)
    report.alarms = drift_alarm(report, rel_tol)
    return report
