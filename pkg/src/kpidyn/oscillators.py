"""Non-stationary dynamics lab: forcing, pumping, damping, trap escape.

Works in whitened modal coordinates where the free motion is a bank of
unit-mass oscillators y_i'' + omega_i^2 y_i = 0.  The perturbed runs
add time-dependent forcing, stiffness modulation (the parametric-pump
mechanism for growing amplitude out of a trap), cross-mode stiffness
and a constant damping matrix.  Forced runs are never fed back to the
variational solvers: with non-conservative terms the profit calculus
does not apply, so everything here is simulation-only telemetry.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import DimensionMismatch, FitFailed, InvalidStep
from .model import FloatArray, Trajectory, as_kpi_vector

_SAMPLES_PER_PERIOD = 50        # dt must resolve the fastest mode at least this well


@dataclass
class Sinusoid:
    """One sinusoidal term a * sin(f*t + phase); frequency 0 gives a constant."""

    amplitude: float
    frequency: float
    phase: float = 0.0

    def __post_init__(self):
        self.amplitude = float(self.amplitude)
        self.frequency = float(self.frequency)
        self.phase = float(self.phase)
        if not all(np.isfinite([self.amplitude, self.frequency, self.phase])):
            raise DimensionMismatch("sinusoid parameters must be finite")


@dataclass
class Perturbation:
    """Time-dependent terms added to the free modal oscillators.

    forcing[i]              adds a KPI-independent drive f_i(t).
    stiffness_modulation[i] pumps mode i: omega_i^2 -> omega_i^2 - a sin(f t + phase).
    damping                 constant N x N matrix q (positive definite dissipates,
                            negative definite anti-dissipates).
    cross_stiffness         sparse (i, k, sinusoid) entries coupling mode k into i.

    Entries may be None/omitted; per-mode lists may hold None for quiet modes.
    """

    forcing: tuple[Sinusoid | None, ...] | None = None
    stiffness_modulation: tuple[Sinusoid | None, ...] | None = None
    damping: FloatArray | None = None
    cross_stiffness: tuple[tuple[int, int, Sinusoid], ...] | None = None

    def __post_init__(self):
        if self.forcing is not None:
            self.forcing = tuple(self.forcing)
        if self.stiffness_modulation is not None:
            self.stiffness_modulation = tuple(self.stiffness_modulation)
        if self.damping is not None:
            q = np.asarray(self.damping, dtype=float)
            if q.ndim != 2 or q.shape[0] != q.shape[1]:
                raise DimensionMismatch(f"damping matrix must be square, got {q.shape}")
            if not np.all(np.isfinite(q)):
                raise DimensionMismatch("damping matrix must be finite")
            self.damping = q
        if self.cross_stiffness is not None:
            self.cross_stiffness = tuple(
                (int(i), int(k), s) for i, k, s in self.cross_stiffness)

    def _mode_terms(self, which, n, name):
        terms = getattr(self, which)
        if terms is None:
            return None
        if len(terms) != n:
            raise DimensionMismatch(f"{name} needs one entry per mode ({n})")
        amp = np.zeros(n)
        freq = np.zeros(n)
        phase = np.zeros(n)
        active = False
        for i, s in enumerate(terms):
            if s is None:
                continue
            amp[i], freq[i], phase[i] = s.amplitude, s.frequency, s.phase
            active = True
        return (amp, freq, phase) if active else None


@dataclass
class PerturbedRun:
    """Simulated trajectory in modal coordinates plus its power series."""

    trajectory: Trajectory
    energy: FloatArray


def simulate_perturbed(frequencies, perturbation: Perturbation, y0, v0,
                       t_span: tuple[float, float], dt: float) -> PerturbedRun:
    """Classical RK4 run of the perturbed modal oscillators.

    The energy series uses the unperturbed expression
    E = 0.5 |v|^2 + 0.5 sum omega_i^2 y_i^2, which is exactly the
    quantity the perturbation stops conserving.  RK4 rather than the
    symplectic integrator: with non-conservative terms there is no
    structure left to preserve.
    """
    omega = as_kpi_vector(frequencies, name="frequencies")
    n = omega.size
    y0 = as_kpi_vector(y0, n, "y0")
    v0 = as_kpi_vector(v0, n, "v0")
    t1, t2 = float(t_span[0]), float(t_span[1])
    if t2 <= t1 or dt <= 0.0:
        raise InvalidStep("need t2 > t1 and dt > 0")
    w_max = float(np.abs(omega).max())
    if w_max > 0.0 and dt > (2.0 * np.pi / w_max) / _SAMPLES_PER_PERIOD:
        raise InvalidStep(
            f"dt={dt:g} undersamples the fastest mode; need dt <= "
            f"{(2.0 * np.pi / w_max) / _SAMPLES_PER_PERIOD:g}")

    omega2 = omega * omega
    mod = perturbation._mode_terms("stiffness_modulation", n, "stiffness_modulation")
    if mod is not None:
        pumped = np.abs(mod[0]) > 0.0
        over = pumped & (np.abs(mod[0]) >= omega2)
        if np.any(over):
            i = int(np.nonzero(over)[0][0])
            raise DimensionMismatch(
                f"stiffness modulation amplitude {mod[0][i]:g} on mode {i} reaches "
                f"omega^2 = {omega2[i]:g}; the stiffness must stay positive")
    force = perturbation._mode_terms("forcing", n, "forcing")
    q = perturbation.damping
    if q is not None and q.shape[0] != n:
        raise DimensionMismatch(f"damping matrix is {q.shape[0]}-dim, expected {n}")
    cross = perturbation.cross_stiffness
    if cross:
        for i, k, _ in cross:
            if not (0 <= i < n and 0 <= k < n):
                raise DimensionMismatch(f"cross-stiffness index ({i},{k}) out of range")

    def acc(t, y, v):
        a = -omega2 * y
        if mod is not None:
            a += mod[0] * np.sin(mod[1] * t + mod[2]) * y
        if q is not None:
            a -= q @ v
        if cross:
            for i, k, s in cross:
                a[i] -= s.amplitude * np.sin(s.frequency * t + s.phase) * y[k]
        if force is not None:
            a -= force[0] * np.sin(force[1] * t + force[2])
        return a

    steps = max(1, int(round((t2 - t1) / dt)))
    h = (t2 - t1) / steps
    times = np.linspace(t1, t2, steps + 1)
    ys = np.empty((steps + 1, n))
    vs = np.empty((steps + 1, n))
    y = y0.copy()
    v = v0.copy()
    ys[0] = y
    vs[0] = v
    for k in range(1, steps + 1):
        t = times[k - 1]
        k1v = acc(t, y, v)
        y2 = y + 0.5 * h * v
        v2 = v + 0.5 * h * k1v
        k2v = acc(t + 0.5 * h, y2, v2)
        y3 = y + 0.5 * h * v2
        v3 = v + 0.5 * h * k2v
        k3v = acc(t + 0.5 * h, y3, v3)
        y4 = y + h * v3
        v4 = v + h * k3v
        k4v = acc(t + h, y4, v4)
        y = y + (h / 6.0) * (v + 2.0 * v2 + 2.0 * v3 + v4)
        v = v + (h / 6.0) * (k1v + 2.0 * k2v + 2.0 * k3v + k4v)
        ys[k] = y
        vs[k] = v

    energy = 0.5 * np.sum(vs * vs, axis=1) + 0.5 * np.sum(omega2 * ys * ys, axis=1)
    traj = Trajectory(times=times, states=ys, velocities=vs)
    return PerturbedRun(trajectory=traj, energy=energy)


@dataclass
class ResponseCurve:
    """Peak modal response per scanned forcing frequency."""

    frequencies: FloatArray
    peak_response: FloatArray


def resonance_scan(frequencies, forcing_amplitude: float, scan_grid,
                   duration: float, dt: float | None = None) -> ResponseCurve:
    """Drive every mode at each grid frequency and record the peak |y|.

    Runs start from rest with zero damping; the response peaks where the
    drive frequency meets an eigenfrequency.
    """
    omega = as_kpi_vector(frequencies, name="frequencies")
    grid = as_kpi_vector(scan_grid, name="scan_grid")
    if duration <= 0.0:
        raise ValueError("duration must be positive")
    peaks = np.array([forcing_peak(omega, forcing_amplitude, f, duration, dt)
                      for f in grid])
    return ResponseCurve(frequencies=grid, peak_response=peaks)


def forcing_peak(frequencies, amplitude: float, drive_frequency: float,
                 duration: float, dt: float | None = None) -> float:
    """Peak |y| of a from-rest run driven at one frequency on every mode."""
    omega = as_kpi_vector(frequencies, name="frequencies")
    h = dt if dt is not None else _auto_dt(max(float(np.abs(omega).max()),
                                               abs(drive_frequency)))
    pert = Perturbation(forcing=tuple(Sinusoid(amplitude, drive_frequency)
                                      for _ in omega))
    rest = np.zeros(omega.size)
    run = simulate_perturbed(omega, pert, rest, rest, (0.0, duration), h)
    return float(np.abs(run.trajectory.states).max())


def _auto_dt(fastest: float) -> float:
    return (2.0 * np.pi / max(fastest, 1e-12)) / 64.0


@dataclass
class GrowthEstimate:
    """Fitted exponential envelope rate from per-period peaks."""

    exponent: float
    fit_residual: float
    window: tuple[float, float]


def parametric_growth_rate(omega: float, pump_amplitude: float, pump_phase: float,
                           duration: float, dt: float | None = None) -> GrowthEstimate:
    """Pump a single mode at exactly twice its frequency and fit the envelope.

    omega^2 is modulated by -a sin(2 omega t + phase); the run starts at
    unit amplitude (y=1, v=0), so the pump phase is a genuine degree of
    freedom of the experiment (phase pi grows fastest for this start).
    Per-period peaks of |y| are fitted by least squares in log space.

    Raises FitFailed when the residual, expressed as an equivalent slope
    error, exceeds 10% of the fitted exponent -- unless it is absolutely
    negligible (below 0.01*omega), so clean zero-growth runs pass.
    """
    omega = float(omega)
    if omega <= 0.0:
        raise ValueError("omega must be positive")
    a = float(pump_amplitude)
    if not 0.0 <= a < omega * omega / 5.0:
        raise ValueError(f"pump amplitude must lie in [0, omega^2/5) = [0, {omega*omega/5.0:g})")
    period = 2.0 * np.pi / omega
    if duration < 20.0 * period:
        raise ValueError(f"duration {duration:g} is under 20 periods ({20*period:g})")
    h = dt if dt is not None else period / 200.0

    pert = Perturbation(
        stiffness_modulation=(Sinusoid(a, 2.0 * omega, pump_phase),) if a > 0.0 else None)
    run = simulate_perturbed([omega], pert, [1.0], [0.0], (0.0, duration), h)
    return fit_growth_exponent(run.trajectory.times,
                               run.trajectory.states[:, 0], period)


def fit_growth_exponent(times, signal, period: float) -> GrowthEstimate:
    """Least-squares exponent of the per-period peak envelope of |signal|.

    Peaks are collected per whole oscillation period (no transform
    machinery needed at desk scale) and fitted linearly in log space.
    The fit is rejected only when its residual, read as a slope error,
    is both above 10% of the exponent and above the absolute noise
    scale 0.01 * (2*pi/period): clean zero-growth runs must pass.
    """
    t = np.asarray(times, dtype=float)
    y = np.abs(np.asarray(signal, dtype=float))
    if period <= 0.0:
        raise ValueError("period must be positive")
    n_periods = int((t[-1] - t[0]) / period)
    if n_periods < 10:
        raise ValueError("envelope fit needs at least 10 whole periods")
    peak_t = np.empty(n_periods)
    peak_y = np.empty(n_periods)
    for j in range(n_periods):
        lo = t[0] + j * period
        sel = (t >= lo) & (t < lo + period)
        peak_t[j] = lo + 0.5 * period
        peak_y[j] = y[sel].max()
    if np.any(peak_y <= 0.0):
        raise FitFailed("signal has a dead period; no exponential envelope")

    slope, intercept = np.polyfit(peak_t, np.log(peak_y), 1)
    resid = np.log(peak_y) - (slope * peak_t + intercept)
    rms = float(np.sqrt(np.mean(resid * resid)))
    slope_err = rms / float(peak_t[-1] - peak_t[0])
    omega = 2.0 * np.pi / period
    if slope_err > 0.1 * abs(slope) and slope_err > 0.01 * omega:
        raise FitFailed(
            f"envelope fit residual {rms:.3e} (slope-equivalent {slope_err:.3e}) "
            f"is too large for exponent {slope:.3e}")
    return GrowthEstimate(exponent=float(slope), fit_residual=rms,
                          window=(float(peak_t[0]), float(peak_t[-1])))


CONSTRUCTIVE = "constructive"
DESTRUCTIVE = "destructive"
NEUTRAL = "neutral"


def classify_force(times, energy, rel_threshold: float) -> str:
    """Label a run by the sign of its mean power trend.

    Constructive forces push the least-squares slope of E(t) above
    +rel_threshold * mean(E) / span, destructive below the negative of
    it, anything in between is neutral.
    """
    t = np.asarray(times, dtype=float)
    e = np.asarray(energy, dtype=float)
    if t.size != e.size or t.size < 3:
        raise ValueError("need matching series of length >= 3")
    if rel_threshold <= 0.0:
        raise ValueError("rel_threshold must be positive")
    slope = np.polyfit(t, e, 1)[0]
    span = float(t[-1] - t[0])
    gate = rel_threshold * float(np.mean(e)) / span
    if slope > gate:
        return CONSTRUCTIVE
    if slope < -gate:
        return DESTRUCTIVE
    return NEUTRAL


def escape_time(well_radius: float, frequencies, perturbation: Perturbation,
                y0, v0, t_span: tuple[float, float], dt: float) -> float | None:
    """First time any modal coordinate leaves the trap radius, if ever.

    Returns None when max_i |y_i| stays at or below the radius for the
    whole span.
    """
    if well_radius <= 0.0:
        raise ValueError("well radius must be positive")
    run = simulate_perturbed(frequencies, perturbation, y0, v0, t_span, dt)
    outside = np.abs(run.trajectory.states).max(axis=1) > well_radius
    idx = np.nonzero(outside)[0]
    if idx.size == 0:
        return None
    return float(run.trajectory.times[int(idx[0])])
