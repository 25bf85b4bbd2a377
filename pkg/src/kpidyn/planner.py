"""Operational planning: the discrete next-KPI recurrence.

Replacing the time derivatives of the stationarity condition by their
finite-difference stencils and solving for the newest point turns the
optimal dynamics into a routine rule: the next KPI target follows from
the current and previous ones.  Algebraically this is the leapfrog step
of M x'' = -grad U, so planning and simulation share one stencil.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import DimensionMismatch, ZeroFrequency
from .model import FloatArray, GainModel, LossModel, Trajectory, as_kpi_vector


@dataclass
class PlanState:
    """The rotating (previous, current) pair plus the planning interval.

    A cold start with no history uses x_prev = x_curr (a rest start).
    """

    x_prev: FloatArray
    x_curr: FloatArray
    dt: float

    def __post_init__(self):
        self.x_prev = as_kpi_vector(self.x_prev, name="x_prev").copy()
        self.x_curr = as_kpi_vector(self.x_curr, self.x_prev.size, "x_curr").copy()
        self.dt = float(self.dt)
        if self.dt <= 0.0:
            raise DimensionMismatch("planning interval dt must be positive")

    @property
    def n(self) -> int:
        return self.x_curr.size


def next_kpi(loss: LossModel, gain: GainModel, state: PlanState) -> FloatArray:
    """One planning step: x_next = 2 x_curr - x_prev - dt^2 M^-1 grad U(x_curr)."""
    if state.n != loss.n:
        raise DimensionMismatch(f"plan dimension {state.n} != loss dimension {loss.n}")
    m_inv = loss.mass_inverse()
    step = state.dt * state.dt
    return 2.0 * state.x_curr - state.x_prev - step * (m_inv @ gain.gradient(state.x_curr))


def plan_horizon(loss: LossModel, gain: GainModel, state: PlanState,
                 steps: int) -> Trajectory:
    """Iterate the recurrence, rotating (prev, curr) each step.

    Returns the current point plus `steps` planned points on the grid
    t = 0, dt, ..., steps*dt, with central-difference velocities (one
    step of lookahead supplies the final one, so every velocity matches
    the leapfrog integrator's).
    """
    if steps < 1:
        raise ValueError("steps must be >= 1")
    if state.n != loss.n:
        raise DimensionMismatch(f"plan dimension {state.n} != loss dimension {loss.n}")
    m_inv = loss.mass_inverse()
    grad = gain._hot_gradient()
    dt = state.dt
    dt2 = dt * dt

    xs = np.empty((steps + 2, state.n))
    prev = state.x_prev.copy()
    curr = state.x_curr.copy()
    xs[0] = curr
    for k in range(1, steps + 2):
        nxt = 2.0 * curr - prev - dt2 * (m_inv @ grad(curr))
        xs[k] = nxt
        prev = curr
        curr = nxt

    states = xs[:steps + 1]
    vels = np.empty_like(states)
    vels[0] = (xs[1] - state.x_prev) / (2.0 * dt)
    vels[1:] = (xs[2:] - xs[:-2]) / (2.0 * dt)
    times = np.linspace(0.0, steps * dt, steps + 1)
    return Trajectory(times=times, states=states, velocities=vels)


def phase_advance(frequencies, y, v, dt: float) -> tuple[FloatArray, FloatArray]:
    """First-order-invariant planning for the harmonic regime.

    Holds each mode's amplitude and phase shift fixed and advances time
    by dt; exact for pure eigen-cycle motion, no history needed.
    """
    omega = as_kpi_vector(frequencies, name="frequencies")
    if np.any(omega <= 1e-12):
        raise ZeroFrequency("phase advance requires strictly positive frequencies")
    y = as_kpi_vector(y, omega.size, "y")
    v = as_kpi_vector(v, omega.size, "v")
    c = np.cos(omega * dt)
    s = np.sin(omega * dt)
    y_next = y * c + (v / omega) * s
    v_next = -y * omega * s + v * c
    return y_next, v_next
