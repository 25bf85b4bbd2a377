"""Profit functional and two-point boundary-value solvers.

The optimal path between two KPI states maximizes the accumulated
profit integral of U(x) - K(v).  Stationarity gives the second-order
equation M x'' = -grad U with mass matrix M = 2K, integrated here by
velocity Verlet.  Two independent routes solve the boundary problem:
Newton shooting on the unknown initial velocity, and direct
maximization of the discretized profit over interior grid points.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import (Degenerate, DegenerateInterval, DimensionMismatch,
                     NoConvergence, ZeroFrequency)
from .model import (BoundaryConditions, FloatArray, GainModel, LossModel,
                    Trajectory, as_kpi_vector, central_velocities)


@dataclass
class SolverSettings:
    """Knobs for both BVP routes; defaults suit desk-scale problems."""

    dt: float = 1e-3
    shooting_tol: float | None = None   # None: 1e-8 * (1 + |x2|)
    max_newton_iters: int = 50
    direct_max_iters: int = 5000
    direct_grad_tol: float = 1e-8

    def __post_init__(self):
        if self.dt <= 0.0:
            raise ValueError("dt must be positive")
        if self.shooting_tol is not None and self.shooting_tol <= 0.0:
            raise ValueError("shooting_tol must be positive")
        if self.max_newton_iters < 1 or self.direct_max_iters < 1:
            raise ValueError("iteration caps must be >= 1")
        if self.direct_grad_tol <= 0.0:
            raise ValueError("direct_grad_tol must be positive")

    def resolved_shooting_tol(self, x2: FloatArray) -> float:
        if self.shooting_tol is not None:
            return self.shooting_tol
        return 1e-8 * (1.0 + float(np.linalg.norm(x2)))


@dataclass
class HarmonicSolution:
    """Per-mode sine orbits y_i(t) = a_i sin(omega_i (t - c_i))."""

    amplitudes: FloatArray
    phase_shifts: FloatArray
    frequencies: FloatArray

    def sample(self, times) -> tuple[FloatArray, FloatArray]:
        """States and velocities at the given times, shape (M, N)."""
        t = np.atleast_1d(np.asarray(times, dtype=float))
        arg = self.frequencies[None, :] * (t[:, None] - self.phase_shifts[None, :])
        y = self.amplitudes[None, :] * np.sin(arg)
        v = (self.amplitudes * self.frequencies)[None, :] * np.cos(arg)
        return y, v


def compute_profit(loss: LossModel, gain: GainModel, trajectory: Trajectory) -> float:
    """Trapezoidal quadrature of U(x(t)) - K(v(t)) over the stored grid."""
    if trajectory.n != loss.n:
        raise DimensionMismatch(f"trajectory dimension {trajectory.n} != loss {loss.n}")
    integrand = gain.values(trajectory.states) - loss.values(trajectory.velocities)
    return float(np.trapezoid(integrand, x=trajectory.times))


def el_residual(loss: LossModel, gain: GainModel, trajectory: Trajectory) -> FloatArray:
    """Interior-point stationarity residual D = 2K x''_disc + grad U.

    Identically zero (to truncation) along optimal paths, which makes it
    a pointwise health diagnostic.  Shape (M-2, N).
    """
    if trajectory.m < 3:
        raise DimensionMismatch("residual needs at least 3 samples")
    if trajectory.n != loss.n:
        raise DimensionMismatch(f"trajectory dimension {trajectory.n} != loss {loss.n}")
    x = trajectory.states
    dt = trajectory.dt
    acc = (x[2:] - 2.0 * x[1:-1] + x[:-2]) / (dt * dt)
    return 2.0 * (acc @ loss.k_matrix) + gain.gradients(x[1:-1])


def _grid(t1: float, t2: float, dt: float) -> tuple[FloatArray, float, int]:
    span = t2 - t1
    if span <= 0.0 or dt <= 0.0:
        raise ValueError("need t2 > t1 and dt > 0")
    n = max(1, int(round(span / dt)))
    return np.linspace(t1, t2, n + 1), span / n, n


def integrate_ivp(loss: LossModel, gain: GainModel, x0, v0,
                  t_span: tuple[float, float], dt: float) -> Trajectory:
    """Velocity-Verlet integration of M x'' = -grad U, M = 2K.

    The step is snapped so the span divides evenly; the mass matrix is
    factorized once up front.
    """
    x0 = as_kpi_vector(x0, loss.n, "x0")
    v0 = as_kpi_vector(v0, loss.n, "v0")
    times, h, n = _grid(t_span[0], t_span[1], dt)
    m_inv = loss.mass_inverse()
    grad = gain._hot_gradient()

    states = np.empty((n + 1, loss.n))
    vels = np.empty((n + 1, loss.n))
    x = x0.copy()
    v = v0.copy()
    a = -(m_inv @ grad(x))
    states[0] = x
    vels[0] = v
    half_h2 = 0.5 * h * h
    half_h = 0.5 * h
    for k in range(1, n + 1):
        x = x + v * h + a * half_h2
        a_new = -(m_inv @ grad(x))
        v = v + (a + a_new) * half_h
        a = a_new
        states[k] = x
        vels[k] = v
    return Trajectory(times=times, states=states, velocities=vels)


def _terminal_state(loss_minv, grad, x0, v0, h, n):
    # storage-free Verlet used by the shooting Jacobian
    x = x0.copy()
    v = v0.copy()
    a = -(loss_minv @ grad(x))
    half_h2 = 0.5 * h * h
    half_h = 0.5 * h
    for _ in range(n):
        x = x + v * h + a * half_h2
        a_new = -(loss_minv @ grad(x))
        v = v + (a + a_new) * half_h
        a = a_new
    return x


def solve_bvp_shooting(loss: LossModel, gain: GainModel, bc: BoundaryConditions,
                       settings: SolverSettings | None = None) -> Trajectory:
    """Newton shooting on the unknown initial velocity.

    The terminal map v0 -> x(t2) is differentiated by forward finite
    differences.  A singular Jacobian (conjugate-point span) raises
    Degenerate; running out of iterations raises NoConvergence with the
    best terminal residual seen.

    Singularity is judged two ways: a collapsed singular-value ratio
    (1e-12 conditioning), and a smallest singular value below 1e-6 of
    the map's natural time scale -- the discrete dynamics shifts each
    mode's frequency by O(dt^2), so an exactly conjugate span shows up
    as a near-zero rather than a zero.
    """
    settings = settings or SolverSettings()
    if bc.n != loss.n:
        raise DimensionMismatch(f"boundary dimension {bc.n} != loss dimension {loss.n}")
    tol = settings.resolved_shooting_tol(bc.x2)
    _, h, n = _grid(bc.t1, bc.t2, settings.dt)
    m_inv = loss.mass_inverse()
    grad = gain._hot_gradient()
    nn = loss.n

    v0 = (bc.x2 - bc.x1) / bc.span
    best = np.inf
    for _ in range(settings.max_newton_iters):
        xf = _terminal_state(m_inv, grad, bc.x1, v0, h, n)
        res_vec = xf - bc.x2
        res = float(np.linalg.norm(res_vec))
        best = min(best, res)
        if res <= tol:
            return integrate_ivp(loss, gain, bc.x1, v0, (bc.t1, bc.t2), settings.dt)
        jac = np.empty((nn, nn))
        for i in range(nn):
            step = 1e-6 * (1.0 + abs(v0[i]))
            vp = v0.copy()
            vp[i] += step
            jac[:, i] = (_terminal_state(m_inv, grad, bc.x1, vp, h, n) - xf) / step
        sv = np.linalg.svd(jac, compute_uv=False)
        if sv[-1] <= 1e-12 * sv[0] or sv[-1] <= 1e-6 * max(sv[0], bc.span):
            raise Degenerate(
                "terminal map is singular (conjugate-point span); boundary "
                "velocities are not uniquely determined")
        v0 = v0 + np.linalg.solve(jac, -res_vec)
    raise NoConvergence(
        f"shooting did not reach tolerance {tol:.3e} in "
        f"{settings.max_newton_iters} iterations (best residual {best:.3e})",
        best_residual=best)


class _DiscreteProfit:
    """Discrete profit sum_k [U(x_k) - K((x_{k+1}-x_k)/dt)] dt and its gradient.

    The gradient with respect to an interior point equals dt times the
    discrete stationarity residual, so convergence is measured on the
    dt-scaled gradient and the residual bound holds grid-independently.
    """

    def __init__(self, loss, gain, bc, n_steps):
        self.loss = loss
        self.gain = gain
        self.x1 = bc.x1
        self.x2 = bc.x2
        self.dt = bc.span / n_steps
        self.n_steps = n_steps
        self.n = loss.n

    def assemble(self, z: FloatArray) -> FloatArray:
        x = np.empty((self.n_steps + 1, self.n))
        x[0] = self.x1
        x[-1] = self.x2
        x[1:-1] = z.reshape(self.n_steps - 1, self.n)
        return x

    def value(self, z: FloatArray) -> float:
        x = self.assemble(z)
        v = np.diff(x, axis=0) / self.dt
        u = self.gain.values(x[:-1])
        k = self.loss.values(v)
        return float(np.sum(u - k) * self.dt)

    def value_and_gradient(self, z: FloatArray) -> tuple[float, FloatArray]:
        x = self.assemble(z)
        v = np.diff(x, axis=0) / self.dt
        u = self.gain.values(x[:-1])
        k = self.loss.values(v)
        profit = float(np.sum(u - k) * self.dt)
        lap = (x[2:] - 2.0 * x[1:-1] + x[:-2]) / self.dt
        grad = self.dt * self.gain.gradients(x[1:-1]) + 2.0 * (lap @ self.loss.k_matrix)
        return profit, grad.ravel()


def solve_bvp_direct(loss: LossModel, gain: GainModel, bc: BoundaryConditions,
                     n_steps: int, settings: SolverSettings | None = None) -> Trajectory:
    """Maximize the discretized profit by nonlinear conjugate gradient.

    Starts from the straight-line path and stops once the discrete
    stationarity residual drops to direct_grad_tol (infinity norm).
    The line search takes a curvature-matched step, checked by a
    tolerance-padded Armijo rule so progress continues even when profit
    improvements fall below float resolution.
    """
    settings = settings or SolverSettings()
    if bc.n != loss.n:
        raise DimensionMismatch(f"boundary dimension {bc.n} != loss dimension {loss.n}")
    if n_steps < 2:
        raise ValueError("n_steps must be >= 2")

    prob = _DiscreteProfit(loss, gain, bc, n_steps)
    frac = np.linspace(0.0, 1.0, n_steps + 1)[1:-1, None]
    z = ((1.0 - frac) * bc.x1 + frac * bc.x2).ravel()

    tol = settings.direct_grad_tol
    dt = prob.dt
    profit, grad_p = prob.value_and_gradient(z)
    f = -profit
    g = -grad_p
    d = -g
    best = np.inf
    dim = z.size
    since_restart = 0

    for _ in range(settings.direct_max_iters):
        resid = float(np.abs(g).max()) / dt
        best = min(best, resid)
        if resid <= tol:
            return _direct_trajectory(prob, z, bc)

        gd = float(g @ d)
        if gd >= 0.0 or since_restart >= dim:
            d = -g
            gd = -float(g @ g)
            since_restart = 0

        # curvature along d from one extra gradient evaluation
        d_inf = float(np.abs(d).max())
        eps = 1e-7 * (1.0 + float(np.abs(z).max())) / max(d_inf, 1e-300)
        _, grad_eps = prob.value_and_gradient(z + eps * d)
        curv = float((-grad_eps - g) @ d) / eps
        alpha = -gd / curv if curv > 0.0 else 1.0 / max(d_inf, 1.0)

        pad = 1e-14 * (1.0 + abs(f))
        accepted = False
        for _ in range(60):
            f_try = -prob.value(z + alpha * d)
            if f_try <= f + 1e-4 * alpha * gd + pad:
                accepted = True
                break
            alpha *= 0.5
        if not accepted:
            d = -g
            since_restart = 0
            continue

        z_new = z + alpha * d
        profit, grad_p = prob.value_and_gradient(z_new)
        f_new = -profit
        g_new = -grad_p
        beta = max(0.0, float(g_new @ (g_new - g)) / max(float(g @ g), 1e-300))
        d = -g_new + beta * d
        z, f, g = z_new, f_new, g_new
        since_restart += 1

    raise NoConvergence(
        f"direct solver did not reach residual {tol:.3e} in "
        f"{settings.direct_max_iters} iterations (best {best:.3e})",
        best_residual=best)


def _direct_trajectory(prob: _DiscreteProfit, z: FloatArray,
                       bc: BoundaryConditions) -> Trajectory:
    x = prob.assemble(z)
    times = np.linspace(bc.t1, bc.t2, prob.n_steps + 1)
    return Trajectory(times=times, states=x,
                      velocities=central_velocities(x, prob.dt))


def analytic_harmonic_solve(frequencies, bc: BoundaryConditions) -> HarmonicSolution:
    """Closed-form per-mode fit of a_i sin(omega_i (t - c_i)) to modal boundaries.

    bc holds the boundary states already expressed in modal coordinates.
    Each mode is a 2x2 linear solve for the sin/cos coefficients; the
    system is singular exactly when omega_i*(t2-t1) hits a multiple of
    pi, surfaced as DegenerateInterval.
    """
    omega = as_kpi_vector(frequencies, name="frequencies")
    if bc.n != omega.size:
        raise DimensionMismatch(f"boundary dimension {bc.n} != mode count {omega.size}")
    if np.any(omega <= 0.0):
        raise ZeroFrequency("all mode frequencies must be positive")

    span = bc.span
    arg = omega * span
    dist = np.abs(arg - np.pi * np.round(arg / np.pi))
    if np.any(dist <= 1e-9):
        bad = int(np.argmin(dist))
        raise DegenerateInterval(
            f"omega*(t2-t1) = {arg[bad]:.12g} for mode {bad} is a multiple of pi; "
            "the boundary fit is not unique")

    amp = np.empty_like(omega)
    shift = np.empty_like(omega)
    for i, w in enumerate(omega):
        s1, c1 = np.sin(w * bc.t1), np.cos(w * bc.t1)
        s2, c2 = np.sin(w * bc.t2), np.cos(w * bc.t2)
        det = np.sin(w * (bc.t1 - bc.t2))
        a_sin = (bc.x1[i] * c2 - bc.x2[i] * c1) / det
        b_cos = (bc.x2[i] * s1 - bc.x1[i] * s2) / det
        amp[i] = np.hypot(a_sin, b_cos)
        if amp[i] == 0.0:
            shift[i] = 0.0
        else:
            period = 2.0 * np.pi / w
            shift[i] = (np.arctan2(-b_cos, a_sin) / w) % period
    return HarmonicSolution(amplitudes=amp, phase_shifts=shift, frequencies=omega.copy())
