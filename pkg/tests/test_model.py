"""Gain/loss model evaluation, gradients and domain-type invariants."""

import numpy as np
import pytest

from kpidyn import (BoundaryConditions, ConstantGain, DimensionMismatch,
                    GridTabulated, LossModel, NotPositiveDefinite, OutOfDomain,
                    QuadraticWell, Trajectory, evaluate_gain, evaluate_loss,
                    gain_gradient, loss_velocity_gradient)
from conftest import random_spd


# -- gain evaluation ---------------------------------------------------------

def test_constant_gain_ignores_state():
    g = ConstantGain(u0=5.0, n=2)
    assert evaluate_gain(g, [1.0, 2.0]) == 5.0


def test_quadratic_well_value():
    g = QuadraticWell(u0=0.0, center=[0.0, 0.0], curvature=np.eye(2))
    assert evaluate_gain(g, [3.0, 4.0]) == pytest.approx(12.5, abs=1e-15)


def test_grid_bilinear_midpoint():
    g = GridTabulated(axes=(np.array([0.0, 1.0]), np.array([0.0, 1.0])),
                      values_grid=np.array([[0.0, 1.0], [1.0, 2.0]]))
    assert evaluate_gain(g, [0.5, 0.5]) == pytest.approx(1.0, abs=1e-15)


def test_grid_rejects_outside_box():
    g = GridTabulated(axes=(np.linspace(0, 1, 5),), values_grid=np.zeros(5))
    with pytest.raises(OutOfDomain):
        evaluate_gain(g, [1.5])
    with pytest.raises(OutOfDomain):
        gain_gradient(g, [-0.1])


def test_grid_axis_must_increase():
    with pytest.raises(DimensionMismatch):
        GridTabulated(axes=(np.array([0.0, 0.0, 1.0]),), values_grid=np.zeros(3))


# -- gain gradients ----------------------------------------------------------

def test_constant_gradient_zero():
    g = ConstantGain(u0=7.0, n=3)
    assert np.array_equal(gain_gradient(g, [1.0, -2.0, 0.5]), np.zeros(3))


def test_quadratic_gradient_diagonal_case():
    g = QuadraticWell(u0=0.0, center=[1.0, 0.0], curvature=np.diag([4.0, 9.0]))
    np.testing.assert_allclose(gain_gradient(g, [2.0, 1.0]), [4.0, 9.0], atol=1e-15)


def test_grid_gradient_matches_sampled_function():
    # U(x) = x^2 on a fine grid; analytic derivative at 0.3 is 0.6
    ax = np.linspace(-1.0, 1.0, 401)
    g = GridTabulated(axes=(ax,), values_grid=ax**2)
    assert gain_gradient(g, [0.3])[0] == pytest.approx(0.6, abs=1e-3)


def _fd_gradient(gain, x, h=1e-6):
    grad = np.zeros_like(x)
    for i in range(x.size):
        xp = x.copy()
        xm = x.copy()
        step = h * (1.0 + abs(x[i]))
        xp[i] += step
        xm[i] -= step
        grad[i] = (gain.value(xp) - gain.value(xm)) / (2.0 * step)
    return grad


def test_analytic_gradients_match_finite_differences(rng):
    well = QuadraticWell(u0=0.3, center=rng.normal(size=3),
                         curvature=random_spd(rng, 3))
    const = ConstantGain(u0=2.0, n=3)
    for gain in (well, const):
        for _ in range(100):
            x = rng.uniform(-2.0, 2.0, size=3)
            got = gain.gradient(x)
            want = _fd_gradient(gain, x)
            denom = max(np.linalg.norm(want), 1.0)
            assert np.linalg.norm(got - want) / denom < 1e-6


def test_tabulated_gradient_matches_finite_differences(rng):
    ax = np.linspace(-2.0, 2.0, 161)
    ay = np.linspace(-1.0, 3.0, 161)
    xs, ys = np.meshgrid(ax, ay, indexing="ij")
    g = GridTabulated(axes=(ax, ay), values_grid=np.sin(xs) + 0.5 * ys**2)
    for _ in range(100):
        x = rng.uniform([-1.9, -0.9], [1.9, 2.9])
        got = g.gradient(x)
        want = _fd_gradient(g, x)
        denom = max(np.linalg.norm(want), 1.0)
        assert np.linalg.norm(got - want) / denom < 1e-3


# -- loss form ---------------------------------------------------------------

def test_loss_zero_velocity():
    assert evaluate_loss(LossModel(np.eye(2)), [0.0, 0.0]) == 0.0


def test_loss_diagonal_case():
    assert evaluate_loss(LossModel(np.diag([2.0, 3.0])), [1.0, 1.0]) == pytest.approx(5.0)


def test_loss_coupled_case():
    # direct quadratic-form evaluation: (1,-1) K (1,-1)' with K=[[2,1],[1,2]] is 2
    assert evaluate_loss(LossModel([[2.0, 1.0], [1.0, 2.0]]), [1.0, -1.0]) == pytest.approx(2.0)


def test_loss_gradient_zero_at_rest():
    k = LossModel([[2.0, 1.0], [1.0, 2.0]])
    assert np.array_equal(loss_velocity_gradient(k, [0.0, 0.0]), np.zeros(2))


def test_loss_gradient_diagonal_case():
    k = LossModel(np.diag([2.0, 3.0]))
    np.testing.assert_allclose(loss_velocity_gradient(k, [1.0, 1.0]), [4.0, 6.0])


def test_euler_homogeneity_identity(rng):
    for _ in range(50):
        n = int(rng.integers(1, 6))
        k = LossModel(random_spd(rng, n))
        v = rng.normal(size=n)
        lhs = float(v @ loss_velocity_gradient(k, v))
        rhs = 2.0 * evaluate_loss(k, v)
        assert lhs == pytest.approx(rhs, rel=1e-12)


def test_loss_positive_for_nonzero_velocity(rng):
    k = LossModel(random_spd(rng, 4))
    for _ in range(1000):
        v = rng.normal(size=4)
        if np.any(v != 0.0):
            assert evaluate_loss(k, v) > 0.0


def test_loss_matrix_symmetrized_on_load():
    k = LossModel([[2.0, 0.5], [0.3, 2.0]])
    assert np.array_equal(k.k_matrix, k.k_matrix.T)
    assert k.k_matrix[0, 1] == pytest.approx(0.4)


def test_mass_inverse_requires_positive_definite():
    with pytest.raises(NotPositiveDefinite):
        LossModel([[1.0, 2.0], [2.0, 1.0]]).mass_inverse()


def test_dimension_mismatch_raised():
    k = LossModel(np.eye(2))
    with pytest.raises(DimensionMismatch):
        evaluate_loss(k, [1.0, 2.0, 3.0])
    g = QuadraticWell(u0=0.0, center=[0.0], curvature=[[1.0]])
    with pytest.raises(DimensionMismatch):
        evaluate_gain(g, [1.0, 2.0])


# -- structural types --------------------------------------------------------

def test_quadratic_well_requires_spd_curvature():
    with pytest.raises(NotPositiveDefinite):
        QuadraticWell(u0=0.0, center=[0.0, 0.0], curvature=[[1.0, 2.0], [2.0, 1.0]])


def test_boundary_conditions_require_ordered_times():
    with pytest.raises(DimensionMismatch):
        BoundaryConditions(x1=[0.0], t1=1.0, x2=[1.0], t2=1.0)


def test_trajectory_validates_uniform_grid():
    good = Trajectory(times=np.linspace(0.0, 1.0, 11),
                      states=np.zeros((11, 1)), velocities=np.zeros((11, 1)))
    assert good.dt == pytest.approx(0.1)
    bad_times = np.array([0.0, 0.1, 0.25, 0.3])
    with pytest.raises(DimensionMismatch):
        Trajectory(times=bad_times, states=np.zeros((4, 1)),
                   velocities=np.zeros((4, 1)))


def test_trajectory_accepts_long_linspace_grid():
    # ulp-level jitter on a long span must not trip the uniformity check
    t = np.linspace(0.0, 100.0, 100001)
    Trajectory(times=t, states=np.zeros((t.size, 1)), velocities=np.zeros((t.size, 1)))


def test_trajectory_is_immutable():
    traj = Trajectory(times=np.linspace(0.0, 1.0, 3),
                      states=np.zeros((3, 1)), velocities=np.zeros((3, 1)))
    with pytest.raises(ValueError):
        traj.states[0, 0] = 1.0
