"""KPI states, loss/gain models, boundary conditions and trajectories.

A KPI state is a plain 1-D float64 array (one entry per monetizable
indicator, all in a common currency-per-time unit after aggregation).
The loss model is the quadratic change-cost form K[v] = v'Kv and the
gain models give the profit flow U(x) earned while sitting at x.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from numpy.typing import NDArray
from scipy.interpolate import RegularGridInterpolator

from .errors import DimensionMismatch, NotPositiveDefinite, NotSymmetric, OutOfDomain

FloatArray = NDArray[np.float64]


def as_kpi_vector(x, n: int | None = None, name: str = "x") -> FloatArray:
    """Coerce to a finite 1-D float array, checking dimension if given."""
    v = np.atleast_1d(np.asarray(x, dtype=float))
    if v.ndim != 1 or v.size < 1:
        raise DimensionMismatch(f"{name} must be a 1-D vector, got shape {v.shape}")
    if not np.all(np.isfinite(v)):
        raise DimensionMismatch(f"{name} contains non-finite entries")
    if n is not None and v.size != n:
        raise DimensionMismatch(f"{name} has dimension {v.size}, expected {n}")
    return v


def _readonly(a: np.ndarray) -> np.ndarray:
    a.setflags(write=False)
    return a


@dataclass
class LossModel:
    """Change-cost rate K[v] = v'Kv with K symmetric positive definite.

    The matrix is symmetrized on construction, so K[v] and its gradient
    2Kv are exact for the stored matrix.  Positive definiteness is
    enforced where it matters (eigenloss extraction, mass factorization).
    """

    k_matrix: FloatArray

    def __post_init__(self):
        k = np.asarray(self.k_matrix, dtype=float)
        if k.ndim != 2 or k.shape[0] != k.shape[1] or k.shape[0] < 1:
            raise DimensionMismatch(f"loss matrix must be square, got {k.shape}")
        if not np.all(np.isfinite(k)):
            raise DimensionMismatch("loss matrix contains non-finite entries")
        self.k_matrix = _readonly(0.5 * (k + k.T))

    @property
    def n(self) -> int:
        return self.k_matrix.shape[0]

    def value(self, v) -> float:
        v = as_kpi_vector(v, self.n, "v")
        return float(v @ self.k_matrix @ v)

    def values(self, vs: FloatArray) -> FloatArray:
        """Quadratic form row-wise over an (M, N) velocity array."""
        vs = np.asarray(vs, dtype=float)
        if vs.ndim != 2 or vs.shape[1] != self.n:
            raise DimensionMismatch(f"velocity array shape {vs.shape} != (M, {self.n})")
        return np.einsum("ij,jk,ik->i", vs, self.k_matrix, vs)

    def velocity_gradient(self, v) -> FloatArray:
        v = as_kpi_vector(v, self.n, "v")
        return 2.0 * (self.k_matrix @ v)

    def mass_matrix(self) -> FloatArray:
        """Inertia matrix of the optimal-path equation: M = 2K."""
        return 2.0 * self.k_matrix

    def mass_inverse(self) -> FloatArray:
        """Inverse of M = 2K via Cholesky; raises if K is not positive definite."""
        m = self.mass_matrix()
        try:
            c = np.linalg.cholesky(m)
        except np.linalg.LinAlgError:
            raise NotPositiveDefinite("loss matrix is not positive definite") from None
        eye = np.eye(self.n)
        z = np.linalg.solve(c, eye)
        return z.T @ z


class GainModel:
    """Common surface of all profit-flow models: value, gradient, batches."""

    n: int

    def value(self, x) -> float:
        raise NotImplementedError

    def gradient(self, x) -> FloatArray:
        raise NotImplementedError

    def _hot_gradient(self):
        """Gradient callable for tight integration loops.

        Analytic models skip the per-call input validation there: the
        loop feeds back its own states.  The tabulated model keeps its
        box checks, which are semantic, not defensive.
        """
        return self.gradient

    def values(self, xs: FloatArray) -> FloatArray:
        xs = self._check_batch(xs)
        return np.array([self.value(x) for x in xs])

    def gradients(self, xs: FloatArray) -> FloatArray:
        xs = self._check_batch(xs)
        return np.stack([self.gradient(x) for x in xs])

    def _check_batch(self, xs) -> FloatArray:
        xs = np.asarray(xs, dtype=float)
        if xs.ndim != 2 or xs.shape[1] != self.n:
            raise DimensionMismatch(f"state array shape {xs.shape} != (M, {self.n})")
        return xs


@dataclass
class ConstantGain(GainModel):
    """Flat profit flow u0: the business earns the same everywhere."""

    u0: float
    n: int = 1

    def __post_init__(self):
        self.u0 = float(self.u0)
        if not np.isfinite(self.u0):
            raise DimensionMismatch("u0 must be finite")
        if self.n < 1:
            raise DimensionMismatch("dimension must be >= 1")

    def value(self, x) -> float:
        as_kpi_vector(x, self.n, "x")
        return self.u0

    def gradient(self, x) -> FloatArray:
        as_kpi_vector(x, self.n, "x")
        return np.zeros(self.n)

    def values(self, xs):
        xs = self._check_batch(xs)
        return np.full(xs.shape[0], self.u0)

    def gradients(self, xs):
        xs = self._check_batch(xs)
        return np.zeros_like(xs)

    def _hot_gradient(self):
        zero = np.zeros(self.n)
        return lambda x: zero


@dataclass
class QuadraticWell(GainModel):
    """Local quadratic expansion of the gain around an extremum.

    U(x) = u0 + 0.5 (x-c)' C (x-c) with C symmetric positive definite,
    so the center is a local minimum -- the trap configuration whose
    neighborhood supports the cyclic solutions.
    """

    u0: float
    center: FloatArray
    curvature: FloatArray

    def __post_init__(self):
        self.u0 = float(self.u0)
        self.center = _readonly(as_kpi_vector(self.center, name="center").copy())
        c = np.asarray(self.curvature, dtype=float)
        m = self.center.size
        if c.shape != (m, m):
            raise DimensionMismatch(f"curvature shape {c.shape} != ({m}, {m})")
        if not np.all(np.isfinite(c)):
            raise DimensionMismatch("curvature contains non-finite entries")
        if not np.allclose(c, c.T, rtol=0.0, atol=1e-12 * max(1.0, float(np.abs(c).max()))):
            raise NotSymmetric("curvature matrix is not symmetric")
        c = 0.5 * (c + c.T)
        try:
            np.linalg.cholesky(c)
        except np.linalg.LinAlgError:
            raise NotPositiveDefinite("curvature matrix is not positive definite") from None
        self.curvature = _readonly(c)

    @property
    def n(self) -> int:
        return self.center.size

    def value(self, x) -> float:
        d = as_kpi_vector(x, self.n, "x") - self.center
        return self.u0 + 0.5 * float(d @ self.curvature @ d)

    def gradient(self, x) -> FloatArray:
        d = as_kpi_vector(x, self.n, "x") - self.center
        return self.curvature @ d

    def values(self, xs):
        d = self._check_batch(xs) - self.center
        return self.u0 + 0.5 * np.einsum("ij,jk,ik->i", d, self.curvature, d)

    def gradients(self, xs):
        d = self._check_batch(xs) - self.center
        return d @ self.curvature

    def _hot_gradient(self):
        curvature = self.curvature
        center = self.center
        return lambda x: curvature @ (x - center)


@dataclass
class GridTabulated(GainModel):
    """Gain sampled on a rectilinear grid, multilinear in between.

    Covers multi-well landscapes without committing to a parametric
    family.  Queries must stay inside the box; the gradient is a
    central difference with step 1e-5*(1+|x_i|) per axis, falling back
    to a one-sided difference against a box face.
    """

    axes: tuple[FloatArray, ...]
    values_grid: FloatArray
    _interp: RegularGridInterpolator = field(init=False, repr=False)

    def __post_init__(self):
        axes = tuple(np.asarray(a, dtype=float) for a in self.axes)
        if len(axes) < 1:
            raise DimensionMismatch("grid needs at least one axis")
        for i, a in enumerate(axes):
            if a.ndim != 1 or a.size < 2:
                raise DimensionMismatch(f"axis {i} must be 1-D with >= 2 nodes")
            if not np.all(np.isfinite(a)):
                raise DimensionMismatch(f"axis {i} contains non-finite nodes")
            if not np.all(np.diff(a) > 0):
                raise DimensionMismatch(f"axis {i} must be strictly increasing")
        vals = np.asarray(self.values_grid, dtype=float)
        expected = tuple(a.size for a in axes)
        if vals.shape != expected:
            raise DimensionMismatch(f"values shape {vals.shape} != grid shape {expected}")
        if not np.all(np.isfinite(vals)):
            raise DimensionMismatch("grid values contain non-finite entries")
        self.axes = tuple(_readonly(a.copy()) for a in axes)
        self.values_grid = _readonly(vals.copy())
        self._interp = RegularGridInterpolator(self.axes, self.values_grid,
                                               method="linear", bounds_error=True)

    @property
    def n(self) -> int:
        return len(self.axes)

    @property
    def box(self) -> tuple[FloatArray, FloatArray]:
        lo = np.array([a[0] for a in self.axes])
        hi = np.array([a[-1] for a in self.axes])
        return lo, hi

    def _eval(self, pts: FloatArray) -> FloatArray:
        try:
            return self._interp(pts)
        except ValueError as exc:
            raise OutOfDomain(f"query outside the tabulated box: {exc}") from None

    def value(self, x) -> float:
        x = as_kpi_vector(x, self.n, "x")
        return float(self._eval(x[None, :])[0])

    def gradient(self, x) -> FloatArray:
        x = as_kpi_vector(x, self.n, "x")
        return self.gradients(x[None, :])[0]

    def values(self, xs):
        return self._eval(self._check_batch(xs))

    def gradients(self, xs):
        xs = self._check_batch(xs)
        lo, hi = self.box
        if np.any(xs < lo) or np.any(xs > hi):
            raise OutOfDomain("query outside the tabulated box")
        grad = np.empty_like(xs)
        h = 1e-5 * (1.0 + np.abs(xs))
        for i in range(self.n):
            xp = xs.copy()
            xm = xs.copy()
            # clip keeps the stencil inside the box: one-sided at faces
            xp[:, i] = np.minimum(xs[:, i] + h[:, i], hi[i])
            xm[:, i] = np.maximum(xs[:, i] - h[:, i], lo[i])
            grad[:, i] = (self._eval(xp) - self._eval(xm)) / (xp[:, i] - xm[:, i])
        return grad


@dataclass
class BoundaryConditions:
    """Where the business is today (x1 at t1) and wants to be (x2 at t2)."""

    x1: FloatArray
    t1: float
    x2: FloatArray
    t2: float

    def __post_init__(self):
        self.x1 = _readonly(as_kpi_vector(self.x1, name="x1").copy())
        self.x2 = _readonly(as_kpi_vector(self.x2, self.x1.size, "x2").copy())
        self.t1 = float(self.t1)
        self.t2 = float(self.t2)
        if not (np.isfinite(self.t1) and np.isfinite(self.t2)):
            raise DimensionMismatch("boundary times must be finite")
        if not self.t2 > self.t1:
            raise DimensionMismatch(f"t2={self.t2} must exceed t1={self.t1}")

    @property
    def n(self) -> int:
        return self.x1.size

    @property
    def span(self) -> float:
        return self.t2 - self.t1


@dataclass
class Trajectory:
    """Uniformly sampled path in KPI space with matching velocities."""

    times: FloatArray
    states: FloatArray
    velocities: FloatArray

    def __post_init__(self):
        t = np.asarray(self.times, dtype=float)
        x = np.asarray(self.states, dtype=float)
        v = np.asarray(self.velocities, dtype=float)
        if t.ndim != 1 or t.size < 2:
            raise DimensionMismatch("need at least 2 samples")
        if x.ndim != 2 or v.ndim != 2 or x.shape != v.shape or x.shape[0] != t.size:
            raise DimensionMismatch(
                f"shape mismatch: times {t.shape}, states {x.shape}, velocities {v.shape}")
        if not (np.all(np.isfinite(t)) and np.all(np.isfinite(x)) and np.all(np.isfinite(v))):
            raise DimensionMismatch("trajectory contains non-finite entries")
        if not np.all(np.diff(t) > 0):
            raise DimensionMismatch("times must be strictly increasing")
        # uniform grid only: compare against the ideal affine grid, tolerance
        # relative to the time magnitude (linspace jitter is ulp-level there)
        m = t.size
        ideal = t[0] + (t[-1] - t[0]) / (m - 1) * np.arange(m)
        atol = 1e-12 * max(1.0, abs(t[0]), abs(t[-1]))
        if np.max(np.abs(t - ideal)) > atol:
            raise DimensionMismatch("time grid is not uniform")
        self.times = _readonly(t)
        self.states = _readonly(x)
        self.velocities = _readonly(v)

    @property
    def m(self) -> int:
        return self.times.size

    @property
    def n(self) -> int:
        return self.states.shape[1]

    @property
    def dt(self) -> float:
        return (self.times[-1] - self.times[0]) / (self.m - 1)

    @property
    def span(self) -> float:
        return float(self.times[-1] - self.times[0])


def central_velocities(states: FloatArray, dt: float) -> FloatArray:
    """Second-order velocity estimate: central inside, one-sided at the ends."""
    x = np.asarray(states, dtype=float)
    v = np.empty_like(x)
    if x.shape[0] == 2:
        v[:] = (x[1] - x[0]) / dt
        return v
    v[1:-1] = (x[2:] - x[:-2]) / (2.0 * dt)
    v[0] = (-3.0 * x[0] + 4.0 * x[1] - x[2]) / (2.0 * dt)
    v[-1] = (3.0 * x[-1] - 4.0 * x[-2] + x[-3]) / (2.0 * dt)
    return v


# -- operation-style entry points ------------------------------------------

def evaluate_gain(model: GainModel, x) -> float:
    """Profit flow U(x)."""
    return model.value(x)


def gain_gradient(model: GainModel, x) -> FloatArray:
    """Gradient of the profit flow at x."""
    return model.gradient(x)


def evaluate_loss(model: LossModel, v) -> float:
    """Change-cost rate K[v] = v'Kv."""
    return model.value(v)


def loss_velocity_gradient(model: LossModel, v) -> FloatArray:
    """dK/dv = 2Kv; satisfies v . (2Kv) = 2 K[v]."""
    return model.velocity_gradient(v)
