"""Shared builders for randomized test instances."""

import numpy as np
import pytest

from kpidyn import BoundaryConditions, LossModel, QuadraticWell
from kpidyn.transforms import eigenlosses


def random_spd(rng, n, eig_range=(1.0, 10.0)):
    """Random symmetric positive definite matrix with bounded spectrum."""
    q, _ = np.linalg.qr(rng.normal(size=(n, n)))
    eigs = rng.uniform(*eig_range, size=n)
    return q @ np.diag(eigs) @ q.T


def random_orthogonal(rng, n):
    q, r = np.linalg.qr(rng.normal(size=(n, n)))
    return q * np.sign(np.diag(r))


def single_well_instance(rng, n, omega_range=(0.5, 1.5)):
    """Loss + quadratic well with prescribed modal frequencies, plus a
    boundary pair whose span stays clear of the first conjugate point."""
    loss = LossModel(random_spd(rng, n, eig_range=(0.5, 2.0)))
    # build the curvature from target frequencies so the span is controllable
    dec = eigenlosses(loss)
    d = np.sqrt(2.0 * dec.eigenvalues)
    w = d[:, None] * dec.rotation.T
    omegas = rng.uniform(*omega_range, size=n)
    q = random_orthogonal(rng, n)
    curvature = w.T @ (q @ np.diag(omegas**2) @ q.T) @ w
    center = rng.uniform(-1.0, 1.0, size=n)
    gain = QuadraticWell(u0=rng.uniform(-1.0, 1.0), center=center,
                         curvature=0.5 * (curvature + curvature.T))
    t1 = rng.uniform(-1.0, 1.0)
    span = rng.uniform(1.0, 0.9 * np.pi / omegas.max())
    bc = BoundaryConditions(x1=center + rng.uniform(-1.0, 1.0, size=n), t1=t1,
                            x2=center + rng.uniform(-1.0, 1.0, size=n),
                            t2=t1 + span)
    return loss, gain, bc


def sine_perturbations(rng, times, t1, t2, n_dims, count, amplitude):
    """Smooth random endpoint-preserving path perturbations.

    Returns (count, M, n_dims) position offsets and matching velocity
    offsets, each scaled to the requested max amplitude.
    """
    span = t2 - t1
    offsets = np.empty((count, times.size, n_dims))
    d_offsets = np.empty_like(offsets)
    for c in range(count):
        f = np.zeros((times.size, n_dims))
        fd = np.zeros_like(f)
        for j in range(1, 4):
            coef = rng.normal(size=n_dims)
            base = np.sin(j * np.pi * (times - t1) / span)[:, None]
            dbase = (j * np.pi / span) * np.cos(j * np.pi * (times - t1) / span)[:, None]
            f += coef * base
            fd += coef * dbase
        scale = amplitude / max(np.abs(f).max(), 1e-300)
        offsets[c] = scale * f
        d_offsets[c] = scale * fd
    return offsets, d_offsets


@pytest.fixture
def rng():
    return np.random.default_rng(20260811)
