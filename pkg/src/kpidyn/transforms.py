"""Symmetric eigen-machinery: eigenlosses, whitening, eigenfrequencies.

The decomposition here is the workhorse behind two coordinate changes:
rotating KPI space so the change-cost form separates into independent
per-direction eigenlosses, and rescaling so that form becomes 0.5*|v|^2
while the gain curvature turns into diag(omega_i^2) -- the squared
natural cycle frequencies of the business around a gain extremum.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import DimensionMismatch, NoConvergence, NotPositiveDefinite, NotSymmetric
from .model import FloatArray, LossModel, QuadraticWell, as_kpi_vector, _readonly

MAX_DIM = 64          # Jacobi is O(N^3) per sweep; desk scale only
_MAX_SWEEPS = 100


@dataclass
class EigenDecomposition:
    """Eigenvalues (descending) and orthogonal eigenvector columns."""

    eigenvalues: FloatArray
    rotation: FloatArray

    def reconstruct(self) -> FloatArray:
        r = self.rotation
        return r @ np.diag(self.eigenvalues) @ r.T


def symmetric_eigen(a) -> EigenDecomposition:
    """Diagonalize a symmetric matrix by cyclic Jacobi rotations.

    Sweeps row pairs in a fixed order until the largest off-diagonal
    entry drops below 1e-12 times the Frobenius norm, which makes the
    output deterministic for identical input.  Eigenvalues come back
    sorted descending; each eigenvector's largest component is made
    positive so column signs are reproducible too.
    """
    a = np.asarray(a, dtype=float)
    if a.ndim != 2 or a.shape[0] != a.shape[1]:
        raise DimensionMismatch(f"matrix must be square, got {a.shape}")
    n = a.shape[0]
    if n > MAX_DIM:
        raise DimensionMismatch(f"dimension {n} exceeds the supported cap {MAX_DIM}")
    if not np.all(np.isfinite(a)):
        raise DimensionMismatch("matrix contains non-finite entries")
    scale = float(np.abs(a).max()) if a.size else 0.0
    if float(np.abs(a - a.T).max()) > 1e-12 * max(1.0, scale):
        raise NotSymmetric("matrix is not symmetric within 1e-12")

    w = 0.5 * (a + a.T)
    r = np.eye(n)
    tol = 1e-12 * float(np.linalg.norm(w, "fro"))

    for _ in range(_MAX_SWEEPS):
        off = _max_offdiag(w)
        if off <= tol:
            break
        for p in range(n - 1):
            for q in range(p + 1, n):
                apq = w[p, q]
                if apq == 0.0:
                    continue
                tau = (w[q, q] - w[p, p]) / (2.0 * apq)
                if tau >= 0.0:
                    t = 1.0 / (tau + np.sqrt(1.0 + tau * tau))
                else:
                    t = -1.0 / (-tau + np.sqrt(1.0 + tau * tau))
                c = 1.0 / np.sqrt(1.0 + t * t)
                s = t * c
                _rotate(w, r, p, q, c, s, t, apq)
    else:
        raise NoConvergence(
            f"Jacobi did not reach off-diagonal {tol:.3e} in {_MAX_SWEEPS} sweeps",
            best_residual=_max_offdiag(w))

    vals = np.diag(w).copy()
    order = np.argsort(-vals, kind="stable")
    vals = vals[order]
    vecs = r[:, order].copy()
    for j in range(n):
        k = int(np.argmax(np.abs(vecs[:, j])))
        if vecs[k, j] < 0.0:
            vecs[:, j] = -vecs[:, j]
    return EigenDecomposition(eigenvalues=vals, rotation=vecs)


def _max_offdiag(w: FloatArray) -> float:
    if w.shape[0] < 2:
        return 0.0
    mask = ~np.eye(w.shape[0], dtype=bool)
    return float(np.abs(w[mask]).max())


def _rotate(w, r, p, q, c, s, t, apq):
    # similarity update G' W G plus accumulation R <- R G, then exact zero
    wp = w[:, p].copy()
    wq = w[:, q].copy()
    w[:, p] = c * wp - s * wq
    w[:, q] = s * wp + c * wq
    wp = w[p, :].copy()
    wq = w[q, :].copy()
    w[p, :] = c * wp - s * wq
    w[q, :] = s * wp + c * wq
    w[p, q] = 0.0
    w[q, p] = 0.0
    rp = r[:, p].copy()
    rq = r[:, q].copy()
    r[:, p] = c * rp - s * rq
    r[:, q] = s * rp + c * rq


def eigenlosses(loss: LossModel) -> EigenDecomposition:
    """Eigenvalues of the loss matrix: per-direction change-cost coefficients.

    Raises NotPositiveDefinite when any eigenvalue falls at or below
    1e-12 of the largest one.
    """
    dec = symmetric_eigen(loss.k_matrix)
    top = float(dec.eigenvalues[0])
    if top <= 0.0 or np.any(dec.eigenvalues <= 1e-12 * top):
        raise NotPositiveDefinite("loss matrix has a non-positive eigenvalue")
    return dec


@dataclass
class ModalBasis:
    """Affine chart in which losses read 0.5*|v|^2 and gains separate.

    whitening maps raw KPI offsets to whitened coordinates (it absorbs
    the eigenlosses), modal_rotation then diagonalizes the whitened gain
    curvature; frequencies are the per-mode natural frequencies.
    """

    whitening: FloatArray
    inverse_whitening: FloatArray
    frequencies: FloatArray
    modal_rotation: FloatArray
    center: FloatArray
    _fwd: FloatArray = field(init=False, repr=False)
    _bwd: FloatArray = field(init=False, repr=False)

    def __post_init__(self):
        self.whitening = _readonly(np.asarray(self.whitening, dtype=float))
        self.inverse_whitening = _readonly(np.asarray(self.inverse_whitening, dtype=float))
        self.frequencies = _readonly(np.asarray(self.frequencies, dtype=float))
        self.modal_rotation = _readonly(np.asarray(self.modal_rotation, dtype=float))
        self.center = _readonly(np.asarray(self.center, dtype=float))
        self._fwd = _readonly(self.modal_rotation.T @ self.whitening)
        self._bwd = _readonly(self.inverse_whitening @ self.modal_rotation)

    @property
    def n(self) -> int:
        return self.center.size

    def to_modal(self, x) -> FloatArray:
        x = as_kpi_vector(x, self.n, "x")
        return self._fwd @ (x - self.center)

    def from_modal(self, y) -> FloatArray:
        y = as_kpi_vector(y, self.n, "y")
        return self.center + self._bwd @ y

    def to_modal_velocity(self, v) -> FloatArray:
        v = as_kpi_vector(v, self.n, "v")
        return self._fwd @ v

    def from_modal_velocity(self, w) -> FloatArray:
        w = as_kpi_vector(w, self.n, "w")
        return self._bwd @ w

    def to_modal_many(self, xs: FloatArray, vs: FloatArray | None = None):
        """Transform whole (M, N) state/velocity arrays at once."""
        ys = (np.asarray(xs, dtype=float) - self.center) @ self._fwd.T
        if vs is None:
            return ys
        return ys, np.asarray(vs, dtype=float) @ self._fwd.T


def modal_basis(loss: LossModel, gain: QuadraticWell) -> ModalBasis:
    """Simultaneously diagonalize the loss form and the gain curvature.

    Whitening W = diag(sqrt(2*K_n)) R_K' absorbs the eigenlosses; the
    whitened curvature W^-T C W^-1 is then rotated to diag(omega_i^2),
    i.e. the omega_i solve det(C - omega^2 * 2K) = 0.
    """
    if not isinstance(gain, QuadraticWell):
        raise TypeError("modal basis requires a quadratic-well gain")
    if gain.n != loss.n:
        raise DimensionMismatch(f"gain dimension {gain.n} != loss dimension {loss.n}")
    dec_k = eigenlosses(loss)
    d = np.sqrt(2.0 * dec_k.eigenvalues)
    w = d[:, None] * dec_k.rotation.T
    w_inv = dec_k.rotation * (1.0 / d)[None, :]
    cw = w_inv.T @ gain.curvature @ w_inv
    cw = 0.5 * (cw + cw.T)
    dec_c = symmetric_eigen(cw)
    top = float(dec_c.eigenvalues[0])
    if top <= 0.0 or np.any(dec_c.eigenvalues <= 1e-12 * top):
        raise NotPositiveDefinite("gain curvature has a non-positive eigenvalue")
    return ModalBasis(whitening=w, inverse_whitening=w_inv,
                      frequencies=np.sqrt(dec_c.eigenvalues),
                      modal_rotation=dec_c.rotation, center=gain.center)


def to_modal(basis: ModalBasis, x) -> FloatArray:
    return basis.to_modal(x)


def from_modal(basis: ModalBasis, y) -> FloatArray:
    return basis.from_modal(y)
