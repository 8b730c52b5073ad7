"""Whitening, SVD-based projectors and numerical rank."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

DEFAULT_REL_TOL = 1e-10


class SingularCovarianceError(np.linalg.LinAlgError):
    pass


@dataclass(frozen=True)
class Whitener:
    root_inverse: np.ndarray
    source: np.ndarray

    def __call__(self, x):
        return self.root_inverse @ x


def whitener_from(C, tol: float = 1e-12) -> Whitener:
    """Hermitian inverse square root ``C^{-1/2}`` through an eigendecomposition."""
    C = np.asarray(C)
    if not np.allclose(C, C.conj().T, rtol=1e-12, atol=1e-12 * np.abs(C).max()):
        raise ValueError("covariance is not Hermitian")
    lam, U = np.linalg.eigh(C)
    if lam[0] <= tol * lam[-1]:
        raise SingularCovarianceError(f"covariance is singular (min eig {lam[0]:.3g}, max {lam[-1]:.3g})")
    return Whitener((U / np.sqrt(lam)) @ U.conj().T, C)


@dataclass(frozen=True)
class Projector:
    """Orthogonal projector stored with an orthonormal basis of its range."""

    basis: np.ndarray  # (M, rank)

    @property
    def rank(self) -> int:
        return self.basis.shape[1]

    @property
    def dim(self) -> int:
        return self.basis.shape[0]

    @property
    def matrix(self) -> np.ndarray:
        return self.basis @ self.basis.conj().T

    def apply(self, x):
        return self.basis @ (self.basis.conj().T @ x)

    def complement(self, x):
        """``(I - P) x``."""
        return x - self.apply(x)

    @classmethod
    def zero(cls, M: int) -> "Projector":
        return cls(np.zeros((M, 0), complex))


def orthonormal_range(B, rel_tol: float = DEFAULT_REL_TOL) -> np.ndarray:
    """Left singular vectors of ``B`` whose singular values exceed rel_tol * s_max."""
    B = np.asarray(B)
    if B.shape[1] == 0:
        return np.zeros((B.shape[0], 0), complex)
    U, s, _ = np.linalg.svd(B, full_matrices=False)
    if s.size == 0 or s[0] == 0:
        return np.zeros((B.shape[0], 0), complex)
    return U[:, s > rel_tol * s[0]]


def column_space_projector(B, rel_tol: float = DEFAULT_REL_TOL) -> Projector:
    """Projector ``B B^+`` onto the numerical column span of ``B``."""
    return Projector(orthonormal_range(B, rel_tol))


def residual_target_projector(whitened_mode, interference: Projector, rel_tol: float = DEFAULT_REL_TOL) -> Projector:
    """Projector on the part of span(whitened_mode) outside the interference subspace.

    Rank is decided relative to the largest singular value of the whitened
    mode matrix before interference removal, so a candidate lying inside the
    interference span yields rank 0 rather than amplified round-off.
    """
    A = np.asarray(whitened_mode)
    ref = np.linalg.norm(A, 2) if A.size else 0.0
    R = interference.complement(A)
    if ref == 0:
        return Projector.zero(A.shape[0])
    U, s, _ = np.linalg.svd(R, full_matrices=False)
    return Projector(U[:, s > rel_tol * ref])


def batched_residual_bases(modes, interference_basis, rel_tol: float = DEFAULT_REL_TOL):
    """Residual projector bases for a stack of whitened mode matrices.

    Parameters
    ----------
    modes : (G, M, N) array
    interference_basis : (M, r) array with orthonormal columns

    Returns
    -------
    U : (G, M, N) array
        Left singular vectors of ``(I - Xi) modes[g]``.
    keep : (G, N) bool array
        Which columns of ``U[g]`` belong to the numerical range.
    """
    ref = np.linalg.norm(modes, ord=2, axis=(1, 2))
    if interference_basis.shape[1]:
        Q = interference_basis
        modes = modes - np.einsum("mr,grn->gmn", Q, np.einsum("mr,gmn->grn", Q.conj(), modes))
    U, s, _ = np.linalg.svd(modes, full_matrices=False)
    keep = s > rel_tol * ref[:, None]
    return U, keep
