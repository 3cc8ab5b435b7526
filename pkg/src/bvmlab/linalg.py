"""Dense symmetric-matrix kernels.

Every routine takes and returns plain ``numpy`` arrays. Symmetric outputs are
symmetrised explicitly so that ``A[i, j] == A[j, i]`` holds bit-for-bit.
"""

import numpy as np

from .exceptions import NotPositiveSemidefinite, SingularUpdate

PSD_TOL = 1e-10


def as_symmetric(A, tol=1e-12):
    """Validate a square, (numerically) symmetric matrix and symmetrise it.

    Parameters
    ----------
    A : array-like of shape (d, d)
    tol : float
        Allowed relative asymmetry ``max|A - A.T| <= tol * (1 + max|A|)``.

    Returns
    -------
    S : ndarray of shape (d, d)
        ``(A + A.T) / 2``, exactly symmetric.
    """
    A = np.atleast_2d(np.asarray(A, dtype=float))
    if A.ndim != 2 or A.shape[0] != A.shape[1] or A.shape[0] < 1:
        raise ValueError(f"expected a non-empty square matrix, got shape {A.shape}")
    if not np.all(np.isfinite(A)):
        raise ValueError("matrix has non-finite entries")
    scale = 1.0 + np.max(np.abs(A))
    if np.max(np.abs(A - A.T)) > tol * scale:
        raise ValueError("matrix is not symmetric")
    return 0.5 * (A + A.T)


def _sym_eigh(F):
    F = as_symmetric(F)
    w, V = np.linalg.eigh(F)
    norm = max(abs(w[0]), abs(w[-1]))
    if w[0] < -PSD_TOL * norm:
        raise NotPositiveSemidefinite(
            f"minimum eigenvalue {w[0]:.3e} below -{PSD_TOL:g} * {norm:.3e}"
        )
    return np.clip(w, 0.0, None), V


def _reassemble(w, V):
    S = (V * w) @ V.T
    return 0.5 * (S + S.T)


def sym_sqrt(F):
    """Symmetric positive semidefinite square root ``J`` with ``J @ J = F``.

    Eigenvalues within ``-1e-10 * ||F||`` of zero are clamped to zero.

    Raises
    ------
    NotPositiveSemidefinite
        If the smallest eigenvalue is below the clamping tolerance.
    """
    w, V = _sym_eigh(F)
    return _reassemble(np.sqrt(w), V)


def sym_inv_sqrt(F):
    """Inverse symmetric square root ``F^{-1/2}`` of a positive definite matrix."""
    w, V = _sym_eigh(F)
    if w[0] <= 0.0:
        raise NotPositiveSemidefinite("matrix is singular; no inverse square root")
    return _reassemble(1.0 / np.sqrt(w), V)


def sym_sqrt_and_inverse(F):
    """Return ``(F^{1/2}, F^{-1/2})`` from a single eigendecomposition."""
    w, V = _sym_eigh(F)
    if w[0] <= 0.0:
        raise NotPositiveSemidefinite("matrix is singular; no inverse square root")
    r = np.sqrt(w)
    return _reassemble(r, V), _reassemble(1.0 / r, V)


def diag_minus_rank_one_inverse(D, p):
    """Inverse of ``diag(D) - p p'`` by the Sherman-Morrison identity.

    Parameters
    ----------
    D : array-like of shape (d,)
        Strictly positive diagonal.
    p : array-like of shape (d,)

    Returns
    -------
    ndarray of shape (d, d)
        ``D^{-1} + D^{-1} p p' D^{-1} / (1 - p' D^{-1} p)``.
    """
    D = np.asarray(D, dtype=float).ravel()
    p = np.asarray(p, dtype=float).ravel()
    if D.shape != p.shape:
        raise ValueError("D and p must have the same length")
    if np.any(D <= 0):
        raise ValueError("D must be strictly positive")
    Dinv_p = p / D
    denom = 1.0 - p @ Dinv_p
    if denom <= 1e-14:
        raise SingularUpdate(f"1 - p'D^-1 p = {denom:.3e} is not positive")
    out = np.diag(1.0 / D) + np.outer(Dinv_p, Dinv_p) / denom
    return 0.5 * (out + out.T)


def operator_norm(A):
    """Largest singular value of ``A``."""
    A = np.atleast_2d(np.asarray(A, dtype=float))
    if A.size == 0:
        return 0.0
    return float(np.linalg.norm(A, 2))


def eig_extremes(A):
    """Smallest and largest eigenvalue of a symmetric matrix."""
    w = np.linalg.eigvalsh(as_symmetric(A))
    return float(w[0]), float(w[-1])


# isometric half-vectorisation of symmetric matrices: off-diagonal entries are
# scaled by sqrt(2) so the Euclidean norm of the vector equals the Frobenius norm.
def vech_iso(S):
    S = np.asarray(S, dtype=float)
    iu = np.triu_indices(S.shape[0])
    scale = np.where(iu[0] == iu[1], 1.0, np.sqrt(2.0))
    return S[iu] * scale


def unvech_iso(v, k):
    v = np.asarray(v, dtype=float)
    iu = np.triu_indices(k)
    scale = np.where(iu[0] == iu[1], 1.0, 1.0 / np.sqrt(2.0))
    S = np.zeros((k, k))
    S[iu] = v * scale
    return S + np.triu(S, 1).T
