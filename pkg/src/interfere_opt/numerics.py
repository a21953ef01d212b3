"""Dense symmetric-matrix helpers: eigendecomposition, pseudoinverse, NNLS,
Loewner comparisons.

Matrices are plain ``numpy.ndarray`` objects; :func:`as_symmetric` is the
single validation point.
"""

import numpy as np

from .errors import InvalidInputError

PINV_CUTOFF = 1e-10


def as_symmetric(m, atol=0.0):
    """Return ``m`` as a float array after checking it is square, finite and symmetric."""
    a = np.asarray(m, dtype=float)
    if a.ndim != 2 or a.shape[0] != a.shape[1] or a.shape[0] < 1:
        raise InvalidInputError(f"expected a non-empty square matrix, got shape {a.shape}")
    if not np.all(np.isfinite(a)):
        raise InvalidInputError("matrix has non-finite entries")
    if atol == 0.0:
        if not np.array_equal(a, a.T):
            raise InvalidInputError("matrix is not symmetric")
    elif np.max(np.abs(a - a.T)) > atol:
        raise InvalidInputError("matrix is not symmetric")
    return a


def symmetrize(m):
    a = np.asarray(m, dtype=float)
    return 0.5 * (a + a.T)


def eigh(m):
    """Eigenvalues (ascending) and orthonormal eigenvectors of a symmetric matrix."""
    a = as_symmetric(m)
    w, v = np.linalg.eigh(a)
    return w, v


def pinv(m, cutoff=PINV_CUTOFF):
    """Moore-Penrose inverse of a symmetric matrix.

    Eigenvalues with ``|w| <= cutoff * max|w|`` are treated as zero.
    """
    if cutoff <= 0:
        raise InvalidInputError("cutoff must be positive")
    w, v = eigh(m)
    scale = np.max(np.abs(w))
    if scale == 0.0:
        return np.zeros_like(v)
    keep = np.abs(w) > cutoff * scale
    inv = np.zeros_like(w)
    inv[keep] = 1.0 / w[keep]
    out = (v * inv) @ v.T
    return symmetrize(out)


def loewner_geq(a, b, tol=0.0):
    """True iff ``a - b`` is positive semidefinite up to ``-tol``."""
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    if a.shape != b.shape:
        raise InvalidInputError(f"dimension mismatch: {a.shape} vs {b.shape}")
    w = np.linalg.eigvalsh(symmetrize(a - b))
    return bool(w[0] >= -tol)


def nnls(A, b, maxiter=None, tol=None):
    """Nonnegative least squares ``min ||Ax - b||`` subject to ``x >= 0``.

    Lawson-Hanson active-set iteration. The entering variable is the one with
    the largest gradient component; ``argmax`` resolves ties toward the lowest
    index, which keeps the result reproducible.

    Returns
    -------
    x : ndarray
        Nonnegative minimizer.
    rnorm : float
        Euclidean norm of ``Ax - b``.
    """
    A = np.atleast_2d(np.asarray(A, dtype=float))
    b = np.atleast_1d(np.asarray(b, dtype=float))
    m, n = A.shape
    if n < 1 or b.shape != (m,):
        raise InvalidInputError(f"incompatible shapes A{A.shape}, b{b.shape}")
    if maxiter is None:
        maxiter = 3 * n + 30
    if tol is None:
        tol = 10 * np.finfo(float).eps * max(m, n) * max(1.0, np.linalg.norm(A, 1)) * max(1.0, np.max(np.abs(b)))

    x = np.zeros(n)
    passive = np.zeros(n, dtype=bool)
    w = A.T @ (b - A @ x)
    it = 0
    while True:
        cand = np.where(~passive, w, -np.inf)
        j = int(np.argmax(cand))
        if passive.all() or cand[j] <= tol:
            break
        passive[j] = True
        while True:
            it += 1
            if it > maxiter:
                break
            idx = np.flatnonzero(passive)
            z = np.zeros(n)
            z[idx] = np.linalg.lstsq(A[:, idx], b, rcond=None)[0]
            if np.all(z[idx] > 0):
                x = z
                break
            neg = idx[z[idx] <= 0]
            alpha = np.min(x[neg] / (x[neg] - z[neg]))
            x = x + alpha * (z - x)
            passive &= x > tol
            x[~passive] = 0.0
        if it > maxiter:
            break
        w = A.T @ (b - A @ x)
    x = np.maximum(x, 0.0)
    return x, float(np.linalg.norm(A @ x - b))


def kkt_residual(A, b, x):
    """Largest violation of the NNLS optimality conditions at ``x``."""
    A = np.atleast_2d(np.asarray(A, dtype=float))
    w = A.T @ (np.asarray(b, dtype=float) - A @ x)
    pos = x > 0
    viol = np.concatenate([np.abs(w[pos]), np.maximum(w[~pos], 0.0), np.maximum(-x, 0.0)])
    return float(viol.max()) if viol.size else 0.0


def contrast_basis(t):
    """Orthonormal ``t x (t-1)`` basis of the complement of the ones vector."""
    q, _ = np.linalg.qr(np.column_stack([np.ones(t), np.eye(t)[:, : t - 1]]))
    return q[:, 1:]


def centering(t):
    """``B_t = I_t - J_t / t``."""
    return np.eye(t) - np.full((t, t), 1.0 / t)
