import typing as T

import numpy as np
import scipy.linalg

# Relative jitter added to the diagonal before factorising a covariance
# which is only guaranteed to be positive semi-definite.
REGULARISATION = 1e-12


def symmetrize(matrix: np.ndarray) -> np.ndarray:
    return 0.5 * (matrix + matrix.T)


def nearest_psd(matrix: np.ndarray) -> np.ndarray:
    """Symmetrize and clip negative eigenvalues to zero."""
    sym = symmetrize(matrix)
    eigvals, eigvecs = np.linalg.eigh(sym)
    if eigvals.min() >= 0.0:
        return sym
    clipped = (eigvecs * np.clip(eigvals, 0.0, None)) @ eigvecs.T
    return symmetrize(clipped)


def regularise(covariance: np.ndarray) -> np.ndarray:
    dim = covariance.shape[0]
    jitter = REGULARISATION * np.trace(covariance) / dim
    return symmetrize(covariance) + jitter * np.eye(dim)


def regularised_cholesky(covariance: np.ndarray) -> T.Tuple[np.ndarray, bool]:
    """Cholesky factor (lower, flag) of the regularised covariance, as scipy.linalg.cho_factor."""
    return scipy.linalg.cho_factor(regularise(covariance), lower=True, check_finite=True)


def cho_logdet(factor: T.Tuple[np.ndarray, bool]) -> float:
    return float(2.0 * np.sum(np.log(np.diag(factor[0]))))


def is_psd(matrix: np.ndarray, tol: float = 1e-9) -> bool:
    """Symmetric to 1e-10 relative and smallest eigenvalue >= -tol * trace."""
    scale = max(np.abs(matrix).max(), 1.0)
    if not np.allclose(matrix, matrix.T, rtol=0.0, atol=1e-10 * scale):
        return False
    eigvals = np.linalg.eigvalsh(symmetrize(matrix))
    return bool(eigvals.min() >= -tol * max(abs(np.trace(matrix)), np.finfo(float).tiny))


def pack_lower(matrix: np.ndarray) -> T.List[float]:
    """Row-major lower triangle (diagonal included) of a square matrix."""
    rows, cols = np.tril_indices(matrix.shape[0])
    return [float(value) for value in matrix[rows, cols]]


def unpack_lower(packed: T.Sequence[float], dim: int) -> np.ndarray:
    rows, cols = np.tril_indices(dim)
    if len(packed) != rows.size:
        raise ValueError(f"packed covariance has {len(packed)} entries, expected {rows.size}")
    matrix = np.zeros((dim, dim))
    matrix[rows, cols] = packed
    matrix[cols, rows] = packed
    return matrix
