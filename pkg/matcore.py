"""
Dense matrix utilities the rest of the toolkit builds on.

Hermitian and real symmetric matrices are plain numpy arrays; the helpers here
validate them, test positivity, take square roots and pseudo-inverses, form
Schur complements and build symplectic forms.
"""

import logging

import numpy as np
from scipy.linalg import block_diag

from errors import DomainError, InvalidInputError

logger = logging.getLogger(__name__)

# Absolute tolerance on the minimum eigenvalue for positivity checks
PSD_TOL = 1e-9
# Relative eigenvalue cutoff for "full rank"
RANK_TOL = 1e-10
HERMITIAN_TOL = 1e-12


def as_matrix(M, name='matrix'):
    """Convert to a finite square numpy array or raise InvalidInputError."""
    arr = np.asarray(M)
    if arr.ndim != 2 or arr.shape[0] != arr.shape[1]:
        raise InvalidInputError(f"{name} must be square, got shape {arr.shape}")
    if not np.issubdtype(arr.dtype, np.number):
        raise InvalidInputError(f"{name} must be numeric, got dtype {arr.dtype}")
    if not np.all(np.isfinite(arr)):
        raise InvalidInputError(f"{name} has non-finite entries")
    return arr


def as_hermitian(M, tol=HERMITIAN_TOL, name='matrix'):
    """Validate Hermiticity within tol (absolute) and return the exactly Hermitian part."""
    arr = as_matrix(M, name).astype(complex)
    err = np.max(np.abs(arr - arr.conj().T)) if arr.size else 0.0
    if err > tol:
        raise InvalidInputError(f"{name} is not Hermitian (max asymmetry {err:.3e})")
    return (arr + arr.conj().T) / 2


def as_symmetric(M, name='matrix'):
    """Real symmetric matrix, symmetrized on input."""
    arr = as_matrix(M, name)
    if np.iscomplexobj(arr):
        if np.max(np.abs(arr.imag)) > HERMITIAN_TOL:
            raise InvalidInputError(f"{name} must be real")
        arr = arr.real
    arr = arr.astype(float)
    return (arr + arr.T) / 2


def min_eigenvalue(M):
    arr = as_matrix(M)
    return float(np.linalg.eigvalsh(arr)[0])


def is_psd(M, tol=PSD_TOL):
    if tol < 0:
        raise InvalidInputError(f"tolerance must be non-negative, got {tol}")
    return min_eigenvalue(M) >= -tol


def sqrt_psd(M, tol=PSD_TOL):
    """
    Principal square root of a PSD matrix.

    Eigenvalues in [-tol, 0) are clipped to zero; anything more negative is a
    DomainError. Real symmetric input gives a real result.
    """
    arr = as_matrix(M)
    w, v = np.linalg.eigh(arr)
    if w[0] < -tol:
        raise DomainError(f"matrix is not PSD: minimum eigenvalue {w[0]:.3e} below -{tol:g}")
    root = (v * np.sqrt(np.clip(w, 0.0, None))) @ v.conj().T
    return (root + root.conj().T) / 2


def pinv_psd(M, rank_tol=RANK_TOL):
    """Moore-Penrose pseudo-inverse; eigenvalues below rank_tol * max are treated as zero."""
    arr = as_matrix(M)
    w, v = np.linalg.eigh(arr)
    cutoff = rank_tol * max(w[-1], 0.0)
    inv = np.zeros_like(w)
    support = w > cutoff
    inv[support] = 1.0 / w[support]
    result = (v * inv) @ v.conj().T
    return (result + result.conj().T) / 2


def inv_sqrt_psd(M, rank_tol=RANK_TOL):
    """Pseudo-inverse of the square root, restricted to the support of M."""
    arr = as_matrix(M)
    w, v = np.linalg.eigh(arr)
    cutoff = rank_tol * max(w[-1], 0.0)
    inv = np.zeros_like(w)
    support = w > cutoff
    inv[support] = 1.0 / np.sqrt(w[support])
    result = (v * inv) @ v.conj().T
    return (result + result.conj().T) / 2


def schur_complement(M, block_a_dim, rank_tol=1e-12):
    """
    Complement of the lower-right block: for M = [[A, B*], [B, C]] return
    A - B* C^{-1} B, with A of size block_a_dim.
    """
    arr = as_matrix(M)
    n = arr.shape[0]
    if not 0 < block_a_dim < n:
        raise InvalidInputError(f"block_a_dim must lie in (0, {n}), got {block_a_dim}")
    k = block_a_dim
    A = arr[:k, :k]
    B_star = arr[:k, k:]
    B = arr[k:, :k]
    C = arr[k:, k:]
    sv = np.linalg.svd(C, compute_uv=False)
    if sv[-1] <= rank_tol * sv[0]:
        raise DomainError(f"lower-right block is singular (smallest singular value {sv[-1]:.3e})")
    result = A - B_star @ np.linalg.solve(C, B)
    return (result + result.conj().T) / 2


def symplectic_form(modes):
    """Omega = direct sum of [[0, 1], [-1, 0]] over the modes, (Q1, P1, Q2, P2, ...) ordering."""
    if modes < 0:
        raise InvalidInputError(f"number of modes must be non-negative, got {modes}")
    return np.kron(np.eye(modes), np.array([[0.0, 1.0], [-1.0, 0.0]]))


def direct_sum(*blocks):
    return block_diag(*blocks)


def matrix_to_json(M):
    """{"dim": n, "entries": rows}; complex entries as [re, im] pairs, real ones as plain numbers."""
    arr = np.asarray(M)
    if np.iscomplexobj(arr):
        entries = [[[float(z.real), float(z.imag)] for z in row] for row in arr]
    else:
        entries = [[float(x) for x in row] for row in arr]
    return {"dim": int(arr.shape[0]), "entries": entries}


def matrix_from_json(obj, name='matrix'):
    if not isinstance(obj, dict) or "entries" not in obj:
        raise InvalidInputError(f"{name}: expected an object with 'entries'")
    rows = obj["entries"]
    dim = obj.get("dim", len(rows))
    if len(rows) != dim:
        raise InvalidInputError(f"{name}: dim is {dim} but {len(rows)} rows given")
    has_complex = any(isinstance(x, (list, tuple)) for row in rows for x in row)
    out = np.zeros((dim, dim), dtype=complex if has_complex else float)
    for i, row in enumerate(rows):
        if len(row) != dim:
            raise InvalidInputError(f"{name}: entries[{i}] has {len(row)} columns, expected {dim}")
        for j, x in enumerate(row):
            try:
                if isinstance(x, (list, tuple)):
                    re, im = x
                    out[i, j] = complex(float(re), float(im))
                else:
                    out[i, j] = float(x)
            except (TypeError, ValueError) as e:
                raise InvalidInputError(f"{name}: bad value at entries[{i}][{j}]: {x!r}") from e
    return as_matrix(out, name)


def vector_from_json(values, length, name='vector'):
    try:
        arr = np.asarray(values, dtype=float).reshape(-1)
    except (TypeError, ValueError) as e:
        raise InvalidInputError(f"{name}: expected a list of numbers") from e
    if arr.shape[0] != length:
        raise InvalidInputError(f"{name}: expected length {length}, got {arr.shape[0]}")
    if not np.all(np.isfinite(arr)):
        raise InvalidInputError(f"{name} has non-finite entries")
    return arr
