"""Cyclic Jacobi eigenvalues for small symmetric matrices, batched over a leading axis."""

from __future__ import annotations

import numpy as np

from .errors import InvalidInputError

SYMMETRY_RTOL = 1e-12
OFF_RTOL = 1e-12
MAX_SWEEPS = 60
BATCH = 4096


def _check(a: np.ndarray) -> None:
    if a.ndim < 2 or a.shape[-1] != a.shape[-2]:
        raise InvalidInputError(f"expected square matrices, got shape {a.shape}")
    if not np.all(np.isfinite(a)):
        raise InvalidInputError("matrix has non-finite entries")
    scale = np.abs(a).max(axis=(-2, -1), initial=0.0)
    asym = np.abs(a - np.swapaxes(a, -1, -2)).max(axis=(-2, -1), initial=0.0)
    if np.any(asym > SYMMETRY_RTOL * np.maximum(scale, np.finfo(float).tiny)):
        raise InvalidInputError("matrix is not symmetric within 1e-12 relative")


def _off_norm2(a: np.ndarray) -> np.ndarray:
    """Squared off-diagonal norm of batch-last ``(m, m, B)`` matrices.

    Summed directly: ``||a||^2 - ||diag||^2`` cancels catastrophically near
    convergence.
    """
    upper = np.triu_indices(a.shape[0], k=1)
    off = a[upper[0], upper[1]]
    return 2.0 * np.einsum("ib,ib->b", off, off)


def jacobi_eigenvalues(a: np.ndarray, *, check: bool = True) -> np.ndarray:
    """Eigenvalues of symmetric ``a`` (shape ``(..., m, m)``), sorted descending.

    Sweeps over all ``(p, q)`` pairs in row order, annihilating ``a[p, q]``
    with one rotation each, until the off-diagonal Frobenius norm is at most
    ``1e-12 * ||a||_F``.  Intended for ``m`` up to about 128.
    """
    a = np.asarray(a, dtype=float)
    if check:
        _check(a)
    batch_shape, m = a.shape[:-2], a.shape[-1]
    flat = a.reshape(-1, m, m)
    eig = np.empty((flat.shape[0], m))
    for start in range(0, flat.shape[0], BATCH):
        eig[start:start + BATCH] = _sweep_batch(flat[start:start + BATCH])
    return -np.sort(-eig, axis=-1).reshape(*batch_shape, m)


def _sweep_batch(block: np.ndarray) -> np.ndarray:
    m = block.shape[-1]
    # Batch axis last, so every row and column slice is a contiguous run.
    # Always a copy: for a single matrix the moved view is already contiguous.
    work = np.moveaxis(block, 0, -1).copy(order="C")
    tol2 = (OFF_RTOL**2) * np.einsum("ijb,ijb->b", work, work)
    active = np.flatnonzero(_off_norm2(work) > tol2)
    for _ in range(MAX_SWEEPS):
        if active.size == 0:
            break
        sub = np.ascontiguousarray(work[:, :, active])
        for p in range(m - 1):
            for q in range(p + 1, m):
                apq = sub[p, q]
                nz = apq != 0.0
                if not nz.any():
                    continue
                with np.errstate(divide="ignore", invalid="ignore", over="ignore"):
                    theta = (sub[q, q] - sub[p, p]) / (2.0 * apq)
                    t = np.sign(theta) / (np.abs(theta) + np.sqrt(theta * theta + 1.0))
                # theta = 0 needs a 45 degree turn; |theta| = inf needs none.
                t = np.where(theta == 0.0, 1.0, np.nan_to_num(t, nan=0.0))
                t[~nz] = 0.0
                c = 1.0 / np.sqrt(t * t + 1.0)
                s = t * c
                col_p = sub[:, p].copy()
                col_q = sub[:, q].copy()
                sub[:, p] = c * col_p - s * col_q
                sub[:, q] = s * col_p + c * col_q
                row_p = sub[p].copy()
                row_q = sub[q].copy()
                sub[p] = c * row_p - s * row_q
                sub[q] = s * row_p + c * row_q
                sub[p, q] = 0.0
                sub[q, p] = 0.0
        work[:, :, active] = sub
        active = active[_off_norm2(sub) > tol2[active]]
    else:
        if active.size:
            raise RuntimeError(f"Jacobi iteration did not converge in {MAX_SWEEPS} sweeps")
    return np.einsum("iib->bi", work)


def min_eig_symmetric(a: np.ndarray) -> float | np.ndarray:
    """Smallest eigenvalue of a symmetric matrix (or of each in a batch)."""
    eig = jacobi_eigenvalues(a)
    out = eig[..., -1]
    return float(out) if out.ndim == 0 else out
