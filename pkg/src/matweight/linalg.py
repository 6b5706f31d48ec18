"""Small Hermitian-matrix kernel: fractional powers, operator norms, definiteness.

All matrices here are tiny (m <= 4), so everything goes through dense
eigendecompositions; batched inputs use the leading axes.
"""

import numpy as np

from .errors import DegenerateMatrixError

# Relative eigenvalue floor: lambda_min must exceed REL_EIG_TOL * lambda_max
# before a fractional/negative power is taken.
REL_EIG_TOL = 1e-12


def hermitize(a):
    """Symmetrize a (..., m, m) array: 0.5*(A + A*)."""
    a = np.asarray(a, dtype=complex)
    return 0.5 * (a + np.conj(np.swapaxes(a, -1, -2)))


def op_norm(a):
    """Largest singular value of a (possibly batched) m x m matrix.

    For positive semidefinite input this equals the largest eigenvalue.
    """
    a = np.asarray(a, dtype=complex)
    s = np.linalg.svd(a, compute_uv=False)
    return s[..., 0]


def is_positive_definite(h, tol=None):
    """True iff the Hermitian matrix h has lambda_min > tol.

    tol defaults to 1e-12 * trace(h) (and at least 0), matching the
    degenerate-positivity convention used throughout the package.
    """
    h = np.asarray(h, dtype=complex)
    lam = np.linalg.eigvalsh(hermitize(h))
    if tol is None:
        tol = REL_EIG_TOL * max(float(np.real(np.trace(h))), 0.0)
    return bool(lam[..., 0] > tol)


def matrix_power(p, alpha, tol=None):
    """U diag(lambda_i^alpha) U* for a positive definite (..., m, m) array.

    The result is independent of the eigenvector choice. Raises
    DegenerateMatrixError when an eigenvalue sits at or below the tolerance
    (default 1e-12 relative to the largest eigenvalue of each matrix).
    """
    p = hermitize(p)
    lam, u = np.linalg.eigh(p)
    if tol is None:
        floor = REL_EIG_TOL * lam[..., -1]
    else:
        floor = np.broadcast_to(np.asarray(tol, dtype=float), lam[..., -1].shape)
    if np.any(lam[..., 0] <= floor):
        worst = float(np.min(lam[..., 0]))
        raise DegenerateMatrixError(
            f"matrix power {alpha}: eigenvalue {worst:.3e} at or below tolerance"
        )
    powed = lam ** alpha
    return hermitize(np.einsum("...ij,...j,...kj->...ik", u, powed, np.conj(u)))


def random_hermitian(rng, m, scale=1.0):
    a = rng.standard_normal((m, m)) + 1j * rng.standard_normal((m, m))
    return hermitize(scale * a)


def random_psd(rng, m, cond_max=1e6):
    """Random positive definite matrix with condition number <= cond_max."""
    a = rng.standard_normal((m, m)) + 1j * rng.standard_normal((m, m))
    q, _ = np.linalg.qr(a)
    lam_exp = rng.uniform(0.0, np.log(cond_max), size=m)
    lam = np.exp(lam_exp - lam_exp.max())
    return hermitize((q * lam) @ np.conj(q.T))
