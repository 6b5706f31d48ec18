"""Reducing operators: one positive definite matrix per cube whose ellipsoid
norm is two-sided equivalent to the L^p cube-average norm of the weight.

At p = 2 the unit ball of z -> (avg |W^(1/2/... )z|^2)^(1/2) is exactly an
ellipsoid and the operator is (avg_Q W)^(1/2). For general p the operator is
fitted: boundary samples of the quasi-norm ball are enclosed by a Khachiyan
minimum-volume ellipsoid on the realified space R^(2m), symmetrized over
complex phases so the fitted form commutes with complex scaling. Every
constructed operator carries an empirical equivalence bracket.
"""

import hashlib
import json
from dataclasses import dataclass

import numpy as np

from . import linalg
from .errors import FitError, IntegrabilityError
from .quad import average_box, box_nodes
from .weights import _as_box, _precheck_integrability, dual_weight


# ---------------------------------------------------------------------------
# direction sampling

def _kronecker_sequence(count, dim):
    """Low-discrepancy points in [0,1)^dim (additive golden-like recurrence)."""
    x = 2.0
    for _ in range(40):
        x = (1.0 + x) ** (1.0 / (dim + 1.0))
    alpha = x ** -(1.0 + np.arange(dim))
    i = np.arange(1, count + 1)[:, None]
    return np.mod(0.5 + i * alpha[None, :], 1.0)


def unit_directions(m, K):
    """K quasi-uniform unit vectors in C^m (deterministic), plus the basis."""
    if m == 1:
        return np.ones((1, 1), dtype=complex)
    u = _kronecker_sequence(K, 2 * m)
    u = np.clip(u, 1e-12, 1.0 - 1e-12)
    # Box-Muller pairs -> quasi-gaussian coordinates -> normalize
    r = np.sqrt(-2.0 * np.log(u[:, :m]))
    th = 2.0 * np.pi * u[:, m:]
    g = np.concatenate([r * np.cos(th), r * np.sin(th)], axis=1)
    g /= np.linalg.norm(g, axis=1, keepdims=True)
    z = g[:, :m] + 1j * g[:, m:]
    z = np.concatenate([np.eye(m, dtype=complex), z], axis=0)
    return z / np.linalg.norm(z, axis=1, keepdims=True)


def _realify(z):
    return np.concatenate([z.real, z.imag], axis=-1)


def _complex_structure(m):
    J = np.zeros((2 * m, 2 * m))
    J[:m, m:] = -np.eye(m)
    J[m:, :m] = np.eye(m)
    return J


def _hermitian_from_real_form(E):
    """Complex Hermitian H with z*Hz = x^T E x after J-symmetrization."""
    d = E.shape[0]
    m = d // 2
    J = _complex_structure(m)
    Ec = 0.5 * (E + J @ E @ J.T)
    S = Ec[:m, :m]
    T = -Ec[:m, m:]
    return linalg.hermitize(S + 1j * T)


# ---------------------------------------------------------------------------
# cube quasi-norms

class CubeNorm:
    """z -> (avg over Q of |W^(1/p)(x) z|^p dx)^(1/p), batched over directions."""

    def __init__(self, weight, p, region, qspec=None):
        self.weight = weight
        self.p = float(p)
        self.box = _as_box(region)
        self.qspec = qspec
        _precheck_integrability(weight, self.box, 1.0 / self.p, self.p)

    def bundle(self, dirs):
        """Values on a (K, m) array of directions in one quadrature pass."""
        dirs = np.atleast_2d(np.asarray(dirs, dtype=complex))
        w = self.weight
        if w.is_scalar():
            res = average_box(lambda X: w.scalar_profile(X), self.box, self.qspec,
                              w.singular_points, name="cube norm")
            return float(res.value) ** (1.0 / self.p) * np.linalg.norm(dirs, axis=1)

        def fn(X):
            mats = w.power_at(X, 1.0 / self.p)  # (N, m, m)
            vecs = np.einsum("nij,kj->nki", mats, dirs)
            return np.linalg.norm(vecs, axis=2) ** self.p  # (N, K)

        res = average_box(fn, self.box, self.qspec, w.singular_points, name="cube norm")
        return np.asarray(res.value) ** (1.0 / self.p)

    def __call__(self, z):
        return float(self.bundle(np.asarray(z, dtype=complex)[None, :])[0])


def cube_norm(weight, p, region, z, qspec=None):
    return CubeNorm(weight, p, region, qspec)(z)


# ---------------------------------------------------------------------------
# minimum-volume enclosing ellipsoid (origin-centered)

def mvee_centered(points, tol=1e-8, max_iter=10_000, fail_violation=0.05):
    """Origin-centered MVEE of a symmetric point set via Khachiyan ascent.

    Returns E with {x : x^T E x <= 1} minimal enclosing all points. Stops at
    relative violation < tol or max_iter; raises FitError only if the final
    violation is still above fail_violation.
    """
    P = np.asarray(points, dtype=float)
    N, d = P.shape
    u = np.full(N, 1.0 / N)
    X = P.T @ (P * u[:, None])
    Xinv = np.linalg.inv(X)
    M = np.einsum("ni,ij,nj->n", P, Xinv, P)
    viol = np.inf
    for it in range(max_iter):
        j = int(np.argmax(M))
        viol = (M[j] - d) / d
        if viol < tol:
            break
        beta = (M[j] - d) / (d * (M[j] - 1.0))
        u *= 1.0 - beta
        u[j] += beta
        if (it + 1) % 256 == 0:
            X = P.T @ (P * u[:, None])
            Xinv = np.linalg.inv(X)
            M = np.einsum("ni,ij,nj->n", P, Xinv, P)
        else:
            # Sherman-Morrison update of Xinv and the scores M
            pj = P[j]
            v = Xinv @ pj
            denom = (1.0 - beta) + beta * M[j]
            Xinv = (Xinv - (beta / denom) * np.outer(v, v)) / (1.0 - beta)
            Pv = P @ v
            M = (M - (beta / denom) * Pv ** 2) / (1.0 - beta)
    if viol > fail_violation:
        raise FitError(f"ellipsoid fit stalled at violation {viol:.2e}")
    X = P.T @ (P * u[:, None])
    return np.linalg.inv(X) / d


# ---------------------------------------------------------------------------
# reducing operators

N_PHASES = 8


def _reduce_exact_p2(weight, region, qspec):
    box = _as_box(region)
    if weight.is_scalar():
        res = average_box(lambda X: weight.scalar_profile(X), box, qspec,
                          weight.singular_points, name="matrix average")
        return np.sqrt(float(res.value)) * np.eye(weight.m, dtype=complex)
    res = average_box(lambda X: weight.power_at(X, 1.0), box, qspec,
                      weight.singular_points, name="matrix average")
    return linalg.matrix_power(res.value, 0.5)


def _reduce_mvee(weight, p, region, K, qspec):
    m = weight.m
    norm = CubeNorm(weight, p, region, qspec)
    if m == 1:
        return np.array([[norm(np.ones(1, dtype=complex))]], dtype=complex)
    dirs = unit_directions(m, K)
    rho = norm.bundle(dirs)
    boundary = dirs / rho[:, None]
    phases = np.exp(2j * np.pi * np.arange(N_PHASES) / N_PHASES)
    cloud = (boundary[None, :, :] * phases[:, None, None]).reshape(-1, m)
    E = mvee_centered(_realify(cloud))
    H = _hermitian_from_real_form(E)
    return linalg.matrix_power(H, 0.5)


def reduce_operator(weight, p, region, method="auto", K=256, qspec=None,
                    calibrate=True):
    """A positive definite matrix A with |Az| equivalent to the cube norm.

    method 'exact_p2' requires p = 2 and returns (avg_Q W)^(1/2); 'mvee'
    fits the quasi-norm ball for any p. With calibrate=True the result is
    rescaled so its equivalence bracket is geometrically centered at 1.
    """
    if method == "auto":
        method = "exact_p2" if p == 2.0 else "mvee"
    if method == "exact_p2":
        if p != 2.0:
            raise ValueError("exact_p2 construction requires p = 2")
        A = _reduce_exact_p2(weight, region, qspec)
    elif method == "mvee":
        A = _reduce_mvee(weight, p, region, K, qspec)
    else:
        raise ValueError(f"unknown method {method!r}")
    if calibrate:
        lo, hi = verify_reducing(A, weight, p, region, K=64, qspec=qspec,
                                 include_matrices=False)
        A = A / np.sqrt(lo * hi)
    return A


def dual_reduce(weight, p, region, method="auto", K=256, qspec=None):
    """Reducing operator of order p' for the dual weight W^(-1/(p-1))."""
    pprime = p / (p - 1.0)
    return reduce_operator(dual_weight(weight, p), pprime, region, method, K, qspec)


def verify_reducing(A, weight, p, region, K=64, qspec=None, include_matrices=True):
    """Bracket [r_lo, r_hi] of |Az| / rho_Q(z) over sampled directions.

    With include_matrices=True the bracket also covers the matrix ratios
    ||A M|| / (avg ||W^(1/p) M||^p)^(1/p) for a small basis of test matrices.
    """
    A = np.asarray(A, dtype=complex)
    m = weight.m
    norm = CubeNorm(weight, p, region, qspec)
    dirs = unit_directions(m, max(K, 64))
    rho = norm.bundle(dirs)
    ratios = np.linalg.norm(dirs @ A.T, axis=1) / rho
    lo, hi = float(ratios.min()), float(ratios.max())
    if include_matrices and m > 1:
        from .weights import cube_average_matrix_norm

        mats = [np.eye(m, dtype=complex)]
        for i in range(m):
            for k in range(m):
                M = np.zeros((m, m), dtype=complex)
                M[i, k] = 1.0
                mats.append(M)
        for M in mats:
            denom = cube_average_matrix_norm(weight, p, region, M, qspec)
            r = float(linalg.op_norm(A @ M)) / denom
            lo, hi = min(lo, r), max(hi, r)
    return lo, hi


# ---------------------------------------------------------------------------
# families over a window

@dataclass
class ReducingFamily:
    """One reducing operator per window cube, with per-cube brackets."""

    window: object
    p: float
    method: str
    mats: dict       # level -> array (counts..., m, m)
    inv: dict        # level -> array (counts..., m, m)
    brackets: dict   # level -> (lo array, hi array)
    m: int

    def _index(self, Q):
        k_lo, _ = self.window._level_index_ranges(Q.j)
        return tuple(int(ki - lo) for ki, lo in zip(Q.k, k_lo))

    def matrix(self, Q):
        return self.mats[Q.j][self._index(Q)]

    def inverse(self, Q):
        return self.inv[Q.j][self._index(Q)]

    def bracket(self, Q):
        lo, hi = self.brackets[Q.j]
        return float(lo[self._index(Q)]), float(hi[self._index(Q)])

    def level_field(self, j):
        """A_j = sum_Q A_Q 1_Q as a (counts..., m, m) array."""
        return self.mats[j]

    def _cell_index(self, j, X):
        X = np.atleast_2d(X)
        k_lo, k_hi = self.window._level_index_ranges(j)
        shape = tuple(k_hi - k_lo)
        rel = X * 2.0 ** j - k_lo
        idx = np.clip(np.floor(rel).astype(int), 0, np.asarray(shape) - 1)
        return np.ravel_multi_index(tuple(idx.T), shape)

    def at_points(self, j, X):
        flat = self.mats[j].reshape(-1, self.m, self.m)
        return flat[self._cell_index(j, X)]

    def inverse_at_points(self, j, X):
        flat = self.inv[j].reshape(-1, self.m, self.m)
        return flat[self._cell_index(j, X)]

    def worst_bracket(self):
        lo = min(float(l.min()) for l, _ in self.brackets.values())
        hi = max(float(h.max()) for _, h in self.brackets.values())
        return lo, hi


_family_cache = {}


def family_cache_key(weight, p, window, method, K):
    payload = json.dumps({
        "weight": weight.descriptor(), "p": p, "window": window.descriptor(),
        "method": method, "K": K,
    }, sort_keys=True)
    return hashlib.sha256(payload.encode()).hexdigest()


def build_family(weight, p, window, method="auto", K=256, diag_K=64, qspec=None,
                 use_cache=True):
    """Construct reducing operators for every cube of the window."""
    key = family_cache_key(weight, p, window, method, K)
    if use_cache and key in _family_cache:
        return _family_cache[key]
    mats, invs, brackets = {}, {}, {}
    m = weight.m
    for j in window.levels():
        counts = tuple(window.counts_at_level(j))
        A = np.zeros(counts + (m, m), dtype=complex)
        lo_arr = np.zeros(counts)
        hi_arr = np.zeros(counts)
        for Q in window.cubes_at_level(j):
            k_lo, _ = window._level_index_ranges(j)
            idx = tuple(int(ki - lo) for ki, lo in zip(Q.k, k_lo))
            AQ = reduce_operator(weight, p, Q, method=method, K=K, qspec=qspec)
            lo, hi = verify_reducing(AQ, weight, p, Q, K=diag_K, qspec=qspec)
            A[idx] = AQ
            lo_arr[idx], hi_arr[idx] = lo, hi
        mats[j] = A
        invs[j] = np.linalg.inv(A)
        brackets[j] = (lo_arr, hi_arr)
    fam = ReducingFamily(window, float(p), method, mats, invs, brackets, m)
    if use_cache:
        _family_cache[key] = fam
    return fam


def identity_family(window, m, p=2.0):
    mats, invs, brackets = {}, {}, {}
    for j in window.levels():
        counts = tuple(window.counts_at_level(j))
        eye = np.broadcast_to(np.eye(m, dtype=complex), counts + (m, m)).copy()
        mats[j] = eye
        invs[j] = eye.copy()
        brackets[j] = (np.ones(counts), np.ones(counts))
    return ReducingFamily(window, float(p), "identity", mats, invs, brackets, m)


# ---------------------------------------------------------------------------
# integrability probe

@dataclass
class ProbeRow:
    r: float
    forward: float      # sup_Q (avg ||A_Q W^(-1/p)||^r)^(1/r), may be nan
    backward: float     # sup_Q (avg ||W^(1/p) A_Q^(-1)||^r)^(1/r)
    forward_ok: bool
    backward_ok: bool


@dataclass
class ProbeTable:
    rows: list
    sup_form: float     # p <= 1: sup_Q ess-sup ||A_Q W^(-1/p)|| (node max)
    stable_r: float


def _pow_avg(weight, A, alpha, r, box, base_depth=4, grade_depth=24):
    """(avg over box of ||A W^alpha(x)||^r dx)^(1/r) on a fixed graded mesh."""
    from .weights import _on_closure

    for s in weight.singular_points:
        if _on_closure(box, s):
            if r * weight.norm_exponent(s, alpha) <= -weight.n:
                raise IntegrabilityError("divergent probe entry")
    vals = []
    for bd, gd in ((base_depth, grade_depth), (base_depth + 1, grade_depth + 10)):
        X, v = box_nodes(box, bd, gd, 1, weight.singular_points)
        F = linalg.op_norm(np.einsum("ij,njk->nik", A, weight.power_at(X, alpha)))
        vals.append(float((v / v.sum()) @ F ** r) ** (1.0 / r))
    if abs(vals[1] - vals[0]) > 0.05 * abs(vals[1]):
        raise IntegrabilityError("probe entry did not stabilize under refinement")
    return vals[1]


def integrability_probe(weight, p, family, window, r_grid):
    """Per-r table of sup-over-cubes averaged norms of A_Q W^(-1/p) and
    W^(1/p) A_Q^(-1); divergent entries are marked, not fatal."""
    rows = []
    cubes = window.cubes()
    for r in r_grid:
        fwd, bwd = 0.0, 0.0
        fwd_ok, bwd_ok = True, True
        for Q in cubes:
            A = family.matrix(Q)
            Ainv = family.inverse(Q)
            box = Q.box()
            try:
                fwd = max(fwd, _pow_avg(weight, A, -1.0 / p, r, box))
            except IntegrabilityError:
                fwd_ok = False
            try:
                # ||W^(1/p) A^(-1)|| = ||A^(-1) W^(1/p)|| for these Hermitian factors
                bwd = max(bwd, _pow_avg(weight, Ainv, 1.0 / p, r, box))
            except IntegrabilityError:
                bwd_ok = False
        rows.append(ProbeRow(float(r), fwd if fwd_ok else float("nan"),
                             bwd if bwd_ok else float("nan"), fwd_ok, bwd_ok))
    sup_form = 0.0
    if p <= 1.0:
        for Q in cubes:
            A = family.matrix(Q)
            X, _ = box_nodes(Q.box(), 3, 16, 0, weight.singular_points)
            F = linalg.op_norm(np.einsum("ij,njk->nik", A, weight.power_at(X, -1.0 / p)))
            sup_form = max(sup_form, float(F.max()))
    stable = [row.r for row in rows if row.forward_ok and row.backward_ok]
    return ProbeTable(rows, sup_form, max(stable) if stable else float("nan"))
