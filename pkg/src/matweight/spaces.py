"""Sequence-space norms over a cube window.

The engine evaluates sup_P |P|^(-tau) ||{f_j}||_{LA(P^)} where P runs over
the window cubes, P^ pairs P with levels j >= j_P, and the inner aggregation
is l^q of L^p (B-kind) or L^p of l^q (F-kind). Per-level fields live on a
common uniform grid, so all L^p masses over lattice cubes are exact block
sums; q = infinity and p = infinity take explicit supremum paths. Tiny
values are handled by rescaling with the global maximum, never by raw
powers that could underflow.
"""

from dataclasses import dataclass, field

import numpy as np

from .dyadic import grid_points, grid_shape
from .errors import CoverageError


@dataclass(frozen=True)
class SpaceParams:
    """(s, tau, p, q) with kind 'B' or 'F'; p or q may be math.inf."""

    s: float
    tau: float
    p: float
    q: float
    kind: str = "B"

    def __post_init__(self):
        if self.kind not in ("B", "F"):
            raise ValueError("kind must be 'B' or 'F'")
        if self.tau < 0:
            raise ValueError("tau must be nonnegative")
        if not (self.p > 0 and self.q > 0):
            raise ValueError("p and q must be positive")
        if self.kind == "F" and np.isinf(self.p):
            raise ValueError("F-kind with p = infinity uses the dedicated path")


@dataclass(frozen=True)
class Criticality:
    cls: str  # subcritical | critical | supercritical


def classify(params):
    """Criticality per the tau = 1/p boundary."""
    inv_p = 0.0 if np.isinf(params.p) else 1.0 / params.p
    if params.tau > inv_p or (params.tau == inv_p and np.isinf(params.q)):
        return Criticality("supercritical")
    if params.tau == inv_p and params.q < np.inf and params.kind == "F":
        return Criticality("critical")
    return Criticality("subcritical")


# ---------------------------------------------------------------------------
# coefficient fields

class CoefficientField:
    """One complex m-vector per window cube, stored per level as arrays."""

    def __init__(self, window, m, values=None):
        self.window = window
        self.m = m
        self.values = {}
        for j in window.levels():
            counts = tuple(window.counts_at_level(j))
            if values is not None and j in values:
                arr = np.asarray(values[j], dtype=complex)
                if arr.shape != counts + (m,):
                    raise ValueError(f"level {j} values shape {arr.shape}")
                self.values[j] = arr
            else:
                self.values[j] = np.zeros(counts + (m,), dtype=complex)

    def set_cube(self, Q, vec):
        k_lo, _ = self.window._level_index_ranges(Q.j)
        idx = tuple(int(ki - lo) for ki, lo in zip(Q.k, k_lo))
        self.values[Q.j][idx] = np.asarray(vec, dtype=complex)

    def cube_value(self, Q):
        k_lo, _ = self.window._level_index_ranges(Q.j)
        idx = tuple(int(ki - lo) for ki, lo in zip(Q.k, k_lo))
        return self.values[Q.j][idx]

    def copy(self):
        return CoefficientField(self.window, self.m,
                                {j: v.copy() for j, v in self.values.items()})

    def __add__(self, other):
        out = self.copy()
        for j in out.values:
            out.values[j] = out.values[j] + other.values[j]
        return out

    def scaled(self, c):
        return CoefficientField(self.window, self.m,
                                {j: c * v for j, v in self.values.items()})

    @staticmethod
    def random(window, m, rng, scale=1.0):
        vals = {}
        for j in window.levels():
            counts = tuple(window.counts_at_level(j))
            vals[j] = scale * (rng.standard_normal(counts + (m,))
                               + 1j * rng.standard_normal(counts + (m,)))
        return CoefficientField(window, m, vals)

    @staticmethod
    def atom(window, m, Q, vec):
        t = CoefficientField(window, m)
        t.set_cube(Q, vec)
        return t


def _upsample(level_values, factor, n):
    out = level_values
    for ax in range(n):
        out = np.repeat(out, factor, axis=ax)
    return out


# ---------------------------------------------------------------------------
# the LA^tau engine

def _pool_masses(vals_pow, n, from_level, to_level):
    """Sum-pool a grid of |f|^p cell masses down to level `to_level` cubes."""
    factor = 2 ** (from_level - to_level)
    lead = vals_pow.shape[: vals_pow.ndim - n]
    shp = vals_pow.shape[vals_pow.ndim - n:]
    new = []
    for s in shp:
        new.extend([s // factor, factor])
    resh = vals_pow.reshape(lead + tuple(new))
    axes = tuple(vals_pow.ndim - n + 1 + 2 * i for i in range(n))
    return resh.sum(axis=axes)


def _pool_max(vals, n, from_level, to_level):
    factor = 2 ** (from_level - to_level)
    lead = vals.shape[: vals.ndim - n]
    shp = vals.shape[vals.ndim - n:]
    new = []
    for s in shp:
        new.extend([s // factor, factor])
    resh = vals.reshape(lead + tuple(new))
    axes = tuple(vals.ndim - n + 1 + 2 * i for i in range(n))
    return resh.max(axis=axes)


@dataclass
class NormResult:
    value: float
    argmax_level: int = None
    argmax_index: tuple = None

    def __float__(self):
        return self.value


def la_tau_norm(fields, params, window, grid_level, report_argmax=False):
    """sup_P |P|^(-tau) ||{f_j}||_{LA(P^)} over the window cubes.

    fields: dict level -> scalar ndarray on the level-`grid_level` grid of
    the window box (nonnegative). Returns NormResult.
    """
    n = window.n
    levels = sorted(j for j in fields if window.j_min <= j <= window.j_max)
    if not levels:
        return NormResult(0.0)
    scale = max((float(np.max(f)) if f.size else 0.0) for f in fields.values())
    if scale == 0.0 or not np.isfinite(scale):
        return NormResult(0.0 if scale == 0.0 else float("inf"))
    cellvol = 2.0 ** (-grid_level * n)
    p, q, tau = params.p, params.q, params.tau
    best = -np.inf
    arg = (None, None)
    if params.kind == "B":
        # masses[j][lP] = per level-lP cube L^p mass of f_j
        for lP in window.levels():
            vols = 2.0 ** (-lP * n)
            stack = []
            for j in levels:
                if j < lP:
                    continue
                f = fields[j] / scale
                if np.isinf(p):
                    mass = _pool_max(f, n, grid_level, lP)
                else:
                    mass = (_pool_masses(f ** p, n, grid_level, lP) * cellvol / vols) ** (1.0 / p)
                stack.append(mass)
            if not stack:
                continue
            stack = np.stack(stack)  # (levels >= lP, cubes at lP)
            if np.isinf(q):
                agg = stack.max(axis=0)
            else:
                agg = (stack ** q).sum(axis=0) ** (1.0 / q)
            if np.isinf(p):
                vals = vols ** (-tau) * agg
            else:
                vals = vols ** (1.0 / p - tau) * agg
            idx = np.unravel_index(np.argmax(vals), vals.shape)
            if vals[idx] > best:
                best = float(vals[idx])
                arg = (lP, idx)
    else:
        # running l^q aggregation from the finest level down
        run = None
        agg_at = {}
        for j in sorted(levels, reverse=True):
            f = fields[j] / scale
            if np.isinf(q):
                run = f if run is None else np.maximum(run, f)
            else:
                run = f ** q if run is None else run + f ** q
            agg_at[j] = run.copy()
        for lP in window.levels():
            js = [j for j in levels if j >= lP]
            if not js:
                continue
            g = agg_at[min(js)]
            if not np.isinf(q):
                g = g ** (1.0 / q)
            vols = 2.0 ** (-lP * n)
            mass = (_pool_masses(g ** p, n, grid_level, lP) * cellvol / vols) ** (1.0 / p)
            vals = vols ** (1.0 / p - tau) * mass
            idx = np.unravel_index(np.argmax(vals), vals.shape)
            if vals[idx] > best:
                best = float(vals[idx])
                arg = (lP, idx)
    res = NormResult(best * scale, arg[0], arg[1])
    return res


def finfty_norm_fields(fields, q, window, grid_level):
    """sup_P (avg over P of sum_{j >= j_P} |f_j|^q)^(1/q); q = inf by sup."""
    n = window.n
    levels = sorted(j for j in fields if window.j_min <= j <= window.j_max)
    if not levels:
        return NormResult(0.0)
    scale = max((float(np.max(f)) if f.size else 0.0) for f in fields.values())
    if scale == 0.0 or not np.isfinite(scale):
        return NormResult(0.0 if scale == 0.0 else float("inf"))
    cellvol = 2.0 ** (-grid_level * n)
    run = None
    agg_at = {}
    for j in sorted(levels, reverse=True):
        f = fields[j] / scale
        if np.isinf(q):
            run = f if run is None else np.maximum(run, f)
        else:
            run = f ** q if run is None else run + f ** q
        agg_at[j] = run.copy()
    best = -np.inf
    arg = (None, None)
    for lP in window.levels():
        js = [j for j in levels if j >= lP]
        if not js:
            continue
        g = agg_at[min(js)]
        vols = 2.0 ** (-lP * n)
        if np.isinf(q):
            vals = _pool_max(g, n, grid_level, lP)
        else:
            vals = (_pool_masses(g, n, grid_level, lP) * cellvol / vols) ** (1.0 / q)
        idx = np.unravel_index(np.argmax(vals), vals.shape)
        if vals[idx] > best:
            best = float(vals[idx])
            arg = (lP, idx)
    return NormResult(best * scale, arg[0], arg[1])


# ---------------------------------------------------------------------------
# weightings

def _level_scalar_fields(t, s, weighting, grid_level, selected_mask=None):
    """Per-level scalar grid fields 2^{js} |weighting applied to t_j|."""
    window = t.window
    n = window.n
    fields = {}
    if weighting is not None and not hasattr(weighting, "level_field"):
        # matrix weight: sample W^(1/p) at the grid nodes once
        raise TypeError("use seq_norm for matrix-weight weightings")
    for j in window.levels():
        vals = t.values[j]  # (counts..., m)
        if weighting is None:
            cube_scalar = np.linalg.norm(vals, axis=-1)
        else:
            A = weighting.level_field(j)  # (counts..., m, m)
            cube_scalar = np.linalg.norm(
                np.einsum("...ij,...j->...i", A, vals), axis=-1)
        cube_scalar = cube_scalar * 2.0 ** (j * n / 2.0)  # |Q|^(-1/2) factor
        f = _upsample(cube_scalar, 2 ** (grid_level - j), n)
        if selected_mask is not None:
            f = f * selected_mask(j)
        fields[j] = 2.0 ** (j * s) * f
    return fields


def seq_norm(t, params, weighting=None, p_weight=None, grid_level=None,
             selected_mask=None):
    """Sequence-space norm of a coefficient field.

    weighting: None (unweighted Euclidean length), a ReducingFamily (the
    averaging norm |A_j t_j|), or a MatrixWeight (the |W^(1/p) t_j| norm;
    p_weight defaults to params.p). The grid level defaults to the window's
    finest level (+2 when a matrix weight must be resolved).
    """
    from .weights import MatrixWeight

    window = t.window
    n = window.n
    if weighting is None or hasattr(weighting, "level_field"):
        grid_level = grid_level if grid_level is not None else window.j_max
        fields = _level_scalar_fields(t, params.s, weighting, grid_level,
                                      selected_mask)
        return la_tau_norm(fields, params, window, grid_level)
    if not isinstance(weighting, MatrixWeight):
        raise TypeError(f"unsupported weighting {type(weighting)!r}")
    weight = weighting
    if weight.m != t.m:
        raise CoverageError("weight dimension does not match the field")
    p_w = p_weight if p_weight is not None else params.p
    grid_level = grid_level if grid_level is not None else window.j_max + 2
    pts = grid_points(window.box, grid_level)
    wpow = weight.power_at(pts, 1.0 / p_w)
    shape = grid_shape(window.box, grid_level)
    fields = {}
    for j in window.levels():
        vals = t.values[j] * 2.0 ** (j * n / 2.0)
        tj = _upsample(vals, 2 ** (grid_level - j), n).reshape(-1, t.m)
        g = np.linalg.norm(np.einsum("nij,nj->ni", wpow, tj), axis=1)
        if selected_mask is not None:
            g = g * selected_mask(j).ravel()
        fields[j] = 2.0 ** (j * params.s) * g.reshape(shape)
    return la_tau_norm(fields, params, window, grid_level)


def finfty_norm(t, s, q, weighting=None, grid_level=None):
    """The p = infinity Triebel-Lizorkin sequence norm over the window."""
    window = t.window
    grid_level = grid_level if grid_level is not None else window.j_max
    fields = _level_scalar_fields(t, s, weighting, grid_level)
    return finfty_norm_fields(fields, q, window, grid_level)


def left_half_mask(window, grid_level):
    """Mask selecting the left half (first axis) of every level-j cube."""

    def mask(j):
        shape = grid_shape(window.box, grid_level)
        factor = 2 ** (grid_level - j)
        coord = np.arange(shape[0]) % factor
        m1 = (coord < factor // 2).astype(float) if factor > 1 else np.ones(shape[0])
        full = m1.reshape((-1,) + (1,) * (window.n - 1))
        return np.broadcast_to(full, shape)

    return mask


# ---------------------------------------------------------------------------
# same-scale maximal sequence

def maximal_sequence(seq, window, r, lam):
    """(t*)_Q = [sum over same-level R of |t_R|^r / (1 + l(R)^-1 |x_R - x_Q|)^lam]^(1/r).

    seq: dict level -> nonnegative array over the window's level slice.
    r = inf takes sup over R of |t_R| (1 + distance)^(-lam).
    """
    out = {}
    n = window.n
    for j, arr in seq.items():
        counts = tuple(window.counts_at_level(j))
        vals = np.abs(np.asarray(arr, dtype=float)).reshape(-1)
        k_lo, k_hi = window._level_index_ranges(j)
        grids = np.meshgrid(*[np.arange(a, b) for a, b in zip(k_lo, k_hi)],
                            indexing="ij")
        pos = np.stack([g.ravel() for g in grids], axis=-1).astype(float)
        # l(R)^-1 |x_R - x_Q| = |k_R - k_Q| in index units
        N = pos.shape[0]
        res = np.empty(N)
        chunk = max(1, 2 ** 22 // max(N, 1))
        for lo in range(0, N, chunk):
            hi = min(N, lo + chunk)
            dist = np.linalg.norm(pos[None, lo:hi, :] - pos[:, None, :], axis=-1)
            w = (1.0 + dist) ** (-lam)
            if np.isinf(r):
                res[lo:hi] = np.max(vals[:, None] * w, axis=0)
            else:
                res[lo:hi] = (vals[:, None] ** r * w).sum(axis=0) ** (1.0 / r)
        out[j] = res.reshape(counts)
    return out


def cube_scalar_sequence(t, family=None):
    """Per-cube scalars |A_Q t_Q| (or |t_Q| without a family) as level arrays."""
    out = {}
    for j in t.window.levels():
        vals = t.values[j]
        if family is None:
            out[j] = np.linalg.norm(vals, axis=-1)
        else:
            A = family.level_field(j)
            out[j] = np.linalg.norm(np.einsum("...ij,...j->...i", A, vals), axis=-1)
    return out


def seq_norm_from_cube_scalars(seq, params, window):
    """Norm of a scalar per-cube sequence (the unweighted a-norm)."""
    grid_level = window.j_max
    n = window.n
    fields = {}
    for j, arr in seq.items():
        f = _upsample(np.asarray(arr, dtype=float) * 2.0 ** (j * n / 2.0),
                      2 ** (grid_level - j), n)
        fields[j] = 2.0 ** (j * params.s) * f
    return la_tau_norm(fields, params, window, grid_level)


# ---------------------------------------------------------------------------
# identity and embedding checks

def identity_checks(t, params, family=None, rtol=1e-10):
    """Numerically checkable identities for the given parameters.

    Returns {name: {"applicable": bool, "passed": bool or None, ...}}.
    """
    window = t.window
    report = {}
    inv_p = 1.0 / params.p

    nb_hi = seq_norm(t, SpaceParams(params.s, params.tau, params.p,
                                    max(params.p, params.q), "B"), family).value
    nf = seq_norm(t, SpaceParams(params.s, params.tau, params.p, params.q, "F"),
                  family).value
    nb_lo = seq_norm(t, SpaceParams(params.s, params.tau, params.p,
                                    min(params.p, params.q), "B"), family).value
    chain_ok = nb_hi <= nf * (1 + rtol) and nf <= nb_lo * (1 + rtol)
    report["embedding_chain"] = {
        "applicable": True, "passed": bool(chain_ok),
        "values": (nb_hi, nf, nb_lo),
    }

    if params.tau == inv_p and np.isinf(params.q):
        a_val = seq_norm(t, params, family).value
        s_shift = params.s + window.n * (params.tau - inv_p)
        f_val = finfty_norm(t, s_shift, np.inf, family).value
        err = abs(a_val - f_val) / max(a_val, 1e-300)
        report["supercritical_equality"] = {
            "applicable": True, "passed": bool(err <= 1e-12), "rel_err": err,
            "values": (a_val, f_val),
        }
    else:
        report["supercritical_equality"] = {"applicable": False, "passed": None,
                                            "reason": "(tau, q) != (1/p, inf)"}

    if params.tau > inv_p and not np.isinf(params.q):
        a_val = seq_norm(t, params, family).value
        s_shift = params.s + window.n * (params.tau - inv_p)
        f_val = finfty_norm(t, s_shift, np.inf, family).value
        gap = window.n * params.q * (params.tau - inv_p)
        upper = (1.0 / (1.0 - 2.0 ** (-gap))) ** (1.0 / params.q)
        ok = (f_val <= a_val * (1 + rtol)) and (a_val <= upper * f_val * (1 + rtol))
        report["supercritical_two_sided"] = {
            "applicable": True, "passed": bool(ok),
            "upper_constant": upper, "values": (a_val, f_val),
        }
    else:
        report["supercritical_two_sided"] = {"applicable": False, "passed": None,
                                             "reason": "needs tau > 1/p, q < inf"}

    if params.kind == "F" and not np.isinf(params.q):
        f_inf = finfty_norm(t, params.s, params.q, family).value
        crit = seq_norm(t, SpaceParams(params.s, 1.0 / params.q, params.q,
                                       params.q, "F"), family).value
        err = abs(f_inf - crit) / max(f_inf, 1e-300)
        report["finfty_definitional"] = {
            "applicable": True, "passed": bool(err <= 1e-12), "rel_err": err,
        }
    else:
        report["finfty_definitional"] = {"applicable": False, "passed": None,
                                         "reason": "needs F-kind with finite q"}

    nb = seq_norm(t, SpaceParams(params.s, params.tau, params.p, params.p, "B"),
                  family).value
    nf2 = seq_norm(t, SpaceParams(params.s, params.tau, params.p, params.p, "F"),
                   family).value
    err = abs(nb - nf2) / max(nb, 1e-300)
    report["b_equals_f_at_p"] = {"applicable": True, "passed": bool(err <= 1e-12),
                                 "rel_err": err}

    # at the p = infinity marker the B and F aggregations with q = infinity
    # are the same supremum
    vb = seq_norm(t, SpaceParams(params.s, 0.0, np.inf, np.inf, "B"), family).value
    vf = finfty_norm(t, params.s, np.inf, family).value
    err = abs(vb - vf) / max(vb, 1e-300)
    report["b_f_coincide_at_infinity"] = {"applicable": True,
                                          "passed": bool(err <= 1e-12),
                                          "rel_err": err}
    return report
