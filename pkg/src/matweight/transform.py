"""Band-limited filter banks and the analysis/synthesis transform pair.

Everything lives on a periodic uniform grid over the working box. A filter
pair consists of a radial bump supported on the annulus 1/2 <= |xi| <= 2 and
its companion normalized so the telescoping products sum to one; with both
spectra inside the grid's safe band, analysis followed by synthesis is exact
to rounding, which is the discrete counterpart of the reproducing identity.
"""

from dataclasses import dataclass

import numpy as np

from .dyadic import grid_points, grid_shape
from .errors import ResolutionError, ScaleRangeError
from .geometry import CubeWindow
from .spaces import CoefficientField, la_tau_norm, finfty_norm_fields


def bump_profile(t, k):
    """C^(k-1) radial bump on [1/2, 2]: cos(pi/2 log2 t)^k, peak 1 at t = 1."""
    t = np.asarray(t, dtype=float)
    out = np.zeros_like(t)
    mask = (t > 0.5) & (t < 2.0)
    out[mask] = np.cos(0.5 * np.pi * np.log2(t[mask])) ** k
    return out


class FilterPair:
    """Frequency samples of a Littlewood-Paley analysis/synthesis pair.

    phi_hat(j) returns the level-j analysis multipliers on the fft grid;
    psi_hat(j) the synthesis multipliers phi_hat / sum_i |phi_hat(2^-i .)|^2.
    """

    def __init__(self, box, grid_level, smoothness=6):
        if len(set(box.sides)) != 1:
            raise ValueError("filter grids require a cubic box")
        self.box = box
        self.grid_level = grid_level
        self.smoothness = smoothness
        self.n = box.n
        side = float(box.sides[0])
        N = grid_shape(box, grid_level)[0]
        if N < 8 or (N & (N - 1)) != 0:
            raise ResolutionError("grid size per axis must be a power of two >= 8")
        self.N = N
        k = np.fft.fftfreq(N) * N
        self.xi_axes = [2.0 * np.pi * k / side for _ in range(self.n)]
        grids = np.meshgrid(*self.xi_axes, indexing="ij")
        self.xi = np.stack(grids, axis=0)  # (n, *grid)
        self.xi_norm = np.sqrt(sum(g ** 2 for g in grids))
        xi_min = 2.0 * np.pi / side
        xi_max = np.pi * N / side
        self.j_min = int(np.ceil(np.log2(xi_min) - 1.0 + 1e-12))
        self.j_max = int(np.floor(np.log2(xi_max) + 1e-12)) - 1
        if self.j_max < self.j_min:
            raise ResolutionError("grid too small to hold one full annulus")
        denom = np.zeros_like(self.xi_norm)
        for j in range(self.j_min - 2, self.j_max + 3):
            denom += bump_profile(self.xi_norm / 2.0 ** j, smoothness) ** 2
        self._denom = denom
        self._phi_cache = {}
        # phases mapping fft coefficients to physical positions
        lo = box.lo_arr
        h = 2.0 ** (-grid_level)
        self._phase_mid = np.exp(1j * sum(self.xi[i] * (lo[i] + 0.5 * h)
                                          for i in range(self.n)))
        self._phase_corner = np.exp(1j * sum(self.xi[i] * lo[i]
                                             for i in range(self.n)))

    @property
    def safe_band(self):
        """Annulus of frequencies covered by every contributing scale."""
        return (2.0 ** (self.j_min + 1), 2.0 ** (self.j_max - 1))

    def safe_levels(self):
        """Scales whose full annulus sits inside the safe band."""
        return (self.j_min + 2, self.j_max - 2)

    def phi_hat(self, j):
        if j not in self._phi_cache:
            self._phi_cache[j] = bump_profile(self.xi_norm / 2.0 ** j, self.smoothness)
        return self._phi_cache[j]

    def psi_hat(self, j):
        phi = self.phi_hat(j)
        out = np.zeros_like(phi)
        mask = phi != 0.0
        out[mask] = phi[mask] / self._denom[mask]
        return out

    def calderon_defect(self):
        """max over safe-band frequencies of |sum_j conj(phi^)psi^ - 1|."""
        total = np.zeros_like(self.xi_norm)
        for j in range(self.j_min, self.j_max + 1):
            total += np.conj(self.phi_hat(j)) * self.psi_hat(j)
        lo, hi = self.safe_band
        mask = (self.xi_norm >= lo) & (self.xi_norm <= hi)
        return float(np.max(np.abs(total[mask] - 1.0)))

    def annulus_lower_bound(self, which="phi"):
        """min |profile| over 3/5 <= |xi|/2^j <= 5/3 (scale-invariant)."""
        ts = np.linspace(0.6, 5.0 / 3.0, 2001)
        vals = bump_profile(ts, self.smoothness)
        if which == "psi":
            denom = np.zeros_like(ts)
            for i in (-2, -1, 0, 1, 2):
                denom += bump_profile(ts / 2.0 ** i, self.smoothness) ** 2
            vals = vals / denom
        return float(np.min(vals))

    def descriptor(self):
        return {"grid_level": self.grid_level, "smoothness": self.smoothness,
                "box_lo": list(self.box.lo), "box_hi": list(self.box.hi),
                "j_min": self.j_min, "j_max": self.j_max}


def build_filters(box, grid_level, smoothness=6):
    return FilterPair(box, grid_level, smoothness)


@dataclass
class BandLimitedFunction:
    """Vector-valued periodic function as fft coefficients on the filter grid.

    band, when declared, is the spectral annulus (lo, hi) the coefficients
    are supposed to live on; band_defect() measures any leakage outside it.
    """

    filters: FilterPair
    coeffs: np.ndarray  # (m, *grid) with f(x) = sum_k C_k exp(i xi_k x)
    band: tuple = None

    def __post_init__(self):
        self.coeffs = np.asarray(self.coeffs, dtype=complex)
        if self.coeffs.ndim == self.filters.n:
            self.coeffs = self.coeffs[None]
        self.m = self.coeffs.shape[0]

    def band_defect(self):
        if self.band is None:
            return 0.0
        lo, hi = self.band
        outside = (self.filters.xi_norm < lo) | (self.filters.xi_norm > hi)
        peak = float(np.max(np.abs(self.coeffs)))
        if peak == 0.0:
            return 0.0
        return float(np.max(np.abs(self.coeffs[:, outside]))) / peak

    def values(self):
        """Samples at the grid cell midpoints, shape (m, *grid)."""
        F = self.coeffs * self.filters._phase_mid
        ntot = self.filters.N ** self.filters.n
        return np.fft.ifftn(F, axes=tuple(range(1, self.filters.n + 1))) * ntot

    def corner_values(self, j):
        """Samples at the level-j lattice corners 2^-j k, shape (m, counts...)."""
        flt = self.filters
        if j > flt.grid_level:
            raise ResolutionError(f"level {j} finer than the grid")
        F = self.coeffs * flt._phase_corner
        ntot = flt.N ** flt.n
        vals = np.fft.ifftn(F, axes=tuple(range(1, flt.n + 1))) * ntot
        stride = 2 ** (flt.grid_level - j)
        sl = (slice(None),) + (slice(0, None, stride),) * flt.n
        return vals[sl]

    def zero_mean_defect(self):
        zero = (0,) * self.filters.n
        peak = float(np.max(np.abs(self.coeffs)))
        return float(np.max(np.abs(self.coeffs[(slice(None),) + zero]))) / max(peak, 1e-300)

    def sup_norm(self):
        return float(np.max(np.abs(self.values())))

    def l2_norm(self):
        vals = self.values()
        cellvol = 2.0 ** (-self.filters.grid_level * self.filters.n)
        return float(np.sqrt(np.sum(np.abs(vals) ** 2) * cellvol))

    def __add__(self, other):
        band = self.band if self.band == other.band else None
        return BandLimitedFunction(self.filters, self.coeffs + other.coeffs, band)

    def scaled(self, c):
        return BandLimitedFunction(self.filters, c * self.coeffs, self.band)


def random_band_limited(filters, m, rng, band=None):
    """Random coefficients supported on the (default: safe) annulus."""
    lo, hi = band if band is not None else filters.safe_band
    mask = (filters.xi_norm >= lo) & (filters.xi_norm <= hi)
    shape = (m,) + filters.xi_norm.shape
    coeffs = (rng.standard_normal(shape) + 1j * rng.standard_normal(shape)) * mask
    return BandLimitedFunction(filters, coeffs, band=(lo, hi))


def convolve_scale(f, filters, j):
    """phi_j * f by frequency multiplication; exact on the periodic grid."""
    if not (filters.j_min <= j <= filters.j_max):
        raise ScaleRangeError(f"scale {j} outside [{filters.j_min}, {filters.j_max}]")
    return BandLimitedFunction(filters, f.coeffs * filters.phi_hat(j), f.band)


def analyze(f, filters, window):
    """Coefficients <f, phi_Q> = |Q|^(1/2) (conj-reflected phi)_j * f at x_Q."""
    if window.j_max > filters.grid_level:
        raise ResolutionError("window finer than the grid")
    if window.j_min < filters.j_min or window.j_max > filters.j_max:
        raise ScaleRangeError("window scales outside the resolvable range")
    t = CoefficientField(window, f.m)
    for j in window.levels():
        conv = BandLimitedFunction(filters, f.coeffs * np.conj(filters.phi_hat(j)))
        vals = conv.corner_values(j)  # (m, counts...)
        vol_half = 2.0 ** (-j * window.n / 2.0)
        t.values[j] = np.moveaxis(vals, 0, -1) * vol_half
    return t


def synthesize(t, filters):
    """sum_Q t_Q psi_Q accumulated scale by scale in frequency space."""
    window = t.window
    if window.j_min < filters.j_min or window.j_max > filters.j_max:
        raise ScaleRangeError("window scales outside the resolvable range")
    n = filters.n
    side = float(filters.box.sides[0])
    shape = (t.m,) + filters.xi_norm.shape
    out = np.zeros(shape, dtype=complex)
    for j in window.levels():
        vals = np.moveaxis(t.values[j], -1, 0)  # (m, counts...)
        grid = np.zeros((t.m,) + grid_shape(filters.box, filters.grid_level),
                        dtype=complex)
        stride = 2 ** (filters.grid_level - j)
        sl = (slice(None),) + (slice(0, None, stride),) * n
        grid[sl] = vals
        F = np.fft.fftn(grid, axes=tuple(range(1, n + 1))) * np.conj(filters._phase_corner)
        vol_half = 2.0 ** (-j * n / 2.0)
        out += filters.psi_hat(j) * F * vol_half / side ** n
    return BandLimitedFunction(filters, out)


def _level_conv_fields(f, filters, window):
    return {j: convolve_scale(f, filters, j).values() for j in window.levels()}


def function_norm(f, filters, params, weighting=None, p_weight=None, window=None):
    """Function-space norm from the per-scale convolution fields.

    weighting is a MatrixWeight (pointwise |W^(1/p) .|), a ReducingFamily
    (piecewise-constant |A_j .|), or None for the plain Euclidean length.
    """
    from .weights import MatrixWeight

    window = window or CubeWindow(filters.n, *filters.safe_levels(), filters.box)
    conv = _level_conv_fields(f, filters, window)
    fields = _weighted_scalar_fields(conv, filters, params.s, weighting, p_weight
                                     if p_weight is not None else params.p, window)
    return la_tau_norm(fields, params, window, filters.grid_level)


def finfty_function_norm(f, filters, s, q, weighting=None, p_weight=2.0, window=None):
    window = window or CubeWindow(filters.n, *filters.safe_levels(), filters.box)
    conv = _level_conv_fields(f, filters, window)
    fields = _weighted_scalar_fields(conv, filters, s, weighting, p_weight, window)
    return finfty_norm_fields(fields, q, window, filters.grid_level)


def _weighted_scalar_fields(conv, filters, s, weighting, p_weight, window):
    from .weights import MatrixWeight

    n = filters.n
    fields = {}
    if weighting is None:
        for j, v in conv.items():
            fields[j] = 2.0 ** (j * s) * np.linalg.norm(v, axis=0)
        return fields
    if isinstance(weighting, MatrixWeight):
        pts = grid_points(filters.box, filters.grid_level)
        wpow = weighting.power_at(pts, 1.0 / p_weight)
        shape = grid_shape(filters.box, filters.grid_level)
        for j, v in conv.items():
            flat = v.reshape(v.shape[0], -1).T  # (N, m)
            g = np.linalg.norm(np.einsum("nij,nj->ni", wpow, flat), axis=1)
            fields[j] = 2.0 ** (j * s) * g.reshape(shape)
        return fields
    # reducing family: apply the piecewise-constant A_j
    for j, v in conv.items():
        A = weighting.level_field(j)  # (counts..., m, m)
        blocks = _to_blocks(v, window, j, filters.grid_level)  # (cells, m, block)
        out = np.einsum("cij,cjb->cib", A.reshape(-1, v.shape[0], v.shape[0]), blocks)
        g = np.linalg.norm(out, axis=1)  # (cells, block)
        fields[j] = 2.0 ** (j * s) * _from_blocks(g, window, j, filters.grid_level)
    return fields


def _to_blocks(v, window, j, grid_level):
    """(m, *grid) -> (cells, m, block) grouping grid cells by level-j cube."""
    n = window.n
    m = v.shape[0]
    counts = tuple(window.counts_at_level(j))
    f = 2 ** (grid_level - j)
    shp = [m]
    for c in counts:
        shp.extend([c, f])
    arr = v.reshape(shp)
    # order axes as (m, c_1..c_n, f_1..f_n)
    perm = [0] + [1 + 2 * i for i in range(n)] + [2 + 2 * i for i in range(n)]
    arr = arr.transpose(perm)
    cells = int(np.prod(counts))
    return arr.reshape(m, cells, f ** n).transpose(1, 0, 2)


def _from_blocks(g, window, j, grid_level):
    """(cells, block) -> (*grid,) inverse of _to_blocks for scalar data."""
    n = window.n
    counts = tuple(window.counts_at_level(j))
    f = 2 ** (grid_level - j)
    arr = g.reshape(counts + (f,) * n)
    perm = []
    for i in range(n):
        perm.extend([i, n + i])
    arr = arr.transpose(perm)
    return arr.reshape(tuple(c * f for c in counts))


def peetre_sup(f, filters, family, window):
    """Per-cube |Q|^(1/2) sup over grid nodes in Q of |A_Q (phi_j * f)(y)|."""
    out = {}
    n = window.n
    for j in window.levels():
        v = convolve_scale(f, filters, j).values()
        A = family.level_field(j)
        blocks = _to_blocks(v, window, j, filters.grid_level)
        applied = np.einsum("cij,cjb->cib", A.reshape(-1, f.m, f.m), blocks)
        sup = np.abs(np.linalg.norm(applied, axis=1)).max(axis=1)
        counts = tuple(window.counts_at_level(j))
        out[j] = (2.0 ** (-j * n / 2.0)) * sup.reshape(counts)
    return out


def lifting(f, sigma):
    """Frequency multiplier |xi|^sigma; requires a zero mean."""
    if f.zero_mean_defect() > 1e-12:
        raise ValueError("lifting requires a vanishing zero-frequency coefficient")
    flt = f.filters
    mult = np.zeros_like(flt.xi_norm)
    nz = flt.xi_norm > 0
    mult[nz] = flt.xi_norm[nz] ** sigma
    return BandLimitedFunction(flt, f.coeffs * mult, f.band)


def schwartz_seminorm(filters, M, which="phi", j_ref=None):
    """sup_{|gamma| <= M} sup_x |d^gamma phi(x)| (1 + |x|)^(n + M + |gamma|).

    The unit-annulus filter is only resolvable after rescaling, so the
    samples come from the level-j_ref copy and are scaled back; the
    supremum covers |x| up to 2^j_ref times half the period (the decay
    visible within one period of the surrogate).
    """
    n = filters.n
    side = float(filters.box.sides[0])
    if j_ref is None:
        j_ref = filters.j_max - 2  # widest decay window the grid resolves
    prof = filters.phi_hat(j_ref) if which == "phi" else filters.psi_hat(j_ref)
    base = prof / side ** n  # coefficients of the periodized level-j filter
    pts = grid_points(filters.box, filters.grid_level, flat=False)
    radii = 2.0 ** j_ref * np.linalg.norm(pts, axis=-1)
    best = 0.0
    ntot = filters.N ** n
    from itertools import product

    for gamma in product(range(M + 1), repeat=n):
        tot = sum(gamma)
        if tot > M:
            continue
        mult = np.ones_like(filters.xi_norm, dtype=complex)
        for ax, g in enumerate(gamma):
            if g:
                mult = mult * (1j * filters.xi[ax]) ** g
        vals = np.fft.ifftn(base * mult * filters._phase_mid,
                            axes=tuple(range(n))) * ntot
        scale = 2.0 ** (-j_ref * (n + tot))
        weight = (1.0 + radii) ** (n + M + tot)
        best = max(best, float(np.max(np.abs(vals) * weight)) * scale)
    return best
