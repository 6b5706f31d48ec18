"""Dyadic cubes, axis-aligned boxes, and finite cube windows.

The lattice cube at level j and index k is prod_i 2^-j [k_i, k_i+1); its
lower corner is 2^-j k and its edge length 2^-j. Levels may be negative
when the working domain is larger than the unit box. A CubeWindow is the
finite truncation of the lattice used by all supremum-type quantities.
"""

from dataclasses import dataclass

import numpy as np

from .errors import OutOfDomainError, ResolutionError


@dataclass(frozen=True)
class Box:
    """Half-open axis-aligned box prod_i [lo_i, hi_i)."""

    lo: tuple
    hi: tuple

    def __post_init__(self):
        if len(self.lo) != len(self.hi):
            raise ValueError("lo/hi dimension mismatch")
        if any(h <= l for l, h in zip(self.lo, self.hi)):
            raise ValueError("empty box")

    @property
    def n(self):
        return len(self.lo)

    @property
    def lo_arr(self):
        return np.asarray(self.lo, dtype=float)

    @property
    def hi_arr(self):
        return np.asarray(self.hi, dtype=float)

    @property
    def sides(self):
        return self.hi_arr - self.lo_arr

    @property
    def volume(self):
        return float(np.prod(self.sides))

    @property
    def center(self):
        return 0.5 * (self.lo_arr + self.hi_arr)

    def contains_point(self, x):
        x = np.asarray(x, dtype=float)
        return bool(np.all(x >= self.lo_arr) and np.all(x < self.hi_arr))

    def contains_box(self, other, tol=1e-12):
        return bool(
            np.all(other.lo_arr >= self.lo_arr - tol)
            and np.all(other.hi_arr <= self.hi_arr + tol)
        )

    def clip_to(self, domain):
        lo = np.maximum(self.lo_arr, domain.lo_arr)
        hi = np.minimum(self.hi_arr, domain.hi_arr)
        if np.any(hi <= lo):
            raise OutOfDomainError("box does not meet the domain")
        return Box(tuple(lo), tuple(hi))


def cube_box(n, half_side=0.5):
    """Centered working domain [-half_side, half_side)^n."""
    return Box((-half_side,) * n, (half_side,) * n)


@dataclass(frozen=True)
class DyadicCube:
    """Lattice cube prod_i 2^-j [k_i, k_i+1)."""

    j: int
    k: tuple

    @property
    def n(self):
        return len(self.k)

    @property
    def side(self):
        return 2.0 ** (-self.j)

    @property
    def volume(self):
        return self.side ** self.n

    @property
    def lower(self):
        """Lower corner x_Q = 2^-j k."""
        return self.side * np.asarray(self.k, dtype=float)

    @property
    def center(self):
        return self.lower + 0.5 * self.side

    def box(self):
        lo = self.lower
        return Box(tuple(lo), tuple(lo + self.side))

    def contains_point(self, x):
        return self.box().contains_point(x)

    def parent(self):
        return DyadicCube(self.j - 1, tuple(ki >> 1 for ki in self.k))

    def children(self):
        n = self.n
        out = []
        for off in range(2 ** n):
            bits = tuple((off >> i) & 1 for i in range(n))
            out.append(
                DyadicCube(self.j + 1, tuple(2 * ki + b for ki, b in zip(self.k, bits)))
            )
        return out


def containing_cube(j, x):
    """The level-j lattice cube containing the point x."""
    x = np.asarray(x, dtype=float)
    k = np.floor(x * 2.0 ** j).astype(int)
    return DyadicCube(int(j), tuple(int(v) for v in k))


def dilate(Q, lam, domain=None, clip=False):
    """Box with the center of Q and edge lam*l(Q).

    With a domain given, the result is either clipped to it (clip=True,
    returning (box, was_clipped)) or required to fit inside it.
    """
    if lam <= 0:
        raise ValueError("dilation factor must be positive")
    c = Q.center
    h = 0.5 * lam * Q.side
    box = Box(tuple(c - h), tuple(c + h))
    if domain is None:
        return box
    if domain.contains_box(box):
        return (box, False) if clip else box
    if not clip:
        raise OutOfDomainError(
            f"dilation by {lam} of level-{Q.j} cube leaves the domain"
        )
    return box.clip_to(domain), True


def double(Q, i, domain=None, clip=False):
    """The cube 2^i Q: same center, edge 2^i * l(Q)."""
    return dilate(Q, 2.0 ** i, domain=domain, clip=clip)


class CubeWindow:
    """All lattice cubes of levels j_min..j_max inside a dyadic base box.

    Each level slice must tile the base box exactly; this requires the box
    corners to be lattice-aligned at level j_min.
    """

    def __init__(self, n, j_min, j_max, box=None):
        if j_min > j_max:
            raise ValueError("j_min must not exceed j_max")
        self.n = n
        self.j_min = j_min
        self.j_max = j_max
        self.box = box if box is not None else cube_box(n)
        if self.box.n != n:
            raise ValueError("box dimension mismatch")
        self._level_index_ranges(j_min)  # validates alignment at the coarsest level

    def _level_index_ranges(self, j):
        scale = 2.0 ** j
        k_lo = self.box.lo_arr * scale
        k_hi = self.box.hi_arr * scale
        k_lo_r = np.rint(k_lo)
        k_hi_r = np.rint(k_hi)
        if np.any(np.abs(k_lo - k_lo_r) > 1e-9) or np.any(np.abs(k_hi - k_hi_r) > 1e-9):
            raise ResolutionError(f"base box is not lattice-aligned at level {j}")
        if np.any(k_hi_r - k_lo_r < 1):
            raise ResolutionError(f"level {j} cubes are larger than the base box")
        return k_lo_r.astype(int), k_hi_r.astype(int)

    def counts_at_level(self, j):
        k_lo, k_hi = self._level_index_ranges(j)
        return k_hi - k_lo

    def cubes_at_level(self, j):
        if not (self.j_min <= j <= self.j_max):
            raise ValueError(f"level {j} outside window [{self.j_min}, {self.j_max}]")
        k_lo, k_hi = self._level_index_ranges(j)
        grids = np.meshgrid(
            *[np.arange(a, b) for a, b in zip(k_lo, k_hi)], indexing="ij"
        )
        ks = np.stack([g.ravel() for g in grids], axis=-1)
        return [DyadicCube(j, tuple(int(v) for v in k)) for k in ks]

    def cubes(self):
        out = []
        for j in range(self.j_min, self.j_max + 1):
            out.extend(self.cubes_at_level(j))
        return out

    def levels(self):
        return list(range(self.j_min, self.j_max + 1))

    def num_cubes(self):
        return sum(int(np.prod(self.counts_at_level(j))) for j in self.levels())

    def with_levels(self, j_min, j_max):
        return CubeWindow(self.n, j_min, j_max, self.box)

    def descriptor(self):
        return {
            "n": self.n,
            "j_min": self.j_min,
            "j_max": self.j_max,
            "box_lo": list(self.box.lo),
            "box_hi": list(self.box.hi),
        }
