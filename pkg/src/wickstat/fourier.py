"""Ball-truncated Fourier calculus on the d-dimensional torus.

Conventions
-----------
The torus is T^d = (R / 2 pi Z)^d.  The orthonormal basis is

    e_l(x) = (2 pi)^(-d/2) exp(i l . x),        l in Z^d,

and a field is represented by its coefficients fhat(l) = <e_l, f> on the
Euclidean ball {|l| <= N}.  Real fields satisfy fhat(-l) = conj(fhat(l)).
The Japanese bracket is <l> = (|l|^2 + 1)^(1/2); Fourier multipliers act
diagonally, e.g. <grad>^alpha e_l = <l>^alpha e_l.

Lattice points are enumerated in a fixed lexicographic order so that every
reduction over modes is performed in a reproducible order.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import lru_cache, cached_property

import numpy as np
from scipy.fft import fftn, ifftn, next_fast_len

TWO_PI = 2.0 * np.pi


def multiplier_weight(l, alpha: float):
    """Evaluate <l>^alpha.  The last axis of `l` indexes coordinates."""
    arr = np.asarray(l, dtype=np.float64)
    if arr.ndim == 0:
        norm_sq = arr * arr
    else:
        norm_sq = np.sum(arr * arr, axis=-1)
    return (norm_sq + 1.0) ** (0.5 * alpha)


class AliasingError(ValueError):
    """Grid too coarse for the requested band-limited operation."""


@dataclass(frozen=True)
class Lattice:
    """The mode set Z^d_N = {l in Z^d : |l| <= N}, lexicographically ordered."""

    d: int
    N: int
    points: np.ndarray  # (P, d) int64, read-only

    @staticmethod
    @lru_cache(maxsize=None)
    def ball(d: int, N: int) -> "Lattice":
        if d < 1 or N < 0:
            raise ValueError(f"need d >= 1 and N >= 0, got d={d}, N={N}")
        axis = np.arange(-N, N + 1, dtype=np.int64)
        grids = np.meshgrid(*([axis] * d), indexing="ij")
        pts = np.stack([g.ravel() for g in grids], axis=-1)
        pts = pts[np.einsum("pd,pd->p", pts, pts) <= N * N]
        pts.setflags(write=False)
        return Lattice(d, N, pts)

    @property
    def size(self) -> int:
        return self.points.shape[0]

    @cached_property
    def norms_sq(self) -> np.ndarray:
        out = np.einsum("pd,pd->p", self.points, self.points).astype(np.float64)
        out.setflags(write=False)
        return out

    @cached_property
    def _index(self) -> dict:
        return {tuple(p): i for i, p in enumerate(self.points)}

    def index_of(self, point) -> int:
        return self._index[tuple(int(c) for c in np.atleast_1d(point))]

    @cached_property
    def zero_index(self) -> int:
        return self.index_of((0,) * self.d)

    @cached_property
    def neg_index(self) -> np.ndarray:
        """Position of -l for each l; pairs coefficients under conjugation."""
        out = np.array([self._index[tuple(-p)] for p in self.points], dtype=np.int64)
        out.setflags(write=False)
        return out

    @cached_property
    def half_mask(self) -> np.ndarray:
        """True on the half lattice where the first nonzero coordinate is positive."""
        mask = np.zeros(self.size, dtype=bool)
        for i, p in enumerate(self.points):
            for c in p:
                if c != 0:
                    mask[i] = c > 0
                    break
        mask.setflags(write=False)
        return mask

    @cached_property
    def half_indices(self) -> np.ndarray:
        out = np.nonzero(self.half_mask)[0]
        out.setflags(write=False)
        return out

    def weight(self, alpha: float) -> np.ndarray:
        return (self.norms_sq + 1.0) ** (0.5 * alpha)

    def flat_embed_indices(self, M: int) -> np.ndarray:
        """Flat positions of the ball modes inside an M^d FFT cube (wrapped)."""
        return _embed_indices(self.d, self.N, M)


@lru_cache(maxsize=None)
def _embed_indices(d: int, N: int, M: int) -> np.ndarray:
    lat = Lattice.ball(d, N)
    wrapped = np.mod(lat.points, M)
    flat = np.zeros(lat.size, dtype=np.int64)
    for axis in range(d):
        flat = flat * M + wrapped[:, axis]
    flat.setflags(write=False)
    return flat


@dataclass
class PhysicalGrid:
    """Samples of a field on the uniform grid x_j = 2 pi j / M per axis."""

    d: int
    M: int
    values: np.ndarray  # shape (M,) * d

    def mean(self) -> float | complex:
        return self.values.mean()

    def integral(self) -> float | complex:
        """∫_{T^d} f dx, exact for band-limited f when M is dealiased."""
        return TWO_PI**self.d * self.values.mean()


@dataclass
class SpectralField:
    """A ball-truncated field given by coefficients aligned with `lattice.points`."""

    lattice: Lattice
    coeffs: np.ndarray  # (P,) complex128

    def __post_init__(self):
        c = np.asarray(self.coeffs, dtype=np.complex128)
        if c.shape != (self.lattice.size,):
            raise ValueError(
                f"coefficient shape {c.shape} does not match lattice size {self.lattice.size}"
            )
        self.coeffs = c

    # -- constructors ------------------------------------------------------

    @staticmethod
    def zeros(lattice: Lattice) -> "SpectralField":
        return SpectralField(lattice, np.zeros(lattice.size, dtype=np.complex128))

    @staticmethod
    def basis(lattice: Lattice, l) -> "SpectralField":
        """The single basis function e_l (not Hermitian on its own)."""
        c = np.zeros(lattice.size, dtype=np.complex128)
        c[lattice.index_of(l)] = 1.0
        return SpectralField(lattice, c)

    @staticmethod
    def constant(lattice: Lattice, value: float) -> "SpectralField":
        """The constant field f(x) = value, i.e. fhat(0) = (2 pi)^(d/2) value."""
        c = np.zeros(lattice.size, dtype=np.complex128)
        c[lattice.zero_index] = TWO_PI ** (0.5 * lattice.d) * value
        return SpectralField(lattice, c)

    # -- algebra -----------------------------------------------------------

    def copy(self) -> "SpectralField":
        return SpectralField(self.lattice, self.coeffs.copy())

    def __add__(self, other: "SpectralField") -> "SpectralField":
        self._check_same_lattice(other)
        return SpectralField(self.lattice, self.coeffs + other.coeffs)

    def __sub__(self, other: "SpectralField") -> "SpectralField":
        self._check_same_lattice(other)
        return SpectralField(self.lattice, self.coeffs - other.coeffs)

    def __mul__(self, scalar) -> "SpectralField":
        return SpectralField(self.lattice, self.coeffs * scalar)

    __rmul__ = __mul__

    def _check_same_lattice(self, other: "SpectralField"):
        if (self.lattice.d, self.lattice.N) != (other.lattice.d, other.lattice.N):
            raise ValueError("fields live on different lattices")

    # -- multipliers and projections ----------------------------------------

    def apply_multiplier(self, alpha: float) -> "SpectralField":
        """<grad>^alpha f: multiply fhat(l) by <l>^alpha."""
        return SpectralField(self.lattice, self.coeffs * self.lattice.weight(alpha))

    def apply_table(self, table) -> "SpectralField":
        """a(grad) f for a general symbol; `table` is a callable on lattice points
        or a precomputed (P,) array of symbol values."""
        w = table(self.lattice.points) if callable(table) else np.asarray(table)
        return SpectralField(self.lattice, self.coeffs * w)

    def project(self, N: int) -> "SpectralField":
        """P_N f: restrict to the ball {|l| <= N}."""
        if N > self.lattice.N:
            raise ValueError(
                f"cutoff exceeds source: requested N={N} > {self.lattice.N}"
            )
        if N == self.lattice.N:
            return self.copy()
        mask = self.lattice.norms_sq <= N * N
        return SpectralField(Lattice.ball(self.lattice.d, N), self.coeffs[mask])

    def translate(self, theta) -> "SpectralField":
        """f(. - theta): phase shift exp(-i l . theta) on coefficients."""
        theta = np.atleast_1d(np.asarray(theta, dtype=np.float64))
        phase = np.exp(-1j * self.lattice.points @ theta)
        return SpectralField(self.lattice, self.coeffs * phase)

    # -- Hermitian structure -------------------------------------------------

    def hermitian_defect(self) -> float:
        """max_l |fhat(-l) - conj(fhat(l))|; zero for real fields."""
        mirrored = np.conj(self.coeffs[self.lattice.neg_index])
        return float(np.max(np.abs(self.coeffs - mirrored))) if self.lattice.size else 0.0

    def is_hermitian(self, tol: float = 1e-12) -> bool:
        scale = max(1.0, float(np.max(np.abs(self.coeffs))) if self.lattice.size else 0.0)
        return self.hermitian_defect() <= tol * scale

    # -- transforms ----------------------------------------------------------

    def to_physical(self, M: int | None = None) -> PhysicalGrid:
        """Evaluate on the M^d grid.  Requires M >= 2N + 1 (no aliasing)."""
        lat = self.lattice
        if M is None:
            M = next_fast_len(2 * lat.N + 1)
        if M < 2 * lat.N + 1:
            raise AliasingError(f"aliasing: M={M} < 2N+1={2 * lat.N + 1}")
        cube = np.zeros(M**lat.d, dtype=np.complex128)
        cube[lat.flat_embed_indices(M)] = self.coeffs
        cube = cube.reshape((M,) * lat.d)
        vals = ifftn(cube) * (M**lat.d) * TWO_PI ** (-0.5 * lat.d)
        if self.is_hermitian(1e-9):
            vals = vals.real
        return PhysicalGrid(lat.d, M, vals)

    def l2_norm_sq(self) -> float:
        """∫ |f|^2 dx via Parseval: sum of |fhat(l)|^2."""
        return float(np.sum(np.abs(self.coeffs) ** 2))


def from_physical(grid: PhysicalGrid, N: int) -> SpectralField:
    """Recover ball-N coefficients from grid samples.  Requires M >= 2N + 1."""
    if grid.M < 2 * N + 1:
        raise AliasingError(f"aliasing: M={grid.M} < 2N+1={2 * N + 1}")
    lat = Lattice.ball(grid.d, N)
    cube = fftn(np.asarray(grid.values))
    flat = cube.reshape(-1)[lat.flat_embed_indices(grid.M)]
    return SpectralField(lat, flat * TWO_PI ** (0.5 * grid.d) / grid.M**grid.d)


def dealiased_grid_size(N: int, degree: int) -> int:
    """Smallest fast FFT length able to integrate a degree-`degree` polynomial
    of a ball-N field exactly (M >= degree*N + 1; rendering alone needs
    2N + 1, hence the floor)."""
    return next_fast_len(max(degree, 2) * N + 1)


def torus_integral_of_polynomial(f: SpectralField, poly_coeffs) -> float:
    """∫ Q(f(x)) dx for Q(y) = sum_j poly_coeffs[j] y^j, exact by dealiasing.

    The integrand is a trigonometric polynomial of bandwidth p*N, so a grid
    with M >= p*N + 1 points per axis captures its mean exactly.
    """
    poly_coeffs = np.asarray(poly_coeffs, dtype=np.float64)
    degree = len(poly_coeffs) - 1
    while degree > 0 and poly_coeffs[degree] == 0.0:
        degree -= 1
    M = dealiased_grid_size(f.lattice.N, degree)
    vals = f.to_physical(M).values
    if np.iscomplexobj(vals):
        raise ValueError("polynomial integration expects a real (Hermitian) field")
    acc = np.zeros_like(vals)
    for c in poly_coeffs[: degree + 1][::-1]:
        acc = acc * vals + c
    return TWO_PI**f.lattice.d * float(acc.mean())
