"""Periodic spectral fields, Littlewood-Paley blocks, and norms.

Fields live on a uniform grid over the torus [-L/2, L/2)^d with n (a power
of two) points per axis.  The frequency lattice is {2*pi*k/L}; transforms
are plain FFTs with the spectrum cached lazily on the field.  All dyadic
analysis (blocks, Besov norms) and Fourier multipliers (Bessel potential,
fractional Laplacian, second derivatives) operate on that lattice,
truncated at the grid Nyquist frequency.
"""

from __future__ import annotations

import functools
import math
from dataclasses import dataclass

import numpy as np


@dataclass(frozen=True)
class GridSpec:
    """Uniform periodic grid: dim in {1,2,3}, n a power of two, period length."""

    dim: int
    n: int
    length: float

    def __post_init__(self):
        if self.dim not in (1, 2, 3):
            raise ValueError(f"dim must be 1, 2 or 3, got {self.dim}")
        if self.n < 2 or self.n & (self.n - 1):
            raise ValueError(f"n must be a power of two >= 2, got {self.n}")
        if self.length <= 0:
            raise ValueError(f"period must be positive, got {self.length}")

    @property
    def spacing(self):
        return self.length / self.n

    @property
    def cell_volume(self):
        return (self.length / self.n) ** self.dim

    @property
    def shape(self):
        return (self.n,) * self.dim

    @property
    def nyquist(self):
        return math.pi * self.n / self.length


@functools.lru_cache(maxsize=64)
def _axes(grid):
    x = -0.5 * grid.length + grid.spacing * np.arange(grid.n)
    return tuple(x for _ in range(grid.dim))


@functools.lru_cache(maxsize=64)
def _freq_axes(grid):
    xi = 2.0 * np.pi * np.fft.fftfreq(grid.n, d=grid.spacing)
    return tuple(xi for _ in range(grid.dim))


@functools.lru_cache(maxsize=64)
def _freq_grids(grid):
    return np.meshgrid(*_freq_axes(grid), indexing="ij")


@functools.lru_cache(maxsize=64)
def _xi_sq(grid):
    out = np.zeros(grid.shape)
    for comp in _freq_grids(grid):
        out += comp ** 2
    return out


def x_grids(grid):
    """Coordinate arrays of shape grid.shape, one per axis."""
    return np.meshgrid(*_axes(grid), indexing="ij")


class SpectralField:
    """Real samples on a GridSpec, with the DFT spectrum cached lazily."""

    __slots__ = ("grid", "samples", "_spectrum")

    def __init__(self, grid, samples, spectrum=None):
        samples = np.asarray(samples, dtype=float)
        if samples.shape != grid.shape:
            raise ValueError(
                f"samples shape {samples.shape} does not match grid {grid.shape}")
        self.grid = grid
        self.samples = samples
        self._spectrum = spectrum

    @property
    def spectrum(self):
        if self._spectrum is None:
            self._spectrum = np.fft.fftn(self.samples)
        return self._spectrum

    @classmethod
    def from_spectrum(cls, grid, spectrum):
        samples = np.fft.ifftn(spectrum).real
        return cls(grid, samples, spectrum=np.asarray(spectrum, dtype=complex))

    def __add__(self, other):
        self._check_same_grid(other)
        return SpectralField(self.grid, self.samples + other.samples)

    def __sub__(self, other):
        self._check_same_grid(other)
        return SpectralField(self.grid, self.samples - other.samples)

    def __mul__(self, c):
        return SpectralField(self.grid, self.samples * float(c))

    __rmul__ = __mul__

    def _check_same_grid(self, other):
        if self.grid != other.grid:
            raise ValueError(f"grid mismatch: {self.grid} vs {other.grid}")


def forward(field):
    """DFT spectrum of a field (cached; treat as read-only)."""
    return field.spectrum


def inverse(spectrum, grid):
    """Field from a spectrum (real part of the inverse DFT)."""
    return SpectralField.from_spectrum(grid, spectrum)


def apply_multiplier(field, values):
    """Field with spectrum multiplied by the given lattice values."""
    return SpectralField.from_spectrum(field.grid, field.spectrum * values)


def lp_norm(field, p):
    """Midpoint-rule L_p norm on the torus; p = inf gives the max norm."""
    if p == np.inf or p == math.inf:
        return float(np.abs(field.samples).max())
    if p < 1:
        raise ValueError(f"p must be >= 1, got {p}")
    return float((np.sum(np.abs(field.samples) ** p)
                  * field.grid.cell_volume) ** (1.0 / p))


def inner_product(f, g):
    """Grid L_2 pairing (f, g) = sum f*g * cell volume."""
    if f.grid != g.grid:
        raise ValueError(f"grid mismatch: {f.grid} vs {g.grid}")
    return float(np.sum(f.samples * g.samples) * f.grid.cell_volume)


def _smooth_bump(x):
    # exp(-1/x) continued by 0: the standard smooth step ingredient
    x = np.asarray(x, dtype=float)
    out = np.zeros_like(x)
    pos = x > 0
    with np.errstate(over="ignore"):
        out[pos] = np.exp(-1.0 / x[pos])
    return out


def lowpass(r):
    """Radial cutoff: 1 for r <= 1, 0 for r >= 2, smooth and monotone between."""
    r = np.asarray(r, dtype=float)
    up = _smooth_bump(2.0 - r)
    down = _smooth_bump(r - 1.0)
    return up / (up + down)


@dataclass(frozen=True)
class LPFamily:
    """Dyadic partition of the frequency lattice.

    Block j has multiplier lowpass(|xi|/2^j) - lowpass(|xi|/2^(j-1)),
    supported on 2^(j-1) <= |xi| <= 2^(j+1); the blocks telescope exactly
    against the low-pass cutoff.
    """

    j_min: int
    j_max: int

    @staticmethod
    def for_grid(grid):
        j_max = math.floor(math.log2(grid.nyquist)) - 1
        j_min = -math.floor(math.log2(grid.length))
        return LPFamily(j_min=j_min, j_max=j_max)

    def psi_hat(self, j, r):
        r = np.asarray(r, dtype=float)
        return lowpass(r / 2.0 ** j) - lowpass(r / 2.0 ** (j - 1))

    def band_limit(self, grid):
        """Largest |xi| fully reproduced by s0 + blocks 1..j_max."""
        return 2.0 ** self.j_max


@functools.lru_cache(maxsize=512)
def _block_multiplier(family, grid, j):
    return family.psi_hat(j, np.sqrt(_xi_sq(grid)))


@functools.lru_cache(maxsize=64)
def _s0_multiplier(grid):
    return lowpass(np.sqrt(_xi_sq(grid)))


def lp_block(field, j, family=None):
    """Dyadic block j of a field."""
    family = family or LPFamily.for_grid(field.grid)
    if not family.j_min <= j <= family.j_max:
        raise ValueError(f"block {j} outside the family range "
                         f"[{family.j_min}, {family.j_max}]")
    return apply_multiplier(field, _block_multiplier(family, field.grid, j))


def s0_block(field, family=None):
    """Low-frequency part (cutoff at |xi| ~ 1, includes the mean)."""
    return apply_multiplier(field, _s0_multiplier(field.grid))


def partition_defect(grid, family=None):
    """Max deviation of s0 + sum of blocks from the telescoped cutoff."""
    family = family or LPFamily.for_grid(grid)
    r = np.sqrt(_xi_sq(grid))
    total = lowpass(r)
    for j in range(1, family.j_max + 1):
        total = total + family.psi_hat(j, r)
    return float(np.abs(total - lowpass(r / 2.0 ** family.j_max)).max())


def besov_norm(field, s, p, family=None):
    """||s0 u||_p + (sum over j >= 1 of (2^(sj) ||block_j u||_p)^p)^(1/p).

    The dyadic sum is truncated at the family's top block (grid Nyquist).
    """
    if not (1 <= p < np.inf):
        raise ValueError(f"p must be finite and >= 1, got {p}")
    family = family or LPFamily.for_grid(field.grid)
    head = lp_norm(s0_block(field, family), p)
    tail = 0.0
    for j in range(1, family.j_max + 1):
        tail += (2.0 ** (s * j) * lp_norm(lp_block(field, j, family), p)) ** p
    return head + tail ** (1.0 / p)


def bessel_norm(field, smoothness, p):
    """L_p norm after the Bessel multiplier (1 + |xi|^2)^(smoothness/2)."""
    mult = (1.0 + _xi_sq(field.grid)) ** (0.5 * smoothness)
    return lp_norm(apply_multiplier(field, mult), p)


def frac_laplacian(field, gamma):
    """Fractional Laplacian |xi|^gamma; only nonnegative orders are defined."""
    if gamma < 0:
        raise ValueError(f"fractional order must be >= 0, got {gamma}")
    if gamma == 0:
        return SpectralField(field.grid, field.samples.copy())
    mult = _xi_sq(field.grid) ** (0.5 * gamma)
    return apply_multiplier(field, mult)


def second_derivatives(field):
    """All dim^2 second partials as fields, row-major in (i, j)."""
    comps = _freq_grids(field.grid)
    spec = field.spectrum
    out = []
    for xi_i in comps:
        for xi_j in comps:
            out.append(SpectralField.from_spectrum(
                field.grid, -(xi_i * xi_j) * spec))
    return out


def hessian_lp_norm(field, p, smoothness=0.0):
    """L_p norm of the Frobenius norm of the (Bessel-filtered) Hessian.

    This is the norm in which second-derivative bounds are measured:
    for smoothness n it equals || |(1-Lap)^(n/2) u_xx|_F ||_Lp.
    """
    grid = field.grid
    comps = _freq_grids(grid)
    spec = field.spectrum
    if smoothness:
        spec = spec * (1.0 + _xi_sq(grid)) ** (0.5 * smoothness)
    acc = np.zeros(grid.shape)
    for i in range(grid.dim):
        for j in range(grid.dim):
            entry = np.fft.ifftn(-(comps[i] * comps[j]) * spec).real
            acc += entry ** 2
    frob = np.sqrt(acc)
    if p == np.inf:
        return float(frob.max())
    return float((np.sum(frob ** p) * grid.cell_volume) ** (1.0 / p))


def gaussian_bump(grid, width=1.0, center=None, amplitude=1.0):
    """amplitude * exp(-|x - center|^2 / (2 width^2)) sampled on the grid."""
    if width <= 0:
        raise ValueError(f"width must be positive, got {width}")
    if center is None:
        center = (0.0,) * grid.dim
    center = np.atleast_1d(np.asarray(center, dtype=float))
    if center.size != grid.dim:
        raise ValueError(f"center must have {grid.dim} components")
    r2 = np.zeros(grid.shape)
    for x, c in zip(x_grids(grid), center):
        r2 += (x - c) ** 2
    return SpectralField(grid, amplitude * np.exp(-r2 / (2.0 * width ** 2)))


def mode_field(grid, k, phase=0.0, amplitude=1.0):
    """cos(xi_k . x + phase) for an integer lattice mode k."""
    k = np.atleast_1d(np.asarray(k, dtype=float))
    if k.size != grid.dim:
        raise ValueError(f"mode must have {grid.dim} components")
    arg = np.full(grid.shape, phase)
    for x, ki in zip(x_grids(grid), k):
        arg = arg + (2.0 * np.pi * ki / grid.length) * x
    return SpectralField(grid, amplitude * np.cos(arg))


def random_band_limited(grid, rng, max_radius=None):
    """Random real field with spectrum supported in |xi| <= max_radius."""
    if max_radius is None:
        max_radius = LPFamily.for_grid(grid).band_limit(grid)
    raw = rng.standard_normal(grid.shape)
    mask = _xi_sq(grid) <= max_radius ** 2
    return SpectralField.from_spectrum(grid, np.fft.fftn(raw) * mask)


def save_field(field, path):
    """Flat binary: int64 dim, int64 n, float64 period, row-major float64 data."""
    with open(path, "wb") as fh:
        np.array([field.grid.dim, field.grid.n], dtype=np.int64).tofile(fh)
        np.array([field.grid.length], dtype=np.float64).tofile(fh)
        np.ascontiguousarray(field.samples, dtype=np.float64).tofile(fh)


def load_field(path):
    with open(path, "rb") as fh:
        head = np.fromfile(fh, dtype=np.int64, count=2)
        if head.size != 2:
            raise ValueError(f"truncated field file {path}")
        dim, n = int(head[0]), int(head[1])
        length = float(np.fromfile(fh, dtype=np.float64, count=1)[0])
        grid = GridSpec(dim=dim, n=n, length=length)
        data = np.fromfile(fh, dtype=np.float64, count=n ** dim)
    if data.size != n ** dim:
        raise ValueError(f"field file {path} has {data.size} samples, "
                         f"expected {n ** dim}")
    return SpectralField(grid, data.reshape(grid.shape))


def field_to_csv(field, path):
    """Two-column x,u dump; only defined for one-dimensional grids."""
    if field.grid.dim != 1:
        raise ValueError("CSV export is defined for dim=1 only")
    x = _axes(field.grid)[0]
    with open(path, "w") as fh:
        fh.write("x,u\n")
        for xi, ui in zip(x, field.samples):
            fh.write(f"{float(xi)!r},{float(ui)!r}\n")
