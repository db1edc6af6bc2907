"""Independent cross-checks for the spectral solver.

Two routes that share nothing with the Fourier-multiplier evolution
beyond the coefficient integrals: a theta-scheme finite-difference solve
on the same periodic grid (central second differences, four-point cross
stencils, sparse LU per step), and a Monte Carlo estimator built on the
stochastic representation with exact Gaussian increments.
"""

from __future__ import annotations

import functools
from dataclasses import dataclass

import numpy as np
import scipy.ndimage
import scipy.sparse
import scipy.sparse.linalg

from .degeneracy import accumulate_path
from .solver import SolveReport, TimePartition
from .spectral import SpectralField, lp_norm

DEFAULT_CHUNK = 16384


@dataclass(frozen=True)
class FDScheme:
    """theta in [1/2, 1]: 1/2 is Crank-Nicolson, 1 is backward Euler.

    coefficient_sampling picks how a(t) enters a step: "step-average"
    integrates the coefficients exactly over the step (robust for
    oscillatory paths), "theta-point" evaluates at the theta-weighted
    time.  Both are unconditionally stable for PSD coefficients.
    """

    theta: float = 0.5
    coefficient_sampling: str = "step-average"

    def __post_init__(self):
        if not 0.5 <= self.theta <= 1.0:
            raise ValueError(f"theta must lie in [1/2, 1], got {self.theta}")
        if self.coefficient_sampling not in ("step-average", "theta-point"):
            raise ValueError(
                f"unknown coefficient sampling {self.coefficient_sampling!r}")


@functools.lru_cache(maxsize=16)
def _shift_matrix(grid, offset):
    """Sparse periodic shift: (S u)[x] = u[x + offset * spacing]."""
    size = grid.n ** grid.dim
    idx = np.arange(size).reshape(grid.shape)
    cols = np.roll(idx, shift=tuple(-o for o in offset),
                   axis=tuple(range(grid.dim))).ravel()
    return scipy.sparse.csr_matrix(
        (np.ones(size), (np.arange(size), cols)), shape=(size, size))


@functools.lru_cache(maxsize=16)
def _stencil_parts(grid):
    """Second-difference operators per axis and per cross pair.

    axis i: (S_+i + S_-i - 2 I) / h^2;  pair (i, j):
    (S_++ + S_-- - S_+- - S_-+) / (4 h^2), the symmetric four-point cross.
    """
    h = grid.spacing
    dim = grid.dim
    eye = scipy.sparse.identity(grid.n ** dim, format="csr")

    def unit(i, sign):
        off = [0] * dim
        off[i] = sign
        return tuple(off)

    def pair(i, j, si, sj):
        off = [0] * dim
        off[i], off[j] = si, sj
        return tuple(off)

    diag = [(_shift_matrix(grid, unit(i, +1)) + _shift_matrix(grid, unit(i, -1))
             - 2.0 * eye) / h ** 2 for i in range(dim)]
    cross = {}
    for i in range(dim):
        for j in range(i + 1, dim):
            cross[(i, j)] = (_shift_matrix(grid, pair(i, j, +1, +1))
                             + _shift_matrix(grid, pair(i, j, -1, -1))
                             - _shift_matrix(grid, pair(i, j, +1, -1))
                             - _shift_matrix(grid, pair(i, j, -1, +1))) \
                / (4.0 * h ** 2)
    return diag, cross


def _assemble(grid, mat):
    """a^ij u_xixj with Einstein summation: diagonal plus doubled crosses."""
    diag, cross = _stencil_parts(grid)
    op = mat[0, 0] * diag[0]
    for i in range(1, grid.dim):
        op = op + mat[i, i] * diag[i]
    for (i, j), stencil in cross.items():
        op = op + 2.0 * mat[i, j] * stencil
    return op


def fd_solve(u0, f, path, partition, scheme=None, rtol=1e-10):
    """Finite-difference solve on the partition nodes.

    Periodic boundary, theta time stepping; the implicit matrix
    I - theta dt Op is identity plus a PSD operator, so every step is
    well posed.  Expected accuracy O(h^2 + dt^2) at theta = 1/2.
    """
    scheme = scheme or FDScheme()
    grid = u0.grid
    nodes = partition.nodes
    if scheme.coefficient_sampling == "step-average":
        cums = [accumulate_path(path, t, rtol=rtol) for t in nodes]
    size = grid.n ** grid.dim
    eye = scipy.sparse.identity(size, format="csr")
    u = u0.samples.ravel().copy()
    snapshots = [SpectralField(grid, u0.samples.copy())]
    cache_key, cached_lu = None, None
    for k in range(nodes.size - 1):
        t0, t1 = nodes[k], nodes[k + 1]
        dt = t1 - t0
        if scheme.coefficient_sampling == "step-average":
            mat = (cums[k + 1] - cums[k]) / dt
        else:
            mat = np.asarray(path.a((1.0 - scheme.theta) * t0
                                    + scheme.theta * t1), dtype=float)
        op = _assemble(grid, mat)
        rhs = u + (1.0 - scheme.theta) * dt * (op @ u)
        if f is not None:
            t_theta = (1.0 - scheme.theta) * t0 + scheme.theta * t1
            rhs = rhs + dt * f(t_theta).samples.ravel()
        key = (mat.tobytes(), dt)
        if key != cache_key:
            cached_lu = scipy.sparse.linalg.splu(
                (eye - scheme.theta * dt * op).tocsc())
            cache_key = key
        u = cached_lu.solve(rhs)
        snapshots.append(SpectralField(grid, u.reshape(grid.shape).copy()))
    return SolveReport(grid, partition, snapshots, path, forcing=f,
                       diagnostics={"method": "fd", "theta": scheme.theta,
                                    "sampling": scheme.coefficient_sampling})


def _sqrt_cov(cov):
    """Factor F with F F^T = cov; tiny negative eigenvalues are clamped."""
    w, v = np.linalg.eigh(cov)
    scale = max(1.0, float(np.abs(w).max()))
    if w[0] < -1e-12 * scale:
        raise ValueError(
            f"covariance has negative eigenvalue {w[0]:.3e}; path is not PSD")
    return v * np.sqrt(np.clip(w, 0.0, None))


def sample_increments(path, s, t, samples, rng, rtol=1e-10):
    """Draws of X_t - X_s: exact Gaussians with covariance 2 int_s^t a dr."""
    if isinstance(rng, (int, np.integer)):
        rng = np.random.default_rng(rng)
    cov = 2.0 * (accumulate_path(path, t, rtol=rtol)
                 - accumulate_path(path, s, rtol=rtol))
    factor = _sqrt_cov(cov)
    z = rng.standard_normal((samples, path.dim))
    return z @ factor.T


@dataclass
class MCEstimate:
    """Monte Carlo values at probe points with per-point standard errors."""

    points: np.ndarray  # (m, dim)
    mean: np.ndarray
    stderr: np.ndarray
    samples: int
    seed: int

    def to_csv(self, pathname):
        dim = self.points.shape[1]
        with open(pathname, "w") as fh:
            head = ",".join(f"x_{i}" for i in range(dim))
            fh.write(head + ",mean,stderr,samples,seed\n")
            for pt, m, se in zip(self.points, self.mean, self.stderr):
                coords = ",".join(repr(float(c)) for c in pt)
                fh.write(f"{coords},{float(m)!r},{float(se)!r},"
                         f"{self.samples},{self.seed}\n")


def _spline_coeffs(field):
    return scipy.ndimage.spline_filter(field.samples, order=3,
                                       mode="grid-wrap")


def _periodic_interp(coeffs, grid, positions):
    """Cubic periodic interpolation at absolute positions (m, dim)."""
    frac = (positions + 0.5 * grid.length) / grid.spacing
    return scipy.ndimage.map_coordinates(coeffs, frac.T, order=3,
                                         mode="grid-wrap", prefilter=False)


def mc_solve(u0, f, path, t, points, samples, seed, partition=None,
             chunk=DEFAULT_CHUNK, rtol=1e-10):
    """Stochastic-representation estimate of u(t, x) at probe points.

        u(t, x) = E u0(x + X_t) + int_0^t E f(s, x + X_t - X_s) ds

    with X built from exact Gaussian increments over the partition (one
    consistent path per sample, so the forcing term sees the same
    randomness as the endpoint).  The forcing integral is a trapezoid
    over the partition nodes.  Chunked, deterministically seeded: chunk c
    uses default_rng([seed, c]), and chunk sums are reduced in index
    order, so results do not depend on execution interleaving.
    """
    grid = u0.grid
    points = np.atleast_1d(np.asarray(points, dtype=float))
    if points.ndim == 1:
        points = points[:, None]
    if points.shape[1] != grid.dim:
        raise ValueError(f"probe points must have {grid.dim} coordinates")
    if samples < 1000:
        raise ValueError(f"need at least 1000 samples, got {samples}")

    if f is not None:
        if partition is None:
            partition = TimePartition.uniform(64, t)
        nodes = partition.nodes
        if abs(nodes[-1] - t) > 1e-12 * max(1.0, t):
            raise ValueError(f"partition horizon {nodes[-1]} != t={t}")
    else:
        nodes = np.array([0.0, t])

    cums = [accumulate_path(path, s, rtol=rtol) for s in nodes]
    factors = [_sqrt_cov(2.0 * (cb - ca))
               for ca, cb in zip(cums[:-1], cums[1:])]
    u0_coeffs = _spline_coeffs(u0)
    if f is not None:
        f_coeffs = [_spline_coeffs(f(s)) for s in nodes]
        w = np.zeros(nodes.size)
        w[:-1] += 0.5 * np.diff(nodes)
        w[1:] += 0.5 * np.diff(nodes)

    m = points.shape[0]
    total = np.zeros(m)
    total_sq = np.zeros(m)
    n_intervals = len(factors)
    done = 0
    chunk_index = 0
    while done < samples:
        size = min(chunk, samples - done)
        rng = np.random.default_rng([seed, chunk_index])
        z = rng.standard_normal((size, n_intervals, path.dim))
        # per-interval covariances differ, apply one factor at a time
        incs = np.empty((size, n_intervals, path.dim))
        for i, fac in enumerate(factors):
            incs[:, i, :] = z[:, i, :] @ fac.T
        # suffix sums: S[:, i] = X_t - X_{t_i}
        suffix = np.zeros((size, n_intervals + 1, path.dim))
        suffix[:, :-1, :] = np.cumsum(incs[:, ::-1, :], axis=1)[:, ::-1, :]
        vals = np.zeros((m, size))
        for j in range(m):
            vals[j] = _periodic_interp(u0_coeffs, grid,
                                       points[j] + suffix[:, 0, :])
        if f is not None:
            for i in range(nodes.size):
                for j in range(m):
                    vals[j] += w[i] * _periodic_interp(
                        f_coeffs[i], grid, points[j] + suffix[:, i, :])
        total += vals.sum(axis=1)
        total_sq += (vals ** 2).sum(axis=1)
        done += size
        chunk_index += 1

    mean = total / samples
    var = np.maximum(total_sq - samples * mean ** 2, 0.0) / (samples - 1)
    return MCEstimate(points=points, mean=mean,
                      stderr=np.sqrt(var / samples),
                      samples=samples, seed=seed)


def char_function_check(path, s, t, freqs, samples, seed, rtol=1e-10):
    """Empirical E exp(i xi . (X_t - X_s)) against the propagator symbol.

    Returns rows (xi, empirical_re, empirical_im, exact, stderr_re,
    stderr_im); the identity under test is exp(-xi^T B xi) with B the
    accumulated coefficients.
    """
    x = sample_increments(path, s, t, samples, np.random.default_rng([seed, 0]),
                          rtol=rtol)
    b = accumulate_path(path, t, rtol=rtol) - accumulate_path(path, s, rtol=rtol)
    rows = []
    for xi in np.atleast_2d(np.asarray(freqs, dtype=float)):
        phase = x @ xi
        cos, sin = np.cos(phase), np.sin(phase)
        exact = float(np.exp(-xi @ b @ xi))
        rows.append((tuple(xi), float(cos.mean()), float(sin.mean()), exact,
                     float(cos.std(ddof=1) / np.sqrt(samples)),
                     float(sin.std(ddof=1) / np.sqrt(samples))))
    return rows


def compare_fields(a, b, p):
    """Relative L_p distance ||a - b||_p / max(||a||_p, 1e-30)."""
    if a.grid != b.grid:
        raise ValueError(f"grid mismatch: {a.grid} vs {b.grid}")
    return lp_norm(a - b, p) / max(lp_norm(a, p), 1e-30)


def convergence_orders(errors):
    """Observed orders log2(e_i / e_(i+1)) for errors at doubled resolution."""
    errors = np.asarray(errors, dtype=float)
    return np.log2(errors[:-1] / errors[1:])
