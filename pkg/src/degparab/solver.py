"""Exact Fourier-multiplier evolution for u_t = a^ij(t) u_xixj + f.

Because the coefficients depend on time only, the propagator from s to t
is exact: each mode is damped by exp(-xi^T B xi) with B the entrywise
integral of a over [s, t].  Solves therefore have no spatial or temporal
discretization error beyond the forcing quadrature (trapezoid over the
partition) and the accuracy of B itself.
"""

from __future__ import annotations

import os
from dataclasses import dataclass

import numpy as np

from .degeneracy import (CoefficientPath, accumulate_path, cumulative_delta,
                         inverse_cumulative)
from .spectral import (SpectralField, _freq_grids, bessel_norm, gaussian_bump,
                       inner_product, load_field, lp_norm, save_field,
                       second_derivatives)


class DegenerateKernelError(ValueError):
    """The accumulated coefficients are singular: the kernel is not a function."""


class TimePartition:
    """Strictly increasing time nodes starting at 0."""

    def __init__(self, nodes):
        nodes = np.asarray(nodes, dtype=float)
        if nodes.ndim != 1 or nodes.size < 2:
            raise ValueError("partition needs at least the nodes 0 and T")
        if nodes[0] != 0.0:
            raise ValueError(f"first node must be 0, got {nodes[0]}")
        if np.any(np.diff(nodes) <= 0):
            raise ValueError("partition nodes must be strictly increasing")
        self.nodes = nodes

    @classmethod
    def uniform(cls, steps, horizon):
        return cls(np.linspace(0.0, horizon, steps + 1))

    @classmethod
    def geometric(cls, steps, horizon, ratio=None):
        """Nodes horizon * ratio^(steps - k); default ratio puts the smallest
        positive node at 1e-6 * horizon."""
        if steps < 2:
            raise ValueError(f"geometric partition needs >= 2 steps, got {steps}")
        if ratio is None:
            ratio = (1e-6) ** (1.0 / (steps - 1))
        if not 0.0 < ratio < 1.0:
            raise ValueError(f"ratio must lie in (0, 1), got {ratio}")
        positive = horizon * ratio ** np.arange(steps - 1, -1, -1, dtype=float)
        return cls(np.concatenate([[0.0], positive]))

    @property
    def horizon(self):
        return float(self.nodes[-1])

    @property
    def steps(self):
        return self.nodes.size - 1

    def index_of(self, t):
        idx = int(np.argmin(np.abs(self.nodes - t)))
        if abs(self.nodes[idx] - t) > 1e-12 * max(1.0, self.horizon):
            raise ValueError(f"t={t} is not a partition node")
        return idx

    def __len__(self):
        return self.nodes.size

    def __eq__(self, other):
        return isinstance(other, TimePartition) and \
            np.array_equal(self.nodes, other.nodes)


@dataclass(frozen=True)
class PropagatorSymbol:
    """Multiplier exp(-xi^T B xi) with B the coefficients accumulated over [s, t]."""

    s: float
    t: float
    B: np.ndarray

    def evaluate(self, grid):
        return np.exp(-quadratic_form(grid, self.B))


def quadratic_form(grid, B):
    """xi^T B xi on the frequency lattice."""
    B = np.asarray(B, dtype=float)
    comps = _freq_grids(grid)
    out = np.zeros(grid.shape)
    for i in range(grid.dim):
        out += B[i, i] * comps[i] ** 2
        for j in range(i + 1, grid.dim):
            out += 2.0 * B[i, j] * comps[i] * comps[j]
    return out


def accumulate_coefficients(path, s, t, rtol=1e-10):
    """Accumulated matrix B = int_s^t A(r) dr, symmetrized."""
    if not 0 <= s <= t:
        raise ValueError(f"need 0 <= s <= t, got s={s}, t={t}")
    B = accumulate_path(path, t, rtol=rtol) - accumulate_path(path, s, rtol=rtol)
    return 0.5 * (B + B.T)


def propagator_symbol(path, s, t, rtol=1e-10):
    """Propagator symbol exp(-xi^T B xi) data for the window [s, t]."""
    B = accumulate_coefficients(path, s, t, rtol=rtol)
    return PropagatorSymbol(s=float(s), t=float(t), B=B)


def propagate(field, path, s, t, rtol=1e-10):
    """Evolve a field from time s to time t (homogeneous equation)."""
    symbol = propagator_symbol(path, s, t, rtol=rtol)
    return SpectralField.from_spectrum(
        field.grid, field.spectrum * symbol.evaluate(field.grid))


def kernel(path, t, grid, rtol=1e-10):
    """Fundamental solution at time t, sampled with its peak at x = 0.

    Requires the accumulated coefficients to be nondegenerate; over a
    window where they vanish the propagator is a point mass, not a
    function, and DegenerateKernelError is raised.
    """
    symbol = propagator_symbol(path, 0.0, t, rtol=rtol)
    eigs = np.linalg.eigvalsh(symbol.B)
    if eigs[0] <= 1e-14 * max(1.0, eigs[-1]):
        raise DegenerateKernelError(
            f"kernel at t={t} is degenerate: accumulated coefficients have "
            f"min eigenvalue {eigs[0]:.3e}")
    values = symbol.evaluate(grid)
    samples = np.fft.fftshift(np.fft.ifftn(values).real)
    return SpectralField(grid, samples / grid.cell_volume)


class SolveReport:
    """Snapshots of a solve on a partition, plus the data that produced them."""

    def __init__(self, grid, partition, snapshots, path, forcing=None,
                 diagnostics=None):
        self.grid = grid
        self.partition = partition
        self.snapshots = snapshots
        self.path = path
        self.forcing = forcing
        self.diagnostics = dict(diagnostics or {})

    def snapshot_at(self, t):
        return self.snapshots[self.partition.index_of(t)]

    def norm_rows(self, p=2.0):
        """(k, t, L_p norm, H^2_p norm) per snapshot."""
        rows = []
        for k, (t, u) in enumerate(zip(self.partition.nodes, self.snapshots)):
            rows.append((k, float(t), lp_norm(u, p), bessel_norm(u, 2.0, p)))
        return rows


def _forcing_spectra(f, grid, nodes):
    return [np.fft.fftn(f(t).samples) if f is not None else None
            for t in nodes]


def _trapezoid_weights(nodes):
    w = np.zeros(nodes.size)
    w[:-1] += 0.5 * np.diff(nodes)
    w[1:] += 0.5 * np.diff(nodes)
    return w


def solve_homogeneous(u0, path, partition, rtol=1e-10):
    """Exact snapshots of the homogeneous solve at the partition nodes."""
    grid = u0.grid
    spec0 = u0.spectrum
    snapshots = [SpectralField(grid, u0.samples.copy())]
    for t in partition.nodes[1:]:
        symbol = propagator_symbol(path, 0.0, t, rtol=rtol)
        snapshots.append(SpectralField.from_spectrum(
            grid, spec0 * symbol.evaluate(grid)))
    return SolveReport(grid, partition, snapshots, path,
                       diagnostics={"method": "spectral"})


def solve_duhamel(u0, f, path, partition, rtol=1e-10):
    """Snapshots of the inhomogeneous solve.

    The Duhamel integral is a composite trapezoid over the partition nodes,
    with each forcing slice propagated by the exact symbol; everything is
    accumulated in spectral space, one inverse transform per snapshot.
    """
    if f is None:
        return solve_homogeneous(u0, path, partition, rtol=rtol)
    grid = u0.grid
    nodes = partition.nodes
    # quadratic forms of the cumulative coefficients; exp of differences
    # gives every window symbol without re-integrating
    quads = [quadratic_form(grid, accumulate_path(path, t, rtol=rtol))
             for t in nodes]
    f_specs = _forcing_spectra(f, grid, nodes)
    spec0 = u0.spectrum
    snapshots = [SpectralField(grid, u0.samples.copy())]
    for k in range(1, nodes.size):
        w = _trapezoid_weights(nodes[:k + 1])
        acc = spec0 * np.exp(quads[0] - quads[k])
        for i in range(k + 1):
            acc = acc + w[i] * f_specs[i] * np.exp(quads[i] - quads[k])
        snapshots.append(SpectralField.from_spectrum(grid, acc))
    return SolveReport(grid, partition, snapshots, path, forcing=f,
                       diagnostics={"method": "spectral"})


def epsilon_regularize(path, eps):
    """Path a + eps * I, the uniform regularization of a degenerate path."""
    if eps < 0:
        raise ValueError(f"eps must be nonnegative, got {eps}")
    dim = path.dim
    eye = np.eye(dim)
    base_a = path.a
    cum = None
    if path.cumulative is not None:
        base_cum = path.cumulative
        cum = lambda t: np.asarray(base_cum(t), dtype=float) + eps * t * eye
    return CoefficientPath(
        dim=dim,
        a=lambda t: np.asarray(base_a(t), dtype=float) + eps * eye,
        cumulative=cum,
        bound_M=None if path.bound_M is None else path.bound_M + eps,
        spec=f"regularized({path.spec}, {eps})",
        breakpoints=path.breakpoints,
    )


def time_change_solve(u0, f, path, profile, partition, rtol=1e-10):
    """Solve by rescaling time with the cumulative floor beta.

    Requires delta >= eps > 0 on (0, T].  The transformed path
    a(phi(tau)) * phi'(tau) has ellipticity floor >= 1; its cumulative is
    the original cumulative evaluated at phi(tau), with phi found by
    bisection.  Snapshots are returned at the ORIGINAL partition nodes.
    """
    horizon = partition.horizon
    probe = np.linspace(0.0, horizon, 2049)
    dmin = float(np.min(profile.delta(probe)))
    if dmin <= 0.0:
        raise ValueError(
            f"time change requires delta >= eps > 0 on [0, T]; "
            f"sampled min {dmin}")

    tau_nodes = np.array([cumulative_delta(profile, t, rtol=rtol)
                          for t in partition.nodes])
    tau_partition = TimePartition(tau_nodes)

    def phi(tau):
        return inverse_cumulative(profile, tau, horizon, rtol=rtol)

    base_a, base_delta = path.a, profile.delta

    def a_tilde(tau):
        t = phi(tau)
        return np.asarray(base_a(t), dtype=float) / float(base_delta(t))

    def cumulative_tilde(tau):
        return accumulate_path(path, phi(tau), rtol=rtol)

    changed = CoefficientPath(
        dim=path.dim, a=a_tilde, cumulative=cumulative_tilde,
        spec=f"time_changed({path.spec})")

    if f is None:
        f_tilde = None
    else:
        def f_tilde(tau):
            t = phi(tau)
            return f(t) * (1.0 / float(base_delta(t)))

    inner_report = solve_duhamel(u0, f_tilde, changed, tau_partition, rtol=rtol)
    return SolveReport(u0.grid, partition, inner_report.snapshots, path,
                       forcing=f,
                       diagnostics={"method": "time-change",
                                    "tau_nodes": tau_nodes})


def weak_residual_profile(report, test=None, f=None, rtol=1e-10):
    """Weak-form defect at every partition node against one test function.

    The defect at node k is |(u_k, phi) - (u_0, phi)
    - int_0^tk sum_ij a_ij(s) (u(s), phi_xixj) ds - int_0^tk (f(s), phi) ds|
    with both time integrals taken by trapezoid over the nodes.
    """
    grid = report.grid
    if test is None:
        test = gaussian_bump(grid, width=grid.length / 16.0)
    if f is None:
        f = report.forcing
    nodes = report.partition.nodes
    phi_xx = second_derivatives(test)
    dim = grid.dim

    g = np.zeros(nodes.size)
    for k, (t, u) in enumerate(zip(nodes, report.snapshots)):
        a_t = np.asarray(report.path.a(t), dtype=float)
        val = 0.0
        for i in range(dim):
            for j in range(dim):
                val += a_t[i, j] * inner_product(u, phi_xx[i * dim + j])
        g[k] = val
    fg = np.zeros(nodes.size)
    if f is not None:
        for k, t in enumerate(nodes):
            fg[k] = inner_product(f(t), test)

    base = inner_product(report.snapshots[0], test)
    res = np.zeros(nodes.size)
    integral = 0.0
    f_integral = 0.0
    for k in range(nodes.size):
        if k > 0:
            dt = nodes[k] - nodes[k - 1]
            integral += 0.5 * dt * (g[k] + g[k - 1])
            f_integral += 0.5 * dt * (fg[k] + fg[k - 1])
        res[k] = abs(inner_product(report.snapshots[k], test)
                     - base - integral - f_integral)
    return res


def weak_residual(report, t_k, test=None, f=None, rtol=1e-10):
    """Weak-form defect at a single node (t_k must be a partition node)."""
    idx = report.partition.index_of(t_k)
    return float(weak_residual_profile(report, test=test, f=f, rtol=rtol)[idx])


def save_report(report, outdir, p=2.0, test=None):
    """Directory layout: meta (key=value text), snap_<k>.bin, norms.csv."""
    os.makedirs(outdir, exist_ok=True)
    with open(os.path.join(outdir, "meta"), "w") as fh:
        fh.write(f"dim={report.grid.dim}\n")
        fh.write(f"n={report.grid.n}\n")
        fh.write(f"period={report.grid.length!r}\n")
        fh.write(f"coefficients={report.path.spec}\n")
        fh.write(f"nodes={report.partition.nodes.size}\n")
        fh.write(f"method={report.diagnostics.get('method', 'spectral')}\n")
    for k, snap in enumerate(report.snapshots):
        save_field(snap, os.path.join(outdir, f"snap_{k}.bin"))
    residuals = weak_residual_profile(report, test=test)
    with open(os.path.join(outdir, "norms.csv"), "w") as fh:
        fh.write("k,t,Lp,H2p,weak_residual\n")
        for (k, t, lp, h2p), r in zip(report.norm_rows(p), residuals):
            fh.write(f"{k},{t!r},{lp!r},{h2p!r},{float(r)!r}\n")


def load_report(outdir):
    """Read back a saved report: (meta dict, node times, snapshot fields)."""
    meta = {}
    with open(os.path.join(outdir, "meta")) as fh:
        for line in fh:
            key, _, value = line.strip().partition("=")
            meta[key] = value
    count = int(meta["nodes"])
    snapshots = [load_field(os.path.join(outdir, f"snap_{k}.bin"))
                 for k in range(count)]
    nodes = []
    with open(os.path.join(outdir, "norms.csv")) as fh:
        next(fh)
        for line in fh:
            nodes.append(float(line.split(",")[1]))
    return meta, np.array(nodes), snapshots
