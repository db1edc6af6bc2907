"""Empirical constants for the a priori estimates of the degenerate solve.

Each check computes both sides of an inequality on actual solves and
reports the ratio lhs / rhs as the observed constant.  Weighted time
integrals use the convention 0 * inf := 0 on the set where the floor
delta vanishes; a genuinely divergent weight makes the norm infinite and
the report is flagged inadmissible rather than silently truncated.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .degeneracy import check_domination, fit_beta_exponent, cumulative_delta
from .solver import (accumulate_coefficients, quadratic_form, solve_duhamel,
                     solve_homogeneous)
from .spectral import (LPFamily, _block_multiplier, _xi_sq, besov_norm,
                       bessel_norm, hessian_lp_norm, lp_norm)


@dataclass(frozen=True)
class WeightedNormSpec:
    """Time-weighted Bessel norm: (int ||u(t)||^p_{H^n_p} delta(t)^m dt)^(1/p)."""

    smoothness: float
    p: float
    weight_power: float
    profile: object
    horizon: float

    def __post_init__(self):
        if not 1 < self.p < math.inf:
            raise ValueError(f"p must lie in (1, inf), got {self.p}")
        if self.horizon <= 0:
            raise ValueError(f"horizon must be positive, got {self.horizon}")


def weighted_norm(report, spec, spatial_norm=None):
    """Weighted norm of a snapshot family over its partition.

    spatial_norm(field) defaults to the H^n_p norm that `spec` describes;
    pass a different evaluator for derived quantities (e.g. the Hessian).
    Returns inf when the weight diverges against a nonvanishing norm.
    """
    if spatial_norm is None:
        spatial_norm = lambda u: bessel_norm(u, spec.smoothness, spec.p)
    nodes = report.partition.nodes
    m = spec.weight_power
    values = np.zeros(nodes.size)
    for k, (t, u) in enumerate(zip(nodes, report.snapshots)):
        nrm = spatial_norm(u)
        d = float(spec.profile.delta(t))
        if d > 0.0:
            values[k] = nrm ** spec.p * d ** m
        elif m > 0.0:
            values[k] = 0.0
        elif m == 0.0:
            values[k] = nrm ** spec.p
        elif nrm > 0.0:
            return math.inf
        # else 0 * inf := 0
    total = float(np.trapezoid(values, nodes))
    return total ** (1.0 / spec.p)


@dataclass
class EstimateReport:
    """One empirical inequality check, CSV-ready."""

    theorem: str
    smoothness: float
    p: float
    weight_power: float
    profile_spec: str
    grid_n: int
    steps: int
    lhs: float
    rhs_components: tuple  # ((name, value), ...)
    ratio: float
    flags: tuple = ()
    extra: dict = field(default_factory=dict)

    @property
    def rhs_total(self):
        return sum(v for _, v in self.rhs_components)

    @property
    def admissible(self):
        return not any("inadmissible" in fl for fl in self.flags)


def _make_ratio(lhs, rhs_components):
    rhs = sum(v for _, v in rhs_components)
    if math.isinf(lhs) or math.isinf(rhs):
        return math.nan, ("inadmissible-weight",)
    if lhs == 0.0:
        return 0.0, ()
    if rhs == 0.0:
        return math.inf, ("vanishing-rhs",)
    return lhs / rhs, ()


def check_thm1(u0, f, path, profile, smoothness, p, partition, rtol=1e-10):
    """Weighted second-derivative estimate:

        || u_xx ||_{bH^n_p(T, delta)}
            <= N(d, p) ( || f ||_{bH^n_p(T, delta^(1-p))}
                         + || u0 ||_{B^{n+2-2/p}_p} ).

    Solves with the exact propagator and reports lhs, both rhs pieces,
    and the observed constant lhs / rhs.
    """
    report = solve_duhamel(u0, f, path, partition, rtol=rtol)
    horizon = partition.horizon
    lhs_spec = WeightedNormSpec(smoothness, p, 1.0, profile, horizon)
    lhs = weighted_norm(report, lhs_spec,
                        spatial_norm=lambda u: hessian_lp_norm(u, p, smoothness))
    if f is None:
        rhs_f = 0.0
    else:
        f_report = _ForcingSnapshots(report.partition, f)
        rhs_f = weighted_norm(f_report,
                              WeightedNormSpec(smoothness, p, 1.0 - p,
                                               profile, horizon))
    rhs_u0 = besov_norm(u0, smoothness + 2.0 - 2.0 / p, p)
    components = (("forcing", rhs_f), ("initial", rhs_u0))
    ratio, flags = _make_ratio(lhs, components)
    return EstimateReport(
        theorem="thm1", smoothness=smoothness, p=p, weight_power=1.0,
        profile_spec=profile.spec, grid_n=u0.grid.n, steps=partition.steps,
        lhs=lhs, rhs_components=components, ratio=ratio, flags=flags,
        extra={"dim": u0.grid.dim, "horizon": horizon})


class _ForcingSnapshots:
    """Adapter presenting a forcing map as a snapshot family for weighted_norm."""

    def __init__(self, partition, f):
        self.partition = partition
        self.snapshots = [f(t) for t in partition.nodes]


def check_thm2(u0, path, profile, p, partition, beta_hat=None, t0=None,
               h_grid=None, rtol=1e-10):
    """Unweighted second-derivative estimate for the homogeneous solve:

        || u_xx ||_{bL_p(T)} <= N || u0 ||_{B^{2(1 - 1/(beta p))}_p},

    valid when the profile satisfies the level-set condition
    |{t <= t0 : h <= beta(t) < 4h}| <= N0 h^(1/beta) and the coefficients
    are dominated by the floor.  beta_hat defaults to the fitted exponent.
    """
    horizon = partition.horizon
    t0 = horizon if t0 is None else t0
    kappa0 = cumulative_delta(profile, t0, rtol=rtol)
    flags = []
    fit = None
    try:
        if h_grid is None:
            top = kappa0 / 4.0
            h_grid = np.logspace(math.log10(top) - 2.5, math.log10(top), 9)
        fit = fit_beta_exponent(profile, t0, h_grid, rtol=rtol)
    except ValueError as exc:
        flags.append("inadmissible-hypothesis:levelset")
        flags.append(str(exc))
    sample_times = np.linspace(0.0, horizon, 513)
    nbar0 = check_domination(path, profile, sample_times)
    if math.isinf(nbar0):
        flags.append("inadmissible-hypothesis:domination")
    if beta_hat is None and fit is not None:
        beta_hat = fit.beta_hat

    extra = {"dim": u0.grid.dim, "horizon": horizon, "t0": t0,
             "kappa0": kappa0, "nbar0": nbar0,
             "n0_hat": fit.n0_hat if fit else math.nan,
             "beta_hat": beta_hat if beta_hat is not None else math.nan}
    if any(fl.startswith("inadmissible") for fl in flags):
        return EstimateReport(
            theorem="thm2", smoothness=0.0, p=p, weight_power=0.0,
            profile_spec=profile.spec, grid_n=u0.grid.n,
            steps=partition.steps, lhs=math.nan, rhs_components=(),
            ratio=math.nan, flags=tuple(flags), extra=extra)

    report = solve_homogeneous(u0, path, partition, rtol=rtol)
    lhs_spec = WeightedNormSpec(0.0, p, 0.0, profile, horizon)
    lhs = weighted_norm(report, lhs_spec,
                        spatial_norm=lambda u: hessian_lp_norm(u, p))
    s = 2.0 * (1.0 - 1.0 / (beta_hat * p))
    rhs = besov_norm(u0, s, p)
    components = (("initial", rhs),)
    ratio, ratio_flags = _make_ratio(lhs, components)
    extra["besov_order"] = s
    return EstimateReport(
        theorem="thm2", smoothness=0.0, p=p, weight_power=0.0,
        profile_spec=profile.spec, grid_n=u0.grid.n, steps=partition.steps,
        lhs=lhs, rhs_components=components, ratio=ratio,
        flags=tuple(flags) + ratio_flags, extra=extra)


def check_classic(report, f, u0, p):
    """Supremum-in-time bound || u ||_{C([0,T]; L_p)} <= N (||f||_{bL_p} + ||u0||_p)."""
    lhs = max(lp_norm(u, p) for u in report.snapshots)
    nodes = report.partition.nodes
    if f is None:
        rhs_f = 0.0
    else:
        vals = np.array([lp_norm(f(t), p) ** p for t in nodes])
        rhs_f = float(np.trapezoid(vals, nodes)) ** (1.0 / p)
    rhs_u0 = lp_norm(u0, p)
    components = (("forcing", rhs_f), ("initial", rhs_u0))
    ratio, flags = _make_ratio(lhs, components)
    return EstimateReport(
        theorem="classic", smoothness=0.0, p=p, weight_power=0.0,
        profile_spec="", grid_n=u0.grid.n, steps=report.partition.steps,
        lhs=lhs, rhs_components=components, ratio=ratio, flags=flags,
        extra={"dim": u0.grid.dim, "horizon": report.partition.horizon})


@dataclass(frozen=True)
class KernelDecayFit:
    """Fitted uniform bound m(k, t) <= N 2^(k gamma) exp(-c beta(t) 4^k)."""

    c: float
    n_const: float
    gamma: float
    violations: tuple
    samples: tuple  # rows (k, t, beta, mass_ratio)


def check_kernel_decay(path, profile, gamma, k_range, t_samples, grid,
                       family=None, c_points=60, cap_scale=10.0, rtol=1e-10):
    """Decay of dyadic blocks of the kernel in L_1.

    For each block k and time t the mass m(k, t) = || frac-Laplacian^(gamma/2)
    block_k kernel(t) ||_{L_1} is measured on the grid and normalized by
    2^(k gamma).  c is searched on a logarithmic grid in [1e-3, 10]; for a
    given c the admissible N is the max of ratio * exp(c beta 4^k) over all
    samples, and the fit keeps the largest c whose N stays within cap_scale
    of the undecayed baseline.  Samples that no searched c can bring under
    the cap are reported as violations.
    """
    family = family or LPFamily.for_grid(grid)
    if gamma < 0:
        raise ValueError(f"gamma must be >= 0, got {gamma}")
    k_range = [int(k) for k in k_range]
    if not k_range:
        raise ValueError("k_range must be nonempty")
    if min(k_range) < family.j_min or max(k_range) > family.j_max:
        raise ValueError(f"blocks {min(k_range)}..{max(k_range)} outside the "
                         f"family range [{family.j_min}, {family.j_max}]")
    frac = _xi_sq(grid) ** (0.5 * gamma) if gamma > 0 else 1.0
    rows = []
    for t in np.asarray(t_samples, dtype=float):
        values = np.exp(-quadratic_form(
            grid, accumulate_coefficients(path, 0.0, t, rtol=rtol)))
        beta_t = cumulative_delta(profile, t, rtol=rtol)
        for k in k_range:
            block = _block_multiplier(family, grid, k)
            samples = np.fft.ifftn(values * block * frac).real / grid.cell_volume
            mass = float(np.sum(np.abs(samples)) * grid.cell_volume)
            rows.append((int(k), float(t), beta_t, mass / 2.0 ** (k * gamma)))

    z = np.array([beta * 4.0 ** k for k, _, beta, _ in rows])
    y = np.array([ratio for _, _, _, ratio in rows])
    cs = np.logspace(-3, 1, c_points)
    # zero masses (deep decay underflows to exact 0) constrain nothing;
    # the search runs in log space so that large c*z cannot overflow
    pos = np.nonzero(y > 0.0)[0]
    logy, zp = np.log(y[pos]), z[pos]
    if logy.size == 0:
        return KernelDecayFit(c=float(cs[-1]), n_const=0.0, gamma=gamma,
                              violations=(), samples=tuple(rows))
    cap_log = math.log(cap_scale) + float(np.max(logy + cs[0] * zp))
    ok = logy + cs[0] * zp <= cap_log + 1e-12
    violations = tuple(rows[pos[i]] for i in range(logy.size) if not ok[i])
    if np.any(ok):
        n_log = np.array([float(np.max(logy[ok] + c * zp[ok])) for c in cs])
        admissible = np.nonzero(n_log <= cap_log + 1e-12)[0]
        best = int(admissible[-1]) if admissible.size else 0
        n_best = math.exp(n_log[best])
    else:
        best, n_best = 0, 0.0
    return KernelDecayFit(c=float(cs[best]), n_const=n_best,
                          gamma=gamma, violations=violations,
                          samples=tuple(rows))


def epsilon_sweep(u0, f, path, profile, eps_list, p, partition,
                  smoothness=0.0, rtol=1e-10, mapper=map):
    """check_thm1 across regularizations a + eps I, delta + eps.

    eps_list must be positive and decreasing; the point of the sweep is
    that the observed constant stays bounded as eps -> 0.  mapper allows a
    thread-pool map for the independent per-eps checks.
    """
    eps_list = [float(e) for e in eps_list]
    if any(e <= 0 for e in eps_list):
        raise ValueError(f"eps values must be positive, got {eps_list}")
    if any(b >= a for a, b in zip(eps_list[:-1], eps_list[1:])):
        raise ValueError(f"eps values must be decreasing, got {eps_list}")
    from .solver import epsilon_regularize

    def one(eps):
        rep = check_thm1(u0, f, epsilon_regularize(path, eps),
                         profile.shifted(eps), smoothness, p, partition,
                         rtol=rtol)
        rep.extra["eps"] = eps
        return rep

    return list(mapper(one, eps_list))


CSV_HEADER = "theorem,n,p,m,profile_spec,grid_n,K,lhs,rhs_1,rhs_2,ratio,flags"


def reports_to_csv(reports, path):
    """Deterministic CSV dump of estimate reports (bit-stable float repr)."""
    with open(path, "w") as fh:
        fh.write(CSV_HEADER + "\n")
        for r in reports:
            rhs = [float(v) for _, v in r.rhs_components] + [0.0, 0.0]
            flags = ";".join(r.flags)
            fh.write(f"{r.theorem},{float(r.smoothness)!r},{float(r.p)!r},"
                     f"{float(r.weight_power)!r},\"{r.profile_spec}\","
                     f"{r.grid_n},{r.steps},{float(r.lhs)!r},{rhs[0]!r},"
                     f"{rhs[1]!r},{float(r.ratio)!r},\"{flags}\"\n")
