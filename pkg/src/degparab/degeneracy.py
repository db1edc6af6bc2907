"""Ellipticity floors delta(t) and matrix coefficient paths a(t).

A degeneracy profile is a nonnegative scalar function delta with
cumulative beta(t) = integral of delta over [0, t].  beta acts as the
intrinsic clock of the evolution: it may have flat stretches where the
equation degenerates, and its generalized inverse drives the time-change
machinery in the solver.  Profiles are built from a small spec grammar
(constant/power/oscillatory/expr/piecewise) shared with the CLI.
"""

from __future__ import annotations

import ast
import math
from dataclasses import dataclass, field

import numpy as np
from scipy.special import sici

from .quadrature import integrate_to, integrate_matrix_to

_EXPR_FUNCS = {
    "sin": np.sin, "cos": np.cos, "tan": np.tan,
    "exp": np.exp, "log": np.log, "log1p": np.log1p,
    "sqrt": np.sqrt, "abs": np.abs,
    "sinh": np.sinh, "cosh": np.cosh, "tanh": np.tanh,
    "arctan": np.arctan,
    "min": np.minimum, "max": np.maximum,
}
_EXPR_CONSTS = {"pi": np.pi, "e": np.e}

_BINOPS = {
    ast.Add: np.add, ast.Sub: np.subtract, ast.Mult: np.multiply,
    ast.Div: np.divide, ast.Pow: np.power,
}


def compile_expr(text):
    """Compile an arithmetic expression in t into a vectorized callable.

    Supported: numbers, t, + - * / **, unary -, pi, e, and the functions
    sin cos tan exp log log1p sqrt abs sinh cosh tanh arctan min max.
    """
    try:
        tree = ast.parse(text, mode="eval")
    except SyntaxError as exc:
        raise ValueError(f"bad expression {text!r}: {exc.msg}") from None

    def ev(node, t):
        if isinstance(node, ast.Expression):
            return ev(node.body, t)
        if isinstance(node, ast.Constant):
            if isinstance(node.value, (int, float)):
                return float(node.value)
            raise ValueError(f"bad literal {node.value!r} in {text!r}")
        if isinstance(node, ast.Name):
            if node.id == "t":
                return t
            if node.id in _EXPR_CONSTS:
                return _EXPR_CONSTS[node.id]
            raise ValueError(f"unknown name {node.id!r} in {text!r}")
        if isinstance(node, ast.BinOp) and type(node.op) in _BINOPS:
            return _BINOPS[type(node.op)](ev(node.left, t), ev(node.right, t))
        if isinstance(node, ast.UnaryOp):
            if isinstance(node.op, ast.USub):
                return -ev(node.operand, t)
            if isinstance(node.op, ast.UAdd):
                return ev(node.operand, t)
        if isinstance(node, ast.Call):
            if not isinstance(node.func, ast.Name) or node.keywords:
                raise ValueError(f"unsupported call in {text!r}")
            fn = _EXPR_FUNCS.get(node.func.id)
            if fn is None:
                raise ValueError(f"unknown function {node.func.id!r} in {text!r}")
            args = [ev(a, t) for a in node.args]
            return fn(*args)
        raise ValueError(f"unsupported syntax in expression {text!r}")

    ev(tree, 0.0)  # validate eagerly so bad specs fail at parse time
    return lambda t: ev(tree, t)


@dataclass(frozen=True)
class DegeneracyProfile:
    """Nonnegative ellipticity floor delta(t) with optional exact cumulative.

    delta is vectorized (scalar in, float out; array in, array out).
    closed_form_cumulative, when present, is the exact beta(t); otherwise
    cumulative_delta falls back to panel quadrature.  bound_M is an upper
    bound for delta when one is known analytically.
    """

    delta: callable
    closed_form_cumulative: callable = None
    bound_M: float = None
    spec: str = ""
    breakpoints: tuple = ()

    def shifted(self, eps):
        """Profile for delta + eps (the standard uniform regularization)."""
        if eps < 0:
            raise ValueError(f"shift must be nonnegative, got {eps}")
        base_delta = self.delta
        base_cum = self.closed_form_cumulative
        cum = None
        if base_cum is not None:
            cum = lambda t: base_cum(t) + eps * np.asarray(t, dtype=float)
        return DegeneracyProfile(
            delta=lambda t: base_delta(t) + eps,
            closed_form_cumulative=cum,
            bound_M=None if self.bound_M is None else self.bound_M + eps,
            spec=f"shifted({self.spec}, {eps})",
            breakpoints=self.breakpoints,
        )


def constant_profile(c):
    if c < 0:
        raise ValueError(f"constant profile must be nonnegative, got {c}")
    return DegeneracyProfile(
        delta=lambda t: np.full_like(np.asarray(t, dtype=float), c)
        if np.ndim(t) else float(c),
        closed_form_cumulative=lambda t: c * np.asarray(t, dtype=float),
        bound_M=float(c),
        spec=f"constant({c})",
    )


def power_profile(alpha):
    """delta(t) = t^alpha; integrable at 0 for alpha > -1."""
    if alpha <= -1:
        raise ValueError(f"power profile needs alpha > -1, got {alpha}")

    def delta(t):
        t = np.asarray(t, dtype=float)
        with np.errstate(divide="ignore"):
            out = np.power(t, alpha)
        return float(out) if out.ndim == 0 else out

    def cumulative(t):
        t = np.asarray(t, dtype=float)
        out = np.power(t, alpha + 1.0) / (alpha + 1.0)
        return float(out) if out.ndim == 0 else out

    return DegeneracyProfile(
        delta=delta,
        closed_form_cumulative=cumulative,
        bound_M=1.0 if alpha == 0 else None,
        spec=f"power({alpha})",
    )


def oscillatory_profile():
    """delta(t) = 1 + sin(1/t), with delta(0) := 1 by convention.

    The cumulative has the exact form t + t*sin(1/t) - Ci(1/t) where Ci
    is the cosine integral; it satisfies t/4 <= beta(t) <= 2t.  Direct
    quadrature of the raw expression cannot reach tight tolerances near
    the singularity, so the closed form is registered here.
    """

    def delta(t):
        t = np.asarray(t, dtype=float)
        with np.errstate(divide="ignore", invalid="ignore"):
            out = np.where(t > 0.0, 1.0 + np.sin(1.0 / np.where(t > 0, t, 1.0)), 1.0)
        return float(out) if out.ndim == 0 else out

    def cumulative(t):
        t = np.asarray(t, dtype=float)
        safe = np.where(t > 0, t, 1.0)
        ci = sici(1.0 / safe)[1]
        out = np.where(t > 0, t + safe * np.sin(1.0 / safe) - ci, 0.0)
        return float(out) if out.ndim == 0 else out

    return DegeneracyProfile(
        delta=delta,
        closed_form_cumulative=cumulative,
        bound_M=2.0,
        spec="oscillatory()",
    )


def expr_profile(text):
    fn = compile_expr(text)

    def delta(t):
        out = np.asarray(fn(np.asarray(t, dtype=float)), dtype=float)
        return float(out) if out.ndim == 0 else out

    return DegeneracyProfile(delta=delta, spec=f'expr("{text}")')


def piecewise_profile(pieces):
    """pieces: list of (start_time, expr_text), first start must be 0."""
    if not pieces:
        raise ValueError("piecewise profile needs at least one piece")
    starts = [float(p[0]) for p in pieces]
    if starts[0] != 0.0:
        raise ValueError(f"first piece must start at 0, got {starts[0]}")
    if any(b <= a for a, b in zip(starts[:-1], starts[1:])):
        raise ValueError("piecewise start times must be strictly increasing")
    fns = [compile_expr(p[1]) for p in pieces]

    def delta(t):
        t = np.asarray(t, dtype=float)
        conds = [t >= s for s in reversed(starts)]
        vals = [np.broadcast_to(np.asarray(f(t), dtype=float), t.shape)
                for f in reversed(fns)]
        out = np.select(conds, vals, default=np.nan)
        return float(out) if out.ndim == 0 else out

    body = ", ".join(f'({s}, "{p[1]}")' for s, p in zip(starts, pieces))
    return DegeneracyProfile(
        delta=delta,
        spec=f"piecewise([{body}])",
        breakpoints=tuple(starts[1:]),
    )


def parse_profile(text):
    """Parse the profile grammar: constant(c) | power(alpha) | oscillatory()
    | expr("...") | piecewise([(t0, "expr0"), ...])."""
    try:
        tree = ast.parse(text.strip(), mode="eval").body
    except SyntaxError as exc:
        raise ValueError(f"bad profile spec {text!r}: {exc.msg}") from None
    if not isinstance(tree, ast.Call) or not isinstance(tree.func, ast.Name):
        raise ValueError(f"profile spec must be a call, got {text!r}")
    name = tree.func.id
    args = tree.args
    if name == "constant":
        return constant_profile(_num_arg(args, 0, text))
    if name == "power":
        return power_profile(_num_arg(args, 0, text))
    if name == "oscillatory":
        if args:
            raise ValueError(f"oscillatory() takes no arguments: {text!r}")
        return oscillatory_profile()
    if name == "expr":
        if len(args) != 1 or not isinstance(args[0], ast.Constant) \
                or not isinstance(args[0].value, str):
            raise ValueError(f"expr(...) needs one string argument: {text!r}")
        return expr_profile(args[0].value)
    if name == "piecewise":
        if len(args) != 1 or not isinstance(args[0], (ast.List, ast.Tuple)):
            raise ValueError(f"piecewise(...) needs a list of pairs: {text!r}")
        pieces = []
        for el in args[0].elts:
            if not isinstance(el, ast.Tuple) or len(el.elts) != 2:
                raise ValueError(f"piecewise pieces must be (t0, expr): {text!r}")
            t0_node, ex_node = el.elts
            t0 = _literal_number(t0_node, text)
            if not isinstance(ex_node, ast.Constant) or not isinstance(ex_node.value, str):
                raise ValueError(f"piecewise expressions must be strings: {text!r}")
            pieces.append((t0, ex_node.value))
        return piecewise_profile(pieces)
    raise ValueError(f"unknown profile kind {name!r} in {text!r}")


def _literal_number(node, ctx):
    if isinstance(node, ast.Constant) and isinstance(node.value, (int, float)):
        return float(node.value)
    if isinstance(node, ast.UnaryOp) and isinstance(node.op, ast.USub):
        return -_literal_number(node.operand, ctx)
    raise ValueError(f"expected a number in {ctx!r}")


def _num_arg(args, idx, ctx):
    if len(args) <= idx:
        raise ValueError(f"missing argument in {ctx!r}")
    return _literal_number(args[idx], ctx)


def eval_delta(profile, t):
    """delta at one or many times; negative times are a domain error."""
    arr = np.asarray(t, dtype=float)
    if np.any(arr < 0):
        raise ValueError(f"delta is defined for t >= 0, got {t}")
    return profile.delta(t)


def cumulative_delta(profile, t, rtol=1e-10, max_panels=4000):
    """beta(t): exact closed form when registered, panel quadrature otherwise."""
    if t < 0:
        raise ValueError(f"cumulative is defined for t >= 0, got {t}")
    if profile.closed_form_cumulative is not None:
        return float(profile.closed_form_cumulative(t))
    return integrate_to(profile.delta, t, breakpoints=profile.breakpoints,
                        rtol=rtol, max_panels=max_panels)


def cumulative_delta_grid(profile, ts, npts=None):
    """Vectorized beta on an array of times.

    Uses the closed form when present; otherwise a dense midpoint scan with
    npts panels over [0, max(ts)] (default 16 per requested time, at least
    4096).  Intended for plotting and scan-style diagnostics, not for the
    tight tolerances of the solver path.
    """
    ts = np.asarray(ts, dtype=float)
    if np.any(ts < 0):
        raise ValueError("cumulative is defined for t >= 0")
    if profile.closed_form_cumulative is not None:
        return np.asarray(profile.closed_form_cumulative(ts), dtype=float)
    hi = float(np.max(ts)) if ts.size else 0.0
    if hi == 0.0:
        return np.zeros_like(ts)
    if npts is None:
        npts = max(4096, 16 * ts.size)
    edges = np.linspace(0.0, hi, npts + 1)
    mids = 0.5 * (edges[:-1] + edges[1:])
    dt = edges[1] - edges[0]
    beta_edges = np.concatenate([[0.0], np.cumsum(profile.delta(mids) * dt)])
    return np.interp(ts, edges, beta_edges)


def inverse_cumulative(profile, h, t_max, rtol=1e-10):
    """Generalized inverse phi(h) = inf{t : beta(t) >= h}, by bisection.

    Handles plateaus of beta (stretches where delta = 0).  h <= 0 maps
    to 0; h above beta(t_max) is a range error.
    """
    if h <= 0:
        return 0.0
    beta = lambda t: cumulative_delta(profile, t, rtol=rtol)
    top = beta(t_max)
    if h > top:
        raise ValueError(
            f"h={h} exceeds cumulative at t_max={t_max} (beta={top})")
    lo, hi = 0.0, float(t_max)
    for _ in range(60):
        mid = 0.5 * (lo + hi)
        if beta(mid) >= h:
            hi = mid
        else:
            lo = mid
    return hi


def levelset_measure(profile, h, t0, rtol=1e-10):
    """Lebesgue measure of {t in [0, t0] : h <= beta(t) < 4h}.

    beta is nondecreasing, so the set is an interval and the measure is
    min(phi(4h), t0) - min(phi(h), t0).
    """
    if h <= 0:
        raise ValueError(f"level h must be positive, got {h}")
    beta_t0 = cumulative_delta(profile, t0, rtol=rtol)

    def clamped_inverse(level):
        if beta_t0 < level:
            return float(t0)
        return inverse_cumulative(profile, level, t0, rtol=rtol)

    return clamped_inverse(4.0 * h) - clamped_inverse(h)


def levelset_measure_scan(profile, h, t0, npts=1_000_000):
    """Direct Riemann scan of the same level set, accurate to ~2*t0/npts.

    Reference implementation used to cross-check levelset_measure.
    """
    if h <= 0:
        raise ValueError(f"level h must be positive, got {h}")
    edges = np.linspace(0.0, t0, npts + 1)
    mids = 0.5 * (edges[:-1] + edges[1:])
    beta_mid = cumulative_delta_grid(profile, mids, npts=4 * npts)
    inside = (beta_mid >= h) & (beta_mid < 4.0 * h)
    return float(np.count_nonzero(inside)) * (t0 / npts)


@dataclass(frozen=True)
class LevelsetFit:
    beta_hat: float
    n0_hat: float
    residual: float


def fit_beta_exponent(profile, t0, h_grid, rtol=1e-10):
    """Least-squares fit of log(measure) = log(N0) + (1/beta) * log(h).

    h_grid needs at least 4 levels spanning two decades, every level with
    positive measure.  Returns the fitted exponent beta_hat, the constant
    N0_hat, and the RMS residual of the fit in log space.
    """
    h_grid = np.asarray(h_grid, dtype=float)
    if h_grid.size < 4:
        raise ValueError(f"need at least 4 levels, got {h_grid.size}")
    if np.max(h_grid) / np.min(h_grid) < 100.0:
        raise ValueError("h_grid must span at least two decades")
    measures = np.array([levelset_measure(profile, h, t0, rtol=rtol)
                         for h in h_grid])
    if np.all(measures <= 0):
        raise ValueError("degenerate fit: all level-set measures vanish")
    if np.any(measures <= 0):
        bad = h_grid[measures <= 0]
        raise ValueError(f"level-set measure vanishes at h={bad.tolist()}; "
                         f"shrink the h grid below beta(t0)/4")
    slope, intercept = np.polyfit(np.log(h_grid), np.log(measures), 1)
    fitted = intercept + slope * np.log(h_grid)
    residual = float(np.sqrt(np.mean((fitted - np.log(measures)) ** 2)))
    return LevelsetFit(beta_hat=1.0 / slope, n0_hat=float(np.exp(intercept)),
                       residual=residual)


@dataclass(frozen=True)
class CoefficientPath:
    """Symmetric matrix path a(t) of size dim x dim.

    cumulative, when present, is the exact entrywise integral over [0, t];
    otherwise the solver integrates with the same panel scheme as
    cumulative_delta.
    """

    dim: int
    a: callable
    cumulative: callable = None
    bound_M: float = None
    spec: str = ""
    breakpoints: tuple = ()

    def __post_init__(self):
        if self.dim not in (1, 2, 3):
            raise ValueError(f"dim must be 1, 2 or 3, got {self.dim}")


def scalar_path(profile, dim):
    """a(t) = delta(t) * I: the tightest path dominated by the profile."""
    eye = np.eye(dim)
    cum = None
    if profile.closed_form_cumulative is not None:
        base = profile.closed_form_cumulative
        cum = lambda t: float(base(t)) * eye
    return CoefficientPath(
        dim=dim,
        a=lambda t: float(profile.delta(t)) * eye,
        cumulative=cum,
        bound_M=profile.bound_M,
        spec=f"scalar({profile.spec})",
        breakpoints=profile.breakpoints,
    )


def constant_matrix_path(mat):
    mat = np.asarray(mat, dtype=float)
    dim = mat.shape[0]
    if mat.shape != (dim, dim):
        raise ValueError(f"coefficient matrix must be square, got {mat.shape}")
    if not np.allclose(mat, mat.T, atol=1e-12 * max(1.0, np.abs(mat).max())):
        raise ValueError("coefficient matrix must be symmetric")
    rows = ", ".join("[" + ", ".join(repr(float(v)) for v in row) + "]"
                     for row in mat)
    return CoefficientPath(
        dim=dim,
        a=lambda t: mat,
        cumulative=lambda t: float(t) * mat,
        bound_M=float(np.abs(mat).max()),
        spec=f"matrix([{rows}])",
    )


def expr_matrix_path(entries):
    """Matrix of arithmetic expressions in t (numbers allowed as entries)."""
    dim = len(entries)
    texts = [[str(e) for e in row] for row in entries]
    if any(len(row) != dim for row in texts):
        raise ValueError("coefficient matrix must be square")
    for i in range(dim):
        for j in range(dim):
            if texts[i][j].strip() != texts[j][i].strip():
                raise ValueError(
                    f"coefficient matrix entries ({i},{j}) and ({j},{i}) "
                    f"differ: {texts[i][j]!r} vs {texts[j][i]!r}")
    fns = [[compile_expr(texts[i][j]) for j in range(dim)] for i in range(dim)]

    def a(t):
        return np.array([[float(fns[i][j](t)) for j in range(dim)]
                         for i in range(dim)])

    rows = ", ".join('[' + ', '.join(f'"{e}"' for e in row) + ']'
                     for row in texts)
    return CoefficientPath(dim=dim, a=a, spec=f"matrix([{rows}])")


def parse_coefficients(text, dim):
    """Parse the coefficient grammar: scalar(<profile>) | matrix([[...], ...])."""
    stripped = text.strip()
    try:
        tree = ast.parse(stripped, mode="eval").body
    except SyntaxError as exc:
        raise ValueError(f"bad coefficient spec {text!r}: {exc.msg}") from None
    if not isinstance(tree, ast.Call) or not isinstance(tree.func, ast.Name):
        raise ValueError(f"coefficient spec must be a call, got {text!r}")
    if tree.func.id == "scalar":
        inner = stripped[stripped.index("(") + 1:stripped.rindex(")")]
        return scalar_path(parse_profile(inner), dim)
    if tree.func.id == "matrix":
        if len(tree.args) != 1 or not isinstance(tree.args[0], ast.List):
            raise ValueError(f"matrix(...) needs a list of rows: {text!r}")
        rows = []
        for row_node in tree.args[0].elts:
            if not isinstance(row_node, ast.List):
                raise ValueError(f"matrix rows must be lists: {text!r}")
            row = []
            for el in row_node.elts:
                if isinstance(el, ast.Constant) and isinstance(el.value, str):
                    row.append(el.value)
                else:
                    row.append(repr(_literal_number(el, text)))
            rows.append(row)
        if len(rows) != dim:
            raise ValueError(
                f"coefficient matrix is {len(rows)}x{len(rows[0]) if rows else 0} "
                f"but grid dimension is {dim}")
        path = expr_matrix_path(rows)
        if all(_is_number(e) for row in rows for e in row):
            mat = np.array([[float(e) for e in row] for row in rows])
            return constant_matrix_path(mat)
        return path
    raise ValueError(f"unknown coefficient kind {tree.func.id!r} in {text!r}")


def _is_number(text):
    try:
        float(text)
        return True
    except ValueError:
        return False


def accumulate_path(path, t, rtol=1e-10, max_panels=4000):
    """Entrywise integral of a over [0, t], symmetrized."""
    if t < 0:
        raise ValueError(f"accumulation endpoint must be >= 0, got {t}")
    if path.cumulative is not None:
        mat = np.asarray(path.cumulative(t), dtype=float)
    else:
        mat = integrate_matrix_to(path.a, path.dim, t,
                                  breakpoints=path.breakpoints,
                                  rtol=rtol, max_panels=max_panels)
    return 0.5 * (mat + mat.T)


def check_domination(path, profile, sample_times):
    """Smallest constant with max_ij |a_ij(t)| <= const * delta(t) on samples.

    By convention 0/0 counts as 0; a nonzero coefficient over a vanished
    floor makes the constant infinite.
    """
    worst = 0.0
    for t in np.asarray(sample_times, dtype=float):
        amax = float(np.abs(path.a(t)).max())
        d = float(profile.delta(t))
        if d > 0.0:
            worst = max(worst, amax / d)
        elif amax > 0.0:
            return math.inf
    return worst


def min_eigenvalue_profile(path):
    """Profile tracking the smallest eigenvalue of a(t).

    This is the canonical ellipticity floor of a path: the tightest
    profile for which a(t) >= delta(t) * I holds.
    """

    def smallest(t):
        mat = np.asarray(path.a(t), dtype=float)
        scale = max(1.0, float(np.abs(mat).max()))
        if not np.allclose(mat, mat.T, atol=1e-12 * scale):
            raise ValueError(f"coefficient matrix at t={t} is not symmetric")
        return float(np.linalg.eigvalsh(mat)[0])

    def delta(t):
        if np.ndim(t) == 0:
            return smallest(float(t))
        return np.array([smallest(float(s)) for s in np.asarray(t).ravel()]
                        ).reshape(np.shape(t))

    bound = None if path.bound_M is None else path.dim * path.bound_M
    return DegeneracyProfile(
        delta=delta,
        bound_M=bound,
        spec=f"min_eigenvalue({path.spec})",
        breakpoints=path.breakpoints,
    )


def empirical_bound(profile, t_max, npts=4096):
    """Observed sup of delta on (0, t_max]; complements bound_M when unset."""
    ts = np.linspace(0.0, t_max, npts + 1)[1:]
    return float(np.max(profile.delta(ts)))
