"""Weighted least-squares contour fitting.

Each of M observations contributes three rows: its x and y sub-pixel
positions, weighted by the inverse position variance, and one zero-target
orientation row demanding that the local gradient be orthogonal to the curve
tangent, weighted by the inverse of the tangent-scaled gradient noise
variance.  The tangent norm entering the orientation weights depends on the
solution, so the solve is repeated a few times with reweighting; the first
pass estimates the norm from the chord length of the observation polygon.

The unweighted position-only fit to the integer edge pixels is also provided
as the classical comparison baseline.
"""
from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field

import numpy as np
from scipy import linalg

from .bspline import ContourModel, KnotVector, design_matrix, eval_curve, eval_tangent, make_knot_vector
from .edges import ObservationSet
from .errors import SingularSystemError, UnderdeterminedError

__all__ = [
    "FitConfig",
    "WlsSystem",
    "FitReport",
    "assemble_system",
    "solve_wls",
    "energy",
    "fit_stochastic",
    "fit_classical",
    "orientation_log_likelihood",
]


@dataclass(frozen=True)
class FitConfig:
    """Knobs of the weighted fit.

    `num_ctrl` defaults to one control point per four observations.  `sigma_h`
    normally comes from the observation set (kernel-propagated image noise);
    setting it here overrides that.  `big_sigma` is the gradient-magnitude
    prior scale; it never moves the minimizer and exists for diagnostics, but
    a value that is not >> sigma_h voids the approximation behind the
    quadratic energy, so we warn.  `angle_floor` (radians) keeps orientation
    weights finite on noiseless data and absorbs discretization error in the
    gradient direction.
    """

    num_ctrl: int | None = None
    degree: int = 3
    sigma_b: float = 0.0
    sigma_h: float | None = None
    big_sigma: float | None = None
    max_iters: int = 3
    ridge: float | None = None
    closed: bool = True
    angle_floor: float = 0.05

    def __post_init__(self):
        if self.num_ctrl is not None and self.num_ctrl < 4:
            raise ValueError("num_ctrl must be at least 4")
        if self.degree < 1:
            raise ValueError("degree must be at least 1")
        if self.max_iters < 1:
            raise ValueError("max_iters must be at least 1")
        if self.ridge is not None and self.ridge < 0:
            raise ValueError("ridge must be >= 0")
        if self.big_sigma is not None and self.big_sigma <= 0:
            raise ValueError("big_sigma must be > 0")


@dataclass(frozen=True, eq=False)
class WlsSystem:
    """The stacked 3M-row weighted system: targets d, diagonal weights w,
    matrix b with x-control columns first, then y-control columns."""

    d: np.ndarray
    w: np.ndarray
    b: np.ndarray

    def __post_init__(self):
        if self.d.shape[0] != self.w.shape[0] or self.b.shape[0] != self.d.shape[0]:
            raise ValueError("inconsistent system dimensions")
        if not np.all(np.isfinite(self.b)) or not np.all(np.isfinite(self.d)):
            raise ValueError("system contains non-finite entries")
        if not np.all(np.isfinite(self.w)) or np.any(self.w <= 0):
            raise ValueError("weights must be finite and positive")

    @property
    def num_rows(self) -> int:
        return self.d.shape[0]

    @property
    def num_unknowns(self) -> int:
        return self.b.shape[1]


@dataclass
class FitReport:
    """Per-fit diagnostics."""

    energy_trace: list[float] = field(default_factory=list)
    residual_rms: float = 0.0
    iterations_used: int = 0
    condition_warning: bool = False

    def to_json_dict(self) -> dict:
        return {
            "energy_trace": [float(e) for e in self.energy_trace],
            "residual_rms": float(self.residual_rms),
            "iterations_used": int(self.iterations_used),
            "condition_warning": bool(self.condition_warning),
        }


def _tangent_norms(obs: ObservationSet, theta_prev: ContourModel | None) -> np.ndarray:
    """Per-observation |dcurve/dt| estimates for the orientation weights."""
    ts = obs.params()
    if theta_prev is not None:
        tv = eval_tangent(theta_prev, ts)
        return np.maximum(np.hypot(tv[:, 0], tv[:, 1]), 1e-9)
    # No iterate yet: a uniformly parametrized curve moves at roughly the
    # polygon length per unit parameter.
    pos = obs.positions()
    seg = np.diff(pos, axis=0)
    length = float(np.hypot(seg[:, 0], seg[:, 1]).sum())
    if obs.closed:
        length += float(np.hypot(*(pos[0] - pos[-1])))
        span = 1.0
    else:
        span = max(float(ts[-1] - ts[0]), 1e-9)
    return np.full(obs.m, max(length / span, 1e-9))


def assemble_system(
    obs: ObservationSet,
    kv: KnotVector,
    theta_prev: ContourModel | None,
    cfg: FitConfig,
) -> WlsSystem:
    """Stack position rows (x then y) and linearized orientation rows."""
    m = obs.m
    n = kv.num_basis
    if m < 2 * n:
        raise UnderdeterminedError(f"{m} observations cannot constrain {n} control points")
    ts = obs.params()
    bv = design_matrix(kv, ts)
    bd = design_matrix(kv, ts, derivative=True)
    pos = obs.positions()
    grads = obs.gradients()
    sigma_h = obs.sigma_h if cfg.sigma_h is None else cfg.sigma_h

    tnorm = _tangent_norms(obs, theta_prev)
    gmag = np.hypot(grads[:, 0], grads[:, 1])
    orient_var = sigma_h**2 + (cfg.angle_floor * gmag) ** 2
    w_pos = 1.0 / obs.position_variances()
    w_orient = 1.0 / (tnorm**2 * orient_var)

    b = np.zeros((3 * m, 2 * n))
    b[0:m, 0:n] = bv
    b[m : 2 * m, n : 2 * n] = bv
    b[2 * m : 3 * m, 0:n] = grads[:, 0:1] * bd
    b[2 * m : 3 * m, n : 2 * n] = grads[:, 1:2] * bd
    d = np.concatenate([pos[:, 0], pos[:, 1], np.zeros(m)])
    w = np.concatenate([w_pos, w_pos, w_orient])
    return WlsSystem(d=d, w=w, b=b)


def energy(theta: np.ndarray, sys: WlsSystem) -> float:
    """The weighted squared-residual objective (ridge term excluded)."""
    r = sys.d - sys.b @ theta
    return float(r @ (sys.w * r))


def solve_wls(sys: WlsSystem, ridge: float = 0.0) -> tuple[np.ndarray, bool]:
    """Minimize the weighted residual plus ridge*|theta|^2.

    Solves the normal equations by Cholesky factorization.  Returns the
    solution and a flag set when the Jacobi-scaled normal matrix is close to
    singular (condition number above 1e10).
    """
    bw = sys.b * sys.w[:, None]
    gram = sys.b.T @ bw
    rhs = bw.T @ sys.d
    if ridge > 0.0:
        gram = gram + ridge * np.eye(gram.shape[0])
    scale = np.sqrt(np.maximum(np.diag(gram), 1e-300))
    cond = float(np.linalg.cond(gram / np.outer(scale, scale)))
    warning = (not math.isfinite(cond)) or cond > 1e10
    try:
        factor = linalg.cho_factor(gram)
    except linalg.LinAlgError as exc:
        raise SingularSystemError(
            "normal equations are singular" + ("" if ridge else " (ridge=0)")
        ) from exc
    return linalg.cho_solve(factor, rhs), warning


def _auto_ridge(sys: WlsSystem) -> float:
    # Tiny Tikhonov term relative to the Gram trace; stabilizes the
    # near-singular systems closed contours occasionally produce.
    tr = float(np.sum(sys.w[:, None] * sys.b**2))
    return 1e-8 * tr / sys.num_unknowns


def fit_stochastic(obs: ObservationSet, cfg: FitConfig) -> tuple[ContourModel, FitReport]:
    """Iteratively reweighted solve of the full position+orientation system."""
    n = cfg.num_ctrl if cfg.num_ctrl is not None else max(cfg.degree + 1, round(obs.m / 4))
    kv = make_knot_vector(n, cfg.degree, cfg.closed)
    sigma_h = obs.sigma_h if cfg.sigma_h is None else cfg.sigma_h
    if cfg.big_sigma is not None and cfg.big_sigma < 10.0 * sigma_h:
        warnings.warn(
            f"gradient-prior scale {cfg.big_sigma:g} is not >> sigma_h={sigma_h:g}; "
            "the quadratic energy approximation degrades",
            stacklevel=2,
        )
    report = FitReport()
    model: ContourModel | None = None
    for _ in range(cfg.max_iters):
        sys = assemble_system(obs, kv, model, cfg)
        ridge = cfg.ridge if cfg.ridge is not None else _auto_ridge(sys)
        theta, warn = solve_wls(sys, ridge)
        report.condition_warning = report.condition_warning or warn
        report.energy_trace.append(energy(theta, sys))
        report.iterations_used += 1
        model = ContourModel(knots=kv, theta_x=theta[:n], theta_y=theta[n:])
    pos = obs.positions()
    fitted = eval_curve(model, obs.params())
    report.residual_rms = float(np.sqrt(np.mean(np.sum((fitted - pos) ** 2, axis=1))))
    return model, report


def fit_classical(obs: ObservationSet, kv: KnotVector) -> ContourModel:
    """Plain least-squares spline through the integer edge pixels.

    No sub-pixel refinement, no weights, no orientation constraint: the
    baseline the weighted fit is compared against.
    """
    m = obs.m
    n = kv.num_basis
    if m < n:
        raise UnderdeterminedError(f"{m} observations cannot constrain {n} control points")
    a = design_matrix(kv, obs.params())
    ip = obs.integer_positions()
    theta_x, *_ = np.linalg.lstsq(a, ip[:, 0], rcond=None)
    theta_y, *_ = np.linalg.lstsq(a, ip[:, 1], rcond=None)
    return ContourModel(knots=kv, theta_x=theta_x, theta_y=theta_y)


def orientation_log_likelihood(
    grad: tuple[float, float],
    tangent: tuple[float, float],
    sigma_h: float,
    big_sigma: float,
    approximate: bool = False,
) -> float:
    """Log-likelihood (up to its constant) of a gradient given the curve
    direction, under the isotropic gradient prior of scale `big_sigma`.

    The `approximate` form drops sigma_h against big_sigma; it is the one
    whose quadratic part the fit minimizes.  Provided as a diagnostic.
    """
    if sigma_h <= 0 or big_sigma <= 0:
        raise ValueError("sigma_h and big_sigma must be > 0")
    tx, ty = tangent
    tn = math.hypot(tx, ty)
    if tn == 0:
        raise ValueError("tangent must be nonzero")
    rx, ry = tx / tn, ty / tn
    hx, hy = grad
    dot = hx * rx + hy * ry
    hh = hx * hx + hy * hy
    if approximate:
        return -hh / big_sigma**2 - dot**2 / (2.0 * sigma_h**2)
    den = 2.0 * sigma_h**2 + big_sigma**2
    return -hh / den - dot**2 * big_sigma**2 / (2.0 * sigma_h**2 * den)
