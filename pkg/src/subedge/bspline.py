"""B-spline knot vectors, basis evaluation, curves, and design matrices.

Open contours use clamped uniform knots so the curve interpolates its end
control points.  Closed contours use a strictly uniform knot grid with basis
indices wrapping modulo the control-point count, which keeps the number of
basis functions equal to the true degree-of-freedom count of the fit.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import DomainError

__all__ = [
    "KnotVector",
    "ContourModel",
    "make_knot_vector",
    "basis_value",
    "basis_derivative",
    "eval_curve",
    "eval_tangent",
    "design_matrix",
]


def _cox_de_boor(knots, i, degree, t, close_right=True):
    """Evaluate B_{i,degree}(t) by the two-term recursion.

    `t` may be a scalar or ndarray.  Terms with a zero knot-span denominator
    are taken as 0 (the standard 0/0 convention needed for repeated knots).
    Spans are half-open [t_i, t_{i+1}); with `close_right` the last nonempty
    span also claims its right endpoint so clamped curves reach their final
    control point.
    """
    if degree == 0:
        hit = (knots[i] <= t) & (t < knots[i + 1])
        if close_right and knots[i] < knots[i + 1] and knots[i + 1] == knots[-1]:
            hit = hit | (t == knots[-1])
        return np.where(hit, 1.0, 0.0)
    total = np.zeros_like(np.asarray(t, dtype=float))
    den = knots[i + degree] - knots[i]
    if den > 0.0:
        total = total + (t - knots[i]) / den * _cox_de_boor(knots, i, degree - 1, t, close_right)
    den = knots[i + degree + 1] - knots[i + 1]
    if den > 0.0:
        total = total + (knots[i + degree + 1] - t) / den * _cox_de_boor(
            knots, i + 1, degree - 1, t, close_right
        )
    return total


def _cox_de_boor_deriv(knots, i, degree, t, close_right=True):
    """First derivative of B_{i,degree}(t): the classical degree-lowering form."""
    total = np.zeros_like(np.asarray(t, dtype=float))
    den = knots[i + degree] - knots[i]
    if den > 0.0:
        total = total + degree / den * _cox_de_boor(knots, i, degree - 1, t, close_right)
    den = knots[i + degree + 1] - knots[i + 1]
    if den > 0.0:
        total = total - degree / den * _cox_de_boor(knots, i + 1, degree - 1, t, close_right)
    return total


@dataclass(frozen=True, eq=False)
class KnotVector:
    """Nondecreasing knot sequence plus degree and an open/closed flag.

    For closed contours `knots` is the uniform grid j/N, j = 0..N, kept for
    reporting; evaluation wraps the parameter onto a cardinal basis instead of
    indexing this array directly.
    """

    knots: np.ndarray
    degree: int
    closed: bool = False

    def __post_init__(self):
        knots = np.asarray(self.knots, dtype=float)
        object.__setattr__(self, "knots", knots)
        if self.degree < 0:
            raise ValueError("degree must be nonnegative")
        if np.any(np.diff(knots) < 0):
            raise ValueError("knots must be nondecreasing")
        if not self.closed and knots.size < 2 * (self.degree + 1):
            raise ValueError(
                f"open curve needs at least {2 * (self.degree + 1)} knots, got {knots.size}"
            )

    @property
    def num_basis(self) -> int:
        if self.closed:
            return self.knots.size - 1
        return self.knots.size - self.degree - 1

    @property
    def domain(self) -> tuple[float, float]:
        if self.closed:
            return (0.0, 1.0)
        return (float(self.knots[self.degree]), float(self.knots[-(self.degree + 1)]))


def make_knot_vector(num_ctrl: int, degree: int = 3, closed: bool = False) -> KnotVector:
    """Uniform knot vector over [0, 1] for `num_ctrl` basis functions.

    Open vectors are clamped (end knots repeated degree+1 times); closed ones
    are strictly uniform with spans of width 1/num_ctrl.
    """
    if num_ctrl < degree + 1:
        raise ValueError(f"num_ctrl must be at least degree+1={degree + 1}, got {num_ctrl}")
    if closed:
        knots = np.linspace(0.0, 1.0, num_ctrl + 1)
    else:
        interior = np.linspace(0.0, 1.0, num_ctrl - degree + 1)
        knots = np.concatenate([np.zeros(degree), interior, np.ones(degree)])
    return KnotVector(knots=knots, degree=degree, closed=closed)


def _cardinal_knots(degree: int) -> np.ndarray:
    return np.arange(degree + 2, dtype=float)


def _as_param_array(t):
    tt = np.asarray(t, dtype=float)
    return tt, tt.ndim == 0


def basis_value(kv: KnotVector, i: int, t, degree: int | None = None):
    """B_{i,degree}(t); vectorized over `t`.

    `degree` defaults to the knot vector's own degree; lower degrees evaluate
    the intermediate bases of the recursion.  Open vectors accept any `t`
    inside the full knot range (the basis is simply 0 outside its support);
    closed vectors accept any `t` and wrap it.
    """
    n = kv.degree if degree is None else degree
    tt, scalar = _as_param_array(t)
    if kv.closed:
        nb = kv.num_basis
        u = np.mod(tt * nb - i, nb)
        out = _cox_de_boor(_cardinal_knots(n), 0, n, u, close_right=False)
    else:
        if np.any(tt < kv.knots[0]) or np.any(tt > kv.knots[-1]):
            raise DomainError(f"parameter outside knot range [{kv.knots[0]}, {kv.knots[-1]}]")
        if i < 0 or i + n + 1 >= kv.knots.size:
            raise ValueError(f"basis index {i} out of range for degree {n}")
        out = _cox_de_boor(kv.knots, i, n, tt, close_right=True)
    return float(out) if scalar else out


def basis_derivative(kv: KnotVector, i: int, t, degree: int | None = None):
    """dB_{i,degree}/dt(t); vectorized over `t`.  Requires degree >= 1."""
    n = kv.degree if degree is None else degree
    if n < 1:
        raise ValueError("derivative needs degree >= 1")
    tt, scalar = _as_param_array(t)
    if kv.closed:
        nb = kv.num_basis
        u = np.mod(tt * nb - i, nb)
        lower = _cardinal_knots(n - 1)
        out = nb * (
            _cox_de_boor(lower, 0, n - 1, u, close_right=False)
            - _cox_de_boor(lower, 0, n - 1, u - 1.0, close_right=False)
        )
    else:
        if np.any(tt < kv.knots[0]) or np.any(tt > kv.knots[-1]):
            raise DomainError(f"parameter outside knot range [{kv.knots[0]}, {kv.knots[-1]}]")
        if i < 0 or i + n + 1 >= kv.knots.size:
            raise ValueError(f"basis index {i} out of range for degree {n}")
        out = _cox_de_boor_deriv(kv.knots, i, n, tt, close_right=True)
    return float(out) if scalar else out


def _check_curve_domain(kv: KnotVector, tt: np.ndarray) -> None:
    if kv.closed:
        return
    lo, hi = kv.domain
    eps = 1e-12 * max(1.0, abs(hi))
    if np.any(tt < lo - eps) or np.any(tt > hi + eps):
        raise DomainError(f"parameter outside curve domain [{lo}, {hi}]")


def design_matrix(kv: KnotVector, params, derivative: bool = False) -> np.ndarray:
    """Matrix of basis values (or derivatives) at `params`: rows index the
    parameters, columns the basis functions.  Value rows sum to 1."""
    tt = np.atleast_1d(np.asarray(params, dtype=float))
    _check_curve_domain(kv, tt)
    fn = basis_derivative if derivative else basis_value
    cols = [fn(kv, i, tt) for i in range(kv.num_basis)]
    return np.column_stack(cols)


@dataclass(frozen=True, eq=False)
class ContourModel:
    """A planar parametric B-spline: knot vector plus 2D control points."""

    knots: KnotVector
    theta_x: np.ndarray
    theta_y: np.ndarray

    def __post_init__(self):
        tx = np.asarray(self.theta_x, dtype=float)
        ty = np.asarray(self.theta_y, dtype=float)
        object.__setattr__(self, "theta_x", tx)
        object.__setattr__(self, "theta_y", ty)
        if tx.shape != ty.shape or tx.ndim != 1:
            raise ValueError("theta_x and theta_y must be 1D with equal length")
        if tx.size != self.knots.num_basis:
            raise ValueError(
                f"expected {self.knots.num_basis} control points, got {tx.size}"
            )

    @property
    def num_ctrl(self) -> int:
        return self.theta_x.size

    def to_json_dict(self) -> dict:
        return {
            "degree": self.knots.degree,
            "closed": self.knots.closed,
            "knots": [float(v) for v in self.knots.knots],
            "ctrl": [[float(x), float(y)] for x, y in zip(self.theta_x, self.theta_y)],
        }

    @classmethod
    def from_json_dict(cls, doc: dict) -> "ContourModel":
        kv = KnotVector(
            knots=np.asarray(doc["knots"], dtype=float),
            degree=int(doc["degree"]),
            closed=bool(doc["closed"]),
        )
        ctrl = np.asarray(doc["ctrl"], dtype=float)
        return cls(knots=kv, theta_x=ctrl[:, 0], theta_y=ctrl[:, 1])


def eval_curve(model: ContourModel, t):
    """Curve point(s) (x, y) at parameter `t` (scalar -> shape (2,))."""
    tt, scalar = _as_param_array(t)
    basis = design_matrix(model.knots, tt)
    pts = np.column_stack([basis @ model.theta_x, basis @ model.theta_y])
    return pts[0] if scalar else pts


def eval_tangent(model: ContourModel, t):
    """Curve tangent(s) d(x, y)/dt at parameter `t` (scalar -> shape (2,))."""
    tt, scalar = _as_param_array(t)
    basis = design_matrix(model.knots, tt, derivative=True)
    vecs = np.column_stack([basis @ model.theta_x, basis @ model.theta_y])
    return vecs[0] if scalar else vecs
