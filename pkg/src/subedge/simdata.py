"""Synthetic benchmark images, noise injection, and ground-truth scoring.

The main test scene is an axis-aligned bright rectangle on a darker
background, Gaussian-smoothed so its edges have finite width.  Pixel (i, j)
takes the foreground value when x0 <= i <= x1 and y0 <= j <= y1, so the true
(continuous) edge runs along the half-integer lines x0-0.5, x1+0.5, y0-0.5,
y1+0.5; scoring uses exact point-to-rectangle-boundary distances against that
contour.

Noise is a pure function of (image, parameters, seed); the generator is
numpy's PCG64 and its name is recorded in experiment reports so runs stay
reproducible.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy import ndimage

from .bspline import ContourModel, eval_curve
from .image import GrayImage

__all__ = [
    "GroundTruth",
    "NoiseSpec",
    "ErrorMetrics",
    "RNG_NAME",
    "make_square_image",
    "make_step_image",
    "add_gaussian_noise",
    "add_salt_pepper",
    "contour_error",
]

RNG_NAME = "numpy.random.Generator(PCG64)"


@dataclass(frozen=True, eq=False)
class GroundTruth:
    """Closed reference contour: an axis-aligned rectangle boundary."""

    corners: np.ndarray  # (4, 2), counterclockwise from (xmin, ymin)
    description: str = "rect"

    def __post_init__(self):
        corners = np.asarray(self.corners, dtype=float).reshape(4, 2)
        object.__setattr__(self, "corners", corners)

    @property
    def bounds(self) -> tuple[float, float, float, float]:
        xs, ys = self.corners[:, 0], self.corners[:, 1]
        return float(xs.min()), float(ys.min()), float(xs.max()), float(ys.max())

    def distance(self, points: np.ndarray) -> np.ndarray:
        """Exact Euclidean distance from each (x, y) point to the boundary."""
        a, c, b, d = self.bounds
        pts = np.atleast_2d(np.asarray(points, dtype=float))
        x, y = pts[:, 0], pts[:, 1]
        dx = np.maximum(np.maximum(a - x, x - b), 0.0)
        dy = np.maximum(np.maximum(c - y, y - d), 0.0)
        outside = np.hypot(dx, dy)
        inside = np.minimum.reduce([x - a, b - x, y - c, d - y])
        return np.where(outside > 0.0, outside, inside)

    def to_json_dict(self) -> dict:
        return {"type": "rect", "corners": [[float(x), float(y)] for x, y in self.corners]}

    @classmethod
    def from_json_dict(cls, doc: dict) -> "GroundTruth":
        if doc.get("type") != "rect":
            raise ValueError(f"unsupported ground-truth type {doc.get('type')!r}")
        return cls(corners=np.asarray(doc["corners"], dtype=float))

    @classmethod
    def from_rect(cls, x0: float, y0: float, x1: float, y1: float) -> "GroundTruth":
        return cls(corners=np.array([[x0, y0], [x1, y0], [x1, y1], [x0, y1]]))


@dataclass(frozen=True)
class NoiseSpec:
    """One noise condition: Gaussian (sigma) or salt & pepper (p0, gamma)."""

    kind: str = "gaussian"
    sigma: float = 0.0
    p0: float = 0.0
    gamma: float = 0.0
    seed: int = 0

    def __post_init__(self):
        if self.kind == "gaussian":
            if self.sigma < 0:
                raise ValueError("gaussian sigma must be >= 0")
        elif self.kind == "salt_pepper":
            if not 0.0 <= 2.0 * self.p0 <= 1.0:
                raise ValueError("salt & pepper requires 0 <= 2*p0 <= 1")
            if self.gamma <= 0:
                raise ValueError("salt & pepper gamma must be > 0")
        else:
            raise ValueError(f"unknown noise kind {self.kind!r}")

    @property
    def equivalent_sigma(self) -> float:
        """Std of the additive perturbation (used to set the fit weights)."""
        if self.kind == "gaussian":
            return self.sigma
        return self.gamma * math.sqrt(2.0 * self.p0)

    def apply(self, img: GrayImage, seed: int | None = None) -> GrayImage:
        s = self.seed if seed is None else seed
        if self.kind == "gaussian":
            return add_gaussian_noise(img, self.sigma, s)
        return add_salt_pepper(img, self.p0, self.gamma, s)

    def label(self) -> str:
        if self.kind == "gaussian":
            return f"gaussian sigma={self.sigma:g}"
        return f"salt_pepper p0={self.p0:g} gamma={self.gamma:g}"

    def to_json_dict(self) -> dict:
        if self.kind == "gaussian":
            return {"kind": "gaussian", "sigma": self.sigma}
        return {"kind": "salt_pepper", "p0": self.p0, "gamma": self.gamma}


@dataclass(frozen=True)
class ErrorMetrics:
    """Distance statistics of a fitted curve against the true contour."""

    mean_dist: float
    rms_dist: float
    max_dist: float

    def to_json_dict(self) -> dict:
        return {
            "mean_dist": self.mean_dist,
            "rms_dist": self.rms_dist,
            "max_dist": self.max_dist,
        }


def make_square_image(
    size: int = 128,
    rect: tuple[int, int, int, int] = (32, 32, 96, 96),
    lo: float = 0.2,
    hi: float = 0.8,
    blur_sigma: float = 1.0,
) -> tuple[GrayImage, GroundTruth]:
    """Bright axis-aligned rectangle on a darker background.

    `rect` gives inclusive pixel-index corners (x0, y0, x1, y1); the returned
    ground truth is the continuous boundary half a pixel outside them.
    """
    x0, y0, x1, y1 = rect
    if not (0.0 <= lo < hi <= 1.0):
        raise ValueError("need 0 <= lo < hi <= 1")
    margin = 8
    if x0 < margin or y0 < margin or x1 > size - 1 - margin or y1 > size - 1 - margin:
        raise ValueError(f"rectangle must keep a {margin}px margin inside the image")
    if x1 <= x0 or y1 <= y0:
        raise ValueError("rectangle corners must be ordered")
    data = np.full((size, size), lo, dtype=np.float64)
    data[y0 : y1 + 1, x0 : x1 + 1] = hi
    if blur_sigma > 0:
        data = ndimage.gaussian_filter(data, blur_sigma, mode="mirror")
    truth = GroundTruth.from_rect(x0 - 0.5, y0 - 0.5, x1 + 0.5, y1 + 0.5)
    return GrayImage(data), truth


def make_step_image(
    size: int = 64,
    edge_x: float = 32.0,
    lo: float = 0.2,
    hi: float = 0.8,
    blur_sigma: float = 1.0,
) -> GrayImage:
    """Vertical step at continuous position `edge_x` with an erf profile.

    This is the analytically exact Gaussian-blurred step, handy as an oracle
    for sub-pixel localization: the true edge sits exactly at `edge_x`.
    """
    xs = np.arange(size, dtype=np.float64)
    if blur_sigma > 0:
        from scipy.special import erf

        profile = lo + (hi - lo) * 0.5 * (1.0 + erf((xs - edge_x) / (math.sqrt(2) * blur_sigma)))
    else:
        profile = np.where(xs >= edge_x, hi, lo)
    return GrayImage(np.tile(profile, (size, 1)))


def add_gaussian_noise(
    img: GrayImage, sigma_fraction: float, seed: int, clip: bool = False
) -> GrayImage:
    """Add i.i.d. zero-mean Gaussian noise with std `sigma_fraction` (of the
    unit amplitude).  Output is unclipped unless `clip` is set."""
    if sigma_fraction < 0:
        raise ValueError("sigma_fraction must be >= 0")
    rng = np.random.default_rng(seed)
    noisy = img.data + rng.normal(0.0, sigma_fraction, size=img.data.shape)
    if clip:
        noisy = np.clip(noisy, 0.0, 1.0)
    return GrayImage(noisy)


def add_salt_pepper(
    img: GrayImage, p0: float, gamma: float, seed: int, clip: bool = False
) -> GrayImage:
    """Additive impulse noise: +gamma with probability p0, -gamma with
    probability p0, unchanged otherwise, independently per pixel."""
    if not 0.0 <= 2.0 * p0 <= 1.0:
        raise ValueError("need 0 <= 2*p0 <= 1")
    rng = np.random.default_rng(seed)
    u = rng.random(size=img.data.shape)
    delta = np.where(u < p0, gamma, np.where(u < 2.0 * p0, -gamma, 0.0))
    noisy = img.data + delta
    if clip:
        noisy = np.clip(noisy, 0.0, 1.0)
    return GrayImage(noisy)


def contour_error(
    model: ContourModel,
    truth: GroundTruth,
    samples: int = 1000,
    corner_exclude_radius: float = 0.0,
) -> ErrorMetrics:
    """Distance statistics of the curve, sampled at `samples` uniform
    parameters, against the true rectangle boundary.

    With `corner_exclude_radius` > 0, samples within that distance of a true
    corner are ignored (B-splines necessarily round corners; this isolates
    edge accuracy from corner rounding).
    """
    if samples < 100:
        raise ValueError("samples must be >= 100")
    lo, hi = model.knots.domain
    if model.knots.closed:
        ts = lo + (hi - lo) * np.arange(samples) / samples
    else:
        ts = np.linspace(lo, hi, samples)
    pts = eval_curve(model, ts)
    dists = truth.distance(pts)
    if corner_exclude_radius > 0.0:
        corner_d = np.min(
            np.hypot(
                pts[:, 0][:, None] - truth.corners[:, 0][None, :],
                pts[:, 1][:, None] - truth.corners[:, 1][None, :],
            ),
            axis=1,
        )
        keep = corner_d > corner_exclude_radius
        if np.any(keep):
            dists = dists[keep]
    return ErrorMetrics(
        mean_dist=float(np.mean(dists)),
        rms_dist=float(np.sqrt(np.mean(dists**2))),
        max_dist=float(np.max(dists)),
    )
