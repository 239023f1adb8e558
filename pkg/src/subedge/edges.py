"""Gradient fields and sub-pixel edge observations.

The gradient comes from derivative-of-Gaussian masks.  Candidate edge pixels
are gradient-magnitude maxima along the (8-way quantized) gradient direction;
each surviving pixel is refined to sub-pixel position by fitting a parabola to
the magnitude sampled one pixel either side along the exact gradient
direction.  Every observation carries the statistics the weighted fit needs:
the position variance along the gradient and the kernel-induced gradient
noise scale.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy import ndimage

from .errors import AmbiguousTopologyError, NoEdgesError, NotAMaximumError
from .image import GrayImage

__all__ = [
    "DerivativeKernels",
    "GradientField",
    "EdgeObservation",
    "ObservationSet",
    "SIGMA_X_FLOOR",
    "gaussian_derivative_kernels",
    "compute_gradient",
    "sigma_h_from_kernel",
    "detect_edge_pixels",
    "connected_components",
    "prune_spurs",
    "trace_contour",
    "subpixel_offset",
    "build_observations",
    "estimate_sigma_x",
]

# Variance floor (pixels) so very strong edges cannot claim near-zero
# position uncertainty; quadratic peak interpolation is itself only good to
# a few hundredths of a pixel.
SIGMA_X_FLOOR = 0.05


@dataclass(frozen=True, eq=False)
class DerivativeKernels:
    """Derivative-of-Gaussian convolution masks; ky is the transpose of kx."""

    kx: np.ndarray
    ky: np.ndarray
    sigma: float

    @property
    def num_taps(self) -> int:
        return self.kx.size


@dataclass(frozen=True, eq=False)
class GradientField:
    """Per-pixel gradient components plus the noise std they inherit."""

    hx: np.ndarray
    hy: np.ndarray
    sigma_h: float

    def magnitude(self) -> np.ndarray:
        return np.hypot(self.hx, self.hy)


def gaussian_derivative_kernels(sigma: float) -> DerivativeKernels:
    """Masks for d/dx and d/dy of a Gaussian at scale `sigma`.

    Sampled on a (2*ceil(3*sigma)+1)^2 grid and mean-subtracted so the masks
    have exactly zero sum (a constant image maps to zero gradient).
    """
    if sigma <= 0:
        raise ValueError("sigma must be > 0")
    r = math.ceil(3.0 * sigma)
    xs = np.arange(-r, r + 1, dtype=np.float64)
    xg, yg = np.meshgrid(xs, xs)
    gauss = np.exp(-(xg**2 + yg**2) / (2.0 * sigma**2)) / (2.0 * math.pi * sigma**2)
    kx = -(xg / sigma**2) * gauss
    kx -= kx.mean()
    return DerivativeKernels(kx=kx, ky=kx.T.copy(), sigma=sigma)


def sigma_h_from_kernel(sigma_b: float, k: DerivativeKernels) -> float:
    """Gradient-component noise std for image noise std `sigma_b`.

    White noise through a convolution mask K has variance sigma_b^2 * sum(K^2),
    identical for kx and its transpose.
    """
    if sigma_b < 0:
        raise ValueError("sigma_b must be >= 0")
    return sigma_b * math.sqrt(float(np.sum(k.kx**2)))


def compute_gradient(img: GrayImage, k: DerivativeKernels, sigma_b: float = 0.0) -> GradientField:
    """Convolve the image with both derivative masks (mirror borders)."""
    if img.height < k.kx.shape[0] or img.width < k.kx.shape[1]:
        raise ValueError("image smaller than the derivative kernel")
    hx = ndimage.convolve(img.data, k.kx, mode="mirror")
    hy = ndimage.convolve(img.data, k.ky, mode="mirror")
    return GradientField(hx=hx, hy=hy, sigma_h=sigma_h_from_kernel(sigma_b, k))


# 8-way direction offsets indexed by round(angle / 45 deg); (dx, dy) order.
_DIR8 = np.array(
    [(1, 0), (1, 1), (0, 1), (-1, 1), (-1, 0), (-1, -1), (0, -1), (1, -1)], dtype=np.int64
)


def detect_edge_pixels(field: GradientField, mag_threshold: float = 0.2) -> set[tuple[int, int]]:
    """Pixels (x, y) that pass the relative magnitude threshold and are local
    maxima along the quantized gradient direction.

    Ties along the direction are broken asymmetrically (strict against the
    backward neighbor, non-strict forward) so a symmetric profile yields a
    single-pixel-wide edge.
    """
    if not 0.0 < mag_threshold < 1.0:
        raise ValueError("mag_threshold must be in (0, 1)")
    mag = field.magnitude()
    gmax = float(mag.max())
    if gmax <= 0.0:
        raise NoEdgesError("gradient field is identically zero")
    thr = mag_threshold * gmax

    h, w = mag.shape
    angle = np.arctan2(field.hy, field.hx)
    d8 = np.mod(np.rint(angle / (math.pi / 4.0)).astype(np.int64), 8)
    dx = _DIR8[d8][..., 0]
    dy = _DIR8[d8][..., 1]

    padded = np.zeros((h + 2, w + 2))
    padded[1:-1, 1:-1] = mag
    yy, xx = np.mgrid[0:h, 0:w]
    fwd = padded[yy + 1 + dy, xx + 1 + dx]
    back = padded[yy + 1 - dy, xx + 1 - dx]
    keep = (mag > thr) & (mag > back) & (mag >= fwd)
    keep[0, :] = keep[-1, :] = False  # border gradients are mirror artifacts
    keep[:, 0] = keep[:, -1] = False
    ys, xs = np.nonzero(keep)
    if xs.size == 0:
        raise NoEdgesError(f"no pixel exceeds {mag_threshold:g} of the maximum magnitude")
    return {(int(x), int(y)) for x, y in zip(xs, ys)}


_NEIGHBORS = [(1, 0), (1, 1), (0, 1), (-1, 1), (-1, 0), (-1, -1), (0, -1), (1, -1)]


def connected_components(pixels: set[tuple[int, int]]) -> list[set[tuple[int, int]]]:
    """8-connected components, largest first (ties by smallest pixel)."""
    remaining = set(pixels)
    comps = []
    while remaining:
        seed = min(remaining, key=lambda p: (p[1], p[0]))
        comp = {seed}
        stack = [seed]
        remaining.discard(seed)
        while stack:
            x, y = stack.pop()
            for dx, dy in _NEIGHBORS:
                q = (x + dx, y + dy)
                if q in remaining:
                    remaining.discard(q)
                    comp.add(q)
                    stack.append(q)
        comps.append(comp)
    comps.sort(key=lambda c: (-len(c), min((p[1], p[0]) for p in c)))
    return comps


def prune_spurs(pixels: set[tuple[int, int]]) -> set[tuple[int, int]]:
    """Iteratively remove pixels with at most one 8-neighbor.

    Burns away dead-end tendrils that noise attaches to a closed ring; a pure
    ring is left untouched.  Only meaningful for closed contours (an open
    chain would be consumed entirely).
    """
    out = set(pixels)
    while True:
        tips = [
            p
            for p in out
            if sum((p[0] + dx, p[1] + dy) in out for dx, dy in _NEIGHBORS) <= 1
        ]
        if not tips:
            return out
        out.difference_update(tips)


def _adjacent8(p: tuple[int, int], q: tuple[int, int]) -> bool:
    return max(abs(p[0] - q[0]), abs(p[1] - q[1])) == 1


def _walk(
    comp: set[tuple[int, int]], start: tuple[int, int], closed: bool
) -> list[tuple[int, int]]:
    """Greedy curve-following walk with backtracking.

    At each step the direction closest to the current heading wins, which
    follows thin curves smoothly.  A dead end (side branch, jam in a thick
    spot) is popped off the path; the longest path seen is kept as fallback.
    For closed contours the walk stops as soon as it returns next to `start`.
    """
    turn_order = (0, 1, -1, 2, -2, 3, -3, 4)
    visited = {start}
    path = [start]
    best = [start]
    heading = 0
    while True:
        cur = path[-1]
        step = None
        for turn in turn_order:
            d = (heading + turn) % 8
            q = (cur[0] + _NEIGHBORS[d][0], cur[1] + _NEIGHBORS[d][1])
            if q in comp and q not in visited:
                step = (q, d)
                break
        if step is not None:
            q, d = step
            visited.add(q)
            path.append(q)
            heading = d
            continue
        if (
            closed
            and len(path) >= max(4, len(comp) // 2)
            and _adjacent8(cur, start)
        ):
            return path  # loop closed; stray unvisited pixels are branches
        if len(path) > len(best):
            best = list(path)
        if len(path) == 1:
            return best
        path.pop()
        if len(path) >= 2:
            dxy = (path[-1][0] - path[-2][0], path[-1][1] - path[-2][1])
            heading = _NEIGHBORS.index(dxy)


def trace_contour(
    pixels: set[tuple[int, int]], closed: bool, permissive: bool = False
) -> list[tuple[int, int]]:
    """Order an 8-connected chain or ring by walking neighbor to neighbor.

    Starts at the topmost-left pixel (for open chains: at an endpoint).
    Multiple components raise AmbiguousTopologyError unless `permissive`
    selects the largest one.  Consecutive output pixels are 8-neighbors; for
    a clean ring the sequence also wraps around.
    """
    if not pixels:
        raise NoEdgesError("empty pixel set")
    comps = connected_components(pixels)
    if len(comps) > 1 and not permissive:
        raise AmbiguousTopologyError(
            f"{len(comps)} connected components (largest has {len(comps[0])} pixels)"
        )
    comp = comps[0]
    if len(comp) == 1:
        return list(comp)

    def degree(p):
        return sum((p[0] + dx, p[1] + dy) in comp for dx, dy in _NEIGHBORS)

    # A chain end (or the break of a ring that noise opened) is the right
    # place to start: the walk then covers the whole curve in one pass.
    tips = [p for p in comp if degree(p) == 1]
    start = min(tips or comp, key=lambda p: (p[1], p[0]))
    return _walk(comp, start, closed)


def subpixel_offset(g_minus: float, g_0: float, g_plus: float) -> float:
    """Vertex of the parabola through (-1, g_minus), (0, g_0), (1, g_plus).

    Returns the peak offset clamped to [-0.5, 0.5]; a flat triple gives 0.
    """
    if g_0 < g_minus or g_0 < g_plus:
        raise NotAMaximumError(
            f"center sample {g_0:g} below a neighbor ({g_minus:g}, {g_plus:g})"
        )
    denom = 2.0 * (g_minus - 2.0 * g_0 + g_plus)
    if denom == 0.0:
        return 0.0
    return float(np.clip((g_minus - g_plus) / denom, -0.5, 0.5))


def estimate_sigma_x(
    grad_mag: float, sigma_b: float, k: DerivativeKernels, floor: float = SIGMA_X_FLOOR
) -> float:
    """Variance (px^2) of the sub-pixel edge position along the gradient.

    First-order error propagation of the gradient noise through the peak
    location, sigma_H^2 / |H|^2, plus a small floor so strong edges cannot
    receive unbounded weight.
    """
    if grad_mag <= 0:
        raise ValueError("grad_mag must be > 0")
    sigma_h = sigma_h_from_kernel(sigma_b, k)
    return sigma_h**2 / grad_mag**2 + floor**2


def _bilinear(arr: np.ndarray, x: float, y: float) -> float:
    h, w = arr.shape
    x = min(max(x, 0.0), w - 1.0)
    y = min(max(y, 0.0), h - 1.0)
    x0 = min(int(x), w - 2) if w > 1 else 0
    y0 = min(int(y), h - 2) if h > 1 else 0
    fx, fy = x - x0, y - y0
    return float(
        arr[y0, x0] * (1 - fx) * (1 - fy)
        + arr[y0, x0 + 1] * fx * (1 - fy)
        + arr[y0 + 1, x0] * (1 - fx) * fy
        + arr[y0 + 1, x0 + 1] * fx * fy
    )


@dataclass(frozen=True)
class EdgeObservation:
    """One ordered edge sample with its local statistics."""

    x: float  # sub-pixel position (px)
    y: float
    gx: float  # local gradient (intensity/px)
    gy: float
    sigma_x2: float  # position variance along the gradient (px^2)
    t: float  # curve parameter in [0, 1)
    ix: int  # source integer pixel
    iy: int


@dataclass(frozen=True, eq=False)
class ObservationSet:
    """Ordered edge observations with t(i) = i/M."""

    observations: tuple[EdgeObservation, ...]
    closed: bool
    skipped: int = 0
    sigma_h: float = 0.0

    @property
    def m(self) -> int:
        return len(self.observations)

    def positions(self) -> np.ndarray:
        return np.array([(o.x, o.y) for o in self.observations])

    def integer_positions(self) -> np.ndarray:
        return np.array([(o.ix, o.iy) for o in self.observations], dtype=float)

    def gradients(self) -> np.ndarray:
        return np.array([(o.gx, o.gy) for o in self.observations])

    def params(self) -> np.ndarray:
        return np.array([o.t for o in self.observations])

    def position_variances(self) -> np.ndarray:
        return np.array([o.sigma_x2 for o in self.observations])


def build_observations(
    field: GradientField,
    ordered: list[tuple[int, int]],
    sigma_b: float = 0.0,
    closed: bool = True,
    floor: float = SIGMA_X_FLOOR,
) -> ObservationSet:
    """Refine ordered edge pixels to sub-pixel observations.

    For each pixel the gradient magnitude is sampled one pixel either side
    along the unit gradient direction (bilinear) and the parabola vertex gives
    the offset.  Pixels with zero gradient or without a central maximum along
    that line are skipped and counted.  Parameters are t(i) = i/M over the
    survivors.
    """
    if not ordered:
        raise NoEdgesError("no ordered edge pixels")
    mag = field.magnitude()
    h, w = mag.shape
    kept = []
    skipped = 0
    for ix, iy in ordered:
        gx = float(field.hx[iy, ix])
        gy = float(field.hy[iy, ix])
        m0 = float(mag[iy, ix])
        if m0 == 0.0:
            skipped += 1
            continue
        ux, uy = gx / m0, gy / m0
        m_plus = _bilinear(mag, ix + ux, iy + uy)
        m_minus = _bilinear(mag, ix - ux, iy - uy)
        if m0 < m_minus or m0 < m_plus:
            skipped += 1
            continue
        delta = subpixel_offset(m_minus, m0, m_plus)
        sigma_x2 = field.sigma_h**2 / m0**2 + floor**2
        kept.append((ix + delta * ux, iy + delta * uy, gx, gy, sigma_x2, ix, iy))
    if not kept:
        raise NoEdgesError(f"all {skipped} edge pixels were rejected during refinement")
    m = len(kept)
    obs = tuple(
        EdgeObservation(x=x, y=y, gx=gx, gy=gy, sigma_x2=s2, t=i / m, ix=ix, iy=iy)
        for i, (x, y, gx, gy, s2, ix, iy) in enumerate(kept)
    )
    return ObservationSet(observations=obs, closed=closed, skipped=skipped, sigma_h=field.sigma_h)
