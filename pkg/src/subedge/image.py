"""Grayscale image container used throughout the pipeline."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np


@dataclass(frozen=True, eq=False)
class GrayImage:
    """Row-major 2D intensity grid.

    Nominal range is [0, 1]; synthetic noise may push values outside it and
    the gradient machinery tolerates that (clipping would bias the noise
    model).  Values must be finite.
    """

    data: np.ndarray

    def __post_init__(self):
        data = np.asarray(self.data, dtype=np.float64)
        if data.ndim != 2:
            raise ValueError("image data must be 2D")
        if not np.all(np.isfinite(data)):
            raise ValueError("image data must be finite")
        object.__setattr__(self, "data", data)

    @property
    def width(self) -> int:
        return self.data.shape[1]

    @property
    def height(self) -> int:
        return self.data.shape[0]

    def clipped(self) -> "GrayImage":
        return GrayImage(np.clip(self.data, 0.0, 1.0))
