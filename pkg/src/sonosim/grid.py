"""Pixel-grid and image containers shared by the simulation pipeline."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np


@dataclass(frozen=True)
class ImageGrid:
    """Rectangular pixel grid in phantom coordinates.

    Pixel ``(i, j)`` has its *center* at
    ``(origin_lateral + j * lateral_spacing, origin_axial + i * axial_spacing)``
    in (lateral, axial) mm. Row index runs along the axial (depth)
    direction, column index along the lateral direction.
    """

    height: int
    width: int
    axial_spacing: float
    lateral_spacing: float
    origin_axial: float
    origin_lateral: float

    def __post_init__(self):
        if self.height < 1 or self.width < 1:
            raise ValueError("grid must have at least one pixel per axis")
        if self.axial_spacing <= 0 or self.lateral_spacing <= 0:
            raise ValueError("pixel spacings must be positive")

    def axial_coords(self) -> np.ndarray:
        return self.origin_axial + np.arange(self.height) * self.axial_spacing

    def lateral_coords(self) -> np.ndarray:
        return self.origin_lateral + np.arange(self.width) * self.lateral_spacing


@dataclass
class BModeImage:
    """Log-compressed, scan-converted grayscale image with values in [0, 1]."""

    pixels: np.ndarray
    grid: ImageGrid


@dataclass
class MaskImage:
    """Binary lesion mask registered to the same grid as its B-mode image."""

    pixels: np.ndarray
    grid: ImageGrid


def default_grid(phantom_cfg, height: int = 512, width: int = 340) -> ImageGrid:
    """Grid tiling the imaged axial/lateral plane of ``phantom_cfg``.

    Pixel centers are offset half a spacing from the region edges so the
    ``height x width`` cells exactly cover standoff..standoff+axial by the
    centered lateral extent.
    """
    dz = phantom_cfg.axial_extent / height
    dx = phantom_cfg.lateral_extent / width
    return ImageGrid(
        height=height,
        width=width,
        axial_spacing=dz,
        lateral_spacing=dx,
        origin_axial=phantom_cfg.standoff + dz / 2.0,
        origin_lateral=-phantom_cfg.lateral_extent / 2.0 + dx / 2.0,
    )
