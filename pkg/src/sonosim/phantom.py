"""Randomized scatterer phantoms with hyper/hypoechoic lesions.

A phantom is a box of point scatterers with standard-normal base
reflectivity. Lesions are spherical or ellipsoidal regions whose
scatterer amplitudes are multiplied by a class-dependent factor:
an integer k >= 1 for hyperechoic lesions, a fraction 0 < l < 1 for
hypoechoic ones. Ground truth masks mark hypoechoic lesions only.

Coordinates are mm: x lateral (centered on the transducer axis),
y elevational (centered on the imaging plane), z axial measured from
the transducer face. The box spans [-lateral/2, lateral/2] x
[-elevational/2, elevational/2] x [standoff, standoff + axial].
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .errors import GeometryInfeasible
from .grid import ImageGrid, MaskImage

HYPER = "hyperechoic"
HYPO = "hypoechoic"

_PLACEMENT_ATTEMPTS = 1000


@dataclass(frozen=True)
class LesionPolicy:
    """Random-lesion generation policy.

    ``class_mix`` gives the probabilities of drawing a hyper-only,
    hypo-only, or hyper+hypo image. ``count_per_class`` is an inclusive
    integer range of lesions per drawn class. ``radius_range`` bounds
    the per-axis radii (mm); ``hyper_k_range`` is an inclusive integer
    range and ``hypo_l_range`` an interval inside (0, 1) for the
    amplitude scale factors. ``margin`` is the distance (mm) a lesion
    must keep from the axial and lateral phantom faces.
    """

    class_mix: tuple[float, float, float] = (1 / 3, 1 / 3, 1 / 3)
    count_per_class: tuple[int, int] = (1, 1)
    circle_probability: float = 0.5
    radius_range: tuple[float, float] = (3.0, 12.0)
    hyper_k_range: tuple[int, int] = (1, 10)
    hypo_l_range: tuple[float, float] = (0.0, 1.0)
    margin: float = 2.0

    def __post_init__(self):
        if abs(sum(self.class_mix) - 1.0) > 1e-9 or min(self.class_mix) < 0:
            raise ValueError("class_mix must be a probability vector")
        if self.count_per_class[0] < 0 or self.count_per_class[0] > self.count_per_class[1]:
            raise ValueError("count_per_class must be a nonnegative ordered range")
        if not 0.0 <= self.circle_probability <= 1.0:
            raise ValueError("circle_probability must be in [0, 1]")
        if self.radius_range[0] <= 0 or self.radius_range[0] > self.radius_range[1]:
            raise ValueError("radius_range must be positive and ordered")
        if self.hyper_k_range[0] < 1 or self.hyper_k_range[0] > self.hyper_k_range[1]:
            raise ValueError("hyper_k_range must be integers >= 1")
        if not (0.0 <= self.hypo_l_range[0] <= self.hypo_l_range[1] <= 1.0):
            raise ValueError("hypo_l_range must lie inside (0, 1)")
        if self.margin < 0:
            raise ValueError("margin must be nonnegative")


@dataclass(frozen=True)
class PhantomConfig:
    """Geometry and scatterer density of the virtual phantom."""

    axial_extent: float = 60.0
    lateral_extent: float = 40.0
    elevational_extent: float = 10.0
    standoff: float = 30.0
    scatterer_density: float = 4.0
    lesion_policy: LesionPolicy = field(default_factory=LesionPolicy)

    def __post_init__(self):
        if min(self.axial_extent, self.lateral_extent, self.elevational_extent) <= 0:
            raise ValueError("all extents must be positive")
        if self.standoff < 0:
            raise ValueError("standoff must be nonnegative")
        if self.scatterer_density <= 0:
            raise ValueError("scatterer_density must be positive")

    @property
    def volume(self) -> float:
        return self.axial_extent * self.lateral_extent * self.elevational_extent

    def box(self) -> tuple[np.ndarray, np.ndarray]:
        """(low, high) corners of the phantom box in (x, y, z) mm."""
        low = np.array(
            [-self.lateral_extent / 2.0, -self.elevational_extent / 2.0, self.standoff]
        )
        high = np.array(
            [
                self.lateral_extent / 2.0,
                self.elevational_extent / 2.0,
                self.standoff + self.axial_extent,
            ]
        )
        return low, high


@dataclass(frozen=True)
class LesionSpec:
    """One placed lesion: class, geometry, and amplitude scale factor."""

    echogenicity: str
    shape: str
    center: tuple[float, float, float]
    radii: tuple[float, float, float]
    scale: float

    def __post_init__(self):
        if self.echogenicity not in (HYPER, HYPO):
            raise ValueError(f"unknown echogenicity {self.echogenicity!r}")
        if self.shape not in ("circle", "ellipsoid"):
            raise ValueError(f"unknown shape {self.shape!r}")
        if self.shape == "circle" and len(set(self.radii)) != 1:
            raise ValueError("circle lesions must have equal radii")
        if min(self.radii) <= 0:
            raise ValueError("radii must be positive")
        if self.echogenicity == HYPER:
            if self.scale != int(self.scale) or self.scale < 1:
                raise ValueError("hyperechoic scale must be an integer >= 1")
        elif not 0.0 < self.scale < 1.0:
            raise ValueError("hypoechoic scale must lie in (0, 1)")

    def to_dict(self) -> dict:
        return {
            "echogenicity": self.echogenicity,
            "shape": self.shape,
            "center": list(self.center),
            "radii": list(self.radii),
            "scale": self.scale,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "LesionSpec":
        return cls(
            echogenicity=d["echogenicity"],
            shape=d["shape"],
            center=tuple(d["center"]),
            radii=tuple(d["radii"]),
            scale=d["scale"],
        )


@dataclass
class Phantom:
    """Scatterer cloud plus the lesion specs that shaped it."""

    config: PhantomConfig
    lesions: list[LesionSpec]
    positions: np.ndarray
    amplitudes: np.ndarray


def _inside(positions: np.ndarray, lesion: LesionSpec) -> np.ndarray:
    """Boolean mask of positions inside the (closed) lesion ellipsoid."""
    cx, cy, cz = lesion.center
    rx, ry, rz = lesion.radii
    x, y, z = positions[:, 0], positions[:, 1], positions[:, 2]
    q = ((x - cx) / rx) ** 2 + ((y - cy) / ry) ** 2 + ((z - cz) / rz) ** 2
    return q <= 1.0


def _fits(center: np.ndarray, radii: np.ndarray, cfg: PhantomConfig) -> bool:
    # Margin applies to the axial and lateral faces. Elevationally the
    # lesion only has to fit inside the slab: the default 3-12 mm radius
    # range otherwise could never satisfy a 2 mm margin in a 10 mm slab.
    low, high = cfg.box()
    margin = cfg.lesion_policy.margin
    m = np.array([margin, 0.0, margin])
    return bool(np.all(center - radii >= low + m) and np.all(center + radii <= high - m))


def _draw_scale(rng: np.random.Generator, echogenicity: str, policy: LesionPolicy) -> float:
    if echogenicity == HYPER:
        lo, hi = policy.hyper_k_range
        return float(rng.integers(lo, hi + 1))
    lo, hi = policy.hypo_l_range
    value = rng.uniform(lo, hi)
    while not 0.0 < value < 1.0:  # open-interval endpoints are excluded
        value = rng.uniform(lo, hi)
    return float(value)


def sample_lesions(rng: np.random.Generator, cfg: PhantomConfig) -> list[LesionSpec]:
    """Draw an image's lesion set: classes, shapes, sizes, placements.

    Placement is rejection sampling: shape, radii, and center are
    redrawn until the lesion fits the margin constraints, up to a
    bounded number of attempts per lesion.

    Raises GeometryInfeasible when no placement is found.
    """
    policy = cfg.lesion_policy
    low, high = cfg.box()

    u = rng.random()
    p_hyper, p_hypo, _ = policy.class_mix
    if u < p_hyper:
        classes = [HYPER]
    elif u < p_hyper + p_hypo:
        classes = [HYPO]
    else:
        classes = [HYPER, HYPO]

    lesions: list[LesionSpec] = []
    for echogenicity in classes:
        lo_n, hi_n = policy.count_per_class
        count = int(rng.integers(lo_n, hi_n + 1))
        for _ in range(count):
            scale = _draw_scale(rng, echogenicity, policy)
            for _attempt in range(_PLACEMENT_ATTEMPTS):
                is_circle = rng.random() < policy.circle_probability
                if is_circle:
                    r = rng.uniform(*policy.radius_range)
                    radii = np.array([r, r, r])
                else:
                    radii = rng.uniform(*policy.radius_range, size=3)
                center = rng.uniform(low, high)
                if _fits(center, radii, cfg):
                    lesions.append(
                        LesionSpec(
                            echogenicity=echogenicity,
                            shape="circle" if is_circle else "ellipsoid",
                            center=tuple(float(v) for v in center),
                            radii=tuple(float(v) for v in radii),
                            scale=scale,
                        )
                    )
                    break
            else:
                raise GeometryInfeasible(
                    f"no valid placement for a {echogenicity} lesion in "
                    f"{_PLACEMENT_ATTEMPTS} attempts (radius range "
                    f"{policy.radius_range} too large for the phantom)"
                )
    return lesions


def apply_lesion_scaling(
    positions: np.ndarray,
    base_amplitudes: np.ndarray,
    lesions: list[LesionSpec],
    scaling: str = "amplitude",
) -> np.ndarray:
    """Scale scatterer amplitudes by their containing lesion's factor.

    Where lesions overlap, the later-sampled lesion wins. Scatterers
    outside every lesion keep their base amplitude. ``scaling="power"``
    applies sqrt(factor) so echo *power* scales by the factor instead.
    """
    if len(positions) != len(base_amplitudes):
        raise ValueError("positions and base_amplitudes must have equal length")
    if scaling not in ("amplitude", "power"):
        raise ValueError(f"unknown scaling mode {scaling!r}")
    scale = np.ones(len(base_amplitudes))
    for lesion in lesions:
        factor = lesion.scale if scaling == "amplitude" else math.sqrt(lesion.scale)
        scale[_inside(positions, lesion)] = factor
    return base_amplitudes * scale


def generate_phantom(
    rng: np.random.Generator, cfg: PhantomConfig, intensity_scaling: str = "amplitude"
) -> Phantom:
    """Generate a phantom: lesions, uniform positions, scaled amplitudes.

    The scatterer count is fixed at round(density * volume), positions
    are i.i.d. uniform in the box, and base amplitudes i.i.d. standard
    normal, so the result is a pure function of (rng state, cfg).
    """
    lesions = sample_lesions(rng, cfg)
    n = int(round(cfg.scatterer_density * cfg.volume))
    low, high = cfg.box()
    positions = rng.uniform(low, high, size=(n, 3))
    base = rng.standard_normal(n)
    amplitudes = apply_lesion_scaling(positions, base, lesions, scaling=intensity_scaling)
    return Phantom(config=cfg, lesions=lesions, positions=positions, amplitudes=amplitudes)


def rasterize_mask(lesions: list[LesionSpec], grid: ImageGrid) -> MaskImage:
    """Rasterize hypoechoic lesions on the elevational midplane.

    A pixel is 1 iff its center lies inside the y=0 cross-section of
    any hypoechoic lesion; hyperechoic lesions contribute nothing.
    """
    mask = np.zeros((grid.height, grid.width), dtype=np.uint8)
    z = grid.axial_coords()[:, None]
    x = grid.lateral_coords()[None, :]
    for lesion in lesions:
        if lesion.echogenicity != HYPO:
            continue
        cx, cy, cz = lesion.center
        rx, ry, rz = lesion.radii
        q = ((x - cx) / rx) ** 2 + ((0.0 - cy) / ry) ** 2 + ((z - cz) / rz) ** 2
        mask[q <= 1.0] = 1
    return MaskImage(pixels=mask, grid=grid)
