import numpy as np
import pytest

from sonosim.errors import GeometryInfeasible
from sonosim.grid import ImageGrid
from sonosim.phantom import (
    HYPER,
    HYPO,
    LesionPolicy,
    LesionSpec,
    PhantomConfig,
    apply_lesion_scaling,
    generate_phantom,
    rasterize_mask,
    sample_lesions,
)

HYPER_ONLY = LesionPolicy(class_mix=(1.0, 0.0, 0.0))
HYPO_ONLY = LesionPolicy(class_mix=(0.0, 1.0, 0.0))


def test_default_scatterer_count_is_density_times_volume():
    ph = generate_phantom(np.random.default_rng(0), PhantomConfig())
    assert len(ph.positions) == 96000  # 4 per mm^3 * 60*40*10 mm^3
    assert len(ph.amplitudes) == 96000


def test_low_density_scatterer_count():
    cfg = PhantomConfig(scatterer_density=0.001)
    ph = generate_phantom(np.random.default_rng(0), cfg)
    assert len(ph.positions) == 24  # round(0.001 * 24000)


def test_count_per_mm3_exact_for_various_densities():
    for density in (0.5, 2.0, 4.0):
        cfg = PhantomConfig(scatterer_density=density)
        ph = generate_phantom(np.random.default_rng(1), cfg)
        assert len(ph.positions) / cfg.volume == density


def test_same_seed_is_bit_identical():
    cfg = PhantomConfig()
    a = generate_phantom(np.random.default_rng(123), cfg)
    b = generate_phantom(np.random.default_rng(123), cfg)
    assert np.array_equal(a.positions, b.positions)
    assert np.array_equal(a.amplitudes, b.amplitudes)
    assert a.lesions == b.lesions


def test_positions_stay_inside_box():
    cfg = PhantomConfig()
    ph = generate_phantom(np.random.default_rng(7), cfg)
    low, high = cfg.box()
    assert (ph.positions >= low).all()
    assert (ph.positions <= high).all()
    assert np.isfinite(ph.amplitudes).all()


def test_hyper_only_draw_has_integer_scale():
    cfg = PhantomConfig(lesion_policy=HYPER_ONLY)
    for seed in range(5):
        lesions = sample_lesions(np.random.default_rng(seed), cfg)
        assert len(lesions) == 1
        (lesion,) = lesions
        assert lesion.echogenicity == HYPER
        assert lesion.scale == int(lesion.scale)
        assert 1 <= lesion.scale <= 10


def test_hypo_only_draw_has_fractional_scale():
    cfg = PhantomConfig(lesion_policy=HYPO_ONLY)
    for seed in range(5):
        (lesion,) = sample_lesions(np.random.default_rng(seed), cfg)
        assert lesion.echogenicity == HYPO
        assert 0.0 < lesion.scale < 1.0


def test_both_classes_draw_produces_one_of_each():
    cfg = PhantomConfig(lesion_policy=LesionPolicy(class_mix=(0.0, 0.0, 1.0)))
    lesions = sample_lesions(np.random.default_rng(3), cfg)
    assert [l.echogenicity for l in lesions] == [HYPER, HYPO]


def test_oversized_radius_range_is_infeasible():
    policy = LesionPolicy(class_mix=(1.0, 0.0, 0.0), radius_range=(30.0, 40.0))
    cfg = PhantomConfig(lesion_policy=policy)
    with pytest.raises(GeometryInfeasible):
        sample_lesions(np.random.default_rng(0), cfg)


def test_lesions_respect_margins():
    cfg = PhantomConfig()
    low, high = cfg.box()
    margin = cfg.lesion_policy.margin
    for seed in range(20):
        for lesion in sample_lesions(np.random.default_rng(seed), cfg):
            c = np.array(lesion.center)
            r = np.array(lesion.radii)
            m = np.array([margin, 0.0, margin])
            assert (c - r >= low + m).all()
            assert (c + r <= high - m).all()
            if lesion.shape == "circle":
                assert lesion.radii[0] == lesion.radii[1] == lesion.radii[2]


def _lesion(echo, scale, center=(0.0, 0.0, 60.0), radii=(5.0, 5.0, 5.0), shape="circle"):
    return LesionSpec(echogenicity=echo, shape=shape, center=center, radii=radii, scale=scale)


def test_scaling_inside_hypo_lesion():
    positions = np.array([[0.0, 0.0, 60.0]])
    out = apply_lesion_scaling(positions, np.array([1.2]), [_lesion(HYPO, 0.5)])
    assert out[0] == pytest.approx(0.6)


def test_scaling_outside_any_lesion_unchanged():
    positions = np.array([[15.0, 0.0, 85.0]])
    out = apply_lesion_scaling(positions, np.array([1.2]), [_lesion(HYPO, 0.5)])
    assert out[0] == 1.2


def test_scaling_preserves_sign_for_hyper():
    positions = np.array([[0.0, 0.0, 60.0]])
    out = apply_lesion_scaling(positions, np.array([-0.8]), [_lesion(HYPER, 3)])
    assert out[0] == pytest.approx(-2.4)


def test_later_lesion_wins_on_overlap():
    positions = np.array([[0.0, 0.0, 60.0]])
    first = _lesion(HYPO, 0.5)
    second = _lesion(HYPO, 0.25, center=(1.0, 0.0, 60.0))
    out = apply_lesion_scaling(positions, np.array([1.0]), [first, second])
    assert out[0] == 0.25


def test_power_scaling_mode_uses_sqrt():
    positions = np.array([[0.0, 0.0, 60.0]])
    out = apply_lesion_scaling(positions, np.array([1.0]), [_lesion(HYPER, 4)], scaling="power")
    assert out[0] == pytest.approx(2.0)


def test_scaling_locality_exact_on_generated_phantom():
    cfg = PhantomConfig(lesion_policy=LesionPolicy(class_mix=(0.0, 0.0, 1.0)))
    rng = np.random.default_rng(11)
    ph = generate_phantom(rng, cfg)
    # reconstruct expected per-scatterer factors from the lesion list
    expected = np.ones(len(ph.positions))
    for lesion in ph.lesions:
        cx, cy, cz = lesion.center
        rx, ry, rz = lesion.radii
        x, y, z = ph.positions.T
        inside = ((x - cx) / rx) ** 2 + ((y - cy) / ry) ** 2 + ((z - cz) / rz) ** 2 <= 1.0
        expected[inside] = lesion.scale
    base = ph.amplitudes / expected
    assert np.array_equal(base * expected, ph.amplitudes)


def _mask_grid():
    return ImageGrid(
        height=200,
        width=200,
        axial_spacing=0.1,
        lateral_spacing=0.1,
        origin_axial=50.05,
        origin_lateral=-9.95,
    )


def test_hyper_only_mask_is_empty():
    mask = rasterize_mask([_lesion(HYPER, 5)], _mask_grid())
    assert mask.pixels.sum() == 0


def test_hypo_circle_mask_area_matches_geometry():
    mask = rasterize_mask([_lesion(HYPO, 0.5, center=(0.0, 0.0, 60.0))], _mask_grid())
    count = int(mask.pixels.sum())
    expected = np.pi * 50.0**2  # r = 5 mm = 50 px, area in 0.1 mm pixels
    assert abs(count - expected) <= 0.01 * expected


def test_off_midplane_lesion_leaves_empty_mask():
    lesion = _lesion(HYPO, 0.5, center=(0.0, 3.0, 60.0), radii=(5.0, 2.0, 5.0), shape="ellipsoid")
    mask = rasterize_mask([lesion], _mask_grid())
    assert mask.pixels.sum() == 0


def brute_force_mask(lesions, grid):
    out = np.zeros((grid.height, grid.width), dtype=np.uint8)
    for i in range(grid.height):
        z = grid.origin_axial + i * grid.axial_spacing
        for j in range(grid.width):
            x = grid.origin_lateral + j * grid.lateral_spacing
            for lesion in lesions:
                if lesion.echogenicity != HYPO:
                    continue
                cx, cy, cz = lesion.center
                rx, ry, rz = lesion.radii
                q = ((x - cx) / rx) ** 2 + ((0.0 - cy) / ry) ** 2 + ((z - cz) / rz) ** 2
                if q <= 1.0:
                    out[i, j] = 1
                    break
    return out


def test_mask_matches_brute_force_on_random_lesions():
    rng = np.random.default_rng(5)
    grid = ImageGrid(
        height=64,
        width=64,
        axial_spacing=0.9,
        lateral_spacing=0.6,
        origin_axial=30.4,
        origin_lateral=-19.7,
    )
    for _ in range(10):
        lesions = []
        for _ in range(rng.integers(1, 4)):
            echo = HYPO if rng.random() < 0.7 else HYPER
            lesions.append(
                LesionSpec(
                    echogenicity=echo,
                    shape="ellipsoid",
                    center=(
                        float(rng.uniform(-15, 15)),
                        float(rng.uniform(-2, 2)),
                        float(rng.uniform(35, 85)),
                    ),
                    radii=tuple(float(v) for v in rng.uniform(2, 9, size=3)),
                    scale=0.5 if echo == HYPO else 2,
                )
            )
        fast = rasterize_mask(lesions, grid).pixels
        assert np.array_equal(fast, brute_force_mask(lesions, grid))


def test_config_validation():
    with pytest.raises(ValueError):
        PhantomConfig(axial_extent=-1)
    with pytest.raises(ValueError):
        PhantomConfig(scatterer_density=0)
    with pytest.raises(ValueError):
        LesionPolicy(radius_range=(0.0, 5.0))
    with pytest.raises(ValueError):
        LesionPolicy(hyper_k_range=(0, 5))
    with pytest.raises(ValueError):
        LesionPolicy(class_mix=(0.5, 0.5, 0.5))
    with pytest.raises(ValueError):
        LesionSpec(HYPO, "circle", (0, 0, 60), (5.0, 5.0, 4.0), 0.5)
    with pytest.raises(ValueError):
        LesionSpec(HYPO, "circle", (0, 0, 60), (5.0, 5.0, 5.0), 1.5)
    with pytest.raises(ValueError):
        LesionSpec(HYPER, "circle", (0, 0, 60), (5.0, 5.0, 5.0), 2.5)


def test_lesion_spec_dict_round_trip():
    lesion = _lesion(HYPO, 0.25, shape="ellipsoid", radii=(4.0, 5.0, 6.0))
    assert LesionSpec.from_dict(lesion.to_dict()) == lesion
