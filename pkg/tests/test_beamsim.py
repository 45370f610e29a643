import numpy as np
import pytest

from sonosim.beamsim import (
    AcousticConfig,
    RfFrame,
    envelope_detect,
    line_positions,
    log_compress,
    n_rf_samples,
    pulse_waveform,
    read_rf,
    scan_convert,
    simulate_image,
    synthesize_rf,
    write_rf,
)
from sonosim.errors import GridOutOfBounds
from sonosim.grid import ImageGrid, default_grid
from sonosim.phantom import LesionPolicy, Phantom, PhantomConfig, generate_phantom


def single_scatterer(x, y, z, amp=1.0, cfg=None):
    cfg = cfg or PhantomConfig()
    return Phantom(
        config=cfg,
        lesions=[],
        positions=np.array([[x, y, z]], dtype=float),
        amplitudes=np.array([amp], dtype=float),
    )


def test_pulse_peaks_at_one_at_center():
    pulse = pulse_waveform(AcousticConfig())
    center = (len(pulse) - 1) // 2
    assert pulse[center] == 1.0
    assert np.argmax(pulse) == center


def test_pulse_spectrum_peaks_at_center_frequency():
    cfg = AcousticConfig()
    pulse = pulse_waveform(cfg)
    n = 1 << 16
    spectrum = np.abs(np.fft.rfft(pulse, n))
    freqs = np.fft.rfftfreq(n, 1.0 / cfg.sampling_frequency)
    peak = freqs[np.argmax(spectrum)]
    bin_width = freqs[1] - freqs[0]
    assert abs(peak - cfg.center_frequency) <= bin_width


def _support(pulse):
    above = np.flatnonzero(np.abs(pulse) >= 0.01 * np.abs(pulse).max())
    return above[-1] - above[0] + 1


def test_doubling_bandwidth_roughly_halves_support():
    narrow = _support(pulse_waveform(AcousticConfig(fractional_bandwidth=0.4)))
    wide = _support(pulse_waveform(AcousticConfig(fractional_bandwidth=0.8)))
    ratio = narrow / wide
    assert abs(ratio - 2.0) <= 0.4  # inverse proportionality within 20%


def test_time_of_flight_on_axis():
    cfg = AcousticConfig()
    lines, _ = line_positions(cfg, 40.0)
    phantom = single_scatterer(lines[10], 0.0, 30.0)
    env = envelope_detect(synthesize_rf(phantom, cfg))
    line, sample = np.unravel_index(np.argmax(env), env.shape)
    assert line == 10
    expected = round(2 * 0.030 / 1540.0 * 100e6)
    assert expected == 3896
    half_width = (len(pulse_waveform(cfg)) - 1) // 2
    assert abs(sample - expected) <= half_width


def test_empty_phantom_gives_zero_rf():
    phantom = Phantom(
        config=PhantomConfig(),
        lesions=[],
        positions=np.empty((0, 3)),
        amplitudes=np.empty(0),
    )
    rf = synthesize_rf(phantom, AcousticConfig())
    assert not rf.samples.any()


def test_rf_is_exactly_linear_in_amplitudes():
    cfg = PhantomConfig(scatterer_density=0.05)
    phantom = generate_phantom(np.random.default_rng(3), cfg)
    doubled = Phantom(
        config=cfg,
        lesions=phantom.lesions,
        positions=phantom.positions,
        amplitudes=2.0 * phantom.amplitudes,
    )
    acfg = AcousticConfig()
    rf1 = synthesize_rf(phantom, acfg).samples
    rf2 = synthesize_rf(doubled, acfg).samples
    assert np.array_equal(rf2, 2.0 * rf1)


def test_frame_long_enough_for_deepest_echo():
    pcfg = PhantomConfig()
    acfg = AcousticConfig()
    rf = synthesize_rf(single_scatterer(0.0, 0.0, 89.0, cfg=pcfg), acfg)
    depth_m = (pcfg.standoff + pcfg.axial_extent) * 1e-3
    assert rf.samples.shape[1] >= round(
        2 * depth_m / acfg.sound_speed * acfg.sampling_frequency
    )


def test_envelope_recovers_cosine_amplitude():
    cfg = AcousticConfig()
    n = 4000
    t = np.arange(n) / cfg.sampling_frequency
    amp = 0.7
    rf = RfFrame(
        samples=(amp * np.cos(2 * np.pi * cfg.center_frequency * t))[None, :],
        config=cfg,
        line_pitch=1.0,
    )
    env = envelope_detect(rf)[0]
    interior = env[n // 5 : -n // 5]
    assert np.allclose(interior, amp, rtol=0.02)


def test_envelope_of_zero_line_is_zero():
    cfg = AcousticConfig()
    rf = RfFrame(samples=np.zeros((2, 512)), config=cfg, line_pitch=1.0)
    assert not envelope_detect(rf).any()


def test_envelope_sign_symmetry():
    cfg = AcousticConfig()
    rng = np.random.default_rng(0)
    samples = rng.normal(size=(3, 256))
    a = envelope_detect(RfFrame(samples=samples, config=cfg, line_pitch=1.0))
    b = envelope_detect(RfFrame(samples=-samples, config=cfg, line_pitch=1.0))
    assert np.array_equal(a, b)


def test_log_compress_fixed_points():
    env = np.array([[1.0, 10 ** (-60 / 20.0), 10 ** (-60 / 40.0), 0.0]])
    out = log_compress(env, 60.0)
    assert out[0, 0] == 1.0
    assert out[0, 1] == pytest.approx(0.0, abs=1e-12)
    assert out[0, 2] == pytest.approx(0.5)
    assert out[0, 3] == 0.0


def test_log_compress_is_monotone_and_spans_unit_interval():
    rng = np.random.default_rng(1)
    env = np.sort(rng.uniform(0, 5.0, size=1000))
    out = log_compress(env[None, :], 60.0)[0]
    assert (np.diff(out) >= 0).all()
    assert out.min() >= 0.0 and out.max() == 1.0


def test_log_compress_zero_frame():
    assert not log_compress(np.zeros((3, 4)), 60.0).any()


def _exact_lattice_setup():
    # fs = 2000 * c makes the depth per sample exactly 0.25 mm, so grid
    # coordinates land exactly on sample indices in float arithmetic.
    cfg = AcousticConfig(
        n_lines=16, center_frequency=1e6, sampling_frequency=3.08e6, sound_speed=1540.0
    )
    assert cfg.depth_per_sample_mm == 0.25
    rng = np.random.default_rng(9)
    compressed = rng.uniform(size=(16, 373))
    rf = RfFrame(samples=compressed, config=cfg, line_pitch=2.0)
    return cfg, compressed, rf


def test_scan_convert_identity_on_lattice_points():
    _, compressed, rf = _exact_lattice_setup()
    grid = ImageGrid(
        height=8,
        width=8,
        axial_spacing=0.25,
        lateral_spacing=2.0,
        origin_axial=32.0,
        origin_lateral=-9.0,
    )
    out = scan_convert(compressed, rf, grid).pixels
    # lines 3..10 (pitch 2 from -15), samples 128..135 (0.25 mm each)
    expected = compressed[3:11, 128:136].T
    assert np.array_equal(out, expected)


def test_scan_convert_constant_frame():
    _, compressed, rf = _exact_lattice_setup()
    const = np.full_like(compressed, 0.37)
    grid = ImageGrid(8, 8, 0.1, 1.0, 40.0, -5.0)
    out = scan_convert(const, rf, grid).pixels
    assert np.allclose(out, 0.37)


def test_scan_convert_rejects_grid_outside_frame():
    _, compressed, rf = _exact_lattice_setup()
    too_deep = ImageGrid(8, 8, 0.25, 2.0, 95.0, -9.0)
    with pytest.raises(GridOutOfBounds):
        scan_convert(compressed, rf, too_deep)
    too_wide = ImageGrid(8, 8, 0.25, 4.0, 32.0, -17.0)
    with pytest.raises(GridOutOfBounds):
        scan_convert(compressed, rf, too_wide)


def test_bright_point_lands_on_matching_pixel():
    pcfg = PhantomConfig()
    acfg = AcousticConfig()
    lines, _ = line_positions(acfg, pcfg.lateral_extent)
    x0, z0 = float(lines[30]), 50.0
    phantom = single_scatterer(x0, 0.0, z0, cfg=pcfg)
    rf = synthesize_rf(phantom, acfg)
    compressed = log_compress(envelope_detect(rf), acfg.dynamic_range_db)
    grid = default_grid(pcfg)
    image = scan_convert(compressed, rf, grid).pixels
    i, j = np.unravel_index(np.argmax(image), image.shape)
    z_pix = grid.origin_axial + i * grid.axial_spacing
    x_pix = grid.origin_lateral + j * grid.lateral_spacing
    assert abs(z_pix - z0) <= grid.axial_spacing
    assert abs(x_pix - x0) <= grid.lateral_spacing


def test_simulate_image_is_deterministic():
    pcfg = PhantomConfig(
        axial_extent=20.0,
        lateral_extent=16.0,
        elevational_extent=8.0,
        standoff=10.0,
        scatterer_density=1.0,
        lesion_policy=LesionPolicy(radius_range=(2.0, 3.0), margin=1.0),
    )
    acfg = AcousticConfig()
    grid = default_grid(pcfg, height=64, width=48)
    img1, mask1, lesions1 = simulate_image(42, pcfg, acfg, grid)
    img2, mask2, lesions2 = simulate_image(42, pcfg, acfg, grid)
    assert np.array_equal(img1.pixels, img2.pixels)
    assert np.array_equal(mask1.pixels, mask2.pixels)
    assert lesions1 == lesions2
    assert img1.pixels.min() >= 0.0 and img1.pixels.max() <= 1.0


def test_hypo_contrast_increases_with_scale():
    base = dict(class_mix=(0.0, 1.0, 0.0), circle_probability=1.0, radius_range=(4.0, 5.0))
    means = []
    for l in (0.1, 0.4, 0.8):
        policy = LesionPolicy(hypo_l_range=(l, l), **base)
        pcfg = PhantomConfig(lesion_policy=policy)
        grid = default_grid(pcfg, height=128, width=96)
        img, mask, _ = simulate_image(5, pcfg, AcousticConfig(), grid)
        assert mask.pixels.any()
        means.append(float(img.pixels[mask.pixels.astype(bool)].mean()))
    assert means[0] < means[1] < means[2]


def test_acoustic_config_validation():
    with pytest.raises(ValueError):
        AcousticConfig(sampling_frequency=1e6)
    with pytest.raises(ValueError):
        AcousticConfig(n_lines=0)
    with pytest.raises(ValueError):
        AcousticConfig(dynamic_range_db=0)


def test_rf_dump_round_trip(tmp_path):
    cfg = AcousticConfig()
    rng = np.random.default_rng(2)
    frame = RfFrame(samples=rng.normal(size=(4, 64)), config=cfg, line_pitch=0.5)
    path = tmp_path / "frame.rf"
    write_rf(frame, path)
    assert path.stat().st_size == 32 + 4 * 64 * 4
    data, fs, c = read_rf(path)
    assert fs == cfg.sampling_frequency and c == cfg.sound_speed
    assert np.allclose(data, frame.samples, atol=1e-6)
