import numpy as np
import pytest

from progct import ctsim
from progct.ctsim import DoseParams, Ellipse, PhantomSpec


def test_empty_spec_gives_zero_image():
    img = ctsim.make_phantom(PhantomSpec(ellipses=[], size=32))
    assert img.shape == (32, 32)
    assert np.all(img == 0.0)


def test_centered_disk_membership():
    n = 64
    img = ctsim.make_phantom(PhantomSpec([Ellipse(0, 0, 0.5, 0.5, 0, 1.0)], size=n))
    assert img[n // 2, n // 2] == 1.0
    assert img[1, 1] == 0.0


def test_phantom_deterministic_per_seed():
    spec = ctsim.default_body_spec(48)
    a = ctsim.make_phantom(spec, seed=9)
    b = ctsim.make_phantom(spec, seed=9)
    c = ctsim.make_phantom(spec, seed=10)
    assert np.array_equal(a, b)
    assert not np.array_equal(a, c)


def test_phantom_respects_max_value():
    spec = PhantomSpec([Ellipse(0, 0, 0.5, 0.5, 0, 3.0)], size=16, max_value=2.0)
    assert ctsim.make_phantom(spec).max() == 2.0


# ---------------------------------------------------------------------------
# radon


def test_radon_zero_image():
    s = ctsim.radon(np.zeros((32, 32)), n_views=10)
    assert s.mode == "line_integral"
    assert np.all(s.values == 0.0)


def test_radon_rejects_bad_geometry():
    with pytest.raises(ctsim.GeometryError, match="square"):
        ctsim.radon(np.zeros((8, 9)), n_views=4)
    with pytest.raises(ctsim.GeometryError, match="n_views"):
        ctsim.radon(np.zeros((8, 8)), n_views=0)
    with pytest.raises(ctsim.GeometryError, match="minimum"):
        ctsim.radon(np.zeros((64, 64)), n_views=4, n_det=32)


def test_radon_disk_chord_readings():
    n = 128
    r = 0.4
    img = ctsim.make_phantom(PhantomSpec([Ellipse(0, 0, r, r, 0, 1.0)], size=n))
    s = ctsim.radon(img, n_views=12)
    r_pix = r * n / 2.0
    central = s.values[:, s.n_det // 2]
    assert np.all(np.abs(central - 2.0 * r_pix) <= 2.0)


def test_radon_mass_conservation_per_view():
    img = ctsim.make_phantom(ctsim.default_body_spec(96), seed=3)
    s = ctsim.radon(img, n_views=16)
    mass = img.sum() * s.det_spacing
    sums = s.values.sum(axis=1)
    assert np.max(np.abs(sums - mass)) / mass <= 1e-2


# ---------------------------------------------------------------------------
# fbp


def test_fbp_zero_sinogram():
    s = ctsim.radon(np.zeros((32, 32)), n_views=8)
    assert np.all(ctsim.fbp(s) == 0.0)


def test_fbp_rejects_count_mode():
    s = ctsim.Sinogram(values=np.ones((4, 46)), mode="counts", image_size=32)
    with pytest.raises(ctsim.SinogramModeError):
        ctsim.fbp(s)


def test_fbp_linearity():
    img = ctsim.make_phantom(ctsim.default_body_spec(64), seed=1)
    s = ctsim.radon(img, n_views=32)
    base = ctsim.fbp(s)
    scaled = ctsim.fbp(ctsim.Sinogram(values=2.5 * s.values, mode="line_integral",
                                      image_size=s.image_size))
    assert np.max(np.abs(scaled - 2.5 * base)) <= 1e-10


def test_fbp_reconstruction_error_below_frozen_baseline():
    # reference run: RMSE 0.0389 at 256^2 with 360 views; the smaller grid
    # here tracks the same pipeline with a proportionate frozen bound
    phantom = ctsim.make_phantom(ctsim.shepp_logan_like(128))
    recon = ctsim.fbp(ctsim.radon(phantom, n_views=180))
    rmse = float(np.sqrt(np.mean((recon - phantom) ** 2)))
    assert rmse < 0.055


# ---------------------------------------------------------------------------
# poisson noise


def test_noise_requires_line_integrals_and_valid_dose():
    s = ctsim.Sinogram(values=np.ones((2, 46)), mode="counts", image_size=32)
    with pytest.raises(ctsim.SinogramModeError):
        ctsim.insert_poisson_noise(s, DoseParams(), seed=0)
    with pytest.raises(ValueError):
        DoseParams(i0=-5.0)
    with pytest.raises(ValueError):
        DoseParams(dose_factor=0.0)
    line = ctsim.Sinogram(values=np.ones((2, 46)), mode="line_integral", image_size=32)
    with pytest.raises(ValueError, match=">= 1"):
        ctsim.insert_poisson_noise(line, DoseParams(i0=2.0, dose_factor=0.25), seed=0)


def test_noise_deterministic_per_seed():
    s = ctsim.Sinogram(values=np.full((4, 46), 2.0), mode="line_integral", image_size=32)
    a = ctsim.insert_poisson_noise(s, DoseParams(), seed=11)
    b = ctsim.insert_poisson_noise(s, DoseParams(), seed=11)
    c = ctsim.insert_poisson_noise(s, DoseParams(), seed=12)
    assert np.array_equal(a.values, b.values)
    assert not np.array_equal(a.values, c.values)


def test_mean_counts_quarter_dose_monte_carlo():
    # p=0 bins, dose 0.25 of I0=1e5: mean counts should be 25000 within 1%
    s = ctsim.Sinogram(values=np.zeros((1, 100_000)), mode="line_integral", image_size=32)
    noisy = ctsim.insert_poisson_noise(s, DoseParams(i0=1e5, dose_factor=0.25), seed=0)
    counts = 0.25 * 1e5 * np.exp(-noisy.values)
    assert abs(counts.mean() - 25_000.0) / 25_000.0 <= 0.01


def test_log_variance_scales_inverse_with_flux():
    p = 1.0
    s = ctsim.Sinogram(values=np.full((1, 200_000), p), mode="line_integral", image_size=32)
    var1 = ctsim.insert_poisson_noise(s, DoseParams(i0=1e4), seed=1).values.var()
    var2 = ctsim.insert_poisson_noise(s, DoseParams(i0=2e4), seed=2).values.var()
    assert abs(var1 / var2 - 2.0) <= 0.2  # doubling I0 halves variance within 10%


def test_quarter_dose_variance_is_four_times_normal():
    p = 1.5
    s = ctsim.Sinogram(values=np.full((1, 200_000), p), mode="line_integral", image_size=32)
    var_nd = ctsim.insert_poisson_noise(s, DoseParams(i0=1e5, dose_factor=1.0), seed=3).values.var()
    var_ld = ctsim.insert_poisson_noise(s, DoseParams(i0=1e5, dose_factor=0.25), seed=4).values.var()
    assert abs(var_ld / var_nd - 4.0) <= 0.6  # within 15%


def test_clamp_counter_fires_on_starved_bins():
    s = ctsim.Sinogram(values=np.full((1, 1000), 12.0), mode="line_integral", image_size=32)
    noisy = ctsim.insert_poisson_noise(s, DoseParams(i0=10.0, dose_factor=1.0), seed=5)
    assert noisy.clamped_bins > 0
    assert np.isfinite(noisy.values).all()


# ---------------------------------------------------------------------------
# windows and pairing


def test_hu_window_endpoints_and_midpoint():
    img = np.array([-160.0, 240.0, 40.0, -500.0, 10_000.0])
    w = ctsim.hu_window(img, "abdomen")
    assert w[0] == 0.0 and w[1] == 1.0
    assert w[2] == pytest.approx(0.5)
    assert w[3] == 0.0 and w[4] == 1.0
    c = ctsim.hu_window(np.array([-1350.0, 150.0, -600.0]), "chest")
    assert c[0] == 0.0 and c[1] == 1.0 and c[2] == pytest.approx(0.5)
    with pytest.raises(ValueError):
        ctsim.hu_window(img, "head")


def test_water_maps_to_zero_hu():
    assert ctsim.attenuation_to_hu(np.array([1.0]))[0] == 0.0
    assert ctsim.attenuation_to_hu(np.array([0.0]))[0] == -1000.0


@pytest.mark.parametrize("seed", range(4))
def test_ldct_noise_exceeds_ndct_in_uniform_region(seed):
    disk = ctsim.make_phantom(PhantomSpec([Ellipse(0, 0, 0.65, 0.65, 0, 1.0)], size=96))
    ld, nd = ctsim.simulate_pair(disk, n_views=120, dose=DoseParams(), seed=seed)
    assert ld.shape == nd.shape == (96, 96)
    reg = (slice(40, 56), slice(40, 56))
    assert ld[reg].std() > nd[reg].std()
