import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from vlclab.spectra import (
    Led,
    Material,
    Spectrum,
    average_reflectance,
    builtin_led_power,
    builtin_reflectance,
    read_spectrum,
    total_power,
    write_spectrum,
)


def power(wl, val):
    return Spectrum(np.asarray(wl, float), np.asarray(val, float), kind="power")


def refl(wl, val):
    return Spectrum(np.asarray(wl, float), np.asarray(val, float), kind="reflectance")


GRID = np.linspace(420, 700, 29)


class TestSpectrum:
    def test_rejects_non_increasing(self):
        with pytest.raises(ValueError, match="strictly increasing"):
            power([500, 500], [1, 2])

    def test_rejects_single_sample(self):
        with pytest.raises(ValueError, match="at least 2"):
            power([500], [1])

    def test_reflectance_range(self):
        with pytest.raises(ValueError, match=r"\[0, 1\]"):
            refl([500, 600], [0.2, 1.2])

    def test_power_nonnegative(self):
        with pytest.raises(ValueError):
            power([500, 600], [1.0, -0.1])


class TestTotalPower:
    def test_two_samples(self):
        assert total_power(power([500, 600], [1.0, 3.0])) == 4.0

    def test_zero_spectrum(self):
        assert total_power(power(GRID, np.zeros(29))) == 0.0

    def test_uniform_29_samples(self):
        # 29 samples, each 1.0, all inside the band -> 29 by counting
        assert total_power(power(GRID, np.ones(29))) == 29.0

    def test_band_restriction(self):
        s = power([380, 420, 700, 780], [5.0, 1.0, 2.0, 7.0])
        assert total_power(s) == 3.0

    def test_empty_window(self):
        with pytest.raises(ValueError, match="no samples in VL band"):
            total_power(power([300, 400], [1.0, 1.0]))


class TestAverageReflectance:
    def test_flat(self):
        spd = power(GRID, np.random.default_rng(0).uniform(0.1, 2.0, 29))
        assert average_reflectance(refl(GRID, np.full(29, 0.5)), spd) == pytest.approx(0.5, abs=1e-15)

    def test_weighted_mean(self):
        # (0.2*1 + 0.8*3) / 4
        r = refl([500, 600], [0.2, 0.8])
        assert average_reflectance(r, power([500, 600], [1.0, 3.0])) == pytest.approx(0.65, abs=1e-15)

    def test_unit(self):
        spd = power(GRID, np.linspace(1, 3, 29))
        assert average_reflectance(refl(GRID, np.ones(29)), spd) == 1.0

    def test_resamples_onto_spd_grid(self):
        # reflectance linear in wavelength: resampled value at 560 nm is exactly 0.5
        r = refl([420, 700], [0.3, 0.7])
        assert average_reflectance(r, power([555, 560, 565], [0.0, 1.0, 0.0])) == pytest.approx(0.5)

    def test_zero_power(self):
        with pytest.raises(ValueError, match="zero total power"):
            average_reflectance(refl(GRID, np.full(29, 0.5)), power(GRID, np.zeros(29)))

    def test_uncovered_grid(self):
        with pytest.raises(ValueError, match="cover"):
            average_reflectance(refl([500, 600], [0.1, 0.2]), power(GRID, np.ones(29)))


@st.composite
def spectra_pair(draw):
    m = draw(st.integers(2, 60))
    rho = draw(st.lists(st.floats(0, 1), min_size=m, max_size=m))
    p = draw(st.lists(st.floats(0, 100), min_size=m, max_size=m))
    if sum(p) == 0:
        p[0] = 1.0
    wl = np.linspace(420, 700, m)
    return refl(wl, rho), power(wl, p)


@settings(max_examples=200, deadline=None)
@given(spectra_pair(), st.floats(1e-3, 1e3))
def test_convex_and_scale_invariant(pair, c):
    r, p = pair
    avg = average_reflectance(r, p)
    assert r.values.min() <= avg <= r.values.max()
    scaled = power(p.wavelengths, c * p.values)
    assert average_reflectance(r, scaled) == pytest.approx(avg, rel=1e-12, abs=1e-15)


@settings(max_examples=100, deadline=None)
@given(st.data())
def test_total_power_additive(data):
    values = data.draw(st.lists(st.floats(0, 10), min_size=4, max_size=40))
    cut = data.draw(st.integers(2, len(values) - 2))
    wl = np.linspace(420, 700, len(values))
    whole = total_power(power(wl, values))
    parts = total_power(power(wl[:cut], values[:cut])) + total_power(power(wl[cut:], values[cut:]))
    assert parts == pytest.approx(whole, rel=1e-12, abs=1e-12)


@pytest.mark.parametrize(
    "material, led, expected",
    [
        (Material.BLACK_FLAT_PAINT, Led.WHITE, 0.0352),
        (Material.BLACK_FLAT_PAINT, Led.BLUE, 0.0350),
        (Material.PINE_WOOD, Led.WHITE, 0.5059),
        (Material.PINE_WOOD, Led.BLUE, 0.4541),
        (Material.PLASTER, Led.WHITE, 0.7489),
        (Material.PLASTER, Led.BLUE, 0.7285),
        (Material.PLASTER_PINE_HYBRID, Led.WHITE, 0.2705),
        (Material.PLASTER_PINE_HYBRID, Led.BLUE, 0.6274),
        (Material.BLACK_PINE_HYBRID, Led.WHITE, 0.2445),
        (Material.BLACK_PINE_HYBRID, Led.BLUE, 0.5913),
    ],
)
def test_builtin_reflectance(material, led, expected):
    assert builtin_reflectance(material, led) == expected


def test_led_power():
    assert builtin_led_power(Led.WHITE) == 63.02
    assert builtin_led_power(Led.BLUE) == 41.56


@pytest.mark.parametrize("name", ["pine", "PineWood", "pine_wood", "PINE_WOOD"])
def test_material_aliases(name):
    assert Material.parse(name) is Material.PINE_WOOD


def test_csv_round_trip(tmp_path):
    s = power([420.0, 500.5, 700.0], [0.1, 2.5, 0.0])
    path = tmp_path / "spd.csv"
    write_spectrum(s, path)
    back = read_spectrum(path)
    np.testing.assert_array_equal(back.wavelengths, s.wavelengths)
    np.testing.assert_array_equal(back.values, s.values)


def test_csv_without_header(tmp_path):
    path = tmp_path / "r.csv"
    path.write_text("420,0.5\n700,0.5\n")
    assert read_spectrum(path, kind="reflectance").values.tolist() == [0.5, 0.5]
