import numpy as np
import pytest

from vlclab import estimator, modem
from vlclab.channel import Cir, NoiseSpec, apply_channel
from vlclab.estimator import PilotFrame, TapEstimate
from vlclab.modem import OfdmConfig

N = 512
CFG = OfdmConfig()
ODD = np.arange(1, N // 2, 2)


def response(taps, k, n=N):
    """Forward frequency response sum_l h[l] exp(-2j pi k l / n)."""
    k = np.asarray(k)
    return sum(h * np.exp(-2j * np.pi * k * l / n) for l, h in enumerate(taps))


@pytest.fixture(scope="module")
def pilots():
    return estimator.default_pilots(CFG, seed=0)


def transmit(pilots, cfg=CFG):
    return modem.add_cp(modem.clip(modem.modulate(pilots.frame, cfg)), cfg)


class TestPilots:
    def test_unit_magnitude(self, pilots):
        np.testing.assert_allclose(np.abs(pilots.pilots), 1.0)
        assert pilots.pilots.size == 128

    def test_seeded(self):
        a = estimator.default_pilots(CFG, 3).pilots
        np.testing.assert_array_equal(a, estimator.default_pilots(CFG, 3).pilots)

    def test_singular(self):
        payload = np.ones(128, complex)
        payload[10] = 0
        with pytest.raises(ValueError, match="singular pilot"):
            PilotFrame(modem.build_frame(payload))


class TestZeroForcing:
    def test_noiseless_exact(self, pilots):
        H = response([0.9, 0.3], np.arange(N))
        Y = H * pilots.frame.bins
        np.testing.assert_allclose(estimator.zf_estimate(Y, pilots), H[ODD], rtol=0, atol=1e-15)

    def test_division(self):
        payload = np.full(128, 2.0 + 0j)
        pf = PilotFrame(modem.build_frame(payload))
        Y = np.zeros(N, complex)
        Y[ODD] = 2 + 2j
        np.testing.assert_allclose(estimator.zf_estimate(Y, pf), 1 + 1j)

    def test_flat_unit(self, pilots):
        np.testing.assert_allclose(estimator.zf_estimate(pilots.frame.bins, pilots), 1.0)

    def test_any_pilot_values(self):
        rng = np.random.default_rng(1)
        payload = rng.normal(size=128) + 1j * rng.normal(size=128)
        pf = PilotFrame(modem.build_frame(payload))
        H = response([0.4, -0.7], np.arange(N))
        np.testing.assert_allclose(estimator.zf_estimate(H * pf.frame.bins, pf), H[ODD], atol=1e-14)


class TestInterpolate:
    def test_constant(self):
        c = 0.7 + 0.2j
        full = estimator.interpolate_full(np.full(128, c))
        np.testing.assert_allclose(full[: N // 2 + 1], c, atol=1e-14)
        np.testing.assert_allclose(full[N // 2 + 1 :], np.conj(c), atol=1e-14)

    def test_two_tap_response(self):
        full = estimator.interpolate_full(response([0.9, 0.3], ODD))
        truth = response([0.9, 0.3], np.arange(N // 2 + 1))
        assert np.max(np.abs(full[: N // 2 + 1] - truth)) < 1e-6

    def test_linear_reproduction(self):
        full = estimator.interpolate_full(0.01 * ODD + 0.5)
        np.testing.assert_allclose(full[: N // 2 + 1].real, 0.01 * np.arange(N // 2 + 1) + 0.5, atol=1e-12)

    def test_hermitian_fill(self):
        full = estimator.interpolate_full(np.random.default_rng(2).normal(size=128) + 0j)
        k = np.arange(1, N // 2)
        np.testing.assert_array_equal(full[N - k], np.conj(full[k]))

    def test_natural_variant_available(self):
        full = estimator.interpolate_full(response([0.9, 0.3], ODD), bc_type="natural")
        truth = response([0.9, 0.3], np.arange(N // 2 + 1))
        assert np.max(np.abs(full[: N // 2 + 1] - truth)) < 1e-4

    def test_too_few_points(self):
        with pytest.raises(ValueError):
            estimator.interpolate_full([1, 2, 3], n=12)


class TestTimeTaps:
    def test_flat(self):
        est = estimator.to_time_taps(np.full(N, 0.8 + 0j), 2)
        np.testing.assert_allclose(est.h_hat, [0.8, 0.0], atol=1e-15)

    def test_two_tap(self):
        est = estimator.to_time_taps(response([0.9, 0.3], np.arange(N)), 2)
        np.testing.assert_allclose(est.h_hat, [0.9, 0.3], atol=1e-9)
        assert est.residual_imag < 1e-12

    def test_pure_delay(self):
        est = estimator.to_time_taps(np.exp(-2j * np.pi * np.arange(N) / N), 2)
        np.testing.assert_allclose(est.h_hat, [0.0, 1.0], atol=1e-12)

    def test_csv_row(self):
        assert len(TapEstimate([0.1, 0.2], 1e-9).csv_row()) == 3


class TestEstimateTaps:
    def test_noiseless_two_tap(self, pilots):
        rx = apply_channel(transmit(pilots), Cir([0.9, 0.3]))
        est = estimator.estimate_taps(rx, pilots, CFG, l_h=2)
        np.testing.assert_allclose(est.h_hat, [0.9, 0.3], atol=1e-3)

    def test_identity_channel(self, pilots):
        rx = apply_channel(transmit(pilots), Cir([1.0, 0.0]))
        np.testing.assert_allclose(estimator.estimate_taps(rx, pilots).h_hat, [1.0, 0.0], atol=1e-6)

    def test_ambient_dc_ignored(self, pilots):
        rx = apply_channel(transmit(pilots), Cir([0.9, 0.3]), NoiseSpec(0.0, 0.05))
        np.testing.assert_allclose(estimator.estimate_taps(rx, pilots).h_hat, [0.9, 0.3], atol=1e-3)

    @pytest.mark.parametrize("seed", range(20))
    def test_random_channels(self, pilots, seed):
        h = np.random.default_rng(seed).uniform(-1, 1, size=2)
        rx = apply_channel(transmit(pilots), Cir(h))
        assert np.max(np.abs(estimator.estimate_taps(rx, pilots).h_hat - h)) < 1e-3

    def test_doubling_matches_unclipped(self, pilots):
        cir = Cir([0.6, 0.25])
        clipped_rx = apply_channel(transmit(pilots), cir)
        plain = modem.add_cp(modem.modulate(pilots.frame, CFG), CFG)
        plain_rx = apply_channel(plain, cir)
        a = estimator.estimate_taps(clipped_rx, pilots, clipped=True).h_hat
        b = estimator.estimate_taps(plain_rx, pilots, clipped=False).h_hat
        np.testing.assert_allclose(a, b, atol=1e-9)

    def test_unbiased_under_noise(self, pilots):
        h = np.array([0.9, 0.3])
        tx = transmit(pilots)
        noise = NoiseSpec(0.05, 0.01)
        seeds = np.random.SeedSequence(11).spawn(1000)
        ests = np.array([estimator.estimate_taps(apply_channel(tx, Cir(h), noise, s), pilots).h_hat for s in seeds])
        se = ests.std(axis=0, ddof=1) / np.sqrt(len(ests))
        assert np.all(np.abs(ests.mean(axis=0) - h) < 3 * se)

    def test_averaging_shrinks_spread(self, pilots):
        h = np.array([0.5, 0.2])
        tx = transmit(pilots)
        noise = NoiseSpec(0.05)
        seeds = iter(np.random.SeedSequence(12).spawn(400 * 11))

        def one():
            return estimator.estimate_taps(apply_channel(tx, Cir(h), noise, next(seeds)), pilots)

        singles = np.array([one().h_hat for _ in range(400)])
        means = np.array([estimator.average_estimates([one() for _ in range(10)]).h_hat for _ in range(400)])
        ratio = means.std(axis=0) / singles.std(axis=0)
        np.testing.assert_allclose(ratio, 1 / np.sqrt(10), rtol=0.2)


class TestAverage:
    def test_mean(self):
        out = estimator.average_estimates([TapEstimate([1, 0]), TapEstimate([3, 0])])
        np.testing.assert_array_equal(out.h_hat, [2, 0])

    def test_single(self):
        e = TapEstimate([0.123, 0.456])
        np.testing.assert_array_equal(estimator.average_estimates([e]).h_hat, e.h_hat)

    def test_copies(self):
        v = [0.3, 0.7]
        np.testing.assert_allclose(estimator.average_estimates([TapEstimate(v)] * 10).h_hat, v, rtol=1e-15)

    def test_empty(self):
        with pytest.raises(ValueError):
            estimator.average_estimates([])

    def test_mismatched(self):
        with pytest.raises(ValueError):
            estimator.average_estimates([TapEstimate([1, 2]), TapEstimate([1])])
