"""Comb-pilot channel estimation for ACO-OFDM.

Pipeline: strip CP, unitary FFT, zero-forcing on the odd (pilot) bins,
cubic-spline interpolation across the lower half-spectrum, Hermitian
reflection into the upper half, inverse DFT, keep the first ``l_h`` taps.

Clipping leaves exactly half of every odd-bin symbol in place, so by default
the odd-bin ZF outputs are doubled to undo it.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np
from scipy.interpolate import CubicSpline

from . import modem
from .modem import FrequencyFrame, OfdmConfig, TimeSignal

ACO_FACTOR = 2.0


@dataclass(frozen=True)
class PilotFrame:
    frame: FrequencyFrame

    def __post_init__(self):
        self.frame.check()
        n = self.frame.n
        if np.any(self.frame.bins[1 : n // 2 : 2] == 0):
            raise ValueError("singular pilot")

    @property
    def pilots(self) -> np.ndarray:
        n = self.frame.n
        return self.frame.bins[1 : n // 2 : 2]


@dataclass(frozen=True)
class TapEstimate:
    h_hat: np.ndarray
    residual_imag: float = 0.0

    def __post_init__(self):
        object.__setattr__(self, "h_hat", np.asarray(self.h_hat, dtype=float))

    def csv_row(self) -> list[str]:
        return [repr(float(v)) for v in self.h_hat] + [repr(float(self.residual_imag))]


def default_pilots(cfg: OfdmConfig = OfdmConfig(), seed: int = 0) -> PilotFrame:
    """Unit-magnitude 4-QAM pilots on every odd bin, from a seeded sequence."""
    rng = np.random.default_rng(seed)
    return PilotFrame(modem.build_frame(modem.random_qam4(cfg.payload_len, rng), cfg))


def zf_estimate(received_bins, pilots: PilotFrame) -> np.ndarray:
    """Per-bin zero-forcing ``Y[k] / X[k]`` on odd bins 1, 3, ..., n/2 - 1."""
    y = np.asarray(received_bins, dtype=complex)
    n = pilots.frame.n
    if y.size != n:
        raise ValueError(f"received vector has {y.size} bins, pilots have {n}")
    x = pilots.pilots
    if np.any(x == 0):
        raise ValueError("singular pilot")
    return y[1 : n // 2 : 2] / x


def interpolate_full(h_odd, n: int | None = None, bc_type: str = "not-a-knot") -> np.ndarray:
    """Spread odd-bin estimates over every bin of an ``n``-point spectrum.

    Real and imaginary parts get separate cubic splines over bins
    1..n/2-1, evaluated (with extrapolation at bins 0 and n/2) on 0..n/2.
    The remaining bins are the conjugate mirror.
    """
    h_odd = np.asarray(h_odd, dtype=complex).ravel()
    if h_odd.size < 4:
        raise ValueError("cubic interpolation needs at least 4 odd-bin samples")
    if n is None:
        n = 4 * h_odd.size
    if h_odd.size != n // 4:
        raise ValueError(f"expected n/4 = {n // 4} odd-bin samples, got {h_odd.size}")
    k_odd = np.arange(1, n // 2, 2)
    k_half = np.arange(0, n // 2 + 1)
    re = CubicSpline(k_odd, h_odd.real, bc_type=bc_type, extrapolate=True)(k_half)
    im = CubicSpline(k_odd, h_odd.imag, bc_type=bc_type, extrapolate=True)(k_half)
    full = np.empty(n, dtype=complex)
    full[: n // 2 + 1] = re + 1j * im
    full[n // 2 + 1 :] = np.conj(full[1 : n // 2][::-1])
    return full


def to_time_taps(h_full, l_h: int) -> TapEstimate:
    """First ``l_h`` taps of the inverse DFT of a full frequency response.

    Scaled so that ``H[k] = sum_l h[l] exp(-2j pi k l / n)`` maps back to ``h``.
    """
    h_full = np.asarray(h_full, dtype=complex)
    if not 1 <= l_h <= h_full.size:
        raise ValueError(f"l_h must be in [1, {h_full.size}]")
    h = np.fft.ifft(h_full)[:l_h]
    return TapEstimate(h.real.copy(), float(np.max(np.abs(h.imag))))


def estimate_taps(
    received: TimeSignal,
    pilots: PilotFrame,
    cfg: OfdmConfig = OfdmConfig(),
    l_h: int = 2,
    clipped: bool = True,
    bc_type: str = "not-a-knot",
) -> TapEstimate:
    sym = modem.remove_cp(received, cfg) if received.has_cp else received
    y = modem.demodulate(sym, cfg)
    h_odd = zf_estimate(y, pilots)
    if clipped:
        h_odd = ACO_FACTOR * h_odd
    return to_time_taps(interpolate_full(h_odd, cfg.n, bc_type=bc_type), l_h)


def average_estimates(estimates: Sequence[TapEstimate]) -> TapEstimate:
    if not estimates:
        raise ValueError("cannot average an empty list of estimates")
    sizes = {e.h_hat.size for e in estimates}
    if len(sizes) != 1:
        raise ValueError("estimates have different tap counts")
    stack = np.stack([e.h_hat for e in estimates])
    return TapEstimate(stack.mean(axis=0), max(e.residual_imag for e in estimates))
