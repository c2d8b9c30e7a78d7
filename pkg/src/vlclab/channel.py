"""Discrete optical channel: circular FIR convolution plus DC ambient and AWGN,
and power-delay-profile metrics of the impulse response.

Taps are stored as amplitude gains. Delay metrics are computed on the power
profile ``p[l] = h[l]**2`` with tap delays ``t_l = l * dt``.
"""
from __future__ import annotations

import csv
import math
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .modem import TimeSignal

DEFAULT_DT = 1.0 / 512e3  # one sample at the 512 kHz transmission bandwidth
POWER_WINDOW = 0.97


@dataclass(frozen=True)
class Cir:
    taps: np.ndarray
    dt: float = DEFAULT_DT

    def __post_init__(self):
        taps = np.atleast_1d(np.asarray(self.taps, dtype=float))
        if taps.ndim != 1 or taps.size < 1:
            raise ValueError("a CIR needs at least one tap")
        if not self.dt > 0:
            raise ValueError("dt must be positive")
        object.__setattr__(self, "taps", taps)

    def __len__(self) -> int:
        return self.taps.size


@dataclass(frozen=True)
class NoiseSpec:
    sigma_n: float = 0.0
    dc_ambient: float = 0.0

    def __post_init__(self):
        if self.sigma_n < 0:
            raise ValueError("sigma_n must be non-negative")


@dataclass(frozen=True)
class ChannelMetrics:
    h0: float
    tau0: float
    tau_rms: float
    t_r: float

    def to_json(self) -> dict:
        return {"h0": self.h0, "tau0_s": self.tau0, "tau_rms_s": self.tau_rms, "t_r_s": self.t_r}


def circular_convolve(x: np.ndarray, h: np.ndarray) -> np.ndarray:
    y = np.zeros_like(x, dtype=float)
    for lag, tap in enumerate(h):
        y += tap * np.roll(x, lag)
    return y


def apply_channel(x: TimeSignal, cir: Cir, noise: NoiseSpec = NoiseSpec(), rng_seed=None) -> TimeSignal:
    """Circularly convolve ``x`` with the CIR, then add ambient DC and AWGN.

    ``rng_seed`` is anything :func:`numpy.random.default_rng` accepts; the
    output is deterministic for a given seed.
    """
    s = x.samples
    if len(cir) > s.size:
        raise ValueError(f"CIR length {len(cir)} exceeds signal length {s.size}")
    y = circular_convolve(s, cir.taps) + noise.dc_ambient
    if noise.sigma_n > 0:
        rng = np.random.default_rng(rng_seed)
        y = y + rng.normal(0.0, noise.sigma_n, size=s.size)
    return TimeSignal(y, clipped=False, has_cp=x.has_cp)


def power_profile(cir: Cir) -> np.ndarray:
    return cir.taps ** 2


def metrics(cir: Cir) -> ChannelMetrics:
    """DC gain, mean excess delay, RMS delay spread and 97 % power window.

    The sums run left to right over the (short) profile so results are
    reproducible bit for bit.
    """
    p = [float(v) for v in power_profile(cir)]
    dt = float(cir.dt)
    t = [l * dt for l in range(len(p))]
    total = sum(p)
    if total <= 0.0:
        raise ValueError("degenerate CIR")
    tau0 = sum(tl * pl for tl, pl in zip(t, p)) / total
    tau_rms = math.sqrt(sum((tl - tau0) ** 2 * pl for tl, pl in zip(t, p)) / total)

    target = POWER_WINDOW * total
    cum = 0.0
    t_r = t[-1]
    for tl, pl in zip(t, p):
        cum += pl
        if cum >= target:
            t_r = tl
            break
    return ChannelMetrics(h0=total, tau0=tau0, tau_rms=tau_rms, t_r=t_r)


def write_cir(cir: Cir, path: str | Path) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["tap_index", "amplitude"])
        for i, v in enumerate(cir.taps):
            w.writerow([i, repr(float(v))])


def read_cir(path: str | Path, dt: float = DEFAULT_DT) -> Cir:
    rows = {}
    with open(path, newline="") as fh:
        for row in csv.DictReader(fh):
            rows[int(row["tap_index"])] = float(row["amplitude"])
    if sorted(rows) != list(range(len(rows))):
        raise ValueError(f"{path}: tap indices must be contiguous from 0")
    return Cir(np.array([rows[i] for i in range(len(rows))]), dt=dt)
