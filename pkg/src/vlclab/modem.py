"""ACO-OFDM modem: 4-QAM mapping, Hermitian frame layout, unitary IFFT/FFT, clipping, CP.

Only odd subcarriers carry symbols. With ``n`` subcarriers that leaves ``n/4``
independent payload symbols on bins 1, 3, ..., n/2 - 1; the upper half is the
conjugate mirror so the time signal is real. Both transforms use the
symmetric 1/sqrt(n) scaling.
"""
from __future__ import annotations

import csv
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

IMAG_TOL = 1e-9

_S = 1.0 / np.sqrt(2.0)


@dataclass(frozen=True)
class OfdmConfig:
    """Frame geometry. ``active_subcarriers`` is descriptive only."""

    n: int = 512
    cp_len: int = 4
    constellation: str = "QAM4"
    pilot_separation: int = 2
    active_subcarriers: int = 504

    def __post_init__(self):
        if self.n < 8 or self.n & (self.n - 1):
            raise ValueError(f"n must be a power of two >= 8, got {self.n}")
        if not 0 <= self.cp_len < self.n:
            raise ValueError(f"cp_len must be in [0, n), got {self.cp_len}")
        if self.constellation != "QAM4":
            raise ValueError(f"unsupported constellation {self.constellation!r}")
        if self.pilot_separation != 2:
            raise ValueError("ACO-OFDM comb pilots require pilot_separation = 2")

    @property
    def payload_len(self) -> int:
        return self.n // 4

    @property
    def odd_bins(self) -> np.ndarray:
        """Independent data/pilot bins 1, 3, ..., n/2 - 1."""
        return np.arange(1, self.n // 2, 2)


@dataclass(frozen=True)
class FrequencyFrame:
    bins: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "bins", np.asarray(self.bins, dtype=complex))
        if self.bins.ndim != 1:
            raise ValueError("frame bins must be a 1-D vector")

    @property
    def n(self) -> int:
        return self.bins.size

    def check(self, tol: float = 1e-12) -> None:
        """Raise ``ValueError`` unless the ACO-OFDM layout invariants hold."""
        x = self.bins
        n = x.size
        if np.any(np.abs(x[0::2]) > tol):
            raise ValueError("even bins (including DC and n/2) must be zero")
        k = np.arange(1, n)
        if np.any(np.abs(x[n - k] - np.conj(x[k])) > tol):
            raise ValueError("frame not Hermitian")

    def to_csv(self, path: str | Path) -> None:
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["bin", "re", "im"])
            for k, v in enumerate(self.bins):
                w.writerow([k, repr(v.real), repr(v.imag)])


@dataclass(frozen=True)
class TimeSignal:
    samples: np.ndarray
    clipped: bool = False
    has_cp: bool = field(default=False)

    def __post_init__(self):
        object.__setattr__(self, "samples", np.asarray(self.samples, dtype=float))

    def __len__(self) -> int:
        return self.samples.size


def qam_map(bits) -> np.ndarray:
    """Map a bit sequence to unit-energy Gray-coded 4-QAM symbols."""
    b = np.asarray(bits, dtype=int).ravel()
    if b.size % 2:
        raise ValueError("4-QAM needs an even number of bits")
    if np.any((b != 0) & (b != 1)):
        raise ValueError("bits must be 0 or 1")
    pairs = b.reshape(-1, 2)
    re = np.where(pairs[:, 1] == 0, _S, -_S)
    im = np.where(pairs[:, 0] == 0, _S, -_S)
    return re + 1j * im


def qam_demap(symbols) -> np.ndarray:
    """Hard-decision inverse of :func:`qam_map`."""
    s = np.asarray(symbols, dtype=complex).ravel()
    b0 = (s.imag < 0).astype(int)
    b1 = (s.real < 0).astype(int)
    return np.column_stack([b0, b1]).ravel()


def random_qam4(count: int, rng: np.random.Generator) -> np.ndarray:
    return qam_map(rng.integers(0, 2, size=2 * count))


def build_frame(payload, cfg: OfdmConfig = OfdmConfig()) -> FrequencyFrame:
    """Place ``n/4`` payload symbols on the odd lower-half bins with a conjugate mirror."""
    p = np.asarray(payload, dtype=complex).ravel()
    if p.size != cfg.payload_len:
        raise ValueError(f"payload must have n/4 = {cfg.payload_len} symbols, got {p.size}")
    bins = np.zeros(cfg.n, dtype=complex)
    k = cfg.odd_bins
    bins[k] = p
    bins[cfg.n - k] = np.conj(p)
    return FrequencyFrame(bins)


def _bins(frame) -> np.ndarray:
    return frame.bins if isinstance(frame, FrequencyFrame) else np.asarray(frame, dtype=complex)


def modulate(frame, cfg: OfdmConfig = OfdmConfig()) -> TimeSignal:
    x = _bins(frame)
    if x.size != cfg.n:
        raise ValueError(f"frame length {x.size} does not match n = {cfg.n}")
    t = np.fft.ifft(x, norm="ortho")
    if np.max(np.abs(t.imag), initial=0.0) > IMAG_TOL:
        raise ValueError("frame not Hermitian")
    return TimeSignal(t.real.copy())


def clip(signal: TimeSignal) -> TimeSignal:
    return TimeSignal(np.maximum(signal.samples, 0.0), clipped=True, has_cp=signal.has_cp)


def add_cp(signal: TimeSignal, cfg: OfdmConfig = OfdmConfig()) -> TimeSignal:
    x = signal.samples
    if x.size != cfg.n or signal.has_cp:
        raise ValueError(f"expected a bare symbol of {cfg.n} samples, got {x.size}")
    if cfg.cp_len == 0:
        y = x.copy()
    else:
        y = np.concatenate([x[-cfg.cp_len:], x])
    return TimeSignal(y, clipped=signal.clipped, has_cp=True)


def remove_cp(signal: TimeSignal, cfg: OfdmConfig = OfdmConfig()) -> TimeSignal:
    x = signal.samples
    if x.size != cfg.n + cfg.cp_len:
        raise ValueError(f"expected {cfg.n + cfg.cp_len} samples, got {x.size}")
    return TimeSignal(x[cfg.cp_len:].copy(), clipped=signal.clipped, has_cp=False)


def demodulate(signal, cfg: OfdmConfig = OfdmConfig()) -> np.ndarray:
    """Unitary forward FFT of one CP-free symbol."""
    x = signal.samples if isinstance(signal, TimeSignal) else np.asarray(signal, dtype=float)
    if x.size != cfg.n:
        raise ValueError(f"expected {cfg.n} samples, got {x.size}")
    return np.fft.fft(x, norm="ortho")
