"""Spectral helpers: LED power distributions, material reflectance, VL-band averages.

The measured spectra behind the reference materials are not shipped; instead
the tabulated band averages are exposed through :func:`builtin_reflectance`
and :func:`builtin_led_power`.

Note on the hybrid constants: ``PlasterPineHybrid`` is listed with a white-LED
reflectance of 0.2705, below both of its constituents' white values and below
its own blue value. The constants are reproduced as tabulated, not corrected.
"""
from __future__ import annotations

import csv
import enum
from dataclasses import dataclass
from pathlib import Path

import numpy as np

VL_BAND_NM = (420.0, 700.0)


class Material(enum.Enum):
    BLACK_FLAT_PAINT = "black"
    PINE_WOOD = "pine"
    PLASTER = "plaster"
    PLASTER_PINE_HYBRID = "plaster_pine"
    BLACK_PINE_HYBRID = "black_pine"

    @classmethod
    def parse(cls, name: str) -> "Material":
        key = name.strip().lower().replace("-", "_").replace(" ", "_")
        if key in _MATERIAL_ALIASES:
            return _MATERIAL_ALIASES[key]
        try:
            return cls(key)
        except ValueError:
            pass
        try:
            return cls[key.upper()]
        except KeyError:
            raise ValueError(f"unknown material {name!r}") from None


class Led(enum.Enum):
    WHITE = "white"
    BLUE = "blue"

    @classmethod
    def parse(cls, name: str) -> "Led":
        return cls(name.strip().lower())


_MATERIAL_ALIASES = {
    "black_flat_paint": Material.BLACK_FLAT_PAINT,
    "blackflatpaint": Material.BLACK_FLAT_PAINT,
    "pine_wood": Material.PINE_WOOD,
    "pinewood": Material.PINE_WOOD,
    "plasterpinehybrid": Material.PLASTER_PINE_HYBRID,
    "blackpinehybrid": Material.BLACK_PINE_HYBRID,
}


@dataclass(frozen=True)
class MaterialConstants:
    material: Material
    rho_white: float
    rho_blue: float


@dataclass(frozen=True)
class LedConstants:
    led: Led
    avg_spectral_power: float  # W


MATERIALS = {
    Material.BLACK_FLAT_PAINT: MaterialConstants(Material.BLACK_FLAT_PAINT, 0.0352, 0.0350),
    Material.PINE_WOOD: MaterialConstants(Material.PINE_WOOD, 0.5059, 0.4541),
    Material.PLASTER: MaterialConstants(Material.PLASTER, 0.7489, 0.7285),
    Material.PLASTER_PINE_HYBRID: MaterialConstants(Material.PLASTER_PINE_HYBRID, 0.2705, 0.6274),
    Material.BLACK_PINE_HYBRID: MaterialConstants(Material.BLACK_PINE_HYBRID, 0.2445, 0.5913),
}

LEDS = {
    Led.WHITE: LedConstants(Led.WHITE, 63.02),
    Led.BLUE: LedConstants(Led.BLUE, 41.56),
}

PURE_MATERIALS = (Material.BLACK_FLAT_PAINT, Material.PINE_WOOD, Material.PLASTER)


def builtin_reflectance(material: Material, led: Led) -> float:
    """Tabulated VL-band average reflectance of ``material`` under ``led``."""
    consts = MATERIALS[material]
    return consts.rho_white if led is Led.WHITE else consts.rho_blue


def builtin_led_power(led: Led) -> float:
    return LEDS[led].avg_spectral_power


@dataclass(frozen=True)
class Spectrum:
    """Sampled spectrum; ``kind`` is ``"reflectance"`` or ``"power"``."""

    wavelengths: np.ndarray
    values: np.ndarray
    kind: str = "power"

    def __post_init__(self):
        wl = np.asarray(self.wavelengths, dtype=float)
        val = np.asarray(self.values, dtype=float)
        if wl.ndim != 1 or wl.shape != val.shape:
            raise ValueError("wavelengths and values must be 1-D arrays of equal length")
        if wl.size < 2:
            raise ValueError("a spectrum needs at least 2 samples")
        if np.any(np.diff(wl) <= 0):
            raise ValueError("wavelengths must be strictly increasing")
        if not np.all(np.isfinite(val)):
            raise ValueError("spectrum values must be finite")
        if self.kind == "reflectance":
            if np.any(val < 0) or np.any(val > 1):
                raise ValueError("reflectance values must lie in [0, 1]")
        elif self.kind == "power":
            if np.any(val < 0):
                raise ValueError("spectral power values must be non-negative")
        else:
            raise ValueError(f"unknown spectrum kind {self.kind!r}")
        wl.flags.writeable = False
        val.flags.writeable = False
        object.__setattr__(self, "wavelengths", wl)
        object.__setattr__(self, "values", val)

    def band(self, lo: float, hi: float) -> "tuple[np.ndarray, np.ndarray]":
        mask = (self.wavelengths >= lo) & (self.wavelengths <= hi)
        return self.wavelengths[mask], self.values[mask]


def total_power(spd: Spectrum, band: tuple[float, float] = VL_BAND_NM) -> float:
    """Sum of the SPD samples falling inside ``band`` (inclusive)."""
    _, p = spd.band(*band)
    if p.size == 0:
        raise ValueError("no samples in VL band")
    return float(np.sum(p))


def average_reflectance(
    refl: Spectrum, spd: Spectrum, band: tuple[float, float] = VL_BAND_NM
) -> float:
    """Power-weighted mean reflectance over ``band``.

    The reflectance curve is linearly resampled onto the SPD's wavelength
    grid, then weighted by the SPD samples and normalized by their total.
    """
    wl, p = spd.band(*band)
    if p.size == 0:
        raise ValueError("no samples in VL band")
    if wl[0] < refl.wavelengths[0] or wl[-1] > refl.wavelengths[-1]:
        raise ValueError("reflectance spectrum does not cover the SPD samples in band")
    p_total = float(np.sum(p))
    if p_total == 0.0:
        raise ValueError("zero total power")
    rho = np.interp(wl, refl.wavelengths, refl.values)
    avg = float(np.dot(rho, p) / p_total)
    # guard against 1-ulp overshoot of the convex bounds
    return min(max(avg, float(rho.min())), float(rho.max()))


def read_spectrum(path: str | Path, kind: str = "power") -> Spectrum:
    """Load a two-column ``wavelength_nm,value`` CSV; a header row is optional."""
    wl, val = [], []
    with open(path, newline="") as fh:
        for i, row in enumerate(csv.reader(fh)):
            if not row or not "".join(row).strip():
                continue
            if len(row) < 2:
                raise ValueError(f"{path}: line {i + 1}: expected two columns")
            try:
                w, v = float(row[0]), float(row[1])
            except ValueError:
                if i == 0:
                    continue  # header
                raise ValueError(f"{path}: line {i + 1}: non-numeric value") from None
            wl.append(w)
            val.append(v)
    return Spectrum(np.array(wl), np.array(val), kind=kind)


def write_spectrum(spectrum: Spectrum, path: str | Path) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["wavelength_nm", "value"])
        for x, y in zip(spectrum.wavelengths, spectrum.values):
            w.writerow([repr(float(x)), repr(float(y))])
