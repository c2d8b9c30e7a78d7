"""Synthetic measurement campaigns and prediction scoring.

Each record runs the full chain: pilot frame -> IFFT -> clip -> CP ->
2-tap channel with ambient DC and AWGN -> tap estimation, averaged over the
repeats. Ground-truth taps come from a small documented model (inverse square
in distance, scaled by receiver gain, LED power, LOS state and reflectivity)
because the physical channel is not available.
"""
from __future__ import annotations

import csv
import itertools
import json
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np

from . import estimator, modem
from .channel import Cir, NoiseSpec, apply_channel
from .modem import OfdmConfig
from .spectra import PURE_MATERIALS, Led, Material, builtin_led_power, builtin_reflectance

TRAIN_DISTANCES_CM = tuple(range(20, 201, 20))
TEST_GRID_CM = tuple(range(20, 201, 5))
NOISE_LEVELS = (1, 2, 3)
REFERENCE_POWER_W = 63.02

CSV_HEADER = [
    "reflectivity", "tx_power_w", "los", "noise_level", "distance_cm", "rx_gain_db",
    "h1_true", "h2_true", "h1_est", "h2_est",
]


@dataclass(frozen=True)
class GroundTruth:
    """Constants of the synthetic tap model and noise levels."""

    c1: float = 5e-3
    beta: float = 1.0
    c2: float = 2e-3
    sigma0: float = 5e-4
    dc0: float = 0.01


@dataclass(frozen=True)
class FeatureVector:
    reflectivity: float
    tx_power: float
    los: int
    noise_level: int
    distance: float
    rx_gain: float

    def __post_init__(self):
        if not 0.0 <= self.reflectivity <= 1.0:
            raise ValueError(f"reflectivity {self.reflectivity} outside [0, 1]")
        if self.tx_power <= 0:
            raise ValueError("tx_power must be positive")
        if self.los not in (0, 1):
            raise ValueError("los must be 0 (NLOS) or 1 (NLOS+LOS)")
        if self.noise_level not in NOISE_LEVELS:
            raise ValueError(f"noise level must be one of {NOISE_LEVELS}")
        if not 20.0 <= self.distance <= 200.0:
            raise ValueError(f"distance {self.distance} cm outside [20, 200]")
        if self.rx_gain not in (10, 20, 30):
            raise ValueError("rx_gain must be 10, 20 or 30 dB")

    @classmethod
    def make(cls, reflectivity: float, tx_power: float, los: int, noise_level: int, distance: float) -> "FeatureVector":
        """Build a feature vector with the receiver gain taken from the distance schedule."""
        return cls(reflectivity, tx_power, los, noise_level, distance, gain_for_distance(distance))

    def as_array(self) -> np.ndarray:
        return np.array([self.reflectivity, self.tx_power, self.los, self.noise_level, self.distance, self.rx_gain], dtype=float)


@dataclass(frozen=True)
class MeasurementRecord:
    features: FeatureVector
    h_true: np.ndarray
    h_est: np.ndarray
    repeats: int = 10


@dataclass
class Dataset:
    records: list[MeasurementRecord]
    metadata: dict = field(default_factory=dict)

    def __len__(self) -> int:
        return len(self.records)

    def features(self) -> np.ndarray:
        return np.array([r.features.as_array() for r in self.records])

    def targets(self) -> np.ndarray:
        """Estimated (repeat-averaged) taps; these are what the MLP learns."""
        return np.array([r.h_est for r in self.records])

    def truths(self) -> np.ndarray:
        return np.array([r.h_true for r in self.records])


def gain_for_distance(d: float) -> int:
    """Receiver gain schedule in dB; 200 cm belongs to the last bucket."""
    if d < 20 or d > 200:
        raise ValueError(f"distance {d} cm outside [20, 200]")
    if d < 40:
        return 10
    if d < 80:
        return 20
    return 30


def ground_truth_taps(f: FeatureVector, gt: GroundTruth = GroundTruth()) -> np.ndarray:
    g = 10.0 ** (f.rx_gain / 20.0)
    a = f.tx_power / REFERENCE_POWER_W
    d = f.distance / 100.0
    h1 = g * a * gt.c1 * (1.0 + gt.beta * f.los) / d**2
    h2 = g * a * gt.c2 * f.reflectivity / d**2
    return np.array([h1, h2])


def noise_for_level(level: int, gt: GroundTruth = GroundTruth()) -> NoiseSpec:
    if level not in NOISE_LEVELS:
        raise ValueError(f"noise level must be one of {NOISE_LEVELS}, got {level}")
    return NoiseSpec(sigma_n=level * gt.sigma0, dc_ambient=level * gt.dc0)


def run_measurement(
    f: FeatureVector,
    repeats: int = 10,
    seed=0,
    cfg: OfdmConfig = OfdmConfig(),
    gt: GroundTruth = GroundTruth(),
    pilot_seed: int = 0,
) -> MeasurementRecord:
    """Simulate ``repeats`` pilot symbols through the channel and average the tap estimates."""
    if repeats < 1:
        raise ValueError("repeats must be >= 1")
    h_true = ground_truth_taps(f, gt)
    cir = Cir(h_true)
    if cfg.cp_len < len(cir):
        raise ValueError("cyclic prefix shorter than the channel")
    noise = noise_for_level(f.noise_level, gt)
    pilots = estimator.default_pilots(cfg, pilot_seed)
    tx = modem.add_cp(modem.clip(modem.modulate(pilots.frame, cfg)), cfg)
    ss = seed if isinstance(seed, np.random.SeedSequence) else np.random.SeedSequence(seed)
    seeds = ss.spawn(repeats)
    ests = [
        estimator.estimate_taps(apply_channel(tx, cir, noise, s), pilots, cfg, l_h=len(cir))
        for s in seeds
    ]
    avg = estimator.average_estimates(ests)
    return MeasurementRecord(f, h_true, avg.h_hat, repeats)


def _record_seed(seed: int, index: int) -> np.random.SeedSequence:
    return np.random.SeedSequence([seed, index])


def _run_all(features: Sequence[FeatureVector], seed: int, repeats, cfg, gt) -> list[MeasurementRecord]:
    return [
        run_measurement(f, repeats, _record_seed(seed, i), cfg, gt)
        for i, f in enumerate(features)
    ]


def _metadata(kind: str, seed: int, repeats: int, cfg: OfdmConfig, gt: GroundTruth, **extra) -> dict:
    return {
        "kind": kind,
        "seed": seed,
        "repeats": repeats,
        "ofdm": asdict(cfg),
        "ground_truth": asdict(gt),
        **extra,
    }


def training_features() -> list[FeatureVector]:
    feats = []
    for material, led, los, level, d in itertools.product(
        PURE_MATERIALS, (Led.WHITE, Led.BLUE), (0, 1), NOISE_LEVELS, TRAIN_DISTANCES_CM
    ):
        feats.append(FeatureVector.make(builtin_reflectance(material, led), builtin_led_power(led), los, level, float(d)))
    return feats


def generate_training_campaign(
    seed: int = 0, repeats: int = 10, cfg: OfdmConfig = OfdmConfig(), gt: GroundTruth = GroundTruth()
) -> Dataset:
    """Full factorial grid: 3 materials x 2 LEDs x 2 LOS x 3 noise levels x 10 distances."""
    feats = training_features()
    return Dataset(_run_all(feats, seed, repeats, cfg, gt), _metadata("training", seed, repeats, cfg, gt))


HYBRIDS = {
    "plaster_pine": Material.PLASTER_PINE_HYBRID,
    "black_pine": Material.BLACK_PINE_HYBRID,
}


def hybrid_distances(seed: int, count: int = 8) -> list[float]:
    rng = np.random.default_rng(np.random.SeedSequence([seed, 0x5EED]))
    picks = rng.choice(len(TEST_GRID_CM), size=count, replace=False)
    return sorted(float(TEST_GRID_CM[i]) for i in picks)


def generate_hybrid_test(
    surface: str | Material,
    seed: int = 0,
    distances: Iterable[float] | None = None,
    repeats: int = 10,
    cfg: OfdmConfig = OfdmConfig(),
    gt: GroundTruth = GroundTruth(),
) -> Dataset:
    """Hybrid-surface test set; other factors full factorial over the given distances.

    With ``distances=None`` eight distances are drawn without replacement from
    the 5 cm grid; pass :data:`TEST_GRID_CM` for the whole grid.
    """
    material = HYBRIDS[surface] if isinstance(surface, str) else surface
    if material not in HYBRIDS.values():
        raise ValueError(f"{surface!r} is not a hybrid surface")
    dists = hybrid_distances(seed) if distances is None else [float(d) for d in distances]
    for d in dists:
        if not 20 <= d <= 200:
            raise ValueError(f"test distance {d} cm outside [20, 200]")
    feats = [
        FeatureVector.make(builtin_reflectance(material, led), builtin_led_power(led), los, level, d)
        for led, los, level, d in itertools.product((Led.WHITE, Led.BLUE), (0, 1), NOISE_LEVELS, dists)
    ]
    meta = _metadata(f"hybrid:{material.value}", seed, repeats, cfg, gt, distances_cm=dists)
    return Dataset(_run_all(feats, seed, repeats, cfg, gt), meta)


@dataclass
class TapHistogram:
    edges: np.ndarray
    counts: np.ndarray


@dataclass
class EvalReport:
    mse: np.ndarray
    mean_pct_error: np.ndarray
    histograms: list[TapHistogram]
    n_records: int
    excluded: np.ndarray  # per-tap count of zero targets left out of % metrics

    def to_json(self) -> dict:
        return {
            "n_records": self.n_records,
            "mse": {"h1": float(self.mse[0]), "h2": float(self.mse[1])},
            "mean_pct_abs_error": {"h1": float(self.mean_pct_error[0]), "h2": float(self.mean_pct_error[1])},
            "excluded_zero_targets": {"h1": int(self.excluded[0]), "h2": int(self.excluded[1])},
        }

    def histogram_rows(self, tap: int = 0):
        h = self.histograms[tap]
        return [(float(lo), float(hi), int(c)) for lo, hi, c in zip(h.edges[:-1], h.edges[1:], h.counts)]


def score(pred, target, hist_bins: int = 20) -> EvalReport:
    """MSE and percentage absolute error of raw-unit predictions against targets."""
    pred = np.asarray(pred, dtype=float)
    target = np.asarray(target, dtype=float)
    if target.shape[0] == 0:
        raise ValueError("empty dataset")
    mse = np.mean((pred - target) ** 2, axis=0)
    pct, hists, excluded = [], [], []
    for j in range(target.shape[1]):
        ok = target[:, j] != 0
        excluded.append(int(np.sum(~ok)))
        e = 100.0 * np.abs(pred[ok, j] - target[ok, j]) / np.abs(target[ok, j])
        pct.append(float(np.mean(e)) if e.size else float("nan"))
        hi = float(e.max()) if e.size and e.max() > 0 else 1.0
        counts, edges = np.histogram(e, bins=hist_bins, range=(0.0, hi))
        hists.append(TapHistogram(edges, counts))
    return EvalReport(mse, np.array(pct), hists, target.shape[0], np.array(excluded))


def evaluate(params, normalizer, dataset: Dataset, hist_bins: int = 20) -> EvalReport:
    from .mlp import predict

    return score(predict(params, normalizer, dataset.features()), dataset.targets(), hist_bins)


def write_dataset(ds: Dataset, path: str | Path) -> None:
    """CSV plus a ``.meta.json`` sidecar next to it."""
    path = Path(path)
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(CSV_HEADER)
        for r in ds.records:
            f = r.features
            w.writerow([
                repr(f.reflectivity), repr(f.tx_power), f.los, f.noise_level, repr(float(f.distance)),
                f.rx_gain, *(repr(float(v)) for v in r.h_true), *(repr(float(v)) for v in r.h_est),
            ])
    meta_path(path).write_text(json.dumps(ds.metadata, indent=2, sort_keys=True) + "\n")


def meta_path(path: str | Path) -> Path:
    path = Path(path)
    return path.with_name(path.stem + ".meta.json")


def read_dataset(path: str | Path) -> Dataset:
    path = Path(path)
    records = []
    with open(path, newline="") as fh:
        reader = csv.DictReader(fh)
        missing = set(CSV_HEADER) - set(reader.fieldnames or [])
        if missing:
            raise ValueError(f"{path}: missing columns {sorted(missing)}")
        for row in reader:
            f = FeatureVector(
                float(row["reflectivity"]), float(row["tx_power_w"]), int(row["los"]),
                int(row["noise_level"]), float(row["distance_cm"]), int(float(row["rx_gain_db"])),
            )
            records.append(MeasurementRecord(
                f,
                np.array([float(row["h1_true"]), float(row["h2_true"])]),
                np.array([float(row["h1_est"]), float(row["h2_est"])]),
            ))
    mp = meta_path(path)
    meta = json.loads(mp.read_text()) if mp.exists() else {}
    if "repeats" in meta:
        records = [MeasurementRecord(r.features, r.h_true, r.h_est, meta["repeats"]) for r in records]
    return Dataset(records, meta)
