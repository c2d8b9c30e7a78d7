"""One-hidden-layer perceptron for tap regression (6 -> H tanh -> 2 linear).

Training is full-batch gradient descent with momentum. A step that raises
the training loss is rejected, the velocity is cleared and the learning rate
is halved, making the recorded training curve non-increasing. The model
returned is the one from the epoch with the lowest validation MSE.
"""
from __future__ import annotations

import json
import warnings
from dataclasses import dataclass, field
from pathlib import Path
from typing import Sequence

import numpy as np

N_INPUTS = 6
N_OUTPUTS = 2


@dataclass
class MlpParams:
    w1: np.ndarray  # (hidden, n_in)
    b1: np.ndarray  # (hidden,)
    w2: np.ndarray  # (n_out, hidden)
    b2: np.ndarray  # (n_out,)

    def __post_init__(self):
        self.w1 = np.asarray(self.w1, dtype=float)
        self.b1 = np.asarray(self.b1, dtype=float)
        self.w2 = np.asarray(self.w2, dtype=float)
        self.b2 = np.asarray(self.b2, dtype=float)
        h = self.w1.shape[0]
        if self.w1.ndim != 2 or self.b1.shape != (h,) or self.w2.shape[1:] != (h,) \
                or self.b2.shape != (self.w2.shape[0],):
            raise ValueError("inconsistent MLP parameter shapes")

    @property
    def hidden(self) -> int:
        return self.w1.shape[0]

    def flat(self) -> np.ndarray:
        return np.concatenate([self.w1.ravel(), self.b1, self.w2.ravel(), self.b2])

    def with_flat(self, v: np.ndarray) -> "MlpParams":
        parts, i = [], 0
        for a in (self.w1, self.b1, self.w2, self.b2):
            parts.append(np.array(v[i : i + a.size]).reshape(a.shape))
            i += a.size
        return MlpParams(*parts)

    def copy(self) -> "MlpParams":
        return MlpParams(self.w1.copy(), self.b1.copy(), self.w2.copy(), self.b2.copy())


def init(hidden: int, seed: int, n_in: int = N_INPUTS, n_out: int = N_OUTPUTS) -> MlpParams:
    """Uniform weights in +-1/sqrt(fan_in), zero biases."""
    if hidden < 1:
        raise ValueError("hidden must be >= 1")
    rng = np.random.default_rng(seed)
    a1, a2 = 1.0 / np.sqrt(n_in), 1.0 / np.sqrt(hidden)
    return MlpParams(
        w1=rng.uniform(-a1, a1, size=(hidden, n_in)),
        b1=np.zeros(hidden),
        w2=rng.uniform(-a2, a2, size=(n_out, hidden)),
        b2=np.zeros(n_out),
    )


def forward(params: MlpParams, x) -> np.ndarray:
    """``w2 @ tanh(w1 @ x + b1) + b2`` for one vector or a (records, features) batch."""
    x = np.asarray(x, dtype=float)
    if x.shape[-1] != params.w1.shape[1]:
        raise ValueError(f"expected {params.w1.shape[1]} features, got {x.shape[-1]}")
    a = np.tanh(x @ params.w1.T + params.b1)
    return a @ params.w2.T + params.b2


def loss(params: MlpParams, x, t) -> tuple[np.ndarray, float]:
    """Per-output MSE over records and their mean."""
    t = np.asarray(t, dtype=float)
    if t.shape[0] == 0:
        raise ValueError("empty dataset")
    err = forward(params, x) - t
    per = np.mean(err**2, axis=0)
    return per, float(np.mean(per))


def objective(params: MlpParams, x, t) -> float:
    """Training objective: sum over outputs of the per-output MSE."""
    per, _ = loss(params, x, t)
    return float(np.sum(per))


def gradient(params: MlpParams, x, t) -> MlpParams:
    """Backpropagated gradient of :func:`objective`."""
    x = np.asarray(x, dtype=float)
    t = np.asarray(t, dtype=float)
    m = x.shape[0]
    a = np.tanh(x @ params.w1.T + params.b1)
    y = a @ params.w2.T + params.b2
    dy = 2.0 * (y - t) / m
    gw2 = dy.T @ a
    gb2 = dy.sum(axis=0)
    dz = (dy @ params.w2) * (1.0 - a**2)
    gw1 = dz.T @ x
    gb1 = dz.sum(axis=0)
    return MlpParams(gw1, gb1, gw2, gb2)


@dataclass
class Normalizer:
    """Per-dimension affine map of inputs and targets onto [-1, 1].

    With ``log_targets`` the targets are log-transformed before the affine
    step (and exponentiated on the way back), which keeps relative accuracy
    uniform across taps spanning several decades.
    """

    x_min: np.ndarray
    x_max: np.ndarray
    t_min: np.ndarray
    t_max: np.ndarray
    log_targets: bool = False

    @staticmethod
    def _fwd(v, lo, hi):
        span = hi - lo
        safe = np.where(span > 0, span, 1.0)
        return np.where(span > 0, 2.0 * (np.asarray(v, dtype=float) - lo) / safe - 1.0, 0.0)

    @staticmethod
    def _inv(v, lo, hi):
        return lo + (np.asarray(v, dtype=float) + 1.0) * (hi - lo) / 2.0

    def apply_inputs(self, x):
        return self._fwd(x, self.x_min, self.x_max)

    def apply_targets(self, t):
        return self._fwd(_log_targets(t) if self.log_targets else t, self.t_min, self.t_max)

    def invert_inputs(self, u):
        return self._inv(u, self.x_min, self.x_max)

    def invert_targets(self, u):
        v = self._inv(u, self.t_min, self.t_max)
        return np.exp(v) if self.log_targets else v

    def to_json(self) -> dict:
        d = {k: getattr(self, k).tolist() for k in ("x_min", "x_max", "t_min", "t_max")}
        d["log_targets"] = self.log_targets
        return d

    @classmethod
    def from_json(cls, d: dict) -> "Normalizer":
        arrays = (np.array(d[k], dtype=float) for k in ("x_min", "x_max", "t_min", "t_max"))
        return cls(*arrays, log_targets=bool(d.get("log_targets", False)))


def _log_targets(t) -> np.ndarray:
    t = np.asarray(t, dtype=float)
    if np.any(t <= 0):
        raise ValueError("log target scaling needs strictly positive targets; use log_targets=False")
    return np.log(t)


def fit_normalizer(x, t, log_targets: bool = False) -> Normalizer:
    """Fit min/max bounds; ``t_min``/``t_max`` are in log units when ``log_targets``."""
    x = np.asarray(x, dtype=float)
    t = _log_targets(t) if log_targets else np.asarray(t, dtype=float)
    norm = Normalizer(x.min(axis=0), x.max(axis=0), t.min(axis=0), t.max(axis=0), log_targets)
    const = [i for i, s in enumerate(norm.x_max - norm.x_min) if s <= 0]
    const += [f"target {i}" for i, s in enumerate(norm.t_max - norm.t_min) if s <= 0]
    if const:
        warnings.warn(f"constant dimensions mapped to 0: {const}", stacklevel=2)
    return norm


@dataclass(frozen=True)
class TrainConfig:
    lr: float = 0.01
    momentum: float = 0.9
    max_epochs: int = 50000
    patience: int = 2000
    lr_growth: float = 1.0
    min_lr: float = 1e-12
    split: tuple[float, float, float] = (0.70, 0.15, 0.15)
    log_targets: bool = True


@dataclass
class TrainReport:
    epochs_run: int
    train_mse_curve: np.ndarray
    val_mse_curve: np.ndarray
    best_epoch: int
    params: MlpParams
    normalizer: Normalizer
    hidden: int
    seed: int
    split_indices: dict = field(default_factory=dict)
    stop_reason: str = ""

    @property
    def best_val_mse(self) -> float:
        return float(self.val_mse_curve[self.best_epoch])


def canonical_order(x, t) -> np.ndarray:
    """Row permutation sorting records by content, so splits ignore input order."""
    keys = np.column_stack([np.asarray(x, float), np.asarray(t, float)])
    return np.lexsort(keys.T[::-1])


def split_indices(x, t, seed: int, fractions=(0.70, 0.15, 0.15)) -> dict[str, np.ndarray]:
    m = len(x)
    if abs(sum(fractions) - 1.0) > 1e-9:
        raise ValueError("split fractions must sum to 1")
    order = canonical_order(x, t)
    perm = order[np.random.default_rng(seed).permutation(m)]
    n_train = int(round(fractions[0] * m))
    n_val = int(round(fractions[1] * m))
    if n_train < 1 or n_val < 1:
        raise ValueError("dataset too small for the requested split")
    # content-determined order, so gradient sums do not depend on input order
    return {
        "train": perm[:n_train],
        "val": perm[n_train : n_train + n_val],
        "test": perm[n_train + n_val :],
    }


def train(x, t, hidden: int = 10, seed: int = 42, config: TrainConfig = TrainConfig()) -> TrainReport:
    """Fit an MLP on raw features ``x`` (records, 6) and targets ``t`` (records, 2)."""
    x = np.asarray(x, dtype=float)
    t = np.asarray(t, dtype=float)
    if len(x) < 10:
        raise ValueError("training needs at least 10 records")
    idx = split_indices(x, t, seed, config.split)
    norm = fit_normalizer(x[idx["train"]], t[idx["train"]], log_targets=config.log_targets)
    xn, tn = norm.apply_inputs(x), norm.apply_targets(t)
    xt, tt = xn[idx["train"]], tn[idx["train"]]
    xv, tv = xn[idx["val"]], tn[idx["val"]]

    params = init(hidden, seed, n_in=x.shape[1], n_out=t.shape[1])
    w = params.flat()
    vel = np.zeros_like(w)
    lr = config.lr

    cur_obj = objective(params, xt, tt)
    train_curve = [loss(params, xt, tt)[1]]
    val_curve = [loss(params, xv, tv)[1]]
    best_epoch, best_val, best_w = 0, val_curve[0], w.copy()
    stop_reason = "max_epochs"

    for epoch in range(1, config.max_epochs + 1):
        g = gradient(params, xt, tt).flat()
        cand_vel = config.momentum * vel - lr * g
        cand = params.with_flat(w + cand_vel)
        with np.errstate(over="ignore", invalid="ignore"):
            cand_obj = objective(cand, xt, tt)
        if not np.isfinite(cand_obj):
            raise FloatingPointError("diverged: non-finite loss, try a lower lr")
        if cand_obj > cur_obj:
            lr *= 0.5
            vel = np.zeros_like(w)
        else:
            w, vel, params, cur_obj = w + cand_vel, cand_vel, cand, cand_obj
            lr *= config.lr_growth
        train_curve.append(loss(params, xt, tt)[1])
        val_curve.append(loss(params, xv, tv)[1])
        if val_curve[-1] < best_val:
            best_epoch, best_val, best_w = epoch, val_curve[-1], w.copy()
        if epoch - best_epoch >= config.patience:
            stop_reason = "patience"
            break
        if lr < config.min_lr:
            stop_reason = "lr_floor"
            break

    return TrainReport(
        epochs_run=len(train_curve) - 1,
        train_mse_curve=np.array(train_curve),
        val_mse_curve=np.array(val_curve),
        best_epoch=best_epoch,
        params=params.with_flat(best_w),
        normalizer=norm,
        hidden=hidden,
        seed=seed,
        split_indices=idx,
        stop_reason=stop_reason,
    )


def predict(params: MlpParams, norm: Normalizer, x) -> np.ndarray:
    """Raw-unit predictions for raw-unit features."""
    return norm.invert_targets(forward(params, norm.apply_inputs(x)))


@dataclass
class SweepResult:
    hidden: list[int]
    best_val_mse: list[float]
    best_epoch: list[int]
    best: int

    def rows(self):
        return list(zip(self.hidden, self.best_val_mse, self.best_epoch))


def sweep_hidden(x, t, candidates: Sequence[int], seed: int = 42, config: TrainConfig = TrainConfig()) -> SweepResult:
    """Train one model per hidden size on the same split; pick the lowest validation MSE."""
    cands = sorted(set(int(c) for c in candidates))
    if not cands:
        raise ValueError("no hidden-size candidates given")
    vals, epochs = [], []
    for h in cands:
        rep = train(x, t, hidden=h, seed=seed, config=config)
        vals.append(rep.best_val_mse)
        epochs.append(rep.best_epoch)
    # strict < keeps the smaller size on ties
    best = cands[0]
    best_val = vals[0]
    for h, v in zip(cands[1:], vals[1:]):
        if v < best_val:
            best, best_val = h, v
    return SweepResult(cands, vals, epochs, best)


def save_model(path: str | Path, params: MlpParams, norm: Normalizer, seed: int, extra: dict | None = None) -> None:
    doc = {
        "format": "vlclab-mlp/1",
        "dims": {"inputs": params.w1.shape[1], "hidden": params.hidden, "outputs": params.w2.shape[0]},
        "w1": params.w1.ravel().tolist(),
        "b1": params.b1.tolist(),
        "w2": params.w2.ravel().tolist(),
        "b2": params.b2.tolist(),
        "normalizer": norm.to_json(),
        "seed": seed,
    }
    if extra:
        doc.update(extra)
    Path(path).write_text(json.dumps(doc, indent=2, sort_keys=True) + "\n")


def load_model(path: str | Path) -> tuple[MlpParams, Normalizer, dict]:
    doc = json.loads(Path(path).read_text())
    d = doc["dims"]
    params = MlpParams(
        np.array(doc["w1"], dtype=float).reshape(d["hidden"], d["inputs"]),
        np.array(doc["b1"], dtype=float),
        np.array(doc["w2"], dtype=float).reshape(d["outputs"], d["hidden"]),
        np.array(doc["b2"], dtype=float),
    )
    return params, Normalizer.from_json(doc["normalizer"]), doc
