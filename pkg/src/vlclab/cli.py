"""``vlclab`` command line.

Exit codes: 0 success, 1 runtime failure, 2 usage or configuration error.
Settings resolve as command-line flags > ``--config`` TOML file > defaults.
"""
from __future__ import annotations

import argparse
import csv
import hashlib
import json
import sys
from dataclasses import asdict, fields, replace
from pathlib import Path

from . import campaign, mlp, spectra
from .campaign import FeatureVector, GroundTruth
from .modem import OfdmConfig

if sys.version_info >= (3, 11):
    import tomllib
else:
    import tomli as tomllib


class UsageError(Exception):
    pass


def _load_toml(path: str | None) -> dict:
    if not path:
        return {}
    p = Path(path)
    if not p.is_file():
        raise UsageError(f"config file not found: {path}")
    try:
        return tomllib.loads(p.read_text())
    except tomllib.TOMLDecodeError as exc:
        raise UsageError(f"{path}: {exc}") from None


def _section(cfg: dict, name: str, cls, overrides: dict):
    section = dict(cfg.get(name, {}))
    known = {f.name for f in fields(cls)}
    unknown = set(section) - known
    if unknown:
        raise UsageError(f"[{name}] unknown keys: {', '.join(sorted(unknown))}")
    section.update({k: v for k, v in overrides.items() if v is not None})
    if "split" in section:
        section["split"] = tuple(section["split"])
    try:
        return cls(**section)
    except (TypeError, ValueError) as exc:
        raise UsageError(f"[{name}] {exc}") from None


def _setting(args, cfg: dict, key: str, default, section: str = "run"):
    v = getattr(args, key, None)
    if v is not None:
        return v
    return cfg.get(section, {}).get(key, default)


def _resolve(args) -> dict:
    raw = _load_toml(args.config)
    ofdm = _section(raw, "ofdm", OfdmConfig, {"n": args.n, "cp_len": args.cp_len})
    gt = _section(raw, "ground_truth", GroundTruth, {"sigma0": getattr(args, "sigma0", None)})
    tr = _section(raw, "train", mlp.TrainConfig, {
        "max_epochs": getattr(args, "max_epochs", None),
        "patience": getattr(args, "patience", None),
        "lr": getattr(args, "lr", None),
    })
    seed = _setting(args, raw, "seed", 42)
    if not isinstance(seed, int) or seed < 0:
        raise UsageError("seed must be an unsigned integer")
    return {"ofdm": ofdm, "ground_truth": gt, "train": tr, "seed": seed, "raw": raw}


def config_hash(resolved: dict, **extra) -> str:
    doc = {
        "ofdm": asdict(resolved["ofdm"]),
        "ground_truth": asdict(resolved["ground_truth"]),
        "train": asdict(resolved["train"]),
        "seed": resolved["seed"],
        **extra,
    }
    blob = json.dumps(doc, sort_keys=True, default=str).encode()
    return hashlib.sha256(blob).hexdigest()[:16]


def _out_dir(path: str) -> Path:
    p = Path(path)
    p.mkdir(parents=True, exist_ok=True)
    return p


def _need_file(path: str) -> Path:
    p = Path(path)
    if not p.is_file():
        raise UsageError(f"file not found: {path}")
    return p


def _write_csv(path: Path, header, rows) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        w.writerows(rows)


def _write_json(path: Path, doc: dict) -> None:
    path.write_text(json.dumps(doc, indent=2, sort_keys=True) + "\n")


# ---------------------------------------------------------------- commands


def cmd_reflectance(args) -> int:
    band = (args.band_lo, args.band_hi)
    if args.material or args.led:
        if not (args.material and args.led):
            raise UsageError("--material and --led go together")
        try:
            rho = spectra.builtin_reflectance(spectra.Material.parse(args.material), spectra.Led.parse(args.led))
        except ValueError as exc:
            raise UsageError(str(exc)) from None
    else:
        if not (args.refl and args.spd):
            raise UsageError("give --refl and --spd CSV files, or --material and --led")
        try:
            refl = spectra.read_spectrum(_need_file(args.refl), kind="reflectance")
            spd = spectra.read_spectrum(_need_file(args.spd), kind="power")
        except ValueError as exc:
            raise UsageError(str(exc)) from None
        rho = spectra.average_reflectance(refl, spd, band)
    print(f"{rho:.6g}")
    return 0


def _features_from_args(args) -> FeatureVector:
    try:
        led = spectra.Led.parse(args.led)
        if args.reflectivity is not None:
            rho = args.reflectivity
        else:
            rho = spectra.builtin_reflectance(spectra.Material.parse(args.material), led)
        return FeatureVector.make(rho, spectra.builtin_led_power(led), args.los, args.noise_level, args.distance)
    except ValueError as exc:
        raise UsageError(str(exc)) from None


def cmd_simulate(args) -> int:
    res = _resolve(args)
    gt = res["ground_truth"]
    if args.noiseless:
        gt = replace(gt, sigma0=0.0)
    f = _features_from_args(args)
    rec = campaign.run_measurement(f, args.repeats, res["seed"], res["ofdm"], gt)
    rows = [["h1", "h2", "h1_true", "h2_true"],
            [repr(float(rec.h_est[0])), repr(float(rec.h_est[1])),
             repr(float(rec.h_true[0])), repr(float(rec.h_true[1]))]]
    if args.out:
        _write_csv(Path(args.out), rows[0], rows[1:])
    else:
        csv.writer(sys.stdout, lineterminator="\n").writerows(rows)
    return 0


def cmd_campaign(args) -> int:
    res = _resolve(args)
    out = _out_dir(args.out_dir)
    seed, cfg, gt = res["seed"], res["ofdm"], res["ground_truth"]
    h = config_hash(res, repeats=args.repeats, full_test_grid=args.full_test_grid)
    ds = campaign.generate_training_campaign(seed, args.repeats, cfg, gt)
    ds.metadata["config_hash"] = h
    campaign.write_dataset(ds, out / "train.csv")
    distances = campaign.TEST_GRID_CM if args.full_test_grid else None
    for name in campaign.HYBRIDS:
        test = campaign.generate_hybrid_test(name, seed, distances, args.repeats, cfg, gt)
        test.metadata["config_hash"] = h
        campaign.write_dataset(test, out / f"test_{name}.csv")
    print(f"wrote {len(ds)} training records and 2 hybrid test sets to {out}")
    return 0


def _load_dataset(path: str) -> campaign.Dataset:
    try:
        return campaign.read_dataset(_need_file(path))
    except (KeyError, ValueError) as exc:
        raise UsageError(f"{path}: {exc}") from None


def cmd_train(args) -> int:
    res = _resolve(args)
    ds = _load_dataset(args.dataset)
    hidden = _setting(args, res["raw"], "hidden", 10)
    rep = mlp.train(ds.features(), ds.targets(), hidden, res["seed"], res["train"])
    out = _out_dir(args.out_dir)
    h = config_hash(res, hidden=hidden, dataset=ds.metadata.get("config_hash"))
    mlp.save_model(out / "model.json", rep.params, rep.normalizer, rep.seed, extra={
        "split": list(res["train"].split),
        "best_epoch": rep.best_epoch,
        "best_val_mse": rep.best_val_mse,
        "epochs_run": rep.epochs_run,
        "config_hash": h,
    })
    _write_csv(out / "mse_curve.csv", ["epoch", "train_mse", "val_mse"], [
        (i, repr(float(a)), repr(float(b)))
        for i, (a, b) in enumerate(zip(rep.train_mse_curve, rep.val_mse_curve))
    ])
    print(f"hidden={hidden} best_epoch={rep.best_epoch} best_val_mse={rep.best_val_mse:.6g} "
          f"epochs={rep.epochs_run} ({rep.stop_reason})")
    return 0


def _parse_candidates(text: str) -> list[int]:
    try:
        c = [int(v) for v in text.split(",") if v.strip()]
    except ValueError:
        raise UsageError(f"bad --candidates {text!r}") from None
    if not c or min(c) < 1:
        raise UsageError("--candidates needs positive integers")
    return c


DEFAULT_CANDIDATES = "2,4,6,8,10,12,15,20"


def cmd_sweep(args) -> int:
    res = _resolve(args)
    ds = _load_dataset(args.dataset)
    cands = _parse_candidates(args.candidates)
    result = mlp.sweep_hidden(ds.features(), ds.targets(), cands, res["seed"], res["train"])
    out = _out_dir(args.out_dir)
    rows = [(h, repr(v), e) for h, v, e in result.rows()]
    _write_csv(out / "sweep.csv", ["hidden", "best_val_mse", "best_epoch"], rows)
    _write_json(out / "sweep.json", {
        "best_hidden": result.best,
        "candidates": result.hidden,
        "config_hash": config_hash(res, candidates=result.hidden),
    })
    for h, v, e in result.rows():
        print(f"hidden={h:3d} best_val_mse={v:.6g} best_epoch={e}")
    print(f"best hidden size: {result.best}")
    return 0


def cmd_evaluate(args) -> int:
    res = _resolve(args)
    try:
        params, norm, doc = mlp.load_model(_need_file(args.model))
    except (KeyError, ValueError) as exc:
        raise UsageError(f"{args.model}: {exc}") from None
    ds = _load_dataset(args.dataset)
    x, t = ds.features(), ds.targets()
    if args.split != "all":
        idx = mlp.split_indices(x, t, doc["seed"], tuple(doc.get("split", (0.7, 0.15, 0.15))))
        x, t = x[idx[args.split]], t[idx[args.split]]
    report = campaign.score(mlp.predict(params, norm, x), t, args.bins)
    out = _out_dir(args.out_dir)
    stem = Path(args.dataset).stem + ("" if args.split == "all" else f"_{args.split}")
    doc_out = report.to_json()
    doc_out.update({
        "dataset": str(args.dataset),
        "split": args.split,
        "model_config_hash": doc.get("config_hash"),
        "config_hash": config_hash(res, dataset=str(args.dataset), split=args.split),
    })
    _write_json(out / f"eval_{stem}.json", doc_out)
    for j, tap in enumerate(("h1", "h2")):
        _write_csv(out / f"hist_{stem}_{tap}.csv", ["bin_lo", "bin_hi", "count"],
                   [(repr(lo), repr(hi), c) for lo, hi, c in report.histogram_rows(j)])
    print(f"{stem}: records={report.n_records} "
          f"mse h1={report.mse[0]:.3g} h2={report.mse[1]:.3g} "
          f"mean%err h1={report.mean_pct_error[0]:.3f} h2={report.mean_pct_error[1]:.3f}")
    return 0


# ---------------------------------------------------------------- parser


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="TOML config file")
    common.add_argument("--seed", type=int)
    common.add_argument("--n", type=int, help="OFDM frame length")
    common.add_argument("--cp-len", type=int)

    training = argparse.ArgumentParser(add_help=False)
    training.add_argument("--max-epochs", type=int)
    training.add_argument("--patience", type=int)
    training.add_argument("--lr", type=float)

    p = argparse.ArgumentParser(prog="vlclab", description="ACO-OFDM VLC channel-tap lab")
    sub = p.add_subparsers(dest="command", required=True)

    r = sub.add_parser("reflectance", help="VL-band average reflectance")
    r.add_argument("--refl", help="reflectance CSV (wavelength_nm,value)")
    r.add_argument("--spd", help="LED spectral power CSV")
    r.add_argument("--material")
    r.add_argument("--led")
    r.add_argument("--band-lo", type=float, default=spectra.VL_BAND_NM[0])
    r.add_argument("--band-hi", type=float, default=spectra.VL_BAND_NM[1])
    r.set_defaults(func=cmd_reflectance)

    s = sub.add_parser("simulate", parents=[common], help="estimate taps for one feature vector")
    s.add_argument("--material", default="plaster")
    s.add_argument("--reflectivity", type=float, help="overrides --material")
    s.add_argument("--led", default="white")
    s.add_argument("--los", type=int, default=1)
    s.add_argument("--noise-level", type=int, default=1)
    s.add_argument("--distance", type=float, default=100.0, help="cm")
    s.add_argument("--repeats", type=int, default=10)
    s.add_argument("--sigma0", type=float)
    s.add_argument("--noiseless", action="store_true")
    s.add_argument("--out")
    s.set_defaults(func=cmd_simulate)

    c = sub.add_parser("campaign", parents=[common], help="generate training and hybrid test sets")
    c.add_argument("--out-dir", default="out")
    c.add_argument("--repeats", type=int, default=10)
    c.add_argument("--sigma0", type=float)
    c.add_argument("--full-test-grid", action="store_true", help="use every 5 cm test distance")
    c.set_defaults(func=cmd_campaign)

    t = sub.add_parser("train", parents=[common, training], help="train the tap MLP")
    t.add_argument("--dataset", required=True)
    t.add_argument("--hidden", type=int)
    t.add_argument("--out-dir", default="out")
    t.set_defaults(func=cmd_train)

    w = sub.add_parser("sweep", parents=[common, training], help="hidden-size sweep")
    w.add_argument("--dataset", required=True)
    w.add_argument("--candidates", default=DEFAULT_CANDIDATES)
    w.add_argument("--out-dir", default="out")
    w.set_defaults(func=cmd_sweep)

    e = sub.add_parser("evaluate", parents=[common], help="score a model on a dataset")
    e.add_argument("--model", required=True)
    e.add_argument("--dataset", required=True)
    e.add_argument("--split", choices=("all", "train", "val", "test"), default="all")
    e.add_argument("--bins", type=int, default=20)
    e.add_argument("--out-dir", default="out")
    e.set_defaults(func=cmd_evaluate)
    return p


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except UsageError as exc:
        print(f"vlclab {args.command}: {exc}", file=sys.stderr)
        return 2
    except Exception as exc:  # noqa: BLE001
        print(f"vlclab {args.command}: {type(exc).__name__}: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
