"""Command-line entry point.

Subcommands cover the whole pipeline: `generate` synthetic farms,
`baseline` extraction, `align` fitting, `train`, `predict`, and the
`transfer` experiment grid. Each command reads a declarative JSON config
(`--config`); `--out` and `--seed` override the output directory and seed.
Outputs carry a provenance header (tool version, config hash, seed) and are
byte-identical across reruns with identical inputs.
"""

from __future__ import annotations

import argparse
import hashlib
import json
import sys
from pathlib import Path

from . import __version__
from .baseline import (
    DEFAULT_BINS,
    GridSearchSpec,
    export_scatter_csv,
    fit_alignment,
    learn_baseline,
)
from .data import FarmDataset, load_csv, min_max_normalize, save_csv
from .errors import ConfigError, WindclfError
from .evaluate import build_mixed, transfer_experiment
from .models import (
    TrainParams,
    config_from_dict,
    load_bundle,
    predict,
    save_bundle,
    train,
)
from .synth import FarmProfile, generate_farm


def _load_config(path: str) -> tuple[dict, str]:
    try:
        with open(path, encoding="utf-8") as fh:
            text = fh.read()
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from exc
    try:
        config = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ConfigError(f"config {path} is not valid JSON: {exc}") from exc
    digest = hashlib.sha256(
        json.dumps(config, sort_keys=True, separators=(",", ":")).encode("utf-8")
    ).hexdigest()
    return config, digest


def _provenance(config_hash: str, seed: int | None = None) -> dict:
    prov = {"tool": "windclf", "version": __version__, "config_sha256": config_hash}
    if seed is not None:
        prov["seed"] = seed
    return prov


def _provenance_comment(prov: dict) -> str:
    return " ".join(f"{k}={v}" for k, v in sorted(prov.items()))


def _require(config: dict, key: str, command: str):
    if key not in config:
        raise ConfigError(f"{command} config requires {key!r}")
    return config[key]


def _load_farm(path: str, normalize: bool) -> FarmDataset:
    p = Path(path)
    if not p.exists():
        raise ConfigError(f"input file does not exist: {path}")
    ds = load_csv(p)
    return min_max_normalize(ds) if normalize else ds


def _grid_from_config(raw: dict | None) -> GridSearchSpec | None:
    if raw is None:
        return None
    kwargs = dict(raw)
    for key in ("alpha_range", "beta_range"):
        if key in kwargs:
            kwargs[key] = tuple(kwargs[key])
    return GridSearchSpec(**kwargs)


def cmd_generate(config: dict, out_dir: Path, config_hash: str, seed: int | None) -> list[Path]:
    profiles_raw = _require(config, "profiles", "generate")
    profiles = []
    for raw in profiles_raw:
        if seed is not None:
            raw = {**raw, "seed": seed}
        profiles.append(FarmProfile.from_dict(raw))
    written = []
    for profile in profiles:
        farm = generate_farm(profile)
        csv_path = out_dir / f"{profile.farm_id}.csv"
        save_csv(farm, csv_path)
        written.append(csv_path)
    echo_path = out_dir / "profiles.json"
    with open(echo_path, "w", encoding="utf-8") as fh:
        json.dump(
            {
                "provenance": _provenance(config_hash, seed),
                "profiles": [p.to_dict() for p in profiles],
            },
            fh,
            indent=2,
            sort_keys=True,
        )
        fh.write("\n")
    written.append(echo_path)
    return written


def cmd_baseline(config: dict, out_dir: Path, config_hash: str, seed: int | None) -> list[Path]:
    farm_csv = _require(config, "farm_csv", "baseline")
    ds = _load_farm(farm_csv, config.get("normalize", True))
    curve = learn_baseline(
        ds,
        n_ws=config.get("n_ws", DEFAULT_BINS),
        n_pw=config.get("n_pw", DEFAULT_BINS),
        min_support=config.get("min_support", 10),
    )
    out = out_dir / f"{ds.farm_id}_baseline.csv"
    curve.to_csv(out, header_comment=_provenance_comment(_provenance(config_hash)))
    written = [out]
    if config.get("scatter", False):
        scatter_path = out_dir / f"{ds.farm_id}_scatter.csv"
        export_scatter_csv(
            ds,
            scatter_path,
            max_points=config.get("scatter_max_points", 20000),
            seed=config.get("scatter_seed", 0),
            header_comment=_provenance_comment(_provenance(config_hash)),
        )
        written.append(scatter_path)
    return written


def cmd_align(config: dict, out_dir: Path, config_hash: str, seed: int | None) -> list[Path]:
    source = _load_farm(_require(config, "source_csv", "align"), config.get("normalize", True))
    reference = _load_farm(
        _require(config, "reference_csv", "align"), config.get("normalize", True)
    )
    params = fit_alignment(source, reference, _grid_from_config(config.get("grid")))
    out = out_dir / "alignment.json"
    params.save(out, extra={"provenance": _provenance(config_hash)})
    return [out]


def cmd_train(config: dict, out_dir: Path, config_hash: str, seed: int | None) -> list[Path]:
    model_config = config_from_dict(_require(config, "model", "train"))
    ds = _load_farm(_require(config, "train_csv", "train"), config.get("normalize", True))
    if seed is None:
        seed = _require(config, "seed", "train")
    params = TrainParams(
        seed=int(seed),
        epochs=config.get("epochs"),
        batch_size=config.get("batch_size", 256),
    )
    bundle = train(model_config, ds, params)
    out = out_dir / config.get("model_name", "model.windclf")
    save_bundle(bundle, out, provenance=_provenance(config_hash, params.seed))
    return [out]


def cmd_predict(config: dict, out_dir: Path, config_hash: str, seed: int | None) -> list[Path]:
    model_path = _require(config, "model_path", "predict")
    if not Path(model_path).exists():
        raise ConfigError(f"input file does not exist: {model_path}")
    bundle = load_bundle(model_path)
    ds = _load_farm(_require(config, "data_csv", "predict"), config.get("normalize", True))
    preds = predict(bundle, ds)
    out = out_dir / "predictions.csv"
    with open(out, "w", newline="", encoding="utf-8") as fh:
        fh.write(f"# {_provenance_comment(_provenance(config_hash))}\n")
        fh.write(f"# records_total={preds.n_records_total} unpredicted={preds.n_unpredicted}\n")
        prob_cols = [f"p_{name}" for name in preds.label_vocab]
        fh.write(",".join(["timestamp", "turbine_id", "predicted", *prob_cols]) + "\n")
        for i in range(len(preds)):
            row = [
                str(int(preds.timestamps[i])),
                preds.turbine_ids[i],
                preds.label_vocab[int(preds.predicted[i])],
                *[repr(float(p)) for p in preds.probabilities[i]],
            ]
            fh.write(",".join(row) + "\n")
    return [out]


def cmd_transfer(config: dict, out_dir: Path, config_hash: str, seed: int | None) -> list[Path]:
    model_config = config_from_dict(_require(config, "model", "transfer"))
    normalize = config.get("normalize", True)
    farms = [_load_farm(p, normalize) for p in _require(config, "farm_csvs", "transfer")]
    if seed is None:
        seed = _require(config, "seed", "transfer")
    train_farms = list(farms)
    test_farms = list(farms)
    mixed_cfg = config.get("mixed")
    if mixed_cfg:
        by_id = {f.farm_id: f for f in farms}
        members = [by_id[m] for m in _require(mixed_cfg, "members", "transfer.mixed")]
        mixed = build_mixed(
            members,
            _require(mixed_cfg, "reference", "transfer.mixed"),
            grid=_grid_from_config(config.get("grid")),
        )
        train_farms.append(mixed.dataset)
    matrix = transfer_experiment(
        train_farms,
        test_farms,
        model_config,
        seed=int(seed),
        align=config.get("align", False),
        test_fraction=config.get("test_fraction", 1.0 / 3.0),
        epochs=config.get("epochs"),
        batch_size=config.get("batch_size"),
        grid=_grid_from_config(config.get("grid")),
    )
    json_path = out_dir / "transfer.json"
    matrix.save_json(json_path, provenance=_provenance(config_hash, int(seed)))
    text_path = out_dir / "transfer.txt"
    with open(text_path, "w", encoding="utf-8") as fh:
        fh.write(f"# {_provenance_comment(_provenance(config_hash, int(seed)))}\n")
        fh.write(matrix.render())
    return [json_path, text_path]


_COMMANDS = {
    "generate": cmd_generate,
    "baseline": cmd_baseline,
    "align": cmd_align,
    "train": cmd_train,
    "predict": cmd_predict,
    "transfer": cmd_transfer,
}


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="windclf",
        description="Wind-turbine operational status classification toolkit",
    )
    parser.add_argument("--version", action="version", version=f"windclf {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)
    for name in _COMMANDS:
        p = sub.add_parser(name, help=f"run the {name} step from a JSON config")
        p.add_argument("--config", required=True, help="path to the JSON config file")
        p.add_argument("--out", default=".", help="output directory (created if missing)")
        p.add_argument("--seed", type=int, default=None, help="override the config seed")
    return parser


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        config, config_hash = _load_config(args.config)
        out_dir = Path(args.out)
        out_dir.mkdir(parents=True, exist_ok=True)
        written = _COMMANDS[args.command](config, out_dir, config_hash, args.seed)
        for path in written:
            if not path.exists():
                raise WindclfError(f"expected output {path} was not written")
            print(f"wrote {path}")
    except WindclfError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except (ValueError, OSError, KeyError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    return 0


if __name__ == "__main__":
    raise SystemExit(main())
