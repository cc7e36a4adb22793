"""Command-line surface: dataset generation, training, evaluation, ablation
sweeps and transition-matrix export.

Exit codes: 0 success, 2 usage/config error, 3 numerical failure,
4 checkpoint/dataset incompatibility, 5 mode error.
"""

from __future__ import annotations

import argparse
import itertools
import json
import sys
from pathlib import Path

import numpy as np

from . import checkpoint as ckpt
from .config import (
    ConfigError,
    RunConfig,
    config_from_dict,
    config_to_dict,
    default_config_json,
    load_config,
)
from .crf.transitions import exp_normalized, export_csv, label_names, row_argmax_agreement
from .datagen import load_split, manifest_hash, sample_dataset, write_dataset
from .metrics import write_report
from .svg import heatmap_svg
from .training import NonFiniteLossError, build_model, evaluate_model, train_model, write_epoch_log

EXIT_OK = 0
EXIT_USAGE = 2
EXIT_NUMERICAL = 3
EXIT_COMPAT = 4
EXIT_MODE = 5

CHECKPOINT_NAME = "checkpoint.bin"
EPOCH_LOG_NAME = "epochs.csv"

# grid names accepted by `ablate`, mapped to their config section/field
ABLATION_TOGGLES = {
    "use_crf": ("train", "use_crf"),
    "use_bacr_past": ("train", "use_bacr_past"),
    "use_bacr_fut": ("train", "use_bacr_fut"),
    "use_smooth": ("train", "use_smooth"),
    "duration_mode": ("decoder", "duration_mode"),
    "crf_init": ("crf", "init_mode"),
    "K": ("decoder", "num_queries"),
}


class CliError(SystemExit):
    def __init__(self, code: int, message: str):
        print(f"error: {message}", file=sys.stderr)
        super().__init__(code)


def _load_config(path: str) -> RunConfig:
    try:
        return load_config(Path(path))
    except ConfigError as exc:
        raise CliError(EXIT_USAGE, str(exc))


def cmd_gen(args) -> int:
    cfg = _load_config(args.config)
    gen = cfg.generator
    spec = gen.to_spec()
    train, test = sample_dataset(spec, gen.n_train, gen.n_test)
    out = Path(args.out)
    try:
        digest = write_dataset(out, spec, train, test)
    except OSError as exc:
        raise CliError(EXIT_USAGE, f"cannot write dataset: {exc}")
    print(f"manifest sha256: {digest}")
    print(f"wrote {len(train)} train / {len(test)} test videos to {out}")
    return EXIT_OK


def _check_data(cfg: RunConfig, data_dir: Path) -> str:
    from .datagen import load_manifest

    try:
        manifest = load_manifest(data_dir)
    except (OSError, json.JSONDecodeError) as exc:
        raise CliError(EXIT_USAGE, f"cannot read dataset manifest: {exc}")
    if (
        manifest["class_count"] != cfg.generator.num_classes
        or manifest["feature_dim"] != cfg.generator.feature_dim
    ):
        raise CliError(EXIT_COMPAT, "dataset class count / feature dim do not match config")
    return manifest_hash(data_dir)


def _train_to(cfg: RunConfig, data_dir: Path, out_dir: Path) -> Path:
    data_hash = _check_data(cfg, data_dir)
    train_videos = load_split(data_dir, "train")
    try:
        model, optimizer, log_rows = train_model(cfg, train_videos)
    except NonFiniteLossError as exc:
        raise CliError(EXIT_NUMERICAL, str(exc))
    out_dir.mkdir(parents=True, exist_ok=True)
    ckpt_path = out_dir / CHECKPOINT_NAME
    ckpt.save_checkpoint(ckpt_path, model, optimizer, cfg.train.epochs, cfg, data_hash)
    write_epoch_log(log_rows, out_dir / EPOCH_LOG_NAME)
    return ckpt_path


def cmd_train(args) -> int:
    cfg = _load_config(args.config)
    path = _train_to(cfg, Path(args.data), Path(args.out))
    print(f"checkpoint: {path}")
    return EXIT_OK


def _load_checkpoint(path: str):
    try:
        records = ckpt.read_records(Path(path))
    except (OSError, ValueError) as exc:
        raise CliError(EXIT_USAGE, f"cannot read checkpoint: {exc}")
    cfg = ckpt.stored_config(records)
    from .crf.transitions import init_transitions_random

    model = build_model(cfg, init_transitions_random(0, cfg.generator.num_classes))
    ckpt.load_model_state(model, records)
    return cfg, model, records


def cmd_eval(args) -> int:
    cfg, model, records = _load_checkpoint(args.checkpoint)
    data_dir = Path(args.data)
    if manifest_hash(data_dir) != ckpt.stored_data_hash(records):
        raise CliError(EXIT_COMPAT, "dataset manifest hash does not match checkpoint")
    videos = load_split(data_dir, "test")
    report = evaluate_model(model, cfg, videos)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    write_report(report, out / "report.csv", out / "report.json")
    print(f"mMoC: {100 * report.mmoc:.2f}")
    return EXIT_OK


def _apply_overrides(cfg_dict: dict, combo: dict) -> RunConfig:
    updated = json.loads(json.dumps(cfg_dict))
    for name, value in combo.items():
        section, field = ABLATION_TOGGLES[name]
        updated.setdefault(section, {})[field] = value
    return config_from_dict(updated)


def cmd_ablate(args) -> int:
    cfg = _load_config(args.config)
    try:
        grid = json.loads(args.grid)
    except json.JSONDecodeError as exc:
        raise CliError(EXIT_USAGE, f"bad grid JSON: {exc}")
    unknown = set(grid) - set(ABLATION_TOGGLES)
    if unknown:
        raise CliError(EXIT_USAGE, f"unknown toggles: {sorted(unknown)}")
    names = sorted(grid)
    combos = [dict(zip(names, values)) for values in itertools.product(*(grid[n] for n in names))]

    data_dir = Path(args.data)
    out_dir = Path(args.out)
    out_dir.mkdir(parents=True, exist_ok=True)
    cfg_dict = config_to_dict(cfg)
    rows = []
    for i, combo in enumerate(combos):
        combo_cfg = _apply_overrides(cfg_dict, combo)
        run_dir = out_dir / f"run_{i:03d}"
        ckpt_path = _train_to(combo_cfg, data_dir, run_dir)
        _, model, _ = _load_checkpoint(str(ckpt_path))
        report = evaluate_model(model, combo_cfg, load_split(data_dir, "test"))
        combo_label = json.dumps(combo, sort_keys=True)
        rows.extend((combo_label, *row) for row in report.csv_rows())
    with open(out_dir / "ablation.csv", "w") as fh:
        fh.write("combo,metric,alpha,beta,value\n")
        for combo_label, metric, alpha, beta, value in rows:
            fh.write(f'"{combo_label}",{metric},{alpha},{beta},{value}\n')
    print(f"{len(combos)} runs -> {out_dir / 'ablation.csv'}")
    return EXIT_OK


def cmd_export_matrix(args) -> int:
    cfg, model, _ = _load_checkpoint(args.checkpoint)
    if not cfg.train.use_crf:
        raise CliError(EXIT_MODE, "checkpoint was trained without the CRF")
    matrix = exp_normalized(model.crf.matrix().detach().cpu().numpy())
    c = cfg.generator.num_classes
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    export_csv(matrix, c, out / "transitions.csv")
    (out / "transitions.svg").write_text(heatmap_svg(matrix, label_names(c)))
    if args.compare:
        other_cfg, other_model, _ = _load_checkpoint(args.compare)
        if not other_cfg.train.use_crf:
            raise CliError(EXIT_MODE, "comparison checkpoint was trained without the CRF")
        other = exp_normalized(other_model.crf.matrix().detach().cpu().numpy())
        counts = np.full(c, 1, dtype=np.int64)  # all rows qualify without data counts
        agreement, rows = row_argmax_agreement(matrix, other, counts, min_count=1)
        print(f"row-argmax agreement: {agreement:.3f} over {rows} action rows")
    print(f"wrote {out / 'transitions.csv'} and {out / 'transitions.svg'}")
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="tcca",
        description=__doc__,
        formatter_class=argparse.RawDescriptionHelpFormatter,
        epilog="Default config (all keys overridable):\n" + default_config_json(),
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p_gen = sub.add_parser("gen", help="generate a synthetic dataset")
    p_gen.add_argument("--config", required=True)
    p_gen.add_argument("--out", required=True)
    p_gen.set_defaults(func=cmd_gen)

    p_train = sub.add_parser("train", help="train a model on a generated dataset")
    p_train.add_argument("--config", required=True)
    p_train.add_argument("--data", required=True)
    p_train.add_argument("--out", required=True)
    p_train.set_defaults(func=cmd_train)

    p_eval = sub.add_parser("eval", help="evaluate a checkpoint on the test split")
    p_eval.add_argument("--checkpoint", required=True)
    p_eval.add_argument("--data", required=True)
    p_eval.add_argument("--out", required=True)
    p_eval.set_defaults(func=cmd_eval)

    p_ablate = sub.add_parser("ablate", help="train/evaluate a toggle grid")
    p_ablate.add_argument("--config", required=True)
    p_ablate.add_argument("--data", required=True)
    p_ablate.add_argument("--grid", required=True, help='JSON, e.g. {"use_crf": [true, false]}')
    p_ablate.add_argument("--out", required=True)
    p_ablate.set_defaults(func=cmd_ablate)

    p_export = sub.add_parser("export-matrix", help="export the learned transition matrix")
    p_export.add_argument("--checkpoint", required=True)
    p_export.add_argument("--out", required=True)
    p_export.add_argument("--compare", help="second checkpoint; prints row-argmax agreement")
    p_export.set_defaults(func=cmd_export_matrix)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    return args.func(args)


if __name__ == "__main__":
    sys.exit(main())
