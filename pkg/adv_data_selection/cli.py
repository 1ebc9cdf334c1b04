"""
Command-line interface for adversarial data-selection training.

Sub-commands:

    train          run the configured training mode, write metrics, checkpoint and manifest
    eval           standard and robust accuracy of a checkpoint
    attack         attack a dataset with a checkpoint, write the attacked set and a per-sample report
    sweep-pup      train once per selected fraction and tabulate final accuracies
    gradcheck      compare analytic gradients of a fresh model with central differences
    export-curves  per-epoch CSV of a metrics stream

Exit codes: 0 success, 1 runtime failure (or gradcheck above tolerance),
2 invalid configuration.
"""

import argparse
import json
from pathlib import Path
from typing import Any, Dict, List, Optional, Sequence, Tuple

import numpy as np
import pandas as pd
from loguru import logger

from adv_data_selection import __version__
from adv_data_selection.config import get_settings
from adv_data_selection.data.cache import save_dataset
from adv_data_selection.data.dataset import Dataset
from adv_data_selection.data.sources import SplitData, load_source
from adv_data_selection.engine.attacks import pgd
from adv_data_selection.engine.numerics import (
    AnalyticGradFn,
    Model,
    check_gradients,
    init_model,
    param_grad,
    per_sample_loss,
    predict,
)
from adv_data_selection.engine.training import AdversarialTrainer, evaluate
from adv_data_selection.errors import ConfigError, InputError
from adv_data_selection.schema.records import AttackSummary, EpochMetrics, EvalReport, PupSweepRow
from adv_data_selection.schema.run_config import PupSchedule, RunConfig
from adv_data_selection.schema.validator import ConfigValidator
from adv_data_selection.storage.checkpoint import load_checkpoint, save_checkpoint
from adv_data_selection.storage.manifest import build_manifest, write_manifest
from adv_data_selection.storage.metrics_sink import MetricsWriter, export_curves
from adv_data_selection.utils.logging import setup_logging

EXIT_OK = 0
EXIT_FAILURE = 1
EXIT_CONFIG = 2

# flag name -> config paths it overrides
FLAG_PATHS: Dict[str, List[List[str]]] = {
    "seed": [["seed"]],
    "pup": [["train", "policy", "pup"]],
    "mode": [["train", "mode"]],
    "epsilon": [["train", "attack", "epsilon"], ["train", "eval_attack", "epsilon"]],
    "alpha": [["train", "attack", "alpha"], ["train", "eval_attack", "alpha"]],
    "steps": [["train", "attack", "steps"], ["train", "eval_attack", "steps"]],
    "epochs": [["train", "epochs"]],
    "lr": [["train", "learning_rate"]],
    "batch": [["train", "batch_clean_size"]],
    "output_dir": [["output", "directory"]],
}

SPLITS = ("train", "validation", "test")


def _set_path(document: Dict[str, Any], keys: Sequence[str], value: Any) -> None:
    node = document
    for key in keys[:-1]:
        child = node.get(key)
        if not isinstance(child, dict):
            child = {}
            node[key] = child
        node = child
    node[keys[-1]] = value


def _parse_assignment(assignment: str) -> Tuple[List[str], Any]:
    if "=" not in assignment:
        raise ConfigError(f"--set expects dotted.key=value, got '{assignment}'")
    key, raw = assignment.split("=", 1)
    if not key.strip():
        raise ConfigError(f"--set has an empty key: '{assignment}'")
    try:
        value = json.loads(raw)
    except json.JSONDecodeError:
        value = raw
    return key.strip().split("."), value


def load_config_file(config_path: Optional[str]) -> Dict[str, Any]:
    """Parsed JSON config; an empty document when no path is given."""
    if config_path is None:
        return {}
    path = Path(config_path)
    if not path.is_file():
        raise ConfigError(f"config file not found: {path}")
    try:
        document = json.loads(path.read_text(encoding="utf-8"))
    except json.JSONDecodeError as e:
        raise ConfigError(f"config file {path} is not valid JSON: {e}")
    if not isinstance(document, dict):
        raise ConfigError(f"config file {path} must hold a JSON object")
    return document


def resolve_config(
    config_path: Optional[str] = None,
    assignments: Sequence[str] = (),
    flags: Optional[Dict[str, Any]] = None,
    check_paths: bool = True,
) -> RunConfig:
    """
    Merge defaults, config file, ``--set`` assignments and named flags (in
    increasing precedence) and validate the result once.

    Raises:
        ConfigError: If any layer is malformed or the result is invalid
    """
    document = load_config_file(config_path)
    for assignment in assignments:
        keys, value = _parse_assignment(assignment)
        _set_path(document, keys, value)
    for name, value in (flags or {}).items():
        if value is None:
            continue
        for keys in FLAG_PATHS[name]:
            _set_path(document, keys, value)
    return ConfigValidator(check_paths=check_paths).validate_run_config(document)


def _flags(args: argparse.Namespace) -> Dict[str, Any]:
    return {name: getattr(args, name, None) for name in FLAG_PATHS}


def _pick_split(data: SplitData, name: Optional[str]) -> Dataset:
    if name is None:
        return data.eval_set()
    chosen = getattr(data, name)
    if len(chosen) == 0:
        raise InputError(f"split '{name}' is empty")
    return chosen


def _print_json(payload: Any) -> None:
    print(json.dumps(payload, indent=2, sort_keys=True))


def cmd_train(config: RunConfig, command: str = "train") -> int:
    """
    Train with ``config``; write metrics stream, checkpoints and manifest.

    Returns:
        Exit status
    """
    out_dir = Path(config.output.directory)
    data = load_source(config.dataset, config.seed)
    metrics_path = out_dir / config.output.metrics_file
    checkpoint_path = out_dir / config.output.checkpoint_file
    outputs = {"metrics": str(metrics_path), "checkpoint": str(checkpoint_path)}

    with MetricsWriter(
        metrics_path, run_label=config.train.mode.value, record_wall_time=config.output.record_wall_time
    ) as writer:

        def on_epoch(metrics: EpochMetrics, model: Model) -> None:
            writer.write(metrics)
            every = config.train.checkpoint_every
            if every and metrics.epoch % every == 0 and metrics.epoch < config.train.epochs:
                periodic = checkpoint_path.with_name(
                    f"{checkpoint_path.stem}-epoch{metrics.epoch:04d}{checkpoint_path.suffix}"
                )
                save_checkpoint(periodic, model)
                outputs[f"checkpoint_epoch_{metrics.epoch}"] = str(periodic)

        trainer = AdversarialTrainer(config.train, data.train, data.eval_set(), on_epoch=on_epoch)
        result = trainer.fit()

    save_checkpoint(checkpoint_path, result.model)
    manifest = build_manifest(
        command=command,
        seed=config.seed,
        resolved_config=config.model_dump(mode="json"),
        label_mapping=data.label_names,
        dataset_sizes=data.sizes(),
        outputs=outputs,
    )
    write_manifest(out_dir / config.output.manifest_file, manifest)
    final = result.final
    if final is not None:
        logger.info(
            f"Finished after {len(result.history)} epochs: std acc {final.standard_accuracy:.4f}, "
            f"robust acc {final.robust_accuracy:.4f}, backward passes {result.backward_pass_total}"
        )
    return EXIT_OK


def cmd_eval(checkpoint: str, config: RunConfig, split: Optional[str] = None, report_path: Optional[str] = None) -> int:
    """Print standard and robust accuracy of ``checkpoint`` on a dataset split."""
    model = load_checkpoint(checkpoint)
    data = load_source(config.dataset, config.seed)
    dataset = _pick_split(data, split)
    attack = config.train.eval_attack
    report = EvalReport(
        checkpoint=str(checkpoint),
        split=dataset.split or "all",
        rows=len(dataset),
        standard_accuracy=evaluate(model, dataset),
        robust_accuracy=evaluate(model, dataset, attack),
        attack=attack.model_dump(mode="json"),
    )
    payload = report.model_dump(mode="json")
    _print_json(payload)
    out_dir = Path(config.output.directory)
    outputs = {}
    if report_path is not None:
        target = Path(report_path)
        target.parent.mkdir(parents=True, exist_ok=True)
        target.write_text(report.model_dump_json(indent=2) + "\n", encoding="utf-8")
        outputs["report"] = str(target)
    write_manifest(
        out_dir / "eval.manifest.json",
        build_manifest("eval", config.seed, config.model_dump(mode="json"), data.label_names, data.sizes(), outputs),
    )
    return EXIT_OK


def _attack_dataset(model: Model, dataset: Dataset, config: RunConfig, epsilon: float) -> np.ndarray:
    attack = config.train.eval_attack.model_copy(update={"epsilon": float(epsilon)})
    rng = np.random.default_rng([config.seed, 5]) if attack.random_start else None
    chunk = get_settings().eval_chunk_size
    pieces = [
        pgd(model, dataset.features[start : start + chunk], dataset.labels[start : start + chunk], attack, rng)
        for start in range(0, len(dataset), chunk)
    ]
    return np.vstack(pieces) if pieces else np.empty_like(dataset.features)


def _attacked_path(out_path: Path, index: int, count: int) -> Path:
    if count == 1:
        return out_path
    return out_path.with_name(f"{out_path.stem}-eps{index}{out_path.suffix}")


def cmd_attack(
    checkpoint: str,
    config: RunConfig,
    out_path: str,
    split: Optional[str] = None,
    report_path: Optional[str] = None,
    epsilons: Optional[Sequence[float]] = None,
) -> int:
    """
    Attack a split with PGD against ``checkpoint``.

    Writes the attacked dataset (one cache per budget when sweeping), an
    optional per-sample CSV report, and prints one summary row per budget.
    """
    model = load_checkpoint(checkpoint)
    data = load_source(config.dataset, config.seed)
    dataset = _pick_split(data, split)
    attack = config.train.eval_attack
    budgets = list(epsilons) if epsilons else [attack.epsilon]
    if any(b < 0 for b in budgets):
        raise InputError("attack budgets must be non-negative")

    clean_pred = predict(model, dataset.features) if len(dataset) else np.empty(0, dtype=np.int64)
    clean_loss = per_sample_loss(model, dataset.features, dataset.labels) if len(dataset) else np.empty(0)
    summaries, frames, outputs = [], [], {}
    for index, epsilon in enumerate(budgets):
        adversarial = _attack_dataset(model, dataset, config, epsilon)
        adv_pred = predict(model, adversarial) if len(dataset) else np.empty(0, dtype=np.int64)
        adv_loss = per_sample_loss(model, adversarial, dataset.labels) if len(dataset) else np.empty(0)
        distance = np.abs(adversarial - dataset.features).max(axis=1) if len(dataset) else np.empty(0)
        out_of_range = (adversarial < attack.clip_min) | (adversarial > attack.clip_max)
        violations = int(np.count_nonzero((distance > epsilon) | out_of_range.any(axis=1)))
        flipped = adv_pred != dataset.labels
        summaries.append(
            AttackSummary(
                epsilon=float(epsilon),
                rows=len(dataset),
                flip_rate=float(flipped.mean()) if len(dataset) else 0.0,
                robust_accuracy=float(1.0 - flipped.mean()) if len(dataset) else 0.0,
                violations=violations,
            )
        )
        if violations:
            logger.error(f"{violations} attacked rows violate the eps-ball or the clip range at eps={epsilon}")
        frames.append(
            pd.DataFrame(
                {
                    "epsilon": float(epsilon),
                    "index": np.arange(len(dataset)),
                    "label": dataset.labels,
                    "clean_prediction": clean_pred,
                    "adversarial_prediction": adv_pred,
                    "flipped": flipped,
                    "clean_loss": clean_loss,
                    "adversarial_loss": adv_loss,
                    "linf_distance": distance,
                }
            )
        )
        target = _attacked_path(Path(out_path), index, len(budgets))
        save_dataset(
            target,
            Dataset(
                features=adversarial,
                labels=dataset.labels,
                class_count=dataset.class_count,
                label_names=dataset.label_names,
                split=dataset.split,
            ),
        )
        outputs[f"attacked_{index}"] = str(target)

    if report_path is not None:
        report = Path(report_path)
        report.parent.mkdir(parents=True, exist_ok=True)
        pd.concat(frames, ignore_index=True).to_csv(report, index=False)
        outputs["report"] = str(report)
    _print_json([s.model_dump(mode="json") for s in summaries])
    write_manifest(
        Path(config.output.directory) / "attack.manifest.json",
        build_manifest("attack", config.seed, config.model_dump(mode="json"), data.label_names, data.sizes(), outputs),
    )
    return EXIT_FAILURE if any(s.violations for s in summaries) else EXIT_OK


def cmd_sweep_pup(config: RunConfig, pups: Sequence[float], out_path: Optional[str] = None) -> int:
    """
    Train once per selected fraction (fixed schedule) with the same seed.

    Each run writes its own metrics stream and checkpoint under
    ``<output>/pup-<value>``; the table goes to ``out_path`` (default
    ``<output>/sweep_pup.csv``) and stdout.
    """
    if not pups:
        raise ConfigError("sweep-pup needs at least one fraction")
    data = load_source(config.dataset, config.seed)
    out_dir = Path(config.output.directory)
    rows = []
    for pup in pups:
        policy = config.train.policy.model_copy(update={"pup": float(pup), "schedule": PupSchedule.FIXED})
        raw = config.model_dump(mode="json")
        raw["train"]["policy"] = policy.model_dump(mode="json")
        raw["output"]["directory"] = str(out_dir / f"pup-{pup:g}")
        run = ConfigValidator(check_paths=False).validate_run_config(raw)
        run_dir = Path(run.output.directory)
        with MetricsWriter(
            run_dir / run.output.metrics_file, run_label=f"pup={pup:g}", record_wall_time=run.output.record_wall_time
        ) as writer:
            trainer = AdversarialTrainer(
                run.train, data.train, data.eval_set(), on_epoch=lambda m, _model: writer.write(m)
            )
            result = trainer.fit()
        save_checkpoint(run_dir / run.output.checkpoint_file, result.model)
        final = result.final
        rows.append(
            PupSweepRow(
                pup=float(pup),
                standard_accuracy=final.standard_accuracy if final else 0.0,
                robust_accuracy=final.robust_accuracy if final else 0.0,
                backward_pass_count=result.backward_pass_total,
                epochs_run=len(result.history),
            ).model_dump(mode="json")
        )
        logger.info(f"pup={pup:g}: {rows[-1]}")

    table = pd.DataFrame(rows, columns=list(PupSweepRow.model_fields))
    target = Path(out_path) if out_path is not None else out_dir / "sweep_pup.csv"
    target.parent.mkdir(parents=True, exist_ok=True)
    table.to_csv(target, index=False)
    print(table.to_string(index=False))
    write_manifest(
        out_dir / "sweep-pup.manifest.json",
        build_manifest(
            "sweep-pup", config.seed, config.model_dump(mode="json"), data.label_names, data.sizes(),
            {"table": str(target)},
        ),
    )
    return EXIT_OK


def cmd_gradcheck(
    dims: Sequence[int],
    seed: int,
    batch: int = 4,
    step: float = 1e-4,
    tolerance: Optional[float] = None,
    report_path: Optional[str] = None,
    analytic: AnalyticGradFn = param_grad,
) -> int:
    """
    Gradient check of a freshly initialized model on random inputs.

    Returns:
        0 when every checked coordinate is within tolerance, 1 otherwise
    """
    if len(dims) < 2:
        raise ConfigError("--dims needs at least an input and an output dimension")
    if batch < 1:
        raise ConfigError("--batch must be positive")
    tolerance = get_settings().gradcheck_tolerance if tolerance is None else tolerance
    rng = np.random.default_rng(seed)
    model = init_model(dims, rng)
    model.biases = [rng.uniform(-0.1, 0.1, size=b.shape) for b in model.biases]
    x = rng.uniform(0.0, 1.0, size=(batch, dims[0]))
    y = rng.integers(0, dims[-1], size=batch)
    report = check_gradients(model, x, y, step=step, tolerance=tolerance, analytic=analytic)
    payload = report.model_dump(mode="json")
    payload["max_relative_error"] = report.max_relative_error
    payload["passed"] = report.passed
    _print_json(payload)
    if report_path is not None:
        target = Path(report_path)
        target.parent.mkdir(parents=True, exist_ok=True)
        target.write_text(json.dumps(payload, indent=2, sort_keys=True) + "\n", encoding="utf-8")
        write_manifest(
            target.with_name("gradcheck.manifest.json"),
            build_manifest(
                "gradcheck", seed,
                {"dims": list(dims), "batch": batch, "step": step, "tolerance": tolerance},
                outputs={"report": str(target)},
            ),
        )
    if not report.passed:
        logger.error(f"Gradient check failed: max relative error {report.max_relative_error:.3e} >= {tolerance:g}")
        return EXIT_FAILURE
    logger.info(f"Gradient check passed: max relative error {report.max_relative_error:.3e}")
    return EXIT_OK


def cmd_export_curves(metrics_path: str, out_path: str) -> int:
    """Write the per-epoch curves CSV of a metrics stream."""
    frame = export_curves(metrics_path, out_path)
    write_manifest(
        Path(out_path).with_name("export-curves.manifest.json"),
        build_manifest(
            "export-curves", 0, {"metrics": str(metrics_path)}, outputs={"curves": str(out_path)}
        ),
    )
    print(f"{len(frame)} epochs written to {out_path}")
    return EXIT_OK


def _add_config_flags(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--config", help="JSON run configuration")
    parser.add_argument(
        "--set", dest="assignments", action="append", default=[], metavar="KEY=VALUE",
        help="Override a config field by dotted path (value parsed as JSON when possible)",
    )
    parser.add_argument("--seed", type=int, help="Run seed")
    parser.add_argument("--pup", type=float, help="Selected fraction of every batch")
    parser.add_argument(
        "--mode", choices=["standard", "robust", "ds_robust", "random_robust"], help="Training mode"
    )
    parser.add_argument("--epsilon", type=float, help="Attack budget (training and evaluation)")
    parser.add_argument("--alpha", type=float, help="PGD step size (training and evaluation)")
    parser.add_argument("--steps", type=int, help="PGD iterations (training and evaluation)")
    parser.add_argument("--epochs", type=int, help="Training epochs")
    parser.add_argument("--lr", type=float, help="SGD learning rate")
    parser.add_argument("--batch", type=int, help="Clean samples per batch (b')")
    parser.add_argument("--output-dir", dest="output_dir", help="Run output directory")


def build_parser() -> argparse.ArgumentParser:
    settings = get_settings()
    parser = argparse.ArgumentParser(
        prog="adv_data_selection",
        description=f"{settings.app_name}: adversarial training with loss-ranked data selection",
    )
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    parser.add_argument("--log-level", dest="log_level", help="Log level (default from ADS_LOG_LEVEL)")
    commands = parser.add_subparsers(dest="command", required=True)

    train = commands.add_parser("train", help="Train a model")
    _add_config_flags(train)

    evaluate_cmd = commands.add_parser("eval", help="Standard and robust accuracy of a checkpoint")
    _add_config_flags(evaluate_cmd)
    evaluate_cmd.add_argument("--checkpoint", required=True, help="Checkpoint file")
    evaluate_cmd.add_argument("--split", choices=SPLITS, help="Split to evaluate (default: eval split)")
    evaluate_cmd.add_argument("--report", help="Write the JSON report here too")

    attack = commands.add_parser("attack", help="Attack a dataset with a checkpoint")
    _add_config_flags(attack)
    attack.add_argument("--checkpoint", required=True, help="Checkpoint file")
    attack.add_argument("--split", choices=SPLITS, help="Split to attack (default: eval split)")
    attack.add_argument("--out", required=True, help="Attacked dataset cache (.npz)")
    attack.add_argument("--report", help="Per-sample CSV report")
    attack.add_argument("--epsilons", type=float, nargs="+", help="Sweep of attack budgets")

    sweep = commands.add_parser("sweep-pup", help="Final accuracies per selected fraction")
    _add_config_flags(sweep)
    sweep.add_argument("--pups", type=float, nargs="+", required=True, help="Fractions to train with")
    sweep.add_argument("--out", help="Table CSV (default: <output-dir>/sweep_pup.csv)")

    gradcheck = commands.add_parser("gradcheck", help="Finite-difference gradient check")
    gradcheck.add_argument("--dims", type=int, nargs="+", default=[4, 8, 3], help="Layer dimensions")
    gradcheck.add_argument("--seed", type=int, default=0, help="Seed of model and inputs")
    gradcheck.add_argument("--batch", type=int, default=4, help="Rows in the checked batch")
    gradcheck.add_argument("--step", type=float, default=1e-4, help="Finite-difference step")
    gradcheck.add_argument("--tolerance", type=float, help="Max relative error (default from settings)")
    gradcheck.add_argument("--report", help="Write the JSON report here too")

    curves = commands.add_parser("export-curves", help="Per-epoch CSV of a metrics stream")
    curves.add_argument("--metrics", required=True, help="Metrics stream (.jsonl)")
    curves.add_argument("--out", required=True, help="Curves CSV")
    return parser


def _dispatch(args: argparse.Namespace) -> int:
    if args.command == "gradcheck":
        return cmd_gradcheck(args.dims, args.seed, args.batch, args.step, args.tolerance, args.report)
    if args.command == "export-curves":
        return cmd_export_curves(args.metrics, args.out)

    config = resolve_config(args.config, args.assignments, _flags(args))
    if args.command == "train":
        return cmd_train(config)
    if args.command == "eval":
        return cmd_eval(args.checkpoint, config, args.split, args.report)
    if args.command == "attack":
        return cmd_attack(args.checkpoint, config, args.out, args.split, args.report, args.epsilons)
    return cmd_sweep_pup(config, args.pups, args.out)


def main(argv: Optional[Sequence[str]] = None) -> int:
    """
    Entry point.

    Args:
        argv: Arguments without the program name; sys.argv when omitted

    Returns:
        Exit status
    """
    args = build_parser().parse_args(argv)
    setup_logging(args.log_level)
    try:
        return _dispatch(args)
    except ConfigError as e:
        logger.error(f"Invalid configuration: {str(e)}")
        return EXIT_CONFIG
    except Exception as e:
        logger.error(f"{args.command} failed: {str(e)}")
        return EXIT_FAILURE
