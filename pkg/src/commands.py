import argparse
import json
import logging
import re
from pathlib import Path
from typing import Dict, List, Tuple

import numpy as np

from src.config import config
from src.const import EXIT_OK, MASK_FILENAME, PROB_FILENAME, PROBABILITY_SCALE, RAW_MAXVAL
from src.errors import ConsistencyError, UsageError
from src.fusion_strategies import strategies
from src.services.ensemble import Ensemble, load_ensemble_spec, save_ensemble_spec
from src.services.exam import ExamStore, read_mask, write_mask
from src.services.grid import DEFAULT_GRID_SOURCE, default_grid, run_grid
from src.services.pgm import write_pgm
from src.services.phantom import write_phantom_dataset
from src.services.report import evaluate_exam_set, write_report
from src.services.stacking import normalize_exam, split_dataset, stack_25d
from src.types.exam import Mask
from src.types.fusion_strategy import EnsembleSpec
from src.types.run_config import load_run_config

logger = logging.getLogger(__name__)


def parse_size(value: str) -> Tuple[int, int]:
    """Parse an HxW size flag such as 224x224."""
    match = re.fullmatch(r"(\d+)[xX](\d+)", value.strip())
    if not match:
        raise UsageError(f"Size must look like HxW, got {value!r}")
    return int(match.group(1)), int(match.group(2))


def _require_dir(path: Path, flag: str) -> Path:
    if not path.is_dir():
        raise UsageError(f"{flag} {path} is not a directory")
    return path


def cmd_phantom(args: argparse.Namespace) -> int:
    """Write synthetic phantom Exam Directories."""
    if args.count < 1:
        raise UsageError(f"--count must be at least 1, got {args.count}")
    manifest = write_phantom_dataset(Path(args.out), args.count, args.seed, size=parse_size(args.size))
    print(manifest)
    return EXIT_OK


def cmd_train(args: argparse.Namespace) -> int:
    """Train the hyperparameter grid and write ensemble.json naming the three best runs."""
    config_path = Path(args.config)
    if not config_path.is_file():
        raise UsageError(f"--config {config_path} does not exist")
    run_config = load_run_config(config_path)

    data_dir = Path(args.data) if args.data else run_config.data_dir
    out_dir = Path(args.out) if args.out else run_config.output_dir
    if data_dir is None or out_dir is None:
        raise UsageError("Both a data directory and an output directory are required")
    _require_dir(data_dir, "--data")
    out_dir.mkdir(parents=True, exist_ok=True)

    if run_config.grid is not None:
        grid, source = run_config.grid, "run config"
    else:
        grid, source = default_grid(epochs=run_config.epochs), DEFAULT_GRID_SOURCE
    if args.epochs is not None:
        grid = [train_config.model_copy(update={"epochs": args.epochs}) for train_config in grid]

    store = ExamStore(data_dir)
    exams = store.load_all()
    split_seed = run_config.split.seed if run_config.split.seed is not None else args.seed
    split = split_dataset(exams, run_config.split.fractions, split_seed)
    (out_dir / "split.json").write_text(split.model_dump_json(indent=2) + "\n", encoding="utf-8")

    result = run_grid(
        grid,
        split,
        store,
        out_dir,
        network_config=run_config.network,
        pretrained_path=config.pretrained_encoder_path,
        source=source,
    )
    spec = EnsembleSpec(
        members=[entry.checkpoint_path for entry in result.ensemble_members()],
        strategy=run_config.ensemble.strategy,
        threshold=run_config.ensemble.threshold,
    )
    ensemble_path = save_ensemble_spec(spec, out_dir / "ensemble.json")
    print(ensemble_path)
    return EXIT_OK


def _probability_pixels(values: np.ndarray) -> np.ndarray:
    return np.clip(np.rint(values.astype(np.float64) * PROBABILITY_SCALE), 0, RAW_MAXVAL).astype(np.uint16)


def cmd_predict(args: argparse.Namespace) -> int:
    """Fuse the ensemble's predictions for every exam in the data directory."""
    ensemble_path = Path(args.ensemble)
    spec = load_ensemble_spec(ensemble_path)
    data_dir = _require_dir(Path(args.data), "--data")
    out_dir = Path(args.out)
    out_dir.mkdir(parents=True, exist_ok=True)

    ensemble = Ensemble.from_spec(spec, base_dir=ensemble_path.parent, strategy=args.strategy)
    store = ExamStore(data_dir)
    for exam in store.load_all():
        normalized = normalize_exam(exam)
        stacks = [stack_25d(normalized, index) for index in range(normalized.num_slices)]
        exam_dir = out_dir / exam.id
        exam_dir.mkdir(parents=True, exist_ok=True)
        for index, (mask, probs) in enumerate(ensemble.predict_many(stacks)):
            write_mask(exam_dir / MASK_FILENAME.format(index=index), mask)
            for member, prob in enumerate(probs):
                write_pgm(
                    exam_dir / PROB_FILENAME.format(member=member, index=index),
                    _probability_pixels(prob.values),
                    maxval=RAW_MAXVAL,
                )
        logger.info(f"Predicted {exam.num_slices} slices of exam {exam.id}")

    summary = {
        "strategy": args.strategy or spec.strategy,
        "threshold": spec.threshold,
        "members": [member.as_posix() for member in spec.members],
    }
    (out_dir / "predict.json").write_text(json.dumps(summary, indent=2) + "\n", encoding="utf-8")
    return EXIT_OK


def cmd_evaluate(args: argparse.Namespace) -> int:
    """Score predicted masks against reference exams and write report.csv and slices.csv."""
    pred_dir = _require_dir(Path(args.pred), "--pred")
    store = ExamStore(_require_dir(Path(args.ref), "--ref"))
    exams = {exam.id: exam for exam in store.load_all()}

    problems: List[str] = []
    preds: Dict[str, List[Mask]] = {}
    refs: Dict[str, List[Mask]] = {}
    for exam_id, exam in exams.items():
        if exam.masks is None:
            problems.append(f"{exam_id}: reference exam has no masks")
            continue
        exam_pred_dir = pred_dir / exam_id
        if not exam_pred_dir.is_dir():
            exam_pred_dir = pred_dir / store.path(exam_id).name
        masks = []
        for index in range(exam.num_slices):
            mask_path = exam_pred_dir / MASK_FILENAME.format(index=index)
            if not mask_path.is_file():
                problems.append(f"{exam_id}: missing predicted {mask_path.name}")
                continue
            masks.append(read_mask(mask_path, exam_id, index))
        preds[exam_id] = masks
        refs[exam_id] = exam.masks
    if problems:
        raise ConsistencyError("Cannot align predictions with references: " + "; ".join(problems))

    report, slices = evaluate_exam_set(preds, refs, exams)
    write_report(report, slices, Path(args.out))
    print(report.format_table())
    print(report.format_row("overall"))
    return EXIT_OK


def register_commands(subparsers: argparse._SubParsersAction) -> None:
    """Attach the four subcommands; each dispatches through `args.handler`."""
    phantom = subparsers.add_parser("phantom", help="generate synthetic phantom exams")
    phantom.add_argument("--out", required=True, help="output directory")
    phantom.add_argument("--count", type=int, required=True, help="number of exams")
    phantom.add_argument("--size", default="64x64", help="slice size as HxW (default 64x64)")
    phantom.set_defaults(handler=cmd_phantom)

    train = subparsers.add_parser("train", help="train the hyperparameter grid and select the ensemble")
    train.add_argument("--config", required=True, help="run config (JSON or YAML)")
    train.add_argument("--data", help="directory of Exam Directories")
    train.add_argument("--out", help="run output directory")
    train.add_argument("--epochs", type=int, help="override the epoch count of every grid run")
    train.set_defaults(handler=cmd_train)

    predict = subparsers.add_parser("predict", help="fuse ensemble predictions")
    predict.add_argument("--ensemble", required=True, help="ensemble.json")
    predict.add_argument("--data", required=True, help="directory of Exam Directories")
    predict.add_argument("--out", required=True, help="prediction output directory")
    predict.add_argument("--strategy", choices=sorted(strategies), help="override the fusion strategy")
    predict.set_defaults(handler=cmd_predict)

    evaluate = subparsers.add_parser("evaluate", help="write the region report")
    evaluate.add_argument("--pred", required=True, help="directory of predicted masks per exam")
    evaluate.add_argument("--ref", required=True, help="directory of reference Exam Directories")
    evaluate.add_argument("--out", required=True, help="report output directory")
    evaluate.set_defaults(handler=cmd_evaluate)

    for parser in (phantom, train, predict, evaluate):
        # accepted after the subcommand too; falls back to the global --seed
        parser.add_argument("--seed", type=int, default=argparse.SUPPRESS, help="phantom and split seed")
