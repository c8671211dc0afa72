"""navtrain command line: train, transfer, evaluate."""

from __future__ import annotations

import argparse
import json
import sys

from .evaluate import evaluate
from .train import TrainSpec, compare_transfer_to_scratch, train, transfer_train


def _spec_from_args(args) -> TrainSpec:
    return TrainSpec(
        dataset_dir=args.dataset,
        pretrain_dir=getattr(args, "pretrain", None),
        backbone=args.backbone,
        pretrained_weights=args.pretrained,
        freeze_backbone=args.freeze,
        epochs=args.epochs,
        pretrain_epochs=getattr(args, "pretrain_epochs", args.epochs),
        batch_size=args.batch_size,
        learning_rate=args.lr,
        seed=args.seed,
        deterministic=not args.no_deterministic,
        checkpoint_path=args.checkpoint,
        metrics_path=args.metrics,
    )


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(
        prog="navtrain",
        description="train and evaluate navigation-error regressors on SAR pair datasets",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    def training_args(p, transfer=False):
        p.add_argument("--dataset", required=True, help="dataset directory")
        if transfer:
            p.add_argument("--pretrain", required=True, help="pretraining dataset directory")
            p.add_argument("--pretrain-epochs", type=int, default=30)
        p.add_argument("--backbone", choices=("small", "wide50"), default="small")
        p.add_argument("--pretrained", action="store_true",
                       help="load image-classification weights for the wide backbone")
        p.add_argument("--freeze", action="store_true", help="freeze backbone weights")
        p.add_argument("--epochs", type=int, default=30)
        p.add_argument("--batch-size", type=int, default=32)
        p.add_argument("--lr", type=float, default=1e-4)
        p.add_argument("--seed", type=int, default=0)
        p.add_argument("--no-deterministic", action="store_true")
        p.add_argument("--checkpoint", default="model.pt")
        p.add_argument("--metrics", help="per-epoch metrics JSON output path")

    p_train = sub.add_parser("train", help="train on one dataset")
    training_args(p_train)
    p_train.set_defaults(run=lambda a: train(_spec_from_args(a)))

    p_transfer = sub.add_parser("transfer", help="pretrain on one dataset, fine-tune on another")
    training_args(p_transfer, transfer=True)
    p_transfer.add_argument("--compare-scratch", metavar="PATH",
                            help="also train from scratch and write a paired comparison JSON")

    def run_transfer(a):
        spec = _spec_from_args(a)
        if a.compare_scratch:
            doc = compare_transfer_to_scratch(spec, out_path=a.compare_scratch)
            print(json.dumps(doc, indent=2, sort_keys=True))
            return None
        return transfer_train(spec)

    p_transfer.set_defaults(run=run_transfer)

    p_eval = sub.add_parser("evaluate", help="evaluate a checkpoint")
    p_eval.add_argument("--checkpoint")
    p_eval.add_argument("--dataset", required=True)
    p_eval.add_argument("--split", default="test", choices=("train", "val", "test", "all"))
    p_eval.add_argument("--predict-zero", action="store_true",
                        help="score the zero predictor instead of a checkpoint")
    p_eval.add_argument("--out", help="metrics JSON output path")
    p_eval.set_defaults(run=lambda a: evaluate(
        a.checkpoint, a.dataset, split=a.split, predict_zero=a.predict_zero, out_path=a.out
    ))

    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return 0 if exc.code in (0, None) else 1
    try:
        result = args.run(args)
    except (ValueError, FileNotFoundError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except Exception as exc:  # noqa: BLE001 - CLI boundary
        print(f"runtime error: {exc}", file=sys.stderr)
        return 2
    if result is None:
        return 0
    if args.command == "evaluate":
        print(json.dumps(result, indent=2, sort_keys=True))
    else:
        final = result["phases"][-1]["history"][-1]
        print(f"final train MSE {final['train_mse']:.4f}"
              + (f", val MSE {final['val_mse']:.4f}" if "val_mse" in final else ""))
    return 0


if __name__ == "__main__":
    sys.exit(main())
