"""Command-line entry point: ``flipattack <subcommand> [flags]``.

Exit codes: 0 success, 1 validation/usage error, 2 runtime abort.
"""
from __future__ import annotations

import argparse
import logging
import sys
from pathlib import Path

from . import kernels
from .attack import GdConfig, core_baseline_batch
from .campaign import REDUCTIONS, CampaignConfig, load_checkpoint, run_campaign
from .data import DEFAULT_DIM, generate_synthetic, load_dataset, load_matrix, save_adversarial, save_dataset
from .errors import FlipAttackError, StructuralError, SurrogateNotCleanError, ValidationError
from .metrics import emit_metrics_csv, evaluate, format_summary, load_metrics_csv
from .model import ModelSpec, Model, train_surrogate

log = logging.getLogger("flipattack")

MODES = ("full", "single-round", "core")


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        raise UsageError(f"{self.prog}: error: {message}")


def _hidden(text: str) -> tuple[int, ...]:
    text = text.strip()
    if not text:
        return ()
    try:
        return tuple(int(t) for t in text.split(","))
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated integers, got {text!r}") from None


def build_parser() -> argparse.ArgumentParser:
    p = _Parser(prog="flipattack", description=__doc__.splitlines()[0])
    p.add_argument("-v", "--verbose", action="store_true", help="log progress to stderr")
    sub = p.add_subparsers(dest="command", required=True, parser_class=_Parser)

    g = sub.add_parser("gen-data", help="write a synthetic two-cluster dataset CSV")
    g.add_argument("--out", required=True)
    g.add_argument("--rows", type=int, default=500)
    g.add_argument("--dims", type=int, default=DEFAULT_DIM)
    g.add_argument("--margin", type=float, default=1.0)
    g.add_argument("--noise", type=float, default=0.3)
    g.add_argument("--seed", type=int, default=0)

    t = sub.add_parser("train-surrogate", help="fit a stand-in model on a dataset CSV")
    t.add_argument("--data", required=True)
    t.add_argument("--out", required=True, help="model JSON path")
    t.add_argument("--hidden", type=_hidden, default=(64, 32, 8), help="e.g. 64,32,8")
    t.add_argument("--activation", choices=("relu", "tanh"), default="relu")
    t.add_argument("--epochs", type=int, default=200)
    t.add_argument("--lr", type=float, default=0.05)
    t.add_argument("--seed", type=int, default=0)

    a = sub.add_parser("attack", help="run the attack and write adversarial inputs")
    a.add_argument("--model", required=True)
    a.add_argument("--data", required=True)
    a.add_argument("--out", required=True, help="adversarial CSV path")
    a.add_argument("--metrics", help="per-round metrics CSV path")
    a.add_argument("--mode", choices=MODES, default="full")
    a.add_argument("--rounds", type=int, default=150)
    a.add_argument("--runs", type=int, default=20)
    a.add_argument("--seed", type=int, default=0)
    a.add_argument("--steps", type=int, default=2500)
    a.add_argument("--followup-steps", type=int, default=250)
    a.add_argument("--reduction", choices=REDUCTIONS, default="mean")
    a.add_argument("--workers", type=int, default=1)
    a.add_argument("--checkpoint", help="save campaign state here after every round")
    a.add_argument("--resume", action="store_true", help="continue from --checkpoint if it exists")

    e = sub.add_parser("evaluate", help="recompute FR / D / S from files")
    e.add_argument("--model", required=True)
    e.add_argument("--data", required=True)
    e.add_argument("--adv", required=True, help="adversarial CSV path")

    r = sub.add_parser("report", help="summarise a metrics CSV")
    r.add_argument("--metrics", required=True)
    return p


def _gen_data(args) -> int:
    ds = generate_synthetic(args.rows, args.dims, args.margin, args.noise, args.seed)
    save_dataset(ds, args.out)
    print(f"wrote {ds.n_rows}x{ds.dim} dataset to {args.out}")
    return 0


def _train(args) -> int:
    data = load_dataset(args.data)
    spec = ModelSpec(data.dim, args.hidden, args.activation)
    try:
        model = train_surrogate(data, spec, epochs=args.epochs, lr=args.lr, seed=args.seed)
    except SurrogateNotCleanError as exc:
        exc.model.save(args.out)
        print(f"{exc}; model written to {args.out} anyway", file=sys.stderr)
        return 2
    model.save(args.out)
    print(f"train accuracy 1.0; model written to {args.out}")
    return 0


def _attack(args) -> int:
    model = Model.load(args.model)
    data = load_dataset(args.data)
    gd = GdConfig(steps=args.steps, followup_steps=args.followup_steps)
    rounds = 1 if args.mode == "single-round" else args.rounds
    cfg = CampaignConfig(rounds=rounds, runs_per_round=args.runs, gd=gd, base_seed=args.seed,
                         reduction=args.reduction, workers=args.workers)
    if data.dim != model.input_dim:
        raise StructuralError(f"data has {data.dim} features, model expects {model.input_dim}")

    if args.mode == "core":
        batch = core_baseline_batch(model, data, gd, cfg.step_scale(data.n_rows, data.dim))
        x_adv = batch.x_adv
        history = [evaluate(model, data.features, x_adv, data.labels, round=0)]
    else:
        state = None
        if args.resume and args.checkpoint and Path(args.checkpoint).exists():
            state, meta = load_checkpoint(args.checkpoint)
            if meta["base_seed"] != cfg.base_seed or meta["runs_per_round"] != cfg.runs_per_round:
                raise ValidationError("checkpoint was written with a different --seed/--runs")
            log.info("resuming from round %d", state.round)
        result = run_campaign(model, data, cfg, state=state, checkpoint=args.checkpoint)
        x_adv, history = result.x_adv, result.metrics

    save_adversarial(x_adv, args.out)
    if args.metrics:
        if history:
            emit_metrics_csv(history, args.metrics)
        else:
            log.warning("no rounds were run; metrics file not written")
    final = history[-1] if history else evaluate(model, data.features, x_adv, data.labels)
    print(format_summary(final))
    return 0


def _evaluate(args) -> int:
    model = Model.load(args.model)
    data = load_dataset(args.data)
    x_adv = load_matrix(args.adv)
    if x_adv.shape != data.features.shape:
        raise StructuralError(f"adversarial matrix {x_adv.shape} != data {data.features.shape}")
    print(format_summary(evaluate(model, data.features, x_adv, data.labels)))
    return 0


def _report(args) -> int:
    history = load_metrics_csv(args.metrics)
    if not history:
        raise ValidationError(f"{args.metrics}: no records")
    first_full = next((r.round for r in history if r.fooling_ratio == 1.0), None)
    last = history[-1]
    print(f"rounds recorded: {len(history)}")
    print(f"first round with FR=1: {first_full if first_full is not None else 'never'}")
    print(f"final: round {last.round} {format_summary(last)}")
    best = max(history, key=lambda r: r.score)
    print(f"best score {best.score:.6g} at round {best.round}")
    return 0


COMMANDS = {
    "gen-data": _gen_data,
    "train-surrogate": _train,
    "attack": _attack,
    "evaluate": _evaluate,
    "report": _report,
}


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except UsageError as exc:
        print(exc, file=sys.stderr)
        return 1
    except SystemExit as exc:  # --help
        return int(exc.code or 0)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    log.debug("kernel backend: %s", kernels.BACKEND)
    try:
        return COMMANDS[args.command](args)
    except (ValidationError, StructuralError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except (FlipAttackError, FloatingPointError, MemoryError) as exc:
        print(f"aborted: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
