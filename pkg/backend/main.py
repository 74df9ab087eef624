"""
Command-line entry point.

    python -m backend.main pretrain-topic --config run.json --out runs/topic
    python -m backend.main expand --topic runs/topic/topic.ckpt --data train.txt --out runs/expansions.jsonl
    python -m backend.main train --expansions runs/expansions.jsonl --out runs/pee
    python -m backend.main generate --checkpoint runs/pee/model.ckpt --out runs/responses.jsonl
    python -m backend.main eval --checkpoint runs/pee/model.ckpt --out runs/report.jsonl
    python -m backend.main chat --checkpoint runs/pee/model.ckpt --persona "i love jazz ."

Exit codes: 0 success, 1 internal error, 2 user or input error.
"""

import argparse
import logging
import os
import sys
import time

from backend import pipeline
from backend.chatbot import ChatSession, run_repl
from backend.config import VARIANTS, Config, apply_overrides, apply_variant, load_config
from exploitation.generation import BEAM, GREEDY
from numkit.tensor import ContractError

logger = logging.getLogger("backend")

EXIT_OK, EXIT_INTERNAL, EXIT_USAGE = 0, 1, 2


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="JSON config file (default: $PEE_CONFIG)")
    common.add_argument("--seed", type=int, help="overrides $PEE_SEED and the config file")
    common.add_argument("--out", help="output file or directory")
    common.add_argument("--quiet", action="store_true", help="no progress bars, warnings only")
    common.add_argument("--variant", choices=sorted(VARIANTS), help="model variant preset")
    common.add_argument("--hops", type=int, help="retrieval hops over the persona word memories")

    parser = argparse.ArgumentParser(prog="pee", description="Persona exploration and exploitation dialogue model")
    sub = parser.add_subparsers(dest="command", required=True)

    sub.add_parser("pretrain-topic", parents=[common], help="train the topic model")

    p = sub.add_parser("expand", parents=[common], help="extend persona vocabularies with topic neighbours")
    p.add_argument("--topic", required=True, help="topic checkpoint")
    p.add_argument("--data", help="Persona-Chat file (default: paths.train)")

    p = sub.add_parser("train", parents=[common], help="joint training")
    p.add_argument("--expansions", help="expansion records of the training set")
    p.add_argument("--valid-expansions", help="expansion records of the validation set")

    for name, help_text in (("generate", "generate responses"), ("eval", "score responses")):
        p = sub.add_parser(name, parents=[common], help=help_text)
        p.add_argument("--checkpoint", help="model checkpoint")
        p.add_argument("--data", help="Persona-Chat file (default: paths.test)")
        p.add_argument("--expansions", help="expansion records of the data file")
        p.add_argument("--workers", type=int, default=4, help="decoding threads")
        if name == "generate":
            p.add_argument("--mode", choices=[BEAM, GREEDY], default=BEAM)
            p.add_argument("--diagnostics", action="store_true", help="emit persona and memory weights")
        else:
            p.add_argument("--predictions", help="score an existing generation file instead of decoding")

    p = sub.add_parser("chat", parents=[common], help="interactive session")
    p.add_argument("--checkpoint", required=True, help="model checkpoint")
    p.add_argument("--persona", action="append", default=[], help="persona sentence (repeatable)")
    p.add_argument("--topic", help="topic checkpoint used to extend the persona")
    return parser


def configure_logging(quiet: bool) -> None:
    level = logging.WARNING if quiet else os.getenv("PEE_LOG_LEVEL", "INFO").upper()
    logging.basicConfig(level=level, format="%(asctime)s %(levelname)s %(name)s %(message)s", force=True)


def resolve_config(args) -> Config:
    cfg = load_config(args.config, seed=args.seed)
    if args.variant:
        cfg = apply_variant(cfg, args.variant)
    if args.hops is not None:
        cfg = apply_overrides(cfg, {"model": {"hops": args.hops}})
    return cfg


def run(args) -> None:
    cfg = resolve_config(args)
    progress = not args.quiet

    if args.command == "pretrain-topic":
        pipeline.cmd_pretrain_topic(cfg, args.out or "runs/topic", progress=progress)
    elif args.command == "expand":
        pipeline.cmd_expand(cfg, args.topic, args.data or cfg.paths.train, args.out or "runs/expansions.jsonl")
    elif args.command == "train":
        pipeline.cmd_train(cfg, args.out or "runs/pee", args.expansions, args.valid_expansions, progress=progress)
    elif args.command == "generate":
        pipeline.cmd_generate(
            args.checkpoint, args.data or cfg.paths.test, args.out or "runs/responses.jsonl",
            expansions_path=args.expansions, mode=args.mode, diagnostics=args.diagnostics,
            hops=args.hops, workers=args.workers,
        )
    elif args.command == "eval":
        pipeline.cmd_eval(
            cfg, args.out or "runs/report.jsonl", checkpoint=args.checkpoint, data_path=args.data,
            predictions_path=args.predictions, expansions_path=args.expansions,
            hops=args.hops, workers=args.workers,
        )
    elif args.command == "chat":
        model, _ = pipeline.load_model(args.checkpoint, args.hops)
        topic = pipeline.load_topic_model(args.topic) if args.topic else None
        session = ChatSession(model, args.persona, topic=topic, m=cfg.expansion.m, n_w=cfg.expansion.n_w)
        run_repl(session)


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    configure_logging(args.quiet)
    start = time.perf_counter()
    try:
        run(args)
    except ContractError:
        # a broken internal contract, not bad input
        logger.exception("[%s] internal error", args.command.upper())
        return EXIT_INTERNAL
    except (OSError, ValueError) as e:
        # missing files, parse errors, bad checkpoints, invalid config
        logger.error("[%s] %s", args.command.upper(), e)
        return EXIT_USAGE
    except Exception:
        logger.exception("[%s] internal error", args.command.upper())
        return EXIT_INTERNAL
    logger.info("[%s] finished in %.2f s", args.command.upper(), time.perf_counter() - start)
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
