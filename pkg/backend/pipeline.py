"""
Pipeline stages behind the CLI subcommands: topic pretraining, expansion,
joint training, generation and evaluation. Every structured output is a JSON
lines file.
"""

import json
import logging
import time
from collections import defaultdict
from concurrent.futures import ThreadPoolExecutor
from pathlib import Path
from typing import Sequence

import numpy as np
import pandas as pd

from backend.checkpoint import CheckpointError, header_vocab, load_into, read_checkpoint, save_checkpoint
from backend.config import Config
from evaluation.metrics import EvalReport, evaluate
from exploitation.generation import BEAM, generate
from exploitation.net import EncodedExample, ModelConfig, PeeModel, encode_example
from exploitation.trainer import train
from exploration.expansion import ExpansionResult, expand
from exploration.topic import TopicModel, train_topic_model, word_topic_vectors
from indexing.embeddings import EmbeddingTable, load_embeddings
from indexing.personachat import DialogueExample, load_conversations, load_personachat, load_topic_documents
from indexing.preprocess import detokenize, tokenize
from indexing.tfidf import compute_tfidf
from indexing.vocab import build_vocab

logger = logging.getLogger(__name__)

TOPIC_KIND = "topic"
MODEL_KIND = "pee"


# -----------------------------
# RECORD FILES
# -----------------------------

def _plain(value):
    if isinstance(value, np.ndarray):
        return value.tolist()
    if isinstance(value, np.generic):
        return value.item()
    raise TypeError(f"cannot write {type(value).__name__} to a record file")


def write_records(path, records: Sequence[dict], columns: Sequence[str] | None = None) -> None:
    """One JSON object per line. Floats are written at full precision (shortest round-trip repr)."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    rows = [{c: r.get(c) for c in columns} if columns else dict(r) for r in records]
    with path.open("w", encoding="utf-8") as fh:
        for row in rows:
            fh.write(json.dumps(row, ensure_ascii=False, default=_plain) + "\n")


def read_records(path) -> list[dict]:
    path = Path(path)
    if not path.read_text(encoding="utf-8").strip():
        return []
    return pd.read_json(path, orient="records", lines=True, dtype=False, precise_float=True).to_dict(orient="records")


def _require(path: str | None, what: str) -> str:
    if not path:
        raise ValueError(f"no {what} path given (set it in the config or on the command line)")
    if not Path(path).is_file():
        raise FileNotFoundError(f"{what} file not found: {path}")
    return path


# -----------------------------
# TOPIC PRETRAINING
# -----------------------------

def cmd_pretrain_topic(cfg: Config, out_dir, progress: bool = True) -> list[dict]:
    """Trains the topic model on the training set merged with `paths.topic_corpora`."""
    start = time.perf_counter()
    sources = [_require(cfg.paths.train, "train")] + [_require(p, "topic corpus") for p in cfg.paths.topic_corpora]
    documents = [doc for path in sources for doc in load_topic_documents(path)]
    vocab = build_vocab(documents, cfg.topic.vocab_size, remove_stopwords=True)
    logger.info("[TOPIC] %d documents, %d topic words", len(documents), len(vocab.regular_tokens))

    model, trace = train_topic_model(compute_tfidf(documents, vocab), vocab, cfg.topic, seed=cfg.seed, progress=progress)

    out_dir = Path(out_dir)
    save_checkpoint(out_dir / "topic.ckpt", TOPIC_KIND, model.store, vocab, cfg.model_dump(),
                    meta={"n_topics": model.n_topics, "hidden": model.hidden})
    write_records(out_dir / "topic_trace.jsonl", trace, columns=["epoch", "mean_loss"])
    logger.info("[TOPIC] done in %.2f s", time.perf_counter() - start)
    return trace


def load_topic_model(path, cfg: Config | None = None) -> TopicModel:
    header, arrays = read_checkpoint(path, kind=TOPIC_KIND)
    vocab = header_vocab(header)
    n_topics, hidden = header.meta.get("n_topics"), header.meta.get("hidden")
    if cfg is not None:
        if n_topics != cfg.topic.n_topics or hidden != cfg.topic.hidden:
            raise CheckpointError(
                f"{path}: topic model has K={n_topics}, hidden={hidden}; "
                f"config expects K={cfg.topic.n_topics}, hidden={cfg.topic.hidden}"
            )
        if len(vocab) > cfg.topic.vocab_size:
            raise CheckpointError(f"{path}: topic vocabulary of {len(vocab)} exceeds configured {cfg.topic.vocab_size}")
    model = TopicModel(vocab, n_topics, hidden)
    load_into(model.store, arrays)
    return model


# -----------------------------
# EXPANSION
# -----------------------------

def cmd_expand(cfg: Config, topic_path, data_path, out_path) -> list[ExpansionResult]:
    """One expansion record per conversation of `data_path`."""
    topic = load_topic_model(_require(topic_path, "topic checkpoint"), cfg)
    vectors = word_topic_vectors(topic)
    conversations = load_conversations(_require(data_path, "data"))

    results = [
        expand(conv, vectors, cfg.expansion.m, cfg.expansion.n_w, topic_vocab=topic.vocab)
        for conv in conversations
    ]
    empty = sum(1 for r in results if not r.words)
    logger.info("[EXPAND] %d conversations expanded, %d with no persona topic words", len(results), empty)

    write_records(
        out_path,
        [{"conversation_id": r.conversation_id, "words": r.tokens, "scores": [s for _, s in r.words]} for r in results],
        columns=["conversation_id", "words", "scores"],
    )
    return results


def load_expansions(path) -> dict[int, list[str]]:
    if not path:
        return {}
    return {int(r["conversation_id"]): list(r["words"]) for r in read_records(_require(path, "expansion"))}


def _attach(
    examples: Sequence[DialogueExample],
    expansions: dict[int, list[str]],
    use_expansion: bool = True,
) -> list[list[str]]:
    missing = sorted({ex.conversation_id for ex in examples} - set(expansions))
    if use_expansion and missing:
        if expansions:
            logger.warning("[EXPAND] %d conversations have no expansion record; their external memory is empty",
                           len(missing))
        else:
            logger.warning("[EXPAND] no expansion file given; all %d conversations get an empty external memory",
                           len(missing))
    return [expansions.get(ex.conversation_id, []) for ex in examples]


def _encode_all(examples, expansions, vocab, use_expansion: bool = True) -> list[EncodedExample]:
    words = _attach(examples, expansions, use_expansion)
    return [encode_example(ex, vocab, w) for ex, w in zip(examples, words)]


# -----------------------------
# TRAINING
# -----------------------------

def cmd_train(
    cfg: Config,
    out_dir,
    expansions_path=None,
    valid_expansions_path=None,
    progress: bool = True,
) -> list[dict]:
    """Joint training; the checkpoint with the best validation loss is kept."""
    train_examples = load_personachat(_require(cfg.paths.train, "train"))
    valid_examples = load_personachat(_require(cfg.paths.valid, "valid")) if cfg.paths.valid else []
    expansions = load_expansions(expansions_path)

    corpus = [tok_list for ex in train_examples for tok_list in ex.persona_sentences + ex.history + [ex.response]]
    corpus += list(expansions.values())
    vocab = build_vocab(corpus, cfg.model.vocab_size, remove_stopwords=False)

    embeddings = load_embeddings(cfg.paths.embeddings, vocab) if cfg.paths.embeddings else None
    model = PeeModel(vocab, cfg.model, seed=cfg.seed, embeddings=embeddings)
    logger.info("[TRAIN] %d training examples, %d validation examples, vocab %d, %d parameter tensors",
                len(train_examples), len(valid_examples), len(vocab), len(model.store))

    train_set = _encode_all(train_examples, expansions, vocab, cfg.model.use_expansion)
    valid_set = _encode_all(valid_examples, load_expansions(valid_expansions_path), vocab, cfg.model.use_expansion)

    out_dir = Path(out_dir)
    ckpt = out_dir / "model.ckpt"

    def keep_best(epoch: int, record: dict) -> None:
        save_checkpoint(ckpt, MODEL_KIND, model.store, vocab, cfg.model_dump(), meta={"epoch": epoch, **record})

    trace = train(model, train_set, cfg.losses, valid_set=valid_set, seed=cfg.seed,
                  progress=progress, on_improved=keep_best)
    if not trace:
        keep_best(0, {})
    write_records(out_dir / "train_trace.jsonl", trace)
    return trace


def load_model(path, hops: int | None = None) -> tuple[PeeModel, Config]:
    header, arrays = read_checkpoint(_require(path, "checkpoint"), kind=MODEL_KIND)
    try:
        cfg = Config.model_validate(header.config)
    except ValueError as e:
        raise CheckpointError(f"{path}: stored config does not validate: {e}") from e
    if hops is not None:
        cfg.model = ModelConfig.model_validate({**cfg.model.model_dump(), "hops": hops})
    model = PeeModel(header_vocab(header), cfg.model, seed=cfg.seed)
    load_into(model.store, arrays)
    return model, cfg


# -----------------------------
# GENERATION / EVALUATION
# -----------------------------

def _generate_all(
    encoded: Sequence[EncodedExample],
    model: PeeModel,
    mode: str,
    diagnostics: bool,
    workers: int,
) -> list[tuple[list[int], dict | None]]:
    cfg = model.config

    def run(ex: EncodedExample):
        diag = {} if diagnostics else None
        ids = generate(ex, model, mode=mode, beam_width=cfg.beam, max_len=cfg.max_len, diagnostics=diag)
        return ids, diag

    # map keeps input order
    with ThreadPoolExecutor(max_workers=max(1, workers)) as pool:
        return list(pool.map(run, encoded))


def cmd_generate(
    checkpoint,
    data_path,
    out_path,
    expansions_path=None,
    mode: str = BEAM,
    diagnostics: bool = False,
    hops: int | None = None,
    workers: int = 1,
) -> list[dict]:
    """One record per test example: the generated response, its reference and the persona."""
    model, _ = load_model(checkpoint, hops)
    examples = load_personachat(_require(data_path, "data"))
    encoded = _encode_all(examples, load_expansions(expansions_path), model.vocab, model.config.use_expansion)

    start = time.perf_counter()
    outputs = _generate_all(encoded, model, mode, diagnostics, workers)
    logger.info("[GENERATE] %d responses in %.2f s", len(outputs), time.perf_counter() - start)

    records = []
    for ex, (ids, diag) in zip(examples, outputs):
        record = {
            "conversation_id": ex.conversation_id,
            "turn": ex.turn,
            "persona": [detokenize(s) for s in ex.persona_sentences],
            "response": detokenize(model.vocab.decode(ids)),
            "reference": detokenize(ex.response),
        }
        if diag is not None:
            record["diagnostics"] = diag
        records.append(record)
    write_records(out_path, records)
    return records


def report_from_records(records: Sequence[dict], table: EmbeddingTable | None = None) -> EvalReport:
    candidates = [tokenize(r["response"]) for r in records]
    references = [tokenize(r["reference"]) for r in records]

    grouped: dict[int, list] = defaultdict(list)
    personas: dict[int, list[list[str]]] = {}
    for r, cand in zip(records, candidates):
        cid = int(r.get("conversation_id", 0))
        grouped[cid].append(cand)
        personas[cid] = [tokenize(s) for s in r.get("persona", [])]
    conversations = [(personas[cid], grouped[cid]) for cid in grouped]

    return evaluate(candidates, references, table=table, conversations=conversations)


def cmd_eval(
    cfg: Config,
    out_path,
    checkpoint=None,
    data_path=None,
    predictions_path=None,
    expansions_path=None,
    hops: int | None = None,
    workers: int = 4,
) -> EvalReport:
    """
    Scores `predictions_path` when given, otherwise generates from `checkpoint`
    over `data_path` first. Writes the report as a single record.
    """
    if predictions_path:
        records = read_records(_require(predictions_path, "predictions"))
    else:
        records = cmd_generate(checkpoint, data_path or cfg.paths.test, Path(out_path).with_suffix(".predictions.jsonl"),
                               expansions_path=expansions_path, hops=hops, workers=workers)

    table = load_embeddings(cfg.paths.embeddings) if cfg.paths.embeddings else None
    report = report_from_records(records, table)
    write_records(out_path, [report.model_dump(by_alias=True)])
    logger.info("[EVAL] %s", report.model_dump_json(by_alias=True))
    return report
