import sys
import os
sys.path.append(os.path.dirname(os.path.dirname(os.path.abspath(__file__))))

import argparse
import json
import logging
from pathlib import Path

import numpy as np

from indexing.preprocess import tokenize

logger = logging.getLogger("scripts.make_toy_corpus")

OUT_DIR = "data/toy"

# persona sentence -> on-topic reply fragments
TOPICS = {
    "music": (
        ["i play the guitar .", "i love jazz music .", "my band plays on weekends ."],
        ["i practice guitar every night", "jazz is my favorite music", "we play songs at the club"],
    ),
    "food": (
        ["i am a vegan .", "i like to cook .", "my favorite food is pasta ."],
        ["i cook vegan pasta at home", "vegetables make the best dinner", "i bake bread on sundays"],
    ),
    "sport": (
        ["i run marathons .", "i love soccer .", "i go to the gym daily ."],
        ["i run ten miles each morning", "soccer games are exciting", "the gym keeps me strong"],
    ),
    "pets": (
        ["i have two dogs .", "my cat is named tom .", "i volunteer at a shelter ."],
        ["my dogs love long walks", "tom the cat sleeps all day", "the shelter has many puppies"],
    ),
}

OPENERS = ["hi , how are you ?", "what do you do for fun ?", "tell me about yourself .", "what did you do today ?"]


# ----------------------------
# Step 1: Build Conversations
# ----------------------------
def build_conversations(n: int, turns: int, rng: np.random.Generator) -> list[dict]:
    names = sorted(TOPICS)
    conversations = []
    for _ in range(n):
        topic = names[rng.integers(len(names))]
        personas, replies = TOPICS[topic]
        exchanges = []
        for t in range(turns):
            question = OPENERS[rng.integers(len(OPENERS))] if t else OPENERS[0]
            exchanges.append((question, replies[rng.integers(len(replies))] + " ."))
        conversations.append({"topic": topic, "persona": personas, "exchanges": exchanges})
    logger.info("[TOY] built %d conversations", n)
    return conversations


# ----------------------------
# Step 2: Persona-Chat Text
# ----------------------------
def to_personachat(conversations: list[dict]) -> str:
    lines = []
    for conv in conversations:
        index = 1
        for sentence in conv["persona"]:
            lines.append(f"{index} your persona: {sentence}")
            index += 1
        for question, answer in conv["exchanges"]:
            lines.append(f"{index} {question}\t{answer}")
            index += 1
    return "\n".join(lines) + "\n"


def to_dailydialog(conversations: list[dict]) -> str:
    return "".join(
        " __eou__ ".join(u for pair in conv["exchanges"] for u in pair) + " __eou__\n"
        for conv in conversations
    )


# ----------------------------
# Step 3: Embeddings
# ----------------------------
def build_embeddings(conversations: list[dict], dim: int, rng: np.random.Generator) -> str:
    """Random vectors, nudged toward a per-topic direction so embedding metrics are meaningful."""
    centres = {topic: rng.standard_normal(dim) for topic in TOPICS}
    vectors: dict[str, np.ndarray] = {}
    for conv in conversations:
        text = " ".join(conv["persona"] + [u for pair in conv["exchanges"] for u in pair])
        for tok in tokenize(text):
            if tok not in vectors:
                vectors[tok] = 0.5 * centres[conv["topic"]] + rng.standard_normal(dim)
    return "".join(f"{tok} " + " ".join(f"{x:.6f}" for x in vec) + "\n" for tok, vec in sorted(vectors.items()))


# ----------------------------
# Step 4: Main Orchestrator
# ----------------------------
def main(argv=None):
    parser = argparse.ArgumentParser(description="Write a small Persona-Chat-format corpus for smoke runs")
    parser.add_argument("--out", default=OUT_DIR)
    parser.add_argument("--seed", type=int, default=0)
    parser.add_argument("--conversations", type=int, default=8)
    parser.add_argument("--turns", type=int, default=2)
    parser.add_argument("--dim", type=int, default=16)
    args = parser.parse_args(argv)

    logging.basicConfig(level=logging.INFO, format="%(asctime)s %(levelname)s %(name)s %(message)s")
    rng = np.random.default_rng(args.seed)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)

    splits = {name: build_conversations(args.conversations, args.turns, rng) for name in ("train", "valid", "test")}
    for name, conversations in splits.items():
        (out / f"{name}.txt").write_text(to_personachat(conversations), encoding="utf-8")
    (out / "dailydialog.txt").write_text(to_dailydialog(splits["train"]), encoding="utf-8")
    (out / "embeddings.txt").write_text(
        build_embeddings([c for convs in splits.values() for c in convs], args.dim, rng), encoding="utf-8"
    )

    config = {
        "paths": {
            "train": str(out / "train.txt"),
            "valid": str(out / "valid.txt"),
            "test": str(out / "test.txt"),
            "embeddings": str(out / "embeddings.txt"),
            "topic_corpora": [str(out / "dailydialog.txt")],
        },
        "topic": {"n_topics": 4, "vocab_size": 200, "hidden": 16, "epochs": 5, "batch_size": 8},
        "expansion": {"m": 5, "n_w": 10},
        "model": {
            "hidden": 16, "encoder_hidden": 8, "embedding_dim": args.dim, "vocab_size": 200,
            "batch_size": 8, "lr": 1e-2, "epochs": 3, "max_len": 12,
        },
        "seed": args.seed,
    }
    (out / "config.json").write_text(json.dumps(config, indent=2), encoding="utf-8")
    logger.info("[TOY] wrote corpus and config to %s", out)


# ----------------------------
# Entry Point
# ----------------------------
if __name__ == "__main__":
    main()
