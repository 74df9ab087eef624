import logging
import sys
from typing import TextIO

from exploitation.generation import BEAM, generate
from exploitation.net import PeeModel, encode_example
from exploration.expansion import expand
from exploration.topic import TopicModel, word_topic_vectors
from indexing.personachat import DialogueExample
from indexing.preprocess import detokenize, tokenize

logger = logging.getLogger(__name__)

PROMPT = "you> "


class ChatSession:
    """Keeps the dialogue history and answers one user utterance at a time."""

    def __init__(
        self,
        model: PeeModel,
        persona: list[str],
        topic: TopicModel | None = None,
        m: int = 20,
        n_w: int = 100,
        mode: str = BEAM,
    ):
        self.model = model
        self.mode = mode
        self.persona_sentences = [tokenize(s) for s in persona if s.strip()]
        if not self.persona_sentences:
            raise ValueError("chat needs at least one persona sentence")
        self.history: list[list[str]] = []

        self.expansion: list[str] = []
        if topic is not None:
            probe = DialogueExample(self.persona_sentences, [], [])
            self.expansion = expand(probe, word_topic_vectors(topic), m, n_w, topic_vocab=topic.vocab).tokens
            logger.info("[CHAT] persona extended with %d topic words", len(self.expansion))

    def reply(self, utterance: str) -> str:
        self.history.append(tokenize(utterance))
        example = DialogueExample(self.persona_sentences, list(self.history), [])
        encoded = encode_example(example, self.model.vocab, self.expansion)
        cfg = self.model.config
        ids = generate(encoded, self.model, mode=self.mode, beam_width=cfg.beam, max_len=cfg.max_len)
        response = self.model.vocab.decode(ids)
        self.history.append(response)
        return detokenize(response)


def run_repl(session: ChatSession, stdin: TextIO = sys.stdin, stdout: TextIO = sys.stdout) -> int:
    """Reads utterances until end of input; blank lines only re-prompt. Returns the number of replies."""
    replies = 0
    stdout.write(PROMPT)
    stdout.flush()
    for line in stdin:
        text = line.strip()
        if text:
            stdout.write(f"bot> {session.reply(text)}\n")
            replies += 1
        stdout.write(PROMPT)
        stdout.flush()
    stdout.write("\n")
    return replies
