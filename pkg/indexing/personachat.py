"""
Persona-Chat and DailyDialog ingestion.

Persona-Chat lines look like

    1 your persona: i like music.
    5 wanna come over?\ti do not have a car.\t<candidates ...>

A line index of 1 opens a new conversation. The persona lines describe the
speaker of the second tab field, so every exchange line yields one training
example whose response is that second field.
"""

import logging
import re
from dataclasses import dataclass, field
from pathlib import Path

from indexing.preprocess import tokenize

logger = logging.getLogger(__name__)

LINE = re.compile(r"^(\d+) (.*)$")
YOUR_PERSONA = "your persona:"
PARTNER_PERSONA = "partner's persona:"
DAILYDIALOG_SEPARATOR = "__eou__"


class ParseError(ValueError):
    def __init__(self, line_index: int, message: str):
        super().__init__(f"line {line_index}: {message}")
        self.line_index = line_index


@dataclass
class DialogueExample:
    persona_sentences: list[list[str]]
    history: list[list[str]]
    response: list[str]
    conversation_id: int = 0
    # 1-based utterance index of the response inside its conversation
    turn: int = 0


@dataclass
class Conversation:
    conversation_id: int
    persona_sentences: list[list[str]] = field(default_factory=list)
    utterances: list[list[str]] = field(default_factory=list)

    def examples(self) -> list[DialogueExample]:
        out = []
        # responses sit at odd positions: u2, u4, ...
        for t in range(1, len(self.utterances), 2):
            response = self.utterances[t]
            if not response:
                logger.warning("[CORPUS] conversation %d turn %d has an empty response, skipped",
                               self.conversation_id, t + 1)
                continue
            out.append(DialogueExample(
                persona_sentences=self.persona_sentences,
                history=self.utterances[:t],
                response=response,
                conversation_id=self.conversation_id,
                turn=t + 1,
            ))
        return out

    def document(self) -> list[str]:
        """All tokens of the conversation, personas included (one tf-idf document)."""
        tokens = [tok for sent in self.persona_sentences for tok in sent]
        tokens += [tok for utt in self.utterances for tok in utt]
        return tokens


def _read_lines(path) -> list[str]:
    return Path(path).read_text(encoding="utf-8").splitlines()


def parse_personachat(lines: list[str]) -> list[Conversation]:
    conversations: list[Conversation] = []
    current: Conversation | None = None
    opened_at = 0

    def close():
        if current is not None and current.utterances and not current.persona_sentences:
            raise ParseError(opened_at, "conversation has no 'your persona:' lines")

    for line_index, raw in enumerate(lines, start=1):
        if not raw.strip():
            continue
        m = LINE.match(raw)
        if not m:
            raise ParseError(line_index, "expected '<integer index> <text>'")
        number, rest = int(m.group(1)), m.group(2)

        if number == 1 or current is None:
            close()
            current = Conversation(conversation_id=len(conversations))
            conversations.append(current)
            opened_at = line_index

        if rest.startswith(YOUR_PERSONA):
            current.persona_sentences.append(tokenize(rest[len(YOUR_PERSONA):]))
            continue
        if rest.startswith(PARTNER_PERSONA):
            continue

        fields = rest.split("\t")
        if len(fields) < 2:
            raise ParseError(line_index, "exchange line is missing the tab separator")
        current.utterances.append(tokenize(fields[0]))
        current.utterances.append(tokenize(fields[1]))

    close()
    return conversations


def load_conversations(path) -> list[Conversation]:
    conversations = parse_personachat(_read_lines(path))
    logger.info("[CORPUS] %s: %d conversations", path, len(conversations))
    return conversations


def load_personachat(path) -> list[DialogueExample]:
    return [ex for conv in load_conversations(path) for ex in conv.examples()]


def load_dailydialog(path) -> list[Conversation]:
    """One dialogue per line, utterances separated by `__eou__`. No personas."""
    conversations = []
    for raw in _read_lines(path):
        if not raw.strip():
            continue
        utterances = [tokenize(u) for u in raw.split(DAILYDIALOG_SEPARATOR)]
        conversations.append(Conversation(
            conversation_id=len(conversations),
            utterances=[u for u in utterances if u],
        ))
    logger.info("[CORPUS] %s: %d dialogues (dailydialog format)", path, len(conversations))
    return conversations


def load_topic_documents(path) -> list[list[str]]:
    """One document per dialogue; the file format is detected from its first non-empty line."""
    lines = _read_lines(path)
    first = next((line for line in lines if line.strip()), "")
    if LINE.match(first):
        conversations = parse_personachat(lines)
    else:
        conversations = load_dailydialog(path)
    return [conv.document() for conv in conversations]
