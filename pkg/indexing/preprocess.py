import re
import string

PUNCTUATION = re.compile(f"([{re.escape(string.punctuation)}])")


def tokenize(text: str) -> list[str]:
    if not text:
        return []
    text = text.lower()
    text = PUNCTUATION.sub(r" \1 ", text)
    return text.split()


def detokenize(tokens: list[str]) -> str:
    return " ".join(tokens)


def is_punctuation(token: str) -> bool:
    return bool(token) and all(ch in string.punctuation for ch in token)
