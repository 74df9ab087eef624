from typing import Iterable, Sequence

from nltk import FreqDist

from indexing.stopwords import is_stopword

PAD, UNK, SOS, EOS = "<pad>", "<unk>", "<sos>", "<eos>"
SPECIALS = (PAD, UNK, SOS, EOS)
PAD_ID, UNK_ID, SOS_ID, EOS_ID = range(4)


class Vocabulary:
    """Token <-> index map. Indices 0-3 are reserved for the special tokens."""

    def __init__(self, tokens: Iterable[str] = ()):
        self.itos: list[str] = list(SPECIALS)
        self.stoi: dict[str, int] = {tok: i for i, tok in enumerate(SPECIALS)}
        for tok in tokens:
            if tok not in self.stoi:
                self.stoi[tok] = len(self.itos)
                self.itos.append(tok)

    def __len__(self) -> int:
        return len(self.itos)

    def __contains__(self, token: str) -> bool:
        return token in self.stoi and token not in SPECIALS

    @property
    def regular_tokens(self) -> list[str]:
        return self.itos[len(SPECIALS):]

    def index(self, token: str) -> int:
        return self.stoi.get(token, UNK_ID)

    def token(self, index: int) -> str:
        return self.itos[index]

    def encode(self, tokens: Sequence[str], add_eos: bool = False) -> list[int]:
        ids = [self.index(t) for t in tokens]
        return ids + [EOS_ID] if add_eos else ids

    def decode(self, ids: Sequence[int], strip_special: bool = True) -> list[str]:
        out = []
        for i in ids:
            if strip_special and i < len(SPECIALS):
                if i == EOS_ID:
                    break
                continue
            out.append(self.itos[i])
        return out


def build_vocab(corpus: Iterable[Sequence[str]], size_limit: int, remove_stopwords: bool) -> Vocabulary:
    """Keep the most frequent tokens (ties broken lexicographically) up to `size_limit` entries, specials included."""
    if size_limit <= len(SPECIALS):
        raise ValueError(f"size_limit must exceed {len(SPECIALS)} reserved entries, got {size_limit}")

    freq = FreqDist(
        tok
        for doc in corpus
        for tok in doc
        if tok not in SPECIALS and not (remove_stopwords and is_stopword(tok))
    )
    ranked = sorted(freq.items(), key=lambda kv: (-kv[1], kv[0]))
    keep = size_limit - len(SPECIALS)
    return Vocabulary(tok for tok, _ in ranked[:keep])
