from indexing.preprocess import is_punctuation

# Fixed English function-word list. Checked in so that vocabularies, tf-idf,
# persona vocabularies and loss targets are reproducible across machines.
STOP_WORDS = frozenset({
    # pronouns
    "i", "me", "my", "myself", "we", "our", "ours", "ourselves",
    "you", "your", "yours", "yourself", "yourselves",
    "he", "him", "his", "himself", "she", "her", "hers", "herself",
    "it", "its", "itself", "they", "them", "their", "theirs", "themselves",
    "what", "which", "who", "whom", "this", "that", "these", "those",

    # auxiliaries
    "am", "is", "are", "was", "were", "be", "been", "being",
    "have", "has", "had", "having", "do", "does", "did", "doing",
    "will", "would", "shall", "should", "can", "could", "may", "might", "must",

    # articles, conjunctions, prepositions
    "a", "an", "the", "and", "but", "if", "or", "because", "as", "until", "while",
    "of", "at", "by", "for", "with", "about", "against", "between", "into",
    "through", "during", "before", "after", "above", "below", "to", "from",
    "up", "down", "in", "out", "on", "off", "over", "under",

    # adverbs and determiners
    "again", "further", "then", "once", "here", "there", "when", "where", "why", "how",
    "all", "any", "both", "each", "few", "more", "most", "other", "some", "such",
    "no", "nor", "not", "only", "own", "same", "so", "than", "too", "very",
    "just", "now", "also", "yes", "oh", "well", "really",

    # contraction fragments produced by the tokenizer
    "s", "t", "d", "ll", "m", "re", "ve", "don", "didn", "doesn", "isn", "aren",
    "wasn", "weren", "haven", "hasn", "hadn", "won", "wouldn", "shouldn", "couldn", "ain",
})


def is_stopword(token: str) -> bool:
    return token in STOP_WORDS or is_punctuation(token)


def remove_stopwords(tokens: list[str]) -> list[str]:
    return [t for t in tokens if not is_stopword(t)]
