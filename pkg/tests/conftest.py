import numpy as np
import pytest

from exploitation.net import ModelConfig, PeeModel, encode_example
from indexing.personachat import parse_personachat
from indexing.vocab import build_vocab

VEGAN_DIALOGUE = """\
1 your persona: i like music.
2 your persona: i like to skateboard.
3 your persona: i like the guitar.
4 your persona: i am a vegan.
5 wanna come over and watch the godfather?\ti do not have a car, i have a skateboard.
6 you can skateboard over. i do not live too far. i have candy and soda to share.\tno thanks, i do not eat any animal products.
7 i promise there are no animal products in my candy and soda.\tmost candy has some form of dairy. as a vegan i can not have that.
"""

TOY = """\
1 your persona: i play the guitar.
2 your persona: i love jazz.
3 hi , how are you ?\ti am good , i just played guitar .
4 what music do you like ?\tjazz is my favorite .
1 your persona: i am a vegan.
2 your persona: i cook pasta.
3 hello there .\thi , i am making vegan pasta .
4 sounds tasty !\ti cook every night .
1 your persona: i run marathons.
2 your persona: i have a dog.
3 what do you do ?\ti run with my dog .
4 how far ?\tten miles each morning .
1 your persona: i love soccer.
2 your persona: i live in spain.
3 any hobbies ?\ti play soccer in spain .
4 cool !\tsoccer is great .
"""


@pytest.fixture
def vegan_text():
    return VEGAN_DIALOGUE


@pytest.fixture
def vegan_conversation():
    return parse_personachat(VEGAN_DIALOGUE.splitlines())[0]


@pytest.fixture
def vegan_examples(vegan_conversation):
    return vegan_conversation.examples()


@pytest.fixture
def toy_text():
    return TOY


@pytest.fixture
def toy_conversations():
    return parse_personachat(TOY.splitlines())


@pytest.fixture
def toy_examples(toy_conversations):
    return [ex for conv in toy_conversations for ex in conv.examples()]


@pytest.fixture
def toy_vocab(toy_conversations):
    corpus = [conv.document() for conv in toy_conversations]
    return build_vocab(corpus, size_limit=200, remove_stopwords=False)


@pytest.fixture
def tiny_config():
    return ModelConfig(hidden=6, encoder_hidden=4, embedding_dim=5, vocab_size=200,
                       batch_size=4, lr=1e-2, epochs=2, hops=2, beam=2, max_len=6)


@pytest.fixture
def tiny_model(toy_vocab, tiny_config):
    return PeeModel(toy_vocab, tiny_config, seed=3)


@pytest.fixture
def toy_encoded(toy_examples, toy_vocab):
    expansions = {0: ["jazz", "music"], 1: ["pasta", "cook"], 2: ["dog"], 3: []}
    return [encode_example(ex, toy_vocab, expansions[ex.conversation_id]) for ex in toy_examples]


@pytest.fixture
def rng():
    return np.random.default_rng(0)
