"""Per-word semantic tagger: p(z|x) factorized over words.

Words are embedded, contextualized by a bidirectional LSTM, and each
position i gets a softmax over the tag vocabulary from both the hidden
state h_i and the word embedding w_i:

    p(z_i = t | x) = softmax(W h_i + U w_i + b)_t

Rows are conditionally independent given x, so the sequence argmax is
the per-row argmax.  The tag vocabulary holds every symbol observed in
training plus a null tag (id 0) for words that evoke no symbol and an
unknown-symbol id (id 1) for test-time symbols never seen in training.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Dict, Iterable, List, Sequence

import numpy as np

from . import autodiff as ad
from .autodiff import Tensor
from .checkpoint import load_checkpoint, save_checkpoint
from .nn import BiLstmEncoder, Vocab

__all__ = ["NULL_TAG", "UNK_TAG", "TagVocabulary", "TaggerConfig",
           "TaggerParams", "TagDistribution", "init_tagger", "encode",
           "tag_distribution", "predict_tags", "save_tagger", "load_tagger"]

NULL_TAG = "<null>"
UNK_TAG = "<unk-symbol>"


class TagVocabulary:
    """Tag id space: null is 0, unknown-symbol is 1, then known symbols."""

    def __init__(self, symbols: Iterable[str]):
        self.id2sym: List[str] = [NULL_TAG, UNK_TAG]
        self.sym2id: Dict[str, int] = {NULL_TAG: 0, UNK_TAG: 1}
        for sym in symbols:
            if sym in (NULL_TAG, UNK_TAG):
                raise ValueError(f"reserved tag name {sym!r} used as a symbol")
            if sym not in self.sym2id:
                self.sym2id[sym] = len(self.id2sym)
                self.id2sym.append(sym)

    null_id = 0
    unk_id = 1

    @classmethod
    def from_corpus(cls, corpus) -> "TagVocabulary":
        seen: List[str] = []
        for ex in corpus:
            seen.extend(ex.symbol_set.symbols)
        return cls(seen)

    def __len__(self):
        return len(self.id2sym)

    def __contains__(self, sym):
        return sym in self.sym2id

    def id_of(self, symbol: str) -> int:
        return self.sym2id.get(symbol, self.unk_id)

    def symbol_of(self, tag_id: int) -> str:
        return self.id2sym[int(tag_id)]


@dataclass(frozen=True)
class TaggerConfig:
    embedding_size: int = 200
    hidden_size: int = 200
    num_layers: int = 1

    def __post_init__(self):
        for name in ("embedding_size", "hidden_size", "num_layers"):
            if getattr(self, name) < 1:
                raise ValueError(f"{name} must be >= 1")


@dataclass
class TaggerParams:
    word_vocab: Vocab
    tag_vocab: TagVocabulary
    config: TaggerConfig
    embedding: Tensor
    encoder: BiLstmEncoder
    w_out: Tensor                        # (|tags|, 2H), over h_i
    u_out: Tensor                        # (|tags|, E), over w_i
    b_out: Tensor                        # (|tags|,)

    def parameters(self) -> List[Tensor]:
        return [self.embedding, *self.encoder.parameters(),
                self.w_out, self.u_out, self.b_out]


@dataclass
class TagDistribution:
    """Row-stochastic (n, |tags|) matrix of p(z_i = tag | x)."""

    probs: Tensor
    tag_vocab: TagVocabulary

    @property
    def matrix(self) -> np.ndarray:
        return self.probs.data

    @property
    def n(self) -> int:
        return self.probs.data.shape[0]


def init_tagger(word_vocab: Vocab, tag_vocab: TagVocabulary,
                config: TaggerConfig = TaggerConfig(), seed: int = 0,
                rng=None) -> TaggerParams:
    rng = rng if rng is not None else np.random.default_rng(seed)
    e, h, t = config.embedding_size, config.hidden_size, len(tag_vocab)
    return TaggerParams(
        word_vocab=word_vocab,
        tag_vocab=tag_vocab,
        config=config,
        embedding=ad.parameter(ad.glorot(rng, (len(word_vocab), e)), "tagger.emb"),
        encoder=BiLstmEncoder("tagger.enc", e, h, config.num_layers, rng),
        w_out=ad.parameter(ad.glorot(rng, (t, 2 * h)), "tagger.w_out"),
        u_out=ad.parameter(ad.glorot(rng, (t, e)), "tagger.u_out"),
        b_out=ad.parameter(np.zeros(t), "tagger.b_out"),
    )


def _tokens(utterance) -> Sequence[str]:
    return utterance.tokens if hasattr(utterance, "tokens") else tuple(utterance)


def _embed_and_encode(params: TaggerParams, utterance):
    ids = params.word_vocab.encode(_tokens(utterance))
    x = ad.embedding(params.embedding, ids)
    return x, params.encoder.encode(x)


def encode(params: TaggerParams, utterance) -> Tensor:
    """Contextual states h_i = [h_forward; h_backward], shape (n, 2H)."""
    _, h = _embed_and_encode(params, utterance)
    return h


def tag_distribution(params: TaggerParams, utterance) -> TagDistribution:
    x, h = _embed_and_encode(params, utterance)
    logits = ad.add(ad.add(ad.matmul(h, ad.transpose(params.w_out)),
                           ad.matmul(x, ad.transpose(params.u_out))),
                    params.b_out)
    return TagDistribution(probs=ad.softmax(logits), tag_vocab=params.tag_vocab)


def predict_tags(params: TaggerParams, utterance) -> np.ndarray:
    """Per-word argmax tag ids; ties break toward the lowest id."""
    with ad.no_grad():
        dist = tag_distribution(params, utterance)
    return np.argmax(dist.matrix, axis=1)


def save_tagger(path, params: TaggerParams) -> None:
    meta = {
        "word_vocab": params.word_vocab.id2tok,
        "tag_vocab": params.tag_vocab.id2sym,
        "config": {"embedding_size": params.config.embedding_size,
                   "hidden_size": params.config.hidden_size,
                   "num_layers": params.config.num_layers},
    }
    save_checkpoint(path, params.parameters(), kind="tagger", meta=meta)


def load_tagger(path) -> TaggerParams:
    values, meta = load_checkpoint(path, expect_kind="tagger")
    id2tok = meta["word_vocab"]
    word_vocab = Vocab(id2tok[1:], unk=id2tok[0])
    tag_vocab = TagVocabulary(meta["tag_vocab"][2:])
    params = init_tagger(word_vocab, tag_vocab, TaggerConfig(**meta["config"]))
    for p in params.parameters():
        p.data = values[p.name].reshape(p.data.shape)
    return params
