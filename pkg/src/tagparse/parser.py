"""Tag-augmented encoder-decoder that maps utterances to meaning tokens.

The encoder consumes u_t = [tag embedding; word embedding] per word (the
baseline variant drops the tag block and is otherwise identical).  Tag
embeddings are rows of the decoder's output-symbol embedding table, so
the tagger's symbols and the decoder's tokens share one vector space.
The decoder is an LSTM with bilinear attention over encoder states and
input feeding: each step consumes the previous output embedding
concatenated with the previous attentional state.

Training is teacher-forced cross-entropy on (x, predicted tags, y)
triples; the tags come from a trained tagger, never from gold
alignments.  Decoding is beam search over output tokens; beam size 1 is
greedy decoding.  If no hypothesis finishes within the length budget
the best partial sequence is returned with a truncation flag.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import List, Optional, Sequence, Tuple

import numpy as np

from . import autodiff as ad
from .autodiff import Tensor
from .checkpoint import load_checkpoint, save_checkpoint
from .data import MeaningRepresentation, deanonymize_tokens
from .nn import BiLstmEncoder, LstmCell, Vocab
from .optim import Adam
from .tagger import (NULL_TAG, UNK_TAG, TaggerParams, TagVocabulary,
                     predict_tags)

__all__ = ["BOS", "EOS", "ParserError", "ParserConfig", "DecodeConfig",
           "ParserParams", "DecodeResult", "ParseResult", "init_parser",
           "embed_inputs", "train_parser", "decode", "parse", "save_parser",
           "load_parser"]

BOS = "<s>"
EOS = "</s>"


class ParserError(RuntimeError):
    pass


@dataclass(frozen=True)
class ParserConfig:
    word_embedding_size: int = 200
    tag_embedding_size: int = 200
    hidden_size: int = 250
    num_layers: int = 1
    use_tags: bool = True
    epochs: int = 20
    batch_size: int = 20
    learning_rate: float = 1e-3
    seed: int = 0

    def __post_init__(self):
        for name in ("word_embedding_size", "tag_embedding_size",
                     "hidden_size", "num_layers", "epochs", "batch_size"):
            if getattr(self, name) < 1:
                raise ValueError(f"{name} must be >= 1")
        if self.learning_rate <= 0:
            raise ValueError("learning_rate must be positive")


@dataclass(frozen=True)
class DecodeConfig:
    max_length: int = 150
    beam_size: int = 5
    length_normalize: bool = False

    def __post_init__(self):
        if self.beam_size < 1:
            raise ValueError(f"beam_size must be >= 1, got {self.beam_size}")
        if self.max_length < 1:
            raise ValueError(f"max_length must be >= 1, got {self.max_length}")


@dataclass
class ParserParams:
    word_vocab: Vocab
    out_vocab: Vocab                     # meaning tokens plus specials
    tag_vocab: TagVocabulary
    config: ParserConfig
    formalism: str
    word_emb: Tensor                     # (|words|, We)
    sym_emb: Tensor                      # (|out|, Te): tag AND decoder-input table
    encoder: BiLstmEncoder
    decoder: LstmCell
    w_bridge: Tensor                     # (H, 2H) encoder summary -> h0
    b_bridge: Tensor
    w_att: Tensor                        # (H, 2H) bilinear attention
    w_comb: Tensor                       # (H, 3H) [h; context] -> attentional state
    b_comb: Tensor
    w_out: Tensor                        # (|out|, H)
    b_out: Tensor

    def parameters(self) -> List[Tensor]:
        return [self.word_emb, self.sym_emb, *self.encoder.parameters(),
                *self.decoder.parameters(), self.w_bridge, self.b_bridge,
                self.w_att, self.w_comb, self.b_comb, self.w_out, self.b_out]


def init_parser(word_vocab: Vocab, out_vocab: Vocab, tag_vocab: TagVocabulary,
                config: ParserConfig, formalism: str, seed: int = None) -> ParserParams:
    rng = np.random.default_rng(config.seed if seed is None else seed)
    we, te, h = (config.word_embedding_size, config.tag_embedding_size,
                 config.hidden_size)
    enc_input = we + (te if config.use_tags else 0)
    return ParserParams(
        word_vocab=word_vocab, out_vocab=out_vocab, tag_vocab=tag_vocab,
        config=config, formalism=formalism,
        word_emb=ad.parameter(ad.glorot(rng, (len(word_vocab), we)), "parser.word_emb"),
        sym_emb=ad.parameter(ad.glorot(rng, (len(out_vocab), te)), "parser.sym_emb"),
        encoder=BiLstmEncoder("parser.enc", enc_input, h, config.num_layers, rng),
        decoder=LstmCell("parser.dec", te + h, h, rng),
        w_bridge=ad.parameter(ad.glorot(rng, (h, 2 * h)), "parser.w_bridge"),
        b_bridge=ad.parameter(np.zeros(h), "parser.b_bridge"),
        w_att=ad.parameter(ad.glorot(rng, (h, 2 * h)), "parser.w_att"),
        w_comb=ad.parameter(ad.glorot(rng, (h, 3 * h)), "parser.w_comb"),
        b_comb=ad.parameter(np.zeros(h), "parser.b_comb"),
        w_out=ad.parameter(ad.glorot(rng, (len(out_vocab), h)), "parser.w_out"),
        b_out=ad.parameter(np.zeros(len(out_vocab)), "parser.b_out"),
    )


def _tokens(utterance) -> Sequence[str]:
    return utterance.tokens if hasattr(utterance, "tokens") else tuple(utterance)


def _tag_out_ids(params: ParserParams, tags) -> np.ndarray:
    """Map tag ids or tag symbol strings onto shared-table row ids."""
    symbols = [t if isinstance(t, str) else params.tag_vocab.symbol_of(t)
               for t in tags]
    return params.out_vocab.encode(symbols)


def embed_inputs(params: ParserParams, utterance, tags=None) -> Tensor:
    """Encoder inputs u_t; tag block first, then the word embedding."""
    tokens = _tokens(utterance)
    words = ad.embedding(params.word_emb, params.word_vocab.encode(tokens))
    if not params.config.use_tags:
        return words
    if tags is None or len(tags) != len(tokens):
        got = "none" if tags is None else str(len(tags))
        raise ParserError(f"{len(tokens)} words need {len(tokens)} tags, got {got}")
    tag_block = ad.embedding(params.sym_emb, _tag_out_ids(params, tags))
    return ad.concat([tag_block, words], axis=1)


def _encode(params: ParserParams, utterance, tags):
    enc = params.encoder.encode(embed_inputs(params, utterance, tags))
    n, h = enc.data.shape[0], params.config.hidden_size
    summary = ad.concat([ad.cols(ad.rows(enc, n - 1, n), 0, h),
                         ad.cols(ad.rows(enc, 0, 1), h, 2 * h)], axis=1)
    h0 = ad.tanh(ad.add(ad.matmul(summary, ad.transpose(params.w_bridge)),
                        params.b_bridge))
    return enc, h0


def _decoder_step(params: ParserParams, prev_id: int, h, c, feed, enc):
    y = ad.embedding(params.sym_emb, np.array([prev_id], dtype=np.intp))
    h, c = params.decoder.step(
        params.decoder.project_inputs(ad.concat([y, feed], axis=1)), h, c)
    scores = ad.matmul(ad.matmul(h, params.w_att), ad.transpose(enc))
    context = ad.matmul(ad.softmax(scores), enc)
    feed = ad.tanh(ad.add(ad.matmul(ad.concat([h, context], axis=1),
                                    ad.transpose(params.w_comb)),
                          params.b_comb))
    logits = ad.add(ad.matmul(feed, ad.transpose(params.w_out)), params.b_out)
    return h, c, feed, logits


def _zeros(params: ParserParams) -> Tensor:
    return ad.tensor(np.zeros((1, params.config.hidden_size)))


def _sequence_loss(params: ParserParams, utterance, tags,
                   target_ids: np.ndarray) -> Tensor:
    """Teacher-forced negative log-likelihood of one output sequence."""
    enc, h = _encode(params, utterance, tags)
    c, feed = _zeros(params), _zeros(params)
    bos = params.out_vocab.tok2id[BOS]
    rows = []
    for t, target in enumerate(target_ids):
        prev = bos if t == 0 else int(target_ids[t - 1])
        h, c, feed, logits = _decoder_step(params, prev, h, c, feed, enc)
        rows.append(logits)
    probs = ad.softmax(ad.concat(rows, axis=0))
    onehot = np.zeros((len(target_ids), len(params.out_vocab)))
    onehot[np.arange(len(target_ids)), target_ids] = 1.0
    return ad.cross_entropy(probs, onehot)


def _prepared(corpus, tagger_params, config) -> Tuple[list, str]:
    if not corpus:
        raise ParserError("empty training corpus")
    formalisms = {ex.meaning.formalism for ex in corpus}
    if len(formalisms) > 1:
        raise ParserError(f"mixed formalisms in corpus: {sorted(formalisms)}")
    if config.use_tags and tagger_params is None:
        raise ParserError("tag-augmented parser needs a trained tagger")
    return list(corpus), formalisms.pop()


def train_parser(corpus, tagger_params: Optional[TaggerParams],
                 config: ParserConfig = ParserConfig(), dev_corpus=None,
                 log_file=None) -> ParserParams:
    """Teacher-forced training on (utterance, predicted tags, meaning).

    Tags are predicted once with the frozen tagger; the baseline variant
    (config.use_tags False) ignores the tagger entirely.
    """
    examples, formalism = _prepared(corpus, tagger_params, config)

    words, meaning_tokens = [], []
    for ex in examples:
        words.extend(ex.utterance.tokens)
        meaning_tokens.extend(ex.meaning.tokens)
    word_vocab = Vocab(words)
    out_vocab = Vocab([BOS, EOS, NULL_TAG, UNK_TAG, *meaning_tokens])
    tag_vocab = tagger_params.tag_vocab if tagger_params else TagVocabulary([])
    params = init_parser(word_vocab, out_vocab, tag_vocab, config, formalism)

    eos = out_vocab.tok2id[EOS]
    tags, targets = [], []
    for ex in examples:
        tags.append(predict_tags(tagger_params, ex.utterance)
                    if config.use_tags else None)
        targets.append(np.append(out_vocab.encode(ex.meaning.tokens), eos))

    optimizer = Adam(params.parameters(), lr=config.learning_rate)
    rng = np.random.default_rng(config.seed)
    log = open(log_file, "w") if log_file is not None else None
    if log:
        log.write("epoch\tloss\tdev_exact_match\n")
    try:
        for epoch in range(config.epochs):
            order = rng.permutation(len(examples))
            epoch_losses = []
            for start in range(0, len(examples), config.batch_size):
                batch = order[start:start + config.batch_size]
                losses = [_sequence_loss(params, examples[k].utterance,
                                         tags[k], targets[k])
                          for k in batch]
                loss = ad.mul(ad.add_n(losses), 1.0 / len(losses))
                if not np.isfinite(loss.data):
                    raise ParserError(
                        f"loss diverged in epoch {epoch} at batch {start // config.batch_size}")
                optimizer.step(ad.backward(loss, params.parameters()))
                epoch_losses.append(float(loss.data))
            if log:
                shown = ""
                if dev_corpus:
                    hits = sum(decode(params, ex.utterance, t).tokens
                               == ex.meaning.tokens
                               for ex, t in zip(dev_corpus,
                                                _dev_tags(tagger_params, dev_corpus, config)))
                    shown = f"{hits / len(dev_corpus):.4f}"
                log.write(f"{epoch}\t{float(np.mean(epoch_losses)):.6f}\t{shown}\n")
    finally:
        if log:
            log.close()
    return params


def _dev_tags(tagger_params, corpus, config):
    for ex in corpus:
        yield predict_tags(tagger_params, ex.utterance) if config.use_tags else None


@dataclass
class _Hyp:
    token_ids: tuple
    score: float
    h: Tensor
    c: Tensor
    feed: Tensor


@dataclass(frozen=True)
class DecodeResult:
    tokens: Tuple[str, ...]              # output tokens, end marker stripped
    token_ids: Tuple[int, ...]
    score: float                         # sum of token log-probs (incl. end)
    truncated: bool
    formalism: str

    def to_meaning(self) -> MeaningRepresentation:
        return MeaningRepresentation(self.tokens, self.formalism)

    def text(self) -> str:
        return " ".join(self.tokens)


def decode(params: ParserParams, utterance, tags=None,
           config: DecodeConfig = DecodeConfig()) -> DecodeResult:
    """Beam search for the highest-likelihood output sequence."""
    with ad.no_grad():
        enc, h0 = _encode(params, utterance, tags)
        eos = params.out_vocab.tok2id[EOS]
        bos = params.out_vocab.tok2id[BOS]
        alive = [_Hyp((), 0.0, h0, _zeros(params), _zeros(params))]
        completed: List[_Hyp] = []
        for _ in range(config.max_length):
            candidates = []
            for hyp in alive:
                prev = hyp.token_ids[-1] if hyp.token_ids else bos
                h, c, feed, logits = _decoder_step(params, prev, hyp.h, hyp.c,
                                                   hyp.feed, enc)
                logp = np.log(np.maximum(ad.softmax(logits).data[0], 1e-300))
                # stable sort so score ties resolve to the lowest token id
                for tok in np.argsort(-logp, kind="stable")[:config.beam_size]:
                    candidates.append(_Hyp(hyp.token_ids + (int(tok),),
                                           hyp.score + float(logp[tok]),
                                           h, c, feed))
            candidates.sort(key=lambda cand: -cand.score)
            alive = []
            for cand in candidates[:config.beam_size]:
                if cand.token_ids[-1] == eos:
                    completed.append(cand)
                else:
                    alive.append(cand)
            if not alive:
                break
            if completed and not config.length_normalize:
                # token log-probs are <= 0, so no live hypothesis can
                # overtake the best finished one once it falls behind
                if max(c.score for c in completed) >= max(a.score for a in alive):
                    break

    def ranking(hyp: _Hyp) -> float:
        if config.length_normalize:
            return hyp.score / max(len(hyp.token_ids), 1)
        return hyp.score

    truncated = not completed
    pool = completed or alive
    best = max(pool, key=ranking)
    ids = best.token_ids[:-1] if not truncated else best.token_ids
    return DecodeResult(tokens=tuple(params.out_vocab.decode(ids)),
                        token_ids=tuple(int(i) for i in ids),
                        score=best.score, truncated=truncated,
                        formalism=params.formalism)


@dataclass(frozen=True)
class ParseResult:
    tokens: Tuple[str, ...]              # de-anonymized meaning tokens
    anonymized_tokens: Tuple[str, ...]
    tags: Tuple[str, ...]
    score: float
    truncated: bool
    formalism: str

    def to_meaning(self) -> MeaningRepresentation:
        return MeaningRepresentation(self.tokens, self.formalism)

    def text(self) -> str:
        return " ".join(self.tokens)


def parse(tagger_params: Optional[TaggerParams], parser_params: ParserParams,
          example, config: DecodeConfig = DecodeConfig()) -> ParseResult:
    """Two-stage pipeline: predict tags, decode, restore entity markers."""
    utterance = example.utterance if hasattr(example, "utterance") else example
    if parser_params.config.use_tags:
        if tagger_params is None:
            raise ParserError("tag-augmented parsing needs a trained tagger")
        tag_ids = predict_tags(tagger_params, utterance)
        tag_names = tuple(tagger_params.tag_vocab.symbol_of(i) for i in tag_ids)
    else:
        tag_ids, tag_names = None, ()
    result = decode(parser_params, utterance, tag_ids, config)
    entity_map = getattr(example, "entity_map", None)
    return ParseResult(tokens=deanonymize_tokens(result.tokens, entity_map),
                       anonymized_tokens=result.tokens, tags=tag_names,
                       score=result.score, truncated=result.truncated,
                       formalism=result.formalism)


def save_parser(path, params: ParserParams) -> None:
    meta = {
        "word_vocab": params.word_vocab.id2tok,
        "out_vocab": params.out_vocab.id2tok,
        "tag_vocab": params.tag_vocab.id2sym,
        "formalism": params.formalism,
        "config": {f: getattr(params.config, f)
                   for f in ParserConfig.__dataclass_fields__},
    }
    save_checkpoint(path, params.parameters(), kind="parser", meta=meta)


def load_parser(path) -> ParserParams:
    values, meta = load_checkpoint(path, expect_kind="parser")
    word_list, out_list = meta["word_vocab"], meta["out_vocab"]
    params = init_parser(Vocab(word_list[1:], unk=word_list[0]),
                         Vocab(out_list[1:], unk=out_list[0]),
                         TagVocabulary(meta["tag_vocab"][2:]),
                         ParserConfig(**meta["config"]), meta["formalism"])
    for p in params.parameters():
        p.data = values[p.name].reshape(p.data.shape)
    return params
