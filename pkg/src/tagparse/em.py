"""Latent-alignment EM training for the tagger.

Supervision is (utterance, symbol set) pairs: which symbols appear is
known, which word evokes which symbol is not.  Each symbol s_j is
assumed to align to exactly one word a_j, independently of the other
symbols, and the symbol list is padded with nulls to the utterance
length n.  Under a uniform prior over alignments the exact posterior is

    pi[i, j] = p(z_i = s_j | x) / sum_k p(z_k = s_j | x)

so soft columns are normalized (one posterior per symbol).  Training
alternates an E-step (posteriors from the current tagger, treated as
constants) with a single Adam update on the weighted log-likelihood

    J = sum_i sum_j pi[i, j] * log p(z_i = s_j | x)

per batch.  The first soft_updates steps use the soft posteriors; the
rest discretize them first: symbol entries become 1 when pi > beta,
null entries absorb the leftover row mass, negative leftovers clamp to
zero with the row renormalized, so hard rows sum to one.  Entity-linked
symbols keep their manually fixed columns in both phases: 1/|span| in
the soft phase and the span indicator in the hard phase.

The training log is TSV: step, phase, loss, dev tag accuracy.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass, replace
from typing import List

import numpy as np

from . import autodiff as ad
from .autodiff import Tensor
from .data import SymbolSet
from .nn import Vocab
from .optim import Adam
from .tagger import (TagDistribution, TaggerConfig, TaggerParams,
                     TagVocabulary, init_tagger, predict_tags, save_tagger,
                     tag_distribution)

__all__ = ["EmError", "EmConfig", "AlignmentPosterior", "PROB_FLOOR",
           "compute_posteriors", "fix_linked_posteriors", "harden_posteriors",
           "soft_em_loss", "hard_em_loss", "gold_tag_ids", "tag_accuracy",
           "train_tagger"]

PROB_FLOOR = 1e-12


class EmError(RuntimeError):
    pass


@dataclass(frozen=True)
class EmConfig:
    seed: int
    total_updates: int = 20000
    soft_updates: int = 10000
    beta: float = 0.26
    batch_size: int = 20
    learning_rate: float = 1e-3
    log_every: int = 200

    def __post_init__(self):
        if not 0 < self.soft_updates < self.total_updates:
            raise ValueError(
                f"need 0 < soft_updates < total_updates, got "
                f"{self.soft_updates} / {self.total_updates}")
        if not 0.0 < self.beta < 1.0:
            raise ValueError(f"beta must be in (0, 1), got {self.beta}")
        if self.batch_size < 1:
            raise ValueError("batch_size must be >= 1")
        if self.learning_rate <= 0:
            raise ValueError("learning_rate must be positive")

    @classmethod
    def from_dict(cls, d: dict) -> "EmConfig":
        return cls(**d)


@dataclass(frozen=True)
class AlignmentPosterior:
    """Alignment posteriors pi: rows = words, columns = padded symbols.

    Column j < num_symbols is symbol s_j; the rest are null padding.
    Soft mode normalizes columns, hard mode normalizes rows.
    """

    matrix: np.ndarray                   # (n, n)
    num_symbols: int
    mode: str                            # "soft" | "hard"
    tag_ids: np.ndarray                  # (n,) tag-vocabulary id per column
    fixed_columns: frozenset = frozenset()

    @property
    def n(self) -> int:
        return self.matrix.shape[0]


def _column_tag_ids(symbol_set: SymbolSet, tag_vocab: TagVocabulary) -> np.ndarray:
    ids = [tag_vocab.id_of(s) for s in symbol_set.symbols]
    ids.extend([tag_vocab.null_id] * (symbol_set.padded_length - symbol_set.l))
    return np.array(ids, dtype=np.intp)


def compute_posteriors(dist: TagDistribution, symbol_set: SymbolSet) -> AlignmentPosterior:
    """Exact soft posterior over independent per-symbol alignments."""
    n, l = dist.n, symbol_set.l
    if symbol_set.padded_length != n:
        raise EmError(
            f"symbol set padded to {symbol_set.padded_length}, utterance has {n} words")
    if l > n:
        raise EmError(f"more symbols ({l}) than words ({n})")
    tag_ids = _column_tag_ids(symbol_set, dist.tag_vocab)
    likelihood = dist.matrix[:, tag_ids]
    if (likelihood.sum(axis=0) == 0.0).any():
        dead = int(np.flatnonzero(likelihood.sum(axis=0) == 0.0)[0])
        raise EmError(f"column {dead} has zero likelihood at every word")
    likelihood = np.maximum(likelihood, PROB_FLOOR)
    posterior = AlignmentPosterior(
        matrix=likelihood / likelihood.sum(axis=0, keepdims=True),
        num_symbols=l, mode="soft", tag_ids=tag_ids)
    return fix_linked_posteriors(posterior, symbol_set)


def fix_linked_posteriors(posterior: AlignmentPosterior,
                          symbol_set: SymbolSet) -> AlignmentPosterior:
    """Overwrite entity-linked columns with 1/|span| mass on the span."""
    if not symbol_set.fixed_alignments:
        return posterior
    matrix = posterior.matrix.copy()
    fixed = set(posterior.fixed_columns)
    for symbol, span in symbol_set.fixed_alignments.items():
        if not span:
            continue
        try:
            j = symbol_set.symbols.index(symbol)
        except ValueError:
            raise EmError(f"fixed alignment for {symbol!r} not in symbol set")
        matrix[:, j] = 0.0
        matrix[list(span), j] = 1.0 / len(span)
        fixed.add(j)
    return replace(posterior, matrix=matrix, fixed_columns=frozenset(fixed))


def harden_posteriors(posterior: AlignmentPosterior, beta: float) -> AlignmentPosterior:
    """Discretize a soft posterior; null columns absorb leftover row mass."""
    if posterior.mode != "soft":
        raise EmError(f"can only harden a soft posterior, got {posterior.mode!r}")
    if not 0.0 < beta < 1.0:
        raise EmError(f"beta must be in (0, 1), got {beta}")
    n, l = posterior.n, posterior.num_symbols
    if l >= n:
        raise EmError(f"hardening needs null columns (symbols {l}, words {n})")
    pi = posterior.matrix
    hard = np.zeros_like(pi)
    hard[:, :l] = pi[:, :l] > beta
    # Entity-linked columns stay pinned to their span: re-thresholding
    # would drop spans wider than 1/beta words.
    for j in posterior.fixed_columns:
        hard[:, j] = pi[:, j] > 0.0
    leftover = (1.0 - hard[:, :l].sum(axis=1)) / (n - l)
    hard[:, l:] = np.maximum(leftover, 0.0)[:, None]
    hard /= hard.sum(axis=1, keepdims=True)
    return replace(posterior, matrix=hard, mode="hard")


def _weighted_loss(dist: TagDistribution, posterior: AlignmentPosterior) -> Tensor:
    weights = np.zeros_like(dist.matrix)
    for j in range(posterior.n):
        weights[:, posterior.tag_ids[j]] += posterior.matrix[:, j]
    return ad.cross_entropy(dist.probs, weights, floor=PROB_FLOOR)


def soft_em_loss(dist: TagDistribution, posterior: AlignmentPosterior) -> Tensor:
    """-J with soft weights; gradient flows only through the log-probs."""
    if posterior.mode != "soft":
        raise EmError(f"soft_em_loss needs a soft posterior, got {posterior.mode!r}")
    return _weighted_loss(dist, posterior)


def hard_em_loss(dist: TagDistribution, posterior: AlignmentPosterior) -> Tensor:
    """-J with discretized weights."""
    if posterior.mode != "hard":
        raise EmError(f"hard_em_loss needs a hard posterior, got {posterior.mode!r}")
    return _weighted_loss(dist, posterior)


def gold_tag_ids(example, tag_vocab: TagVocabulary) -> np.ndarray:
    """Per-word tag ids from a construction-time gold alignment."""
    if example.gold_alignment is None:
        raise EmError(f"example {example.example_id} has no gold alignment")
    ids = np.full(example.utterance.n, tag_vocab.null_id, dtype=np.intp)
    for symbol, indices in example.gold_alignment.items():
        ids[list(indices)] = tag_vocab.id_of(symbol)
    return ids


def tag_accuracy(params: TaggerParams, corpus) -> float:
    """Per-word accuracy of predicted tags against gold alignments."""
    hits = total = 0
    for ex in corpus:
        gold = gold_tag_ids(ex, params.tag_vocab)
        pred = predict_tags(params, ex.utterance)
        hits += int((pred == gold).sum())
        total += gold.size
    return hits / total if total else float("nan")


def _usable(corpus) -> List:
    kept = []
    for ex in corpus:
        if ex.symbol_set.l >= ex.utterance.n:
            warnings.warn(
                f"example {ex.example_id}: {ex.symbol_set.l} symbols for "
                f"{ex.utterance.n} words leaves no null column; skipped")
            continue
        kept.append(ex)
    return kept


def train_tagger(corpus, config: EmConfig, dev_corpus=None, log_file=None,
                 best_checkpoint_path=None,
                 tagger_config: TaggerConfig = TaggerConfig()) -> TaggerParams:
    """Soft-then-hard EM per the update schedule in `config`.

    Returns the parameters after the final update.  When `dev_corpus`
    (with gold alignments) is given, dev tag accuracy is logged and the
    best-scoring parameters are also written to `best_checkpoint_path`
    if one is provided.
    """
    examples = _usable(corpus)
    if not examples:
        raise EmError("no trainable examples (every symbol set fills its utterance)")

    words = []
    for ex in examples:
        words.extend(ex.utterance.tokens)
    params = init_tagger(Vocab(words), TagVocabulary.from_corpus(examples),
                         tagger_config, seed=config.seed)
    optimizer = Adam(params.parameters(), lr=config.learning_rate)
    rng = np.random.default_rng(config.seed)

    log = open(log_file, "w") if log_file is not None else None
    if log:
        log.write("step\tphase\tloss\tdev_accuracy\n")
    best_dev = -1.0
    try:
        for step in range(config.total_updates):
            phase = "soft" if step < config.soft_updates else "hard"
            batch = rng.choice(len(examples),
                               size=min(config.batch_size, len(examples)),
                               replace=False)
            losses = []
            for k in batch:
                ex = examples[k]
                dist = tag_distribution(params, ex.utterance)
                posterior = compute_posteriors(dist, ex.symbol_set)
                if phase == "hard":
                    posterior = harden_posteriors(posterior, config.beta)
                    losses.append(hard_em_loss(dist, posterior))
                else:
                    losses.append(soft_em_loss(dist, posterior))
            loss = ad.mul(ad.add_n(losses), 1.0 / len(losses))
            if not np.isfinite(loss.data):
                raise EmError(f"loss diverged at step {step}")
            optimizer.step(ad.backward(loss, params.parameters()))

            if step % config.log_every == 0 or step == config.total_updates - 1:
                dev_acc = tag_accuracy(params, dev_corpus) if dev_corpus else None
                if log:
                    shown = "" if dev_acc is None else f"{dev_acc:.4f}"
                    log.write(f"{step}\t{phase}\t{float(loss.data):.6f}\t{shown}\n")
                if dev_acc is not None and dev_acc > best_dev:
                    best_dev = dev_acc
                    if best_checkpoint_path is not None:
                        save_tagger(best_checkpoint_path, params)
    finally:
        if log:
            log.close()
    return params
