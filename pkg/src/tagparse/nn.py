"""Sequence-model building blocks shared by the tagger and the parser.

LSTM gates are packed row-wise as [input; forget; output; candidate]
blocks of the hidden size.  All weights are Glorot-uniform, all biases
zero.  States are (1, hidden) row vectors; a sequence encoder stacks
per-step states into an (n, hidden) matrix.
"""

from __future__ import annotations

from typing import Iterable, List, Sequence, Tuple

import numpy as np

from . import autodiff as ad
from .autodiff import Tensor

__all__ = ["Vocab", "LstmCell", "BiLstmEncoder"]


class Vocab:
    """Bidirectional token/id map with a designated unknown id."""

    def __init__(self, tokens: Iterable[str], unk: str = "<unk>"):
        self.unk = unk
        self.id2tok: List[str] = []
        self.tok2id = {}
        for tok in [unk, *tokens]:
            if tok not in self.tok2id:
                self.tok2id[tok] = len(self.id2tok)
                self.id2tok.append(tok)

    def __len__(self):
        return len(self.id2tok)

    def __contains__(self, tok):
        return tok in self.tok2id

    def encode(self, tokens: Sequence[str]) -> np.ndarray:
        unk_id = self.tok2id[self.unk]
        return np.array([self.tok2id.get(t, unk_id) for t in tokens], dtype=np.intp)

    def decode(self, ids: Sequence[int]) -> List[str]:
        return [self.id2tok[int(i)] for i in ids]


class LstmCell:
    """One LSTM layer: Wx (4H, I), Wh (4H, H), b (4H,)."""

    def __init__(self, name: str, input_size: int, hidden_size: int,
                 rng: np.random.Generator):
        self.input_size = input_size
        self.hidden_size = hidden_size
        self.wx = ad.parameter(ad.glorot(rng, (4 * hidden_size, input_size)), f"{name}.wx")
        self.wh = ad.parameter(ad.glorot(rng, (4 * hidden_size, hidden_size)), f"{name}.wh")
        self.b = ad.parameter(np.zeros(4 * hidden_size), f"{name}.b")

    def parameters(self) -> List[Tensor]:
        return [self.wx, self.wh, self.b]

    def project_inputs(self, xs: Tensor) -> Tensor:
        """Precompute xs @ Wx.T + b for a whole (n, I) sequence at once."""
        return ad.add(ad.matmul(xs, ad.transpose(self.wx)), self.b)

    def step(self, xproj_t: Tensor, h: Tensor, c: Tensor) -> Tuple[Tensor, Tensor]:
        """Advance one step from a precomputed (1, 4H) input projection."""
        H = self.hidden_size
        gates = ad.add(xproj_t, ad.matmul(h, ad.transpose(self.wh)))
        i = ad.sigmoid(ad.cols(gates, 0, H))
        f = ad.sigmoid(ad.cols(gates, H, 2 * H))
        o = ad.sigmoid(ad.cols(gates, 2 * H, 3 * H))
        g = ad.tanh(ad.cols(gates, 3 * H, 4 * H))
        c_next = ad.add(ad.mul(f, c), ad.mul(i, g))
        h_next = ad.mul(o, ad.tanh(c_next))
        return h_next, c_next

    def run(self, xs: Tensor, reverse: bool = False) -> List[Tensor]:
        """Run over an (n, I) sequence; returns per-step (1, H) states in input order."""
        n = xs.data.shape[0]
        xproj = self.project_inputs(xs)
        h = ad.tensor(np.zeros((1, self.hidden_size)))
        c = ad.tensor(np.zeros((1, self.hidden_size)))
        states: List[Tensor] = []
        order = range(n - 1, -1, -1) if reverse else range(n)
        for t in order:
            h, c = self.step(ad.rows(xproj, t, t + 1), h, c)
            states.append(h)
        if reverse:
            states.reverse()
        return states


class BiLstmEncoder:
    """Stacked bidirectional LSTM; per-word output is [forward; backward]."""

    def __init__(self, name: str, input_size: int, hidden_size: int,
                 num_layers: int, rng: np.random.Generator):
        if num_layers < 1:
            raise ValueError(f"num_layers must be >= 1, got {num_layers}")
        self.hidden_size = hidden_size
        self.layers: List[Tuple[LstmCell, LstmCell]] = []
        size = input_size
        for k in range(num_layers):
            fwd = LstmCell(f"{name}.l{k}.fwd", size, hidden_size, rng)
            bwd = LstmCell(f"{name}.l{k}.bwd", size, hidden_size, rng)
            self.layers.append((fwd, bwd))
            size = 2 * hidden_size

    def parameters(self) -> List[Tensor]:
        out = []
        for fwd, bwd in self.layers:
            out.extend(fwd.parameters())
            out.extend(bwd.parameters())
        return out

    def encode(self, xs: Tensor) -> Tensor:
        """Map an (n, I) input sequence to (n, 2H) contextual states."""
        current = xs
        for fwd, bwd in self.layers:
            f_states = fwd.run(current)
            b_states = bwd.run(current, reverse=True)
            per_word = [ad.concat([f, b], axis=1) for f, b in zip(f_states, b_states)]
            current = ad.concat(per_word, axis=0)
        return current
