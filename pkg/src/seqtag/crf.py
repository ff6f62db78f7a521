"""Linear-chain CRF output layer.

A tag sequence is scored as the sum of per-position emission scores and
adjacent-tag transition scores, bracketed by synthetic START/STOP states.
The transition matrix is (K+2) x (K+2) with row = source tag and
column = destination tag; START sits at index K and STOP at K+1.
Transitions into START and out of STOP are structurally impossible: they
are pinned to a large negative score and their gradients are zeroed, so
no update ever moves them.

All dynamic programming runs in log space via log_sum_exp.
"""

from __future__ import annotations

import numpy as np

from .errors import DimensionError
from .layers import Layer, glorot_uniform
from .tensor import log_sum_exp

# score pinned on forbidden transitions; large enough that no realistic
# emission can compensate, small enough that exp() stays well-behaved
IMPOSSIBLE_SCORE = -1.0e4


class LinearChainCrf(Layer):
    def __init__(self, num_tags: int, rng: np.random.Generator | None = None):
        if num_tags < 1:
            raise ValueError(f"num_tags must be >= 1, got {num_tags}")
        super().__init__()
        self.num_tags = num_tags
        self.start = num_tags
        self.stop = num_tags + 1
        n = num_tags + 2
        if rng is None:
            trans = np.zeros((n, n))
        else:
            trans = glorot_uniform(rng, n, n, (n, n))
        trans[:, self.start] = IMPOSSIBLE_SCORE
        trans[self.stop, :] = IMPOSSIBLE_SCORE
        self.transitions = self._add_param("transitions", trans)

    # -- validation ------------------------------------------------------

    def _check_emissions(self, emissions) -> np.ndarray:
        em = np.asarray(emissions, dtype=np.float64)
        if em.ndim != 2 or em.shape[1] != self.num_tags:
            raise DimensionError(
                f"emissions shape {em.shape} != (T, {self.num_tags})"
            )
        if em.shape[0] == 0:
            raise DimensionError("emissions must cover at least one position")
        if not np.isfinite(em).all():
            raise ValueError("emission scores must be finite")
        return em

    def _check_tags(self, tags, t_len: int) -> np.ndarray:
        tags = np.asarray(tags, dtype=np.intp)
        if tags.ndim != 1 or tags.size != t_len:
            raise DimensionError(f"tag sequence length {tags.size} != {t_len}")
        bad = (tags < 0) | (tags >= self.num_tags)
        if bad.any():
            raise IndexError(
                f"tag id {int(tags[bad][0])} outside [0, {self.num_tags})"
            )
        return tags

    # -- scoring ---------------------------------------------------------

    def path_score(self, emissions, tags) -> float:
        """Unnormalized log score of one START..STOP bracketed path."""
        em = self._check_emissions(emissions)
        tags = self._check_tags(tags, em.shape[0])
        tr = self.transitions
        score = tr[self.start, tags[0]] + tr[tags[-1], self.stop]
        score += em[np.arange(em.shape[0]), tags].sum()
        score += tr[tags[:-1], tags[1:]].sum()
        return float(score)

    def _forward_alphas(self, em: np.ndarray) -> np.ndarray:
        """alphas[t, j] = log sum of scores of all paths covering 0..t that
        end in tag j (emissions included, STOP not yet applied)."""
        t_len, k = em.shape
        tt = self.transitions[:k, :k]
        alphas = np.empty((t_len, k))
        alphas[0] = self.transitions[self.start, :k] + em[0]
        for t in range(1, t_len):
            alphas[t] = em[t] + log_sum_exp(alphas[t - 1][:, None] + tt, axis=0)
        return alphas

    def _backward_betas(self, em: np.ndarray) -> np.ndarray:
        """betas[t, i] = log sum over path suffixes from tag i at t to STOP,
        counting emissions strictly after t."""
        t_len, k = em.shape
        tt = self.transitions[:k, :k]
        betas = np.empty((t_len, k))
        betas[-1] = self.transitions[:k, self.stop]
        for t in range(t_len - 2, -1, -1):
            betas[t] = log_sum_exp(tt + (em[t + 1] + betas[t + 1])[None, :], axis=1)
        return betas

    def log_partition(self, emissions) -> float:
        """log of the summed exp-scores of every possible path."""
        em = self._check_emissions(emissions)
        alphas = self._forward_alphas(em)
        return float(log_sum_exp(alphas[-1] + self.transitions[:self.num_tags, self.stop]))

    def nll_loss(self, emissions, tags) -> float:
        """Negative log-probability of the gold path; always >= 0."""
        return self.log_partition(emissions) - self.path_score(emissions, tags)

    # -- gradients ---------------------------------------------------------

    def gradients(self, emissions=None, tags=None):
        """With arguments: exact NLL gradients as (d_emissions, d_transitions)
        via forward-backward marginals. Without arguments: the accumulated
        gradient buffers (the Layer protocol)."""
        if emissions is None and tags is None:
            return self._grads
        _, d_em, d_tr = self._loss_and_gradients(emissions, tags)
        return d_em, d_tr

    def _loss_and_gradients(self, emissions, tags):
        em = self._check_emissions(emissions)
        tags = self._check_tags(tags, em.shape[0])
        t_len, k = em.shape
        tt = self.transitions[:k, :k]
        alphas = self._forward_alphas(em)
        betas = self._backward_betas(em)
        log_z = log_sum_exp(alphas[-1] + self.transitions[:k, self.stop])

        marginal = np.exp(alphas + betas - log_z)  # (T, K) tag marginals
        d_em = marginal.copy()
        d_em[np.arange(t_len), tags] -= 1.0

        d_tr = np.zeros_like(self.transitions)
        for t in range(t_len - 1):
            pair = alphas[t][:, None] + tt + (em[t + 1] + betas[t + 1])[None, :] - log_z
            d_tr[:k, :k] += np.exp(pair)
        d_tr[self.start, :k] += marginal[0]
        d_tr[:k, self.stop] += marginal[-1]

        d_tr[self.start, tags[0]] -= 1.0
        # subtract.at, not fancy -=: a gold bigram can repeat within one sentence
        np.subtract.at(d_tr, (tags[:-1], tags[1:]), 1.0)
        d_tr[tags[-1], self.stop] -= 1.0

        # structurally impossible transitions never move
        d_tr[:, self.start] = 0.0
        d_tr[self.stop, :] = 0.0

        loss = float(log_z) - self.path_score(em, tags)
        return loss, d_em, d_tr

    def backward(self, emissions, tags):
        """Training hook: accumulate the transition gradient into this
        layer's buffer and return (loss, d_emissions)."""
        loss, d_em, d_tr = self._loss_and_gradients(emissions, tags)
        self._grads["transitions"] += d_tr
        return loss, d_em

    # -- decoding ----------------------------------------------------------

    def viterbi_decode(self, emissions):
        """Best path and its score. Ties break toward the lowest tag index
        at every backpointer, so decoding is deterministic."""
        em = self._check_emissions(emissions)
        t_len, k = em.shape
        tt = self.transitions[:k, :k]
        delta = self.transitions[self.start, :k] + em[0]
        back = np.empty((t_len, k), dtype=np.intp)
        for t in range(1, t_len):
            scores = delta[:, None] + tt  # [src, dst]
            back[t] = np.argmax(scores, axis=0)  # first max = lowest index
            delta = em[t] + np.max(scores, axis=0)
        final = delta + self.transitions[:k, self.stop]
        last = int(np.argmax(final))
        path = [last]
        for t in range(t_len - 1, 0, -1):
            last = int(back[t, last])
            path.append(last)
        path.reverse()
        return path, float(np.max(final))
