"""Linear-chain conditional random field with learned boundary scores.

Scores factor as start[y0] + sum emissions[t, yt] + sum trans[y(t-1), yt]
+ end[yn-1].  The log partition function runs in log space throughout, so
no probability ever underflows.  Structural constraints (which labels may
open a sequence, which may follow which) are applied as additive -1e4
penalties rather than hard -inf, keeping every quantity finite; the same
penalties can be switched on for the training objective or left to
decoding only.

Viterbi is plain numpy and breaks score ties toward the lower label id
(argmax returns the first maximum).
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import autodiff as ad
from .autodiff import Tensor
from .layers import ParamStore

PENALTY = -1e4


@dataclass
class TagScheme:
    """Boolean structure of a tagging scheme: legal openers and bigrams."""

    labels: tuple[str, ...]
    allowed_start: np.ndarray
    allowed_transition: np.ndarray  # [from, to]

    @property
    def n_labels(self) -> int:
        return len(self.labels)


def iobc_scheme() -> TagScheme:
    """O/B/I/C tags for possibly discontinuous target spans.

    A sentence cannot open with a continuation (I or C), and I must
    extend an adjacent target token so it cannot follow O.  C resumes
    after a gap, so O -> C is legal.
    """
    labels = ("O", "B", "I", "C")
    start = np.array([True, True, False, False])
    trans = np.ones((4, 4), dtype=bool)
    trans[0, 2] = False  # O -> I
    return TagScheme(labels, start, trans)


def iob2_scheme() -> TagScheme:
    """O/B/I tags for contiguous spans: I only continues a span."""
    labels = ("O", "B", "I")
    start = np.array([True, True, False])
    trans = np.ones((3, 3), dtype=bool)
    trans[0, 2] = False  # O -> I
    return TagScheme(labels, start, trans)


def open_scheme(labels: tuple[str, ...]) -> TagScheme:
    """No structural restrictions; used when constraints come from
    per-instance emission masks instead."""
    k = len(labels)
    return TagScheme(labels, np.ones(k, dtype=bool), np.ones((k, k), dtype=bool))


class LinearChainCrf:
    def __init__(self, store: ParamStore, path: str, scheme: TagScheme,
                 group: str | None = None):
        k = scheme.n_labels
        self.scheme = scheme
        self.trans = store.add(f"{path}.trans", np.zeros((k, k)), group=group)
        self.start = store.zeros(f"{path}.start", (k,))
        self.end = store.zeros(f"{path}.end", (k,))
        self._start_penalty = np.where(scheme.allowed_start, 0.0, PENALTY)
        self._trans_penalty = np.where(scheme.allowed_transition, 0.0, PENALTY)

    def _effective(self, constrain: bool) -> tuple[Tensor, Tensor]:
        if not constrain:
            return self.start, self.trans
        start = ad.add(self.start, ad.tensor(self._start_penalty))
        trans = ad.add(self.trans, ad.tensor(self._trans_penalty))
        return start, trans

    def log_partition(self, emissions: Tensor, constrain: bool) -> Tensor:
        n = emissions.data.shape[0]
        if n == 0:
            raise ValueError("empty sequence")
        start, trans = self._effective(constrain)
        alpha = ad.add(start, ad.row(emissions, 0))
        for t in range(1, n):
            spread = ad.logsumexp(ad.add_colvec(trans, alpha), axis=0)
            alpha = ad.add(spread, ad.row(emissions, t))
        return ad.logsumexp(ad.add(alpha, self.end))

    def gold_score(self, emissions: Tensor, tags: list[int],
                   constrain: bool) -> Tensor:
        n = emissions.data.shape[0]
        if len(tags) != n:
            raise ValueError(f"{len(tags)} tags for {n} positions")
        start, trans = self._effective(constrain)
        score = ad.add(
            ad.sum_all(ad.vec_select(start, [tags[0]])),
            ad.sum_all(ad.gather_pairs(emissions, list(range(n)), tags)),
        )
        if n > 1:
            score = ad.add(
                score, ad.sum_all(ad.gather_pairs(trans, tags[:-1], tags[1:]))
            )
        return ad.add(score, ad.sum_all(ad.vec_select(self.end, [tags[-1]])))

    def nll(self, emissions: Tensor, tags: list[int], constrain: bool) -> Tensor:
        """Negative log-likelihood of the tag sequence."""
        return ad.sub(self.log_partition(emissions, constrain),
                      self.gold_score(emissions, tags, constrain))

    def viterbi(self, emissions: np.ndarray) -> list[int]:
        """Best tag sequence under the constrained scores (no tape)."""
        n, k = emissions.shape
        if n == 0:
            return []
        trans = self.trans.data + self._trans_penalty
        score = self.start.data + self._start_penalty + emissions[0]
        back = np.zeros((n, k), dtype=np.intp)
        for t in range(1, n):
            total = score[:, None] + trans
            back[t] = total.argmax(axis=0)
            score = total[back[t], np.arange(k)] + emissions[t]
        score = score + self.end.data
        tags = [int(score.argmax())]
        for t in range(n - 1, 0, -1):
            tags.append(int(back[t][tags[-1]]))
        return tags[::-1]


def mask_penalty(allowed: np.ndarray) -> np.ndarray:
    """Additive emission penalty vector from a boolean allowed-label mask."""
    return np.where(allowed, 0.0, PENALTY)
