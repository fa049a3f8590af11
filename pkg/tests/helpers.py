"""Shared oracles for the test suite.

The CRF oracle scores every one of the K^n tag sequences explicitly, so
dynamic programming results can be checked against exhaustive truth.
"""

import itertools

import numpy as np

from framepath.autodiff import grad_check


def enumerate_sequences(start, trans, end, emissions):
    """All K^n tag sequences and their chain scores, in lockstep order."""
    n, k = emissions.shape
    seqs = np.array(list(itertools.product(range(k), repeat=n)), dtype=np.intp)
    scores = (start[seqs[:, 0]] + end[seqs[:, -1]]
              + emissions[np.arange(n), seqs].sum(axis=1))
    if n > 1:
        scores = scores + trans[seqs[:, :-1], seqs[:, 1:]].sum(axis=1)
    return seqs, scores


def logsumexp_np(x):
    m = x.max()
    return m + np.log(np.exp(x - m).sum())


def oracle_log_partition(start, trans, end, emissions) -> float:
    _, scores = enumerate_sequences(start, trans, end, emissions)
    return float(logsumexp_np(scores))


def oracle_viterbi(start, trans, end, emissions) -> list[int]:
    seqs, scores = enumerate_sequences(start, trans, end, emissions)
    return seqs[scores.argmax()].tolist()


def crf_tables(crf, constrain: bool):
    """The (start, trans, end) numpy tables a CRF actually scores with."""
    start = crf.start.data.copy()
    trans = crf.trans.data.copy()
    if constrain:
        start = start + crf._start_penalty
        trans = trans + crf._trans_penalty
    return start, trans, crf.end.data.copy()


def assert_grads_ok(loss, params, tol=1e-4, abs_floor=1e-8):
    """Tape gradients agree with central differences: relative error
    below tol, or absolute agreement below abs_floor where the gradient
    is too small for a relative comparison to mean anything."""
    _, report = grad_check(loss, params)
    for name, idx, analytic, numeric, rel in report:
        assert rel < tol or abs(analytic - numeric) < abs_floor, \
            (name, idx, analytic, numeric, rel)
