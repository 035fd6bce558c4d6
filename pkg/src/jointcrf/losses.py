"""Training objectives over lattices, with analytic forward-backward gradients.

Four losses, all negated log-likelihoods:

- joint: full-sequence NLL against a gold joint path;
- marginal: NLL of the set of joint sequences consistent with an observed
  PB projection (numerator summed by the forward algorithm, never by
  enumeration);
- constrained marginal: the same with both numerator and partition
  restricted to the lexicon mask, which turns the global normalizer into a
  local one and zeroes out losses of lexicon-violating label traces;
- multitask: two independent single-scheme chain NLLs.

Gradients are posterior expectations of the less constrained distribution
minus those of the more constrained one (or gold indicators).
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .crf import Lattice, forward_backward, is_valid_path, score_sequence
from .errors import DataError
from .labels import LabelSpace
from .semlink import completion_allowed, ConstraintMask


@dataclass
class LossGrads:
    """A scalar loss and its gradients w.r.t. every lattice parameter."""

    value: float
    d_emissions: np.ndarray
    d_transitions: np.ndarray
    d_start: np.ndarray
    d_end: np.ndarray


def _gold_indicator_grads(fb, lattice: Lattice, gold: np.ndarray) -> LossGrads:
    T, L = lattice.shape
    d_em = fb.unary.copy()
    d_em[np.arange(T), gold] -= 1.0
    d_trans = fb.trans_expect.copy()
    if T > 1:
        np.add.at(d_trans, (gold[:-1], gold[1:]), -1.0)
    d_start = fb.start_post.copy()
    d_start[gold[0]] -= 1.0
    d_end = fb.end_post.copy()
    d_end[gold[-1]] -= 1.0
    value = fb.log_z - score_sequence(lattice, gold)
    return LossGrads(value, d_em, d_trans, d_start, d_end)


def joint_nll(lattice: Lattice, gold: Sequence[int], partition_mask=None) -> LossGrads:
    """NLL of one gold path: log Z - s(gold).

    ``partition_mask`` optionally restricts the partition (the training-time
    lexicon-constraint ablation); the gold score itself is never masked.
    """
    gold = np.asarray(gold, dtype=int)
    if not is_valid_path(lattice, gold):
        raise DataError("gold path violates the structural BIO mask")
    fb = forward_backward(lattice, partition_mask)
    return _gold_indicator_grads(fb, lattice, gold)


def _difference(a, b) -> LossGrads:
    return LossGrads(
        a.log_z - b.log_z,
        a.unary - b.unary,
        a.trans_expect - b.trans_expect,
        a.start_post - b.start_post,
        a.end_post - b.end_post,
    )


def marginal_nll(lattice: Lattice, observed_pb: Sequence[str], space: LabelSpace) -> LossGrads:
    """NLL of all joint sequences whose PB projection equals observed_pb."""
    comp = completion_allowed(observed_pb, space)
    full = forward_backward(lattice, None)
    restricted = forward_backward(lattice, comp)
    return _difference(full, restricted)


def constrained_marginal_nll(
    lattice: Lattice,
    observed_pb: Sequence[str],
    semlink_mask: ConstraintMask | np.ndarray,
    space: LabelSpace,
) -> LossGrads:
    """Marginal NLL with numerator and partition both under the lexicon mask."""
    allowed = np.asarray(getattr(semlink_mask, "allowed", semlink_mask), dtype=bool)
    comp = completion_allowed(observed_pb, space)
    denom = forward_backward(lattice, allowed)
    numer = forward_backward(lattice, allowed & comp)
    return _difference(denom, numer)


@dataclass
class MultitaskLoss:
    value: float
    vn: LossGrads
    pb: LossGrads


def multitask_nll(
    vn_lattice: Lattice,
    pb_lattice: Lattice,
    gold_vn: Sequence[int],
    gold_pb: Sequence[int],
) -> MultitaskLoss:
    """Sum of two independent single-scheme chain NLLs."""
    vn = joint_nll(vn_lattice, gold_vn)
    pb = joint_nll(pb_lattice, gold_pb)
    return MultitaskLoss(vn.value + pb.value, vn, pb)
