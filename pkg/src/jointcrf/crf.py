"""Linear-chain CRF dynamic programming in log domain.

Everything here operates on explicit score arrays; features and training
live elsewhere. Structural BIO legality and constraint masks are applied as
an additive penalty of MASK_SCORE (not IEEE -inf) so all intermediates stay
finite; feasibility is checked exactly with a boolean reachability pass
before any scored DP runs.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np
from scipy.special import logsumexp

from .errors import AlignmentError, InfeasibleMaskError
from .labels import LabelSpace, TagSpace, split_tag

MASK_SCORE = -1e9  # the single log-domain penalty for disallowed entries


def _transition_ok(prev_tag: str, next_tag: str) -> bool:
    pre, role = split_tag(next_tag)
    if pre != "I":
        return True
    prev_pre, prev_role = split_tag(prev_tag)
    return prev_pre in ("B", "I") and prev_role == role


def structural_masks(components: Sequence[tuple[str, ...]]) -> tuple[np.ndarray, np.ndarray]:
    """(start_allowed, trans_allowed) enforcing BIO well-formedness.

    ``components`` gives, per label, the tag on each scheme; I-X may only
    follow B-X or I-X independently on every component, and no component may
    open a sequence with I-X.
    """
    n = len(components)
    start = np.array(
        [all(split_tag(t)[0] != "I" for t in comp) for comp in components], dtype=bool
    )
    trans = np.ones((n, n), dtype=bool)
    for i, a in enumerate(components):
        for j, b in enumerate(components):
            if not all(_transition_ok(ta, tb) for ta, tb in zip(a, b)):
                trans[i, j] = False
    return start, trans


def _space_components(space: LabelSpace | TagSpace) -> list[tuple[str, ...]]:
    if isinstance(space, TagSpace):
        return [(t,) for t in space.tags]
    return [lab.pair for lab in space.labels]


def space_structural_masks(space: LabelSpace | TagSpace) -> tuple[np.ndarray, np.ndarray]:
    cached = getattr(space, "_structural_masks", None)
    if cached is None:
        cached = structural_masks(_space_components(space))
        space._structural_masks = cached
    return cached


@dataclass
class Lattice:
    """Per-instance emission scores plus shared transition parameters.

    ``start_allowed`` / ``trans_allowed`` are the hard BIO legality masks;
    ``constraint_mask`` optionally narrows emissions further (a
    ConstraintMask or a raw (T, L) boolean array).
    """

    emissions: np.ndarray        # (T, L)
    transitions: np.ndarray      # (L, L), [from, to]
    start: np.ndarray            # (L,)
    end: np.ndarray              # (L,)
    start_allowed: np.ndarray    # (L,) bool
    trans_allowed: np.ndarray    # (L, L) bool
    constraint_mask: object | None = None

    @property
    def shape(self) -> tuple[int, int]:
        return self.emissions.shape

    def copy(self) -> "Lattice":
        return Lattice(
            self.emissions.copy(), self.transitions.copy(), self.start.copy(),
            self.end.copy(), self.start_allowed, self.trans_allowed,
            self.constraint_mask,
        )


def make_lattice(
    space: LabelSpace | TagSpace,
    emissions: np.ndarray,
    transitions: np.ndarray | None = None,
    start: np.ndarray | None = None,
    end: np.ndarray | None = None,
    constraint_mask: object | None = None,
) -> Lattice:
    """Lattice over a label space, with zero parameters where unspecified."""
    emissions = np.asarray(emissions, dtype=float)
    T, L = emissions.shape
    if L != len(space):
        raise AlignmentError(f"emissions have {L} columns for a {len(space)}-label space")
    start_ok, trans_ok = space_structural_masks(space)
    return Lattice(
        emissions,
        np.zeros((L, L)) if transitions is None else np.asarray(transitions, dtype=float),
        np.zeros(L) if start is None else np.asarray(start, dtype=float),
        np.zeros(L) if end is None else np.asarray(end, dtype=float),
        start_ok,
        trans_ok,
        constraint_mask,
    )


def _mask_array(mask) -> np.ndarray | None:
    if mask is None:
        return None
    return np.asarray(getattr(mask, "allowed", mask), dtype=bool)


def _effective_mask(lattice: Lattice, mask) -> np.ndarray | None:
    own = _mask_array(lattice.constraint_mask)
    extra = _mask_array(mask)
    if own is None:
        return extra
    if extra is None:
        return own
    return own & extra


def _masked_scores(lattice: Lattice, mask: np.ndarray | None):
    em = lattice.emissions
    if mask is not None:
        if mask.shape != em.shape:
            raise AlignmentError(f"mask shape {mask.shape} != emissions shape {em.shape}")
        em = np.where(mask, em, em + MASK_SCORE)
    start = np.where(lattice.start_allowed, lattice.start, lattice.start + MASK_SCORE)
    trans = np.where(lattice.trans_allowed, lattice.transitions, lattice.transitions + MASK_SCORE)
    return em, start, trans


def _check_feasible(lattice: Lattice, mask: np.ndarray | None) -> None:
    """Exact boolean reachability under structural + constraint masks."""
    T, L = lattice.shape
    reach = lattice.start_allowed.copy()
    if mask is not None:
        reach = reach & mask[0]
    for t in range(1, T):
        if not reach.any():
            break
        reach = lattice.trans_allowed[reach].any(axis=0)
        if mask is not None:
            reach = reach & mask[t]
    if not reach.any():
        raise InfeasibleMaskError("no structurally valid, mask-allowed path exists")


def score_sequence(lattice: Lattice, y: Sequence[int]) -> float:
    """Raw path score: start + emissions + transitions + end, no masks."""
    y = np.asarray(y, dtype=int)
    T, L = lattice.shape
    if y.shape != (T,):
        raise AlignmentError(f"path length {y.shape} != sequence length {T}")
    if ((y < 0) | (y >= L)).any():
        raise IndexError(f"label index outside 0..{L - 1}")
    score = lattice.start[y[0]] + lattice.end[y[-1]]
    score += lattice.emissions[np.arange(T), y].sum()
    if T > 1:
        score += lattice.transitions[y[:-1], y[1:]].sum()
    return float(score)


def _forward(em, start, trans, end):
    T = em.shape[0]
    alpha = np.empty_like(em)
    alpha[0] = start + em[0]
    for t in range(1, T):
        alpha[t] = logsumexp(alpha[t - 1][:, None] + trans, axis=0) + em[t]
    return alpha, float(logsumexp(alpha[-1] + end))


def log_partition(lattice: Lattice, mask=None) -> float:
    """log sum over structurally valid (and mask-allowed) sequences of exp(s(y))."""
    eff = _effective_mask(lattice, mask)
    _check_feasible(lattice, eff)
    em, start, trans = _masked_scores(lattice, eff)
    _, log_z = _forward(em, start, trans, lattice.end)
    return log_z


def log_marginal(
    lattice: Lattice,
    observed_pb: Sequence[str],
    mask=None,
    space: LabelSpace | None = None,
) -> float:
    """log sum of exp(s(y)) over sequences whose PB projection is observed_pb.

    Runs the forward algorithm over the completion restriction (intersected
    with ``mask`` when given); never enumerates paths.
    """
    from .semlink import completion_allowed

    if space is None:
        raise ValueError("log_marginal needs the label space for PB projections")
    T = lattice.shape[0]
    if len(observed_pb) != T:
        raise AlignmentError(f"observed PB length {len(observed_pb)} != {T} positions")
    comp = completion_allowed(observed_pb, space)
    eff = _mask_array(mask)
    return log_partition(lattice, comp if eff is None else comp & eff)


def viterbi(lattice: Lattice, mask=None) -> tuple[list[int], float]:
    """Best structurally valid, mask-respecting path and its raw score.

    Ties are broken toward the lowest label index at every backpointer step,
    which makes decoding deterministic.
    """
    eff = _effective_mask(lattice, mask)
    _check_feasible(lattice, eff)
    em, start, trans = _masked_scores(lattice, eff)
    T, L = em.shape
    delta = start + em[0]
    back = np.empty((T, L), dtype=int)
    for t in range(1, T):
        scores = delta[:, None] + trans
        back[t] = np.argmax(scores, axis=0)  # first occurrence = lowest index
        delta = scores[back[t], np.arange(L)] + em[t]
    last = int(np.argmax(delta + lattice.end))
    best = float(delta[last] + lattice.end[last])
    path = [last]
    for t in range(T - 1, 0, -1):
        path.append(int(back[t, path[-1]]))
    path.reverse()
    return path, best


@dataclass
class ForwardBackward:
    """Partition value plus the posterior expectations used by gradients."""

    log_z: float
    unary: np.ndarray          # (T, L) positionwise label posteriors
    trans_expect: np.ndarray   # (L, L) expected transition counts
    start_post: np.ndarray     # (L,)  = unary[0]
    end_post: np.ndarray       # (L,)  = unary[-1]


def forward_backward(lattice: Lattice, mask=None) -> ForwardBackward:
    eff = _effective_mask(lattice, mask)
    _check_feasible(lattice, eff)
    em, start, trans = _masked_scores(lattice, eff)
    T, L = em.shape

    alpha, log_z = _forward(em, start, trans, lattice.end)
    beta = np.empty_like(em)
    beta[-1] = lattice.end
    for t in range(T - 2, -1, -1):
        beta[t] = logsumexp(trans + (em[t + 1] + beta[t + 1])[None, :], axis=1)

    unary = np.exp(alpha + beta - log_z)
    trans_expect = np.zeros((L, L))
    for t in range(T - 1):
        log_xi = alpha[t][:, None] + trans + (em[t + 1] + beta[t + 1])[None, :] - log_z
        trans_expect += np.exp(log_xi)
    return ForwardBackward(log_z, unary, trans_expect, unary[0].copy(), unary[-1].copy())


def posterior_marginals(lattice: Lattice, mask=None) -> np.ndarray:
    """Positionwise label posteriors under the (masked) path distribution."""
    return forward_backward(lattice, mask).unary


def is_valid_path(lattice: Lattice, y: Sequence[int]) -> bool:
    """Structural legality of a path (start + transition masks only)."""
    y = np.asarray(y, dtype=int)
    if not lattice.start_allowed[y[0]]:
        return False
    if len(y) > 1 and not lattice.trans_allowed[y[:-1], y[1:]].all():
        return False
    return True
