"""Hashed sparse indicator features and the linear emission scorer.

The scorer replaces a heavy contextual encoder with a trainable linear model
over deterministic, signed hashed features: token identity in a +/-2 window,
lowercased token, bucketed signed distance to the predicate, predicate
lemma, PB sense, VN class, and a predicate flag. COMP mode adds the observed
PB tag at the position and its immediate neighbours, for completion-style
inputs. Any scorer producing a (T, n_labels) matrix can be slotted in behind
the same interface.
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace
from functools import lru_cache
from hashlib import blake2b

import numpy as np

from .errors import DataError
from .instances import PredicateInstance

PAD = "<pad>"
NONE_VALUE = "<none>"

TOKEN_TEMPLATES = ("tok-2", "tok-1", "tok0", "tok+1", "tok+2", "low")
WP_TEMPLATES = TOKEN_TEMPLATES + ("relpos", "plemma", "sense", "vnclass", "ispred")
COMP_TEMPLATES = WP_TEMPLATES + ("pb-1", "pb0", "pb+1")

_TOKEN_OFFSETS = {"tok-2": -2, "tok-1": -1, "tok0": 0, "tok+1": 1, "tok+2": 2}
_PB_OFFSETS = {"pb-1": -1, "pb0": 0, "pb+1": 1}


def hash_feature(key: str, hash_dim: int) -> tuple[int, float]:
    """Deterministic (index, sign) for a feature key; stable across runs."""
    value = int.from_bytes(blake2b(key.encode("utf-8"), digest_size=8).digest(), "little")
    index = (value & 0x7FFFFFFFFFFFFFFF) % hash_dim
    sign = 1.0 if value >> 63 == 0 else -1.0
    return index, sign


def _hash_keys(keys: list[str], hash_dim: int) -> tuple[np.ndarray, np.ndarray]:
    idx = np.empty(len(keys), dtype=np.int64)
    sgn = np.empty(len(keys), dtype=float)
    for k, key in enumerate(keys):
        idx[k], sgn[k] = hash_feature(key, hash_dim)
    return idx, sgn


def relative_position_bucket(i: int, predicate_index: int) -> str:
    d = i - predicate_index
    if abs(d) <= 4:
        return f"{d:+d}" if d else "0"
    return ">=+5" if d > 0 else "<=-5"


def predicate_lemma(pb_sense: str) -> str:
    if not pb_sense:
        return NONE_VALUE
    return pb_sense.split(".", 1)[0]


def _token_keys(tokens: tuple[str, ...], templates: tuple[str, ...], i: int) -> list[str]:
    keys = []
    for tid in templates:
        if tid in _TOKEN_OFFSETS:
            j = i + _TOKEN_OFFSETS[tid]
            value = tokens[j] if 0 <= j < len(tokens) else PAD
            keys.append(f"{tid}={value}")
        elif tid == "low":
            keys.append(f"low={tokens[i].lower()}")
    return keys


@lru_cache(maxsize=512)
def _token_features(tokens: tuple[str, ...], templates: tuple[str, ...],
                    hash_dim: int) -> tuple[tuple[np.ndarray, np.ndarray], ...]:
    """Per-position hashed token-window features, shared across predicates."""
    return tuple(
        _hash_keys(_token_keys(tokens, templates, i), hash_dim)
        for i in range(len(tokens))
    )


@dataclass
class FeatureExtractor:
    """Feature templates, hashing dimension, and the label weight matrix."""

    mode: str = "WP"                       # "WP" or "COMP"
    templates: tuple[str, ...] = ()        # defaults per mode when empty
    hash_dim: int = 2 ** 20
    weights: np.ndarray | None = None      # (hash_dim, n_labels)
    use_cache: bool = True                 # token-window feature sharing

    def __post_init__(self):
        if self.mode not in ("WP", "COMP"):
            raise DataError(f"unknown feature mode {self.mode!r}")
        if not self.templates:
            self.templates = WP_TEMPLATES if self.mode == "WP" else COMP_TEMPLATES
        if self.mode == "WP" and any(t in _PB_OFFSETS for t in self.templates):
            raise DataError("WP templates must not reference observed PB labels")
        if self.weights is not None and self.weights.shape[0] != self.hash_dim:
            raise DataError(
                f"weights have {self.weights.shape[0]} rows, expected hash_dim={self.hash_dim}"
            )

    @property
    def n_labels(self) -> int:
        if self.weights is None:
            raise DataError("extractor has no weights attached")
        return self.weights.shape[1]

    def with_weights(self, weights: np.ndarray) -> "FeatureExtractor":
        return replace(self, weights=weights)


def new_extractor(mode: str, hash_dim: int, n_labels: int,
                  templates: tuple[str, ...] = (), rng: np.random.Generator | None = None,
                  init_scale: float = 0.0) -> FeatureExtractor:
    if init_scale > 0.0:
        if rng is None:
            raise ValueError("random init needs an rng")
        weights = rng.normal(0.0, init_scale, size=(hash_dim, n_labels))
    else:
        weights = np.zeros((hash_dim, n_labels))
    return FeatureExtractor(mode=mode, templates=tuple(templates), hash_dim=hash_dim,
                            weights=weights)


def feature_keys(instance: PredicateInstance, extractor: FeatureExtractor, i: int) -> list[str]:
    """The raw (unhashed) feature strings active at position i."""
    if not 0 <= i < instance.length:
        raise IndexError(f"position {i} outside 0..{instance.length - 1}")
    keys = _token_keys(instance.tokens, extractor.templates, i)
    u = instance.predicate_index
    for tid in extractor.templates:
        if tid == "relpos":
            keys.append(f"relpos={relative_position_bucket(i, u)}")
        elif tid == "plemma":
            keys.append(f"plemma={predicate_lemma(instance.pb_sense)}")
        elif tid == "sense":
            keys.append(f"sense={instance.pb_sense or NONE_VALUE}")
        elif tid == "vnclass":
            keys.append(f"vnclass={instance.vn_class or NONE_VALUE}")
        elif tid == "ispred" and i == u:
            keys.append("ispred=1")
        elif tid in _PB_OFFSETS:
            if instance.observed_pb is None:
                raise DataError(
                    f"instance {instance.instance_id!r}: COMP features need observed PB labels"
                )
            j = i + _PB_OFFSETS[tid]
            value = instance.observed_pb[j] if 0 <= j < instance.length else PAD
            keys.append(f"{tid}={value}")
    return keys


def featurize(instance: PredicateInstance, extractor: FeatureExtractor,
              i: int) -> tuple[np.ndarray, np.ndarray]:
    """Hashed (indices, signs) for position i."""
    keys = feature_keys(instance, extractor, i)
    return _hash_keys(keys, extractor.hash_dim)


def featurize_instance(instance: PredicateInstance,
                       extractor: FeatureExtractor) -> list[tuple[np.ndarray, np.ndarray]]:
    """Hashed features for every position, reusing cached token windows."""
    token_templates = tuple(t for t in extractor.templates if t in TOKEN_TEMPLATES)
    rest = tuple(t for t in extractor.templates if t not in TOKEN_TEMPLATES)
    if not extractor.use_cache or not rest:
        return [featurize(instance, extractor, i) for i in range(instance.length)]
    shared = _token_features(instance.tokens, token_templates, extractor.hash_dim)
    narrowed = replace(extractor, templates=rest)
    out = []
    for i in range(instance.length):
        idx, sgn = featurize(instance, narrowed, i)
        out.append((np.concatenate([shared[i][0], idx]), np.concatenate([shared[i][1], sgn])))
    return out


def emissions_from_features(feats: list[tuple[np.ndarray, np.ndarray]],
                            weights: np.ndarray) -> np.ndarray:
    em = np.empty((len(feats), weights.shape[1]))
    for i, (idx, sgn) in enumerate(feats):
        em[i] = sgn @ weights[idx]
    return em


def score_emissions(instance: PredicateInstance, extractor: FeatureExtractor,
                    space) -> np.ndarray:
    """(T, n_labels) emission matrix, linear in the extractor weights."""
    if extractor.weights is None:
        raise DataError("extractor has no weights attached")
    if extractor.weights.shape[1] != len(space):
        raise DataError(
            f"weights cover {extractor.weights.shape[1]} labels, space has {len(space)}"
        )
    return emissions_from_features(featurize_instance(instance, extractor), extractor.weights)


def accumulate_weight_grad(feats: list[tuple[np.ndarray, np.ndarray]],
                           d_emissions: np.ndarray, out: np.ndarray) -> None:
    """Scatter emission gradients back onto the hashed weight rows."""
    for i, (idx, sgn) in enumerate(feats):
        np.add.at(out, idx, sgn[:, None] * d_emissions[i][None, :])
