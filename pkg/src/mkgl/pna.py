"""Principal neighborhood aggregation: multi-aggregator pooling + linear map.

Pooling concatenates several order-free reductions (mean/max/min/std/sum, in
the configured order) over a multiset of vectors, then a learned linear layer
with a nonlinearity mixes the result. Std is the population std and is exactly
zero for singletons. Two evaluation paths exist: one over an explicit multiset
and one over edge lists via segment reductions; both use the same centered-std
composition so they agree bitwise on identical inputs.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from . import autodiff as ad
from .autodiff import Tensor
from .utils import rng_for

AGGREGATORS = ("mean", "max", "min", "std", "sum")

_ACTIVATIONS = {
    "gelu": ad.gelu,
    "tanh": ad.tanh,
    "identity": lambda t: t,
}


@dataclass
class PnaEncoderConfig:
    in_dim: int
    out_dim: int
    aggregators: tuple[str, ...] = AGGREGATORS
    n_layers: int = 1
    activation: str = "gelu"

    def __post_init__(self):
        bad = set(self.aggregators) - set(AGGREGATORS)
        if bad:
            raise ValueError(f"unknown aggregators: {sorted(bad)}")
        if len(set(self.aggregators)) != len(self.aggregators):
            raise ValueError("duplicate aggregators")

    @property
    def pooled_dim(self):
        return len(self.aggregators) * self.in_dim

    def activation_fn(self):
        return _ACTIVATIONS[self.activation]


def pna_aggregate(multiset, cfg):
    """Pool a non-empty multiset of [k]-vectors into one [k*|aggregators|] vector.

    Accepts a list of Tensors/arrays or a stacked [m, k] Tensor; differentiable.
    """
    if isinstance(multiset, Tensor):
        x = multiset
    else:
        rows = list(multiset)
        if not rows:
            raise ValueError("pna_aggregate: empty multiset")
        rows = [r if isinstance(r, Tensor) else Tensor(r) for r in rows]
        x = ad.concat([ad.reshape(r, (1, -1)) for r in rows], axis=0)
    if x.data.ndim != 2:
        raise ad.ShapeError(f"pna_aggregate expects [m, k] input, got {x.shape}")
    if x.data.shape[0] == 0:
        raise ValueError("pna_aggregate: empty multiset")

    pieces = []
    mean = None
    for agg in cfg.aggregators:
        if agg == "mean":
            mean = mean if mean is not None else ad.reduce_mean(x, axis=0)
            pieces.append(mean)
        elif agg == "max":
            pieces.append(ad.reduce_max(x, axis=0))
        elif agg == "min":
            pieces.append(ad.reduce_min(x, axis=0))
        elif agg == "sum":
            pieces.append(ad.reduce_sum(x, axis=0))
        elif agg == "std":
            mean = mean if mean is not None else ad.reduce_mean(x, axis=0)
            centered = ad.sub(x, ad.reshape(mean, (1, -1)))
            var = ad.reduce_mean(ad.mul(centered, centered), axis=0)
            pieces.append(ad.sqrt(var))
    return ad.concat(pieces, axis=0)


def pooled_over_axis1(x, cfg):
    """Batched pooling of [B, m, k] over axis 1 -> [B, |agg|*k]."""
    pieces = []
    mean = None
    for agg in cfg.aggregators:
        if agg == "mean":
            mean = mean if mean is not None else ad.reduce_mean(x, axis=1)
            pieces.append(mean)
        elif agg == "max":
            pieces.append(ad.reduce_max(x, axis=1))
        elif agg == "min":
            pieces.append(ad.reduce_min(x, axis=1))
        elif agg == "sum":
            pieces.append(ad.reduce_sum(x, axis=1))
        elif agg == "std":
            mean = mean if mean is not None else ad.reduce_mean(x, axis=1)
            centered = ad.sub(x, ad.reshape(mean, (x.data.shape[0], 1, -1)))
            var = ad.reduce_mean(ad.mul(centered, centered), axis=1)
            pieces.append(ad.sqrt(var))
    return ad.concat(pieces, axis=1)


def pooled_over_segments(x, seg, num_segments, cfg):
    """Pooling of [E, k] edge features grouped by sorted segment ids -> [S, |agg|*k]."""
    pieces = []
    mean = None
    for agg in cfg.aggregators:
        if agg == "mean":
            mean = mean if mean is not None else ad.segment_mean(x, seg, num_segments)
            pieces.append(mean)
        elif agg == "max":
            pieces.append(ad.segment_max(x, seg, num_segments))
        elif agg == "min":
            pieces.append(ad.segment_min(x, seg, num_segments))
        elif agg == "sum":
            pieces.append(ad.segment_sum(x, seg, num_segments))
        elif agg == "std":
            mean = mean if mean is not None else ad.segment_mean(x, seg, num_segments)
            centered = ad.sub(x, ad.embedding_gather(mean, seg))
            var = ad.segment_mean(ad.mul(centered, centered), seg, num_segments)
            pieces.append(ad.sqrt(var))
    return ad.concat(pieces, axis=1)


def singleton_pool(x, cfg):
    """Pooling when the multiset is exactly {x_row} for each row of [B, k]."""
    pieces = []
    for agg in cfg.aggregators:
        if agg == "std":
            pieces.append(ad.mul(x, Tensor(np.zeros_like(x.data))))
        else:
            pieces.append(x)
    return ad.concat(pieces, axis=1)


class PnaLayer:
    """One pooled -> linear -> activation step."""

    def __init__(self, cfg, seed, dtype=None):
        self.cfg = cfg
        rng = rng_for(seed, "pna", cfg.in_dim, cfg.out_dim)
        scale = 1.0 / np.sqrt(cfg.pooled_dim)
        self.weight = Tensor(rng.normal(0.0, scale, (cfg.pooled_dim, cfg.out_dim)), requires_grad=True, dtype=dtype)
        self.bias = Tensor(np.zeros(cfg.out_dim), requires_grad=True, dtype=dtype)

    def params(self, prefix):
        return {f"{prefix}.weight": self.weight, f"{prefix}.bias": self.bias}

    def __call__(self, pooled):
        return self.cfg.activation_fn()(ad.add(ad.matmul(pooled, self.weight), self.bias))
