"""Sampling from discrete MRFs and zero-filled missing-data corruption.

Randomness always comes from a :class:`numpy.random.Generator` (PCG64 by
default); pass an integer seed or a generator wherever ``rng`` appears.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, replace
from pathlib import Path

import numpy as np
from scipy.special import logsumexp

from .exceptions import DimensionMismatch, InvalidRho, InvalidSpec
from .graph import build_junction_tree, triangulate
from .mrf import exact_distribution

__all__ = [
    "Dataset",
    "SamplerConfig",
    "exact_sample",
    "junction_tree_sample",
    "gibbs_sample",
    "sample",
    "corrupt_missing",
    "read_dataset",
    "write_dataset",
]


@dataclass(frozen=True)
class Dataset:
    """``n x p`` matrix of discrete observations.

    When ``mask`` is set, ``True`` cells were erased and hold 0, and ``rho`` is
    the erasure probability used.
    """

    values: np.ndarray
    m: int
    mask: np.ndarray | None = None
    rho: float = 0.0

    def __post_init__(self):
        vals = np.asarray(self.values, dtype=np.int64)
        if vals.ndim != 2:
            raise DimensionMismatch("dataset values must be a 2-d array")
        if vals.size and (vals.min() < 0 or vals.max() >= self.m):
            raise DimensionMismatch("dataset entries must lie in 0..m-1")
        object.__setattr__(self, "values", vals)
        if self.mask is not None:
            mask = np.asarray(self.mask, dtype=bool)
            if mask.shape != vals.shape:
                raise DimensionMismatch("mask shape differs from values")
            if np.any(vals[mask] != 0):
                raise DimensionMismatch("erased cells must be zero-filled")
            object.__setattr__(self, "mask", mask)

    @property
    def n(self):
        return self.values.shape[0]

    @property
    def p(self):
        return self.values.shape[1]


@dataclass(frozen=True)
class SamplerConfig:
    """How to draw samples.

    ``mode`` is ``"exact"`` (inverse CDF over the enumerated table),
    ``"junction_tree"`` (exact forward sampling on a junction tree, for
    models too large to enumerate) or ``"gibbs"``. ``chains`` only affects
    Gibbs sampling: samples are split evenly over independent chains that
    advance together.
    """

    mode: str = "exact"
    burn_in: int = 1000
    thinning: int = 10
    chains: int = 1
    seed: int | None = None

    def __post_init__(self):
        if self.mode not in ("exact", "junction_tree", "gibbs"):
            raise InvalidSpec(f"unknown sampler mode {self.mode!r}")
        if self.burn_in < 0 or self.thinning < 1 or self.chains < 1:
            raise InvalidSpec("need burn_in >= 0, thinning >= 1 and chains >= 1")


def exact_sample(model, n, rng=None, max_states=None):
    """I.i.d. draws by inverse CDF over the full probability table."""
    rng = np.random.default_rng(rng)
    dist = exact_distribution(model, max_states=max_states)
    cdf = np.cumsum(dist.flat)
    u = rng.random(n) * cdf[-1]
    idx = np.minimum(np.searchsorted(cdf, u, side="right"), cdf.size - 1)
    values = np.stack(np.unravel_index(idx, (model.m,) * model.p), axis=1) if n else np.zeros((0, model.p))
    return Dataset(values, model.m)


def _clique_log_tables(model, jt):
    """Assign each potential to a junction-tree clique and build log tables."""
    m = model.m
    cliques = [tuple(sorted(c)) for c in jt.cliques]
    tables = [np.zeros((m,) * len(c)) for c in cliques]
    for key, table in model.potentials.items():
        home = next(i for i, c in enumerate(cliques) if set(key) <= set(c))
        c = cliques[home]
        full = np.zeros((m,) * len(key))
        full[(slice(1, None),) * len(key)] = table
        shape = [m if v in key else 1 for v in c]
        tables[home] = tables[home] + full.reshape(shape)
    return cliques, tables


def _sample_rows(logp, u):
    """Draw one category per row of ``logp`` using uniforms ``u``."""
    prob = np.exp(logp - logp.max(axis=1, keepdims=True))
    cdf = np.cumsum(prob, axis=1)
    cdf /= cdf[:, -1:]
    return np.minimum((cdf < u[:, None]).sum(axis=1), logp.shape[1] - 1)


def junction_tree_sample(model, n, rng=None):
    """Exact i.i.d. draws by forward sampling over a junction tree.

    Works at any ``p`` as long as the triangulated cliques stay small.
    """
    rng = np.random.default_rng(rng)
    m, p = model.m, model.p
    jt = build_junction_tree(triangulate(model.graph()))
    cliques, tables = _clique_log_tables(model, jt)
    # orient the tree from clique 0
    parent, order, stack = {0: None}, [], [0]
    while stack:
        u = stack.pop()
        order.append(u)
        for w in jt.neighbors(u):
            if w not in parent:
                parent[w] = u
                stack.append(w)
    belief = list(tables)
    for u in reversed(order[1:]):
        par = parent[u]
        sep = [v for v in cliques[u] if v in cliques[par]]
        drop = tuple(i for i, v in enumerate(cliques[u]) if v not in sep)
        msg = logsumexp(belief[u], axis=drop) if drop else belief[u]
        shape = [m if v in sep else 1 for v in cliques[par]]
        belief[par] = belief[par] + np.asarray(msg).reshape(shape)
    x = np.zeros((n, p), dtype=np.int64)
    if n == 0:
        return Dataset(x, m)
    root = cliques[0]
    idx = _sample_rows(np.broadcast_to(belief[0].reshape(1, -1), (n, m ** len(root))), rng.random(n))
    x[:, list(root)] = np.stack(np.unravel_index(idx, (m,) * len(root)), axis=1)
    for u in order[1:]:
        c = cliques[u]
        sep = [v for v in c if v in cliques[parent[u]]]
        free = [v for v in c if v not in sep]
        if not free:
            continue
        axes = [c.index(v) for v in sep] + [c.index(v) for v in free]
        cond = np.transpose(belief[u], axes).reshape(m ** len(sep), m ** len(free))
        rows = np.ravel_multi_index(tuple(x[:, sep].T), (m,) * len(sep)) if sep else np.zeros(n, dtype=np.int64)
        idx = _sample_rows(cond[rows], rng.random(n))
        x[:, free] = np.stack(np.unravel_index(idx, (m,) * len(free)), axis=1)
    return Dataset(x, m)


def _vertex_factors(model):
    """For each vertex, the full log tables of cliques containing it, vertex axis last."""
    m = model.m
    out = [[] for _ in range(model.p)]
    for key, table in model.potentials.items():
        full = np.zeros((m,) * len(key))
        full[(slice(1, None),) * len(key)] = table
        for i, v in enumerate(key):
            others = [w for w in key if w != v]
            out[v].append((others, np.moveaxis(full, i, -1)))
    return out


def gibbs_sample(model, n, config=None, rng=None):
    """Single-site Gibbs sampling.

    Each chain runs ``burn_in`` sweeps, then emits its state after every
    ``thinning`` further sweeps. Vertices are updated in index order.
    """
    config = config or SamplerConfig(mode="gibbs")
    rng = np.random.default_rng(config.seed if rng is None else rng)
    m, p = model.m, model.p
    chains = min(config.chains, max(n, 1))
    per_chain = math.ceil(n / chains) if n else 0
    factors = _vertex_factors(model)
    x = rng.integers(0, m, size=(chains, p))
    out = np.zeros((chains, per_chain, p), dtype=np.int64)

    def sweep():
        for v in range(p):
            logits = np.zeros((chains, m))
            for others, table in factors[v]:
                logits += table[tuple(x[:, others].T)] if others else table
            x[:, v] = _sample_rows(logits, rng.random(chains))

    for _ in range(config.burn_in):
        sweep()
    for k in range(per_chain):
        for _ in range(config.thinning):
            sweep()
        out[:, k] = x
    # interleave so the first n rows draw from every chain
    values = out.transpose(1, 0, 2).reshape(-1, p)[:n]
    return Dataset(values, m)


def sample(model, n, config=None, rng=None, max_states=None):
    """Dispatch on ``config.mode``."""
    config = config or SamplerConfig()
    rng = np.random.default_rng(config.seed if rng is None else rng)
    if config.mode == "exact":
        return exact_sample(model, n, rng, max_states=max_states)
    if config.mode == "junction_tree":
        return junction_tree_sample(model, n, rng)
    return gibbs_sample(model, n, config, rng)


def corrupt_missing(data, rho, rng=None):
    """Erase each cell independently with probability ``rho`` and zero-fill it.

    The input is left untouched. Corrupting an already corrupted dataset
    merges the masks and reports the combined erasure probability.
    """
    if not 0.0 <= rho < 1.0:
        raise InvalidRho(f"rho must lie in [0, 1), got {rho}")
    rng = np.random.default_rng(rng)
    mask = rng.random(data.values.shape) < rho
    if data.mask is not None:
        mask |= data.mask
        rho = 1.0 - (1.0 - rho) * (1.0 - data.rho)
    values = np.where(mask, 0, data.values)
    return replace(data, values=values, mask=mask, rho=float(rho))


def write_dataset(data, path, mask_path=None):
    """Write values (and optionally the mask) as headerless integer CSV."""
    np.savetxt(path, data.values, fmt="%d", delimiter=",")
    if mask_path is not None:
        if data.mask is None:
            raise ValueError("dataset has no corruption mask")
        np.savetxt(mask_path, data.mask.astype(np.int64), fmt="%d", delimiter=",")


def read_dataset(path, m=None, mask_path=None, rho=0.0):
    """Read a dataset written by :func:`write_dataset`.

    ``m`` defaults to one more than the largest value seen (at least 2).
    """
    text = Path(path).read_text().strip()
    values = np.loadtxt(path, dtype=np.int64, delimiter=",", ndmin=2) if text else np.zeros((0, 0), np.int64)
    if m is None:
        m = max(2, int(values.max()) + 1) if values.size else 2
    mask = None
    if mask_path is not None:
        mask = np.loadtxt(mask_path, dtype=np.int64, delimiter=",", ndmin=2).astype(bool)
    return Dataset(values, m, mask, rho)
