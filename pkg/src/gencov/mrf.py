"""Discrete Markov random fields in exponential-family form.

A model over ``p`` variables taking values ``0..m-1`` carries one weight
table per clique ``C``; the table is indexed by configurations of ``X_C``
whose coordinates are all nonzero, so it has ``(m-1)**len(C)`` entries.
The unnormalized log-probability of ``x`` is the sum of the table entries
selected by ``x``; cliques where some coordinate of ``x`` is zero contribute
nothing.
"""
from __future__ import annotations

import itertools
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
from scipy.special import logsumexp

from .exceptions import DimensionMismatch, InvalidSpec, TooLargeToEnumerate
from .graph import Graph

__all__ = [
    "DiscreteMRF",
    "StatisticBasis",
    "ExactDistribution",
    "MAX_STATES",
    "MAX_CLIQUE_SIZE",
    "indicator_vector",
    "indicator_matrix",
    "exact_distribution",
    "random_model",
    "ising_model",
    "graph_cliques",
    "read_model",
    "write_model",
]

MAX_STATES = 2**20
MAX_CLIQUE_SIZE = 5


def _clique_key(c):
    key = tuple(sorted(int(v) for v in c))
    if not key:
        raise InvalidSpec("clique keys must be nonempty")
    if len(set(key)) != len(key):
        raise InvalidSpec(f"repeated vertex in clique {c}")
    return key


@dataclass(frozen=True)
class DiscreteMRF:
    """Clique-indexed natural parameters of an ``m``-ary MRF."""

    p: int
    m: int
    potentials: dict = field(default_factory=dict)

    def __post_init__(self):
        if self.m < 2:
            raise InvalidSpec("alphabet size m must be >= 2")
        clean = {}
        for c, table in self.potentials.items():
            key = _clique_key(c)
            if key[-1] >= self.p:
                raise InvalidSpec(f"clique {key} out of range for p={self.p}")
            if len(key) > MAX_CLIQUE_SIZE:
                raise InvalidSpec(f"cliques are limited to {MAX_CLIQUE_SIZE} vertices")
            arr = np.asarray(table, dtype=float)
            shape = (self.m - 1,) * len(key)
            if arr.size != (self.m - 1) ** len(key):
                raise DimensionMismatch(f"table for {key} needs {(self.m - 1) ** len(key)} entries")
            clean[key] = arr.reshape(shape)
        object.__setattr__(self, "potentials", dict(sorted(clean.items(), key=lambda kv: (len(kv[0]), kv[0]))))

    @property
    def n_states(self):
        return self.m**self.p

    def graph(self):
        """Graph whose edges join every pair of vertices sharing a clique."""
        edges = {pair for c in self.potentials for pair in itertools.combinations(c, 2)}
        return Graph(self.p, frozenset(edges))

    def log_weights(self, x):
        """Unnormalized log-probabilities of the rows of ``x``."""
        x = np.atleast_2d(np.asarray(x, dtype=np.int64))
        out = np.zeros(x.shape[0])
        for c, table in self.potentials.items():
            xc = x[:, list(c)]
            ok = np.all(xc > 0, axis=1)
            if ok.any():
                out[ok] += table[tuple((xc[ok] - 1).T)]
        return out


class StatisticBasis:
    """Ordered indicator statistics ``(C, J)`` grouped in contiguous blocks.

    Parameters
    ----------
    cliques : iterable of vertex collections
        One block per clique; duplicates are rejected.
    m : int
        Alphabet size.
    sort : bool
        Order blocks by size then lexicographically (default) or keep the
        given order.
    """

    def __init__(self, cliques, m, sort=True):
        keys = [_clique_key(c) for c in cliques]
        if len(set(keys)) != len(keys):
            raise InvalidSpec("duplicate clique in statistic basis")
        if sort:
            keys.sort(key=lambda c: (len(c), c))
        self.m = int(m)
        self.cliques = tuple(keys)
        self.entries = []
        self.blocks = {}
        start = 0
        for c in keys:
            configs = list(itertools.product(range(1, self.m), repeat=len(c)))
            self.entries.extend((c, j) for j in configs)
            self.blocks[c] = slice(start, start + len(configs))
            start += len(configs)
        self.dimension = start

    def __len__(self):
        return self.dimension

    def __repr__(self):
        return f"StatisticBasis(m={self.m}, cliques={list(self.cliques)})"

    def block(self, clique):
        return self.blocks[_clique_key(clique)]

    @property
    def vertices(self):
        return sorted(set().union(*self.cliques)) if self.cliques else []

    @classmethod
    def vertices_of(cls, p, m):
        return cls([(s,) for s in range(p)], m)

    @classmethod
    def power_set(cls, sets, m, include=()):
        """Basis over ``include`` plus every nonempty subset of each set in ``sets``."""
        subsets = {_clique_key(c) for c in include}
        for s in sets:
            s = sorted(s)
            for k in range(1, len(s) + 1):
                subsets.update(itertools.combinations(s, k))
        return cls(subsets, m)


def indicator_matrix(basis, x):
    """Evaluate every statistic of ``basis`` on each row of ``x``.

    Returns an ``(n, D)`` float array of zeros and ones.
    """
    x = np.atleast_2d(np.asarray(x, dtype=np.int64))
    out = np.zeros((x.shape[0], basis.dimension))
    for c in basis.cliques:
        sl = basis.blocks[c]
        xc = x[:, list(c)]
        ok = np.all(xc > 0, axis=1)
        if not ok.any():
            continue
        # position of J inside the block follows itertools.product order
        idx = np.ravel_multi_index(tuple((xc[ok] - 1).T), (basis.m - 1,) * len(c))
        rows = np.flatnonzero(ok)
        out[rows, sl.start + idx] = 1.0
    return out


def indicator_vector(shape, basis, x):
    """Indicator statistics of a single configuration.

    Parameters
    ----------
    shape : tuple (p, m)
    basis : StatisticBasis
    x : sequence of int
    """
    p, m = shape
    x = np.asarray(x, dtype=np.int64)
    if x.shape != (p,):
        raise DimensionMismatch(f"configuration has shape {x.shape}, expected ({p},)")
    if m != basis.m:
        raise DimensionMismatch("basis alphabet differs from model alphabet")
    if np.any(x < 0) or np.any(x >= m):
        raise DimensionMismatch("configuration entries must lie in 0..m-1")
    if basis.cliques and max(c[-1] for c in basis.cliques) >= p:
        raise DimensionMismatch("basis references a vertex outside 0..p-1")
    return indicator_matrix(basis, x[None, :])[0]


@dataclass(frozen=True)
class ExactDistribution:
    """Probability tensor of shape ``(m,) * p`` with its log-partition value."""

    p: int
    m: int
    probs: np.ndarray
    log_partition: float

    @property
    def flat(self):
        return self.probs.reshape(-1)

    def configurations(self):
        """All ``m**p`` configurations in C order, matching :attr:`flat`."""
        grids = np.indices((self.m,) * self.p).reshape(self.p, -1)
        return grids.T.copy()

    def marginal(self, vertices):
        """Marginal table over ``vertices`` (axes in sorted vertex order)."""
        keep = sorted(int(v) for v in vertices)
        drop = tuple(a for a in range(self.p) if a not in keep)
        return self.probs.sum(axis=drop) if drop else self.probs

    def marginals(self, sets, pack_states=2**15):
        """Marginal tables for many vertex sets at once.

        Requested sets are packed greedily into supersets of at most
        ``pack_states`` configurations; each superset is reduced from the full
        table once and the requested marginals are reduced from it.
        """
        pending = sorted({tuple(sorted(int(v) for v in s)) for s in sets}, key=len, reverse=True)
        out = {}
        while pending:
            pack = set(pending[0])
            for u in pending[1:]:
                if self.m ** len(pack | set(u)) <= pack_states:
                    pack |= set(u)
            pack = tuple(sorted(pack))
            table = self.marginal(pack)
            rest = []
            for u in pending:
                if set(u) <= set(pack):
                    drop = tuple(i for i, v in enumerate(pack) if v not in u)
                    out[u] = table.sum(axis=drop) if drop else table
                else:
                    rest.append(u)
            pending = rest
        return out

    def entropy(self, vertices=None):
        q = self.flat if vertices is None else self.marginal(vertices).reshape(-1)
        q = q[q > 0]
        return float(-(q * np.log(q)).sum())


def _check_states(p, m, max_states):
    cap = MAX_STATES if max_states is None else max_states
    if m**p > cap:
        raise TooLargeToEnumerate(f"{m}**{p} states exceed the cap of {cap}")


def log_weight_tensor(model):
    """Unnormalized log-probabilities of every configuration as a tensor."""
    p, m = model.p, model.m
    logw = np.zeros((m,) * p)
    for c, table in model.potentials.items():
        full = np.zeros((m,) * len(c))
        full[(slice(1, None),) * len(c)] = table
        shape = [1] * p
        for v in c:
            shape[v] = m
        logw = logw + full.reshape(shape)
    return logw


def exact_distribution(model, max_states=None):
    """Enumerate the joint distribution of ``model``.

    Raises
    ------
    TooLargeToEnumerate
        If ``m**p`` exceeds ``max_states`` (default :data:`MAX_STATES`).
    """
    _check_states(model.p, model.m, max_states)
    logw = log_weight_tensor(model)
    phi = float(logsumexp(logw))
    return ExactDistribution(model.p, model.m, np.exp(logw - phi), phi)


def graph_cliques(graph, max_size=MAX_CLIQUE_SIZE):
    """All cliques of ``graph`` with at least one and at most ``max_size`` vertices."""
    adj = graph.adjacency()
    out = []

    def extend(clique, cands):
        out.append(tuple(clique))
        if len(clique) == max_size:
            return
        for v in sorted(cands):
            if v > clique[-1]:
                extend(clique + [v], cands & adj[v])

    for v in range(graph.p):
        extend([v], adj[v])
    return sorted(out, key=lambda c: (len(c), c))


def _sampler(spec):
    if spec is None:
        return None
    if callable(spec):
        return spec
    if isinstance(spec, str):
        parts = spec.split(":")
        try:
            if len(parts) == 1:
                return _sampler(float(parts[0]))
            spec = (parts[0],) + tuple(float(v) for v in parts[1:])
        except ValueError:
            raise InvalidSpec(f"bad weight spec {spec!r}") from None
    if isinstance(spec, (int, float)):
        value = float(spec)
        return lambda rng, size: np.full(size, value)
    kind, a, b = spec
    if kind == "uniform":
        return lambda rng, size: rng.uniform(a, b, size)
    if kind == "normal":
        return lambda rng, size: rng.normal(a, b, size)
    raise InvalidSpec(f"unknown weight distribution {kind!r}")


def random_model(graph, m=2, node=0.0, edge=0.0, higher=None, rng=None):
    """Draw an MRF whose potentials live on the cliques of ``graph``.

    Each of ``node``, ``edge`` and ``higher`` is a constant, a string such as
    ``"uniform:-1:1"`` or ``"normal:0:1"``, a ``(kind, a, b)`` tuple, or a
    callable ``(rng, size) -> array``. ``higher=None`` leaves cliques of three
    or more vertices without potentials.
    """
    rng = np.random.default_rng(rng)
    draws = {1: _sampler(node), 2: _sampler(edge)}
    high = _sampler(higher)
    max_size = MAX_CLIQUE_SIZE if high is not None else 2
    potentials = {}
    for c in graph_cliques(graph, max_size):
        draw = draws.get(len(c), high)
        potentials[c] = draw(rng, (m - 1) ** len(c))
    return DiscreteMRF(graph.p, m, potentials)


def ising_model(graph, node, edge):
    """Binary pairwise model with constant node and edge weights."""
    return random_model(graph, 2, node=node, edge=edge)


def format_model(model):
    lines = [f"{model.p} {model.m}"]
    for c, table in model.potentials.items():
        cs = ",".join(str(v) for v in c)
        for j in itertools.product(range(1, model.m), repeat=len(c)):
            js = ",".join(str(v) for v in j)
            lines.append(f"{cs}:{js}:{float(table[tuple(v - 1 for v in j)])!r}")
    return "\n".join(lines) + "\n"


def parse_model(text):
    lines = [ln.strip() for ln in text.splitlines() if ln.strip() and not ln.startswith("#")]
    try:
        p, m = (int(v) for v in lines[0].split())
    except (ValueError, IndexError):
        raise InvalidSpec("model text must start with 'p m'") from None
    tables = {}
    for ln in lines[1:]:
        try:
            cs, js, val = ln.split(":")
            c = tuple(int(v) for v in cs.split(","))
            j = tuple(int(v) for v in js.split(","))
            value = float(val)
        except ValueError:
            raise InvalidSpec(f"malformed model line {ln!r}") from None
        if len(j) != len(c) or any(not 1 <= v < m for v in j):
            raise InvalidSpec(f"configuration {j} invalid for clique {c}")
        key = _clique_key(c)
        order = np.argsort(c)
        table = tables.setdefault(key, np.full((m - 1,) * len(c), np.nan))
        table[tuple(j[i] - 1 for i in order)] = value
    for key, table in tables.items():
        if np.isnan(table).any():
            raise InvalidSpec(f"incomplete table for clique {key}")
    return DiscreteMRF(p, m, tables)


def read_model(path):
    return parse_model(Path(path).read_text())


def write_model(model, path):
    Path(path).write_text(format_model(model))

