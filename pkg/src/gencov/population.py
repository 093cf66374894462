"""Exact generalized covariance matrices and checks of their inverse's zero pattern.

Everything here works by enumerating the full state space, so it is only
meant for models small enough for :func:`gencov.mrf.exact_distribution`.
"""
from __future__ import annotations

import csv
import io
import itertools
import logging
from dataclasses import dataclass, field

import numpy as np
from scipy import linalg

from .exceptions import DimensionMismatch, NotPositiveDefinite, SingularMatrix, SingularSubmatrix
from .graph import Graph, singleton_separable
from .mrf import StatisticBasis, exact_distribution

__all__ = [
    "GeneralizedCovariance",
    "GeneralizedInverse",
    "StructureReport",
    "EntropyReport",
    "generalized_covariance",
    "inverse_and_blocks",
    "verify_theorem1",
    "verify_separator_corollary",
    "verify_neighborhood_corollary",
    "entropy_decomposition_check",
    "incoherence_alpha",
    "population_moments",
]

logger = logging.getLogger(__name__)

ZERO_TOL = 1e-8
NONZERO_TOL = 1e-6
COND_WARN = 1e10


@dataclass
class GeneralizedCovariance:
    matrix: np.ndarray
    basis: StatisticBasis
    mean: np.ndarray

    def block(self, a, b):
        return self.matrix[self.basis.block(a), self.basis.block(b)]


@dataclass
class GeneralizedInverse:
    """Inverse of a generalized covariance with block access by clique."""

    matrix: np.ndarray
    basis: StatisticBasis
    condition_number: float

    def block(self, a, b):
        return self.matrix[self.basis.block(a), self.basis.block(b)]

    @property
    def scale(self):
        return float(np.abs(self.matrix).max())

    def scaled_block_max(self, a, b):
        return float(np.abs(self.block(a, b)).max()) / self.scale


def _union_config_index(a, b, m):
    """Index arrays mapping block entries (J, K) into the marginal over ``a | b``.

    Returns ``(union, index, consistent)`` where ``index`` is a tuple of
    ``(d_a, d_b)`` integer arrays and ``consistent`` flags pairs (J, K) that
    agree on the shared vertices.
    """
    union = tuple(sorted(set(a) | set(b)))
    ja = np.array(list(itertools.product(range(1, m), repeat=len(a))), dtype=np.int64)
    kb = np.array(list(itertools.product(range(1, m), repeat=len(b))), dtype=np.int64)
    da, db = len(ja), len(kb)
    cfg = np.full((da, db, len(union)), -1, dtype=np.int64)
    pos = {v: i for i, v in enumerate(union)}
    consistent = np.ones((da, db), dtype=bool)
    for i, v in enumerate(a):
        cfg[:, :, pos[v]] = ja[:, i][:, None]
    for i, v in enumerate(b):
        col = kb[:, i][None, :]
        prev = cfg[:, :, pos[v]]
        consistent &= (prev == -1) | (prev == col)
        cfg[:, :, pos[v]] = np.where(prev == -1, col, prev)
    cfg[~consistent] = 0
    return union, tuple(cfg[:, :, i] for i in range(len(union))), consistent


def population_moments(dist, basis):
    """Exact mean and second-moment matrix of the statistics in ``basis``."""
    m = basis.m
    if dist.m != m:
        raise DimensionMismatch("basis alphabet differs from model alphabet")
    unions = {tuple(sorted(set(a) | set(b))) for a in basis.cliques for b in basis.cliques}
    marginals = dist.marginals(unions)
    marginal = marginals.__getitem__

    second = np.zeros((basis.dimension, basis.dimension))
    mean = np.zeros(basis.dimension)
    for c in basis.cliques:
        mean[basis.blocks[c]] = marginal(c)[(slice(1, None),) * len(c)].reshape(-1)
    for i, a in enumerate(basis.cliques):
        for b in basis.cliques[i:]:
            union, index, consistent = _union_config_index(a, b, m)
            vals = np.where(consistent, marginal(union)[index], 0.0)
            second[basis.blocks[a], basis.blocks[b]] = vals
            second[basis.blocks[b], basis.blocks[a]] = vals.T
    return mean, second


def generalized_covariance(model, basis, max_states=None, check_pd=True):
    """Covariance of the indicator statistics ``basis`` under ``model``.

    Raises
    ------
    TooLargeToEnumerate
    NotPositiveDefinite
        If the matrix has no Cholesky factor, which signals a degenerate or
        redundant basis.
    """
    if basis.cliques and max(c[-1] for c in basis.cliques) >= model.p:
        raise DimensionMismatch("basis references a vertex outside the model")
    dist = exact_distribution(model, max_states=max_states)
    mean, second = population_moments(dist, basis)
    cov = second - np.outer(mean, mean)
    cov = (cov + cov.T) / 2
    if check_pd:
        try:
            np.linalg.cholesky(cov)
        except np.linalg.LinAlgError:
            raise NotPositiveDefinite("generalized covariance is not positive definite") from None
    return GeneralizedCovariance(cov, basis, mean)


def inverse_and_blocks(cov):
    """Invert a generalized covariance through its Cholesky factor."""
    mat = cov.matrix
    try:
        factor = linalg.cho_factor(mat, lower=True)
    except linalg.LinAlgError:
        raise SingularMatrix("covariance has no Cholesky factor") from None
    gamma = linalg.cho_solve(factor, np.eye(mat.shape[0]))
    gamma = (gamma + gamma.T) / 2
    cond = float(np.linalg.cond(mat))
    if cond > COND_WARN:
        logger.warning("generalized covariance is ill-conditioned (cond=%.3g)", cond)
    return GeneralizedInverse(gamma, cov.basis, cond)


@dataclass
class BlockRow:
    a: tuple
    b: tuple
    forbidden: bool
    max_abs: float
    passed: bool


@dataclass
class StructureReport:
    """Outcome of a zero-pattern check on the blocks of an inverse.

    ``max_abs`` values are scaled by the largest absolute entry of the
    inverse.
    """

    rows: list = field(default_factory=list)
    tol: float = ZERO_TOL
    nonzero_tol: float | None = None
    gamma: GeneralizedInverse | None = None

    @property
    def max_forbidden(self):
        vals = [r.max_abs for r in self.rows if r.forbidden]
        return max(vals) if vals else 0.0

    @property
    def min_allowed(self):
        vals = [r.max_abs for r in self.rows if not r.forbidden]
        return min(vals) if vals else float("inf")

    @property
    def zeros_hold(self):
        return all(r.passed for r in self.rows if r.forbidden)

    @property
    def nonzeros_hold(self):
        return all(r.passed for r in self.rows if not r.forbidden)

    @property
    def passed(self):
        return all(r.passed for r in self.rows)

    def to_csv(self, path=None):
        buf = io.StringIO()
        writer = csv.writer(buf, lineterminator="\n")
        writer.writerow(["A", "B", "forbidden", "max_abs", "pass"])
        for r in self.rows:
            writer.writerow([
                " ".join(map(str, r.a)),
                " ".join(map(str, r.b)),
                int(r.forbidden),
                repr(r.max_abs),
                int(r.passed),
            ])
        text = buf.getvalue()
        if path is not None:
            with open(path, "w", newline="") as fh:
                fh.write(text)
        return text


def _check_pairs(gamma, pairs, forbidden, tol, nonzero_tol):
    report = StructureReport(tol=tol, nonzero_tol=nonzero_tol, gamma=gamma)
    for a, b in pairs:
        val = gamma.scaled_block_max(a, b)
        bad = forbidden(a, b)
        if bad:
            ok = val < tol
        else:
            ok = nonzero_tol is None or val > nonzero_tol
        report.rows.append(BlockRow(a, b, bad, val, ok))
    return report


def _clique_graph(jt, p):
    edges = {pair for c in jt.cliques for pair in itertools.combinations(sorted(c), 2)}
    return Graph(p, frozenset(edges))


def verify_theorem1(model, jt, tol=ZERO_TOL, nonzero_tol=NONZERO_TOL, max_states=None):
    """Check the block zero pattern of the inverse over all triangulation cliques.

    The basis holds every nonempty subset of every maximal clique of ``jt``.
    A pair ``(A, B)`` is forbidden when no maximal clique contains both; its
    scaled block must stay below ``tol``. Allowed blocks must exceed
    ``nonzero_tol`` (pass ``None`` to skip that side).
    """
    basis = StatisticBasis(jt.all_cliques(), model.m)
    gamma = inverse_and_blocks(generalized_covariance(model, basis, max_states=max_states))
    cliques = [frozenset(c) for c in jt.cliques]

    def forbidden(a, b):
        u = set(a) | set(b)
        return not any(u <= c for c in cliques)

    pairs = [(a, b) for i, a in enumerate(basis.cliques) for b in basis.cliques[i:]]
    return _check_pairs(gamma, pairs, forbidden, tol, nonzero_tol)


def verify_separator_corollary(model, jt, tol=ZERO_TOL, variant="separators",
                               nonzero_tol=None, max_states=None):
    """Check vertex blocks of the inverse against a triangulation.

    ``variant="separators"`` uses the basis of vertices plus every subset of a
    separator and requires a zero block for each vertex pair outside the
    triangulated edge set. ``variant="vertices"`` uses vertices only, which is
    valid when all separators are singletons. ``variant="partial"`` also uses
    vertices only, but only demands zeros for pairs that a single vertex (or
    nothing) disconnects in the model graph.
    """
    p = model.p
    if variant == "separators":
        basis = StatisticBasis.power_set(jt.separators, model.m, include=[(s,) for s in range(p)])
    elif variant in ("vertices", "partial"):
        basis = StatisticBasis.vertices_of(p, model.m)
    else:
        raise ValueError(f"unknown variant {variant!r}")
    if variant == "vertices" and not jt.has_singleton_separators:
        logger.warning("vertex basis used with non-singleton separators; zeros are not guaranteed")
    gamma = inverse_and_blocks(generalized_covariance(model, basis, max_states=max_states))
    if variant == "partial":
        g = model.graph()
        forbidden = lambda a, b: singleton_separable(g, a[0], b[0])  # noqa: E731
        nonzero_tol = None
    else:
        tri = _clique_graph(jt, p)
        forbidden = lambda a, b: not tri.has_edge(a[0], b[0])  # noqa: E731
    pairs = [((s,), (t,)) for s, t in itertools.combinations(range(p), 2)]
    return _check_pairs(gamma, pairs, forbidden, tol, nonzero_tol)


def verify_neighborhood_corollary(model, s, d, tol=ZERO_TOL, nonzero_tol=None, max_states=None):
    """Check that row ``{s}`` of the inverse only touches subsets of N(s).

    The basis is ``{s}`` together with every nonempty subset of size at most
    ``d`` of the other vertices.
    """
    g = model.graph()
    nbrs = g.neighbors(s)
    if len(nbrs) > d:
        raise ValueError(f"deg({s}) = {len(nbrs)} exceeds the bound d = {d}")
    others = [v for v in range(model.p) if v != s]
    subsets = [c for k in range(1, min(d, len(others)) + 1) for c in itertools.combinations(others, k)]
    basis = StatisticBasis([(s,)] + subsets, model.m)
    gamma = inverse_and_blocks(generalized_covariance(model, basis, max_states=max_states))
    forbidden = lambda a, b: not set(b) <= nbrs  # noqa: E731
    pairs = [((s,), b) for b in basis.cliques if b != (s,)]
    return _check_pairs(gamma, pairs, forbidden, tol, nonzero_tol)


@dataclass
class EntropyReport:
    joint: float
    decomposed: float
    gap: float
    factorization_error: float


def entropy_decomposition_check(model, jt, max_states=None):
    """Compare the joint entropy with clique-minus-separator marginal entropies.

    Also rebuilds the joint table as the product of clique marginals over the
    product of separator marginals and reports the worst absolute error.
    """
    dist = exact_distribution(model, max_states=max_states)
    p, m = model.p, model.m
    decomposed = sum(dist.entropy(c) for c in jt.cliques)
    decomposed -= sum(dist.entropy(s) for s in jt.separators if s)
    joint = dist.entropy()

    log_rec = np.zeros((m,) * p)
    for sets, sign in ((jt.cliques, 1.0), (jt.separators, -1.0)):
        for c in sets:
            if not c:
                continue
            shape = [m if v in c else 1 for v in range(p)]
            log_rec = log_rec + sign * np.log(dist.marginal(c)).reshape(shape)
    err = float(np.abs(np.exp(log_rec) - dist.probs).max())
    return EntropyReport(joint, decomposed, abs(joint - decomposed), err)


def _pair_index(pairs, p):
    return np.array([s * p + t for s, t in pairs], dtype=np.int64)


def incoherence_alpha(sigma_star, support):
    """Mutual incoherence ``1 - max_e ||G_eS (G_SS)^-1||_1`` with ``G = kron(S, S)``.

    ``support`` lists vertex pairs; diagonal pairs and both orientations of
    each pair are added automatically. An empty complement gives 1.
    """
    sigma = np.asarray(sigma_star, dtype=float)
    p = sigma.shape[0]
    full = {(s, s) for s in range(p)}
    for s, t in support:
        full.add((s, t))
        full.add((t, s))
    s_pairs = sorted(full)
    c_pairs = [(s, t) for s in range(p) for t in range(p) if (s, t) not in full]
    if not c_pairs:
        return 1.0
    ss = np.array(s_pairs)
    cc = np.array(c_pairs)
    # kron(S, S)[(a,b),(c,d)] = S[a,c] * S[b,d]
    g_ss = sigma[np.ix_(ss[:, 0], ss[:, 0])] * sigma[np.ix_(ss[:, 1], ss[:, 1])]
    g_cs = sigma[np.ix_(cc[:, 0], ss[:, 0])] * sigma[np.ix_(cc[:, 1], ss[:, 1])]
    try:
        sol = linalg.solve(g_ss, g_cs.T, assume_a="sym")
    except (linalg.LinAlgError, ValueError):
        raise SingularSubmatrix("Gamma*_SS is singular") from None
    if not np.all(np.isfinite(sol)):
        raise SingularSubmatrix("Gamma*_SS is singular")
    return float(1.0 - np.abs(sol).sum(axis=0).max())
