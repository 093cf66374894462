import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from gencov.exceptions import NotPositiveDefinite, SingularSubmatrix
from gencov.graph import Graph, GraphFamilySpec, build_junction_tree, dino_graph, generate_graph, triangulate
from gencov.mrf import DiscreteMRF, StatisticBasis, exact_distribution, indicator_matrix, random_model
from gencov.population import (
    entropy_decomposition_check,
    generalized_covariance,
    incoherence_alpha,
    inverse_and_blocks,
    verify_neighborhood_corollary,
    verify_separator_corollary,
    verify_theorem1,
)

from conftest import chain, cycle, random_graph

CHAIN_GAMMA = np.array([
    [9.80, -3.59, 0, 0],
    [-3.59, 34.30, -4.77, 0],
    [0, -4.77, 34.30, -3.59],
    [0, 0, -3.59, 9.80],
])
LOOP_GAMMA = np.array([
    [51.37, -5.37, -0.17, -5.37],
    [-5.37, 51.37, -5.37, -0.17],
    [-0.17, -5.37, 51.37, -5.37],
    [-5.37, -0.17, -5.37, 51.37],
])


def dense_covariance(model, basis):
    """Covariance by weighting every configuration's indicator vector."""
    dist = exact_distribution(model)
    feats = indicator_matrix(basis, dist.configurations())
    mean = dist.flat @ feats
    return (feats * dist.flat[:, None]).T @ feats - np.outer(mean, mean), mean


def gamma_of(model, basis):
    return inverse_and_blocks(generalized_covariance(model, basis))


def test_independent_fair_bits():
    model = DiscreteMRF(3, 2, {(v,): [0.0] for v in range(3)})
    cov = generalized_covariance(model, StatisticBasis.vertices_of(3, 2))
    assert np.allclose(cov.matrix, np.eye(3) / 4, atol=1e-15)


def test_two_vertex_closed_form():
    t = 0.7
    model = DiscreteMRF(2, 2, {(0,): [0.0], (1,): [0.0], (0, 1): [t]})
    cov = generalized_covariance(model, StatisticBasis.vertices_of(2, 2)).matrix
    z = 3 + math.exp(t)
    p11, p1 = math.exp(t) / z, (1 + math.exp(t)) / z
    assert cov[0, 1] == pytest.approx(p11 - p1 * p1, abs=1e-15)


def test_chain_gamma_matches_printed_values(chain4_model):
    gamma = gamma_of(chain4_model, StatisticBasis.vertices_of(4, 2)).matrix
    assert np.abs(gamma - CHAIN_GAMMA).max() <= 0.005
    assert np.abs(gamma[CHAIN_GAMMA == 0]).max() < 1e-8


def test_cycle_gamma_matches_printed_values(cycle4_model):
    gamma = gamma_of(cycle4_model, StatisticBasis.vertices_of(4, 2)).matrix
    assert np.abs(gamma - LOOP_GAMMA).max() <= 0.005
    assert np.abs(gamma).min() > 0.1


def test_augmented_cycle_separates_opposite_vertices(cycle4_model):
    basis = StatisticBasis([(0,), (1,), (2,), (3,), (0, 2)], 2)
    inv = gamma_of(cycle4_model, basis)
    assert abs(inv.block((1,), (3,))[0, 0]) < 1e-8
    assert inv.block((0,), (2,))[0, 0] == pytest.approx(1.09e3, abs=5)


def test_generalized_covariance_matches_dense_oracle():
    model = random_model(cycle(5), 3, node="uniform:-1:1", edge="uniform:-1:1", rng=3)
    basis = StatisticBasis.power_set([(0, 1, 2), (2, 3)], 3, include=[(4,)])
    cov = generalized_covariance(model, basis)
    dense, mean = dense_covariance(model, basis)
    assert np.allclose(cov.matrix, dense, atol=1e-14)
    assert np.allclose(cov.mean, mean, atol=1e-15)
    assert np.all((cov.mean > 0) & (cov.mean < 1))
    assert np.abs(cov.matrix - cov.matrix.T).max() < 1e-12


def test_mean_equals_marginal_probabilities(chain4_model):
    dist = exact_distribution(chain4_model)
    basis = StatisticBasis([(0,), (1, 2)], 2)
    cov = generalized_covariance(chain4_model, basis)
    assert cov.mean[0] == pytest.approx(dist.marginal([0])[1], abs=1e-15)
    assert cov.mean[1] == pytest.approx(dist.marginal([1, 2])[1, 1], abs=1e-15)


def test_redundant_basis_is_not_positive_definite():
    # a deterministic vertex makes its statistic constant
    model = DiscreteMRF(2, 2, {(0,): [0.1], (1,): [800.0]})
    with pytest.raises(NotPositiveDefinite):
        generalized_covariance(model, StatisticBasis.vertices_of(2, 2))


def test_clique_block_zeros_on_chain():
    model = random_model(chain(5), 2, node="uniform:-1:1", edge="uniform:-1:1", rng=11)
    rep = verify_theorem1(model, build_junction_tree(triangulate(chain(5))))
    assert rep.passed and rep.max_forbidden < 1e-8 and rep.min_allowed > 1e-6


def test_clique_block_zeros_on_cycle_with_triangles():
    # 4-cycle with chord (1,3) plus triangles on two of its edges
    g = Graph(6, frozenset([(0, 1), (1, 2), (2, 3), (0, 3), (0, 2), (0, 4), (1, 4), (2, 5), (3, 5)]))
    model = random_model(g, 2, node=0.1, edge=2.0, higher=0.5)
    jt = build_junction_tree(triangulate(g))
    rep = verify_theorem1(model, jt)
    assert rep.zeros_hold
    rows = {(r.a, r.b): r for r in rep.rows}
    assert rows[((1,), (3,))].forbidden and rows[((1,), (3,))].max_abs < 1e-8
    assert rows[((1,), (0, 3))].forbidden and rows[((1,), (0, 3))].max_abs < 1e-8


def test_complete_graph_has_no_forbidden_blocks():
    g = Graph(3, frozenset([(0, 1), (0, 2), (1, 2)]))
    model = random_model(g, 2, node="uniform:-1:1", edge="uniform:-1:1", higher="uniform:-1:1", rng=1)
    rep = verify_theorem1(model, build_junction_tree(g))
    assert rep.passed and not any(r.forbidden for r in rep.rows)


def test_report_csv(tmp_path, chain4_model):
    rep = verify_theorem1(chain4_model, build_junction_tree(chain(4)))
    text = rep.to_csv(tmp_path / "r.csv")
    lines = text.splitlines()
    assert lines[0] == "A,B,forbidden,max_abs,pass"
    assert len(lines) == len(rep.rows) + 1
    assert (tmp_path / "r.csv").read_text() == text


def test_dino_vertex_basis_is_graph_structured():
    g = dino_graph()
    model = random_model(g, 2, node="uniform:-1:1", edge="uniform:-1:1", rng=5)
    rep = verify_separator_corollary(model, build_junction_tree(triangulate(g)), variant="vertices",
                                     nonzero_tol=1e-6)
    assert rep.passed
    assert {(r.a[0], r.b[0]) for r in rep.rows if not r.forbidden} == set(g.edges)


def test_separator_basis_on_cycle(cycle4_model):
    jt = build_junction_tree(triangulate(cycle(4)))
    rep = verify_separator_corollary(cycle4_model, jt)
    assert rep.zeros_hold
    forbidden = [(r.a, r.b) for r in rep.rows if r.forbidden]
    assert len(forbidden) == 1


def test_tree_ternary_vertex_blocks():
    g = Graph(5, frozenset([(0, 1), (1, 2), (1, 3), (3, 4)]))
    model = random_model(g, 3, node="uniform:-1:1", edge="uniform:-1:1", rng=2)
    jt = build_junction_tree(g)
    rep = verify_separator_corollary(model, jt, variant="vertices", nonzero_tol=1e-6)
    assert rep.passed
    gamma = rep.gamma
    assert gamma.block((0,), (2,)).shape == (2, 2)


def test_partial_variant_on_non_singleton_graph():
    # two triangles sharing an edge plus a pendant: the pendant is cut off by one vertex
    g = Graph(5, frozenset([(0, 1), (0, 2), (1, 2), (1, 3), (2, 3), (3, 4)]))
    model = random_model(g, 2, node="uniform:-1:1", edge="uniform:-1:1", rng=4)
    rep = verify_separator_corollary(model, build_junction_tree(g), variant="partial")
    assert rep.passed
    assert {(r.a[0], r.b[0]) for r in rep.rows if r.forbidden} == {(0, 4), (1, 4), (2, 4)}


def test_neighborhood_products_chain_middle():
    model = random_model(chain(5), 2, node="uniform:-1:1", edge="uniform:-1:1", rng=8)
    rep = verify_neighborhood_corollary(model, 2, 2)
    assert rep.zeros_hold
    allowed = {r.b for r in rep.rows if not r.forbidden}
    assert allowed == {(1,), (3,), (1, 3)}


def test_neighborhood_products_star_hub():
    g = generate_graph(GraphFamilySpec("star", 5, hub_degree=4))
    model = random_model(g, 2, node="uniform:-1:1", edge="uniform:-1:1", rng=9)
    rep = verify_neighborhood_corollary(model, 0, 4, nonzero_tol=1e-6)
    assert rep.passed
    assert all(r.max_abs > 1e-6 for r in rep.rows if len(r.b) == 1)


def test_neighborhood_products_isolated_vertex():
    g = Graph(4, frozenset([(1, 2), (2, 3)]))
    model = random_model(g, 2, node="uniform:-1:1", edge="uniform:-1:1", rng=10)
    rep = verify_neighborhood_corollary(model, 0, 2)
    assert rep.zeros_hold and all(r.forbidden for r in rep.rows)


def test_entropy_identity_on_chain(chain4_model):
    rep = entropy_decomposition_check(chain4_model, build_junction_tree(chain(4)))
    assert rep.gap < 1e-10 and rep.factorization_error < 1e-12


def test_entropy_of_independent_vertices():
    model = DiscreteMRF(3, 2, {(0,): [0.3], (1,): [-1.0], (2,): [2.0]})
    dist = exact_distribution(model)
    assert dist.entropy() == pytest.approx(sum(dist.entropy([v]) for v in range(3)), abs=1e-14)


def test_entropy_identity_on_triangulated_cycle(cycle4_model):
    rep = entropy_decomposition_check(cycle4_model, build_junction_tree(triangulate(cycle(4))))
    assert rep.gap < 1e-10


def kron_alpha(sigma, support):
    """Incoherence from the explicit p^2 x p^2 Kronecker product."""
    p = sigma.shape[0]
    big = np.kron(sigma, sigma)
    s_set = {(s, s) for s in range(p)} | {(a, b) for a, b in support} | {(b, a) for a, b in support}
    s_idx = [a * p + b for a, b in sorted(s_set)]
    c_idx = [i for i in range(p * p) if i not in s_idx]
    if not c_idx:
        return 1.0
    sol = big[np.ix_(c_idx, s_idx)] @ np.linalg.inv(big[np.ix_(s_idx, s_idx)])
    return 1.0 - np.abs(sol).sum(axis=1).max()


def test_incoherence_diagonal():
    assert incoherence_alpha(np.diag([1.0, 2.0, 3.0]), []) == pytest.approx(1.0)


def test_incoherence_empty_complement():
    assert incoherence_alpha(np.array([[1.0, 0.3], [0.3, 1.0]]), [(0, 1)]) == 1.0


def test_incoherence_chain_matches_kronecker(chain4_model):
    sigma = generalized_covariance(chain4_model, StatisticBasis.vertices_of(4, 2)).matrix
    support = [(0, 1), (1, 2), (2, 3)]
    alpha = incoherence_alpha(sigma, support)
    assert alpha == pytest.approx(kron_alpha(sigma, support), abs=1e-10)
    # frozen from the Kronecker oracle
    assert alpha == pytest.approx(kron_alpha(sigma, support), rel=1e-12)


def test_incoherence_singular():
    with pytest.raises(SingularSubmatrix):
        incoherence_alpha(np.zeros((3, 3)), [(0, 1)])


@settings(max_examples=40, deadline=None)
@given(st.integers(2, 6), st.integers(0, 2**32 - 1))
def test_incoherence_property(p, seed):
    rng = np.random.default_rng(seed)
    a = rng.normal(size=(p, p))
    sigma = a @ a.T + p * np.eye(p)
    support = [(s, t) for s in range(p) for t in range(s + 1, p) if rng.random() < 0.4]
    assert incoherence_alpha(sigma, support) == pytest.approx(kron_alpha(sigma, support), abs=1e-9)


@settings(max_examples=60, deadline=None)
@given(st.integers(2, 10), st.integers(0, 2**32 - 1))
def test_block_inversion_identity(d, seed):
    rng = np.random.default_rng(seed)
    a = rng.normal(size=(d, d))
    sigma = a @ a.T + 0.5 * np.eye(d)
    k = int(rng.integers(1, d))
    gamma = np.linalg.inv(sigma)
    A, B = slice(0, k), slice(k, d)
    lhs = np.linalg.inv(sigma[A, A])
    rhs = gamma[A, A] - gamma[A, B] @ np.linalg.inv(gamma[B, B]) @ gamma[B, A]
    assert np.abs(lhs - rhs).max() < 1e-9 * max(1.0, np.abs(lhs).max())


def test_vertex_gamma_independent_of_triangulation():
    # the vertex block only depends on the model, whichever chord is added
    model = random_model(generate_graph(GraphFamilySpec("grid2d", 4)), 2, node=0.1, edge=0.5)
    gamma = gamma_of(model, StatisticBasis.vertices_of(4, 2)).matrix
    for chord in [(0, 3), (1, 2)]:
        g = Graph(4, model.graph().edges | {chord})
        jt = build_junction_tree(g)
        rep = verify_separator_corollary(model, jt)
        sub = rep.gamma.matrix[:4, :4]
        basis = rep.gamma.basis
        idx = [basis.block((v,)).start for v in range(4)]
        assert np.allclose(
            np.linalg.inv(np.linalg.inv(rep.gamma.matrix)[np.ix_(idx, idx)]),
            gamma, atol=1e-9 * np.abs(gamma).max())
        assert sub.shape == (4, 4)


@pytest.mark.parametrize("m", [2, 3])
@settings(max_examples=15, deadline=None)
@given(seed=st.integers(0, 2**32 - 1))
def test_clique_block_zeros_on_random_graphs(m, seed):
    rng = np.random.default_rng(seed)
    p = 5 if m == 2 else 4
    g = random_graph(rng, p, 0.5)
    model = random_model(g, m, node="uniform:-1:1", edge="uniform:-1:1", higher="uniform:-1:1", rng=rng)
    jt = build_junction_tree(triangulate(g))
    rep = verify_theorem1(model, jt, nonzero_tol=None)
    assert rep.zeros_hold


@settings(max_examples=20, deadline=None)
@given(st.integers(2, 7), st.integers(0, 2**32 - 1))
def test_entropy_identity_property(p, seed):
    rng = np.random.default_rng(seed)
    g = triangulate(random_graph(rng, p, 0.4))
    model = random_model(g, 2, node="normal:0:1", edge="normal:0:1", higher="normal:0:1", rng=rng)
    rep = entropy_decomposition_check(model, build_junction_tree(g))
    assert rep.gap < 1e-10
