import itertools
import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from gencov.exceptions import DimensionMismatch, InvalidSpec, TooLargeToEnumerate
from gencov.graph import Graph
from gencov.mrf import (
    DiscreteMRF,
    StatisticBasis,
    exact_distribution,
    format_model,
    indicator_matrix,
    indicator_vector,
    ising_model,
    parse_model,
    random_model,
    read_model,
    write_model,
)

from conftest import chain, cycle, random_graph


def direct_table(model):
    """Unnormalized weights by looping over configurations and cliques by hand."""
    out = {}
    for x in itertools.product(range(model.m), repeat=model.p):
        total = 0.0
        for c, table in model.potentials.items():
            xc = [x[v] for v in c]
            if all(v > 0 for v in xc):
                total += table[tuple(v - 1 for v in xc)]
        out[x] = math.exp(total)
    return out


def test_binary_singletons_are_identity():
    basis = StatisticBasis.vertices_of(3, 2)
    assert indicator_vector((3, 2), basis, (1, 0, 1)).tolist() == [1, 0, 1]


def test_product_statistic():
    basis = StatisticBasis([(0,), (2,), (0, 2)], 2)
    assert indicator_vector((4, 2), basis, (1, 0, 1, 0)).tolist() == [1, 1, 1]


def test_zero_coordinate_kills_blocks():
    basis = StatisticBasis.power_set([(0, 1)], 3)
    v = indicator_vector((2, 3), basis, (0, 2))
    assert v[basis.block((0,))].tolist() == [0, 0]
    assert v[basis.block((1,))].tolist() == [0, 1]
    assert v[basis.block((0, 1))].tolist() == [0, 0, 0, 0]


def test_indicator_vector_errors():
    basis = StatisticBasis.vertices_of(3, 2)
    with pytest.raises(DimensionMismatch):
        indicator_vector((3, 2), basis, (1, 0))
    with pytest.raises(DimensionMismatch):
        indicator_vector((3, 2), basis, (2, 0, 1))
    with pytest.raises(DimensionMismatch):
        indicator_vector((2, 2), basis, (1, 0))


def test_basis_layout():
    basis = StatisticBasis([(1, 2), (0,), (2,)], 3)
    assert basis.cliques == ((0,), (2,), (1, 2))
    assert basis.dimension == 2 + 2 + 4
    assert basis.block((1, 2)) == slice(4, 8)
    with pytest.raises(InvalidSpec):
        StatisticBasis([(0,), (0,)], 2)


def test_fair_coin():
    dist = exact_distribution(DiscreteMRF(1, 2, {(0,): [0.0]}))
    assert np.allclose(dist.flat, [0.5, 0.5])
    assert dist.log_partition == pytest.approx(math.log(2), abs=1e-15)


def test_logistic_single_vertex():
    dist = exact_distribution(DiscreteMRF(1, 2, {(0,): [0.1]}))
    assert dist.flat[1] == pytest.approx(math.exp(0.1) / (1 + math.exp(0.1)), abs=1e-15)
    assert dist.flat[1] == pytest.approx(0.524979, abs=1e-6)


def test_chain_table_matches_direct_summation(chain4_model):
    dist = exact_distribution(chain4_model)
    table = direct_table(chain4_model)
    z = sum(table.values())
    for idx, x in enumerate(dist.configurations()):
        assert dist.flat[idx] == pytest.approx(table[tuple(x)] / z, rel=1e-12)
    assert math.exp(dist.log_partition) == pytest.approx(z, rel=1e-12)
    assert dist.flat.sum() == pytest.approx(1.0, abs=1e-12)


def test_enumeration_cap():
    model = ising_model(chain(21), 0.1, 0.3)
    with pytest.raises(TooLargeToEnumerate):
        exact_distribution(model)
    with pytest.raises(TooLargeToEnumerate):
        exact_distribution(ising_model(chain(5), 0.1, 0.3), max_states=16)


def test_example_chain_model(chain4_model):
    assert set(chain4_model.potentials) == {(0,), (1,), (2,), (3,), (0, 1), (1, 2), (2, 3)}
    assert all(float(t.reshape(-1)[0]) == (0.1 if len(c) == 1 else 2.0) for c, t in chain4_model.potentials.items())


def test_empty_graph_has_singletons_only():
    model = random_model(Graph(3, frozenset()), 2, node="uniform:-1:1", edge="uniform:-1:1", rng=0)
    assert set(model.potentials) == {(0,), (1,), (2,)}


def test_random_model_is_reproducible():
    g = cycle(5)
    a = random_model(g, 3, node="uniform:-1:1", edge="uniform:-1:1", rng=42)
    b = random_model(g, 3, node="uniform:-1:1", edge="uniform:-1:1", rng=42)
    assert format_model(a) == format_model(b)
    assert all(np.all(t != 0) for c, t in a.potentials.items() if len(c) == 2)


def test_higher_order_potentials_optional():
    g = Graph(3, frozenset([(0, 1), (1, 2), (0, 2)]))
    assert (0, 1, 2) not in random_model(g, 2, 0.1, 0.3).potentials
    assert (0, 1, 2) in random_model(g, 2, 0.1, 0.3, higher=0.5).potentials


def test_model_validation():
    with pytest.raises(InvalidSpec):
        DiscreteMRF(2, 1, {})
    with pytest.raises(DimensionMismatch):
        DiscreteMRF(2, 3, {(0,): [0.1]})
    with pytest.raises(InvalidSpec):
        DiscreteMRF(2, 2, {(0, 5): [0.1]})


def test_model_text_round_trip(tmp_path):
    model = random_model(cycle(4), 3, node="normal:0:1", edge="normal:0:1", higher="normal:0:1", rng=7)
    path = tmp_path / "model.txt"
    write_model(model, path)
    back = read_model(path)
    assert format_model(back) == format_model(model)
    for c in model.potentials:
        assert np.array_equal(back.potentials[c], model.potentials[c])


@pytest.mark.parametrize("text", ["", "3\n", "2 2\n0:1\n", "2 2\n0:2:0.1\n", "2 3\n0:1:0.1\n"])
def test_model_reader_rejects_bad_input(text):
    with pytest.raises(InvalidSpec):
        parse_model(text)


@settings(max_examples=40, deadline=None)
@given(st.integers(1, 6), st.sampled_from([2, 3]), st.integers(0, 2**32 - 1))
def test_log_partition_matches_direct_sum(p, m, seed):
    rng = np.random.default_rng(seed)
    g = random_graph(rng, p, 0.5)
    model = random_model(g, m, node="normal:0:1", edge="normal:0:1", higher="normal:0:0.5", rng=rng)
    if m**p > 800:
        return
    z = sum(direct_table(model).values())
    assert math.exp(exact_distribution(model).log_partition) == pytest.approx(z, rel=1e-12)


@settings(max_examples=40, deadline=None)
@given(st.integers(2, 6), st.integers(0, 2**32 - 1))
def test_binary_power_set_statistics_are_monomials(p, seed):
    rng = np.random.default_rng(seed)
    sets = [tuple(sorted(rng.choice(p, size=int(rng.integers(1, p + 1)), replace=False)))]
    basis = StatisticBasis.power_set(sets, 2)
    x = rng.integers(0, 2, size=(20, p))
    feats = indicator_matrix(basis, x)
    for (c, _), col in zip(basis.entries, feats.T):
        assert np.array_equal(col, np.prod(x[:, list(c)], axis=1))


@settings(max_examples=30, deadline=None)
@given(st.integers(2, 5), st.sampled_from([2, 3]), st.integers(0, 2**32 - 1))
def test_indicator_covariance_is_positive_definite(p, m, seed):
    rng = np.random.default_rng(seed)
    model = random_model(random_graph(rng, p, 0.6), m, node="uniform:-1:1", edge="uniform:-1:1", rng=rng)
    dist = exact_distribution(model)
    basis = StatisticBasis.power_set([tuple(range(p))], m) if m**p <= 243 else StatisticBasis.vertices_of(p, m)
    feats = indicator_matrix(basis, dist.configurations())
    mean = dist.flat @ feats
    cov = (feats * dist.flat[:, None]).T @ feats - np.outer(mean, mean)
    assert np.linalg.eigvalsh(cov)[0] > 0
