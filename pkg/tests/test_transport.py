"""Transport distances on cylinder measures: tree form, LP oracle, duality."""

import itertools

import numpy as np
import pytest

from afqms.algebra import make_measure, uniform_measure
from afqms.bratteli import car_diagram, make_diagram, stationary_diagram
from afqms.groupoid import TruncatedGroupoid
from afqms.quantum_metric import Stratification
from afqms.transport import (
    LP_SUPPORT_CAP,
    CylinderTree,
    TransportError,
    mk_lower_bound,
    wasserstein_lp,
    wasserstein_tree,
)

PAIR = stationary_diagram([[1, 1], [1, 1]], 4)
MIXED = make_diagram((1, 2, 2, 2), ([[1, 0]], [[1, 1], [1, 1]], [[1, 1], [1, 1]]))


def random_measure(g, rng):
    w = rng.random(len(g.paths))
    w /= w.sum()
    return make_measure(g, {i: float(x) for i, x in enumerate(w)})


@pytest.mark.parametrize(
    "diagram,resolution",
    [(car_diagram(4), 4), (PAIR, 3), (MIXED, 3), (car_diagram(4), 2)],
)
def test_tree_distance_equals_ultrametric(diagram, resolution):
    g = TruncatedGroupoid(diagram, resolution)
    tree = CylinderTree(g)
    for i, j in itertools.product(range(len(g.paths)), repeat=2):
        assert tree.distance(i, j) == pytest.approx(
            g.ultra_distance(g.paths[i], g.paths[j]), abs=1e-15
        )


def test_point_mass_examples():
    g = TruncatedGroupoid(car_diagram(2), 2)
    tree = CylinderTree(g)
    # Point masses on cylinders that differ at the first edge: the cylinder
    # distance is 1, so W1 is 1.
    by_edges = {p.edges: i for i, p in enumerate(g.paths)}
    a = make_measure(g, {by_edges[(0, 0)]: 1.0})
    b = make_measure(g, {by_edges[(1, 0)]: 1.0})
    assert wasserstein_tree(tree, a, b) == pytest.approx(1.0)
    # Splitting one point mass across that divide pays half the distance.
    c = make_measure(g, {by_edges[(0, 0)]: 0.5, by_edges[(1, 0)]: 0.5})
    assert wasserstein_tree(tree, a, c) == pytest.approx(0.5)
    assert wasserstein_tree(tree, a, a) == 0.0


def test_tree_matches_lp_on_random_measures():
    rng = np.random.default_rng(np.random.Philox(17))
    for diagram, resolution in ((car_diagram(3), 3), (PAIR, 3), (MIXED, 3)):
        g = TruncatedGroupoid(diagram, resolution)
        tree = CylinderTree(g)
        for _ in range(10):
            a = random_measure(g, rng)
            b = random_measure(g, rng)
            assert wasserstein_tree(tree, a, b) == pytest.approx(
                wasserstein_lp(g, a, b), abs=1e-9
            )


def test_metric_axioms_on_random_measures():
    g = TruncatedGroupoid(car_diagram(3), 3)
    tree = CylinderTree(g)
    rng = np.random.default_rng(np.random.Philox(23))
    ms = [random_measure(g, rng) for _ in range(5)]
    for a, b in itertools.combinations(ms, 2):
        dab = wasserstein_tree(tree, a, b)
        assert dab >= 0
        assert dab == pytest.approx(wasserstein_tree(tree, b, a), abs=1e-15)
    for a, b, c in itertools.permutations(ms, 3):
        assert wasserstein_tree(tree, a, c) <= (
            wasserstein_tree(tree, a, b) + wasserstein_tree(tree, b, c) + 1e-12
        )
    for a in ms:
        assert wasserstein_tree(tree, a, a) == 0.0


def test_mk_lower_bound_attains_w1():
    rng = np.random.default_rng(np.random.Philox(31))
    for diagram, resolution in ((car_diagram(3), 3), (PAIR, 3)):
        g = TruncatedGroupoid(diagram, resolution)
        strata = Stratification(g)
        tree = CylinderTree(g)
        for _ in range(5):
            a = random_measure(g, rng)
            b = random_measure(g, rng)
            w1 = wasserstein_tree(tree, a, b)
            lb = mk_lower_bound(g, strata, 1, a, b)
            assert lb <= w1 + 1e-9
            assert lb >= w1 - 1e-6


def test_mk_identical_measures():
    g = TruncatedGroupoid(car_diagram(2), 2)
    strata = Stratification(g)
    mu = uniform_measure(g)
    assert mk_lower_bound(g, strata, 1, mu, mu) == pytest.approx(0.0, abs=1e-9)


def test_lp_support_cap():
    g = TruncatedGroupoid(car_diagram(10), 10)
    assert len(g.paths) > LP_SUPPORT_CAP
    a = uniform_measure(g)
    with pytest.raises(TransportError):
        wasserstein_lp(g, a, a)
