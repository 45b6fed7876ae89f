"""Truncated groupoid structure: paths, divergence, lengths, balls, metrics."""

import itertools

import numpy as np
import pytest

from afqms.bratteli import car_diagram, make_diagram, stationary_diagram
from afqms.groupoid import (
    BallCertificateError,
    ElementClass,
    GroupoidError,
    PathSyntaxError,
    TruncatedGroupoid,
    format_element,
    format_path,
    parse_element,
    parse_path,
)

PAIR = stationary_diagram([[1, 1], [1, 1]], 4)
# One level-1 source: vertex (1,1) has an empty column.
MIXED = make_diagram((1, 2, 2, 2), ([[1, 0]], [[1, 1], [1, 1]], [[1, 1], [1, 1]]))


def brute_k(p, q):
    """Oracle divergence level: compare absolute edge slots directly."""
    if p == q:
        return 0
    depth = p.depth
    slots_p = {p.source[0] + 1 + i: (p.vertices[i], e) for i, e in enumerate(p.edges)}
    slots_q = {q.source[0] + 1 + i: (q.vertices[i], e) for i, e in enumerate(q.edges)}
    return max(
        lv for lv in range(1, depth + 1) if slots_p.get(lv) != slots_q.get(lv)
    )


def test_enumeration_count_matches_table():
    for d, D in ((car_diagram(4), 4), (PAIR, 3), (MIXED, 3)):
        g = TruncatedGroupoid(d, D)
        assert len(g.paths) == g.table.ell[D]


def test_resolution_bounds():
    with pytest.raises(GroupoidError):
        TruncatedGroupoid(car_diagram(3), 4)
    with pytest.raises(GroupoidError):
        TruncatedGroupoid(car_diagram(3), 0)
    with pytest.raises(GroupoidError):
        TruncatedGroupoid(car_diagram(3), 2, base=1.5)


def test_path_literal_round_trip():
    for g in (TruncatedGroupoid(MIXED, 3), TruncatedGroupoid(PAIR, 3)):
        for p in g.paths:
            assert parse_path(format_path(p), g.diagram) == p


def test_path_literal_errors():
    d = car_diagram(3)
    with pytest.raises(PathSyntaxError):
        parse_path("x0.0:1", d)
    with pytest.raises(PathSyntaxError):
        parse_path("s0.5:0", d)
    with pytest.raises(PathSyntaxError):
        parse_path("s0.0:3", d)  # out-degree is 2
    with pytest.raises(PathSyntaxError):
        parse_path("s0.0:0,0,0,0", d)  # runs past the last level


def test_element_literal_round_trip():
    g = TruncatedGroupoid(car_diagram(3), 3)
    e = ElementClass(g.paths[0], g.paths[1], level=2)
    text = format_element(e)
    back = parse_element(text, g.diagram)
    assert back == e


def test_k_matches_brute_force():
    for d, D in ((car_diagram(4), 4), (PAIR, 3), (MIXED, 3)):
        g = TruncatedGroupoid(d, D)
        for idx in g.terminal_groups().values():
            for i, j in itertools.product(idx.tolist(), idx.tolist()):
                assert g.k_index(i, j) == brute_k(g.paths[i], g.paths[j])


def test_non_composable_pairs_rejected():
    g = TruncatedGroupoid(PAIR, 3)
    by_term = list(g.terminal_groups().values())
    i, j = int(by_term[0][0]), int(by_term[1][0])
    with pytest.raises(GroupoidError):
        g.k_index(i, j)


def test_length_values():
    g = TruncatedGroupoid(car_diagram(4), 4)
    idx = g.terminal_groups()[0]
    # Divergence at level 2 gives length ell_2 = 4.
    pairs = [(i, j) for i in idx for j in idx if g.k_index(int(i), int(j)) == 2]
    assert pairs
    e = ElementClass(g.paths[int(pairs[0][0])], g.paths[int(pairs[0][1])])
    assert g.length_of(e) == 4

    g2 = TruncatedGroupoid(PAIR, 3)
    for idx in g2.terminal_groups().values():
        ks = {g2.k_index(int(i), int(j)) for i in idx for j in idx}
        assert 2 in ks
    assert g2.length_of_k(2) == 8


def test_compose_inverse_axioms():
    g = TruncatedGroupoid(car_diagram(3), 3)
    idx = list(range(len(g.paths)))
    for i, j, k in itertools.product(idx[:4], idx[:4], idx[:4]):
        a = ElementClass(g.paths[i], g.paths[j])
        b = ElementClass(g.paths[j], g.paths[k])
        c = g.compose(a, b)
        assert (c.mu, c.lam) == (g.paths[i], g.paths[k])
        inv = g.inverse(a)
        assert g.length_of(inv) == g.length_of(a)
        assert g.compose(a, inv).mu == g.compose(a, inv).lam
    with pytest.raises(GroupoidError):
        g.compose(
            ElementClass(g.paths[0], g.paths[1]), ElementClass(g.paths[2], g.paths[3])
        )


def test_ball_car_example():
    g = TruncatedGroupoid(car_diagram(3), 3)
    ball = g.ball(2)
    # Diagonal (8) plus the divergence-level-1 arrows (8).
    assert len(ball) == 16
    assert all(g.length_of(e) <= 2 for e in ball)


def test_ball_certificate_error():
    # Radius beyond every level total, with branching past the resolution.
    g = TruncatedGroupoid(car_diagram(6), 3)
    with pytest.raises(BallCertificateError):
        g.ball(1000)
    # Same radius is fine when the resolution exhausts the diagram.
    g_full = TruncatedGroupoid(car_diagram(6), 6)
    assert len(g_full.ball(1000)) == 64 * 64


def test_ultra_distance_examples():
    g = TruncatedGroupoid(car_diagram(3), 3)
    p = g.paths[0]
    assert g.ultra_distance(p, p) == 0.0
    # Agree on two edges, differ at the third: distance base**2.
    q = next(
        x for x in g.paths if x.edges[:2] == p.edges[:2] and x.edges[2] != p.edges[2]
    )
    assert g.ultra_distance(p, q) == 0.25
    gm = TruncatedGroupoid(MIXED, 2)
    different_sources = [
        (p, q)
        for p, q in itertools.combinations(gm.paths, 2)
        if p.source != q.source
    ]
    assert different_sources
    assert all(gm.ultra_distance(p, q) == 1.0 for p, q in different_sources)


def test_ultra_distance_matches_matrix_and_triangle():
    for d, D in ((car_diagram(3), 3), (MIXED, 3)):
        g = TruncatedGroupoid(d, D)
        Dm = g.path_distance_matrix()
        n = len(g.paths)
        for i, j in itertools.product(range(n), range(n)):
            assert Dm[i, j] == g.ultra_distance(g.paths[i], g.paths[j])
        # Strong triangle inequality, exhaustively.
        for i, j, k in itertools.product(range(n), repeat=3):
            assert Dm[i, k] <= max(Dm[i, j], Dm[j, k]) + 1e-15


def test_stratum_distance_example():
    g = TruncatedGroupoid(car_diagram(2), 2)
    paths = {p.edges: p for p in g.paths}
    a = ElementClass(paths[(0, 0)], paths[(1, 0)])
    b = ElementClass(paths[(0, 1)], paths[(1, 1)])
    assert g.length_of(a) == g.length_of(b)
    assert g.stratum_distance(a, b) == 0.5


def test_stratum_distance_errors():
    g = TruncatedGroupoid(car_diagram(2), 2)
    idx = g.terminal_groups()[0]
    units = [ElementClass(g.paths[int(i)], g.paths[int(i)]) for i in idx[:2]]
    off = next(
        ElementClass(g.paths[int(i)], g.paths[int(j)])
        for i in idx
        for j in idx
        if i != j
    )
    with pytest.raises(GroupoidError):
        g.stratum_distance(units[0], off)
    with pytest.raises(GroupoidError):
        g.stratum_distance(units[0], units[0])


@pytest.mark.parametrize("diagram", [car_diagram(4), PAIR])
def test_stratum_distance_is_min_over_representatives(diagram):
    """The arrow distance equals the exact infimum over point pairs.

    Classes at truncation m are depth-m path pairs; their representatives at
    depth D extend both legs by one common tail.  The infimum of the
    max(source, range) distance over representative pairs must equal the
    distance computed on the depth-m cylinders.
    """
    m, D = 2, 4
    gm = TruncatedGroupoid(diagram, m)
    gD = TruncatedGroupoid(diagram, D)

    def reps(cls_small: ElementClass):
        out = []
        for x in gD.paths:
            if (x.source, x.edges[:m]) != (cls_small.mu.source, cls_small.mu.edges):
                continue
            for y in gD.paths:
                if (y.source, y.edges[:m]) != (
                    cls_small.lam.source,
                    cls_small.lam.edges,
                ):
                    continue
                if x.edges[m:] == y.edges[m:]:
                    out.append((x, y))
        return out

    classes = [
        ElementClass(p, q)
        for idx in gm.terminal_groups().values()
        for p in (gm.paths[int(i)] for i in idx)
        for q in (gm.paths[int(i)] for i in idx)
    ]
    by_len = {}
    for c in classes:
        by_len.setdefault(gm.length_of(c), []).append(c)
    for value, stratum in by_len.items():
        for a, b in itertools.combinations(stratum, 2):
            observed = min(
                max(gD.ultra_distance(x, xx), gD.ultra_distance(y, yy))
                for x, y in reps(a)
                for xx, yy in reps(b)
            )
            assert observed == gm.stratum_distance(a, b)


def test_fiber_count_matches_enumeration():
    for d, D in ((car_diagram(4), 4), (MIXED, 3)):
        g = TruncatedGroupoid(d, D)
        K = g.k_matrix()
        for t in set(g.table.ell[1 : D + 1]):
            n = g.level_of_radius(t)
            for i in range(len(g.paths)):
                enum = sum(
                    1
                    for j in range(len(g.paths))
                    if K[i, j] >= 0 and K[i, j] <= n
                )
                assert enum == g.fiber_count(i, t)


def test_tail_classes_partition_and_refine():
    g = TruncatedGroupoid(PAIR, 4)
    all_idx = set(range(len(g.paths)))
    for m in range(g.resolution + 1):
        classes = g.tail_classes(m)
        seen = [int(i) for cls in classes for i in cls]
        assert sorted(seen) == sorted(all_idx)
        if m > 0:
            finer = g.tail_classes(m - 1)
            # Each finer class sits inside one coarser class.
            for cls in finer:
                owners = {
                    next(ci for ci, c in enumerate(classes) if int(i) in set(c.tolist()))
                    for i in cls
                }
                assert len(owners) == 1
    # Level-0 classes are singletons here (distinct prefixes separate paths).
    assert all(len(c) == 1 for c in g.tail_classes(0))


def test_mixed_source_tail_classes_respect_source_levels():
    g = TruncatedGroupoid(MIXED, 3)
    for cls in g.tail_classes(0):
        sources = {g.paths[int(i)].source for i in cls}
        assert len(sources) == 1
