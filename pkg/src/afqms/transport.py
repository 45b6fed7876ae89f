"""Optimal transport on the unit space at fixed resolution.

Measures live on depth-D cylinders.  The ultrametric makes Wasserstein-1
distances computable in closed form on the cylinder tree; a linear-program
oracle provides an independent check, and the same distance is recovered
from below by seminorm-bounded kernels evaluated against the two states.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.optimize import linprog

from .algebra import Kernel, Measure, state_eval
from .groupoid import TruncatedGroupoid
from .quantum_metric import (
    Stratification,
    commutator_seminorm,
    lipschitz_seminorm,
)


class TransportError(ValueError):
    """Invalid transport computation: support too large, LP failure, ..."""


LP_SUPPORT_CAP = 512


@dataclass(frozen=True)
class TreeNode:
    """One cylinder prefix: a node of the transport tree."""

    source: tuple[int, int]
    edges: tuple[int, ...]


class CylinderTree:
    """Rooted tree of cylinder prefixes with additive edge weights.

    Halved geometric increments plus a leaf correction make the leaf-to-leaf
    tree distance coincide exactly with the cylinder ultrametric: the edge
    into a node at absolute level h weighs (base**(h-1) - base**h) / 2, a
    leaf carries an extra base**resolution / 2, and a source-root edge
    weighs (1 - base**source_level) / 2 so different sources sit at
    distance 1.
    """

    def __init__(self, groupoid: TruncatedGroupoid):
        self.groupoid = groupoid
        base = groupoid.base
        self.parent: dict[TreeNode, TreeNode | None] = {}
        self.weight: dict[TreeNode, float] = {}
        self.leaf_of: dict[int, TreeNode] = {}
        for i, p in enumerate(groupoid.paths):
            node = TreeNode(p.source, p.edges)
            self.leaf_of[i] = node
            lv = p.source[0]
            while node not in self.parent:
                h = len(node.edges)
                if h == 0:
                    self.parent[node] = None
                    self.weight[node] = (1.0 - base**lv) / 2.0
                else:
                    up = TreeNode(node.source, node.edges[:-1])
                    self.parent[node] = up
                    self.weight[node] = (
                        base ** (lv + h - 1) - base ** (lv + h)
                    ) / 2.0
                    node = up
            leaf = self.leaf_of[i]
            # Leaf correction applied once per leaf.
            self.weight[leaf] = self.weight[leaf] + base**groupoid.resolution / 2.0

    def distance(self, i: int, j: int) -> float:
        """Sum of edge weights along the leaf-to-leaf tree path."""
        if i == j:
            return 0.0
        a, b = self.leaf_of[i], self.leaf_of[j]
        anc_a = {}
        node, acc = a, 0.0
        while node is not None:
            anc_a[node] = acc
            acc += self.weight[node]
            node = self.parent[node]
        anc_a[None] = acc
        node, acc = b, 0.0
        while node is not None and node not in anc_a:
            acc += self.weight[node]
            node = self.parent[node]
        return acc + anc_a[node]

    def subtree_masses(self, mu: Measure) -> dict[TreeNode, float]:
        masses: dict[TreeNode, float] = {}
        for i, w in mu.weights:
            node = self.leaf_of[i]
            while node is not None:
                masses[node] = masses.get(node, 0.0) + w
                node = self.parent[node]
        return masses


def wasserstein_tree(tree: CylinderTree, a: Measure, b: Measure) -> float:
    """Closed-form W1 on the tree: sum over edges of weight times the
    absolute subtree mass difference."""
    ma = tree.subtree_masses(a)
    mb = tree.subtree_masses(b)
    total = 0.0
    for node in set(ma) | set(mb):
        total += tree.weight[node] * abs(ma.get(node, 0.0) - mb.get(node, 0.0))
    return total


def wasserstein_lp(g: TruncatedGroupoid, a: Measure, b: Measure) -> float:
    """W1 by solving the transport linear program on the support cylinders."""
    support = sorted(set(dict(a.weights)) | set(dict(b.weights)))
    n = len(support)
    if n > LP_SUPPORT_CAP:
        raise TransportError(
            f"LP oracle capped at {LP_SUPPORT_CAP} cylinders, got {n}"
        )
    Dm = g.path_distance_matrix()
    cost = Dm[np.ix_(support, support)].ravel()
    wa = np.array([dict(a.weights).get(i, 0.0) for i in support])
    wb = np.array([dict(b.weights).get(i, 0.0) for i in support])
    A_eq = np.zeros((2 * n, n * n))
    for r in range(n):
        A_eq[r, r * n : (r + 1) * n] = 1.0
        A_eq[n + r, r::n] = 1.0
    res = linprog(
        cost,
        A_eq=A_eq,
        b_eq=np.concatenate([wa, wb]),
        bounds=(0, None),
        method="highs",
    )
    if not res.success:
        raise TransportError(f"transport LP failed: {res.message}")
    return float(res.fun)


def _kantorovich_potential(g: TruncatedGroupoid, a: Measure, b: Measure) -> np.ndarray:
    """Optimal dual potential on the support, extended 1-Lipschitz to all
    cylinders by the distance-infimum formula."""
    support = sorted(set(dict(a.weights)) | set(dict(b.weights)))
    n = len(support)
    Dm = g.path_distance_matrix()
    coef = np.array(
        [dict(b.weights).get(i, 0.0) - dict(a.weights).get(i, 0.0) for i in support]
    )
    rows, rhs = [], []
    for i in range(n):
        for j in range(n):
            if i != j:
                row = np.zeros(n)
                row[i], row[j] = 1.0, -1.0
                rows.append(row)
                rhs.append(Dm[support[i], support[j]])
    res = linprog(
        coef,
        A_ub=np.array(rows),
        b_ub=np.array(rhs),
        bounds=(-1.0, 1.0),
        method="highs",
    )
    if not res.success:
        raise TransportError(f"dual LP failed: {res.message}")
    u_support = res.x
    full = np.empty(len(g.paths))
    for i in range(len(g.paths)):
        full[i] = min(
            u_support[j] + Dm[i, support[j]] for j in range(n)
        )
    return full


def mk_lower_bound(
    g: TruncatedGroupoid,
    strata: Stratification,
    n: int,
    a: Measure,
    b: Measure,
    iterations: int = 50,
    seed: int = 0,
    step: float = 0.1,
) -> float:
    """Transport distance from below via seminorm-bounded kernels.

    Maximizes |state_a(f) - state_b(f)| over Hermitian kernels of total
    seminorm at most 1.  The optimal Kantorovich potential seeds the search
    (projected onto the unit ball after an exact feasibility check), and
    projected subgradient ascent polishes it; only feasible iterates are
    scored, so the result is a true lower bound.
    """

    def score(f: Kernel) -> float:
        L = max(lipschitz_seminorm(f, strata), commutator_seminorm(f, n))
        if L > 1.0:
            f = Kernel(g, f.level, {k: v / L for k, v in f.entries.items()})
        return abs(state_eval(f, a) - state_eval(f, b))

    u = _kantorovich_potential(g, a, b)
    f = Kernel(g, 0, {(i, i): complex(u[i]) for i in range(len(g.paths))})
    best = score(f)

    grad = {
        (i, i): complex(dict(b.weights).get(i, 0.0) - dict(a.weights).get(i, 0.0))
        for i in range(len(g.paths))
    }
    rng = np.random.default_rng(np.random.Philox(seed))
    cur = {
        (i, i): complex(rng.standard_normal() * 0.1) for i in range(len(g.paths))
    }
    for it in range(iterations):
        cur = {
            k: cur.get(k, 0j) + step / (1 + it) * grad.get(k, 0j)
            for k in set(cur) | set(grad)
        }
        f_it = Kernel(g, 0, dict(cur))
        L = max(lipschitz_seminorm(f_it, strata), commutator_seminorm(f_it, n))
        if L > 1.0:
            cur = {k: v / L for k, v in cur.items()}
            f_it = Kernel(g, 0, dict(cur))
        best = max(best, abs(state_eval(f_it, a) - state_eval(f_it, b)))
    return best
