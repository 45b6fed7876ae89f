"""Slip-norm seminorms, multipliers, eps-nets and the compactness bound.

The seminorm combines two parts: a Lipschitz seminorm taken stratum by
stratum over arrows of equal length, and a commutator seminorm given by the
fiberwise matrices of the iterated length-commutator.  Truncation
multipliers, unit-ball sampling, finite eps-nets and the quantitative
compactness bound built from path counts complete the toolkit.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .algebra import (
    Kernel,
    KernelError,
    Measure,
    add,
    ell_matrix,
    fiber_matrix,
    i_norm,
    op_norm,
    scale,
    star_symmetric_spectral,
    state_eval,
    unit_kernel,
)
from .bratteli import PathCountTable
from .groupoid import GroupoidError, TruncatedGroupoid


class SeminormError(ValueError):
    """Invalid seminorm computation request."""


class SymbolDomainError(SeminormError):
    """A table symbol has no value on part of the kernel's support."""


class NetSizeError(SeminormError):
    """The requested eps-net exceeds the configured size cap."""


class DegenerateSampleError(SeminormError):
    """Sampling kept drawing kernels with vanishing seminorm."""


# -- stratification -------------------------------------------------------


class Stratification:
    """Arrows of the truncated groupoid partitioned by length value.

    Stratum 0 holds the unit arrows; stratum t > 0 holds every arrow pair
    whose length equals t.  Distance matrices between arrows of one stratum
    are cached on first use.
    """

    def __init__(self, groupoid: TruncatedGroupoid):
        self.groupoid = groupoid
        K = groupoid.k_matrix()
        mus, lams = np.nonzero(K >= 0)
        kvals = K[mus, lams]
        ell = np.array([0] + list(groupoid.table.ell[1:]), dtype=object)
        self._strata: dict[int, tuple[np.ndarray, np.ndarray]] = {}
        for value in sorted(set(int(ell[k]) for k in kvals)):
            mask = np.array([int(ell[k]) == value for k in kvals])
            self._strata[value] = (mus[mask], lams[mask])
        self._dmats: dict[int, np.ndarray] = {}

    def values(self) -> list[int]:
        return sorted(self._strata)

    def stratum(self, value: int) -> tuple[np.ndarray, np.ndarray]:
        try:
            return self._strata[value]
        except KeyError:
            raise SeminormError(f"no stratum of length {value}") from None

    def dmat(self, value: int) -> np.ndarray:
        """Pairwise arrow distances within one stratum (0 on the diagonal)."""
        if value not in self._dmats:
            mus, lams = self.stratum(value)
            Dm = self.groupoid.path_distance_matrix()
            self._dmats[value] = np.maximum(
                Dm[np.ix_(mus, mus)], Dm[np.ix_(lams, lams)]
            )
        return self._dmats[value]

    def stratum_values_of(self, f: Kernel) -> dict[int, np.ndarray]:
        """Kernel values read off along each stratum it can meet."""
        cap = self.groupoid.length_of_k(f.level) if f.level else 0
        out = {}
        for value in self.values():
            if value > cap:
                continue
            mus, lams = self.stratum(value)
            out[value] = np.array(
                [f.entries.get((int(i), int(j)), 0j) for i, j in zip(mus, lams)]
            )
        return out


def lipschitz_seminorm(f: Kernel, strata: Stratification) -> float:
    """Largest difference quotient of f over each length stratum.

    Exact for kernels at the stratification's resolution: the stratum
    distance is the exact infimum over point representatives, so the sup
    over groupoid elements is attained on arrow cylinders.
    """
    if strata.groupoid is not f.groupoid:
        raise SeminormError("stratification built on a different groupoid")
    best = 0.0
    for value, vals in strata.stratum_values_of(f).items():
        if not np.any(vals):
            continue
        dm = strata.dmat(value)
        diff = np.abs(vals[:, None] - vals[None, :])
        with np.errstate(divide="ignore", invalid="ignore"):
            ratio = np.where(dm > 0, diff / np.where(dm > 0, dm, 1.0), 0.0)
        best = max(best, float(ratio.max()))
    return best


# -- commutator seminorm --------------------------------------------------


class RoeKernel:
    """Fiberwise matrices of the n-fold length-commutator of a kernel.

    For each tail class C at the kernel's level and each representative
    path lam in C, the matrix has entries
    (len(a, lam) - len(b, lam))**n * f(a, b) for a, b in C.  For n >= 1 the
    matrices over representatives outside C vanish identically, so these
    blocks carry the whole operator.
    """

    def __init__(self, kernel: Kernel, order: int):
        if order < 0:
            raise SeminormError("commutator order must be nonnegative")
        self.kernel = kernel
        self.order = order
        g = kernel.groupoid
        self.classes = g.tail_classes(kernel.level)
        self._fibers = [fiber_matrix(kernel, cls) for cls in self.classes]
        self._ells = [ell_matrix(g, cls) for cls in self.classes]

    def matrix(self, class_index: int, rep: int) -> np.ndarray:
        """Weighted matrix at one representative (position in the class)."""
        F = self._fibers[class_index]
        w = self._ells[class_index][:, rep]
        return ((w[:, None] - w[None, :]) ** self.order) * F

    def matrices(self):
        for ci, cls in enumerate(self.classes):
            if not self._fibers[ci].any():
                continue
            for rep in range(len(cls)):
                yield ci, rep, self.matrix(ci, rep)

    def norm(self) -> float:
        return max(
            (star_symmetric_spectral(M) for _, _, M in self.matrices()),
            default=0.0,
        )

    def commutator_check(self, tol: float = 1e-12) -> float:
        """Largest deviation from the n-fold matrix commutator
        [Diag(len(., lam)), .] applied to the fiber matrix."""
        worst = 0.0
        for ci, rep, M in self.matrices():
            C = self._fibers[ci]
            w = self._ells[ci][:, rep]
            for _ in range(self.order):
                C = w[:, None] * C - C * w[None, :]
            worst = max(worst, float(np.abs(C - M).max()))
        if worst > tol:
            raise SeminormError(
                f"commutator self-check failed: deviation {worst} > {tol}"
            )
        return worst


def delta_n(f: Kernel, n: int) -> RoeKernel:
    if n < 1:
        raise SeminormError("iterated commutator needs order >= 1")
    return RoeKernel(f, n)


def commutator_seminorm(f: Kernel, n: int) -> float:
    """Operator norm of the n-fold length-commutator."""
    return delta_n(f, n).norm()


@dataclass
class SeminormReport:
    """All seminorm data of one kernel at one stratification."""

    l_lip: float
    l_ell: dict[int, float]
    total: dict[int, float]
    op_norm: float
    i_norm: float
    meta: dict = field(default_factory=dict)

    def as_dict(self) -> dict:
        return {
            "l_lip": self.l_lip,
            "l_ell": {str(k): v for k, v in self.l_ell.items()},
            "total": {str(k): v for k, v in self.total.items()},
            "op_norm": self.op_norm,
            "i_norm": self.i_norm,
            "meta": self.meta,
        }


def total_seminorm(f: Kernel, strata: Stratification, orders=(1,)) -> SeminormReport:
    """Combined slip-norm: max of Lipschitz and commutator parts per order."""
    lip = lipschitz_seminorm(f, strata)
    l_ell = {n: commutator_seminorm(f, n) for n in orders}
    return SeminormReport(
        l_lip=lip,
        l_ell=l_ell,
        total={n: max(lip, v) for n, v in l_ell.items()},
        op_norm=op_norm(f),
        i_norm=i_norm(f),
        meta={
            "resolution": f.groupoid.resolution,
            "level": f.level,
            "base": f.groupoid.base,
        },
    )


# -- multipliers ----------------------------------------------------------


class Symbol:
    """Scalar multiplier constant on arrow cylinders.

    Either rule-based (a function of the divergence level and length of an
    arrow) or an explicit table on index pairs; table symbols raise on
    arrows outside their table.
    """

    def __init__(self, groupoid, rule=None, table=None, name: str = "symbol"):
        if (rule is None) == (table is None):
            raise SeminormError("symbol needs exactly one of rule or table")
        self.groupoid = groupoid
        self._rule = rule
        self._table = table
        self.name = name

    def value(self, i: int, j: int) -> float:
        if self._table is not None:
            try:
                return self._table[(i, j)]
            except KeyError:
                raise SymbolDomainError(
                    f"symbol {self.name!r} undefined on arrow ({i},{j})"
                ) from None
        k = self.groupoid.k_index(i, j)
        return self._rule(k, self.groupoid.length_of_k(k))


def truncation_symbol(g: TruncatedGroupoid, m: int) -> Symbol:
    """Indicator of the level-m truncation subgroupoid."""
    if not 0 <= m <= g.resolution:
        raise SeminormError(f"truncation level must be in 0..{g.resolution}")
    return Symbol(g, rule=lambda k, ell: 1.0 if k <= m else 0.0, name=f"trunc[{m}]")


def plateau(g: TruncatedGroupoid, t) -> Symbol:
    """Plateau cutoff at radius t.

    Because lengths take integer values the usual continuous interpolation
    degenerates to the indicator of the closed length-t ball; its
    continuity coefficient is 1.
    """
    if t < 0:
        raise SeminormError("plateau radius must be nonnegative")
    return Symbol(g, rule=lambda k, ell: 1.0 if ell <= t else 0.0, name=f"plateau[{t}]")


def multiplier_apply(phi: Symbol, f: Kernel) -> Kernel:
    """Pointwise product phi * f; keeps the declared support level."""
    if phi.groupoid is not f.groupoid:
        raise SeminormError("symbol built on a different groupoid")
    entries = {}
    for (i, j), v in f.entries.items():
        w = phi.value(i, j) * v
        if w != 0:
            entries[(i, j)] = w
    return Kernel(f.groupoid, f.level, entries)


def verify_intertwining(phi: Symbol, f: Kernel, n: int, tol: float = 1e-12) -> float:
    """Check delta^n(phi * f) against the symbol-scaled delta^n(f).

    Scaling the commutator matrices entrywise by the symbol must reproduce
    the commutator of the multiplied kernel; returns the largest deviation
    and raises when it exceeds ``tol``.
    """
    left = delta_n(multiplier_apply(phi, f), n)
    right = delta_n(f, n)
    worst = 0.0
    for ci, cls in enumerate(right.classes):
        if not right._fibers[ci].any() and not left._fibers[ci].any():
            continue
        phi_mat = np.array(
            [[phi.value(int(a), int(b)) for b in cls] for a in cls]
        )
        for rep in range(len(cls)):
            dev = np.abs(left.matrix(ci, rep) - phi_mat * right.matrix(ci, rep))
            worst = max(worst, float(dev.max()))
    if worst > tol:
        raise SeminormError(
            f"intertwining deviation {worst} exceeds {tol}"
        )
    return worst


# -- unit-ball sampling ---------------------------------------------------


def sample_ball(
    g: TruncatedGroupoid,
    strata: Stratification,
    n: int,
    t,
    mu: Measure,
    count: int,
    seed: int,
    hermitian: bool = False,
    max_retries: int = 50,
) -> list[Kernel]:
    """Random kernels in the state-normalized seminorm unit ball.

    Each sample is supported in the closed length-t ball, annihilated by the
    state of ``mu`` and scaled to total seminorm exactly 1; draws with
    vanishing seminorm are redrawn.
    """
    g.certify_ball(t)
    level = g.level_of_radius(t)
    rng = np.random.default_rng(np.random.Philox(seed))
    one = unit_kernel(g)
    out = []
    for _ in range(count):
        for attempt in range(max_retries):
            entries: dict[tuple[int, int], complex] = {}
            for cls in g.tail_classes(level):
                m = len(cls)
                r = np.sqrt(rng.random((m, m)))
                theta = rng.random((m, m)) * 2 * np.pi
                M = r * np.exp(1j * theta)
                if hermitian:
                    M = (M + M.conj().T) / 2
                for a in range(m):
                    for b in range(m):
                        entries[(int(cls[a]), int(cls[b]))] = complex(M[a, b])
            f = Kernel(g, level, entries)
            f = add(f, scale(one, -state_eval(f, mu)))
            L = max(lipschitz_seminorm(f, strata), commutator_seminorm(f, n))
            if L > 1e-12:
                out.append(scale(f, 1.0 / L))
                break
        else:
            raise DegenerateSampleError(
                f"drew {max_retries} kernels with vanishing seminorm"
            )
    return out


# -- compactness bound ----------------------------------------------------


@dataclass(frozen=True)
class QghBound:
    """Quantitative tail bound over the truncation level m.

    ``beta`` = certified supremum over fibers of the inverse-square length
    mass beyond level m: partial sum over levels m+1..k_max plus a geometric
    tail majorant.  ``conclusive`` records whether the majorant ratio was
    strictly below 1 (or the tail vanished outright).
    """

    m: int
    k_max: int
    beta_partial: float
    tail_bound: float
    conclusive: bool
    level_max_terms: tuple[float, ...]

    @property
    def beta(self) -> float:
        return self.beta_partial + self.tail_bound


def _level_terms(table: PathCountTable, diagram, k: int):
    """Per-edge fiber increments at level k divided by ell_k**2.

    For a fiber through vertex v at level k-1 and w at level k, the number
    of arrows diverging exactly at level k is counts[k][w] - counts[k-1][v].
    """
    ell2 = float(table.ell[k]) ** 2
    mat = diagram.matrix(k)
    out = {}
    for v in range(len(mat)):
        for w in range(len(mat[v])):
            if mat[v][w] > 0:
                out[(v, w)] = (table.counts[k][w] - table.counts[k - 1][v]) / ell2
    return out


def qgh_bound(g: TruncatedGroupoid, m: int, k_max: int | None = None) -> QghBound:
    """Certified fiber tail mass beyond truncation level m.

    Backward induction over the vertex graph maximizes the partial sum over
    all infinite paths; the geometric majorant extrapolates the per-level
    maxima beyond ``k_max`` (default: every level of the diagram).
    """
    d, table = g.diagram, g.table
    if k_max is None:
        k_max = d.num_levels
    if not m + 1 <= k_max <= d.num_levels:
        raise SeminormError(
            f"need m+1 <= k_max <= {d.num_levels}, got m={m}, k_max={k_max}"
        )
    terms = {k: _level_terms(table, d, k) for k in range(m + 1, k_max + 1)}

    best = {v: 0.0 for v in range(d.vertex_counts[k_max])}
    for k in range(k_max, m, -1):
        prev = {v: 0.0 for v in range(d.vertex_counts[k - 1])}
        for (v, w), term in terms[k].items():
            prev[v] = max(prev[v], term + best[w])
        best = prev

    partial = max(best.values())
    # Fibers through a source deeper than m contribute only from below it.
    for lv, v in d.sources:
        if m < lv <= k_max:
            suffix = {w: 0.0 for w in range(d.vertex_counts[k_max])}
            for k in range(k_max, lv, -1):
                prev = {w: 0.0 for w in range(d.vertex_counts[k - 1])}
                for (a, b), term in terms[k].items():
                    prev[a] = max(prev[a], term + suffix[b])
                suffix = prev
            partial = max(partial, suffix[v])

    level_max = tuple(
        max(terms[k].values(), default=0.0) for k in range(m + 1, k_max + 1)
    )
    last = level_max[-1] if level_max else 0.0
    prior = level_max[-2] if len(level_max) >= 2 else 0.0
    if last == 0.0:
        tail, conclusive = 0.0, True
    elif prior > 0.0 and last < prior:
        r = last / prior
        tail, conclusive = last * r / (1.0 - r), True
    else:
        tail, conclusive = float("inf"), False
    return QghBound(
        m=m,
        k_max=k_max,
        beta_partial=partial,
        tail_bound=tail,
        conclusive=conclusive,
        level_max_terms=level_max,
    )


def tail_truncation_norm(f: Kernel, t) -> float:
    """I-norm of the part of f outside the closed length-t ball.

    Bounded by sqrt(beta at the ball's level) times the order-1 commutator
    seminorm of f.
    """
    g = f.groupoid
    ell = np.array([0] + list(g.table.ell[1:]), dtype=float)
    K = g.k_matrix()
    entries = {
        key: v
        for key, v in f.entries.items()
        if ell[K[key[0], key[1]]] > t
    }
    return i_norm(Kernel(g, f.level, entries))


def approximation_gap(
    g: TruncatedGroupoid,
    strata: Stratification,
    n: int,
    t_support,
    phi: Symbol,
    analytic_m: int,
    samples: int,
    mu: Measure,
    seed: int,
) -> tuple[float, float]:
    """Empirical sup of ||f - phi f||_op over unit-ball samples, with the
    analytic bound sqrt(beta(analytic_m)) it must stay below."""
    bound = qgh_bound(g, analytic_m)
    if not bound.conclusive:
        raise SeminormError("tail majorant inconclusive; deepen the diagram")
    analytic = math.sqrt(bound.beta)
    worst = 0.0
    for f in sample_ball(g, strata, n, t_support, mu, samples, seed):
        diff = add(f, scale(multiplier_apply(phi, f), -1.0))
        worst = max(worst, op_norm(diff))
    return worst, analytic


# -- eps-nets -------------------------------------------------------------


def _greedy_cover(dm: np.ndarray, eps: float) -> tuple[list[int], np.ndarray]:
    """Deterministic farthest-point cover: centers plus cell assignment."""
    n = dm.shape[0]
    centers = [0]
    dist = dm[0].copy()
    while dist.max() > eps:
        nxt = int(dist.argmax())
        centers.append(nxt)
        dist = np.minimum(dist, dm[nxt])
    assign = np.argmin(dm[np.ix_(centers, range(n))], axis=0)
    return centers, assign


@dataclass
class NetStratum:
    value: int
    pairs: tuple[np.ndarray, np.ndarray]
    centers: list[int]
    assign: np.ndarray
    coeff_bound: float


class EpsNet:
    """Finite approximation net for the sampled unit ball.

    Per stratum, a greedy eps-cover and the indicator partition of its
    cells; net points are partition combinations with coefficients on a
    complex grid bounded by the per-stratum value bound (stratum diameter on
    the diagonal, best length constant off it).  ``project`` maps a kernel
    to its nearest net point by reading values at the centers and rounding.
    """

    def __init__(self, groupoid, strata_info, eps, fiber_bound, grid_step):
        self.groupoid = groupoid
        self.strata = strata_info
        self.eps = eps
        self.fiber_bound = fiber_bound
        self.grid_step = grid_step
        self.certified_radius = len(strata_info) * fiber_bound * eps

    @property
    def num_centers(self) -> int:
        return sum(len(s.centers) for s in self.strata)

    @property
    def size(self) -> int:
        total = 1
        for s in self.strata:
            pts = 2 * math.ceil(s.coeff_bound / self.grid_step) + 1
            total *= (pts * pts) ** len(s.centers)
        return total

    def _round(self, z: complex, bound: float) -> complex:
        q = self.grid_step

        def clamp(x):
            return min(max(x, -bound), bound)

        return complex(q * round(clamp(z.real) / q), q * round(clamp(z.imag) / q))

    def project(self, f: Kernel) -> Kernel:
        """Nearest net point: center values spread over their cells."""
        entries: dict[tuple[int, int], complex] = {}
        level = 0
        for s in self.strata:
            mus, lams = s.pairs
            for ci, center in enumerate(s.centers):
                z = self._round(
                    f.entries.get((int(mus[center]), int(lams[center])), 0j),
                    s.coeff_bound,
                )
                if z == 0:
                    continue
                for idx in np.flatnonzero(s.assign == ci):
                    key = (int(mus[idx]), int(lams[idx]))
                    entries[key] = z
                    level = max(level, self.groupoid.k_index(*key))
        return Kernel(self.groupoid, max(level, f.level), entries)

    def kernels(self, cap: int = 200_000) -> list[Kernel]:
        """Materialize the whole net; errors beyond the size cap."""
        if self.size > cap:
            raise NetSizeError(
                f"net has {self.size} points, exceeding the cap {cap}"
            )
        import itertools

        axes = []
        for s in self.strata:
            pts = np.arange(
                -math.ceil(s.coeff_bound / self.grid_step),
                math.ceil(s.coeff_bound / self.grid_step) + 1,
            ) * self.grid_step
            grid = [complex(a, b) for a in pts for b in pts]
            axes.extend([grid] * len(s.centers))
        out = []
        for combo in itertools.product(*axes):
            entries: dict[tuple[int, int], complex] = {}
            pos = 0
            for s in self.strata:
                mus, lams = s.pairs
                for ci in range(len(s.centers)):
                    z = combo[pos]
                    pos += 1
                    if z == 0:
                        continue
                    for idx in np.flatnonzero(s.assign == ci):
                        entries[(int(mus[idx]), int(lams[idx]))] = z
            out.append(Kernel(self.groupoid, self.groupoid.resolution, entries))
        return out


def build_eps_net(
    g: TruncatedGroupoid,
    strata: Stratification,
    n: int,
    t,
    eps: float,
    grid_step: float | None = None,
) -> EpsNet:
    """Finite net covering the sampled unit ball within its certified radius.

    The radius is (number of strata) * (fiber ball bound) * eps; the
    coefficient grid defaults to eps / 10, fine enough that rounding is
    absorbed by the slack of the covering bound.
    """
    if eps <= 0:
        raise SeminormError("eps must be positive")
    g.certify_ball(t)
    if grid_step is None:
        grid_step = eps / 10.0
    Dm = g.path_distance_matrix()
    diam = float(Dm.max())
    values = [v for v in strata.values() if v <= t]
    info = []
    for value in values:
        pairs = strata.stratum(value)
        dm = strata.dmat(value)
        centers, assign = _greedy_cover(dm, eps)
        bound = diam if value == 0 else float(value) ** (-n)
        info.append(
            NetStratum(
                value=value,
                pairs=pairs,
                centers=centers,
                assign=assign,
                coeff_bound=max(bound, grid_step),
            )
        )
    fiber_bound = max(
        (c for tt, c in _growth_rows(g) if tt <= t), default=1
    )
    return EpsNet(g, info, eps, fiber_bound, grid_step)


def _growth_rows(g: TruncatedGroupoid):
    from .algebra import growth_profile

    return growth_profile(g)
