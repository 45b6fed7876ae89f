"""Truncated path groupoid of a Bratteli diagram.

Enumerates all finite paths down to a resolution depth D, together with the
pair groupoid structure on paths sharing a terminal vertex: divergence level
k, the path-count length function, composition and inversion, length balls,
and the ultrametric on cylinder sets of the unit space.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .bratteli import BratteliDiagram, path_counts


class GroupoidError(ValueError):
    """Invalid groupoid operation: bad resolution, non-composable pair, ..."""


class BallCertificateError(GroupoidError):
    """A length ball cannot be certified complete at this resolution."""


class PathSyntaxError(GroupoidError):
    """Malformed path or element literal."""


@dataclass(frozen=True)
class FinitePath:
    """A path from a source down to the resolution level.

    ``edges[i]`` is the flat outgoing-edge index chosen at level
    ``source[0] + 1 + i`` (edges to lower-numbered target vertices come
    first, multiplicity slots in order).  ``vertices`` lists the vertex at
    each level from the source down, so ``len(vertices) == len(edges) + 1``.
    """

    source: tuple[int, int]
    edges: tuple[int, ...]
    vertices: tuple[int, ...]

    @property
    def depth(self) -> int:
        """Level of the terminal vertex."""
        return self.source[0] + len(self.edges)

    @property
    def terminal(self) -> int:
        return self.vertices[-1]

    def vertex_at(self, level: int) -> int:
        """Vertex the path passes through at ``level`` (source level or deeper)."""
        if not self.source[0] <= level <= self.depth:
            raise GroupoidError(f"path does not reach level {level}")
        return self.vertices[level - self.source[0]]


def format_path(p: FinitePath) -> str:
    """Literal form ``s<level>.<vertex>:<e1>,<e2>,...``."""
    return f"s{p.source[0]}.{p.source[1]}:" + ",".join(str(e) for e in p.edges)


def parse_path(text: str, diagram: BratteliDiagram) -> FinitePath:
    """Parse a path literal and resolve its vertex trail on the diagram."""
    text = text.strip()
    head, sep, tail = text.partition(":")
    if not sep or not head.startswith("s") or "." not in head:
        raise PathSyntaxError(f"bad path literal {text!r}")
    lv_s, _, v_s = head[1:].partition(".")
    try:
        level, vertex = int(lv_s), int(v_s)
    except ValueError:
        raise PathSyntaxError(f"bad path literal {text!r}") from None
    if not (0 <= level <= diagram.num_levels and 0 <= vertex < diagram.vertex_counts[level]):
        raise PathSyntaxError(f"source ({level},{vertex}) out of range")
    edges = []
    if tail:
        try:
            edges = [int(x) for x in tail.split(",")]
        except ValueError:
            raise PathSyntaxError(f"bad edge list in {text!r}") from None
    vertices = [vertex]
    for i, e in enumerate(edges):
        n = level + 1 + i
        if n > diagram.num_levels:
            raise PathSyntaxError(f"path runs past level {diagram.num_levels}")
        row = diagram.matrix(n)[vertices[-1]]
        if not 0 <= e < sum(row):
            raise PathSyntaxError(
                f"edge index {e} out of range at level {n} (out-degree {sum(row)})"
            )
        acc = 0
        for w, mult in enumerate(row):
            if e < acc + mult:
                vertices.append(w)
                break
            acc += mult
    return FinitePath(source=(level, vertex), edges=tuple(edges), vertices=tuple(vertices))


@dataclass(frozen=True)
class ElementClass:
    """An arrow cylinder: a pair of depth-D paths agreeing beyond some level.

    The pair (mu, lam) stands for all point pairs (x, y) with x extending mu,
    y extending lam and x, y identical beyond the resolution.  ``level`` is
    the declared truncation level; ``None`` means the minimal one (the
    divergence level k).
    """

    mu: FinitePath
    lam: FinitePath
    level: int | None = None


def format_element(e: ElementClass, level: int | None = None) -> str:
    m = e.level if level is None else level
    suffix = f"@{m}" if m is not None else ""
    return f"({format_path(e.mu)}|{format_path(e.lam)}){suffix}"


def parse_element(text: str, diagram: BratteliDiagram) -> ElementClass:
    text = text.strip()
    if not text.startswith("("):
        raise PathSyntaxError(f"bad element literal {text!r}")
    body, sep, lv = text[1:].partition(")")
    if not sep:
        raise PathSyntaxError(f"bad element literal {text!r}")
    mu_s, sep2, lam_s = body.partition("|")
    if not sep2:
        raise PathSyntaxError(f"bad element literal {text!r}")
    level = None
    lv = lv.strip()
    if lv:
        if not lv.startswith("@"):
            raise PathSyntaxError(f"bad element literal {text!r}")
        try:
            level = int(lv[1:])
        except ValueError:
            raise PathSyntaxError(f"bad element literal {text!r}") from None
    return ElementClass(
        mu=parse_path(mu_s, diagram), lam=parse_path(lam_s, diagram), level=level
    )


class TruncatedGroupoid:
    """All depth-D paths of a diagram with their pair-groupoid structure.

    Arrows are ordered pairs of paths sharing the level-D terminal vertex;
    such a pair stands for the cylinder of groupoid elements whose legs
    extend the two paths with a common tail.  ``base`` parametrizes the
    ultrametric on the unit space: two points at agreement level c are at
    distance base**c (1 across different sources, 0 when identical).
    """

    def __init__(self, diagram: BratteliDiagram, resolution: int, base: float = 0.5):
        if not 1 <= resolution <= diagram.num_levels:
            raise GroupoidError(
                f"resolution must be in 1..{diagram.num_levels}, got {resolution}"
            )
        if not 0.0 < base < 1.0:
            raise GroupoidError(f"ultrametric base must be in (0,1), got {base}")
        self.diagram = diagram
        self.resolution = resolution
        self.base = float(base)
        self.table = path_counts(diagram)
        self.paths: tuple[FinitePath, ...] = tuple(self._enumerate())
        self._index = {p: i for i, p in enumerate(self.paths)}
        self._sig, self._source_id = self._signatures()
        self._terminal = np.array([p.terminal for p in self.paths], dtype=np.int64)
        self._groups: dict[int, np.ndarray] = {}
        for v in range(diagram.vertex_counts[resolution]):
            idx = np.flatnonzero(self._terminal == v)
            if idx.size:
                self._groups[v] = idx
        self._kmat: np.ndarray | None = None
        self._dmat: np.ndarray | None = None
        self._classes: dict[int, tuple[np.ndarray, ...]] = {}
        self._class_of: dict[int, np.ndarray] = {}

    # -- construction -----------------------------------------------------

    def _enumerate(self):
        d, D = self.diagram, self.resolution
        for level, vertex in sorted(d.sources):
            if level > D:
                continue
            stack = [((vertex,), ())]
            while stack:
                vertices, edges = stack.pop()
                n = level + len(edges)
                if n == D:
                    yield FinitePath((level, vertex), edges, vertices)
                    continue
                row = d.matrix(n + 1)[vertices[-1]]
                flat = 0
                # Push in reverse so pops come out in ascending edge order.
                branch = []
                for w, mult in enumerate(row):
                    for _ in range(mult):
                        branch.append((vertices + (w,), edges + (flat,)))
                        flat += 1
                stack.extend(reversed(branch))

    def _signatures(self):
        """Per-path edge identities for vectorized comparisons.

        ``sig[p, n-1]`` identifies the edge path p uses at level n (source
        vertex folded in), or -1 when the path starts at or below level n.
        """
        d, D = self.diagram, self.resolution
        width = max(
            (d.vertex_counts[n - 1] * max(max(sum(r) for r in d.matrix(n)), 1))
            for n in range(1, D + 1)
        )
        sig = np.full((len(self.paths), D), -1, dtype=np.int64)
        src_ids = {s: i for i, s in enumerate(sorted(d.sources))}
        source_id = np.empty(len(self.paths), dtype=np.int64)
        for i, p in enumerate(self.paths):
            source_id[i] = src_ids[p.source]
            lv = p.source[0]
            for j, e in enumerate(p.edges):
                prev = p.vertices[j]
                sig[i, lv + j] = prev * width + e
        return sig, source_id

    # -- bookkeeping ------------------------------------------------------

    def index_of(self, path: FinitePath) -> int:
        try:
            return self._index[path]
        except KeyError:
            raise GroupoidError(f"path {format_path(path)} not at resolution "
                                f"{self.resolution} of this diagram") from None

    def terminal_groups(self) -> dict[int, np.ndarray]:
        """Path indices grouped by level-D terminal vertex."""
        return self._groups

    def k_matrix(self) -> np.ndarray:
        """Pairwise divergence levels; -1 for non-composable pairs.

        Entry (i, j) is the largest level where the two paths disagree
        (0 when identical), valid only when they share a terminal vertex.
        """
        if self._kmat is None:
            P, D = len(self.paths), self.resolution
            K = np.full((P, P), -1, dtype=np.int32)
            levels = np.arange(1, D + 1, dtype=np.int32)
            for idx in self._groups.values():
                s = self._sig[idx]
                neq = s[:, None, :] != s[None, :, :]
                K[np.ix_(idx, idx)] = (neq * levels).max(axis=2)
            self._kmat = K
        return self._kmat

    def path_distance_matrix(self) -> np.ndarray:
        """Ultrametric distances between all depth-D cylinders."""
        if self._dmat is None:
            ext = np.concatenate([self._source_id[:, None], self._sig], axis=1)
            neq = ext[:, None, :] != ext[None, :, :]
            any_diff = neq.any(axis=2)
            first = neq.argmax(axis=2)
            c = np.maximum(first - 1, 0)
            self._dmat = np.where(any_diff, self.base ** c.astype(float), 0.0)
        return self._dmat

    def tail_classes(self, m: int) -> tuple[np.ndarray, ...]:
        """Partition of paths by identical edges at levels above m.

        Paths in one class share their terminal vertex; distinct classes
        never carry arrows of the level-m truncation.
        """
        if not 0 <= m <= self.resolution:
            raise GroupoidError(f"truncation level must be in 0..{self.resolution}")
        if m not in self._classes:
            buckets: dict[bytes, list[int]] = {}
            for i in range(len(self.paths)):
                key = self._terminal[i].tobytes() + self._sig[i, m:].tobytes()
                buckets.setdefault(key, []).append(i)
            classes = tuple(
                np.array(sorted(v), dtype=np.int64)
                for v in sorted(buckets.values(), key=lambda v: v[0])
            )
            self._classes[m] = classes
            owner = np.empty(len(self.paths), dtype=np.int64)
            for ci, arr in enumerate(classes):
                owner[arr] = ci
            self._class_of[m] = owner
        return self._classes[m]

    def class_of(self, i: int, m: int) -> np.ndarray:
        """Tail class (path indices) containing path ``i`` at level m."""
        classes = self.tail_classes(m)
        return classes[self._class_of[m][i]]

    # -- arrow structure --------------------------------------------------

    def k_index(self, i: int, j: int) -> int:
        """Divergence level of two paths by index; error if not composable."""
        k = int(self.k_matrix()[i, j])
        if k < 0:
            raise GroupoidError("paths do not share a terminal vertex")
        return k

    def k_of(self, e: ElementClass) -> int:
        """Smallest truncation level whose groupoid contains the arrow."""
        return self.k_index(self.index_of(e.mu), self.index_of(e.lam))

    def length_of_k(self, k: int) -> int:
        """Length value for divergence level k: 0 for units, else the
        number of source paths reaching level k."""
        return 0 if k == 0 else self.table.ell[k]

    def length_of(self, e: ElementClass) -> int:
        return self.length_of_k(self.k_of(e))

    def compose(self, a: ElementClass, b: ElementClass) -> ElementClass:
        """(x, y)(y, z) = (x, z); the middle legs must match exactly."""
        if a.lam != b.mu:
            raise GroupoidError("arrows are not composable: range/source mismatch")
        ia, ja = self.index_of(a.mu), self.index_of(a.lam)
        ib = self.index_of(b.lam)
        self.k_index(ia, ja), self.k_index(ja, ib)  # validate composability
        level = None
        if a.level is not None or b.level is not None:
            level = max(
                a.level if a.level is not None else self.k_of(a),
                b.level if b.level is not None else self.k_of(b),
            )
        return ElementClass(mu=a.mu, lam=b.lam, level=level)

    def inverse(self, a: ElementClass) -> ElementClass:
        return ElementClass(mu=a.lam, lam=a.mu, level=a.level)

    # -- balls ------------------------------------------------------------

    def level_of_radius(self, t) -> int:
        """Largest level k >= 1 with ell_k <= t (0 when none)."""
        n = 0
        for k in range(1, self.resolution + 1):
            if self.table.ell[k] <= t:
                n = k
        return n

    def certify_ball(self, t) -> None:
        """Check that no arrow of length <= t lives beyond the resolution.

        Raises unless lengths have already outgrown t at the resolution, or
        no further level of the diagram both stays within t and branches.
        """
        D, N = self.resolution, self.diagram.num_levels
        if self.table.ell[D] > t:
            return
        table = self.table
        for k in range(D + 1, N + 1):
            if table.ell[k] > t:
                break
            mat = self.diagram.matrix(k)
            branching = any(
                sum(mat[w][v] for w in range(len(mat))) >= 2
                for v in range(self.diagram.vertex_counts[k])
            )
            if branching or any(s[0] == k for s in self.diagram.sources):
                raise BallCertificateError(
                    f"ball of radius {t} is not certified complete at resolution {D}: "
                    f"arrows of length <= {t} appear at level {k}"
                )

    def ball_pairs(self, t) -> tuple[np.ndarray, np.ndarray]:
        """Index pairs (mu, lam) of every arrow with length <= t."""
        if t < 0:
            raise GroupoidError("ball radius must be nonnegative")
        self.certify_ball(t)
        n = self.level_of_radius(t)
        mus, lams = [], []
        for cls in self.tail_classes(n):
            ii, jj = np.meshgrid(cls, cls, indexing="ij")
            mus.append(ii.ravel())
            lams.append(jj.ravel())
        return np.concatenate(mus), np.concatenate(lams)

    def ball(self, t) -> set[ElementClass]:
        mus, lams = self.ball_pairs(t)
        return {
            ElementClass(self.paths[i], self.paths[j])
            for i, j in zip(mus.tolist(), lams.tolist())
        }

    # -- metrics ----------------------------------------------------------

    def agreement(self, p: FinitePath, q: FinitePath) -> int:
        """Deepest level through which two distinct paths agree.

        0 when the sources differ; otherwise the last level at or below
        which source and edges coincide.
        """
        if p.source != q.source:
            return 0
        c = p.source[0]
        for a, b in zip(p.edges, q.edges):
            if a != b:
                break
            c += 1
        return c

    def ultra_distance(self, p: FinitePath, q: FinitePath) -> float:
        """Distance between the cylinder sets of two depth-D paths.

        Exact for every pair of points in distinct cylinders; 0 for the same
        cylinder (whose points are within base**D of each other).
        """
        if p == q:
            return 0.0
        return self.base ** self.agreement(p, q)

    def stratum_distance(self, a: ElementClass, b: ElementClass) -> float:
        """Distance between distinct arrows of equal length.

        The larger of the source-side and range-side cylinder distances;
        this is the exact infimum over point representatives of the two
        arrow cylinders, so Lipschitz quotients of cylindrical functions
        computed from it are exact.
        """
        if self.length_of(a) != self.length_of(b):
            raise GroupoidError("stratum distance needs arrows of equal length")
        if a.mu == b.mu and a.lam == b.lam:
            raise GroupoidError("stratum distance needs distinct arrows")
        return max(
            self.ultra_distance(a.mu, b.mu),
            self.ultra_distance(a.lam, b.lam),
        )

    def fiber_count(self, i: int, t) -> int:
        """Number of arrows of length <= t ending at path ``i``."""
        n = self.level_of_radius(t)
        p = self.paths[i]
        if p.source[0] > n:
            return 1
        return self.table.counts[n][p.vertex_at(n)]
