"""Bratteli diagrams: parsing, validation, path counting, source augmentation.

A diagram is a leveled multigraph with vertex sets V_0 .. V_N and one
incidence matrix per level; entry (i, j) of matrix n counts the edges from
vertex i at level n-1 to vertex j at level n.  Sources are the vertices
with no incoming edge; they are where paths begin.
"""

from __future__ import annotations

import re
from dataclasses import dataclass


class DiagramError(ValueError):
    """Invalid diagram structure: bad shapes, dead vertices, bad sources."""


class DiagramSyntaxError(DiagramError):
    """Malformed diagram text; carries the 1-based line number."""

    def __init__(self, message: str, line: int):
        super().__init__(f"line {line}: {message}")
        self.line = line


@dataclass(frozen=True)
class BratteliDiagram:
    """Leveled multigraph with ``num_levels + 1`` vertex sets.

    ``incidence[n-1]`` has shape ``|V_{n-1}| x |V_n|`` and holds edge
    multiplicities.  ``sources`` lists the (level, vertex) pairs with no
    incoming edge; every level-0 vertex is a source.
    """

    vertex_counts: tuple[int, ...]
    incidence: tuple[tuple[tuple[int, ...], ...], ...]
    sources: frozenset[tuple[int, int]]

    @property
    def num_levels(self) -> int:
        return len(self.incidence)

    def matrix(self, n: int) -> tuple[tuple[int, ...], ...]:
        """Incidence matrix between levels n-1 and n (n in 1..num_levels)."""
        return self.incidence[n - 1]

    def column_sum(self, level: int, vertex: int) -> int:
        """Total multiplicity of edges arriving at a vertex (0 at level 0)."""
        if level == 0:
            return 0
        return sum(row[vertex] for row in self.incidence[level - 1])

    def out_degree(self, level: int, vertex: int) -> int:
        """Total multiplicity of edges leaving a vertex (0 at the top level)."""
        if level == self.num_levels:
            return 0
        return sum(self.incidence[level][vertex])


def implicit_sources(
    vertex_counts: tuple[int, ...],
    incidence: tuple[tuple[tuple[int, ...], ...], ...],
) -> frozenset[tuple[int, int]]:
    """Vertices with no incoming edge: all of level 0 plus zero columns."""
    out = {(0, v) for v in range(vertex_counts[0])}
    for n, mat in enumerate(incidence, start=1):
        for v in range(vertex_counts[n]):
            if all(row[v] == 0 for row in mat):
                out.add((n, v))
    return frozenset(out)


def make_diagram(
    vertex_counts,
    incidence,
    sources=None,
) -> BratteliDiagram:
    """Build and validate a diagram.

    ``sources`` may be omitted, in which case the implicit set (level-0
    vertices plus zero-column vertices) is used.  When given it is
    cross-checked against the column sums.
    """
    vc = tuple(int(c) for c in vertex_counts)
    inc = tuple(tuple(tuple(int(x) for x in row) for row in mat) for mat in incidence)
    if len(vc) != len(inc) + 1:
        raise DiagramError(
            f"{len(vc)} vertex counts require {len(vc) - 1} incidence matrices, got {len(inc)}"
        )
    if any(c < 1 for c in vc):
        raise DiagramError("every level needs at least one vertex")
    for n, mat in enumerate(inc, start=1):
        if len(mat) != vc[n - 1] or any(len(row) != vc[n] for row in mat):
            raise DiagramError(
                f"matrix {n} must be {vc[n - 1]}x{vc[n]}"
            )
        for i, row in enumerate(mat):
            if any(x < 0 for x in row):
                raise DiagramError(f"matrix {n}, row {i}: negative multiplicity")
            if sum(row) == 0:
                raise DiagramError(
                    f"vertex {i} at level {n - 1} has no outgoing edge"
                )
    implied = implicit_sources(vc, inc)
    if sources is None:
        src = implied
    else:
        src = frozenset((int(a), int(b)) for a, b in sources)
        for lv, v in src:
            if not (0 <= lv <= len(inc) and 0 <= v < vc[lv]):
                raise DiagramError(f"declared source ({lv},{v}) out of range")
        if src != implied:
            missing = implied - src
            extra = src - implied
            parts = []
            if missing:
                parts.append(f"undeclared sources {sorted(missing)}")
            if extra:
                parts.append(f"declared sources with incoming edges {sorted(extra)}")
            raise DiagramError("; ".join(parts))
    return BratteliDiagram(vertex_counts=vc, incidence=inc, sources=src)


_MATRIX_RE = re.compile(r"matrix\s+(\d+)\s*:\s*(.*)$")


def _parse_matrix_literal(text: str, lineno: int):
    """Parse a nested list literal like [[1,2],[0,1]] into row tuples."""
    text = text.strip()
    if not (text.startswith("[[") and text.endswith("]]")):
        raise DiagramSyntaxError("matrix must look like [[...],[...]]", lineno)
    body = text[2:-2]
    rows = re.split(r"\]\s*,\s*\[", body)
    out = []
    for row in rows:
        row = row.strip()
        if not row:
            raise DiagramSyntaxError("empty matrix row", lineno)
        try:
            out.append(tuple(int(x) for x in row.split(",")))
        except ValueError:
            raise DiagramSyntaxError(f"bad matrix entry in row [{row}]", lineno) from None
    return tuple(out)


def parse_diagram(text: str) -> BratteliDiagram:
    """Parse the line-oriented diagram format.

    Expected layout (comments start with '#', blank lines are skipped)::

        bratteli v1
        levels 3
        sizes 1 2 2 2
        matrix 1: [[1,1]]
        matrix 2: [[1,1],[1,1]]
        matrix 3: [[1,1],[1,1]]
        sources: (0,0)

    The ``sources:`` line is optional; when absent the implicit set is used.
    """
    lines = []
    for i, raw in enumerate(text.splitlines(), start=1):
        stripped = raw.split("#", 1)[0].strip()
        if stripped:
            lines.append((i, stripped))
    if not lines:
        raise DiagramSyntaxError("empty input", 1)
    pos = 0

    lineno, header = lines[pos]
    if header != "bratteli v1":
        raise DiagramSyntaxError("expected header 'bratteli v1'", lineno)
    pos += 1

    if pos >= len(lines):
        raise DiagramSyntaxError("missing 'levels' line", lineno)
    lineno, line = lines[pos]
    m = re.fullmatch(r"levels\s+(\d+)", line)
    if not m:
        raise DiagramSyntaxError("expected 'levels N'", lineno)
    num_levels = int(m.group(1))
    if num_levels < 1:
        raise DiagramSyntaxError("need at least one level", lineno)
    pos += 1

    if pos >= len(lines):
        raise DiagramSyntaxError("missing 'sizes' line", lineno)
    lineno, line = lines[pos]
    m = re.fullmatch(r"sizes\s+([\d\s]+)", line)
    if not m:
        raise DiagramSyntaxError("expected 'sizes n0 n1 ...'", lineno)
    sizes = tuple(int(x) for x in m.group(1).split())
    if len(sizes) != num_levels + 1:
        raise DiagramSyntaxError(
            f"expected {num_levels + 1} sizes, got {len(sizes)}", lineno
        )
    pos += 1

    matrices = []
    for n in range(1, num_levels + 1):
        if pos >= len(lines):
            raise DiagramSyntaxError(f"missing 'matrix {n}'", lineno)
        lineno, line = lines[pos]
        m = _MATRIX_RE.fullmatch(line)
        if not m:
            raise DiagramSyntaxError(f"expected 'matrix {n}: [[...]]'", lineno)
        if int(m.group(1)) != n:
            raise DiagramSyntaxError(
                f"matrices must appear in order; expected matrix {n}", lineno
            )
        matrices.append(_parse_matrix_literal(m.group(2), lineno))
        pos += 1

    sources = None
    if pos < len(lines):
        lineno, line = lines[pos]
        m = re.fullmatch(r"sources\s*:\s*(.*)", line)
        if not m:
            raise DiagramSyntaxError("unexpected trailing line", lineno)
        entries = re.findall(r"\(\s*(\d+)\s*,\s*(\d+)\s*\)", m.group(1))
        if not entries:
            raise DiagramSyntaxError("expected '(level,vertex)' pairs", lineno)
        sources = [(int(a), int(b)) for a, b in entries]
        pos += 1
    if pos < len(lines):
        raise DiagramSyntaxError("unexpected trailing line", lines[pos][0])

    try:
        return make_diagram(sizes, matrices, sources)
    except DiagramSyntaxError:
        raise
    except DiagramError as exc:
        raise DiagramError(str(exc)) from None


def load_diagram(path: str) -> BratteliDiagram:
    with open(path, "r", encoding="utf-8") as fh:
        return parse_diagram(fh.read())


@dataclass(frozen=True)
class PathCountTable:
    """Exact path counts from the sources.

    ``counts[k][v]`` is the number of finite paths from any source to
    vertex v at level k (a source at level k contributes its own empty
    path).  ``ell[k]`` is the level total; it is nondecreasing in k.
    Counts are arbitrary-precision integers.
    """

    counts: tuple[tuple[int, ...], ...]
    ell: tuple[int, ...]


def path_counts(diagram: BratteliDiagram) -> PathCountTable:
    """Count paths from the sources to every vertex, level by level."""
    levels = [
        tuple(1 for _ in range(diagram.vertex_counts[0]))
    ]
    for n in range(1, diagram.num_levels + 1):
        mat = diagram.matrix(n)
        prev = levels[-1]
        row = []
        for v in range(diagram.vertex_counts[n]):
            total = sum(prev[w] * mat[w][v] for w in range(len(prev)))
            if (n, v) in diagram.sources:
                total += 1
            row.append(total)
        levels.append(tuple(row))
    counts = tuple(levels)
    return PathCountTable(counts=counts, ell=tuple(sum(row) for row in counts))


def augment(diagram: BratteliDiagram) -> BratteliDiagram:
    """Rebase the diagram on a single ghost source.

    A new vertex is prepended one level below level 0 and connected to every
    source through a chain of single-edge vertices, so the result has exactly
    one source and, beyond the deepest original source level, the same level
    totals as the original diagram.  Original vertices keep their indices;
    chain vertices are appended after them in sorted source order.
    """
    srcs = sorted(diagram.sources)
    old_vc = diagram.vertex_counts
    old_n = diagram.num_levels

    def chains_at(old_level: int):
        """Sources whose connecting chain passes through this old level."""
        return [s for s in srcs if s[0] > old_level]

    new_vc = [1]
    for old_level in range(old_n + 1):
        new_vc.append(old_vc[old_level] + len(chains_at(old_level)))

    def slot(old_level: int, source) -> int:
        """New index of the chain vertex for ``source`` at an old level."""
        passing = chains_at(old_level)
        return old_vc[old_level] + passing.index(source)

    matrices = []
    # Ghost level to old level 0: one edge per source, either directly to a
    # level-0 source vertex or into the head of its chain.
    row = [0] * new_vc[1]
    for s in srcs:
        lv, v = s
        row[v if lv == 0 else slot(0, s)] += 1
    matrices.append((tuple(row),))

    for old_level in range(1, old_n + 1):
        old_mat = diagram.matrix(old_level)
        rows = []
        for v in range(old_vc[old_level - 1]):
            r = [0] * new_vc[old_level + 1]
            for w in range(old_vc[old_level]):
                r[w] = old_mat[v][w]
            rows.append(r)
        for s in chains_at(old_level - 1):
            r = [0] * new_vc[old_level + 1]
            lv, v = s
            r[v if lv == old_level else slot(old_level, s)] = 1
            rows.append(r)
        matrices.append(tuple(tuple(r) for r in rows))

    return make_diagram(tuple(new_vc), tuple(matrices))


def car_diagram(levels: int) -> BratteliDiagram:
    """Binary-shift diagram: one vertex per level, two parallel edges."""
    return make_diagram(
        (1,) * (levels + 1),
        (((2,),),) * levels,
    )


def stationary_diagram(matrix, levels: int, top_size: int | None = None) -> BratteliDiagram:
    """Diagram repeating one square incidence matrix at every level."""
    mat = tuple(tuple(int(x) for x in row) for row in matrix)
    size = len(mat)
    if any(len(row) != size for row in mat):
        raise DiagramError("stationary diagram needs a square matrix")
    del top_size
    return make_diagram((size,) * (levels + 1), (mat,) * levels)
