"""Convolution *-algebra of kernels on a truncated groupoid.

Kernels are finitely supported functions on arrows (pairs of depth-D paths
sharing a terminal vertex).  All norms are computed blockwise: restricted to
a tail class, a kernel acts on the fiber over each path in the class as an
ordinary matrix, so convolution is block matrix multiplication and the
operator norm is the largest block spectral norm.
"""

from __future__ import annotations

import json
import warnings
from dataclasses import dataclass, field

import numpy as np

from .groupoid import (
    ElementClass,
    GroupoidError,
    TruncatedGroupoid,
    format_path,
    parse_path,
)


class KernelError(ValueError):
    """Invalid kernel data: support violation, groupoid mismatch, ..."""


class KernelFormatError(KernelError):
    """Malformed kernel or measure JSON."""


class SpectralConvergenceError(RuntimeError):
    """Power iteration failed to converge within the iteration cap."""


@dataclass
class Kernel:
    """Finitely supported kernel at a declared truncation level.

    ``entries`` maps path-index pairs (mu, lam) to complex values; every
    keyed pair must be an arrow of the level-``level`` truncation, i.e.
    its divergence level is at most ``level``.
    """

    groupoid: TruncatedGroupoid
    level: int
    entries: dict[tuple[int, int], complex] = field(default_factory=dict)

    def __post_init__(self):
        if not 0 <= self.level <= self.groupoid.resolution:
            raise KernelError(
                f"support level must be in 0..{self.groupoid.resolution}"
            )
        K = self.groupoid.k_matrix()
        for (i, j) in self.entries:
            k = K[i, j]
            if k < 0:
                raise KernelError(
                    "kernel keyed on a non-composable path pair"
                )
            if k > self.level:
                raise KernelError(
                    f"entry at divergence level {k} exceeds support level {self.level}"
                )

    def value(self, i: int, j: int) -> complex:
        return self.entries.get((i, j), 0j)

    def value_at(self, e: ElementClass) -> complex:
        g = self.groupoid
        return self.value(g.index_of(e.mu), g.index_of(e.lam))


def kernel_from_classes(
    g: TruncatedGroupoid, level: int, values: dict[ElementClass, complex]
) -> Kernel:
    entries = {}
    for e, v in values.items():
        key = (g.index_of(e.mu), g.index_of(e.lam))
        if key in entries and entries[key] != complex(v):
            raise KernelError(f"conflicting values for arrow {key}")
        entries[key] = complex(v)
    return Kernel(groupoid=g, level=level, entries=entries)


def unit_kernel(g: TruncatedGroupoid) -> Kernel:
    """Multiplicative unit: 1 on every unit arrow."""
    return Kernel(g, 0, {(i, i): 1 + 0j for i in range(len(g.paths))})


def matrix_unit(g: TruncatedGroupoid, e: ElementClass) -> Kernel:
    i, j = g.index_of(e.mu), g.index_of(e.lam)
    return Kernel(g, g.k_index(i, j), {(i, j): 1 + 0j})


def _check_same(f: Kernel, h: Kernel) -> TruncatedGroupoid:
    if f.groupoid is not h.groupoid:
        raise KernelError("kernels live on different groupoids")
    return f.groupoid


def add(f: Kernel, h: Kernel) -> Kernel:
    g = _check_same(f, h)
    entries = dict(f.entries)
    for key, v in h.entries.items():
        entries[key] = entries.get(key, 0j) + v
    entries = {k: v for k, v in entries.items() if v != 0}
    return Kernel(g, max(f.level, h.level), entries)


def scale(f: Kernel, c: complex) -> Kernel:
    return Kernel(f.groupoid, f.level, {k: c * v for k, v in f.entries.items()})


def fiber_matrix(f: Kernel, cls: np.ndarray) -> np.ndarray:
    """Matrix of f restricted to one tail class (rows/cols follow ``cls``)."""
    n = len(cls)
    M = np.zeros((n, n), dtype=complex)
    pos = {int(p): a for a, p in enumerate(cls)}
    for (i, j), v in f.entries.items():
        a = pos.get(i)
        b = pos.get(j)
        if a is not None and b is not None:
            M[a, b] = v
    return M


def ell_matrix(g: TruncatedGroupoid, cls: np.ndarray) -> np.ndarray:
    """Pairwise length values within one tail class, as floats."""
    K = g.k_matrix()[np.ix_(cls, cls)]
    ell = np.array([0] + [float(x) for x in g.table.ell[1:]], dtype=float)
    out = ell[K]
    np.fill_diagonal(out, 0.0)
    return out


def convolve(f: Kernel, h: Kernel) -> Kernel:
    """Groupoid convolution: blockwise matrix product over tail classes."""
    g = _check_same(f, h)
    level = max(f.level, h.level)
    entries: dict[tuple[int, int], complex] = {}
    for cls in g.tail_classes(level):
        A = fiber_matrix(f, cls)
        B = fiber_matrix(h, cls)
        if not A.any() or not B.any():
            continue
        C = A @ B
        nz = np.argwhere(C != 0)
        for a, b in nz:
            entries[(int(cls[a]), int(cls[b]))] = complex(C[a, b])
    return Kernel(g, level, entries)


def involute(f: Kernel) -> Kernel:
    """Adjoint: f*(x, y) = conj(f(y, x))."""
    return Kernel(
        f.groupoid,
        f.level,
        {(j, i): v.conjugate() for (i, j), v in f.entries.items()},
    )


def i_norm(f: Kernel) -> float:
    """Largest fiber l1 mass of f and of f*."""
    g = f.groupoid
    best = 0.0
    for cls in g.tail_classes(f.level):
        M = np.abs(fiber_matrix(f, cls))
        if M.any():
            best = max(best, float(M.sum(axis=0).max()), float(M.sum(axis=1).max()))
    return best


def power_iteration_norm(
    M: np.ndarray,
    tol: float = 1e-10,
    max_iter: int = 100_000,
    seed: int = 0,
) -> float:
    """Spectral norm by power iteration on M*M with a hard iteration cap."""
    n = M.shape[0]
    rng = np.random.default_rng(seed)
    v = rng.standard_normal(n) + 1j * rng.standard_normal(n)
    v /= np.linalg.norm(v)
    Mh = M.conj().T
    last = 0.0
    for _ in range(max_iter):
        w = Mh @ (M @ v)
        norm = np.linalg.norm(w)
        if norm == 0:
            return 0.0
        v = w / norm
        cur = float(np.sqrt(norm))
        if abs(cur - last) <= tol * max(1.0, cur):
            return cur
        last = cur
    raise SpectralConvergenceError(
        f"power iteration did not converge within {max_iter} iterations"
    )


_DENSE_CUTOFF = 64


def spectral_norm(M: np.ndarray) -> float:
    """Largest singular value; dense for small blocks, iterative above."""
    if M.size == 0 or not M.any():
        return 0.0
    if M.shape[0] <= _DENSE_CUTOFF:
        return float(np.linalg.norm(M, 2))
    try:
        return power_iteration_norm(M)
    except SpectralConvergenceError:
        warnings.warn("power iteration stalled; falling back to dense SVD")
        return float(np.linalg.norm(M, 2))


def _canonical_sign(M: np.ndarray) -> np.ndarray:
    """Flip the global sign so M and -M map to the same matrix.

    Also forces C-contiguous layout: LAPACK rounds differently on
    transposed views, which would break bitwise involution invariance.
    """
    M = np.ascontiguousarray(M)
    flat = M.ravel()
    nz = np.flatnonzero(flat)
    if nz.size:
        z = flat[nz[0]]
        if z.real < 0 or (z.real == 0 and z.imag < 0):
            M = -M
    # Adding +0.0 turns every -0.0 into +0.0 so the byte image, and hence
    # the factorization, is identical for a matrix and its flipped adjoint.
    return M + (0.0 + 0.0j)


def star_symmetric_spectral(M: np.ndarray) -> float:
    """Spectral norm computed identically for a matrix and its adjoint.

    Taking the max over both orientations (after sign canonicalization)
    makes the result bitwise invariant under the kernel involution.
    """
    return max(
        spectral_norm(_canonical_sign(M)),
        spectral_norm(_canonical_sign(M.conj().T)),
    )


def op_norm(f: Kernel) -> float:
    """Reduced operator norm: largest tail-class block spectral norm."""
    best = 0.0
    for cls in f.groupoid.tail_classes(f.level):
        M = fiber_matrix(f, cls)
        if M.any():
            best = max(best, star_symmetric_spectral(M))
    return best


def two_s_norm(f: Kernel, s: float) -> float:
    """Largest weighted fiber l2 mass, weight (1 + length)**(2s), of f and f*."""
    g = f.groupoid
    best = 0.0
    for cls in g.tail_classes(f.level):
        M = np.abs(fiber_matrix(f, cls)) ** 2
        if not M.any():
            continue
        W = (1.0 + ell_matrix(g, cls)) ** (2.0 * s)
        weighted = M * W
        best = max(
            best,
            float(np.sqrt(weighted.sum(axis=0).max())),
            float(np.sqrt(weighted.sum(axis=1).max())),
        )
    return best


def cond_expect(f: Kernel) -> Kernel:
    """Restriction to the unit space (diagonal entries)."""
    return Kernel(
        f.groupoid, 0, {k: v for k, v in f.entries.items() if k[0] == k[1]}
    )


@dataclass(frozen=True)
class Measure:
    """Probability weights on depth-D cylinders, keyed by path index."""

    weights: tuple[tuple[int, float], ...]

    def as_dict(self) -> dict[int, float]:
        return dict(self.weights)


def make_measure(g: TruncatedGroupoid, weights: dict[int, float], tol: float = 1e-12) -> Measure:
    total = 0.0
    for i, w in weights.items():
        if not 0 <= i < len(g.paths):
            raise KernelError(f"measure keyed on unknown path index {i}")
        if w < -tol:
            raise KernelError(f"negative weight {w}")
        total += w
    if abs(total - 1.0) > tol:
        raise KernelError(f"weights sum to {total}, expected 1")
    items = tuple(sorted((i, float(w)) for i, w in weights.items() if w != 0))
    return Measure(weights=items)


def uniform_measure(g: TruncatedGroupoid) -> Measure:
    n = len(g.paths)
    return Measure(weights=tuple((i, 1.0 / n) for i in range(n)))


def state_eval(f: Kernel, mu: Measure) -> complex:
    """State induced by a unit-space measure: weighted diagonal sum."""
    return sum(w * f.value(i, i) for i, w in mu.weights)


def random_kernel(
    g: TruncatedGroupoid,
    level: int,
    rng: np.random.Generator,
    hermitian: bool = False,
) -> Kernel:
    """Kernel with iid unit-disc values on every level-``level`` arrow."""
    entries: dict[tuple[int, int], complex] = {}
    for cls in g.tail_classes(level):
        n = len(cls)
        r = np.sqrt(rng.random((n, n)))
        theta = rng.random((n, n)) * 2 * np.pi
        M = r * np.exp(1j * theta)
        if hermitian:
            M = (M + M.conj().T) / 2
        for a in range(n):
            for b in range(n):
                entries[(int(cls[a]), int(cls[b]))] = complex(M[a, b])
    return Kernel(g, level, entries)


def growth_profile(g: TruncatedGroupoid) -> list[tuple[int, int]]:
    """Largest fiber ball count for each radius in the image of the length.

    Row (t, c): every fiber meets the closed length-t ball in at most c
    arrows, and c is attained; the linear growth bound gives c <= max(t, 1).
    """
    out = [(0, 1)]
    for k in range(1, g.resolution + 1):
        t = g.table.ell[k]
        c = max(g.table.counts[k])
        if out and out[-1][0] == t:
            out[-1] = (t, max(out[-1][1], c))
        else:
            out.append((t, c))
    return out


def rd_ratio(
    g: TruncatedGroupoid,
    s: float,
    samples: int,
    seed: int,
    level: int | None = None,
) -> float:
    """Empirical sup of op_norm / two_s_norm over random kernels.

    A finite-sample lower estimate of the best constant in the polynomial
    growth comparison; reported as empirical only.
    """
    if level is None:
        level = g.resolution
    rng = np.random.default_rng(np.random.Philox(seed))
    best = 0.0
    for _ in range(samples):
        f = random_kernel(g, level, rng)
        denom = two_s_norm(f, s)
        if denom > 0:
            best = max(best, op_norm(f) / denom)
    return best


# -- serialization --------------------------------------------------------


def kernel_to_json(f: Kernel) -> str:
    g = f.groupoid
    rows = []
    for (i, j), v in f.entries.items():
        rows.append(
            {
                "mu": format_path(g.paths[i]),
                "lambda": format_path(g.paths[j]),
                "re": v.real,
                "im": v.imag,
            }
        )
    rows.sort(key=lambda r: (r["mu"], r["lambda"]))
    doc = {"resolution": g.resolution, "level": f.level, "entries": rows}
    return json.dumps(doc, sort_keys=True, indent=2)


def kernel_from_json(text: str, g: TruncatedGroupoid) -> Kernel:
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        raise KernelFormatError(f"bad kernel JSON: {exc}") from None
    for key in ("resolution", "level", "entries"):
        if key not in doc:
            raise KernelFormatError(f"kernel JSON missing {key!r}")
    if doc["resolution"] != g.resolution:
        raise KernelFormatError(
            f"kernel resolution {doc['resolution']} != groupoid resolution {g.resolution}"
        )
    entries: dict[tuple[int, int], complex] = {}
    for row in doc["entries"]:
        try:
            mu = parse_path(row["mu"], g.diagram)
            lam = parse_path(row["lambda"], g.diagram)
            v = complex(float(row["re"]), float(row.get("im", 0.0)))
        except (KeyError, TypeError, ValueError) as exc:
            raise KernelFormatError(f"bad kernel entry {row!r}: {exc}") from None
        entries[(g.index_of(mu), g.index_of(lam))] = v
    try:
        return Kernel(g, int(doc["level"]), entries)
    except (KernelError, GroupoidError) as exc:
        raise KernelFormatError(str(exc)) from None


def measure_to_json(mu: Measure, g: TruncatedGroupoid) -> str:
    rows = [
        {"path": format_path(g.paths[i]), "w": w} for i, w in mu.weights
    ]
    rows.sort(key=lambda r: r["path"])
    return json.dumps({"weights": rows}, sort_keys=True, indent=2)


def measure_from_json(text: str, g: TruncatedGroupoid) -> Measure:
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        raise KernelFormatError(f"bad measure JSON: {exc}") from None
    if "weights" not in doc:
        raise KernelFormatError("measure JSON missing 'weights'")
    weights: dict[int, float] = {}
    for row in doc["weights"]:
        try:
            p = parse_path(row["path"], g.diagram)
            w = float(row["w"])
        except (KeyError, TypeError, ValueError) as exc:
            raise KernelFormatError(f"bad measure entry {row!r}: {exc}") from None
        weights[g.index_of(p)] = weights.get(g.index_of(p), 0.0) + w
    try:
        return make_measure(g, weights)
    except KernelError as exc:
        raise KernelFormatError(str(exc)) from None
