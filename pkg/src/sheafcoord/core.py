"""Cellular sheaves on graphs: data model, coboundary and Laplacian operators,
global sections, and cohomology dimensions.

A cellular sheaf attaches a vector space (a "stalk") to every vertex and edge
of a graph, together with a linear restriction map from each endpoint stalk
into the edge stalk.  The coboundary operator measures the per-edge
disagreement of a vertex assignment; its kernel is the space of global
sections (H0), and the sheaf Laplacian ``delta^T delta`` drives the dynamics
and solvers in the rest of this package.

Orientation convention
----------------------
Every edge fixes ``tail`` = the endpoint listed first at construction and the
orientation never mutates.  The coboundary of ``x`` on edge ``e = (i -> j)``
is::

    (delta x)_e = F_{i->e} x_i - F_{j->e} x_j

Flipping an orientation flips the sign of ``(delta x)_e`` and of any dual or
edge variable riding on ``e``, but leaves the Laplacian, H0, H1, and every
solver output unchanged.

Block layout contract
---------------------
Flattened vectors order vertex (edge) blocks by index, with per-index offsets
given by the prefix sums of the stalk dimensions.  This layout is shared by
the dense operators, the compiled kernels, and file I/O.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Iterable, Sequence

import numpy as np

from . import _backend

__all__ = [
    "OrientedEdge",
    "Graph",
    "LinearMap",
    "CellularSheaf",
    "Cochain0",
    "Cochain1",
    "SectionBasis",
    "ShapeViolation",
    "ValidationReport",
    "validate_sheaf",
    "apply_coboundary",
    "coboundary_dense",
    "apply_laplacian",
    "laplacian_dense",
    "global_section_basis",
    "h1_dimension",
    "is_global_section",
    "dirichlet_energy",
    "constant_sheaf",
    "zero_cochain0",
    "zero_cochain1",
]

DEFAULT_NULL_TOL = 1e-9


def _readonly(arr: np.ndarray) -> np.ndarray:
    out = np.array(arr, dtype=np.float64, copy=True).reshape(-1)
    out.flags.writeable = False
    return out


@dataclass(frozen=True)
class OrientedEdge:
    """An edge with a fixed orientation.

    Attributes:
        id: dense edge index, 0-based.
        tail: vertex index on the "i" side (listed first).
        head: vertex index on the "j" side.
    """

    id: int
    tail: int
    head: int


@dataclass(frozen=True)
class Graph:
    """A finite simple graph with oriented edges.

    Attributes:
        vertex_count: number of vertices (indexed 0..vertex_count-1).
        edges: ordered tuple of :class:`OrientedEdge`, ids dense 0..m-1.
    """

    vertex_count: int
    edges: tuple[OrientedEdge, ...]

    def __post_init__(self) -> None:
        object.__setattr__(self, "edges", tuple(self.edges))
        if self.vertex_count < 1:
            raise ValueError("vertex_count must be positive")
        seen: set[frozenset[int]] = set()
        for k, e in enumerate(self.edges):
            if e.id != k:
                raise ValueError(f"edge ids must be dense 0..{len(self.edges) - 1}; got id {e.id} at position {k}")
            if not (0 <= e.tail < self.vertex_count and 0 <= e.head < self.vertex_count):
                raise ValueError(f"edge {k} endpoint out of range: ({e.tail}, {e.head})")
            if e.tail == e.head:
                raise ValueError(f"edge {k} is a self-loop at vertex {e.tail}")
            pair = frozenset((e.tail, e.head))
            if pair in seen:
                raise ValueError(f"duplicate edge between vertices {sorted(pair)}")
            seen.add(pair)

    @classmethod
    def from_pairs(cls, vertex_count: int, pairs: Iterable[tuple[int, int]]) -> "Graph":
        """Build a graph from (tail, head) pairs, assigning dense edge ids."""
        edges = tuple(OrientedEdge(k, int(t), int(h)) for k, (t, h) in enumerate(pairs))
        return cls(vertex_count, edges)

    @property
    def edge_count(self) -> int:
        return len(self.edges)


@dataclass(frozen=True)
class LinearMap:
    """A dense real matrix stored row-major.

    Attributes:
        rows: number of rows.
        cols: number of columns.
        entries: flat row-major tuple of length rows*cols; all entries finite.
    """

    rows: int
    cols: int
    entries: tuple[float, ...]

    def __post_init__(self) -> None:
        object.__setattr__(self, "entries", tuple(float(v) for v in self.entries))
        if self.rows < 0 or self.cols < 0:
            raise ValueError("matrix dimensions must be non-negative")
        if len(self.entries) != self.rows * self.cols:
            raise ValueError(f"expected {self.rows * self.cols} entries, got {len(self.entries)}")
        if not all(math.isfinite(v) for v in self.entries):
            raise ValueError("matrix entries must be finite")

    @classmethod
    def from_array(cls, arr: np.ndarray | Sequence[Sequence[float]]) -> "LinearMap":
        a = np.asarray(arr, dtype=np.float64)
        if a.ndim != 2:
            raise ValueError("expected a 2-D array")
        return cls(a.shape[0], a.shape[1], tuple(a.reshape(-1).tolist()))

    @property
    def array(self) -> np.ndarray:
        return np.asarray(self.entries, dtype=np.float64).reshape(self.rows, self.cols)


@dataclass(frozen=True)
class ShapeViolation:
    """One restriction-map shape mismatch found by :func:`validate_sheaf`."""

    edge: int
    side: str
    expected: tuple[int, int]
    actual: tuple[int, int]

    def __str__(self) -> str:
        return (
            f"edge {self.edge} ({self.side}): expected shape "
            f"{self.expected[0]}x{self.expected[1]}, got {self.actual[0]}x{self.actual[1]}"
        )


@dataclass(frozen=True)
class ValidationReport:
    """Result of :func:`validate_sheaf`: ``ok`` or a list of violations."""

    ok: bool
    violations: tuple[ShapeViolation, ...] = ()

    def __str__(self) -> str:
        if self.ok:
            return "ok"
        return "; ".join(str(v) for v in self.violations)


@dataclass(frozen=True)
class CellularSheaf:
    """A cellular sheaf of finite-dimensional real vector spaces on a graph.

    Attributes:
        graph: the underlying simple graph.
        vertex_dims: stalk dimension n_i >= 1 per vertex.
        edge_dims: stalk dimension m_e >= 1 per edge.
        restrictions: per edge, the (tail, head) pair of restriction maps;
            ``restrictions[e][0]`` maps the tail stalk into the edge stalk
            (shape m_e x n_tail) and ``restrictions[e][1]`` the head stalk.

    Restriction shapes are *not* enforced at construction so that a malformed
    sheaf can be built and then inspected with :func:`validate_sheaf`; every
    operator in this module refuses to run on an invalid sheaf.
    """

    graph: Graph
    vertex_dims: tuple[int, ...]
    edge_dims: tuple[int, ...]
    restrictions: tuple[tuple[LinearMap, LinearMap], ...]
    _layout: "_Layout | None" = field(default=None, init=False, repr=False, compare=False)

    def __post_init__(self) -> None:
        object.__setattr__(self, "vertex_dims", tuple(int(d) for d in self.vertex_dims))
        object.__setattr__(self, "edge_dims", tuple(int(d) for d in self.edge_dims))
        object.__setattr__(self, "restrictions", tuple((t, h) for t, h in self.restrictions))
        if len(self.vertex_dims) != self.graph.vertex_count:
            raise ValueError("vertex_dims length must equal vertex_count")
        if len(self.edge_dims) != self.graph.edge_count:
            raise ValueError("edge_dims length must equal edge count")
        if len(self.restrictions) != self.graph.edge_count:
            raise ValueError("restrictions length must equal edge count")
        if any(d < 1 for d in self.vertex_dims) or any(d < 1 for d in self.edge_dims):
            raise ValueError("stalk dimensions must be >= 1")

    def restriction(self, edge_id: int, side: str) -> LinearMap:
        """The restriction map for (edge_id, side), side in {"tail", "head"}."""
        if side == "tail":
            return self.restrictions[edge_id][0]
        if side == "head":
            return self.restrictions[edge_id][1]
        raise ValueError(f"side must be 'tail' or 'head', got {side!r}")

    @property
    def total_vertex_dim(self) -> int:
        return sum(self.vertex_dims)

    @property
    def total_edge_dim(self) -> int:
        return sum(self.edge_dims)


@dataclass(frozen=True, eq=False)
class Cochain0:
    """A 0-cochain: one real vector per vertex (blocks ordered by vertex index)."""

    blocks: tuple[np.ndarray, ...]

    def __post_init__(self) -> None:
        object.__setattr__(self, "blocks", tuple(_readonly(b) for b in self.blocks))

    @classmethod
    def from_flat(cls, dims: Sequence[int], flat: np.ndarray) -> "Cochain0":
        flat = np.asarray(flat, dtype=np.float64).reshape(-1)
        if flat.size != sum(dims):
            raise ValueError(f"flat vector has length {flat.size}, expected {sum(dims)}")
        out, off = [], 0
        for d in dims:
            out.append(flat[off : off + d])
            off += d
        return cls(tuple(out))

    def to_flat(self) -> np.ndarray:
        if not self.blocks:
            return np.zeros(0)
        return np.concatenate(self.blocks)


@dataclass(frozen=True, eq=False)
class Cochain1:
    """A 1-cochain: one real vector per edge (blocks ordered by edge index)."""

    blocks: tuple[np.ndarray, ...]

    def __post_init__(self) -> None:
        object.__setattr__(self, "blocks", tuple(_readonly(b) for b in self.blocks))

    @classmethod
    def from_flat(cls, dims: Sequence[int], flat: np.ndarray) -> "Cochain1":
        flat = np.asarray(flat, dtype=np.float64).reshape(-1)
        if flat.size != sum(dims):
            raise ValueError(f"flat vector has length {flat.size}, expected {sum(dims)}")
        out, off = [], 0
        for d in dims:
            out.append(flat[off : off + d])
            off += d
        return cls(tuple(out))

    def to_flat(self) -> np.ndarray:
        if not self.blocks:
            return np.zeros(0)
        return np.concatenate(self.blocks)


@dataclass(frozen=True, eq=False)
class SectionBasis:
    """An orthonormal basis of the space of global sections (H0 = ker delta)."""

    dimension: int
    basis: tuple[Cochain0, ...]


@dataclass(frozen=True, eq=False)
class _Layout:
    """Flat-array view of a sheaf shared by the dense operators and kernels."""

    total_vertex_dim: int
    total_edge_dim: int
    vdims: np.ndarray
    edims: np.ndarray
    voff: np.ndarray
    eoff: np.ndarray
    tails: np.ndarray
    heads: np.ndarray
    rt: np.ndarray
    rh: np.ndarray
    rtoff: np.ndarray
    rhoff: np.ndarray


def validate_sheaf(sheaf: CellularSheaf) -> ValidationReport:
    """Check every restriction map's shape against the stalk dimensions.

    Returns a report rather than raising, so a deliberately malformed sheaf can
    be inspected.  A violation names the edge, the side, and the expected vs
    actual (rows, cols).
    """
    violations: list[ShapeViolation] = []
    for e in sheaf.graph.edges:
        me = sheaf.edge_dims[e.id]
        for side, vertex in (("tail", e.tail), ("head", e.head)):
            r = sheaf.restriction(e.id, side)
            expected = (me, sheaf.vertex_dims[vertex])
            if (r.rows, r.cols) != expected:
                violations.append(ShapeViolation(e.id, side, expected, (r.rows, r.cols)))
    return ValidationReport(not violations, tuple(violations))


def _layout_of(sheaf: CellularSheaf) -> _Layout:
    cached = sheaf._layout
    if cached is not None:
        return cached
    report = validate_sheaf(sheaf)
    if not report.ok:
        raise ValueError(f"sheaf fails validation: {report}")
    vdims = np.asarray(sheaf.vertex_dims, dtype=np.int64)
    edims = np.asarray(sheaf.edge_dims, dtype=np.int64)
    voff = np.zeros(len(vdims) + 1, dtype=np.int64)
    np.cumsum(vdims, out=voff[1:])
    eoff = np.zeros(len(edims) + 1, dtype=np.int64)
    if len(edims):
        np.cumsum(edims, out=eoff[1:])
    tails = np.asarray([e.tail for e in sheaf.graph.edges], dtype=np.int64)
    heads = np.asarray([e.head for e in sheaf.graph.edges], dtype=np.int64)
    rt_parts = [sheaf.restrictions[e][0].array.reshape(-1) for e in range(len(edims))]
    rh_parts = [sheaf.restrictions[e][1].array.reshape(-1) for e in range(len(edims))]
    rtoff = np.zeros(len(edims) + 1, dtype=np.int64)
    rhoff = np.zeros(len(edims) + 1, dtype=np.int64)
    if len(edims):
        np.cumsum([p.size for p in rt_parts], out=rtoff[1:])
        np.cumsum([p.size for p in rh_parts], out=rhoff[1:])
    rt = np.concatenate(rt_parts) if rt_parts else np.zeros(0)
    rh = np.concatenate(rh_parts) if rh_parts else np.zeros(0)
    layout = _Layout(
        total_vertex_dim=int(voff[-1]),
        total_edge_dim=int(eoff[-1]),
        vdims=vdims,
        edims=edims,
        voff=voff,
        eoff=eoff,
        tails=tails,
        heads=heads,
        rt=np.ascontiguousarray(rt),
        rh=np.ascontiguousarray(rh),
        rtoff=rtoff,
        rhoff=rhoff,
    )
    object.__setattr__(sheaf, "_layout", layout)
    return layout


def _check_cochain0(sheaf: CellularSheaf, x: Cochain0) -> None:
    if len(x.blocks) != sheaf.graph.vertex_count:
        raise ValueError(f"0-cochain has {len(x.blocks)} blocks, sheaf has {sheaf.graph.vertex_count} vertices")
    for i, b in enumerate(x.blocks):
        if b.size != sheaf.vertex_dims[i]:
            raise ValueError(f"block {i} has length {b.size}, expected {sheaf.vertex_dims[i]}")


def _check_cochain1(sheaf: CellularSheaf, y: Cochain1) -> None:
    if len(y.blocks) != sheaf.graph.edge_count:
        raise ValueError(f"1-cochain has {len(y.blocks)} blocks, sheaf has {sheaf.graph.edge_count} edges")
    for e, b in enumerate(y.blocks):
        if b.size != sheaf.edge_dims[e]:
            raise ValueError(f"block {e} has length {b.size}, expected {sheaf.edge_dims[e]}")


def zero_cochain0(sheaf: CellularSheaf) -> Cochain0:
    return Cochain0(tuple(np.zeros(d) for d in sheaf.vertex_dims))


def zero_cochain1(sheaf: CellularSheaf) -> Cochain1:
    return Cochain1(tuple(np.zeros(d) for d in sheaf.edge_dims))


def constant_sheaf(graph: Graph, dim: int = 1) -> CellularSheaf:
    """The constant sheaf: every stalk is R^dim, every restriction the identity."""
    ident = LinearMap.from_array(np.eye(dim))
    return CellularSheaf(
        graph,
        (dim,) * graph.vertex_count,
        (dim,) * graph.edge_count,
        tuple((ident, ident) for _ in graph.edges),
    )


def _cob_flat(layout: _Layout, x_flat: np.ndarray) -> np.ndarray:
    out = np.empty(layout.total_edge_dim)
    _backend.cob_apply(
        x_flat, out, layout.tails, layout.heads, layout.voff, layout.eoff,
        layout.vdims, layout.edims, layout.rt, layout.rh, layout.rtoff, layout.rhoff,
    )
    return out


def _cobt_flat(layout: _Layout, y_flat: np.ndarray) -> np.ndarray:
    out = np.empty(layout.total_vertex_dim)
    _backend.cobt_apply(
        y_flat, out, layout.tails, layout.heads, layout.voff, layout.eoff,
        layout.vdims, layout.edims, layout.rt, layout.rh, layout.rtoff, layout.rhoff,
    )
    return out


def apply_coboundary(sheaf: CellularSheaf, x: Cochain0) -> Cochain1:
    """(delta x)_e = F_{tail->e} x_tail - F_{head->e} x_head for every edge."""
    layout = _layout_of(sheaf)
    _check_cochain0(sheaf, x)
    y = _cob_flat(layout, x.to_flat())
    return Cochain1.from_flat(sheaf.edge_dims, y)


def apply_laplacian(sheaf: CellularSheaf, x: Cochain0) -> Cochain0:
    """L x = delta^T (delta x), computed in two passes (never densified)."""
    layout = _layout_of(sheaf)
    _check_cochain0(sheaf, x)
    x_flat = x.to_flat()
    scratch = np.empty(layout.total_edge_dim)
    out = np.empty(layout.total_vertex_dim)
    _backend.lap_apply(
        x_flat, scratch, out, layout.tails, layout.heads, layout.voff, layout.eoff,
        layout.vdims, layout.edims, layout.rt, layout.rh, layout.rtoff, layout.rhoff,
    )
    return Cochain0.from_flat(sheaf.vertex_dims, out)


def coboundary_dense(sheaf: CellularSheaf) -> LinearMap:
    """The coboundary as a dense (sum m_e) x (sum n_i) block matrix."""
    layout = _layout_of(sheaf)
    B = np.zeros((layout.total_edge_dim, layout.total_vertex_dim))
    for e in sheaf.graph.edges:
        r0 = layout.eoff[e.id]
        r1 = layout.eoff[e.id + 1]
        t0 = layout.voff[e.tail]
        h0 = layout.voff[e.head]
        B[r0:r1, t0 : t0 + layout.vdims[e.tail]] += sheaf.restrictions[e.id][0].array
        B[r0:r1, h0 : h0 + layout.vdims[e.head]] -= sheaf.restrictions[e.id][1].array
    return LinearMap.from_array(B)


def laplacian_dense(sheaf: CellularSheaf) -> LinearMap:
    """The sheaf Laplacian assembled directly from the block formula.

    Diagonal block i is the sum of F_{i->e}^T F_{i->e} over incident edges;
    the off-diagonal (i, j) block for e = {i, j} is -F_{i->e}^T F_{j->e}.
    (That this equals delta^T delta is a tested identity, not the construction.)
    """
    layout = _layout_of(sheaf)
    N = layout.total_vertex_dim
    L = np.zeros((N, N))
    for e in sheaf.graph.edges:
        Ft = sheaf.restrictions[e.id][0].array
        Fh = sheaf.restrictions[e.id][1].array
        t0 = layout.voff[e.tail]
        t1 = t0 + layout.vdims[e.tail]
        h0 = layout.voff[e.head]
        h1 = h0 + layout.vdims[e.head]
        L[t0:t1, t0:t1] += Ft.T @ Ft
        L[h0:h1, h0:h1] += Fh.T @ Fh
        L[t0:t1, h0:h1] -= Ft.T @ Fh
        L[h0:h1, t0:t1] -= Fh.T @ Ft
    return LinearMap.from_array(L)


def global_section_basis(sheaf: CellularSheaf, null_tol: float = DEFAULT_NULL_TOL) -> SectionBasis:
    """Orthonormal basis of H0 = ker(delta), via SVD of the dense coboundary.

    Singular values below ``null_tol * sigma_max`` are treated as zero.
    """
    if null_tol <= 0:
        raise ValueError("null_tol must be positive")
    layout = _layout_of(sheaf)
    N = layout.total_vertex_dim
    if layout.total_edge_dim == 0:
        vecs = np.eye(N)
    else:
        B = coboundary_dense(sheaf).array
        _, s, vt = np.linalg.svd(B)
        smax = s[0] if s.size else 0.0
        rank = 0 if smax == 0.0 else int(np.sum(s >= null_tol * smax))
        vecs = vt[rank:].T
    basis = tuple(Cochain0.from_flat(sheaf.vertex_dims, vecs[:, k]) for k in range(vecs.shape[1]))
    return SectionBasis(dimension=len(basis), basis=basis)


def _coboundary_rank(sheaf: CellularSheaf, null_tol: float) -> int:
    layout = _layout_of(sheaf)
    if layout.total_edge_dim == 0:
        return 0
    s = np.linalg.svd(coboundary_dense(sheaf).array, compute_uv=False)
    smax = s[0] if s.size else 0.0
    if smax == 0.0:
        return 0
    return int(np.sum(s >= null_tol * smax))


def h1_dimension(sheaf: CellularSheaf, null_tol: float = DEFAULT_NULL_TOL) -> int:
    """dim H1 = dim C1 - rank(delta)."""
    if null_tol <= 0:
        raise ValueError("null_tol must be positive")
    return sheaf.total_edge_dim - _coboundary_rank(sheaf, null_tol)


def is_global_section(sheaf: CellularSheaf, x: Cochain0, tol: float) -> bool:
    """True iff the max-norm of the coboundary of x is at most tol."""
    if tol <= 0:
        raise ValueError("tol must be positive")
    y = apply_coboundary(sheaf, x).to_flat()
    return bool(y.size == 0 or np.max(np.abs(y)) <= tol)


def dirichlet_energy(sheaf: CellularSheaf, x: Cochain0) -> float:
    """||delta x||^2 (equals x^T L x up to floating-point association)."""
    layout = _layout_of(sheaf)
    _check_cochain0(sheaf, x)
    y = _cob_flat(layout, x.to_flat())
    return float(y @ y)
