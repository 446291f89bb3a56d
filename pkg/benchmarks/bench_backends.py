"""Benchmark the compiled kernels against the pure-Python fallback.

Builds one large random sheaf, then times the three hot kernels
(coboundary, transpose, Laplacian) and a 200-step Euler heat-flow chunk
under both backends.  Run from the repository root:

    python3 benchmarks/bench_backends.py [--vertices N] [--degree D] [--repeats R]
"""

from __future__ import annotations

import argparse
import time

import numpy as np

from sheafcoord import _kernels_py
from sheafcoord.core import CellularSheaf, Graph, LinearMap, _layout_of

try:
    from sheafcoord import _kernels
except ImportError:
    _kernels = None


def build_sheaf(rng: np.random.Generator, vertices: int, degree: int) -> CellularSheaf:
    pairs = set()
    for v in range(1, vertices):
        pairs.add((int(rng.integers(0, v)), v))
    while len(pairs) < vertices * degree // 2:
        u, v = sorted(int(k) for k in rng.integers(0, vertices, size=2))
        if u != v:
            pairs.add((u, v))
    graph = Graph.from_pairs(vertices, sorted(pairs))
    vdims = tuple(int(rng.integers(2, 5)) for _ in range(vertices))
    edims = tuple(int(rng.integers(1, 4)) for _ in range(graph.edge_count))
    restrictions = tuple(
        (
            LinearMap.from_array(rng.normal(size=(edims[e.id], vdims[e.tail]))),
            LinearMap.from_array(rng.normal(size=(edims[e.id], vdims[e.head]))),
        )
        for e in graph.edges
    )
    return CellularSheaf(graph, vdims, edims, restrictions)


def time_call(fn, repeats: int) -> float:
    best = float("inf")
    for _ in range(repeats):
        t0 = time.perf_counter()
        fn()
        best = min(best, time.perf_counter() - t0)
    return best


def bench(impl, sheaf: CellularSheaf, repeats: int) -> dict[str, float]:
    layout = _layout_of(sheaf)
    args = (
        layout.tails, layout.heads, layout.voff, layout.eoff,
        layout.vdims, layout.edims, layout.rt, layout.rh, layout.rtoff, layout.rhoff,
    )
    rng = np.random.default_rng(7)
    x = rng.normal(size=layout.total_vertex_dim)
    y = rng.normal(size=layout.total_edge_dim)
    out_e = np.empty(layout.total_edge_dim)
    out_v = np.empty(layout.total_vertex_dim)
    scratch = np.empty(layout.total_edge_dim)

    results = {
        "cob_apply": time_call(lambda: impl.cob_apply(x, out_e, *args), repeats),
        "cobt_apply": time_call(lambda: impl.cobt_apply(y, out_v, *args), repeats),
        "lap_apply": time_call(lambda: impl.lap_apply(x, scratch, out_v, *args), repeats),
    }

    def euler():
        state = x.copy()
        impl.euler_chunk(state, scratch, out_v, *args, 1e-3, 200, 0.0)

    results["euler_chunk(200)"] = time_call(euler, max(1, repeats // 2))
    return results


def main() -> int:
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--vertices", type=int, default=3000)
    ap.add_argument("--degree", type=int, default=4)
    ap.add_argument("--repeats", type=int, default=5)
    ns = ap.parse_args()

    rng = np.random.default_rng(0)
    sheaf = build_sheaf(rng, ns.vertices, ns.degree)
    layout = _layout_of(sheaf)
    print(
        f"sheaf: {sheaf.graph.vertex_count} vertices, {sheaf.graph.edge_count} edges, "
        f"{layout.total_vertex_dim} vertex dofs, {layout.total_edge_dim} edge dofs"
    )

    py = bench(_kernels_py, sheaf, ns.repeats)
    if _kernels is None:
        print("compiled extension not built; timing the python backend only")
        for name, t in py.items():
            print(f"{name:18s} python {t * 1e3:9.3f} ms")
        return 0

    cy = bench(_kernels, sheaf, ns.repeats)
    print(f"{'kernel':18s} {'python':>12s} {'compiled':>12s} {'speedup':>9s}")
    for name in py:
        ratio = py[name] / cy[name] if cy[name] > 0 else float("inf")
        print(f"{name:18s} {py[name] * 1e3:10.3f} ms {cy[name] * 1e3:10.3f} ms {ratio:8.1f}x")

    # sanity: both backends must agree to accumulation-order rounding
    args = (
        layout.tails, layout.heads, layout.voff, layout.eoff,
        layout.vdims, layout.edims, layout.rt, layout.rh, layout.rtoff, layout.rhoff,
    )
    x = np.random.default_rng(7).normal(size=layout.total_vertex_dim)
    a = np.empty(layout.total_edge_dim)
    b = np.empty(layout.total_edge_dim)
    _kernels_py.cob_apply(x, a, *args)
    _kernels.cob_apply(x, b, *args)
    gap = float(np.max(np.abs(a - b)))
    print(f"max |python - compiled| on cob_apply: {gap:.3e}")
    return 0


if __name__ == "__main__":
    raise SystemExit(main())
