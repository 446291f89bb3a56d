"""Shared builders for the test suite.

All randomness flows through seeded ``numpy.random.Generator`` instances so
every test is reproducible run to run.
"""

from __future__ import annotations

import numpy as np

from sheafcoord import (
    BoxObjective,
    CellularSheaf,
    Cochain0,
    FixedValueObjective,
    Graph,
    HomologicalProgram,
    HuberPotential,
    LinearMap,
    Mode,
    QuadraticObjective,
    QuadraticPotential,
    ZeroObjective,
    constant_sheaf,
)


def path_graph(n: int) -> Graph:
    return Graph.from_pairs(n, [(i, i + 1) for i in range(n - 1)])


def cycle_graph(n: int) -> Graph:
    return Graph.from_pairs(n, [(i, (i + 1) % n) for i in range(n)])


def sign_cycle_sheaf(n: int) -> CellularSheaf:
    """The anti-consensus sheaf on C_n: tail map +1, head map -1 on every edge."""
    graph = cycle_graph(n)
    plus = LinearMap.from_array(np.array([[1.0]]))
    minus = LinearMap.from_array(np.array([[-1.0]]))
    return CellularSheaf(
        graph,
        vertex_dims=(1,) * n,
        edge_dims=(1,) * n,
        restrictions=tuple((plus, minus) for _ in range(n)),
    )


def random_graph(rng: np.random.Generator, max_vertices: int = 12) -> Graph:
    """A connected simple graph: random spanning tree plus a few extra edges."""
    n = int(rng.integers(3, max_vertices + 1))
    pairs = set()
    for v in range(1, n):
        pairs.add((int(rng.integers(0, v)), v))
    for _ in range(int(rng.integers(0, n))):
        u, v = sorted(int(k) for k in rng.integers(0, n, size=2))
        if u != v:
            pairs.add((u, v))
    return Graph.from_pairs(n, sorted(pairs))


def random_sheaf(
    rng: np.random.Generator,
    graph: Graph | None = None,
    max_vertex_dim: int = 4,
    max_edge_dim: int = 3,
) -> CellularSheaf:
    """A random sheaf over a random (or given) graph, all dims >= 1."""
    if graph is None:
        graph = random_graph(rng)
    vdims = tuple(int(rng.integers(1, max_vertex_dim + 1)) for _ in range(graph.vertex_count))
    edims = tuple(int(rng.integers(1, max_edge_dim + 1)) for _ in range(graph.edge_count))
    restrictions = []
    for e in graph.edges:
        Ft = rng.normal(size=(edims[e.id], vdims[e.tail]))
        Fh = rng.normal(size=(edims[e.id], vdims[e.head]))
        restrictions.append((LinearMap.from_array(Ft), LinearMap.from_array(Fh)))
    return CellularSheaf(graph, vdims, edims, tuple(restrictions))


def near_identity_sheaf(rng: np.random.Generator, graph: Graph, dim: int = 2) -> CellularSheaf:
    """Square stalks with restrictions close to the identity (well conditioned)."""
    restrictions = []
    for _ in graph.edges:
        Ft = np.eye(dim) + 0.3 * rng.normal(size=(dim, dim)) / np.sqrt(dim)
        Fh = np.eye(dim) + 0.3 * rng.normal(size=(dim, dim)) / np.sqrt(dim)
        restrictions.append((LinearMap.from_array(Ft), LinearMap.from_array(Fh)))
    return CellularSheaf(
        graph, (dim,) * graph.vertex_count, (dim,) * graph.edge_count, tuple(restrictions)
    )


def random_cochain0(rng: np.random.Generator, sheaf: CellularSheaf) -> Cochain0:
    return Cochain0(tuple(rng.normal(size=d) for d in sheaf.vertex_dims))


def random_soft_program(rng: np.random.Generator, sheaf: CellularSheaf) -> HomologicalProgram:
    """A random convergent convex program: mixed objectives, mixed potentials."""
    objectives = []
    for i, d in enumerate(sheaf.vertex_dims):
        kind = rng.integers(0, 4)
        if kind == 0:
            objectives.append(ZeroObjective())
        elif kind == 1:
            objectives.append(
                QuadraticObjective(reference=rng.normal(size=d), weight=float(rng.uniform(0.5, 2.0)))
            )
        elif kind == 2:
            objectives.append(FixedValueObjective(point=rng.normal(size=d)))
        else:
            center = rng.normal(size=d)
            objectives.append(BoxObjective(lower=center - 1.0, upper=center + 1.0))
    potentials = []
    for e, m in enumerate(sheaf.edge_dims):
        if rng.integers(0, 2) == 0:
            potentials.append(
                QuadraticPotential(target=rng.normal(size=m), stiffness=float(rng.uniform(0.5, 2.0)))
            )
        else:
            potentials.append(
                HuberPotential(
                    target=rng.normal(size=m),
                    stiffness=float(rng.uniform(0.5, 2.0)),
                    threshold=float(rng.uniform(0.5, 2.0)),
                )
            )
    return HomologicalProgram(sheaf, tuple(objectives), tuple(potentials), Mode.SOFT)


def consensus_sheaf(n: int) -> CellularSheaf:
    return constant_sheaf(path_graph(n))
