"""Nonlinear homological programs and the centralized ADMM reference solver.

A homological program minimizes ``sum_i f_i(x_i) + sum_e U_e((delta x)_e)``
over vertex assignments x, optionally forcing ``delta x = 0`` exactly
(HardConstraint mode, where every potential is the zero indicator).

The solver is the scaled-dual ADMM splitting on ``delta x = z``:

* x-update: per vertex, ``argmin f_i(u) + (rho/2) sum_{e ~ i} ||F_{i->e} u - t_{i,e}||^2``
  where the target ``t`` collects the neighbor's restricted state and the
  edge's (z, y).  All vertices update simultaneously (Jacobi) from the
  previous iterate, and the result is damped:
  ``x_i <- (1 - alpha) x_i + alpha argmin(...)`` with ``alpha =
  AdmmConfig.relaxation``.  The damping preserves the fixed points (they
  satisfy the exact stationarity conditions of the program) and is what makes
  the simultaneous update convergent; the undamped variant oscillates or
  diverges on constraint-dominated instances.
* z-update: per edge, the prox of U_e at ``(delta x)_e + y_e`` with
  parameter rho; identically 0 in HardConstraint mode.  With
  ``inner_diffusion_steps > 0`` the closed form is replaced by that many
  explicit-Euler steps of the edge flow ``w' = -grad U_e(w) - rho (w - xi)``,
  which converges to the same prox point.
* y-update: ``y <- y + delta x - z`` (scaled dual).

Stopping: primal ``||delta x - z||_2 < primal_tol`` AND dual
``rho ||z_next - z_prev||_2 < dual_tol`` AND the x-stationarity guard
``rho ||x_next - x_prev||_2 < dual_tol``.  The guard matters in hard mode,
where z is frozen at 0 and the plain primal+dual pair can read "stopped"
while x is still sliding inside the section space.  Reported residuals are
exactly the primal/dual pair (see :func:`compute_residuals`).
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass
from typing import Callable, Sequence

import numpy as np
import scipy.linalg

from .convex import (
    EdgePotential,
    FixedValueObjective,
    NodeObjective,
    ProxQuery,
    QuadraticObjective,
    ZeroIndicatorPotential,
    BoxObjective,
    ZeroObjective,
)
from .core import CellularSheaf, Cochain0, Cochain1, global_section_basis, _check_cochain0

__all__ = [
    "Mode",
    "HomologicalProgram",
    "AdmmConfig",
    "IterateState",
    "SolveTrace",
    "Residuals",
    "FeasibilityReport",
    "STATUS_CONVERGED",
    "STATUS_MAX_ITERS",
    "program_objective",
    "check_feasibility",
    "admm_solve",
    "compute_residuals",
]

STATUS_CONVERGED = "Converged"
STATUS_MAX_ITERS = "MaxIters"


class Mode(enum.Enum):
    """Program mode: hard global-section constraint, or general soft potentials."""

    HARD_CONSTRAINT = "HardConstraint"
    SOFT = "Soft"


@dataclass(frozen=True)
class HomologicalProgram:
    """(sheaf, {f_i}, {U_e}, mode).

    HardConstraint mode requires every potential to be the zero indicator:
    the program then minimizes sum_i f_i over global sections.
    """

    sheaf: CellularSheaf
    node_objectives: tuple[NodeObjective, ...]
    edge_potentials: tuple[EdgePotential, ...]
    mode: Mode

    def __post_init__(self) -> None:
        object.__setattr__(self, "node_objectives", tuple(self.node_objectives))
        object.__setattr__(self, "edge_potentials", tuple(self.edge_potentials))
        if len(self.node_objectives) != self.sheaf.graph.vertex_count:
            raise ValueError("need one node objective per vertex")
        if len(self.edge_potentials) != self.sheaf.graph.edge_count:
            raise ValueError("need one edge potential per edge")
        if self.mode is Mode.HARD_CONSTRAINT:
            for e, pot in enumerate(self.edge_potentials):
                if not isinstance(pot, ZeroIndicatorPotential):
                    raise ValueError(
                        f"HardConstraint mode requires ZeroIndicator potentials; edge {e} has {type(pot).__name__}"
                    )


@dataclass(frozen=True)
class AdmmConfig:
    """Solver settings.

    Attributes:
        rho: ADMM penalty parameter.
        max_iters: iteration budget.
        primal_tol / dual_tol: stopping tolerances on the residuals.
        inner_diffusion_steps: 0 uses the closed-form prox z-update; k > 0
            replaces it with k explicit-Euler steps of the edge diffusion.
        inner_step: Euler step for the diffusion; 0 picks 1/(curvature + rho)
            per edge automatically.
        seed: recorded for reproducibility of scenario runs (the solver
            itself draws no randomness).
        relaxation: damping factor alpha of the Jacobi x-update, in (0, 1].
    """

    rho: float = 1.0
    max_iters: int = 10000
    primal_tol: float = 1e-8
    dual_tol: float = 1e-8
    inner_diffusion_steps: int = 0
    inner_step: float = 0.0
    seed: int = 0
    relaxation: float = 0.5

    def __post_init__(self) -> None:
        if self.rho <= 0:
            raise ValueError("rho must be positive")
        if self.max_iters < 1:
            raise ValueError("max_iters must be >= 1")
        if self.primal_tol <= 0 or self.dual_tol <= 0:
            raise ValueError("tolerances must be positive")
        if self.inner_diffusion_steps < 0:
            raise ValueError("inner_diffusion_steps must be >= 0")
        if self.inner_step < 0:
            raise ValueError("inner_step must be >= 0 (0 means auto)")
        if not (0.0 < self.relaxation <= 1.0):
            raise ValueError("relaxation must lie in (0, 1]")


@dataclass(frozen=True, eq=False)
class IterateState:
    """One ADMM iterate: primal x, edge variable z, scaled dual y."""

    x: Cochain0
    z: Cochain1
    y: Cochain1


@dataclass(frozen=True)
class Residuals:
    """primal = ||delta x - z||_2, dual = rho ||z_next - z_prev||_2."""

    primal: float
    dual: float


@dataclass(frozen=True, eq=False)
class SolveTrace:
    """Per-iteration residual/objective history plus the terminal status.

    The objective column records ``sum_i f_i(x_i) + sum_e U_e(z_e)`` -- the
    ADMM objective at the splitting variable.  (Evaluating the potentials at
    ``(delta x)_e`` instead would pin the whole column at +inf for hard
    constraints until exact convergence; :func:`program_objective` still does
    exactly that if wanted.)  ``unscaled_dual`` exposes lambda = rho * y for
    cross-checking against the unscaled ADMM form.
    """

    primal_residuals: tuple[float, ...]
    dual_residuals: tuple[float, ...]
    objectives: tuple[float, ...]
    snapshots: tuple[IterateState, ...] | None
    status: str
    iterations: int
    rho: float
    diagnostic: str | None = None

    def residuals(self, k: int) -> Residuals:
        return Residuals(self.primal_residuals[k], self.dual_residuals[k])

    def unscaled_dual(self, k: int) -> Cochain1:
        if self.snapshots is None:
            raise ValueError("solve was run without iterate snapshots")
        y = self.snapshots[k].y
        return Cochain1(tuple(self.rho * b for b in y.blocks))


@dataclass(frozen=True, eq=False)
class FeasibilityReport:
    """feasible-with-witness, or infeasible-with-residual."""

    feasible: bool
    witness: Cochain0 | None
    residual: float


def program_objective(prog: HomologicalProgram, x: Cochain0) -> float:
    """sum_i f_i(x_i) + sum_e U_e((delta x)_e); +inf propagates."""
    _check_cochain0(prog.sheaf, x)
    total = 0.0
    for i, obj in enumerate(prog.node_objectives):
        total += obj.value(x.blocks[i])
        if math.isinf(total):
            return math.inf
    d = _coboundary_blocks(prog.sheaf, [np.asarray(b) for b in x.blocks])
    for e, pot in enumerate(prog.edge_potentials):
        total += pot.value(d[e])
        if math.isinf(total):
            return math.inf
    return total


def check_feasibility(prog: HomologicalProgram, tol: float) -> FeasibilityReport:
    """Does any assignment make the program objective finite?

    Soft mode always does (every potential is finite somewhere and the
    witness below lands inside every node indicator).  Hard mode requires a
    global section meeting the FixedValue pins (solved by least squares on
    the section-basis coefficients) and any Box constraints (a small LP when
    boxes are present).
    """
    if tol <= 0:
        raise ValueError("tol must be positive")
    sheaf = prog.sheaf
    if prog.mode is Mode.SOFT:
        blocks = []
        for i, obj in enumerate(prog.node_objectives):
            if isinstance(obj, FixedValueObjective):
                blocks.append(obj.point.copy())
            elif isinstance(obj, BoxObjective):
                blocks.append(np.clip(np.zeros(sheaf.vertex_dims[i]), obj.lower, obj.upper))
            else:
                blocks.append(np.zeros(sheaf.vertex_dims[i]))
        return FeasibilityReport(True, Cochain0(tuple(blocks)), 0.0)

    basis = global_section_basis(sheaf)
    N = sheaf.total_vertex_dim
    S = np.zeros((N, basis.dimension))
    for k, b in enumerate(basis.basis):
        S[:, k] = b.to_flat()

    voff = np.zeros(sheaf.graph.vertex_count + 1, dtype=int)
    np.cumsum(sheaf.vertex_dims, out=voff[1:])

    pin_rows: list[int] = []
    pin_vals: list[float] = []
    boxes: list[tuple[int, BoxObjective]] = []
    for i, obj in enumerate(prog.node_objectives):
        if isinstance(obj, FixedValueObjective):
            for j in range(sheaf.vertex_dims[i]):
                pin_rows.append(voff[i] + j)
                pin_vals.append(float(obj.point[j]))
        elif isinstance(obj, BoxObjective):
            boxes.append((i, obj))

    if pin_rows and basis.dimension > 0:
        P = S[pin_rows, :]
        c = np.asarray(pin_vals)
        a, *_ = np.linalg.lstsq(P, c, rcond=None)
        residual = float(np.linalg.norm(P @ a - c))
    elif pin_rows:
        a = np.zeros(0)
        residual = float(np.linalg.norm(np.asarray(pin_vals)))
    else:
        a = np.zeros(basis.dimension)
        residual = 0.0

    if residual > tol:
        return FeasibilityReport(False, None, residual)

    witness_flat = S @ a if basis.dimension else np.zeros(N)

    box_violation = 0.0
    for i, obj in boxes:
        seg = witness_flat[voff[i] : voff[i + 1]]
        box_violation = max(
            box_violation,
            float(np.max(np.maximum(obj.lower - seg, 0.0), initial=0.0)),
            float(np.max(np.maximum(seg - obj.upper, 0.0), initial=0.0)),
        )
    if box_violation > tol:
        if basis.dimension == 0:
            return FeasibilityReport(False, None, box_violation)
        from scipy.optimize import linprog

        A_eq = S[pin_rows, :] if pin_rows else None
        b_eq = np.asarray(pin_vals) if pin_rows else None
        A_ub_rows: list[np.ndarray] = []
        b_ub_vals: list[float] = []
        for i, obj in boxes:
            rows = S[voff[i] : voff[i + 1], :]
            for j in range(rows.shape[0]):
                if math.isfinite(obj.upper[j]):
                    A_ub_rows.append(rows[j])
                    b_ub_vals.append(float(obj.upper[j]))
                if math.isfinite(obj.lower[j]):
                    A_ub_rows.append(-rows[j])
                    b_ub_vals.append(-float(obj.lower[j]))
        res = linprog(
            c=np.zeros(basis.dimension),
            A_ub=np.asarray(A_ub_rows) if A_ub_rows else None,
            b_ub=np.asarray(b_ub_vals) if b_ub_vals else None,
            A_eq=A_eq,
            b_eq=b_eq,
            bounds=[(None, None)] * basis.dimension,
            method="highs",
        )
        if not res.success:
            return FeasibilityReport(False, None, max(residual, box_violation))
        witness_flat = S @ res.x

    witness = Cochain0.from_flat(sheaf.vertex_dims, witness_flat)
    return FeasibilityReport(True, witness, residual)


# --------------------------------------------------------------------------
# Shared ADMM machinery.  distsim re-runs exactly these helpers per agent so
# that the distributed schedule is a reordering of the same floating-point
# arithmetic (terminal iterates agree bitwise in practice).
# --------------------------------------------------------------------------


@dataclass(frozen=True, eq=False)
class _IncidentRecord:
    """One (vertex, edge) incidence: this vertex's own and the neighbor's maps."""

    edge: int
    is_tail: bool
    F_self: np.ndarray
    F_self_T: np.ndarray
    other: int
    F_other: np.ndarray


def _incident_records(sheaf: CellularSheaf) -> list[list[_IncidentRecord]]:
    per_vertex: list[list[_IncidentRecord]] = [[] for _ in range(sheaf.graph.vertex_count)]
    for e in sheaf.graph.edges:
        Ft = sheaf.restrictions[e.id][0].array
        Fh = sheaf.restrictions[e.id][1].array
        per_vertex[e.tail].append(_IncidentRecord(e.id, True, Ft, Ft.T.copy(), e.head, Fh))
        per_vertex[e.head].append(_IncidentRecord(e.id, False, Fh, Fh.T.copy(), e.tail, Ft))
    # Edge ids arrive in ascending order by construction; the accumulation
    # order below is therefore identical for the centralized and distributed
    # solvers.
    return per_vertex


def _edge_target(is_tail: bool, other_restricted: np.ndarray, z_e: np.ndarray, y_e: np.ndarray) -> np.ndarray:
    """The x-update target t for one incident edge.

    Tail side: t = F_head x_head + z - y.  Head side: t = F_tail x_tail - z + y.
    (The head sees the constraint from the minus side, so z and y flip sign.)
    """
    if is_tail:
        return other_restricted + z_e - y_e
    return other_restricted - z_e + y_e


def _assemble_rhs(
    records: Sequence[_IncidentRecord],
    restricted_others: Sequence[np.ndarray],
    z: Sequence[np.ndarray],
    y: Sequence[np.ndarray],
    n_i: int,
) -> np.ndarray:
    c = np.zeros(n_i)
    for rec, other in zip(records, restricted_others):
        t = _edge_target(rec.is_tail, other, z[rec.edge], y[rec.edge])
        c += rec.F_self_T @ t
    return c


_NodeSolver = Callable[[np.ndarray, np.ndarray], np.ndarray]


def _make_node_solver(obj: NodeObjective, G: np.ndarray, rho: float, n_i: int) -> _NodeSolver:
    """Exact solver for argmin_u f(u) + (rho/2)(u^T G u - 2 c^T u)."""
    if isinstance(obj, FixedValueObjective):
        pin = obj.point.copy()
        return lambda c, start: pin.copy()

    if isinstance(obj, QuadraticObjective) and obj.weight > 0:
        A = obj.weight * np.eye(n_i) + rho * G
        w, ref = obj.weight, obj.reference
        factor = scipy.linalg.cho_factor(A)
        return lambda c, start: scipy.linalg.cho_solve(factor, w * ref + rho * c)

    if isinstance(obj, BoxObjective):
        lo, hi = obj.lower, obj.upper
        diag = np.diag(G)
        if np.allclose(G, np.diag(diag), atol=0.0):
            def solve_diag(c: np.ndarray, start: np.ndarray) -> np.ndarray:
                out = np.empty(n_i)
                for j in range(n_i):
                    if diag[j] > 0:
                        out[j] = min(max(c[j] / diag[j], lo[j]), hi[j])
                    elif c[j] > 0:
                        out[j] = hi[j]
                    elif c[j] < 0:
                        out[j] = lo[j]
                    else:
                        out[j] = min(max(0.0, lo[j]), hi[j])
                    if not math.isfinite(out[j]):
                        raise ValueError("node subproblem is unbounded over the box")
                return out

            return solve_diag

        lmax = float(np.linalg.eigvalsh(G)[-1])

        def solve_pg(c: np.ndarray, start: np.ndarray) -> np.ndarray:
            u = np.clip(start, lo, hi)
            for _ in range(100_000):
                u_new = np.clip(u - (G @ u - c) / lmax, lo, hi)
                if float(np.max(np.abs(u_new - u))) < 1e-14:
                    return u_new
                u = u_new
            return u

        return solve_pg

    # Zero objective, or a quadratic with weight 0: solve G u = c.
    try:
        factor = scipy.linalg.cho_factor(G)
        return lambda c, start: scipy.linalg.cho_solve(factor, c)
    except scipy.linalg.LinAlgError:
        return lambda c, start: np.linalg.lstsq(G, c, rcond=None)[0]


def _build_vertex_solvers(
    prog: HomologicalProgram, rho: float
) -> tuple[list[list[_IncidentRecord]], list[_NodeSolver]]:
    records = _incident_records(prog.sheaf)
    solvers: list[_NodeSolver] = []
    for i, obj in enumerate(prog.node_objectives):
        n_i = prog.sheaf.vertex_dims[i]
        G = np.zeros((n_i, n_i))
        for rec in records[i]:
            G += rec.F_self_T @ rec.F_self
        solvers.append(_make_node_solver(obj, G, rho, n_i))
    return records, solvers


def _edge_z_update(
    pot: EdgePotential,
    hard: bool,
    xi: np.ndarray,
    z_prev: np.ndarray,
    rho: float,
    diffusion_steps: int,
    inner_step: float,
) -> np.ndarray:
    """z-update at xi = (delta x_next)_e + y_e, via prox or edge diffusion."""
    if hard:
        return np.zeros_like(xi)
    if diffusion_steps > 0 and pot.differentiable:
        h = inner_step if inner_step > 0 else 1.0 / (pot.curvature_bound() + rho)
        w = z_prev.copy()
        for _ in range(diffusion_steps):
            w = w - h * (pot.gradient(w) + rho * (w - xi))
        return w
    return pot.prox(ProxQuery(xi, rho))


def _coboundary_blocks(sheaf: CellularSheaf, x_blocks: Sequence[np.ndarray]) -> list[np.ndarray]:
    """Per-edge (delta x)_e as plain numpy blocks (solver-internal path)."""
    out = []
    for e in sheaf.graph.edges:
        Ft = sheaf.restrictions[e.id][0].array
        Fh = sheaf.restrictions[e.id][1].array
        out.append(Ft @ x_blocks[e.tail] - Fh @ x_blocks[e.head])
    return out


def _block_norm_sq(blocks: Sequence[np.ndarray]) -> float:
    total = 0.0
    for b in blocks:
        total += float(b @ b)
    return total


def _splitting_objective(prog: HomologicalProgram, x_blocks, z_blocks) -> float:
    total = 0.0
    for i, obj in enumerate(prog.node_objectives):
        total += obj.value(x_blocks[i])
    for e, pot in enumerate(prog.edge_potentials):
        total += pot.value(z_blocks[e])
    return total


def _stall_diagnostic(
    prog: HomologicalProgram,
    primal_hist: Sequence[float],
    last_dual: float,
    last_drift: float,
    cfg: AdmmConfig,
) -> str | None:
    if prog.mode is not Mode.HARD_CONSTRAINT or not primal_hist:
        return None
    primal = primal_hist[-1]
    if primal <= cfg.primal_tol:
        return None
    frozen = last_dual < cfg.dual_tol and last_drift < cfg.dual_tol
    w = min(100, len(primal_hist) // 2)
    flat = w > 0 and abs(primal_hist[-1] - primal_hist[-1 - w]) <= 1e-7 * max(1.0, abs(primal))
    if frozen or flat:
        return (
            f"primal residual {primal:.3e} stalled above primal_tol while the iterates "
            "stopped moving; the hard-constraint program appears infeasible for these objectives"
        )
    return None


def admm_solve(
    prog: HomologicalProgram,
    cfg: AdmmConfig,
    x0: Cochain0 | None = None,
    record_iterates: bool = False,
) -> tuple[Cochain0, SolveTrace]:
    """Run the damped Jacobi ADMM to the residual tolerances.

    Initialization: x0 as given (zero otherwise), z0 = delta x0, y0 = 0.
    Returns the terminal x and the per-iteration trace; status is Converged
    or MaxIters (an infeasible hard program surfaces as MaxIters plus a
    diagnostic, with the best iterate returned).
    """
    sheaf = prog.sheaf
    if x0 is None:
        x_blocks = [np.zeros(d) for d in sheaf.vertex_dims]
    else:
        _check_cochain0(sheaf, x0)
        x_blocks = [np.array(b) for b in x0.blocks]

    records, solvers = _build_vertex_solvers(prog, cfg.rho)
    hard = prog.mode is Mode.HARD_CONSTRAINT
    alpha = cfg.relaxation

    z_blocks = _coboundary_blocks(sheaf, x_blocks)
    y_blocks = [np.zeros(d) for d in sheaf.edge_dims]

    primal_hist: list[float] = []
    dual_hist: list[float] = []
    obj_hist: list[float] = []
    snaps: list[IterateState] | None = [] if record_iterates else None

    status = STATUS_MAX_ITERS
    iterations = 0
    last_dual = math.inf
    last_drift = math.inf

    for _ in range(cfg.max_iters):
        x_new: list[np.ndarray] = []
        for i in range(sheaf.graph.vertex_count):
            recs = records[i]
            restricted = [rec.F_other @ x_blocks[rec.other] for rec in recs]
            c = _assemble_rhs(recs, restricted, z_blocks, y_blocks, sheaf.vertex_dims[i])
            xhat = solvers[i](c, x_blocks[i])
            x_new.append((1.0 - alpha) * x_blocks[i] + alpha * xhat)

        d_new = _coboundary_blocks(sheaf, x_new)
        z_new: list[np.ndarray] = []
        y_new: list[np.ndarray] = []
        for e in range(sheaf.graph.edge_count):
            xi = d_new[e] + y_blocks[e]
            zn = _edge_z_update(
                prog.edge_potentials[e], hard, xi, z_blocks[e], cfg.rho,
                cfg.inner_diffusion_steps, cfg.inner_step,
            )
            z_new.append(zn)
            y_new.append(y_blocks[e] + d_new[e] - zn)

        primal = math.sqrt(_block_norm_sq([d_new[e] - z_new[e] for e in range(len(z_new))]))
        dual = cfg.rho * math.sqrt(
            _block_norm_sq([z_new[e] - z_blocks[e] for e in range(len(z_new))])
        )
        drift = cfg.rho * math.sqrt(
            _block_norm_sq([x_new[i] - x_blocks[i] for i in range(len(x_new))])
        )

        x_blocks, z_blocks, y_blocks = x_new, z_new, y_new
        iterations += 1
        last_dual, last_drift = dual, drift

        primal_hist.append(primal)
        dual_hist.append(dual)
        obj_hist.append(_splitting_objective(prog, x_blocks, z_blocks))
        if snaps is not None:
            snaps.append(
                IterateState(
                    Cochain0(tuple(x_blocks)),
                    Cochain1(tuple(z_blocks)),
                    Cochain1(tuple(y_blocks)),
                )
            )

        if primal < cfg.primal_tol and dual < cfg.dual_tol and drift < cfg.dual_tol:
            status = STATUS_CONVERGED
            break

    diagnostic = None
    if status == STATUS_MAX_ITERS:
        diagnostic = _stall_diagnostic(prog, primal_hist, last_dual, last_drift, cfg)

    trace = SolveTrace(
        primal_residuals=tuple(primal_hist),
        dual_residuals=tuple(dual_hist),
        objectives=tuple(obj_hist),
        snapshots=tuple(snaps) if snaps is not None else None,
        status=status,
        iterations=iterations,
        rho=cfg.rho,
        diagnostic=diagnostic,
    )
    return Cochain0(tuple(x_blocks)), trace


def compute_residuals(
    prog: HomologicalProgram, prev: IterateState, next: IterateState, rho: float
) -> Residuals:
    """primal = ||delta x_next - z_next||_2, dual = rho ||z_next - z_prev||_2."""
    d = _coboundary_blocks(prog.sheaf, [np.asarray(b) for b in next.x.blocks])
    primal = math.sqrt(_block_norm_sq([d[e] - next.z.blocks[e] for e in range(len(d))]))
    dual = rho * math.sqrt(
        _block_norm_sq([next.z.blocks[e] - prev.z.blocks[e] for e in range(len(d))])
    )
    return Residuals(primal, dual)
