"""Linear and nonlinear sheaf-Laplacian heat flows.

The linear flow integrates ``x' = -L x`` with explicit Euler steps
``x <- x - eta * L x``; by LaSalle it lands on the harmonic projection of the
initial state (the nearest global section).  The nonlinear flow replaces the
linear edge force with the gradient of a per-edge potential:
``x' = -delta^T grad U(delta x)``, which is exactly minus the gradient of the
total edge energy ``E(x) = sum_e U_e((delta x)_e)``.

Step sizes: ``step_size = 0`` requests the automatic choice ``eta = 1/lam``
for the linear flow and ``eta = 1/(lam * kappa)`` for the nonlinear one,
where ``lam`` is the power-iteration bound on ``lambda_max(L)`` and ``kappa``
the largest potential curvature.  Convergence is declared on
``||x_next - x||_inf < converge_tol``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from . import _backend
from .convex import EdgePotential, QuadraticPotential, ZeroIndicatorPotential
from .core import (
    CellularSheaf,
    Cochain0,
    Cochain1,
    _check_cochain0,
    _cob_flat,
    _cobt_flat,
    _layout_of,
    global_section_basis,
)

__all__ = [
    "FlowConfig",
    "FlowTrace",
    "estimate_spectral_bound",
    "linear_heat_flow",
    "nonlinear_laplacian_apply",
    "nonlinear_heat_flow",
    "harmonic_projection",
    "edge_targets",
]

_POWER_SEED = 0x5EAF
_ENERGY_SLACK = 1e-9


@dataclass(frozen=True)
class FlowConfig:
    """Euler-flow settings.

    Attributes:
        step_size: eta; 0 requests the automatic spectral choice.
        max_steps: hard step budget.
        converge_tol: inf-norm of the per-step state change that counts as
            converged.
        record_every: sampling stride for the trace.
    """

    step_size: float = 0.0
    max_steps: int = 10000
    converge_tol: float = 1e-9
    record_every: int = 10

    def __post_init__(self) -> None:
        if self.step_size < 0:
            raise ValueError("step_size must be >= 0 (0 means auto)")
        if self.max_steps < 1:
            raise ValueError("max_steps must be >= 1")
        if self.converge_tol <= 0:
            raise ValueError("converge_tol must be positive")
        if self.record_every < 1:
            raise ValueError("record_every must be >= 1")


@dataclass(frozen=True, eq=False)
class FlowTrace:
    """Sampled trajectory of a flow.

    Attributes:
        states: (step index, state) samples, always including step 0 and the
            terminal step.
        energies: the per-sample energy (Dirichlet for the linear flow, total
            edge potential for the nonlinear one).
        converged: whether the per-step change dropped below converge_tol.
        steps_taken: Euler steps actually executed.
        diagnostic: set when the flow was cut short (e.g. diverging energy).
    """

    states: tuple[tuple[int, Cochain0], ...]
    energies: tuple[float, ...]
    converged: bool
    steps_taken: int
    diagnostic: str | None = None

    @property
    def final_state(self) -> Cochain0:
        return self.states[-1][1]


def estimate_spectral_bound(sheaf: CellularSheaf, iters: int = 200) -> float:
    """Power-iteration upper estimate of lambda_max(L), times a 1.05 safety factor.

    Deterministic (fixed internal seed).  Returns 1.0 for a zero operator so
    automatic step sizes stay finite.
    """
    if iters < 10:
        raise ValueError("iters must be >= 10")
    layout = _layout_of(sheaf)
    N, M = layout.total_vertex_dim, layout.total_edge_dim
    rng = np.random.default_rng(_POWER_SEED)
    v = rng.standard_normal(N)
    v /= np.linalg.norm(v)
    scratch = np.empty(M)
    w = np.empty(N)
    nrm = 0.0
    for _ in range(iters):
        _backend.lap_apply(
            v, scratch, w, layout.tails, layout.heads, layout.voff, layout.eoff,
            layout.vdims, layout.edims, layout.rt, layout.rh, layout.rtoff, layout.rhoff,
        )
        nrm = float(np.linalg.norm(w))
        if nrm < 1e-30:
            return 1.0
        np.divide(w, nrm, out=v)
    return 1.05 * nrm


def _linear_energy(layout, x_flat: np.ndarray) -> float:
    y = _cob_flat(layout, x_flat)
    return float(y @ y)


def linear_heat_flow(sheaf: CellularSheaf, x0: Cochain0, cfg: FlowConfig) -> FlowTrace:
    """Explicit-Euler integration of x' = -L x.

    The converged terminal state is the orthogonal projection of x0 onto the
    global sections, up to the convergence tolerance.  A step size beyond the
    stability bound is reported as non-converged with a diagnostic rather
    than raising.
    """
    layout = _layout_of(sheaf)
    _check_cochain0(sheaf, x0)
    eta = cfg.step_size if cfg.step_size > 0 else 1.0 / estimate_spectral_bound(sheaf)
    x = x0.to_flat().copy()
    scratch = np.empty(layout.total_edge_dim)
    grad = np.empty(layout.total_vertex_dim)

    states = [(0, Cochain0.from_flat(sheaf.vertex_dims, x))]
    energies = [_linear_energy(layout, x)]

    _backend.lap_apply(
        x, scratch, grad, layout.tails, layout.heads, layout.voff, layout.eoff,
        layout.vdims, layout.edims, layout.rt, layout.rh, layout.rtoff, layout.rhoff,
    )
    first_delta = eta * float(np.max(np.abs(grad), initial=0.0))
    if first_delta < cfg.converge_tol:
        return FlowTrace(tuple(states), tuple(energies), True, 0)

    steps_taken = 0
    converged = False
    diagnostic: str | None = None
    last_energy = energies[0]
    while steps_taken < cfg.max_steps:
        chunk = min(cfg.record_every, cfg.max_steps - steps_taken)
        done, delta = _backend.euler_chunk(
            x, scratch, grad, layout.tails, layout.heads, layout.voff, layout.eoff,
            layout.vdims, layout.edims, layout.rt, layout.rh, layout.rtoff, layout.rhoff,
            eta, chunk, cfg.converge_tol,
        )
        steps_taken += done
        energy = _linear_energy(layout, x)
        states.append((steps_taken, Cochain0.from_flat(sheaf.vertex_dims, x)))
        energies.append(energy)
        if not math.isfinite(energy) or energy > last_energy + _ENERGY_SLACK:
            diagnostic = (
                f"energy increased at step {steps_taken} "
                f"({last_energy!r} -> {energy!r}); step size {eta!r} exceeds the stability bound"
            )
            break
        last_energy = energy
        if delta < cfg.converge_tol:
            converged = True
            break
    return FlowTrace(tuple(states), tuple(energies), converged, steps_taken, diagnostic)


def _check_potentials(sheaf: CellularSheaf, potentials: Sequence[EdgePotential]) -> None:
    if len(potentials) != sheaf.graph.edge_count:
        raise ValueError(
            f"got {len(potentials)} potentials for {sheaf.graph.edge_count} edges"
        )


def edge_targets(sheaf: CellularSheaf, potentials: Sequence[EdgePotential]) -> Cochain1:
    """Assemble the per-edge pull targets b_e (zero for indicator potentials)."""
    _check_potentials(sheaf, potentials)
    blocks = []
    for e, pot in enumerate(potentials):
        if isinstance(pot, ZeroIndicatorPotential):
            blocks.append(np.zeros(sheaf.edge_dims[e]))
        else:
            blocks.append(pot.minimizer_target())
    return Cochain1(tuple(blocks))


def nonlinear_laplacian_apply(
    sheaf: CellularSheaf, potentials: Sequence[EdgePotential], x: Cochain0
) -> Cochain0:
    """The nonlinear Laplacian delta^T grad U(delta x).

    This is the gradient of sum_e U_e((delta x)_e): the tail endpoint feels
    +F^T grad U_e, the head -F^T grad U_e (chain rule through the signed
    coboundary).
    """
    layout = _layout_of(sheaf)
    _check_cochain0(sheaf, x)
    _check_potentials(sheaf, potentials)
    for pot in potentials:
        if not pot.differentiable:
            raise ValueError(
                "potential is not differentiable; use the prox-based solver (admm_solve)"
            )
    y = _cob_flat(layout, x.to_flat())
    g = np.empty_like(y)
    for e in range(sheaf.graph.edge_count):
        lo, hi = layout.eoff[e], layout.eoff[e + 1]
        g[lo:hi] = potentials[e].gradient(y[lo:hi])
    out = _cobt_flat(layout, g)
    return Cochain0.from_flat(sheaf.vertex_dims, out)


def _potential_energy(layout, potentials, y_flat: np.ndarray) -> float:
    total = 0.0
    for e in range(len(potentials)):
        total += potentials[e].value(y_flat[layout.eoff[e] : layout.eoff[e + 1]])
    return total


def nonlinear_heat_flow(
    sheaf: CellularSheaf,
    potentials: Sequence[EdgePotential],
    x0: Cochain0,
    cfg: FlowConfig,
) -> FlowTrace:
    """Explicit-Euler integration of x' = -delta^T grad U(delta x).

    With feasible targets (b in the image of delta) the terminal state
    satisfies delta x = b to within the tolerance; with infeasible targets it
    settles at the least-squares stationary point, where the total-energy
    gradient vanishes but ||delta x - b|| does not.
    """
    layout = _layout_of(sheaf)
    _check_cochain0(sheaf, x0)
    _check_potentials(sheaf, potentials)
    for pot in potentials:
        if not pot.differentiable:
            raise ValueError(
                "potential is not differentiable; use the prox-based solver (admm_solve)"
            )

    if cfg.step_size > 0:
        eta = cfg.step_size
    else:
        kappa = max((pot.curvature_bound() for pot in potentials), default=0.0)
        if kappa <= 0:
            kappa = 1.0
        eta = 1.0 / (estimate_spectral_bound(sheaf) * kappa)

    # Fast path: all-quadratic potentials reduce the per-step gradient to one
    # vectorized expression over the flat edge layout.
    all_quadratic = all(isinstance(p, QuadraticPotential) for p in potentials)
    if all_quadratic and sheaf.graph.edge_count:
        kvec = np.concatenate(
            [np.full(sheaf.edge_dims[e], potentials[e].stiffness) for e in range(len(potentials))]
        )
        bvec = np.concatenate([potentials[e].target for e in range(len(potentials))])
        if bvec.size != layout.total_edge_dim:
            raise ValueError("potential target lengths do not match the edge stalk dimensions")
    else:
        kvec = bvec = None

    x = x0.to_flat().copy()

    def edge_grad(y_flat: np.ndarray) -> np.ndarray:
        if kvec is not None:
            return kvec * (y_flat - bvec)
        g = np.empty_like(y_flat)
        for e in range(sheaf.graph.edge_count):
            lo, hi = layout.eoff[e], layout.eoff[e + 1]
            g[lo:hi] = potentials[e].gradient(y_flat[lo:hi])
        return g

    y = _cob_flat(layout, x)
    states = [(0, Cochain0.from_flat(sheaf.vertex_dims, x))]
    energies = [_potential_energy(layout, potentials, y)]

    force = _cobt_flat(layout, edge_grad(y))
    if eta * float(np.max(np.abs(force), initial=0.0)) < cfg.converge_tol:
        return FlowTrace(tuple(states), tuple(energies), True, 0)

    steps_taken = 0
    converged = False
    diagnostic: str | None = None
    last_energy = energies[0]
    while steps_taken < cfg.max_steps:
        chunk = min(cfg.record_every, cfg.max_steps - steps_taken)
        delta = math.inf
        for _ in range(chunk):
            y = _cob_flat(layout, x)
            step = eta * _cobt_flat(layout, edge_grad(y))
            x -= step
            delta = float(np.max(np.abs(step), initial=0.0))
            steps_taken += 1
            if delta < cfg.converge_tol:
                break
        y = _cob_flat(layout, x)
        energy = _potential_energy(layout, potentials, y)
        states.append((steps_taken, Cochain0.from_flat(sheaf.vertex_dims, x)))
        energies.append(energy)
        if not math.isfinite(energy) or energy > last_energy + _ENERGY_SLACK:
            diagnostic = (
                f"energy increased at step {steps_taken} "
                f"({last_energy!r} -> {energy!r}); step size {eta!r} exceeds the stability bound"
            )
            break
        last_energy = energy
        if delta < cfg.converge_tol:
            converged = True
            break
    return FlowTrace(tuple(states), tuple(energies), converged, steps_taken, diagnostic)


def harmonic_projection(sheaf: CellularSheaf, x0: Cochain0, null_tol: float = 1e-9) -> Cochain0:
    """Orthogonal projection of x0 onto the global sections (ker L).

    This is the analytic limit of :func:`linear_heat_flow`.
    """
    _check_cochain0(sheaf, x0)
    basis = global_section_basis(sheaf, null_tol)
    xf = x0.to_flat()
    proj = np.zeros_like(xf)
    for b in basis.basis:
        bf = b.to_flat()
        proj += (bf @ xf) * bf
    return Cochain0.from_flat(sheaf.vertex_dims, proj)
