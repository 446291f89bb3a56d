"""Homological programs and the damped Jacobi ADMM solver."""

import math

import numpy as np
import pytest
import scipy.optimize

from sheafcoord import (
    AdmmConfig,
    BoxObjective,
    Cochain0,
    FixedValueObjective,
    HomologicalProgram,
    HuberPotential,
    Mode,
    QuadraticObjective,
    QuadraticPotential,
    STATUS_CONVERGED,
    STATUS_MAX_ITERS,
    ZeroIndicatorPotential,
    ZeroObjective,
    admm_solve,
    apply_coboundary,
    check_feasibility,
    coboundary_dense,
    compute_residuals,
    is_global_section,
    program_objective,
)

from conftest import (
    consensus_sheaf,
    near_identity_sheaf,
    path_graph,
    random_cochain0,
    random_graph,
)


def _quadratic_program(rng, sheaf, w_lo=0.5, w_hi=2.0):
    """All-quadratic soft program with strictly positive node weights."""
    objs = []
    for i in range(sheaf.graph.vertex_count):
        objs.append(
            QuadraticObjective(
                reference=rng.normal(size=sheaf.vertex_dims[i]),
                weight=float(rng.uniform(w_lo, w_hi)),
            )
        )
    pots = []
    for e in range(sheaf.graph.edge_count):
        pots.append(
            QuadraticPotential(
                target=rng.normal(size=sheaf.edge_dims[e]),
                stiffness=float(rng.uniform(0.5, 1.5)),
            )
        )
    return HomologicalProgram(sheaf, tuple(objs), tuple(pots), Mode.SOFT)


def _dense_quadratic_solution(prog):
    """Closed form for the all-quadratic program: (W + B^T K B) x = W r + B^T K b."""
    sheaf = prog.sheaf
    B = coboundary_dense(sheaf).array
    W = np.concatenate(
        [
            np.full(sheaf.vertex_dims[i], prog.node_objectives[i].weight)
            for i in range(sheaf.graph.vertex_count)
        ]
    )
    r = np.concatenate([obj.reference for obj in prog.node_objectives])
    K = np.concatenate(
        [
            np.full(sheaf.edge_dims[e], prog.edge_potentials[e].stiffness)
            for e in range(sheaf.graph.edge_count)
        ]
    )
    b = np.concatenate([pot.target for pot in prog.edge_potentials])
    A = np.diag(W) + B.T @ (K[:, None] * B)
    rhs = W * r + B.T @ (K * b)
    return np.linalg.solve(A, rhs)


class TestProgramValidation:
    def test_objective_count_must_match_vertices(self):
        sheaf = consensus_sheaf(3)
        with pytest.raises(ValueError, match="node objective per vertex"):
            HomologicalProgram(
                sheaf, (ZeroObjective(),), (ZeroIndicatorPotential(),) * 2, Mode.SOFT
            )

    def test_potential_count_must_match_edges(self):
        sheaf = consensus_sheaf(3)
        with pytest.raises(ValueError, match="edge potential per edge"):
            HomologicalProgram(
                sheaf, (ZeroObjective(),) * 3, (ZeroIndicatorPotential(),), Mode.SOFT
            )

    def test_hard_mode_requires_indicator_potentials(self):
        sheaf = consensus_sheaf(3)
        pots = (
            ZeroIndicatorPotential(),
            QuadraticPotential(target=np.zeros(1), stiffness=1.0),
        )
        with pytest.raises(ValueError, match="edge 1"):
            HomologicalProgram(
                sheaf, (ZeroObjective(),) * 3, pots, Mode.HARD_CONSTRAINT
            )


class TestAdmmConfig:
    @pytest.mark.parametrize(
        "kwargs,match",
        [
            (dict(rho=0.0), "rho"),
            (dict(max_iters=0), "max_iters"),
            (dict(primal_tol=0.0), "tolerances"),
            (dict(dual_tol=-1.0), "tolerances"),
            (dict(inner_diffusion_steps=-1), "inner_diffusion_steps"),
            (dict(inner_step=-0.5), "inner_step"),
            (dict(relaxation=0.0), "relaxation"),
            (dict(relaxation=1.5), "relaxation"),
        ],
    )
    def test_rejects_bad_settings(self, kwargs, match):
        with pytest.raises(ValueError, match=match):
            AdmmConfig(**kwargs)


class TestProgramObjective:
    def test_quadratic_terms_sum_by_hand(self):
        sheaf = consensus_sheaf(2)
        prog = HomologicalProgram(
            sheaf,
            (
                QuadraticObjective(reference=np.array([1.0]), weight=2.0),
                ZeroObjective(),
            ),
            (QuadraticPotential(target=np.array([0.5]), stiffness=3.0),),
            Mode.SOFT,
        )
        x = Cochain0((np.array([2.0]), np.array([-1.0])))
        # node: (2/2)(2-1)^2 = 1; edge: delta x = 2 - (-1) = 3, (3/2)(3-0.5)^2
        want = 1.0 + 1.5 * 2.5**2
        assert program_objective(prog, x) == pytest.approx(want, rel=1e-14)

    def test_hard_program_is_indicator_valued(self):
        sheaf = consensus_sheaf(3)
        prog = HomologicalProgram(
            sheaf,
            (FixedValueObjective(point=np.array([7.0])), ZeroObjective(), ZeroObjective()),
            (ZeroIndicatorPotential(),) * 2,
            Mode.HARD_CONSTRAINT,
        )
        sevens = Cochain0(tuple(np.array([7.0]) for _ in range(3)))
        assert program_objective(prog, sevens) == 0.0
        broken = Cochain0((np.array([7.0]), np.array([7.0]), np.array([8.0])))
        assert program_objective(prog, broken) == math.inf
        wrong_pin = Cochain0(tuple(np.array([1.0]) for _ in range(3)))
        assert program_objective(prog, wrong_pin) == math.inf


class TestQuadraticPrograms:
    def test_matches_dense_closed_form(self):
        rng = np.random.default_rng(61)
        cfg = AdmmConfig(rho=1.0, max_iters=60000, primal_tol=1e-11, dual_tol=1e-11)
        for _ in range(4):
            sheaf = near_identity_sheaf(rng, random_graph(rng, max_vertices=5))
            prog = _quadratic_program(rng, sheaf)
            x, trace = admm_solve(prog, cfg)
            assert trace.status == STATUS_CONVERGED
            want = _dense_quadratic_solution(prog)
            assert np.allclose(x.to_flat(), want, atol=1e-7)

    def test_objective_at_solution_beats_perturbations(self):
        rng = np.random.default_rng(62)
        sheaf = near_identity_sheaf(rng, path_graph(4))
        prog = _quadratic_program(rng, sheaf)
        x, _ = admm_solve(prog, AdmmConfig(primal_tol=1e-10, dual_tol=1e-10))
        base = program_objective(prog, x)
        for _ in range(10):
            bump = random_cochain0(rng, sheaf)
            pert = Cochain0(
                tuple(x.blocks[i] + 1e-3 * bump.blocks[i] for i in range(len(x.blocks)))
            )
            assert program_objective(prog, pert) >= base - 1e-9


class TestPinnedConsensus:
    def test_hard_pin_propagates_to_every_vertex(self):
        sheaf = consensus_sheaf(5)
        prog = HomologicalProgram(
            sheaf,
            (FixedValueObjective(point=np.array([7.0])),)
            + (ZeroObjective(),) * 4,
            (ZeroIndicatorPotential(),) * 4,
            Mode.HARD_CONSTRAINT,
        )
        cfg = AdmmConfig(rho=1.0, max_iters=10000, primal_tol=1e-10, dual_tol=1e-10)
        x, trace = admm_solve(prog, cfg)
        assert trace.status == STATUS_CONVERGED
        assert np.allclose(x.to_flat(), 7.0, atol=1e-8)
        assert is_global_section(sheaf, x, tol=1e-7)


class TestBoxPrograms:
    def test_matches_scipy_bounded_minimizer(self):
        rng = np.random.default_rng(63)
        sheaf = consensus_sheaf(3)
        lo, hi = -0.5, 0.5
        refs = [2.0, -3.0, 0.1]
        prog = HomologicalProgram(
            sheaf,
            (
                QuadraticObjective(reference=np.array([refs[0]]), weight=1.0),
                BoxObjective(lower=np.array([lo]), upper=np.array([hi])),
                QuadraticObjective(reference=np.array([refs[1]]), weight=1.0),
            ),
            (
                QuadraticPotential(target=np.array([0.0]), stiffness=1.0),
                QuadraticPotential(target=np.array([0.25]), stiffness=2.0),
            ),
            Mode.SOFT,
        )

        def total(v):
            out = 0.5 * (v[0] - refs[0]) ** 2 + 0.5 * (v[2] - refs[1]) ** 2
            out += 0.5 * (v[0] - v[1]) ** 2
            out += 1.0 * ((v[1] - v[2]) - 0.25) ** 2
            return out

        res = scipy.optimize.minimize(
            total,
            np.zeros(3),
            method="L-BFGS-B",
            bounds=[(None, None), (lo, hi), (None, None)],
            options={"ftol": 1e-15, "gtol": 1e-12},
        )
        x, trace = admm_solve(
            prog, AdmmConfig(max_iters=60000, primal_tol=1e-11, dual_tol=1e-11)
        )
        assert trace.status == STATUS_CONVERGED
        assert np.allclose(x.to_flat(), res.x, atol=1e-6)
        assert lo - 1e-9 <= float(x.blocks[1][0]) <= hi + 1e-9


class TestHuberPrograms:
    def test_matches_scipy_smooth_minimizer(self):
        rng = np.random.default_rng(64)
        sheaf = near_identity_sheaf(rng, path_graph(3))
        objs = tuple(
            QuadraticObjective(reference=rng.normal(size=2), weight=1.0)
            for _ in range(3)
        )
        pots = tuple(
            HuberPotential(target=rng.normal(size=2) * 2.0, stiffness=1.0, threshold=0.4)
            for _ in range(2)
        )
        prog = HomologicalProgram(sheaf, objs, pots, Mode.SOFT)

        def total(v):
            xc = Cochain0.from_flat(sheaf.vertex_dims, v)
            return program_objective(prog, xc)

        res = scipy.optimize.minimize(total, np.zeros(6), method="BFGS", options={"gtol": 1e-12})
        x, trace = admm_solve(
            prog, AdmmConfig(max_iters=60000, primal_tol=1e-11, dual_tol=1e-11)
        )
        assert trace.status == STATUS_CONVERGED
        assert np.allclose(x.to_flat(), res.x, atol=1e-5)


class TestTraceInternals:
    def test_compute_residuals_reproduces_trace(self):
        rng = np.random.default_rng(65)
        sheaf = near_identity_sheaf(rng, path_graph(4))
        prog = _quadratic_program(rng, sheaf)
        x, trace = admm_solve(
            prog, AdmmConfig(max_iters=50), record_iterates=True
        )
        assert trace.snapshots is not None
        assert len(trace.snapshots) == trace.iterations
        for k in range(1, trace.iterations):
            r = compute_residuals(prog, trace.snapshots[k - 1], trace.snapshots[k], trace.rho)
            assert r.primal == trace.primal_residuals[k]
            assert r.dual == trace.dual_residuals[k]

    def test_unscaled_dual_satisfies_z_stationarity(self):
        # The z-prox update makes grad U(z_k) = rho * y_k hold exactly at
        # every iterate, not just in the limit.
        rng = np.random.default_rng(66)
        sheaf = near_identity_sheaf(rng, path_graph(3))
        prog = _quadratic_program(rng, sheaf)
        _, trace = admm_solve(prog, AdmmConfig(max_iters=40), record_iterates=True)
        for k in (0, 5, trace.iterations - 1):
            lam = trace.unscaled_dual(k)
            z = trace.snapshots[k].z
            for e, pot in enumerate(prog.edge_potentials):
                want = pot.stiffness * (z.blocks[e] - pot.target)
                assert np.allclose(lam.blocks[e], want, atol=1e-10)

    def test_unscaled_dual_requires_snapshots(self):
        rng = np.random.default_rng(67)
        sheaf = near_identity_sheaf(rng, path_graph(3))
        prog = _quadratic_program(rng, sheaf)
        _, trace = admm_solve(prog, AdmmConfig(max_iters=5))
        with pytest.raises(ValueError, match="snapshots"):
            trace.unscaled_dual(0)

    def test_trace_lengths_and_status_strings(self):
        rng = np.random.default_rng(68)
        sheaf = near_identity_sheaf(rng, path_graph(3))
        prog = _quadratic_program(rng, sheaf)
        _, trace = admm_solve(prog, AdmmConfig(max_iters=7))
        assert trace.status == STATUS_MAX_ITERS == "MaxIters"
        assert STATUS_CONVERGED == "Converged"
        assert trace.iterations == 7
        assert len(trace.primal_residuals) == 7
        assert len(trace.dual_residuals) == 7
        assert len(trace.objectives) == 7


class TestFeasibility:
    def test_soft_programs_are_always_feasible(self):
        rng = np.random.default_rng(71)
        sheaf = near_identity_sheaf(rng, path_graph(4))
        prog = _quadratic_program(rng, sheaf)
        report = check_feasibility(prog, tol=1e-8)
        assert report.feasible
        assert report.witness is not None
        assert math.isfinite(program_objective(prog, report.witness))

    def test_hard_pin_is_feasible_with_section_witness(self):
        sheaf = consensus_sheaf(4)
        prog = HomologicalProgram(
            sheaf,
            (FixedValueObjective(point=np.array([7.0])),) + (ZeroObjective(),) * 3,
            (ZeroIndicatorPotential(),) * 3,
            Mode.HARD_CONSTRAINT,
        )
        report = check_feasibility(prog, tol=1e-8)
        assert report.feasible
        assert is_global_section(sheaf, report.witness, tol=1e-8)
        assert program_objective(prog, report.witness) == 0.0

    def test_conflicting_pins_are_infeasible(self):
        sheaf = consensus_sheaf(2)
        prog = HomologicalProgram(
            sheaf,
            (
                FixedValueObjective(point=np.array([0.0])),
                FixedValueObjective(point=np.array([1.0])),
            ),
            (ZeroIndicatorPotential(),),
            Mode.HARD_CONSTRAINT,
        )
        report = check_feasibility(prog, tol=1e-8)
        assert not report.feasible
        assert report.residual > 0.1

    def test_infeasible_hard_program_stalls_with_diagnostic(self):
        sheaf = consensus_sheaf(2)
        prog = HomologicalProgram(
            sheaf,
            (
                FixedValueObjective(point=np.array([0.0])),
                FixedValueObjective(point=np.array([1.0])),
            ),
            (ZeroIndicatorPotential(),),
            Mode.HARD_CONSTRAINT,
        )
        _, trace = admm_solve(prog, AdmmConfig(max_iters=800))
        assert trace.status == STATUS_MAX_ITERS
        assert trace.diagnostic is not None
        assert "infeasib" in trace.diagnostic.lower()


class TestInnerDiffusion:
    def test_diffusion_z_update_tracks_the_prox_answer(self):
        rng = np.random.default_rng(72)
        sheaf = near_identity_sheaf(rng, path_graph(3))
        prog = _quadratic_program(rng, sheaf)
        want = _dense_quadratic_solution(prog)
        x, trace = admm_solve(
            prog,
            AdmmConfig(
                max_iters=60000,
                primal_tol=1e-9,
                dual_tol=1e-9,
                inner_diffusion_steps=60,
            ),
        )
        assert trace.status == STATUS_CONVERGED
        assert np.allclose(x.to_flat(), want, atol=1e-4)


class TestWarmStart:
    def test_solution_is_independent_of_the_start(self):
        rng = np.random.default_rng(73)
        sheaf = near_identity_sheaf(rng, path_graph(4))
        prog = _quadratic_program(rng, sheaf)
        cfg = AdmmConfig(primal_tol=1e-10, dual_tol=1e-10, max_iters=60000)
        x, trace = admm_solve(prog, cfg)
        # restarting from the answer is never slower (the duals still ramp up
        # from zero, so it is not instant either)
        x2, trace2 = admm_solve(prog, cfg, x0=x)
        assert trace2.iterations <= trace.iterations
        assert np.allclose(x2.to_flat(), x.to_flat(), atol=1e-7)
        x3, _ = admm_solve(prog, cfg, x0=random_cochain0(rng, sheaf))
        assert np.allclose(x3.to_flat(), x.to_flat(), atol=1e-7)
