"""Distributed message-passing simulation vs. the centralized solver."""

import numpy as np
import pytest

from sheafcoord import (
    AdmmConfig,
    Cochain0,
    FixedValueObjective,
    Graph,
    HomologicalProgram,
    LocalityViolation,
    Mode,
    QuadraticObjective,
    RoundLog,
    STATUS_CONVERGED,
    ZeroIndicatorPotential,
    ZeroObjective,
    admm_solve,
    audit_locality,
    run_distributed,
)
from sheafcoord.core import CellularSheaf

from conftest import (
    consensus_sheaf,
    near_identity_sheaf,
    random_cochain0,
    random_graph,
    random_soft_program,
)


def _pinned_consensus(n=5, value=7.0):
    sheaf = consensus_sheaf(n)
    return HomologicalProgram(
        sheaf,
        (FixedValueObjective(point=np.array([value])),) + (ZeroObjective(),) * (n - 1),
        (ZeroIndicatorPotential(),) * (n - 1),
        Mode.HARD_CONSTRAINT,
    )


class TestEquivalence:
    def test_bitwise_identical_to_centralized_on_random_programs(self):
        rng = np.random.default_rng(81)
        cfg = AdmmConfig(max_iters=300)
        for _ in range(5):
            sheaf = near_identity_sheaf(rng, random_graph(rng, max_vertices=6))
            prog = random_soft_program(rng, sheaf)
            x0 = random_cochain0(rng, sheaf)
            xc, tc = admm_solve(prog, cfg, x0=x0)
            xd, td, logs = run_distributed(prog, cfg, x0=x0)
            for a, b in zip(xc.blocks, xd.blocks):
                assert np.array_equal(a, b)
            assert tc.primal_residuals == td.primal_residuals
            assert tc.dual_residuals == td.dual_residuals
            assert tc.objectives == td.objectives
            assert tc.status == td.status
            assert tc.iterations == td.iterations

    def test_hard_program_matches_too(self):
        prog = _pinned_consensus()
        cfg = AdmmConfig(rho=1.0, max_iters=5000, primal_tol=1e-10, dual_tol=1e-10)
        xc, tc = admm_solve(prog, cfg)
        xd, td, _ = run_distributed(prog, cfg)
        assert td.status == STATUS_CONVERGED
        assert np.array_equal(xc.to_flat(), xd.to_flat())
        assert tc.iterations == td.iterations


class TestRoundAccounting:
    def test_two_messages_per_edge_per_round(self):
        prog = _pinned_consensus(n=4)
        cfg = AdmmConfig(max_iters=50)
        _, trace, logs = run_distributed(prog, cfg)
        m = prog.sheaf.graph.edge_count
        # one bootstrap round plus one communication round per iteration
        assert len(logs) == trace.iterations + 1
        assert [log.round_index for log in logs] == list(range(len(logs)))
        for log in logs:
            assert log.messages_sent == 2 * m

    def test_bytes_follow_the_payload_sizes(self):
        rng = np.random.default_rng(82)
        sheaf = near_identity_sheaf(rng, random_graph(rng, max_vertices=5))
        prog = random_soft_program(rng, sheaf)
        _, _, logs = run_distributed(prog, AdmmConfig(max_iters=20))
        # every payload is a restricted state + its dual mirror, both of the
        # edge stalk dimension, sent once in each direction
        per_round = sum(8 * (2 * d + 2 * d) for d in sheaf.edge_dims)
        for log in logs:
            assert log.bytes_sent == per_round

    def test_read_sets_match_incidences(self):
        prog = _pinned_consensus(n=5)
        _, _, logs = run_distributed(prog, AdmmConfig(max_iters=30))
        report = audit_locality(logs)
        assert report.ok
        assert report.violations == ()
        for log in logs:
            incident = dict(log.incidences)
            for agent, reads in log.read_sets:
                assert set(reads) <= set(incident[agent])

    def test_injected_violation_is_named(self):
        prog = _pinned_consensus(n=3)
        _, _, logs = run_distributed(prog, AdmmConfig(max_iters=10))
        log = logs[3]
        # agent 0 is incident to edge 0 only; forge a read of edge 1
        tampered = RoundLog(
            round_index=log.round_index,
            messages_sent=log.messages_sent,
            bytes_sent=log.bytes_sent,
            read_sets=tuple(
                (agent, reads + (1,)) if agent == 0 else (agent, reads)
                for agent, reads in log.read_sets
            ),
            incidences=log.incidences,
        )
        report = audit_locality(logs[:3] + [tampered] + logs[4:])
        assert not report.ok
        assert LocalityViolation(agent=0, edge=1, round_index=3) in report.violations
        assert "agent 0" in str(report.violations[0])


class TestDeterminism:
    def test_repeat_runs_are_bit_identical(self):
        rng = np.random.default_rng(83)
        sheaf = near_identity_sheaf(rng, random_graph(rng, max_vertices=6))
        prog = random_soft_program(rng, sheaf)
        x0 = random_cochain0(rng, sheaf)
        cfg = AdmmConfig(max_iters=200)
        x1, t1, logs1 = run_distributed(prog, cfg, x0=x0)
        x2, t2, logs2 = run_distributed(prog, cfg, x0=x0)
        assert np.array_equal(x1.to_flat(), x2.to_flat())
        assert t1.primal_residuals == t2.primal_residuals
        assert t1.dual_residuals == t2.dual_residuals
        assert [l.bytes_sent for l in logs1] == [l.bytes_sent for l in logs2]
        assert [l.read_sets for l in logs1] == [l.read_sets for l in logs2]


class TestEdgeCases:
    def test_single_agent_sends_nothing_and_solves_alone(self):
        graph = Graph(1, ())
        sheaf = CellularSheaf(graph, (2,), (), ())
        ref = np.array([3.0, -1.0])
        prog = HomologicalProgram(
            sheaf,
            (QuadraticObjective(reference=ref, weight=2.0),),
            (),
            Mode.SOFT,
        )
        x, trace, logs = run_distributed(prog, AdmmConfig(max_iters=100))
        assert trace.status == STATUS_CONVERGED
        assert np.allclose(x.blocks[0], ref, atol=1e-8)
        assert all(log.messages_sent == 0 for log in logs)
        assert all(log.bytes_sent == 0 for log in logs)

    def test_rejects_malformed_initial_state(self):
        prog = _pinned_consensus(n=3)
        bad = Cochain0((np.zeros(1), np.zeros(2), np.zeros(1)))
        with pytest.raises(ValueError):
            run_distributed(prog, AdmmConfig(max_iters=5), x0=bad)

    def test_record_iterates_round_trips_snapshots(self):
        prog = _pinned_consensus(n=4)
        cfg = AdmmConfig(max_iters=40)
        _, tc = admm_solve(prog, cfg, record_iterates=True)
        _, td, _ = run_distributed(prog, cfg, record_iterates=True)
        assert td.snapshots is not None
        assert len(td.snapshots) == len(tc.snapshots)
        for sc, sd in zip(tc.snapshots, td.snapshots):
            assert np.array_equal(sc.x.to_flat(), sd.x.to_flat())
            assert np.array_equal(sc.z.to_flat(), sd.z.to_flat())
            assert np.array_equal(sc.y.to_flat(), sd.y.to_flat())
