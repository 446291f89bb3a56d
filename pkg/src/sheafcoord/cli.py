"""Command-line interface: cohomology reports, flows, solves, scenario listing.

Verbs:
    sheafcoord cohomology SCENARIO [--n N]
    sheafcoord flow SCENARIO [--n N] [--nonlinear] [--steps K] [--out FILE]
    sheafcoord solve SCENARIO [--n N] [--distributed] [--rho R]
                     [--max-iters K] [--out FILE]
    sheafcoord scenarios list

SCENARIO is either a path to a scenario JSON file or the name of a built-in
scenario (``sheafcoord scenarios list`` shows them).  ``--n`` selects a
member of a built-in family, e.g. ``sign-cycle --n 3`` loads sign-cycle-3.

Exit codes: 0 = run completed (including MaxIters -- the status field in the
terminal report carries the outcome), 1 = usage error, 2 = invalid scenario.
The environment variable SHEAFCOORD_SEED overrides the scenario's solver
seed.  Repeated runs of the same scenario write byte-identical trace files.
"""

from __future__ import annotations

import dataclasses
import math
import os
from collections.abc import Sequence
from pathlib import Path

import click
import numpy as np

from .core import apply_coboundary, global_section_basis, h1_dimension, is_global_section
from .distsim import run_distributed
from .dynamics import FlowTrace, edge_targets, linear_heat_flow, nonlinear_heat_flow
from .homprog import admm_solve
from .scenario import (
    Scenario,
    ScenarioError,
    builtin_scenario_names,
    format_float,
    load_builtin_scenario,
    load_scenario,
    terminal_report,
    write_trace_csv,
)

__all__ = ["main", "cli"]

_SECTION_TOL = 1e-6


def _resolve_scenario(name: str, n: int | None) -> Scenario:
    builtins = builtin_scenario_names()
    target = f"{name}-{n}" if n is not None else name
    if target in builtins:
        return load_builtin_scenario(target)
    if n is not None:
        raise click.UsageError(
            f"--n selects a built-in scenario family, and {target!r} is not built in"
        )
    if Path(name).exists():
        return load_scenario(name)
    family = sorted(b for b in builtins if b.startswith(name + "-"))
    if family:
        raise click.UsageError(
            f"{name!r} is a scenario family ({', '.join(family)}); pass --n to pick one"
        )
    raise ScenarioError(f"no scenario file or built-in named {name!r}")


def _solver_config(scenario: Scenario, rho: float | None, max_iters: int | None):
    cfg = scenario.solver
    seed_text = os.environ.get("SHEAFCOORD_SEED")
    if seed_text is not None:
        try:
            cfg = dataclasses.replace(cfg, seed=int(seed_text))
        except ValueError:
            raise click.UsageError(f"SHEAFCOORD_SEED must be an integer, got {seed_text!r}") from None
    if rho is not None:
        cfg = dataclasses.replace(cfg, rho=rho)
    if max_iters is not None:
        cfg = dataclasses.replace(cfg, max_iters=max_iters)
    return cfg


@click.group(name="sheafcoord")
def cli() -> None:
    """Coordination problems on cellular sheaves: diagnose, flow, solve."""


@cli.command()
@click.argument("scenario")
@click.option("--n", type=int, default=None, help="Variant index for built-in scenario families.")
def cohomology(scenario: str, n: int | None) -> None:
    """Report dim H0, dim H1, and an orthonormal global-section basis."""
    sc = _resolve_scenario(scenario, n)
    sheaf = sc.program.sheaf
    sections = global_section_basis(sheaf)
    click.echo(f"dim_h0 = {sections.dimension}")
    click.echo(f"dim_h1 = {h1_dimension(sheaf)}")
    if sections.dimension == 0:
        click.echo("section_basis: (empty)")
    else:
        click.echo("section_basis:")
        for vec in sections.basis:
            blocks = ", ".join("[" + ", ".join(format_float(v) for v in b) + "]" for b in vec.blocks)
            click.echo(f"  [{blocks}]")


def _flow_rows(sheaf, potentials, trace: FlowTrace) -> list[tuple[int, float, float, float]]:
    """CSV rows for a flow run on the solver-trace schema.

    primal_residual = ||delta x - t||_2 with t the per-edge minimizer targets
    (zero for the linear flow), dual_residual = max-norm step change,
    objective = the flow's energy.
    """
    if potentials is None:
        targets = None
    else:
        targets = edge_targets(sheaf, potentials)
    rows = []
    for k in range(1, len(trace.states)):
        _, x = trace.states[k]
        d = apply_coboundary(sheaf, x)
        if targets is None:
            primal = math.sqrt(sum(float(b @ b) for b in d.blocks))
        else:
            primal = math.sqrt(
                sum(float((b - t) @ (b - t)) for b, t in zip(d.blocks, targets.blocks))
            )
        prev = trace.states[k - 1][1]
        dual = max(
            (float(np.max(np.abs(b - p))) for b, p in zip(x.blocks, prev.blocks) if b.size),
            default=0.0,
        )
        rows.append((trace.states[k][0], primal, dual, trace.energies[k]))
    return rows


@cli.command()
@click.argument("scenario")
@click.option("--n", type=int, default=None, help="Variant index for built-in scenario families.")
@click.option("--nonlinear", is_flag=True, help="Integrate the nonlinear flow driven by the edge potentials.")
@click.option("--steps", type=int, default=None, help="Override the scenario's max_steps.")
@click.option("--out", type=click.Path(dir_okay=False, writable=True), default="flow_trace.csv", show_default=True)
def flow(scenario: str, n: int | None, nonlinear: bool, steps: int | None, out: str) -> None:
    """Run the heat flow from the scenario's initial state and write its trace."""
    sc = _resolve_scenario(scenario, n)
    if sc.initial_state is None:
        raise ScenarioError("initial_state: the flow command needs an initial state")
    sheaf = sc.program.sheaf
    cfg = dataclasses.replace(sc.flow, record_every=1)
    if steps is not None:
        try:
            cfg = dataclasses.replace(cfg, max_steps=steps)
        except ValueError as exc:
            raise click.UsageError(str(exc)) from None

    if nonlinear:
        potentials = sc.program.edge_potentials
        trace = nonlinear_heat_flow(sheaf, potentials, sc.initial_state, cfg)
    else:
        potentials = None
        trace = linear_heat_flow(sheaf, sc.initial_state, cfg)

    write_trace_csv(out, _flow_rows(sheaf, potentials, trace))
    x = trace.final_state
    if trace.converged:
        status = "Converged"
    elif trace.diagnostic is not None:
        status = "Stopped"
    else:
        status = "MaxIters"
    click.echo(terminal_report(status, x, apply_coboundary(sheaf, x)))
    section = is_global_section(sheaf, x, _SECTION_TOL)
    click.echo(f"is_global_section: {'true' if section else 'false'}")
    if trace.diagnostic is not None:
        click.echo(f"diagnostic: {trace.diagnostic}")


@cli.command()
@click.argument("scenario")
@click.option("--n", type=int, default=None, help="Variant index for built-in scenario families.")
@click.option("--distributed", is_flag=True, help="Run on the synchronous message-passing simulator.")
@click.option("--rho", type=float, default=None, help="Override the scenario's penalty parameter.")
@click.option("--max-iters", type=int, default=None, help="Override the scenario's iteration budget.")
@click.option("--out", type=click.Path(dir_okay=False, writable=True), default="solve_trace.csv", show_default=True)
def solve(
    scenario: str,
    n: int | None,
    distributed: bool,
    rho: float | None,
    max_iters: int | None,
    out: str,
) -> None:
    """Solve the scenario's program with ADMM and write the iteration trace."""
    sc = _resolve_scenario(scenario, n)
    try:
        cfg = _solver_config(sc, rho, max_iters)
    except click.UsageError:
        raise
    except ValueError as exc:
        raise click.UsageError(str(exc)) from None

    if distributed:
        x, trace, _logs = run_distributed(sc.program, cfg, sc.initial_state)
    else:
        x, trace = admm_solve(sc.program, cfg, sc.initial_state)

    rows = [
        (k + 1, trace.primal_residuals[k], trace.dual_residuals[k], trace.objectives[k])
        for k in range(trace.iterations)
    ]
    write_trace_csv(out, rows)
    sheaf = sc.program.sheaf
    click.echo(terminal_report(trace.status, x, apply_coboundary(sheaf, x)))
    if trace.diagnostic is not None:
        click.echo(f"diagnostic: {trace.diagnostic}")


@cli.group()
def scenarios() -> None:
    """Inspect the scenarios shipped with the package."""


@scenarios.command(name="list")
def scenarios_list() -> None:
    """List the built-in scenarios."""
    for name in builtin_scenario_names():
        sc = load_builtin_scenario(name)
        click.echo(f"{name}: {sc.description}" if sc.description else name)


def main(argv: Sequence[str] | None = None) -> int:
    """Entry point; returns the exit code instead of raising SystemExit."""
    try:
        cli.main(args=list(argv) if argv is not None else None, standalone_mode=False)
    except ScenarioError as exc:
        click.echo(f"scenario error: {exc}", err=True)
        return 2
    except click.UsageError as exc:
        click.echo(f"usage error: {exc.format_message()}", err=True)
        return 1
    except ValueError as exc:
        click.echo(f"scenario error: {exc}", err=True)
        return 2
    except click.exceptions.Exit as exc:
        return 1 if exc.exit_code else 0
    except click.exceptions.Abort:
        return 1
    except click.ClickException as exc:
        exc.show()
        return 1
    return 0


if __name__ == "__main__":
    raise SystemExit(main())
