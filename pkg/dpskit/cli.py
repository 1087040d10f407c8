"""Command-line interface: check, blocks, tables, cop, ppt2 and export.

Machine-readable output (JSON or CSV) goes to stdout, human summaries to
stderr. `dpskit check` exits with 0 (Feasible), 1 (Infeasible), 2 (Marginal)
or 3 (error).
"""

from __future__ import annotations

import logging
from functools import wraps
from importlib import metadata
from pathlib import Path
from typing import TYPE_CHECKING, Any, Callable, Optional, TypeVar

import typer
from pydantic import ValidationError
from rich.console import Console
from rich.table import Table

from dpskit.client import cached_membership
from dpskit.config import get_settings
from dpskit.cop import (
    cone_verdict,
    copositive_brute_oracle,
    horn_matrix,
    k0_membership,
    kt_report,
    search_objective,
)
from dpskit.enums import Formalism, Hierarchy, Regime, Verdict
from dpskit.exceptions import DpskitError, ParameterError
from dpskit.patterns import (
    TABLE_COLUMNS,
    block_size_table,
    moment_block_layout,
    tensor_block_layout,
)
from dpskit.ppt2 import ExperimentConfig, run_experiment, summary
from dpskit.relax import build_model, to_lmi
from dpskit.schemas import RealMatrixJson, load_json, load_state
from dpskit.sdp import SolverOptions
from dpskit.sdpa import export_sdpa
from dpskit.states import dicke, family_rho_aap, family_rho_ab
from dpskit.util import finite_or_none, serialize_json

if TYPE_CHECKING:  # pragma: no cover
    from dpskit.hermitian import HermitianMatrix

EXIT_ERROR = 3

Command = TypeVar("Command", bound=Callable[..., Any])

app = typer.Typer(no_args_is_help=True, add_completion=False, help=__doc__)
cop_app = typer.Typer(no_args_is_help=True, help="Copositive cone tests.")
ppt2_app = typer.Typer(no_args_is_help=True, help="PPT-squared experiment.")
app.add_typer(cop_app, name="cop")
app.add_typer(ppt2_app, name="ppt2")

err = Console(stderr=True)


def guarded(func: Command) -> Command:
    """Map library errors to exit code 3 with a one-line message."""

    @wraps(func)
    def wrapper(*args: Any, **kwargs: Any) -> Any:  # noqa: ANN401
        try:
            return func(*args, **kwargs)
        except (DpskitError, ValidationError, OSError, ValueError) as exc:
            err.print(f"[red]error:[/red] {exc}")
            raise typer.Exit(EXIT_ERROR) from exc

    return wrapper  # type: ignore[return-value]


@app.callback()
def main(
    verbose: bool = typer.Option(
        False, "--verbose", "-v", help="Debug logging."
    ),
) -> None:
    """Decide separability questions with the DPS hierarchy."""
    level = logging.DEBUG if verbose else get_settings().log_level_value
    logging.getLogger("dpskit").setLevel(level)


def _numbers(text: str, count: int, name: str) -> list[float]:
    try:
        values = [float(part) for part in text.split(",")]
    except ValueError as exc:
        msg = f"{name} takes {count} comma-separated numbers, got {text!r}"
        raise ParameterError(msg) from exc
    if len(values) != count:
        msg = f"{name} takes {count} comma-separated numbers, got {text!r}"
        raise ParameterError(msg)
    return values


def parse_family(spec: str) -> HermitianMatrix:
    """Build a state from `rho_aap:a,a'`, `rho_ab:a,b` or `dicke:n,i,j`.

    Dicke indices are 1-based.
    """
    name, _, args = spec.partition(":")
    if name == "rho_aap":
        a, a_prime = _numbers(args, 2, name)
        return family_rho_aap(a, a_prime)
    if name == "rho_ab":
        a, b = _numbers(args, 2, name)
        return family_rho_ab(a, b)
    if name == "dicke":
        n, i, j = (int(v) for v in _numbers(args, 3, name))
        return dicke(n, i - 1, j - 1)
    msg = f"unknown family {name!r}; use rho_aap, rho_ab or dicke"
    raise ParameterError(msg)


def _state(state: Optional[Path], family: Optional[str]) -> HermitianMatrix:
    if (state is None) == (family is None):
        msg = "give exactly one of --state and --family"
        raise ParameterError(msg)
    if state is not None:
        return load_state(state)
    return parse_family(family or "")


def _range(text: str) -> list[int]:
    """Parse `3-5` or `3,4,5`."""
    if "-" in text:
        low, _, high = text.partition("-")
        return list(range(int(low), int(high) + 1))
    return [int(part) for part in text.split(",")]


@app.command()
@guarded
def check(
    state: Optional[Path] = typer.Option(None, help="State JSON file."),
    family: Optional[str] = typer.Option(
        None, help="rho_aap:a,a' | rho_ab:a,b | dicke:n,i,j"
    ),
    t: int = typer.Option(1, "--t", help="Hierarchy level."),
    regime: Regime = typer.Option(Regime.GENERIC, help="Invariance regime."),
    hierarchy: Hierarchy = typer.Option(Hierarchy.DPS, help="dps or bose."),
    formalism: Formalism = typer.Option(
        Formalism.MOMENT, help="moment or tensor."
    ),
    face_reduction: Optional[bool] = typer.Option(
        None, "--face-reduction/--no-face-reduction"
    ),
    tol: Optional[float] = typer.Option(None, help="Feasibility tolerance."),
) -> None:
    """Decide membership of a state in DPS^(t) and print a JSON report."""
    rho = _state(state, family)
    report = cached_membership(
        rho,
        t,
        regime=regime,
        hierarchy=hierarchy,
        formalism=formalism,
        face_reduction=face_reduction,
        opts=SolverOptions.from_settings(tol=tol),
    )
    typer.echo(report.model_dump_json(exclude={"solution"}))
    verdict = report.verdict
    name = _verdict_name(verdict) if verdict is not None else "error"
    err.print(
        f"{hierarchy.value}^({t}) {regime.value}: [bold]{name}[/bold] "
        f"margin={report.margin} in {report.seconds:.3f}s"
    )
    raise typer.Exit(int(verdict) if verdict is not None else EXIT_ERROR)


@app.command()
@guarded
def blocks(
    n: int = typer.Option(..., help="Local dimension."),
    t: int = typer.Option(..., "--t", help="Hierarchy level."),
    regime: Regime = typer.Option(Regime.GENERIC),
    formalism: Formalism = typer.Option(Formalism.MOMENT),
    json: bool = typer.Option(
        False, "--json", help="Print JSON instead of a table."
    ),
) -> None:
    """Show the block sizes of every PSD constraint."""
    if formalism is Formalism.MOMENT:
        layouts = moment_block_layout(n, t, regime)
    else:
        layouts = [tensor_block_layout(n, t, s, regime) for s in range(t + 1)]
    rows = [
        {
            "shift": layout.shift,
            "sizes": {
                str(k): v
                for k, v in sorted(layout.sizes().items(), reverse=True)
            },
        }
        for layout in layouts
    ]
    if json:
        typer.echo(serialize_json(rows))
        return
    table = Table("shift", "block sizes (size: count)")
    for row in rows:
        sizes = ", ".join(f"{k}: {v}" for k, v in row["sizes"].items())
        table.add_row(str(row["shift"]), sizes)
    Console().print(table)


@app.command()
@guarded
def tables(
    n_range: str = typer.Option("3-5", help="e.g. 3-5 or 3,4"),
    t_range: str = typer.Option("2-7", help="e.g. 2-7"),
    regime: Regime = typer.Option(Regime.GENERIC),
    json: bool = typer.Option(False, "--json"),
) -> None:
    """Print moment block sizes with multiplicities as CSV."""
    rows = block_size_table(_range(n_range), _range(t_range), regime)
    if json:
        typer.echo(serialize_json(rows))
        return
    typer.echo(",".join(TABLE_COLUMNS))
    for row in rows:
        fields = (row.regime.value, row.n, row.t, row.block_size)
        typer.echo(",".join(map(str, (*fields, row.multiplicity))))


def _verdict_name(verdict: Verdict) -> str:
    return verdict.name.capitalize()


@cop_app.command("horn")
@guarded
def cop_horn(
    grid_depth: int = typer.Option(
        12, help="Simplex grid depth for the brute check."
    ),
    json: bool = typer.Option(False, "--json"),
) -> None:
    """Place the Horn matrix between K^(0) and K^(1)."""
    horn = horn_matrix()
    result = {
        "K0": k0_membership(horn),
        "K1": cone_verdict(kt_report(horn, 1)),
        "grid_min": copositive_brute_oracle(horn, grid_depth),
    }
    k0, k1 = _verdict_name(result["K0"]), _verdict_name(result["K1"])
    if json:
        typer.echo(serialize_json({**result, "K0": k0, "K1": k1}))
        return
    typer.echo(f"K0: {k0}, K1: {k1}")
    err.print(f"grid minimum of x^T H x: {result['grid_min']:.3g}")


@cop_app.command("k")
@guarded
def cop_k(
    matrix: Path = typer.Argument(..., help="Real matrix JSON file."),
    t: int = typer.Option(0, "--t", help="Cone level."),
    json: bool = typer.Option(False, "--json"),
) -> None:
    """Decide membership of a matrix in K^(t)."""
    a = load_json(matrix, RealMatrixJson).to_matrix()
    report = kt_report(a, t)
    verdict = cone_verdict(report)
    if json:
        margin = report.margin
        payload = {
            "t": t,
            "verdict": _verdict_name(verdict),
            "margin": None if margin is None else finite_or_none(margin),
        }
        typer.echo(serialize_json(payload))
        return
    typer.echo(f"K{t}: {_verdict_name(verdict)}")


@cop_app.command("search")
@guarded
def cop_search(
    matrix: Path = typer.Argument(
        ..., help="Cost matrix C as real matrix JSON."
    ),
    t: int = typer.Option(2, "--t"),
    json: bool = typer.Option(False, "--json"),
) -> None:
    """Minimize <C, X> over rho_(X,X)^T_B in the Bose hierarchy."""
    c = load_json(matrix, RealMatrixJson).to_matrix()
    result = search_objective(c, t)
    if json:
        typer.echo(result.model_dump_json(exclude={"report"}))
        return
    typer.echo(f"p* = {result.objective!r} ({result.status.name.lower()})")


@ppt2_app.command("run")
@guarded
def ppt2_run(
    config: Optional[Path] = typer.Option(None, help="Experiment config JSON."),
    seed: Optional[int] = typer.Option(None),
    max_t: Optional[int] = typer.Option(None, "--max-t"),
    regime: Optional[Regime] = typer.Option(None),
    mixed: bool = typer.Option(
        False, "--mixed", help="Also compose factors with a != b."
    ),
    workers: Optional[int] = typer.Option(None),
    out: Optional[Path] = typer.Option(
        None, help="Write the CSV here instead of stdout."
    ),
    json: bool = typer.Option(False, "--json"),
) -> None:
    """Run the PPT-squared experiment and emit one CSV row per solve."""
    cfg = ExperimentConfig()
    if config is not None:
        cfg = load_json(config, ExperimentConfig)
    overrides = {
        "seed": seed,
        "max_t": max_t,
        "regime": regime,
        "workers": workers,
    }
    updates = {k: v for k, v in overrides.items() if v is not None}
    if mixed:
        updates["mixed"] = True
    cfg = ExperimentConfig.model_validate({**cfg.model_dump(), **updates})
    report = run_experiment(cfg)
    if json:
        typer.echo(report.model_dump_json())
    elif out is not None:
        report.write_csv(out)
    else:
        typer.echo(report.to_csv(), nl=False)
    table = Table(
        "regime",
        "t",
        "rows",
        "mean s",
        "feasible",
        "infeasible",
        "marginal",
        "errors",
    )
    for row in summary(report):
        table.add_row(
            row.regime.value,
            str(row.t),
            str(row.count),
            f"{row.mean_seconds:.3f}",
            str(row.feasible),
            str(row.infeasible),
            str(row.marginal),
            str(row.errors),
        )
    err.print(table)


@app.command()
@guarded
def export(
    out: Path = typer.Option(..., help="Target .dat-s file."),
    state: Optional[Path] = typer.Option(None),
    family: Optional[str] = typer.Option(None),
    t: int = typer.Option(1, "--t"),
    regime: Regime = typer.Option(Regime.GENERIC),
    hierarchy: Hierarchy = typer.Option(Hierarchy.DPS),
) -> None:
    """Write the membership LMI of a state as a sparse SDPA file."""
    rho = _state(state, family)
    model = build_model(rho, t, regime=regime, hierarchy=hierarchy)
    problem = to_lmi(model)
    path = export_sdpa(problem, out)
    typer.echo(str(path))
    err.print(f"{problem.num_vars} variables, blocks {problem.block_sizes}")


@app.command()
def version() -> None:
    """Print the installed dpskit version."""
    try:
        typer.echo(metadata.version("dpskit"))
    except metadata.PackageNotFoundError:
        typer.echo("unknown")
