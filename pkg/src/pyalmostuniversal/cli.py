"""The almost-universal command line tool."""

import json
import logging
from collections.abc import Sequence
from pathlib import Path
from typing import Any

import click

from pyalmostuniversal.classification import (
    CRITICAL_NUMBERS,
    FormType,
    PairStatus,
    classify,
    enumerate_pairs,
)
from pyalmostuniversal.densities import density_breakdown, density_report
from pyalmostuniversal.eisenstein import halmos_constants, load_constants
from pyalmostuniversal.eligible import (
    EligibleSession,
    closure_loop,
    primes_csv,
    read_numbers,
    write_numbers,
)
from pyalmostuniversal.escalation import escalate_tree
from pyalmostuniversal.exceptions import QuadraticFormError
from pyalmostuniversal.forms import ExceptionTarget, QuadraticForm
from pyalmostuniversal.representability import (
    BitsetMode,
    check_numbers,
    find_split_local_cover,
)
from pyalmostuniversal.settings import Settings

logger = logging.getLogger(__name__)

_LOG_LEVELS = {0: logging.WARNING, 1: logging.INFO}


def _integers(text: str) -> list[int]:
    try:
        return [int(part) for part in text.replace(" ", "").split(",") if part]
    except ValueError as e:
        raise click.BadParameter(f"Expected comma separated integers: {text}") from e


def _load_form(form_path: str | None, diagonal: str | None) -> QuadraticForm:
    if (form_path is None) == (diagonal is None):
        raise click.UsageError("Pass exactly one of --form and --diagonal.")
    try:
        if diagonal is not None:
            return QuadraticForm.diagonal(*_integers(diagonal))
        return QuadraticForm.from_json(Path(str(form_path)).read_text())
    except QuadraticFormError as e:
        raise click.BadParameter(str(e)) from e


def _write_json(ctx: click.Context, name: str, data: Any) -> Path:
    path = ctx.obj["out"] / name
    path.write_text(json.dumps(data, indent=2) + "\n")
    click.echo(f"Wrote {path}")
    return path


def form_options(function: Any) -> Any:
    """Add the --form and --diagonal options to a command."""
    function = click.option(
        "--diagonal", help="Diagonal coefficients, such as 1,2,7,13."
    )(function)
    return click.option(
        "--form",
        "form_path",
        type=click.Path(exists=True, dir_okay=False),
        help="JSON file with the Gram matrix of the form.",
    )(function)


class _Group(click.Group):
    # Package errors are reported like usage errors, without a traceback.
    def invoke(self, ctx: click.Context) -> Any:
        try:
            return super().invoke(ctx)
        except QuadraticFormError as e:
            raise click.ClickException(str(e)) from e


@click.group(cls=_Group)
@click.option("--threads", type=int, help="Number of worker threads.")
@click.option("--cap", type=int, help="Truant search cap.")
@click.option(
    "--out",
    type=click.Path(file_okay=False),
    default=".",
    show_default=True,
    help="Output directory.",
)
@click.option("-v", "--verbose", count=True, help="Log INFO (-v) or DEBUG (-vv).")
@click.pass_context
def cli(
    ctx: click.Context,
    threads: int | None,
    cap: int | None,
    out: str,
    verbose: int,
) -> None:
    """Escalate, classify and verify almost universal quadratic forms."""
    logging.basicConfig(
        level=_LOG_LEVELS.get(verbose, logging.DEBUG),
        format="%(asctime)s %(levelname)s %(name)s: %(message)s",
    )
    settings = Settings.get_instance()
    try:
        settings.update(threads=threads, truant_cap=cap)
    except ValueError as e:
        raise click.BadParameter(str(e)) from e
    out_dir = Path(out)
    out_dir.mkdir(parents=True, exist_ok=True)
    ctx.obj = {"out": out_dir}


@cli.command()
@click.option(
    "--target",
    "--except",
    "target",
    default="",
    help="Prescribed exceptions, such as 5 or 14,78.",
)
@click.option("--max-dim", type=int, default=4, show_default=True)
@click.pass_context
def escalate(ctx: click.Context, target: str, max_dim: int) -> None:
    """Build the escalator tree for a set of prescribed exceptions."""
    exceptions = ExceptionTarget.of(*_integers(target))
    tree = escalate_tree(exceptions, max_dim=max_dim)
    for dim in range(max_dim + 1):
        nodes = tree.level(dim)
        if nodes:
            truants = sorted(node.truant for node in nodes if node.truant is not None)
            click.echo(f"dim {dim}: {len(nodes)} classes, truants {truants}")
    click.echo(f"candidates: {len(tree.candidates)}")
    path = ctx.obj["out"] / "tree.jsonl"
    tree.write_json_lines(path)
    click.echo(f"Wrote {path}")


def _numbers(numbers: str | None, m_range: str | None) -> list[int]:
    if (numbers is None) == (m_range is None):
        raise click.UsageError("Pass exactly one of -m and --m-range.")
    if numbers is not None:
        return _integers(numbers)
    start, _, stop = str(m_range).partition("..")
    try:
        return list(range(int(start), int(stop) + 1))
    except ValueError as e:
        raise click.BadParameter(f"Expected a range such as 1..100: {m_range}") from e


@cli.command()
@form_options
@click.option("-m", "numbers", help="Numbers, such as 1,5,7.")
@click.option("--m-range", help="Inclusive range of numbers, such as 1..100.")
@click.option("--prime", type=int, help="Write the densities at this prime as CSV.")
@click.pass_context
def densities(
    ctx: click.Context,
    form_path: str | None,
    diagonal: str | None,
    numbers: str | None,
    m_range: str | None,
    prime: int | None,
) -> None:
    """Print the local densities of a quaternary form."""
    form = _load_form(form_path, diagonal)
    values = _numbers(numbers, m_range)
    if prime is not None:
        try:
            breakdowns = [density_breakdown(form, prime, m) for m in values]
        except ValueError as e:
            raise click.BadParameter(str(e)) from e
        lines = ["m,beta,good,zero,bad"]
        lines.extend(
            f"{m},{d.density},{d.good},{d.zero},{d.bad}"
            for m, d in zip(values, breakdowns)
        )
        path = ctx.obj["out"] / f"densities_{prime}.csv"
        path.write_text("\n".join(lines) + "\n")
        click.echo(f"Wrote {path}")
        return
    reports = []
    for m in values:
        report = density_report(form, m)
        click.echo(f"m = {m}: beta_inf = {report.beta_infinity}")
        for p, density in sorted(report.densities.items()):
            click.echo(
                f"  beta_{p} = {density.density} "
                f"(good {density.good}, zero {density.zero}, bad {density.bad})"
            )
        click.echo(f"  locally represented: {report.locally_represented}")
        reports.append(
            {
                "m": m,
                "densities": {
                    str(p): str(d.density) for p, d in report.densities.items()
                },
                "locally_represented": report.locally_represented,
            }
        )
    _write_json(ctx, "densities.json", reports)


@cli.command()
@click.option(
    "--constants",
    "constants_path",
    type=click.Path(exists=True, dir_okay=False),
    help="JSON file with the bound constants. The default is the Halmos form.",
)
@click.pass_context
def eligible(ctx: click.Context, constants_path: str | None) -> None:
    """Compute the eligible primes and the squarefree eligible numbers."""
    constants = load_constants(constants_path) if constants_path else halmos_constants()
    session = EligibleSession(constants)
    primes = session.primes
    numbers = session.squarefree
    click.echo(f"eligible primes: {len(primes)}")
    largest = numbers[-1] if numbers else None
    click.echo(f"squarefree eligible numbers: {len(numbers)}, largest {largest}")
    primes_path = ctx.obj["out"] / "primes.csv"
    primes_path.write_text(primes_csv(primes))
    numbers_path = ctx.obj["out"] / "numbers.bin"
    write_numbers(numbers_path, numbers)
    click.echo(f"Wrote {primes_path} and {numbers_path}")


@cli.command()
@form_options
@click.option(
    "--numbers",
    "numbers_path",
    required=True,
    type=click.Path(exists=True, dir_okay=False),
    help="ELG1 file with the numbers to check.",
)
@click.option("--c", "attempts", type=int, help="Attempts per number.")
@click.option(
    "--mode",
    type=click.Choice(["approx", "exact"]),
    default="approx",
    show_default=True,
)
@click.pass_context
def check(
    ctx: click.Context,
    form_path: str | None,
    diagonal: str | None,
    numbers_path: str,
    attempts: int | None,
    mode: str,
) -> None:
    """Check numbers against the split local cover of a form."""
    form = _load_form(form_path, diagonal)
    numbers = read_numbers(numbers_path)
    cover = find_split_local_cover(form)
    click.echo(f"cover: d = {cover.d}, T = {cover.complement}")
    bitset_mode = BitsetMode.EXACT if mode == "exact" else BitsetMode.APPROXIMATE
    result = check_numbers(cover, numbers, attempts, mode=bitset_mode)
    click.echo(f"represented: {len(result.represented)}")
    click.echo(f"unresolved: {result.unresolved}")
    _write_json(ctx, "unresolved.json", result.unresolved)


@cli.command(name="classify")
@form_options
@click.option("--bound", type=int, help="Bound for the exceptions.")
@click.pass_context
def classify_command(
    ctx: click.Context,
    form_path: str | None,
    diagonal: str | None,
    bound: int | None,
) -> None:
    """Classify a form as type A, B or C."""
    form = _load_form(form_path, diagonal)
    classification = classify(form, bound)
    click.echo(f"type {classification.kind.value}")
    if classification.obstruction:
        p, m = classification.obstruction
        click.echo(f"{m} is not represented over the {p}-adic integers")
    if classification.families:
        click.echo(f"families for p = {classification.prime}: {classification.seeds}")
    if classification.kind != FormType.C:
        click.echo(f"exceptions up to {classification.bound}: {classification.exceptions}")
    _write_json(ctx, "classification.json", classification.to_dict())


@cli.command()
@click.option("-m", "critical", help="Critical numbers. The default is all of them.")
@click.option("--max-dim", type=int, default=5, show_default=True)
@click.option("--bound", type=int, help="Verification bound for the witnesses.")
@click.pass_context
def pairs(
    ctx: click.Context, critical: str | None, max_dim: int, bound: int | None
) -> None:
    """Search for forms excepting exactly two numbers."""
    numbers: Sequence[int] = _integers(critical) if critical else CRITICAL_NUMBERS
    verdicts = enumerate_pairs(numbers, max_dim=max_dim, bound=bound)
    for verdict in verdicts:
        witness = verdict.witness.gram if verdict.witness else None
        click.echo(
            f"{{{verdict.m}, {verdict.n}}}: {verdict.status.value}, dim {verdict.dim} "
            f"(reference {verdict.reference_dim}), witness {witness}"
        )
    _write_json(ctx, "pairs.json", [verdict.to_dict() for verdict in verdicts])
    if any(verdict.status != PairStatus.FOUND for verdict in verdicts):
        ctx.exit(1)


@cli.command(name="verify-halmos")
@click.pass_context
def verify_halmos(ctx: click.Context) -> None:
    """Determine the exceptions of x² + 2y² + 7z² + 13w²."""
    constants = halmos_constants()
    assert constants.form is not None
    report = closure_loop(constants.form, constants)
    click.echo(f"exceptions: {report.exceptions}")
    click.echo(f"candidates per round: {report.candidate_counts}")
    _write_json(ctx, "halmos.json", report.to_dict())
    if report.exceptions != [5] or not report.definitive:
        ctx.exit(1)


def main() -> None:
    """Run the command line tool."""
    cli()
