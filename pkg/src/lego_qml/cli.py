"""CLI interface for lego-qml."""

import shutil
from pathlib import Path
from typing import Optional

import typer
from rich.console import Console
from rich.table import Table

from .core import CheckRunner, ExperimentManager
from .core.checks import FAIL, PASS, SUITES
from .core.experiment_manager import SWEEP_AXES, RunResult
from .errors import ConfigurationError, LegoError
from .utils import parse_int_list, setup_logging

app = typer.Typer(name="lego-qml", help="LEGO-style hybrid learning: frozen feature blocks + trainable VQC heads")
console = Console()

DEFAULT_CONFIG = Path("configs/qdot-pca-vqc.json")


def _config_option(default: Path = DEFAULT_CONFIG):
    return typer.Option(default, "--config", "-c", help="Path to experiment configuration (JSON or YAML)")


SeedOption = typer.Option(None, "--seed", help="Override the master seed")
OutOption = typer.Option(None, "--out", help="Override the output directory")
JobsOption = typer.Option(None, "--jobs", "-j", help="Worker threads (capped by LEGOQML_THREADS)")
BudgetOption = typer.Option(
    False,
    "--allow-budget-mismatch",
    help="Run FC/VQC comparisons whose parameter counts differ by more than 25%"
)


@app.callback()
def main(verbose: bool = typer.Option(False, "--verbose", "-v", help="Debug logging")):
    """Configure logging for every command."""
    setup_logging(verbose)


def _fail(error: LegoError, action: str) -> None:
    console.print(f"[bold red]Error {action}: {error}[/bold red]")
    raise typer.Exit(error.exit_code)


def _manager(config: Path, seed: Optional[int], out: Optional[Path], jobs: Optional[int],
             allow_budget_mismatch: bool = False) -> ExperimentManager:
    return ExperimentManager.from_file(
        config, seed=seed, output_dir=None if out is None else str(out.resolve()),
        allow_budget_mismatch=allow_budget_mismatch, workers=jobs,
    )


@app.command("gen-data")
def gen_data(
    output: Path = typer.Argument(help="Dataset CSV to write"),
    config: Path = _config_option(),
    seed: Optional[int] = SeedOption,
):
    """Generate the configured synthetic dataset as CSV."""
    try:
        manager = _manager(config, seed, None, 1)
        console.print(f"[bold blue]Generating dataset for run: {manager.config.run_name}[/bold blue]")
        dataset = manager.generate_data(output)
        console.print(f"[green]Wrote {len(dataset)} rows, classes {dataset.class_counts()} to {output}[/green]")
    except LegoError as e:
        _fail(e, "generating data")


@app.command("fit-pca")
def fit_pca(
    output: Path = typer.Argument(help="PCA checkpoint (JSON) to write"),
    config: Path = _config_option(),
    seed: Optional[int] = SeedOption,
):
    """Fit the PCA feature block on the training split and save it."""
    try:
        manager = _manager(config, seed, None, 1)
        block = manager.fit_pca_checkpoint(output)
        console.print(f"[green]PCA block with {block.width} components saved to {output}[/green]")
        console.print(f"checksum: {block.checksum()}")
    except LegoError as e:
        _fail(e, "fitting PCA")


@app.command("pretrain-ttn")
def pretrain_ttn(
    output: Path = typer.Argument(help="TTN checkpoint (binary) to write"),
    config: Path = _config_option(Path("configs/qdot-ttn-vqc.json")),
    seed: Optional[int] = SeedOption,
):
    """Build (and pretrain, if configured) the TTN feature block and save it."""
    try:
        manager = _manager(config, seed, None, 1)
        console.print("[bold blue]Building TTN block[/bold blue]")
        block = manager.pretrain_ttn_checkpoint(output)
        probe = block.metadata.get("probe_accuracy")
        suffix = "" if probe is None else f", source probe accuracy {probe:.3f}"
        console.print(f"[green]TTN block {block.input_factors} -> {block.output_factors} saved to {output}{suffix}[/green]")
    except LegoError as e:
        _fail(e, "building TTN block")


@app.command("train")
def train(
    config: Path = _config_option(),
    seed: Optional[int] = SeedOption,
    out: Optional[Path] = OutOption,
    jobs: Optional[int] = JobsOption,
    allow_budget_mismatch: bool = BudgetOption,
):
    """Run the full pipeline: data, frozen block, head training, artifacts."""
    try:
        manager = _manager(config, seed, out, jobs, allow_budget_mismatch)
        console.print(f"[bold blue]Training run: {manager.config.run_name} "
                      f"(config {manager.config_hash}, seed {manager.seed})[/bold blue]")
        result = manager.run()
        _display_run(result)
        console.print(f"[bold green]Artifacts written to {result.run_dir}[/bold green]")
    except LegoError as e:
        _fail(e, "training")


@app.command("eval")
def evaluate(
    model: Path = typer.Argument(help="Model checkpoint (model.json) to evaluate"),
    config: Path = _config_option(),
    seed: Optional[int] = SeedOption,
    out: Optional[Path] = typer.Option(None, "--out", help="Write the evaluation as JSON to this file"),
):
    """Evaluate a saved model on the configured test split."""
    try:
        manager = _manager(config, seed, None, 1)
        loss, acc = manager.evaluate_model(model, out)
        table = Table(title="Evaluation")
        table.add_column("Metric", style="cyan")
        table.add_column("Value", style="green")
        table.add_row("Test loss", f"{loss:.6f}")
        table.add_row("Test accuracy", f"{acc:.4f}")
        console.print(table)
    except LegoError as e:
        _fail(e, "evaluating model")


@app.command("sweep")
def sweep(
    axis: str = typer.Argument(help=f"Sweep axis: {', '.join(SWEEP_AXES)}"),
    values: str = typer.Argument(help="Comma-separated axis values, e.g. 8,6,4 or pca,ttn"),
    config: Path = _config_option(),
    seeds: str = typer.Option("0", "--seeds", help="Comma-separated seeds"),
    out: Optional[Path] = OutOption,
    jobs: Optional[int] = JobsOption,
    allow_budget_mismatch: bool = BudgetOption,
):
    """Run one experiment per (axis value, seed) and write a combined CSV."""
    try:
        if axis not in SWEEP_AXES:
            raise ConfigurationError(f"expected one of {', '.join(SWEEP_AXES)}, got {axis!r}", field="axis")
        manager = _manager(config, None, out, None, allow_budget_mismatch)
        axis_values = [v.strip() for v in values.split(",") if v.strip()]
        seed_list = parse_int_list(seeds)
        console.print(f"[bold blue]Sweeping {axis} over {axis_values} x seeds {seed_list}[/bold blue]")
        rows = manager.sweep(axis, axis_values, seed_list, jobs or 1)
        _display_sweep(axis, rows)
        console.print(f"[bold green]Combined CSV: {manager.output_root / f'sweep-{axis}' / f'sweep_{axis}.csv'}"
                      f"[/bold green]")
    except LegoError as e:
        _fail(e, "running sweep")
    except ValueError as e:
        console.print(f"[bold red]Error parsing seeds: {e}[/bold red]")
        raise typer.Exit(2)


@app.command("check")
def check(
    suite: str = typer.Argument("all", help=f"Property suite: {', '.join(SUITES)} or all"),
    seed: int = typer.Option(0, "--seed", help="Seed for randomized properties"),
):
    """Run a named suite of numerical properties."""
    try:
        console.print(f"[bold blue]Running check suite: {suite}[/bold blue]")
        report = CheckRunner(seed=seed).run(suite)
    except LegoError as e:
        _fail(e, "running checks")
        return
    _display_checks(report)
    if report.warnings:
        console.print(f"[yellow]{len(report.warnings)} soft propert{'y' if len(report.warnings) == 1 else 'ies'} "
                      f"reported warnings[/yellow]")
    if not report.passed:
        first = report.first_failure
        console.print(f"[bold red]Check failed: {first.suite}/{first.name}: {first.detail}[/bold red]")
        raise typer.Exit(1)
    console.print("[bold green]All hard properties passed[/bold green]")


@app.command("init")
def init_configs(
    target_dir: Path = typer.Option(
        Path("."),
        "--target", "-t",
        help="Target directory to create configs"
    )
):
    """Copy the default experiment configurations into a working directory."""
    configs_dir = target_dir / "configs"
    configs_dir.mkdir(parents=True, exist_ok=True)
    source_dir = Path(__file__).parent.parent.parent / "configs"

    for src in sorted(source_dir.glob("*.json")):
        dst = configs_dir / src.name
        if not dst.exists():
            shutil.copy2(src, dst)
            console.print(f"[green]Created: {dst}[/green]")
        else:
            console.print(f"[yellow]Exists: {dst}[/yellow]")

    console.print(f"[bold green]Configuration files initialized in {configs_dir}[/bold green]")
    console.print("\n[bold yellow]Next steps:[/bold yellow]")
    console.print("1. lego-qml check gradients")
    console.print("2. lego-qml train --config configs/qdot-pca-vqc.json")
    console.print("3. lego-qml sweep qubits 8,6,4 --seeds 0,1,2")


def _display_run(result: RunResult):
    """Display the final metrics of a run."""
    final = result.final
    table = Table(title="Run Summary")
    table.add_column("Property", style="cyan")
    table.add_column("Value", style="green")
    table.add_row("Config hash", result.config_hash)
    table.add_row("Seed", str(result.seed))
    table.add_row("Epochs", str(final.epoch))
    table.add_row("Head parameters", str(result.param_count))
    table.add_row("Train loss / accuracy", f"{final.train_loss:.4f} / {final.train_accuracy:.4f}")
    table.add_row("Test loss / accuracy", f"{final.test_loss:.4f} / {final.test_accuracy:.4f}")
    table.add_row("Block checksum", result.block_checksum[:16])
    if result.report is not None:
        table.add_row("Opt. bound / noisy bound",
                      f"{result.report.eps_opt_bound:.4g} / {result.report.eps_opt_noise_bound:.4g}")
    console.print(table)


def _display_sweep(axis: str, rows: list[list]):
    table = Table(title=f"Sweep over {axis}")
    for column, style in (("Value", "cyan"), ("Seed", "cyan"), ("Test acc", "green"), ("Test loss", "green"),
                          ("Params", "yellow"), ("Config hash", "white")):
        table.add_column(column, style=style)
    for value, seed, acc, loss, params, config_hash in rows:
        table.add_row(str(value), str(seed), f"{acc:.4f}", f"{loss:.4f}", str(params), config_hash)
    console.print(table)


def _display_checks(report):
    table = Table(title="Property Checks")
    table.add_column("Suite", style="cyan")
    table.add_column("Property", style="cyan")
    table.add_column("Status")
    table.add_column("Detail")
    table.add_column("Seconds", justify="right")
    colors = {PASS: "green", FAIL: "red"}
    for r in report.results:
        color = colors.get(r.status, "yellow")
        table.add_row(r.suite, r.name, f"[{color}]{r.status}[/{color}]", r.detail, f"{r.seconds:.1f}")
    console.print(table)


if __name__ == "__main__":
    app()
