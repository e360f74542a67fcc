import click

from config import Config
from utils.benchmark import write_benchmark


@click.command()
@click.option("--out-dir", required=True, type=click.Path(file_okay=False), help="Directorio destino")
@click.option("--rows", type=int, default=400, show_default=True)
@click.option("--seed", type=int, default=0, show_default=True)
def benchmark(out_dir, rows, seed):
    """Escribe el benchmark 2-D (datos, schema y regla) en un directorio."""
    if rows < 2:
        raise click.BadParameter("se necesitan al menos 2 filas", param_hint="--rows")
    paths = write_benchmark(out_dir, rows, seed)
    for name, path in paths.items():
        click.echo(f"{Config.EMOJI_SUCCESS} {name}: {path}")


def setup(cli):
    cli.add_command(benchmark)
