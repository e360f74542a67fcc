import os
import sys
import logging
import importlib

import click

from config import Config
from utils.errors import ValidationError

log = logging.getLogger("frote")

EXIT_VALIDATION = 2
EXIT_RUNTIME = 3


def setup_logging(verbose: bool = False):
    os.makedirs(Config.LOG_DIR, exist_ok=True)
    level = logging.DEBUG if verbose else getattr(logging, Config.LOG_LEVEL, logging.INFO)
    logging.basicConfig(
        level=level,
        format="%(asctime)s [%(levelname)s] %(name)s: %(message)s",
        datefmt="%Y-%m-%d %H:%M:%S",
        handlers=[
            logging.FileHandler(os.path.join(Config.LOG_DIR, "frote.log"), encoding="utf-8"),
            logging.StreamHandler(sys.stderr),
        ],
    )
    logging.getLogger().setLevel(level)


class CommandFailure(click.ClickException):
    """Error de dominio convertido a salida de click con su código"""

    def __init__(self, message: str, exit_code: int):
        super().__init__(message)
        self.exit_code = exit_code

    def format_message(self) -> str:
        return f"{Config.EMOJI_ERROR} {self.message}"


class FroteCLI(click.Group):
    """Grupo raíz: traduce excepciones a códigos de salida (2 validación, 3 ejecución)"""

    def invoke(self, ctx):
        try:
            return super().invoke(ctx)
        except (click.ClickException, click.exceptions.Exit, click.Abort):
            raise
        except ValidationError as e:
            log.error(f"Entrada inválida: {e}")
            raise CommandFailure(str(e), EXIT_VALIDATION) from e
        except Exception as e:
            log.exception(f"Error en '{ctx.invoked_subcommand}': {e}")
            raise CommandFailure(str(e), EXIT_RUNTIME) from e


@click.group(cls=FroteCLI)
@click.option("--verbose", "-v", is_flag=True, help="Log a nivel DEBUG")
def cli(verbose: bool):
    """Edición de modelos por sobremuestreo guiado por reglas de feedback."""
    setup_logging(verbose)


def load_commands(group: click.Group) -> int:
    loaded = 0
    commands_dir = os.path.join(os.path.dirname(os.path.abspath(__file__)), "commands")
    for filename in sorted(os.listdir(commands_dir)):
        if filename.endswith(".py") and not filename.startswith("__"):
            module = importlib.import_module(f"commands.{filename[:-3]}")
            module.setup(group)
            loaded += 1
    return loaded


load_commands(cli)


def main():
    cli(prog_name="frote")


if __name__ == "__main__":
    main()
