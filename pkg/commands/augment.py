import logging
import time

import click

from config import Config
from utils.dataset import load_dataset, save_dataset
from utils.engine import SELECTORS, FroteConfig, run_frote
from utils.harness import write_report
from utils.models import TrainerSpec, save_model
from utils.preparation import STRATEGIES
from utils.rule_parser import parse_rule_file

log = logging.getLogger("commands.augment")


@click.command()
@click.option("--data", required=True, type=click.Path(exists=True, dir_okay=False), help="CSV de entrenamiento")
@click.option("--schema", required=True, type=click.Path(exists=True, dir_okay=False), help="Schema JSON")
@click.option("--rules", required=True, type=click.Path(exists=True, dir_okay=False), help="Archivo de reglas")
@click.option("--model", "model_kind", type=click.Choice(["logreg", "forest", "tree"]), default="logreg", show_default=True)
@click.option("--tau", type=int, default=Config.DEFAULT_TAU, show_default=True, help="Máximo de iteraciones")
@click.option("--q", type=float, default=Config.DEFAULT_Q, show_default=True, help="Cuota de instancias como fracción de |D|")
@click.option("--k", type=int, default=Config.DEFAULT_K, show_default=True, help="Vecinos para la generación")
@click.option("--eta", type=int, default=None, help="Bases por iteración (por defecto ⌈q·|D|/τ⌉)")
@click.option("--selector", type=click.Choice(SELECTORS), default=Config.DEFAULT_SELECTOR, show_default=True)
@click.option("--strategy", type=click.Choice(STRATEGIES), default=Config.DEFAULT_STRATEGY, show_default=True)
@click.option("--base-mixture-p", type=float, default=None, help="Mezcla de etiqueta con la base (reglas probabilísticas)")
@click.option("--seed", type=int, default=Config.DEFAULT_SEED, show_default=True)
@click.option("--out", required=True, type=click.Path(dir_okay=False), help="CSV aumentado (con procedencia)")
@click.option("--report", required=True, type=click.Path(dir_okay=False), help="Reporte JSON")
@click.option("--save-model", "model_out", type=click.Path(dir_okay=False), default=None, help="Guardar el modelo final")
def augment(data, schema, rules, model_kind, tau, q, k, eta, selector, strategy, base_mixture_p, seed, out, report, model_out):
    """Aumenta un dataset para que el modelo respete las reglas de feedback."""
    started = time.perf_counter()
    d = load_dataset(data, schema)
    frs = parse_rule_file(rules, d.schema)
    trainer = TrainerSpec(model_kind)
    cfg = FroteConfig(
        tau=tau,
        q=q,
        k=k,
        eta_override=eta,
        selector=selector,
        strategy=strategy,
        seed=seed,
        base_mixture_p=base_mixture_p,
    )
    click.echo(f"{Config.EMOJI_LOADING} {len(d)} filas, {len(frs)} reglas, modelo {trainer.kind}")

    result = run_frote(cfg, d, frs, trainer)
    save_dataset(result.dataset, out)
    if model_out:
        save_model(result.model, model_out)

    payload = {
        "command": "augment",
        "config": {
            "data": data,
            "schema": schema,
            "rules": rules,
            "trainer": trainer.to_dict(),
            "frote": cfg.to_dict(),
        },
        "rule_set": result.rule_set.render(),
        **result.to_dict(),
        "wall_time": time.perf_counter() - started,
    }
    write_report(report, payload)
    log.info(f"reporte escrito en {report}")

    final = result.final_report
    click.echo(
        f"{Config.EMOJI_SUCCESS} +{result.instances_added} instancias en {len(result.traces)} iteraciones "
        f"({result.accepted_iterations} aceptadas, fin: {result.stop_reason})"
    )
    click.echo(
        f"{Config.EMOJI_CHART} Ĵ {result.mod_report.j_value:.4f} → {final.j_value:.4f}"
    )


def setup(cli):
    cli.add_command(augment)
