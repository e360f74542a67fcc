import logging
import time
from pathlib import Path

import click
import pandas as pd

from config import Config
from utils.harness import load_experiment_config, run_experiment, write_report

log = logging.getLogger("commands.experiment")


def runs_frame(runs: list) -> pd.DataFrame:
    """Una fila por (ejecución, variante) con las métricas de test aplanadas"""
    rows = []
    for entry in runs:
        for variant, res in entry["variants"].items():
            row = {"run": entry["run"], "variant": variant, "rules": " ".join(entry["rules"])}
            for stage in ("initial", "mod", "final", "delta"):
                for name, value in res[stage].items():
                    row[f"{stage}_{name}"] = value
            row["instances_added"] = res["instances_added"]
            row["stop_reason"] = res["stop_reason"]
            rows.append(row)
    return pd.DataFrame(rows)


@click.command()
@click.option("--config", "config_path", required=True, type=click.Path(exists=True, dir_okay=False), help="Configuración JSON")
@click.option("--out-dir", required=True, type=click.Path(file_okay=False), help="Directorio de salida")
def experiment(config_path, out_dir):
    """Ejecuta el protocolo experimental: varias ejecuciones con reglas sorteadas."""
    started = time.perf_counter()
    cfg = load_experiment_config(config_path)
    click.echo(f"{Config.EMOJI_LOADING} {cfg.runs} ejecuciones, variantes {', '.join(cfg.variants)}")

    report = run_experiment(cfg)
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    write_report(out / "report.json", {**report.to_dict(), "wall_time": time.perf_counter() - started})
    runs_frame(report.runs).to_csv(out / "runs.csv", index=False)
    log.info(f"experimento guardado en {out}")

    for variant, agg in report.aggregate.items():
        final = agg["final.j_bar"]["mean"]
        initial = agg["initial.j_bar"]["mean"]
        click.echo(
            f"{Config.EMOJI_CHART} {variant}: J̄ {initial:.3f} → {final:.3f}, "
            f"+{agg['instances_added']['mean']:.1f} instancias de media"
        )
    for pair, record in report.paired.items():
        click.echo(f"{Config.EMOJI_INFO} {pair}: {record['win']}-{record['loss']}-{record['tie']}")
    click.echo(f"{Config.EMOJI_SUCCESS} Reporte en {out / 'report.json'}")


def setup(cli):
    cli.add_command(experiment)
