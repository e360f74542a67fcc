import logging

import click

from config import Config
from utils.dataset import load_dataset, load_schema
from utils.errors import RuleConflictError
from utils.harness import extract_seed_rules, perturb_rules
from utils.models import TrainerSpec
from utils.rng import derive, derive_seed
from utils.rule_parser import parse_rule_file, render_rule_set
from utils.rules import (
    EXCLUDE_INTERSECTION,
    MIXTURE,
    FeedbackRuleSet,
    coverage_mask,
    detect_conflicts,
    resolve_conflicts,
)

log = logging.getLogger("commands.rules")


def _emit(text: str, out):
    if out:
        with open(out, "w", encoding="utf-8") as f:
            f.write(text)
        click.echo(f"{Config.EMOJI_SUCCESS} Reglas escritas en {out}")
    else:
        click.echo(text, nl=False)


@click.group()
def rules():
    """Validar, resolver y generar conjuntos de reglas de feedback."""


@rules.command()
@click.option("--rules", "rules_path", required=True, type=click.Path(exists=True, dir_okay=False))
@click.option("--schema", required=True, type=click.Path(exists=True, dir_okay=False))
@click.option("--data", type=click.Path(exists=True, dir_okay=False), default=None, help="CSV para medir coberturas")
def check(rules_path, schema, data):
    """Parsea las reglas, informa coberturas y falla si hay conflictos."""
    sch = load_schema(schema)
    frs = parse_rule_file(rules_path, sch)
    click.echo(f"{Config.EMOJI_RULES} {len(frs)} reglas válidas")
    if data:
        d = load_dataset(data, sch)
        for rule in frs:
            covered = int(coverage_mask(rule, d).sum())
            click.echo(f"  {rule.id}: {covered}/{len(d)} filas cubiertas")
    conflicts = detect_conflicts(frs)
    if conflicts:
        listed = ", ".join(f"{a}/{b}" for a, b in conflicts)
        raise RuleConflictError(f"{len(conflicts)} conflictos: {listed}")
    click.echo(f"{Config.EMOJI_SUCCESS} Sin conflictos")


@rules.command()
@click.option("--rules", "rules_path", required=True, type=click.Path(exists=True, dir_okay=False))
@click.option("--schema", required=True, type=click.Path(exists=True, dir_okay=False))
@click.option("--policy", type=click.Choice([EXCLUDE_INTERSECTION, MIXTURE]), default=EXCLUDE_INTERSECTION, show_default=True)
@click.option("--weight", type=float, default=0.5, show_default=True, help="Peso de la primera regla en la mezcla")
@click.option("--out", type=click.Path(dir_okay=False), default=None)
def resolve(rules_path, schema, policy, weight, out):
    """Elimina los conflictos y escribe un conjunto equivalente sin solapes contradictorios."""
    frs = parse_rule_file(rules_path, load_schema(schema))
    before = len(detect_conflicts(frs))
    resolved = resolve_conflicts(frs, policy, weight)
    log.info(f"{before} conflictos resueltos con {policy}")
    _emit(render_rule_set(resolved), out)


@rules.command()
@click.option("--data", required=True, type=click.Path(exists=True, dir_okay=False))
@click.option("--schema", required=True, type=click.Path(exists=True, dir_okay=False))
@click.option("--model", "model_kind", type=click.Choice(["logreg", "forest", "tree"]), default="logreg", show_default=True)
@click.option("--count", type=int, default=100, show_default=True, help="Tamaño del pool")
@click.option("--depth", type=int, default=3, show_default=True, help="Profundidad del árbol sustituto")
@click.option("--lo", type=float, default=Config.COVERAGE_BOUNDS[0], show_default=True)
@click.option("--hi", type=float, default=Config.COVERAGE_BOUNDS[1], show_default=True)
@click.option("--seed", type=int, default=Config.DEFAULT_SEED, show_default=True)
@click.option("--out", type=click.Path(dir_okay=False), default=None)
def perturb(data, schema, model_kind, count, depth, lo, hi, seed, out):
    """Pool de reglas perturbadas a partir de las reglas que explican el modelo."""
    d = load_dataset(data, schema)
    seeds = extract_seed_rules(d, TrainerSpec(model_kind), depth, seed=derive_seed(seed, "seed_rules"))
    pool = perturb_rules(seeds, d, count, (lo, hi), rng=derive(seed, "pool"))
    click.echo(f"{Config.EMOJI_INFO} {len(seeds)} reglas semilla, {len(pool)} perturbadas", err=True)
    _emit(render_rule_set(FeedbackRuleSet(d.schema, tuple(pool))), out)


def setup(cli):
    cli.add_command(rules)
