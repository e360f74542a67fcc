"""
Parser del DSL de reglas (una regla por línea, comentarios con '#'):

    [ID[/MIEMBRO]:] IF pred (AND pred)* (AND NOT (pred (AND pred)*))*
        THEN class = "c" | class ~ {c1: p1, c2: p2}
"""

import logging

from pyparsing import (
    DelimitedList,
    Group,
    Keyword,
    Literal,
    MatchFirst,
    Opt,
    ParseException,
    QuotedString,
    Regex,
    Suppress,
    Word,
    ZeroOrMore,
    alphanums,
    alphas,
    one_of,
)

from utils.dataset import Schema
from utils.errors import DistributionError, RuleSyntaxError, RuleTypeError
from utils.rules import Clause, FeedbackRule, FeedbackRuleSet, LabelDistribution, Predicate, RuleGroup

log = logging.getLogger("rule_parser")


def _build_grammar():
    IF, AND, NOT, THEN, CLASS = map(Keyword, ("IF", "AND", "NOT", "THEN", "class"))
    reserved = MatchFirst([IF, AND, NOT, THEN, CLASS])

    # los nombres de resultado van sobre los tokens hoja
    ident = Word(alphas + "_", alphanums + "_")
    rule_id = Word(alphanums + "_-.|&")
    number = Regex(r"[+-]?(\d+(\.\d*)?|\.\d+)([eE][+-]?\d+)?").set_parse_action(
        lambda t: float(t[0])
    )
    string = QuotedString('"', esc_char="\\")
    operator = one_of("= != < <= > >=")

    predicate = Group(
        ~reserved + ident("attribute") + operator("operator") + (number("value") | string("value"))
    )
    clause = Group(predicate + ZeroOrMore(Suppress(AND) + predicate))
    exclusion = Suppress(AND + NOT + Literal("(")) + clause + Suppress(")")

    bare_label = Word(alphanums + "_-")
    label = string | bare_label
    weight = Group((string("label") | bare_label("label")) + Suppress(":") + number("prob"))
    distribution = Suppress(CLASS) + (
        Group(Suppress("=") + label)("delta")
        | (Suppress("~") + Suppress("{") + Group(DelimitedList(weight))("weights") + Suppress("}"))
    )

    head = Opt(rule_id("group") + Opt(Suppress("/") + rule_id("member")) + Suppress(":"))
    return (
        head
        + Suppress(IF)
        + clause("clause")
        + Group(ZeroOrMore(exclusion))("exclusions")
        + Suppress(THEN)
        + distribution
    )


RULE_LINE = _build_grammar()


def _clause(tokens) -> Clause:
    return Clause(
        tuple(Predicate(p["attribute"], p["operator"], p["value"]) for p in tokens)
    )


def _distribution(parsed) -> LabelDistribution:
    if "delta" in parsed:
        return LabelDistribution.delta(parsed["delta"][0])
    return LabelDistribution(tuple((w["label"], w["prob"]) for w in parsed["weights"]))


def _validate_line(lineno: int, rule: FeedbackRule, schema: Schema):
    try:
        rule.distribution.validate(schema)
        for c in (rule.clause, *rule.exclusions):
            for p in c.predicates:
                p.validate(schema)
    except RuleTypeError as e:
        raise RuleTypeError(f"línea {lineno}: {e}") from None


def parse_rule_set(text: str, schema: Schema) -> FeedbackRuleSet:
    """
    Lee un conjunto de reglas y lo valida contra el esquema.
    Las reglas sin id reciben R1, R2, ... según su posición.
    Las líneas 'G/M: ...' con el mismo G forman un grupo de reglas.
    """
    parsed_lines = []
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        try:
            parsed = RULE_LINE.parse_string(_strip_comment(raw), parse_all=True)
        except ParseException as e:
            raise RuleSyntaxError(e.msg, line=lineno, column=e.col) from None
        try:
            dist = _distribution(parsed)
        except DistributionError as e:
            raise DistributionError(f"línea {lineno}: {e}") from None
        parsed_lines.append((lineno, parsed, dist))

    taken = {p.get("group") for _, p, _ in parsed_lines if p.get("group")}
    counter = 0
    order: list = []  # FeedbackRule o id de grupo, en orden de aparición
    groups: dict[str, list[FeedbackRule]] = {}

    for lineno, parsed, dist in parsed_lines:
        rule_id, member = parsed.get("group"), parsed.get("member")
        if rule_id is None:
            counter += 1
            while f"R{counter}" in taken:
                counter += 1
            rule_id = f"R{counter}"
            taken.add(rule_id)
        rule = FeedbackRule(
            id=member or rule_id,
            clause=_clause(parsed["clause"]),
            distribution=dist,
            exclusions=tuple(_clause(c) for c in parsed["exclusions"]),
        )
        _validate_line(lineno, rule, schema)

        if member is None:
            order.append(rule)
        elif rule_id in groups:
            if not groups[rule_id][0].distribution.same_as(dist):
                raise RuleTypeError(f"línea {lineno}: el grupo '{rule_id}' mezcla distribuciones")
            groups[rule_id].append(rule)
        else:
            groups[rule_id] = [rule]
            order.append(rule_id)

    rules = [
        RuleGroup(item, tuple(groups[item]), groups[item][0].distribution)
        if isinstance(item, str) else item
        for item in order
    ]
    frs = FeedbackRuleSet(schema, tuple(rules))
    log.debug(f"{len(frs)} reglas leídas")
    return frs


def _strip_comment(line: str) -> str:
    """Quita un comentario '#' que no esté dentro de comillas"""
    quoted = escaped = False
    for i, ch in enumerate(line):
        if escaped:
            escaped = False
        elif ch == "\\" and quoted:
            escaped = True
        elif ch == '"':
            quoted = not quoted
        elif ch == "#" and not quoted:
            return line[:i]
    return line


def parse_rule_file(path, schema: Schema) -> FeedbackRuleSet:
    with open(path, encoding="utf-8") as fh:
        return parse_rule_set(fh.read(), schema)


def render_rule_set(frs: FeedbackRuleSet) -> str:
    """Texto que parse_rule_set vuelve a leer como el mismo conjunto"""
    return frs.render()
