"""Scenario loading, workload generation, oracle and the run driver.

A scenario is a JSON document describing classes, the partition layout,
the domain topology, objects and an ordered action script.  Runs are a
pure function of (scenario, seed): the only randomness is the seeded
Mersenne Twister behind the workload generator.
"""

from __future__ import annotations

import json
import random
from dataclasses import dataclass, field
from typing import Optional

from .infolayer import Requester, check_access
from .lifecycle import AuditReport, ObjectSpec, World
from .model import (
    ANY,
    AccessPolicy,
    AttributeKind,
    Eq,
    InformationalForm,
    ObjectClass,
    OonError,
    Prefix,
    Query,
    Range,
    Rule,
    eval_query,
    iname_key,
)
from .sim import Metrics, Trace


class ValidationError(OonError):
    def __init__(self, where: str, message: str):
        super().__init__(f"{where}: {message}")
        self.where = where


class ScenarioParseError(OonError):
    pass


@dataclass
class Scenario:
    seed: int
    pname_assigner: str
    info_latency: int
    deadline: int
    classes: list                 # ObjectClass
    partitions: list              # (class name, cuts dict, irn count)
    domains: list
    links: list                   # (a, b, latency)
    objects: list                 # ObjectSpec
    script: list                  # raw step dicts
    source: Optional[str] = None


@dataclass
class RunResult:
    metrics: Metrics
    trace: Trace
    audits: list = field(default_factory=list)       # AuditReport per checkpoint
    discoveries: list = field(default_factory=list)
    sessions: list = field(default_factory=list)
    world: Optional[World] = None


# --- parsing -----------------------------------------------------------------


def _parse_policy(raw, where: str) -> AccessPolicy:
    if raw is None:
        return AccessPolicy()
    rules = {}
    for side in ("view", "exchange"):
        spec = raw.get(side, "allow_all")
        if spec == "allow_all":
            rules[side] = Rule("allow_all")
        elif spec == "deny_all":
            rules[side] = Rule("deny_all")
        elif isinstance(spec, dict) and "classes" in spec:
            rules[side] = Rule("allow_classes", tuple(spec["classes"]))
        else:
            raise ValidationError(f"{where}.{side}", f"bad policy {spec!r}")
    return AccessPolicy(view_rule=rules["view"], exchange_rule=rules["exchange"])


def parse_query(raw: dict, cls: ObjectClass, where: str = "query") -> Query:
    preds = []
    for name, spec in raw.items():
        if not cls.declares(name):
            raise ValidationError(f"{where}.{name}",
                                  f"attribute not declared by class {cls.class_name!r}")
        if spec == "any":
            preds.append((name, ANY))
        elif isinstance(spec, dict) and "eq" in spec:
            preds.append((name, Eq(spec["eq"])))
        elif isinstance(spec, dict) and "prefix" in spec:
            preds.append((name, Prefix(spec["prefix"])))
        elif isinstance(spec, dict) and "range" in spec:
            lo, hi = spec["range"]
            preds.append((name, Range(lo, hi)))
        else:
            raise ValidationError(f"{where}.{name}", f"bad predicate {spec!r}")
    return Query(cls.class_name, tuple(preds))


def load_scenario(path: str) -> Scenario:
    """Parse and cross-validate a scenario file."""
    with open(path) as fh:
        try:
            raw = json.load(fh)
        except json.JSONDecodeError as exc:
            raise ScenarioParseError(
                f"{path}: line {exc.lineno} col {exc.colno}: {exc.msg}") from exc
    return parse_scenario(raw, source=path)


def parse_scenario(raw: dict, source: str = None) -> Scenario:
    classes = []
    for i, c in enumerate(raw.get("classes", [])):
        where = f"classes[{i}]"
        try:
            classes.append(ObjectClass(
                class_name=c["name"],
                defining_attributes=tuple((n, AttributeKind(k)) for n, k in c["defining"]),
                extra_description_attributes=tuple(
                    (n, AttributeKind(k)) for n, k in c.get("extra", [])),
                methods=tuple(c.get("methods", ())),
            ))
        except (KeyError, ValueError) as exc:
            raise ValidationError(where, str(exc)) from exc
    by_name = {c.class_name: c for c in classes}

    partitions = []
    for i, p in enumerate(raw.get("partitions", [])):
        where = f"partitions[{i}]"
        cname = p.get("class")
        if cname not in by_name:
            raise ValidationError(where, f"unknown class {cname!r}")
        cls = by_name[cname]
        for attr in p.get("cuts", {}):
            if not cls.declares(attr):
                raise ValidationError(f"{where}.cuts",
                                      f"attribute {attr!r} not declared by {cname!r}")
        partitions.append((cname, dict(p.get("cuts", {})), int(p.get("irn_count", 1))))

    domains = list(raw.get("domains", []))
    links = []
    for i, l in enumerate(raw.get("links", [])):
        a, b = l[0], l[1]
        latency = l[2] if len(l) > 2 else 1
        for end in (a, b):
            if end not in domains:
                raise ValidationError(f"links[{i}]", f"unknown domain {end!r}")
        links.append((a, b, latency))

    objects = []
    seen_ids = set()
    for i, o in enumerate(raw.get("objects", [])):
        where = f"objects[{i}]"
        if o.get("class") not in by_name:
            raise ValidationError(where, f"unknown class {o.get('class')!r}")
        if o.get("domain") not in domains:
            raise ValidationError(where, f"unknown domain {o.get('domain')!r}")
        if o["id"] in seen_ids:
            raise ValidationError(where, f"duplicate object id {o['id']!r}")
        seen_ids.add(o["id"])
        cls = by_name[o["class"]]
        for name in cls.defining_names:
            if name not in o.get("values", {}):
                raise ValidationError(f"{where}.values",
                                      f"missing defining attribute {name!r}")
        objects.append(ObjectSpec(
            obj_id=o["id"], class_name=o["class"], values=dict(o["values"]),
            domain=o["domain"], policy=_parse_policy(o.get("policy"), where),
            entry_irn=int(o.get("entry_irn", 0))))

    script = []
    known_actions = {"publish", "discover", "pull", "push", "interactive",
                     "migrate", "delete", "drop_host", "audit"}
    for i, step in enumerate(raw.get("script", [])):
        where = f"script[{i}]"
        action = step.get("action")
        if action not in known_actions:
            raise ValidationError(where, f"unknown action {action!r}")
        for key in ("object", "consumer", "producer", "a", "b"):
            if key in step and step[key] not in seen_ids:
                raise ValidationError(where, f"unknown object {step[key]!r}")
        if action == "discover":
            cname = step.get("class")
            if cname not in by_name:
                raise ValidationError(where, f"unknown class {cname!r}")
            parse_query(step.get("query", {}), by_name[cname], f"{where}.query")
        if action == "migrate" and step.get("to") not in domains:
            raise ValidationError(where, f"unknown domain {step.get('to')!r}")
        script.append(dict(step))

    return Scenario(
        seed=int(raw.get("seed", 0)),
        pname_assigner=raw.get("pname_assigner", "data_domain"),
        info_latency=int(raw.get("info_latency", 1)),
        deadline=int(raw.get("deadline", 1000)),
        classes=classes, partitions=partitions, domains=domains,
        links=links, objects=objects, script=script, source=source)


# --- world construction and the script runner --------------------------------


def build_world(scenario: Scenario) -> World:
    world = World(pname_assigner=scenario.pname_assigner,
                  info_latency=scenario.info_latency,
                  deadline=scenario.deadline)
    for cls in scenario.classes:
        world.add_class(cls)
    for name in scenario.domains:
        world.add_domain(name)
    for a, b, latency in scenario.links:
        world.connect_domains(a, b, latency)
    for cname, cuts, irn_count in scenario.partitions:
        world.add_partition(cname, cuts, irn_count)
    for spec in scenario.objects:
        world.add_object(spec)
    return world


def run(scenario: Scenario) -> RunResult:
    """Execute the script step by step; failures are outcomes, not crashes."""
    world = build_world(scenario)
    result = RunResult(metrics=world.metrics, trace=world.trace, world=world)
    for step in scenario.script:
        action = step["action"]
        if action == "publish":
            rec = world.record(step["object"])
            order = step.get("order", "bottom_up")
            try:
                if order == "bottom_up" and rec.host is None:
                    world.instantiate(step["object"])
                world.publish(step["object"], order)
            except OonError as exc:
                world.trace.log(f"ERROR publish {step['object']} {exc}")
        elif action == "discover":
            cls = world.classes[step["class"]]
            query = parse_query(step.get("query", {}), cls)
            result.discoveries.append(
                world.discover(query, entry=int(step.get("entry", 0)),
                               requester_class=step.get("requester_class", "anonymous")))
        elif action in ("pull", "push", "interactive"):
            result.sessions.append(_run_session(world, step))
        elif action == "migrate":
            world.migrate(step["object"], step["to"])
        elif action == "delete":
            world.delete(step["object"])
        elif action == "drop_host":
            world.drop_host(step["object"])
        elif action == "audit":
            report = world.audit_consistency()
            result.audits.append(report)
            world.trace.log(f"AUDIT dangling={len(report.dangling)} "
                            f"orphans={len(report.orphans)}")
        world.loop.run()
    world.finalize_metrics()
    return result


def _run_session(world: World, step: dict):
    action = step["action"]
    if action == "pull":
        producer = world.record(step["producer"]).pname
        return world.pull(step["consumer"], producer, int(step.get("chunks", 1)),
                          reply_to=step.get("reply_to", "SinkDataFrom"))
    if action == "push":
        consumer = world.record(step["consumer"]).pname
        return world.push(step["producer"], consumer, int(step.get("chunks", 1)))
    producer_b = world.record(step["b"]).pname
    return world.interactive(step["a"], producer_b, int(step.get("turns", 1)))


# --- workload generation and the brute-force oracle --------------------------

_LETTERS = "abcdefghijklmnopqrstuvwxyz"


def generate_workload(seed: int, n_objects: int, n_queries: int,
                      cls: ObjectClass, domain: str = "d0",
                      proportions=None) -> tuple:
    """Reproducible object specs and mixed-predicate queries.

    Uses the stdlib Mersenne Twister, seeded, so the same arguments always
    produce the same workload on any platform.  Informational names are
    deduplicated; proportions are (eq, prefix, range, any) weights.
    """
    rng = random.Random(seed)
    weights = proportions or (0.3, 0.2, 0.25, 0.25)

    def random_value(kind: AttributeKind):
        if kind is AttributeKind.TEXT:
            n = rng.randint(1, 8)
            return "".join(rng.choice(_LETTERS) for _ in range(n))
        return rng.randint(0, 999_999)

    specs, seen = [], set()
    attrs = cls.defining_attributes + cls.extra_description_attributes
    while len(specs) < n_objects:
        values = {name: random_value(kind) for name, kind in attrs}
        key = tuple(str(values[n]).casefold() for n in cls.defining_names)
        if key in seen:
            continue
        seen.add(key)
        specs.append(ObjectSpec(obj_id=f"obj{len(specs)}",
                                class_name=cls.class_name,
                                values=values, domain=domain))

    queries = []
    for _ in range(n_queries):
        preds = []
        for name, kind in cls.defining_attributes:
            choice = rng.choices(("eq", "prefix", "range", "any"), weights)[0]
            pivot = rng.choice(specs).values[name]
            if choice == "eq":
                preds.append((name, Eq(pivot)))
            elif choice == "prefix" and kind is AttributeKind.TEXT:
                cut = rng.randint(1, len(pivot))
                preds.append((name, Prefix(pivot[:cut])))
            elif choice in ("prefix", "range"):
                other = rng.choice(specs).values[name]
                lo, hi = sorted((pivot, other), key=lambda v: str(v).casefold()
                                if kind is AttributeKind.TEXT else v)
                preds.append((name, Range(lo, hi)))
            else:
                preds.append((name, ANY))
        queries.append(Query(cls.class_name, tuple(preds)))
    return specs, queries


def oracle_find(forms, query: Query, cls: ObjectClass,
                requester: Requester = Requester("anonymous")) -> list:
    """Linear scan reference for find: no partition logic involved."""
    return [f for f in forms
            if eval_query(query, f, cls) and check_access(f, requester, "view")]


def result_keys(forms, cls: ObjectClass) -> set:
    """Set identity of a find result, by normalized informational name."""
    return {iname_key(cls, f.iname) for f in forms}
