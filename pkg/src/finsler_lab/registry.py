"""Catalogs of built-in metrics, densities, flows and groups.

Every object is described by a plain dict with a ``kind`` key; ``parse_*``
turns such a dict into the object and the object's ``config`` attribute
formats it back, so ``parse(format(parse(cfg)))`` reproduces ``parse(cfg)``.
"""
from __future__ import annotations

from . import crofton_sphere as cs
from . import entropy_growth as eg
from . import finsler_core as fc


class ConfigError(ValueError):
    pass


# kind -> (parameter schema, description)
METRICS = {
    "euclidean": ({}, "flat metric |xi| on the plane"),
    "scaled": ({"c": "positive number"}, "c |xi| on the plane"),
    "randers": ({"beta": "[b1, b2], numbers or expressions in x1, x2"},
                "|xi| + b1 xi1 + b2 xi2 on the plane, |b| < 1"),
    "sphere_round": ({}, "unit round sphere in two stereographic charts"),
    "poincare": ({}, "hyperbolic metric on the unit disk"),
    "crofton": ({"density": "density spec", "nodes": "Gauss-Legendre nodes per arc (optional)",
                            "pairing": "'normal' (default) or 'direction' (diagnostic)"},
                "Crofton metric of an even positive density on the sphere"),
    "one_form_sum": ({"base": "metric spec", "beta": "[b1, b2]", "lam": "positive number",
                      "chart": "chart carrying beta (optional)"}, "lam * base + beta"),
    "expression": ({"F": "expression in x1, x2, xi1, xi2"},
                   "plane metric given by a formula (not checked for homogeneity)"),
}

DENSITIES = {
    "constant": ({"value": "positive number"}, "constant density; gives a multiple of the round metric"),
    "polar_cap": ({"a": "non-negative number"},
                  "1 + a exp(-1/(x3^2 - 1/2)) on |x3| > 1/sqrt 2, and 1 elsewhere"),
    "expression": ({"expr": "expression in x1, x2, x3"}, "density given by a formula"),
}

FLOWS = {
    "rotation": ({"omega": "angular speed"}, "rigid rotation of the unit disk (entropy 0)"),
    "flat_torus": ({}, "geodesic flow of the flat torus (entropy 0)"),
    "doubling_suspension": ({}, "suspension of x -> 2x mod 1 (entropy log 2)"),
}

GROUPS = {
    "free": ({"rank": "number of generators"}, "free group"),
    "trivial": ({"rank": "number of generators"}, "every generator is a relator"),
    "surface": ({"genus": "genus >= 1"}, "closed orientable surface group"),
}


def _kind(cfg, table, what):
    if isinstance(cfg, str):
        cfg = {"kind": cfg}
    if not isinstance(cfg, dict) or "kind" not in cfg:
        raise ConfigError(f"{what} spec must be a mapping with a 'kind' key, got {cfg!r}")
    kind = cfg["kind"]
    if kind not in table:
        raise ConfigError(f"unknown {what} kind {kind!r}; known: {sorted(table)}")
    unknown = set(cfg) - {"kind"} - set(table[kind][0])
    if unknown:
        raise ConfigError(f"unknown keys {sorted(unknown)} for {what} {kind!r}")
    return kind, cfg


def _pair(v, name):
    if not isinstance(v, (list, tuple)) or len(v) != 2:
        raise ConfigError(f"{name} must be a two-element list")
    return v


def parse_density(cfg) -> cs.DensityField:
    kind, cfg = _kind(cfg, DENSITIES, "density")
    if kind == "constant":
        return cs.constant_density(cfg.get("value", 1.0))
    if kind == "polar_cap":
        return cs.polar_cap_density(cfg.get("a", 1.0))
    return cs.expression_density(cfg["expr"])


def parse_metric(cfg) -> fc.MetricModel:
    kind, cfg = _kind(cfg, METRICS, "metric")
    try:
        if kind == "euclidean":
            return fc.euclidean()
        if kind == "scaled":
            return fc.scaled(cfg.get("c", 2.0))
        if kind == "randers":
            b1, b2 = _pair(cfg.get("beta", [0.2, 0.0]), "beta")
            return fc.randers(b1, b2)
        if kind == "sphere_round":
            return fc.sphere_round()
        if kind == "poincare":
            return fc.poincare()
        if kind == "crofton":
            return cs.crofton_metric(parse_density(cfg.get("density", {"kind": "constant"})),
                                     cfg.get("nodes"), cfg.get("pairing", "normal"))
        if kind == "one_form_sum":
            b1, b2 = _pair(cfg["beta"], "beta")
            return fc.one_form_sum(parse_metric(cfg["base"]), fc.OneForm(b1, b2, cfg.get("chart")),
                                   cfg.get("lam", 1.0))
        return fc.expression_metric(cfg["F"])
    except KeyError as exc:
        raise ConfigError(f"metric {kind!r} needs key {exc}") from None


def parse_one_form(cfg) -> fc.OneForm:
    if isinstance(cfg, dict):
        b1, b2 = _pair(cfg.get("beta"), "beta")
        return fc.OneForm(b1, b2, cfg.get("chart"))
    b1, b2 = _pair(cfg, "beta")
    return fc.OneForm(b1, b2)


def parse_flow(cfg) -> eg.FlowSampler:
    kind, cfg = _kind(cfg, FLOWS, "flow")
    if kind == "rotation":
        return eg.rotation_flow(cfg.get("omega", 1.0))
    return eg.FLOWS[kind]()


def parse_group(cfg) -> eg.GroupPresentation:
    kind, cfg = _kind(cfg, GROUPS, "group")
    if kind == "free":
        return eg.free_group(int(cfg.get("rank", 2)))
    if kind == "trivial":
        return eg.trivial_group(int(cfg.get("rank", 2)))
    return eg.surface_group(int(cfg.get("genus", 2)))


def format_group(G: eg.GroupPresentation) -> dict:
    name = G.name.split("(")[0]
    arg = int(G.name.split("(")[1].rstrip(")"))
    return {"kind": name, ("genus" if name == "surface" else "rank"): arg}


def catalog() -> dict:
    """All registries with their parameter schemas (stable ordering)."""

    def table(t):
        return {k: {"parameters": dict(v[0]), "description": v[1]} for k, v in sorted(t.items())}

    return {"metrics": table(METRICS), "densities": table(DENSITIES),
            "flows": table(FLOWS), "groups": table(GROUPS)}


#: one representative spec per kind (used by list-builtins and by tests)
EXAMPLES = {
    "metrics": [
        {"kind": "euclidean"}, {"kind": "scaled", "c": 3.0},
        {"kind": "randers", "beta": [0.2, "0.1*x1"]}, {"kind": "sphere_round"}, {"kind": "poincare"},
        {"kind": "crofton", "density": {"kind": "polar_cap", "a": 1.0}, "nodes": 512},
        {"kind": "one_form_sum", "base": {"kind": "euclidean"}, "beta": ["cos(x1)", 0.0], "lam": 2.0},
        {"kind": "expression", "F": "sqrt(xi1^2 + xi2^2) * exp(x1)"},
    ],
    "densities": [{"kind": "constant", "value": 2.0}, {"kind": "polar_cap", "a": 1.0},
                  {"kind": "expression", "expr": "1 + 0.1*x3^2"}],
    "flows": [{"kind": "rotation", "omega": 1.0}, {"kind": "flat_torus"},
              {"kind": "doubling_suspension"}],
    "groups": [{"kind": "free", "rank": 2}, {"kind": "trivial", "rank": 2}, {"kind": "surface", "genus": 2}],
}
