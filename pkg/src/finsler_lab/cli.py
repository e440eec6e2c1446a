"""``finsler-lab``: run experiments from a config file and write reports.

Usage: ``finsler-lab <experiment> --config PATH [--seed N] [--out DIR]``.
Values in the config file take precedence over command-line flags, which
take precedence over the built-in defaults.

Exit status: 0 all assertions passed, 1 an assertion failed, 2 the
configuration could not be parsed, 3 the experiment raised an error.
"""
from __future__ import annotations

import argparse
import csv
import json
import logging
import math
import sys
import time
from pathlib import Path

import numpy as np
import yaml

from . import __version__
from . import crofton_sphere as cs
from . import entropy_growth as eg
from . import finsler_core as fc
from . import geodesic_flow as gf
from . import projective_equivalence as pe
from . import registry
from .expressions import ExpressionError

SCHEMA_VERSION = 1
EXPERIMENTS = ("rapcsak", "conservation", "crofton", "entropy", "growth", "audit")

log = logging.getLogger("finsler_lab")

DEFAULTS = {
    "common": {"seed": 0, "out": "results"},
    "rapcsak": {"F_hat": {"kind": "euclidean"}, "F_check": {"kind": "euclidean"}, "samples": 100,
                "max_residual": None, "expect_equivalent": True, "chart_changes": 0,
                "max_invariance": 1e-7, "reconstruct": True, "tol_I": 1e-6, "beta": None,
                "min_fraction": 0.95},
    "conservation": {"F_hat": {"kind": "sphere_round"}, "F_check": {"kind": "sphere_round"},
                     "geodesics": 3, "T": 10.0, "tol": 1e-10, "dt_out": 0.05, "max_drift": 1e-5,
                     "transport": False, "transport_T": 5.0, "max_transport": 1e-5},
    "crofton": {"density": {"kind": "polar_cap", "a": 1.0}, "nodes": None, "samples": 200,
                "rapcsak_samples": 100, "max_coincidence": 1e-7, "max_residual": 1e-6,
                "max_deviation": 1e-4, "min_spread": 1e-3, "sweep_samples": 60,
                "compare_round": False, "max_round": 1e-8, "pairing": "normal"},
    "entropy": {"flow": {"kind": "doubling_suspension"}, "eps": [0.2, 0.1], "T": [2, 3, 4, 5, 6, 7, 8],
                "candidates": 8000, "dt": None, "saturation": 0.5, "expect": None},
    "growth": {"group": {"kind": "free", "rank": 2}, "n_max": 10, "max_elements": 500000,
               "expect_rate": None, "radii": None, "max_area_error": 1e-6, "expect_exponent": None},
    "audit": {"metric": {"kind": "euclidean"}, "samples": 1000, "tol": None,
              "reversibility_samples": 20, "expect_reversibility": None},
}


class AssertionLog:
    def __init__(self):
        self.items = []

    def check(self, name, value, threshold, op="<="):
        value = None if value is None else float(value)
        if op == "<=":
            ok = value is not None and value <= threshold
        elif op == ">=":
            ok = value is not None and value >= threshold
        elif op == "in":
            ok = value is not None and threshold[0] <= value <= threshold[1]
        elif op == "==":
            ok = value == threshold
        else:
            raise ValueError(op)
        self.items.append({"name": name, "value": value, "op": op, "threshold": threshold,
                           "passed": bool(ok)})
        return ok

    def flag(self, name, ok, detail=None):
        self.items.append({"name": name, "passed": bool(ok), "detail": detail})

    @property
    def passed(self):
        return all(a["passed"] for a in self.items)


def _clean(obj):
    """JSON-safe copy: numpy scalars to Python, non-finite floats to None."""
    if isinstance(obj, dict):
        return {str(k): _clean(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_clean(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return _clean(obj.tolist())
    if isinstance(obj, (np.integer,)):
        return int(obj)
    if isinstance(obj, (float, np.floating)):
        v = float(obj)
        return v if math.isfinite(v) else None
    return obj


def _write_table(out: Path, name: str, rows):
    rows = list(rows)
    tables = out / "tables"
    tables.mkdir(parents=True, exist_ok=True)
    with open(tables / f"{name}.csv", "w", newline="") as fh:
        if not rows:
            return
        w = csv.DictWriter(fh, fieldnames=list(rows[0]))
        w.writeheader()
        for r in rows:
            w.writerow({k: (repr(v) if isinstance(v, float) else v) for k, v in r.items()})


# -- experiments ---------------------------------------------------------------


def run_rapcsak(cfg, out, checks):
    F_hat = registry.parse_metric(cfg["F_hat"])
    F_check = registry.parse_metric(cfg["F_check"])
    if cfg["beta"] is not None:
        beta = registry.parse_one_form(cfg["beta"])
        F_check = fc.one_form_sum(F_check, beta)
    n, seed = int(cfg["samples"]), int(cfg["seed"])
    samples = fc.sample_tangents(F_check, n, seed)
    rows = []
    for k, s in enumerate(samples):
        r = pe.rapcsak_residual(F_check, F_hat, s)
        rows.append({"index": k, "chart": s.chart, "x1": float(s.x[0]), "x2": float(s.x[1]),
                     "xi1": float(s.xi[0]), "xi2": float(s.xi[1]), "residual": float(np.linalg.norm(r)),
                     "I": float(pe.proportionality_integral(F_hat, F_check, s))})
    _write_table(out, "samples", rows)
    res = np.array([r["residual"] for r in rows])
    I = np.array([r["I"] for r in rows])
    limit = cfg["max_residual"]
    if limit is None:
        limit = 10 * max(F_hat.tolerance, F_check.tolerance)
    equivalent = bool(res.max() <= limit)
    result = {"residual_max": float(res.max()), "I_min": float(I.min()), "I_max": float(I.max()),
              "I_mean": float(I.mean()), "drift": None, "sample_count": n, "seed": seed,
              "fraction_at_or_above_limit": float(np.mean(res >= limit))}
    verdicts = {"equivalent": equivalent, "I_constant": bool(I.max() - I.min() <= cfg["tol_I"])}
    if cfg["expect_equivalent"]:
        checks.check("residual_max", res.max(), limit)
    else:
        checks.check("fraction_at_or_above_limit", np.mean(res >= limit), cfg["min_fraction"], ">=")
    if cfg["reconstruct"] and equivalent:
        try:
            rec = pe.reconstruct_one_form(F_hat, F_check, min(n, 50), cfg["tol_I"], seed)
            result["reconstruction"] = {"lambda": rec.lam, "closedness_defect": rec.closedness_defect}
            verdicts["beta_closed"] = rec.closedness_defect <= 1e-9
            verdicts["trivially_related"] = bool(verdicts["beta_closed"])
        except pe.NonTrivialPairError as exc:
            result["reconstruction"] = {"status": "non-trivial pair", "detail": str(exc)}
            verdicts["trivially_related"] = False
    if int(cfg["chart_changes"]) > 0:
        rng = np.random.default_rng(seed + 17)
        worst = 0.0
        for k in range(int(cfg["chart_changes"])):
            A = rng.normal(size=(2, 2))
            while abs(np.linalg.det(A)) < 0.1:
                A = rng.normal(size=(2, 2))
            worst = max(worst, pe.coordinate_invariance_check(F_hat, F_check, samples[k % n], A))
        result["invariance_max"] = worst
        checks.check("invariance_max", worst, cfg["max_invariance"])
    result["verdicts"] = verdicts
    return result


def run_conservation(cfg, out, checks):
    F_hat = registry.parse_metric(cfg["F_hat"])
    F_check = registry.parse_metric(cfg["F_check"])
    seed = int(cfg["seed"])
    inits = fc.sample_tangents(F_check, int(cfg["geodesics"]), seed)
    rows = []
    for k, s in enumerate(inits):
        d = pe.conservation_check(F_hat, F_check, s, float(cfg["T"]), float(cfg["tol"]), float(cfg["dt_out"]))
        rows.append({"geodesic": k, "drift": d})
    _write_table(out, "drift", rows)
    drift = max(r["drift"] for r in rows) if rows else 0.0
    checks.check("drift_max", drift, cfg["max_drift"])
    result = {"drift_max": drift, "geodesics": len(rows), "T": cfg["T"]}
    if cfg["transport"]:
        worst = 0.0
        tr_rows = []
        for k, s in enumerate(inits):
            trace = gf.integrate_spray(F_hat, s, float(cfg["transport_T"]) / F_hat.value(s), float(cfg["tol"]))
            rep = pe.trace_transport_residual(F_hat, trace)
            tr_rows.append({"geodesic": k, "residual": rep.residual, "pointwise": rep.pointwise})
            worst = max(worst, rep.residual)
        _write_table(out, "transport", tr_rows)
        result["transport_max"] = worst
        checks.check("transport_max", worst, cfg["max_transport"])
    return result


def run_crofton(cfg, out, checks):
    density = registry.parse_density(cfg["density"])
    if cfg["pairing"] not in cs.PAIRINGS:
        raise registry.ConfigError(f"pairing must be one of {cs.PAIRINGS}")
    F = cs.crofton_metric(density, cfg["nodes"], cfg["pairing"])
    seed = int(cfg["seed"])
    result = {"metric": F.config}
    coin = cs.coincidence_check(fc.sphere_round(), F, int(cfg["samples"]), seed)
    result["coincidence"] = coin.__dict__
    eq = cs.equivalence_to_round(F, int(cfg["rapcsak_samples"]), seed)
    result["equivalence"] = eq.__dict__
    cert = cs.nontriviality_certificate(F, int(cfg["sweep_samples"]), seed)
    result["nontriviality"] = cert.__dict__
    if cfg["compare_round"]:
        R = fc.sphere_round()
        diff = max(abs(F.value(s) - R.value(s)) for s in fc.sample_tangents(R, int(cfg["samples"]), seed))
        result["round_difference"] = diff
        checks.check("round_difference", diff, cfg["max_round"])
    checks.check("coincidence_on_caps", coin.max_difference, cfg["max_coincidence"])
    checks.check("rapcsak_residual", eq.residual_max, cfg["max_residual"])
    checks.check("great_circle_deviation", eq.deviation_max, cfg["max_deviation"])
    if cfg["min_spread"] is not None:
        checks.check("I_spread", cert.spread, cfg["min_spread"], ">=")
    return result


def run_entropy(cfg, out, checks):
    flow = registry.parse_flow(cfg["flow"])
    est = eg.entropy_estimate(flow, cfg["eps"], cfg["T"], int(cfg["candidates"]), int(cfg["seed"]),
                              cfg["dt"], float(cfg["saturation"]))
    _write_table(out, "counts", est.rows())
    if cfg["expect"] is not None:
        checks.check("entropy", est.entropy, tuple(cfg["expect"]), "in")
    return est.to_dict()


def run_growth(cfg, out, checks):
    result = {}
    if cfg["group"] is not None:
        G = registry.parse_group(cfg["group"])
        b = eg.group_ball_sizes(G, int(cfg["n_max"]), int(cfg["max_elements"]))
        rows = [{"n": n, "ball_size": s} for n, s in enumerate(b.sizes)]
        if G.name.startswith("free"):
            k = G.n_generators
            closed = [1 + 2 * k * ((2 * k - 1) ** n - 1) // (2 * k - 2) if k > 1 else 2 * n + 1
                      for n in range(len(b.sizes))]
            for r, c in zip(rows, closed):
                r["closed_form"] = c
            checks.flag("free_group_closed_form", closed == b.sizes)
        _write_table(out, "ball_sizes", rows)
        result["group"] = {**b.to_dict(), "presentation": G.config()}
        checks.flag("enumeration_complete", b.complete)
        if cfg["expect_rate"] is not None:
            checks.check("growth_rate", b.rate, tuple(cfg["expect_rate"]), "in")
    if cfg["radii"] is not None:
        h = eg.hyperbolic_ball_growth(cfg["radii"])
        _write_table(out, "hyperbolic_area", [{"r": r, "closed_form": a, "numeric": b}
                                              for r, a, b in zip(h.radii, h.closed_form, h.numeric)])
        result["hyperbolic"] = h.to_dict()
        checks.check("area_rel_error", h.rel_error, cfg["max_area_error"])
        if cfg["expect_exponent"] is not None:
            checks.check("area_exponent", h.exponent, tuple(cfg["expect_exponent"]), "in")
    return result


def run_audit(cfg, out, checks):
    F = registry.parse_metric(cfg["metric"])
    n, seed = int(cfg["samples"]), int(cfg["seed"])
    tol = F.tolerance if cfg["tol"] is None else float(cfg["tol"])
    result = {"metric": F.config}
    hom = fc.homogeneity_audit(F, n, seed, tol)
    result["homogeneity"] = hom.to_dict()
    for name in ("F", "g", "h", "G"):
        checks.check(f"homogeneity_{name}", hom.violations[name], tol)
    try:
        structure = fc.structure_audit(F, fc.sample_tangents(F, n, seed))
        result["structure"] = structure
        for k, v in structure.items():
            checks.check(f"structure_{k}", v, tol)
    except (fc.NotFinslerError, fc.DegeneracyError) as exc:
        checks.flag("structure", False, str(exc))
    lam = eg.reversibility_number(F, int(cfg["reversibility_samples"]), seed)
    result["reversibility_number"] = lam
    if cfg["expect_reversibility"] is not None:
        target, atol = cfg["expect_reversibility"]
        checks.check("reversibility_number", abs(lam - target), atol)
    return result


RUNNERS = {"rapcsak": run_rapcsak, "conservation": run_conservation, "crofton": run_crofton,
           "entropy": run_entropy, "growth": run_growth, "audit": run_audit}


# -- config handling -----------------------------------------------------------


class ParseError(Exception):
    pass


def load_config(path) -> dict:
    try:
        text = Path(path).read_text()
    except OSError as exc:
        raise ParseError(f"cannot read config {path}: {exc}") from None
    try:
        data = yaml.safe_load(text)
    except yaml.YAMLError as exc:
        raise ParseError(f"cannot parse config {path}: {exc}") from None
    if data is None:
        data = {}
    if not isinstance(data, dict):
        raise ParseError("config must be a mapping")
    return data


def resolve_config(kind: str, file_cfg: dict, flags: dict) -> dict:
    """defaults < command-line flags < config file."""
    cfg = {**DEFAULTS["common"], **DEFAULTS[kind]}
    cfg.update({k: v for k, v in flags.items() if v is not None})
    file_cfg = dict(file_cfg)
    if file_cfg.get("experiment", kind) != kind:
        raise ParseError(f"config is for experiment {file_cfg['experiment']!r}, not {kind!r}")
    file_cfg.pop("experiment", None)
    unknown = set(file_cfg) - set(cfg)
    if unknown:
        raise ParseError(f"unknown keys for {kind}: {sorted(unknown)}")
    cfg.update(file_cfg)
    for key, value in cfg.items():
        if (key.startswith(("tol", "max_")) and isinstance(value, (int, float))
                and not isinstance(value, bool) and value <= 0):
            raise ParseError(f"{key} must be positive")
    return cfg


def validate_specs(kind, cfg):
    """Parse metric/density/flow/group specs up front so that typos exit with status 2."""
    try:
        for key in ("F_hat", "F_check", "metric"):
            if key in cfg and cfg[key] is not None:
                registry._kind(cfg[key], registry.METRICS, "metric")
        if kind == "crofton":
            registry._kind(cfg["density"], registry.DENSITIES, "density")
        if kind == "entropy":
            registry.parse_flow(cfg["flow"])
        if kind == "growth" and cfg["group"] is not None:
            registry.parse_group(cfg["group"])
    except (registry.ConfigError, ExpressionError) as exc:
        raise ParseError(str(exc)) from None


def run_experiment(kind: str, cfg: dict) -> tuple[int, dict]:
    """Run one experiment; returns (exit status, report)."""
    out = Path(cfg["out"])
    out.mkdir(parents=True, exist_ok=True)
    checks = AssertionLog()
    status = 0
    error = None
    try:
        result = RUNNERS[kind](cfg, out, checks)
    except (registry.ConfigError, ExpressionError) as exc:
        return 2, {"error": str(exc)}
    except (fc.NotFinslerError, fc.DegeneracyError) as exc:
        result, error = {}, f"{type(exc).__name__}: {exc}"
        checks.flag(type(exc).__name__, False, str(exc))
    except Exception as exc:  # noqa: BLE001 - reported with status 3
        log.exception("experiment %s failed", kind)
        result, error, status = {}, f"{type(exc).__name__}: {exc}", 3
    if status == 0 and not checks.passed:
        status = 1
    report = {"schema_version": SCHEMA_VERSION, "experiment": kind, "config": cfg,
              "results": result, "assertions": checks.items,
              "failures": [a["name"] for a in checks.items if not a["passed"]],
              "status": {0: "pass", 1: "fail", 3: "error"}[status], "error": error}
    return status, _clean(report)


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(prog="finsler-lab", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=__version__)
    sub = parser.add_subparsers(dest="command", required=True)
    for kind in EXPERIMENTS:
        p = sub.add_parser(kind, help=f"run the {kind} experiment")
        p.add_argument("--config", required=True, help="YAML or JSON experiment config")
        p.add_argument("--seed", type=int, default=None)
        p.add_argument("--out", default=None, help="output directory (default: results)")
        p.add_argument("--samples", type=int, default=None, help="sample count where applicable")
        p.add_argument("-v", "--verbose", action="store_true")
    p = sub.add_parser("list-builtins", help="print the built-in catalogs")
    p.add_argument("--examples", action="store_true", help="also print one spec per kind")
    args = parser.parse_args(argv)

    if args.command == "list-builtins":
        data = registry.catalog()
        if args.examples:
            data["examples"] = registry.EXAMPLES
        print(json.dumps(data, indent=2, sort_keys=True))
        return 0

    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    flags = {"seed": args.seed, "out": args.out}
    if args.samples is not None and "samples" in DEFAULTS[args.command]:
        flags["samples"] = args.samples
    try:
        cfg = resolve_config(args.command, load_config(args.config), flags)
        validate_specs(args.command, cfg)
    except ParseError as exc:
        print(f"finsler-lab: {exc}", file=sys.stderr)
        return 2
    t0 = time.time()
    status, report = run_experiment(args.command, cfg)
    if status == 2:
        print(f"finsler-lab: {report['error']}", file=sys.stderr)
        return 2
    out = Path(cfg["out"])
    (out / "report.json").write_text(json.dumps(report, indent=2, sort_keys=True) + "\n")
    meta = {"started": time.strftime("%Y-%m-%dT%H:%M:%S", time.localtime(t0)),
            "duration_s": round(time.time() - t0, 3), "version": __version__,
            "numpy": np.__version__}
    (out / "metadata.json").write_text(json.dumps(meta, indent=2, sort_keys=True) + "\n")
    summary = "pass" if status == 0 else ("fail: " + ", ".join(report["failures"]) if status == 1
                                          else f"error: {report['error']}")
    print(f"{args.command}: {summary} (report in {out / 'report.json'})")
    return status


if __name__ == "__main__":
    sys.exit(main())
