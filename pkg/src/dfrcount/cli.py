"""Command-line front end: YAML experiment configs in, run directories out.

A run directory holds ``config.yaml`` (the validated config with defaults
filled in), one CSV per tail table and ``report.json``.  The process exit
code is 0 when every verdict holds, 1 when any fails and 2 when some verdict
is inconclusive, the run hit an estimation error, or the config was rejected.
"""

from __future__ import annotations

import argparse
import copy
import json
import os
import platform
import sys
import time
from dataclasses import dataclass, field
from importlib import resources
from pathlib import Path

import jsonschema
import numpy as np
import scipy
import yaml

from . import __version__, kernels
from . import distmodel as dm
from . import ordassoc, procgen, queuesim, stopcount
from .streams import child
from .verdict import FAILS, HOLDS, INCONCLUSIVE, ClassVerdict, plain, worst

__all__ = [
    "ConfigError",
    "ExperimentConfig",
    "Report",
    "SCENARIOS",
    "load_schema",
    "parse_config",
    "build_distribution",
    "build_process",
    "run_experiment",
    "write_report",
    "main",
]

SCHEMA_VERSION = 1
SCENARIOS = ("classify", "tails", "ddfr", "order", "assoc", "prop1", "lemma1", "theorem1",
             "queue", "little", "sojourn")
EXIT_CODES = {HOLDS: 0, FAILS: 1, INCONCLUSIVE: 2}

_PARAMS = {
    "exponential": ({"rate"}, set()),
    "weibull": ({"shape"}, {"scale"}),
    "uniform": ({"high"}, {"low"}),
    "deterministic": ({"value"}, set()),
    "exponential-mixture": ({"weights", "rates"}, set()),
    "zero-inflated": ({"p0"}, set()),
    "empirical": (set(), set()),
}

# which top-level sections each scenario needs
_NEEDS = {
    "classify": ("distribution",),
    "tails": ("process", "T"),
    "ddfr": (),
    "order": ("X", "Y"),
    "assoc": ("process",),
    "prop1": ("process", "T"),
    "lemma1": ("process", "T"),
    "theorem1": ("process", "T"),
    "queue": ("queue",),
    "little": ("queue",),
    "sojourn": ("queue",),
}


class ConfigError(ValueError):
    """Schema or cross-field violation; the message starts with the offending path."""


def load_schema() -> dict:
    text = resources.files("dfrcount").joinpath("schemas/config.schema.json").read_text()
    return json.loads(text)


def _resolve(schema, root):
    while "$ref" in schema:
        ref = schema["$ref"]
        node = root
        for part in ref.lstrip("#/").split("/"):
            node = node[part]
        schema = node
    return schema


def _apply_defaults(doc, schema, root):
    schema = _resolve(schema, root)
    if isinstance(doc, dict):
        for key, sub in schema.get("properties", {}).items():
            sub_r = _resolve(sub, root)
            default = sub.get("default", sub_r.get("default"))
            if key not in doc and default is not None:
                doc[key] = copy.deepcopy(default)
            if key in doc:
                _apply_defaults(doc[key], sub_r, root)
    elif isinstance(doc, list) and "items" in schema:
        for item in doc:
            _apply_defaults(item, schema["items"], root)
    return doc


def _path(parts) -> str:
    return ".".join(str(p) for p in parts) or "<root>"


@dataclass(frozen=True)
class ExperimentConfig:
    """Validated config document (defaults applied) plus resolved model objects."""

    raw: dict
    seed: int
    workers: int
    scenario: str
    models: dict = field(default_factory=dict)

    def get(self, key, default=None):
        return self.raw.get(key, default)


def _dist_params(spec, path):
    family = spec["family"]
    params = dict(spec.get("params", {}))
    required, optional = _PARAMS[family]
    for k in params:
        if k not in required | optional:
            raise ConfigError(f"{path}.params.{k}: unknown parameter for family {family!r}")
    for k in required:
        if k not in params:
            raise ConfigError(f"{path}.params: missing parameter {k!r} for family {family!r}")
    return family, params


def build_distribution(spec: dict, path: str = "distribution", *, scale: float = 1.0,
                       base_dir: Path | None = None) -> dm.SurvivalModel:
    """Survival model from a distribution spec, optionally scaled by ``scale``."""
    family, p = _dist_params(spec, path)
    try:
        if family == "exponential":
            return dm.Exponential(p["rate"] / scale)
        if family == "weibull":
            return dm.Weibull(p["shape"], p.get("scale", 1.0) * scale)
        if family == "uniform":
            return dm.Uniform(p.get("low", 0.0) * scale, p["high"] * scale)
        if family == "deterministic":
            return dm.Deterministic(p["value"] * scale)
        if family == "exponential-mixture":
            return dm.ExponentialMixture(p["weights"], np.asarray(p["rates"], float) / scale)
        if family == "zero-inflated":
            if "base" not in spec:
                raise ConfigError(f"{path}.base: zero-inflated needs a base distribution")
            base = build_distribution(spec["base"], f"{path}.base", scale=scale, base_dir=base_dir)
            return dm.ZeroInflated(base, p["p0"])
        if "path" not in spec:
            raise ConfigError(f"{path}.path: empirical family needs a sample file")
        f = Path(spec["path"])
        if base_dir is not None and not f.is_absolute():
            f = base_dir / f
        m = dm.Empirical.from_file(f)
        if scale != 1.0:
            m = dm.Empirical(m.samples * scale)
        return m
    except (TypeError, KeyError) as exc:
        raise ConfigError(f"{path}: bad parameters for {family}: {exc}") from None
    except dm.ModelError as exc:
        raise ConfigError(f"{path}: {exc}") from None


def build_process(spec: dict, path: str = "process", *,
                  base_dir: Path | None = None) -> procgen.InterarrivalProcess:
    variant = spec["variant"]

    def need(key):
        if key not in spec:
            raise ConfigError(f"{path}.{key}: required for variant {variant!r}")
        return spec[key]

    def dist(key, **kw):
        return build_distribution(need(key), f"{path}.{key}", base_dir=base_dir, **kw)

    try:
        if variant == "iid_renewal":
            return procgen.iid_renewal(dist("interarrival"))
        if variant == "equilibrium_renewal":
            return procgen.equilibrium_renewal(dist("interarrival"))
        if variant == "yule":
            return procgen.yule(need("rate"))
        if variant == "pure_birth":
            r = need("rates")
            if r["type"] == "affine":
                if "a" not in r or "b" not in r:
                    raise ConfigError(f"{path}.rates: affine rates need 'a' and 'b'")
                rates = procgen.RateSequence.affine(r["a"], r["b"])
            else:
                if "values" not in r:
                    raise ConfigError(f"{path}.rates.values: required for explicit rates")
                rates = procgen.RateSequence.explicit(r["values"], r.get("tail", "hold"))
            return procgen.pure_birth(rates, require_increasing=spec.get("require_increasing", False))
        if variant == "independent":
            base_spec = need("base")
            e = float(spec.get("scaling_exponent", 0.0))
            W = dist("base")

            def marginal(n, _e=e):
                return build_distribution(base_spec, f"{path}.base", scale=float(n) ** _e,
                                          base_dir=base_dir)

            return procgen.independent(marginal, scaled=(W, lambda n, _e=e: float(n) ** _e))
        if variant == "product":
            return procgen.product(dist("Y"))
        return procgen.reciprocal_sum(dist("Y"), spec.get("z", 0.0))
    except procgen.ProcessError as exc:
        raise ConfigError(f"{path}: {exc}") from None
    except dm.ModelError as exc:
        raise ConfigError(f"{path}: {exc}") from None


def parse_config(text: str, *, overrides: dict | None = None,
                 base_dir: Path | None = None) -> ExperimentConfig:
    """Validate a YAML (or JSON) config against the published schema.

    ``overrides`` replace top-level keys before validation (the CLI's
    ``--seed``, ``--workers`` and ``--out``).  Relative sample-file paths
    resolve against ``base_dir``.
    """
    try:
        doc = yaml.safe_load(text)
    except yaml.YAMLError as exc:
        raise ConfigError(f"<root>: not a valid YAML document: {exc}") from None
    if not isinstance(doc, dict):
        raise ConfigError("<root>: config must be a mapping")
    doc.update({k: v for k, v in (overrides or {}).items() if v is not None})
    schema = load_schema()
    validator = jsonschema.Draft202012Validator(schema)
    errors = sorted(validator.iter_errors(doc), key=lambda e: (len(e.absolute_path), e.message))
    if errors:
        e = errors[0]
        where = _path(e.absolute_path)
        if e.validator == "additionalProperties":
            extra = sorted(set(e.instance) - set(e.schema.get("properties", {})))
            prefix = "" if where == "<root>" else where + "."
            raise ConfigError(f"{prefix}{extra[0]}: unknown key")
        raise ConfigError(f"{where}: {e.message}")
    doc = _apply_defaults(doc, schema, schema)
    scenario = doc["scenario"]
    for key in _NEEDS[scenario]:
        if key not in doc:
            raise ConfigError(f"{key}: required for scenario {scenario!r}")
    if scenario == "ddfr" and "tails" not in doc and not ("process" in doc and "T" in doc):
        raise ConfigError("tails: ddfr needs inline tails or a process and T")
    if "tails" in doc and "se" in doc["tails"] and len(doc["tails"]["se"]) != len(doc["tails"]["q"]):
        raise ConfigError("tails.se: must have the same length as tails.q")

    models = {}
    for key in ("distribution", "T", "X", "Y"):
        if key in doc:
            models[key] = build_distribution(doc[key], key, base_dir=base_dir)
    if "process" in doc:
        models["process"] = build_process(doc["process"], base_dir=base_dir)
    if "queue" in doc:
        qd = doc["queue"]
        models["queue"] = queuesim.QueueSpec(
            build_distribution(qd["arrival"], "queue.arrival", base_dir=base_dir),
            build_distribution(qd["service"], "queue.service", base_dir=base_dir),
            qd["discipline"])
    return ExperimentConfig(doc, int(doc["seed"]), int(doc["workers"]), scenario, models)


# ---------------------------------------------------------------- running

@dataclass
class Report:
    scenario: str
    verdicts: dict
    tables: dict
    provenance: dict
    runtime: float = 0.0
    diagnostics: dict = field(default_factory=dict)
    csv: dict = field(default_factory=dict)
    error: str | None = None

    @property
    def status(self) -> str:
        if self.error is not None:
            return INCONCLUSIVE
        return worst([v.status for v in self.verdicts.values()]) if self.verdicts else INCONCLUSIVE

    @property
    def exit_code(self) -> int:
        return EXIT_CODES[self.status]

    def to_dict(self, runtime: bool = True) -> dict:
        out = {
            "schema_version": SCHEMA_VERSION,
            "scenario": self.scenario,
            "status": self.status,
            "verdicts": {k: v.to_dict() for k, v in self.verdicts.items()},
            "tables": plain(self.tables),
            "diagnostics": plain(self.diagnostics),
            "provenance": self.provenance,
            "error": self.error,
        }
        if runtime:
            out["runtime_seconds"] = self.runtime
        return out

    def to_json(self, runtime: bool = True) -> str:
        return json.dumps(self.to_dict(runtime), indent=2, sort_keys=True, allow_nan=True) + "\n"


def _grid(cfg, model):
    g = cfg.get("grid")
    if g is None:
        return None
    extra = g.get("points", [])
    return dm.default_grid(model, g["size"], g["lo_quantile"], g["hi_quantile"], extra)


def _tails(cfg, seq, estimator, key):
    proc, T = cfg.models["process"], cfg.models["T"]
    kw = dict(n_max=cfg.get("n_max"), reps=cfg.get("reps"), rng=child(seq, key),
              workers=cfg.workers)
    if estimator == "conditional":
        return stopcount.estimate_tails_conditional(proc, T, **kw)
    return stopcount.estimate_tails_direct(proc, T, **kw)


def _agreement(a, b, k=3.0):
    m = min(a.n_max, b.n_max)
    n = np.arange(1, m + 1)
    diff = a.q[n] - b.q[n]
    comb = np.sqrt(a.se[n] ** 2 + b.se[n] ** 2)
    with np.errstate(divide="ignore", invalid="ignore"):
        ratio = np.where(comb > 0, np.abs(diff) / comb, np.where(diff == 0, 0.0, np.inf))
    rows = {"n": n.tolist(), "diff": diff.tolist(), "combined_se": comb.tolist(),
            "ratio": ratio.tolist()}
    if m == 0:
        return ClassVerdict(INCONCLUSIVE, notes=("no common tail entries",), details=rows)
    margin = float(np.min(k * comb - np.abs(diff)))
    bad = np.flatnonzero(ratio > k)
    if bad.size:
        i = int(bad[0])
        return ClassVerdict(FAILS, witness={"n": int(n[i]), "lhs": float(a.q[n[i]]),
                                            "rhs": float(b.q[n[i]])}, margin=margin, details=rows)
    return ClassVerdict(HOLDS, margin=margin, details=rows)


def _run_scenario(cfg: ExperimentConfig, report: Report) -> None:
    seq = np.random.SeedSequence(cfg.seed)
    sc = cfg.scenario
    conf = cfg.get("confidence")
    V, tables, csvs = report.verdicts, report.tables, report.csv

    if sc == "classify":
        model = cfg.models["distribution"]
        classes = cfg.get("classes") or [cfg.get("class", "DFR")]
        if "class" in cfg.raw and "classes" in cfg.raw:
            classes = list(dict.fromkeys([cfg.get("class")] + list(cfg.get("classes"))))
        grid = _grid(cfg, model)
        for c in classes:
            V[c] = dm.check_class(model, c, grid=grid, tol=cfg.get("tol"))
        tables["model"] = model.describe()
        return

    if sc in ("tails", "ddfr"):
        if "tails" in cfg.raw:
            t = cfg.get("tails")
            est = stopcount.TailEstimate.from_tails(t["q"], t.get("se"), estimator="inline")
            results = {"inline": est}
        else:
            kind = cfg.get("estimator")
            kinds = ["conditional", "direct"] if kind == "both" else [kind]
            results = {k: _tails(cfg, seq, k, i) for i, k in enumerate(kinds)}
        for name, est in results.items():
            tables[f"tails_{name}"] = est.to_dict()
            csvs[f"tails_{name}.csv"] = est.to_csv()
            if sc == "ddfr":
                V[f"ddfr_{name}" if len(results) > 1 else "ddfr"] = stopcount.check_ddfr(est, conf)
            else:
                V[f"monotone_{name}"] = stopcount.check_monotone(est)
        if len(results) == 2:
            V["estimator_agreement"] = _agreement(results["conditional"], results["direct"])
        return

    if sc == "order":
        X, Y = cfg.models["X"], cfg.models["Y"]
        grid = cfg.get("grid", {}).get("points") if cfg.get("grid") else None
        V["X<=Y"] = ordassoc.check_stochastic_order(X, Y, grid, cfg.get("tol"), confidence=conf)
        rel, _ = ordassoc.order_relation(X, Y, grid, cfg.get("tol"))
        tables["relation"] = rel
        return

    proc = cfg.models.get("process")
    if sc == "assoc":
        r = ordassoc.estimate_association(proc.pair(), reps=cfg.get("assoc_reps"),
                                          rng=child(seq, 0), confidence=conf, workers=cfg.workers)
        V["association"] = r.verdict
        tables["association"] = r.to_dict()
        return
    if sc == "prop1":
        V["prop1"] = ordassoc.check_prop1(proc.pair(), cfg.models["T"], cfg.get("reps"),
                                          child(seq, 0), confidence=conf, workers=cfg.workers)
        return
    if sc == "lemma1":
        V["lemma1"] = stopcount.check_lemma1(proc, cfg.models["T"], cfg.get("reps"), child(seq, 0),
                                             n_max=cfg.get("n_max"), confidence=conf,
                                             workers=cfg.workers)
        return
    if sc == "theorem1":
        r = ordassoc.check_theorem1(proc, cfg.models["T"], cfg.get("reps"), child(seq, 0),
                                    confidence=conf, assoc_reps=cfg.get("assoc_reps"),
                                    workers=cfg.workers)
        V.update(r.verdicts())
        tables["association"] = r.c_association.to_dict()
        return

    q = cfg.models["queue"]
    qd = cfg.get("queue")
    est = queuesim.simulate_queue(q, qd["customers"], qd["burn_in"], child(seq, 0),
                                  paths=qd["paths"], batches=qd["batches"],
                                  max_level=qd["max_level"], workers=cfg.workers)
    lq = est.queue_length_tails
    tables["queue"] = q.describe()
    tables["waiting_zero_frequency"] = {"estimate": est.zero_frequency,
                                        "se": est.zero_frequency_se()}
    tables["queue_length_tails"] = lq.to_dict()
    csvs["queue_length_tails.csv"] = lq.to_csv()
    report.diagnostics["arrival_NWUE"] = dm.check_class(q.arrival, "NWUE").to_dict()
    report.diagnostics["service_DFR"] = dm.check_class(q.service, "DFR").to_dict()
    if sc == "queue":
        tg = qd.get("t_grid")
        if tg is None:
            w = est.waiting_times[est.waiting_times > 0]
            tg = np.quantile(w, np.linspace(0.05, 0.95, 10)).tolist() if w.size else [0.0]
        p, s = est.waiting_survival(tg)
        tables["waiting_survival"] = {"t": list(map(float, tg)), "estimate": p.tolist(),
                                      "se": s.tolist()}
        tables["system_length_tails"] = est.sojourn_length_tails.to_dict()
        csvs["system_length_tails.csv"] = est.sojourn_length_tails.to_csv()
        V["ddfr_queue_length"] = stopcount.check_ddfr(lq, conf)
    elif sc == "little":
        v, rep = queuesim.littles_cross_check(q, cfg.get("reps"), child(seq, 1), estimate=est,
                                              n_compare=qd["n_compare"], workers=cfg.workers)
        V["littles_law"] = v
        tables["discrepancy"] = rep
    else:
        tails, v = queuesim.sojourn_stopped_count(q, cfg.get("reps"), child(seq, 1), estimate=est,
                                                  n_max=cfg.get("n_max"), confidence=conf,
                                                  workers=cfg.workers)
        tables["sojourn_count_tails"] = tails.to_dict()
        csvs["sojourn_count_tails.csv"] = tails.to_csv()
        V["ddfr_sojourn_count"] = v


def _provenance(cfg: ExperimentConfig) -> dict:
    return {
        "seed": cfg.seed,
        "workers": cfg.workers,
        "kernel_backend": kernels.BACKEND,
        "versions": {"dfrcount": __version__, "numpy": np.__version__,
                     "scipy": scipy.__version__, "python": platform.python_version()},
    }


def run_experiment(cfg: ExperimentConfig, out: str | os.PathLike | None = None) -> Report:
    """Run the configured scenario and write its artifacts when ``out`` is given.

    ``out`` defaults to the config's ``out`` key; pass ``out=False`` to skip
    writing.  Estimation errors are captured in the report (status
    inconclusive) instead of raised.
    """
    report = Report(cfg.scenario, {}, {}, _provenance(cfg))
    t0 = time.perf_counter()
    try:
        _run_scenario(cfg, report)
    except (ValueError, ArithmeticError, RuntimeError) as exc:
        report.error = f"{type(exc).__name__}: {exc}"
    report.runtime = time.perf_counter() - t0
    if out is None:
        out = cfg.get("out")
    if out:
        write_report(cfg, report, out)
    return report


def write_report(cfg: ExperimentConfig, report: Report, out) -> Path:
    d = Path(out)
    d.mkdir(parents=True, exist_ok=True)
    (d / "config.yaml").write_text(yaml.safe_dump(cfg.raw, sort_keys=True))
    for name, text in report.csv.items():
        (d / name).write_text(text)
    (d / "report.json").write_text(report.to_json())
    return d


def _parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="dfrcount", description=__doc__.splitlines()[0])
    p.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = p.add_subparsers(dest="command", required=True)
    for name in SCENARIOS + ("run",):
        s = sub.add_parser(name, help="run the config's scenario" if name == "run"
                           else f"run a {name} scenario")
        s.add_argument("--config", required=True, type=Path, help="YAML config file")
        s.add_argument("--seed", type=int, help="override the config seed")
        s.add_argument("--workers", type=int, help="override the worker count")
        s.add_argument("--out", help="run directory (default: config 'out' or runs/<scenario>-<seed>)")
    sub.add_parser("schema", help="print the config JSON schema")
    return p


def main(argv=None) -> int:
    args = _parser().parse_args(argv)
    if args.command == "schema":
        print(json.dumps(load_schema(), indent=2))
        return 0
    try:
        text = args.config.read_text()
        cfg = parse_config(text, overrides={"seed": args.seed, "workers": args.workers,
                                            "out": args.out},
                           base_dir=args.config.resolve().parent)
    except (OSError, ConfigError, dm.ModelError) as exc:
        print(f"dfrcount: config error: {exc}", file=sys.stderr)
        return 2
    if args.command != "run" and args.command != cfg.scenario:
        print(f"dfrcount: config error: scenario: config declares {cfg.scenario!r}, "
              f"command is {args.command!r}", file=sys.stderr)
        return 2
    out = cfg.get("out") or f"runs/{cfg.scenario}-{cfg.seed}"
    report = run_experiment(cfg, out)
    for name, v in report.verdicts.items():
        line = f"{name}: {v.status}"
        if v.witness:
            line += f" witness={json.dumps(plain(v.witness))}"
        print(line)
    if report.error:
        print(f"error: {report.error}", file=sys.stderr)
    print(f"status: {report.status} (report in {out})")
    return report.exit_code


if __name__ == "__main__":
    sys.exit(main())
