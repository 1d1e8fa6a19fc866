"""Scenario runner: ``wightrec run | validate | report``.

A scenario is an INI-style file (grammar in ``docs/config.md``).  ``run``
executes the requested checks, writes ``report.json`` plus one CSV per
profile into the output directory, and exits with

* 0 when every pass/fail check passed,
* 1 when a check failed (or raised a numerical error),
* 2 when the configuration is invalid,
* 3 when a check exceeded a computational budget.
"""
from __future__ import annotations

import argparse
import configparser
import csv
import datetime as _dt
import hashlib
import itertools
import json
import logging
import math
import os
import sys
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import __version__
from .cache import IntegralCache, canonical_json
from .errors import BUDGET_ERRORS, ConfigInvalid, WightrecError
from .freefield import (
    FreeFieldSpec,
    WickSeriesModel,
    enumerate_contractions,
    matching_count,
    npoint_smeared,
)
from .gns import BorchersVector, Dictionary, build_gram, cluster_profile, gns_quotient, spectral_residual
from .quasiloc import carrier_profile, spacelike_pair_family, vacuum_commutator
from .testfn import GaussPolyFn, NormIndex, TubeRegion, check_norm_equivalence, tensor_all
from .wordeval import WordEvaluator

log = logging.getLogger("wightrec")

SCHEMA_VERSION = 1
OUTPUT_DIR_ENV = "WIGHTREC_OUTPUT_DIR"
REPORT_NAME = "report.json"
CHECK_ORDER = ("norms", "wick", "gns", "spectrum", "cluster", "quasiloc")
# checks that share the Gram matrix run in one chain, in this order
CHAINS = (("norms",), ("wick",), ("gns", "spectrum"), ("cluster",), ("quasiloc",))
# report fields that legitimately differ between identical runs
VOLATILE_KEYS = ("wall_time", "runtime")

EXIT_OK, EXIT_FAILED, EXIT_CONFIG, EXIT_BUDGET = 0, 1, 2, 3


# -- scenario -------------------------------------------------------------------------

CHECK_DEFAULTS = {
    "norms": {"count": 3, "l": 0.5, "l_prime": 1.0, "N": 1},
    "wick": {"max_total_degree": 8, "max_points": 2, "rtol": 1e-9, "threshold": 1e-6},
    "gns": {"psd_threshold": 1e-8},
    "spectrum": {"width": 1.0, "points": 64, "spacing": 0.25, "threshold": 1e-2},
    "cluster": {"width": 1.0, "direction": [0.0, 1.0], "lambdas": [5.0, 10.0, 15.0, 20.0], "threshold": 1e-4},
    "quasiloc": {"sigma": 0.5, "s": [1.0, 2.0, 3.0, 4.0, 5.0], "l": 0.25, "N": 0, "assert_ordering": False},
}
# keys scaled by --tolerance-scale
TOLERANCE_KEYS = {"wick": ("rtol", "threshold"), "gns": ("psd_threshold",), "spectrum": ("threshold",),
                  "cluster": ("threshold",)}


@dataclass(frozen=True)
class Scenario:
    model: dict
    dictionary: dict
    gns: dict
    checks: dict
    seed: int = 0
    output_dir: str = "wightrec-out"

    def canonical(self) -> dict:
        """Content of the scenario; ``output_dir`` is where results go, not what they are."""
        return {"model": self.model, "dictionary": self.dictionary, "gns": self.gns, "checks": self.checks,
                "seed": self.seed}

    @property
    def content_hash(self) -> str:
        return hashlib.sha256(canonical_json(self.canonical()).encode()).hexdigest()

    def build_model(self) -> WickSeriesModel:
        m = self.model
        if m["preset"] == "free":
            return WickSeriesModel.free(m["mass"])
        if m["preset"] == "gaussian":
            return WickSeriesModel.gaussian(m["g"], m["truncation"], m["mass"])
        return WickSeriesModel(FreeFieldSpec(m["mass"]), 0.0, tuple(m["coeffs"]), m["truncation"])

    def build_dictionary(self) -> Dictionary:
        d, D = self.dictionary, self.gns["max_degree"]
        if d["preset"] == "standard":
            return Dictionary.standard(D)
        if d["preset"] == "lattice":
            return Dictionary.lattice(d["step"], d["count"], width=d["width"], origin=d["origin"], max_degree=D)
        return Dictionary(tuple(GaussPolyFn.gaussian([t, x], w) for t, x, w in d["functions"]), D)


def _floats(text: str, key: str) -> list:
    try:
        return [float(v) for v in text.replace(",", " ").split()]
    except ValueError:
        raise ConfigInvalid(f"{key}: expected numbers, got {text!r}") from None


class _Section:
    """Typed reads from one config section; every error names ``section.key``."""

    def __init__(self, parser: configparser.ConfigParser, name: str, known):
        self.name = name
        self.sec = parser[name] if parser.has_section(name) else {}
        unknown = sorted(set(self.sec) - set(known))
        if unknown:
            raise ConfigInvalid(f"{name}.{unknown[0]}: unknown key (expected one of {', '.join(sorted(known))})")

    def key(self, k):
        return f"{self.name}.{k}"

    def raw(self, k, default=None):
        if k in self.sec:
            return self.sec[k].strip()
        if default is None:
            raise ConfigInvalid(f"{self.key(k)}: required key is missing")
        return default

    def number(self, k, default=None, *, positive=False, integer=False, minimum=None):
        text = self.raw(k, None if default is None else repr(default))
        try:
            v = int(text) if integer else float(text)
        except ValueError:
            raise ConfigInvalid(f"{self.key(k)}: expected {'an integer' if integer else 'a number'}, got {text!r}") from None
        if not math.isfinite(v):
            raise ConfigInvalid(f"{self.key(k)}: must be finite")
        if positive and not v > 0:
            raise ConfigInvalid(f"{self.key(k)}: must be positive, got {text}")
        if minimum is not None and v < minimum:
            raise ConfigInvalid(f"{self.key(k)}: must be at least {minimum}, got {text}")
        return v

    def numbers(self, k, default=None, *, length=None):
        if k not in self.sec and default is not None:
            return list(default)
        vals = _floats(self.raw(k), self.key(k))
        if length is not None and len(vals) != length:
            raise ConfigInvalid(f"{self.key(k)}: expected {length} numbers, got {len(vals)}")
        if not vals:
            raise ConfigInvalid(f"{self.key(k)}: expected at least one number")
        return vals

    def flag(self, k, default=False):
        text = self.raw(k, "true" if default else "false").lower()
        if text not in {"true", "false", "yes", "no", "1", "0"}:
            raise ConfigInvalid(f"{self.key(k)}: expected true or false, got {text!r}")
        return text in {"true", "yes", "1"}

    def choice(self, k, options, default=None):
        v = self.raw(k, default).lower()
        if v not in options:
            raise ConfigInvalid(f"{self.key(k)}: expected one of {', '.join(options)}, got {v!r}")
        return v


def _parse_model(p) -> dict:
    if not p.has_section("model"):
        raise ConfigInvalid("model: required section [model] is missing")
    s = _Section(p, "model", {"preset", "mass", "g", "coeffs", "truncation"})
    preset = s.choice("preset", ("free", "gaussian", "coeffs"))
    out = {"preset": preset, "mass": s.number("mass", 1.0, positive=True)}
    if preset == "gaussian":
        out["g"] = s.number("g", positive=True)
        out["truncation"] = int(s.number("truncation", 2, integer=True, minimum=0))
    elif preset == "coeffs":
        out["coeffs"] = s.numbers("coeffs")
        out["truncation"] = int(s.number("truncation", len(out["coeffs"]) - 1, integer=True, minimum=0))
    return out


def _parse_dictionary(p) -> dict:
    s = _Section(p, "dictionary", {"preset", "functions", "step", "count", "width", "origin"})
    preset = s.choice("preset", ("standard", "lattice", "explicit"), "standard")
    if preset == "standard":
        return {"preset": "standard"}
    if preset == "lattice":
        return {"preset": "lattice", "step": s.numbers("step", length=2),
                "count": int(s.number("count", integer=True, minimum=1)),
                "width": s.number("width", 1.0, positive=True), "origin": s.numbers("origin", [0.0, 0.0], length=2)}
    fns = []
    for i, chunk in enumerate(s.raw("functions").split(";")):
        if not chunk.strip():
            continue
        vals = _floats(chunk, f"dictionary.functions[{i}]")
        if len(vals) != 3 or not vals[2] > 0:
            raise ConfigInvalid(f"dictionary.functions[{i}]: expected 't x width' with width > 0, got {chunk.strip()!r}")
        fns.append(vals)
    if not fns:
        raise ConfigInvalid("dictionary.functions: no functions listed")
    return {"preset": "explicit", "functions": fns}


def _parse_gns(p) -> dict:
    s = _Section(p, "gns", {"max_degree", "word_cap", "tolerance", "combinatorial_cap"})
    return {"max_degree": int(s.number("max_degree", 2, integer=True, minimum=0)),
            "word_cap": int(s.number("word_cap", 200, integer=True, minimum=1)),
            "tolerance": s.number("tolerance", 1e-9, positive=True),
            "combinatorial_cap": int(s.number("combinatorial_cap", 10**6, integer=True, minimum=1))}


def _parse_check(p, name) -> dict:
    defaults = CHECK_DEFAULTS[name]
    s = _Section(p, f"check.{name}", defaults)
    out = {}
    for k, d in defaults.items():
        if isinstance(d, bool):
            out[k] = s.flag(k, d)
        elif isinstance(d, list):
            out[k] = s.numbers(k, d, length=len(d) if k == "direction" else None)
        elif isinstance(d, int):
            out[k] = int(s.number(k, d, integer=True, minimum=0))
        else:
            out[k] = s.number(k, d, positive=True)
    return out


def load_scenario(path, *, seed: int | None = None, tolerance_scale: float = 1.0) -> Scenario:
    """Parse and validate a scenario file; raises :class:`ConfigInvalid` naming the offending key."""
    path = Path(path)
    if not path.is_file():
        raise ConfigInvalid(f"config: file {str(path)!r} does not exist")
    p = configparser.ConfigParser(inline_comment_prefixes=(";", "#"), interpolation=None)
    p.optionxform = str
    try:
        p.read(path, encoding="utf-8")
    except configparser.Error as exc:
        raise ConfigInvalid(f"config: {exc}") from None
    known = {"model", "dictionary", "gns", "checks", "run"} | {f"check.{c}" for c in CHECK_ORDER}
    for sec in p.sections():
        if sec not in known:
            raise ConfigInvalid(f"{sec}: unknown section")
    if not tolerance_scale > 0:
        raise ConfigInvalid("--tolerance-scale: must be positive")
    model = _parse_model(p)
    dictionary = _parse_dictionary(p)
    gns = _parse_gns(p)
    gns["tolerance"] *= tolerance_scale
    cs = _Section(p, "checks", {"run"})
    names = [n.strip().lower() for n in cs.raw("run").replace(",", " ").split()]
    if not names:
        raise ConfigInvalid("checks.run: no checks listed")
    for n in names:
        if n not in CHECK_ORDER:
            raise ConfigInvalid(f"checks.run: unknown check {n!r} (expected one of {', '.join(CHECK_ORDER)})")
    checks = {}
    for n in CHECK_ORDER:
        if n in names:
            params = _parse_check(p, n)
            for k in TOLERANCE_KEYS.get(n, ()):
                params[k] *= tolerance_scale
            checks[n] = params
    rs = _Section(p, "run", {"seed", "output_dir"})
    file_seed = int(rs.number("seed", 0, integer=True, minimum=0))
    # the environment override is taken as given; a configured path is relative to the config file
    out_dir = os.environ.get(OUTPUT_DIR_ENV) or str(path.parent / rs.raw("output_dir", "wightrec-out"))
    sc = Scenario(model, dictionary, gns, checks, file_seed if seed is None else int(seed), out_dir)
    try:
        sc.build_model()
        sc.build_dictionary()
    except (ValueError, WightrecError) as exc:
        raise ConfigInvalid(f"model/dictionary: {exc}") from None
    return sc


# -- checks ---------------------------------------------------------------------------


@dataclass
class CheckRecord:
    name: str
    status: str  # pass | fail | info | error | skipped
    inputs: dict
    values: dict = field(default_factory=dict)
    error_estimates: dict = field(default_factory=dict)
    reason: str = ""
    error_code: str = ""
    wall_time: float = 0.0
    profiles: dict = field(default_factory=dict)

    @property
    def passed(self):
        return {"pass": True, "fail": False, "error": False}.get(self.status)

    def as_dict(self) -> dict:
        out = {"name": self.name, "status": self.status, "passed": self.passed, "inputs": self.inputs,
               "values": self.values, "error_estimates": self.error_estimates, "wall_time": self.wall_time}
        if self.reason:
            out["reason"] = self.reason
        if self.error_code:
            out["error_code"] = self.error_code
        if self.profiles:
            out["profiles"] = sorted(self.profiles)
        return out


class RunContext:
    def __init__(self, scenario: Scenario, cache: IntegralCache | None):
        self.scenario = scenario
        self.cache = cache
        self.model = scenario.build_model()
        self.dictionary = scenario.build_dictionary()
        self.basis = None
        self.basis_error: CheckRecord | None = None


def _status(ok: bool) -> str:
    return "pass" if ok else "fail"


def check_norms(ctx: RunContext, p: dict) -> CheckRecord:
    rng = np.random.default_rng([ctx.scenario.seed, 1])
    rows = []
    for _ in range(p["count"]):
        center = rng.uniform(-1.0, 1.0)
        width = rng.uniform(0.6, 1.2)
        coeffs = rng.normal(size=2)
        f = GaussPolyFn(coeffs, [[0], [1]], [[1.0 / (2 * width**2)]], [center], 1)
        rep = check_norm_equivalence(f, p["l"], p["l_prime"], p["N"])
        rows.append([rep.lhs_int, rep.rhs_int, rep.lhs_sup, rep.rhs_sup, bool(rep.holds)])
    held = sum(r[4] for r in rows)
    values = {"held": held, "total": len(rows),
              "int_margin_min": min(r[1] - r[0] for r in rows), "sup_margin_min": min(r[3] - r[2] for r in rows)}
    return CheckRecord("norms", _status(held == len(rows)), dict(p), values)


def _brute_matchings(degrees) -> int:
    legs = [v for v, r in enumerate(degrees) for _ in range(r)]

    def rec(free):
        if not free:
            return 1
        a, total = free[0], 0
        for i in range(1, len(free)):
            if legs[free[i]] != legs[a]:
                total += rec(free[1:i] + free[i + 1:])
        return total

    return rec(tuple(range(len(legs)))) if len(legs) % 2 == 0 else 0


def check_wick(ctx: RunContext, p: dict) -> CheckRecord:
    tuples = mismatches = 0
    for n in range(1, 5):
        for degs in itertools.product(range(p["max_total_degree"] + 1), repeat=n):
            if sum(degs) > p["max_total_degree"] or sum(degs) % 2:
                continue
            tuples += 1
            graphs = enumerate_contractions(degs, cap=ctx.scenario.gns["combinatorial_cap"])
            if sum(g.weight for g in graphs) != _brute_matchings(degs) or matching_count(degs) != _brute_matchings(degs):
                mismatches += 1
    # smeared values: adaptive graph quadrature (cached) against the grid evaluator
    fns = ctx.dictionary.one_particle
    ev = WordEvaluator.for_functions(ctx.model, fns, cap=ctx.scenario.gns["combinatorial_cap"])
    worst, worst_err, count = 0.0, 0.0, 0
    for n in range(1, p["max_points"] + 1):
        for word in itertools.product(range(len(fns)), repeat=n):
            word_fns = [fns[i] for i in word]
            sv = npoint_smeared(ctx.model, n, tensor_all(word_fns), rtol=p["rtol"], seed=ctx.scenario.seed,
                                cap=ctx.scenario.gns["combinatorial_cap"], memo=ctx.cache)
            ref = ev.wightman(word_fns)
            scale = max(1.0, abs(ref))
            worst = max(worst, abs(complex(sv) - ref) / scale)
            worst_err = max(worst_err, sv.error / scale)
            count += 1
    values = {"degree_tuples": tuples, "weight_mismatches": mismatches, "smeared_words": count,
              "max_relative_deviation": worst}
    ok = mismatches == 0 and worst <= p["threshold"]
    return CheckRecord("wick", _status(ok), dict(p), values, {"max_relative_quadrature_error": worst_err})


def _basis(ctx: RunContext):
    if ctx.basis is None:
        g = ctx.scenario.gns
        gram = build_gram(ctx.model, ctx.dictionary, cap=g["word_cap"], tolerance=g["tolerance"],
                          combinatorial_cap=g["combinatorial_cap"])
        ctx.basis = gns_quotient(gram, g["tolerance"])
    return ctx.basis


def check_gns(ctx: RunContext, p: dict) -> CheckRecord:
    basis = _basis(ctx)
    lam = basis.gram.eigenvalues()
    lo, hi = float(lam[0]), float(lam[-1])
    values = {"words": basis.gram.size, "rank": basis.rank, "dropped_dimension": basis.dropped_dimension,
              "min_gram_eigenvalue": lo, "max_gram_eigenvalue": hi, "gram_asymmetry": basis.gram.asymmetry,
              "parseval_defect": basis.parseval_defect()}
    ok = lo >= -p["psd_threshold"] * hi
    return CheckRecord("gns", _status(ok), {**p, **ctx.scenario.gns}, values)


def check_spectrum(ctx: RunContext, p: dict) -> CheckRecord:
    basis = _basis(ctx)
    state = BorchersVector.word([GaussPolyFn.gaussian([0.0, 0.0], p["width"])])
    rep = spectral_residual(ctx.model, basis, state, state, points=int(p["points"]), spacing=p["spacing"])
    values = {"residual": rep.residual, "high_frequency_fraction": rep.high_frequency_fraction,
              "window_width": rep.window_width}
    note = {"tolerance_note": "windowing-limited: residual compared with the threshold, not machine precision"}
    return CheckRecord("spectrum", _status(rep.residual < p["threshold"]), {**p, **note}, values)


def check_cluster(ctx: RunContext, p: dict) -> CheckRecord:
    state = BorchersVector.word([GaussPolyFn.gaussian([0.0, 0.0], p["width"])])
    prof = cluster_profile(ctx.model, state, state, p["direction"], p["lambdas"])
    devs = [d for _, d in prof]
    decreasing = all(a > b for a, b in zip(devs, devs[1:]))
    values = {"lambdas": [lam for lam, _ in prof], "deviations": devs, "strictly_decreasing": decreasing}
    rec = CheckRecord("cluster", _status(decreasing and devs[-1] < p["threshold"]), dict(p), values)
    rec.profiles["cluster"] = (("lambda", "deviation"), [(lam, d) for lam, d in prof])
    return rec


def check_quasiloc(ctx: RunContext, p: dict) -> CheckRecord:
    region = TubeRegion.lightcone_w(p["l"])
    idx = NormIndex(region, p["l"], int(p["N"]))
    fam = spacelike_pair_family(p["sigma"])
    models = {"free": WickSeriesModel.free(ctx.model.base.mass)}
    if not (ctx.scenario.model["preset"] == "free"):
        models["model"] = ctx.model
    rec = CheckRecord("quasiloc", "info", dict(p))
    profiles = {}
    for label, model in models.items():
        prof = carrier_profile(vacuum_commutator(model), region, idx, fam, p["s"], label=label)
        profiles[label] = prof
        rec.values[label] = {"ratios": list(prof.ratios), "numerators": list(prof.numerators),
                             "norms": list(prof.norms)}
        rec.profiles[f"quasiloc_{label}"] = (("s", "numerator", "norm", "ratio"),
                                             list(zip(prof.family_params, prof.numerators, prof.norms, prof.ratios)))
    free = profiles["free"].ratios
    K = free[0] * math.exp(p["s"][0] ** 2 / (8 * p["sigma"] ** 2))
    tail_ok = all(r <= K * math.exp(-s * s / (8 * p["sigma"] ** 2)) * (1 + 1e-9) for s, r in zip(p["s"], free))
    summary = {"free_decreasing": all(a > b for a, b in zip(free, free[1:])), "free_tail_bound": tail_ok}
    if "model" in profiles:
        other = profiles["model"].ratios
        summary["model_decreasing"] = all(a > b for a, b in zip(other, other[1:]))
        summary["free_le_model"] = all(a <= b for a, b in zip(free, other))
    rec.values["summary"] = summary
    if p["assert_ordering"]:
        rec.status = _status(all(summary.values()))
    return rec


CHECKS = {"norms": check_norms, "wick": check_wick, "gns": check_gns, "spectrum": check_spectrum,
          "cluster": check_cluster, "quasiloc": check_quasiloc}


def _run_one(ctx: RunContext, name: str) -> CheckRecord:
    params = ctx.scenario.checks[name]
    if name == "spectrum" and ctx.basis_error is not None:
        return CheckRecord(name, "skipped", dict(params), reason=f"needs the GNS basis: {ctx.basis_error.reason}")
    t0 = time.perf_counter()
    try:
        rec = CHECKS[name](ctx, params)
    except WightrecError as exc:
        rec = CheckRecord(name, "error", dict(params), reason=f"{exc.code}: {exc}", error_code=exc.code)
        if name == "gns":
            ctx.basis_error = rec
    rec.wall_time = round(time.perf_counter() - t0, 6)
    log.info("check %s: %s (%.2fs)", name, rec.status, rec.wall_time)
    return rec


def _run_chain(ctx: RunContext, chain) -> list:
    out = []
    for name in chain:
        if name in ctx.scenario.checks:
            out.append(_run_one(ctx, name))
    return out


def _jsonable(obj):
    if isinstance(obj, dict):
        return {str(k): _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, (bool, np.bool_)):
        return bool(obj)
    if isinstance(obj, (int, np.integer)):
        return int(obj)
    if isinstance(obj, (float, np.floating)):
        return float(obj)
    if isinstance(obj, (complex, np.complexfloating)):
        return [float(obj.real), float(obj.imag)]
    return obj


def strip_volatile(obj):
    """Copy of a report with timing fields removed; equal across identical runs."""
    if isinstance(obj, dict):
        return {k: strip_volatile(v) for k, v in obj.items() if k not in VOLATILE_KEYS}
    if isinstance(obj, list):
        return [strip_volatile(v) for v in obj]
    return obj


def _write_profile(path: Path, header, rows):
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        for row in rows:
            w.writerow([repr(float(v)) for v in row])


def run_scenario(scenario: Scenario, *, jobs: int = 1, use_cache: bool = True) -> tuple[int, dict]:
    out_dir = Path(scenario.output_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    cache = IntegralCache(out_dir) if use_cache else None
    ctx = RunContext(scenario, cache)
    t0 = time.perf_counter()
    chains = [c for c in CHAINS if any(n in scenario.checks for n in c)]
    if jobs > 1 and len(chains) > 1:
        with ThreadPoolExecutor(max_workers=jobs) as pool:
            results = [r for rs in pool.map(lambda c: _run_chain(ctx, c), chains) for r in rs]
    else:
        results = [r for c in chains for r in _run_chain(ctx, c)]
    by_name = {r.name: r for r in results}
    records = [by_name[n] for n in CHECK_ORDER if n in by_name]
    for rec in records:
        for label, (header, rows) in rec.profiles.items():
            _write_profile(out_dir / f"profile_{label}.csv", header, rows)
    report = {
        "schema_version": SCHEMA_VERSION,
        "tool_version": __version__,
        "scenario_hash": scenario.content_hash,
        "scenario": scenario.canonical(),
        "checks": [rec.as_dict() for rec in records],
        "runtime": {
            "generated_at": _dt.datetime.now(_dt.timezone.utc).isoformat(timespec="seconds"),
            "wall_time_total": round(time.perf_counter() - t0, 6),
            "cache": None if cache is None else {"hits": cache.hits, "misses": cache.misses},
            "jobs": jobs,
        },
    }
    report = _jsonable(report)
    (out_dir / REPORT_NAME).write_text(json.dumps(report, sort_keys=True, indent=2) + "\n", encoding="utf-8")
    if any(r.error_code and any(r.error_code == e.code for e in BUDGET_ERRORS) for r in records):
        code = EXIT_BUDGET
    elif any(r.passed is False for r in records):
        code = EXIT_FAILED
    else:
        code = EXIT_OK
    return code, report


# -- commands -------------------------------------------------------------------------


def _cmd_run(args) -> int:
    scenario = load_scenario(args.config, seed=args.seed, tolerance_scale=args.tolerance_scale)
    code, report = run_scenario(scenario, jobs=args.jobs, use_cache=not args.no_cache)
    for rec in report["checks"]:
        line = f"{rec['name']:<10} {rec['status']}"
        if rec.get("reason"):
            line += f"  ({rec['reason']})"
        print(line)
    print(f"report: {Path(scenario.output_dir) / REPORT_NAME}")
    for rec in report["checks"]:
        if rec["status"] in ("fail", "error"):
            print(f"check {rec['name']} {rec['status']}", file=sys.stderr)
    return code


def _cmd_validate(args) -> int:
    scenario = load_scenario(args.config, seed=args.seed, tolerance_scale=args.tolerance_scale)
    print(f"valid: checks={','.join(scenario.checks)} scenario_hash={scenario.content_hash}")
    return EXIT_OK


def _fmt(v):
    if isinstance(v, float):
        return f"{v:.4g}"
    if isinstance(v, list) and len(v) > 4:
        return f"[{_fmt(v[0])} .. {_fmt(v[-1])}] ({len(v)})"
    if isinstance(v, list):
        return "[" + ", ".join(_fmt(x) for x in v) + "]"
    return str(v)


def _cmd_report(args) -> int:
    path = Path(args.directory) / REPORT_NAME
    if not path.is_file():
        print(f"error: no {REPORT_NAME} in {args.directory}", file=sys.stderr)
        return EXIT_CONFIG
    report = json.loads(path.read_text(encoding="utf-8"))
    print(f"scenario {report['scenario_hash'][:16]}  schema {report['schema_version']}  "
          f"wightrec {report['tool_version']}  generated {report['runtime']['generated_at']}")
    for rec in report["checks"]:
        print(f"  {rec['name']:<10} {rec['status']:<8} {rec['wall_time']:8.2f}s")
        if args.summary:
            for k, v in sorted(rec["values"].items()):
                if not isinstance(v, dict):
                    print(f"      {k} = {_fmt(v)}")
            if rec.get("reason"):
                print(f"      reason: {rec['reason']}")
    failed = [r["name"] for r in report["checks"] if r["passed"] is False]
    print("all pass/fail checks passed" if not failed else f"failed: {', '.join(failed)}")
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="wightrec", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=f"wightrec {__version__}")
    parser.add_argument("-v", "--verbose", action="count", default=0)
    sub = parser.add_subparsers(dest="command", required=True)

    def scenario_flags(sp):
        sp.add_argument("config", help="scenario file (see docs/config.md)")
        sp.add_argument("--seed", type=int, default=None, help="override [run] seed")
        sp.add_argument("--tolerance-scale", type=float, default=1.0, help="multiply every tolerance and threshold")

    run = sub.add_parser("run", help="execute a scenario and write its report")
    scenario_flags(run)
    run.add_argument("--jobs", type=int, default=1, help="independent checks to run concurrently")
    run.add_argument("--no-cache", action="store_true", help="neither read nor write the integral cache")
    run.set_defaults(func=_cmd_run)

    val = sub.add_parser("validate", help="parse and validate a scenario without running it")
    scenario_flags(val)
    val.set_defaults(func=_cmd_validate)

    rep = sub.add_parser("report", help="print a report directory")
    rep.add_argument("directory")
    rep.add_argument("--summary", action="store_true", help="include per-check values")
    rep.set_defaults(func=_cmd_report)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.WARNING - 10 * min(args.verbose, 2), format="%(levelname)s %(name)s: %(message)s")
    if getattr(args, "jobs", 1) < 1:
        print("error: --jobs: must be at least 1", file=sys.stderr)
        return EXIT_CONFIG
    try:
        return args.func(args)
    except ConfigInvalid as exc:
        print(f"error: CONFIG_INVALID: {exc}", file=sys.stderr)
        return EXIT_CONFIG


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())
