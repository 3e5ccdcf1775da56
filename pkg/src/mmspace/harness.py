"""Configuration-driven experiment runner and the reproduction suites.

A config is a TOML (or JSON) document with ``schema = 1``::

    schema = 1
    seed = 7
    output = "out"

    [space]
    family = "grid"        # or: file = "space.json"
    dim = 1
    side = 64

    [fields.f]
    rule = "linear"        # or: file = "f.json"

    [[operations]]
    op = "weak_norm"
    field = "f"
    p = 2

Configs are canonicalised (sorted keys, no insignificant whitespace) before
hashing, so the hash only changes when the content does.
"""
from __future__ import annotations

import copy
import hashlib
import json
import logging
import os
import sys
import time
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Callable, Optional

import numpy as np
import tomli_w

if sys.version_info >= (3, 11):
    import tomllib
else:
    import tomli as tomllib

from . import __version__
from .acceptance import SUITES, run_criteria
from .constancy import detect_constant, domination_scan
from .fields import FieldRuleError, make_field
from .hajlasz import lipschitz_truncate, maximal_gradient, solve_exact
from .io import dump_json, load_field, load_space, write_csv
from .mollify import mollify, partition, verify_mollifier_bounds
from .norms import besov_seminorm, commutator_besov, kappa_curve_tail, level_measure, weak_norm
from .oscillation import DEFAULT_WINDOW, g_hat, lip_hat, maximal, profiles
from .poincare import macro_sweep, poincare_sweep
from .space import Space, SpaceError, doubling_and_dimension, generate

__all__ = [
    "SCHEMA_VERSION",
    "HarnessError",
    "ExperimentConfig",
    "Report",
    "load_config",
    "canonical_json",
    "config_hash",
    "dumps_toml",
    "set_threads",
    "run",
    "reproduce",
    "parse_levels",
    "EXIT_OK",
    "EXIT_ERROR",
    "EXIT_FLAGGED",
]

log = logging.getLogger(__name__)

SCHEMA_VERSION = 1
EXIT_OK, EXIT_ERROR, EXIT_FLAGGED = 0, 1, 2
RANDOM_RULES = {"mollified-noise", "distance-to-random-points"}
RANDOM_OPS = {"poincare", "dimension"}


class HarnessError(ValueError):
    """Invalid configuration or unreadable input; maps to exit code 1."""


def canonical_json(data) -> str:
    return json.dumps(data, sort_keys=True, separators=(",", ":"), ensure_ascii=False)


def config_hash(data) -> str:
    return hashlib.sha256(canonical_json(data).encode("utf-8")).hexdigest()


def _sorted(obj):
    if isinstance(obj, dict):
        return {k: _sorted(obj[k]) for k in sorted(obj)}
    if isinstance(obj, list):
        return [_sorted(v) for v in obj]
    return obj


def dumps_toml(data) -> str:
    """Canonical TOML text (keys sorted at every level)."""
    return tomli_w.dumps(_sorted(data))


@dataclass
class ExperimentConfig:
    """Validated experiment description; ``data`` holds the raw mapping."""

    data: dict
    base_dir: Path = Path(".")

    @classmethod
    def from_dict(cls, data: dict, base_dir=".") -> "ExperimentConfig":
        data = copy.deepcopy(data)
        if data.get("schema") != SCHEMA_VERSION:
            raise HarnessError(f"config schema must be {SCHEMA_VERSION}, got {data.get('schema')!r}")
        if "space" not in data or not isinstance(data["space"], dict):
            raise HarnessError("config needs a [space] table")
        ops = data.get("operations", [])
        if not isinstance(ops, list) or not all(isinstance(o, dict) and "op" in o for o in ops):
            raise HarnessError("operations must be a list of tables with an 'op' key")
        for name, entry in data.get("fields", {}).items():
            if not isinstance(entry, dict) or ("rule" not in entry and "file" not in entry):
                raise HarnessError(f"field {name!r} needs a 'rule' or a 'file'")
        for o in ops:
            if o["op"] not in OPERATIONS:
                raise HarnessError(f"unknown operation {o['op']!r}; known: {sorted(OPERATIONS)}")
            ref = o.get("field")
            if ref is not None and ref not in data.get("fields", {}):
                raise HarnessError(f"operation {o['op']!r} references undefined field {ref!r}")
        randomised = any(s.get("rule") in RANDOM_RULES for s in data.get("fields", {}).values())
        randomised |= any(o["op"] in RANDOM_OPS for o in ops)
        if randomised and "seed" not in data:
            raise HarnessError("config uses randomised sampling but sets no seed")
        return cls(data, Path(base_dir))

    @property
    def seed(self) -> int:
        return int(self.data.get("seed", 0))

    @property
    def hash(self) -> str:
        return config_hash(self.data)

    def to_toml(self) -> str:
        return dumps_toml(self.data)

    def with_seed(self, seed: Optional[int]) -> "ExperimentConfig":
        if seed is None:
            return self
        data = copy.deepcopy(self.data)
        data["seed"] = int(seed)
        return ExperimentConfig(data, self.base_dir)


def load_config(path) -> ExperimentConfig:
    """Read a TOML or JSON config (JSON when the suffix is ``.json``)."""
    path = Path(path)
    if not path.is_file():
        raise HarnessError(f"config file not found: {path}")
    try:
        if path.suffix == ".json":
            data = json.loads(path.read_text(encoding="utf-8"))
        else:
            data = tomllib.loads(path.read_text(encoding="utf-8"))
    except (json.JSONDecodeError, tomllib.TOMLDecodeError) as exc:
        raise HarnessError(f"cannot parse {path}: {exc}") from None
    return ExperimentConfig.from_dict(data, path.parent)


def set_threads(n: Optional[int] = None) -> int:
    """Set the compiled-kernel thread count from ``n`` or ``MMS_THREADS``."""
    import numba

    if n is None:
        env = os.environ.get("MMS_THREADS")
        if not env:
            return numba.get_num_threads()
        n = int(env)
    n = max(1, min(int(n), numba.config.NUMBA_NUM_THREADS))
    numba.set_num_threads(n)
    return n


@dataclass
class Report:
    config_hash: str
    version: str
    results: list = field(default_factory=list)
    timings: list = field(default_factory=list)
    flags: list = field(default_factory=list)
    summary: dict = field(default_factory=dict)
    exit_code: int = EXIT_OK

    def to_dict(self) -> dict:
        return {"configHash": self.config_hash, "version": self.version,
                "results": self.results, "summary": self.summary, "flags": self.flags,
                "timings": self.timings, "exitCode": self.exit_code}


# ---------------------------------------------------------------- operations

@dataclass
class _Context:
    space: Space
    fields: dict
    seed: int
    out: Optional[Path]
    artifacts: list = field(default_factory=list)
    flags: list = field(default_factory=list)
    step: int = 0

    def field(self, params: dict) -> np.ndarray:
        name = params.get("field")
        if name is None:
            raise HarnessError("operation needs a 'field'")
        return self.fields[name]

    def csv(self, stem: str, header, rows) -> Optional[str]:
        if self.out is None:
            return None
        path = self.out / f"{self.step:02d}_{stem}.csv"
        write_csv(path, header, rows)
        self.artifacts.append(path.name)
        return path.name


def parse_levels(entry) -> list:
    """``"6:12"`` (inclusive) or a list of integers."""
    if isinstance(entry, str):
        lo, hi = entry.split(":")
        return list(range(int(lo), int(hi) + 1))
    return [int(k) for k in entry]


def _op_dimension(ctx, prm):
    fit = doubling_and_dimension(ctx.space, int(prm.get("sample_size", 64)),
                                 int(prm.get("seed", ctx.seed)))
    return {"cMu": fit.c_mu, "dLower": fit.d_lower, "dUpper": fit.d_upper,
            "sampleCount": fit.sample_count}


def _op_profiles(ctx, prm):
    prof = profiles(ctx.space, ctx.field(prm))
    pts = prof.point_ids()
    ctx.csv("profiles", ["point", "breakpoint", "m_value"],
            zip(pts.tolist(), prof.radii, prof.m))
    return {"slots": int(prof.m.shape[0]), "maxOscillation": float(prof.m.max(initial=0.0))}


def _op_lip(ctx, prm):
    f = ctx.field(prm)
    k = int(prm.get("window", DEFAULT_WINDOW))
    variant = prm.get("variant", "liminf")
    lip = lip_hat(ctx.space, f, window=k, variant=variant)
    g = g_hat(ctx.space, f, window=k, variant=variant)
    ctx.csv("lip", ["point", "lip_hat", "g_hat"], zip(range(ctx.space.n), lip, g))
    if np.any(g > 2.0 * lip * (1 + 1e-12) + 1e-300):
        ctx.flags.append("g_hat exceeds 2 lip_hat")
    return {"window": k, "variant": variant, "maxLip": float(lip.max()), "maxG": float(g.max())}


def _op_maximal(ctx, prm):
    f = ctx.field(prm)
    q = float(prm.get("q", 1.0))
    m = maximal(ctx.space, np.abs(f), q)
    ctx.csv("maximal", ["point", "value"], zip(range(ctx.space.n), m))
    return {"q": q, "max": float(m.max())}


def _op_besov(ctx, prm):
    kernel = prm.get("kernel", "V")
    val = besov_seminorm(ctx.space, ctx.field(prm), float(prm.get("s", 1.0)),
                         float(prm.get("p", 2.0)), kernel, prm.get("d"))
    return {"besov": val, "kernel": kernel}


def _op_commutator(ctx, prm):
    return {"commutator": commutator_besov(ctx.space, ctx.field(prm), float(prm.get("p", 2.0)))}


def _op_level_measure(ctx, prm):
    val = level_measure(ctx.space, ctx.field(prm), float(prm.get("p", 2.0)),
                        float(prm["kappa"]), bool(prm.get("strict", True)))
    return {"levelMeasure": val}


def _op_weak_norm(ctx, prm):
    p = float(prm.get("p", 2.0))
    val, curve = weak_norm(ctx.space, ctx.field(prm), p)
    ctx.csv("kappa_curve", ["value", "level_measure", "score"],
            zip(curve.values, curve.level_measure, curve.score))
    tail = kappa_curve_tail(curve, float(prm.get("tail_window", 0.05)))
    return {"weakNorm": val, "kappaTail": tail, "curveLength": len(curve), "p": p}


def _certificate(ctx, cert, stem):
    ctx.csv(stem, ["point", "h"], zip(range(ctx.space.n), cert.h))
    out = cert.to_dict()
    out.pop("h")
    out["info"] = {k: v for k, v in cert.info.items()}
    return out


def _op_solve_exact(ctx, prm):
    cert = solve_exact(ctx.space, ctx.field(prm), float(prm.get("p", 2.0)),
                       float(prm.get("tol", 1e-8)), cap=int(prm.get("cap", 512)))
    if not cert.feasible:
        ctx.flags.append(f"solve_exact certificate infeasible (violation {cert.violation:.6g})")
    if not cert.converged:
        ctx.flags.append("solve_exact did not converge")
    return _certificate(ctx, cert, "exact_gradient")


def _op_maximal_gradient(ctx, prm):
    f = ctx.field(prm)
    p = float(prm.get("p", 2.0))
    window = int(prm.get("window", DEFAULT_WINDOW))
    t = prm.get("t")
    src = f if t is None else mollify(ctx.space, f, float(t), float(prm.get("gamma", 1.0)))
    g = lip_hat(ctx.space, src, window=window)
    cert = maximal_gradient(ctx.space, f, g, p, prm.get("eps"), float(prm.get("c", 7.0)))
    return _certificate(ctx, cert, "maximal_gradient")


def _op_lipschitz_truncate(ctx, prm):
    f = ctx.field(prm)
    p = float(prm.get("p", 2.0))
    h = solve_exact(ctx.space, f, p, cap=int(prm.get("cap", 512))).h
    L = float(prm["L"])
    ft, cert = lipschitz_truncate(ctx.space, f, h, L, p)
    ctx.csv("truncated", ["point", "f", "f_truncated"], zip(range(ctx.space.n), f, ft))
    if cert.info["lipschitz"] > 2.0 * L * (1 + 1e-9):
        ctx.flags.append("truncated field exceeds the 2L Lipschitz bound")
    return _certificate(ctx, cert, "residual_gradient")


def _op_mollify(ctx, prm):
    f = ctx.field(prm)
    t = float(prm["t"])
    gamma = float(prm.get("gamma", 1.0))
    part = partition(ctx.space, t, gamma)
    g = mollify(ctx.space, f, t, gamma, part)
    ctx.csv("mollified", ["point", "f", "mollified"], zip(range(ctx.space.n), f, g))
    if np.abs(part.sums() - 1.0).max() > 1e-12:
        ctx.flags.append("partition of unity does not sum to one")
    out = {"t": t, "gamma": gamma, "centers": int(part.centers.shape[0]),
           "partitionConstant": part.lipschitz_constant}
    if prm.get("verify", False):
        rep = verify_mollifier_bounds(ctx.space, f, t, gamma, prm.get("r_grid"),
                                      float(prm.get("p", 2.0)), float(prm.get("lambda", 1.0)))
        out["verify"] = rep.to_dict()
    return out


def _op_poincare(ctx, prm):
    fam = prm.get("family", ["coords"])
    if isinstance(fam, str):
        fam = [s.strip() for s in fam.split(",") if s.strip()]
    if "fields" in prm:
        fam = {name: ctx.fields[name] for name in prm["fields"]}
    rep = poincare_sweep(ctx.space, float(prm.get("p", 2.0)), float(prm.get("lambda", 1.0)),
                         fam, prm.get("samples", 200), int(prm.get("seed", ctx.seed)),
                         int(prm.get("window", DEFAULT_WINDOW)))
    rows = []
    for name, q in rep.ratios.items():
        rows.extend(zip([name] * q.shape[0], rep.centers.tolist(), rep.radii, q))
    ctx.csv("poincare", ["function", "center", "radius", "ratio"], rows)
    if rep.infinite:
        ctx.flags.append(f"poincare: {rep.infinite} balls with zero right-hand side")
    return rep.to_dict()


def _op_macro_poincare(ctx, prm):
    ratios = prm.get("ratios", [2, 4, 8, 16, 32])
    rep = macro_sweep(ctx.space, ctx.field(prm), ratios, prm.get("scales"),
                      prm.get("samples"), int(prm.get("seed", ctx.seed)),
                      float(prm.get("lambda_tilde", 2.0)), float(prm.get("p", 2.0)))
    ctx.csv("macro_poincare", ["ratio", "s", "r", "max_ratio"], rep.rows)
    if rep.flags:
        ctx.flags.append(f"macro_poincare: {rep.flags} balls with zero right-hand side")
    return rep.to_dict()


def _op_constancy(ctx, prm):
    v = detect_constant(prm.get("rule", "linear"), float(prm.get("p", 2.0)),
                        prm.get("kernel", "critical-V"), parse_levels(prm.get("levels", "6:12")),
                        prm.get("family", "grid"), int(prm.get("dim", 1)),
                        prm.get("rule_params"))
    ctx.csv("constancy", ["level", "value"], zip(v.levels.tolist(), v.values))
    return v.to_dict()


def _op_domination(ctx, prm):
    return domination_scan(ctx.space, float(prm.get("p", 1.0))).to_dict()


OPERATIONS: dict[str, Callable[[_Context, dict], dict]] = {
    "dimension": _op_dimension,
    "profiles": _op_profiles,
    "lip": _op_lip,
    "maximal": _op_maximal,
    "besov": _op_besov,
    "commutator": _op_commutator,
    "level_measure": _op_level_measure,
    "weak_norm": _op_weak_norm,
    "solve_exact": _op_solve_exact,
    "maximal_gradient": _op_maximal_gradient,
    "lipschitz_truncate": _op_lipschitz_truncate,
    "mollify": _op_mollify,
    "poincare": _op_poincare,
    "macro_poincare": _op_macro_poincare,
    "constancy": _op_constancy,
    "domination": _op_domination,
}


def _resolve_path(base: Path, p) -> Path:
    p = Path(p)
    return p if p.is_absolute() else base / p


def _build_space(cfg: ExperimentConfig) -> Space:
    entry = dict(cfg.data["space"])
    try:
        if "file" in entry:
            return load_space(_resolve_path(cfg.base_dir, entry["file"]))
        family = entry.pop("family", None)
        if family is None:
            raise HarnessError("space needs a 'family' or a 'file'")
        return generate(family, entry, cfg.seed)
    except FileNotFoundError as exc:
        raise HarnessError(str(exc)) from None
    except (SpaceError, KeyError, TypeError) as exc:
        raise HarnessError(f"cannot build space: {exc}") from None


def _build_fields(cfg: ExperimentConfig, space: Space) -> dict:
    out = {}
    for name, entry in cfg.data.get("fields", {}).items():
        entry = dict(entry)
        try:
            if "file" in entry:
                vals = load_field(_resolve_path(cfg.base_dir, entry["file"]))
            else:
                rule = entry.pop("rule")
                if rule in RANDOM_RULES:
                    entry.setdefault("seed", cfg.seed)
                vals = make_field(space, rule, **entry)
        except FileNotFoundError as exc:
            raise HarnessError(f"field {name!r}: {exc}") from None
        except FieldRuleError as exc:
            raise HarnessError(f"field {name!r}: {exc}") from None
        if vals.shape != (space.n,):
            raise HarnessError(f"field {name!r} has {vals.size} values for {space.n} points")
        out[name] = vals
    return out


def _summarise(results: list) -> dict:
    """Ratios of weak norm and exact Hajlasz norm for matching (field, p)."""
    weak, exact = {}, {}
    for r in results:
        key = (r["params"].get("field"), float(r["params"].get("p", 2.0)))
        if r["op"] == "weak_norm":
            weak[key] = r["result"]["weakNorm"]
        elif r["op"] == "solve_exact":
            exact[key] = r["result"]["lpNorm"]
    out = {}
    for key in sorted(set(weak) & set(exact), key=str):
        w, e = weak[key], exact[key]
        out[f"{key[0]}@p={key[1]:g}"] = {"weakNorm": w, "hajlaszNorm": e,
                                         "ratio": (w / e) if e > 0 else None}
    return out


def run(config: ExperimentConfig, out_dir=None, threads: Optional[int] = None,
        seed: Optional[int] = None) -> Report:
    """Execute the configured operations in order.

    Writes ``report.json`` and per-operation CSV files to ``out_dir`` (or the
    config's ``output``; nothing is written when neither is set).  The
    report's ``exit_code`` is 2 when any invariant check was flagged.
    Configuration and input errors raise :class:`HarnessError`.
    """
    set_threads(threads)
    config = config.with_seed(seed)
    out = out_dir if out_dir is not None else config.data.get("output")
    out = None if out is None else _resolve_path(Path("."), out)
    if out is not None:
        out.mkdir(parents=True, exist_ok=True)
    space = _build_space(config)
    fields = _build_fields(config, space)
    ctx = _Context(space, fields, config.seed, out)
    report = Report(config.hash, __version__)
    for step, op in enumerate(config.data.get("operations", [])):
        ctx.step = step
        ctx.artifacts = []
        prm = {k: v for k, v in op.items() if k != "op"}
        t0 = time.perf_counter()
        try:
            result = OPERATIONS[op["op"]](ctx, prm)
        except (ValueError, KeyError) as exc:
            if isinstance(exc, HarnessError):
                raise
            raise HarnessError(f"operation {step} ({op['op']}): {exc}") from None
        report.timings.append({"op": op["op"], "seconds": time.perf_counter() - t0})
        report.results.append({"op": op["op"], "params": prm, "result": result,
                               "artifacts": list(ctx.artifacts)})
    report.flags = list(ctx.flags)
    report.summary = _summarise(report.results)
    report.exit_code = EXIT_FLAGGED if report.flags else EXIT_OK
    if out is not None:
        dump_json(report.to_dict(), out / "report.json")
        (out / "config.toml").write_text(config.to_toml(), encoding="utf-8")
    return report


def reproduce(suite: str, out_dir=None, threads: Optional[int] = None,
              echo: Optional[Callable[[str], None]] = print) -> Report:
    """Run the acceptance criteria of ``suite`` and print one line each."""
    if suite not in SUITES:
        raise HarnessError(f"unknown suite {suite!r}; known: {sorted(SUITES)}")
    set_threads(threads)
    report = Report(config_hash(_reproduce_config(suite)), __version__)
    results = run_criteria(SUITES[suite], echo)
    for r in results:
        report.results.append(r.to_dict())
        report.timings.append({"op": r.key, "seconds": r.seconds})
        if not r.passed:
            report.flags.append(f"{r.key} failed")
    report.exit_code = EXIT_FLAGGED if report.flags else EXIT_OK
    if out_dir is not None:
        dump_json(report.to_dict(), Path(out_dir) / f"reproduce_{suite}.json")
    return report


def _reproduce_config(suite: str) -> dict:
    return {"schema": SCHEMA_VERSION, "suite": suite, "criteria": list(SUITES[suite])}
