"""Batch runner: ``quenchxy <subcommand> --config FILE [--seed N] [--workers N] [--out DIR]``.

Config files are INI-style: ``[section]`` headers followed by ``key = value``
lines. Every experiment has a fixed schema; unknown keys are rejected by name.
"""

from __future__ import annotations

import argparse
import configparser
import csv
import hashlib
import io
import json
import math
import sys
import time
from dataclasses import dataclass, field
from enum import Enum
from pathlib import Path
from typing import Any, Callable

import numpy as np

from . import __version__
from .errors import ConfigError, QuenchXYError

U64 = 2**64 - 1


class Experiment(Enum):
    TWO_POINT = "TwoPoint"
    QUENCHED_TWO_POINT = "QuenchedTwoPoint"
    GOOD_BOX_SCAN = "GoodBoxScan"
    WELLS_VERIFY = "WellsVerify"
    DOMINATION_CHECK = "DominationCheck"
    BESSEL_THRESHOLDS = "BesselThresholds"
    LAMMERS_SCAN = "LammersScan"
    DELOCALIZATION = "Delocalization"
    NISHIMORI_CORRELATION = "NishimoriCorrelation"
    PATH_TAILS = "PathTails"
    VORONOI_TWO_POINT = "VoronoiTwoPoint"
    PHI4_TWO_POINT = "Phi4TwoPoint"
    SPATIAL_AVERAGE = "SpatialAverage"
    PHI_R = "PhiR"
    DECAY_SCAN = "DecayScan"

    @property
    def command(self) -> str:
        out = []
        for i, c in enumerate(self.value):
            if c.isupper() and i:
                out.append("-")
            out.append(c.lower())
        return "".join(out)


# ------------------------------------------------------------- schema

REQUIRED = object()


@dataclass(frozen=True)
class Param:
    kind: str  # int, float, str, bool, ints, floats, choice
    default: Any = REQUIRED
    lo: float | None = None
    hi: float | None = None
    choices: tuple[str, ...] = ()

    def parse(self, key: str, raw: str):
        raw = raw.strip()
        try:
            if self.kind == "int":
                v = int(raw, 0)
            elif self.kind == "float":
                v = float(raw)
                if not math.isfinite(v):
                    raise ValueError
            elif self.kind == "bool":
                low = raw.lower()
                if low not in ("true", "false", "yes", "no", "1", "0"):
                    raise ValueError
                v = low in ("true", "yes", "1")
            elif self.kind == "ints":
                v = tuple(int(s, 0) for s in raw.split(",") if s.strip())
            elif self.kind == "floats":
                v = tuple(float(s) for s in raw.split(",") if s.strip())
            else:
                v = raw
        except ValueError:
            raise ConfigError(key, f"expected {self.kind}, got {raw!r}") from None
        self.check(key, v)
        return v

    def check(self, key: str, v):
        if self.kind == "choice" and v not in self.choices:
            raise ConfigError(key, f"must be one of {', '.join(self.choices)}")
        items = v if self.kind in ("ints", "floats") else (v,)
        if self.kind in ("ints", "floats") and not items:
            raise ConfigError(key, "empty list")
        if self.kind in ("int", "float", "ints", "floats"):
            for x in items:
                if self.lo is not None and x < self.lo:
                    raise ConfigError(key, f"{x} is below {self.lo}")
                if self.hi is not None and x > self.hi:
                    raise ConfigError(key, f"{x} is above {self.hi}")

    def format(self, v) -> str:
        if self.kind in ("ints", "floats"):
            return ", ".join(repr(x) for x in v)
        if self.kind == "bool":
            return "true" if v else "false"
        if self.kind == "float":
            return repr(float(v))
        return str(v)


def P(kind, default=REQUIRED, lo=None, hi=None, choices=()):
    return Param(kind, default, lo, hi, tuple(choices))


RUN = {
    "experiment": P("choice", choices=[e.value for e in Experiment]),
    "seed": P("int", lo=0, hi=U64),
    "workers": P("int", 1, lo=1, hi=256),
}
SAMPLER = {
    "thermalization": P("int", 1000, lo=0),
    "measurement": P("int", 10000, lo=1),
    "measure_every": P("int", 1, lo=1),
    "algorithm": P("choice", "heatbath", choices=["metropolis", "heatbath", "cluster", "mixed"]),
}
QUAD = {"grid": P("int", 64, lo=8, hi=4096)}
SHAPE = P("str", "1x2")
BETA = P("float", 1.0, lo=0.0, hi=100.0)
PROB = P("float", lo=0.0, hi=1.0)

SCHEMAS: dict[Experiment, dict[str, dict[str, Param]]] = {
    Experiment.TWO_POINT: {
        "model": {"shape": SHAPE, "beta": BETA, "x": P("int", 0, lo=0), "y": P("int", -1, lo=-1)},
        "sampler": SAMPLER,
        "quadrature": QUAD,
    },
    Experiment.QUENCHED_TWO_POINT: {
        "model": {
            "d": P("int", 2, lo=1, hi=4),
            "L": P("int", 16, lo=1),
            "p": PROB,
            "beta": BETA,
            "kind": P("choice", "site", choices=["site", "edge"]),
            "distances": P("ints", (1, 2, 4), lo=1),
            "n_disorder": P("int", 4, lo=1),
        },
        "sampler": SAMPLER,
    },
    Experiment.GOOD_BOX_SCAN: {
        "percolation": {
            "d": P("int", 2, lo=2, hi=3),
            "p": PROB,
            "L_list": P("ints", (8, 16, 32), lo=2),
            "trials": P("int", 200, lo=1),
            "divisor": P("int", 100, lo=1),
        }
    },
    Experiment.WELLS_VERIFY: {
        "model": {"shape": SHAPE, "beta": P("float", 2.0, lo=0.0, hi=100.0), "pbar": P("float", 0.5, lo=0.0, hi=1.0)},
        "quadrature": QUAD,
    },
    Experiment.DOMINATION_CHECK: {
        "model": {"shape": P("str", "2x2"), "beta": BETA, "pbar": P("float", 0.5, lo=0.0, hi=1.0)},
        "quadrature": QUAD,
    },
    Experiment.BESSEL_THRESHOLDS: {"thresholds": {"n_list": P("ints", (2, 4, 8, 16), lo=2)}},
    Experiment.LAMMERS_SCAN: {
        "heights": {
            "n": P("int", 2, lo=1),
            "beta1": P("floats", lo=0.0, hi=50.0),
            "beta2": P("floats", lo=0.0, hi=50.0),
        }
    },
    Experiment.DELOCALIZATION: {
        "heights": {
            "n": P("int", 2, lo=1),
            "beta1": P("float", lo=0.0, hi=50.0),
            "beta2": P("float", lo=0.0, hi=50.0),
            "radii": P("ints", (2, 4, 8), lo=0),
        },
        "sampler": SAMPLER,
    },
    Experiment.NISHIMORI_CORRELATION: {
        "nishimori": {
            "d": P("int", 3, lo=2, hi=4),
            "L": P("int", 2, lo=1),
            "n": P("int", 1, lo=1),
            "k": P("int", 1, lo=1),
            "beta1": P("float", lo=0.0, hi=1000.0),
            "beta2": P("float", lo=0.0, hi=1000.0),
            "n_disorder": P("int", 4, lo=1),
            "path_samples": P("int", 20000, lo=2),
        },
        "sampler": SAMPLER,
    },
    Experiment.PATH_TAILS: {
        "paths": {"d": P("int", 3, lo=2), "k": P("int", 1, lo=1), "trials": P("int", 100000, lo=1)}
    },
    Experiment.VORONOI_TWO_POINT: {
        "voronoi": {
            "half": P("float", 10.0, lo=1.0, hi=200.0),
            "intensity": P("float", 1.0, lo=0.0),
            "strength": P("choice", "F1", choices=["F1", "F2", "F3"]),
            "beta": BETA,
            "distances": P("floats", (1.0, 2.0, 4.0), lo=0.0),
            "n_disorder": P("int", 2, lo=1),
        },
        "sampler": SAMPLER,
    },
    Experiment.PHI4_TWO_POINT: {
        "model": {
            "shape": SHAPE,
            "beta": BETA,
            "g": P("float", 1.0, lo=0.0),
            "h": P("float", 0.0),
            "x": P("int", 0, lo=0),
            "y": P("int", -1, lo=-1),
        },
        "sampler": SAMPLER,
        "quadrature": QUAD,
    },
    Experiment.SPATIAL_AVERAGE: {
        "model": {
            "L": P("int", 32, lo=2),
            "p": PROB,
            "beta": BETA,
            "half": P("int", 8, lo=0),
            "m": P("int", 2, lo=0),
            "n_disorder": P("int", 1, lo=1),
        },
        "sampler": SAMPLER,
    },
    Experiment.PHI_R: {
        "model": {
            "d": P("int", 2, lo=2, hi=3),
            "n": P("int", 1, lo=0),
            "beta1": BETA,
            "beta2": BETA,
            "R_list": P("ints", (1, 2, 4), lo=1),
        },
        "sampler": SAMPLER,
    },
    Experiment.DECAY_SCAN: {
        "model": {
            "d": P("int", 2, lo=1, hi=4),
            "L": P("int", 32, lo=2),
            "p": PROB,
            "beta": BETA,
            "kind": P("choice", "site", choices=["site", "edge"]),
            "distances": P("ints", (2, 4, 8, 16), lo=1),
            "n_disorder": P("int", 4, lo=1),
        },
        "sampler": SAMPLER,
    },
}


@dataclass(frozen=True)
class ExperimentConfig:
    experiment: Experiment
    seed: int
    workers: int
    params: dict[str, dict[str, Any]] = field(compare=True)

    def section(self, name: str) -> dict[str, Any]:
        return self.params[name]

    def schema(self) -> dict[str, dict[str, Param]]:
        return {"run": RUN, **SCHEMAS[self.experiment]}


def parse_config(text: str, overrides: dict[str, str] | None = None) -> ExperimentConfig:
    """Validate a config; ``overrides`` maps "section.key" to raw text and wins over the file."""
    cp = configparser.ConfigParser(interpolation=None, default_section="\x00none")
    cp.optionxform = str
    try:
        cp.read_string(text)
    except configparser.Error as exc:
        raise ConfigError("<file>", str(exc).splitlines()[0]) from None
    raw: dict[str, dict[str, str]] = {s: dict(cp[s]) for s in cp.sections()}
    for dotted, value in (overrides or {}).items():
        sec, key = dotted.split(".", 1)
        raw.setdefault(sec, {})[key] = value
    run_raw = raw.get("run", {})
    if "experiment" not in run_raw:
        raise ConfigError("experiment", "missing required key")
    exp = Experiment(RUN["experiment"].parse("experiment", run_raw["experiment"]))
    schema = {"run": RUN, **SCHEMAS[exp]}
    for sec, items in raw.items():
        if sec not in schema:
            raise ConfigError(sec, f"unknown section for {exp.value}")
        for key in items:
            if key not in schema[sec]:
                raise ConfigError(key, f"unknown key in [{sec}]")
    params: dict[str, dict[str, Any]] = {}
    for sec, keys in schema.items():
        vals = {}
        for key, prm in keys.items():
            if key in raw.get(sec, {}):
                vals[key] = prm.parse(key, raw[sec][key])
            elif prm.default is REQUIRED:
                raise ConfigError(key, "missing required key")
            else:
                vals[key] = prm.default
        params[sec] = vals
    run = params["run"]
    return ExperimentConfig(exp, run["seed"], run["workers"], params)


def format_config(cfg: ExperimentConfig) -> str:
    """Normalised text: every key, defaults filled, sections and keys in schema order."""
    out = []
    for sec, keys in cfg.schema().items():
        out.append(f"[{sec}]")
        for key, prm in keys.items():
            out.append(f"{key} = {prm.format(cfg.params[sec][key])}")
        out.append("")
    return "\n".join(out)


def config_hash(cfg: ExperimentConfig) -> str:
    """Hash of the normalised config without the worker count, which never changes results."""
    text = format_config(cfg).replace(f"workers = {cfg.workers}\n", "")
    return hashlib.sha256(text.encode()).hexdigest()


# ------------------------------------------------------------- runners


def _schedule(cfg: ExperimentConfig, tag_offset: int = 0):
    from .sampler import Algorithm, ChainSchedule

    s = cfg.params["sampler"]
    return ChainSchedule(
        s["thermalization"],
        s["measurement"],
        s["measure_every"],
        cfg.seed + tag_offset,
        {"metropolis": Algorithm.METROPOLIS, "heatbath": Algorithm.HEATBATH, "cluster": Algorithm.EMBEDDED_CLUSTER,
         "mixed": Algorithm.MIXED}[s["algorithm"]],
    )


def _quad(cfg: ExperimentConfig):
    from .oracle import QuadratureSpec

    return QuadratureSpec(grid=cfg.params["quadrature"]["grid"])


def _rect(shape: str, beta: float):
    from .graphs import build_rect_lattice

    try:
        dims = tuple(int(s) for s in shape.lower().split("x"))
    except ValueError:
        raise ConfigError("shape", f"expected AxB, got {shape!r}") from None
    if not dims or min(dims) < 1:
        raise ConfigError("shape", "sides must be positive")
    return build_rect_lattice(dims, beta)


def _pair(graph, x: int, y: int) -> tuple[int, int]:
    n = graph.n_vertices
    y = n - 1 if y == -1 else y
    if x >= n:
        raise ConfigError("x", f"vertex {x} not in a graph of {n} vertices")
    if y >= n:
        raise ConfigError("y", f"vertex {y} not in a graph of {n} vertices")
    return x, y


Rows = list[dict[str, Any]]


def _two_point(cfg) -> Rows:
    from .oracle import xy_two_point
    from .sampler import Pair, XYModel, run_chain

    m = cfg.section("model")
    g = _rect(m["shape"], m["beta"])
    x, y = _pair(g, m["x"], m["y"])
    res = run_chain(XYModel(g), _schedule(cfg), [Pair(x, y)])[0]
    exact = xy_two_point(g, x, y, quad=_quad(cfg))
    z = (res.mean - exact) / res.stderr if res.stderr > 0 else 0.0
    return [dict(beta=m["beta"], x=x, y=y, mean=res.mean, stderr=res.stderr, tau_int=res.tau_int, oracle=exact, z=z)]


def _quenched(cfg, workers):
    from .sampler import quenched_profile

    m = cfg.section("model")
    return quenched_profile(
        m["d"], m["L"], m["p"], m["beta"], m["distances"], m["kind"], m["n_disorder"], _schedule(cfg),
        workers=workers,
    )


def _quenched_two_point(cfg, workers) -> Rows:
    prof = _quenched(cfg, workers)
    return [
        dict(distance=r, mean=c.mean, stderr=c.stderr, n_disorder=len(prof.per_disorder))
        for r, c in zip(prof.distances, prof.combined)
    ]


def _decay_scan(cfg, workers) -> Rows:
    from .sampler import decay_classifier

    prof = _quenched(cfg, workers)
    fit = decay_classifier(prof.distances, [c.mean for c in prof.combined], [c.stderr for c in prof.combined])
    def opt(v):
        # empty cell when fewer than two significant points leave no fit
        return None if math.isnan(v) else v

    summary = dict(
        verdict=fit.verdict.value,
        exp_rate=opt(-fit.exp_params[1]),
        power_exponent=opt(-fit.pow_params[1]),
        chi2_exp=opt(fit.chi2_exp),
        chi2_pow=opt(fit.chi2_pow),
    )
    return [dict(distance=r, mean=c.mean, stderr=c.stderr, **summary) for r, c in zip(prof.distances, prof.combined)]


def _goodbox(cfg) -> Rows:
    from .disorder import goodbox_scan

    s = cfg.section("percolation")
    return goodbox_scan(s["d"], s["p"], s["L_list"], s["trials"], cfg.seed, s["divisor"])


def _wells(cfg) -> Rows:
    from .oracle import verify_wells_inequality

    m = cfg.section("model")
    g = _rect(m["shape"], 1.0)
    rows = []
    for e in range(g.n_edges):
        u, v = int(g.eu[e]), int(g.ev[e])
        vec = np.zeros(g.n_vertices, dtype=np.int64)
        vec[u], vec[v] = 1, -1
        w = verify_wells_inequality(g, m["beta"], m["pbar"], vec, _quad(cfg))
        rows.append(dict(x=u, y=v, a=w.a, lhs=w.lhs, rhs=w.rhs, margin=w.margin, holds=w.holds))
    return rows


def _domination(cfg) -> Rows:
    from .oracle import domination_check, nu_prime_enumerate, p_zero

    m = cfg.section("model")
    g = _rect(m["shape"], 1.0)
    nu = nu_prime_enumerate(g, m["beta"], m["pbar"], _quad(cfg))
    p0 = p_zero(m["pbar"], m["beta"], g.dim)
    r = domination_check(nu, p0)
    return [dict(beta=m["beta"], pbar=m["pbar"], p_zero=p0, max_conditional=r.max_conditional, ok=r.ok,
                 site=r.argmax[0], config=r.argmax[1])]


def _thresholds(cfg) -> Rows:
    from .dual_height import threshold_beta1, threshold_beta2
    from .oracle import bessel_ratio

    b1 = threshold_beta1()
    rows = [dict(quantity="beta1", n=0, beta=b1, ratio=1.0 / bessel_ratio(2 * b1), target=2**0.125)]
    for n in cfg.section("thresholds")["n_list"]:
        b = threshold_beta2(n)
        rows.append(dict(quantity="beta2", n=n, beta=b, ratio=1.0 / bessel_ratio(2 * b), target=math.exp(1 / (4 * (n - 1)))))
    return rows


def _lammers(cfg) -> Rows:
    from .dual_height import lammers_check

    s = cfg.section("heights")
    rows = []
    for b1 in s["beta1"]:
        for b2 in s["beta2"]:
            r = lammers_check(s["n"], b1, b2)
            rows.append(dict(n=s["n"], beta1=b1, beta2=b2, type1_ok=r.type1_ok, type2_ok=r.type2_ok,
                             type1_margin=r.type1_margin, type2_margin=r.type2_margin, surrogate_ok=r.surrogate_ok,
                             type2_discrepancy=r.type2_discrepancy))
    return rows


def _deloc(cfg) -> Rows:
    from .dual_height import delocalization_experiment

    s = cfg.section("heights")
    res = delocalization_experiment(s["n"], s["beta1"], s["beta2"], s["radii"], _schedule(cfg))
    return [
        dict(radius=r.radius, n_free=r.n_free, mean_abs_h=r.estimate.mean, stderr=r.estimate.stderr,
             exploratory=res.exploratory, monotone=res.monotone)
        for r in res.rows
    ]


def _nishimori(cfg) -> Rows:
    from .nishimori import nishimori_correlation_experiment

    s = cfg.section("nishimori")
    r = nishimori_correlation_experiment(
        s["d"], s["L"], s["n"], s["beta1"], s["beta2"], s["n_disorder"], _schedule(cfg), s["k"], s["path_samples"]
    )
    return [dict(mean=r.estimate.mean, stderr=r.estimate.stderr, lambda_power=r.lambda_bound,
                 path_mean=r.path_identity.mean, path_stderr=r.path_identity.stderr)]


def _paths(cfg) -> Rows:
    from .nishimori import intersection_tail
    from .rng import stream

    s = cfg.section("paths")
    t = intersection_tail(s["d"], s["k"], s["trials"], stream(cfg.seed, "paths", 0))
    return [dict(j=j, count=int(t.counts[j]), tail=t.tail[j], lo=t.lo[j], hi=t.hi[j]) for j in range(t.tail.size)]


def _voronoi(cfg) -> Rows:
    from .sampler import Pair, XYModel, combine_disorder, run_chain
    from .voronoi import Window, build_voronoi_graph, sample_poisson_points

    s = cfg.section("voronoi")
    w = Window(-s["half"], -s["half"], s["half"], s["half"])
    sch = _schedule(cfg)
    per = {r: [] for r in s["distances"]}
    for i in range(s["n_disorder"]):
        pts = sample_poisson_points(w, cfg.seed, s["intensity"], index=i)
        vg = build_voronoi_graph(pts, w, s["strength"])
        g = vg.as_graph(s["beta"])
        near = lambda q: int(np.argmin(np.hypot(pts[:, 0] - q[0], pts[:, 1] - q[1])))  # noqa: E731
        o = near((0.0, 0.0))
        obs = [Pair(o, near((r, 0.0))) for r in s["distances"]]
        for r, res in zip(s["distances"], run_chain(XYModel(g), sch, obs, index=i)):
            per[r].append(res)
    rows = []
    for r, lst in per.items():
        c = combine_disorder(lst)
        rows.append(dict(distance=r, mean=c.mean, stderr=c.stderr, n_disorder=len(lst)))
    return rows


def _phi4(cfg) -> Rows:
    from .oracle import phi4_expectation_quadrature
    from .sampler import run_phi4_chain

    m = cfg.section("model")
    g = _rect(m["shape"], 1.0)
    x, y = _pair(g, m["x"], m["y"])
    res = run_phi4_chain(g, m["beta"], m["g"], m["h"], _schedule(cfg), [("SS", x, y)])[0]
    exact = phi4_expectation_quadrature(g, m["beta"], m["g"], m["h"], ("SS", x, y), _quad(cfg))
    z = (res.mean - exact) / res.stderr if res.stderr > 0 else 0.0
    return [dict(x=x, y=y, mean=res.mean, stderr=res.stderr, oracle=exact, z=z)]


def _spatial(cfg, workers) -> Rows:
    from .sampler import quenched_profile

    m = cfg.section("model")
    prof = quenched_profile(
        2, m["L"], m["p"], m["beta"], (1,), "site", m["n_disorder"], _schedule(cfg),
        spatial=(m["half"], m["m"]), workers=workers,
    )
    return [dict(disorder=i, spatial_mean=e[0].mean, stderr=e[0].stderr) for i, e in enumerate(prof.extra)]


def _phi_r(cfg) -> Rows:
    from .sampler import phi_R_estimator

    m = cfg.section("model")
    rows = []
    for R in m["R_list"]:
        r = phi_R_estimator(m["d"], m["n"], m["beta1"], m["beta2"], R, _schedule(cfg))
        rows.append(dict(R=R, phi=r.mean, stderr=r.stderr))
    return rows


RUNNERS: dict[Experiment, Callable] = {
    Experiment.TWO_POINT: _two_point,
    Experiment.QUENCHED_TWO_POINT: _quenched_two_point,
    Experiment.GOOD_BOX_SCAN: _goodbox,
    Experiment.WELLS_VERIFY: _wells,
    Experiment.DOMINATION_CHECK: _domination,
    Experiment.BESSEL_THRESHOLDS: _thresholds,
    Experiment.LAMMERS_SCAN: _lammers,
    Experiment.DELOCALIZATION: _deloc,
    Experiment.NISHIMORI_CORRELATION: _nishimori,
    Experiment.PATH_TAILS: _paths,
    Experiment.VORONOI_TWO_POINT: _voronoi,
    Experiment.PHI4_TWO_POINT: _phi4,
    Experiment.SPATIAL_AVERAGE: _spatial,
    Experiment.PHI_R: _phi_r,
    Experiment.DECAY_SCAN: _decay_scan,
}
PARALLEL = {Experiment.QUENCHED_TWO_POINT, Experiment.DECAY_SCAN, Experiment.SPATIAL_AVERAGE}


def compute(cfg: ExperimentConfig) -> Rows:
    fn = RUNNERS[cfg.experiment]
    rows = fn(cfg, cfg.workers) if cfg.experiment in PARALLEL else fn(cfg)
    for row in rows:
        for k, v in row.items():
            if isinstance(v, (float, np.floating)) and not math.isfinite(v):
                raise QuenchXYError(f"non-finite value in column {k}")
    return rows


def rows_to_csv(rows: Rows) -> str:
    buf = io.StringIO()
    if not rows:
        return ""
    w = csv.DictWriter(buf, fieldnames=list(rows[0]), lineterminator="\n")
    w.writeheader()
    for row in rows:
        w.writerow({k: _cell(v) for k, v in row.items()})
    return buf.getvalue()


def _cell(v) -> str:
    if isinstance(v, np.generic):
        v = v.item()
    if isinstance(v, bool):
        return "true" if v else "false"
    if isinstance(v, float):
        return repr(v)
    return "" if v is None else str(v)


def run_experiment(cfg: ExperimentConfig, out_dir: str | Path = ".") -> int:
    """Write ``<command>.csv`` and ``<command>.manifest.json``; 0 on success, 1 on a module error."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    name = cfg.experiment.command
    t0 = time.perf_counter()
    try:
        rows = compute(cfg)
    except QuenchXYError as exc:
        print(json.dumps({"error": type(exc).__name__, "message": str(exc)}), file=sys.stderr)
        return 1
    (out / f"{name}.csv").write_text(rows_to_csv(rows))
    manifest = {
        "experiment": cfg.experiment.value,
        "config_sha256": config_hash(cfg),
        "config": format_config(cfg),
        "code_version": __version__,
        "wall_seconds": time.perf_counter() - t0,
        "rows": len(rows),
    }
    (out / f"{name}.manifest.json").write_text(json.dumps(manifest, indent=2) + "\n")
    return 0


def main(argv: list[str] | None = None) -> int:
    ap = argparse.ArgumentParser(prog="quenchxy")
    ap.add_argument("subcommand", choices=[e.command for e in Experiment])
    ap.add_argument("--config", required=True)
    ap.add_argument("--seed", type=str)
    ap.add_argument("--workers", type=str)
    ap.add_argument("--out", default=".")
    args = ap.parse_args(argv)
    exp = next(e for e in Experiment if e.command == args.subcommand)
    over = {"run.experiment": exp.value}
    if args.seed is not None:
        over["run.seed"] = args.seed
    if args.workers is not None:
        over["run.workers"] = args.workers
    try:
        text = Path(args.config).read_text(encoding="utf-8")
        declared = configparser.ConfigParser(interpolation=None)
        declared.read_string(text)
        if declared.has_option("run", "experiment") and declared["run"]["experiment"].strip() != exp.value:
            raise ConfigError("experiment", f"config is for {declared['run']['experiment']}, not {exp.value}")
        cfg = parse_config(text, over)
    except (ConfigError, OSError, configparser.Error) as exc:
        print(json.dumps({"error": "ConfigError", "message": str(exc)}), file=sys.stderr)
        return 2
    print(format_config(cfg), file=sys.stderr)
    return run_experiment(cfg, args.out)


if __name__ == "__main__":
    sys.exit(main())
