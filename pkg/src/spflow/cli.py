"""Command-line scenario runner.

    spflow run      --config cfg.json --out DIR [--format json|csv] [--seed S] [--threads N]
    spflow sweep    --config cfg.json --out DIR [--format csv|json] [--seed S] [--threads N]
    spflow plotdata --config cfg.json --out DIR [--samples N]

Exit codes: 0 when every method returns the same integer (and it matches the
scenario's expected flow, if known); 2 on disagreement or when a method fails
to converge; 1 on an invalid config or any other execution error.  The config
schema is documented in README.md.
"""

from __future__ import annotations

import argparse
import copy
import json
import logging
import math
import os
import sys
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from . import models
from .errors import ConvergenceError, SpectralFlowError
from .flowcore import (
    OperatorPath,
    spectral_flow_corollary,
    spectral_flow_crossings,
    spectral_flow_integral,
    spectral_flow_via_winding,
)
from .funcalc import eigvalsh_batch, matrix_from_json
from .normfun import from_spec as chi_from_spec
from .quad import Decay
from .serialize import csv_text, dumps, write_atomic

log = logging.getLogger("spflow")

METHODS = ("crossings", "winding", "integral", "corollary")
EXIT_OK, EXIT_ERROR, EXIT_DISAGREE = 0, 1, 2
U64 = 1 << 64

TOLERANCE_DEFAULTS = {
    "integral": 1e-8,
    "integral_max_evals": 2_000_000,
    "corollary": 1e-8,
    "equivalence": 1e-8,
    "crossing_samples": 65,
    "gap": 1e-10,
    "winding_quad_points": 64,
    "winding_max_points": 65536,
    "winding_conv": 1e-6,
    "winding_delta": None,
    "winding_refine": True,
}
_INT_TOLS = {"integral_max_evals", "crossing_samples", "winding_quad_points", "winding_max_points"}


class ConfigError(ValueError):
    """Invalid configuration; ``field`` names the offending key (dotted)."""

    def __init__(self, field_name: str, message: str):
        super().__init__(f"config error in '{field_name}': {message}")
        self.field = field_name


# -- config handling

@dataclass
class RunConfig:
    scenario: dict
    methods: list
    chi: dict | None = None
    psi: dict | None = None
    tolerances: dict = field(default_factory=dict)
    format: str = "json"
    sweep: dict | None = None
    plotdata: dict = field(default_factory=dict)
    raw: dict = field(default_factory=dict)


def load_config(path: str) -> dict:
    try:
        with open(path) as fh:
            return json.load(fh)
    except OSError as exc:
        raise ConfigError("--config", f"cannot read {path}: {exc.strerror}") from exc
    except json.JSONDecodeError as exc:
        raise ConfigError("--config", f"invalid JSON: {exc}") from exc


def parse_config(raw: dict, seed: int | None = None, fmt: str | None = None) -> RunConfig:
    """Validate a raw config dict; ``seed``/``fmt`` override the file."""
    if not isinstance(raw, dict):
        raise ConfigError("<root>", "config must be a JSON object")
    raw = copy.deepcopy(raw)
    known = {"scenario", "methods", "chi", "psi", "tolerances", "format", "sweep", "plotdata"}
    for key in raw:
        if key not in known:
            raise ConfigError(key, f"unknown key (expected one of {sorted(known)})")

    scen = raw.get("scenario")
    if not isinstance(scen, dict):
        raise ConfigError("scenario", "required object")
    if seed is not None:
        scen["seed"] = seed
    _check_scenario(scen)

    methods = raw.get("methods")
    if not isinstance(methods, list) or not methods:
        raise ConfigError("methods", f"need a non-empty list drawn from {list(METHODS)}")
    for i, m in enumerate(methods):
        if m not in METHODS:
            raise ConfigError(f"methods[{i}]", f"unknown method {m!r}")
    if len(set(methods)) != len(methods):
        raise ConfigError("methods", "duplicate entries")
    methods = [m for m in METHODS if m in methods]

    chi = raw.get("chi")
    for m in ("integral", "winding"):
        if m in methods and chi is None:
            raise ConfigError("chi", f"required when the {m} method is selected")
    if chi is not None:
        _check_function_spec(chi, "chi", chi_from_spec)
    psi = raw.get("psi")
    if "corollary" in methods and psi is None and chi is None:
        raise ConfigError("psi", "corollary needs psi (or chi, whose derivative is used)")
    if psi is not None:
        _check_function_spec(psi, "psi", lambda s: psi_from_spec(s, None))

    tol = dict(TOLERANCE_DEFAULTS)
    given = raw.get("tolerances", {})
    if not isinstance(given, dict):
        raise ConfigError("tolerances", "must be an object")
    for k, v in given.items():
        if k not in TOLERANCE_DEFAULTS:
            raise ConfigError(f"tolerances.{k}", f"unknown tolerance (expected one of {sorted(TOLERANCE_DEFAULTS)})")
        tol[k] = _check_tolerance(k, v)

    out_fmt = fmt or raw.get("format", "json")
    if out_fmt not in ("json", "csv"):
        raise ConfigError("format", f"must be 'json' or 'csv', got {out_fmt!r}")

    sweep = raw.get("sweep")
    if sweep is not None:
        if not isinstance(sweep, dict) or not isinstance(sweep.get("parameter"), str):
            raise ConfigError("sweep.parameter", "required string (dotted config path)")
        vals = sweep.get("values")
        if not isinstance(vals, list):
            raise ConfigError("sweep.values", "required list")
    plot = raw.get("plotdata", {})
    if not isinstance(plot, dict):
        raise ConfigError("plotdata", "must be an object")
    return RunConfig(scen, methods, chi, psi, tol, out_fmt, sweep, plot, raw)


def _check_scenario(scen: dict) -> None:
    if "seed" in scen:
        s = scen["seed"]
        if isinstance(s, bool) or not isinstance(s, int) or not 0 <= s < U64:
            raise ConfigError("scenario.seed", f"must be an unsigned 64-bit integer, got {s!r}")
    if "matrix_polynomial" in scen:
        coeffs = scen["matrix_polynomial"]
        if not isinstance(coeffs, list) or not coeffs:
            raise ConfigError("scenario.matrix_polynomial", "need a non-empty list of matrices")
        for i, c in enumerate(coeffs):
            try:
                matrix_from_json(c)
            except (ValueError, TypeError, KeyError) as exc:
                raise ConfigError(f"scenario.matrix_polynomial[{i}]", str(exc)) from exc
        return
    gen = scen.get("generator")
    if gen not in models.GENERATORS:
        raise ConfigError("scenario.generator",
                          f"unknown generator {gen!r} (expected one of {sorted(models.GENERATORS)})")
    if not isinstance(scen.get("params", {}), dict):
        raise ConfigError("scenario.params", "must be an object")
    conj = scen.get("conjugate")
    if conj is not None and not isinstance(conj, dict):
        raise ConfigError("scenario.conjugate", "must be an object like {\"seed\": 3, \"scale\": 1.0}")


def _check_function_spec(spec, name, build) -> None:
    if not isinstance(spec, dict) or "family" not in spec:
        raise ConfigError(f"{name}.family", "required")
    try:
        build(spec)
    except (ValueError, TypeError, KeyError) as exc:
        raise ConfigError(name, str(exc)) from exc


def _check_tolerance(k, v):
    name = f"tolerances.{k}"
    if k == "winding_refine":
        if not isinstance(v, bool):
            raise ConfigError(name, "must be true or false")
        return v
    if k == "winding_delta" and v is None:
        return None
    if isinstance(v, bool) or not isinstance(v, (int, float)) or not math.isfinite(v) or v <= 0:
        raise ConfigError(name, f"must be a positive number, got {v!r}")
    if k in _INT_TOLS:
        if int(v) != v:
            raise ConfigError(name, f"must be an integer, got {v!r}")
        return int(v)
    return float(v)


def psi_from_spec(spec: dict, chi_spec: dict | None):
    """(psi, decay, norm_constant or None) from a psi spec.

    Families: ``cauchy`` (1+z^2)^-power (power > 1/2, default 1),
    ``gaussian`` exp(-s z^2), ``chi_prime`` (derivative of the nested
    ``chi`` spec).  ``C`` may be given to skip the normalization integral.
    """
    if spec is None:
        spec = {"family": "chi_prime", "chi": chi_spec}
    fam = spec.get("family")
    C = spec.get("C")
    if C is not None and not (isinstance(C, (int, float)) and C > 0):
        raise ValueError(f"psi.C must be positive, got {C!r}")
    if fam == "cauchy":
        q = float(spec.get("power", 1.0))
        if not q > 0.5:
            raise ValueError(f"cauchy power must exceed 1/2 for integrability, got {q}")
        return (lambda z: (1.0 + np.asarray(z, dtype=float) ** 2) ** -q), Decay("polynomial", 2 * q), C
    if fam == "gaussian":
        s = float(spec.get("s", 1.0))
        if not s > 0:
            raise ValueError(f"gaussian psi needs s > 0, got {s}")
        return (lambda z: np.exp(-s * np.asarray(z, dtype=float) ** 2)), Decay("gaussian", s), C
    if fam == "chi_prime":
        inner = spec.get("chi", chi_spec)
        if inner is None:
            raise ValueError("chi_prime psi needs a chi spec")
        f = chi_from_spec(inner)
        return f.chi_prime, f.prime_decay, C
    raise ValueError(f"unknown psi family {fam!r} (expected cauchy, gaussian, chi_prime)")


# -- scenario construction

def build_scenario(scen: dict) -> models.Scenario:
    if "matrix_polynomial" in scen:
        coeffs = [matrix_from_json(c) for c in scen["matrix_polynomial"]]
        interval = tuple(scen.get("interval", (0.0, 1.0)))
        path = OperatorPath.polynomial(coeffs, interval, label="matrix_polynomial")
        s = models.Scenario(path, None, "explicit matrix polynomial")
    else:
        gen = models.GENERATORS[scen["generator"]]
        params = dict(scen.get("params", {}))
        if scen["generator"] == "random_path":
            params.setdefault("seed", scen.get("seed", 0))
        try:
            s = gen(**params)
        except TypeError as exc:
            raise ConfigError("scenario.params", str(exc)) from exc
        except ValueError as exc:
            raise ConfigError("scenario.params", str(exc)) from exc
    conj = scen.get("conjugate")
    if conj is not None:
        s = models.conjugate_scenario(s, int(conj.get("seed", scen.get("seed", 0))),
                                      float(conj.get("scale", 1.0)))
    return s


# -- running methods

def run_method(method: str, cfg: RunConfig, scenario: models.Scenario) -> dict:
    """One method's report as a dict; errors become {"error": ...} entries."""
    tol = cfg.tolerances
    path = scenario.path
    try:
        if method == "crossings":
            rep = spectral_flow_crossings(path, tol["crossing_samples"], tol["gap"])
        elif method == "winding":
            delta = tol["winding_delta"]
            if delta is None and cfg.chi.get("family") == "involutive":
                delta = float(cfg.chi["delta"])
            rep = spectral_flow_via_winding(
                path, delta, tol["winding_quad_points"],
                max_points=tol["winding_max_points"], conv_tol=tol["winding_conv"],
                refine=tol["winding_refine"])
        elif method == "integral":
            rep = spectral_flow_integral(path, chi_from_spec(cfg.chi), tol["integral"],
                                         max_evals=tol["integral_max_evals"])
        else:
            if path.unitary is None:
                raise ConfigError("methods", "corollary needs a scenario whose endpoints carry "
                                             "a unitary equivalence (e.g. circle_dirac with an "
                                             "integer-length window)")
            psi, decay, C = psi_from_spec(cfg.psi, cfg.chi)
            rep = spectral_flow_corollary(path, psi, tol["corollary"], decay=decay,
                                          norm_constant=C, equivalence_tol=tol["equivalence"],
                                          max_evals=tol["integral_max_evals"])
        out = rep.to_dict()
        out["status"] = "ok"
        return out
    except ConvergenceError as exc:
        out = exc.partial.to_dict() if hasattr(exc.partial, "to_dict") else {"method": method}
        out["method"] = method
        out["status"] = "not_converged"
        out["error"] = str(exc)
        return out
    except (SpectralFlowError, ValueError, np.linalg.LinAlgError) as exc:
        return {"method": method, "status": "error", "error": f"{type(exc).__name__}: {exc}"}


def verdict(reports: dict, expected: int | None) -> tuple[dict, int]:
    statuses = {m: r["status"] for m, r in reports.items()}
    if any(s == "error" for s in statuses.values()):
        code = EXIT_ERROR
    elif any(s != "ok" for s in statuses.values()):
        code = EXIT_DISAGREE
    else:
        ints = {r["integer"] for r in reports.values()}
        if expected is not None:
            ints.add(expected)
        code = EXIT_OK if len(ints) == 1 else EXIT_DISAGREE
    integers = {m: r.get("integer") for m, r in reports.items()}
    return {
        "agree": code == EXIT_OK,
        "integers": integers,
        "expected_flow": expected,
        "max_residual": max((r.get("residual", math.nan) for r in reports.values()
                             if r.get("residual") is not None), default=math.nan),
        "exit_code": code,
    }, code


def execute(cfg: RunConfig, threads: int = 1) -> tuple[dict, dict, int]:
    """Run every configured method.  Returns (report, timings, exit code)."""
    scenario = build_scenario(cfg.scenario)
    timings: dict = {}

    def timed(m):
        t0 = time.perf_counter()
        r = run_method(m, cfg, scenario)
        timings[m] = time.perf_counter() - t0
        return m, r

    with ThreadPoolExecutor(max_workers=max(1, threads)) as ex:
        results = dict(ex.map(timed, cfg.methods))
    reports = {m: results[m] for m in cfg.methods}
    ver, code = verdict(reports, scenario.expected_flow)
    report = {
        "config": cfg.raw | {"scenario": cfg.scenario, "methods": cfg.methods,
                             "tolerances": cfg.tolerances},
        "scenario": scenario.describe(),
        "reports": reports,
        "verdict": ver,
    }
    return report, {m: timings[m] for m in cfg.methods}, code


REPORT_COLUMNS = ["method", "status", "value", "integer", "residual", "flagged",
                  "term_integral", "term_endpoint_b", "term_endpoint_a", "error"]


def report_rows(reports: dict) -> list[dict]:
    rows = []
    for m, r in reports.items():
        terms = r.get("terms", {})
        rows.append({
            "method": m, "status": r["status"], "value": r.get("value"),
            "integer": r.get("integer"), "residual": r.get("residual"),
            "flagged": r.get("flagged"), "term_integral": terms.get("integral"),
            "term_endpoint_b": terms.get("endpoint_b"), "term_endpoint_a": terms.get("endpoint_a"),
            "error": r.get("error", ""),
        })
    return rows


# -- sweep

def _set_dotted(raw: dict, dotted: str, value) -> None:
    keys = dotted.split(".")
    if len(keys) == 1 and keys[0] not in ("chi", "psi", "methods", "format"):
        keys = ["scenario", "params", keys[0]]
    node = raw
    for k in keys[:-1]:
        nxt = node.get(k)
        if nxt is None:
            nxt = node[k] = {}
        if not isinstance(nxt, dict):
            raise ConfigError("sweep.parameter", f"'{dotted}' passes through a non-object at '{k}'")
        node = nxt
    node[keys[-1]] = value


def sweep_columns(methods) -> list[str]:
    cols = ["parameter", "value", "agree", "expected_flow"]
    for m in methods:
        cols += [f"{m}_value", f"{m}_integer", f"{m}_residual", f"{m}_status", f"{m}_runtime_s"]
    return cols + ["error"]


def run_sweep(cfg: RunConfig, threads: int = 1, seed: int | None = None) -> tuple[list[dict], int]:
    sw = cfg.sweep
    if sw is None:
        raise ConfigError("sweep", "required for the sweep verb")
    if not sw["values"]:
        raise ConfigError("sweep.values", "must not be empty")
    base = {k: v for k, v in cfg.raw.items() if k != "sweep"}
    param = sw["parameter"]

    def row(value):
        raw = copy.deepcopy(base)
        _set_dotted(raw, param, value)
        label = value if isinstance(value, (int, float, str)) else json.dumps(value, sort_keys=True)
        out = {"parameter": param, "value": label}
        try:
            c = parse_config(raw, seed, cfg.format)
            rep, times, code = execute(c)
        except ConfigError as exc:
            return out | {"agree": False, "error": str(exc)}, EXIT_ERROR
        out["agree"] = rep["verdict"]["agree"]
        out["expected_flow"] = rep["verdict"]["expected_flow"]
        errs = []
        for m, r in rep["reports"].items():
            out[f"{m}_value"] = r.get("value")
            out[f"{m}_integer"] = r.get("integer")
            out[f"{m}_residual"] = r.get("residual")
            out[f"{m}_status"] = r["status"]
            out[f"{m}_runtime_s"] = times[m]
            if "error" in r:
                errs.append(f"{m}: {r['error']}")
        out["error"] = "; ".join(errs)
        return out, code

    with ThreadPoolExecutor(max_workers=max(1, threads)) as ex:
        results = list(ex.map(row, sw["values"]))
    rows = [r for r, _ in results]
    codes = [c for _, c in results]
    code = EXIT_ERROR if EXIT_ERROR in codes else EXIT_DISAGREE if EXIT_DISAGREE in codes else EXIT_OK
    return rows, code


# -- plot data

def plotdata_rows(path: OperatorPath, samples: int = 201) -> list[dict]:
    """Long format (t, branch, eigenvalue), branches in ascending order."""
    a, b = path.interval
    ts = np.linspace(a, b, int(samples))
    lam = eigvalsh_batch(path.batch(ts))
    return [{"t": float(t), "branch": j, "eigenvalue": float(v)}
            for t, row in zip(ts, lam) for j, v in enumerate(row)]


# -- entry point

def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="spflow", description="Spectral flow scenario runner")
    ap.add_argument("-v", "--verbose", action="store_true", help="log warnings and progress")
    sub = ap.add_subparsers(dest="verb", required=True)
    for verb, help_ in (("run", "run all configured methods on one scenario"),
                        ("sweep", "run the scenario once per swept value"),
                        ("plotdata", "sample the eigenvalue branches of the scenario path")):
        p = sub.add_parser(verb, help=help_)
        p.add_argument("--config", required=True, help="JSON config file")
        p.add_argument("--out", required=True, help="output directory")
        p.add_argument("--format", choices=("json", "csv"), default=None)
        p.add_argument("--threads", type=int, default=1)
        p.add_argument("--seed", type=_u64, default=None, help="overrides scenario.seed")
        if verb == "plotdata":
            p.add_argument("--samples", type=int, default=None)
    return ap


def _u64(text: str) -> int:
    v = int(text, 0)
    if not 0 <= v < U64:
        raise argparse.ArgumentTypeError(f"seed must be an unsigned 64-bit integer, got {text}")
    return v


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.ERROR,
                        format="%(levelname)s %(name)s: %(message)s")
    if args.threads < 1:
        print("config error in '--threads': must be >= 1", file=sys.stderr)
        return EXIT_ERROR
    try:
        cfg = parse_config(load_config(args.config), args.seed, args.format)
        if args.verb == "run":
            return _cmd_run(cfg, args)
        if args.verb == "sweep":
            return _cmd_sweep(cfg, args)
        return _cmd_plotdata(cfg, args)
    except ConfigError as exc:
        print(str(exc), file=sys.stderr)
        return EXIT_ERROR
    except (SpectralFlowError, ValueError, OSError) as exc:
        print(f"error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_ERROR


def _cmd_run(cfg: RunConfig, args) -> int:
    report, timings, code = execute(cfg, args.threads)
    out = args.out
    if cfg.format == "json":
        write_atomic(os.path.join(out, "report.json"), dumps(report) + "\n")
    else:
        write_atomic(os.path.join(out, "report.csv"), csv_text(report_rows(report["reports"]), REPORT_COLUMNS))
    write_atomic(os.path.join(out, "timings.json"), dumps({"runtime_s": timings}) + "\n")
    for m, r in report["reports"].items():
        if r["status"] == "error":
            print(f"{m:10s} error: {r['error']}", file=sys.stderr)
        else:
            print(f"{m:10s} {r['status']:14s} value={r['value']:.12g} integer={r['integer']} "
                  f"residual={r['residual']:.3g}")
    v = report["verdict"]
    print(f"verdict: {'agree' if v['agree'] else 'DISAGREE'} (exit {code})")
    return code


def _cmd_sweep(cfg: RunConfig, args) -> int:
    rows, code = run_sweep(cfg, args.threads, args.seed)
    cols = sweep_columns(cfg.methods)
    fmt = args.format or cfg.raw.get("format", "csv")
    if fmt == "json":
        write_atomic(os.path.join(args.out, "sweep.json"),
                     dumps([{c: r.get(c) for c in cols} for r in rows]) + "\n")
    else:
        write_atomic(os.path.join(args.out, "sweep.csv"), csv_text(rows, cols))
    print(f"sweep over {cfg.sweep['parameter']}: {len(rows)} rows (exit {code})")
    return code


def _cmd_plotdata(cfg: RunConfig, args) -> int:
    samples = args.samples or cfg.plotdata.get("samples", 201)
    if not isinstance(samples, int) or samples < 2:
        raise ConfigError("plotdata.samples", f"need an integer >= 2, got {samples!r}")
    rows = plotdata_rows(build_scenario(cfg.scenario).path, samples)
    write_atomic(os.path.join(args.out, "plotdata.csv"), csv_text(rows, ["t", "branch", "eigenvalue"]))
    print(f"wrote {len(rows)} rows")
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
