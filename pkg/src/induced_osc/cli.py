"""Command-line front end: construct | certify | solve | sweep.

Examples
--------
    induced-osc certify --alpha 200 --beta 1 --epsilon 2.5e-5 --p invsq:0.1 --m-hi 6
    induced-osc solve --p invsq:0.1 --m-hi 5 --format csv --out grid.csv
    induced-osc sweep --ratios 150,193,200,400 --eps-multipliers 0.5,0.9,1.1
    induced-osc certify --config run.cfg --compare previous.json

Config files hold flat ``key = value`` lines using the long flag names
(``alpha``, ``m_hi``, ``tol_quad`` ...); flags given on the command line win.
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import math
import sys
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from datetime import datetime, timezone
from pathlib import Path

from . import __version__
from .certify import MARGIN_NAMES, certify_all
from .construct import Perturbation, admissible_epsilon, epsilon_zero, threshold_constants
from .core import (
    PI,
    CoefficientP,
    ExampleParams,
    OscillationError,
    ToleranceConfig,
    find_violations,
    parse_p_spec,
)
from .solve import CSV_COLUMNS, solve_grid

EXIT_OK = 0
EXIT_FAILED = 1
EXIT_INVALID = 2

DEFAULTS = {
    "alpha": 200.0,
    "beta": 1.0,
    "epsilon": 2.5e-5,
    "s0": PI,
    "p": "invsq:0.1",
    "m_lo": None,
    "m_hi": 6,
    "tol_quad": 1e-10,
    "tol_tail": 1e-12,
    "margin_min": 1e-6,
    "fd_step_scale": 1.0,
    "format": "json",
    "out": None,
    "compare": None,
    "zero_q": False,
    "count": 8,
    "points_per_bump": 64,
    "ratios": "150,193,200,400",
    "eps_multipliers": "0.5,0.9,1.1",
    "jobs": 1,
}
_FLOATS = {"alpha", "beta", "epsilon", "s0", "tol_quad", "tol_tail", "margin_min", "fd_step_scale"}
_INTS = {"m_lo", "m_hi", "count", "points_per_bump", "jobs"}


@dataclass
class RunConfig:
    params: ExampleParams
    p_spec: str
    p: CoefficientP
    m_range: tuple[int, int]
    tolerances: ToleranceConfig
    fmt: str = "json"
    out: str | None = None
    compare: str | None = None
    zero_q: bool = False
    extra: dict = field(default_factory=dict)

    @property
    def perturbation(self) -> Perturbation:
        return Perturbation(self.params, null=self.zero_q)


def read_config_file(path) -> dict:
    out = {}
    for n, line in enumerate(Path(path).read_text().splitlines(), 1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ValueError(f"{path}:{n}: expected key = value")
        key, value = (x.strip() for x in line.split("=", 1))
        key = key.replace("-", "_")
        if key not in DEFAULTS:
            raise ValueError(f"{path}:{n}: unknown key {key!r}")
        out[key] = value
    return out


def _coerce(key, value):
    if value is None:
        return None
    if key in _FLOATS:
        return float(value)
    if key in _INTS:
        return int(value)
    if key == "zero_q" and isinstance(value, str):
        return value.lower() in ("1", "true", "yes", "on")
    return value


def build_config(args: argparse.Namespace) -> RunConfig:
    merged = dict(DEFAULTS)
    if args.config:
        merged.update(read_config_file(args.config))
    for key in DEFAULTS:
        v = getattr(args, key, None)
        if v is not None and v is not False:
            merged[key] = v
    merged = {k: _coerce(k, v) for k, v in merged.items()}

    params = ExampleParams(merged["alpha"], merged["beta"], merged["epsilon"], merged["s0"])
    p = parse_p_spec(merged["p"], params.s0)
    tol = ToleranceConfig(merged["tol_quad"], merged["tol_tail"], merged["margin_min"], merged["fd_step_scale"])
    m1 = Perturbation(params).m1
    m_lo = merged["m_lo"] if merged["m_lo"] is not None else m1
    m_hi = merged["m_hi"]
    if m_lo > m_hi:
        raise ValueError(f"m_lo={m_lo} exceeds m_hi={m_hi}")
    if merged["format"] not in ("json", "csv"):
        raise ValueError("format must be json or csv")
    return RunConfig(params, merged["p"], p, (m_lo, m_hi), tol, merged["format"], merged["out"],
                     merged["compare"], bool(merged["zero_q"]), merged)


# --- serialisation ------------------------------------------------------------------


def _clean(obj):
    """JSON-safe copy: non-finite floats become null, tuples become lists."""
    if isinstance(obj, dict):
        return {str(k): _clean(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_clean(v) for v in obj]
    if isinstance(obj, bool) or obj is None or isinstance(obj, (int, str)):
        return obj
    x = float(obj)
    return x if math.isfinite(x) else None


def _num(x) -> str:
    if x is None:
        return "nan"
    if isinstance(x, bool):
        return str(x).lower()
    if isinstance(x, int):
        return str(x)
    if isinstance(x, float):
        return repr(x)
    return str(x)


def dump_json(body: dict, command: str) -> str:
    doc = dict(_clean(body))
    doc["run"] = {
        "tool": "induced-osc",
        "version": __version__,
        "command": command,
        "timestamp": datetime.now(timezone.utc).isoformat(timespec="seconds"),
    }
    return json.dumps(doc, indent=2, allow_nan=False) + "\n"


def json_data_body(text: str) -> str:
    """Canonical text of a JSON document with the run header removed."""
    doc = json.loads(text)
    doc.pop("run", None)
    return json.dumps(doc, indent=2, sort_keys=True)


def dump_csv(header, rows) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    for row in rows:
        w.writerow([_num(x) for x in row])
    return buf.getvalue()


def _emit(text: str, cfg: RunConfig) -> int:
    """Write output, then run the --compare check. Returns an exit status."""
    if cfg.out:
        Path(cfg.out).write_text(text)
    else:
        sys.stdout.write(text)
    if cfg.compare:
        ref = Path(cfg.compare).read_text()
        if cfg.fmt == "json":
            same = json_data_body(ref) == json_data_body(text)
        else:
            same = ref == text
        if not same:
            print(f"compare: data body differs from {cfg.compare}", file=sys.stderr)
            return EXIT_FAILED
        print(f"compare: identical to {cfg.compare}", file=sys.stderr)
    return EXIT_OK


def _report_violations(violations) -> None:
    for v in violations:
        print(f"error: {v}", file=sys.stderr)


# --- commands -------------------------------------------------------------------


def construct_document(cfg: RunConfig) -> dict:
    pert = cfg.perturbation
    params = cfg.params
    c1, c2 = threshold_constants(params.alpha, params.beta)
    count = int(cfg.extra.get("count", 8))
    m1 = pert.m1
    return {
        "params": params.as_dict(),
        "p_spec": cfg.p_spec,
        "m1": m1,
        "first_switch_point": 2 * m1 * PI,
        "threshold_constants": {"C1": c1, "C2": c2},
        "epsilon_zero": {"C1": epsilon_zero(c1), "C2": epsilon_zero(c2)},
        "epsilon_admissible": admissible_epsilon(params.alpha, params.beta),
        "amplitudes": [
            {"m": m, "c": pert.c(m), "d": pert.d(m), "log_c": pert.log_c(m), "log_d": pert.log_d(m)}
            for m in range(m1, m1 + count)
        ],
        "underflow_horizon": pert.underflow_horizon(),
    }


def cmd_construct(cfg: RunConfig) -> int:
    violations = find_violations(cfg.params, cfg.p)
    if violations:
        _report_violations(violations)
        return EXIT_INVALID
    doc = construct_document(cfg)
    if cfg.fmt == "csv":
        text = dump_csv(("m", "c", "d", "log_c", "log_d"),
                        [(a["m"], a["c"], a["d"], a["log_c"], a["log_d"]) for a in doc["amplitudes"]])
    else:
        text = dump_json(doc, "construct")
    return _emit(text, cfg)


CERTIFY_COLUMNS = ("m", *MARGIN_NAMES, "status", "route_gap")


def cmd_certify(cfg: RunConfig) -> int:
    report = certify_all(cfg.perturbation, cfg.p, *cfg.m_range, cfg.tolerances)
    if cfg.fmt == "csv":
        rows = [[r.m, *r.margins().values(), r.status, r.route_gap] for r in report.per_m_records]
        text = dump_csv(CERTIFY_COLUMNS, rows)
    else:
        text = dump_json(report.as_dict(), "certify")
    status = _emit(text, cfg)
    for w in report.warnings:
        print(f"warning: {w}", file=sys.stderr)
    print(f"verdict: {report.verdict}", file=sys.stderr)
    for f in report.failures:
        print(f"  failure: {f}", file=sys.stderr)
    if report.verdict != "certified":
        return EXIT_FAILED
    return status


def solution_document(cfg: RunConfig, grid) -> dict:
    return {
        "meta": {"params": cfg.params.as_dict(), "p_spec": cfg.p_spec, "zero_q": cfg.zero_q,
                 "m_range": list(cfg.m_range), "tolerances": cfg.tolerances.as_dict()},
        "grid": {name: [getattr(x, name) for x in grid.samples] for name in CSV_COLUMNS},
        "switch_point": [x.switch_point for x in grid.samples],
        "sign_certificates": [r.as_dict() for r in grid.sign_certificates],
        "decay_envelope": [vars(d) for d in grid.decay_envelope],
        "interior_sign_changes": grid.interior_sign_changes,
    }


def cmd_solve(cfg: RunConfig) -> int:
    violations = find_violations(cfg.params, cfg.p)
    if violations:
        _report_violations(violations)
        return EXIT_INVALID
    try:
        grid = solve_grid(cfg.perturbation, cfg.p, *cfg.m_range, cfg.tolerances,
                          points_per_bump=int(cfg.extra.get("points_per_bump", 64)))
    except OscillationError as exc:
        print(f"error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_FAILED
    if cfg.fmt == "csv":
        text = dump_csv(CSV_COLUMNS, [[getattr(x, c) for c in CSV_COLUMNS] for x in grid.samples])
    else:
        text = dump_json(solution_document(cfg, grid), "solve")
    return _emit(text, cfg)


SWEEP_COLUMNS = ("ratio", "eps_multiplier", "alpha", "beta", "epsilon", "theory", "numeric",
                 "verdict", "min_margin", "error")


def _parse_list(text) -> list[float]:
    if isinstance(text, (list, tuple)):
        return [float(x) for x in text]
    return [float(x) for x in str(text).split(",") if x.strip()]


def sweep_cell(cfg: RunConfig, ratio: float, mult: float) -> dict:
    beta = cfg.params.beta
    alpha = ratio * beta
    row = {"ratio": ratio, "eps_multiplier": mult, "alpha": alpha, "beta": beta,
           "epsilon": None, "theory": None, "numeric": None, "verdict": None, "min_margin": None, "error": ""}
    try:
        if alpha > 192 * beta:
            base = admissible_epsilon(alpha, beta)
            row["theory"] = "guaranteed" if mult < 1 else "uncertified-by-theory"
        else:
            # no admissible epsilon exists; scale the second threshold instead
            base = epsilon_zero(threshold_constants(alpha, beta)[1])
            row["theory"] = "ratio-violation"
        eps = mult * base
        row["epsilon"] = eps
        params = ExampleParams(alpha, beta, eps, cfg.params.s0)
        report = certify_all(Perturbation(params), cfg.p, *cfg.m_range, cfg.tolerances)
        row["verdict"] = report.verdict
        # margins alone, independent of whether theory guarantees this cell
        row["numeric"] = "fail" if any(r.status == "failed" for r in report.per_m_records) else "pass"
        row["min_margin"] = report.min_margin
    except (OscillationError, ValueError) as exc:
        row["verdict"] = "error"
        row["error"] = f"{type(exc).__name__}: {exc}"
    return row


def run_sweep(cfg: RunConfig, ratios, multipliers, jobs: int = 1) -> list[dict]:
    cells = [(r, e) for r in ratios for e in multipliers]
    with ThreadPoolExecutor(max_workers=max(1, jobs)) as pool:
        return list(pool.map(lambda c: sweep_cell(cfg, *c), cells))


def cmd_sweep(cfg: RunConfig) -> int:
    rows = run_sweep(cfg, _parse_list(cfg.extra["ratios"]), _parse_list(cfg.extra["eps_multipliers"]),
                     int(cfg.extra.get("jobs", 1)))
    if cfg.fmt == "csv":
        text = dump_csv(SWEEP_COLUMNS, [[row[c] for c in SWEEP_COLUMNS] for row in rows])
    else:
        text = dump_json({"meta": {"beta": cfg.params.beta, "p_spec": cfg.p_spec,
                                   "m_range": list(cfg.m_range)}, "rows": rows}, "sweep")
    return _emit(text, cfg)


COMMANDS = {"construct": cmd_construct, "certify": cmd_certify, "solve": cmd_solve, "sweep": cmd_sweep}


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="flat key = value file")
    common.add_argument("--alpha", type=float)
    common.add_argument("--beta", type=float)
    common.add_argument("--epsilon", type=float)
    common.add_argument("--s0", type=float)
    common.add_argument("--p", help="zero | invsq:<lambda> | table:<path>")
    common.add_argument("--m-lo", dest="m_lo", type=int)
    common.add_argument("--m-hi", dest="m_hi", type=int)
    common.add_argument("--tol-quad", dest="tol_quad", type=float)
    common.add_argument("--tol-tail", dest="tol_tail", type=float)
    common.add_argument("--margin-min", dest="margin_min", type=float)
    common.add_argument("--fd-step-scale", dest="fd_step_scale", type=float)
    common.add_argument("--format", choices=("json", "csv"))
    common.add_argument("--out", help="output path (default: stdout)")
    common.add_argument("--compare", help="reference output; exit 1 if the data body differs")
    common.add_argument("--zero-q", dest="zero_q", action="store_true",
                        help="replace q by zero (degenerate regression case)")

    parser = argparse.ArgumentParser(prog="induced-osc", description=__doc__.split("\n")[0])
    parser.add_argument("--version", action="version", version=__version__)
    sub = parser.add_subparsers(dest="command", required=True)
    c = sub.add_parser("construct", parents=[common], help="amplitudes and eps thresholds")
    c.add_argument("--count", type=int, help="number of amplitude pairs to list")
    sub.add_parser("certify", parents=[common], help="check every hypothesis over an index range")
    s = sub.add_parser("solve", parents=[common], help="sample z, h and residuals")
    s.add_argument("--points-per-bump", dest="points_per_bump", type=int)
    w = sub.add_parser("sweep", parents=[common], help="certify over a ratio x eps grid")
    w.add_argument("--ratios", help="comma-separated alpha/beta values")
    w.add_argument("--eps-multipliers", dest="eps_multipliers", help="comma-separated multiples of the eps bound")
    w.add_argument("--jobs", type=int)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        cfg = build_config(args)
    except (ValueError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INVALID
    return COMMANDS[args.command](cfg)


if __name__ == "__main__":
    sys.exit(main())
