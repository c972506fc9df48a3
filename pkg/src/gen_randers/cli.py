"""Command-line entry point: ``verify``, ``jet``, ``geodesic`` and ``catalog``.

Exit codes: 0 when every check passes, 1 on a mathematical failure
(failing check, inadmissible instance, integration failure), 2 on a
configuration error.
"""

from __future__ import annotations

import argparse
import datetime as _dt
import json
import sys
from pathlib import Path

import numpy as np

from . import jets
from .catalog import CATALOG
from .config import ConfigError, RunConfig, load_config
from .geodesics import GeodesicError, IntegratorConfig, compare_geodesics, write_trace_csv
from .geometry import DegenerateMetricError, SlitPoint
from .jets import JetError
from .verify import (CheckSpec, InadmissibleInstanceError, VerifyError, run_checks, theorem_suite,
                     verify_tags)

EXIT_OK, EXIT_FAIL, EXIT_CONFIG = 0, 1, 2

FRAME_FIELDS = ("L", "g", "ginv", "ell", "h", "C_lower", "C", "C_trace", "G", "N",
                "Gamma_bar", "Gamma")
STAR_FIELDS = ("alpha", "L_star", "tau", "b2", "mu", "omega", "ell_star", "h_star", "g_star",
               "g_star_inv", "m", "nu", "phi", "phi_star", "A", "A_star_lower", "T_star_lower",
               "C_star_trace", "b_cov", "N0", "N", "B")


def _plain(obj):
    return np.asarray(jets.value(obj), dtype=float).tolist()


def build_report(cfg: RunConfig, deterministic: bool = False) -> dict:
    """Run everything the configuration asks for and assemble the report."""
    specs = [CheckSpec(cid, cfg.tolerances.get(cid)) for cid in cfg.checks]
    checks = run_checks(cfg.entry, specs, cfg.sample) if specs else []
    theorems = {tid: [r.to_dict() for r in theorem_suite(cfg.entry, tid, cfg.sample)]
                for tid in cfg.theorems}
    tags = [r.to_dict() for r in verify_tags(cfg.entry, cfg.sample)] if cfg.verify_tags else []
    all_reports = ([r.to_dict() for r in checks] + [d for ds in theorems.values() for d in ds]
                   + tags)
    header = {} if deterministic else {
        "timestamp": _dt.datetime.now(_dt.timezone.utc).isoformat(timespec="seconds")}
    report = {
        "header": header,
        "config_hash": cfg.config_hash,
        "instance": cfg.entry.to_dict(),
        "sample": {"count": cfg.sample.count, "seed": cfg.sample.seed,
                   "x_box": [list(b) for b in (cfg.sample.x_box or cfg.entry.box())],
                   "y_scale": list(cfg.sample.y_scale)},
        "checks": sorted((r.to_dict() for r in checks), key=lambda d: d["id"]),
        "summary": {"total": len(all_reports),
                    "failed": sum(not d["pass"] for d in all_reports)},
    }
    if theorems:
        report["theorems"] = theorems
    if tags:
        report["tags"] = tags
    return report


def dump_report(report: dict) -> str:
    return json.dumps(report, indent=2, sort_keys=True) + "\n"


def cmd_verify(args) -> int:
    cfg = load_config(args.config)
    report = build_report(cfg, deterministic=args.deterministic)
    text = dump_report(report)
    if args.out:
        Path(args.out).write_text(text)
    else:
        sys.stdout.write(text)
    for d in report["checks"] + [d for ds in report.get("theorems", {}).values() for d in ds] \
            + report.get("tags", []):
        if not d["pass"]:
            print(f"FAIL {d['id']} on {d['instance']}: max={d['max']:.3e} "
                  f"tol={d['tolerance']:.1e} ({d['expect']})", file=sys.stderr)
    return EXIT_OK if report["summary"]["failed"] == 0 else EXIT_FAIL


def jet_document(cfg: RunConfig, x, y, order: int = 4) -> dict:
    """Every frame and closed-form component at one point."""
    n = cfg.dimension
    point = SlitPoint(tuple(x), tuple(y))
    if len(point.x) != n:
        raise ConfigError("--x/--y", f"expected {n} coordinates each")
    bundle = cfg.entry.bundle
    q = bundle.quantities(point, order)
    star = bundle.star.frame(point, order)
    doc = {"instance": cfg.entry.id, "x": list(point.x), "y": list(point.y),
           "base": {k: _plain(getattr(q.fr, k)) for k in FRAME_FIELDS},
           "star_engine": {k: _plain(getattr(star, k)) for k in FRAME_FIELDS},
           "closed_form": {k: _plain(getattr(q, k)) for k in STAR_FIELDS}}
    for label, fr in (("base", q.fr), ("star_engine", star)):
        R, P, Q = fr.curvatures()
        doc[label].update({"R": _plain(R), "P": _plain(P), "Q": _plain(Q)})
    return doc


def cmd_jet(args) -> int:
    cfg = load_config(args.config)
    doc = jet_document(cfg, args.x, args.y)
    sys.stdout.write(json.dumps(doc, indent=2, sort_keys=True) + "\n")
    return EXIT_OK


def cmd_geodesic(args) -> int:
    cfg = load_config(args.config)
    if cfg.geodesic is None:
        raise ConfigError("geodesic", "geodesic section required for this command")
    job = cfg.geodesic
    out = Path(args.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    comp, base, star = compare_geodesics(cfg.entry.bundle, job.x0, job.y0, job.t_end,
                                         IntegratorConfig(rtol=job.rtol))
    write_trace_csv(base, out / "base.csv")
    write_trace_csv(star, out / "star.csv")
    summary = {"instance": cfg.entry.id, "x0": list(job.x0), "y0": list(job.y0),
               "t_end": job.t_end, "comparison": comp.to_dict(),
               "traces": {label: {"steps": tr.stats.steps, "rejected": tr.stats.rejected,
                                  "max_error_estimate": tr.stats.max_error_estimate,
                                  "speed_drift": tr.speed_drift}
                          for label, tr in (("base", base), ("star", star))}}
    text = json.dumps(summary, indent=2, sort_keys=True) + "\n"
    (out / "summary.json").write_text(text)
    sys.stdout.write(text)
    return EXIT_OK


def cmd_catalog(args) -> int:
    if args.json:
        sys.stdout.write(json.dumps([e.to_dict() for e in CATALOG.values()], indent=2) + "\n")
        return EXIT_OK
    for e in CATALOG.values():
        print(f"{e.id:20s} n={e.n}  {e.description}")
        print(f"{'':20s} L = {e.base};  b = ({', '.join(e.form)})")
        print(f"{'':20s} tags: {', '.join(sorted(e.tags)) or '-'}")
    return EXIT_OK


def make_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="gen-randers",
                                     description="Generalized Randers geometry checks.")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("verify", help="run residual checks and write a JSON report")
    p.add_argument("--config", required=True)
    p.add_argument("--out", help="report path (default: stdout)")
    p.add_argument("--deterministic", action="store_true",
                   help="leave the timestamp out of the report header")
    p.set_defaults(func=cmd_verify)

    p = sub.add_parser("jet", help="print all tensors at one point")
    p.add_argument("--config", required=True)
    p.add_argument("--x", type=float, nargs="+", required=True)
    p.add_argument("--y", type=float, nargs="+", required=True)
    p.set_defaults(func=cmd_jet)

    p = sub.add_parser("geodesic", help="compare geodesics of L and L*")
    p.add_argument("--config", required=True)
    p.add_argument("--out-dir", required=True)
    p.set_defaults(func=cmd_geodesic)

    p = sub.add_parser("catalog", help="list shipped instances")
    p.add_argument("--json", action="store_true")
    p.set_defaults(func=cmd_catalog)
    return parser


def main(argv=None) -> int:
    args = make_parser().parse_args(argv)
    try:
        return args.func(args)
    except (GeodesicError, DegenerateMetricError, JetError, InadmissibleInstanceError,
            ArithmeticError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_FAIL
    except (ConfigError, VerifyError, ValueError) as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG


if __name__ == "__main__":
    sys.exit(main())
