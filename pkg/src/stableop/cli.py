"""Command line front end: config parsing, check orchestration, artifacts.

Configs are JSON; every subcommand reads one with --config, runs a slice
of the verification suite, writes CSV/JSON artifacts (and small SVG
plots) into --out, and exits 0 on pass, 1 on a failed check, 2 on a
config/schema problem, and 3 on numerical breakdown.  The `run`
subcommand executes the config's whole check list in dependency order
and writes a RunReport; `report` aggregates previous RunReports.
Outputs are deterministic: no randomness is consumed anywhere in the
check paths, and the config hash is recorded in every report.
"""

from __future__ import annotations

import argparse
import csv
import hashlib
import json
import sys
import time
from pathlib import Path

import numpy as np

from .measure import OperatorSpec, measure_from_json, nondegeneracy_constant
from .modulus import (Modulus, check_modulus_properties, dini_integral,
                      modulus_from_json, upgrade_modulus)
from .zeta import (build_zeta_nopub, build_zeta_pub, check_zeta,
                   touching_gap, touching_function_params)
from .operator import (EvaluationPlan, ProfiledFunction, apply,
                       subharmonicity_margin)
from .geometry import (build_barrier, domain_from_json, intermediate_integral,
                       regularized_distance)
from .solver import (boundary_rate_fit, hopf_margin, linfty_check,
                     s1_limit_compare, solve_dirichlet)

EXIT_OK = 0
EXIT_CHECK_FAILED = 1
EXIT_SCHEMA = 2
EXIT_NUMERIC = 3


class SchemaError(Exception):
    pass


# ---------------------------------------------------------------------------
# config plumbing
# ---------------------------------------------------------------------------

def _config_hash(cfg: dict) -> str:
    canon = json.dumps(cfg, sort_keys=True, separators=(",", ":"))
    return hashlib.sha256(canon.encode()).hexdigest()[:16]


def load_config(path: str, args=None) -> dict:
    try:
        with open(path) as fh:
            cfg = json.load(fh)
    except (OSError, json.JSONDecodeError) as exc:
        raise SchemaError(f"cannot read config {path}: {exc}") from exc
    if not isinstance(cfg, dict):
        raise SchemaError("config must be a JSON object")
    if args is not None:
        if getattr(args, "s", None) is not None:
            cfg.setdefault("operator", {})["s"] = args.s
        if getattr(args, "h", None) is not None:
            cfg["h"] = args.h
        for item in getattr(args, "tolerance", None) or []:
            name, _, value = item.partition("=")
            if not value:
                raise SchemaError(f"bad --tolerance {item!r}, want name=value")
            cfg.setdefault("tolerances", {})[name] = float(value)
    validate_config(cfg)
    return cfg


_KNOWN_CHECKS = ("modulus", "zeta", "anchor", "subharmonicity", "barrier",
                 "lemma53", "solve", "rate", "hopf", "limit_s1")


def validate_config(cfg: dict) -> None:
    op = cfg.get("operator", {})
    s = op.get("s")
    if s is not None and not 0 < float(s) < 1:
        raise SchemaError(f"s must be in (0,1), got {s}")
    for name in cfg.get("checks", []):
        if name not in _KNOWN_CHECKS:
            raise SchemaError(f"unknown check {name!r}")
    if "measure" in op:
        try:
            measure_from_json(op["measure"])
        except (KeyError, ValueError) as exc:
            raise SchemaError(f"bad measure spec: {exc}") from exc
    if "modulus" in cfg:
        try:
            modulus_from_json(cfg["modulus"])
        except (KeyError, ValueError) as exc:
            raise SchemaError(f"bad modulus spec: {exc}") from exc
    if "domain" in cfg:
        try:
            domain_from_json(cfg["domain"])
        except (KeyError, ValueError) as exc:
            raise SchemaError(f"bad domain spec: {exc}") from exc


def _spec_from_config(cfg: dict) -> OperatorSpec:
    op = cfg.get("operator", {})
    if "s" not in op or "measure" not in op:
        raise SchemaError("config needs operator.s and operator.measure")
    return OperatorSpec(s=float(op["s"]),
                        measure=measure_from_json(op["measure"]),
                        pub_flag=bool(op.get("pub", False)))


def _iota(cfg):
    return float(cfg.get("iota", 1.0 / 6.0))


def _modulus_from_config(cfg: dict) -> Modulus:
    return modulus_from_json(cfg.get("modulus", {"type": "power",
                                                 "alpha": 0.3}))


def _zeta_from_config(cfg: dict, spec: OperatorSpec):
    base = _modulus_from_config(cfg)
    iota = _iota(cfg)
    om = upgrade_modulus(base, iota)
    C = float(cfg.get("zeta_C", 1.0))
    if cfg.get("operator", {}).get("pub", True):
        return build_zeta_pub(om, iota, C, spec.s)
    return build_zeta_nopub(om, spec.s, iota, C)


# ---------------------------------------------------------------------------
# artifact writers
# ---------------------------------------------------------------------------

def write_csv(path: Path, header, rows) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(header)
        for row in rows:
            w.writerow([f"{v:.12g}" if isinstance(v, float) else v
                        for v in row])


def write_json(path: Path, obj: dict) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)

    def default(o):
        if isinstance(o, np.ndarray):
            return o.tolist()
        if isinstance(o, (np.floating, np.integer)):
            return o.item()
        if isinstance(o, (np.bool_,)):
            return bool(o)
        return str(o)

    with open(path, "w") as fh:
        json.dump(obj, fh, indent=2, sort_keys=True, default=default)
        fh.write("\n")


def write_svg_lines(path: Path, curves, title="", logx=False, logy=False,
                    width=640, height=420) -> None:
    """curves: list of (xs, ys, label); a minimal self-contained plot."""
    path.parent.mkdir(parents=True, exist_ok=True)
    pad = 50
    xs_all = np.concatenate([np.asarray(c[0], float) for c in curves])
    ys_all = np.concatenate([np.asarray(c[1], float) for c in curves])
    if logx:
        xs_all = np.log10(np.maximum(xs_all, 1e-300))
    if logy:
        ys_all = np.log10(np.maximum(np.abs(ys_all), 1e-300))
    x0, x1 = float(xs_all.min()), float(xs_all.max())
    y0, y1 = float(ys_all.min()), float(ys_all.max())
    if x1 == x0:
        x1 = x0 + 1.0
    if y1 == y0:
        y1 = y0 + 1.0

    def sx(x):
        return pad + (x - x0) / (x1 - x0) * (width - 2 * pad)

    def sy(y):
        return height - pad - (y - y0) / (y1 - y0) * (height - 2 * pad)

    colors = ["#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e",
              "#8c564b"]
    parts = [f'<svg xmlns="http://www.w3.org/2000/svg" width="{width}" '
             f'height="{height}">',
             f'<rect width="{width}" height="{height}" fill="white"/>',
             f'<text x="{width / 2}" y="20" text-anchor="middle" '
             f'font-size="14">{title}</text>']
    for k, (xs, ys, label) in enumerate(curves):
        xs = np.asarray(xs, float)
        ys = np.asarray(ys, float)
        if logx:
            xs = np.log10(np.maximum(xs, 1e-300))
        if logy:
            ys = np.log10(np.maximum(np.abs(ys), 1e-300))
        pt = " ".join(f"{sx(x):.1f},{sy(y):.1f}" for x, y in zip(xs, ys))
        col = colors[k % len(colors)]
        parts.append(f'<polyline points="{pt}" fill="none" stroke="{col}" '
                     f'stroke-width="1.5"/>')
        parts.append(f'<text x="{width - pad}" y="{30 + 14 * k}" '
                     f'text-anchor="end" font-size="11" fill="{col}">'
                     f'{label}</text>')
    parts.append(f'<line x1="{pad}" y1="{height - pad}" x2="{width - pad}" '
                 f'y2="{height - pad}" stroke="black"/>')
    parts.append(f'<line x1="{pad}" y1="{pad}" x2="{pad}" '
                 f'y2="{height - pad}" stroke="black"/>')
    parts.append("</svg>")
    with open(path, "w") as fh:
        fh.write("\n".join(parts) + "\n")


# ---------------------------------------------------------------------------
# checks
# ---------------------------------------------------------------------------

def check_modulus(cfg, out: Path) -> dict:
    base = _modulus_from_config(cfg)
    iota = _iota(cfg)
    om = upgrade_modulus(base, iota)
    rep = check_modulus_properties(om, iota)
    dini = dini_integral(om)
    t = np.geomspace(1e-8, 10.0, 400)
    write_csv(out / "modulus.csv", ["t", "omega_bar", "omega_upgraded"],
              zip(t.tolist(), base(t).tolist(), om(t).tolist()))
    write_svg_lines(out / "modulus.svg",
                    [(t, base(t), "input"), (t, om(t), "upgraded")],
                    title="modulus upgrade", logx=True, logy=True)
    ok = all(v.get("ok", True) for v in rep.values() if isinstance(v, dict))
    dom_ok = bool(np.all(om(t) >= base(t) - 1e-12 * np.maximum(om(t), 1e-300)))
    return {"ok": ok and dom_ok, "properties": rep, "dominates": dom_ok,
            "dini": {"finite": dini.finite, "value": dini.value}}


def check_zeta_build(cfg, out: Path) -> dict:
    spec = _spec_from_config(cfg)
    z = _zeta_from_config(cfg, spec)
    rep = check_zeta(z)
    t = np.geomspace(1e-8, 2.0, 500)
    write_csv(out / "zeta.csv", ["t", "zeta"],
              zip(t.tolist(), z.value(t).tolist()))
    write_svg_lines(out / "zeta.svg", [(t, z.value(t), "zeta")],
                    title="zeta profile", logx=True)
    ok = all(v.get("ok", True) for v in rep.values() if isinstance(v, dict))
    return {"ok": ok, "t0": z.t0, "properties": rep}


def check_anchor(cfg, out: Path) -> dict:
    spec = _spec_from_config(cfg)
    d = spec.measure.d

    def kinks(x, th):
        roots = np.roots([1.0, 2.0 * float(x @ th), float(x @ x) - 1.0])
        return [float(np.real(r)) for r in roots
                if abs(np.imag(r)) < 1e-12 and np.real(r) > 0]

    psi = ProfiledFunction(
        fn=lambda p: np.maximum(1.0 - (p ** 2).sum(axis=1), 0.0),
        growth=0.0, kink_radii=kinks)
    value, err = apply(spec, psi, np.zeros(d))
    exact = spec.mass / spec.s
    rel = abs(value - exact) / exact
    tol = float(cfg.get("tolerances", {}).get("anchor_rel", 1e-6))
    write_csv(out / "anchor.csv",
              ["s", "measure", "value", "exact", "rel_err"],
              [[spec.s, spec.measure.variant, value, exact, rel]])
    print(f"  A psi(0) = {value:.10g}  target mass/s = {exact:.10g}  "
          f"rel err {rel:.2e}")
    return {"ok": bool(rel <= tol), "value": value, "exact": exact,
            "rel_err": rel}


def check_subharmonicity(cfg, out: Path) -> dict:
    spec = _spec_from_config(cfg)
    z = _zeta_from_config(cfg, spec)
    tg = np.geomspace(1e-4, z.t0 * 0.999, 40)
    rep = subharmonicity_margin(spec.s, z, tg)
    write_csv(out / "subharmonicity.csv", ["t", "ratio"],
              zip(rep["t"].tolist(), rep["ratio"].tolist()))
    write_svg_lines(out / "subharmonicity.svg",
                    [(rep["t"], -rep["ratio"], "-ratio")],
                    title="subharmonic margin", logx=True, logy=True)
    return {"ok": bool(rep["all_negative"]),
            "inf_neg_ratio": rep["inf_neg_ratio"]}


def check_barrier(cfg, out: Path) -> dict:
    spec = _spec_from_config(cfg)
    D = domain_from_json(cfg.get("domain", {"type": "interval"}))
    z = _zeta_from_config(cfg, spec)
    rd = regularized_distance(D)
    rows = []
    ok = True
    details = {}
    for kind in ("plus", "minus"):
        bar = build_barrier(kind, D, spec, z, rd=rd)
        dv = bar.probe_stats["dense_values_scaled"]
        sign_ok = bool(dv.min() >= 1.0 - 1e-3) if kind == "plus" \
            else bool(dv.max() <= -1.0 + 1e-3)
        ok = ok and sign_ok
        details[kind] = {"eps0": bar.eps0, "scale": bar.scale,
                         "Cl": bar.Cl, "Cu": bar.Cu, "ok": sign_ok}
        for d, v in zip(bar.probe_stats["dense_depths"], dv):
            rows.append([kind, float(d), float(v)])
        print(f"  {kind}: eps0={bar.eps0:.4g} collar operator values in "
              f"[{dv.min():.4g}, {dv.max():.4g}]")
    write_csv(out / "barrier.csv", ["kind", "depth", "operator_value"], rows)
    return {"ok": ok, **details}


def check_lemma53(cfg, out: Path) -> dict:
    s = float(cfg.get("operator", {}).get("s", 0.6))
    base = _modulus_from_config(cfg)
    D = domain_from_json(cfg.get("domain",
                                 {"type": "dini_graph",
                                  "modulus": {"type": "power",
                                              "alpha": 0.3}}))
    rd = regularized_distance(D, verify=False)
    rd.verify(omega=None, n=60)
    theta = np.asarray(cfg.get("theta", [0.6, 0.8]), dtype=float)
    rho1 = cfg.get("rho1", 0.1)
    depths = cfg.get("depths", [1e-2, 1e-3, 1e-4])
    rows = []
    ratios = []
    for d in depths:
        res = intermediate_integral(D, s, np.array([0.0, d]), theta,
                                    rho1=float(rho1), rd=rd,
                                    omega=getattr(D, "omega", base))
        rows.append([d, res["lhs"], res["rhs"], res["ratio"]])
        ratios.append(res["ratio"])
        print(f"  d={d:g}: lhs={res['lhs']:.4g} rhs={res['rhs']:.4g} "
              f"ratio={res['ratio']:.4g}")
    write_csv(out / "lemma53.csv", ["depth", "lhs", "rhs", "ratio"], rows)
    C = max(ratios)
    return {"ok": bool(np.isfinite(C)), "fitted_C": C, "ratios": ratios}


def _solve_from_config(cfg):
    spec = _spec_from_config(cfg)
    D = domain_from_json(cfg.get("domain", {"type": "interval"}))
    f = float(cfg.get("f", {}).get("constant", 1.0)) \
        if isinstance(cfg.get("f", 1.0), dict) else float(cfg.get("f", 1.0))
    h = float(cfg.get("h", (2.0 / 512 if D.d == 1 else 2.0 / 64)))
    res = solve_dirichlet(spec, D, f, h)
    return spec, D, res


def check_solve(cfg, out: Path) -> dict:
    spec, D, res = _solve_from_config(cfg)
    pts = res.u.points
    dd = D.distance(pts)
    write_csv(out / "solution.csv",
              [f"x{k}" for k in range(D.d)] + ["d", "u"],
              [list(map(float, p)) + [float(di), float(v)]
               for p, di, v in zip(pts, dd, res.u.values)])
    if D.d == 1:
        write_svg_lines(out / "solution.svg",
                        [(pts[:, 0], res.u.values, "u")],
                        title="Dirichlet solution")
    rate = boundary_rate_fit(res.u, D, d_max=0.1 * D.diam)
    lc = linfty_check(res, D, spec)
    diag = {"residual": res.residual, "positivity_ok": res.positivity_ok,
            "n_interior": res.n_interior, "rate": rate,
            "linfty": {k: v for k, v in lc.items()}}
    write_json(out / "solve_diagnostics.json", diag)
    ok = res.positivity_ok and res.residual < 1e-8 and lc["psi_ok"]
    print(f"  residual={res.residual:.2e} slope={rate['slope']:.4f} "
          f"Linf ratio={lc['ratio']:.4f}")
    return {"ok": bool(ok), **diag}


def check_rate(cfg, out: Path) -> dict:
    spec, D, res = _solve_from_config(cfg)
    rate = boundary_rate_fit(res.u, D, d_max=0.1 * D.diam)
    tol = float(cfg.get("tolerances", {}).get(
        "rate_window", 0.05 if D.d == 1 else 0.08))
    ok = abs(rate["slope"] - spec.s) <= tol
    write_csv(out / "rate.csv", ["s", "slope", "C", "n_points"],
              [[spec.s, rate["slope"], rate["C"], rate["n_points"]]])
    print(f"  slope={rate['slope']:.4f} target s={spec.s} tol={tol}")
    return {"ok": bool(ok), **rate}


def check_hopf(cfg, out: Path) -> dict:
    spec, D, res = _solve_from_config(cfg)
    lo, hi = D.bounding_box
    z = cfg.get("boundary_point")
    if z is None:
        z = [float(lo[0])] + [0.0] * (D.d - 1)
    hm = hopf_margin(res.u, D, np.asarray(z, float), spec.s)
    ok = (not hm.get("zero_solution")) and hm["margin"] > 0
    write_csv(out / "hopf.csv", ["margin", "location"],
              [[hm.get("margin"), str(hm.get("location"))]])
    print(f"  hopf margin={hm.get('margin')}")
    return {"ok": bool(ok), "margin": hm.get("margin")}


def check_limit_s1(cfg, out: Path) -> dict:
    spec = _spec_from_config(cfg)
    D = domain_from_json(cfg.get("domain", {"type": "interval"}))
    s_list = cfg.get("s_list", [0.6, 0.8, 0.9, 0.95])
    h = float(cfg.get("h", 2.0 / 512))
    rep = s1_limit_compare(spec.measure, 1.0, D, s_list, h)
    write_csv(out / "limit_s1.csv", ["s", "error", "slope"],
              [[s, rep["errors"][float(s)], rep["slopes"][float(s)]]
               for s in s_list])
    for s in s_list:
        print(f"  s={s}: error={rep['errors'][float(s)]:.5f} "
              f"slope={rep['slopes'][float(s)]:.4f}")
    return {"ok": bool(rep["errors_monotone"] and rep["slopes_increasing"]),
            "errors": rep["errors"], "slopes": rep["slopes"]}


_CHECKS = {
    "modulus": check_modulus,
    "zeta": check_zeta_build,
    "anchor": check_anchor,
    "subharmonicity": check_subharmonicity,
    "barrier": check_barrier,
    "lemma53": check_lemma53,
    "solve": check_solve,
    "rate": check_rate,
    "hopf": check_hopf,
    "limit_s1": check_limit_s1,
}
# dependency order for `run`
_CHECK_ORDER = ("modulus", "zeta", "anchor", "subharmonicity", "barrier",
                "lemma53", "solve", "rate", "hopf", "limit_s1")


def run_checks(cfg: dict, out: Path, names=None, parallel=False) -> dict:
    names = list(cfg.get("checks", [])) if names is None else list(names)
    ordered = [n for n in _CHECK_ORDER if n in names]
    report = {"config_hash": _config_hash(cfg), "name": cfg.get("name", "run"),
              "checks": {}}

    def run_one(name):
        t0 = time.time()
        try:
            res = _CHECKS[name](cfg, out)
            status = "pass" if res.get("ok") else "fail"
        except (SchemaError,):
            raise
        except Exception as exc:  # numerical breakdown
            res = {"error": f"{type(exc).__name__}: {exc}"}
            status = "error"
        return name, {"status": status, "wall_time": time.time() - t0,
                      "details": res}

    if parallel and len(ordered) > 1:
        from concurrent.futures import ThreadPoolExecutor
        with ThreadPoolExecutor(max_workers=4) as ex:
            for name, entry in ex.map(run_one, ordered):
                report["checks"][name] = entry
    else:
        for name in ordered:
            print(f"[{name}]")
            name, entry = run_one(name)
            report["checks"][name] = entry
            print(f"  -> {entry['status']} ({entry['wall_time']:.1f}s)")
    write_json(out / f"report_{report['name']}.json", report)
    return report


def aggregate_reports(out: Path) -> list:
    rows = []
    for p in sorted(out.glob("report_*.json")):
        with open(p) as fh:
            rep = json.load(fh)
        for name, entry in sorted(rep.get("checks", {}).items()):
            rows.append([rep.get("name"), name, entry["status"],
                         f"{entry['wall_time']:.2f}"])
    return rows


# ---------------------------------------------------------------------------
# entry point
# ---------------------------------------------------------------------------

def _add_common(p):
    p.add_argument("--config", required=False,
                   default=None, help="path to a JSON experiment config")
    p.add_argument("--out", default="out", help="artifact directory")
    p.add_argument("--parallel", action="store_true",
                   help="run independent checks concurrently")
    p.add_argument("--tolerance", action="append", metavar="NAME=VALUE",
                   help="override a named tolerance")
    p.add_argument("--h", type=float, default=None, help="grid spacing")
    p.add_argument("--s", type=float, default=None, help="override s")


def build_parser():
    ap = argparse.ArgumentParser(
        prog="stableop",
        description="verification suite for stable-like nonlocal operators")
    sub = ap.add_subparsers(dest="command", required=True)
    for name in ("run", "modulus", "zeta", "operator", "barrier", "lemma53",
                 "solve", "rate", "hopf", "limit-s1", "report"):
        p = sub.add_parser(name)
        _add_common(p)
        if name == "modulus":
            p.add_argument("action", nargs="?", default="check",
                           choices=["check"])
        if name == "zeta":
            p.add_argument("action", nargs="?", default="build",
                           choices=["build"])
        if name == "operator":
            p.add_argument("action", nargs="?", default="eval",
                           choices=["eval"])
        if name == "barrier":
            p.add_argument("action", nargs="?", default="verify",
                           choices=["verify"])
    return ap


_SUBCOMMAND_CHECKS = {
    "modulus": ["modulus"],
    "zeta": ["zeta"],
    "operator": ["anchor"],
    "barrier": ["barrier"],
    "lemma53": ["lemma53"],
    "solve": ["solve"],
    "rate": ["rate"],
    "hopf": ["hopf"],
    "limit-s1": ["limit_s1"],
}


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    out = Path(args.out)
    try:
        if args.command == "report":
            rows = aggregate_reports(out)
            write_csv(out / "summary.csv",
                      ["run", "check", "status", "wall_time"], rows)
            for row in rows:
                print("  ".join(str(c) for c in row))
            bad = [r for r in rows if r[2] != "pass"]
            return EXIT_CHECK_FAILED if bad else EXIT_OK
        if args.config is None:
            raise SchemaError("--config is required for this subcommand")
        cfg = load_config(args.config, args)
        names = None if args.command == "run" \
            else _SUBCOMMAND_CHECKS[args.command]
        report = run_checks(cfg, out, names=names, parallel=args.parallel)
        statuses = [e["status"] for e in report["checks"].values()]
        if any(st == "error" for st in statuses):
            return EXIT_NUMERIC
        if any(st == "fail" for st in statuses):
            return EXIT_CHECK_FAILED
        return EXIT_OK
    except SchemaError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_SCHEMA


if __name__ == "__main__":
    sys.exit(main())
