"""Command line entry point: ``cat0probe {zoo,check,classify,matrix,run}``.

Exit codes: 0 when the command completed (and, for ``matrix``/``run``, every
row is coherent), 2 when the verdict matrix contains a contradiction, 3 on
any error.  Errors are printed to stderr as a JSON object.
"""

from __future__ import annotations

import argparse
import csv
import inspect
import io
import json
import sys
from pathlib import Path

from cat0probe import space_zoo
from cat0probe.cat0_checks import DEFAULT_EXTENT, cat0_suite, tolerance_profile
from cat0probe.classifiers.contraction import contraction_scan
from cat0probe.classifiers.divergence import divergence_profile
from cat0probe.classifiers.lemma31 import lemma31_dissect
from cat0probe.classifiers.morse import morse_adversarial_search
from cat0probe.errors import Cat0ProbeError, InputError
from cat0probe.experiment_harness import (
    ScenarioConfig,
    ScenarioError,
    _clean,
    _dumps,
    equivalence_matrix,
    run_scenario,
)
from cat0probe.metric_core import PathInSpace, SpaceGraph, point_at_arclength, punctured_path, seed_sequence

EXIT_OK, EXIT_INCOHERENT, EXIT_ERROR = 0, 2, 3
CLASSIFIERS = ("contract", "diverge", "morse", "lemma31")


# small helpers ------------------------------------------------------------

def _number(text: str):
    try:
        return int(text)
    except ValueError:
        return float(text)


def _floats(text: str) -> list:
    try:
        return [float(x) for x in text.split(",") if x.strip()]
    except ValueError as exc:
        raise argparse.ArgumentTypeError(f"expected comma-separated numbers, got {text!r}") from exc


def _params(pairs) -> dict:
    out = {}
    for item in pairs or []:
        key, sep, val = item.partition("=")
        if not sep or not key:
            raise InputError(f"--param expects key=value, got {item!r}")
        try:
            out[key] = _number(val)
        except ValueError as exc:
            raise InputError(f"--param {key}: not a number: {val!r}") from exc
    return out


def _csv_text(header, rows) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    w.writerows(rows)
    return buf.getvalue()


def _emit(text: str, out) -> None:
    if out:
        p = Path(out)
        p.parent.mkdir(parents=True, exist_ok=True)
        p.write_text(text)
    else:
        sys.stdout.write(text)


def _load_config(args) -> ScenarioConfig:
    cfg = ScenarioConfig.load(args.config) if args.config else ScenarioConfig.default()
    if getattr(args, "seed", None) is not None:
        cfg.seed = args.seed
    if getattr(args, "budget_cap", None) is not None:
        cfg.vertex_cap = args.budget_cap
    return cfg


def _load_graph_and_path(args):
    g = SpaceGraph.load(args.graph)
    if args.path:
        doc = json.loads(Path(args.path).read_text())
        return g, PathInSpace.from_json_dict(g, doc)
    return g, None


# zoo ----------------------------------------------------------------------

def cmd_zoo_list(args) -> int:
    rows = []
    for name, (builder, defaults) in space_zoo.FAMILIES.items():
        summary = (inspect.getdoc(builder) or "").split("\n\n")[0].replace("\n", " ")
        rows.append({"family": name, "parameters": defaults, "summary": summary})
    if args.format == "json":
        _emit(_dumps(rows), args.out)
    else:
        _emit(_csv_text(["family", "parameters", "summary"],
                        [[r["family"], json.dumps(r["parameters"], sort_keys=True), r["summary"]]
                         for r in rows]), args.out)
    return EXIT_OK


def cmd_zoo_build(args) -> int:
    cap = args.budget_cap if args.budget_cap is not None else space_zoo.DEFAULT_VERTEX_CAP
    entry = space_zoo.build(args.family, vertex_cap=cap, **_params(args.param))
    text = entry.graph.to_json() + "\n"
    _emit(text, args.out)
    if args.path_out:
        ref = Path(args.out).name if args.out else ""
        _emit(_dumps(entry.base_path.to_json_dict(ref)), args.path_out)
    if args.out:
        print(_dumps({"family": args.family, "n_vertices": entry.graph.n_vertices,
                      "n_edges": entry.graph.n_edges, "expected": entry.expected.to_dict()}), end="")
    return EXIT_OK


# check --------------------------------------------------------------------

def cmd_check(args) -> int:
    g, path = _load_graph_and_path(args)
    if path is None:
        raise InputError("--path is required for the projection check")
    mult = tolerance_profile(args.tol_profile or g.family_tag)
    mult.setdefault("extent", DEFAULT_EXTENT)
    if args.extent is not None:
        mult["extent"] = args.extent
    samples = {}
    if args.triangles is not None:
        samples["triangles"] = args.triangles
    reports = cat0_suite(g, path, mult, args.seed, samples)
    if args.format == "json":
        _emit(_dumps({"graph": str(args.graph), "multipliers": mult,
                      "reports": [r.to_dict() for r in reports]}), args.out)
    else:
        _emit(_csv_text(["check", "verdict", "samples", "worst_violation", "tolerance_used", "skipped"],
                        [[r.name, r.verdict, r.samples, _clean(r.worst_violation), r.tolerance_used,
                          r.skipped] for r in reports]), args.out)
    return EXIT_OK


# classify -----------------------------------------------------------------

def _entry_defaults(family: str) -> dict:
    for e in ScenarioConfig.default().entries:
        if e.family == family:
            return {"ladder": e.ladder, "radii": e.radii, "scales": e.scales}
    return {}


def _need(value, name: str, fallback: dict):
    if value is not None:
        return value
    if name in fallback:
        return fallback[name]
    raise InputError(f"--{name} is required for graphs of this family")


def _default_detour(g: SpaceGraph, path: PathInSpace, r: float) -> PathInSpace:
    mid = path.length / 2
    if r > mid:
        raise InputError(f"r={r:g} exceeds half the path length")
    u, v = point_at_arclength(path, mid - r), point_at_arclength(path, mid + r)
    c = point_at_arclength(path, mid)
    dc = g.distances_from(c)
    detour = punctured_path(g, u, v, c, min(r, float(dc[u]), float(dc[v])))
    if detour is None:
        raise InputError(f"no detour avoids the ball of radius {r:g}")
    return detour


def _run_classifiers(args, which) -> dict:
    g, path = _load_graph_and_path(args)
    if path is None:
        raise InputError("--path is required")
    cfg = _load_config(args)
    cc, mc = cfg.classifiers["contraction"], cfg.classifiers["morse"]
    fallback = _entry_defaults(g.family_tag)
    flat = args.flat_ratio
    slope = args.min_slope
    streams = dict(zip(CLASSIFIERS, seed_sequence(cfg.seed).spawn(len(CLASSIFIERS))))
    out = {}
    strongest = None
    if "contract" in which or "morse" in which:
        bs = args.b if args.b is not None else cc["b"]
        ladder = _need(args.ladder, "ladder", fallback)
        budget = args.budget if args.budget is not None else cc["budget"]
        rep = {}
        for b, ss in zip(bs, streams["contract"].spawn(len(bs))):
            rep[float(b)] = contraction_scan(
                g, path, float(b), int(budget), ladder, ss,
                flat_ratio=flat if flat is not None else cc["flat_ratio"],
                min_slope=slope if slope is not None else cc["min_slope"])
        strongest = rep[max(rep)]
        if "contract" in which:
            out["contraction"] = {f"{b:g}": r for b, r in rep.items()}
    if "diverge" in which:
        out["divergence"] = divergence_profile(g, path, _need(args.radii, "radii", fallback),
                                               streams["diverge"])
    if "morse" in which:
        out["morse"] = morse_adversarial_search(
            g, path, args.K if args.K is not None else float(mc["K"]),
            args.L if args.L is not None else float(mc["L"]),
            _need(args.scales, "scales", fallback),
            args.morse_budget if args.morse_budget is not None else int(mc["budget"]),
            streams["morse"], contraction=strongest,
            pair_cap=args.pair_cap if args.pair_cap is not None else mc["pair_cap"],
            flat_ratio=flat if flat is not None else mc["flat_ratio"],
            min_slope=slope if slope is not None else mc["min_slope"])
    if "lemma31" in which:
        if args.r is None:
            raise InputError("--r is required for lemma31")
        if args.detour:
            detour = PathInSpace.from_json_dict(g, json.loads(Path(args.detour).read_text()))
        else:
            detour = _default_detour(g, path, args.r)
        out["lemma31"] = lemma31_dissect(g, path, detour, args.r)
    return out


def _classify_rows(reports: dict) -> list:
    rows = []
    for b, r in reports.get("contraction", {}).items():
        rows.append(["contraction", f"b={b}", r.verdict, "c_hat", _clean(r.c_hat)])
    if "divergence" in reports:
        d = reports["divergence"]
        rows.append(["divergence", "", d.growth_class, "fit_exponent", _clean(d.fit_exponent)])
    if "morse" in reports:
        m = reports["morse"]
        rows.append(["morse", f"K={m.constants['K']:g},L={m.constants['L']:g}", m.verdict,
                     "max_wander", _clean(max(m.worst_wander))])
    if "lemma31" in reports:
        w = reports["lemma31"]
        verdict = "invariants-hold" if w.invariants_hold else "invariants-violated"
        rows.append(["lemma31", f"r={w.r:g}", verdict, "pair_gap", w.pair_gap])
        rows.append(["lemma31", f"r={w.r:g}", verdict, "shortcut_len", w.shortcut_len])
    return rows


def cmd_classify(args) -> int:
    if args.which is None and not args.all:
        raise InputError("choose --all or one of: " + ", ".join(CLASSIFIERS))
    if args.which in (None, "all"):
        which = ("contract", "diverge", "morse") + (("lemma31",) if args.r is not None else ())
    else:
        which = (args.which,)
    reports = _run_classifiers(args, which)
    if args.format == "json":
        doc = {k: ({b: r.to_dict() for b, r in v.items()} if k == "contraction" else v.to_dict())
               for k, v in reports.items()}
        _emit(_dumps(doc), args.out)
    else:
        _emit(_csv_text(["classifier", "parameter", "verdict", "statistic", "value"],
                        _classify_rows(reports)), args.out)
    return EXIT_OK


# matrix and run -----------------------------------------------------------

def cmd_matrix(args) -> int:
    cfg = _load_config(args)
    entries = []
    for spec in cfg.entries:
        try:
            entry = space_zoo.build(spec.family, vertex_cap=cfg.vertex_cap, **spec.params)
        except InputError as exc:
            raise ScenarioError(f"entries[{spec.name}].params", str(exc)) from exc
        entries.append((spec, entry))
    matrix = equivalence_matrix(entries, cfg)
    _emit(_dumps(matrix.to_dict()) if args.format == "json" else matrix.to_csv(), args.out)
    return EXIT_OK if matrix.coherent else EXIT_INCOHERENT


def cmd_run(args) -> int:
    cfg = _load_config(args)
    if args.format is not None:
        cfg.formats = [args.format]
    res = run_scenario(cfg, args.out)
    if res.error is not None:
        print(_dumps(res.error), end="", file=sys.stderr)
    elif res.matrix is not None:
        sys.stdout.write(res.matrix.to_csv())
    return res.exit_code


# parser -------------------------------------------------------------------

class _Parser(argparse.ArgumentParser):
    """Usage errors exit with the error code rather than argparse's 2."""

    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_ERROR, f"{self.prog}: error: {message}\n")


def _classifier_flags(p: argparse.ArgumentParser, suppress: bool) -> None:
    d = argparse.SUPPRESS if suppress else None
    p.add_argument("--graph", default=d, help="SpaceGraph JSON file")
    p.add_argument("--path", default=d, help="path JSON file (vertex_ids)")
    p.add_argument("--config", default=d, help="scenario JSON supplying classifier defaults")
    p.add_argument("--seed", type=int, default=d)
    p.add_argument("--out", default=d)
    p.add_argument("--format", choices=("json", "csv"), default=argparse.SUPPRESS if suppress else "json")
    p.add_argument("--b", type=_floats, default=d, help="contraction parameters, e.g. 1,0.5")
    p.add_argument("--budget", type=int, default=d, help="contraction x-sample budget")
    p.add_argument("--ladder", type=_floats, default=d, help="contraction tier radii")
    p.add_argument("--radii", type=_floats, default=d, help="divergence radii")
    p.add_argument("--scales", type=_floats, default=d, help="Morse base-subpath scales")
    p.add_argument("--K", type=float, default=d)
    p.add_argument("--L", type=float, default=d)
    p.add_argument("--morse-budget", type=int, default=d, help="adversary restarts per scale")
    p.add_argument("--pair-cap", type=int, default=d, help="cap on quasi-geodesic validation pairs")
    p.add_argument("--flat-ratio", type=float, default=d)
    p.add_argument("--min-slope", type=float, default=d)
    p.add_argument("--r", type=float, default=d, help="detour-dissection radius (lemma31)")
    p.add_argument("--detour", default=d, help="detour path JSON (default: shortest punctured walk)")


def build_parser() -> argparse.ArgumentParser:
    ap = _Parser(prog="cat0probe", description=__doc__.splitlines()[0])
    sub = ap.add_subparsers(dest="command", required=True)

    zoo = sub.add_parser("zoo", help="list or build zoo spaces")
    zsub = zoo.add_subparsers(dest="zoo_command", required=True)
    zl = zsub.add_parser("list")
    zl.add_argument("--format", choices=("json", "csv"), default="csv")
    zl.add_argument("--out")
    zl.set_defaults(func=cmd_zoo_list)
    zb = zsub.add_parser("build")
    zb.add_argument("--family", required=True, choices=sorted(space_zoo.FAMILIES))
    zb.add_argument("--param", action="append", metavar="KEY=VALUE")
    zb.add_argument("--out", help="SpaceGraph JSON (default: stdout)")
    zb.add_argument("--path-out", help="also write the base path JSON here")
    zb.add_argument("--budget-cap", type=int, help="vertex budget")
    zb.set_defaults(func=cmd_zoo_build)

    ck = sub.add_parser("check", help="run the CAT(0) sample checks on a graph")
    ck.add_argument("--graph", required=True)
    ck.add_argument("--path", help="path used by the projection check")
    ck.add_argument("--suite", choices=("cat0",), default="cat0")
    ck.add_argument("--tol-profile", help="family whose calibrated tolerances apply (default: graph family)")
    ck.add_argument("--extent", type=float, help="local sampling radius in units of scale_h")
    ck.add_argument("--triangles", type=int)
    ck.add_argument("--seed", type=int, default=0)
    ck.add_argument("--format", choices=("json", "csv"), default="json")
    ck.add_argument("--out")
    ck.set_defaults(func=cmd_check)

    cl = sub.add_parser("classify", help="run path classifiers on a graph")
    _classifier_flags(cl, suppress=False)
    cl.add_argument("--all", action="store_true", help="contraction, divergence and Morse (and lemma31 with --r)")
    csub = cl.add_subparsers(dest="which")
    for name in ("all",) + CLASSIFIERS:
        _classifier_flags(csub.add_parser(name), suppress=True)
    cl.set_defaults(func=cmd_classify)

    for name, func, fmt in (("matrix", cmd_matrix, "csv"), ("run", cmd_run, None)):
        p = sub.add_parser(name, help=f"{name} over a scenario config (default: shipped zoo)")
        p.add_argument("--config")
        p.add_argument("--seed", type=int)
        p.add_argument("--out")
        p.add_argument("--format", choices=("json", "csv"), default=fmt)
        p.add_argument("--budget-cap", type=int)
        p.set_defaults(func=func)
    return ap


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except (Cat0ProbeError, ValueError, OSError) as exc:
        err = {"error": type(exc).__name__, "message": str(exc), "field": getattr(exc, "field", None)}
        print(_dumps(err), end="", file=sys.stderr)
        return EXIT_ERROR


if __name__ == "__main__":
    sys.exit(main())
