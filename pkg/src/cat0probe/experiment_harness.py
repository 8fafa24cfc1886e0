"""Scenario runner: zoo entries in, classifier reports and the verdict matrix out.

A scenario is one JSON document (see ``data/default_scenario.json``).  The
runner builds each entry, runs the contraction, divergence and Morse
classifiers (plus the CAT(0) suite when requested), assembles the
equivalence matrix and writes every artifact with a content-hashed manifest.
Nothing time- or host-dependent is written, so equal configs give
byte-identical output directories.
"""

from __future__ import annotations

import csv
import hashlib
import io
import json
import math
import platform
from dataclasses import asdict, dataclass, field
from importlib import resources
from pathlib import Path

import numba
import numpy as np
import scipy

import cat0probe
from cat0probe import space_zoo
from cat0probe.cat0_checks import cat0_suite, tolerance_profile
from cat0probe.classifiers.contraction import CONTRACTING, NOT_CONTRACTING, ContractionReport, contraction_scan
from cat0probe.classifiers.divergence import INCONCLUSIVE, DivergenceProfile, divergence_profile
from cat0probe.classifiers.morse import MORSE, NOT_MORSE, MorseReport, morse_adversarial_search
from cat0probe.errors import Cat0ProbeError, InputError
from cat0probe.metric_core import PathInSpace, UNREACHABLE
from cat0probe.space_zoo import INFINITE, QUADRATIC, Expected, ZooEntry

YES, NO = "yes", "no"
GOOD_DIVERGENCE = (QUADRATIC, INFINITE)


class ScenarioError(InputError):
    """Invalid scenario configuration; ``field`` names the offending entry."""

    def __init__(self, field_name: str, message: str):
        super().__init__(f"{field_name}: {message}")
        self.field = field_name


# configuration -----------------------------------------------------------

DEFAULT_CLASSIFIERS = {
    "contraction": {"b": [1.0, 0.5], "budget": 6000, "flat_ratio": 1.2, "min_slope": 0.25},
    "morse": {"K": 2.0, "L": 1.0, "budget": 8, "pair_cap": None, "flat_ratio": 1.2, "min_slope": 0.25},
}


@dataclass
class EntrySpec:
    name: str
    family: str
    params: dict
    ladder: list
    radii: list
    scales: list
    path: str = "base"


@dataclass
class ScenarioConfig:
    seed: int
    entries: list
    out_dir: str = "cat0probe_run"
    formats: list = field(default_factory=lambda: ["json", "csv"])
    vertex_cap: int = space_zoo.DEFAULT_VERTEX_CAP
    cat0: bool = False
    classifiers: dict = field(default_factory=lambda: json.loads(json.dumps(DEFAULT_CLASSIFIERS)))

    @classmethod
    def from_dict(cls, doc: dict, base_dir: Path | None = None) -> "ScenarioConfig":
        if not isinstance(doc, dict):
            raise ScenarioError("config", "must be a JSON object")
        if "seed" not in doc or not isinstance(doc["seed"], int) or isinstance(doc["seed"], bool):
            raise ScenarioError("seed", "an integer seed is mandatory")
        known = {"seed", "entries", "out_dir", "formats", "vertex_cap", "cat0", "classifiers"}
        extra = set(doc) - known
        if extra:
            raise ScenarioError(sorted(extra)[0], "unknown config field")
        raw = doc.get("entries")
        if not isinstance(raw, list) or not raw:
            raise ScenarioError("entries", "need at least one entry")
        entries = []
        names = set()
        for i, e in enumerate(raw):
            where = f"entries[{i}]"
            if not isinstance(e, dict):
                raise ScenarioError(where, "must be an object")
            fam = e.get("family")
            if fam not in space_zoo.FAMILIES:
                raise ScenarioError(f"{where}.family", f"unknown family {fam!r}")
            for key in ("ladder", "radii", "scales"):
                if not isinstance(e.get(key), list) or not e[key]:
                    raise ScenarioError(f"{where}.{key}", "must be a nonempty list")
            name = e.get("name", fam)
            if name in names:
                raise ScenarioError(f"{where}.name", f"duplicate entry name {name!r}")
            names.add(name)
            path = e.get("path", "base")
            if path != "base":
                p = Path(path) if base_dir is None else (base_dir / path)
                if not p.is_file():
                    raise ScenarioError(f"{where}.path", f"file not found: {p}")
                path = str(p)
            entries.append(EntrySpec(name, fam, dict(e.get("params", {})), list(e["ladder"]),
                                     list(e["radii"]), list(e["scales"]), path))
        classifiers = json.loads(json.dumps(DEFAULT_CLASSIFIERS))
        for key, val in (doc.get("classifiers") or {}).items():
            if key not in classifiers:
                raise ScenarioError(f"classifiers.{key}", "unknown classifier")
            classifiers[key].update(val)
        formats = list(doc.get("formats", ["json", "csv"]))
        if not set(formats) <= {"json", "csv"} or not formats:
            raise ScenarioError("formats", "must be a nonempty subset of ['json', 'csv']")
        return cls(seed=doc["seed"], entries=entries, out_dir=str(doc.get("out_dir", "cat0probe_run")),
                   formats=formats, vertex_cap=int(doc.get("vertex_cap", space_zoo.DEFAULT_VERTEX_CAP)),
                   cat0=bool(doc.get("cat0", False)), classifiers=classifiers)

    @classmethod
    def load(cls, path) -> "ScenarioConfig":
        path = Path(path)
        try:
            doc = json.loads(path.read_text())
        except FileNotFoundError as exc:
            raise ScenarioError("config", f"file not found: {path}") from exc
        except json.JSONDecodeError as exc:
            raise ScenarioError("config", f"invalid JSON: {exc}") from exc
        return cls.from_dict(doc, base_dir=path.parent)

    @classmethod
    def default(cls) -> "ScenarioConfig":
        doc = json.loads(resources.files("cat0probe").joinpath("data/default_scenario.json").read_text())
        return cls.from_dict(doc)

    def to_dict(self) -> dict:
        return asdict(self)

    def config_hash(self) -> str:
        return hashlib.sha256(_dumps(self.to_dict()).encode()).hexdigest()


# JSON helpers -------------------------------------------------------------

def _clean(obj):
    """Make reports JSON-safe: nan -> null, inf -> "inf", numpy scalars -> Python."""
    if isinstance(obj, dict):
        return {str(k): _clean(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_clean(v) for v in obj]
    if isinstance(obj, (np.integer,)):
        return int(obj)
    if isinstance(obj, (float, np.floating)):
        x = float(obj)
        if math.isnan(x):
            return None
        if math.isinf(x):
            return "inf" if x > 0 else "-inf"
        return x
    if isinstance(obj, np.ndarray):
        return _clean(obj.tolist())
    return obj


def _dumps(obj) -> str:
    return json.dumps(_clean(obj), indent=2, sort_keys=True) + "\n"


# verdict matrix -----------------------------------------------------------

def _yn(verdict: str) -> str:
    if verdict in (CONTRACTING, MORSE):
        return YES
    if verdict in (NOT_CONTRACTING, NOT_MORSE):
        return NO
    return INCONCLUSIVE


@dataclass
class MatrixRow:
    name: str
    family: str
    contracting: dict
    morse: str
    divergence_class: str
    coherent: bool | None
    contradictions: list
    expected: dict | None
    mismatches: list
    unresolved: list


def _b_key(b: float) -> str:
    return f"contracting(b={b:g})"


def matrix_row(name: str, family: str, contracting: dict, morse: str, divergence_class: str,
               expected: Expected | None = None) -> MatrixRow:
    """Coherence of one row of verdicts.

    ``contracting`` maps each b to yes / no / inconclusive.  The contraction
    columns and the Morse column must agree, and a yes there forces an
    at-least-quadratic or infinite divergence class.  Inconclusive entries
    never count as contradictions.
    """
    props = {_b_key(b): v for b, v in contracting.items()}
    props["morse"] = morse
    decided = {k: v for k, v in props.items() if v != INCONCLUSIVE}
    contradictions = []
    if len(set(decided.values())) > 1:
        contradictions.append("equivalent properties disagree: "
                              + ", ".join(f"{k}={v}" for k, v in sorted(decided.items())))
    if YES in decided.values() and divergence_class not in GOOD_DIVERGENCE + (INCONCLUSIVE,):
        contradictions.append(f"contracting/Morse with {divergence_class} divergence")
    evaluable = bool(decided) and (len(decided) > 1 or divergence_class != INCONCLUSIVE)
    coherent = None if not evaluable else not contradictions

    mismatches, unresolved = [], []
    exp = expected.to_dict() if expected is not None else None
    if exp is not None:
        wanted = {k: exp["contracting"] for k in props if k != "morse"}
        wanted["morse"] = exp["morse"]
        wanted["divergence_class"] = exp["divergence_class"]
        got = dict(props, divergence_class=divergence_class)
        for k in sorted(wanted):
            if got[k] == INCONCLUSIVE:
                unresolved.append(k)
            elif got[k] != wanted[k]:
                mismatches.append(f"{k}: expected {wanted[k]}, observed {got[k]}")
    return MatrixRow(name, family, {_b_key(b): v for b, v in contracting.items()}, morse,
                     divergence_class, coherent, contradictions, exp, mismatches, unresolved)


@dataclass
class EquivalenceMatrix:
    rows: list
    reports: dict = field(default_factory=dict, repr=False)

    @property
    def coherent(self) -> bool:
        """False only when some row has two decided verdicts that contradict."""
        return all(r.coherent is not False for r in self.rows)

    @property
    def evaluable(self) -> bool:
        return any(r.coherent is not None for r in self.rows)

    @property
    def expected_match(self) -> bool:
        return all(not r.mismatches and not r.unresolved for r in self.rows)

    def columns(self) -> list:
        cols = []
        for r in self.rows:
            for k in r.contracting:
                if k not in cols:
                    cols.append(k)
        return cols

    def to_dict(self) -> dict:
        return {"coherent": self.coherent, "evaluable": self.evaluable,
                "expected_match": self.expected_match, "rows": [asdict(r) for r in self.rows]}

    def to_csv(self) -> str:
        cols = self.columns()
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["name", "family", *cols, "morse", "divergence_class", "coherent",
                    "mismatches", "unresolved"])
        for r in self.rows:
            coh = "not-evaluable" if r.coherent is None else ("yes" if r.coherent else "no")
            w.writerow([r.name, r.family, *[r.contracting.get(c, "") for c in cols], r.morse,
                        r.divergence_class, coh, "; ".join(r.mismatches), "; ".join(r.unresolved)])
        return buf.getvalue()


def _entry_path(entry: ZooEntry, spec: EntrySpec) -> PathInSpace:
    if spec.path == "base":
        return entry.base_path
    return PathInSpace.from_json_dict(entry.graph, json.loads(Path(spec.path).read_text()))


def classify_entry(entry: ZooEntry, spec: EntrySpec, cfg: ScenarioConfig, seed_seq) -> dict:
    """Run every classifier on one entry; returns the reports keyed by classifier."""
    g = entry.graph
    path = _entry_path(entry, spec)
    cc, mc = cfg.classifiers["contraction"], cfg.classifiers["morse"]
    seeds = seed_seq.spawn(4)
    contraction = {}
    for b, ss in zip(cc["b"], seeds[0].spawn(len(cc["b"]))):
        contraction[float(b)] = contraction_scan(g, path, float(b), int(cc["budget"]), spec.ladder, ss,
                                                 flat_ratio=cc["flat_ratio"], min_slope=cc["min_slope"])
    strongest = contraction[max(contraction)] if contraction else None
    divergence = divergence_profile(g, path, spec.radii, seeds[1])
    morse = morse_adversarial_search(g, path, float(mc["K"]), float(mc["L"]), spec.scales,
                                     int(mc["budget"]), seeds[2], contraction=strongest,
                                     pair_cap=mc["pair_cap"], flat_ratio=mc["flat_ratio"],
                                     min_slope=mc["min_slope"])
    out = {"contraction": contraction, "divergence": divergence, "morse": morse}
    if cfg.cat0:
        tol = tolerance_profile(spec.family)
        out["cat0"] = cat0_suite(g, path, tol, seeds[3])
    return out


def _row_for(spec: EntrySpec, entry: ZooEntry, reports: dict) -> MatrixRow:
    return matrix_row(spec.name, spec.family,
                      {b: _yn(r.verdict) for b, r in reports["contraction"].items()},
                      _yn(reports["morse"].verdict), reports["divergence"].growth_class,
                      entry.expected if spec.path == "base" else None)


def equivalence_matrix(entries, cfg: ScenarioConfig) -> EquivalenceMatrix:
    """Classify each ``(EntrySpec, ZooEntry)`` pair and assemble the verdict matrix."""
    entries = list(entries)
    if not entries:
        raise InputError("need at least one entry")
    streams = np.random.SeedSequence(cfg.seed).spawn(len(entries))
    rows, reports = [], {}
    for (spec, entry), ss in zip(entries, streams):
        rep = classify_entry(entry, spec, cfg, ss)
        reports[spec.name] = rep
        rows.append(_row_for(spec, entry, rep))
    return EquivalenceMatrix(rows, reports)


# plot data ----------------------------------------------------------------

def _fmt(x: float) -> str:
    return repr(float(x))


def emit_plot_data(obj, out) -> list:
    """Write two-column ``x y`` text files for a profile or report into directory ``out``."""
    out = Path(out)
    out.mkdir(parents=True, exist_ok=True)
    files = []
    if isinstance(obj, DivergenceProfile):
        lines = ["# r detour"]
        finite = []
        for r, d in zip(obj.radii, obj.detour):
            if d == UNREACHABLE:
                lines.append(f"# r={_fmt(r)} UNREACHABLE")
            else:
                lines.append(f"{_fmt(r)} {_fmt(d)}")
                finite.append((r, d))
        files.append(_write_lines(out / "divergence.txt", lines))
        ll = ["# log(r) log(detour)"]
        if len(finite) >= 2:
            x = np.log([r for r, _ in finite])
            y = np.log([d for _, d in finite])
            slope, icept = np.polyfit(x, y, 1)
            ll.insert(0, f"# fit slope={_fmt(slope)} intercept={_fmt(icept)}")
            ll += [f"{_fmt(a)} {_fmt(b)}" for a, b in zip(x, y)]
        else:
            ll.insert(0, "# fit unavailable (fewer than two finite points)")
        files.append(_write_lines(out / "divergence_loglog.txt", ll))
    elif isinstance(obj, MorseReport):
        lines = ["# scale wander"] + [f"{_fmt(s)} {_fmt(w)}" for s, w in zip(obj.scales, obj.worst_wander)
                                      if not math.isnan(w)]
        files.append(_write_lines(out / "morse_wander.txt", lines))
    elif isinstance(obj, ContractionReport):
        lines = ["# radius c_hat"] + [f"{_fmt(t['radius'])} {_fmt(t['c_hat'])}" for t in obj.radius_ladder
                                      if t["samples"]]
        files.append(_write_lines(out / f"contraction_b{obj.b:g}.txt", lines))
    else:
        raise InputError(f"no plot data for {type(obj).__name__}")
    return files


def _write_lines(path: Path, lines) -> Path:
    path.write_text("\n".join(lines) + "\n")
    return path


# runner -------------------------------------------------------------------

@dataclass
class RunResult:
    out_dir: Path
    matrix: EquivalenceMatrix | None
    files: list
    error: dict | None = None

    @property
    def exit_code(self) -> int:
        if self.error is not None:
            return 3
        return 0 if self.matrix.coherent else 2


def _reports_doc(spec: EntrySpec, rep: dict) -> dict:
    doc = {
        "entry": spec.name,
        "family": spec.family,
        "contraction": {f"{b:g}": r.to_dict() for b, r in rep["contraction"].items()},
        "divergence": rep["divergence"].to_dict(),
        "morse": rep["morse"].to_dict(),
    }
    if "cat0" in rep:
        doc["cat0"] = [r.to_dict() for r in rep["cat0"]]
    return doc


def _reports_csv(spec: EntrySpec, rep: dict) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["classifier", "parameter", "verdict", "statistic", "value"])
    for b, r in rep["contraction"].items():
        w.writerow(["contraction", f"b={b:g}", r.verdict, "c_hat", _clean(r.c_hat)])
    d = rep["divergence"]
    w.writerow(["divergence", "", d.growth_class, "fit_exponent", _clean(d.fit_exponent)])
    m = rep["morse"]
    w.writerow(["morse", f"K={m.constants['K']:g},L={m.constants['L']:g}", m.verdict,
                "max_wander", _clean(max(m.worst_wander))])
    for c in rep.get("cat0", []):
        w.writerow(["cat0", c.name, c.verdict, "worst_violation", _clean(c.worst_violation)])
    return buf.getvalue()


def _versions() -> dict:
    return {"cat0probe": cat0probe.__version__, "numpy": np.__version__, "scipy": scipy.__version__,
            "numba": numba.__version__, "python": platform.python_version()}


def run_scenario(cfg: ScenarioConfig, out_dir=None) -> RunResult:
    """Execute a scenario and write its artifacts; see the module docstring."""
    out = Path(out_dir if out_dir is not None else cfg.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    files: list[Path] = []

    def put(rel: str, text: str):
        p = out / rel
        p.parent.mkdir(parents=True, exist_ok=True)
        p.write_text(text)
        files.append(p)

    put("config.json", _dumps(cfg.to_dict()))
    matrix, error = None, None
    try:
        streams = np.random.SeedSequence(cfg.seed).spawn(len(cfg.entries))
        rows, reports = [], {}
        for spec, ss in zip(cfg.entries, streams):
            try:
                entry = space_zoo.build(spec.family, vertex_cap=cfg.vertex_cap, **spec.params)
            except InputError as exc:
                raise ScenarioError(f"entries[{spec.name}].params", str(exc)) from exc
            put(f"graphs/{spec.name}.json", entry.graph.to_json() + "\n")
            path = _entry_path(entry, spec)
            put(f"paths/{spec.name}.json", _dumps(path.to_json_dict(f"graphs/{spec.name}.json")))
            rep = classify_entry(entry, spec, cfg, ss)
            reports[spec.name] = rep
            rows.append(_row_for(spec, entry, rep))
            if "json" in cfg.formats:
                put(f"reports/{spec.name}.json", _dumps(_reports_doc(spec, rep)))
            if "csv" in cfg.formats:
                put(f"reports/{spec.name}.csv", _reports_csv(spec, rep))
            plot_dir = out / "plots" / spec.name
            files.extend(emit_plot_data(rep["divergence"], plot_dir))
            files.extend(emit_plot_data(rep["morse"], plot_dir))
            for r in rep["contraction"].values():
                files.extend(emit_plot_data(r, plot_dir))
        matrix = EquivalenceMatrix(rows, reports)
        if "csv" in cfg.formats:
            put("matrix.csv", matrix.to_csv())
        if "json" in cfg.formats:
            put("matrix.json", _dumps(matrix.to_dict()))
    except (Cat0ProbeError, ValueError, OSError) as exc:
        error = {"error": type(exc).__name__, "message": str(exc),
                 "field": getattr(exc, "field", None)}
        put("error.json", _dumps(error))

    manifest = {
        "config_hash": cfg.config_hash(),
        "versions": _versions(),
        "partial": error is not None,
        "coherent": None if matrix is None else matrix.coherent,
        "expected_match": None if matrix is None else matrix.expected_match,
        "files": [{"path": p.relative_to(out).as_posix(),
                   "sha256": hashlib.sha256(p.read_bytes()).hexdigest()}
                  for p in sorted(set(files))],
    }
    (out / "manifest.json").write_text(_dumps(manifest))
    return RunResult(out, matrix, sorted(set(files)) + [out / "manifest.json"], error)
