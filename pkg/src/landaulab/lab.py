"""Declarative experiment configs, result bundles with provenance, and reports.

A bundle is a directory holding data files (CSV/JSON), ``schema.json``
describing every CSV column, and ``manifest.json`` recording the resolved
config, its SHA-256 over canonical JSON, per-file SHA-256 digests, seeds,
verdicts and failure flags.  Multi-theta runs write one bundle per theta
under ``theta_<value>/`` plus a parent manifest listing them.
"""

from __future__ import annotations

import configparser
import dataclasses
import hashlib
import io
import json
import logging
import math
from dataclasses import dataclass, field
from datetime import datetime, timezone
from pathlib import Path
from typing import Optional

import numpy as np

from . import __version__, analysis, experiments
from .assemble import BoundaryProfile
from .channels import parse_bc
from .geometry import GeometryKind

log = logging.getLogger(__name__)

EXPERIMENTS = ("bulk_levels", "halfplane_bands", "gap_filling_2d", "susy_ladder", "imperfect_boundary")
HASH_ALGORITHM = "sha256"
MANIFEST = "manifest.json"

EXIT_OK = 0
EXIT_VERDICT = 2
EXIT_SOLVER = 3
EXIT_CONFIG = 4
EXIT_INTEGRITY = 5


class ConfigError(ValueError):
    pass


class IntegrityError(RuntimeError):
    pass


def _opt(section, default=None, kind=float):
    return field(default=default, metadata={"section": section, "kind": kind})


@dataclass
class ExperimentConfig:
    """One experiment; ``None`` entries are resolved per theta before running."""

    experiment: str = _opt("experiment", None, str)
    geometry: str = _opt("experiment", "hyperbolic", str)
    theta: tuple = _opt("experiment", (2.2,), "floats")
    bc: tuple = _opt("experiment", ("dirichlet",), "strs")
    seed: int = _opt("experiment", 0, int)
    threads: int = _opt("experiment", 1, int)
    out: str = _opt("experiment", "results", str)
    # radial and channel grids
    n: Optional[int] = _opt("grid", None, int)
    s_max: Optional[float] = _opt("grid", None, float)
    ells: tuple = _opt("grid", (0, 1, 2, 3), "ints")
    levels: int = _opt("grid", 3, int)
    # boundary-momentum sweep
    k_min: float = _opt("sweep", -10.0)
    k_max: float = _opt("sweep", 60.0)
    bands: Optional[int] = _opt("sweep", None, int)
    refine: Optional[float] = _opt("sweep", None)
    # coverage window and resolution, shared by the 1D and 2D experiments
    window_lo: Optional[float] = _opt("analysis", None)
    window_hi: Optional[float] = _opt("analysis", None)
    delta: float = _opt("analysis", 0.05)
    subwindows: int = _opt("analysis", 10, int)
    cutoff: Optional[float] = _opt("analysis", None)
    localization: float = _opt("analysis", 0.8)
    # two-dimensional Bloch cell in Fermi coordinates
    s_lo: float = _opt("domain", -1.3)
    s_hi: float = _opt("domain", 4.5)
    period: Optional[float] = _opt("domain", None)
    shape: tuple = _opt("domain", (250, 200), "ints")
    amplitude: float = _opt("domain", 1.0)
    wavelength: float = _opt("domain", 4.0)
    bloch_phases: int = _opt("domain", 8, int)
    # tolerances
    tolerance: float = _opt("solver", 1e-8)
    level_tolerance: float = _opt("solver", 1e-3)
    susy_tolerance: float = _opt("solver", 2e-3)
    lower_bound_tolerance: float = _opt("solver", 5e-3)
    max_count: int = _opt("solver", 500, int)

    # -- serialization -------------------------------------------------------------
    def to_dict(self) -> dict:
        return {f.name: (list(v) if isinstance(v, tuple) else v)
                for f in dataclasses.fields(self) for v in [getattr(self, f.name)]}

    @classmethod
    def from_dict(cls, data: dict) -> "ExperimentConfig":
        names = {f.name: f for f in dataclasses.fields(cls)}
        unknown = set(data) - set(names)
        if unknown:
            raise ConfigError(f"unknown config keys: {sorted(unknown)}")
        kw = {k: (tuple(v) if isinstance(v, list) else v) for k, v in data.items()}
        return cls(**kw)

    def to_ini(self) -> str:
        cp = configparser.ConfigParser(interpolation=None)
        for f in dataclasses.fields(self):
            sec = f.metadata["section"]
            if not cp.has_section(sec):
                cp.add_section(sec)
            cp.set(sec, f.name, _format(getattr(self, f.name)))
        buf = io.StringIO()
        cp.write(buf)
        return buf.getvalue()

    @classmethod
    def from_ini(cls, text: str) -> "ExperimentConfig":
        cp = configparser.ConfigParser(interpolation=None)
        try:
            cp.read_string(text)
        except configparser.Error as exc:
            raise ConfigError(f"unreadable config: {exc}") from exc
        fields = {f.name: f for f in dataclasses.fields(cls)}
        kw = {}
        for sec in cp.sections():
            for key, raw in cp.items(sec):
                f = fields.get(key)
                if f is None or f.metadata["section"] != sec:
                    raise ConfigError(f"unknown key [{sec}] {key}")
                kw[key] = _parse(raw, f.metadata["kind"], key)
        return cls(**kw)

    @classmethod
    def load(cls, path) -> "ExperimentConfig":
        try:
            text = Path(path).read_text()
        except OSError as exc:
            raise ConfigError(f"cannot read config {path}: {exc}") from exc
        return cls.from_ini(text)

    def save(self, path) -> Path:
        path = Path(path)
        path.write_text(self.to_ini())
        return path

    def hash(self) -> str:
        return config_hash(self.to_dict())

    # -- validation ----------------------------------------------------------------
    def validate(self) -> "ExperimentConfig":
        def need(cond, msg):
            if not cond:
                raise ConfigError(msg)

        need(self.experiment in EXPERIMENTS, f"experiment must be one of {EXPERIMENTS}, got {self.experiment!r}")
        try:
            geo = GeometryKind.parse(self.geometry)
            for b in self.bc:
                parse_bc(b)
        except ValueError as exc:
            raise ConfigError(str(exc)) from exc
        need(len(self.theta) >= 1, "theta needs at least one value")
        need(all(math.isfinite(t) and abs(t) <= 50 for t in self.theta), "theta must be finite with |theta| <= 50")
        need(len(set(self.theta)) == len(self.theta), "theta values must be distinct")
        need(len(self.bc) >= 1, "bc needs at least one value")
        need(self.seed >= 0, "seed must be non-negative")
        need(1 <= self.threads <= 256, "threads must lie in [1, 256]")
        need(self.n is None or 16 <= self.n <= 1_000_000, "n must lie in [16, 1e6]")
        need(self.s_max is None or 0 < self.s_max <= 500, "s_max must lie in (0, 500]")
        need(len(self.ells) >= 1 and all(abs(v) <= 1000 for v in self.ells), "ells must be small integers")
        need(1 <= self.levels <= 100, "levels must lie in [1, 100]")
        need(self.k_min < self.k_max, "k_min must be below k_max")
        need(self.bands is None or 1 <= self.bands <= 200, "bands must lie in [1, 200]")
        need(self.refine is None or self.refine > 0, "refine must be positive")
        need(0 < self.delta <= 1, "delta must lie in (0, 1]")
        if self.window_lo is not None or self.window_hi is not None:
            need(self.window_lo is not None and self.window_hi is not None, "give both window_lo and window_hi")
            need(self.window_lo < self.window_hi, "window_lo must be below window_hi")
        need(1 <= self.subwindows <= 1000, "subwindows must lie in [1, 1000]")
        need(self.cutoff is None or self.cutoff > 0, "cutoff must be positive")
        need(0 < self.localization <= 1, "localization must lie in (0, 1]")
        need(self.s_lo < self.s_hi, "s_lo must be below s_hi")
        need(self.period is None or self.period > 0, "period must be positive")
        need(len(self.shape) == 2 and all(3 <= v <= 2000 for v in self.shape), "shape must be two sizes in [3, 2000]")
        need(self.amplitude >= 0, "amplitude must be non-negative")
        need(self.wavelength > 0, "wavelength must be positive")
        need(1 <= self.bloch_phases <= 256, "bloch_phases must lie in [1, 256]")
        for name in ("tolerance", "level_tolerance", "susy_tolerance", "lower_bound_tolerance"):
            need(0 < getattr(self, name) < 1, f"{name} must lie in (0, 1)")
        need(1 <= self.max_count <= 100_000, "max_count must lie in [1, 1e5]")
        if self.experiment == "susy_ladder":
            need(geo is GeometryKind.HYPERBOLIC, "susy_ladder runs on the hyperbolic plane")
        if self.experiment in ("gap_filling_2d", "imperfect_boundary"):
            need(geo is GeometryKind.HYPERBOLIC, f"{self.experiment} runs on the hyperbolic plane")
            need(len(self.bc) == 1, f"{self.experiment} takes a single boundary condition")
        return self

    def resolved(self, theta: float) -> "ExperimentConfig":
        """Single-theta copy with every automatic default filled in."""
        geo = GeometryKind.parse(self.geometry)
        kw = {"theta": (float(theta),)}
        exp = self.experiment
        if exp in ("bulk_levels", "susy_ladder"):
            kw["n"] = self.n if self.n is not None else 2000
            kw["s_max"] = self.s_max if self.s_max is not None else experiments.default_s_max(geo, theta)
        elif exp == "halfplane_bands":
            dn, ds = experiments.default_channel_grid(geo, theta)
            kw["n"] = self.n if self.n is not None else dn
            kw["s_max"] = self.s_max if self.s_max is not None else ds
            kw["bands"] = self.bands if self.bands is not None else (8 if geo is GeometryKind.HYPERBOLIC else 5)
            kw["refine"] = self.refine if self.refine is not None else self.delta
            if self.window_lo is None:
                kw["window_lo"], kw["window_hi"] = experiments.default_window(geo, theta)
        else:
            kw["period"] = self.period if self.period is not None else self.wavelength
            kw["cutoff"] = self.cutoff if self.cutoff is not None else 3.0 / math.sqrt(abs(theta))
            if self.window_lo is None:
                kw["window_lo"], kw["window_hi"] = experiments.default_cell_window(theta)
        return dataclasses.replace(self, **kw)


def _format(v) -> str:
    if v is None:
        return "auto"
    if isinstance(v, tuple):
        return ", ".join(_format(x) for x in v)
    if isinstance(v, float):
        return repr(v)
    return str(v)


def _parse(raw: str, kind, key):
    raw = raw.strip()
    try:
        if raw == "auto":
            return None
        if kind == "floats":
            return tuple(float(x) for x in raw.split(",") if x.strip())
        if kind == "ints":
            return tuple(int(x) for x in raw.split(",") if x.strip())
        if kind == "strs":
            return tuple(x.strip() for x in raw.split(",") if x.strip())
        if kind is int:
            return int(raw)
        if kind is float:
            return float(raw)
        return raw
    except ValueError as exc:
        raise ConfigError(f"bad value for {key}: {raw!r}") from exc


def canonical_json(data) -> str:
    return json.dumps(data, sort_keys=True, separators=(",", ":"), allow_nan=False)


def config_hash(data: dict) -> str:
    return hashlib.sha256(canonical_json(data).encode()).hexdigest()


def file_hash(path) -> str:
    h = hashlib.sha256()
    with open(path, "rb") as fh:
        for chunk in iter(lambda: fh.read(1 << 20), b""):
            h.update(chunk)
    return h.hexdigest()


def _theta_dir(theta: float) -> str:
    return f"theta_{theta:g}"


# -- writers ---------------------------------------------------------------------


class _Writer:
    """Collects data files and their column schema for one bundle."""

    def __init__(self, root: Path):
        self.root = root
        self.files = []
        self.schema = {}

    def csv(self, name, columns, rows, describe, fmt=None):
        path = self.root / name
        with open(path, "w", newline="") as fh:
            fh.write(",".join(columns) + "\n")
            for row in rows:
                fh.write(",".join(_cell(v) for v in row) + "\n")
        self.files.append(name)
        self.schema[name] = {"columns": [{"name": c, "description": d} for c, d in zip(columns, describe)]}
        return name

    def json(self, name, data):
        (self.root / name).write_text(json.dumps(_clean(data), indent=2, sort_keys=True) + "\n")
        self.files.append(name)
        return name

    def adopt(self, name):
        self.files.append(name)
        return name


def _cell(v) -> str:
    if isinstance(v, (bool, np.bool_)):
        return "true" if v else "false"
    if isinstance(v, (float, np.floating)):
        return "%.17g" % v
    return str(v)


def _clean(obj):
    """Replace non-finite floats so the JSON stays standard."""
    if isinstance(obj, dict):
        return {str(k): _clean(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_clean(v) for v in obj]
    if isinstance(obj, (np.floating, float)):
        v = float(obj)
        return v if math.isfinite(v) else ("inf" if v == math.inf else "-inf" if v == -math.inf else "nan")
    if isinstance(obj, (np.integer,)):
        return int(obj)
    if isinstance(obj, (np.bool_,)):
        return bool(obj)
    if isinstance(obj, np.ndarray):
        return _clean(obj.tolist())
    return obj


# -- experiment runners ----------------------------------------------------------------


def _run_bulk(cfg, th, w):
    r = experiments.bulk_levels(cfg.geometry, th, cfg.n, cfg.s_max, cfg.ells, cfg.levels, cfg.level_tolerance,
                                cfg.lower_bound_tolerance, cfg.tolerance)
    w.csv("levels.csv", ["m", "reference", "computed", "abs_error"], r.level_table,
          ["level index", "closed-form level", "nearest computed eigenvalue", "absolute difference"])
    rows = [(ell, i, E) for ell, ev in sorted(r.eigenvalues.items()) for i, E in enumerate(ev)]
    w.csv("eigenvalues.csv", ["ell", "index", "E"], rows,
          ["angular momentum sector", "eigenvalue index within the sector", "eigenvalue"])
    w.json("reference.json", r.reference.to_dict())
    summary = {"levels": [list(row) for row in r.level_table], "minimum": r.minimum,
               "spurious": r.spurious.tolist(), "max_residual": r.residual}
    return r.checks, not r.checks["solver_residuals"], summary, {**r.diagnostics}


def _run_halfplane(cfg, th, w):
    checks, failed, summary = {}, False, {"bc": {}}
    for bc in cfg.bc:
        r = experiments.halfplane_bands(cfg.geometry, th, bc, cfg.k_min, cfg.k_max, cfg.n, cfg.s_max, cfg.bands,
                                        (cfg.window_lo, cfg.window_hi), cfg.delta, cfg.refine,
                                        cfg.lower_bound_tolerance, cfg.threads)
        name = f"bands_{r.bc}.csv"
        r.bands.to_csv(w.root / name)
        w.adopt(name)
        w.adopt(f"bands_{r.bc}.json")
        w.schema[name] = {"columns": [{"name": "k", "description": "boundary momentum"}] + [
            {"name": f"E_{m}", "description": f"band {m} (ascending), NaN if the solve failed"}
            for m in range(r.bands.nbands)], "sidecar": f"bands_{r.bc}.json"}
        cov = {"coverage": r.coverage.to_dict(), "verdict": r.verdict.to_dict()}
        w.json(f"coverage_{r.bc}.json", cov)
        for key, ok in r.checks.items():
            checks[f"{key}_{r.bc}"] = ok
        failed |= not r.checks["no_failed_samples"]
        summary["bc"][r.bc] = {"verdict": r.verdict.to_dict(), "bands_csv": name, **r.diagnostics}
    return checks, failed, summary, {}


def _run_cell(cfg, th, w, profile):
    r = experiments.boundary_cell(th, cfg.geometry, profile, cfg.bc[0], (cfg.s_lo, cfg.s_hi), cfg.period,
                                  tuple(cfg.shape), cfg.bloch_phases, (cfg.window_lo, cfg.window_hi),
                                  cfg.subwindows, cfg.cutoff, cfg.localization, cfg.tolerance, cfg.max_count,
                                  cfg.seed, cfg.threads, cfg.lower_bound_tolerance)
    w.csv("states.csv", ["bloch_phase", "subwindow", "E", "boundary_fraction", "truncation_fraction", "attribution"],
          r.states, ["Bloch phase across one period", "subwindow index", "eigenvalue",
                     "mass within cutoff of the physical boundary", "mass within cutoff of the truncation boundary",
                     "physical / truncation / unattributed / bulk"])
    w.csv("windows.csv", ["subwindow", "lo", "hi", "states", "best_fraction", "passes"], r.windows,
          ["subwindow index", "lower edge", "upper edge", "eigenvalues found", "largest boundary fraction",
           "best fraction reaches the threshold"])
    summary = {"windows": [list(x) for x in r.windows], "profile": r.profile.describe(), **r.diagnostics}
    return r.checks, not r.complete, summary, {}


def _run_susy(cfg, th, w):
    r = experiments.susy_ladder(th, cfg.n, cfg.s_max, cfg.ells, cfg.susy_tolerance, cfg.tolerance)
    w.csv("ladder.csv", ["m", "lhs", "rhs", "passes"], r.ladder,
          ["level index m at theta", "lambda_m(theta) - 2 theta + 1", "lambda_{m-1}(theta - 1)", "identity holds"])
    rows = [("A", v) for v in r.susy.side_a] + [("B", v) for v in r.susy.side_b]
    w.csv("susy.csv", ["side", "value"], rows,
          ["A: spec(H_theta) - theta, B: spec(H_{theta-1}) + theta - 1 (cluster centres)", "value"])
    w.json("susy.json", r.susy.to_dict())
    summary = {"ladder": [list(x) for x in r.ladder], "max_mismatch": r.susy.max_mismatch,
               "zero_modes": r.susy.zero_modes}
    return r.checks, not r.checks["solver_residuals"], summary, {}


def _execute(cfg: ExperimentConfig, th: float, root: Path):
    w = _Writer(root)
    exp = cfg.experiment
    if exp == "bulk_levels":
        out = _run_bulk(cfg, th, w)
    elif exp == "halfplane_bands":
        out = _run_halfplane(cfg, th, w)
    elif exp == "gap_filling_2d":
        out = _run_cell(cfg, th, w, BoundaryProfile.geodesic())
    elif exp == "imperfect_boundary":
        out = _run_cell(cfg, th, w, BoundaryProfile.sinusoidal(cfg.amplitude, cfg.wavelength))
    else:
        out = _run_susy(cfg, th, w)
    return w, out


# -- bundles -----------------------------------------------------------------------------


@dataclass
class ResultBundle:
    directory: Path
    manifest: dict
    children: list = field(default_factory=list)

    @property
    def verdicts(self) -> dict:
        return self.manifest.get("verdicts", {})

    @property
    def solver_failure(self) -> bool:
        return bool(self.manifest.get("solver_failure"))

    @property
    def passed(self) -> bool:
        return bool(self.manifest.get("passed"))

    def exit_code(self) -> int:
        if self.solver_failure:
            return EXIT_SOLVER
        return EXIT_OK if self.passed else EXIT_VERDICT


def _now() -> str:
    return datetime.now(timezone.utc).isoformat(timespec="seconds")


def _run_single(cfg: ExperimentConfig, th: float, root: Path) -> ResultBundle:
    root.mkdir(parents=True, exist_ok=True)
    res = cfg.resolved(th)
    started = _now()
    try:
        w, (checks, failed, summary, extra) = _execute(res, th, root)
        error = None
    except (ArithmeticError, RuntimeError, np.linalg.LinAlgError) as exc:
        log.error("solver failure: %s", exc)
        w, checks, failed, summary, extra, error = _Writer(root), {}, True, {}, {}, str(exc)
    w.json("summary.json", summary)
    (root / "schema.json").write_text(json.dumps(w.schema, indent=2, sort_keys=True) + "\n")
    w.adopt("schema.json")
    (root / "config.ini").write_text(res.to_ini())
    w.adopt("config.ini")
    manifest = {
        "tool": "landaulab", "tool_version": __version__, "kind": "run",
        "experiment": res.experiment, "theta": float(th),
        "config": res.to_dict(), "config_hash": res.hash(), "hash_algorithm": HASH_ALGORITHM,
        "seeds": {"seed": res.seed},
        "started": started, "finished": _now(),
        "files": {name: file_hash(root / name) for name in sorted(set(w.files))},
        "verdicts": {k: bool(v) for k, v in checks.items()},
        "passed": bool(checks) and all(checks.values()) and not failed,
        "solver_failure": bool(failed), "error": error, "diagnostics": _clean(extra),
    }
    (root / MANIFEST).write_text(json.dumps(_clean(manifest), indent=2, sort_keys=True) + "\n")
    return ResultBundle(root, manifest)


def run(config: ExperimentConfig, out: Optional[str] = None) -> ResultBundle:
    """Validate, execute and persist; one sub-bundle per theta when several are given."""
    config.validate()
    root = Path(out if out is not None else config.out)
    if len(config.theta) == 1:
        return _run_single(config, config.theta[0], root)
    root.mkdir(parents=True, exist_ok=True)
    children = []
    for th in sorted(config.theta):
        children.append(_run_single(config, th, root / _theta_dir(th)))
    manifest = {
        "tool": "landaulab", "tool_version": __version__, "kind": "sweep", "experiment": config.experiment,
        "config": config.to_dict(), "config_hash": config.hash(), "hash_algorithm": HASH_ALGORITHM,
        "runs": {_theta_dir(c.manifest["theta"]): file_hash(c.directory / MANIFEST) for c in children},
        "passed": all(c.passed for c in children),
        "solver_failure": any(c.solver_failure for c in children),
        "verdicts": {_theta_dir(c.manifest["theta"]): c.passed for c in children},
    }
    (root / MANIFEST).write_text(json.dumps(manifest, indent=2, sort_keys=True) + "\n")
    return ResultBundle(root, manifest, children)


# -- report -----------------------------------------------------------------------------------


def load_manifest(directory) -> dict:
    """Read a manifest and check the config hash and every listed file digest."""
    directory = Path(directory)
    path = directory / MANIFEST
    try:
        manifest = json.loads(path.read_text())
    except (OSError, json.JSONDecodeError) as exc:
        raise IntegrityError(f"missing or corrupt manifest in {directory}: {exc}") from exc
    if manifest.get("hash_algorithm") != HASH_ALGORITHM:
        raise IntegrityError(f"unsupported hash algorithm {manifest.get('hash_algorithm')!r}")
    if config_hash(manifest.get("config", {})) != manifest.get("config_hash"):
        raise IntegrityError(f"config hash mismatch in {path}")
    listed = manifest.get("files", {}) if manifest.get("kind") == "run" else {
        f"{name}/{MANIFEST}": digest for name, digest in manifest.get("runs", {}).items()}
    for name, digest in listed.items():
        f = directory / name
        if not f.is_file():
            raise IntegrityError(f"listed file missing: {f}")
        if file_hash(f) != digest:
            raise IntegrityError(f"hash mismatch for {f}")
    return manifest


def _run_lines(manifest, summary) -> list:
    exp = manifest["experiment"]
    lines = []
    if exp == "bulk_levels":
        lines.append(f"{'m':>3} {'reference':>12} {'computed':>12} {'error':>10}")
        for m, ref, comp, err in summary.get("levels", []):
            lines.append(f"{m:>3d} {ref:>12.6f} {comp:>12.6f} {err:>10.2e}")
    elif exp == "halfplane_bands":
        lines.append(f"{'bc':<10} {'gap':<22} {'status':<11} {'uncovered':>10}")
        for bc, info in summary.get("bc", {}).items():
            for g in info["verdict"]["gaps"]:
                a, b = g["gap"]
                lines.append(f"{bc:<10} {_interval(a, b):<22} {g['status']:<11} {_num(g['uncovered_width']):>10}")
            lines.append(f"{bc:<10} bands: {info['bands_csv']}  minimum E {info['minimum']:.4f}")
    elif exp in ("gap_filling_2d", "imperfect_boundary"):
        lines.append(f"{'window':<18} {'states':>6} {'best':>7} {'pass':>5}")
        for j, lo, hi, cnt, best, ok in summary.get("windows", []):
            lines.append(f"{_interval(lo, hi):<18} {cnt:>6d} {best:>7.3f} {'yes' if ok else 'no':>5}")
    elif exp == "susy_ladder":
        lines.append(f"{'m':>3} {'lhs':>10} {'rhs':>10} {'pass':>5}")
        for m, lhs, rhs, ok in summary.get("ladder", []):
            lines.append(f"{m:>3d} {lhs:>10.6f} {_num(rhs):>10} {'yes' if ok else 'no':>5}")
        lines.append(f"partner mismatch {summary.get('max_mismatch', float('nan')):.3e}")
    return lines


def _num(v) -> str:
    return "n/a" if not isinstance(v, (int, float)) or not math.isfinite(v) else f"{v:.4g}"


def _interval(a, b) -> str:
    bs = "inf" if not isinstance(b, (int, float)) or not math.isfinite(b) else f"{b:.3f}"
    return f"({a:.3f}, {bs})"


def report(directory) -> tuple:
    """Verified summary of a bundle or sweep directory: ``(text, consolidated dict)``."""
    directory = Path(directory)
    manifest = load_manifest(directory)
    if manifest.get("kind") == "sweep":
        subs = []
        for name in sorted(manifest["runs"]):
            text, data = report(directory / name)
            subs.append(data)
        subs.sort(key=lambda d: d["theta"])
        lines = [f"experiment {manifest['experiment']} sweep over {len(subs)} theta values",
                 f"{'theta':>8} {'passed':>7} {'solver':>7}  verdicts"]
        for d in subs:
            v = ", ".join(f"{k}={'ok' if ok else 'FAIL'}" for k, ok in sorted(d["verdicts"].items()))
            lines.append(f"{d['theta']:>8g} {'yes' if d['passed'] else 'no':>7} "
                         f"{'FAIL' if d['solver_failure'] else 'ok':>7}  {v}")
        data = {"kind": "sweep", "experiment": manifest["experiment"], "passed": manifest["passed"], "runs": subs}
        return "\n".join(lines) + "\n", data
    summary_name = "summary.json"
    summary = json.loads((directory / summary_name).read_text()) if summary_name in manifest["files"] else {}
    lines = [f"experiment {manifest['experiment']} theta={manifest['theta']:g} "
             f"geometry={manifest['config']['geometry']} config={manifest['config_hash'][:12]}"]
    lines += _run_lines(manifest, summary)
    for k, ok in sorted(manifest["verdicts"].items()):
        lines.append(f"verdict {k}: {'PASS' if ok else 'FAIL'}")
    if manifest.get("solver_failure"):
        lines.append("solver failure flagged" + (f": {manifest['error']}" if manifest.get("error") else ""))
    data = {"kind": "run", "experiment": manifest["experiment"], "theta": manifest["theta"],
            "passed": manifest["passed"], "solver_failure": manifest["solver_failure"],
            "verdicts": manifest["verdicts"], "summary": summary,
            "files": sorted(manifest["files"]), "config_hash": manifest["config_hash"]}
    return "\n".join(lines) + "\n", data
