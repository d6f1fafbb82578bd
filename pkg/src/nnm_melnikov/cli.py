"""Batch driver: ``run``, ``validate-config`` and ``emit-plots``.

A run executes the configured tasks (backbone, melnikov, ridge, frc,
validate) in dependency order, writes one set of CSV/JSON/text files per
task and finishes with a ``manifest.json`` listing every file with its
sha256.  Independent tasks of the same dependency level may run
concurrently (``numerics.workers``).

Exit codes: 0 success, 2 configuration or input error, 3 numerical failure
of at least one task.  ``NNM_OUTPUT_ROOT`` replaces the config directory as
the root against which a relative ``output`` directory is resolved.
"""

import argparse
import json
import logging
import os
import sys
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path
from types import SimpleNamespace

import numpy as np

from . import io
from .config import load_config
from .exceptions import ConfigError, NNMError
from .family import ShootingOptions, _make_family, continue_family, find_periodic_orbit, seed_from_linear_mode
from .flow import resample_uniform
from .frc import continue_frc, track_folds, validate_predictions
from .melnikov import QUAD_CAP, QUAD_TOL, classify_orbit_bifurcation, melnikov_general
from .model import PerturbationSpec, builtin_model
from .ridge import build_ridge, modal_ridge, predict_peaks

__all__ = ["main", "run", "emit_plotdata", "output_dir", "ENV_OUTPUT_ROOT"]

logger = logging.getLogger(__name__)

ENV_OUTPUT_ROOT = "NNM_OUTPUT_ROOT"
EXIT_OK, EXIT_CONFIG, EXIT_NUMERICAL = 0, 2, 3
# failures that make a task (not the run) fail
_TASK_ERRORS = (NNMError, ArithmeticError, LookupError, np.linalg.LinAlgError, ValueError)


@dataclass
class TaskResult:
    id: str
    kind: str
    status: str = "ok"
    message: str = ""
    files: list = field(default_factory=list)
    value: object = None


@dataclass
class RunSummary:
    exit_code: int
    output: Path
    manifest: Path | None
    results: dict


def output_dir(config):
    """Directory receiving the artifacts of ``config``."""
    root = os.environ.get(ENV_OUTPUT_ROOT)
    if root:
        base = Path(root)
    else:
        base = config.path.parent if config.path is not None else Path.cwd()
    return base / config.output


class _Runner:
    def __init__(self, config, out):
        self.config = config
        self.out = out
        self.model = builtin_model(config.model["name"], config.model.get("params"))
        self.num = config.numerics
        self.base = config.path.parent if config.path is not None else Path.cwd()
        self.results = {}

    # ---------------------------------------------------------------- helpers
    def options(self):
        num = self.num
        return ShootingOptions(
            tol=num.get("shooting_tol", 1e-10), rtol=num.get("rtol", 1e-12), atol=num.get("atol", 1e-13),
            max_step=num.get("max_step", np.inf))

    def family_kw(self):
        return {"normality_band": self.num.get("cluster_band", 1e-6),
                "normality_guard": self.num.get("cluster_guard", 10.0)}

    def write(self, result, name, columns, rows, kind, **meta):
        io.write_csv(self.out / name, columns, rows)
        result.files.append({"path": name, "task": result.id, "kind": kind, **meta})

    def write_json(self, result, name, doc, kind):
        (self.out / name).write_text(json.dumps(doc, indent=2, sort_keys=True, default=_jsonable) + "\n")
        result.files.append({"path": name, "task": result.id, "kind": kind})

    def upstream(self, task):
        """Value of the task's ``source``: an earlier result, or a file reloaded from disk."""
        src = task["source"]
        if src in self.results:
            return self.results[src].value
        path = self.base / src
        columns, data = io.read_csv(path)
        if task["kind"] == "validate":
            return io.ridge_from_table(data)
        return self.reload_family(data)

    def reload_family(self, data):
        n = 2 * self.model.dof
        opts = self.options()
        orbits = []
        for k in range(data["tau"].size):
            xi = np.array([data[f"xi_{i + 1}"][k] for i in range(n)])
            orbits.append(find_periodic_orbit(self.model, (xi, data["tau"][k]),
                                              pin=("energy", data["h"][k]), options=opts))
        return _make_family(orbits, [None] * len(orbits), "period", "completed", None)

    # ------------------------------------------------------------------ tasks
    def backbone(self, task, result):
        opts = self.options()
        mode = task["mode"]
        kw = dict(max_points=task.get("max_points", 300), check_normality=task.get("check_normality", True),
                  options=opts, **self.family_kw())
        if "ridge_target" in task:
            family, _ = modal_ridge(self.model, mode, task["ridge_target"],
                                    seed_amplitude=task.get("seed_amplitude", 1e-6), **kw)
        else:
            bounds = {}
            if "amplitude_max" in task or "energy_max" not in task:
                bounds["amplitude"] = (0.0, task.get("amplitude_max", 1.0))
            if "energy_max" in task:
                bounds["energy"] = (0.0, task["energy_max"])
            scale = task.get("amplitude_max", 1.0)
            seed = find_periodic_orbit(self.model, seed_from_linear_mode(
                self.model, mode, task.get("seed_amplitude", 1e-3)), options=opts)
            family = continue_family(self.model, seed, bounds=bounds, ds=task.get("ds", 0.01 * scale),
                                     ds_max=task.get("ds_max", 0.03 * scale), **kw)
        cols, rows = io.family_table(family)
        self.write(result, f"{task['id']}_family.csv", cols, rows, "family")
        if self.num.get("dump_trajectories", False):
            for k, orbit in enumerate(family):
                t, x = resample_uniform(orbit.trajectory, 512, orbit.period)
                cols, rows = io.trajectory_table(SimpleNamespace(t=t, x=x))
                self.write(result, f"{task['id']}_orbit{k:03d}_trajectory.csv", cols, rows, "trajectory")
        result.value = family

    def melnikov(self, task, result):
        family = self.upstream(task)
        idx = task.get("orbit_index", 0)
        if not -len(family) <= idx < len(family):
            raise IndexError(f"orbit_index {idx} outside the family (size {len(family)})")
        orbit = family[idx]
        summary = {"orbit_index": idx, "period": orbit.period, "energy": orbit.energy,
                   "amplitude": orbit.amplitude, "profiles": []}
        for k, e in enumerate(task["e"]):
            spec = PerturbationSpec(e=e, m=task.get("m", 1), l=task.get("l", 1))
            prof = melnikov_general(None, orbit, spec, grid_size=task.get("grid_size", 64),
                                    tol=self.num.get("quad_tol", QUAD_TOL), cap=self.num.get("quad_cap", QUAD_CAP),
                                    zero_band=self.num.get("zero_band", 1e-8))
            name = f"{task['id']}_e{k}_profile.csv"
            self.write(result, name, *io.profile_table(prof), "profile")
            entry = io.profile_summary(prof, classify_orbit_bifurcation(prof))
            entry.update(e=e, file=name)
            summary["profiles"].append(entry)
        self.write_json(result, f"{task['id']}_summary.json", summary, "melnikov_summary")
        result.value = summary

    def ridge(self, task, result):
        family = self.upstream(task)
        ridge = build_ridge(family, self.model, l=task.get("l", 1), window=task.get("window", 7),
                            wrt=task.get("wrt", "amplitude"), band=self.num.get("ridge_band", 1e-6))
        self.write(result, f"{task['id']}_ridge.csv", *io.ridge_table(ridge), "ridge")
        if task.get("e"):
            sets = [predict_peaks(ridge, e) for e in task["e"]]
            self.write(result, f"{task['id']}_predictions.csv", *io.predictions_table(sets), "predictions")
        result.value = ridge

    def frc(self, task, result):
        tid = task["id"]
        summary = {"branches": [], "folds": []}
        kw = dict(periods=task.get("periods", 1), ds=task.get("ds", 0.02), ds_max=task.get("ds_max", 0.2),
                  max_points=task.get("max_points", 2000), tol=self.num.get("frc_tol", 1e-10))
        for i, e in enumerate(task["e"]):
            for j, eps in enumerate(task["eps"]):
                spec = PerturbationSpec(e=e, eps=eps)
                br = continue_frc(self.model, spec, task["omega_range"], **kw)
                name = f"{tid}_e{i}_eps{j}_frc.csv"
                self.write(result, name, *io.frc_table(br), "frc", e=e, eps=eps)
                summary["branches"].append(_branch_summary(br, name))
                if "fold_e_range" in task:
                    self._folds(task, result, spec, br, f"{tid}_e{i}_eps{j}", summary, kw)
        self.write_json(result, f"{tid}_summary.json", summary, "frc_summary")
        result.value = summary

    def _folds(self, task, result, spec, br, stem, summary, kw):
        lo, hi = sorted(task["fold_e_range"])
        target = lo if spec.e > lo else hi
        direction = -1 if target < spec.e else 1
        for k, idx in enumerate(np.flatnonzero(br.fold)):
            entry = {"branch": f"{stem}_frc.csv", "index": int(idx), "omega": float(br.omega[idx])}
            try:
                path = track_folds(self.model, spec, (br.xi[idx], br.omega[idx]), (lo, hi),
                                   periods=kw["periods"], direction=direction)
            except _TASK_ERRORS as exc:
                entry.update(status="failed", message=str(exc))
                summary["folds"].append(entry)
                continue
            name = f"{stem}_fold{k}.csv"
            self.write(result, name, *io.fold_table(path), "fold")
            entry.update(status="ok", file=name, halt=path.halt_reason, e_end=float(path.e[-1]),
                         omega_end=float(path.omega[-1]))
            if path.halt_reason == "bounds":
                # continue the response from the landed fold; a closed loop is an isola
                landed = PerturbationSpec(e=float(path.e[-1]), eps=spec.eps)
                iso = continue_frc(self.model, landed, task["omega_range"],
                                   start=(path.xi[-1], path.omega[-1]), **kw)
                bname = f"{stem}_fold{k}_branch.csv"
                self.write(result, bname, *io.frc_table(iso), "frc", e=landed.e, eps=spec.eps)
                entry.update(branch_file=bname, closed=bool(iso.closed))
            summary["folds"].append(entry)

    def validate(self, task, result):
        ridge = self.upstream(task)
        report = validate_predictions(ridge, self.model, task["e"], task["eps"], window=task.get("window", 0.15),
                                      periods=task.get("periods", 1),
                                      frc_options={"tol": self.num.get("frc_tol", 1e-10)})
        (self.out / f"{task['id']}_report.txt").write_text("\n".join(report.lines()) + "\n")
        result.files.append({"path": f"{task['id']}_report.txt", "task": task["id"], "kind": "report"})
        cols = ["prediction", "e", "eps", "kind", "omega_pred", "amp_pred", "omega_frc", "amp_frc",
                "distance", "found"]
        rows = [[r[c] if r[c] is not None else float("nan") for c in cols] for r in report.entries]
        self.write(result, f"{task['id']}_validation.csv", cols, rows, "validation")
        result.value = report
        if report.falsified:
            result.message = f"{report.falsified} prediction(s) without a matching response peak"

    # ---------------------------------------------------------------- driver
    def execute(self, task):
        result = TaskResult(task["id"], task["kind"])
        try:
            getattr(self, task["kind"])(task, result)
        except _TASK_ERRORS as exc:
            logger.error("task %s failed: %s", task["id"], exc)
            result.status, result.message = "failed", f"{type(exc).__name__}: {exc}"
        return result


def _branch_summary(br, name):
    return {"file": name, "e": br.e, "eps": br.eps, "points": len(br), "halt": br.halt_reason,
            "closed": bool(br.closed), "folds": int(np.count_nonzero(br.fold))}


def _jsonable(v):
    if isinstance(v, np.generic):
        return v.item()
    if isinstance(v, np.ndarray):
        return v.tolist()
    raise TypeError(f"cannot serialise {type(v).__name__}")


def _waves(tasks):
    """Group tasks into levels; a task's level is one more than its source's."""
    level = {}
    for t in tasks:
        src = t.get("source")
        level[t["id"]] = level[src] + 1 if src in level else 0
    depth = max(level.values()) + 1
    return [[t for t in tasks if level[t["id"]] == d] for d in range(depth)]


def run(config_path):
    """Execute a configuration file; returns a :class:`RunSummary`.

    Raises ConfigError before anything is written when the configuration is
    invalid.
    """
    config = load_config(config_path)
    out = output_dir(config)
    out.mkdir(parents=True, exist_ok=True)
    runner = _Runner(config, out)
    workers = config.numerics.get("workers", 1)
    for wave in _waves(config.tasks):
        todo = []
        for task in wave:
            src = task.get("source")
            dep = runner.results.get(src)
            if dep is not None and dep.status != "ok":
                runner.results[task["id"]] = TaskResult(task["id"], task["kind"], "skipped",
                                                        f"upstream task {src!r} {dep.status}")
            else:
                todo.append(task)
        if workers > 1 and len(todo) > 1:
            with ThreadPoolExecutor(max_workers=workers) as pool:
                done = list(pool.map(runner.execute, todo))
        else:
            done = [runner.execute(t) for t in todo]
        for r in done:
            runner.results[r.id] = r
    ordered = [runner.results[t["id"]] for t in config.tasks]
    entries = [f for r in ordered for f in r.files]
    status = {r.id: {"kind": r.kind, "status": r.status, "message": r.message} for r in ordered}
    manifest = io.write_manifest(out, entries, {"tasks": status, "model": config.model["name"]})
    code = EXIT_OK if all(r.status == "ok" for r in ordered) else EXIT_NUMERICAL
    return RunSummary(code, out, manifest, {r.id: r for r in ordered})


# ------------------------------------------------------------------- plots

def _paired(curves):
    """Columns for curves of different lengths, padded with empty cells."""
    columns = [c for name, xs, ys in curves for c in name]
    length = max(len(xs) for _, xs, _ in curves)
    rows = []
    for k in range(length):
        row = []
        for _, xs, ys in curves:
            row += [xs[k], ys[k]] if k < len(xs) else [None, None]
        rows.append(row)
    return columns, rows


def _fmt(v):
    return f"{v:g}"


_NO_PLOT = {"trajectory", "melnikov_summary", "frc_summary", "predictions", "report", "validation"}


def emit_plotdata(manifest, out=None, svg=False):
    """Write paired-column plot files for the artifacts listed in ``manifest``.

    One file per backbone (omega, a), ridge overlay (backbone amplitude and
    Gamma on a shared omega axis), Melnikov profile (s, M), FRC sweep (one
    curve per e, per eps), and ridge-vs-fold overlay (e, omega).  Returns the
    list of written paths.  Raises ValueError for an unknown artifact kind.
    """
    root, doc = io.read_manifest(manifest)
    out = Path(out) if out is not None else root / "plots"
    files = doc["files"]
    for f in files:
        if f.get("kind") not in _NO_PLOT | {"family", "ridge", "profile", "frc", "fold"}:
            raise ValueError(f"unknown artifact kind {f.get('kind')!r} for {f['path']}")
    written = []
    panels = []

    def emit(name, curves, labels):
        cols, rows = _paired(curves)
        written.append(io.write_csv(out / name, cols, rows))
        panels.append((name, curves, labels))

    def load(f):
        return io.read_csv(root / f["path"])[1]

    ridges = []
    for f in files:
        stem = Path(f["path"]).stem
        if f["kind"] == "family":
            d = load(f)
            emit(f"{stem}_backbone.csv", [(("omega", "a"), d["omega"], d["a"])], ("omega", "a"))
        elif f["kind"] == "ridge":
            d = load(f)
            ridges.append((stem, d))
            emit(f"{stem}_overlay.csv", [(("omega", "a_backbone"), d["omega"], d["a"]),
                                         (("omega_ridge", "Gamma"), d["omega"], d["Gamma"])], ("omega", "a / Gamma"))
        elif f["kind"] == "profile":
            d = load(f)
            emit(f"{stem}_plot.csv", [(("s", "M"), d["s"], d["M"])], ("s", "M"))

    # FRC sweeps: one file per (task, eps), one curve per e
    sweeps = {}
    for f in files:
        if f["kind"] == "frc":
            key = (f["task"], f.get("eps", 0.0))
            sweeps.setdefault(key, []).append((f.get("e", 0.0), Path(f["path"]).stem, load(f)))
    for k, ((task, eps), group) in enumerate(sorted(sweeps.items())):
        curves = [((f"Omega_e{_fmt(e)}", f"a_e{_fmt(e)}"), d["Omega"], d["a"]) for e, _, d in sorted(group, key=lambda g: g[:2])]
        emit(f"{task}_sweep_eps{_fmt(eps)}.csv", curves, ("Omega", "a"))

    folds = [(Path(f["path"]).stem, load(f)) for f in files if f["kind"] == "fold"]
    for rstem, r in ridges:
        for fstem, d in folds:
            emit(f"{fstem}_vs_{rstem}.csv", [(("e_ridge", "omega_ridge"), r["Gamma"], r["omega"]),
                                            (("e_fold", "omega_fold"), d["e"], d["Omega"])], ("e", "omega"))
    if svg and panels:
        written.append(_render_svg(out, panels[0]))
    return written


def _render_svg(out, panel):
    import matplotlib

    matplotlib.use("Agg")
    import matplotlib.pyplot as plt

    name, curves, labels = panel
    # fixed salt and metadata keep the file reproducible
    matplotlib.rcParams["svg.hashsalt"] = "nnm-melnikov"
    fig, ax = plt.subplots(figsize=(5, 3.5))
    for cols, xs, ys in curves:
        ax.plot(xs, ys, label=cols[1])
    ax.set_xlabel(labels[0])
    ax.set_ylabel(labels[1])
    ax.legend(fontsize="small")
    path = out / (Path(name).stem + ".svg")
    fig.savefig(path, format="svg", metadata={"Date": None, "Creator": None})
    plt.close(fig)
    return path


# --------------------------------------------------------------------- main

def _parser():
    p = argparse.ArgumentParser(prog="nnm-melnikov", description=__doc__.split("\n")[0])
    p.add_argument("-v", "--verbose", action="count", default=0)
    sub = p.add_subparsers(dest="command", required=True)
    r = sub.add_parser("run", help="execute a configuration")
    r.add_argument("config")
    v = sub.add_parser("validate-config", help="check a configuration without running it")
    v.add_argument("config")
    e = sub.add_parser("emit-plots", help="write plot-ready files for a run")
    e.add_argument("manifest")
    e.add_argument("--out", default=None, help="output directory (default: <run>/plots)")
    e.add_argument("--svg", action="store_true", help="also render the first panel as SVG")
    return p


def main(argv=None):
    args = _parser().parse_args(argv)
    logging.basicConfig(level=logging.WARNING - 10 * min(args.verbose, 2),
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        if args.command == "validate-config":
            cfg = load_config(args.config)
            print(f"{args.config}: ok ({len(cfg.tasks)} task(s), model {cfg.model['name']})")
            return EXIT_OK
        if args.command == "run":
            summary = run(args.config)
            for r in summary.results.values():
                line = f"{r.id} [{r.kind}] {r.status}"
                print(line + (f": {r.message}" if r.message else ""))
            print(f"manifest: {summary.manifest}")
            return summary.exit_code
        for path in emit_plotdata(args.manifest, args.out, args.svg):
            print(path)
        return EXIT_OK
    except ConfigError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (OSError, ValueError, KeyError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())
