"""CSV tables, artifact manifests and exporters for the computed objects.

Numbers are written as ``%.16e`` (17 significant digits) so that reruns can
be compared byte for byte and reference values can be diffed meaningfully.
"""

import csv
import hashlib
import json
import math
from pathlib import Path

import numpy as np

__all__ = [
    "write_csv",
    "read_csv",
    "sha256_file",
    "write_manifest",
    "read_manifest",
    "verify_manifest",
    "family_table",
    "profile_table",
    "profile_summary",
    "ridge_table",
    "ridge_from_table",
    "predictions_table",
    "frc_table",
    "fold_table",
    "trajectory_table",
]

FLOAT_FORMAT = "%.16e"
MANIFEST_NAME = "manifest.json"


def _cell(v):
    if isinstance(v, (bool, np.bool_)):
        return "1" if v else "0"
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    if isinstance(v, (float, np.floating)):
        v = float(v)
        if math.isnan(v):
            return "nan"
        if math.isinf(v):
            return "inf" if v > 0 else "-inf"
        return FLOAT_FORMAT % v
    if v is None:
        return ""
    return str(v)


def write_csv(path, columns, rows):
    """Write a header line and one line per row; returns the path."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(columns)
        for row in rows:
            if len(row) != len(columns):
                raise ValueError(f"row has {len(row)} cells, header has {len(columns)}")
            writer.writerow([_cell(v) for v in row])
    return path


def read_csv(path):
    """Read a table written by :func:`write_csv`.

    Returns ``(columns, data)`` where ``data`` maps each column to a numpy
    array (float where every cell parses as a number, else str).
    """
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        columns = next(reader)
        rows = [r for r in reader if r]
    data = {}
    for j, name in enumerate(columns):
        cells = [r[j] for r in rows]
        try:
            data[name] = np.array([float(c) if c != "" else np.nan for c in cells], dtype=float)
        except ValueError:
            data[name] = np.array(cells, dtype=object)
    return columns, data


def sha256_file(path):
    h = hashlib.sha256()
    with open(path, "rb") as fh:
        for chunk in iter(lambda: fh.read(1 << 16), b""):
            h.update(chunk)
    return h.hexdigest()


def write_manifest(root, entries, extra=None):
    """Write ``manifest.json`` in ``root`` listing files with their sha256.

    ``entries`` are dicts with at least ``path`` (relative to root) plus any
    descriptive keys (task, kind).  Entries are sorted by path so the
    manifest is deterministic.
    """
    root = Path(root)
    files = []
    for entry in sorted(entries, key=lambda e: e["path"]):
        item = dict(entry)
        item["sha256"] = sha256_file(root / entry["path"])
        files.append(item)
    doc = {"files": files}
    if extra:
        doc.update(extra)
    path = root / MANIFEST_NAME
    path.write_text(json.dumps(doc, indent=2, sort_keys=True) + "\n")
    return path


def read_manifest(path):
    path = Path(path)
    if path.is_dir():
        path = path / MANIFEST_NAME
    doc = json.loads(path.read_text())
    if not isinstance(doc, dict) or "files" not in doc:
        raise ValueError(f"{path} is not an artifact manifest")
    return path.parent, doc


def verify_manifest(path):
    """Return the list of files whose hash no longer matches (empty if all verify)."""
    root, doc = read_manifest(path)
    bad = []
    for entry in doc["files"]:
        f = root / entry["path"]
        if not f.exists() or sha256_file(f) != entry["sha256"]:
            bad.append(entry["path"])
    return bad


# ---------------------------------------------------------------- exporters

def family_table(family, normality=None):
    """Backbone rows: lambda, tau, omega, h, a, residual, class, multipliers, base point."""
    reports = normality if normality is not None else family.normality
    n = family[0].base_point.size
    columns = ["lambda", "tau", "omega", "h", "a", "residual", "normality",
               "max_abs_multiplier", "lead_multiplier_re", "lead_multiplier_im", "liouville_defect"]
    columns += [f"xi_{i + 1}" for i in range(n)]
    rows = []
    for k, orbit in enumerate(family):
        mu = np.asarray(orbit.multipliers)
        lead = mu[np.argmax(np.abs(mu - 1.0))]
        cls = reports[k].classification if reports and reports[k] is not None else "unchecked"
        rows.append([family.parameter[k], orbit.period, orbit.frequency, orbit.energy, orbit.amplitude,
                     orbit.residual, cls, float(np.max(np.abs(mu))), lead.real, lead.imag,
                     abs(float(np.real(np.prod(mu))) - 1.0)] + list(orbit.base_point))
    return columns, rows


def profile_table(profile):
    """Melnikov profile rows: s, M(s), DM(s)."""
    return ["s", "M", "DM"], list(zip(profile.s, profile.values, profile.derivative))


def profile_summary(profile, verdict):
    """JSON-ready summary of a Melnikov profile."""
    return {
        "m": profile.m, "l": profile.l, "R": profile.R, "A": profile.A, "alpha": profile.alpha,
        "W": profile.W, "verdict": verdict, "form": profile.form,
        "zeros": [{"s": z.s, "kind": z.kind, "DM": z.dM} for z in profile.zeros],
        "quadrature_points": profile.quad_points, "quadrature_tol": profile.quad_tol,
    }


def ridge_table(ridge):
    """Ridge rows: lambda, omega, a, h, Gamma, DGamma, D2Gamma, class (then x, R, A)."""
    rows = list(zip(ridge.parameter, ridge.omega, ridge.amplitude, ridge.energy, ridge.gamma,
                    ridge.dgamma, ridge.d2gamma, ridge.classes, ridge.x, ridge.R, ridge.A))
    return ["lambda", "omega", "a", "h", "Gamma", "DGamma", "D2Gamma", "class", "x", "R", "A"], rows


def ridge_from_table(data, l=1, wrt="amplitude", window=7, band=1e-6):
    """Rebuild a RidgeCurve from :func:`ridge_table` columns (as read by :func:`read_csv`).

    Folds are placed at the flagged rows rather than at the fitted vertices,
    which is adequate for peak prediction but not for fold goldens.
    """
    from .ridge import RidgeCurve, RidgeFold

    classes = tuple(str(c) for c in data["class"])
    folds = tuple(
        RidgeFold(float(data["x"][i]), float(data["Gamma"][i]), float(data["omega"][i]),
                  float(data["a"][i]), float(data["h"][i]), c, float(data["D2Gamma"][i]))
        for i, c in enumerate(classes) if c in ("isola_birth", "simple_bifurcation"))
    return RidgeCurve(l, "lambda", data["lambda"], wrt, data["x"], data["Gamma"], data["DGamma"],
                      data["D2Gamma"], classes, data["omega"], data["a"], data["h"], data["R"],
                      data["A"], folds, (), window, band)


def predictions_table(peak_sets):
    """Prediction rows: e, lambda*, omega*, a*, class (one row per predicted point)."""
    rows = []
    for ps in peak_sets:
        for p in ps.peaks:
            rows.append([p.e, p.parameter, p.omega, p.amplitude, p.kind])
    return ["e", "lambda", "omega", "a", "class"], rows


def frc_table(branch):
    """FRC rows: Omega, a, h, E_b residual, fold flag, max |multiplier| (plus peak displacement)."""
    rows = list(zip(branch.omega, branch.amplitude, branch.energy, branch.energy_balance,
                    branch.fold, branch.max_multiplier, branch.displacement))
    return ["Omega", "a", "h", "energy_balance", "fold", "max_abs_multiplier", "max_displacement"], rows


def fold_table(path):
    """Fold-path rows: e, Omega, a."""
    return ["e", "Omega", "a"], list(zip(path.e, path.omega, path.amplitude))


def trajectory_table(trajectory):
    """Trajectory rows: t, x_1..x_n."""
    n = trajectory.x.shape[1]
    rows = [[t] + list(x) for t, x in zip(trajectory.t, trajectory.x)]
    return ["t"] + [f"x_{i + 1}" for i in range(n)], rows
