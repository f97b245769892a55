"""CSV and JSON artifacts written by the command-line tools."""

from __future__ import annotations

import csv
import io
import json
import platform
from pathlib import Path

import numpy as np

from . import __version__
from .experiments import CrosstalkMatrix, DecayFit, Scenario, SweepEntry, SweepResult
from .quantum import density_from_json

SWEEP_COLUMNS = ("scenario", "q", "strength", "concurrence", "stderr", "N")
MANIFEST_VERSION = 1


def fmt(x, digits=9) -> str:
    """Format a float with ``digits`` significant digits; '.' decimal separator."""
    x = float(x)
    if np.isnan(x):
        return "nan"
    out = f"{x:.{digits}g}"
    return "0" if out == "-0" else out


def _round(x, digits):
    return float(fmt(x, digits))


def write_csv(path, header, rows):
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(header)
    writer.writerows(rows)
    Path(path).write_text(buf.getvalue(), newline="")


def sweep_csv_rows(result: SweepResult, digits=9):
    order = {s: i for i, s in enumerate(Scenario)}
    entries = sorted(result.entries, key=lambda e: (order[e.scenario], e.q, e.strength))
    for e in entries:
        yield (
            e.scenario.value,
            str(e.q),
            fmt(e.strength, digits),
            fmt(e.concurrence, digits),
            fmt(e.stderr, digits),
            str(e.n_effective),
        )


def write_sweep_csv(result: SweepResult, path, digits=9):
    write_csv(path, SWEEP_COLUMNS, sweep_csv_rows(result, digits))


def read_sweep_csv(path):
    with open(path, newline="") as fh:
        return list(csv.DictReader(fh))


def _matrix_json(m, digits):
    return [[[_round(z.real, digits), _round(z.imag, digits)] for z in row] for row in np.asarray(m)]


def crosstalk_to_json(ct: CrosstalkMatrix, digits=9) -> dict:
    return {
        "labels": list(ct.labels),
        "probabilities": [[_round(p, digits) for p in row] for row in ct.probabilities],
    }


def crosstalk_from_json(doc) -> CrosstalkMatrix:
    return CrosstalkMatrix(tuple(doc["labels"]), np.array(doc["probabilities"], dtype=float))


def fit_to_json(fit: DecayFit, digits=9) -> dict:
    return {
        "scenario": fit.scenario.value,
        "q_values": list(fit.q_values),
        "omega_0.5": [_round(o, digits) for o in fit.omegas],
        "slope": _round(fit.slope, digits),
        "intercept": _round(fit.intercept, digits),
        "prefactor": _round(fit.prefactor, digits),
    }


def sweep_to_json(result: SweepResult, fits=None, digits=9) -> dict:
    entries = []
    for e in result.entries:
        entries.append(
            {
                "scenario": e.scenario.value,
                "q": e.q,
                "strength": _round(e.strength, digits),
                "concurrence": _round(e.concurrence, digits),
                "stderr": _round(e.stderr, digits),
                "n_effective": e.n_effective,
                "n_members": e.n_members,
                "density_matrix": {"basis": ["q,q", "q,-q", "-q,q", "-q,-q"], "rho": _matrix_json(e.density.rho, digits)},
                "crosstalk": crosstalk_to_json(e.crosstalk, digits),
            }
        )
    doc = {"entries": entries}
    if fits:
        doc["fits"] = [fit_to_json(f, digits) for f in fits.values()]
    return doc


def sweep_from_json(doc) -> SweepResult:
    """Inverse of :func:`sweep_to_json` up to the emitted precision."""
    entries = []
    for d in doc["entries"]:
        entries.append(
            SweepEntry(
                Scenario(d["scenario"]),
                int(d["q"]),
                float(d["strength"]),
                density_from_json(d["density_matrix"]),
                float(d["concurrence"]),
                float(d["stderr"]),
                crosstalk_from_json(d["crosstalk"]),
                int(d["n_effective"]),
                int(d["n_members"]),
            )
        )
    return SweepResult(entries)


def write_json(doc, path):
    Path(path).write_text(json.dumps(doc, indent=1, sort_keys=False) + "\n")


def manifest(command, config, config_hash, seed, wall_time, files) -> dict:
    return {
        "manifest_version": MANIFEST_VERSION,
        "command": command,
        "version": __version__,
        "python": platform.python_version(),
        "numpy": np.__version__,
        "config_hash": config_hash,
        "master_seed": seed,
        "wall_time_s": round(wall_time, 3),
        "files": sorted(files),
        "config": config.to_document(),
    }
