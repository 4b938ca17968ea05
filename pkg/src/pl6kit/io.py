"""CSV ingestion, run configuration and deterministic report output."""

from __future__ import annotations

import csv
import hashlib
import json
import logging
import math
import os
import platform
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .errors import InputError, NumericalError
from .finestructure import FineStructureParams
from .fitting.spectrum import Spectrum
from .inference import EmitterDataset, Line

log = logging.getLogger(__name__)

CSV_KINDS = {
    "spectrum": ("x", "y", "sigma"),
    "line_list": ("emitter", "label", "offset_ghz", "sigma_ghz"),
    "decay": ("t_ns", "counts"),
    "t2_scaling": ("n_pulses", "t2_ms", "sigma_ms"),
}
OPTIONAL_COLUMNS = {"spectrum": ("sigma",)}


def sha256_file(path):
    h = hashlib.sha256()
    with open(path, "rb") as fh:
        for chunk in iter(lambda: fh.read(1 << 16), b""):
            h.update(chunk)
    return h.hexdigest()


def _rows(path):
    """Yield ``(line_number, row)`` skipping blank and ``#`` comment lines."""
    try:
        fh = open(path, newline="", encoding="utf-8")
    except OSError as exc:
        raise InputError(f"{path}: cannot open ({exc.strerror})") from exc
    with fh:
        try:
            lines = [(i, ln) for i, ln in enumerate(fh, start=1) if ln.strip() and not ln.lstrip().startswith("#")]
        except UnicodeDecodeError as exc:
            raise InputError(f"{path}: not UTF-8 text") from exc
    reader = csv.reader([ln for _, ln in lines])
    for (num, _), row in zip(lines, reader):
        yield num, [c.strip() for c in row]


def _number(path, num, col, text):
    try:
        v = float(text)
    except ValueError:
        raise InputError(f"{path}: row {num}, column {col!r}: non-numeric value {text!r}") from None
    if not math.isfinite(v):
        raise InputError(f"{path}: row {num}, column {col!r}: non-finite value {text!r}")
    return v


def read_table(path, kind):
    """Header-checked rows of a CSV of ``kind`` as a list of dicts plus line numbers."""
    if kind not in CSV_KINDS:
        raise InputError(f"unknown CSV kind {kind!r}; expected one of {sorted(CSV_KINDS)}")
    rows = list(_rows(path))
    if not rows:
        raise InputError(f"{path}: empty file")
    (_, header), body = rows[0], rows[1:]
    wanted = CSV_KINDS[kind]
    optional = OPTIONAL_COLUMNS.get(kind, ())
    missing = [c for c in wanted if c not in header and c not in optional]
    if missing:
        raise InputError(f"{path}: missing column(s) {missing}; header is {header}")
    if not body:
        raise InputError(f"{path}: no data rows")
    out = []
    for num, row in body:
        if len(row) != len(header):
            raise InputError(f"{path}: row {num}: expected {len(header)} cells, got {len(row)}")
        out.append((num, dict(zip(header, row))))
    return out


def ingest_csv(path, kind):
    """Load a CSV as a Spectrum, or a list of EmitterDataset for ``line_list``."""
    path = str(path)
    table = read_table(path, kind)
    if kind == "line_list":
        return _line_list(path, table)
    cols = [c for c in CSV_KINDS[kind] if c in table[0][1]]
    data = {c: np.array([_number(path, n, c, r[c]) for n, r in table]) for c in cols}
    meta = {"source": os.path.basename(path), "rows": len(table)}
    if kind == "spectrum":
        return Spectrum(data["x"], data["y"], data.get("sigma"), metadata=meta)
    if kind == "decay":
        if np.any(data["counts"] < 0):
            raise InputError(f"{path}: counts must be >= 0")
        return Spectrum.counts(data["t_ns"], data["counts"], x_unit="ns", y_unit="counts", metadata=meta)
    return Spectrum(data["n_pulses"], data["t2_ms"], data["sigma_ms"], x_unit="pulses", y_unit="ms", metadata=meta)


def _line_list(path, table):
    groups = {}
    for num, r in table:
        em = r["emitter"]
        if not em:
            raise InputError(f"{path}: row {num}, column 'emitter': empty")
        label = r["label"] or None
        line = Line(label, _number(path, num, "offset_ghz", r["offset_ghz"]), _number(path, num, "sigma_ghz", r["sigma_ghz"]))
        groups.setdefault(em, []).append(line)
    try:
        return [EmitterDataset(em, tuple(lines)) for em, lines in groups.items()]
    except InputError as exc:
        raise InputError(f"{path}: {exc}") from None


# --- configuration -----------------------------------------------------------

CONFIG_KEYS = ("seed", "params", "inputs", "out_dir", "options", "workers", "plots")


@dataclass
class RunConfig:
    """Validated run configuration; see ``load_config`` for the JSON form."""

    seed: int | None = None
    params: FineStructureParams = field(default_factory=FineStructureParams)
    inputs: dict = field(default_factory=dict)
    out_dir: str = "out"
    options: dict = field(default_factory=dict)
    workers: int = 1
    plots: bool = True

    def __post_init__(self):
        if self.seed is not None:
            if isinstance(self.seed, bool) or not isinstance(self.seed, int) or not 0 <= self.seed < 2**64:
                raise InputError("seed must be an unsigned 64-bit integer")
        if isinstance(self.workers, bool) or not isinstance(self.workers, int) or self.workers < 1:
            raise InputError("workers must be an integer >= 1")
        for name, p in self.inputs.items():
            if not os.path.isfile(p):
                raise InputError(f"input {name!r}: file not found: {p}")

    def require_seed(self, command):
        if self.seed is None:
            raise InputError(f"{command} is stochastic; a seed is required")
        return self.seed


def config_from_dict(raw, base_dir="."):
    if not isinstance(raw, dict):
        raise InputError("config must be a JSON object")
    unknown = sorted(set(raw) - set(CONFIG_KEYS))
    if unknown:
        raise InputError(f"unknown config key(s): {unknown}")
    kw = dict(raw)
    if "params" in kw:
        p = kw["params"]
        fields = FineStructureParams.__dataclass_fields__
        if not isinstance(p, dict) or set(p) - set(fields):
            bad = sorted(set(p) - set(fields)) if isinstance(p, dict) else p
            raise InputError(f"unknown parameter key(s): {bad}")
        try:
            kw["params"] = FineStructureParams(**{k: float(v) for k, v in p.items()})
        except (TypeError, ValueError) as exc:
            raise InputError(f"invalid params: {exc}") from None
    for key in ("inputs", "options"):
        if key in kw and not isinstance(kw[key], dict):
            raise InputError(f"{key} must be a JSON object")
    if "inputs" in kw:
        kw["inputs"] = {k: str(Path(base_dir, v)) for k, v in kw["inputs"].items()}
    return RunConfig(**kw)


def load_config(path):
    try:
        with open(path, encoding="utf-8") as fh:
            raw = json.load(fh)
    except OSError as exc:
        raise InputError(f"{path}: cannot read config ({exc.strerror})") from None
    except (json.JSONDecodeError, UnicodeDecodeError) as exc:
        raise InputError(f"{path}: invalid JSON ({exc})") from None
    return config_from_dict(raw, os.path.dirname(os.path.abspath(path)))


# --- report output -----------------------------------------------------------

@dataclass
class Table:
    name: str
    columns: tuple
    rows: list

    def __post_init__(self):
        for i, row in enumerate(self.rows):
            if len(row) != len(self.columns):
                raise InputError(f"table {self.name}: row {i} has {len(row)} cells for {len(self.columns)} columns")


def format_cell(v):
    if isinstance(v, (bool, np.bool_)):
        return "true" if v else "false"
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    if isinstance(v, (float, np.floating)):
        if not math.isfinite(v):
            raise NumericalError(f"non-finite value {v!r} in output table")
        return f"{float(v):.9g}"
    if v is None:
        return ""
    return str(v)


def render_csv(table):
    lines = [",".join(table.columns)]
    for row in table.rows:
        try:
            lines.append(",".join(format_cell(v) for v in row))
        except NumericalError as exc:
            raise NumericalError(f"table {table.name}: {exc}") from None
    return "\n".join(lines) + "\n"


@dataclass
class Report:
    command: str
    tables: list = field(default_factory=list)
    figures: dict = field(default_factory=dict)
    inputs: dict = field(default_factory=dict)
    seed: int | None = None
    notes: dict = field(default_factory=dict)
    runtime_s: float = 0.0
    outputs: dict = field(default_factory=dict)


def _versions():
    import matplotlib
    import scipy

    from . import __version__

    return {
        "pl6kit": __version__,
        "python": platform.python_version(),
        "numpy": np.__version__,
        "scipy": scipy.__version__,
        "matplotlib": matplotlib.__version__,
    }


def emit_report(report, out_dir):
    """Write tables (CSV), figures (SVG) and ``manifest.json`` to ``out_dir``.

    Every table is rendered in memory first, so a NaN or an unwritable
    directory aborts before anything is written.
    """
    out = Path(out_dir)
    try:
        out.mkdir(parents=True, exist_ok=True)
    except OSError as exc:
        raise InputError(f"cannot create output directory {out}: {exc.strerror}") from None
    if not os.access(out, os.W_OK):
        raise InputError(f"output directory {out} is not writable")
    rendered = {f"{t.name}.csv": render_csv(t) for t in report.tables}
    written = {}
    for name, text in rendered.items():
        (out / name).write_bytes(text.encode("utf-8"))
        written[name] = hashlib.sha256(text.encode("utf-8")).hexdigest()
    if report.figures:
        from .plotting import save_svg

        for name, fig in report.figures.items():
            path = out / f"{name}.svg"
            save_svg(fig, path)
            written[path.name] = sha256_file(path)
    report.outputs = written
    manifest = {
        "command": report.command,
        "seed": report.seed,
        "inputs": {k: {"path": v, "sha256": sha256_file(v)} for k, v in sorted(report.inputs.items())},
        "outputs": dict(sorted(written.items())),
        "notes": report.notes,
        "runtime_s": round(report.runtime_s, 3),
        "versions": _versions(),
    }
    (out / "manifest.json").write_text(json.dumps(manifest, indent=2, sort_keys=True) + "\n", encoding="utf-8")
    log.info("wrote %d files to %s", len(written) + 1, out)
    return report
