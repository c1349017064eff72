"""Panel files, strength reports, loading tables and Monte Carlo outputs.

Panel formats
-------------
``long_csv``
    Header ``t,i,value`` (vector) or ``t,i,j,value`` (matrix), zero-based
    indices, one row per entry. Every index triple must appear exactly once.
``stacked_csv``
    Vector panels: ``T`` lines of ``d`` values. Matrix panels: ``T`` blocks
    of ``d1`` lines with ``d2`` values, blocks separated by a blank line.
Both are accompanied by a ``<stem>.meta.json`` sidecar holding the model
type, dimensions, format and optional row/column labels.

Floats are written with 17 significant digits, which round-trips doubles
exactly.
"""

from __future__ import annotations

import csv
import io as _io
import json
from pathlib import Path

import numpy as np

from .core import MatrixPanel, StrengthReport, VectorPanel
from .errors import PanelFormatError
from .harness import MCConfig, MCTable

FLOAT_FMT = "%.17g"
PANEL_FORMATS = ("long_csv", "stacked_csv")


def sidecar_path(path) -> Path:
    path = Path(path)
    return path.with_name(path.stem + ".meta.json")


def _dump_json(obj, path):
    Path(path).write_text(json.dumps(obj, indent=2, sort_keys=True) + "\n")


def panel_meta(panel, fmt: str) -> dict:
    if isinstance(panel, VectorPanel):
        meta = {"model": "vector", "T": panel.T, "d": panel.d, "format": fmt}
        if panel.labels is not None:
            meta["labels"] = list(panel.labels)
        return meta
    meta = {"model": "matrix", "T": panel.T, "d1": panel.d1, "d2": panel.d2, "format": fmt}
    if panel.row_labels is not None:
        meta["row_labels"] = list(panel.row_labels)
    if panel.col_labels is not None:
        meta["col_labels"] = list(panel.col_labels)
    return meta


def panel_to_text(panel, fmt: str = "long_csv") -> str:
    data = panel.data
    buf = _io.StringIO()
    if fmt == "long_csv":
        idx = np.indices(data.shape).reshape(data.ndim, -1).T
        header = "t,i,value" if data.ndim == 2 else "t,i,j,value"
        buf.write(header + "\n")
        table = np.column_stack([idx.astype(float), data.reshape(-1)])
        np.savetxt(buf, table, fmt=["%d"] * data.ndim + [FLOAT_FMT], delimiter=",")
    elif fmt == "stacked_csv":
        if data.ndim == 2:
            np.savetxt(buf, data, fmt=FLOAT_FMT, delimiter=",")
        else:
            for t, slab in enumerate(data):
                if t:
                    buf.write("\n")
                np.savetxt(buf, slab, fmt=FLOAT_FMT, delimiter=",")
    else:
        raise PanelFormatError(f"unknown panel format {fmt!r}")
    return buf.getvalue()


def write_panel(panel, path, fmt: str = "long_csv") -> Path:
    """Write ``panel`` to ``path`` plus its ``.meta.json`` sidecar; returns the sidecar path."""
    path = Path(path)
    path.write_text(panel_to_text(panel, fmt))
    meta = sidecar_path(path)
    _dump_json(panel_meta(panel, fmt), meta)
    return meta


def _parse_long(text, meta):
    lines = [ln for ln in text.splitlines() if ln.strip()]
    if not lines:
        raise PanelFormatError("empty panel file")
    header = [h.strip() for h in lines[0].split(",")]
    if header not in (["t", "i", "value"], ["t", "i", "j", "value"]):
        raise PanelFormatError(f"unexpected long_csv header {lines[0]!r}")
    ncol = len(header)
    try:
        rec = np.loadtxt(_io.StringIO("\n".join(lines[1:])), delimiter=",", ndmin=2)
    except ValueError as exc:
        raise PanelFormatError(f"non-numeric entry in long_csv: {exc}") from None
    if rec.size == 0:
        raise PanelFormatError("long_csv has no data rows")
    if rec.ndim != 2 or rec.shape[1] != ncol:
        raise PanelFormatError(f"every long_csv row needs {ncol} fields")
    idx = rec[:, :-1]
    if np.any(idx < 0) or np.any(idx != np.round(idx)):
        raise PanelFormatError("indices must be non-negative integers")
    idx = idx.astype(np.int64)
    if meta:
        shape = (meta["T"], meta["d"]) if ncol == 3 else (meta["T"], meta["d1"], meta["d2"])
    else:
        shape = tuple(int(m) + 1 for m in idx.max(axis=0))
    if idx.shape[0] != int(np.prod(shape)):
        raise PanelFormatError(f"expected {int(np.prod(shape))} entries for shape {shape}, found {idx.shape[0]}")
    if np.any(idx >= np.array(shape)):
        raise PanelFormatError(f"index out of range for shape {shape}")
    data = np.full(shape, np.nan)
    seen = np.zeros(shape, dtype=bool)
    flat = np.ravel_multi_index(tuple(idx.T), shape)
    if np.unique(flat).size != flat.size:
        raise PanelFormatError("duplicate (t, i, j) index in long_csv")
    seen.flat[flat] = True
    data.flat[flat] = rec[:, -1]
    if not seen.all():
        raise PanelFormatError("long_csv index coverage is incomplete")
    return data


def _parse_stacked(text, meta):
    blocks = [b for b in text.replace("\r\n", "\n").split("\n\n") if b.strip()]
    try:
        arrays = [np.loadtxt(_io.StringIO(b), delimiter=",", ndmin=2) for b in blocks]
    except ValueError as exc:
        raise PanelFormatError(f"cannot parse stacked_csv: {exc}") from None
    if not arrays:
        raise PanelFormatError("empty panel file")
    model = meta.get("model") if meta else ("matrix" if len(arrays) > 1 else "vector")
    if model == "vector":
        if len(arrays) != 1:
            raise PanelFormatError("vector stacked_csv must be a single block")
        data = arrays[0]
    else:
        if len({a.shape for a in arrays}) != 1:
            raise PanelFormatError("stacked_csv blocks differ in shape")
        data = np.stack(arrays)
    if meta:
        shape = (meta["T"], meta["d"]) if model == "vector" else (meta["T"], meta["d1"], meta["d2"])
        if data.shape != tuple(shape):
            raise PanelFormatError(f"data shape {data.shape} disagrees with sidecar dims {tuple(shape)}")
    return data


def read_panel(path, fmt: str | None = None):
    """Read a vector or matrix panel, using the sidecar when present."""
    path = Path(path)
    meta = {}
    side = sidecar_path(path)
    try:
        if side.exists():
            meta = json.loads(side.read_text())
        text = path.read_text()
    except (OSError, json.JSONDecodeError) as exc:
        raise PanelFormatError(f"cannot read {path}: {exc}") from None
    fmt = fmt or meta.get("format")
    if fmt is None:
        fmt = "long_csv" if text.lstrip().startswith("t,") else "stacked_csv"
    if fmt == "long_csv":
        data = _parse_long(text, meta)
    elif fmt == "stacked_csv":
        data = _parse_stacked(text, meta)
    else:
        raise PanelFormatError(f"unknown panel format {fmt!r}")
    if data.ndim == 2:
        return VectorPanel(data, labels=meta.get("labels"))
    return MatrixPanel(data, row_labels=meta.get("row_labels"), col_labels=meta.get("col_labels"))


def truth_to_dict(truth, spec) -> dict:
    out = {
        "spec": spec.to_dict(),
        "realized_alpha": [a.tolist() for a in truth.realized_alpha],
        "target_alpha": [list(a) for a in truth.target_alpha],
        "loadings": [A.tolist() for A in truth.loadings],
    }
    return out


def write_truth(truth, spec, path) -> None:
    _dump_json(truth_to_dict(truth, spec), path)


def report_to_dict(report: StrengthReport) -> dict:
    return {
        "mode": report.mode,
        "dimension": report.dimension,
        "alpha_hat": report.alpha_hat.tolist(),
        "d_hat": report.d_hat.tolist(),
        "g_hat": report.g_hat,
        "warnings": list(report.warnings),
        "diagnostics": dict(report.diagnostics),
    }


def report_from_dict(raw: dict) -> StrengthReport:
    return StrengthReport(
        alpha_hat=np.array(raw["alpha_hat"], dtype=float),
        d_hat=np.array(raw["d_hat"], dtype=float),
        mode=raw["mode"],
        dimension=int(raw["dimension"]),
        g_hat=raw.get("g_hat"),
        warnings=tuple(raw.get("warnings", ())),
        diagnostics=dict(raw.get("diagnostics", {})),
    )


def write_report(reports, path, estimator: str, config: dict | None = None, extra: dict | None = None) -> None:
    """Strength report file: one entry per mode, plus estimator metadata and a config echo."""
    obj = {
        "estimator": estimator,
        "config": config or {},
        "reports": [report_to_dict(r) for r in reports],
    }
    if extra:
        obj["metadata"] = extra
    _dump_json(obj, path)


def read_report(path):
    """Returns ``(reports, metadata_dict)``."""
    raw = json.loads(Path(path).read_text())
    reports = tuple(report_from_dict(r) for r in raw["reports"])
    meta = {k: v for k, v in raw.items() if k != "reports"}
    return reports, meta


def loadings_to_csv(loading, label_name: str = "label") -> str:
    A = loading.A_hat
    labels = loading.labels if loading.labels is not None else [str(i) for i in range(A.shape[0])]
    buf = _io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow([label_name] + [f"factor_{j + 1}" for j in range(A.shape[1])])
    for lab, row in zip(labels, A):
        writer.writerow([lab] + [FLOAT_FMT % v for v in row])
    return buf.getvalue()


def write_loadings(loading, path, label_name: str = "label") -> None:
    Path(path).write_text(loadings_to_csv(loading, label_name))


def read_mc_config(path) -> MCConfig:
    return MCConfig.from_dict(json.loads(Path(path).read_text()))


def write_mc_table(table: MCTable, csv_path, json_path=None, config: MCConfig | None = None) -> None:
    Path(csv_path).write_text(table.to_csv())
    if json_path is not None:
        obj = {"rows": table.to_records()}
        if config is not None:
            obj["config"] = config.to_dict()
        _dump_json(obj, json_path)


def read_mc_table(path) -> MCTable:
    path = Path(path)
    if path.suffix == ".json":
        return MCTable.from_records(json.loads(path.read_text())["rows"])
    return MCTable.from_csv(path.read_text())
