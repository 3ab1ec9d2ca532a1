"""Persistence: field snapshots, CSV time series, JSON reports, plot data.

Snapshot binary layout (little-endian)::

    bytes 0-5    magic b"DMNLS1"
    byte  6      grid kind: 0 = 1d torus, 1 = 3d radial
    bytes 7-14   u64 grid points M
    bytes 15-22  f64 half-length L (torus) or R_max (radial)
    bytes 23-30  f64 time t
    then n pairs of f64 (re, im) holding u at the grid nodes,
    n = M for the torus and M - 1 for the radial grid (r = R_max j / M, j = 1..M-1).
"""

from __future__ import annotations

import csv
import json
import struct
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np

from .diagnostics import DiagnosticsRecord
from .dispersion_map import CoverReport, DispersionMap, big_gamma, gamma_at
from .spectral_engine import ComplexField, RadialGrid3D, TorusGrid1D

__all__ = [
    "SNAPSHOT_MAGIC",
    "write_snapshot",
    "read_snapshot",
    "write_field_csv",
    "write_diagnostics_csv",
    "read_diagnostics_csv",
    "write_cover_csv",
    "write_series_csv",
    "write_report_json",
    "export_plot_data",
]

SNAPSHOT_MAGIC = b"DMNLS1"
_HEADER = struct.Struct("<6sBQdd")
_KIND_CODES = {"torus": 0, "radial": 1}


def write_snapshot(path: str | Path, t: float, field: ComplexField) -> Path:
    grid = field.grid
    extent = grid.half_length if grid.kind == "torus" else grid.r_max
    u = np.ascontiguousarray(field.u, dtype="<c16")
    path = Path(path)
    with open(path, "wb") as fh:
        fh.write(_HEADER.pack(SNAPSHOT_MAGIC, _KIND_CODES[grid.kind], grid.points, extent, float(t)))
        fh.write(u.view("<f8").tobytes())
    return path


def read_snapshot(path: str | Path) -> tuple[float, ComplexField]:
    raw = Path(path).read_bytes()
    if len(raw) < _HEADER.size:
        raise ValueError("snapshot file truncated")
    magic, kind, points, extent, t = _HEADER.unpack_from(raw)
    if magic != SNAPSHOT_MAGIC:
        raise ValueError(f"bad snapshot magic {magic!r}")
    if kind == 0:
        grid = TorusGrid1D(extent, points)
    elif kind == 1:
        grid = RadialGrid3D(extent, points)
    else:
        raise ValueError(f"unknown grid code {kind}")
    body = np.frombuffer(raw, dtype="<f8", offset=_HEADER.size)
    if body.size != 2 * grid.n_values:
        raise ValueError(f"expected {grid.n_values} values, found {body.size // 2}")
    u = body[0::2] + 1j * body[1::2]
    return t, ComplexField.from_u(grid, u)


def write_field_csv(path: str | Path, field: ComplexField, t: float | None = None) -> Path:
    grid = field.grid
    path = Path(path)
    with open(path, "w", newline="") as fh:
        fh.write(f"# dmnls-field v1, kind={grid.kind}, t={t!r}\n")
        w = csv.writer(fh)
        w.writerow(["r_or_x", "re", "im"])
        for x, u in zip(grid.nodes, field.u):
            w.writerow([repr(float(x)), repr(float(u.real)), repr(float(u.imag))])
    return path


def _cell(v) -> str:
    if v is None:
        return ""
    if isinstance(v, (int, np.integer)) and not isinstance(v, bool):
        return str(int(v))
    return repr(float(v))


def write_series_csv(path: str | Path, header: Sequence[str], rows: Iterable[Sequence], tag: str) -> Path:
    path = Path(path)
    with open(path, "w", newline="") as fh:
        fh.write(f"# dmnls-{tag} v1\n")
        w = csv.writer(fh)
        w.writerow(header)
        for row in rows:
            w.writerow([_cell(v) for v in row])
    return path


def write_diagnostics_csv(path: str | Path, records: Sequence[DiagnosticsRecord]) -> Path:
    return write_series_csv(path, DiagnosticsRecord.CSV_COLUMNS, (r.as_row() for r in records), "diagnostics")


def read_diagnostics_csv(path: str | Path) -> list[dict[str, float]]:
    with open(path) as fh:
        lines = [ln for ln in fh if not ln.startswith("#")]
    return [{k: float(v) for k, v in row.items()} for row in csv.DictReader(lines)]


def write_cover_csv(path: str | Path, reports: Sequence[CoverReport]) -> Path:
    rows = []
    for rep in reports:
        for i, (a, b) in enumerate(rep.pieces):
            rows.append([rep.n, i, a, b, rep.K_n, rep.K_gamma_bound])
    return write_series_csv(path, ["n", "piece", "t_start", "t_end", "K_n", "K_gamma"], rows, "covers")


def _encode(obj):
    if isinstance(obj, (np.floating, np.integer)):
        return obj.item()
    if isinstance(obj, np.bool_):
        return bool(obj)
    if isinstance(obj, np.ndarray):
        return obj.tolist()
    raise TypeError(f"cannot encode {type(obj).__name__}")


def write_report_json(path: str | Path, payload) -> Path:
    if hasattr(payload, "to_json"):
        payload = payload.to_json()
    path = Path(path)
    path.write_text(json.dumps(payload, indent=2, default=_encode) + "\n")
    return path


def export_plot_data(
    out_dir: str | Path,
    gmap: DispersionMap,
    periods: int = 3,
    density: int = 200,
    records: Sequence[DiagnosticsRecord] | None = None,
) -> dict[str, Path]:
    """CSV files for one period of gamma and for Gamma(t, 0) against <gamma> t.

    Breakpoints are included so the step shape of gamma is exact; the last
    row of the Gamma file sits at t = ``periods``.
    """
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    base = np.linspace(0.0, 1.0, density + 1)
    one = np.unique(np.concatenate([base, gmap.breakpoints]))
    files = {
        "gamma": write_series_csv(out / "gamma.csv", ["t", "gamma"], zip(one, gamma_at(gmap, one)), "gamma"),
    }
    t = np.unique(np.concatenate([np.linspace(0.0, periods, periods * density + 1),
                                  (gmap.breakpoints[None, :] + np.arange(periods)[:, None]).ravel()]))
    t = t[t <= periods]
    gam = big_gamma(gmap, t, 0.0)
    mean_line = gmap.average * t
    files["big_gamma"] = write_series_csv(
        out / "big_gamma.csv", ["t", "Gamma", "mean_line", "drift"],
        zip(t, gam, mean_line, np.abs(gam - mean_line)), "big-gamma",
    )
    if records:
        files["diagnostics"] = write_diagnostics_csv(out / "diagnostics.csv", records)
    return files
