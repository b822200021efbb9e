"""Plain-text readers and writers (CSV and JSON).

Floats are written with ``repr`` so every value reads back bit-exactly.
"""

from __future__ import annotations

import csv
import json
import math
from pathlib import Path

import numpy as np

from .lattice import HexAperture
from .pattern import ExcitationSet, PatternGrid, PatternMetrics, ScanMap
from .tiling import ORIENTATIONS, InvalidTilingError, Tiling, encode, tiling_from_pairs

DB_FLOOR = -100.0


class DataError(ValueError):
    """Malformed input file; the message names the file and row."""


def _fmt(x: float) -> str:
    return repr(float(x))


def _db(p: np.ndarray) -> np.ndarray:
    with np.errstate(divide="ignore"):
        return np.maximum(10.0 * np.log10(p), DB_FLOOR)


# --------------------------------------------------------------------------
# Tilings

TILING_HEADER = ["q", "orientation", "triangle_a", "triangle_b"]


def write_tiling(path, aperture: HexAperture, tiling: Tiling) -> None:
    word = encode(aperture, tiling)
    with open(path, "w", newline="") as fh:
        fh.write(f"# rings: {aperture.rings}\n")
        fh.write(f"# word: {' '.join(str(int(x)) for x in word)}\n")
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(TILING_HEADER)
        for t in tiling.tiles:
            w.writerow([t.q, t.orientation, t.triangle_a, t.triangle_b])


def read_tiling(path, aperture: HexAperture) -> Tiling:
    """Parse a tiling file and check it against the aperture.

    Overlaps and gaps raise ``InvalidTilingError`` naming the triangles.
    """
    path = Path(path)
    meta = {}
    body = []
    with open(path, newline="") as fh:
        for lineno, line in enumerate(fh, start=1):
            if line.startswith("#"):
                key, _, value = line[1:].partition(":")
                meta[key.strip()] = value.strip()
            elif line.strip():
                body.append((lineno, line))
    if not body or [c.strip() for c in body[0][1].split(",")] != TILING_HEADER:
        raise DataError(f"{path}: expected header {','.join(TILING_HEADER)}")
    if "rings" in meta and int(meta["rings"]) != aperture.rings:
        raise DataError(f"{path}: tiling is for {meta['rings']} rings, aperture has {aperture.rings}")
    pairs = []
    declared = {}
    for lineno, line in body[1:]:
        fields = [c.strip() for c in line.split(",")]
        if len(fields) != 4:
            raise DataError(f"{path}:{lineno}: expected 4 fields, got {len(fields)}")
        try:
            int(fields[0])
            a, b = int(fields[2]), int(fields[3])
        except ValueError:
            raise DataError(f"{path}:{lineno}: non-integer tile or triangle index") from None
        if fields[1] not in ORIENTATIONS:
            raise DataError(f"{path}:{lineno}: unknown orientation {fields[1]!r}")
        pairs.append((a, b))
        declared[(min(a, b), max(a, b))] = (fields[1], lineno)
    tiling = tiling_from_pairs(aperture, pairs)
    for t in tiling.tiles:
        orient, lineno = declared[(t.triangle_a, t.triangle_b)]
        if orient != t.orientation:
            raise DataError(
                f"{path}:{lineno}: tile ({t.triangle_a}, {t.triangle_b}) is {t.orientation}, file says {orient}"
            )
    if "word" in meta:
        word = [int(x) for x in meta["word"].split()]
        if word != [int(x) for x in encode(aperture, tiling)]:
            raise DataError(f"{path}: word line does not match the tiles")
    return tiling


# --------------------------------------------------------------------------
# Excitations

EXCITATION_HEADER = ["triangle_index", "amplitude", "phase_deg"]


def write_excitation(path, excitation: ExcitationSet) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(EXCITATION_HEADER)
        for k, (a, p) in enumerate(zip(excitation.amplitude, excitation.phase_deg)):
            w.writerow([k, _fmt(a), _fmt(p)])


def read_excitation(path, n_elements: int) -> ExcitationSet:
    path = Path(path)
    if not path.exists():
        raise DataError(f"{path}: no such file")
    amp = np.full(n_elements, np.nan)
    phase = np.full(n_elements, np.nan)
    with open(path, newline="") as fh:
        rows = list(csv.reader(fh))
    if not rows or [c.strip() for c in rows[0]] != EXCITATION_HEADER:
        raise DataError(f"{path}: expected header {','.join(EXCITATION_HEADER)}")
    for lineno, row in enumerate(rows[1:], start=2):
        if not row or not "".join(row).strip():
            continue
        if len(row) != 3:
            raise DataError(f"{path}:{lineno}: expected 3 fields, got {len(row)}")
        try:
            k = int(row[0])
            a, p = float(row[1]), float(row[2])
        except ValueError:
            raise DataError(f"{path}:{lineno}: cannot parse {','.join(row)!r}") from None
        if not 0 <= k < n_elements:
            raise DataError(f"{path}:{lineno}: triangle index {k} outside 0..{n_elements - 1}")
        if not np.isnan(amp[k]):
            raise DataError(f"{path}:{lineno}: triangle {k} listed twice")
        if not (math.isfinite(a) and a >= 0):
            raise DataError(f"{path}:{lineno}: amplitude must be finite and non-negative")
        if not math.isfinite(p):
            raise DataError(f"{path}:{lineno}: phase must be finite")
        amp[k], phase[k] = a, p
    missing = np.flatnonzero(np.isnan(amp))
    if missing.size:
        raise DataError(f"{path}: no row for triangles {missing.tolist()}")
    return ExcitationSet(amp, phase)


# --------------------------------------------------------------------------
# Patterns and reports


def write_pattern(path, pattern: PatternGrid) -> None:
    uu, vv = pattern.grid.mesh()
    vis = pattern.visible
    db = _db(pattern.power[vis])
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["u", "v", "power_db"])
        for u, v, p in zip(uu[vis], vv[vis], db):
            w.writerow([_fmt(u), _fmt(v), _fmt(p)])


def principal_cuts(pattern: PatternGrid, samples: int | None = None, near=(0.0, 0.0)):
    """Power along u through the peak (phi = 0) and along v (phi = 90)."""
    iv, iu = pattern.peak_index(near)
    axis = pattern.grid.axis
    u_p, v_p = float(axis[iu]), float(axis[iv])
    if samples is None:
        samples = 4 * pattern.grid.resolution + 1
    cuts = {}
    for name, fixed in (("phi0", v_p), ("phi90", u_p)):
        span = math.sqrt(max(1.0 - fixed**2, 0.0))
        t = np.linspace(-span, span, samples)
        if pattern.source is not None:
            p = pattern.power_at(t, np.full_like(t, fixed)) if name == "phi0" else pattern.power_at(np.full_like(t, fixed), t)
        else:
            line = pattern.power[iv, :] if name == "phi0" else pattern.power[:, iu]
            t = axis[np.abs(axis) <= span]
            p = line[np.abs(axis) <= span]
        cuts[name] = (t, _db(np.asarray(p)))
    return cuts


def write_cuts(path, pattern: PatternGrid, near=(0.0, 0.0)) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["cut", "coordinate", "power_db"])
        for name, (t, db) in principal_cuts(pattern, near=near).items():
            for x, p in zip(t, db):
                w.writerow([name, _fmt(x), _fmt(p)])


def metrics_dict(m: PatternMetrics, chi: float) -> dict:
    return m.as_dict(chi)


def write_json(path, data) -> None:
    Path(path).write_text(json.dumps(data, indent=2, sort_keys=True, allow_nan=True) + "\n")


def write_metrics(path, m: PatternMetrics, chi: float) -> None:
    write_json(path, metrics_dict(m, chi))


def write_trace(path, trace) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["iteration", "best_chi", "mean_chi", "evaluations"])
        for k, b, m, e in trace.rows():
            w.writerow([k, _fmt(b), _fmt(m), e])


def read_trace(path) -> list[tuple[int, float, float, int]]:
    with open(path, newline="") as fh:
        rows = list(csv.reader(fh))
    return [(int(r[0]), float(r[1]), float(r[2]), int(r[3])) for r in rows[1:]]


def write_scan(path, scan: ScanMap) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["theta_gamma", "phi_gamma", "sll_db", "d_dbi"])
        for th, ph, s, d in scan.rows():
            w.writerow([_fmt(th), _fmt(ph), _fmt(s), _fmt(d)])


def write_curve(path, sorted_costs: np.ndarray) -> None:
    """Sorted cost curve, worst tiling first."""
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["rank", "chi"])
        for k, c in enumerate(sorted_costs, start=1):
            w.writerow([k, _fmt(c)])


def solution_dict(record) -> dict:
    c = record.coefficients
    return {
        "word": list(record.word),
        "chi": record.chi,
        "metrics": record.metrics.as_dict(),
        "coefficients": [
            {"q": q, "amplitude": float(a), "phase_deg": float(math.degrees(p))}
            for q, (a, p) in enumerate(zip(c.amplitude, c.phase))
        ],
        "provenance": record.provenance,
    }


def write_solution(stem: Path, aperture: HexAperture, record) -> None:
    """``<stem>.tiling.csv`` plus ``<stem>.json`` with word, coefficients, chi and metrics."""
    stem = Path(stem)
    write_tiling(stem.with_name(stem.name + ".tiling.csv"), aperture, record.tiling)
    write_json(stem.with_name(stem.name + ".json"), solution_dict(record))


def read_solution(stem: Path, aperture: HexAperture) -> tuple[Tiling, dict]:
    stem = Path(stem)
    tiling = read_tiling(stem.with_name(stem.name + ".tiling.csv"), aperture)
    data = json.loads(stem.with_name(stem.name + ".json").read_text())
    return tiling, data


__all__ = [
    "DataError",
    "InvalidTilingError",
    "principal_cuts",
    "read_excitation",
    "read_solution",
    "read_tiling",
    "read_trace",
    "write_curve",
    "write_cuts",
    "write_excitation",
    "write_json",
    "write_metrics",
    "write_pattern",
    "write_scan",
    "write_solution",
    "write_tiling",
    "write_trace",
]
