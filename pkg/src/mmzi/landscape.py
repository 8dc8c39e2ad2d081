"""Phase-landscape scans: sensitivity metrics over the (phi1, phi2) torus,
working-point location and refinement, stability of the neighbourhood of a
working point, and grid import/export.

A cell is flagged singular when the 2x2 information matrix fails the shared
condition-number/determinant thresholds, or when some outcome probability
vanishes with a non-vanishing gradient (diverging information).  Singular
cells carry NaN metrics and are legitimate values, not errors.
"""

from __future__ import annotations

import csv
import json
import math
from dataclasses import dataclass, field

import numpy as np
from scipy.optimize import minimize

from . import fisher
from .optics import Interferometer, TWO_PI
from .probes import Probe, build_model

GRID_SCHEMA_VERSION = 1

CSV_COLUMNS = ("phi1", "phi2", "tr_finv", "finv11", "finv22", "detF", "singular")


def _fim_components(probs, grads, zero_prob=fisher.ZERO_PROB, zero_grad=fisher.ZERO_GRAD):
    """Vectorized 2x2 FIM entries for a batch of distributions.

    Returns (f11, f22, f12, support_bad); outcomes below the probability
    floor contribute nothing, and cells where such an outcome still has a
    finite gradient are marked support_bad (the information diverges there).
    """
    p = probs
    g1 = grads[:, :, 0]
    g2 = grads[:, :, 1]
    grad_norm = np.maximum(np.abs(g1), np.abs(g2))
    support_bad = np.any((p < zero_prob) & (grad_norm > zero_grad), axis=1)
    w = np.where(p >= zero_prob, 1.0 / np.maximum(p, 1e-300), 0.0)
    f11 = np.einsum("xk,xk->x", w * g1, g1)
    f22 = np.einsum("xk,xk->x", w * g2, g2)
    f12 = np.einsum("xk,xk->x", w * g1, g2)
    return f11, f22, f12, support_bad


def _classify_2x2(f11, f22, f12, support_bad,
                  cond_threshold=fisher.COND_THRESHOLD,
                  det_threshold=fisher.DET_THRESHOLD):
    """Determinant, condition number and singular flag per cell."""
    det = f11 * f22 - f12**2
    half_trace = 0.5 * (f11 + f22)
    disc = np.sqrt(np.maximum((0.5 * (f11 - f22)) ** 2 + f12**2, 0.0))
    lmax = np.abs(half_trace + disc)
    lmin = np.abs(half_trace - disc)
    cond = np.where(lmin > 0.0, lmax / np.maximum(lmin, 1e-300), np.inf)
    singular = support_bad | (cond >= cond_threshold) | (np.abs(det) < det_threshold)
    det = np.where(support_bad, np.nan, det)
    return det, cond, singular


@dataclass(eq=False)
class LandscapeGrid:
    """Sensitivity metrics on a uniform [0, 2pi)^2 grid.

    Arrays are indexed [i, j] for phases (phi1[i], phi2[j]).  Metric arrays
    hold NaN where ``singular`` is True.  ``model`` is the probability model
    used to build the grid; it enables refinement and is not serialized.
    """

    phi1: np.ndarray
    phi2: np.ndarray
    tr_finv: np.ndarray
    finv11: np.ndarray
    finv22: np.ndarray
    det_f: np.ndarray
    singular: np.ndarray
    model: object | None = field(default=None, repr=False)

    @property
    def resolution(self) -> tuple[int, int]:
        return len(self.phi1), len(self.phi2)

    def singular_count(self) -> int:
        return int(self.singular.sum())

    def min_trace(self) -> float:
        return float(np.nanmin(self.tr_finv))


def scan_grid(interf: Interferometer, probe: Probe, resolution: int = 256,
              chunk: int = 8192) -> LandscapeGrid:
    """Scan the full (phi1, phi2) torus at uniform spacing 2pi/resolution."""
    if resolution < 64:
        raise ValueError("resolution must be >= 64")
    model = build_model(interf, probe)
    axis = np.arange(resolution) * TWO_PI / resolution
    p1, p2 = np.meshgrid(axis, axis, indexing="ij")
    points = np.column_stack([p1.ravel(), p2.ravel()])
    n = len(points)
    f11 = np.empty(n)
    f22 = np.empty(n)
    f12 = np.empty(n)
    bad = np.empty(n, dtype=bool)
    for start in range(0, n, chunk):
        sl = slice(start, min(start + chunk, n))
        probs, grads = model.prob_batch(points[sl])
        f11[sl], f22[sl], f12[sl], bad[sl] = _fim_components(probs, grads)
    det, _cond, singular = _classify_2x2(f11, f22, f12, bad)
    with np.errstate(divide="ignore", invalid="ignore"):
        tr = np.where(~singular, (f11 + f22) / det, np.nan)
        i11 = np.where(~singular, f22 / det, np.nan)
        i22 = np.where(~singular, f11 / det, np.nan)
    shape = (resolution, resolution)
    return LandscapeGrid(
        phi1=axis,
        phi2=axis.copy(),
        tr_finv=tr.reshape(shape),
        finv11=i11.reshape(shape),
        finv22=i22.reshape(shape),
        det_f=det.reshape(shape),
        singular=singular.reshape(shape),
        model=model,
    )


@dataclass(frozen=True)
class WorkingPoint:
    phases: tuple[float, float]
    tr_finv: float
    finv11: float
    finv22: float


def _trace_objective(model):
    def objective(x):
        probs, grads = model.prob_batch(np.mod(x, TWO_PI)[None, :])
        f11, f22, f12, bad = _fim_components(probs, grads)
        det, _cond, singular = _classify_2x2(f11, f22, f12, bad)
        if singular[0]:
            return 1e12
        return float((f11[0] + f22[0]) / det[0])

    return objective


def _metrics_at(model, x) -> WorkingPoint | None:
    probs, grads = model.prob_batch(np.mod(x, TWO_PI)[None, :])
    f11, f22, f12, bad = _fim_components(probs, grads)
    det, _cond, singular = _classify_2x2(f11, f22, f12, bad)
    if singular[0]:
        return None
    return WorkingPoint(
        phases=(float(np.mod(x[0], TWO_PI)), float(np.mod(x[1], TWO_PI))),
        tr_finv=float((f11[0] + f22[0]) / det[0]),
        finv11=float(f22[0] / det[0]),
        finv22=float(f11[0] / det[0]),
    )


def circular_distance(a, b) -> float:
    """Euclidean distance on the torus between two phase pairs."""
    d = np.abs(np.asarray(a, dtype=float) - np.asarray(b, dtype=float)) % TWO_PI
    d = np.minimum(d, TWO_PI - d)
    return float(np.hypot(*d))


def _grid_local_minima(grid: LandscapeGrid) -> list[tuple[int, int]]:
    values = np.where(grid.singular, np.inf, grid.tr_finv)
    if not np.isfinite(values).any():
        raise ValueError("all grid cells are singular")
    is_min = np.ones_like(values, dtype=bool)
    for di in (-1, 0, 1):
        for dj in (-1, 0, 1):
            if di == dj == 0:
                continue
            is_min &= values <= np.roll(np.roll(values, di, axis=0), dj, axis=1)
    is_min &= np.isfinite(values)
    return [tuple(idx) for idx in np.argwhere(is_min)]


def find_working_points(grid: LandscapeGrid, refine_tol: float = 1e-5,
                        dedup_tol: float = 1e-3) -> list[WorkingPoint]:
    """Local minima of Tr[F^-1], polished by simplex descent.

    Minima are deduplicated within ``dedup_tol`` radians on the torus and
    returned sorted ascending by the trace metric.  A constant landscape
    (every cell tied) collapses to the single grid-origin corner point.
    When the grid was loaded from a file and carries no model, the grid
    minima are returned without refinement.
    """
    finite = grid.tr_finv[~grid.singular]
    if finite.size and float(np.nanmax(finite) - np.nanmin(finite)) < 1e-12:
        corner = (
            _metrics_at(grid.model, np.array([grid.phi1[0], grid.phi2[0]]))
            if grid.model is not None
            else WorkingPoint(
                (float(grid.phi1[0]), float(grid.phi2[0])),
                float(grid.tr_finv[0, 0]),
                float(grid.finv11[0, 0]),
                float(grid.finv22[0, 0]),
            )
        )
        return [corner] if corner is not None else []
    candidates = _grid_local_minima(grid)
    points: list[WorkingPoint] = []
    for i, j in candidates:
        x0 = np.array([grid.phi1[i], grid.phi2[j]])
        if grid.model is None:
            points.append(
                WorkingPoint(
                    (float(x0[0]), float(x0[1])),
                    float(grid.tr_finv[i, j]),
                    float(grid.finv11[i, j]),
                    float(grid.finv22[i, j]),
                )
            )
            continue
        result = minimize(
            _trace_objective(grid.model),
            x0,
            method="Nelder-Mead",
            options={"xatol": refine_tol, "fatol": 1e-12, "maxiter": 600},
        )
        wp = _metrics_at(grid.model, result.x)
        if wp is not None:
            points.append(wp)
    points.sort(key=lambda w: w.tr_finv)
    kept: list[WorkingPoint] = []
    for wp in points:
        if all(circular_distance(wp.phases, other.phases) > dedup_tol for other in kept):
            kept.append(wp)
    return kept


@dataclass(frozen=True)
class StabilityReport:
    center: tuple[float, float]
    delta: float
    n_samples: int
    singular_count: int
    min_abs_det: float


def stability_region(interf: Interferometer, probe: Probe, center, delta: float,
                     n_samples: int = 1000) -> StabilityReport:
    """Sample a disc of radius ``delta`` around ``center`` and report how
    many samples are singular-flagged plus the minimum |det F| seen.

    Sampling is a deterministic sunflower spiral, quasi-uniform over the
    disc, so reports are reproducible without a seed.
    """
    if delta <= 0:
        raise ValueError("delta must be > 0")
    center = np.asarray(center, dtype=float)
    model = build_model(interf, probe)
    k = np.arange(1, n_samples + 1)
    radius = delta * np.sqrt((k - 0.5) / n_samples)
    angle = k * math.pi * (3.0 - math.sqrt(5.0))
    points = np.column_stack(
        [center[0] + radius * np.cos(angle), center[1] + radius * np.sin(angle)]
    )
    probs, grads = model.prob_batch(np.mod(points, TWO_PI))
    f11, f22, f12, bad = _fim_components(probs, grads)
    det, _cond, singular = _classify_2x2(f11, f22, f12, bad)
    return StabilityReport(
        center=(float(center[0]), float(center[1])),
        delta=float(delta),
        n_samples=int(n_samples),
        singular_count=int(singular.sum()),
        min_abs_det=float(np.nanmin(np.abs(det))),
    )


def _format_value(x: float) -> str:
    return "" if (x is None or not np.isfinite(x)) else f"{x:.17g}"


def _iter_records(grid: LandscapeGrid):
    for i, a in enumerate(grid.phi1):
        for j, b in enumerate(grid.phi2):  # phi2 varies fastest
            yield {
                "phi1": float(a),
                "phi2": float(b),
                "tr_finv": float(grid.tr_finv[i, j]),
                "finv11": float(grid.finv11[i, j]),
                "finv22": float(grid.finv22[i, j]),
                "detF": float(grid.det_f[i, j]),
                "singular": int(grid.singular[i, j]),
            }


def export_grid(grid: LandscapeGrid, path, fmt: str = "csv") -> None:
    """Write a grid to ``path``; CSV columns are exactly
    phi1,phi2,tr_finv,finv11,finv22,detF,singular with phi2 varying fastest.
    Singular cells leave their metric fields empty and set singular=1."""
    if fmt == "csv":
        with open(path, "w", newline="") as handle:
            writer = csv.writer(handle)
            writer.writerow(CSV_COLUMNS)
            for rec in _iter_records(grid):
                writer.writerow(
                    [
                        _format_value(rec["phi1"]),
                        _format_value(rec["phi2"]),
                        _format_value(rec["tr_finv"]),
                        _format_value(rec["finv11"]),
                        _format_value(rec["finv22"]),
                        _format_value(rec["detF"]),
                        rec["singular"],
                    ]
                )
    elif fmt == "json":
        cells = []
        for rec in _iter_records(grid):
            cells.append(
                {k: (None if isinstance(v, float) and not np.isfinite(v) else v)
                 for k, v in rec.items()}
            )
        doc = {
            "schema_version": GRID_SCHEMA_VERSION,
            "resolution": list(grid.resolution),
            "cells": cells,
        }
        with open(path, "w") as handle:
            json.dump(doc, handle)
    else:
        raise ValueError(f"unknown format {fmt!r}")


def load_grid(path, fmt: str = "csv") -> LandscapeGrid:
    """Parse a grid written by export_grid.  The returned grid carries no
    probability model, so working points found on it are unrefined."""
    records = []
    if fmt == "csv":
        with open(path, newline="") as handle:
            reader = csv.DictReader(handle)
            if tuple(reader.fieldnames) != CSV_COLUMNS:
                raise ValueError(f"unexpected CSV header {reader.fieldnames}")
            for row in reader:
                records.append(
                    {
                        key: (math.nan if row[key] == "" else float(row[key]))
                        for key in CSV_COLUMNS[:-1]
                    }
                    | {"singular": int(row["singular"])}
                )
    elif fmt == "json":
        with open(path) as handle:
            doc = json.load(handle)
        for rec in doc["cells"]:
            records.append(
                {k: (math.nan if rec[k] is None else rec[k]) for k in CSV_COLUMNS[:-1]}
                | {"singular": int(rec["singular"])}
            )
    else:
        raise ValueError(f"unknown format {fmt!r}")
    phi1 = sorted({rec["phi1"] for rec in records})
    phi2 = sorted({rec["phi2"] for rec in records})
    n1, n2 = len(phi1), len(phi2)
    if n1 * n2 != len(records):
        raise ValueError("grid records do not form a full lattice")
    index1 = {v: i for i, v in enumerate(phi1)}
    index2 = {v: i for i, v in enumerate(phi2)}
    arrays = {key: np.full((n1, n2), np.nan) for key in CSV_COLUMNS[2:-1]}
    singular = np.zeros((n1, n2), dtype=bool)
    for rec in records:
        i, j = index1[rec["phi1"]], index2[rec["phi2"]]
        for key in arrays:
            arrays[key][i, j] = rec[key]
        singular[i, j] = bool(rec["singular"])
    return LandscapeGrid(
        phi1=np.array(phi1),
        phi2=np.array(phi2),
        tr_finv=arrays["tr_finv"],
        finv11=arrays["finv11"],
        finv22=arrays["finv22"],
        det_f=arrays["detF"],
        singular=singular,
        model=None,
    )
