"""Decision-uncertainty sampling.

A decision sample is built by repeatedly drawing a realization of the
conditional GP over a fresh Latin hypercube candidate set and recording
the feasible argmin. With a black-box constraint, an independent
constraint-GP realization filters the candidates before the argmin.
"""
from __future__ import annotations

import csv
import hashlib
import json
from dataclasses import dataclass, field

import numpy as np

from .exceptions import (
    DegenerateSampleError,
    InfeasibleRegionError,
    InvalidArgumentError,
)
from .gp import FittedGp, model_to_json, posterior, posterior_mean
from .rng import SeededRng
from .sampling import lhs, mvn_draw

MAX_ATTEMPTS_PER_REALIZATION = 10
MAX_DISCARD_FRACTION = 0.2
REGION_CHECK_POINTS = 10_000


@dataclass(frozen=True)
class LinearConstraint:
    """a @ x <= b or a @ x >= b depending on sense."""

    a: np.ndarray
    b: float
    sense: str  # "le" | "ge"

    def __post_init__(self):
        a = np.asarray(self.a, dtype=float).ravel()
        if not np.any(a):
            raise InvalidArgumentError("constraint needs a nonzero coefficient")
        if self.sense not in ("le", "ge"):
            raise InvalidArgumentError("sense must be 'le' or 'ge'")
        a.setflags(write=False)
        object.__setattr__(self, "a", a)

    def satisfied(self, points: np.ndarray) -> np.ndarray:
        vals = points @ self.a
        return vals <= self.b if self.sense == "le" else vals >= self.b


@dataclass(frozen=True)
class BlackboxConstraint:
    """Surrogate-modeled constraint: keep x with model output >= threshold."""

    model: FittedGp | None
    threshold: float
    sense: str = "ge"


@dataclass(frozen=True)
class FeasibleRegion:
    box: np.ndarray  # (d, 2)
    linear_constraints: tuple[LinearConstraint, ...] = ()
    blackbox: BlackboxConstraint | None = None

    def __post_init__(self):
        box = np.asarray(self.box, dtype=float)
        if box.ndim != 2 or box.shape[1] != 2 or np.any(box[:, 1] <= box[:, 0]):
            raise InvalidArgumentError("box must be (d, 2) with positive widths")
        box.setflags(write=False)
        object.__setattr__(self, "box", box)
        object.__setattr__(self, "linear_constraints",
                           tuple(self.linear_constraints))
        # Region sanity: the deterministic part must be reachable.
        probe = lhs(REGION_CHECK_POINTS, box, SeededRng(0x7E6104)).points
        if not np.any(self.deterministic_mask(probe)):
            raise InvalidArgumentError(
                "deterministic constraints exclude the entire box"
            )

    @property
    def d(self) -> int:
        return self.box.shape[0]

    def deterministic_mask(self, points: np.ndarray) -> np.ndarray:
        """Exact feasibility of box + linear constraints, per point."""
        mask = np.all((points >= self.box[:, 0]) & (points <= self.box[:, 1]),
                      axis=1)
        for con in self.linear_constraints:
            mask &= con.satisfied(points)
        return mask


@dataclass(frozen=True)
class DecisionSample:
    """Per-realization optimal points approximating the optimum's distribution."""

    points: np.ndarray  # (M, d)
    objective_values: np.ndarray  # (M,)
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        pts = np.atleast_2d(np.asarray(self.points, dtype=float))
        vals = np.asarray(self.objective_values, dtype=float).ravel()
        if pts.shape[0] != vals.shape[0] or pts.shape[0] < 1:
            raise InvalidArgumentError("points/values length mismatch or empty")
        if not (np.all(np.isfinite(pts)) and np.all(np.isfinite(vals))):
            raise InvalidArgumentError("sample must be finite")
        pts.setflags(write=False)
        vals.setflags(write=False)
        object.__setattr__(self, "points", pts)
        object.__setattr__(self, "objective_values", vals)

    @property
    def m(self) -> int:
        return self.points.shape[0]

    @property
    def d(self) -> int:
        return self.points.shape[1]


def _fingerprint(model: FittedGp) -> str:
    return hashlib.sha256(model_to_json(model).encode()).hexdigest()[:16]


def optimize_posterior_mean(model: FittedGp, region: FeasibleRegion,
                            constraint_model: FittedGp | None = None,
                            candidates: int = 4096,
                            rng: SeededRng = SeededRng(0)):
    """Minimize the posterior mean over an LHS candidate set.

    With a constraint surrogate, candidates must also satisfy
    mean-constraint >= threshold. Ties break to the lowest candidate
    index. Returns (point, value).
    """
    if candidates < 1:
        raise InvalidArgumentError("candidate budget must be positive")
    if constraint_model is None and region.blackbox is not None:
        constraint_model = region.blackbox.model
    pts = lhs(candidates, region.box, rng).points
    mask = region.deterministic_mask(pts)
    pts = pts[mask]
    if constraint_model is not None:
        if region.blackbox is None:
            raise InvalidArgumentError(
                "constraint model given but region has no threshold"
            )
        zhat = posterior_mean(constraint_model, pts)
        pts = pts[zhat >= region.blackbox.threshold]
    if pts.shape[0] == 0:
        raise InfeasibleRegionError("no feasible candidate in the budget")
    vals = posterior_mean(model, pts)
    j = int(np.argmin(vals))
    return pts[j].copy(), float(vals[j])


def _one_realization(model, con_model, threshold, region, n_candidates, rng, i):
    """Argmin of one (possibly constrained) conditional-GP realization.

    Returns (point, value) or None when every attempt was infeasible.
    Streams: child(i, attempt, 0) drives the LHS, (i, attempt, 1) the
    objective draw, (i, attempt, 2) the constraint draw, so constrained
    and unconstrained runs share identical objective realizations.
    """
    for attempt in range(MAX_ATTEMPTS_PER_REALIZATION):
        design = lhs(n_candidates, region.box, rng.child(i, attempt, 0))
        pts = design.points
        mask = region.deterministic_mask(pts)
        pts = pts[mask]
        if pts.shape[0] == 0:
            continue
        ev = posterior(model, pts)
        y = mvn_draw(ev.mean, ev.cov, rng.child(i, attempt, 1).generator())
        if con_model is not None:
            evz = posterior(con_model, pts)
            z = mvn_draw(evz.mean, evz.cov, rng.child(i, attempt, 2).generator())
            keep = z >= threshold
            if not np.any(keep):
                continue
            kept_idx = np.nonzero(keep)[0]
            j = kept_idx[int(np.argmin(y[kept_idx]))]
        else:
            j = int(np.argmin(y))
        return pts[j].copy(), float(y[j])
    return None


def _sample_core(model, con_model, threshold, region, m, n, rng):
    if m < 1 or n < 1:
        raise InvalidArgumentError("M and N must be positive")
    points, values = [], []
    discarded = 0
    for i in range(m):
        result = _one_realization(model, con_model, threshold, region, n, rng, i)
        if result is None:
            discarded += 1
        else:
            points.append(result[0])
            values.append(result[1])
    if discarded > MAX_DISCARD_FRACTION * m or not points:
        raise InfeasibleRegionError(
            f"{discarded} of {m} realizations found no feasible candidate"
        )
    meta = {
        "M": m,
        "N": n,
        "seed": rng.seed,
        "stream_path": list(rng.path),
        "objective_model": _fingerprint(model),
        "constraint_model": _fingerprint(con_model) if con_model else None,
        "constraint_threshold": threshold,
        "discarded_realization_count": discarded,
    }
    return DecisionSample(np.array(points), np.array(values), meta)


def sample_decision_uncertainty(model: FittedGp, region: FeasibleRegion,
                                m: int, n: int, rng: SeededRng) -> DecisionSample:
    """Unconstrained decision sample: argmin of M independent realizations,
    each over its own fresh size-N Latin hypercube."""
    if region.blackbox is not None:
        raise InvalidArgumentError(
            "region has a black-box constraint; use the constrained sampler"
        )
    return _sample_core(model, None, None, region, m, n, rng)


def sample_decision_uncertainty_constrained(
        obj_model: FittedGp, con_model: FittedGp, threshold: float,
        region: FeasibleRegion, m: int, n: int, rng: SeededRng) -> DecisionSample:
    """Constrained decision sample: independent objective and constraint
    realizations per candidate set; candidates failing the drawn
    constraint are removed before the argmin."""
    if obj_model.d != con_model.d:
        raise InvalidArgumentError("objective and constraint dimensions differ")
    if not np.array_equal(obj_model.data.box, con_model.data.box):
        raise InvalidArgumentError("objective and constraint boxes differ")
    return _sample_core(obj_model, con_model, threshold, region, m, n, rng)


def summarize(sample: DecisionSample) -> dict:
    """Per-dimension location and spread of the decision sample."""
    pts = sample.points
    out = {"M": sample.m, "dimensions": []}
    for h in range(sample.d):
        col = pts[:, h]
        q = np.quantile(col, [0.025, 0.5, 0.975])
        out["dimensions"].append({
            "index": h,
            "mean": float(np.mean(col)),
            "std": float(np.std(col, ddof=1)) if sample.m >= 2 else 0.0,
            "min": float(np.min(col)),
            "max": float(np.max(col)),
            "q2.5": float(q[0]),
            "median": float(q[1]),
            "q97.5": float(q[2]),
        })
    vals = sample.objective_values
    out["objective"] = {
        "mean": float(np.mean(vals)),
        "std": float(np.std(vals, ddof=1)) if sample.m >= 2 else 0.0,
        "min": float(np.min(vals)),
        "max": float(np.max(vals)),
    }
    out["meta"] = dict(sample.meta)
    return out


@dataclass(frozen=True)
class DensityGrid:
    """Two-dimensional kernel density of a coordinate pair on a regular grid."""

    dims: tuple[int, int]
    x_axis: np.ndarray  # (G,)
    y_axis: np.ndarray  # (G,)
    density: np.ndarray  # (G, G), density[i, j] at (x_axis[i], y_axis[j])
    bandwidths: tuple[float, float]

    def integral(self) -> float:
        return float(np.trapezoid(np.trapezoid(self.density, self.y_axis, axis=1),
                                  self.x_axis))


def density_grid(sample: DecisionSample, dims: tuple[int, int] = (0, 1),
                 grid_size: int = 64,
                 bandwidths: tuple[float, float] | None = None) -> DensityGrid:
    """Product-Gaussian KDE with per-dimension Silverman bandwidths,
    gridded over the sample range padded by three bandwidths."""
    if sample.m < 10:
        raise InvalidArgumentError("need at least 10 points for a density grid")
    if grid_size < 2:
        raise InvalidArgumentError("grid size must be at least 2")
    d0, d1 = dims
    x = sample.points[:, d0]
    y = sample.points[:, d1]
    if bandwidths is None:
        m = sample.m
        bw = []
        for col in (x, y):
            s = float(np.std(col, ddof=1))
            if s == 0.0:
                raise DegenerateSampleError(
                    f"zero variance in dimension pair {dims}"
                )
            bw.append(1.06 * s * m ** (-0.2))
        bandwidths = (bw[0], bw[1])
    bx, by = bandwidths
    if bx <= 0 or by <= 0:
        raise InvalidArgumentError("bandwidths must be positive")
    x_axis = np.linspace(x.min() - 3 * bx, x.max() + 3 * bx, grid_size)
    y_axis = np.linspace(y.min() - 3 * by, y.max() + 3 * by, grid_size)
    norm = 1.0 / np.sqrt(2.0 * np.pi)
    kx = norm / bx * np.exp(-0.5 * ((x_axis[:, None] - x[None, :]) / bx) ** 2)
    ky = norm / by * np.exp(-0.5 * ((y_axis[:, None] - y[None, :]) / by) ** 2)
    dens = kx @ ky.T / sample.m
    return DensityGrid(dims=(d0, d1), x_axis=x_axis, y_axis=y_axis,
                       density=dens, bandwidths=bandwidths)


# ---------------------------------------------------------------------------
# Persistence

def sample_to_csv(sample: DecisionSample, csv_path, meta_path=None) -> None:
    """One row per point: index, coordinates, objective value.

    Floats are written with repr so a reload is bit-exact.
    """
    d = sample.d
    with open(csv_path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(["index"] + [f"x{h + 1}" for h in range(d)] + ["objective"])
        for i in range(sample.m):
            row = [str(i)] + [repr(float(v)) for v in sample.points[i]]
            row.append(repr(float(sample.objective_values[i])))
            writer.writerow(row)
    if meta_path is not None:
        with open(meta_path, "w", encoding="utf-8") as fh:
            json.dump(sample.meta, fh, indent=2, sort_keys=True)


def sample_from_csv(csv_path, meta_path=None) -> DecisionSample:
    with open(csv_path, newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if not header or header[0] != "index" or header[-1] != "objective":
            raise InvalidArgumentError(f"{csv_path}: not a decision sample file")
        pts, vals = [], []
        for row in reader:
            pts.append([float(v) for v in row[1:-1]])
            vals.append(float(row[-1]))
    meta = {}
    if meta_path is not None:
        with open(meta_path, encoding="utf-8") as fh:
            meta = json.load(fh)
    return DecisionSample(np.array(pts), np.array(vals), meta)


def grid_to_csv(grid: DensityGrid, path) -> None:
    """Long format (x, y, density), one row per grid node."""
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(["x", "y", "density"])
        for i, xv in enumerate(grid.x_axis):
            for j, yv in enumerate(grid.y_axis):
                writer.writerow([repr(float(xv)), repr(float(yv)),
                                 repr(float(grid.density[i, j]))])
