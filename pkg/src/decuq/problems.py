"""Built-in test problems and tabular data ingestion.

Includes the two-dimensional semi-ellipsoid benchmark, a synthetic
constrained problem with a known optimum, the four-dimensional cure
schedule feasible region, and schema-validated CSV loading for
externally simulated datasets.
"""
from __future__ import annotations

import csv
import json
from dataclasses import dataclass
from importlib import resources

import numpy as np

from .decision import BlackboxConstraint, FeasibleRegion, LinearConstraint
from .exceptions import InvalidArgumentError

ELLIPSOID_BOX = np.array([[-2.0, 2.0], [0.8, 1.2]])
CURE_BOX = np.array([[10.0, 110.0], [125.0, 180.0], [120.0, 200.0], [150.0, 180.0]])
CURE_THRESHOLD = 0.96


@dataclass(frozen=True)
class AnalyticProblem:
    name: str
    box: np.ndarray  # (d, 2)
    objective: object  # vectorized (m, d) -> (m,)
    constraint: object = None  # vectorized, same signature
    threshold: float | None = None
    optimum: np.ndarray | None = None
    optimum_value: float | None = None

    @property
    def d(self) -> int:
        return self.box.shape[0]


def _ellipsoid_vec(x: np.ndarray) -> np.ndarray:
    x = np.atleast_2d(np.asarray(x, dtype=float))
    rad1 = 1.0 - x[:, 0] ** 2 / 4.0
    rad2 = 1.0 - (x[:, 1] - 1.0) ** 2 / 0.04
    # round-off guard only; genuine negatives are rejected by eval_ellipsoid
    rad1 = np.maximum(rad1, 0.0)
    rad2 = np.maximum(rad2, 0.0)
    return -0.3 * np.sqrt(rad1) - 3.0 * np.sqrt(rad2) + 4.0


def eval_ellipsoid(x) -> float:
    """Semi-ellipsoid benchmark value at one point; minimum 0.7 at (0, 1)."""
    x = np.asarray(x, dtype=float).ravel()
    if x.shape[0] != 2:
        raise InvalidArgumentError("expects a 2-dimensional point")
    if not (-2.0 <= x[0] <= 2.0 and 0.8 <= x[1] <= 1.2):
        raise InvalidArgumentError(
            f"point {x.tolist()} outside [-2,2] x [0.8,1.2]"
        )
    return float(_ellipsoid_vec(x[None, :])[0])


def ellipsoid_problem() -> AnalyticProblem:
    return AnalyticProblem(
        name="ellipsoid",
        box=ELLIPSOID_BOX,
        objective=_ellipsoid_vec,
        optimum=np.array([0.0, 1.0]),
        optimum_value=0.7,
    )


def synthetic_constrained() -> AnalyticProblem:
    """Quadratic bowl with a linear black-box stand-in constraint.

    min (x1-0.5)^2 + (x2-0.5)^2 on [0,1]^2 s.t. x1+x2 >= 1.2;
    constrained optimum (0.6, 0.6) with value 0.02.
    """
    def objective(x):
        x = np.atleast_2d(np.asarray(x, dtype=float))
        return (x[:, 0] - 0.5) ** 2 + (x[:, 1] - 0.5) ** 2

    def constraint(x):
        x = np.atleast_2d(np.asarray(x, dtype=float))
        return x[:, 0] + x[:, 1]

    return AnalyticProblem(
        name="synthetic-constrained",
        box=np.array([[0.0, 1.0], [0.0, 1.0]]),
        objective=objective,
        constraint=constraint,
        threshold=1.2,
        optimum=np.array([0.6, 0.6]),
        optimum_value=0.02,
    )


def cure_region(constraint_model=None) -> FeasibleRegion:
    """Feasible region of the two-change-point cure schedule.

    Coordinates (t1, T1, t2, T2). The two slope requirements reduce to
    T1 >= 20 and T2 >= T1 on this box (t1 > 0 and t2 > t1 throughout),
    so they are enforced in linear form. T1 >= 20 is implied by the box
    but kept for fidelity. The degree-of-cure surrogate slots into the
    black-box constraint with threshold 0.96.
    """
    return FeasibleRegion(
        box=CURE_BOX,
        linear_constraints=(
            LinearConstraint(a=[0.0, 1.0, 0.0, 0.0], b=20.0, sense="ge"),
            LinearConstraint(a=[0.0, -1.0, 0.0, 1.0], b=0.0, sense="ge"),
        ),
        blackbox=BlackboxConstraint(model=constraint_model,
                                    threshold=CURE_THRESHOLD),
    )


# ---------------------------------------------------------------------------
# Tabular data


@dataclass(frozen=True)
class CsvSchema:
    """Column roles and input bounds for a simulation dataset."""

    input_columns: tuple[str, ...]
    output_columns: tuple[str, ...]
    box: np.ndarray  # (d, 2) aligned with input_columns

    def __post_init__(self):
        box = np.asarray(self.box, dtype=float)
        if box.shape != (len(self.input_columns), 2):
            raise InvalidArgumentError("box rows must match input columns")
        box.setflags(write=False)
        object.__setattr__(self, "box", box)
        object.__setattr__(self, "input_columns", tuple(self.input_columns))
        object.__setattr__(self, "output_columns", tuple(self.output_columns))

    @staticmethod
    def from_manifest(path) -> "CsvSchema":
        with open(path, encoding="utf-8") as fh:
            spec = json.load(fh)
        try:
            return CsvSchema(
                input_columns=tuple(spec["input_columns"]),
                output_columns=tuple(spec["output_columns"]),
                box=np.asarray(spec["box"], dtype=float),
            )
        except KeyError as exc:
            raise InvalidArgumentError(f"manifest missing key {exc}")


@dataclass(frozen=True)
class TabularDataset:
    schema: CsvSchema
    inputs: np.ndarray  # (n, d)
    outputs: np.ndarray  # (n, k)

    @property
    def n(self) -> int:
        return self.inputs.shape[0]

    def output_column(self, name: str) -> np.ndarray:
        try:
            k = self.schema.output_columns.index(name)
        except ValueError:
            raise InvalidArgumentError(f"no output column named {name!r}")
        return self.outputs[:, k]


def load_csv(path, schema: CsvSchema) -> TabularDataset:
    """Parse and validate a simulation dataset against its schema.

    Failures carry 1-based data row numbers (header is row 0).
    """
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header is None:
            raise InvalidArgumentError(f"{path}: empty file")
        wanted = list(schema.input_columns) + list(schema.output_columns)
        try:
            cols = [header.index(name) for name in wanted]
        except ValueError:
            missing = [n for n in wanted if n not in header]
            raise InvalidArgumentError(f"{path}: missing columns {missing}")
        rows = []
        for lineno, raw in enumerate(reader, start=1):
            if not raw:
                continue
            vals = []
            for name, idx in zip(wanted, cols):
                if idx >= len(raw) or raw[idx].strip() == "":
                    raise InvalidArgumentError(
                        f"{path}: row {lineno}: missing value for {name!r}"
                    )
                try:
                    vals.append(float(raw[idx]))
                except ValueError:
                    raise InvalidArgumentError(
                        f"{path}: row {lineno}: {raw[idx]!r} is not a number"
                    )
            rows.append(vals)
    if len(rows) < 2:
        raise InvalidArgumentError(f"{path}: need at least 2 data rows")
    table = np.array(rows)
    d = len(schema.input_columns)
    inputs = table[:, :d]
    outputs = table[:, d:]
    box = schema.box
    bad = np.nonzero(np.any((inputs < box[:, 0]) | (inputs > box[:, 1]), axis=1))[0]
    if bad.size:
        raise InvalidArgumentError(
            f"{path}: rows {[int(i) + 1 for i in bad]} outside the declared box"
        )
    _, first_idx, counts = np.unique(inputs, axis=0, return_index=True,
                                     return_counts=True)
    if np.any(counts > 1):
        dupes = []
        for row in np.unique(inputs, axis=0)[counts > 1]:
            where = np.nonzero(np.all(inputs == row, axis=1))[0]
            dupes.append([int(i) + 1 for i in where])
        raise InvalidArgumentError(f"{path}: duplicate input rows {dupes}")
    return TabularDataset(schema=schema, inputs=inputs, outputs=outputs)


def write_csv(dataset: TabularDataset, path) -> None:
    """Inverse of load_csv; floats via repr for an exact round trip."""
    names = list(dataset.schema.input_columns) + list(dataset.schema.output_columns)
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(names)
        for i in range(dataset.n):
            row = [repr(float(v)) for v in dataset.inputs[i]]
            row += [repr(float(v)) for v in dataset.outputs[i]]
            writer.writerow(row)


def cure_schema() -> CsvSchema:
    return CsvSchema(
        input_columns=("t1", "T1", "t2", "T2"),
        output_columns=("y", "z"),
        box=CURE_BOX,
    )


def cure_fixture_path():
    """Vendored 50-row stand-in dataset with the cure schema.

    Synthetic smooth functions, not physics; exists so the pipeline and
    tests run without the external simulator's data file.
    """
    return resources.files("decuq.data") / "cure_fixture.csv"


def load_cure_fixture() -> TabularDataset:
    return load_csv(cure_fixture_path(), cure_schema())
