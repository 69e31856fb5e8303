"""Sobol first-order and total sensitivity indices.

Pick-freeze (Jansen) estimators over paired sample matrices, with a
slow double-loop estimator kept alongside as an independent
cross-check. Inputs are either product-uniform over a box or
independent resamples of the marginals of a decision sample.
"""
from __future__ import annotations

import csv
import json
from dataclasses import dataclass

import numpy as np

from .decision import DecisionSample
from .exceptions import DegenerateVarianceError, InvalidArgumentError
from .gp import FittedGp, posterior_mean
from .rng import SeededRng

MIN_EMPIRICAL_POINTS = 30


@dataclass(frozen=True)
class InputDistribution:
    """Independent per-dimension input law for sensitivity analysis."""

    kind: str  # "uniform" | "empirical"
    d: int
    box: np.ndarray | None = None  # (d, 2) for uniform
    marginals: np.ndarray | None = None  # (M, d) columns for empirical

    @staticmethod
    def uniform(box) -> "InputDistribution":
        box = np.asarray(box, dtype=float)
        if box.ndim != 2 or box.shape[1] != 2 or np.any(box[:, 1] <= box[:, 0]):
            raise InvalidArgumentError("box must be (d, 2) with positive widths")
        return InputDistribution(kind="uniform", d=box.shape[0], box=box)

    @staticmethod
    def empirical(sample: DecisionSample) -> "InputDistribution":
        if sample.m < MIN_EMPIRICAL_POINTS:
            raise InvalidArgumentError(
                f"empirical marginals need at least {MIN_EMPIRICAL_POINTS} points"
            )
        return InputDistribution(kind="empirical", d=sample.d,
                                 marginals=sample.points)

    def sample_dim(self, dim: int, size: int, gen: np.random.Generator) -> np.ndarray:
        if self.kind == "uniform":
            lo, hi = self.box[dim]
            return lo + (hi - lo) * gen.random(size)
        col = self.marginals[:, dim]
        return col[gen.integers(0, col.shape[0], size)]

    def sample_dim_stratified(self, dim: int, size: int,
                              gen: np.random.Generator) -> np.ndarray:
        """One jittered draw per equal-probability stratum, shuffled.

        Falls back to plain resampling for empirical marginals, whose
        quantile strata are not well defined.
        """
        if self.kind != "uniform":
            return self.sample_dim(dim, size, gen)
        lo, hi = self.box[dim]
        u = (gen.permutation(size) + gen.random(size)) / size
        return lo + (hi - lo) * u

    def sample(self, size: int, gen: np.random.Generator) -> np.ndarray:
        out = np.empty((size, self.d))
        for h in range(self.d):
            out[:, h] = self.sample_dim(h, size, gen)
        return out

    def fingerprint(self) -> str:
        if self.kind == "uniform":
            return f"uniform:{self.box.tolist()}"
        return f"empirical:M={self.marginals.shape[0]}"


@dataclass(frozen=True)
class Evaluator:
    """Deterministic objective wrapper: analytic function or GP mean."""

    func: object
    d: int
    source: str = "function"

    @staticmethod
    def from_function(func, d: int) -> "Evaluator":
        return Evaluator(func=func, d=d, source="function")

    @staticmethod
    def from_gp(model: FittedGp) -> "Evaluator":
        return Evaluator(func=lambda x: posterior_mean(model, x),
                         d=model.d, source="surrogate")

    def __call__(self, points: np.ndarray) -> np.ndarray:
        vals = np.asarray(self.func(points), dtype=float).ravel()
        if vals.shape[0] != points.shape[0]:
            raise InvalidArgumentError("evaluator must return one value per point")
        return vals


@dataclass(frozen=True)
class SobolResult:
    first_order: np.ndarray  # (d,)
    total: np.ndarray  # (d,)
    total_variance: float
    n_base: int
    distribution: str
    estimator: str

    @property
    def d(self) -> int:
        return self.first_order.shape[0]

    def to_json(self) -> str:
        return json.dumps({
            "first_order": self.first_order.tolist(),
            "total": self.total.tolist(),
            "total_variance": self.total_variance,
            "n_base": self.n_base,
            "distribution": self.distribution,
            "estimator": self.estimator,
        }, indent=2)

    def to_csv(self, path) -> None:
        with open(path, "w", newline="", encoding="utf-8") as fh:
            writer = csv.writer(fh)
            writer.writerow(["dimension", "first_order", "total"])
            for h in range(self.d):
                writer.writerow([h + 1, repr(float(self.first_order[h])),
                                 repr(float(self.total[h]))])


def _check_variance(variance: float, values: np.ndarray) -> None:
    scale = max(1.0, float(np.mean(values) ** 2))
    if variance <= 1e-14 * scale:
        raise DegenerateVarianceError("output variance is (numerically) zero")


def sobol_indices(f: Evaluator, dist: InputDistribution, n_base: int,
                  rng: SeededRng) -> SobolResult:
    """Jansen pick-freeze estimates from base matrices A, B and the
    column-swapped hybrids AB(i); n_base*(d+2) evaluations total."""
    if f.d != dist.d:
        raise InvalidArgumentError("evaluator and distribution dimensions differ")
    if n_base < 100:
        raise InvalidArgumentError("n_base must be at least 100")
    gen = rng.generator()
    a = dist.sample(n_base, gen)
    b = dist.sample(n_base, gen)
    fa = f(a)
    fb = f(b)
    pooled = np.concatenate([fa, fb])
    variance = float(np.var(pooled))
    _check_variance(variance, pooled)
    d = dist.d
    first = np.empty(d)
    total = np.empty(d)
    for i in range(d):
        ab = a.copy()
        ab[:, i] = b[:, i]
        fab = f(ab)
        first[i] = (variance - 0.5 * float(np.mean((fb - fab) ** 2))) / variance
        total[i] = 0.5 * float(np.mean((fa - fab) ** 2)) / variance
    return SobolResult(first_order=first, total=total, total_variance=variance,
                       n_base=n_base, distribution=dist.fingerprint(),
                       estimator="jansen-pick-freeze")


def sobol_brute_force(f: Evaluator, dist: InputDistribution, n_outer: int,
                      n_inner: int, rng: SeededRng) -> SobolResult:
    """Double-loop estimator of the conditional-variance definitions.

    Exponentially more evaluations than the pick-freeze scheme; meant
    for small dimensions and cheap evaluators, as an independent oracle.
    """
    if f.d != dist.d:
        raise InvalidArgumentError("evaluator and distribution dimensions differ")
    gen = rng.generator()
    d = dist.d
    base = dist.sample(n_outer * n_inner, gen)
    f_base = f(base)
    variance = float(np.var(f_base))
    _check_variance(variance, f_base)

    first = np.empty(d)
    total = np.empty(d)
    for i in range(d):
        # Var(E[y | x_i]): freeze x_i across the inner loop. Stratifying
        # the frozen values turns the outer variance into a quadrature
        # over x_i, leaving only inner-loop averaging noise.
        xi = dist.sample_dim_stratified(i, n_outer, gen)
        pts = dist.sample(n_outer * n_inner, gen)
        pts[:, i] = np.repeat(xi, n_inner)
        cond_mean = f(pts).reshape(n_outer, n_inner).mean(axis=1)
        first[i] = float(np.var(cond_mean)) / variance
        # E[Var(y | x_-i)]: freeze x_-i, vary x_i in the inner loop.
        frozen = dist.sample(n_outer, gen)
        pts = np.repeat(frozen, n_inner, axis=0)
        inner = np.empty(n_outer * n_inner)
        for j in range(n_outer):
            inner[j * n_inner:(j + 1) * n_inner] = \
                dist.sample_dim_stratified(i, n_inner, gen)
        pts[:, i] = inner
        cond_var = f(pts).reshape(n_outer, n_inner).var(axis=1)
        total[i] = float(np.mean(cond_var)) / variance
    return SobolResult(first_order=first, total=total, total_variance=variance,
                       n_base=n_outer * n_inner, distribution=dist.fingerprint(),
                       estimator="double-loop")
