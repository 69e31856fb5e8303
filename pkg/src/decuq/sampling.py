"""Latin hypercube designs and joint multivariate-normal draws."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.linalg import cholesky as _sp_cholesky

from .exceptions import InvalidArgumentError, NumericalFailureError
from .gp import PosteriorEvaluation
from .rng import SeededRng

# Jitter ladder relative to the covariance scale, matching the GP nugget policy.
_JITTER_START = 1e-8
_JITTER_MAX = 1e-4


@dataclass(frozen=True)
class LatinHypercubeDesign:
    points: np.ndarray  # (N, d)
    box: np.ndarray  # (d, 2)

    @property
    def n(self) -> int:
        return self.points.shape[0]


def lhs(n: int, box, rng) -> LatinHypercubeDesign:
    """Random Latin hypercube: one point per stratum per dimension,
    uniform jitter within each cell, independent permutations across
    dimensions.

    ``rng`` may be a SeededRng or an already-open numpy Generator.
    """
    box = np.asarray(box, dtype=float)
    if box.ndim != 2 or box.shape[1] != 2:
        raise InvalidArgumentError("box must be a (d, 2) array")
    if n < 1:
        raise InvalidArgumentError("design size must be at least 1")
    width = box[:, 1] - box[:, 0]
    if np.any(width <= 0):
        raise InvalidArgumentError("box widths must be positive")
    gen = rng.generator() if isinstance(rng, SeededRng) else rng
    d = box.shape[0]
    pts = np.empty((n, d))
    for h in range(d):
        perm = gen.permutation(n)
        pts[:, h] = box[h, 0] + width[h] * (perm + gen.random(n)) / n
    return LatinHypercubeDesign(points=pts, box=box)


def robust_cholesky(cov: np.ndarray):
    """Lower factor of a (possibly rank-deficient) covariance.

    Returns None for an exactly-zero matrix (degenerate distribution);
    otherwise escalates diagonal jitter proportional to the mean
    diagonal until the factorization succeeds.
    """
    diag = np.diag(cov)
    scale = float(np.mean(np.abs(diag)))
    if scale == 0.0 and not np.any(cov):
        return None
    if scale == 0.0:
        scale = float(np.max(np.abs(cov)))
    n = cov.shape[0]
    jitter = 0.0
    while True:
        try:
            mat = cov if jitter == 0.0 else cov + jitter * scale * np.eye(n)
            return _sp_cholesky(mat, lower=True, check_finite=False)
        except np.linalg.LinAlgError:
            pass
        jitter = _JITTER_START if jitter == 0.0 else jitter * 10.0
        if jitter > _JITTER_MAX:
            raise NumericalFailureError(
                "covariance not factorizable after jitter escalation"
            )


def mvn_draw(mean: np.ndarray, cov: np.ndarray, gen: np.random.Generator) -> np.ndarray:
    """One joint normal draw, mean + L z, on an open generator."""
    factor = robust_cholesky(cov)
    if factor is None:
        return np.array(mean, dtype=float, copy=True)
    z = gen.standard_normal(mean.shape[0])
    return mean + factor @ z


def mvn_sample(evaluation: PosteriorEvaluation, rng: SeededRng) -> np.ndarray:
    """One realization of the posterior at the evaluation points."""
    return mvn_draw(evaluation.mean, evaluation.cov, rng.generator())
