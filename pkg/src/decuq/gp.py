"""Gaussian process surrogate with Matérn 5/2 correlation and constant mean.

The model interpolates noise-free evaluations of a black-box function.
Length-scales are found by maximizing the concentrated (profile)
log-likelihood; the mean and process variance then have closed forms.
Predictions use the full conditional covariance, including the
correction term for the estimated constant mean.
"""
from __future__ import annotations

import json
import math
import warnings
from dataclasses import dataclass, field

import numpy as np
from scipy.linalg import cho_solve, cholesky as _sp_cholesky, solve_triangular
from scipy.spatial.distance import cdist, pdist, squareform

from .exceptions import InvalidArgumentError, NumericalFailureError

SQRT5 = math.sqrt(5.0)

# Diagonal inflation ladder: start small, escalate x10 on factorization
# failure, give up past the cap.
NUGGET_START = 1e-8
NUGGET_MAX = 1e-4

_LOG_SIGMA2_FLOOR = 1e-300


def _matern52_from_dist(d: np.ndarray) -> np.ndarray:
    """Matérn 5/2 correlation from length-scale-weighted distance, in place."""
    s = d * SQRT5
    out = np.exp(-s)
    out *= 1.0 + s + s * s / 3.0
    return out


def matern52(a, b, ell) -> float:
    """Correlation between two points under per-dimension length-scales."""
    a = np.asarray(a, dtype=float).ravel()
    b = np.asarray(b, dtype=float).ravel()
    ell = np.asarray(ell, dtype=float).ravel()
    if not (a.shape == b.shape == ell.shape):
        raise InvalidArgumentError(
            f"dimension mismatch: a has {a.size}, b has {b.size}, ell has {ell.size}"
        )
    if np.any(ell <= 0) or not np.all(np.isfinite(ell)):
        raise InvalidArgumentError("length-scales must be positive and finite")
    r = math.sqrt(float(np.sum(((a - b) / ell) ** 2)))
    return float(_matern52_from_dist(np.asarray(r)))


def _corr_cross(x: np.ndarray, y: np.ndarray, ell: np.ndarray) -> np.ndarray:
    """Correlation matrix between two point sets (rows are points)."""
    d = cdist(x / ell, y / ell)
    return _matern52_from_dist(d)


def _corr_sym(x: np.ndarray, ell: np.ndarray) -> np.ndarray:
    """Symmetric correlation matrix of one point set, unit diagonal."""
    d = pdist(x / ell)
    k = _matern52_from_dist(d)
    out = squareform(k)
    np.fill_diagonal(out, 1.0)
    return out


@dataclass(frozen=True)
class Dataset:
    """Distinct input points with scalar outputs inside a rectangular box."""

    inputs: np.ndarray  # (n, d)
    outputs: np.ndarray  # (n,)
    box: np.ndarray  # (d, 2) rows of (lower, upper)

    def __post_init__(self):
        x = np.atleast_2d(np.asarray(self.inputs, dtype=float))
        y = np.asarray(self.outputs, dtype=float).ravel()
        box = np.asarray(self.box, dtype=float)
        if box.ndim != 2 or box.shape[1] != 2:
            raise InvalidArgumentError("box must be a (d, 2) array of bounds")
        if x.ndim != 2 or x.shape[1] != box.shape[0]:
            raise InvalidArgumentError("inputs must be (n, d) matching the box")
        if x.shape[0] != y.shape[0]:
            raise InvalidArgumentError(
                f"{x.shape[0]} inputs but {y.shape[0]} outputs"
            )
        if x.shape[0] < 1:
            raise InvalidArgumentError("need at least one observation")
        if not (np.all(np.isfinite(x)) and np.all(np.isfinite(y))):
            raise InvalidArgumentError("inputs and outputs must be finite")
        if np.any(box[:, 1] <= box[:, 0]):
            raise InvalidArgumentError("box upper bounds must exceed lower bounds")
        if np.any(x < box[:, 0]) or np.any(x > box[:, 1]):
            raise InvalidArgumentError("every input must lie inside the box")
        if np.unique(x, axis=0).shape[0] != x.shape[0]:
            raise InvalidArgumentError(
                "duplicate input points make the correlation matrix singular"
            )
        x = x.copy()
        y = y.copy()
        box = box.copy()
        for arr in (x, y, box):
            arr.setflags(write=False)
        object.__setattr__(self, "inputs", x)
        object.__setattr__(self, "outputs", y)
        object.__setattr__(self, "box", box)

    @property
    def n(self) -> int:
        return self.inputs.shape[0]

    @property
    def d(self) -> int:
        return self.inputs.shape[1]


def correlation_matrix(data: Dataset, ell) -> np.ndarray:
    ell = np.asarray(ell, dtype=float).ravel()
    if ell.size != data.d:
        raise InvalidArgumentError("length-scale dimension mismatch")
    if np.any(ell <= 0):
        raise InvalidArgumentError("length-scales must be positive")
    return _corr_sym(data.inputs, ell)


def _chol_with_nugget(corr: np.ndarray, nugget: float):
    """Lower Cholesky factor of corr + nugget*I with escalation ladder."""
    n = corr.shape[0]
    nug = nugget
    while True:
        try:
            mat = corr + nug * np.eye(n)
            chol = _sp_cholesky(mat, lower=True, check_finite=False)
            return chol, nug
        except np.linalg.LinAlgError:
            pass
        nug = nug * 10.0 if nug > 0 else NUGGET_START
        if nug > NUGGET_MAX:
            raise NumericalFailureError(
                "correlation matrix not factorizable even at maximum nugget"
            )


def mle_mean_variance(y: np.ndarray, chol_lower: np.ndarray):
    """Closed-form mean and variance given a factored correlation matrix."""
    y = np.asarray(y, dtype=float).ravel()
    n = y.size
    ones = np.ones(n)
    try:
        rinv_y = cho_solve((chol_lower, True), y, check_finite=False)
        rinv_1 = cho_solve((chol_lower, True), ones, check_finite=False)
    except (np.linalg.LinAlgError, ValueError) as exc:
        raise NumericalFailureError(f"solve with factor failed: {exc}")
    denom = float(ones @ rinv_1)
    if denom <= 0:
        raise NumericalFailureError("1'R^-1 1 is not positive")
    mu_hat = float(ones @ rinv_y) / denom
    resid = y - mu_hat
    rinv_r = cho_solve((chol_lower, True), resid, check_finite=False)
    sigma2_hat = max(float(resid @ rinv_r) / n, 0.0)
    return mu_hat, sigma2_hat


def profile_log_likelihood(data: Dataset, ell, nugget: float = NUGGET_START) -> float:
    """Concentrated log-likelihood of the length-scales (additive const dropped)."""
    if data.n < 2:
        raise InvalidArgumentError("likelihood fitting needs n >= 2 observations")
    corr = correlation_matrix(data, ell)
    chol, _ = _chol_with_nugget(corr, nugget)
    _, sigma2 = mle_mean_variance(data.outputs, chol)
    logdet = 2.0 * float(np.sum(np.log(np.diag(chol))))
    n = data.n
    return -0.5 * n * math.log(max(sigma2, _LOG_SIGMA2_FLOOR)) - 0.5 * logdet


@dataclass(frozen=True)
class FitConfig:
    """Budget and bounds for the length-scale search.

    The search runs in log length-scale, coordinates rescaled to the
    unit box, over [log(lower_mult), log(upper_mult)] per dimension.
    """

    restarts: int = 8
    seed: int = 0
    step_init: float = 0.6
    step_tol: float = 1e-3
    max_evals_per_restart: int = 300
    lower_mult: float = 0.05
    upper_mult: float = 10.0


@dataclass(frozen=True)
class FittedGp:
    """Immutable trained surrogate with cached solves for prediction."""

    data: Dataset
    ell: np.ndarray  # original units
    ell_scaled: np.ndarray  # unit-box units
    mu_hat: float
    sigma2_hat: float
    nugget: float
    chol_R: np.ndarray
    cached_alpha: np.ndarray  # R^-1 (y - 1 mu)
    cached_Rinv_ones: np.ndarray
    cached_ones_Rinv_ones: float
    log_likelihood: float
    inputs_scaled: np.ndarray = field(repr=False, default=None)

    def __post_init__(self):
        for name in ("ell", "ell_scaled", "chol_R", "cached_alpha",
                     "cached_Rinv_ones", "inputs_scaled"):
            arr = getattr(self, name)
            arr = np.asarray(arr, dtype=float)
            arr.setflags(write=False)
            object.__setattr__(self, name, arr)

    @property
    def d(self) -> int:
        return self.data.d


def _scale_inputs(x: np.ndarray, box: np.ndarray) -> np.ndarray:
    lo = box[:, 0]
    width = box[:, 1] - box[:, 0]
    return (x - lo) / width


def _build_model(data: Dataset, xs: np.ndarray, ell_scaled: np.ndarray,
                 loglik: float) -> FittedGp:
    corr = _corr_sym(xs, ell_scaled)
    chol, nugget = _chol_with_nugget(corr, NUGGET_START)
    mu_hat, sigma2_hat = mle_mean_variance(data.outputs, chol)
    ones = np.ones(data.n)
    alpha = cho_solve((chol, True), data.outputs - mu_hat, check_finite=False)
    rinv_ones = cho_solve((chol, True), ones, check_finite=False)
    width = data.box[:, 1] - data.box[:, 0]
    return FittedGp(
        data=data,
        ell=ell_scaled * width,
        ell_scaled=ell_scaled,
        mu_hat=mu_hat,
        sigma2_hat=sigma2_hat,
        nugget=nugget,
        chol_R=chol,
        cached_alpha=alpha,
        cached_Rinv_ones=rinv_ones,
        cached_ones_Rinv_ones=float(ones @ rinv_ones),
        log_likelihood=loglik,
        inputs_scaled=xs,
    )


def fit(data: Dataset, config: FitConfig = FitConfig()) -> FittedGp:
    """Estimate length-scales by multi-start pattern search on the profile likelihood."""
    if data.n < 2:
        raise InvalidArgumentError("fitting needs at least two observations")
    d = data.d
    xs = _scale_inputs(data.inputs, data.box)
    y = data.outputs
    n = data.n
    lo = math.log(config.lower_mult)
    hi = math.log(config.upper_mult)

    def objective(log_ell: np.ndarray) -> float:
        ell = np.exp(log_ell)
        corr = _corr_sym(xs, ell)
        try:
            chol, _ = _chol_with_nugget(corr, NUGGET_START)
            _, sigma2 = mle_mean_variance(y, chol)
        except NumericalFailureError:
            return -math.inf
        logdet = 2.0 * float(np.sum(np.log(np.diag(chol))))
        return -0.5 * n * math.log(max(sigma2, _LOG_SIGMA2_FLOOR)) - 0.5 * logdet

    # Space-filling restart points: stratified per coordinate with a
    # deterministic generator keyed by the config seed.
    gen = np.random.Generator(np.random.Philox(
        np.random.SeedSequence(entropy=config.seed, spawn_key=(0x617,))))
    starts = np.empty((config.restarts, d))
    for h in range(d):
        perm = gen.permutation(config.restarts)
        starts[:, h] = lo + (hi - lo) * (perm + gen.random(config.restarts)) / config.restarts

    best_val = -math.inf
    best_log_ell = None
    for s in range(config.restarts):
        x = starts[s].copy()
        val = objective(x)
        evals = 1
        step = config.step_init
        while step > config.step_tol and evals < config.max_evals_per_restart:
            improved = False
            for h in range(d):
                for delta in (step, -step):
                    cand = x.copy()
                    cand[h] = min(max(x[h] + delta, lo), hi)
                    if cand[h] == x[h]:
                        continue
                    v = objective(cand)
                    evals += 1
                    if v > val:
                        val, x = v, cand
                        improved = True
                        break
            if not improved:
                step *= 0.5
        if val > best_val:
            best_val, best_log_ell = val, x
    if best_log_ell is None or best_val == -math.inf:
        raise NumericalFailureError("all likelihood restarts failed factorization")
    return _build_model(data, xs, np.exp(best_log_ell), best_val)


@dataclass(frozen=True)
class PosteriorEvaluation:
    """Joint conditional mean and covariance at a finite set of points."""

    points: np.ndarray  # (N, d)
    mean: np.ndarray  # (N,)
    cov: np.ndarray  # (N, N)


def posterior_mean(model: FittedGp, points) -> np.ndarray:
    """Conditional mean only (cheap path for mean optimization)."""
    pts = _validate_points(model, points)
    ps = _scale_inputs(pts, model.data.box)
    r = _corr_cross(ps, model.inputs_scaled, model.ell_scaled)
    return model.mu_hat + r @ model.cached_alpha


def posterior(model: FittedGp, points) -> PosteriorEvaluation:
    """Joint conditional distribution at the given points.

    The covariance carries the extra rank-one term accounting for the
    estimated constant mean; it is symmetrized and its diagonal clamped
    at zero to absorb round-off.
    """
    pts = _validate_points(model, points)
    ps = _scale_inputs(pts, model.data.box)
    r = _corr_cross(ps, model.inputs_scaled, model.ell_scaled)  # (N, n)
    mean = model.mu_hat + r @ model.cached_alpha
    v = solve_triangular(model.chol_R, r.T, lower=True, check_finite=False)  # (n, N)
    cov = _corr_sym(ps, model.ell_scaled)
    cov -= v.T @ v
    u = 1.0 - r @ model.cached_Rinv_ones
    cov += np.outer(u, u) / model.cached_ones_Rinv_ones
    cov *= model.sigma2_hat
    cov = 0.5 * (cov + cov.T)
    diag = np.diag(cov).copy()
    np.fill_diagonal(cov, np.maximum(diag, 0.0))
    return PosteriorEvaluation(points=pts, mean=mean, cov=cov)


def _validate_points(model: FittedGp, points) -> np.ndarray:
    pts = np.atleast_2d(np.asarray(points, dtype=float))
    if pts.shape[1] != model.d:
        raise InvalidArgumentError(
            f"points have dimension {pts.shape[1]}, model expects {model.d}"
        )
    if not np.all(np.isfinite(pts)):
        raise InvalidArgumentError("query points must be finite")
    box = model.data.box
    if np.any(pts < box[:, 0]) or np.any(pts > box[:, 1]):
        warnings.warn("querying the surrogate outside its training box "
                      "(extrapolation)", stacklevel=3)
    return pts


def model_to_json(model: FittedGp) -> str:
    """Self-describing serialization; reload rebuilds all caches."""
    payload = {
        "format": "decuq-gp-v1",
        "dimension": model.d,
        "box": model.data.box.tolist(),
        "lengthscales": model.ell.tolist(),
        "lengthscales_unit_box": model.ell_scaled.tolist(),
        "mean": model.mu_hat,
        "variance": model.sigma2_hat,
        "nugget": model.nugget,
        "log_likelihood": model.log_likelihood,
        "training_inputs": model.data.inputs.tolist(),
        "training_outputs": model.data.outputs.tolist(),
    }
    return json.dumps(payload, indent=2)


def model_from_json(text: str) -> FittedGp:
    payload = json.loads(text)
    if payload.get("format") != "decuq-gp-v1":
        raise InvalidArgumentError("unrecognized model file format")
    data = Dataset(
        inputs=np.array(payload["training_inputs"], dtype=float),
        outputs=np.array(payload["training_outputs"], dtype=float),
        box=np.array(payload["box"], dtype=float),
    )
    xs = _scale_inputs(data.inputs, data.box)
    model = _build_model(data, xs, np.array(payload["lengthscales_unit_box"]),
                         payload["log_likelihood"])
    return model


def save_model(model: FittedGp, path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(model_to_json(model))


def load_model(path) -> FittedGp:
    with open(path, "r", encoding="utf-8") as fh:
        return model_from_json(fh.read())
