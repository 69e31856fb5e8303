import numpy as np
import pytest

import decuq as dq
from decuq.problems import ellipsoid_problem

UNIT_BOX_2D = np.array([[0.0, 1.0], [0.0, 1.0]])


@pytest.fixture(scope="session")
def ellipsoid_model():
    """GP fit to n=40 LHS evaluations of the ellipsoid benchmark."""
    prob = ellipsoid_problem()
    design = dq.lhs(40, prob.box, dq.SeededRng(7))
    data = dq.Dataset(design.points, prob.objective(design.points), prob.box)
    return dq.fit(data, dq.FitConfig(seed=7))


def random_dataset(gen, n=None, d=None):
    """Random smooth-function dataset on the unit box.

    Outputs come from a random draw of the modeling prior (noise-free
    smooth surface); pure-noise outputs are outside the model class and
    push the likelihood onto its degenerate nugget-as-noise ridge.
    """
    from decuq.gp import _corr_sym

    from scipy.spatial.distance import pdist, squareform

    d = d if d is not None else int(gen.integers(1, 6))
    n = n if n is not None else int(gen.integers(5, 51))
    x = np.unique(gen.random((n, d)), axis=0)
    # drop near-duplicate points: they push the correlation matrix to
    # the conditioning limit of the noise-free nugget
    min_sep = 0.4 * x.shape[0] ** (-1.0 / d)
    keep = np.ones(x.shape[0], dtype=bool)
    dist = squareform(pdist(x))
    for i in range(x.shape[0]):
        if keep[i]:
            too_close = (dist[i] < min_sep) & (np.arange(x.shape[0]) > i)
            keep[too_close] = False
    x = x[keep]
    # Length-scales comparable to the typical point spacing keep the
    # correlation matrix well conditioned at the noise-free nugget.
    spacing = x.shape[0] ** (-1.0 / d)
    ell = gen.uniform(1.0, 2.0, size=d) * spacing
    corr = _corr_sym(x, ell)
    chol = np.linalg.cholesky(corr + 1e-10 * np.eye(x.shape[0]))
    y = gen.normal() + chol @ gen.standard_normal(x.shape[0])
    return dq.Dataset(x, y, np.array([[0.0, 1.0]] * d))
