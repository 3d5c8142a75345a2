import numpy as np
import pytest

from krigseq import KernelParams, build_design


def random_model(rng, n_min=3, n_max=25, dim=2, smooth_responses=True):
    """Random kriging model with well-separated points.

    Responses are drawn from the prior field so that near-coincident
    points stay numerically consistent (the regime the interpolation
    tolerances are specified for).
    """
    params = KernelParams(
        beta=float(rng.uniform(-1.0, 1.0)),
        tau2=float(rng.uniform(0.25, 4.0)),
        theta=float(rng.uniform(0.3, 3.0)),
        nugget=1e-8,
    )
    n = int(rng.integers(n_min, n_max + 1))
    sep = 0.7 / np.sqrt(params.theta)
    box = sep * max(4.0, 1.5 * np.sqrt(n))
    pts = []
    for _ in range(400):
        cand = rng.uniform(-box, box, size=dim)
        if all(np.linalg.norm(cand - p) > sep for p in pts):
            pts.append(cand)
            if len(pts) == n:
                break
    pts = np.asarray(pts)
    n = pts.shape[0]
    if smooth_responses:
        d2 = ((pts[:, None, :] - pts[None, :, :]) ** 2).sum(-1)
        cov = params.tau2 * np.exp(-params.theta * d2)
        cov[np.diag_indices(n)] += 1e-10 * params.tau2
        ys = params.beta + np.linalg.cholesky(cov) @ rng.standard_normal(n)
    else:
        ys = rng.normal(size=n)
    return build_design(pts, ys, params), params


@pytest.fixture
def rng():
    return np.random.default_rng(20240817)


def small_toy_doc(**overrides):
    """Toy campaign config shrunk for fast unit tests."""
    doc = {
        "params": {"beta": 0.0, "tau2": 1.0, "theta": 1.0, "nugget": 1e-8},
        "gamma": 2.0,
        "env": {"kind": "iid-standard-gaussian", "dim": 2},
        "oracle": {"id": "toy"},
        "initial_design": {"count": 8, "bounds": [[-3.0, 3.0], [-3.0, 3.0]]},
        "sa": {"a0": 20.0, "iterations": 5, "grad_samples": 60,
               "rescore_outer": 16, "rescore_inner": 200},
        "steps": 2,
        "eval": {"samples": 400, "resample": False},
        "seed": 11,
        "selection_mode": "sa-optimized",
    }
    doc.update(overrides)
    return doc
