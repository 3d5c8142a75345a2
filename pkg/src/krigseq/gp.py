"""Deterministic kriging model with a constant prior mean.

The response surface is modeled as a Gaussian random field with mean
``beta`` and covariance ``tau2 * r(x, x~)``, where the correlation kernel
is the squared-exponential

    r(x, x~) = exp(-theta * ||x - x~||^2).

Conditioning on error-free observations at design points gives the usual
kriging posterior

    mu_n(x)     = beta + r(x|X)' (R + lam*I)^-1 (Y - beta)
    sigma2_n(x) = tau2 * (1 - r(x|X)' (R + lam*I)^-1 r(x|X))

where ``R`` is the design correlation matrix and ``lam`` a small diagonal
nugget added for numerical stability. The correlation factor is kept as a
lower-triangular Cholesky factor and extended by one rank per new
observation, which reproduces a from-scratch factorization to machine
precision.
"""

import logging
from dataclasses import dataclass, field

import numpy as np
from scipy.linalg import cho_solve, solve_triangular

from .errors import (
    DimensionMismatchError,
    DuplicateDesignPointError,
    NumericalDegeneracyError,
)

log = logging.getLogger(__name__)

#: Points closer than this (Euclidean) are treated as duplicates.
DUPLICATE_TOL = 1e-12

#: Factor and reconstructed correlation matrix must agree to this.
FACTOR_TOL = 1e-10


@dataclass(frozen=True)
class KernelParams:
    """Prior mean and squared-exponential kernel parameters.

    Parameters
    ----------
    beta : float
        Constant prior mean, in response units.
    tau2 : float
        Process variance, response units squared. Must be positive.
    theta : float
        Inverse squared length scale. Must be positive.
    nugget : float
        Diagonal regularizer added to the correlation matrix, as a
        fraction of ``tau2``. Must lie in [0, 1e-4].
    """

    beta: float
    tau2: float
    theta: float
    nugget: float = 1e-8

    def __post_init__(self):
        if not (self.tau2 > 0):
            raise ValueError(f"tau2 must be > 0, got {self.tau2}")
        if not (self.theta > 0):
            raise ValueError(f"theta must be > 0, got {self.theta}")
        if not (0 <= self.nugget <= 1e-4):
            raise ValueError(f"nugget must be in [0, 1e-4], got {self.nugget}")


@dataclass(frozen=True)
class PosteriorMoments:
    """Posterior mean and variance of the field at one query point."""

    mean: float
    variance: float


@dataclass(frozen=True)
class DesignSet:
    """Immutable set of observed scenarios with a factorized correlation.

    ``factor`` is the lower Cholesky factor of ``R + nugget*I`` for the
    kernel parameters the set was built with; all query operations assume
    the same parameters are passed back in.
    """

    dim: int
    points: np.ndarray = field(repr=False)
    responses: np.ndarray = field(repr=False)
    factor: np.ndarray = field(repr=False)

    def __len__(self) -> int:
        return self.points.shape[0]


def _freeze(a: np.ndarray) -> np.ndarray:
    a = np.ascontiguousarray(a, dtype=float)
    a.setflags(write=False)
    return a


def empty_design(dim: int) -> DesignSet:
    """Design with no observations; the posterior is the prior."""
    if dim < 1:
        raise ValueError("dim must be a positive integer")
    return DesignSet(
        dim=int(dim),
        points=_freeze(np.empty((0, dim))),
        responses=_freeze(np.empty(0)),
        factor=_freeze(np.empty((0, 0))),
    )


def correlation(x, x_tilde, params: KernelParams) -> float:
    """Kernel value exp(-theta * ||x - x~||^2), in (0, 1]."""
    x = np.asarray(x, dtype=float)
    x_tilde = np.asarray(x_tilde, dtype=float)
    if x.shape != x_tilde.shape:
        raise DimensionMismatchError(
            f"scenario dimensions differ: {x.shape} vs {x_tilde.shape}"
        )
    diff = x - x_tilde
    return float(np.exp(-params.theta * float(diff @ diff)))


def _sq_dists(A: np.ndarray, B: np.ndarray) -> np.ndarray:
    # ||a-b||^2 = ||a||^2 + ||b||^2 - 2 a.b; clamp tiny negatives
    a2 = np.einsum("ij,ij->i", A, A)
    b2 = np.einsum("ij,ij->i", B, B)
    return np.maximum(a2[:, None] + b2[None, :] - 2.0 * (A @ B.T), 0.0)


def cross_correlation(A, B, params: KernelParams) -> np.ndarray:
    """Correlation matrix between row sets ``A`` (m,d) and ``B`` (k,d)."""
    A = np.atleast_2d(np.asarray(A, dtype=float))
    B = np.atleast_2d(np.asarray(B, dtype=float))
    if A.shape[1] != B.shape[1]:
        raise DimensionMismatchError(
            f"scenario dimensions differ: {A.shape[1]} vs {B.shape[1]}"
        )
    return np.exp(-params.theta * _sq_dists(A, B))


def _nearest_pair(points: np.ndarray):
    d = _sq_dists(points, points)
    np.fill_diagonal(d, np.inf)
    i, j = np.unravel_index(np.argmin(d), d.shape)
    return int(i), int(j), float(np.sqrt(d[i, j]))


def build_design(points, responses, params: KernelParams) -> DesignSet:
    """Construct a DesignSet from scratch, factorizing R + nugget*I."""
    points = np.atleast_2d(np.asarray(points, dtype=float))
    responses = np.asarray(responses, dtype=float).ravel()
    n, dim = points.shape
    if responses.shape[0] != n:
        raise ValueError(f"{n} points but {responses.shape[0]} responses")
    if n == 0:
        return empty_design(dim)
    if n > 1:
        i, j, dist = _nearest_pair(points)
        if dist <= DUPLICATE_TOL:
            raise DuplicateDesignPointError(
                f"design points {i} and {j} coincide (distance {dist:.3e})"
            )
    d2 = _sq_dists(points, points)
    np.fill_diagonal(d2, 0.0)  # exact unit diagonal despite cancellation
    R = np.exp(-params.theta * (d2 + d2.T) / 2.0)
    R[np.diag_indices(n)] += params.nugget
    try:
        factor = np.linalg.cholesky(R)
    except np.linalg.LinAlgError:
        i, j, dist = _nearest_pair(points)
        raise NumericalDegeneracyError(
            "correlation matrix is not positive definite after nugget "
            f"regularization; nearest design points are {i} and {j} "
            f"at distance {dist:.3e}"
        ) from None
    return DesignSet(
        dim=dim,
        points=_freeze(points),
        responses=_freeze(responses),
        factor=_freeze(factor),
    )


def _check_query(x, design: DesignSet) -> np.ndarray:
    x = np.asarray(x, dtype=float).ravel()
    if x.shape[0] != design.dim:
        raise DimensionMismatchError(
            f"query has dimension {x.shape[0]}, design has {design.dim}"
        )
    return x


def posterior_batch(X, design: DesignSet, params: KernelParams):
    """Posterior mean and variance at each row of ``X``.

    Returns
    -------
    means, variances : ndarray of shape (m,)
        Variances are clamped below at zero.
    """
    X = np.atleast_2d(np.asarray(X, dtype=float))
    if X.shape[1] != design.dim:
        raise DimensionMismatchError(
            f"query has dimension {X.shape[1]}, design has {design.dim}"
        )
    n = len(design)
    if n == 0:
        m = X.shape[0]
        return np.full(m, params.beta), np.full(m, params.tau2)
    L = design.factor
    K = cross_correlation(X, design.points, params)  # (m, n)
    yc = design.responses - params.beta
    alpha = cho_solve((L, True), yc, check_finite=False)
    means = params.beta + K @ alpha
    V = solve_triangular(L, K.T, lower=True, check_finite=False)  # (n, m)
    quad = np.einsum("ij,ij->j", V, V)
    raw = params.tau2 * (1.0 - quad)
    bad = raw < -1e-9 * params.tau2
    if np.any(bad):
        log.debug("clamping %d negative posterior variances (min raw %.3e)",
                  int(bad.sum()), float(raw.min()))
    variances = np.maximum(raw, 0.0)
    return means, variances


def posterior(x, design: DesignSet, params: KernelParams) -> PosteriorMoments:
    """Kriging posterior at a single query point.

    With an empty design this returns the prior ``(beta, tau2)``.
    """
    x = _check_query(x, design)
    means, variances = posterior_batch(x[None, :], design, params)
    return PosteriorMoments(mean=float(means[0]), variance=float(variances[0]))


def _extension_column(design: DesignSet, x: np.ndarray, params: KernelParams):
    """Pieces of the rank-1 factor extension for appending ``x``.

    Returns ``(r_nx, l, s2)`` where ``l`` solves ``L l = r_nx`` and
    ``s2 = 1 + nugget - l'l`` is the squared new diagonal entry.
    """
    n = len(design)
    if n == 0:
        return np.empty(0), np.empty(0), 1.0 + params.nugget
    r_nx = cross_correlation(x[None, :], design.points, params)[0]
    l = solve_triangular(design.factor, r_nx, lower=True, check_finite=False)
    s2 = 1.0 + params.nugget - float(l @ l)
    return r_nx, l, s2


def extend(design: DesignSet, x, y: float, params: KernelParams) -> DesignSet:
    """New DesignSet with ``(x, y)`` appended; the factor grows by one rank.

    Raises
    ------
    DuplicateDesignPointError
        If ``x`` is within ``DUPLICATE_TOL`` of an existing point.
    NumericalDegeneracyError
        If the extended correlation matrix loses positive definiteness.
    """
    x = _check_query(x, design)
    n = len(design)
    if n > 0:
        dists = np.linalg.norm(design.points - x, axis=1)
        nearest = int(np.argmin(dists))
        if dists[nearest] <= DUPLICATE_TOL:
            raise DuplicateDesignPointError(
                f"new point duplicates design point {nearest} "
                f"(distance {dists[nearest]:.3e})"
            )
    _, l, s2 = _extension_column(design, x, params)
    if not (s2 > 0):
        nearest = int(np.argmin(np.linalg.norm(design.points - x, axis=1)))
        raise NumericalDegeneracyError(
            f"extending with {x.tolist()} makes the correlation matrix "
            f"numerically singular; nearest design point is {nearest}"
        )
    factor = np.zeros((n + 1, n + 1))
    factor[:n, :n] = design.factor
    factor[n, :n] = l
    factor[n, n] = np.sqrt(s2)
    return DesignSet(
        dim=design.dim,
        points=_freeze(np.vstack([design.points, x[None, :]])),
        responses=_freeze(np.append(design.responses, float(y))),
        factor=_freeze(factor),
    )


class CandidateConditioner:
    """Posterior of the model after hypothetically observing ``(x, y)``.

    Conditioning on one extra point updates the n-point posterior as

        mu+(w | x, y)   = mu_n(w) + h(w) * (y - mu_n(x))
        sigma2+(w)      = sigma2_n(w) - tau2 * v(w)^2

    with ``v(w) = (r(w,x) - l' L^-1 r_n(w)) / l_nn`` and ``h = v / l_nn``,
    reusing the n-point factor for any number of ``(x, y)`` hypotheses.
    The update is algebraically identical to extending the design and
    querying, without mutating anything.
    """

    def __init__(self, design: DesignSet, params: KernelParams, x):
        self.design = design
        self.params = params
        self.x = _check_query(x, design)
        r_nx, l, s2 = _extension_column(design, self.x, params)
        if not (s2 > 0):
            raise NumericalDegeneracyError(
                f"candidate {self.x.tolist()} is numerically indistinguishable "
                "from the observed design"
            )
        self.l = l
        self.l_nn = float(np.sqrt(s2))
        n = len(design)
        if n:
            alpha = cho_solve((design.factor, True),
                              design.responses - params.beta,
                              check_finite=False)
            self.mean_x = params.beta + float(r_nx @ alpha)
            self.var_x = max(params.tau2 * (1.0 - float(l @ l)), 0.0)
        else:
            self.mean_x = params.beta
            self.var_x = params.tau2

    def cross_terms(self, W: np.ndarray):
        """Per-row update ingredients ``(v, h)`` for query rows ``W``."""
        rho = cross_correlation(W, self.x[None, :], self.params)[:, 0]
        if len(self.design):
            Kw = cross_correlation(W, self.design.points, self.params)
            Vw = solve_triangular(self.design.factor, Kw.T, lower=True,
                                  check_finite=False)
            v = (rho - self.l @ Vw) / self.l_nn
        else:
            v = rho / self.l_nn
        return v, v / self.l_nn

    def posterior_batch(self, W, y: float):
        W = np.atleast_2d(np.asarray(W, dtype=float))
        base_mean, base_var = posterior_batch(W, self.design, self.params)
        v, h = self.cross_terms(W)
        means = base_mean + h * (y - self.mean_x)
        variances = np.maximum(base_var - self.params.tau2 * v * v, 0.0)
        return means, variances

    def posterior(self, omega, y: float) -> PosteriorMoments:
        omega = _check_query(omega, self.design)
        means, variances = self.posterior_batch(omega[None, :], y)
        return PosteriorMoments(mean=float(means[0]), variance=float(variances[0]))


def posterior_with_candidate(omega, design: DesignSet, x, y: float,
                             params: KernelParams) -> PosteriorMoments:
    """Posterior at ``omega`` given the design plus a hypothetical ``(x, y)``.

    Equivalent to ``posterior(omega, extend(design, x, y, params), params)``
    but leaves ``design`` untouched. For repeated hypotheses at the same
    ``x`` use :class:`CandidateConditioner` directly.
    """
    return CandidateConditioner(design, params, x).posterior(omega, y)


def design_to_dict(design: DesignSet, params: KernelParams) -> dict:
    """JSON-ready snapshot of a design set and its kernel parameters."""
    return {
        "dim": design.dim,
        "points": [list(map(float, p)) for p in design.points],
        "responses": [float(y) for y in design.responses],
        "params": {
            "beta": params.beta,
            "tau2": params.tau2,
            "theta": params.theta,
            "nugget": params.nugget,
        },
    }


def design_from_dict(doc: dict):
    """Inverse of :func:`design_to_dict`; refactorizes the correlation."""
    p = doc["params"]
    params = KernelParams(beta=float(p["beta"]), tau2=float(p["tau2"]),
                          theta=float(p["theta"]), nugget=float(p["nugget"]))
    points = np.asarray(doc["points"], dtype=float)
    if points.size == 0:
        return empty_design(int(doc["dim"])), params
    design = build_design(points.reshape(-1, int(doc["dim"])),
                          doc["responses"], params)
    return design, params
