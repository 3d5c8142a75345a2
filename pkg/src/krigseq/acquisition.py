"""Information-gain acquisition and stochastic-approximation search.

The next test scenario is chosen to maximize the expected squared change
of the exceedance-probability estimate caused by one more observation,

    J(x) = E_n[ (P_n - P_n(x, f(x)))^2 ],

where f(x) | design ~ N(mu_n(x), sigma2_n(x)) and P_n(x, y) is the
estimate after hypothetically observing (x, y). J has no closed form; it
is evaluated by nested Monte Carlo and climbed with a Robbins-Monro
recursion x <- x + (a0/k) g(x) driven by a simulation-based gradient
estimator.

The gradient estimator differentiates the empirical objective built from
m environment draws omega_1..omega_m and m standard-normal draws
z_1..z_m (common random numbers):

    Jhat(x) = (1/m) sum_i ( Phat_n - Phat_n(x, y_i(x)) )^2,
    y_i(x)  = mu_n(x) + sigma_n(x) z_i,

with Phat_n(x, y) the pool average of the posterior tail ratios. All
chain-rule pieces reduce to derivatives of the squared-exponential kernel,
d r(x^i, x) / dx_j = 2 theta (x^i_j - x_j) r(x^i, x), propagated through
the rank-1 posterior update; the inverse-matrix derivative uses
d A^-1 = -A^-1 (dA) A^-1. Because Jhat is differentiated exactly, the
estimator agrees with central finite differences of Jhat to O(h^2).
"""

import math
from dataclasses import dataclass, field

import numpy as np
from scipy.linalg import cho_solve, solve_triangular
from scipy.special import ndtr
from scipy.stats import qmc

from .errors import DegenerateCandidateError, NoCandidateError
from .estimator import exceedance_from_moments, pointwise_exceedance, sigma_floor
from .gp import CandidateConditioner, DesignSet, KernelParams, cross_correlation, posterior_batch
from .scenarios import ScenarioDistribution

_INV_SQRT_2PI = 1.0 / math.sqrt(2.0 * math.pi)

try:  # fused hot loop; the numpy path below stays as the reference
    from ._fastpath import gradient_tail_sums as _fast_tail_sums
except ImportError:  # pragma: no cover - numba not installed
    _fast_tail_sums = None

#: A candidate whose posterior variance falls below
#: max(sigma_floor^2, _DEGEN_NUGGET_FACTOR * nugget * tau2) is treated as
#: an already-observed point: the nugget floors the variance near lambda*tau2
#: at observed scenarios, so the bare sigma-floor alone would never trip.
_DEGEN_NUGGET_FACTOR = 2.0

#: Iterates closer than this to an observed point are deflected.
_DEFLECT_TOL = 1e-6
_DEFLECT_STEP = 1e-4


@dataclass(frozen=True)
class AcquisitionSample:
    """One (omega, z) pair driving the gradient estimator."""

    omega: np.ndarray
    z: float


@dataclass(frozen=True)
class CandidateScore:
    """Scores attached to a proposed scenario."""

    point: np.ndarray
    info_gain: float
    lpi: float


@dataclass
class SAConfig:
    """Robbins-Monro search settings.

    ``starts`` is either an explicit list of start points or a count; with
    a count the first start is drawn from the environment law and the rest
    are scrambled-Sobol points in the bounds box. ``bounds`` is a (d, 2)
    array of axis limits used for projection (optional).
    """

    a0: float = 20.0
    iterations: int = 50
    grad_samples: int = 1000
    starts: object = 1
    bounds: np.ndarray | None = None
    refresh_pn: bool = False
    rescore_outer: int = 64
    rescore_inner: int = 1000

    def __post_init__(self):
        if self.a0 <= 0:
            raise ValueError("a0 must be positive")
        if self.iterations < 1:
            raise ValueError("iterations must be >= 1")
        if self.grad_samples < 1:
            raise ValueError("grad_samples must be >= 1")
        if self.bounds is not None:
            b = np.asarray(self.bounds, dtype=float)
            if b.ndim != 2 or b.shape[1] != 2 or np.any(b[:, 0] >= b[:, 1]):
                raise ValueError("bounds must be a (d, 2) array of lo < hi")
            self.bounds = b


@dataclass
class SAResult:
    point: np.ndarray
    score: CandidateScore
    traces: list = field(default_factory=list)
    iterations_used: int = 0


def degeneracy_threshold(params: KernelParams) -> float:
    """Variance below which a candidate counts as an observed point."""
    return max(sigma_floor(params) ** 2,
               _DEGEN_NUGGET_FACTOR * params.nugget * params.tau2)


def local_prediction_impact(x, design: DesignSet, params: KernelParams,
                            gamma: float) -> float:
    """Posterior variance of the indicator 1{f(x) > gamma}.

    The indicator is Bernoulli(p) under the posterior, so the impact is
    p(1-p); it peaks where the field is equally likely to be above or
    below the threshold and vanishes where the outcome is settled.
    """
    p = pointwise_exceedance(x, design, params, gamma)
    return p * (1.0 - p)


class _CandidateWorkspace:
    """Shared per-(design, candidate) quantities for gain and gradient.

    Extending the design by a candidate x updates the posterior at a query
    w through

        mu+(w | y)  = mu_n(w) + h(w) (y - mu_n(x)),
        sig2+(w)    = sig2_n(w) - tau2 v(w)^2,

    with v(w) = (r(w,x) - l' L^-1 r_n(w)) / l_nn, h = v / l_nn, l the
    forward-solved extension column and l_nn its new diagonal entry.
    """

    def __init__(self, design: DesignSet, params: KernelParams, x: np.ndarray):
        self.cond = CandidateConditioner(design, params, x)
        self.design = design
        self.params = params
        self.x = self.cond.x
        self.degenerate = self.cond.var_x <= degeneracy_threshold(params)
        self.sigma_x = math.sqrt(max(self.cond.var_x, 0.0))

    def pool(self, W: np.ndarray):
        """Posterior pieces at the omega pool, before and after x."""
        base_mean, base_var = posterior_batch(W, self.design, self.params)
        v, h = self.cond.cross_terms(W)
        plus_var = np.maximum(base_var - self.params.tau2 * v * v, 0.0)
        return base_mean, base_var, v, h, plus_var


def _tail_matrix(mu_plus, sd_plus, gamma, floor):
    """Phibar((gamma - mu) / sd) by row, indicator on floored rows."""
    deg = sd_plus <= floor
    if not np.any(deg):
        return ndtr((mu_plus - gamma) / sd_plus[:, None])
    sd_safe = np.where(deg, 1.0, sd_plus)
    out = ndtr((mu_plus - gamma) / sd_safe[:, None])
    out[deg] = mu_plus[deg] > gamma
    return out


def _info_gain_core(ws: _CandidateWorkspace, gamma: float,
                    W: np.ndarray, z: np.ndarray) -> float:
    params = ws.params
    floor = sigma_floor(params)
    base_mean, base_var, v, h, plus_var = ws.pool(W)
    p_base = exceedance_from_moments(base_mean, base_var, gamma, params)
    pn_hat = float(p_base.mean())
    sd_plus = np.sqrt(plus_var)
    # mu+(w_k | y_j) = mu_n(w_k) + h_k * sigma_x * z_j
    mu_plus = base_mean[:, None] + (h * ws.sigma_x)[:, None] * z[None, :]
    p_plus = _tail_matrix(mu_plus, sd_plus, gamma, floor)
    deltas = p_plus.mean(axis=0) - pn_hat
    return float(np.mean(deltas * deltas))


def information_gain(x, design: DesignSet, params: KernelParams, gamma: float,
                     env: ScenarioDistribution, outer: int, inner: int,
                     rng: np.random.Generator) -> float:
    """Nested Monte Carlo estimate of the expected squared estimate change.

    ``outer`` hypothesized responses y_j = mu_n(x) + sigma_n(x) z_j are
    drawn; for each, the estimate shift is averaged over a common set of
    ``inner`` environment draws, and the squared shifts are averaged.
    Returns exactly 0 for candidates at observed design points.
    """
    if outer < 1 or inner < 1:
        raise ValueError("outer and inner sample counts must be >= 1")
    x = np.asarray(x, dtype=float).ravel()
    ws = _CandidateWorkspace(design, params, x)
    if ws.degenerate:
        return 0.0
    W = env.sample(inner, rng)
    z = rng.standard_normal(outer)
    return _info_gain_core(ws, gamma, W, z)


def information_gain_batch(points, design: DesignSet, params: KernelParams,
                           gamma: float, env: ScenarioDistribution,
                           outer: int, inner: int,
                           rng: np.random.Generator) -> np.ndarray:
    """Information gain at each row of ``points`` under one common sample.

    Sharing the (omega, z) draws across candidates removes Monte Carlo
    jitter from comparisons, which is what landscape maps and candidate
    re-scoring want.
    """
    points = np.atleast_2d(np.asarray(points, dtype=float))
    W = env.sample(inner, rng)
    z = rng.standard_normal(outer)
    out = np.empty(points.shape[0])
    for i, x in enumerate(points):
        ws = _CandidateWorkspace(design, params, x)
        out[i] = 0.0 if ws.degenerate else _info_gain_core(ws, gamma, W, z)
    return out


def _gradient_core(ws: _CandidateWorkspace, gamma: float, W: np.ndarray,
                   z: np.ndarray, pn: float | None):
    """Gradient of the empirical objective; returns (gradient, objective).

    Vectorized over the pool: every chain-rule term factors into
    per-omega (index k), per-z (index i) and per-axis (index j) arrays,
    so the double sum reduces to a few (m x m) @ (m x d) products.
    """
    design, params, x = ws.design, ws.params, ws.x
    if ws.degenerate:
        raise DegenerateCandidateError(
            f"candidate {x.tolist()} coincides with an observed design point"
        )
    n, d = len(design), design.dim
    m = W.shape[0]
    theta, tau2 = params.theta, params.tau2
    floor = sigma_floor(params)
    cond = ws.cond

    rho = cross_correlation(W, x[None, :], params)[:, 0]          # (m,)
    d_rho = 2.0 * theta * (W - x) * rho[:, None]                  # (m, d)
    if n:
        L = design.factor
        l = cond.l
        r_nx = cross_correlation(x[None, :], design.points, params)[0]
        Dr = 2.0 * theta * (design.points - x) * r_nx[:, None]    # (n, d)
        Dl = solve_triangular(L, Dr, lower=True, check_finite=False)
        Kw = cross_correlation(W, design.points, params)
        Vw = solve_triangular(L, Kw.T, lower=True, check_finite=False)
        alpha = cho_solve((L, True), design.responses - params.beta,
                          check_finite=False)
        base_mean = params.beta + Kw @ alpha
        base_var = np.maximum(tau2 * (1.0 - np.einsum("ij,ij->j", Vw, Vw)), 0.0)
        c = rho - l @ Vw                                          # (m,)
        d_c = d_rho - Vw.T @ Dl                                   # (m, d)
        l_dot_Dl = l @ Dl                                         # (d,)
    else:
        base_mean = np.full(m, params.beta)
        base_var = np.full(m, tau2)
        c = rho
        d_c = d_rho
        l_dot_Dl = np.zeros(d)

    l_nn = cond.l_nn
    v = c / l_nn
    h = v / l_nn
    plus_var = np.maximum(base_var - tau2 * v * v, 0.0)
    sd_plus = np.sqrt(plus_var)

    d_lnn = -l_dot_Dl / l_nn                    # from d(l_nn^2) = -2 l'Dl
    d_var_x = -2.0 * tau2 * l_dot_Dl
    d_sigma_x = d_var_x / (2.0 * ws.sigma_x)
    d_v = d_c / l_nn - c[:, None] * d_lnn[None, :] / l_nn**2      # (m, d)
    d_h = d_v / l_nn - v[:, None] * d_lnn[None, :] / l_nn**2      # (m, d)
    d_plus_var = -2.0 * tau2 * v[:, None] * d_v                   # (m, d)

    # d mu+ / dx_j = G1[k, j] * z_i
    G1 = d_h * ws.sigma_x + h[:, None] * d_sigma_x[None, :]       # (m, d)

    live = sd_plus > floor  # indicator rows have zero derivative a.e.
    inv_sd = np.zeros(m)
    inv_sd[live] = 1.0 / sd_plus[live]
    slope = h * ws.sigma_x

    if _fast_tail_sums is not None:
        p_plus_mean, T1, T2 = _fast_tail_sums(base_mean, slope, inv_sd,
                                              G1, d_plus_var, z, gamma)
    else:
        p_plus_mean, T1, T2 = _gradient_tail_sums_numpy(
            base_mean, slope, inv_sd, G1, d_plus_var, z, gamma)

    if pn is None:
        pn = float(exceedance_from_moments(base_mean, base_var, gamma,
                                           params).mean())
    D = p_plus_mean - pn
    objective = float(np.mean(D * D))
    grad = (2.0 / (m * m)) * ((D * z) @ T1 + 0.5 * D @ T2)
    return grad, objective


def _gradient_tail_sums_numpy(mu0, slope, inv_sd, G1, DPV, z, gamma):
    """Reference implementation of the fused tail-sum sweep."""
    live = inv_sd > 0.0
    mu_plus = mu0[:, None] + slope[:, None] * z[None, :]
    t = (mu_plus - gamma) * inv_sd[:, None]
    p = ndtr(t)
    if not np.all(live):
        p[~live] = mu_plus[~live] > gamma
    p_plus_mean = p.mean(axis=0)
    phi = _INV_SQRT_2PI * np.exp(-0.5 * t * t)
    phi[~live, :] = 0.0
    A1 = phi * inv_sd[:, None]
    B1 = -A1 * t * inv_sd[:, None]
    T1 = A1.T @ G1
    T2 = B1.T @ DPV
    return p_plus_mean, T1, T2


def _unpack_samples(samples, dim: int):
    W = np.asarray([np.asarray(s.omega, dtype=float).ravel() for s in samples])
    z = np.asarray([float(s.z) for s in samples])
    if W.ndim != 2 or W.shape[1] != dim:
        raise ValueError("sample omegas do not match the design dimension")
    if not np.all(np.isfinite(z)):
        raise ValueError("z draws must be finite")
    return W, z


def gradient_estimate(x, design: DesignSet, params: KernelParams, gamma: float,
                      samples, pn: float | None = None) -> np.ndarray:
    """Simulation-based gradient of the information objective at ``x``.

    ``samples`` is a sequence of :class:`AcquisitionSample`; the same
    draws feed the current-estimate, hypothesized-response and derivative
    factors (common random numbers). Raises
    :class:`DegenerateCandidateError` at observed design points, where the
    objective is not differentiable.
    """
    x = np.asarray(x, dtype=float).ravel()
    if len(samples) < 1:
        raise ValueError("need at least one acquisition sample")
    W, z = _unpack_samples(samples, design.dim)
    ws = _CandidateWorkspace(design, params, x)
    grad, _ = _gradient_core(ws, gamma, W, z, pn)
    return grad


def acquisition_objective(x, design: DesignSet, params: KernelParams,
                          gamma: float, samples, pn: float | None = None) -> float:
    """Empirical m-sample objective Jhat(x) for the given draws.

    This is the function :func:`gradient_estimate` differentiates; finite
    differences of it under the same samples reproduce the estimator.
    """
    x = np.asarray(x, dtype=float).ravel()
    W, z = _unpack_samples(samples, design.dim)
    ws = _CandidateWorkspace(design, params, x)
    if ws.degenerate:
        return 0.0
    floor = sigma_floor(params)
    base_mean, base_var, v, h, plus_var = ws.pool(W)
    sd_plus = np.sqrt(plus_var)
    mu_plus = base_mean[:, None] + (h * ws.sigma_x)[:, None] * z[None, :]
    p_plus = _tail_matrix(mu_plus, sd_plus, gamma, floor)
    if pn is None:
        pn = float(exceedance_from_moments(base_mean, base_var, gamma,
                                           params).mean())
    D = p_plus.mean(axis=0) - pn
    return float(np.mean(D * D))


def _resolve_starts(config: SAConfig, env: ScenarioDistribution, dim: int,
                    rng: np.random.Generator) -> list:
    starts = config.starts
    if isinstance(starts, (int, np.integer)):
        count = int(starts)
        if count < 1:
            raise ValueError("need at least one start")
        pts = [env.sample(1, rng)[0]]
        if count > 1:
            if config.bounds is None:
                pts.extend(env.sample(count - 1, rng))
            else:
                sob = qmc.Sobol(d=dim, scramble=True,
                                seed=int(rng.integers(2**31)))
                unit = sob.random(count - 1)
                lo, hi = config.bounds[:, 0], config.bounds[:, 1]
                pts.extend(lo + unit * (hi - lo))
        return [np.asarray(p, dtype=float) for p in pts]
    return [np.asarray(p, dtype=float).ravel() for p in starts]


def _project(x: np.ndarray, bounds) -> np.ndarray:
    if bounds is None:
        return x
    return np.clip(x, bounds[:, 0], bounds[:, 1])


def _deflect(x: np.ndarray, design: DesignSet, params: KernelParams,
             rng: np.random.Generator, bounds) -> np.ndarray:
    """Nudge x off any observed point it has (nearly) landed on.

    The no-go zone is where the candidate posterior variance collapses
    (radius ~ sqrt(nugget/theta)), which can exceed the base deflection
    step, so the step doubles until the iterate is clear.
    """
    if len(design) == 0:
        return x
    step = _DEFLECT_STEP
    for _ in range(40):
        dists = np.linalg.norm(design.points - x, axis=1)
        if dists.min() > _DEFLECT_TOL and \
                not _CandidateWorkspace(design, params, x).degenerate:
            return x
        direction = rng.standard_normal(x.shape[0])
        direction /= np.linalg.norm(direction)
        x = _project(x + step * direction, bounds)
        step *= 2.0
    return x


def sa_search(design: DesignSet, params: KernelParams, gamma: float,
              env: ScenarioDistribution, config: SAConfig,
              rng: np.random.Generator,
              gradient_fn=None) -> SAResult:
    """Robbins-Monro ascent on the information objective.

    Each start runs ``config.iterations`` steps of x <- x + (a0/k) g with
    fresh (omega, z) draws per iteration, projection onto the bounds box
    and deflection away from observed points. The current-estimate level
    P_n is fixed once per run from the first pool unless
    ``config.refresh_pn``. Finals are re-scored with a common
    information-gain sample and the argmax is returned.

    ``gradient_fn(x, W, z, pn) -> g`` replaces the built-in estimator when
    given (test hook).
    """
    dim = design.dim
    starts = _resolve_starts(config, env, dim, rng)
    if not starts:
        raise NoCandidateError("no start points resolvable")

    pn_pool = env.sample(config.grad_samples, rng)
    base_mean, base_var = posterior_batch(pn_pool, design, params)
    pn = float(exceedance_from_moments(base_mean, base_var, gamma,
                                       params).mean())

    traces = []
    finals = []
    iterations_used = 0
    for x0 in starts:
        x = _deflect(_project(np.array(x0, dtype=float), config.bounds),
                     design, params, rng, config.bounds)
        trace = [x.copy()]
        for k in range(1, config.iterations + 1):
            W = env.sample(config.grad_samples, rng)
            z = rng.standard_normal(config.grad_samples)
            if config.refresh_pn:
                bm, bv = posterior_batch(W, design, params)
                pn = float(exceedance_from_moments(bm, bv, gamma,
                                                   params).mean())
            if gradient_fn is not None:
                g = np.asarray(gradient_fn(x, W, z, pn), dtype=float)
            else:
                ws = _CandidateWorkspace(design, params, x)
                g, _ = _gradient_core(ws, gamma, W, z, pn)
            x = _project(x + (config.a0 / k) * g, config.bounds)
            x = _deflect(x, design, params, rng, config.bounds)
            trace.append(x.copy())
            iterations_used += 1
        traces.append(np.asarray(trace))
        if not _CandidateWorkspace(design, params, x).degenerate:
            finals.append(x)
    if not finals:
        raise NoCandidateError("all search starts ended on observed points")

    # common fixed evaluation sample across finals
    W_score = env.sample(config.rescore_inner, rng)
    z_score = rng.standard_normal(config.rescore_outer)
    gains = []
    for x in finals:
        ws = _CandidateWorkspace(design, params, x)
        gains.append(0.0 if ws.degenerate
                     else _info_gain_core(ws, gamma, W_score, z_score))
    best = int(np.argmax(gains))
    point = finals[best]
    score = CandidateScore(point=point, info_gain=float(gains[best]),
                           lpi=local_prediction_impact(point, design, params,
                                                       gamma))
    return SAResult(point=point, score=score, traces=traces,
                    iterations_used=iterations_used)
