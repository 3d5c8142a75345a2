"""Monte Carlo estimation of the exceedance probability P(f(omega) > gamma).

Under the posterior field, the exceedance probability at a fixed scenario
is the Gaussian tail ratio

    p(x) = Phibar((gamma - mu_n(x)) / sigma_n(x)),

and the target quantity is its average over omega ~ F. Where the posterior
standard deviation falls below ``SIGMA_FLOOR_FRAC * tau`` the ratio
degenerates and the indicator 1{mu_n(x) > gamma} is used instead.
"""

from dataclasses import dataclass

import numpy as np
from scipy.special import ndtr

from .gp import DesignSet, KernelParams, posterior_batch
from .scenarios import ScenarioDistribution

#: Fraction of the prior standard deviation below which the posterior is
#: treated as exact and the Gaussian ratio collapses to an indicator.
SIGMA_FLOOR_FRAC = 1e-9


def sigma_floor(params: KernelParams) -> float:
    return SIGMA_FLOOR_FRAC * np.sqrt(params.tau2)


@dataclass(frozen=True)
class ProbabilityEstimate:
    """Monte Carlo estimate of the target probability."""

    value: float
    std_error: float
    sample_count: int

    def as_dict(self) -> dict:
        return {"value": self.value, "std_error": self.std_error,
                "sample_count": self.sample_count}


def exceedance_from_moments(means, variances, gamma: float,
                            params: KernelParams) -> np.ndarray:
    """Tail probability per point from posterior moments, floored."""
    means = np.asarray(means, dtype=float)
    sd = np.sqrt(np.maximum(np.asarray(variances, dtype=float), 0.0))
    floor = sigma_floor(params)
    out = np.empty_like(means)
    degenerate = sd <= floor
    out[degenerate] = (means[degenerate] > gamma).astype(float)
    ok = ~degenerate
    out[ok] = ndtr((means[ok] - gamma) / sd[ok])
    return out


def pointwise_exceedance(x, design: DesignSet, params: KernelParams,
                         gamma: float) -> float:
    """P(f(x) > gamma | design) under the posterior field at one point."""
    means, variances = posterior_batch(np.asarray(x, dtype=float)[None, :],
                                       design, params)
    return float(exceedance_from_moments(means, variances, gamma, params)[0])


def estimate_target(design: DesignSet, params: KernelParams, gamma: float,
                    env: ScenarioDistribution, m: int,
                    rng: np.random.Generator,
                    omegas: np.ndarray | None = None,
                    keep_integrand: bool = False):
    """Average the pointwise exceedance over ``m`` draws from F.

    Parameters
    ----------
    omegas : ndarray, optional
        Pre-drawn evaluation set to use instead of ``m`` fresh draws from
        ``rng``; campaigns pass a fixed set so the estimate trace is not
        re-randomized every step.
    keep_integrand : bool
        If true, also return the per-sample integrand values.
    """
    if omegas is None:
        if m < 1:
            raise ValueError("sample count must be >= 1")
        omegas = env.sample(m, rng)
    else:
        omegas = np.atleast_2d(np.asarray(omegas, dtype=float))
    means, variances = posterior_batch(omegas, design, params)
    integrand = exceedance_from_moments(means, variances, gamma, params)
    n = integrand.shape[0]
    value = float(integrand.mean())
    # population std keeps std_error <= 0.5/sqrt(n) for [0,1] integrands
    std_error = float(integrand.std(ddof=0) / np.sqrt(n))
    est = ProbabilityEstimate(value=value, std_error=std_error, sample_count=n)
    if keep_integrand:
        return est, integrand
    return est
