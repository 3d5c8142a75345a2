"""Gradient estimator vs independent differentiation oracles.

Two oracles: central finite differences of the sampled objective under
common random numbers, and full symbolic differentiation (sympy) of the
closed-form single-point-design objective.
"""

import numpy as np
import pytest

from krigseq import (
    AcquisitionSample,
    KernelParams,
    acquisition_objective,
    build_design,
    gradient_estimate,
    standard_gaussian,
    toy_oracle,
)
from krigseq.campaign import lhs_design

REL_TOL = 0.05
ABS_TOL = 1e-5


def _fd_gradient(x, design, params, gamma, samples, h=1e-4):
    fd = np.zeros_like(x)
    for j in range(x.shape[0]):
        e = np.zeros_like(x)
        e[j] = h
        fp = acquisition_objective(x + e, design, params, gamma, samples)
        fm = acquisition_objective(x - e, design, params, gamma, samples)
        fd[j] = (fp - fm) / (2.0 * h)
    return fd


def test_gradient_matches_finite_differences():
    params = KernelParams(beta=0.0, tau2=1.0, theta=1.0)
    env = standard_gaussian(2)
    master = np.random.default_rng(2028)
    checked = 0
    for trial in range(10):
        rng = np.random.default_rng(1000 + trial)
        n = int(rng.integers(4, 16))
        pts = lhs_design(n, [[-3, 3], [-3, 3]], rng)
        ys = [toy_oracle(q) for q in pts]
        design = build_design(pts, ys, params)
        x = rng.uniform(-2.5, 2.5, size=2)
        m = 400
        W = env.sample(m, rng)
        z = rng.standard_normal(m)
        samples = [AcquisitionSample(W[i], z[i]) for i in range(m)]
        grad = gradient_estimate(x, design, params, 2.0, samples)
        fd = _fd_gradient(x, design, params, 2.0, samples)
        abs_err = np.abs(grad - fd)
        rel_err = abs_err / np.maximum(np.abs(fd), 1e-300)
        assert np.all((rel_err <= REL_TOL) | (abs_err <= ABS_TOL)), \
            f"trial {trial}: grad {grad} vs fd {fd}"
        checked += 1
    assert checked == 10
    del master


def _symbolic_gradient_1d(x0, y1, gamma, omega, z):
    """Exact dJ/dx for a 1-D single-observation model via sympy.

    The model has x1 = 0, beta = 0, tau2 = 1, theta = 1, no nugget; the
    empirical objective uses the single pair (omega, z).
    """
    import sympy as sp

    x = sp.Symbol("x")
    phibar = lambda t: sp.erfc(t / sp.sqrt(2)) / 2

    r0x = sp.exp(-(x - 0) ** 2)          # r(x1, x)
    k1 = sp.exp(-sp.Integer(0) - omega ** 2)  # r(omega, x1)
    rho = sp.exp(-((omega - x) ** 2))    # r(omega, x)

    mu_n_x = r0x * y1
    sig_n_x = sp.sqrt(1 - r0x ** 2)
    y_hyp = mu_n_x + sig_n_x * z

    det = 1 - r0x ** 2
    mu_plus = (k1 * (y1 - r0x * y_hyp) + rho * (y_hyp - r0x * y1)) / det
    quad = (k1 ** 2 - 2 * r0x * k1 * rho + rho ** 2) / det
    sig_plus = sp.sqrt(1 - quad)

    sig_n_w = sp.sqrt(1 - k1 ** 2)
    p_n = phibar((gamma - k1 * y1) / sig_n_w)
    p_plus = phibar((gamma - mu_plus) / sig_plus)
    J = (p_plus - p_n) ** 2
    dJ = sp.diff(J, x)
    return float(sp.N(dJ.subs(x, x0), 30))


@pytest.mark.parametrize("y1,z,x0", [
    (0.0, 0.0, 0.8),     # variance-path only
    (0.7, 0.5, 0.8),     # mean and variance paths
    (-0.4, -1.2, 1.4),
])
def test_gradient_matches_symbolic_oracle(y1, z, x0):
    params = KernelParams(beta=0.0, tau2=1.0, theta=1.0, nugget=0.0)
    design = build_design([[0.0]], [y1], params)
    samples = [AcquisitionSample(np.array([0.5]), z)]
    grad = gradient_estimate(np.array([x0]), design, params, 1.0, samples)
    exact = _symbolic_gradient_1d(x0, y1, 1.0, 0.5, z)
    assert grad[0] == pytest.approx(exact, rel=1e-7, abs=1e-12)
