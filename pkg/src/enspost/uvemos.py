"""Univariate EMOS: nonhomogeneous regression onto a normal or
zero-truncated normal predictive distribution.

The predictive location is an affine function of the members,
``a + b_1 x_1 + ... + b_M x_M``; the predictive variance is
``c + d * s^2`` with ``s^2`` the (1/M-denominator) empirical ensemble
variance. Parameters are estimated by minimizing the mean closed-form CRPS
over a training window. Nonnegativity of c and d is enforced by optimizing
their square roots.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from ._simplex import FitDiagnostics, minimize_simplex
from .errors import (
    DegenerateFitError,
    DegeneratePredictiveError,
    FitError,
    ParameterError,
)
from .normal import norm_ppf, truncnorm_ppf
from .scoring import crps_normal_vec, crps_truncnormal_vec

NORMAL = "normal"
TRUNCATED_NORMAL = "truncated_normal"
FAMILIES = (NORMAL, TRUNCATED_NORMAL)

_MIN_VARIANCE = 1e-12


@dataclass(frozen=True)
class UnivariateEmosParams:
    a: float
    b: np.ndarray  # (M,) regression coefficients
    c: float
    d: float
    family: str
    exchangeable: bool
    diagnostics: FitDiagnostics | None = field(default=None, compare=False)

    def __post_init__(self):
        b = np.asarray(self.b, dtype=float)
        b.setflags(write=False)
        object.__setattr__(self, "b", b)
        if self.family not in FAMILIES:
            raise ParameterError(f"unknown family {self.family!r}")
        if self.c < 0 or self.d < 0:
            raise ParameterError("variance coefficients c, d must be >= 0")
        if self.exchangeable and len(set(np.round(b, 15))) > 1:
            raise ParameterError("exchangeable parameters require equal b entries")


@dataclass(frozen=True)
class UnivariatePredictive:
    """Location/scale of the predictive law; for the truncated family these
    are the pre-truncation parameters, cut off at zero."""

    family: str
    mu: float
    sigma: float

    def __post_init__(self):
        if self.family not in FAMILIES:
            raise ParameterError(f"unknown family {self.family!r}")
        if self.sigma <= 0:
            raise ParameterError(f"sigma must be > 0, got {self.sigma}")

    def ppf(self, u):
        if self.family == NORMAL:
            return self.mu + self.sigma * norm_ppf(u)
        return truncnorm_ppf(u, self.mu, self.sigma)


def _training_arrays(training):
    members = np.array([np.asarray(m, dtype=float) for m, _ in training])
    obs = np.array([float(y) for _, y in training])
    if members.ndim != 2:
        raise ParameterError("all training member vectors must share one length")
    return members, obs


def _mean_crps(family, mu, sigma, obs):
    if family == NORMAL:
        return crps_normal_vec(mu, sigma, obs).mean()
    return crps_truncnormal_vec(mu, sigma, obs).mean()


def fit_univariate_emos(
    training,
    family: str,
    exchangeable: bool = True,
    *,
    min_training: int = 10,
    maxiter: int = 500,
    tol: float = 1e-8,
    restarts: int = 8,
    clamp_nonnegative_b: bool = False,
    warm_start: bool = False,
    trace_iterations: bool = False,
) -> UnivariateEmosParams:
    """Minimum-CRPS fit of the EMOS coefficients on (members, observation) pairs.

    ``warm_start`` replaces the fixed default starting point (a = 0,
    b_m = 1/M, c = residual variance, d = 1) with a least-squares
    regression start, which speeds up large batch fits without changing
    the model. Raises FitError (carrying the best parameters found) when
    the optimizer is still improving after the restart budget.
    """
    if family not in FAMILIES:
        raise ParameterError(f"unknown family {family!r}")
    members, obs = _training_arrays(training)
    t_n, m_n = members.shape
    if t_n < min_training:
        raise ParameterError(f"need at least {min_training} training instances, got {t_n}")
    if family == TRUNCATED_NORMAL and np.any(obs < 0):
        raise ParameterError("truncated-normal training observations must be >= 0")
    xbar = members.mean(axis=1)
    s2 = members.var(axis=1)  # 1/M denominator
    if np.ptp(obs) == 0 and np.all(np.ptp(members, axis=1) == 0) and np.ptp(xbar) == 0:
        raise DegenerateFitError("constant observations and constant ensembles")

    resid0 = obs - xbar
    c0 = max(float(np.var(resid0)), 1e-4)

    if exchangeable:
        # optimize (a, sum_b, gamma, delta) with c = gamma^2, d = delta^2
        def unpack(theta):
            return theta[0], theta[1], theta[2] ** 2, theta[3] ** 2

        def location(theta):
            return theta[0] + theta[1] * xbar

        x0 = np.array([0.0, 1.0, np.sqrt(c0), 1.0])
        if warm_start:
            coef, *_ = np.linalg.lstsq(np.column_stack([np.ones(t_n), xbar]), obs, rcond=None)
            x0[0], x0[1] = coef
            x0[2] = np.sqrt(max(float(np.var(obs - coef[0] - coef[1] * xbar)), 1e-4))
    else:

        def unpack(theta):
            return theta[0], theta[1 : 1 + m_n], theta[-2] ** 2, theta[-1] ** 2

        def location(theta):
            return theta[0] + members @ theta[1 : 1 + m_n]

        x0 = np.concatenate([[0.0], np.full(m_n, 1.0 / m_n), [np.sqrt(c0), 1.0]])
        if warm_start:
            design = np.column_stack([np.ones(t_n), members])
            coef, *_ = np.linalg.lstsq(design, obs, rcond=None)
            x0[: 1 + m_n] = coef
            x0[-2] = np.sqrt(max(float(np.var(obs - design @ coef)), 1e-4))

    def objective(theta):
        mu = location(theta)
        var = theta[-2] ** 2 + theta[-1] ** 2 * s2
        sigma = np.sqrt(np.maximum(var, _MIN_VARIANCE))
        if clamp_nonnegative_b and np.any(theta[1:-2] < 0):
            return 1e10
        return _mean_crps(family, mu, sigma, obs)

    theta, diag = minimize_simplex(
        objective,
        x0,
        maxiter=maxiter,
        tol=tol,
        restarts=restarts,
        trace_iterations=trace_iterations,
    )
    a, b_part, c, d = unpack(theta)
    if exchangeable:
        b = np.full(m_n, b_part / m_n)
    else:
        b = np.asarray(b_part, dtype=float)
        if clamp_nonnegative_b:
            b = np.maximum(b, 0.0)
    params = UnivariateEmosParams(float(a), b, float(c), float(d), family, exchangeable, diag)
    if not diag.converged:
        raise FitError(
            f"optimizer still improving after {diag.n_restarts} restarts "
            f"({diag.n_evaluations} evaluations)",
            params=params,
        )
    return params


def predict(params: UnivariateEmosParams, members) -> UnivariatePredictive:
    """Plug current members into fitted coefficients."""
    x = np.asarray(members, dtype=float)
    if x.ndim != 1 or len(x) != len(params.b):
        raise ParameterError(f"expected {len(params.b)} members, got {x.shape}")
    mu = params.a + float(params.b @ x)
    var = params.c + params.d * float(x.var())
    if var <= 0:
        raise DegeneratePredictiveError(
            "predictive variance is zero (c = 0 and constant ensemble)"
        )
    return UnivariatePredictive(params.family, mu, float(np.sqrt(var)))


def sample_q(dist: UnivariatePredictive, n: int) -> np.ndarray:
    """Equally spaced quantiles F^-1(1/(N+1)), ..., F^-1(N/(N+1)), ascending."""
    if n < 1:
        raise ParameterError("need n >= 1")
    u = np.arange(1, n + 1) / (n + 1)
    return np.asarray(dist.ppf(u), dtype=float)


def sample_r(dist: UnivariatePredictive, n: int, rng: np.random.Generator) -> np.ndarray:
    """Inverse-CDF transforms of n independent standard uniforms."""
    if n < 1:
        raise ParameterError("need n >= 1")
    return np.asarray(dist.ppf(rng.random(n)), dtype=float)
