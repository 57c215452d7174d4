"""Bivariate EMOS for joint wind-speed/temperature postprocessing.

The predictive law is a bivariate normal with the first (wind) coordinate
truncated below at zero: location ``A + sum_m B_m x_m``, scale
``C + D S D'`` with ``S`` the (M-1 denominator) ensemble covariance.
Parameters are estimated by minimizing the mean negative log predictive
density. ``C`` stays symmetric nonnegative-definite throughout the search
by optimizing its lower-triangular factor ``G`` with ``C = G G'``.

Sampling from the fitted law offers a rejection path (fast when the
truncation removes little mass) and a Gibbs path (always available);
:func:`sample_truncated` picks automatically.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy.special import ndtr, ndtri

from ._simplex import FitDiagnostics, minimize_simplex
from .errors import (
    DegeneratePredictiveError,
    FitError,
    ParameterError,
    RejectionUnsuitableError,
)

#: Added to the predictive scale matrix diagonal before density evaluation.
SIGMA_FLOOR = 1e-8

#: Rejection sampling refuses below this acceptance probability.
DEFAULT_ACCEPTANCE_THRESHOLD = 1e-3


@dataclass(frozen=True)
class BivariateEmosParams:
    a: np.ndarray  # (2,) bias
    b: np.ndarray  # (M, 2, 2) member coefficient matrices
    c: np.ndarray  # (2, 2) symmetric nonnegative-definite
    d: np.ndarray  # (2, 2) unconstrained spread coefficient
    exchangeable: bool
    diagnostics: FitDiagnostics | None = field(default=None, compare=False)

    def __post_init__(self):
        for name in ("a", "b", "c", "d"):
            arr = np.asarray(getattr(self, name), dtype=float)
            arr.setflags(write=False)
            object.__setattr__(self, name, arr)
        if self.a.shape != (2,) or self.b.ndim != 3 or self.b.shape[1:] != (2, 2):
            raise ParameterError("need a (2,) bias and (M, 2, 2) coefficient matrices")
        if self.c.shape != (2, 2) or self.d.shape != (2, 2):
            raise ParameterError("C and D must be 2x2")
        if not np.allclose(self.c, self.c.T):
            raise ParameterError("C must be symmetric")
        if np.min(np.linalg.eigvalsh(self.c)) < -1e-10:
            raise ParameterError("C must be nonnegative definite")
        if self.exchangeable and not np.allclose(self.b, self.b[:1]):
            raise ParameterError("exchangeable parameters require equal B_m")

    @property
    def n_members(self) -> int:
        return self.b.shape[0]

    def b_total(self) -> np.ndarray:
        """Sum of the member coefficient matrices."""
        return self.b.sum(axis=0)


@dataclass(frozen=True)
class BivariatePredictive:
    """Location and scale of the truncated law; wind is the first coordinate."""

    mu: np.ndarray  # (2,)
    sigma: np.ndarray  # (2, 2) symmetric positive definite

    def __post_init__(self):
        mu = np.asarray(self.mu, dtype=float)
        sig = np.asarray(self.sigma, dtype=float)
        mu.setflags(write=False)
        sig.setflags(write=False)
        object.__setattr__(self, "mu", mu)
        object.__setattr__(self, "sigma", sig)
        if mu.shape != (2,) or sig.shape != (2, 2):
            raise ParameterError("need a (2,) location and 2x2 scale")
        if not np.allclose(sig, sig.T):
            raise ParameterError("scale matrix must be symmetric")
        if sig[0, 0] <= 0 or np.linalg.det(sig) <= 0:
            raise ParameterError("scale matrix must be positive definite")

    def acceptance(self) -> float:
        """Probability mass of the untruncated law above the wind cut."""
        return float(ndtr(self.mu[0] / np.sqrt(self.sigma[0, 0])))


def ensemble_cov(members) -> np.ndarray:
    """Sample covariance of the member pairs, denominator M - 1."""
    x = np.asarray(members, dtype=float)
    if x.ndim != 2 or x.shape[1] != 2:
        raise ParameterError("members must be an (M, 2) matrix")
    if x.shape[0] < 2:
        raise ParameterError("need at least 2 members for a covariance")
    centered = x - x.mean(axis=0)
    return centered.T @ centered / (x.shape[0] - 1)


def _cov_components(members):
    """Per-instance xbar and covariance entries for the fit hot path."""
    x = np.asarray(members, dtype=float)  # (T, M, 2)
    xbar = x.mean(axis=1)
    centered = x - xbar[:, None, :]
    m = x.shape[1]
    s11 = (centered[:, :, 0] ** 2).sum(axis=1) / (m - 1)
    s22 = (centered[:, :, 1] ** 2).sum(axis=1) / (m - 1)
    s12 = (centered[:, :, 0] * centered[:, :, 1]).sum(axis=1) / (m - 1)
    return xbar, s11, s12, s22


_LOG_2PI = np.log(2.0 * np.pi)


def _neg_mean_logscore(mu1, mu2, s11, s12, s22, y1, y2):
    det = s11 * s22 - s12 * s12
    if np.any(det <= 0.0) or np.any(s11 <= 0.0):
        return 1e10
    mass = ndtr(mu1 / np.sqrt(s11))
    if np.any(mass <= 0.0):
        return 1e10
    r1 = y1 - mu1
    r2 = y2 - mu2
    quad = (r1 * r1 * s22 - 2.0 * r1 * r2 * s12 + r2 * r2 * s11) / det
    return float((_LOG_2PI + 0.5 * np.log(det) + 0.5 * quad + np.log(mass)).mean())


def fit_bivariate_emos(
    training,
    exchangeable: bool = True,
    *,
    min_training: int = 10,
    maxiter: int = 500,
    tol: float = 1e-8,
    restarts: int = 8,
    stall_tol: float | None = None,
    warm_start: bool = False,
) -> BivariateEmosParams:
    """Minimum-mean-log-score fit on (member matrix, observation pair) data.

    Training pairs are ((M, 2) member matrix, (2,) observation) with wind
    in column 0 and observation wind >= 0. ``warm_start`` seeds the search
    with the least-squares regression of observations on ensemble means
    instead of the fixed default (A = 0, B_m = I/M, G from residual
    covariance, D = 0).
    """
    members = np.array([np.asarray(m, dtype=float) for m, _ in training])
    obs = np.array([np.asarray(y, dtype=float) for _, y in training])
    if members.ndim != 3 or members.shape[2] != 2 or obs.shape[1:] != (2,):
        raise ParameterError("training must pair (M, 2) member matrices with 2-vectors")
    t_n, m_n, _ = members.shape
    if t_n < min_training:
        raise ParameterError(f"need at least {min_training} training instances, got {t_n}")
    if np.any(obs[:, 0] < 0):
        raise ParameterError("wind observations must be >= 0")

    xbar, s11, s12, s22 = _cov_components(members)
    y1, y2 = obs[:, 0], obs[:, 1]
    x1, x2 = xbar[:, 0], xbar[:, 1]

    resid = obs - xbar
    cov0 = np.cov(resid.T) + 1e-6 * np.eye(2)
    g0 = np.linalg.cholesky(cov0)

    # theta layout: A (2) | B-total or per-member blocks | G (3) | D (4)
    if exchangeable:
        def location(theta):
            bs = theta[2:6]
            mu1 = theta[0] + bs[0] * x1 + bs[1] * x2
            mu2 = theta[1] + bs[2] * x1 + bs[3] * x2
            return mu1, mu2

        x0 = np.concatenate([[0.0, 0.0], np.eye(2).ravel(), [g0[0, 0], g0[1, 0], g0[1, 1]], np.zeros(4)])
        if warm_start:
            design = np.column_stack([np.ones(t_n), xbar])
            coef, *_ = np.linalg.lstsq(design, obs, rcond=None)
            x0[0:2] = coef[0]
            x0[2:6] = coef[1:].T.ravel()
            r = obs - design @ coef
            x0[6:9] = _chol3(np.cov(r.T) + 1e-6 * np.eye(2))
        n_b = 4
    else:
        def location(theta):
            b = theta[2 : 2 + 4 * m_n].reshape(m_n, 2, 2)
            mu = theta[0:2] + np.einsum("mij,tmj->ti", b, members)
            return mu[:, 0], mu[:, 1]

        x0 = np.concatenate(
            [[0.0, 0.0], np.tile(np.eye(2).ravel() / m_n, m_n), [g0[0, 0], g0[1, 0], g0[1, 1]], np.zeros(4)]
        )
        n_b = 4 * m_n

    def objective(theta):
        mu1, mu2 = location(theta)
        g11, g21, g22 = theta[2 + n_b : 5 + n_b]
        d11, d12, d21, d22 = theta[5 + n_b : 9 + n_b]
        c11 = g11 * g11
        c12 = g11 * g21
        c22 = g21 * g21 + g22 * g22
        v11 = c11 + d11 * d11 * s11 + 2.0 * d11 * d12 * s12 + d12 * d12 * s22 + SIGMA_FLOOR
        v12 = c12 + d11 * d21 * s11 + (d11 * d22 + d12 * d21) * s12 + d12 * d22 * s22
        v22 = c22 + d21 * d21 * s11 + 2.0 * d21 * d22 * s12 + d22 * d22 * s22 + SIGMA_FLOOR
        return _neg_mean_logscore(mu1, mu2, v11, v12, v22, y1, y2)

    theta, diag = minimize_simplex(
        objective, x0, maxiter=maxiter, tol=tol, restarts=restarts, stall_tol=stall_tol
    )

    a = theta[0:2]
    if exchangeable:
        b = np.tile(theta[2:6].reshape(1, 2, 2) / m_n, (m_n, 1, 1))
    else:
        b = theta[2 : 2 + 4 * m_n].reshape(m_n, 2, 2)
    g11, g21, g22 = theta[2 + n_b : 5 + n_b]
    g = np.array([[g11, 0.0], [g21, g22]])
    c = g @ g.T
    d = theta[5 + n_b : 9 + n_b].reshape(2, 2)
    params = BivariateEmosParams(a, b, c, d, exchangeable, diag)
    if not np.isfinite(diag.objective) or diag.objective >= 1e10:
        raise FitError("fitted scale matrix is singular on the training set", params=params)
    if not diag.converged:
        raise FitError(
            f"optimizer still improving after {diag.n_restarts} restarts "
            f"({diag.n_evaluations} evaluations)",
            params=params,
        )
    return params


def _chol3(cov):
    g = np.linalg.cholesky(cov)
    return np.array([g[0, 0], g[1, 0], g[1, 1]])


def predict_bivariate(params: BivariateEmosParams, members) -> BivariatePredictive:
    """Plug current members into fitted coefficients."""
    x = np.asarray(members, dtype=float)
    if x.ndim != 2 or x.shape != (params.n_members, 2):
        raise ParameterError(f"expected ({params.n_members}, 2) members, got {x.shape}")
    mu = params.a + np.einsum("mij,mj->i", params.b, x)
    s = ensemble_cov(x)
    sigma = params.c + params.d @ s @ params.d.T
    sigma = 0.5 * (sigma + sigma.T) + SIGMA_FLOOR * np.eye(2)
    if sigma[0, 0] <= 0 or np.linalg.det(sigma) <= 0:
        raise DegeneratePredictiveError("predictive scale matrix is not positive definite")
    return BivariatePredictive(mu, sigma)


def sample_rejection(
    dist: BivariatePredictive,
    n: int,
    rng: np.random.Generator,
    acceptance_threshold: float = DEFAULT_ACCEPTANCE_THRESHOLD,
) -> np.ndarray:
    """Draw from the untruncated law, keep draws with nonnegative wind.

    Refuses (RejectionUnsuitableError) when the acceptance probability is
    below ``acceptance_threshold``; callers should fall back to
    :func:`sample_gibbs` then.
    """
    if n < 1:
        raise ParameterError("need n >= 1")
    acceptance = dist.acceptance()
    if acceptance < acceptance_threshold:
        raise RejectionUnsuitableError(
            f"rejection acceptance {acceptance:.3g} below threshold {acceptance_threshold:g}",
            acceptance=acceptance,
        )
    chol = np.linalg.cholesky(dist.sigma)
    out = np.empty((n, 2))
    got = 0
    while got < n:
        need = n - got
        batch = int(np.ceil(1.2 * need / acceptance)) + 16
        draws = rng.standard_normal((batch, 2)) @ chol.T + dist.mu
        keep = draws[draws[:, 0] >= 0.0]
        take = min(len(keep), need)
        out[got : got + take] = keep[:take]
        got += take
    return out


def sample_gibbs(
    dist: BivariatePredictive,
    n: int,
    rng: np.random.Generator,
    burn_in: int = 100,
    thinning: int = 1,
) -> np.ndarray:
    """Alternating conditional draws; wind from a one-sided truncated normal.

    The first ``burn_in`` sweeps are discarded, then every ``thinning``-th
    state is kept until n states are collected.
    """
    if n < 1 or burn_in < 0 or thinning < 1:
        raise ParameterError("need n >= 1, burn_in >= 0, thinning >= 1")
    mu1, mu2 = float(dist.mu[0]), float(dist.mu[1])
    s11, s12, s22 = float(dist.sigma[0, 0]), float(dist.sigma[0, 1]), float(dist.sigma[1, 1])
    coef1 = s12 / s22  # regression of wind on temperature
    sd1 = np.sqrt(s11 - s12 * coef1)
    coef2 = s12 / s11
    sd2 = np.sqrt(s22 - s12 * coef2)

    total = burn_in + n * thinning
    uniforms = rng.random(total)
    normals = rng.standard_normal(total)

    x1 = max(mu1, 0.0)
    x2 = mu2 + coef2 * (x1 - mu1)
    out = np.empty((n, 2))
    kept = 0
    for t in range(total):
        m1 = mu1 + coef1 * (x2 - mu2)
        # inverse-CDF draw from N(m1, sd1^2) conditioned on being >= 0,
        # evaluated through the upper tail for accuracy at low acceptance
        x1 = m1 + sd1 * (-ndtri((1.0 - uniforms[t]) * ndtr(m1 / sd1)))
        if x1 < 0.0:
            x1 = 0.0
        x2 = mu2 + coef2 * (x1 - mu1) + sd2 * normals[t]
        if t >= burn_in and (t - burn_in) % thinning == 0:
            out[kept, 0] = x1
            out[kept, 1] = x2
            kept += 1
    return out


def sample_truncated(
    dist: BivariatePredictive,
    n: int,
    rng: np.random.Generator,
    acceptance_threshold: float = DEFAULT_ACCEPTANCE_THRESHOLD,
    burn_in: int = 100,
    thinning: int = 1,
) -> np.ndarray:
    """Rejection sampling with automatic Gibbs fallback at low acceptance."""
    try:
        return sample_rejection(dist, n, rng, acceptance_threshold)
    except RejectionUnsuitableError:
        return sample_gibbs(dist, n, rng, burn_in=burn_in, thinning=thinning)
