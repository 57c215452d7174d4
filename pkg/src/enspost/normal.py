"""Normal and zero-truncated normal distribution helpers.

All functions accept scalars or numpy arrays and broadcast elementwise.
The truncated family is the normal distribution conditioned on being
nonnegative; ``mu`` and ``sigma`` always refer to the parameters of the
underlying (pre-truncation) normal.

The complementary forms used throughout (``ndtr(-x)`` instead of
``1 - ndtr(x)``) keep tail probabilities accurate, which matters for
strongly truncated cases such as ``mu/sigma << 0``.
"""

import numpy as np
from scipy.special import ndtr, ndtri

SQRT_2PI = np.sqrt(2.0 * np.pi)


def norm_pdf(x):
    return np.exp(-0.5 * np.asarray(x, dtype=float) ** 2) / SQRT_2PI


def norm_cdf(x):
    return ndtr(x)


def norm_ppf(p):
    return ndtri(p)


def truncnorm_cdf(x, mu, sigma):
    """CDF of the zero-truncated normal, stable in both tails.

    P(X <= x | X >= 0) = 1 - S(x)/S(0) with S the normal survival
    function, which avoids the cancellation in (cdf(x) - cdf(0)).
    """
    x = np.asarray(x, dtype=float)
    mass = ndtr(mu / sigma)
    out = 1.0 - ndtr((mu - x) / sigma) / mass
    return np.where(x < 0, 0.0, out)


def truncnorm_ppf(u, mu, sigma):
    """Quantile function of the zero-truncated normal.

    Algebraically equal to ``mu + sigma * ndtri(ndtr(-mu/sigma)
    + u * ndtr(mu/sigma))`` but evaluated through the upper tail so that
    quantiles stay accurate when the truncation removes most of the mass.
    """
    u = np.asarray(u, dtype=float)
    mass = ndtr(mu / sigma)
    z = -ndtri((1.0 - u) * mass)
    return np.maximum(mu + sigma * z, 0.0)


def truncnorm_moments(mu, sigma):
    """Mean and variance of the zero-truncated normal (for oracles)."""
    alpha = -mu / sigma
    h = norm_pdf(alpha) / ndtr(-alpha)
    mean = mu + sigma * h
    var = sigma**2 * (1.0 + alpha * h - h * h)
    return mean, var
