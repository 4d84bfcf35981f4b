"""Reference computations that share no code with the package.

Likelihoods are written out directly from the model densities and maximized
with general-purpose optimizers; integrals over a missing continuous value
use Gauss-Legendre on a wide finite interval instead of Gauss-Hermite.
"""

import numpy as np
from scipy.optimize import minimize
from scipy.stats import norm


def _log_bern(y, eta):
    return y * eta - np.logaddexp(0.0, eta)


def enum_loglik(theta, y, z, z1, z2):
    """Observed log-likelihood with Z1 (binary) possibly missing.

    Model: Y | Z, Z1, Z2 logistic (beta, 4 params); Z1 | Z, Z2 logistic
    (gamma, 3 params).  Missing Z1 is summed over {0, 1} exactly.
    """
    beta, gamma = theta[:4], theta[4:]
    total = 0.0
    for yi, zi, z1i, z2i in zip(y, z, z1, z2):
        g = gamma[0] + gamma[1] * zi + gamma[2] * z2i
        if np.isnan(z1i):
            terms = [_log_bern(yi, beta[0] + beta[1] * zi + beta[2] * v + beta[3] * z2i)
                     + _log_bern(v, g) for v in (0.0, 1.0)]
            total += np.logaddexp(*terms)
        else:
            total += (_log_bern(yi, beta[0] + beta[1] * zi + beta[2] * z1i + beta[3] * z2i)
                      + _log_bern(z1i, g))
    return total


def _polish(f, x0):
    res = minimize(f, x0, method="BFGS", options={"gtol": 1e-10, "maxiter": 10_000})
    res = minimize(f, res.x, method="Nelder-Mead",
                   options={"xatol": 1e-11, "fatol": 1e-14, "maxiter": 200_000,
                            "maxfev": 200_000, "adaptive": True})
    return res.x


def maximize_enum(y, z, z1, z2):
    return _polish(lambda t: -enum_loglik(t, y, z, z1, z2), np.zeros(7))


def blockwise_loglik(theta, y, z, z1, z2, n_leg=200):
    """Observed log-likelihood when (Y, Z1, Z2) go missing together.

    theta = beta (4) | gamma for Z1 | Z (2) | delta for Z2 | Z, Z1 (3) | log sigma.
    Incomplete rows integrate the joint of (Y, Z1, Z2) given Z numerically.
    """
    beta, gamma, delta, sigma = theta[:4], theta[4:6], theta[6:9], np.exp(theta[9])
    nodes, weights = np.polynomial.legendre.leggauss(n_leg)
    total = 0.0
    for yi, zi, z1i, z2i in zip(y, z, z1, z2):
        if np.isnan(yi):
            s = 0.0
            for v1 in (0.0, 1.0):
                p1 = np.exp(_log_bern(v1, gamma[0] + gamma[1] * zi))
                mu = delta[0] + delta[1] * zi + delta[2] * v1
                lo, hi = mu - 12 * sigma, mu + 12 * sigma
                x = 0.5 * (hi - lo) * nodes + 0.5 * (hi + lo)
                dens = norm.pdf(x, mu, sigma)
                for v in (0.0, 1.0):
                    py = np.exp(_log_bern(v, beta[0] + beta[1] * zi + beta[2] * v1 + beta[3] * x))
                    s += p1 * 0.5 * (hi - lo) * np.sum(weights * dens * py)
            total += np.log(s)
        else:
            total += (_log_bern(yi, beta[0] + beta[1] * zi + beta[2] * z1i + beta[3] * z2i)
                      + _log_bern(z1i, gamma[0] + gamma[1] * zi)
                      + norm.logpdf(z2i, delta[0] + delta[1] * zi + delta[2] * z1i, sigma))
    return total


def maximize_blockwise(y, z, z1, z2):
    obs = ~np.isnan(y)
    x0 = np.zeros(10)
    x0[6] = np.mean(z2[obs])
    x0[9] = np.log(np.std(z2[obs]))
    res = minimize(lambda t: -blockwise_loglik(t, y, z, z1, z2), x0, method="BFGS",
                   options={"gtol": 1e-8, "maxiter": 10_000})
    return res.x


def z2_missing_loglik(beta, gamma, delta, sigma, row):
    """log P(Y, Z1 | Z) for a row whose Z2 is missing, by Gauss-Legendre."""
    y, z, z1 = row
    nodes, weights = np.polynomial.legendre.leggauss(400)
    mu = delta[0] + delta[1] * z + delta[2] * z1
    lo, hi = mu - 12 * sigma, mu + 12 * sigma
    x = 0.5 * (hi - lo) * nodes + 0.5 * (hi + lo)
    py = np.exp(_log_bern(y, beta[0] + beta[1] * z + beta[2] * z1 + beta[3] * x))
    integral = 0.5 * (hi - lo) * np.sum(weights * norm.pdf(x, mu, sigma) * py)
    return np.log(integral) + _log_bern(z1, gamma[0] + gamma[1] * z)
