import math

import numpy as np
from scipy.special import erfc, erfcx

from firstpassage.asymptotics import UnsupportedModelError
from firstpassage.exponent_calculus import ExponentCalculator, RangeError
from firstpassage.levy_models import DomainError, LevyModel, SpectralClass

# Natural log of a probability, always <= 0.
LogProb = float

LOG_SQRT_2PI: float = 0.5 * math.log(2 * math.pi)
# Beyond this argument erfcx is replaced by the Mills ratio series.
SCALED_TAIL_LIMIT: float = 1e8


def mills_ratio_series(z: float, terms: int = 4) -> float:
    """Asymptotic series of Phi_bar(z)/phi(z): (1/z) sum_k (-1)^k (2k-1)!! / z^(2k)."""
    total = 0.0
    coefficient = 1.0
    for k in range(terms):
        total += coefficient / z ** (2 * k)
        coefficient *= -(2 * k + 1)
    return total / z


def mills_ratio_continued_fraction(z: float, depth: int = 200) -> float:
    """Laplace's continued fraction 1/(z + 1/(z + 2/(z + 3/(z + ...)))), for z >= 10."""
    frac = z
    for k in range(depth, 0, -1):
        frac = z + k / frac
    return 1.0 / frac


def log_normal_sf(z: float) -> LogProb:
    """log of the standard normal tail Phi_bar(z), accurate far into the tail."""
    if z < 0:
        return math.log1p(-0.5 * erfc(-z / math.sqrt(2)))
    if z > SCALED_TAIL_LIMIT:
        return -0.5 * z * z - LOG_SQRT_2PI + math.log(mills_ratio_series(z))
    return math.log(0.5 * erfcx(z / math.sqrt(2))) - 0.5 * z * z


def bm_exact_passage(mu: float, sigma: float, x: float, t: float) -> LogProb:
    """
    log P(tau(x) <= t) for Brownian motion with drift mu and volatility sigma
    (reflection formula):

        Phi_bar((x - mu t)/(sigma sqrt t)) + exp(2 mu x / sigma^2) Phi_bar((x + mu t)/(sigma sqrt t))
    """
    if not sigma > 0:
        raise DomainError(f"sigma must be positive, got {sigma}")
    if not t > 0:
        raise DomainError(f"t must be positive, got {t}")
    if x < 0:
        raise DomainError(f"x must be >= 0, got {x}")
    if x == 0:
        return 0.0
    scale = sigma * math.sqrt(t)
    direct = log_normal_sf((x - mu * t) / scale)
    reflected = 2 * mu * x / sigma**2 + log_normal_sf((x + mu * t) / scale)
    return min(float(np.logaddexp(direct, reflected)), 0.0)


def bm_ld_prefactor(mu: float, sigma: float, v: float) -> float:
    """D_v read off the Mills expansion of the reflection formula."""
    return 2 * v * sigma / ((v * v - mu * mu) * math.sqrt(2 * math.pi))


def bm_asymptotic_ratio(mu: float, sigma: float, v: float, t: float) -> float:
    """log of exact / asymptotic for Brownian motion at x = v t; tends to 0 as t grows."""
    if v <= -mu:
        raise RangeError(
            f"v={v!r} <= psi'(gamma)={-mu!r}: not a large deviation"
        )
    psi_star = (v - mu) ** 2 / (2 * sigma**2)
    asymptotic = (
        math.log(bm_ld_prefactor(mu, sigma, v))
        - 0.5 * math.log(t)
        - psi_star * t
    )
    return bm_exact_passage(mu, sigma, v * t, t) - asymptotic


def cl_perpetual_ruin(lam: float, beta: float, c: float, x: float) -> LogProb:
    """
    log P(tau(x) < inf) of the classical risk model with exponential claims:
    rho exp(-gamma x), rho = lam / (c beta), gamma = beta - lam / c.
    """
    if lam / beta >= c:
        raise DomainError(
            f"Net profit condition fails: lam/beta={lam / beta!r} >= c={c!r}"
        )
    if x < 0:
        raise DomainError(f"x must be >= 0, got {x}")
    return math.log(lam / (c * beta)) - (beta - lam / c) * x


def sn_perpetual_passage(model: LevyModel, x: float) -> LogProb:
    """Spectrally negative models creep upwards, so P(tau(x) < inf) = exp(-gamma x) exactly."""
    if model.spectral_class() is not SpectralClass.SPECTRALLY_NEGATIVE:
        raise UnsupportedModelError(
            "exp(-gamma x) is exact for spectrally negative models only"
        )
    if x < 0:
        raise DomainError(f"x must be >= 0, got {x}")
    return -ExponentCalculator(model).lundberg_gamma() * x
