import logging
import math
from dataclasses import dataclass
from enum import Enum
from typing import Optional

from scipy.special import ndtr

from firstpassage.exponent_calculus import (
    BOUNDARY_TOLERANCE,
    ExponentCalculator,
    ExponentReport,
    RangeError,
)
from firstpassage.levy_models import LevyModel, SpectralClass

logger = logging.getLogger(__name__)


class UnsupportedModelError(Exception):
    """Custom exception for constants that have no closed form for the given model. Found in firstpassage/asymptotics.py"""

    pass


class Regime(Enum):
    CRAMER = 'cramer'
    LARGE_DEVIATION = 'large_deviation'
    BOUNDARY = 'boundary'
    INDETERMINATE = 'indeterminate'


@dataclass(frozen=True)
class AsymptoticEstimate:
    x: float
    t: float
    regime: Regime
    log_prob: float
    decay_rate: float
    prefactor: Optional[float]
    report: Optional[ExponentReport]
    exponent_only: bool = False
    # Both candidate exponents per unit t: gamma*v and psi*(v).
    cramer_rate: float = math.nan
    ld_rate: float = math.nan

    @property
    def v(self) -> float:
        return self.x / self.t


class PassageAsymptotics:
    """
    Exact asymptotics of P(tau(x) <= t) as x, t grow with x/t = v fixed:

        C_gamma exp(-gamma x)              if 0 < v < psi'(gamma)
        D_v t^(-1/2) exp(-psi*(v) t)       if v > psi'(gamma)

    C_gamma and D_v are available in closed form for spectrally one-sided
    models only; two-sided models get the exponent with a unit prefactor.
    """

    def __init__(self, model: LevyModel):
        self.model = model
        self.calculator = ExponentCalculator(model)
        self.spectral_class = model.spectral_class()

    @property
    def one_sided(self) -> bool:
        return self.spectral_class is not SpectralClass.TWO_SIDED

    def classify_regime(self, x: float, t: float) -> Regime:
        if not (x > 0 and t > 0):
            raise ValueError(f"x and t must be positive, got x={x}, t={t}")
        v = x / t
        split = self.calculator.psi_prime_gamma()
        if v < split * (1 - BOUNDARY_TOLERANCE):
            return Regime.CRAMER
        if v > split * (1 + BOUNDARY_TOLERANCE):
            return Regime.LARGE_DEVIATION
        return Regime.BOUNDARY

    def cramer_constant(self) -> float:
        """
        C_gamma = lim exp(gamma x) P(tau(x) < inf).

        Spectrally negative: 1. Spectrally positive: |psi'(0)| / psi'(gamma),
        the classical exponential-claims constant. C_0 = 1 when gamma = 0.
        """
        gamma = self.calculator.lundberg_gamma()
        if gamma == 0:
            return 1.0
        if self.spectral_class is SpectralClass.SPECTRALLY_NEGATIVE:
            return 1.0
        if self.spectral_class is SpectralClass.SPECTRALLY_POSITIVE:
            return abs(self.model.mean()) / self.calculator.psi_prime(gamma)
        raise UnsupportedModelError(
            "C_gamma of a two-sided model needs ladder height quantities "
            "that have no closed form"
        )

    def ld_prefactor(self, v: float) -> float:
        """
        D_v of the large-deviation regime.

        Spectrally negative: v / (eta_v sqrt(2 pi psi''(Gamma(v)))).
        Spectrally positive: (Gamma + Gamma~) / (Gamma Gamma~) / sqrt(2 pi psi'').
        """
        if not self.one_sided:
            raise UnsupportedModelError(
                "D_v of a two-sided model needs the bivariate ladder exponent"
            )
        split = self.calculator.psi_prime_gamma()
        if v <= split:
            raise RangeError(
                f"v={v!r} <= psi'(gamma)={split!r}: not a large deviation"
            )
        report = self.calculator.legendre(v)
        root = math.sqrt(2 * math.pi * report.psi_second_at_Gamma)
        if self.spectral_class is SpectralClass.SPECTRALLY_NEGATIVE:
            return v / (report.eta_v * root)
        Gamma_tilde = self.calculator.gamma_tilde(v)
        return (report.Gamma_v + Gamma_tilde) / (
            report.Gamma_v * Gamma_tilde * root
        )

    def _report(self, v: float) -> Optional[ExponentReport]:
        try:
            return self.calculator.legendre(v)
        except RangeError as e:
            # Below psi'(0) there is no Gamma(v) > 0; only the Cramer side
            # can land here.
            logger.debug("No exponent report for v=%g: %s", v, e)
            return None

    def approx_passage_prob(self, x: float, t: float) -> AsymptoticEstimate:
        regime = self.classify_regime(x, t)
        v = x / t
        gamma = self.calculator.lundberg_gamma()
        if regime is Regime.LARGE_DEVIATION:
            report = self.calculator.legendre(v)
        else:
            report = self._report(v)
        cramer_rate = gamma * v
        ld_rate = report.psi_star_v if report is not None else math.nan
        exponent_only = not self.one_sided

        if regime is Regime.CRAMER:
            prefactor = None if exponent_only else self.cramer_constant()
            log_prob = -gamma * x
            if prefactor is not None:
                log_prob += math.log(prefactor)
            decay_rate = cramer_rate
        elif regime is Regime.LARGE_DEVIATION:
            prefactor = None
            log_prob = -0.5 * math.log(t) - ld_rate * t
            if not exponent_only:
                D_v = self.ld_prefactor(v)
                prefactor = D_v / math.sqrt(t)
                log_prob += math.log(D_v)
            decay_rate = ld_rate
        else:
            logger.info(
                "v=%g sits on psi'(gamma): asymptotics are indeterminate", v
            )
            return AsymptoticEstimate(
                x=x,
                t=t,
                regime=Regime.INDETERMINATE,
                log_prob=math.nan,
                decay_rate=math.nan,
                prefactor=None,
                report=report,
                exponent_only=exponent_only,
                cramer_rate=cramer_rate,
                ld_rate=ld_rate,
            )

        return AsymptoticEstimate(
            x=x,
            t=t,
            regime=regime,
            log_prob=log_prob,
            decay_rate=decay_rate,
            prefactor=prefactor,
            report=report,
            exponent_only=exponent_only,
            cramer_rate=cramer_rate,
            ld_rate=ld_rate,
        )

    def cramer_remainder_bound(self, x: float, t: float) -> float:
        """
        Bound on exp(gamma x) P(t < tau(x) < inf) for Brownian models:
        P^(gamma)(X(t) <= x) = Phi((x - psi'(gamma) t) / (sigma sqrt(t))).
        Tends to 0 as t grows with x/t < psi'(gamma).
        """
        if self.model.has_jumps or self.model.sigma == 0:
            raise UnsupportedModelError(
                "The remainder bound is closed-form for Brownian models only"
            )
        drift = self.calculator.psi_prime_gamma()
        return float(ndtr((x - drift * t) / (self.model.sigma * math.sqrt(t))))
