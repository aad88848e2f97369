import logging
import math
from dataclasses import dataclass
from functools import cached_property
from typing import Callable, Optional

from scipy.optimize import root_scalar

from firstpassage.levy_models import LevyModel

logger = logging.getLogger(__name__)

# Relative half-width of the band around psi'(gamma) treated as the boundary.
BOUNDARY_TOLERANCE: float = 1e-8
ROOT_XTOL: float = 1e-15
ROOT_RTOL: float = 4 * 2.220446049250313e-16
MAX_ITERATIONS: int = 200
MAX_DOUBLINGS: int = 200


class NoRootError(Exception):
    """Custom exception for equations without a root inside Theta. Found in firstpassage/exponent_calculus.py"""

    pass


class RangeError(Exception):
    """Custom exception for slopes outside the range of psi' on (0, sup Theta). Found in firstpassage/exponent_calculus.py"""

    pass


@dataclass(frozen=True)
class ExponentReport:
    """Roots and exponents behind the passage asymptotics at slope v."""

    v: float
    gamma: float
    psi_prime_gamma: float
    Gamma_v: float
    eta_v: float
    psi_star_v: float
    psi_second_at_Gamma: float
    cramer_holds: bool


def _bracket_above(
    func: Callable[[float], float], start: float, upper: float
) -> Optional[float]:
    """Walk right from start with doubling steps until func > 0.

    Returns None when func stays <= 0 up to upper.
    """
    step = max(1.0, abs(start))
    for _ in range(MAX_DOUBLINGS):
        hi = start + step
        if hi >= upper:
            return upper if func(upper) > 0 else None
        if func(hi) > 0:
            return hi
        step *= 2
    return None


def _solve(
    func: Callable[[float], float], lo: float, hi: float, what: str
) -> float:
    sol = root_scalar(
        func,
        bracket=(lo, hi),
        method='brentq',
        xtol=ROOT_XTOL,
        rtol=ROOT_RTOL,
        maxiter=MAX_ITERATIONS,
    )
    if not sol.converged:
        raise NoRootError(f"{what}: root finder did not converge ({sol.flag})")
    logger.debug(
        "%s: root %.17g in [%g, %g] after %d iterations",
        what,
        sol.root,
        lo,
        hi,
        sol.iterations,
    )
    return sol.root


class ExponentCalculator:
    """Root finding on the Laplace exponent of one model.

    Every root of a convex equation is found by bracketing (doubling away from
    a point where the equation is negative) followed by Brent's method.
    """

    def __init__(self, model: LevyModel):
        self.model = model
        self.lower, self.upper = model.safe_bounds()

    def psi(self, theta: float) -> float:
        return self.model.psi(theta)

    def psi_prime(self, theta: float) -> float:
        return self.model.psi_derivatives(theta)[0]

    def psi_second(self, theta: float) -> float:
        return self.model.psi_derivatives(theta)[1]

    @cached_property
    def _argmin(self) -> float:
        slope = self.psi_prime(0.0)
        if slope == 0:
            return 0.0
        if slope < 0:
            hi = _bracket_above(self.psi_prime, 0.0, self.upper)
            if hi is None:
                raise NoRootError(
                    "psi is decreasing on all of (0, sup Theta): no minimiser"
                )
            return _solve(self.psi_prime, 0.0, hi, 'argmin_psi')

        # Minimiser on the negative half line: reflect.
        def reflected(theta: float) -> float:
            return -self.psi_prime(-theta)

        hi = _bracket_above(reflected, 0.0, -self.lower)
        if hi is None:
            raise NoRootError(
                "psi is increasing on all of (inf Theta, 0): no minimiser"
            )
        return -_solve(reflected, 0.0, hi, 'argmin_psi')

    def argmin_psi(self) -> float:
        """The unique minimiser of the strictly convex psi on Theta."""
        return self._argmin

    @cached_property
    def _gamma(self) -> float:
        if self.model.mean() >= 0:
            logger.warning(
                "E[X(1)] = %g >= 0: the process does not drift to -inf, "
                "Lundberg exponent reported as 0",
                self.model.mean(),
            )
            return 0.0
        theta_min = self.argmin_psi()
        hi = _bracket_above(self.psi, theta_min, self.upper)
        if hi is None:
            raise NoRootError(
                f"Cramer condition fails: psi < 0 on (0, {self.upper})"
            )
        return _solve(self.psi, theta_min, hi, 'lundberg_gamma')

    def lundberg_gamma(self) -> float:
        """gamma = sup{theta in Theta: psi(theta) = 0}; 0 when E[X(1)] >= 0."""
        return self._gamma

    def cramer_holds(self) -> bool:
        return self.lundberg_gamma() > 0

    def psi_prime_gamma(self) -> float:
        return self.psi_prime(self.lundberg_gamma())

    def inverse_psi_prime(self, v: float) -> float:
        """
        Gamma(v): the right-inverse of psi' on (0, sup Theta).

        Args:
            v (float): target slope.

        Returns:
            float: theta with psi'(theta) = v.
        """
        if not math.isfinite(v):
            raise RangeError(f"Slope v must be finite, got {v}")

        def residual(theta: float) -> float:
            return self.psi_prime(theta) - v

        if residual(0.0) >= 0:
            raise RangeError(
                f"v={v!r} <= psi'(0)={self.psi_prime(0.0)!r}: "
                "no Gamma(v) in (0, sup Theta)"
            )
        hi = _bracket_above(residual, 0.0, self.upper)
        if hi is None:
            raise RangeError(
                f"v={v!r} >= sup psi' over Theta: Gamma(v) is not interior"
            )
        return _solve(residual, 0.0, hi, 'inverse_psi_prime')

    def legendre(self, v: float) -> ExponentReport:
        """Fill an ExponentReport; psi*(v) = v Gamma(v) - psi(Gamma(v))."""
        gamma = self.lundberg_gamma()
        Gamma_v = self.inverse_psi_prime(v)
        eta_v = self.psi(Gamma_v)
        return ExponentReport(
            v=v,
            gamma=gamma,
            psi_prime_gamma=self.psi_prime(gamma),
            Gamma_v=Gamma_v,
            eta_v=eta_v,
            psi_star_v=v * Gamma_v - eta_v,
            psi_second_at_Gamma=self.psi_second(Gamma_v),
            cramer_holds=gamma > 0,
        )

    def big_phi(self, alpha: float) -> float:
        """Largest root of psi(theta) = alpha, alpha >= 0."""
        if alpha < 0:
            raise RangeError(f"alpha must be >= 0, got {alpha}")
        start = max(0.0, self.argmin_psi())

        def residual(theta: float) -> float:
            return self.psi(theta) - alpha

        hi = _bracket_above(residual, start, self.upper)
        if hi is None:
            raise NoRootError(f"psi < {alpha} on all of Theta")
        return _solve(residual, start, hi, 'big_phi')

    def big_phi_hat(self, alpha: float) -> float:
        """Largest root of psi(-theta) = alpha, alpha >= 0."""
        if alpha < 0:
            raise RangeError(f"alpha must be >= 0, got {alpha}")
        start = max(0.0, -self.argmin_psi())

        def residual(theta: float) -> float:
            return self.psi(-theta) - alpha

        hi = _bracket_above(residual, start, -self.lower)
        if hi is None:
            raise NoRootError(f"psi(-theta) < {alpha} on all of -Theta")
        return _solve(residual, start, hi, 'big_phi_hat')

    def gamma_tilde(self, v: float) -> float:
        """sup{theta: psi(-theta) = psi(Gamma(v))}, needs eta_v > 0."""
        eta_v = self.psi(self.inverse_psi_prime(v))
        if eta_v <= 0:
            raise RangeError(
                f"eta_v = psi(Gamma({v!r})) = {eta_v!r} is not positive"
            )
        return self.big_phi_hat(eta_v)

    def omega_squared(self, v: float) -> float:
        """Variance scale psi''(Gamma(v)) / v^3 of tau(x) under the Gamma(v) tilt."""
        return self.psi_second(self.inverse_psi_prime(v)) / v**3
