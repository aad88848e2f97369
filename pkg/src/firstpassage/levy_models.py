import logging
import math
from dataclasses import dataclass, replace
from enum import Enum
from typing import Sequence, Tuple

import numpy as np

logger = logging.getLogger(__name__)

# Points closer than POLE_GUARD * rate to a mixture pole are rejected.
POLE_GUARD: float = 1e-9
WEIGHT_TOLERANCE: float = 1e-12


class DomainError(Exception):
    """Custom exception for evaluating the Laplace exponent outside its open domain. Found in firstpassage/levy_models.py"""

    pass


class ValidationError(Exception):
    """Custom exception for models that break an admissibility invariant. Found in firstpassage/levy_models.py"""

    pass


class ModelKind(Enum):
    BROWNIAN = 'brownian'
    CRAMER_LUNDBERG = 'cramer_lundberg'
    JUMP_DIFFUSION = 'jump_diffusion'


class SpectralClass(Enum):
    SPECTRALLY_NEGATIVE = 'spectrally_negative'
    SPECTRALLY_POSITIVE = 'spectrally_positive'
    TWO_SIDED = 'two_sided'


@dataclass(frozen=True)
class JumpComponent:
    """One exponential in the jump size mixture: weight, rate and direction (+1 up, -1 down)."""

    weight: float
    rate: float
    sign: int

    def __post_init__(self):
        if not 0 < self.weight <= 1:
            raise ValidationError(
                f"Jump weight must lie in (0, 1], got {self.weight}"
            )
        if not (math.isfinite(self.rate) and self.rate > 0):
            raise ValidationError(
                f"Jump rates must be strictly positive, got {self.rate}"
            )
        if self.sign not in (-1, 1):
            raise ValidationError(
                f"Jump sign must be +1 or -1, got {self.sign}"
            )


@dataclass(frozen=True)
class JumpSpec:
    """Compound Poisson part: arrival intensity and a mixed-exponential size law."""

    intensity: float = 0.0
    components: Tuple[JumpComponent, ...] = ()

    def __post_init__(self):
        if not (math.isfinite(self.intensity) and self.intensity >= 0):
            raise ValidationError(
                f"Jump intensity must be finite and >= 0, got {self.intensity}"
            )
        # Accept lists from callers but store an immutable tuple.
        object.__setattr__(self, 'components', tuple(self.components))
        if self.intensity > 0 and not self.components:
            raise ValidationError(
                "Jump intensity is positive but no jump components were given"
            )
        if self.components:
            total = math.fsum(c.weight for c in self.components)
            if abs(total - 1) > WEIGHT_TOLERANCE:
                raise ValidationError(
                    f"Jump weights must sum to 1, got {total!r}"
                )

    @property
    def active(self) -> bool:
        return self.intensity > 0 and len(self.components) > 0

    def signs(self) -> set:
        if not self.active:
            return set()
        return {c.sign for c in self.components}


@dataclass(frozen=True)
class Theta:
    """Maximal domain of the Laplace exponent. The interior is (lower, upper)."""

    lower: float
    upper: float

    def contains(self, theta: float) -> bool:
        return self.lower < theta < self.upper


@dataclass(frozen=True)
class LevyModel:
    """
    A Levy process X(t) = drift*t + sigma*W(t) + compound Poisson jumps.

    Laplace exponent:
        psi(theta) = drift*theta + sigma^2 theta^2 / 2
                     + intensity * sum_i w_i s_i theta / (r_i - s_i theta)

    Construct through brownian(), cramer_lundberg() or jump_diffusion().
    Exponential jump sizes are non-lattice, so every admissible model has
    non-lattice increments.
    """

    kind: ModelKind
    drift: float
    sigma: float = 0.0
    jumps: JumpSpec = JumpSpec()

    def __post_init__(self):
        if not math.isfinite(self.drift):
            raise ValidationError(f"Drift must be finite, got {self.drift}")
        if not (math.isfinite(self.sigma) and self.sigma >= 0):
            raise ValidationError(
                f"Gaussian coefficient sigma must be >= 0, got {self.sigma}"
            )
        self.check_admissible()

    def check_admissible(self) -> None:
        """Raise ValidationError naming the violated invariant, if any."""
        if self.kind is ModelKind.BROWNIAN and self.jumps.active:
            raise ValidationError("A brownian model cannot carry jumps")
        if self.sigma > 0:
            return
        signs = self.jumps.signs()
        if not signs:
            raise ValidationError(
                "Monotone paths: sigma = 0 and no jumps leaves a pure drift"
            )
        if self.drift == 0:
            raise ValidationError(
                "Pure compound Poisson process (sigma = 0, drift = 0) is "
                "excluded: this is the random walk case"
            )
        if signs == {1} and self.drift > 0:
            raise ValidationError(
                "Monotone paths: upward jumps with a positive drift and "
                "sigma = 0 never decrease"
            )
        if signs == {-1} and self.drift < 0:
            raise ValidationError(
                "Monotone paths: downward jumps with a negative drift and "
                "sigma = 0 never increase"
            )

    # Parameters of the claim-surplus view.
    @property
    def premium(self) -> float:
        return -self.drift

    @property
    def claim_rate(self) -> float:
        return self.jumps.components[0].rate

    @property
    def has_jumps(self) -> bool:
        return self.jumps.active

    def theta_domain(self) -> Theta:
        upper = math.inf
        lower = -math.inf
        if self.jumps.active:
            for c in self.jumps.components:
                if c.sign > 0:
                    upper = min(upper, c.rate)
                else:
                    lower = max(lower, -c.rate)
        return Theta(lower=lower, upper=upper)

    def safe_bounds(self) -> Tuple[float, float]:
        """Largest closed interval of points accepted by psi()."""
        theta = self.theta_domain()
        lower = theta.lower
        upper = theta.upper
        if math.isfinite(upper):
            upper = upper * (1 - 2 * POLE_GUARD)
        if math.isfinite(lower):
            lower = lower * (1 - 2 * POLE_GUARD)
        return lower, upper

    def _check_interior(self, theta: float) -> None:
        if not math.isfinite(theta):
            raise DomainError(f"theta must be finite, got {theta}")
        if not self.jumps.active:
            return
        for c in self.jumps.components:
            gap = c.rate - c.sign * theta
            if gap <= POLE_GUARD * c.rate:
                raise DomainError(
                    f"theta={theta!r} is outside the interior of Theta "
                    f"{self.theta_domain()} (pole at {c.sign * c.rate})"
                )

    def psi(self, theta: float) -> float:
        """
        Laplace exponent psi(theta) = log E[exp(theta X(1))].

        Args:
            theta (float): point in the interior of Theta.

        Returns:
            float: psi(theta), exactly 0 at theta = 0.
        """
        self._check_interior(theta)
        value = self.drift * theta + 0.5 * self.sigma**2 * theta**2
        if self.jumps.active:
            value += self.jumps.intensity * math.fsum(
                c.weight * c.sign * theta / (c.rate - c.sign * theta)
                for c in self.jumps.components
            )
        return value

    def psi_derivatives(self, theta: float) -> Tuple[float, float]:
        """
        First and second derivative of psi.

        Returns:
            Tuple[float, float]: (psi'(theta), psi''(theta))
        """
        self._check_interior(theta)
        first = self.drift + self.sigma**2 * theta
        second = self.sigma**2
        if self.jumps.active:
            lam = self.jumps.intensity
            for c in self.jumps.components:
                gap = c.rate - c.sign * theta
                first += lam * c.weight * c.sign * c.rate / gap**2
                second += lam * c.weight * 2 * c.rate / gap**3
        return first, second

    def mean(self) -> float:
        """E[X(1)] = psi'(0)."""
        return self.psi_derivatives(0.0)[0]

    def tilt(self, c: float) -> 'LevyModel':
        """
        The model under the exponential change of measure exp(cX(t) - psi(c)t).

        Its exponent satisfies psi_c(alpha) = psi(alpha + c) - psi(c). The
        Gaussian drift moves by sigma^2 c, each exponential rate r_i becomes
        r_i - s_i c and its share of the intensity is scaled by r_i / (r_i - s_i c).
        """
        self._check_interior(c)
        if c == 0:
            return self
        drift = self.drift + self.sigma**2 * c
        if not self.jumps.active:
            return replace(self, drift=drift)

        lam = self.jumps.intensity
        rates = [comp.rate - comp.sign * c for comp in self.jumps.components]
        masses = [
            lam * comp.weight * comp.rate / rate
            for comp, rate in zip(self.jumps.components, rates)
        ]
        total = math.fsum(masses)
        components = tuple(
            JumpComponent(weight=mass / total, rate=rate, sign=comp.sign)
            for comp, mass, rate in zip(self.jumps.components, masses, rates)
        )
        jumps = JumpSpec(intensity=total, components=components)
        return replace(self, drift=drift, jumps=jumps)

    def spectral_class(self) -> SpectralClass:
        signs = self.jumps.signs()
        if signs <= {-1}:
            return SpectralClass.SPECTRALLY_NEGATIVE
        if signs == {1} and self.sigma == 0:
            return SpectralClass.SPECTRALLY_POSITIVE
        return SpectralClass.TWO_SIDED

    def sample_jumps(
        self, rng: np.random.Generator, size: Tuple[int, ...]
    ) -> np.ndarray:
        """Draw jump sizes from the mixed-exponential law (signed)."""
        comps = self.jumps.components
        scale = np.array([1.0 / c.rate for c in comps])
        signs = np.array([float(c.sign) for c in comps])
        sizes = rng.standard_exponential(size)
        if len(comps) == 1:
            return signs[0] * scale[0] * sizes
        weights = np.array([c.weight for c in comps])
        idx = rng.choice(len(comps), size=size, p=weights / weights.sum())
        return signs[idx] * scale[idx] * sizes


def brownian(drift: float, sigma: float) -> LevyModel:
    """Brownian motion with drift: psi(theta) = drift*theta + sigma^2 theta^2/2."""
    return LevyModel(kind=ModelKind.BROWNIAN, drift=drift, sigma=sigma)


def cramer_lundberg(
    lam: float, claim_rate: float, premium: float
) -> LevyModel:
    """
    Claim-surplus process of the classical risk model: exponential claims of
    rate claim_rate arrive at rate lam, premium is collected at rate premium.
    psi(theta) = lam*theta/(claim_rate - theta) - premium*theta.
    """
    jumps = JumpSpec(
        intensity=lam,
        components=(JumpComponent(weight=1.0, rate=claim_rate, sign=1),),
    )
    return LevyModel(
        kind=ModelKind.CRAMER_LUNDBERG, drift=-premium, sigma=0.0, jumps=jumps
    )


def jump_diffusion(
    drift: float,
    sigma: float,
    intensity: float,
    components: Sequence[Tuple[float, float, int]],
) -> LevyModel:
    """
    Brownian motion plus mixed-exponential jumps.

    Args:
        components: sequence of (weight, rate, sign) triples.
    """
    jumps = JumpSpec(
        intensity=intensity,
        components=tuple(
            JumpComponent(weight=w, rate=r, sign=int(s))
            for w, r, s in components
        ),
    )
    return LevyModel(
        kind=ModelKind.JUMP_DIFFUSION, drift=drift, sigma=sigma, jumps=jumps
    )
