import logging
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from typing import Callable, List, NamedTuple, Optional, Sequence, Tuple

import numpy as np
from scipy.special import logsumexp

from firstpassage.exponent_calculus import ExponentCalculator, RangeError
from firstpassage.levy_models import LevyModel

logger = logging.getLogger(__name__)

DEFAULT_BLOCK_SIZE: int = 8192


class SimulationError(Exception):
    """Custom exception for invalid simulation settings. Found in firstpassage/simulation.py"""

    pass


class InsufficientCrossingsError(Exception):
    """Custom exception for runs with too few crossings to form a statistic. Found in firstpassage/simulation.py"""

    pass


@dataclass(frozen=True)
class SimConfig:
    n_paths: int = 100_000
    master_seed: int = 0
    # Sub-step for the Gaussian part between jumps.
    time_step: float = 0.01
    tilt: Optional[float] = None
    barrier_correction: bool = True
    n_workers: int = 1
    # Paths per random stream; fixes the work split independently of workers.
    block_size: int = DEFAULT_BLOCK_SIZE

    def __post_init__(self):
        if self.n_paths <= 0:
            raise SimulationError(
                f"n_paths must be positive, got {self.n_paths}"
            )
        if not 0 <= self.master_seed < 2**64:
            raise SimulationError(
                "master_seed must be a 64-bit unsigned integer, "
                f"got {self.master_seed}"
            )
        if not (math.isfinite(self.time_step) and self.time_step > 0):
            raise SimulationError(
                f"time_step must be positive, got {self.time_step}"
            )
        if self.tilt is not None and not math.isfinite(self.tilt):
            raise SimulationError(f"tilt must be finite, got {self.tilt}")
        if self.n_workers < 1:
            raise SimulationError(
                f"n_workers must be >= 1, got {self.n_workers}"
            )
        if self.block_size < 1:
            raise SimulationError(
                f"block_size must be >= 1, got {self.block_size}"
            )


@dataclass(frozen=True)
class SimResult:
    log_estimate: float
    # Relative standard error of the linear-domain estimator.
    std_err_rel: float
    n_paths: int
    n_hits: int
    tilt_used: Optional[float]
    master_seed: int
    degenerate: bool = False

    @property
    def estimate(self) -> float:
        return math.exp(self.log_estimate)

    @property
    def std_err(self) -> float:
        return self.estimate * self.std_err_rel


class PassagePath(NamedTuple):
    hit: bool
    tau: Optional[float]
    X_at_tau: Optional[float]
    X_at_horizon: float


class CltReport(NamedTuple):
    mean_z: float
    var_z: float
    n: int
    omega_squared: float


@dataclass
class PassageBlock:
    """First passage outcome of a block of simulated paths."""

    hit: np.ndarray
    tau: np.ndarray
    x_at_tau: np.ndarray
    x_at_horizon: np.ndarray


class _Tally(NamedTuple):
    n_hits: int
    log_sum: float
    log_sum_sq: float


def path_rng(master_seed: int, stream_index: int) -> np.random.Generator:
    """Counter-based Philox stream keyed by (master_seed, stream_index)."""
    seq = np.random.SeedSequence(master_seed, spawn_key=(stream_index,))
    return np.random.Generator(np.random.Philox(seq))


def _log_sum(values: Sequence[float]) -> float:
    values = np.asarray(values, dtype=float)
    values = values[np.isfinite(values)]
    if values.size == 0:
        return -math.inf
    return float(logsumexp(values))


def simulate_passages(
    model: LevyModel,
    x: float,
    horizon: float,
    n: int,
    rng: np.random.Generator,
    time_step: float = 0.01,
    barrier_correction: bool = True,
) -> PassageBlock:
    """
    Simulate n paths of the model on [0, horizon] and record the first time
    each one exceeds x.

    Jump epochs are exact. Between them the drift and Gaussian part advance
    on sub-steps of length <= time_step. A sub-step whose end lies above x is
    a crossing at the linearly interpolated time. With barrier_correction, a
    sub-step with both ends below x still counts as a crossing with the
    Brownian bridge probability exp(-2(x - X_a)(x - X_b) / (sigma^2 h)),
    placed at the mid-point. Diffusive crossings sit exactly at x.

    Every path draws the same number of variates whatever its state, so
    switching barrier_correction on can only add crossings.
    """
    drift = model.drift
    sigma = model.sigma
    lam = model.jumps.intensity if model.has_jumps else 0.0
    step = time_step
    if sigma == 0 and lam > 0:
        # Linear motion between jumps is exact on any grid.
        step = max(time_step, 1.0 / lam)
    n_steps = max(1, math.ceil(horizon / step))
    dt = horizon / n_steps

    pos = np.zeros(n)
    hit = np.zeros(n, dtype=bool)
    tau = np.full(n, np.nan)
    x_at_tau = np.full(n, np.nan)

    def advance(start: np.ndarray, h: np.ndarray) -> None:
        nonlocal pos
        normals = rng.standard_normal(n)
        uniforms = rng.random(n)
        end = pos + drift * h + sigma * np.sqrt(h) * normals
        alive = ~hit
        over = alive & (end > x)
        with np.errstate(divide='ignore', invalid='ignore'):
            frac = np.where(over, (x - pos) / (end - pos), 0.0)
        when = start + h * frac
        if barrier_correction and sigma > 0:
            below = alive & ~over & (h > 0)
            with np.errstate(divide='ignore', invalid='ignore', over='ignore'):
                p_cross = np.exp(
                    -2 * (x - pos) * (x - end) / (sigma**2 * h)
                )
            bridged = below & (uniforms < p_cross)
            when = np.where(bridged, start + 0.5 * h, when)
            over = over | bridged
        tau[over] = when[over]
        x_at_tau[over] = x
        hit[over] = True
        pos = end

    for k in range(n_steps):
        t0 = k * dt
        counts = rng.poisson(lam * dt, n) if lam > 0 else None
        m = int(counts.max()) if counts is not None else 0
        if m == 0:
            advance(np.full(n, t0), np.full(n, dt))
            continue

        # Jump epochs inside the step, padded with dt for paths with fewer.
        offsets = rng.random((n, m)) * dt
        offsets = np.where(np.arange(m) < counts[:, None], offsets, dt)
        offsets.sort(axis=1)
        sizes = model.sample_jumps(rng, (n, m))
        edges = np.concatenate(
            [np.zeros((n, 1)), offsets, np.full((n, 1), dt)], axis=1
        )
        lengths = np.diff(edges, axis=1)
        for j in range(m + 1):
            advance(t0 + edges[:, j], lengths[:, j])
            if j == m:
                break
            jumping = j < counts
            pos = np.where(jumping, pos + sizes[:, j], pos)
            crossed = jumping & ~hit & (pos > x)
            tau[crossed] = t0 + offsets[crossed, j]
            x_at_tau[crossed] = pos[crossed]
            hit[crossed] = True

    return PassageBlock(
        hit=hit, tau=tau, x_at_tau=x_at_tau, x_at_horizon=pos.copy()
    )


class PassageSimulator:
    """
    Monte Carlo estimates of P(tau(x) <= t).

    Paths are split into fixed blocks of config.block_size; block i always
    uses path_rng(master_seed, i), and block tallies are merged in block
    order, so results do not depend on config.n_workers.
    """

    def __init__(self, model: LevyModel, config: SimConfig = SimConfig()):
        self.model = model
        self.config = config
        self.calculator = ExponentCalculator(model)

    def _blocks(self) -> List[Tuple[int, int]]:
        size = self.config.block_size
        total = self.config.n_paths
        return [
            (index, min(size, total - start))
            for index, start in enumerate(range(0, total, size))
        ]

    def _map(self, func: Callable, blocks: List[Tuple[int, int]]) -> list:
        if self.config.n_workers == 1:
            return [func(*block) for block in blocks]
        with ThreadPoolExecutor(max_workers=self.config.n_workers) as pool:
            return list(pool.map(lambda block: func(*block), blocks))

    def _simulate(
        self, model: LevyModel, x: float, horizon: float, index: int, n: int
    ) -> PassageBlock:
        return simulate_passages(
            model,
            x,
            horizon,
            n,
            path_rng(self.config.master_seed, index),
            time_step=self.config.time_step,
            barrier_correction=self.config.barrier_correction,
        )

    def first_passage(
        self, x: float, horizon: float, path_index: int = 0
    ) -> PassagePath:
        """Simulate a single path with its own stream."""
        if x < 0 or horizon <= 0:
            raise SimulationError(
                f"Need x >= 0 and horizon > 0, got x={x}, horizon={horizon}"
            )
        block = self._simulate(self.model, x, horizon, path_index, 1)
        hit = bool(block.hit[0])
        return PassagePath(
            hit=hit,
            tau=float(block.tau[0]) if hit else None,
            X_at_tau=float(block.x_at_tau[0]) if hit else None,
            X_at_horizon=float(block.x_at_horizon[0]),
        )

    def _estimate(
        self, x: float, t: float, c: float, tilt_used: Optional[float]
    ) -> SimResult:
        if x < 0 or t <= 0:
            raise SimulationError(
                f"Need x >= 0 and t > 0, got x={x}, t={t}"
            )
        sim_model = self.model.tilt(c)
        psi_c = self.model.psi(c)
        blocks = self._blocks()
        logger.info(
            "Simulating %d paths in %d blocks "
            "(x=%g, t=%g, tilt=%g, workers=%d)",
            self.config.n_paths,
            len(blocks),
            x,
            t,
            c,
            self.config.n_workers,
        )

        def run_block(index: int, n: int) -> _Tally:
            block = self._simulate(sim_model, x, t, index, n)
            # Likelihood ratio exp(-c X(tau) + psi(c) tau) on each crossing.
            hit = block.hit
            log_w = -c * block.x_at_tau[hit] + psi_c * block.tau[hit]
            return _Tally(
                n_hits=int(block.hit.sum()),
                log_sum=_log_sum(log_w),
                log_sum_sq=_log_sum(2 * log_w),
            )

        tallies = self._map(run_block, blocks)
        n = self.config.n_paths
        n_hits = sum(tally.n_hits for tally in tallies)
        if n_hits == 0:
            logger.warning(
                "No path crossed x=%g before t=%g: estimate is degenerate",
                x,
                t,
            )
            return SimResult(
                log_estimate=-math.inf,
                std_err_rel=math.inf,
                n_paths=n,
                n_hits=0,
                tilt_used=tilt_used,
                master_seed=self.config.master_seed,
                degenerate=True,
            )
        log_s1 = _log_sum([tally.log_sum for tally in tallies])
        log_s2 = _log_sum([tally.log_sum_sq for tally in tallies])
        # Var(w)/E[w]^2 = n S2 / S1^2 - 1
        spread = math.exp(math.log(n) + log_s2 - 2 * log_s1) - 1
        std_err_rel = math.sqrt(max(spread, 0.0) / n)
        logger.info(
            "%d/%d paths crossed, log estimate %.6g (rel. s.e. %.3g)",
            n_hits,
            n,
            log_s1 - math.log(n),
            std_err_rel,
        )
        return SimResult(
            log_estimate=log_s1 - math.log(n),
            std_err_rel=std_err_rel,
            n_paths=n,
            n_hits=n_hits,
            tilt_used=tilt_used,
            master_seed=self.config.master_seed,
        )

    def mc_plain(self, x: float, t: float) -> SimResult:
        """Crude frequency estimator of P(tau(x) <= t)."""
        return self._estimate(x, t, 0.0, None)

    def default_tilt(self, x: float, t: float) -> float:
        """Gamma(x/t): under this tilt tau(x) concentrates around t."""
        return self.calculator.inverse_psi_prime(x / t)

    def mc_tilted(
        self, x: float, t: float, tilt: Optional[float] = None
    ) -> SimResult:
        """
        Importance sampling under the exponential change of measure:
        P(tau(x) <= t) = E^(c)[exp(-c X(tau) + psi(c) tau); tau <= t].

        The tilt is taken from the argument, then config.tilt, then Gamma(x/t).
        """
        c = tilt if tilt is not None else self.config.tilt
        if c is None:
            c = self.default_tilt(x, t)
        return self._estimate(x, t, c, c)

    def clt_diagnostic(self, x: float, v: float) -> CltReport:
        """
        Standardised crossing times (tau(x) - x/v) / (omega sqrt(x)) under the
        Gamma(v) tilt, with omega^2 = psi''(Gamma(v)) / v^3.
        """
        split = self.calculator.psi_prime_gamma()
        if v <= split:
            raise RangeError(
                f"v={v!r} <= psi'(gamma)={split!r}: no large-deviation tilt"
            )
        Gamma_v = self.calculator.inverse_psi_prime(v)
        omega_squared = self.calculator.psi_second(Gamma_v) / v**3
        scale = math.sqrt(omega_squared * x)
        centre = x / v
        tilted = self.model.tilt(Gamma_v)
        horizon = centre + 10 * scale + self.config.time_step

        def run_block(index: int, n: int) -> np.ndarray:
            block = self._simulate(tilted, x, horizon, index, n)
            return block.tau[block.hit]

        taus = np.concatenate(self._map(run_block, self._blocks()))
        if taus.size < 2:
            raise InsufficientCrossingsError(
                f"Only {taus.size} crossings of x={x} under the Gamma(v) tilt"
            )
        z = (taus - centre) / scale
        return CltReport(
            mean_z=float(z.mean()),
            var_z=float(z.var(ddof=1)),
            n=int(taus.size),
            omega_squared=omega_squared,
        )
