from firstpassage.levy_models import (
    DomainError,
    JumpComponent,
    JumpSpec,
    SpectralClass,
    ValidationError,
    brownian,
    cramer_lundberg,
    jump_diffusion,
)
import math
import numpy as np
import unittest


class TestLevyModel(unittest.TestCase):

    def setUp(self):
        self.bm = brownian(drift=-1, sigma=1)
        self.cl = cramer_lundberg(lam=1, claim_rate=1, premium=2)
        # Theta = (-2, 3)
        self.jd = jump_diffusion(
            drift=-1,
            sigma=0.5,
            intensity=2,
            components=[(0.5, 3, 1), (0.5, 2, -1)],
        )
        self.rng = np.random.default_rng(20240611)

    def tearDown(self):
        del self.rng

    def test_psi_at_zero(self):
        for model in (self.bm, self.cl, self.jd):
            self.assertEqual(model.psi(0.0), 0.0)

    def test_psi_brownian(self):
        # psi(theta) = -theta + theta^2/2, a root at theta = 2
        self.assertEqual(self.bm.psi(2.0), 0.0)
        self.assertAlmostEqual(self.bm.psi(3.0), 1.5, places=14)

    def test_psi_cramer_lundberg(self):
        # lam*theta/(beta - theta) - c*theta = 0.5/0.5 - 1 = 0
        self.assertAlmostEqual(self.cl.psi(0.5), 0.0, places=14)
        self.assertAlmostEqual(self.cl.psi(-1.0), 1.5, places=14)

    def test_psi_outside_domain(self):
        with self.assertRaises(DomainError):
            self.cl.psi(1.0)
        with self.assertRaises(DomainError):
            self.cl.psi(1.5)
        # within 1e-9 * rate of the pole
        with self.assertRaises(DomainError):
            self.cl.psi(1.0 - 1e-10)
        with self.assertRaises(DomainError):
            self.jd.psi(-2.0)
        with self.assertRaises(DomainError):
            self.bm.psi(math.inf)

    def test_theta_domain(self):
        self.assertEqual(self.bm.theta_domain().upper, math.inf)
        self.assertEqual(self.bm.theta_domain().lower, -math.inf)
        self.assertEqual(self.cl.theta_domain().upper, 1)
        self.assertEqual(self.cl.theta_domain().lower, -math.inf)
        theta = self.jd.theta_domain()
        self.assertEqual((theta.lower, theta.upper), (-2, 3))
        self.assertTrue(theta.contains(0.0))
        self.assertFalse(theta.contains(3.0))

    def test_psi_derivatives_closed_form(self):
        # psi'(0) = drift, psi'' = sigma^2
        self.assertEqual(self.bm.psi_derivatives(0.0), (-1.0, 1.0))
        # lam*beta/(beta - theta)^2 - c and 2 lam beta/(beta - theta)^3
        first, second = self.cl.psi_derivatives(0.0)
        self.assertAlmostEqual(first, -1.0, places=14)
        self.assertAlmostEqual(second, 2.0, places=14)
        self.assertAlmostEqual(self.cl.mean(), -1.0, places=14)

    def test_psi_derivatives_finite_differences(self):
        h = 1e-5
        for model, low, high in (
            (self.jd, -1.5, 2.5),
            (self.cl, -3.0, 0.8),
            (self.bm, -4.0, 4.0),
        ):
            for theta in self.rng.uniform(low, high, 10):
                with self.subTest(model=model.kind, theta=theta):
                    first, second = model.psi_derivatives(theta)
                    up, down = model.psi(theta + h), model.psi(theta - h)
                    fd_first = (up - down) / (2 * h)
                    fd_second = (
                        model.psi_derivatives(theta + h)[0]
                        - model.psi_derivatives(theta - h)[0]
                    ) / (2 * h)
                    self.assertLess(
                        abs(first - fd_first), 1e-6 * max(1, abs(first))
                    )
                    self.assertLess(
                        abs(second - fd_second), 1e-6 * max(1, abs(second))
                    )
                    self.assertGreater(second, 0)

    def test_convexity(self):
        for _ in range(50):
            theta = np.sort(self.rng.uniform(-1.5, 2.5, 3))
            lo, mid, hi = theta
            weight = (hi - mid) / (hi - lo)
            chord = weight * self.jd.psi(lo) + (1 - weight) * self.jd.psi(hi)
            self.assertLessEqual(self.jd.psi(mid), chord + 1e-12)

    def test_tilt_brownian(self):
        # drift moves by sigma^2 c: -1 + 2 = 1
        tilted = self.bm.tilt(2.0)
        self.assertEqual(tilted, brownian(drift=1, sigma=1))
        for alpha in (-0.5, 0.5, 1.0):
            self.assertAlmostEqual(
                tilted.psi(alpha),
                self.bm.psi(alpha + 2) - self.bm.psi(2),
                delta=1e-10,
            )

    def test_tilt_cramer_lundberg(self):
        # claim rate 0.5, intensity lam beta / (beta - c) = 2, same premium
        tilted = self.cl.tilt(0.5)
        self.assertAlmostEqual(tilted.claim_rate, 0.5, places=14)
        self.assertAlmostEqual(tilted.jumps.intensity, 2.0, places=14)
        self.assertEqual(tilted.premium, 2)
        self.assertIs(tilted.kind, self.cl.kind)

    def test_tilt_zero_is_identity(self):
        for model in (self.bm, self.cl, self.jd):
            self.assertEqual(model.tilt(0.0), model)

    def test_tilt_identity(self):
        for _ in range(20):
            c = self.rng.uniform(-1.2, 2.2)
            tilted = self.jd.tilt(c)
            alpha = self.rng.uniform(-1.5 - c, 2.5 - c)
            expected = self.jd.psi(alpha + c) - self.jd.psi(c)
            self.assertLess(abs(tilted.psi(alpha) - expected), 1e-10)

    def test_double_tilt(self):
        c1, c2 = 0.7, -1.1
        twice = self.jd.tilt(c1).tilt(c2)
        once = self.jd.tilt(c1 + c2)
        for alpha in np.linspace(-0.5, 1.5, 5):
            self.assertLess(abs(twice.psi(alpha) - once.psi(alpha)), 1e-10)

    def test_tilt_outside_domain(self):
        with self.assertRaises(DomainError):
            self.cl.tilt(1.0)

    def test_spectral_class(self):
        self.assertIs(
            self.bm.spectral_class(), SpectralClass.SPECTRALLY_NEGATIVE
        )
        self.assertIs(
            self.cl.spectral_class(), SpectralClass.SPECTRALLY_POSITIVE
        )
        self.assertIs(self.jd.spectral_class(), SpectralClass.TWO_SIDED)
        down = jump_diffusion(1, 0, 1, [(1, 2, -1)])
        self.assertIs(down.spectral_class(), SpectralClass.SPECTRALLY_NEGATIVE)
        # a Gaussian part with upward jumps is treated as two-sided
        up_with_noise = jump_diffusion(-1, 0.3, 1, [(1, 2, 1)])
        self.assertIs(up_with_noise.spectral_class(), SpectralClass.TWO_SIDED)

    def test_monotone_paths_rejected(self):
        with self.assertRaises(ValidationError):
            brownian(drift=-1, sigma=0)
        with self.assertRaises(ValidationError):
            jump_diffusion(1, 0, 1, [(1, 1, 1)])
        with self.assertRaises(ValidationError):
            jump_diffusion(-1, 0, 1, [(1, 1, -1)])

    def test_pure_compound_poisson_rejected(self):
        with self.assertRaises(ValidationError):
            jump_diffusion(0, 0, 1, [(0.5, 1, 1), (0.5, 1, -1)])

    def test_jump_spec_validation(self):
        with self.assertRaises(ValidationError):
            JumpSpec(
                intensity=1,
                components=(
                    JumpComponent(0.5, 1, 1),
                    JumpComponent(0.4, 1, -1),
                ),
            )
        with self.assertRaises(ValidationError):
            JumpComponent(weight=1, rate=0, sign=1)
        with self.assertRaises(ValidationError):
            JumpComponent(weight=1, rate=1, sign=0)
        with self.assertRaises(ValidationError):
            JumpSpec(intensity=1, components=())

    def test_sample_jumps(self):
        sizes = self.jd.sample_jumps(np.random.default_rng(7), (200_000,))
        # mean of 0.5*Exp(3) - 0.5*Exp(2) is 0.5/3 - 0.5/2
        self.assertAlmostEqual(sizes.mean(), 0.5 / 3 - 0.25, delta=0.01)
        self.assertTrue(np.all(self.cl.sample_jumps(self.rng, (100,)) > 0))


if __name__ == "__main__":
    unittest.main()
