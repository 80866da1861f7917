import math

import numpy as np
import pytest

from rcsphere.mc_oracle import BLOCK, McConfig, estimate
from rcsphere.performance import coverage_probability


def test_seed_determinism(ch3):
    cfg = McConfig(samples=100_000, seed=42)
    assert estimate(ch3, 2.0, cfg) == estimate(ch3, 2.0, cfg)


def test_different_seeds_differ(ch3):
    a = estimate(ch3, 2.0, McConfig(samples=100_000, seed=1))
    b = estimate(ch3, 2.0, McConfig(samples=100_000, seed=2))
    assert a.cp_hat != b.cp_hat


def test_prefix_blocks_shared(ch3):
    # the first block is the same draw whatever the total sample size
    a = estimate(ch3, 1.0, McConfig(samples=BLOCK, seed=9))
    b = estimate(ch3, 1.0, McConfig(samples=2 * BLOCK, seed=9))
    c = estimate(ch3, 1.0, McConfig(samples=BLOCK, seed=9))
    assert a == c
    assert a.cp_hat != b.cp_hat


def test_direction_symmetry(ch3):
    gamma = 3.0
    a = estimate(ch3, gamma, McConfig(samples=400_000, seed=3))
    b = estimate(ch3, gamma, McConfig(samples=400_000, seed=4, direction=(1.0, -2.0, 0.5)))
    se = math.hypot(a.cp_se, b.cp_se)
    assert abs(a.cp_hat - b.cp_hat) <= 4 * se
    assert abs(a.sev_hat - b.sev_hat) <= 4 * math.hypot(a.sev_se, b.sev_se)


def test_direction_length_checked(ch3):
    with pytest.raises(ValueError):
        estimate(ch3, 1.0, McConfig(samples=10, direction=(1.0, 0.0)))


def test_se_scaling(ch3):
    small = estimate(ch3, 2.0, McConfig(samples=100_000, seed=7))
    large = estimate(ch3, 2.0, McConfig(samples=400_000, seed=7))
    assert large.cp_se == pytest.approx(small.cp_se / 2, rel=0.2)
    assert large.sev_se == pytest.approx(small.sev_se / 2, rel=0.2)


def test_constant_radius_sev_exact(const3):
    est = estimate(const3, 1.0, McConfig(samples=50_000, seed=1))
    assert est.sev_hat == 1.0
    assert est.sev_se == 0.0


def test_scaled_constant_sev():
    # every draw below T = k lands on the flat part 0.6 d; beyond k the radius is d
    from rcsphere.sphere import default_knots, hermite_radius, standard_radius

    d = standard_radius(3, 0.05)
    r = hermite_radius(3, 0.05, default_knots(3, d, 40.0), [0.6 * d] * 6 + [d], k=40.0)
    est = estimate(r, 0.0, McConfig(samples=100_000, seed=2))
    assert est.sev_hat == pytest.approx(0.6**3, rel=1e-12)


def test_single_sample(ch3):
    est = estimate(ch3, 0.0, McConfig(samples=1, seed=0))
    assert est.cp_se == 0.0 and est.sev_se == 0.0
    assert est.cp_hat in (0.0, 1.0)


def test_config_validation():
    with pytest.raises(ValueError):
        McConfig(samples=0)
    with pytest.raises(ValueError):
        McConfig(seed=-1)
    with pytest.raises(ValueError):
        McConfig(seed=2**64)


def test_negative_gamma(ch3):
    with pytest.raises(ValueError):
        estimate(ch3, -0.1, McConfig(samples=10))


def test_ch_p3_at_argmin(ch3):
    gammas = np.arange(3.8, 4.5, 0.05)
    cps = [coverage_probability(ch3, g) for g in gammas]
    g_star = float(gammas[int(np.argmin(cps))])
    est = estimate(ch3, g_star, McConfig(samples=1_000_000, seed=20140101))
    assert abs(est.cp_hat - 0.94594) <= 3 * est.cp_se
