import math
from fractions import Fraction

import numpy as np
import pytest

from linpat import sieve
from linpat.errors import BudgetError, ValidationError
from linpat.linsys import LinearSystem

from conftest import AP3_PSI, IDENTITY_PSI, MIDPOINTS_PSI


def _trial_is_prime(n):
    return n >= 2 and all(n % q for q in range(2, math.isqrt(n) + 1))


def _mobius(m):
    out = 1
    for p in range(2, m + 1):
        if m % p == 0:
            m //= p
            if m % p == 0:
                return 0
            out = -out
    return out


def test_primes_and_lpf_against_trial_division():
    ps = sieve.primes_upto(500)
    assert ps.tolist() == [n for n in range(501) if _trial_is_prime(n)]
    lpf = sieve.lpf_table(500)
    for n in range(2, 501):
        assert lpf[n] == next(q for q in range(2, n + 1) if n % q == 0)


def test_mobius_table():
    mu = sieve.mobius_upto(200)
    assert [int(mu[m]) for m in range(1, 201)] == [_mobius(m) for m in range(1, 201)]


@pytest.mark.parametrize("n", [2, 97, 561, 7919 * 104729, 2 ** 61 - 1, 10 ** 12 + 39, 600851475143])
def test_factorize_reconstructs(n):
    f = sieve.factorize(n)
    assert math.prod(p ** e for p, e in f.items()) == n
    assert all(sieve.is_prime(p) for p in f)


def test_is_prime_matches_trial_division():
    assert [n for n in range(2000) if sieve.is_prime(n)] == [n for n in range(2000) if _trial_is_prime(n)]


def test_context_validation():
    ctx = sieve.WTrickContext(100, 5, 7)
    assert ctx.W == 30 and ctx.small_primes == [2, 3, 5]
    assert ctx.phi_ratio == pytest.approx(8 / 30)
    with pytest.raises(ValidationError):
        sieve.WTrickContext(100, 5, 3)
    with pytest.raises(ValidationError):
        sieve.GpyConfig.create(ctx, 0.7)


def test_chi_shape():
    assert sieve.chi(0.0) == pytest.approx(1.0)
    assert sieve.chi(1.0) == 0.0 and sieve.chi(-1.5) == 0.0
    x = np.linspace(-0.95, 0.95, 41)
    h = 1e-6
    fd = (sieve.chi(x + h) - sieve.chi(x - h)) / (2 * h)
    assert np.allclose(sieve.chi_derivative(x), fd, atol=1e-6)


def test_gpy_weight_matches_direct_divisor_sum():
    ctx = sieve.WTrickContext(10 ** 4, 5, 1)
    cfg = sieve.GpyConfig.create(ctx, 0.3)
    h = ctx.phi_ratio * cfg.log_R
    for n in range(1, 400):
        v = ctx.value(n)
        s = sum(_mobius(m) * sieve.chi(math.log(m) / cfg.log_R) for m in range(1, math.ceil(cfg.R))
                if v % m == 0)
        assert sieve.gpy_weight(n, ctx, cfg) == pytest.approx(h * s * s, abs=1e-12)
    # [DERIVED] 91 = 7 * 13 with both divisors below R = 10^{1.2}
    assert sieve.gpy_weight(3, ctx, cfg) == pytest.approx(0.04210479374305195, abs=1e-12)


def test_range_sieve_matches_pointwise():
    ctx = sieve.WTrickContext(10 ** 5, 7, 11)
    cfg = sieve.GpyConfig.create(ctx, 0.4)
    arr = sieve.gpy_weights_range(1, 3000, ctx, cfg)
    pts = [sieve.gpy_weight(n, ctx, cfg) for n in range(1, 3001)]
    assert np.allclose(arr, pts, atol=1e-12, rtol=0)


def test_majorization_of_primes():
    ctx = sieve.WTrickContext(2000, 5, 1)
    cfg = sieve.GpyConfig.create(ctx, 0.3)
    rep = sieve.majorization_check(ctx, cfg, range(1, 2001))
    assert rep.ok and rep.checked > 0


def test_local_probabilities_three_cases():
    ctx = sieve.WTrickContext(100, 5, 1)
    for psi in (AP3_PSI, MIDPOINTS_PSI):
        for p in (2, 3, 5):
            assert sieve.local_alpha(p, [(0, 0)], psi, ctx) == 0
        for p in (7, 11, 13):
            assert sieve.local_alpha(p, [(1, 0), (1, 1)], psi, ctx) == Fraction(1, p)
            nonvert = sieve.local_alpha(p, [(0, 0), (2, 1)], psi, ctx)
            assert nonvert <= Fraction(1, p * p)
            assert nonvert == sieve.local_alpha_enumerated(p, [(0, 0), (2, 1)], psi, ctx)
    assert sieve.local_alpha(7, [], AP3_PSI, ctx) == 1


def test_local_alpha_enumeration_budget():
    ctx = sieve.WTrickContext(100, 3, 1)
    with pytest.raises(BudgetError):
        sieve.local_alpha_enumerated(101, [(0, 0)], MIDPOINTS_PSI, ctx, budget=1000)


def test_alpha_multi_is_multiplicative():
    ctx = sieve.WTrickContext(100, 3, 1)
    for ms in [(7, 1, 1), (7, 7, 1), (35, 5, 7), (1, 11, 1)]:
        assert sieve.alpha_multi(ms, AP3_PSI, ctx) == sieve.alpha_multi_enumerated(ms, AP3_PSI, ctx)


def test_euler_factor_grouping():
    ctx = sieve.WTrickContext(10 ** 4, 5, 1)
    cfg = sieve.GpyConfig.create(ctx, 0.3)
    xi = np.linspace(-1, 1, 6)
    for p in (2, 7, 13):
        table = sieve.local_table(p, AP3_PSI, ctx)
        full = sieve.euler_factor(p, xi, table, cfg, t=3)
        fast = sieve._euler_factor_fast(p, sieve._z(xi, 3, cfg), AP3_PSI, ctx)
        assert abs(full - fast) < 1e-12


def test_euler_product_converges_near_approximation():
    ctx = sieve.WTrickContext(10 ** 4, 3, 1)
    cfg = sieve.GpyConfig.create(ctx, 0.5)
    r = [abs(sieve.euler_product(None, IDENTITY_PSI, ctx, cfg, P).ratio) for P in (10 ** 3, 10 ** 4, 10 ** 5)]
    assert abs(r[2] - r[1]) < abs(r[1] - r[0])
    assert abs(r[2] - 1) < 0.1


def test_sieve_factor_two_ways():
    rep = sieve.sieve_factor_c2()
    assert rep.difference < 1e-4
    assert rep.imag_residual < 1e-6
    # [DERIVED] adaptive quadrature of chi'(x)^2 on [0, 1]
    assert sieve.c_chi2() == pytest.approx(3.982891950118166, rel=1e-10)


def test_truncated_rho_approaches_rho():
    ctx = sieve.WTrickContext(10 ** 6, 5, 1)
    cfg = sieve.GpyConfig.create(ctx, 0.4, xi_max=200.0)
    m = np.array([1, 2, 7, 30, 150])
    assert np.allclose(sieve.truncated_rho(m, cfg, 150.0), sieve.rho(m, cfg), atol=1e-3)


def test_unfolding_identity_within_boundary():
    ctx = sieve.WTrickContext(10 ** 4, 3, 1)
    cfg = sieve.GpyConfig.create(ctx, 0.2)
    psi = sieve.positive_shift(AP3_PSI, 30)
    rep = sieve.unfolding_oracle(psi, ctx, cfg, 30)
    assert rep.within


def test_positive_shift_makes_forms_positive():
    psi = LinearSystem(((1, -1), (2, -3)), 2)
    sh = sieve.positive_shift(psi, 10)
    vals = [sh((a, b)) for a in range(1, 11) for b in range(1, 11)]
    assert min(min(v) for v in vals) >= 1


def test_correlation_harness_is_deterministic_and_exhaustive():
    ctx = sieve.WTrickContext(10 ** 4, 3, 1)
    cfg = sieve.GpyConfig.create(ctx, 0.3)
    st = sieve.correlation_harness(IDENTITY_PSI, 1000, ctx, cfg)
    assert st.exhaustive and st.samples == 1000
    assert st.mean == pytest.approx(float(np.mean(sieve.normalized_nu_range(1, 1000, ctx, cfg))), rel=1e-12)
    psi = sieve.positive_shift(AP3_PSI, 3000)
    a = sieve.correlation_harness(psi, 3000, ctx, cfg, samples=5000, seed=3, exhaustive_limit=10)
    b = sieve.correlation_harness(psi, 3000, ctx, cfg, samples=5000, seed=3, exhaustive_limit=10)
    assert a == b and not a.exhaustive and a.stderr > 0
    assert a.deviation == a.mean - 1
