"""Acceptance criteria 1-12.  Each test prints one ``ACCEPTANCE k: PASS|FAIL`` line."""

import itertools
import math
import time
from fractions import Fraction

import numpy as np
import pytest

from linpat import cyclic, increment, linsys, patterns, sieve
from linpat.cyclic import BoxFamily
from linpat.linsys import IntMatrix, LinearSystem

from conftest import AP3_MATRIX, AP3_PSI, AP4_MATRIX, IDENTITY_PSI, MIDPOINTS_PSI, random_ti_matrix


@pytest.fixture
def report(capsys):
    start = time.perf_counter()

    def emit(k, ok, detail, limit):
        elapsed = time.perf_counter() - start
        ok = bool(ok) and elapsed < limit
        with capsys.disabled():
            print(f"\nACCEPTANCE {k}: {'PASS' if ok else 'FAIL'} ({elapsed:.1f}s / {limit}s) {detail}")
        return ok

    return emit


def test_01_sieve_factor(report):
    rep = sieve.sieve_factor_c2()
    ok = report(1, rep.difference < 1e-4,
                f"double={rep.double_integral:.10f} derivative={rep.derivative_integral:.10f} "
                f"diff={rep.difference:.2e}", 10)
    assert ok


def test_02_local_probabilities(report):
    ctx = sieve.WTrickContext(10 ** 4, 5, 1)
    bad = []
    checked = 0
    for name, psi in (("3ap", AP3_PSI), ("midpoints", MIDPOINTS_PSI)):
        om = sieve.omega_set(psi.t)
        for p in sieve.primes_upto(101).tolist():
            for k in range(1, len(om) + 1):
                for B in itertools.combinations(om, k):
                    a = sieve.local_alpha(p, B, psi, ctx)
                    if p <= ctx.omega:
                        want = Fraction(0)
                    elif sieve.is_vertical(B):
                        want = Fraction(1, p)
                    else:
                        # two or more touched forms: a rank-2 affine system over F_p
                        want = Fraction(1, p * p)
                    if p ** psi.d <= 10 ** 5:
                        if a != sieve.local_alpha_enumerated(p, B, psi, ctx):
                            bad.append((name, p, B, "enum"))
                    checked += 1
                    if a != want:
                        bad.append((name, p, B, a))
    ok = report(2, not bad, f"{checked} (p, B) pairs, mismatches={bad[:3]}", 30)
    assert ok


def test_03_gpy_oracle(report):
    ctx = sieve.WTrickContext(10 ** 5, 5, 1)
    worst = 0.0
    n_max = (10 ** 6 - ctx.b) // ctx.W
    n = np.arange(1, n_max + 1, dtype=np.int64)
    v = ctx.W * n + ctx.b
    for eta in (0.05, 0.3):
        cfg = sieve.GpyConfig.create(ctx, eta)
        # brute force: sum over every squarefree m < R dividing v
        S = np.zeros(len(n))
        for m in range(1, math.ceil(cfg.R)):
            mu = sieve.mobius_upto(m)[m]
            if mu and m < cfg.R:
                S += np.where(v % m == 0, int(mu) * sieve.rho(m, cfg), 0.0)
        brute = sieve.h_RW(ctx, cfg) * S * S
        sieved = sieve.gpy_weights_range(1, n_max, ctx, cfg)
        worst = max(worst, float(np.max(np.abs(sieved - brute))))
        for k in range(0, n_max, 97):
            worst = max(worst, abs(sieve.gpy_weight(int(n[k]), ctx, cfg) - brute[k]))
    ok = report(3, worst <= 1e-12, f"n <= {n_max}, max abs error {worst:.2e}", 60)
    assert ok


def test_04_linear_forms_condition(report):
    N = 10 ** 5
    ctx = sieve.WTrickContext(N, 5, 1)
    cfg = sieve.GpyConfig.create(ctx, 0.05)
    rows = []
    ok = True
    for name, psi in (("identity", IDENTITY_PSI), ("3ap", AP3_PSI), ("midpoints", MIDPOINTS_PSI)):
        P = N // (1 + max(sum(abs(a) for a in r) for r in psi.coeffs))
        st = sieve.correlation_harness(sieve.positive_shift(psi, P), P, ctx, cfg, samples=200_000, seed=0)
        rows.append(f"{name}: mean={st.mean:.4f} stderr={st.stderr:.4f}")
        ok &= 0.75 <= st.mean <= 1.25 and st.stderr < 0.02
    ok = report(4, ok, f"R={cfg.R:.3f}; " + "; ".join(rows), 600)
    assert ok


def test_05_fourier_and_box_suites(report):
    rng = np.random.default_rng(5)
    worst = 0.0
    for k in range(50):
        M = (53, 101, 257)[k % 3]
        f = rng.uniform(-1, 1, M)
        worst = max(worst, abs(cyclic.u2_norm(f) ** 4 - cyclic.u2_fourth_brute(f)))
        g = rng.normal(size=M) + 1j * rng.normal(size=M)
        worst = max(worst, float(np.max(np.abs(cyclic.idft(cyclic.dft(g)).values - g))))
        worst = max(worst, float(np.max(np.abs(cyclic.dft(g).coeffs - cyclic.dft_direct(g)))))
    vdc = gcs = 0
    for _ in range(100):
        n1, n2 = rng.integers(1, 8, 2)
        h = rng.normal(size=(n1, n2))
        lhs, rhs = cyclic.box_vdc_check(h, rng.uniform(-1, 1, n1), rng.uniform(-1, 1, n2))
        vdc += lhs <= rhs + 1e-12
        lhs, rhs = cyclic.gcs_check(BoxFamily(*(rng.normal(size=(n1, n2)) for _ in range(4))))
        gcs += lhs <= rhs + 1e-12
    ok = report(5, worst <= 1e-9 and vdc == 100 and gcs == 100,
                f"max identity error {worst:.2e}, VDC {vdc}/100, GCS {gcs}/100", 60)
    assert ok


def _systems_mod(M):
    rng = np.random.default_rng(M)
    out = [LinearSystem(AP3_PSI.coeffs, 2, modulus=M), LinearSystem(MIDPOINTS_PSI.coeffs, 3, modulus=M)]
    for _ in range(3):
        rows = rng.integers(0, M, (4, 2)).tolist()
        out.append(LinearSystem(tuple(map(tuple, rows)), 2, tuple(rng.integers(0, M, 4).tolist()), M))
    return out


def test_06_pattern_count_oracles(report):
    rng = np.random.default_rng(6)
    worst = 0.0
    for M in (11, 31, 53, 101):
        for theta in _systems_mod(M):
            fs = [rng.uniform(-1, 1, M) for _ in range(theta.t)]
            vals = [patterns.t_operator(theta, fs, method=m) for m in ("brute", "kernel", "fourier")]
            worst = max(worst, max(vals) - min(vals))
    count = patterns.count_solutions(AP3_MATRIX, range(1, 10))
    distinct = patterns.count_distinct_solutions(AP3_MATRIX, range(1, 10))
    ok = report(6, worst <= 1e-9 and count == 81 and distinct == 72,
                f"max method spread {worst:.2e}; count={count} (stated 81), distinct={distinct} (stated 72)",
                60)
    assert ok


def test_07_complexity_engine(report):
    rng = np.random.default_rng(7)
    mismatches = 0
    for _ in range(200):
        r = int(rng.integers(1, 3))
        t = int(rng.integers(r + 2, 6))
        V = random_ti_matrix(rng, r, t)
        if linsys.matrix_complexity(V) != linsys.complexity(linsys.kernel_surjection(V)):
            mismatches += 1
    named = (linsys.complexity(AP3_PSI), linsys.complexity(MIDPOINTS_PSI), linsys.matrix_complexity(AP3_MATRIX))
    ok = report(7, mismatches == 0 and named == (1, 1, 1),
                f"200 random matrices, mismatches={mismatches}; 3-AP/midpoints/[1,-2,1] -> {named}", 120)
    assert ok


def test_08_bohr_suite(report):
    rng = np.random.default_rng(8)
    fails = []
    for k in range(100):
        M = int(sieve.primes_upto(10 ** 4)[rng.integers(25, 1229)])
        d = int(rng.integers(1, 4))
        B = cyclic.bohr(M, rng.integers(1, M, d).tolist(), float(rng.uniform(0.02, 0.5)), check=False)
        rho = float(rng.uniform(0.01, 1.0))
        inner = cyclic.dilate(B, rho, check=False)
        if B.size < B.delta ** B.d * M or inner.size < (rho / 2) ** (2 * B.d) * B.size:
            fails.append(("size", k))
        R = cyclic.find_regular_dilate(B)
        c = R.delta / B.delta
        if not (0.5 - 1e-12 <= c <= 1 + 1e-12 and cyclic.is_regular(R)):
            fails.append(("regular", k))
    ok = report(8, not fails, f"100 instances, failures={fails[:5]}", 60)
    assert ok


def _random_normal_theta(rng, M, t):
    """t forms, each owning two private variables, plus two shared variables."""
    d = 2 * t + 2
    rows = []
    for i in range(t):
        row = [0] * d
        row[0], row[1] = rng.integers(0, M, 2).tolist()
        row[2 + 2 * i], row[3 + 2 * i] = rng.integers(1, M, 2).tolist()
        rows.append(tuple(row))
    return LinearSystem(tuple(rows), d, tuple(rng.integers(0, M, t).tolist()), M)


def test_09_bounded_von_neumann(report):
    rng = np.random.default_rng(9)
    M = 101
    worst = -math.inf
    for _ in range(100):
        t = int(rng.integers(2, 4))
        theta = _random_normal_theta(rng, M, t)
        fs = [rng.uniform(-1, 1, M) * (rng.random(M) < 0.7) for _ in range(t)]
        rep = increment.gvn_check(theta, fs, int(rng.integers(0, t)), tol=0.0)
        worst = max(worst, rep.slack)
    ok = report(9, worst <= 0, f"100 instances, max lhs - rhs = {worst:.3e}", 120)
    assert ok


def test_10_increment_engine(report):
    rng = np.random.default_rng(0)
    N = 500
    A = np.arange(-N, N + 1)[rng.random(2 * N + 1) < 0.5]
    res = increment.run_increment(AP3_MATRIX, A, N)
    exact = patterns.count_solutions(AP3_MATRIX, A)
    checks = [all(rec["checks"].values()) for rec in res.transcript if rec.get("case") == 2]
    alpha0 = res.transcript[0]["alpha"]
    ok = report(10, res.steps <= alpha0 ** (-12 * 3 + 1) and all(checks) and res.certified_bound <= exact,
                f"steps={res.steps} bound={res.certified_bound} exact={exact} case2 steps ok={checks}", 600)
    assert ok


def test_11_transference_demo(report):
    ctx = sieve.WTrickContext(10 ** 4, 5, 1)
    A = increment.wtricked_primes(ctx)
    rep = increment.transference_pipeline(A, ctx, increment.TransferenceConfig(), AP3_MATRIX,
                                          sieve.GpyConfig.create(ctx, 0.05)).to_dict()
    # independent enumeration of prime triples W a + b, W m + b, W c + b with a + c = 2m, a != c
    S = set(A.tolist())
    brute = sum(1 for a in A.tolist() for c in A.tolist() if a != c and (a + c) % 2 == 0 and (a + c) // 2 in S)
    ok = report(11, rep["distinct_count"] > 0 and rep["distinct_count"] == brute
                and rep["identity_residual"] <= 1e-9,
                f"|A|={len(A)} distinct={rep['distinct_count']} brute={brute} "
                f"identity residual={rep['identity_residual']:.2e}", 600)
    assert ok


DEGENERATE_MATRICES = [AP3_MATRIX, AP4_MATRIX, IntMatrix.from_rows([[1, 1, -1, -1]]),
                       IntMatrix.from_rows([[1, 2, -3]]), IntMatrix.from_rows([[1, 1, 1, -3]]),
                       IntMatrix.from_rows([[1, 1, -2, 0, 0], [0, 1, 1, -1, -1]])]


def test_12_degenerate_solutions(report):
    worst = -math.inf
    rows = []
    for V in DEGENERATE_MATRICES:
        k = V.t - V.rank() - 1
        for i, j in itertools.combinations(range(V.t), 2):
            c = [linsys.count_degenerate(V, N, i, j) for N in (5, 10, 20)]
            growth = max(math.log2(c[1] / c[0]), math.log2(c[2] / c[1]))
            worst = max(worst, growth - k)
        rows.append(f"t={V.t},r={V.r}")
    ok = report(12, worst <= 0.25, f"max (growth exponent - (t-r-1)) = {worst:.3f} over {rows}", 30)
    assert ok
