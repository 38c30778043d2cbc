"""Primes, the W-trick, GPY truncated divisor sums and their local/Euler data.

Conventions: Omega = [t] x [2] is indexed by pairs (i, j) with j in {0, 1}; a
subset B of Omega is *vertical* when it is non-empty and touches a single form.
The cutoff is chi(x) = 1_[-1,1](x) e^{x+1} e^{-1/(1-x^2)} and rho(m) = chi(log m / log R).
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field
from fractions import Fraction
from functools import lru_cache
from typing import Iterable, Optional, Sequence

import numpy as np
from scipy import integrate

from . import linsys
from .errors import BudgetError, CertificationError, ValidationError
from .linsys import LinearSystem

# ---------------------------------------------------------------------------
# Primes and factorization
# ---------------------------------------------------------------------------


@lru_cache(maxsize=8)
def primes_upto(n: int) -> np.ndarray:
    if n < 2:
        return np.zeros(0, dtype=np.int64)
    s = np.ones(n + 1, dtype=bool)
    s[:2] = False
    for p in range(2, math.isqrt(n) + 1):
        if s[p]:
            s[p * p::p] = False
    out = np.flatnonzero(s).astype(np.int64)
    out.setflags(write=False)
    return out


@lru_cache(maxsize=4)
def lpf_table(n: int) -> np.ndarray:
    """Least prime factor of every k <= n (lpf[0] = lpf[1] = 0)."""
    lpf = np.zeros(n + 1, dtype=np.int32)
    for p in primes_upto(math.isqrt(n)):
        p = int(p)
        seg = lpf[p * p::p]
        seg[seg == 0] = p
    idx = np.flatnonzero(lpf == 0)
    lpf[idx] = idx
    lpf[:2] = 0
    lpf.setflags(write=False)
    return lpf


@lru_cache(maxsize=8)
def mobius_upto(n: int) -> np.ndarray:
    mu = np.ones(n + 1, dtype=np.int8)
    mu[0] = 0
    for p in primes_upto(n):
        p = int(p)
        mu[p::p] *= -1
        mu[p * p::p * p] = 0
    mu.setflags(write=False)
    return mu


_MR_BASES = (2, 3, 5, 7, 11, 13, 17, 19, 23, 29, 31, 37, 41)


def is_prime(n: int) -> bool:
    """Deterministic Miller-Rabin, exact for n < 3.3 * 10^24."""
    n = int(n)
    if n < 2:
        return False
    for p in _MR_BASES:
        if n % p == 0:
            return n == p
    d, s = n - 1, 0
    while d % 2 == 0:
        d //= 2
        s += 1
    for a in _MR_BASES:
        x = pow(a, d, n)
        if x in (1, n - 1):
            continue
        for _ in range(s - 1):
            x = x * x % n
            if x == n - 1:
                break
        else:
            return False
    return True


def _pollard_rho(n: int, seed: int = 1) -> int:
    if n % 2 == 0:
        return 2
    c = seed
    while True:
        x = y = 2
        d = 1
        while d == 1:
            x = (x * x + c) % n
            y = (y * y + c) % n
            y = (y * y + c) % n
            d = math.gcd(abs(x - y), n)
        if d != n:
            return d
        c += 1


LPF_LIMIT = 1 << 22


def factorize(n: int, lpf_limit: int = LPF_LIMIT, budget: int = 10 ** 7) -> dict[int, int]:
    """Prime factorization of |n| >= 1."""
    n = abs(int(n))
    if n == 0:
        raise ValidationError("cannot factor 0")
    out: dict[int, int] = {}
    if n <= lpf_limit:
        lpf = lpf_table(lpf_limit)
        while n > 1:
            p = int(lpf[n])
            out[p] = out.get(p, 0) + 1
            n //= p
        return out
    steps = 0
    for p in primes_upto(min(10 ** 5, math.isqrt(n) + 1)):
        p = int(p)
        if p * p > n:
            break
        while n % p == 0:
            out[p] = out.get(p, 0) + 1
            n //= p
    stack = [n] if n > 1 else []
    while stack:
        m = stack.pop()
        steps += 1
        if steps > budget:
            raise BudgetError("factorization budget exceeded")
        if is_prime(m):
            out[m] = out.get(m, 0) + 1
            continue
        d = _pollard_rho(m)
        stack.extend([d, m // d])
    return dict(sorted(out.items()))


def primorial(omega: float) -> int:
    return math.prod(int(p) for p in primes_upto(int(math.floor(omega)))) if omega >= 2 else 1


# ---------------------------------------------------------------------------
# Parameters
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class WTrickContext:
    N: int
    omega: float
    b: int = 1
    W: int = field(default=0)

    def __post_init__(self):
        if self.N < 1:
            raise ValidationError("N must be positive")
        W = primorial(self.omega)
        if self.W not in (0, W):
            raise ValidationError("W must be the primorial of omega")
        object.__setattr__(self, "W", W)
        if math.gcd(self.b, W) != 1:
            raise ValidationError(f"b = {self.b} is not coprime to W = {W}")

    @property
    def small_primes(self) -> list[int]:
        return [int(p) for p in primes_upto(int(math.floor(self.omega)))]

    @property
    def phi_ratio(self) -> float:
        """phi(W) / W."""
        return math.prod(1 - 1 / p for p in self.small_primes)

    def value(self, n):
        return self.W * n + self.b


@dataclass(frozen=True)
class GpyConfig:
    """R = N^eta; L truncates xi-integrals; dx, xi_step, xi_max set the quadrature grid."""

    eta: float
    R: float
    L: float = 8.0
    dx: float = 2.0 / 4096
    xi_step: float = 0.1
    xi_max: float = 500.0

    @classmethod
    def create(cls, ctx: WTrickContext, eta: float, **kw) -> "GpyConfig":
        if not 0 < eta <= 0.5:
            raise ValidationError("eta must lie in (0, 1/2]")
        return cls(eta, float(ctx.N) ** eta, **kw)

    @property
    def log_R(self) -> float:
        return math.log(self.R)

    @property
    def degenerate(self) -> bool:
        """R < 2: rho is supported on {1} and the weight is constant."""
        return self.R < 2


def h_RW(ctx: WTrickContext, cfg: GpyConfig) -> float:
    return ctx.phi_ratio * cfg.log_R


def lambda_bW(n: int, ctx: WTrickContext) -> float:
    if not 1 <= n <= ctx.N:
        return 0.0
    return ctx.phi_ratio * math.log(ctx.N) if is_prime(ctx.value(n)) else 0.0


# ---------------------------------------------------------------------------
# The cutoff chi and rho
# ---------------------------------------------------------------------------


def chi(x):
    x = np.asarray(x, dtype=float)
    inside = np.abs(x) < 1
    xs = np.where(inside, x, 0.0)
    out = np.where(inside, np.exp(xs + 1 - 1 / (1 - xs * xs)), 0.0)
    return out if out.ndim else float(out)


def chi_derivative(x):
    x = np.asarray(x, dtype=float)
    inside = np.abs(x) < 1
    xs = np.where(inside, x, 0.0)
    u = 1 - xs * xs
    out = np.where(inside, chi(xs) * (1 - 2 * xs / (u * u)), 0.0)
    return out if out.ndim else float(out)


def rho(m, cfg: GpyConfig):
    m = np.asarray(m, dtype=float)
    if np.any(m < 1):
        raise ValidationError("rho is defined for m >= 1")
    out = np.where(m < cfg.R, chi(np.log(np.maximum(m, 1)) / cfg.log_R), 0.0)
    return out if out.ndim else float(out)


# ---------------------------------------------------------------------------
# GPY weights
# ---------------------------------------------------------------------------


def divisor_sum(v: int, cfg: GpyConfig) -> float:
    """sum_{m | v} mu(m) rho(m) over squarefree m < R, from the factorization of v."""
    ps = sorted(factorize(v))
    total = 0.0
    for k in range(len(ps) + 1):
        for sub in itertools.combinations(ps, k):
            m = math.prod(sub)
            if m < cfg.R:
                total += (-1) ** k * rho(m, cfg)
    return total


def gpy_weight(n: int, ctx: WTrickContext, cfg: GpyConfig) -> float:
    """Lambda_{chi,R,W}(n) = h_{R,W} (sum_{m | Wn+b} mu(m) rho(m))^2."""
    v = ctx.value(int(n))
    if v < 1:
        raise ValidationError(f"W n + b = {v} must be positive")
    return h_RW(ctx, cfg) * divisor_sum(v, cfg) ** 2


def divisor_sums_range(lo: int, hi: int, ctx: WTrickContext, cfg: GpyConfig) -> np.ndarray:
    """sum_{m | Wn+b} mu(m) rho(m) for every n in [lo, hi], sieved over m < R."""
    if ctx.value(lo) < 1:
        raise ValidationError("W n + b must be positive on the whole range")
    count = hi - lo + 1
    S = np.zeros(count)
    mmax = int(math.ceil(cfg.R)) - 1
    if mmax < 1:
        return S + 1.0
    mu = mobius_upto(mmax)
    for m in range(1, mmax + 1):
        if mu[m] == 0 or m >= cfg.R or math.gcd(m, ctx.W) != 1:
            continue
        # W n + b = 0 mod m  <=>  n = -b W^{-1} mod m
        r = (-ctx.b * pow(ctx.W, -1, m)) % m if m > 1 else 0
        start = (r - lo) % m
        S[start::m] += int(mu[m]) * rho(m, cfg)
    return S


def gpy_weights_range(lo: int, hi: int, ctx: WTrickContext, cfg: GpyConfig) -> np.ndarray:
    return h_RW(ctx, cfg) * divisor_sums_range(lo, hi, ctx, cfg) ** 2


@dataclass(frozen=True)
class MajorizationReport:
    checked: int
    violations: tuple[int, ...]
    skipped_small: int
    max_ratio: float

    @property
    def ok(self) -> bool:
        return not self.violations


def majorization_check(ctx: WTrickContext, cfg: GpyConfig, sample: Iterable[int]) -> MajorizationReport:
    """lambda_{b,W}(n) <= eta^{-1} Lambda(n) on the sample, wherever W n + b > R."""
    checked = skipped = 0
    bad = []
    ratio = 0.0
    for n in sample:
        lam = lambda_bW(n, ctx)
        if lam == 0:
            checked += 1
            continue
        if ctx.value(n) <= cfg.R:
            skipped += 1
            continue
        checked += 1
        Lam = gpy_weight(n, ctx, cfg)
        if lam > Lam / cfg.eta * (1 + 1e-12):
            bad.append(int(n))
        if Lam > 0:
            ratio = max(ratio, lam / Lam)
    return MajorizationReport(checked, tuple(bad), skipped, ratio)


# ---------------------------------------------------------------------------
# Local probabilities and Euler factors
# ---------------------------------------------------------------------------


def omega_set(t: int) -> list[tuple[int, int]]:
    return [(i, j) for i in range(t) for j in range(2)]


def touched(B: Iterable[tuple[int, int]]) -> frozenset:
    return frozenset(i for i, _ in B)


def is_vertical(B) -> bool:
    return len(touched(B)) == 1


def vertical_sets(t: int) -> list[frozenset]:
    return [frozenset(s) for i in range(t) for s in ([(i, 0)], [(i, 1)], [(i, 0), (i, 1)])]


def _alpha_enum(p: int, forms: tuple[int, ...], psi: LinearSystem, W: int, b: int) -> Fraction:
    A = np.array([psi.coeffs[i] for i in forms], dtype=np.int64).reshape(len(forms), psi.d)
    c = np.array([W * psi.constants[i] + b for i in forms], dtype=np.int64)
    grid = np.stack(np.meshgrid(*[np.arange(p, dtype=np.int64)] * psi.d, indexing="ij"), -1)
    vals = (W * (grid.reshape(-1, psi.d) @ A.T) + c) % p
    hits = int(np.all(vals == 0, axis=1).sum())
    return Fraction(hits, p ** psi.d)


@lru_cache(maxsize=1 << 16)
def _alpha_touched(p: int, forms: frozenset, psi: LinearSystem, W: int, b: int, budget: int) -> Fraction:
    if not forms:
        return Fraction(1)
    if W % p == 0:
        return Fraction(0)
    forms = tuple(sorted(forms))
    # solve W psi_i(n) = -b (mod p) for i in forms
    rows = [[(W * a) % p for a in psi.coeffs[i]] + [(-b - W * psi.constants[i]) % p] for i in forms]
    rr, piv = linsys.rref_mod(rows, p)
    if psi.d in piv:
        return Fraction(0)
    return Fraction(1, p ** len(piv))


def local_alpha(p: int, B, psi: LinearSystem, ctx: WTrickContext, budget: int = 10 ** 6) -> Fraction:
    """alpha(p, B) = P_{n in Z_p^d}(p | W psi_i(n) + b for every i touched by B), exactly.

    Solved as a linear system over F_p; :func:`local_alpha_enumerated` is the brute-force oracle.
    """
    return _alpha_touched(int(p), touched(B), psi, ctx.W, ctx.b, budget)


def local_alpha_enumerated(p: int, B, psi: LinearSystem, ctx: WTrickContext, budget: int = 10 ** 6) -> Fraction:
    """Same quantity by full enumeration of Z_p^d."""
    if p ** psi.d > budget:
        raise BudgetError("enumeration budget exceeded")
    forms = tuple(sorted(touched(B)))
    if not forms:
        return Fraction(1)
    return _alpha_enum(int(p), forms, psi, ctx.W, ctx.b)


@dataclass(frozen=True)
class LocalFactorTable:
    p: int
    values: dict

    def __getitem__(self, B) -> Fraction:
        return self.values[frozenset(B)]


def local_table(p: int, psi: LinearSystem, ctx: WTrickContext) -> LocalFactorTable:
    om = omega_set(psi.t)
    vals = {}
    for k in range(len(om) + 1):
        for B in itertools.combinations(om, k):
            vals[frozenset(B)] = local_alpha(p, B, psi, ctx)
    return LocalFactorTable(p, vals)


def _z(xi, t: int, cfg: GpyConfig) -> np.ndarray:
    xi = np.zeros((t, 2)) if xi is None else np.asarray(xi, dtype=float).reshape(t, 2)
    return (1 + 1j * xi) / cfg.log_R


def euler_factor(p: int, xi, table: LocalFactorTable, cfg: GpyConfig, t: Optional[int] = None) -> complex:
    """E_{p,xi} = sum_{B subset Omega} (-1)^{|B|} alpha(p,B) p^{-sum_B z}."""
    if t is None:
        t = max((i for B in table.values for i, _ in B), default=-1) + 1
    z = _z(xi, t, cfg)
    total = 0j
    for B, a in table.values.items():
        if a == 0:
            continue
        s = sum(z[i, j] for i, j in B)
        total += (-1) ** len(B) * float(a) * p ** (-s)
    return complex(total)


def _euler_factor_fast(p: int, z: np.ndarray, psi: LinearSystem, ctx: WTrickContext) -> complex:
    # group subsets by touched forms: each touched i contributes -a - b + ab
    per = -p ** (-z[:, 0]) - p ** (-z[:, 1]) + p ** (-z[:, 0] - z[:, 1])
    total = 0j
    for k in range(psi.t + 1):
        for T in itertools.combinations(range(psi.t), k):
            a = _alpha_touched(p, frozenset(T), psi, ctx.W, ctx.b, 10 ** 6)
            if a:
                total += float(a) * np.prod(per[list(T)])
    return complex(total)


@dataclass(frozen=True)
class EulerProductReport:
    product: complex
    approximation: complex
    ratio: complex
    primes_used: int


def euler_product(xi, psi: LinearSystem, ctx: WTrickContext, cfg: GpyConfig, P_max: int) -> EulerProductReport:
    """prod_{p <= P_max} E_{p,xi} and h^{-t} prod_{B vertical} (sum_B (1 + i xi))^{-(-1)^{|B|}}."""
    t = psi.t
    z = _z(xi, t, cfg)
    prod = 1 + 0j
    ps = primes_upto(int(P_max)) if P_max >= 2 else []
    for p in ps:
        prod *= _euler_factor_fast(int(p), z, psi, ctx)
    w = 1 + 1j * (np.zeros((t, 2)) if xi is None else np.asarray(xi, dtype=float).reshape(t, 2))
    approx = h_RW(ctx, cfg) ** (-t) + 0j
    for B in vertical_sets(t):
        s = sum(w[i, j] for i, j in B)
        approx *= s ** (-((-1) ** len(B)))
    return EulerProductReport(complex(prod), complex(approx), complex(prod / approx), len(ps))


# ---------------------------------------------------------------------------
# The sieve factor c_{chi,2}
# ---------------------------------------------------------------------------


@lru_cache(maxsize=8)
def phi_grid(dx: float = 2.0 / 4096, xi_step: float = 0.1, xi_max: float = 500.0) -> tuple[np.ndarray, np.ndarray]:
    """phi(xi) = (1/2pi) int_{-1}^{1} e^x chi(x) e^{i xi x} dx on a uniform xi-grid.

    With this phi, chi(x) = int phi(xi) e^{-(1+i xi) x} d xi on [-1, 1].  The
    x-integral is a trapezoid sum (spectrally accurate: the integrand is flat at
    +-1) evaluated for all xi at once by one FFT; the xi-step is snapped so the
    grid is exactly an FFT grid.
    """
    nx = int(round(2 / dx))
    x = -1 + dx * np.arange(nx + 1)
    g = np.exp(x) * chi(x)
    nfft = int(round(2 * math.pi / (xi_step * dx)))
    h = 2 * math.pi / (nfft * dx)
    K = int(xi_max / h)
    coef = np.fft.ifft(g, n=nfft) * nfft  # sum_n g_n e^{+2 pi i k n / nfft}
    k = np.arange(-K, K + 1)
    xi = k * h
    vals = dx / (2 * math.pi) * coef[k % nfft] * np.exp(-1j * xi)  # shift x_0 = -1
    xi.setflags(write=False)
    vals.setflags(write=False)
    return xi, vals


@dataclass(frozen=True)
class SieveFactorReport:
    double_integral: float
    derivative_integral: float
    difference: float
    imag_residual: float


def chi_derivative_integral() -> float:
    val, _ = integrate.quad(lambda x: chi_derivative(x) ** 2, 0.0, 1.0, limit=400, epsabs=1e-13, epsrel=1e-13)
    return float(val)


@lru_cache(maxsize=8)
def sieve_factor_c2(dx: float = 2.0 / 4096, xi_step: float = 0.1, xi_max: float = 500.0) -> SieveFactorReport:
    """c_{chi,2} as the double xi-integral and as int_0^infty chi'(x)^2 dx."""
    xi, phi = phi_grid(dx, xi_step, xi_max)
    h = xi[1] - xi[0]
    a = (1 + 1j * xi) * phi
    n = len(a)
    L = 1 << (2 * n - 1).bit_length()
    conv = np.fft.ifft(np.fft.fft(a, L) ** 2)[:2 * n - 1]  # sum over xi + xi' = s
    s = xi[0] * 2 + h * np.arange(2 * n - 1)
    val = h * h * np.sum(conv / (2 + 1j * s))
    direct = chi_derivative_integral()
    if direct <= 0:
        raise CertificationError("c_{chi,2} must be positive")
    return SieveFactorReport(float(val.real), direct, abs(float(val.real) - direct), abs(float(val.imag)))


def c_chi2() -> float:
    return chi_derivative_integral()


def truncated_rho(m, cfg: GpyConfig, L: float) -> np.ndarray:
    """int_{-L}^{L} m^{-(1+i xi)/log R} phi(xi) d xi (trapezoid on the phi grid)."""
    xi, phi = phi_grid(cfg.dx, cfg.xi_step, cfg.xi_max)
    sel = np.abs(xi) <= L + 1e-12
    u = np.log(np.atleast_1d(np.asarray(m, dtype=float))) / cfg.log_R
    w = np.where(np.isclose(np.abs(xi[sel]), L), 0.5, 1.0)
    h = xi[1] - xi[0]
    vals = (np.exp(-np.outer(u, 1 + 1j * xi[sel])) * (phi[sel] * w)).sum(axis=1) * h
    return vals.real


def normalized_nu(n: int, ctx: WTrickContext, cfg: GpyConfig) -> float:
    return gpy_weight(n, ctx, cfg) / c_chi2()


def normalized_nu_range(lo: int, hi: int, ctx: WTrickContext, cfg: GpyConfig) -> np.ndarray:
    return gpy_weights_range(lo, hi, ctx, cfg) / c_chi2()


# ---------------------------------------------------------------------------
# Unfolding oracle and correlation harness
# ---------------------------------------------------------------------------


def alpha_multi(ms: Sequence[int], psi: LinearSystem, ctx: WTrickContext) -> Fraction:
    """alpha(m_1, ..., m_t) from the local factors at each prime (CRT multiplicativity)."""
    ms = [int(m) for m in ms]
    primes = sorted({p for m in ms for p in factorize(m)}) if any(m > 1 for m in ms) else []
    out = Fraction(1)
    for p in primes:
        T = frozenset(i for i, m in enumerate(ms) if m % p == 0)
        out *= _alpha_touched(p, T, psi, ctx.W, ctx.b, 10 ** 6)
    return out


def alpha_multi_enumerated(ms: Sequence[int], psi: LinearSystem, ctx: WTrickContext,
                           budget: int = 10 ** 6) -> Fraction:
    m = math.lcm(*[int(x) for x in ms]) if ms else 1
    if m ** psi.d > budget:
        raise BudgetError("enumeration budget exceeded")
    hits = 0
    for x in itertools.product(range(m), repeat=psi.d):
        vals = psi(x)
        if all((ctx.W * v + ctx.b) % mi == 0 for v, mi in zip(vals, ms)):
            hits += 1
    return Fraction(hits, m ** psi.d)


@dataclass(frozen=True)
class UnfoldingReport:
    lhs: float
    rhs: float
    boundary_bound: float

    @property
    def within(self) -> bool:
        return abs(self.lhs - self.rhs) <= self.boundary_bound


def unfolding_oracle(psi: LinearSystem, ctx: WTrickContext, cfg: GpyConfig, P: int,
                     budget: int = 5 * 10 ** 6) -> UnfoldingReport:
    """Both sides of the divisor-sum unfolding over n in [P]^d, computed exhaustively."""
    t, d = psi.t, psi.d
    if P ** d > budget:
        raise BudgetError("too many points")
    grid = np.stack(np.meshgrid(*[np.arange(1, P + 1)] * d, indexing="ij"), -1).reshape(-1, d)
    A = np.array(psi.coeffs, dtype=np.int64).reshape(t, d)
    vals = grid @ A.T + np.array(psi.constants, dtype=np.int64)
    lo, hi = int(vals.min()), int(vals.max())
    S = divisor_sums_range(lo, hi, ctx, cfg)
    lhs = float(np.prod(S[vals - lo] ** 2, axis=1).sum())
    ms = [m for m in range(1, int(math.ceil(cfg.R))) if m < cfg.R and mobius_upto(max(m, 1))[m] != 0]
    weights = {m: int(mobius_upto(m)[m]) * rho(m, cfg) for m in ms}
    if len(ms) ** (2 * t) > budget:
        raise BudgetError("too many divisor tuples")
    rhs = 0.0
    for tup in itertools.product(ms, repeat=2 * t):
        w = math.prod(weights[m] for m in tup)
        if w == 0:
            continue
        mi = [math.lcm(tup[2 * i], tup[2 * i + 1]) for i in range(t)]
        a = alpha_multi(mi, psi, ctx)
        if a:
            rhs += float(a) * w
    rhs *= P ** d
    bound = cfg.R ** (4 * t) * P ** (d - 1)
    return UnfoldingReport(lhs, rhs, bound)


@dataclass(frozen=True)
class CorrelationStats:
    mean: float
    stderr: float
    samples: int
    exhaustive: bool

    @property
    def deviation(self) -> float:
        return self.mean - 1.0

    def to_dict(self) -> dict:
        return {"mean": self.mean, "stderr": self.stderr, "samples": self.samples,
                "exhaustive": self.exhaustive, "deviation": self.deviation}


def correlation_harness(psi: LinearSystem, P: int, ctx: WTrickContext, cfg: GpyConfig,
                        samples: int = 200_000, seed: int = 0, exhaustive_limit: int = 2_000_000,
                        block: int = 1 << 16) -> CorrelationStats:
    """E_{n in [P]^d} prod_i nu(psi_i(n)), exhaustive when P^d is small, else Monte Carlo."""
    t, d = psi.t, psi.d
    if t == 0:
        return CorrelationStats(1.0, 0.0, 0, True)
    A = np.array(psi.coeffs, dtype=np.int64).reshape(t, d)
    c = np.array(psi.constants, dtype=np.int64)
    corners = np.array(list(itertools.product([1, P], repeat=d)), dtype=np.int64)
    cv = corners @ A.T + c
    lo, hi = int(cv.min()), int(cv.max())
    nu = normalized_nu_range(lo, hi, ctx, cfg)
    exhaustive = P ** d <= exhaustive_limit
    rng = np.random.default_rng(seed)
    total = P ** d if exhaustive else samples
    sums, sq = [], []
    for s in range(0, total, block):
        cnt = min(block, total - s)
        if exhaustive:
            idx = np.arange(s, s + cnt, dtype=np.int64)
            cols = []
            for _ in range(d):
                cols.append(idx % P)
                idx //= P
            n = np.stack(cols[::-1], axis=1) + 1
        else:
            n = rng.integers(1, P + 1, size=(cnt, d))
        prod = np.prod(nu[(n @ A.T + c) - lo], axis=1)
        sums.append(math.fsum(prod))
        sq.append(math.fsum(prod * prod))
    mean = math.fsum(sums) / total
    var = max(math.fsum(sq) / total - mean * mean, 0.0)
    stderr = math.sqrt(var / total)
    return CorrelationStats(mean, stderr, total, exhaustive)


def positive_shift(psi: LinearSystem, P: int) -> LinearSystem:
    """psi plus constants making every form at least 1 on [P]^d."""
    c = tuple(1 + P * sum(-a for a in row if a < 0) for row in psi.coeffs)
    return LinearSystem(psi.coeffs, psi.d, c)
