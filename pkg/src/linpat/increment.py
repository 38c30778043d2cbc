"""Density increment on Bohr sets and the transference pipeline.

``run_increment`` looks for solutions of V y = 0 in a dense A inside [-N, N].
At each step it counts phi-patterns along a chain of Bohr sets.  If there are
many, it certifies a lower bound on the solution count (Case 1).  Otherwise it
walks large twisted norm -> untwisted norm -> local density increment and
rescales A onto u + m B' (Case 2).  Every inequality the step relies on is
re-evaluated numerically and logged; nothing is taken on trust.

``transference_pipeline`` runs the same machinery on a W-tricked set of
primes: weight extension to Z_M, Bohr smoothing, multilinear expansion, and
the bounded/weighted Von Neumann comparisons.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field
from typing import Any, Optional, Sequence

import numpy as np

from . import linsys
from .constants import ExtensionConstants, IncrementConstants
from .cyclic import (BohrSet, CyclicFn, bohr, dft, dilate, find_regular_dilate,
                     is_regular, local_twisted_mean)
from .errors import BudgetError, CertificationError, ValidationError
from .linsys import IntMatrix, LinearSystem
from .patterns import BohrChain, count_distinct_solutions, count_solutions, t_operator
from .sieve import (GpyConfig, WTrickContext, is_prime, lambda_bW, normalized_nu_range,
                    primes_upto)


def next_prime(x: float) -> int:
    n = max(2, int(math.floor(x)) + 1)
    while not is_prime(n):
        n += 1
    return n


def _fourth_power_sum(f: np.ndarray) -> float:
    c = dft(f).coeffs
    return float(np.sum(np.abs(c) ** 4))


# ---------------------------------------------------------------------------
# Weights on Z_M
# ---------------------------------------------------------------------------


def wrap_weight(values: np.ndarray, M: int, offset: int = 1) -> CyclicFn:
    """The M-periodic extension of a weight given on [offset, offset + len)."""
    values = np.asarray(values, dtype=float)
    if len(values) > M:
        raise ValidationError(f"support of length {len(values)} does not fit in Z_{M}")
    out = np.zeros(M)
    np.add.at(out, (np.arange(len(values)) + offset) % M, values)
    return CyclicFn(M, out)


def bad_box_fraction(psi: LinearSystem, M: int, P: Optional[int] = None,
                     samples: int = 200_000, seed: int = 0,
                     exhaustive_limit: int = 2_000_000) -> tuple[float, bool]:
    """Fraction of m in [M]^d whose box psi(m + [P]^d) meets two cells [1, M] + M l.

    Returns (fraction, exhaustive).  P defaults to floor(sqrt(M)).
    """
    P = int(math.isqrt(M)) if P is None else int(P)
    t, d = psi.t, psi.d
    A = np.array(psi.coeffs, dtype=np.int64).reshape(t, d)
    c = np.array(psi.constants, dtype=np.int64) if psi.constants else np.zeros(t, dtype=np.int64)
    lo_off = np.where(A > 0, A, A * P).sum(axis=1)
    hi_off = np.where(A > 0, A * P, A).sum(axis=1)
    exhaustive = M ** d <= exhaustive_limit
    if exhaustive:
        grids = np.stack(np.meshgrid(*[np.arange(1, M + 1)] * d, indexing="ij"), -1).reshape(-1, d)
    else:
        grids = np.random.default_rng(seed).integers(1, M + 1, size=(samples, d))
    base = grids @ A.T + c
    lo = base + lo_off
    hi = base + hi_off
    bad = np.any(np.floor_divide(lo - 1, M) != np.floor_divide(hi - 1, M), axis=1)
    return float(bad.mean()), exhaustive


@dataclass
class ExtensionReport:
    nu: CyclicFn
    averages: list[dict]
    majorization_constant: Optional[float]
    bad_box_fraction: Optional[float]
    bad_box_bound: float

    @property
    def bad_box_ok(self) -> bool:
        return self.bad_box_fraction is None or self.bad_box_fraction <= self.bad_box_bound

    def to_dict(self) -> dict:
        return {"M": self.nu.M, "mean": self.nu.mean(), "averages": self.averages,
                "majorization_constant": self.majorization_constant,
                "bad_box_fraction": self.bad_box_fraction, "bad_box_bound": self.bad_box_bound,
                "bad_box_ok": self.bad_box_ok}


def extend_weight(nu: np.ndarray, M: int, systems: Sequence[tuple[str, LinearSystem]] = (),
                  lam: Optional[np.ndarray] = None, bad_box_system: Optional[LinearSystem] = None,
                  consts: ExtensionConstants = ExtensionConstants()) -> ExtensionReport:
    """Wrap a weight on [1, N] to Z_M and report its pseudorandomness diagnostics.

    ``systems`` are integer systems whose linear-forms averages over Z_M^d are
    reported against 1.  ``lam`` (same support as nu) is checked pointwise for
    lam <= C nu and the smallest such C is reported.  The bad-box fraction of
    ``bad_box_system`` is compared with bad_box_K * M^(-1/2).
    """
    nu = np.asarray(nu, dtype=float)
    if M < len(nu) or not is_prime(M):
        raise ValidationError("M must be a prime at least N")
    if np.any(nu < 0):
        raise ValidationError("weights must be non-negative")
    wrapped = wrap_weight(nu, M)
    averages = []
    for name, sys_ in systems:
        if sys_.d > consts.D or sys_.t > consts.D or linsys.system_norm(sys_.linear_part()) > consts.D:
            raise ValidationError(f"system {name} exceeds the degree budget D = {consts.D}")
        theta = LinearSystem(sys_.coeffs, sys_.d, sys_.constants, M)
        val = t_operator(theta, [wrapped] * theta.t)
        averages.append({"system": name, "value": val, "deviation": val - 1.0,
                         "within_budget": abs(val - 1.0) <= consts.linear_forms_budget})
    C = None
    if lam is not None:
        lam = np.asarray(lam, dtype=float)
        if lam.shape != nu.shape:
            raise ValidationError("lam and nu must share their support")
        pos = lam > 0
        if np.any(pos & (nu <= 0)):
            C = math.inf
        else:
            C = float(np.max(lam[pos] / nu[pos])) if pos.any() else 0.0
    frac = None
    if bad_box_system is not None:
        frac, _ = bad_box_fraction(bad_box_system, M)
    return ExtensionReport(wrapped, averages, C, frac, consts.bad_box_K / math.sqrt(M))


def average_weight(nu: CyclicFn, B: BohrSet) -> CyclicFn:
    """nu' = (nu + nu * mu_B) / 2, with mu_B the normalized indicator of B."""
    if B.M != nu.M:
        raise ValidationError("weight and Bohr set live on different groups")
    return CyclicFn(nu.M, 0.5 * (nu.values + bohr_convolve(nu.values, B)))


def bohr_convolve(values: np.ndarray, B: BohrSet) -> np.ndarray:
    """(f * mu_B)(x) = E_{b in B} f(x - b)."""
    M = B.M
    ind = np.bincount(B.elements % M, minlength=M).astype(float)
    return np.fft.ifft(np.fft.fft(values) * np.fft.fft(ind)).real / B.size


# ---------------------------------------------------------------------------
# Generalized Von Neumann comparison
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class GvnReport:
    lhs: float
    rhs: float
    bounded: bool
    majorant_constant: Optional[float] = None

    @property
    def slack(self) -> float:
        return self.lhs - self.rhs

    def to_dict(self) -> dict:
        return {"lhs": self.lhs, "rhs": self.rhs, "slack": self.slack, "bounded": self.bounded,
                "majorant_constant": self.majorant_constant}


def gvn_check(theta: LinearSystem, fs: Sequence, i: int, s: int = 1,
              nu: Optional[CyclicFn] = None, tol: float = 1e-9) -> GvnReport:
    """|T(f_1..f_t)|^4 against ||f_i||_{U^2}^4 for theta in exact 1-normal form at i.

    With nu = None every |f_j| must be at most 1 and the inequality is asserted.
    With a weight nu the smallest C with |f_j| <= C nu is reported and the
    comparison is returned unasserted.
    """
    if s != 1:
        raise ValidationError("only s = 1 (the U^2 case) is implemented")
    M = theta.modulus
    if M is None:
        raise ValidationError("gvn_check needs a system over Z_M")
    ok, _ = linsys.is_exact_normal_at(theta.linear_part(), i, s)
    if not ok:
        raise ValidationError(f"system is not in exact {s}-normal form at {i}")
    vals = [np.asarray(f.values if isinstance(f, CyclicFn) else f) for f in fs]
    C = None
    if nu is None:
        if max(float(np.max(np.abs(v), initial=0.0)) for v in vals) > 1 + 1e-12:
            raise ValidationError("bounded case needs |f_j| <= 1")
    else:
        w = nu.values
        wz = w <= 1e-12 * max(float(np.max(w, initial=0.0)), 1e-300)
        ratios = []
        for v in vals:
            a = np.abs(v)
            # FFT round-off below 1e-9 of the peak counts as zero
            pos = a > 1e-9 * max(float(np.max(a, initial=0.0)), 1e-300)
            if np.any(pos & wz):
                ratios.append(math.inf)
            elif pos.any():
                ratios.append(float(np.max(a[pos] / w[pos])))
        C = max(ratios, default=0.0)
    T = t_operator(theta, vals)
    lhs = abs(T) ** (2 ** (s + 1))
    rhs = _fourth_power_sum(vals[i])
    rep = GvnReport(lhs, rhs, nu is None, C)
    if nu is None and lhs > rhs + tol:
        raise CertificationError(f"bounded Von Neumann inequality fails: {lhs} > {rhs}")
    return rep


# ---------------------------------------------------------------------------
# Smoothing and level sets
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class TransferenceConfig:
    delta: float = 0.1
    eps: float = 0.05
    D: int = 8
    level_fraction: float = 0.5
    identity_tol: float = 1e-9
    c_constraint: float = 1.0
    max_spectrum: int = 64
    M: Optional[int] = None  # modulus override; must be a prime above the transfer threshold

    def __post_init__(self):
        if not (0 < self.delta <= 1 and 0 < self.eps <= 1):
            raise ValidationError("delta and eps must lie in (0, 1]")
        if not 0 < self.level_fraction <= 1:
            raise ValidationError("level fraction must lie in (0, 1]")

    def constraint(self, N: int) -> dict:
        lhs = self.delta ** -4 * math.log(1 / self.eps)
        rhs = self.c_constraint * math.log(N)
        return {"lhs": lhs, "rhs": rhs, "holds": lhs <= rhs}


@dataclass
class Smoothing:
    gamma: tuple[int, ...]
    B: BohrSet
    lam_prime: CyclicFn
    spectrum_bound: float
    support_ok: Optional[bool]
    u2_difference: float
    fitted_K: float
    large_spectrum_size: int = 0

    def to_dict(self) -> dict:
        return {"gamma_size": len(self.gamma), "large_spectrum_size": self.large_spectrum_size,
                "truncated": self.large_spectrum_size > len(self.gamma),
                "gamma": list(self.gamma), "B": self.B.to_dict(),
                "spectrum_bound": self.spectrum_bound, "support_ok": self.support_ok,
                "u2_difference": self.u2_difference, "fitted_K": self.fitted_K}


def build_smoothing(lam: CyclicFn, cfg: TransferenceConfig, N: Optional[int] = None) -> Smoothing:
    """Gamma = {r : |lam^(r)| >= delta} + {1}, B = regular B(Gamma, eps), lam' = lam * mu_B."""
    M = lam.M
    hat = dft(lam).coeffs
    mags = np.abs(hat)
    large = np.flatnonzero(mags >= cfg.delta)
    full_size = len(large)
    if len(large) > cfg.max_spectrum:
        # keep the largest coefficients (ties to smaller frequency) so B stays non-trivial
        order = np.lexsort((large, -mags[large]))
        large = np.sort(large[order[:cfg.max_spectrum]])
    gamma = tuple(sorted(set(int(r) for r in large) | {1}))
    B = find_regular_dilate(bohr(M, gamma, cfg.eps, check=False))
    lam_prime = CyclicFn(M, bohr_convolve(lam.values, B))
    bound = cfg.delta ** -4 * float(np.sum(mags ** 4))
    support_ok = None
    if N is not None:
        nz = np.flatnonzero(np.abs(lam_prime.values) > 1e-12)
        c = np.where(nz > M // 2, nz - M, nz)
        support_ok = bool(np.all(np.abs(c) <= 2 * N)) if len(c) else True
    diff = lam.values - lam_prime.values
    u2 = max(_fourth_power_sum(diff), 0.0) ** 0.25
    K = u2 / (cfg.eps ** 0.25 + cfg.delta ** 0.25)
    return Smoothing(gamma, B, lam_prime, bound, support_ok, u2, K, full_size)


@dataclass
class LevelSet:
    elements: np.ndarray
    density: float
    moments: dict

    def to_dict(self) -> dict:
        return {"size": int(len(self.elements)), "density": self.density, "moments": self.moments}


def level_set(lam_prime: CyclicFn, alpha: float, fraction: float = 0.5) -> LevelSet:
    """A' = {x : lam'(x) >= fraction * alpha}, as centered integers, with L^p moments."""
    M = lam_prime.M
    v = lam_prime.values.real if np.iscomplexobj(lam_prime.values) else lam_prime.values
    idx = np.flatnonzero(v >= fraction * alpha - 1e-12)
    els = np.sort(np.where(idx > M // 2, idx - M, idx))
    moments = {f"L{p}": float(np.mean(np.abs(v) ** p) ** (1 / p)) for p in (4, 6, 8)}
    return LevelSet(els, len(idx) / M, moments)


# ---------------------------------------------------------------------------
# Increment steps
# ---------------------------------------------------------------------------


@dataclass
class BalancedFn:
    """f_A = 1_A - alpha 1_B on Z_M for A inside the Bohr set B."""

    f: CyclicFn
    B: BohrSet
    alpha: float

    @classmethod
    def create(cls, A: np.ndarray, B: BohrSet) -> "BalancedFn":
        M = B.M
        A = np.asarray(A, dtype=np.int64)
        if len(A) and not np.all(np.isin(A, B.elements)):
            raise ValidationError("A must lie inside B")
        alpha = len(A) / B.size
        v = np.zeros(M)
        v[B.elements % M] = -alpha
        v[A % M] += 1.0
        out = cls(CyclicFn(M, v), B, alpha)
        if abs(v[B.elements % M].sum()) > 1e-9 * max(1, B.size):
            raise CertificationError("balanced function does not average to zero on B")
        return out


def _chain_pass(phi: LinearSystem, chain: BohrChain, choices: Sequence[Sequence[np.ndarray]],
                A_int: np.ndarray, chunk: int = 1 << 17) -> tuple[np.ndarray, int]:
    """All T_B terms for prod_i choices[i], plus the exact integer count of x with phi(x) in A^t."""
    M = chain.M
    t = phi.t
    Aco = np.array(phi.coeffs, dtype=np.int64).reshape(t, phi.d)
    c = np.array(phi.constants, dtype=np.int64) if phi.constants else np.zeros(t, dtype=np.int64)
    sizes = [B.size for B in chain.sets]
    total = math.prod(sizes)
    if len(A_int):
        lo, hi = int(A_int.min()), int(A_int.max())
        member = np.zeros(hi - lo + 1, dtype=bool)
        member[A_int - lo] = True
    shape = tuple(len(ch) for ch in choices)
    out = np.zeros(shape)
    letters = "abcdefghijklmnop"[:t]
    expr = ",".join(f"{letters[i]}z" for i in range(t)) + "->" + letters
    hits = 0
    for s in range(0, total, chunk):
        idx = np.arange(s, min(total, s + chunk), dtype=np.int64)
        coords = []
        for n in sizes[::-1]:
            coords.append(idx % n)
            idx //= n
        X = np.stack([B.elements[k] for B, k in zip(chain.sets, coords[::-1])], axis=1)
        vals = X @ Aco.T + c
        red = vals % M
        mats = [np.stack([np.asarray(f)[red[:, i]] for f in choices[i]]) for i in range(t)]
        out += np.einsum(expr, *mats, optimize=True)
        if len(A_int):
            inside = np.ones(len(vals), dtype=bool)
            for i in range(t):
                v = vals[:, i] - lo
                ok = (v >= 0) & (v <= hi - lo)
                ok[ok] = member[v[ok]]
                inside &= ok
            hits += int(inside.sum())
    return out / total, hits


def build_chain(B0: BohrSet, q: int, rho: float) -> BohrChain:
    """B_0 followed by q regular dilates, each inside the rho-dilate of its predecessor."""
    sets = [B0]
    for _ in range(q):
        sets.append(find_regular_dilate(dilate(sets[-1], rho, check=False)))
    return BohrChain(tuple(sets), (rho,) * q)


@dataclass
class ExpansionResult:
    case: int
    alpha: float
    main: float
    T_A: float
    identity_residual: float
    terms: dict
    chosen: Optional[tuple[int, ...]] = None
    eta: float = 0.0
    pigeonhole_threshold: float = 0.0
    stated_threshold: float = 0.0
    pattern_hits: int = 0
    degenerate: bool = False

    def to_dict(self) -> dict:
        return {"case": self.case, "alpha": self.alpha, "main": self.main, "T_A": self.T_A,
                "identity_residual": self.identity_residual,
                "chosen": list(self.chosen) if self.chosen else None, "eta": self.eta,
                "pigeonhole_threshold": self.pigeonhole_threshold,
                "stated_threshold": self.stated_threshold,
                "stated_threshold_met": self.eta >= self.stated_threshold if self.case == 2 else None,
                "pattern_hits": self.pattern_hits, "degenerate": self.degenerate}


def multilinear_expand(A: np.ndarray, chain: BohrChain, phi: LinearSystem,
                       consts: IncrementConstants = IncrementConstants()) -> ExpansionResult:
    """Case 1 if T_B(1_A, ..., 1_A) >= case1_fraction alpha^t, else the largest term with some f_A.

    All 2^t terms T_B(g_1, ..., g_t), g_i in {alpha 1_B, f_A}, come from one pass
    and their sum is checked against T_B(1_A, ..., 1_A).
    """
    B0 = chain.sets[0]
    A = np.asarray(A, dtype=np.int64)
    t = phi.t
    if len(A) == 0:
        return ExpansionResult(1, 0.0, 0.0, 0.0, 0.0, {}, degenerate=True)
    bal = BalancedFn.create(A, B0)
    alpha = bal.alpha
    M = B0.M
    one_A = np.zeros(M)
    one_A[A % M] = 1.0
    aB = np.zeros(M)
    aB[B0.elements % M] = alpha
    vals, hits = _chain_pass(phi, chain, [[aB, bal.f.values, one_A]] * t, A)
    main = float(vals[(0,) * t])
    T_A = float(vals[(2,) * t])
    terms = {idx: float(vals[idx]) for idx in itertools.product((0, 1), repeat=t)}
    resid = abs(T_A - sum(terms.values()))
    if resid > 1e-9:
        raise CertificationError(f"multilinear expansion identity off by {resid}")
    res = ExpansionResult(1, alpha, main, T_A, resid, {"".join(map(str, k)): v for k, v in terms.items()},
                          pattern_hits=hits)
    if T_A >= consts.case1_fraction * alpha ** t or len(A) == B0.size:
        return res
    others = [k for k in terms if any(k)]
    best = max(others, key=lambda k: (abs(terms[k]), tuple(-x for x in k)))
    eta = abs(terms[best])
    res.case = 2
    res.chosen = best
    res.eta = eta
    res.pigeonhole_threshold = (main - T_A) / (2 ** t - 1)
    res.stated_threshold = alpha ** t / (2 * (2 ** t - 1))
    if eta < res.pigeonhole_threshold - 1e-12:
        raise CertificationError("pigeonhole over the expansion failed")
    return res


@dataclass(frozen=True)
class LargeNorm:
    i: int
    k: int
    l: int
    a: int
    b: int
    value: float
    threshold: float
    candidates: tuple = ()

    def to_dict(self) -> dict:
        return {"i": self.i, "k": self.k, "l": self.l, "a": self.a, "b": self.b,
                "value": self.value, "threshold": self.threshold,
                "candidates": [list(c) for c in self.candidates]}


def normal_pairs(phi: LinearSystem, i: int) -> list[tuple[int, int]]:
    """Pairs (k, l) of non-shift variables with phi_i depending on both and no other form on both."""
    out = []
    for k, l in itertools.combinations(range(1, phi.d), 2):
        if phi.coeffs[i][k] and phi.coeffs[i][l] and not any(
                phi.coeffs[j][k] and phi.coeffs[j][l] for j in range(phi.t) if j != i):
            out.append((k, l))
    return out


def locate_large_norm(f: np.ndarray, chain: BohrChain, phi: LinearSystem, positions: Sequence[int],
                      eta: float, consts: IncrementConstants = IncrementConstants()) -> LargeNorm:
    """Argmax over i in positions and normal-form pairs (k, l) of
    E_{u0 in B_0} ||f(u0 + .)||^4 twisted by (phi_ik, phi_il) over B_k x B_l."""
    best = None
    cands = []
    for i in positions:
        for k, l in normal_pairs(phi, i):
            a, b = phi.coeffs[i][k], phi.coeffs[i][l]
            val = local_twisted_mean(f, chain.sets[0], chain.sets[k], chain.sets[l], a, b)
            cands.append((i, k, l, a, b, val))
            if best is None or val > best[5] + 1e-15:
                best = (i, k, l, a, b, val)
    if best is None:
        raise ValidationError("system has no exact 1-normal witness at the chosen positions")
    thr = consts.large_norm_fraction * eta ** 4
    if best[5] < thr:
        raise CertificationError(f"largest twisted norm {best[5]} below {thr}; candidates {cands}")
    return LargeNorm(*best, thr, tuple(cands))


def untwist(f: np.ndarray, a: int, b: int, B0: BohrSet, B1: BohrSet, B2: BohrSet,
            B1t: BohrSet, B2t: BohrSet, eta: float, kappa: float = 0.5) -> dict:
    """E_{u0 in B0} ||f(u0 + ab .)||^4 over B1t x B2t, asserted to be at least kappa eta^4."""
    premise = local_twisted_mean(f, B0, B1, B2, a, b)
    if premise < eta ** 4 - 1e-15:
        raise ValidationError(f"premise {premise} below eta^4 = {eta ** 4}")
    m = a * b
    value = local_twisted_mean(f, B0, B1t, B2t, m, m)
    thr = kappa * eta ** 4
    if value < thr:
        raise CertificationError(f"untwisted norm {value} below kappa eta^4 = {thr}")
    return {"premise": premise, "value": value, "threshold": thr, "m": m}


@dataclass
class LocalIncrement:
    u: int
    m: int
    B3: BohrSet
    increment: float
    threshold: float
    premise: float
    frequency: Optional[int]
    tried: int

    def to_dict(self) -> dict:
        return {"u": self.u, "m": self.m, "B3": self.B3.to_dict(), "increment": self.increment,
                "threshold": self.threshold, "premise": self.premise,
                "frequency": self.frequency, "tried": self.tried}


def _contained(u: int, m: int, B3: BohrSet, B0: BohrSet) -> bool:
    y = u + m * B3.elements
    return bool(np.all(np.isin(y, B0.elements)))


def local_inverse_u2(f: np.ndarray, B0: BohrSet, B1: BohrSet, B2: BohrSet, m: int, eta: float,
                     consts: IncrementConstants = IncrementConstants()) -> LocalIncrement:
    """Find u and a regular B3 with u + m B3 inside B0 (as integers) and E_{u+mB3} f >= c' eta^12.

    Candidates: Gamma_0 alone and Gamma_0 plus s m for the largest Fourier
    coefficients s of f, at radii delta_1 times each radius factor.  Every
    candidate is evaluated for all translates at once by FFT; the first
    candidate (largest B3 first) passing every postcondition is returned.
    """
    M = B0.M
    f = np.asarray(f, dtype=float)
    m = abs(int(m))
    if m % M == 0:
        raise ValidationError("m must be invertible mod M")
    if abs(f[B0.elements % M].sum()) > 1e-9 * B0.size:
        raise ValidationError("f must average to zero on B0")
    premise = local_twisted_mean(f, B0, B1, B2, m, m)
    if premise < consts.kappa * eta ** 4:
        raise ValidationError(f"premise {premise} below kappa eta^4")
    thr = consts.c_inverse * eta ** 12
    d = B0.d
    radius_floor = (eta / d) ** consts.K_radius * B1.delta
    mags = np.abs(dft(f).coeffs)
    mags[0] = -1.0
    order = np.lexsort((np.arange(M), -mags))
    freqs: list[Optional[int]] = [None]
    seen = set()
    for s in order:
        key = min(int(s), M - int(s))
        if key in seen or mags[s] <= 0:
            continue
        seen.add(key)
        freqs.append(int(s))
        if len(freqs) > consts.top_frequencies:
            break
    cands = []
    for s in freqs:
        gamma = tuple(B0.gamma) + (() if s is None else ((s * m) % M,))
        for fct in consts.radius_factors:
            try:
                B3 = find_regular_dilate(bohr(M, gamma, fct * B1.delta, check=False))
            except CertificationError:
                continue
            cands.append((B3, s))
    cands.sort(key=lambda c: -c[0].size)
    F = np.fft.fft(f)
    F0 = np.fft.fft(np.bincount(B0.elements % M, minlength=M))
    tried = 0
    for B3, s in cands:
        if B3.d > d + 1 or B3.delta < radius_floor or not B3.regular:
            continue
        nu3 = np.conj(np.fft.fft(np.bincount((m * B3.elements) % M, minlength=M)))
        g = np.fft.ifft(F * nu3).real / B3.size
        cnt = np.fft.ifft(F0 * nu3).real
        ok = np.flatnonzero(cnt > B3.size - 0.5)
        if len(ok) == 0:
            continue
        uc = np.where(ok > M // 2, ok - M, ok)
        rank = np.lexsort((uc, np.abs(uc), -np.round(g[ok], 12)))
        for j in rank[:consts.translate_candidates]:
            tried += 1
            u = int(uc[j])
            inc = float(np.mean(f[(u + m * B3.elements) % M]))
            if inc < thr or inc <= 0:
                break
            if _contained(u, m, B3, B0):
                return LocalIncrement(u, m, B3, inc, thr, premise, s, tried)
    raise CertificationError(f"no certified local increment among {len(cands)} candidate Bohr sets")


# ---------------------------------------------------------------------------
# The iteration
# ---------------------------------------------------------------------------


@dataclass
class IncrementState:
    step: int
    B: BohrSet
    A: np.ndarray
    alpha: float
    u: int = 0
    m: int = 1
    transcript: list = field(default_factory=list)

    @property
    def d(self) -> int:
        return self.B.d

    @property
    def delta(self) -> float:
        return self.B.delta

    def original(self, x) -> np.ndarray:
        """Image of current coordinates in the original set: u + m x."""
        return self.u + self.m * np.asarray(x, dtype=np.int64)


@dataclass
class IncrementResult:
    certified_bound: int
    shape_bound: float
    shape_exponent: float
    exact_count: Optional[int]
    steps: int
    step_cap: float
    M: int
    phi: Optional[LinearSystem]
    transcript: list
    final: Optional[IncrementState]
    zero_column_factor: int = 1
    reason: str = "case1"

    @property
    def consistent(self) -> bool:
        return self.exact_count is None or self.certified_bound <= self.exact_count

    def to_dict(self) -> dict:
        return {"certified_bound": self.certified_bound, "shape_bound": self.shape_bound,
                "shape_exponent": self.shape_exponent, "exact_count": self.exact_count,
                "consistent": self.consistent, "steps": self.steps, "step_cap": self.step_cap,
                "M": self.M, "phi": self.phi.to_dict() if self.phi is not None else None,
                "zero_column_factor": self.zero_column_factor, "reason": self.reason,
                "transcript": self.transcript}


def _fiber_bound(phi: LinearSystem, chain: BohrChain) -> int:
    """Largest possible fibre of phi on B_0 x ... x B_q: kernel points in the difference box."""
    ker = linsys.integer_kernel(IntMatrix.from_rows(phi.coeffs, phi.d))
    if not ker:
        return 1
    w = np.array([int(np.abs(B.elements).max()) for B in chain.sets], dtype=np.int64)
    return max(1, linsys.count_box_points(ker, phi.d, -2 * w, 2 * w))


def _select_chain(state: IncrementState, phi: LinearSystem, t: int,
                  consts: IncrementConstants) -> tuple[BohrChain, ExpansionResult, float]:
    q = phi.d - 1
    eta0 = state.alpha ** t
    rho = consts.c_rho * eta0 ** consts.rho_exponent / max(1, state.d)
    last = None
    while rho >= consts.rho_min:
        chain = build_chain(state.B, q, rho)
        if chain.cost() <= consts.chain_budget:
            exp = multilinear_expand(state.A, chain, phi, consts)
            if exp.main >= consts.main_fraction * state.alpha ** t:
                return chain, exp, rho
            last = exp.main
        rho /= 2
    raise BudgetError(f"no chain with certified main term above rho_min (last main {last})")


def _reduce_matrix(V: IntMatrix) -> tuple[IntMatrix, int]:
    keep = [j for j in range(V.t) if any(V.entries[r][j] for r in range(V.r))]
    rows = [[row[j] for j in keep] for row in V.entries]
    return IntMatrix.from_rows(rows, len(keep)), V.t - len(keep)


def run_increment(V: IntMatrix, A, N: int, consts: IncrementConstants = IncrementConstants(),
                  exact: Optional[bool] = None) -> IncrementResult:
    """Density increment for V y = 0 on A inside [-N, N].

    Returns a certified lower bound on #{y in A^t : V y = 0}, obtained at the
    Case 1 step and pulled back through the recorded affine rescalings.
    """
    if not linsys.is_translation_invariant(V):
        raise ValidationError("matrix is not translation-invariant")
    A = np.unique(np.asarray(list(A), dtype=np.int64))
    if len(A) and (A.min() < -N or A.max() > N):
        raise ValidationError("A must lie in [-N, N]")
    Vr, zeros = _reduce_matrix(V)
    factor = len(A) ** zeros
    want_exact = exact if exact is not None else True

    def oracle() -> Optional[int]:
        if not want_exact:
            return None
        try:
            return count_solutions(V, A, consts.oracle_budget) if len(A) else 0
        except BudgetError:
            return None

    if len(A) == 0:
        return IncrementResult(0, 0.0, consts.case1_exponent, 0, 0, 0.0, 0, None,
                               [{"case": "empty"}], None, factor, "empty")
    if Vr.t < 3:
        cnt = count_solutions(Vr, A) * factor if Vr.t else factor
        return IncrementResult(cnt, float(cnt), consts.case1_exponent, oracle(), 0, 0.0, 0, None,
                               [{"case": "small-system", "t": Vr.t}], None, factor, "small-system")
    kp = linsys.kernel_parametrization(Vr, 1)
    phi = kp.phi
    t, r = Vr.t, Vr.rank()
    norm = int(linsys.system_norm(phi.linear_part()))
    M = next_prime(4 * norm * N)
    B0 = find_regular_dilate(bohr(M, (1,), 2 * N / M))
    state = IncrementState(0, B0, A.copy(), len(A) / B0.size)
    alpha0 = state.alpha
    step_cap = min(float(consts.max_steps), consts.K_steps * alpha0 ** (-12 * t + 1))
    transcript = []
    while True:
        if state.step > step_cap:
            raise BudgetError(f"step budget {step_cap} exceeded; transcript {transcript}")
        alpha, d, delta = state.alpha, state.d, state.delta
        rec: dict[str, Any] = {"step": state.step, "alpha": alpha, "d": d, "delta": delta,
                               "B_size": state.B.size, "u": state.u, "m": state.m}
        if len(state.A) == 0:
            rec["case"] = 1
            transcript.append(rec)
            return IncrementResult(0, 0.0, consts.case1_exponent, oracle(), state.step, step_cap,
                                   M, phi, transcript, state, factor, "empty-subset")
        chain, exp, rho = _select_chain(state, phi, t, consts)
        rec["rho"] = rho
        rec["rho_required"] = consts.c_rho * exp.eta ** 4 / d if exp.case == 2 else None
        rec["chain_sizes"] = [B.size for B in chain.sets]
        rec["expansion"] = exp.to_dict()
        if exp.case == 1:
            rec["case"] = 1
            fiber = _fiber_bound(phi, chain)
            hits = exp.pattern_hits
            bound = -(-hits // fiber) * factor
            expo = consts.case1_exponent * d
            shape = (alpha * delta / d) ** expo * float(N) ** (t - r)
            rec.update({"pattern_hits": hits, "fiber_bound": fiber, "certified_bound": bound,
                        "shape_bound": shape, "shape_exponent": expo})
            transcript.append(rec)
            exact_count = oracle()
            res = IncrementResult(bound, shape, expo, exact_count, state.step, step_cap, M, phi,
                                  transcript, state, factor)
            if not res.consistent:
                raise CertificationError(f"certified bound {bound} exceeds exact count {exact_count}")
            return res
        rec["case"] = 2
        bal = BalancedFn.create(state.A, state.B)
        positions = [i for i in range(t) if exp.chosen[i] == 1]
        ln = locate_large_norm(bal.f.values, chain, phi, positions, exp.eta, consts)
        rec["large_norm"] = ln.to_dict()
        Bk, Bl = chain.sets[ln.k], chain.sets[ln.l]
        Bkt = find_regular_dilate(dilate(Bk, rho, check=False))
        Blt = find_regular_dilate(dilate(Bl, rho, check=False))
        un = untwist(bal.f.values, ln.a, ln.b, state.B, Bk, Bl, Bkt, Blt, exp.eta, consts.kappa)
        rec["untwist"] = un
        li = local_inverse_u2(bal.f.values, state.B, Bkt, Blt, un["m"], exp.eta, consts)
        rec["local_inverse"] = li.to_dict()
        B3 = li.B3
        image = li.u + li.m * B3.elements
        newA = B3.elements[np.isin(image, state.A)]
        new_alpha = len(newA) / B3.size
        checks = {
            "growth": new_alpha >= (1 + consts.c_increment * alpha ** (12 * t - 1)) * alpha,
            "dimension": B3.d <= d + 1,
            "radius": B3.delta >= (alpha / d) ** consts.K_radius * delta,
            "containment": _contained(li.u, li.m, B3, state.B),
            "regular": bool(B3.regular or is_regular(B3)),
            "increment_matches": abs(new_alpha - alpha - li.increment) <= 1e-9,
        }
        rec["checks"] = checks
        rec.update({"next_alpha": new_alpha, "next_d": B3.d, "next_delta": B3.delta})
        transcript.append(rec)
        if not all(checks.values()):
            raise CertificationError(f"increment step failed its checks: {rec}")
        state = IncrementState(state.step + 1, B3, newA, new_alpha,
                               state.u + state.m * li.u, state.m * li.m)
        state.transcript = transcript


# ---------------------------------------------------------------------------
# Transference
# ---------------------------------------------------------------------------


def wtricked_primes(ctx: WTrickContext) -> np.ndarray:
    """{n in [N] : W n + b prime}."""
    hi = ctx.W * ctx.N + ctx.b
    P = primes_upto(hi)
    P = P[(P >= ctx.W + ctx.b) & ((P - ctx.b) % ctx.W == 0)]
    return np.sort((P - ctx.b) // ctx.W).astype(np.int64)


@dataclass
class TransferenceReport:
    data: dict

    def to_dict(self) -> dict:
        return self.data


def transference_pipeline(A, ctx: WTrickContext, cfg: TransferenceConfig, V: IntMatrix,
                          gpy: Optional[GpyConfig] = None,
                          consts: IncrementConstants = IncrementConstants(),
                          run_main: bool = True) -> TransferenceReport:
    """The comparison chain T(lam_A) = T(lam'_A) + error terms on Z_M, with every term computed."""
    N = ctx.N
    A = np.unique(np.asarray(list(A), dtype=np.int64))
    if len(A) and (A.min() < 1 or A.max() > N):
        raise ValidationError("A must lie in [1, N]")
    if len(A) and not all(is_prime(int(ctx.W * a + ctx.b)) for a in A):
        raise ValidationError("b + W A must consist of primes")
    Vr, zeros = _reduce_matrix(V)
    if zeros:
        raise ValidationError("matrix has zero columns")
    kp = linsys.kernel_parametrization(Vr, 1)
    t, r = Vr.t, Vr.rank()
    M_min = max(4 * linsys.matrix_norm(Vr) * N, linsys.reduction_threshold(kp.psi, Vr))
    if cfg.M is None:
        M = next_prime(M_min)
    elif cfg.M < M_min or not is_prime(cfg.M):
        raise ValidationError(f"modulus override must be a prime >= {M_min}")
    else:
        M = cfg.M
    theta = linsys.reduce_mod(kp.psi, Vr, M, verify_budget=0)
    out: dict[str, Any] = {"N": N, "omega": ctx.omega, "b": ctx.b, "W": ctx.W, "M": M,
                           "L": M / N, "size_A": int(len(A)), "constraint": cfg.constraint(N),
                           "theta": theta.to_dict()}
    scale = (M / N) * ctx.phi_ratio * math.log(N)
    lam_vals = np.zeros(M)
    lam_vals[A % M] = scale
    lam = CyclicFn(M, lam_vals)
    alpha = lam.mean()
    out["alpha"] = alpha
    if len(A) == 0:
        out.update({"T_lambda": 0.0, "terms": {}, "identity_residual": 0.0, "distinct_count": 0,
                    "count": 0})
        return TransferenceReport(out)
    sm = build_smoothing(lam, cfg, N)
    out["smoothing"] = sm.to_dict()
    lp = sm.lam_prime.values
    diff = lam_vals - lp
    T_lam = t_operator(theta, [lam_vals] * t, method="fourier")
    terms = {}
    for idx in itertools.product((0, 1), repeat=t):
        fs = [lp if k == 0 else diff for k in idx]
        terms["".join(map(str, idx))] = t_operator(theta, fs, method="fourier")
    resid = abs(T_lam - sum(terms.values()))
    out.update({"T_lambda": T_lam, "terms": terms, "identity_residual": resid,
                "identity_ok": resid <= cfg.identity_tol})
    # majorant: wrapped sieve weight averaged over B
    gpy = gpy or GpyConfig.create(ctx, 0.05)
    nu_box = normalized_nu_range(1, N, ctx, gpy)
    lam_box = np.array([lambda_bW(n, ctx) for n in range(1, N + 1)])
    ext = extend_weight(nu_box, M, lam=lam_box, bad_box_system=kp.psi)
    nu_p = average_weight(ext.nu, sm.B)
    out["majorant"] = {"extension": {k: v for k, v in ext.to_dict().items() if k != "averages"},
                       "averaged_mean": nu_p.mean()}
    errors = []
    for key, val in terms.items():
        idx = tuple(int(ch) for ch in key)
        if not any(idx):
            continue
        i = idx.index(1)
        fs = [lp if k == 0 else diff for k in idx]
        rep = gvn_check(theta, fs, i, nu=nu_p)
        errors.append({"term": key, "value": val, "i": i, **rep.to_dict()})
    out["error_terms"] = errors
    ls = level_set(sm.lam_prime, alpha, cfg.level_fraction)
    out["level_set"] = ls.to_dict()
    out["level_set"]["density_over_alpha_1_2"] = ls.density / alpha ** 1.2 if alpha > 0 else None
    main_lower = None
    if run_main and len(ls.elements):
        inc = run_increment(Vr, ls.elements, 2 * N, consts)
        out["main_term_increment"] = {k: v for k, v in inc.to_dict().items() if k != "transcript"}
        out["main_term_increment"]["steps_logged"] = len(inc.transcript)
        main_lower = (alpha / 2) ** t * inc.certified_bound / float(M) ** (t - r)
    out["main_term"] = {"T_lambda_prime": terms["0" * t], "lower_bound": main_lower,
                        "holds": None if main_lower is None else terms["0" * t] >= main_lower - 1e-12}
    out["count"] = count_solutions(Vr, A)
    out["distinct_count"] = count_distinct_solutions(Vr, A)
    out["T_lambda_from_count"] = scale ** t * out["count"] / float(M) ** (t - r)
    return TransferenceReport(out)
