"""Harmonic analysis on Z_M for prime M: DFT, convolution, Gowers-type norms and Bohr sets.

Normalization: expectation on the group, sum on frequencies.

    f^(r) = E_x f(x) e(-x r / M),    f(x) = sum_r f^(r) e(x r / M),
    (f * g)(x) = E_y f(y) g(x - y),  (f * g)^ = f^ g^,  ||f||_{U^2}^4 = sum_r |f^(r)|^4.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import lru_cache
from typing import Optional, Sequence, Union

import numpy as np

from .errors import CertificationError, ValidationError

ArrayLike = Union["CyclicFn", np.ndarray, Sequence[float]]


@dataclass(frozen=True)
class CyclicFn:
    """A function Z_M -> R (or C) stored as its M values."""

    M: int
    values: np.ndarray

    def __post_init__(self):
        v = np.asarray(self.values)
        if v.shape != (self.M,):
            raise ValidationError(f"expected {self.M} values, got shape {v.shape}")
        v = v.copy()
        v.setflags(write=False)
        object.__setattr__(self, "values", v)

    @classmethod
    def indicator(cls, M: int, elements) -> "CyclicFn":
        v = np.zeros(M)
        v[np.asarray(list(elements), dtype=np.int64) % M] = 1.0
        return cls(M, v)

    @classmethod
    def from_integer_support(cls, M: int, points, weights=None) -> "CyclicFn":
        """Wraparound f(n mod M) += w(n): the extensions f~ and f-breve of an integer-supported f."""
        pts = np.asarray(points, dtype=np.int64)
        w = np.ones(len(pts)) if weights is None else np.asarray(weights, dtype=float)
        v = np.zeros(M)
        np.add.at(v, pts % M, w)
        return cls(M, v)

    def __call__(self, x):
        return self.values[np.asarray(x) % self.M]

    def mean(self) -> float:
        return float(self.values.mean())


@dataclass(frozen=True)
class Spectrum:
    M: int
    coeffs: np.ndarray


def _vals(f: ArrayLike) -> np.ndarray:
    if isinstance(f, CyclicFn):
        return f.values
    return np.asarray(f)


# ---------------------------------------------------------------------------
# DFT via Bluestein's chirp-z
# ---------------------------------------------------------------------------


@lru_cache(maxsize=32)
def _chirp(M: int) -> tuple[np.ndarray, np.ndarray, int]:
    n = np.arange(M, dtype=np.int64)
    # n^2 mod 2M keeps the phase exact for large M
    w = np.exp(-1j * np.pi * ((n * n) % (2 * M)) / M)
    L = 1 << int(2 * M - 1).bit_length()
    b = np.zeros(L, dtype=complex)
    b[:M] = np.conj(w)
    b[L - M + 1:] = np.conj(w[1:])[::-1]
    return w, np.fft.fft(b), L


def dft_unnormalized(x: np.ndarray) -> np.ndarray:
    """X_k = sum_n x_n e(-nk/M) for arbitrary length M."""
    x = np.asarray(x, dtype=complex)
    M = len(x)
    if M == 0:
        return x
    w, fb, L = _chirp(M)
    a = np.zeros(L, dtype=complex)
    a[:M] = x * w
    conv = np.fft.ifft(np.fft.fft(a) * fb)[:M]
    return w * conv


def dft_direct(f: ArrayLike) -> np.ndarray:
    """O(M^2) reference transform, same normalization as :func:`dft`."""
    v = _vals(f)
    M = len(v)
    if M > 512:
        raise ValidationError("direct DFT oracle limited to M <= 512")
    n = np.arange(M)
    kern = np.exp(-2j * np.pi * np.outer(n, n) / M)
    return kern @ v / M


def dft(f: ArrayLike) -> Spectrum:
    v = _vals(f)
    return Spectrum(len(v), dft_unnormalized(v) / len(v))


def idft(s: Union[Spectrum, np.ndarray], real: Optional[bool] = None) -> CyclicFn:
    c = s.coeffs if isinstance(s, Spectrum) else np.asarray(s)
    M = len(c)
    v = np.conj(dft_unnormalized(np.conj(c)))
    if real is None:
        real = np.max(np.abs(v.imag), initial=0.0) <= 1e-9 * max(1.0, np.max(np.abs(v), initial=0.0))
    return CyclicFn(M, v.real if real else v)


def convolve(f: ArrayLike, g: ArrayLike) -> CyclicFn:
    """(f * g)(x) = E_y f(y) g(x - y)."""
    a, b = _vals(f), _vals(g)
    if len(a) != len(b):
        raise ValidationError("modulus mismatch")
    real = np.isrealobj(a) and np.isrealobj(b)
    return idft(dft(a).coeffs * dft(b).coeffs, real=real)


def convolve_direct(f: ArrayLike, g: ArrayLike) -> np.ndarray:
    a, b = _vals(f), _vals(g)
    M = len(a)
    idx = (np.arange(M)[:, None] - np.arange(M)[None, :]) % M
    return (b[idx] * a[None, :]).mean(axis=1)


# ---------------------------------------------------------------------------
# U^2, box, twisted and local norms
# ---------------------------------------------------------------------------


def u2_norm(f: ArrayLike) -> float:
    c = dft(f).coeffs
    return float(np.sum(np.abs(c) ** 4)) ** 0.25


def u2_fourth_brute(f: ArrayLike) -> float:
    """E_{x,h1,h2} f(x) f(x+h1) f(x+h2) f(x+h1+h2) by explicit O(M^3) summation."""
    v = _vals(f)
    M = len(v)
    P = v[(np.arange(M)[:, None] + np.arange(M)[None, :]) % M]  # P[h, x] = f(x + h)
    total = 0.0
    for h1 in range(M):
        total += np.sum(v * P[h1] * P * np.roll(P, -h1, axis=1))
    return float(total) / M ** 3


@dataclass(frozen=True)
class BoxFamily:
    """Four functions h_w on X1 x X2, as |X1| x |X2| matrices keyed by w in {0,1}^2."""

    h00: np.ndarray
    h01: np.ndarray
    h10: np.ndarray
    h11: np.ndarray

    @classmethod
    def constant(cls, h: np.ndarray) -> "BoxFamily":
        return cls(h, h, h, h)

    def __post_init__(self):
        shapes = {np.shape(h) for h in (self.h00, self.h01, self.h10, self.h11)}
        if len(shapes) != 1:
            raise ValidationError("box family functions must share the domain X1 x X2")
        (shape,) = shapes
        if len(shape) != 2 or 0 in shape:
            raise ValidationError("box family needs non-empty X1 and X2")


def box_inner(fam: BoxFamily) -> float:
    n1, n2 = fam.h00.shape
    # sum over x1^0, x1^1 of (sum_{x2^0} h00 h10) (sum_{x2^1} h01 h11)
    G0 = fam.h00 @ fam.h10.T
    G1 = fam.h01 @ fam.h11.T
    return float(np.sum(G0 * G1)) / (n1 * n1 * n2 * n2)


def box_inner_brute(fam: BoxFamily) -> float:
    n1, n2 = fam.h00.shape
    t = np.einsum("ac,ad,bc,bd->", fam.h00, fam.h01, fam.h10, fam.h11)
    return float(t) / (n1 * n1 * n2 * n2)


def box_norm(h: np.ndarray) -> float:
    v = box_inner(BoxFamily.constant(np.asarray(h, dtype=float)))
    if v < -1e-12:
        raise CertificationError(f"negative box norm fourth power {v}")
    return max(v, 0.0) ** 0.25


def box_vdc_check(h: np.ndarray, b1: np.ndarray, b2: np.ndarray) -> tuple[float, float]:
    """(|E h(x1,x2) b1(x1) b2(x2)|, ||h||_box); the first never exceeds the second."""
    if np.max(np.abs(b1), initial=0) > 1 or np.max(np.abs(b2), initial=0) > 1:
        raise ValidationError("b1, b2 must take values in [-1, 1]")
    lhs = abs(float(b1 @ h @ b2)) / h.size
    rhs = box_norm(h)
    if lhs > rhs + 1e-12:
        raise CertificationError(f"box Van der Corput violated: {lhs} > {rhs}")
    return lhs, rhs


def gcs_check(fam: BoxFamily) -> tuple[float, float]:
    lhs = abs(box_inner(fam))
    rhs = float(np.prod([box_norm(h) for h in (fam.h00, fam.h01, fam.h10, fam.h11)]))
    if lhs > rhs + 1e-12:
        raise CertificationError(f"Gowers-Cauchy-Schwarz violated: {lhs} > {rhs}")
    return lhs, rhs


def _set(X, M: int) -> np.ndarray:
    if isinstance(X, BohrSet):
        return X.elements
    arr = np.asarray(list(X) if not isinstance(X, np.ndarray) else X, dtype=np.int64)
    if arr.size == 0:
        raise ValidationError("sets must be non-empty")
    return arr


def twisted_u2_fourth(g: ArrayLike, a: int, b: int, X1, X2) -> float:
    v = _vals(g)
    M = len(v)
    if a % M == 0 or b % M == 0:
        raise ValidationError("twists must be non-zero mod M")
    x1, x2 = _set(X1, M), _set(X2, M)
    H = v[(a * x1[:, None] + b * x2[None, :]) % M]
    return box_inner(BoxFamily.constant(H))


def twisted_u2(g: ArrayLike, a: int, b: int, X1, X2) -> float:
    return max(twisted_u2_fourth(g, a, b, X1, X2), 0.0) ** 0.25


def local_twisted_fourth(f: ArrayLike, X0, X1, X2, a: int = 1, b: int = 1,
                         chunk: int = 1 << 22) -> np.ndarray:
    """||f(x0 + .)||^4 of the (a,b)-twisted norm over X1 x X2, for every x0 in X0."""
    v = _vals(f)
    M = len(v)
    x0, x1, x2 = _set(X0, M), _set(X1, M), _set(X2, M)
    n1, n2 = len(x1), len(x2)
    inner = (a * x1[:, None] + b * x2[None, :]) % M
    out = np.empty(len(x0))
    step = max(1, chunk // (n1 * n2))
    for s in range(0, len(x0), step):
        blk = x0[s:s + step]
        H = v[(blk[:, None, None] + inner[None]) % M]
        G = np.einsum("aij,akj->aik", H, H)
        out[s:s + step] = np.einsum("aik,aik->a", G, G) / (n1 * n1 * n2 * n2)
    return out


def local_twisted_mean(f: ArrayLike, X0, X1, X2, a: int = 1, b: int = 1) -> float:
    """E_{x0 in X0} of the (a,b)-twisted box norm^4 of f(x0 + .) over X1 x X2.

    Same quantity as ``local_twisted_fourth(...).mean()``, computed as a sum over
    differences h of z2' - z2 (z2 in b X2) of FFT correlations, so the cost is
    O(|X2 - X2| M log M) rather than O(|X0| |X1|^2 |X2|).
    """
    v = _vals(f)
    if np.iscomplexobj(v):
        if np.abs(v.imag).max(initial=0) > 1e-12:
            raise ValidationError("local_twisted_mean needs a real function")
        v = v.real
    v = v.astype(float)
    M = len(v)
    x0, x1, x2 = _set(X0, M), _set(X1, M), _set(X2, M)
    if len(x1) < len(x2):
        x1, x2, a, b = x2, x1, b, a
    n0, n1, n2 = len(x0), len(x1), len(x2)
    z1 = (a * x1) % M
    z2 = (b * x2) % M
    F1c = np.conj(np.fft.fft(np.bincount(z1, minlength=M)))
    F0 = np.fft.fft(np.bincount(x0 % M, minlength=M))
    diffs = (z2[None, :] - z2[:, None]) % M
    total = 0.0
    for h in np.unique(diffs):
        starts = z2[np.nonzero(diffs == h)[0]]
        g = v * np.roll(v, -int(h))
        C = np.fft.ifft(np.fft.fft(g) * F1c).real / n1
        Nh = np.fft.ifft(F0 * np.fft.fft(np.bincount(starts, minlength=M))).real
        total += float(np.dot(C * C, Nh))
    return total / (n0 * n2 * n2)


def local_u2(f: ArrayLike, X0, X1, X2) -> float:
    """(E_{x0 in X0} ||f(x0 + .)||^4 over X1 x X2)^(1/4)."""
    return max(float(local_twisted_fourth(f, X0, X1, X2).mean()), 0.0) ** 0.25


# ---------------------------------------------------------------------------
# Bohr sets
# ---------------------------------------------------------------------------


@lru_cache(maxsize=64)
def _profile(M: int, gamma: tuple[int, ...]) -> np.ndarray:
    """max_{r in Gamma} M * ||x r / M|| for every x in Z_M (an integer in [0, M/2])."""
    x = np.arange(M, dtype=np.int64)
    prof = np.zeros(M, dtype=np.int64)
    for r in gamma:
        xr = (x * (r % M)) % M
        prof = np.maximum(prof, np.minimum(xr, M - xr))
    prof.setflags(write=False)
    return prof


def _center(x: np.ndarray, M: int) -> np.ndarray:
    x = np.asarray(x, dtype=np.int64) % M
    return np.where(x > M // 2, x - M, x)


_EPS = 1e-9


@dataclass(frozen=True)
class BohrSet:
    """B(Gamma, delta) = {x in Z_M : ||x r / M|| <= delta for all r in Gamma}.

    ``elements`` are sorted centered representatives in (-M/2, M/2].
    """

    M: int
    gamma: tuple[int, ...]
    delta: float
    elements: np.ndarray
    regular: Optional[bool] = None

    @property
    def d(self) -> int:
        return len(self.gamma)

    @property
    def size(self) -> int:
        return len(self.elements)

    def __len__(self) -> int:
        return len(self.elements)

    @property
    def radius(self) -> float:
        return self.delta * self.M

    def profile(self) -> np.ndarray:
        return _profile(self.M, self.gamma)

    def contains(self, x) -> np.ndarray:
        return self.profile()[np.asarray(x, dtype=np.int64) % self.M] <= self.radius + _EPS

    def indicator(self) -> CyclicFn:
        return CyclicFn.indicator(self.M, self.elements)

    def measure(self) -> CyclicFn:
        """mu_B = (|B|/M)^{-1} 1_B, so that E mu_B = 1."""
        return CyclicFn(self.M, self.indicator().values * (self.M / self.size))

    def to_dict(self) -> dict:
        return {"M": self.M, "gamma": list(self.gamma), "delta": self.delta,
                "elements_count": self.size, "regular": self.regular}


def bohr(M: int, gamma: Sequence[int], delta: float, check: bool = True) -> BohrSet:
    if delta <= 0:
        raise ValidationError("radius must be positive")
    gamma = tuple(sorted({int(r) % M for r in gamma}))
    if not gamma:
        raise ValidationError("frequency set must be non-empty")
    prof = _profile(M, gamma)
    mask = prof <= delta * M + _EPS
    els = np.sort(_center(np.flatnonzero(mask), M))
    B = BohrSet(M, gamma, float(delta), els)
    if check and B.size < min(delta, 1.0) ** B.d * M * (1 - 1e-12):
        raise CertificationError(f"|B| = {B.size} below delta^d M")
    return B


def dilate(B: BohrSet, rho: float, check: bool = True) -> BohrSet:
    out = bohr(B.M, B.gamma, rho * B.delta, check=check)
    if check and 0 < rho <= 1 and out.size < (rho / 2) ** (2 * B.d) * B.size * (1 - 1e-12):
        raise CertificationError("dilate below (rho/2)^{2d}|B|")
    return out


REG_CONST = 64


def _regularity_violation(sorted_prof: np.ndarray, r: float, d: int) -> Optional[float]:
    """First rho in (0, 1/(64 d)] at which the regularity inequalities fail, or None."""
    size = np.searchsorted(sorted_prof, r + _EPS, side="right")
    if size == 0:
        return 0.0
    rmax = 1.0 / (REG_CONST * d)
    # lower side: just beyond rho = 1 - v the points with profile v drop out
    lo_vals = np.unique(sorted_prof[(sorted_prof >= r * (1 - rmax) - _EPS) & (sorted_prof <= r + _EPS)])
    for p in lo_vals[::-1]:
        rho = max(1.0 - p / r, 0.0)
        if rho >= rmax:
            continue
        below = np.searchsorted(sorted_prof, p - 0.5, side="right")  # profiles are integers
        if below < (1 - REG_CONST * rho * d) * size - 1e-9:
            return rho
    hi_vals = np.unique(sorted_prof[(sorted_prof > r + _EPS) & (sorted_prof <= r * (1 + rmax) + _EPS)])
    for p in hi_vals:
        rho = p / r - 1.0
        upto = np.searchsorted(sorted_prof, p + 0.5, side="right")
        if upto > (1 + REG_CONST * rho * d) * size + 1e-9:
            return rho
    return None


@lru_cache(maxsize=64)
def _sorted_profile(M: int, gamma: tuple[int, ...]) -> np.ndarray:
    s = np.sort(_profile(M, gamma))
    s.setflags(write=False)
    return s


def is_regular(B: BohrSet) -> bool:
    """Exact check of (1 - 64 rho d)|B| <= |B_{1 +- rho}| <= (1 + 64 rho d)|B| for all rho <= 1/(64 d).

    The dilate sizes are step functions of rho, so only the breakpoints
    (distinct profile values near the radius) need to be examined.
    """
    return _regularity_violation(_sorted_profile(B.M, B.gamma), B.radius, B.d) is None


def find_regular_dilate(B: BohrSet, grid: int = 64) -> BohrSet:
    """B_{|c} for some c in [1/2, 1] that is regular; tries c = 1 first, then descends."""
    sp = _sorted_profile(B.M, B.gamma)
    r = B.radius
    vals = np.unique(sp[(sp >= r / 2 - _EPS) & (sp <= r + _EPS)]) / r
    mids = (vals[1:] + vals[:-1]) / 2 if len(vals) > 1 else np.array([])
    cands = np.unique(np.concatenate([[1.0, 0.5], np.linspace(0.5, 1.0, grid + 1), mids]))
    cands = cands[(cands >= 0.5) & (cands <= 1.0)][::-1]
    for c in cands:
        if _regularity_violation(sp, c * r, B.d) is None:
            out = bohr(B.M, B.gamma, float(c) * B.delta)
            return BohrSet(out.M, out.gamma, out.delta, out.elements, True)
    raise CertificationError("no regular dilate in [1/2, 1] found")


def regularity_calculus_check(f: ArrayLike, B: BohrSet, X_prime, x_prime: int, rho: float,
                              K: float = 2.0 ** 9, enforce: bool = True) -> tuple[float, float, float]:
    """Residuals of the three regularity-calculus identities for f with values in [-1, 1].

    1. |E_{x' + B} f - E_B f|
    2. |E_B f - E_{x in B, x' in X'} f(x + x')|
    3. |E_B 1(x in B_{1-rho}) f - E_B f|
    """
    v = _vals(f).astype(float)
    M = len(v)
    if np.max(np.abs(v), initial=0) > 1 + 1e-12:
        raise ValidationError("f must take values in [-1, 1]")
    inner = dilate(B, rho, check=False)
    xp = _set(X_prime, M)
    if not (inner.contains(xp).all() and inner.contains([x_prime]).all()):
        raise ValidationError("X' and x' must lie in B_{|rho}")
    e = B.elements
    base = v[e % M].mean()
    r1 = abs(v[(x_prime + e) % M].mean() - base)
    r2 = abs(base - v[(e[:, None] + xp[None, :]) % M].mean())
    shrunk = dilate(B, 1 - rho, check=False)
    r3 = abs(v[shrunk.elements % M].sum() / B.size - base)
    res = (float(r1), float(r2), float(r3))
    if enforce and max(res) > K * rho * B.d + 1e-12:
        raise CertificationError(f"regularity calculus residuals {res} exceed K rho d")
    return res
