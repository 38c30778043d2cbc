"""Pattern-counting operators and exact solution counts.

``t_operator`` averages a product of functions along a system over Z_M in three
independent ways (brute force, kernel enumeration, row-space Fourier sum).
``count_solutions`` counts integer solutions of V y = 0 inside a finite set by
walking the kernel lattice, with brute-force oracles alongside.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field
from typing import Iterator, Optional, Sequence

import numpy as np

from . import linsys
from .cyclic import BohrSet, CyclicFn, dft, dilate, is_regular
from .errors import BudgetError, CertificationError, ValidationError
from .linsys import IntMatrix, LinearSystem


@dataclass(frozen=True)
class PatternCountResult:
    value: float
    method: str
    cost: int
    halfwidth: float = 0.0

    def to_dict(self) -> dict:
        return {"value": self.value, "method": self.method, "cost": self.cost,
                "halfwidth": self.halfwidth}


def _fvals(f, M: int) -> np.ndarray:
    v = f.values if isinstance(f, CyclicFn) else np.asarray(f)
    if v.shape != (M,):
        raise ValidationError(f"function must have {M} values")
    return v


def _grid_chunks(M: int, k: int, chunk: int) -> Iterator[np.ndarray]:
    """All of Z_M^k as (n, k) int64 blocks in lexicographic order."""
    total = M ** k
    for s in range(0, total, chunk):
        idx = np.arange(s, min(total, s + chunk), dtype=np.int64)
        cols = []
        for _ in range(k):
            cols.append(idx % M)
            idx = idx // M
        yield np.stack(cols[::-1], axis=1) if k else np.zeros((len(idx), 0), dtype=np.int64)


def _product_along(vals: np.ndarray, fs: Sequence[np.ndarray], M: int) -> float:
    prod = np.ones(len(vals), dtype=np.result_type(*fs, float))
    for i, f in enumerate(fs):
        prod = prod * f[vals[:, i] % M]
    return prod.sum()


def _t_brute(theta: LinearSystem, fs, M: int, chunk: int) -> float:
    A = np.array(theta.coeffs, dtype=np.int64).reshape(theta.t, theta.d)
    c = np.array(theta.constants, dtype=np.int64)
    total = 0.0
    for n in _grid_chunks(M, theta.d, chunk):
        total += _product_along((n @ A.T + c) % M, fs, M)
    return total / M ** theta.d


def _span_mod(basis: Sequence[Sequence[int]], t: int, M: int, chunk: int) -> Iterator[np.ndarray]:
    Bm = np.array(basis, dtype=np.int64).reshape(len(basis), t)
    for c in _grid_chunks(M, len(basis), chunk):
        yield (c @ Bm) % M


def _t_kernel(theta: LinearSystem, fs, M: int, chunk: int) -> float:
    # theta(Z_M^d) is a subspace S (plus shift); every fibre has the same size
    cols = [[theta.coeffs[i][k] for i in range(theta.t)] for k in range(theta.d)]
    basis, _ = linsys.rref_mod(cols, M) if cols else ([], [])
    c = np.array(theta.constants, dtype=np.int64)
    total = 0.0
    for y in _span_mod(basis, theta.t, M, chunk):
        total += _product_along(y + c, fs, M)
    return total / M ** len(basis)


def _t_fourier(theta: LinearSystem, fs, M: int, chunk: int) -> float:
    # E_{y in S} prod f_i(y_i + c_i) = sum_{r in S^perp} prod f^_i(r_i) e(r.c / M)
    cols = [[theta.coeffs[i][k] for i in range(theta.t)] for k in range(theta.d)]
    perp = linsys.nullspace_mod(cols, theta.t, M)
    hats = [dft(f).coeffs for f in fs]
    c = np.array(theta.constants, dtype=np.int64)
    total = 0.0 + 0.0j
    for r in _span_mod(perp, theta.t, M, chunk) if perp else [np.zeros((1, theta.t), dtype=np.int64)]:
        prod = np.ones(len(r), dtype=complex)
        for i, h in enumerate(hats):
            prod *= h[r[:, i]]
        phase = np.exp(2j * np.pi * ((r @ c) % M) / M)
        total += np.sum(prod * phase)
    return float(total.real)


def t_operator(theta: LinearSystem, fs: Sequence, method: str = "auto",
               budget: int = 10_000_000, chunk: int = 1 << 18) -> float:
    """E_{n in Z_M^d} prod_i f_i(theta_i(n)) for a system over Z_M."""
    M = theta.modulus
    if M is None:
        raise ValidationError("t_operator needs a system over Z_M")
    if len(fs) != theta.t:
        raise ValidationError(f"need {theta.t} functions, got {len(fs)}")
    fv = [_fvals(f, M) for f in fs]
    cols = [[theta.coeffs[i][k] for i in range(theta.t)] for k in range(theta.d)]
    k = linsys.rank_mod(cols, M) if cols else 0
    costs = {"brute": M ** theta.d, "kernel": M ** k, "fourier": M ** (theta.t - k)}
    if method == "auto":
        method = min(("kernel", "fourier"), key=costs.get)
    if method not in costs:
        raise ValidationError(f"unknown method {method}")
    if costs[method] > budget:
        raise BudgetError(f"{method} evaluation needs {costs[method]} terms, budget {budget}")
    fn = {"brute": _t_brute, "kernel": _t_kernel, "fourier": _t_fourier}[method]
    return float(np.real(fn(theta, fv, M, chunk)))


# ---------------------------------------------------------------------------
# Counting over the integers
# ---------------------------------------------------------------------------


def t_over_z(V: IntMatrix, fs: Sequence[np.ndarray], N: int, M: int) -> float:
    """M^{-(t-r)} sum_{y in [-2N,2N]^t, Vy = 0} prod f_i(y_i).

    Each f_i is an array of length 4N+1 with f_i[n + 2N] = f_i(n).
    """
    if M <= 2 * linsys.matrix_norm(V) * N:
        raise ValidationError(f"modulus {M} must exceed 2||V||N = {2 * linsys.matrix_norm(V) * N}")
    if len(fs) != V.t:
        raise ValidationError(f"need {V.t} functions")
    fv = [np.asarray(f, dtype=float) for f in fs]
    if any(f.shape != (4 * N + 1,) for f in fv):
        raise ValidationError("functions must be given on [-2N, 2N]")
    allowed = [np.flatnonzero(f) - 2 * N for f in fv]
    if any(len(a) == 0 for a in allowed):
        return 0.0
    total = 0.0
    basis = linsys.integer_kernel(V)
    for y in linsys.lattice_box_points(basis, V.t, -2 * N, 2 * N, allowed):
        prod = np.ones(len(y))
        for i, f in enumerate(fv):
            prod *= f[y[:, i] + 2 * N]
        total += prod.sum()
    return total / float(M) ** (V.t - V.rank())


def wrap(f_on_box: np.ndarray, N: int, M: int) -> CyclicFn:
    """The wraparound of a function given on [-2N, 2N] to Z_M."""
    pts = np.arange(-2 * N, 2 * N + 1)
    return CyclicFn.from_integer_support(M, pts, f_on_box)


def _as_set(A) -> np.ndarray:
    a = np.unique(np.asarray(list(A), dtype=np.int64))
    return a


def count_solutions(V: IntMatrix, A, budget: int = 50_000_000) -> int:
    """#{y in A^t : V y = 0}, walking the kernel lattice inside the bounding box of A."""
    a = _as_set(A)
    if len(a) == 0:
        return 0
    basis = linsys.integer_kernel(V)
    total = 0
    for y in linsys.lattice_box_points(basis, V.t, int(a[0]), int(a[-1]), [a] * V.t):
        total += len(y)
        if total > budget:
            raise BudgetError(f"more than {budget} solutions")
    return total


def count_solutions_brute(V: IntMatrix, A, limit: int = 60) -> int:
    return int(len(_brute_solutions(V, A, limit)))


def _brute_solutions(V: IntMatrix, A, limit: int = 60) -> np.ndarray:
    a = _as_set(A)
    if len(a) > limit:
        raise BudgetError(f"brute-force oracle limited to |A| <= {limit}")
    if len(a) == 0:
        return np.zeros((0, V.t), dtype=np.int64)
    Vm = np.array(V.entries, dtype=np.int64)
    out = []
    rest = np.stack(np.meshgrid(*[a] * (V.t - 1), indexing="ij"), -1).reshape(-1, V.t - 1)
    for x in a:
        y = np.concatenate([np.full((len(rest), 1), x), rest], axis=1)
        out.append(y[np.all(y @ Vm.T == 0, axis=1)])
    return np.concatenate(out)


def set_partitions(n: int) -> Iterator[list[list[int]]]:
    """All set partitions of {0..n-1} (restricted growth order)."""
    def rec(i, blocks):
        if i == n:
            yield [list(b) for b in blocks]
            return
        for b in blocks:
            b.append(i)
            yield from rec(i + 1, blocks)
            b.pop()
        blocks.append([i])
        yield from rec(i + 1, blocks)
        blocks.pop()
    yield from rec(0, [])


def count_distinct_solutions(V: IntMatrix, A) -> int:
    """Solutions in A^t with pairwise distinct coordinates, by Mobius inversion over
    coordinate-equality patterns: sum over partitions pi of mu(pi) * #{y : y constant on blocks}."""
    a = _as_set(A)
    if len(a) == 0:
        return 0
    total = 0
    for part in set_partitions(V.t):
        mu = 1
        for b in part:
            mu *= (-1) ** (len(b) - 1) * math.factorial(len(b) - 1)
        merged = [[sum(row[j] for j in b) for b in part] for row in V.entries]
        Vp = IntMatrix.from_rows(merged, len(part))
        basis = linsys.integer_kernel(Vp)
        cnt = sum(len(y) for y in linsys.lattice_box_points(
            basis, len(part), int(a[0]), int(a[-1]), [a] * len(part)))
        total += mu * cnt
    return total


def count_distinct_solutions_brute(V: IntMatrix, A, limit: int = 60) -> int:
    y = _brute_solutions(V, A, limit)
    ok = np.ones(len(y), dtype=bool)
    for i, j in itertools.combinations(range(V.t), 2):
        ok &= y[:, i] != y[:, j]
    return int(ok.sum())


def three_ap_count_brute(A) -> int:
    """Triples (a, a+d, a+2d) in A^3, d in Z, by direct scan."""
    s = set(int(x) for x in A)
    return sum(1 for a in s for b in s if 2 * b - a in s)


# ---------------------------------------------------------------------------
# Chains of Bohr sets and T_B
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class BohrChain:
    """Bohr sets B_0, ..., B_q with B_i contained in (B_{i-1})_{|rho_i}."""

    sets: tuple[BohrSet, ...]
    ratios: tuple[float, ...] = field(default=())
    require_regular: bool = True

    def __post_init__(self):
        if len(self.ratios) != max(0, len(self.sets) - 1):
            raise ValidationError("need one nesting ratio per consecutive pair")
        for k in range(1, len(self.sets)):
            outer = dilate(self.sets[k - 1], self.ratios[k - 1], check=False)
            if not outer.contains(self.sets[k].elements).all():
                raise ValidationError(f"B_{k} is not inside the {self.ratios[k - 1]}-dilate of B_{k - 1}")
        if self.require_regular:
            for k, B in enumerate(self.sets):
                if not (B.regular or is_regular(B)):
                    raise ValidationError(f"B_{k} is not regular")

    @property
    def q(self) -> int:
        return len(self.sets) - 1

    @property
    def M(self) -> int:
        return self.sets[0].M

    def cost(self) -> int:
        return math.prod(B.size for B in self.sets)


def _chain_values(phi: LinearSystem, chain: BohrChain, start: int, stop: int) -> np.ndarray:
    """phi(x) mod M for flat indices [start, stop) of the product B_0 x ... x B_q."""
    sizes = [B.size for B in chain.sets]
    idx = np.arange(start, stop, dtype=np.int64)
    coords = []
    for n in sizes[::-1]:
        coords.append(idx % n)
        idx //= n
    coords = coords[::-1]
    X = np.stack([B.elements[c] for B, c in zip(chain.sets, coords)], axis=1)
    A = np.array(phi.coeffs, dtype=np.int64).reshape(phi.t, phi.d)
    return (X @ A.T + np.array(phi.constants, dtype=np.int64)) % chain.M


def t_bohr(phi: LinearSystem, chain: BohrChain, fs: Sequence, budget: int = 100_000_000,
           samples: int = 200_000, seed: int = 0, chunk: int = 1 << 18) -> PatternCountResult:
    """E_{x_0 in B_0, ..., x_q in B_q} prod_i f_i(phi_i(x))."""
    if phi.d != len(chain.sets):
        raise ValidationError(f"system has {phi.d} variables but chain has {len(chain.sets)} sets")
    M = chain.M
    fv = [_fvals(f, M) for f in fs]
    if len(fv) != phi.t:
        raise ValidationError(f"need {phi.t} functions")
    total_cost = chain.cost()
    if total_cost <= budget:
        acc = 0.0
        for s in range(0, total_cost, chunk):
            acc += _product_along(_chain_values(phi, chain, s, min(total_cost, s + chunk)), fv, M)
        return PatternCountResult(acc / total_cost, "exact", total_cost)
    rng = np.random.default_rng(seed)
    X = np.stack([B.elements[rng.integers(0, B.size, samples)] for B in chain.sets], axis=1)
    A = np.array(phi.coeffs, dtype=np.int64).reshape(phi.t, phi.d)
    vals = (X @ A.T + np.array(phi.constants, dtype=np.int64)) % M
    prod = np.ones(samples)
    for i, f in enumerate(fv):
        prod *= f[vals[:, i]]
    hw = 1.96 * float(prod.std(ddof=1)) / math.sqrt(samples)
    return PatternCountResult(float(prod.mean()), "sampled", samples, hw)


def t_bohr_terms(phi: LinearSystem, chain: BohrChain, choices: Sequence[Sequence[np.ndarray]],
                 chunk: int = 1 << 18) -> np.ndarray:
    """T_B for every combination in prod_i choices[i], sharing one pass over the chain.

    Returns an array of shape (len(choices[0]), ..., len(choices[t-1])).
    """
    M = chain.M
    t = phi.t
    shape = tuple(len(c) for c in choices)
    total_cost = chain.cost()
    out = np.zeros(shape)
    letters = "abcdefghijklmnop"[:t]
    expr = ",".join(f"{letters[i]}z" for i in range(t)) + "->" + letters
    for s in range(0, total_cost, chunk):
        vals = _chain_values(phi, chain, s, min(total_cost, s + chunk))
        mats = [np.stack([np.asarray(f)[vals[:, i]] for f in choices[i]]) for i in range(t)]
        out += np.einsum(expr, *mats, optimize=True)
    return out / total_cost
