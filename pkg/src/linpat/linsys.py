"""Exact linear algebra for translation-invariant systems of linear forms.

Everything here is integer or rational arithmetic; no floating point is used
for classification.  Indices are 0-based throughout: form ``i`` of a system
with ``t`` forms is ``psi.coeffs[i]``, variable ``k`` of ``d`` is column ``k``.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Iterator, Optional, Sequence

import numpy as np

from .errors import BudgetError, ValidationError

INFINITE = math.inf


# ---------------------------------------------------------------------------
# Value types
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class IntMatrix:
    """An r x t integer matrix V, stored row-major as tuples of Python ints."""

    entries: tuple[tuple[int, ...], ...]
    ncols: int

    def __post_init__(self):
        for row in self.entries:
            if len(row) != self.ncols:
                raise ValidationError(f"row {row} has length {len(row)}, expected {self.ncols}")

    @classmethod
    def from_rows(cls, rows: Sequence[Sequence[int]], ncols: Optional[int] = None) -> "IntMatrix":
        rows = tuple(tuple(int(a) for a in r) for r in rows)
        if ncols is None:
            if not rows:
                raise ValidationError("ncols required for a matrix without rows")
            ncols = len(rows[0])
        return cls(rows, ncols)

    @property
    def r(self) -> int:
        return len(self.entries)

    @property
    def t(self) -> int:
        return self.ncols

    def column(self, j: int) -> tuple[int, ...]:
        return tuple(row[j] for row in self.entries)

    def rank(self) -> int:
        return rank(self.entries)

    def apply(self, y: Sequence[int]) -> tuple[int, ...]:
        return tuple(sum(a * b for a, b in zip(row, y)) for row in self.entries)

    def to_list(self) -> list[list[int]]:
        return [list(r) for r in self.entries]


@dataclass(frozen=True)
class LinearSystem:
    """Affine system psi: A^d -> A^t, psi_i(x) = sum_j coeffs[i][j] x_j + constants[i].

    ``modulus`` is None over the integers, or a prime M for systems over Z_M
    (coefficients are then stored as residues in [0, M)).
    """

    coeffs: tuple[tuple[int, ...], ...]
    dim: int
    constants: tuple[int, ...] = ()
    modulus: Optional[int] = None

    def __post_init__(self):
        coeffs = tuple(tuple(int(a) for a in row) for row in self.coeffs)
        for row in coeffs:
            if len(row) != self.dim:
                raise ValidationError(f"form {row} has {len(row)} coefficients, expected {self.dim}")
        consts = tuple(int(b) for b in self.constants) or (0,) * len(coeffs)
        if len(consts) != len(coeffs):
            raise ValidationError("constants length must equal the number of forms")
        if self.modulus is not None:
            coeffs = tuple(tuple(a % self.modulus for a in row) for row in coeffs)
            consts = tuple(b % self.modulus for b in consts)
        object.__setattr__(self, "coeffs", coeffs)
        object.__setattr__(self, "constants", consts)

    @classmethod
    def from_rows(cls, rows: Sequence[Sequence[int]], constants: Sequence[int] = (),
                  modulus: Optional[int] = None, dim: Optional[int] = None) -> "LinearSystem":
        rows = [list(r) for r in rows]
        if dim is None:
            dim = len(rows[0]) if rows else 0
        return cls(tuple(tuple(r) for r in rows), dim, tuple(constants), modulus)

    @property
    def t(self) -> int:
        return len(self.coeffs)

    @property
    def d(self) -> int:
        return self.dim

    @property
    def is_linear(self) -> bool:
        return not any(self.constants)

    def linear_part(self) -> "LinearSystem":
        return LinearSystem(self.coeffs, self.dim, (), self.modulus)

    def depends(self, i: int, k: int) -> bool:
        return self.coeffs[i][k] != 0

    def coefficient_sets(self) -> list[set[int]]:
        """The sets of non-zero coefficients of each form."""
        return [{a for a in row if a != 0} for row in self.coeffs]

    def __call__(self, x: Sequence[int]) -> tuple[int, ...]:
        vals = tuple(sum(a * b for a, b in zip(row, x)) + c
                     for row, c in zip(self.coeffs, self.constants))
        if self.modulus is not None:
            vals = tuple(v % self.modulus for v in vals)
        return vals

    def with_shift(self) -> "LinearSystem":
        """phi(x_0, x) = x_0 + psi(x): prepend a shift variable with coefficient 1."""
        rows = tuple((1,) + row for row in self.coeffs)
        return LinearSystem(rows, self.dim + 1, self.constants, self.modulus)

    def to_dict(self) -> dict:
        return {
            "d": self.dim,
            "t": self.t,
            "coeffs": [list(r) for r in self.coeffs],
            "constants": list(self.constants),
            "modulus": self.modulus,
        }


# ---------------------------------------------------------------------------
# Exact rank, rational nullspace, integer lattices
# ---------------------------------------------------------------------------


def _bareiss(rows: Sequence[Sequence[int]]) -> tuple[list[list[int]], list[int]]:
    """Fraction-free row echelon form; returns (matrix, pivot columns)."""
    m = [list(map(int, r)) for r in rows]
    if not m:
        return m, []
    nrows, ncols = len(m), len(m[0])
    prev = 1
    r = 0
    pivots = []
    for c in range(ncols):
        piv = next((i for i in range(r, nrows) if m[i][c] != 0), None)
        if piv is None:
            continue
        m[r], m[piv] = m[piv], m[r]
        for i in range(r + 1, nrows):
            for j in range(c + 1, ncols):
                m[i][j] = (m[i][j] * m[r][c] - m[i][c] * m[r][j]) // prev
            m[i][c] = 0
        prev = m[r][c]
        pivots.append(c)
        r += 1
        if r == nrows:
            break
    return m, pivots


def rank(rows: Sequence[Sequence[int]]) -> int:
    if not rows or not len(rows[0]):
        return 0
    return len(_bareiss(rows)[1])


def in_span(v: Sequence[int], rows: Sequence[Sequence[int]]) -> bool:
    """Exact test v in span_Q(rows)."""
    if not any(v):
        return True
    if not rows:
        return False
    return rank(list(rows) + [v]) == rank(rows)


def rational_nullspace(rows: Sequence[Sequence[int]], n: int) -> list[list[int]]:
    """Basis of {x in Q^n : rows . x = 0}, each vector scaled to a primitive integer vector."""
    m = [[Fraction(a) for a in r] for r in rows]
    pivots = []
    r = 0
    for c in range(n):
        piv = next((i for i in range(r, len(m)) if m[i][c] != 0), None)
        if piv is None:
            continue
        m[r], m[piv] = m[piv], m[r]
        pv = m[r][c]
        m[r] = [a / pv for a in m[r]]
        for i in range(len(m)):
            if i != r and m[i][c] != 0:
                f = m[i][c]
                m[i] = [a - f * b for a, b in zip(m[i], m[r])]
        pivots.append(c)
        r += 1
    free = [c for c in range(n) if c not in pivots]
    basis = []
    for fc in free:
        v = [Fraction(0)] * n
        v[fc] = Fraction(1)
        for row_i, pc in enumerate(pivots):
            v[pc] = -m[row_i][fc]
        basis.append(_primitive(v))
    return basis


def _primitive(v: Sequence[Fraction]) -> list[int]:
    den = 1
    for a in v:
        den = den * Fraction(a).denominator // math.gcd(den, Fraction(a).denominator)
    ints = [int(Fraction(a) * den) for a in v]
    g = 0
    for a in ints:
        g = math.gcd(g, a)
    if g > 1:
        ints = [a // g for a in ints]
    first = next((a for a in ints if a != 0), 0)
    if first < 0:
        ints = [-a for a in ints]
    return ints


def _row_reduce_columns(aug: list[list[int]], ncols: int) -> int:
    """Unimodular row operations putting the first ``ncols`` columns in echelon form.

    Returns the number of non-zero rows in that block.
    """
    nrows = len(aug)
    row = 0
    for c in range(ncols):
        if row == nrows:
            break
        while True:
            nz = [i for i in range(row, nrows) if aug[i][c] != 0]
            if not nz:
                break
            i_min = min(nz, key=lambda i: (abs(aug[i][c]), i))
            aug[row], aug[i_min] = aug[i_min], aug[row]
            clean = True
            for i in range(row + 1, nrows):
                if aug[i][c]:
                    q = aug[i][c] // aug[row][c]
                    aug[i] = [a - q * b for a, b in zip(aug[i], aug[row])]
                    if aug[i][c]:
                        clean = False
            if clean:
                break
        if any(aug[i][c] for i in range(row, nrows)):
            row += 1
    return row


def hermite_normal_form(rows: Sequence[Sequence[int]]) -> list[list[int]]:
    """Row-style Hermite normal form of the lattice spanned by ``rows`` (zero rows dropped).

    Pivots are positive and entries above each pivot lie in [0, pivot).
    """
    if not rows:
        return []
    m = [list(map(int, r)) for r in rows]
    ncols = len(m[0])
    nz = _row_reduce_columns(m, ncols)
    m = [r for r in m[:nz] if any(r)]
    pivots = []
    for i, r in enumerate(m):
        p = next(c for c, a in enumerate(r) if a != 0)
        if r[p] < 0:
            m[i] = r = [-a for a in r]
        pivots.append(p)
    for i, p in enumerate(pivots):
        for k in range(i):
            q = m[k][p] // m[i][p]
            if q:
                m[k] = [a - q * b for a, b in zip(m[k], m[i])]
    return m


def integer_kernel(V: IntMatrix) -> list[list[int]]:
    """Z-basis of Z^t cap Ker(V), in Hermite normal form."""
    t, r = V.t, V.r
    aug = [[V.entries[i][j] for i in range(r)] + [int(k == j) for k in range(t)] for j in range(t)]
    nz = _row_reduce_columns(aug, r)
    kernel = [row[r:] for row in aug[nz:]]
    return hermite_normal_form(kernel)


def same_lattice(rows_a: Sequence[Sequence[int]], rows_b: Sequence[Sequence[int]]) -> bool:
    return hermite_normal_form(rows_a) == hermite_normal_form(rows_b)


def image_lattice(psi: LinearSystem) -> list[list[int]]:
    """HNF basis of the image psi(Z^d) in Z^t (columns of the coefficient matrix)."""
    cols = [[psi.coeffs[i][k] for i in range(psi.t)] for k in range(psi.d)]
    return hermite_normal_form(cols)


# ---------------------------------------------------------------------------
# Lattice points in a box
# ---------------------------------------------------------------------------


def _as_bounds(b, t: int) -> np.ndarray:
    arr = np.asarray(b, dtype=np.int64)
    if arr.ndim == 0:
        arr = np.full(t, int(arr), dtype=np.int64)
    return arr


def lattice_box_points(basis: Sequence[Sequence[int]], t: int, lo, hi,
                       allowed: Optional[Sequence[Optional[np.ndarray]]] = None,
                       chunk: int = 1 << 20) -> Iterator[np.ndarray]:
    """Yield, in blocks, every lattice point y = c . basis with lo <= y <= hi coordinatewise.

    ``allowed`` optionally restricts each coordinate to a set of integers (sorted
    array, or None for no restriction).  The basis is brought to Hermite normal
    form so that coordinates are fixed one pivot at a time and pruned early.
    """
    lo = _as_bounds(lo, t)
    hi = _as_bounds(hi, t)
    H = np.array(hermite_normal_form(basis), dtype=np.int64).reshape(-1, t)
    k = H.shape[0]
    pivots = [int(np.flatnonzero(H[l])[0]) for l in range(k)]
    tables = [None] * t
    allowed_arr = [None] * t
    if allowed is not None:
        for j, a in enumerate(allowed):
            if a is None:
                continue
            a = np.unique(np.asarray(a, dtype=np.int64))
            a = a[(a >= lo[j]) & (a <= hi[j])]
            allowed_arr[j] = a
            tab = np.zeros(int(hi[j] - lo[j] + 1), dtype=bool)
            tab[a - lo[j]] = True
            tables[j] = tab

    def ok(vals: np.ndarray, j: int) -> np.ndarray:
        mask = (vals >= lo[j]) & (vals <= hi[j])
        if tables[j] is not None:
            idx = np.where(mask, vals - lo[j], 0)
            mask &= tables[j][idx]
        return mask

    start = np.zeros((1, t), dtype=np.int64)
    first = pivots[0] if k else t
    for j in range(first):
        if not ok(start[:, j], j).all():
            return

    def newly_fixed(level: int) -> range:
        end = pivots[level + 1] if level + 1 < k else t
        return range(pivots[level], end)

    def expand(level: int, partial: np.ndarray) -> Iterator[np.ndarray]:
        if level == k:
            yield partial
            return
        p = pivots[level]
        piv = int(H[level, p])
        base = partial[:, p]
        cl = -((base - lo[p]) // piv)  # ceil((lo - base) / piv)
        ch = (hi[p] - base) // piv
        counts = np.maximum(ch - cl + 1, 0)
        use_allowed = allowed_arr[p] is not None and len(allowed_arr[p]) * len(partial) < counts.sum()
        if use_allowed:
            vals = allowed_arr[p]
            step = max(1, chunk // max(1, len(vals)))
            for s in range(0, len(partial), step):
                blk = partial[s:s + step]
                diff = vals[None, :] - blk[:, p][:, None]
                rr, cc = np.nonzero(diff % piv == 0)
                coef = diff[rr, cc] // piv
                new = blk[rr] + coef[:, None] * H[level][None, :]
                yield from finish(level, new)
        else:
            csum = np.cumsum(counts)
            s = 0
            n = len(partial)
            while s < n:
                base_total = csum[s - 1] if s else 0
                e = int(np.searchsorted(csum, base_total + chunk, side="right"))
                e = max(e, s + 1)
                e = min(e, n)
                cnt = counts[s:e]
                total = int(cnt.sum())
                if total:
                    rep = np.repeat(np.arange(s, e), cnt)
                    offs = np.arange(total) - np.repeat(np.cumsum(cnt) - cnt, cnt)
                    coef = cl[rep] + offs
                    new = partial[rep] + coef[:, None] * H[level][None, :]
                    yield from finish(level, new)
                s = e

    def finish(level: int, new: np.ndarray) -> Iterator[np.ndarray]:
        mask = np.ones(len(new), dtype=bool)
        for j in newly_fixed(level):
            mask &= ok(new[:, j], j)
        new = new[mask]
        if len(new):
            yield from expand(level + 1, new)

    yield from expand(0, start)


def count_box_points(basis, t, lo, hi, allowed=None) -> int:
    return sum(len(b) for b in lattice_box_points(basis, t, lo, hi, allowed))


# ---------------------------------------------------------------------------
# Arithmetic over F_p
# ---------------------------------------------------------------------------


def rref_mod(rows: Sequence[Sequence[int]], p: int) -> tuple[list[list[int]], list[int]]:
    m = [[a % p for a in r] for r in rows]
    if not m:
        return [], []
    ncols = len(m[0])
    pivots = []
    r = 0
    for c in range(ncols):
        piv = next((i for i in range(r, len(m)) if m[i][c]), None)
        if piv is None:
            continue
        m[r], m[piv] = m[piv], m[r]
        inv = pow(m[r][c], -1, p)
        m[r] = [(a * inv) % p for a in m[r]]
        for i in range(len(m)):
            if i != r and m[i][c]:
                f = m[i][c]
                m[i] = [(a - f * b) % p for a, b in zip(m[i], m[r])]
        pivots.append(c)
        r += 1
    return m[:r], pivots


def rank_mod(rows, p: int) -> int:
    return len(rref_mod(rows, p)[1])


def nullspace_mod(rows: Sequence[Sequence[int]], n: int, p: int) -> list[list[int]]:
    """Basis of {x in F_p^n : rows . x = 0}."""
    m, pivots = rref_mod(rows, p) if rows else ([], [])
    free = [c for c in range(n) if c not in pivots]
    basis = []
    for fc in free:
        v = [0] * n
        v[fc] = 1
        for row_i, pc in enumerate(pivots):
            v[pc] = (-m[row_i][fc]) % p
        basis.append(v)
    return basis


# ---------------------------------------------------------------------------
# Translation invariance, complexity and normal forms
# ---------------------------------------------------------------------------


def is_translation_invariant(V: IntMatrix) -> bool:
    return all(sum(row) == 0 for row in V.entries)


def _search_partition(items: Sequence[int], nblocks: int, good) -> Optional[list[list[int]]]:
    """First partition of ``items`` into exactly ``nblocks`` blocks, all satisfying ``good``.

    ``good`` must be hereditary (a subset of a good block is good), which lets
    the search reject a block as soon as it turns bad.
    """
    n = len(items)
    blocks: list[list[int]] = []

    def rec(i: int) -> Optional[list[list[int]]]:
        if i == n:
            return [list(b) for b in blocks] if len(blocks) == nblocks else None
        if len(blocks) + (n - i) < nblocks:
            return None
        x = items[i]
        for b in blocks:
            b.append(x)
            if good(tuple(b)):
                found = rec(i + 1)
                if found is not None:
                    return found
            b.pop()
        if len(blocks) < nblocks and good((x,)):
            blocks.append([x])
            found = rec(i + 1)
            if found is not None:
                return found
            blocks.pop()
        return None

    return rec(0)


def _complexity_search(t: int, i: int, good) -> tuple[float, Optional[list[list[int]]]]:
    if t == 1:
        return 0, []
    others = [j for j in range(t) if j != i]
    cache: dict = {}

    def cached(block):
        key = frozenset(block)
        if key not in cache:
            cache[key] = good(block)
        return cache[key]

    if not all(cached((j,)) for j in others):
        return INFINITE, None
    for nblocks in range(1, len(others) + 1):
        part = _search_partition(others, nblocks, cached)
        if part is not None:
            return nblocks - 1, part
    return INFINITE, None


def complexity_partition(psi: LinearSystem, i: int) -> tuple[float, Optional[list[list[int]]]]:
    """Complexity of psi at form i together with a witnessing partition of the other forms."""
    forms = psi.coeffs
    target = forms[i]

    def good(block):
        return not in_span(target, [forms[j] for j in block])

    return _complexity_search(psi.t, i, good)


def complexity_at(psi: LinearSystem, i: int) -> float:
    """Minimal s admitting a partition of the other forms into s+1 blocks avoiding psi_i's span.

    Returns ``math.inf`` when no partition works and 0 when t = 1.
    """
    return complexity_partition(psi, i)[0]


def complexity(psi: LinearSystem) -> float:
    return max((complexity_at(psi, i) for i in range(psi.t)), default=0)


def has_finite_complexity(psi: LinearSystem) -> bool:
    """True iff no two distinct forms are linearly dependent."""
    for i, j in itertools.combinations(range(psi.t), 2):
        if rank([psi.coeffs[i], psi.coeffs[j]]) < 2:
            return False
    return True


def _meets_rowspace(V: IntMatrix, i: int, block: Sequence[int]) -> bool:
    # (e_i + span{e_j : j in block}) meets rowspace(V) iff some mu has
    # mu.C_i = 1 and mu.C_j = 0 off block u {i}, i.e. C_i outside span of those columns.
    rest = [V.column(j) for j in range(V.t) if j != i and j not in block]
    ci = V.column(i)
    if V.r == 0:
        return False
    return not in_span(ci, rest)


def matrix_complexity_partition(V: IntMatrix, i: int) -> tuple[float, Optional[list[list[int]]]]:
    if V.t < 2:
        raise ValidationError("matrix complexity needs t >= 2")
    return _complexity_search(V.t, i, lambda block: not _meets_rowspace(V, i, block))


def matrix_complexity_at(V: IntMatrix, i: int) -> float:
    """Complexity at column i computed directly from the row space of V."""
    return matrix_complexity_partition(V, i)[0]


def matrix_complexity(V: IntMatrix) -> float:
    return max(matrix_complexity_at(V, i) for i in range(V.t))


def is_exact_normal_at(psi: LinearSystem, i: int, s: int) -> tuple[bool, Optional[tuple[int, ...]]]:
    """Exact s-normal form at i: a set J of s+1 variables on all of which psi_i depends
    and no other form depends.  The lexicographically first witness J is returned."""
    if s < 0 or s + 1 > psi.d:
        return False, None
    row = psi.coeffs[i]
    support = [k for k in range(psi.d) if row[k] != 0]
    for J in itertools.combinations(support, s + 1):
        if all(not all(psi.coeffs[j][k] != 0 for k in J) for j in range(psi.t) if j != i):
            return True, J
    return False, None


def normal_witness(psi: LinearSystem, i: int, s_max: int) -> Optional[tuple[int, tuple[int, ...]]]:
    """Smallest s <= s_max with psi exact s-normal at i, with its witness."""
    for s in range(s_max + 1):
        ok, J = is_exact_normal_at(psi, i, s)
        if ok:
            return s, J
    return None


def is_normal(psi: LinearSystem, s: int) -> bool:
    return all(normal_witness(psi, i, s) is not None for i in range(psi.t))


def normal_extension(psi: LinearSystem, s: int) -> LinearSystem:
    """An s-normal system psi'(x, y) = psi(x + F y) with the same image as psi.

    For each form i not already in exact s_i-normal form, the complexity
    partition X_1..X_{s_i+1} supplies directions f_k with psi_j(f_k) = 0 on
    X_k and psi_i(f_k) != 0; each direction becomes a dummy variable.  The
    number of dummy variables is capped at d*t.
    """
    lin = psi.linear_part()
    if complexity(lin) > s:
        raise ValidationError(f"system complexity exceeds {s}")
    directions: list[list[int]] = []
    owner: list[int] = []
    for i in range(lin.t):
        if normal_witness(lin, i, s) is not None:
            continue
        si, part = complexity_partition(lin, i)
        used_here: set[int] = set()
        for block in part:
            null = rational_nullspace([lin.coeffs[j] for j in block], lin.d)
            f = next(v for v in null if sum(a * b for a, b in zip(lin.coeffs[i], v)) != 0)
            idx = next((n for n, g in enumerate(directions)
                        if g == f and owner[n] != i and n not in used_here), None)
            if idx is None:
                directions.append(f)
                owner.append(i)
                idx = len(directions) - 1
            used_here.add(idx)
    e = len(directions)
    if e > max(1, lin.d) * lin.t:
        raise BudgetError(f"normal extension needs {e} dummy variables, cap is d*t")
    rows = []
    for row in psi.coeffs:
        extra = [sum(a * b for a, b in zip(row, f)) for f in directions]
        rows.append(tuple(row) + tuple(extra))
    out = LinearSystem(tuple(rows), psi.d + e, psi.constants, psi.modulus)
    if not is_normal(out.linear_part(), s):
        raise ValidationError("normal extension failed structural validation")
    return out


def prune_variables(psi: LinearSystem, s: int) -> LinearSystem:
    """Greedily drop variables while the image lattice and s-normality are preserved."""
    cur = psi
    target = image_lattice(psi)
    k = 0
    while k < cur.d:
        rows = tuple(row[:k] + row[k + 1:] for row in cur.coeffs)
        cand = LinearSystem(rows, cur.d - 1, cur.constants, cur.modulus)
        if cand.d >= 1 and image_lattice(cand) == target and is_normal(cand, s):
            cur = cand
        else:
            k += 1
    return cur


@dataclass(frozen=True)
class KernelParametrization:
    psi: LinearSystem
    phi: LinearSystem
    basis: tuple[tuple[int, ...], ...] = field(default=())


def kernel_surjection(V: IntMatrix) -> LinearSystem:
    """psi: Z^k ->> Z^t cap Ker(V) from the HNF kernel basis, with no normal-form requirement."""
    if V.r == 0 or V.rank() != V.r:
        raise ValidationError(f"matrix must have full row rank r = {V.r} >= 1")
    basis = integer_kernel(V)
    rows = tuple(tuple(basis[k][i] for k in range(len(basis))) for i in range(V.t))
    return LinearSystem(rows, len(basis))


def kernel_parametrization(V: IntMatrix, s: int) -> KernelParametrization:
    """A surjection psi: Z^d ->> Z^t cap Ker(V) in s-normal form, and phi = x_0 + psi."""
    if not is_translation_invariant(V):
        raise ValidationError("matrix is not translation-invariant")
    if V.r == 0 or V.rank() != V.r:
        raise ValidationError(f"matrix must have full row rank r = {V.r} >= 1")
    if V.t >= 2 and matrix_complexity(V) > s:
        raise ValidationError(f"matrix complexity exceeds {s}")
    basis = integer_kernel(V)
    rows = tuple(tuple(basis[k][i] for k in range(len(basis))) for i in range(V.t))
    psi0 = LinearSystem(rows, len(basis))
    ext = normal_extension(psi0, s)
    psi = prune_variables(ext, s)
    if image_lattice(psi) != hermite_normal_form(basis):
        raise ValidationError("parametrization image differs from the kernel lattice")
    return KernelParametrization(psi, psi.with_shift(), tuple(tuple(b) for b in basis))


# ---------------------------------------------------------------------------
# Norms, reduction and lifting
# ---------------------------------------------------------------------------


def _torus_dist(a: int, M: int) -> int:
    a %= M
    return min(a, M - a)


def system_norm(psi: LinearSystem, M: Optional[int] = None) -> Fraction:
    """sum |a_ij| + sum |b_i|/M over Z; the toral norm over Z_M."""
    if psi.modulus is not None:
        P = psi.modulus
        lin = sum(_torus_dist(a, P) for row in psi.coeffs for a in row)
        return Fraction(lin) + sum((Fraction(_torus_dist(b, P), P) for b in psi.constants), Fraction(0))
    lin = Fraction(sum(abs(a) for row in psi.coeffs for a in row))
    if any(psi.constants):
        if M is None:
            raise ValidationError("affine system norm needs a modulus M")
        lin += sum((Fraction(abs(b), M) for b in psi.constants), Fraction(0))
    return lin


def matrix_norm(V: IntMatrix) -> int:
    return sum(abs(a) for row in V.entries for a in row)


def reduction_threshold(psi: LinearSystem, V: IntMatrix) -> int:
    n = system_norm(psi.linear_part())
    return max(math.factorial(psi.t) * int(n) ** psi.t, math.factorial(V.r) * matrix_norm(V) ** V.r)


def reduce_mod(psi: LinearSystem, V: IntMatrix, M: int, verify_budget: int = 2_000_000) -> LinearSystem:
    """Reduce an integer parametrization of Ker(V) modulo a prime M above the transfer threshold."""
    if psi.modulus is not None:
        raise ValidationError("system is already over Z_M")
    thr = reduction_threshold(psi, V)
    if M <= thr:
        raise ValidationError(f"modulus {M} must exceed {thr}")
    theta = LinearSystem(psi.coeffs, psi.d, psi.constants, M)
    for i in range(psi.t):
        for k in range(psi.d):
            if (psi.coeffs[i][k] != 0) != (theta.coeffs[i][k] != 0):
                raise ValidationError("reduction changed a dependency pattern")
    rows = [list(r) for r in theta.coeffs]
    for row in V.entries:
        for k in range(psi.d):
            if sum(row[i] * rows[i][k] for i in range(psi.t)) % M:
                raise ValidationError("reduction does not land in Ker(V) mod M")
    cols = [[rows[i][k] for i in range(psi.t)] for k in range(psi.d)]
    if rank_mod(cols, M) != psi.t - rank_mod(V.entries, M):
        raise ValidationError("reduction is not onto Ker(V) mod M")
    if M ** psi.d <= verify_budget:
        if image_size_mod(theta) != M ** (psi.t - rank_mod(V.entries, M)):
            raise ValidationError("enumerated image size mismatch")
    return theta


def image_size_mod(theta: LinearSystem, budget: int = 5_000_000) -> int:
    """Number of distinct values of theta on Z_M^d, by enumeration."""
    M = theta.modulus
    if M ** theta.d > budget:
        raise BudgetError(f"enumerating Z_{M}^{theta.d} exceeds the budget {budget}")
    A = np.array(theta.coeffs, dtype=np.int64).reshape(theta.t, theta.d)
    grids = np.stack(np.meshgrid(*[np.arange(M)] * theta.d, indexing="ij"), -1).reshape(-1, theta.d)
    vals = (grids @ A.T) % M
    keys = np.zeros(len(vals), dtype=object) if M ** theta.t > 2 ** 62 else np.zeros(len(vals), dtype=np.int64)
    for i in range(theta.t):
        keys = keys * M + vals[:, i]
    return len(np.unique(keys))


def lift_from_mod(theta: LinearSystem) -> LinearSystem:
    """Lift a system over Z_M to Z using representatives in (-M/2, M/2]."""
    M = theta.modulus
    if M is None:
        raise ValidationError("system is not over Z_M")
    if M <= 2 * system_norm(theta.linear_part()):
        raise ValidationError("modulus must exceed twice the linear norm")

    def centered(a):
        a %= M
        return a - M if a > M // 2 else a

    coeffs = tuple(tuple(centered(a) for a in row) for row in theta.coeffs)
    consts = tuple(centered(b) for b in theta.constants)
    return LinearSystem(coeffs, theta.d, consts, None)


def count_degenerate(V: IntMatrix, N: int, i: int, j: int) -> int:
    """#{y in [-N, N]^t : Vy = 0 and y_i = y_j}, by kernel-lattice enumeration."""
    if i == j:
        raise ValidationError("indices must be distinct")
    extra = [0] * V.t
    extra[i], extra[j] = 1, -1
    aug = IntMatrix.from_rows(list(V.entries) + [extra], V.t)
    basis = integer_kernel(aug)
    return count_box_points(basis, V.t, -N, N)
