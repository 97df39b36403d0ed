"""Young-diagram combinatorics, Schur-Weyl measures and permutation operators.

Covers integer partitions, hook-length and Weyl dimension counts, symmetric
group characters (Murnaghan-Nakayama on beta-sets), Schur polynomials
(Jacobi-Trudi in complete homogeneous polynomials, stable at repeated
spectrum values), the induced measure over diagrams, an RSK shape sampler,
and explicit dense operators (permutations, transposition averages, isotypic
projectors) at oracle scale d**l <= 1024.
"""

import itertools
import math
import threading
from bisect import bisect_right
from fractions import Fraction
from functools import cache, lru_cache

import numpy as np

from .densmat import Spectrum

OPERATOR_DIM_CAP = 1024
PROJECTOR_BOX_CAP = 8
TABLE_BOX_CAP = 30
MEASURE_SUM_TOL = 1e-10


class SymmetryError(ValueError):
    pass


class TooLarge(SymmetryError):
    pass


class TooFewBoxes(SymmetryError):
    pass


class Overflow(SymmetryError):
    pass


def _as_shape(shape):
    lam = tuple(int(x) for x in shape)
    if any(x <= 0 for x in lam) or any(lam[i] < lam[i + 1] for i in range(len(lam) - 1)):
        raise SymmetryError(f"{lam} is not a partition in decreasing order")
    return lam


def partitions(boxes, max_rows):
    """All partitions of `boxes` into at most `max_rows` parts, largest-first
    lexicographic order.  partitions(0, d) == [()]."""
    out = []

    def rec(remaining, largest, prefix, rows_left):
        if remaining == 0:
            out.append(tuple(prefix))
            return
        if rows_left == 0:
            return
        for part in range(min(largest, remaining), 0, -1):
            prefix.append(part)
            rec(remaining - part, part, prefix, rows_left - 1)
            prefix.pop()

    rec(int(boxes), int(boxes), [], int(max_rows))
    return out


def conjugate(shape):
    lam = _as_shape(shape) if shape else ()
    if not lam:
        return ()
    return tuple(sum(1 for x in lam if x > j) for j in range(lam[0]))


@cache
def syt_count(shape):
    """Number of standard Young tableaux (hook length formula); the dimension
    of the symmetric-group irrep for this shape."""
    lam = _as_shape(shape)
    n = sum(lam)
    conj = conjugate(lam)
    prod = 1
    for i, row in enumerate(lam):
        for j in range(row):
            prod *= lam[i] + conj[j] - i - j - 1
    return math.factorial(n) // prod


@cache
def weyl_dim(shape, d):
    """Dimension of the U(d) irrep for this shape (Weyl dimension formula)."""
    lam = _as_shape(shape) if shape else ()
    if len(lam) > d:
        raise SymmetryError(f"{lam} has more than {d} rows")
    lam = lam + (0,) * (d - len(lam))
    val = Fraction(1)
    for i in range(d):
        for j in range(i + 1, d):
            val *= Fraction(lam[i] - lam[j] + j - i, j - i)
    assert val.denominator == 1
    return int(val)


@cache
def sn_character(shape, cycle_type):
    """chi^shape on the conjugacy class with the given cycle type, by
    Murnaghan-Nakayama recursion over beta-sets (exact integers)."""
    if not cycle_type:
        return 1 if not shape else 0
    lam = _as_shape(shape)
    cyc = tuple(sorted(cycle_type, reverse=True))
    if sum(lam) != sum(cyc):
        raise SymmetryError("cycle type and shape have different sizes")
    k, rest = cyc[0], cyc[1:]
    r = len(lam)
    beta = [lam[i] + (r - 1 - i) for i in range(r)]
    bset = set(beta)
    total = 0
    for b in beta:
        nb = b - k
        if nb < 0 or nb in bset:
            continue
        crossings = sum(1 for c in beta if nb < c < b)
        newbeta = sorted((bset - {b}) | {nb}, reverse=True)
        rr = len(newbeta)
        newshape = tuple(newbeta[i] - (rr - 1 - i) for i in range(rr))
        while newshape and newshape[-1] == 0:
            newshape = newshape[:-1]
        total += (-1) ** crossings * sn_character(newshape, rest)
    return total


def complete_homogeneous(values, kmax):
    """h_0..h_kmax of the given variables (DP over variables, exact at
    repeated values)."""
    h = np.zeros(kmax + 1)
    h[0] = 1.0
    for x in values:
        for k in range(1, kmax + 1):
            h[k] += x * h[k - 1]
    return h


def schur_polynomial(shape, spectrum_values):
    """s_shape evaluated at the spectrum, via the Jacobi-Trudi determinant."""
    lam = _as_shape(shape) if shape else ()
    if not lam:
        return 1.0
    vals = np.asarray(spectrum_values, dtype=float)
    if len(lam) > vals.size:
        return 0.0
    r = len(lam)
    h = complete_homogeneous(vals, lam[0] + r)
    mat = np.zeros((r, r))
    for i in range(r):
        for j in range(r):
            idx = lam[i] - (i + 1) + (j + 1)
            if idx >= 0:
                mat[i, j] = h[idx]
    return float(np.linalg.det(mat))


def schur_weyl_pmf(n, spectrum, shape):
    """Probability of diagram `shape` under weak Schur sampling of n copies
    of a state with the given spectrum: s_shape(spec) * (number of SYT)."""
    if n > TABLE_BOX_CAP:
        raise Overflow(f"n={n} beyond table scale {TABLE_BOX_CAP}")
    spec = spectrum if isinstance(spectrum, Spectrum) else Spectrum(spectrum)
    lam = _as_shape(shape) if shape else ()
    if sum(lam) != n:
        raise SymmetryError(f"{lam} is not a partition of {n}")
    if len(lam) > len(spec):
        return 0.0
    return schur_polynomial(lam, spec.values) * syt_count(lam)


def schur_weyl_table(n, spectrum):
    """Full measure over partitions of n with at most d rows; validates
    normalization to 1e-10."""
    spec = spectrum if isinstance(spectrum, Spectrum) else Spectrum(spectrum)
    if n > TABLE_BOX_CAP:
        raise Overflow(f"n={n} beyond table scale {TABLE_BOX_CAP}")
    table = {}
    for lam in partitions(n, len(spec)):
        table[lam] = schur_weyl_pmf(n, spec, lam)
    total = sum(table.values())
    if abs(total - 1.0) > MEASURE_SUM_TOL:
        raise SymmetryError(f"measure sums to {total}")
    return table


def rsk_shape_sample(n, spectrum, rng):
    """Shape of the RSK insertion tableau of n i.i.d. letters drawn from the
    spectrum; distributed per schur_weyl_table."""
    spec = spectrum if isinstance(spectrum, Spectrum) else Spectrum(spectrum)
    letters = rng.choice(len(spec), size=n, p=spec.values)
    rows = []
    for x in letters:
        cur = int(x)
        placed = False
        for row in rows:
            idx = bisect_right(row, cur)
            if idx == len(row):
                row.append(cur)
                placed = True
                break
            cur, row[idx] = row[idx], cur
        if not placed:
            rows.append([cur])
    return tuple(len(row) for row in rows)


def avg_transposition_eigenvalue(shape):
    """Eigenvalue of the averaged-transposition operator on the isotypic
    block of `shape`: (1/(n(n-1))) sum_i ((lam_i - i + 1/2)^2 - (-i + 1/2)^2)."""
    lam = _as_shape(shape)
    n = sum(lam)
    if n < 2:
        raise TooFewBoxes("need at least two boxes")
    acc = 0.0
    for i, row in enumerate(lam, start=1):
        acc += (row - i + 0.5) ** 2 - (-i + 0.5) ** 2
    return acc / (n * (n - 1))


# ---------------------------------------------------------------------------
# dense operators at oracle scale


def _check_operator_dim(d, l):
    if d**l > OPERATOR_DIM_CAP:
        raise TooLarge(f"d^l = {d**l} exceeds the {OPERATOR_DIM_CAP} oracle cap")


def permutation_operator(perm, d):
    """Matrix of the permutation action on (C^d)^{tensor l}: register r of the
    output holds register perm^{-1}(r) of the input (one-line notation)."""
    perm = tuple(perm)
    l = len(perm)
    if sorted(perm) != list(range(l)):
        raise SymmetryError(f"{perm} is not a permutation of range({l})")
    _check_operator_dim(d, l)
    dim = d**l
    cols = np.arange(dim)
    digits = np.array(np.unravel_index(cols, (d,) * l))
    inv = np.argsort(perm)
    rows = np.ravel_multi_index(tuple(digits[inv[r]] for r in range(l)), (d,) * l)
    op = np.zeros((dim, dim))
    op[rows, cols] = 1.0
    return op


def transposition_operator(l, d, a, b):
    perm = list(range(l))
    perm[a], perm[b] = perm[b], perm[a]
    return permutation_operator(perm, d)


def transposition_average(d, l):
    """Average of all l(l-1)/2 transpositions on (C^d)^{tensor l}."""
    if l < 2:
        raise TooFewBoxes("need at least two registers")
    _check_operator_dim(d, l)
    acc = np.zeros((d**l, d**l))
    for a in range(l):
        for b in range(a + 1, l):
            acc += transposition_operator(l, d, a, b)
    return acc / (l * (l - 1) / 2)


def _cycle_type(perm):
    seen = [False] * len(perm)
    lengths = []
    for s in range(len(perm)):
        if seen[s]:
            continue
        ln, cur = 0, s
        while not seen[cur]:
            seen[cur] = True
            cur = perm[cur]
            ln += 1
        lengths.append(ln)
    return tuple(sorted(lengths, reverse=True))


@lru_cache(maxsize=8)
def _class_sums(l, d):
    """Sum of permutation operators per conjugacy class, dict cycle_type -> matrix."""
    if l > PROJECTOR_BOX_CAP:
        raise TooLarge(f"l={l} beyond the projector cap {PROJECTOR_BOX_CAP}")
    _check_operator_dim(d, l)
    dim = d**l
    cols = np.arange(dim)
    digits = np.array(np.unravel_index(cols, (d,) * l))
    sums = {}
    for perm in itertools.permutations(range(l)):
        inv = np.argsort(perm)
        rows = np.ravel_multi_index(tuple(digits[inv[r]] for r in range(l)), (d,) * l)
        acc = sums.setdefault(_cycle_type(perm), np.zeros((dim, dim)))
        np.add.at(acc, (rows, cols), 1.0)
    return sums


_projector_cache = {}
_projector_lock = threading.Lock()


def young_projector(shape, d):
    """Isotypic projector of the Schur-Weyl block for `shape` on
    (C^d)^{tensor sum(shape)}, built from the character expansion
    (dim_irrep / l!) * sum_perm chi(perm) P_perm."""
    lam = _as_shape(shape)
    key = (lam, d)
    with _projector_lock:
        hit = _projector_cache.get(key)
    if hit is not None:
        return hit
    l = sum(lam)
    acc = np.zeros((d**l, d**l))
    for ctype, csum in _class_sums(l, d).items():
        chi = sn_character(lam, ctype)
        if chi != 0:
            acc += chi * csum
    acc *= syt_count(lam) / math.factorial(l)
    acc.flags.writeable = False
    with _projector_lock:
        _projector_cache[key] = acc
    return acc


def all_projectors(l, d):
    return {lam: young_projector(lam, d) for lam in partitions(l, d)}
