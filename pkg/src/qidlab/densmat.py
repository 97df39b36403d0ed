"""Dense complex linear algebra for density matrices.

Validation, trace/Hilbert-Schmidt distances, overlaps, spectra and
Haar-random state generation.  Everything is double precision and sized
for desk-scale dimensions (d <~ 16).
"""

import numpy as np

HERMITICITY_TOL = 1e-10
TRACE_TOL = 1e-10
EIGENVALUE_CLIP = 1e-10
SPECTRUM_SUM_TOL = 1e-12


class DensityMatrixError(ValueError):
    pass


class NotHermitian(DensityMatrixError):
    pass


class NotUnitTrace(DensityMatrixError):
    pass


class NotPositive(DensityMatrixError):
    pass


class DimensionMismatch(DensityMatrixError):
    pass


class BadRank(DensityMatrixError):
    pass


class Spectrum:
    """Descending-ordered nonnegative eigenvalue vector summing to 1."""

    def __init__(self, values):
        vals = np.asarray(values, dtype=float)
        if vals.ndim != 1 or vals.size == 0:
            raise DensityMatrixError("spectrum must be a nonempty 1-d vector")
        if np.any(vals < -EIGENVALUE_CLIP):
            raise NotPositive(f"negative spectrum entry {vals.min()}")
        vals = np.clip(vals, 0.0, None)
        if abs(vals.sum() - 1.0) > SPECTRUM_SUM_TOL:
            raise NotUnitTrace(f"spectrum sums to {vals.sum()}")
        self.values = np.sort(vals)[::-1].copy()
        self.values.flags.writeable = False

    def __len__(self):
        return self.values.size

    def __iter__(self):
        return iter(self.values)

    def __repr__(self):
        return f"Spectrum({self.values.tolist()})"


class DensityMatrix:
    """Validated d x d positive unit-trace complex matrix.

    Construction checks Hermiticity and trace to 1e-10 and clips
    eigenvalues in [-1e-10, 0) to zero, renormalizing; anything worse
    raises NotHermitian / NotUnitTrace / NotPositive.
    """

    __slots__ = ("mat", "dim", "_eig")

    def __init__(self, matrix):
        mat = np.asarray(matrix, dtype=complex)
        if mat.ndim != 2 or mat.shape[0] != mat.shape[1]:
            raise DensityMatrixError(f"expected a square matrix, got shape {mat.shape}")
        if np.max(np.abs(mat - mat.conj().T)) > HERMITICITY_TOL:
            raise NotHermitian("matrix is not Hermitian to 1e-10")
        tr = mat.trace()
        if abs(tr - 1.0) > TRACE_TOL:
            raise NotUnitTrace(f"trace is {tr}")
        w, v = np.linalg.eigh(mat)
        if w.min() < -EIGENVALUE_CLIP:
            raise NotPositive(f"eigenvalue {w.min()} below -1e-10")
        if w.min() < 0.0:
            w = np.clip(w, 0.0, None)
            w = w / w.sum()
            mat = (v * w) @ v.conj().T
        self.mat = mat
        self.mat.flags.writeable = False
        self.dim = mat.shape[0]
        self._eig = (w, v)

    @classmethod
    def pure(cls, vec):
        """Projector |v><v| onto a (normalized) state vector."""
        v = np.asarray(vec, dtype=complex)
        v = v / np.linalg.norm(v)
        return cls(np.outer(v, v.conj()))

    @classmethod
    def basis_state(cls, d, k):
        v = np.zeros(d)
        v[k] = 1.0
        return cls.pure(v)

    @classmethod
    def maximally_mixed(cls, d):
        return cls(np.eye(d) / d)

    @classmethod
    def diagonal(cls, values):
        return cls(np.diag(np.asarray(values, dtype=complex)))

    def spectrum(self):
        return Spectrum(np.clip(self._eig[0], 0.0, None) / np.clip(self._eig[0], 0.0, None).sum())

    def purity(self):
        return float(np.real(np.trace(self.mat @ self.mat)))

    def conjugate_by(self, unitary):
        """U rho U^dagger, revalidated."""
        u = np.asarray(unitary, dtype=complex)
        return DensityMatrix(u @ self.mat @ u.conj().T)

    def __repr__(self):
        return f"DensityMatrix(dim={self.dim})"


def _check_same_dim(*states):
    dims = {s.dim for s in states}
    if len(dims) != 1:
        raise DimensionMismatch(f"mixed dimensions {sorted(dims)}")


def trace_distance(rho, sigma):
    """Half the trace norm of rho - sigma, via Hermitian eigendecomposition."""
    _check_same_dim(rho, sigma)
    w = np.linalg.eigvalsh(rho.mat - sigma.mat)
    return 0.5 * float(np.abs(w).sum())


def hs_distance(rho, sigma):
    """Hilbert-Schmidt (Frobenius) distance ||rho - sigma||_2."""
    _check_same_dim(rho, sigma)
    w = np.linalg.eigvalsh(rho.mat - sigma.mat)
    return float(np.sqrt(np.sum(w * w)))


def overlap(rho, sigma):
    """Tr[rho sigma] (real; the product of two Hermitian operators has real trace)."""
    _check_same_dim(rho, sigma)
    return float(np.real(np.sum(rho.mat * sigma.mat.T)))


def triple_overlap(rho, sigma, tau):
    """Re Tr[rho sigma tau].

    The real part is invariant under all orderings of the three states
    (cyclic shifts preserve the trace, reversal conjugates it), which is
    the combination entering every symmetrized covariance below.
    """
    _check_same_dim(rho, sigma, tau)
    return float(np.real(np.trace(rho.mat @ sigma.mat @ tau.mat)))


def helstrom_success(rho, sigma):
    """Optimal success probability of discriminating rho vs sigma at one shot."""
    return 0.5 * (1.0 + trace_distance(rho, sigma))


def rank_closeness(rho, k):
    """eta = 1 - (sum of the k largest eigenvalues); 0 means exactly rank <= k."""
    if not 1 <= k <= rho.dim:
        raise BadRank(f"k={k} outside 1..{rho.dim}")
    w = np.sort(np.linalg.eigvalsh(rho.mat))[::-1]
    return float(max(0.0, 1.0 - w[:k].sum()))


def haar_unitary(d, rng):
    """Haar-distributed d x d unitary (QR of a complex Ginibre matrix with
    phase-corrected R diagonal)."""
    z = (rng.standard_normal((d, d)) + 1j * rng.standard_normal((d, d))) / np.sqrt(2.0)
    q, r = np.linalg.qr(z)
    ph = r.diagonal().copy()
    ph /= np.abs(ph)
    return q * ph


def random_state(spectrum, rng):
    """U diag(spectrum) U^dagger with U Haar-random."""
    spec = spectrum if isinstance(spectrum, Spectrum) else Spectrum(spectrum)
    d = len(spec)
    u = haar_unitary(d, rng)
    return DensityMatrix((u * spec.values) @ u.conj().T)
