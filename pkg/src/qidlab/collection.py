"""The object under test: a weighted collection of density matrices.

Holds the label probabilities and the states, the derived trace / squared
Hilbert-Schmidt spread functionals, count-vector samplers (multinomial and
Poissonized) and JSON round-tripping.
"""

import json

import numpy as np

from .densmat import DensityMatrix, hs_distance, trace_distance
from .divergences import validate_distribution

MIN_WEIGHT = 1e-6
FORM_ASSERT_TOL = 1e-10
FORM_ERROR_TOL = 1e-8
CQ_DIM_CAP = 64


class CollectionError(ValueError):
    pass


class FormMismatch(CollectionError):
    pass


class TooLarge(CollectionError):
    pass


class Collection:
    """Weights p_i and states rho_i over a common dimension d, N >= 2.

    Weights below 1e-6 are rejected: the estimator carries 1/p_i factors
    and its variance explodes long before that.
    """

    def __init__(self, weights, states):
        p = validate_distribution(weights)
        if p.size < 2:
            raise CollectionError("a collection needs at least two states")
        if np.any(p < MIN_WEIGHT) or np.any(p >= 1.0):
            raise CollectionError("weights must lie in [1e-6, 1)")
        states = list(states)
        if len(states) != p.size:
            raise CollectionError(f"{p.size} weights but {len(states)} states")
        dims = {s.dim for s in states}
        if len(dims) != 1:
            raise CollectionError(f"states have mixed dimensions {sorted(dims)}")
        self.weights = p
        self.weights.flags.writeable = False
        self.states = states
        self.n_states = p.size
        self.dim = states[0].dim
        self._tables = None

    def average_state(self):
        """rhobar = sum_i p_i rho_i, validated."""
        acc = np.zeros((self.dim, self.dim), dtype=complex)
        for w, s in zip(self.weights, self.states):
            acc += w * s.mat
        return DensityMatrix(acc)

    def mean_trace_distance(self):
        """sum_i p_i D_Tr(rho_i, rhobar)."""
        bar = self.average_state()
        return float(sum(w * trace_distance(s, bar) for w, s in zip(self.weights, self.states)))

    def mean_sq_hs_distance(self):
        """sum_ij p_i p_j D_HS(rho_i, rho_j)^2, cross-checked against the
        equivalent form 2 sum_i p_i D_HS(rho_i, rhobar)^2."""
        pairwise = 0.0
        for i in range(self.n_states):
            for j in range(i + 1, self.n_states):
                d2 = hs_distance(self.states[i], self.states[j]) ** 2
                pairwise += 2.0 * self.weights[i] * self.weights[j] * d2
        bar = self.average_state()
        avg_form = 2.0 * sum(
            w * hs_distance(s, bar) ** 2 for w, s in zip(self.weights, self.states)
        )
        if abs(pairwise - avg_form) > FORM_ERROR_TOL:
            raise FormMismatch(
                f"pairwise form {pairwise} vs average form {avg_form}"
            )
        return pairwise

    def overlap_tables(self):
        """(purity-inclusive) pair overlaps ov[i,j] = Tr[rho_i rho_j] and the
        fully symmetric triple table tri[i,j,k] = Re Tr[rho_i rho_j rho_k];
        computed once and cached (states are immutable)."""
        if self._tables is not None:
            return self._tables
        n = self.n_states
        mats = [s.mat for s in self.states]
        ov = np.empty((n, n))
        for i in range(n):
            for j in range(i, n):
                ov[i, j] = ov[j, i] = float(np.real(np.sum(mats[i] * mats[j].T)))
        tri = np.empty((n, n, n))
        prod = {}
        for i in range(n):
            for j in range(n):
                prod[i, j] = mats[i] @ mats[j]
        for i in range(n):
            for j in range(i, n):
                for k in range(j, n):
                    val = float(np.real(np.trace(prod[i, j] @ mats[k])))
                    for a, b, c in ((i, j, k), (i, k, j), (j, i, k),
                                    (j, k, i), (k, i, j), (k, j, i)):
                        tri[a, b, c] = val
        ov.flags.writeable = False
        tri.flags.writeable = False
        self._tables = (ov, tri)
        return self._tables

    def draw_counts_multinomial(self, total, rng):
        if total < 0:
            raise CollectionError("total must be >= 0")
        return rng.multinomial(total, self.weights)

    def draw_counts_poissonized(self, mu, rng):
        if mu <= 0:
            raise CollectionError("mu must be > 0")
        return rng.poisson(self.weights * mu)

    def cq_state(self):
        """Block-diagonal classical-quantum state with blocks p_i rho_i.

        Brute-force oracle only; capped at total dimension 64.
        """
        if self.n_states * self.dim > CQ_DIM_CAP:
            raise TooLarge(f"cq dimension {self.n_states * self.dim} > {CQ_DIM_CAP}")
        big = np.zeros((self.n_states * self.dim,) * 2, dtype=complex)
        for i, (w, s) in enumerate(zip(self.weights, self.states)):
            sl = slice(i * self.dim, (i + 1) * self.dim)
            big[sl, sl] = w * s.mat
        return DensityMatrix(big)

    def to_json(self):
        doc = {
            "weights": self.weights.tolist(),
            "states": [
                [[[float(z.real), float(z.imag)] for z in row] for row in s.mat]
                for s in self.states
            ],
        }
        return json.dumps(doc)

    @classmethod
    def from_json(cls, text):
        doc = json.loads(text)
        states = []
        for rows in doc["states"]:
            mat = np.array([[complex(re, im) for re, im in row] for row in rows])
            states.append(DensityMatrix(mat))
        return cls(doc["weights"], states)

    def __repr__(self):
        return f"Collection(N={self.n_states}, d={self.dim})"


def all_equal_collection(weights, state):
    return Collection(weights, [state] * len(list(weights)))


def orthogonal_pure_collection(d, n=None):
    """Uniform collection of the first n computational basis projectors (n <= d)."""
    n = d if n is None else n
    states = [DensityMatrix.basis_state(d, k) for k in range(n)]
    return Collection(np.full(n, 1.0 / n), states)
