"""Deterministic construction of benchmark collections.

Every instance derives from a master seed through named streams, so the
frozen acceptance suite is bit-reproducible; data/instances.json pins the
content hashes and the calibrated constants live in data/calibration.json.
"""

import json
import math
from importlib import resources

import numpy as np

from .collection import Collection, all_equal_collection, orthogonal_pure_collection
from .densmat import DensityMatrix, Spectrum, random_state
from .estimator import instance_hash


def stream(master_seed, *key):
    """Independent generator for (master_seed, key...) via SeedSequence spawn keys."""
    return np.random.default_rng(np.random.SeedSequence(master_seed, spawn_key=key))


def tetrahedral_collection():
    """Four symmetric pure qubit states (regular tetrahedron on the Bloch sphere)."""
    dirs = np.array([[1, 1, 1], [1, -1, -1], [-1, 1, -1], [-1, -1, 1]]) / math.sqrt(3)
    states = []
    for nx, ny, nz in dirs:
        states.append(
            DensityMatrix(np.array([[1 + nz, nx - 1j * ny], [nx + 1j * ny, 1 - nz]]) / 2)
        )
    return Collection(np.full(4, 0.25), states)


def random_collection(d, n, rng, weights=None):
    if weights is None:
        w = rng.dirichlet(np.ones(n)) * 0.7 + 0.3 / n
        w /= w.sum()
    else:
        w = np.asarray(weights, dtype=float)
    states = [random_state(Spectrum(rng.dirichlet(np.ones(d))), rng) for _ in range(n)]
    return Collection(w, states)


def make_instance(spec, master_seed=0):
    """Build a collection from a config dict.  Kinds:
    orthogonal_pure(d[,N]), maximally_mixed_equal(d,N), equal_random(d,N,stream),
    tetrahedral, haar_random(d,N,stream[,weights]), json(doc)."""
    kind = spec["kind"]
    if kind == "orthogonal_pure":
        return orthogonal_pure_collection(spec["d"], spec.get("N"))
    if kind == "maximally_mixed_equal":
        return all_equal_collection(
            np.full(spec["N"], 1.0 / spec["N"]), DensityMatrix.maximally_mixed(spec["d"])
        )
    if kind == "equal_random":
        rng = stream(master_seed, 101, int(spec.get("stream", 0)))
        state = random_state(Spectrum(rng.dirichlet(np.ones(spec["d"]))), rng)
        return all_equal_collection(np.full(spec["N"], 1.0 / spec["N"]), state)
    if kind == "tetrahedral":
        return tetrahedral_collection()
    if kind == "haar_random":
        rng = stream(master_seed, 102, int(spec.get("stream", 0)))
        return random_collection(spec["d"], spec["N"], rng, spec.get("weights"))
    if kind == "json":
        return Collection.from_json(json.dumps(spec["doc"]))
    raise ValueError(f"unknown instance kind {kind!r}")


FROZEN_SUITE_SEED = 20240901
FROZEN_MUS = (1.0, 2.0, 4.0)


def frozen_suite():
    """The frozen unbiasedness/variance suite: 10 instances x mu in {1,2,4}
    (30 cases), d <= 3, N <= 3."""
    specs = [
        ("orth_d2", {"kind": "orthogonal_pure", "d": 2}),
        ("orth_d3", {"kind": "orthogonal_pure", "d": 3, "N": 3}),
        ("mixed_equal_d2n2", {"kind": "maximally_mixed_equal", "d": 2, "N": 2}),
        ("mixed_equal_d3n3", {"kind": "maximally_mixed_equal", "d": 3, "N": 3}),
        ("equal_random_d2n3", {"kind": "equal_random", "d": 2, "N": 3, "stream": 0}),
        ("haar_d2n2_a", {"kind": "haar_random", "d": 2, "N": 2, "stream": 1}),
        ("haar_d2n3_a", {"kind": "haar_random", "d": 2, "N": 3, "stream": 2}),
        ("haar_d3n2_a", {"kind": "haar_random", "d": 3, "N": 2, "stream": 3}),
        ("haar_d3n3_a", {"kind": "haar_random", "d": 3, "N": 3, "stream": 4}),
        (
            "mixed_pure_d2n3",
            {
                "kind": "json",
                "doc": {
                    "weights": [1 / 3, 1 / 3, 1 / 3],
                    "states": [
                        [[[1, 0], [0, 0]], [[0, 0], [0, 0]]],
                        [[[0, 0], [0, 0]], [[0, 0], [1, 0]]],
                        [[[0.5, 0], [0, 0]], [[0, 0], [0.5, 0]]],
                    ],
                },
            },
        ),
    ]
    return [(name, make_instance(spec, FROZEN_SUITE_SEED)) for name, spec in specs]


def _load_data(name):
    path = resources.files("qidlab").joinpath("data", name)
    return json.loads(path.read_text())


def load_frozen_hashes():
    return _load_data("instances.json")


def load_calibration():
    """Frozen constants: variance bound constant C and the tester b_const."""
    return _load_data("calibration.json")


def check_frozen_suite():
    """Assert the generated suite still matches the pinned hashes."""
    pinned = load_frozen_hashes()
    mismatches = []
    for name, coll in frozen_suite():
        h = instance_hash(coll)
        if pinned.get(name) != h:
            mismatches.append((name, h, pinned.get(name)))
    return mismatches
