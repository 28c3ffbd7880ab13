"""Shared test helpers: independent oracles and small synthetic inputs."""

import itertools

import numpy as np

from slicereg.imgcore import Volume3
from slicereg.mrf import EDGES, PairwiseMrf


def solve_by_nested_loops(mrf):
    """Independent exhaustive solver: six nested loops over label tuples in
    lexicographic order, strict improvement, summation in edge order."""
    tables = {e: mrf.cost[e].tolist() for e in EDGES}
    L = mrf.num_labels
    best = None
    best_energy = None
    for labels in itertools.product(range(L), repeat=6):
        energy = 0.0
        for (i, j) in EDGES:
            energy = energy + tables[(i, j)][labels[i]][labels[j]]
        if best_energy is None or energy < best_energy:
            best_energy = energy
            best = labels
    return best, best_energy


def random_mrf(rng, num_labels=5, integer=False):
    tables = {}
    for e in EDGES:
        t = rng.random((num_labels, num_labels))
        if integer:
            t = np.floor(t * 100)
        tables[e] = t
    return PairwiseMrf(edges=EDGES, cost=tables, base_params=None,
                       num_labels=num_labels, num_evaluations=0)


def smooth_random_volume(rng, dims=(24, 20, 7), spacing=(2.0, 2.0, 4.0)):
    """A volume with broad smooth structure, for small registration tests."""
    nx, ny, nz = dims
    sx, sy, sz = spacing
    z, y, x = np.meshgrid(np.arange(nz) * sz, np.arange(ny) * sy,
                          np.arange(nx) * sx, indexing="ij")
    cx, cy, cz = (nx - 1) * sx / 2, (ny - 1) * sy / 2, (nz - 1) * sz / 2
    data = (100.0 * np.exp(-(((x - cx) / (0.5 * cx + 1)) ** 2
                             + ((y - cy) / (0.5 * cy + 1)) ** 2
                             + ((z - cz) / (0.7 * cz + 1)) ** 2))
            + 40.0 * np.sin(x / 7.0) * np.cos(y / 9.0)
            + 25.0 * np.cos(z / 3.0 + x / 11.0)
            + 30.0 * np.exp(-(((x - 0.3 * cx) / 9) ** 2 + ((y - 1.4 * cy) / 8) ** 2
                              + ((z - 0.6 * cz) / 6) ** 2)))
    data += rng.normal(0.0, 0.5, size=data.shape)
    return Volume3(dims, spacing, data.ravel())
