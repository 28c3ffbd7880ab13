"""Discrete labeling of rigid parameter variations on a fully connected
pairwise graph.

Each of the 6 transform parameters is a node whose labels are quantized
offsets around the current estimate; each of the 15 edges carries a cost
table built by extracting the slice with only that pair of parameters
offset. Inference is exact enumeration (the label grid is tiny), with a
greedy ICM solver available behind the same interface.
"""

from dataclasses import dataclass
from itertools import combinations

import numpy as np

from . import _kernels, matching
from .rigid import rotation_matrices

NUM_NODES = 6
EDGES = tuple(combinations(range(NUM_NODES), 2))

# Batch size for cost-table extraction; bounds kernel scratch memory.
_CHUNK = 128


@dataclass(frozen=True)
class LabelSpace:
    """Per-node offset lists {-w, ..., -w/k, 0, w/k, ..., w} of length 2k+1."""

    omegas: tuple
    kappa: int
    offsets: tuple

    @property
    def num_labels(self):
        return 2 * self.kappa + 1

    @property
    def zero_labeling(self):
        return (self.kappa,) * NUM_NODES


def build_label_space(omegas, kappa):
    omegas = tuple(float(w) for w in omegas)
    if len(omegas) != NUM_NODES:
        raise ValueError(f"expected {NUM_NODES} omegas, got {len(omegas)}")
    if any(w <= 0 for w in omegas):
        raise ValueError("omegas must be strictly positive")
    kappa = int(kappa)
    if kappa < 1:
        raise ValueError("kappa must be >= 1")
    steps = np.arange(-kappa, kappa + 1, dtype=np.float64)
    offsets = tuple(steps * (w / kappa) for w in omegas)
    return LabelSpace(omegas=omegas, kappa=kappa, offsets=offsets)


def _check_labeling(ls, labeling):
    if len(labeling) != NUM_NODES:
        raise ValueError(f"labeling must have {NUM_NODES} entries")
    top = ls.num_labels - 1
    for i, l in enumerate(labeling):
        if not 0 <= l <= top:
            raise ValueError(f"label {l} for node {i} outside [0, {top}]")


def apply_labeling(base, ls, labeling):
    """Add each node's selected offset to the corresponding parameter."""
    _check_labeling(ls, labeling)
    deltas = [ls.offsets[i][labeling[i]] for i in range(NUM_NODES)]
    return base.shifted(deltas)


@dataclass(frozen=True)
class PairwiseMrf:
    """Cost tables on the fully connected 6-node graph.

    ``cost[(i, j)][li, lj]`` is the criterion value of the slice extracted
    with only parameters i and j offset from ``base_params``.
    ``num_evaluations`` counts distinct slice extractions performed during
    construction (duplicate offset vectors are served from a cache).
    """

    edges: tuple
    cost: dict
    base_params: object
    num_labels: int
    num_evaluations: int

    @property
    def num_nodes(self):
        return NUM_NODES


def _resolve_criterion(criterion):
    """Map a criterion (function or name) to the kernel's squared flag."""
    if criterion in ("ssd", matching.ssd):
        return True
    if criterion in ("sad", matching.sad):
        return False
    raise ValueError("criterion must be ssd or sad")


def evaluate_costs(I, J, params_list, geom, criterion):
    """Criterion cost of the slice extracted at each transform in the batch.

    Fused extraction + comparison; equals criterion(I, resample_slice(...))
    exactly, including the low-overlap penalty.
    """
    squared = _resolve_criterion(criterion)
    w, h = geom.dims
    if I.dims != geom.dims:
        raise ValueError(f"image dims {I.dims} differ from geometry {geom.dims}")
    su, sv = geom.spacing
    nx, ny, nz = J.dims
    sx, sy, sz = J.spacing
    idata = I.grid
    ivalid = I.validity_grid
    vol = J.grid
    count = w * h
    costs = np.empty(len(params_list))
    for start in range(0, len(params_list), _CHUNK):
        batch = params_list[start:start + _CHUNK]
        rots = rotation_matrices(batch)
        trans = np.empty((len(batch), 3))
        c = J.physical_center()
        for b, p in enumerate(batch):
            trans[b] = c + p.translation()
        out_cost = np.empty(len(batch))
        out_joint = np.empty(len(batch), dtype=np.int64)
        _kernels.resample_cost_batch(vol, nx, ny, nz, 1.0 / sx, 1.0 / sy, 1.0 / sz,
                                     rots, trans, w, h, su, sv,
                                     idata, ivalid, squared, out_cost, out_joint)
        low = out_joint < matching.MIN_VALID_FRACTION * count
        out_cost[low] = matching.PENALTY
        costs[start:start + len(batch)] = out_cost
    return costs


def build_pairwise_costs(I, J, base, geom, ls, criterion):
    """Fill all 15 edge tables, extracting each distinct offset vector once.

    The cache key is the exact 6-tuple of offsets, so the shared zero-offset
    entry is computed a single time and copied into every table.
    """
    L = ls.num_labels
    order = []
    index = {}
    entries = []
    for (i, j) in EDGES:
        for li in range(L):
            for lj in range(L):
                off = [0.0] * NUM_NODES
                off[i] = ls.offsets[i][li]
                off[j] = ls.offsets[j][lj]
                key = tuple(off)
                idx = index.get(key)
                if idx is None:
                    idx = len(order)
                    index[key] = idx
                    order.append(key)
                entries.append(idx)

    params_list = [base.shifted(key) for key in order]
    costs = evaluate_costs(I, J, params_list, geom, criterion)

    tables = {}
    pos = 0
    for (i, j) in EDGES:
        table = np.empty((L, L))
        for li in range(L):
            for lj in range(L):
                table[li, lj] = costs[entries[pos]]
                pos += 1
        tables[(i, j)] = table
    return PairwiseMrf(edges=EDGES, cost=tables, base_params=base,
                       num_labels=L, num_evaluations=len(order))


def mrf_energy(mrf, labeling):
    """Sum of the 15 pairwise table lookups for the labeling."""
    top = mrf.num_labels - 1
    if len(labeling) != NUM_NODES:
        raise ValueError(f"labeling must have {NUM_NODES} entries")
    for l in labeling:
        if not 0 <= l <= top:
            raise ValueError(f"label {l} outside [0, {top}]")
    return sum(mrf.cost[(i, j)][labeling[i], labeling[j]] for (i, j) in mrf.edges)


def solve_exact(mrf):
    """Exhaustive minimization over all label assignments.

    Ties break to the lexicographically smallest label vector (the first
    minimum in row-major order of the energy grid).
    """
    L = mrf.num_labels
    grid = np.zeros((L,) * NUM_NODES)
    for (i, j) in mrf.edges:
        shape = [1] * NUM_NODES
        shape[i] = L
        shape[j] = L
        grid += mrf.cost[(i, j)].reshape(shape)
    flat = int(np.argmin(grid))
    return tuple(int(v) for v in np.unravel_index(flat, grid.shape))


def solve_icm(mrf, init, max_sweeps):
    """Greedy coordinate descent over nodes in fixed order 0..5.

    Each node takes its conditionally optimal label (smallest index on
    ties); stops when a full sweep changes nothing or after max_sweeps.
    """
    L = mrf.num_labels
    top = L - 1
    for l in init:
        if not 0 <= l <= top:
            raise ValueError(f"label {l} outside [0, {top}]")
    if max_sweeps < 1:
        raise ValueError("max_sweeps must be >= 1")
    labels = list(init)
    for _ in range(max_sweeps):
        changed = False
        for i in range(NUM_NODES):
            cond = np.zeros(L)
            for j in range(NUM_NODES):
                if j == i:
                    continue
                if i < j:
                    cond += mrf.cost[(i, j)][:, labels[j]]
                else:
                    cond += mrf.cost[(j, i)][labels[j], :]
            best = int(np.argmin(cond))
            if best != labels[i]:
                labels[i] = best
                changed = True
        if not changed:
            break
    return tuple(labels)
