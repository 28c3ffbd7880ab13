"""Dissimilarity criteria between a 2D image and an extracted slice.

SSD and SAD sum over all pixels with invalid samples contributing their
stored 0 intensity; when the jointly valid overlap drops below 25% the cost
is replaced by a large finite penalty so optimizers cannot profit from
pushing the slice out of the volume. MAD is a masked, normalized validation
metric computed over jointly valid pixels only.
"""

from dataclasses import dataclass

from . import _kernels

PENALTY = 1e30
MIN_VALID_FRACTION = 0.25


@dataclass(frozen=True)
class MatchStats:
    cost: float
    valid_fraction: float
    pixel_count: int


def _check_dims(a, b):
    if a.dims != b.dims:
        raise ValueError(f"image dims differ: {a.dims} vs {b.dims}")


def _pairwise(a, b, squared):
    _check_dims(a, b)
    cost, joint = _kernels.pair_cost(a.grid, b.grid, a.validity_grid,
                                     b.validity_grid, squared)
    count = a.dims[0] * a.dims[1]
    fraction = joint / count
    if fraction < MIN_VALID_FRACTION:
        cost = PENALTY
    return MatchStats(cost=float(cost), valid_fraction=fraction, pixel_count=count)


def ssd(a, b):
    """Sum of squared intensity differences."""
    return _pairwise(a, b, True)


def sad(a, b):
    """Sum of absolute intensity differences."""
    return _pairwise(a, b, False)


def mad(a, b):
    """Mean of absolute differences over jointly valid pixels."""
    _check_dims(a, b)
    total, joint = _kernels.masked_abs_sum(a.grid, b.grid, a.validity_grid,
                                           b.validity_grid)
    if joint == 0:
        raise ValueError("no jointly valid pixels")
    return float(total) / joint
