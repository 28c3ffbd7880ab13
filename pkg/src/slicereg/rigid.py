"""Rigid transform parameterization, slice-plane geometry, and trilinear
slice resampling.

Conventions: right-handed rotations composed as R = Rz(rz) @ Ry(ry) @ Rx(rx),
applied to slice-frame points. The slice rotates about its own center, which
sits at the volume's physical center when all parameters are zero; with zero
parameters the slice plane is the central axial plane. The volume origin is
physical (0, 0, 0) at voxel (0, 0, 0).
"""

import math
from dataclasses import dataclass

import numpy as np

from . import _kernels


@dataclass(frozen=True)
class RigidParams:
    """Three rotations (radians) and three translations (mm)."""

    rx: float = 0.0
    ry: float = 0.0
    rz: float = 0.0
    tx: float = 0.0
    ty: float = 0.0
    tz: float = 0.0

    def __post_init__(self):
        for name in ("rx", "ry", "rz", "tx", "ty", "tz"):
            if not math.isfinite(getattr(self, name)):
                raise ValueError(f"parameter {name} must be finite")

    def as_array(self):
        return np.array([self.rx, self.ry, self.rz, self.tx, self.ty, self.tz])

    @classmethod
    def from_array(cls, a):
        return cls(*(float(v) for v in a))

    def shifted(self, deltas):
        """New params with the 6 offsets added componentwise."""
        return RigidParams.from_array(self.as_array() + np.asarray(deltas, dtype=float))

    def translation(self):
        return np.array([self.tx, self.ty, self.tz])


@dataclass(frozen=True)
class SliceGeometry:
    """Pixel lattice of an extracted slice: (w, h) pixels at (su, sv) mm."""

    dims: tuple
    spacing: tuple

    def __post_init__(self):
        w, h = self.dims
        su, sv = self.spacing
        if w <= 0 or h <= 0 or su <= 0 or sv <= 0:
            raise ValueError("slice geometry dims and spacing must be positive")


def _rotation_entries(rx, ry, rz):
    """The nine entries of Rz(rz) @ Ry(ry) @ Rx(rx), expanded.

    Works elementwise on arrays, which lets callers build transform batches
    without per-item matrix products.
    """
    cx, sx = np.cos(rx), np.sin(rx)
    cy, sy = np.cos(ry), np.sin(ry)
    cz, sz = np.cos(rz), np.sin(rz)
    return (cz * cy, cz * sy * sx - sz * cx, cz * sy * cx + sz * sx,
            sz * cy, sz * sy * sx + cz * cx, sz * sy * cx - cz * sx,
            -sy, cy * sx, cy * cx)


def rotation_matrix(params):
    """3x3 orthonormal matrix for the given Euler angles."""
    e = _rotation_entries(params.rx, params.ry, params.rz)
    return np.array([[e[0], e[1], e[2]],
                     [e[3], e[4], e[5]],
                     [e[6], e[7], e[8]]])


def rotation_matrices(params_list):
    """(B, 3, 3) stack of rotation matrices for a batch of RigidParams."""
    rx = np.array([p.rx for p in params_list])
    ry = np.array([p.ry for p in params_list])
    rz = np.array([p.rz for p in params_list])
    e = _rotation_entries(rx, ry, rz)
    out = np.empty((len(params_list), 3, 3))
    for k in range(3):
        for m in range(3):
            out[:, k, m] = e[3 * k + m]
    return out


def map_slice_point(params, geom, vol, u, v):
    """Map slice pixel coordinates (u, v) to a physical point in mm."""
    w, h = geom.dims
    su, sv = geom.spacing
    qu = u * su - 0.5 * ((w - 1.0) * su)
    qv = v * sv - 0.5 * ((h - 1.0) * sv)
    c = vol.physical_center()
    t = c + params.translation()
    r = rotation_matrix(params)
    # Same operation grouping as the resampling kernels (qz is 0).
    return np.array([r[0, 0] * qu + (r[0, 1] * qv + t[0]),
                     r[1, 0] * qu + (r[1, 1] * qv + t[1]),
                     r[2, 0] * qu + (r[2, 1] * qv + t[2])])


def _batch_args(vol, params_list):
    rots = rotation_matrices(params_list)
    c = vol.physical_center()
    trans = np.empty((len(params_list), 3))
    for b, p in enumerate(params_list):
        trans[b] = c + p.translation()
    return rots, trans


def resample_slice(vol, params, geom):
    """Extract the slice specified by ``params`` with trilinear interpolation.

    Pixels mapping outside the voxel hull get intensity 0 and validity False.
    """
    from .imgcore import ImageGrid2

    w, h = geom.dims
    su, sv = geom.spacing
    nx, ny, nz = vol.dims
    sx, sy, sz = vol.spacing
    rots, trans = _batch_args(vol, [params])
    vals = np.empty((1, h, w))
    valid = np.empty((1, h, w), dtype=np.bool_)
    _kernels.resample_batch(vol.grid, nx, ny, nz, 1.0 / sx, 1.0 / sy, 1.0 / sz,
                            rots, trans, w, h, su, sv, vals, valid)
    return ImageGrid2(geom.dims, geom.spacing, vals.ravel(), valid.ravel())


def resample_slices(vol, params_list, geom):
    """Batch of extractions; returns (values, validity) arrays of shape
    (B, h, w). Used where constructing image objects per slice would cost
    more than the extraction itself."""
    w, h = geom.dims
    su, sv = geom.spacing
    nx, ny, nz = vol.dims
    sx, sy, sz = vol.spacing
    rots, trans = _batch_args(vol, params_list)
    nb = len(params_list)
    vals = np.empty((nb, h, w))
    valid = np.empty((nb, h, w), dtype=np.bool_)
    _kernels.resample_batch(vol.grid, nx, ny, nz, 1.0 / sx, 1.0 / sy, 1.0 / sz,
                            rots, trans, w, h, su, sv, vals, valid)
    return vals, valid


def perturb_params(params, rot_range, trans_range, rng):
    """Offset every parameter by a random magnitude with a random sign.

    Rotation magnitudes are uniform in ``rot_range`` = [lo, hi), translation
    magnitudes in ``trans_range``; signs are independent fair coin flips.
    """
    for lo, hi in (rot_range, trans_range):
        if lo < 0 or hi < lo:
            raise ValueError(f"invalid range [{lo}, {hi})")
    deltas = np.empty(6)
    for k in range(6):
        lo, hi = rot_range if k < 3 else trans_range
        magnitude = rng.uniform(lo, hi)
        sign = 1.0 if rng.integers(0, 2) == 1 else -1.0
        deltas[k] = sign * magnitude
    return params.shifted(deltas)


def param_error(a, b):
    """Componentwise absolute differences (|drx|, |dry|, |drz|, |dtx|, |dty|, |dtz|)."""
    return tuple(float(v) for v in np.abs(a.as_array() - b.as_array()))
