import math

import numpy as np
import pytest

from slicereg.imgcore import Volume3
from slicereg.rigid import RigidParams, SliceGeometry, map_slice_point, \
    param_error, perturb_params, resample_slice, rotation_matrix


def axis_matrices(rx, ry, rz):
    # independent composition oracle: explicit axis matrices multiplied out
    cx, sx = math.cos(rx), math.sin(rx)
    cy, sy = math.cos(ry), math.sin(ry)
    cz, sz = math.cos(rz), math.sin(rz)
    mx = np.array([[1, 0, 0], [0, cx, -sx], [0, sx, cx]])
    my = np.array([[cy, 0, sy], [0, 1, 0], [-sy, 0, cy]])
    mz = np.array([[cz, -sz, 0], [sz, cz, 0], [0, 0, 1]])
    return mz @ my @ mx


def test_rotation_identity():
    np.testing.assert_array_equal(rotation_matrix(RigidParams()), np.eye(3))


def test_rotation_quarter_turn_z():
    r = rotation_matrix(RigidParams(rz=math.pi / 2))
    np.testing.assert_allclose(r @ [1.0, 0.0, 0.0], [0.0, 1.0, 0.0], atol=1e-12)


def test_rotation_orthonormal_and_oracle():
    rng = np.random.default_rng(0)
    for _ in range(50):
        angles = rng.uniform(-math.pi, math.pi, 3)
        r = rotation_matrix(RigidParams(*angles))
        assert np.max(np.abs(r @ r.T - np.eye(3))) < 1e-10
        assert abs(np.linalg.det(r) - 1.0) < 1e-10
        np.testing.assert_allclose(r, axis_matrices(*angles), atol=1e-12)


def test_params_finite():
    with pytest.raises(ValueError):
        RigidParams(rx=math.nan)


def make_volume(dims=(9, 7, 5), spacing=(1.0, 1.0, 2.0), fill=0.0):
    nx, ny, nz = dims
    return Volume3(dims, spacing, np.full(nx * ny * nz, fill))


def test_map_center_pixel_hits_volume_center():
    vol = make_volume()
    geom = SliceGeometry((9, 7), (1.0, 1.0))
    p = map_slice_point(RigidParams(), geom, vol, (9 - 1) / 2, (7 - 1) / 2)
    np.testing.assert_allclose(p, vol.physical_center(), atol=0)


def test_map_pure_translation_is_a_shift():
    vol = make_volume()
    geom = SliceGeometry((9, 7), (1.0, 1.0))
    for u, v in [(0, 0), (3.5, 2.25), (8, 6)]:
        base = map_slice_point(RigidParams(), geom, vol, u, v)
        moved = map_slice_point(RigidParams(tz=8.0), geom, vol, u, v)
        np.testing.assert_allclose(moved - base, [0.0, 0.0, 8.0], atol=1e-12)


def test_map_rotation_matches_matrix_oracle():
    vol = make_volume(dims=(8, 8, 8), spacing=(1.0, 1.0, 1.0))
    geom = SliceGeometry((8, 8), (1.0, 1.0))
    params = RigidParams(rx=math.pi / 2, tx=1.0, ty=-2.0, tz=0.5)
    r = axis_matrices(math.pi / 2, 0.0, 0.0)
    c = vol.physical_center()
    t = np.array([1.0, -2.0, 0.5])
    for u, v in [(0, 0), (2, 5), (7, 7), (3.25, 1.5)]:
        q = np.array([u - 3.5, v - 3.5, 0.0])
        np.testing.assert_allclose(
            map_slice_point(params, geom, vol, u, v), r @ q + c + t, atol=1e-12)


def test_resample_identity_reproduces_central_plane():
    rng = np.random.default_rng(1)
    nx, ny, nz = 12, 10, 5
    data = rng.random(nx * ny * nz)
    vol = Volume3((nx, ny, nz), (1.25, 1.25, 8.0), data)
    out = resample_slice(vol, RigidParams(), SliceGeometry((nx, ny), (1.25, 1.25)))
    assert out.validity.all()
    np.testing.assert_array_equal(out.grid, vol.grid[(nz - 1) // 2])


def affine_volume(dims, spacing):
    nx, ny, nz = dims
    sx, sy, sz = spacing
    z, y, x = np.meshgrid(np.arange(nz) * sz, np.arange(ny) * sy,
                          np.arange(nx) * sx, indexing="ij")
    data = 2.0 + 0.5 * x - 0.25 * y + 1.0 * z
    return Volume3(dims, spacing, data.ravel())


def test_resample_exact_on_affine_field():
    vol = affine_volume((14, 12, 7), (1.1, 0.9, 2.5))
    geom = SliceGeometry((10, 8), (1.3, 1.7))
    rng = np.random.default_rng(2)
    for _ in range(5):
        params = RigidParams(*rng.uniform(-0.5, 0.5, 3), *rng.uniform(-4, 4, 3))
        out = resample_slice(vol, params, geom)
        vg = out.validity_grid
        for v in range(8):
            for u in range(10):
                if not vg[v, u]:
                    continue
                p = map_slice_point(params, geom, vol, u, v)
                expected = 2.0 + 0.5 * p[0] - 0.25 * p[1] + 1.0 * p[2]
                assert abs(out.grid[v, u] - expected) < 1e-9


def test_resample_far_outside_all_invalid():
    vol = make_volume(fill=3.0)
    nz, sz = vol.dims[2], vol.spacing[2]
    geom = SliceGeometry((9, 7), (1.0, 1.0))
    out = resample_slice(vol, RigidParams(tz=10.0 * (nz - 1) * sz), geom)
    assert not out.validity.any()
    assert np.all(out.data == 0.0)


def test_resample_spacing_rescale_metamorphic():
    # doubling every spacing while halving the translation lands on the same
    # continuous voxel coordinates (pure-translation case)
    rng = np.random.default_rng(3)
    data = rng.random(12 * 10 * 5)
    volA = Volume3((12, 10, 5), (2.0, 2.5, 4.0), data)
    volB = Volume3((12, 10, 5), (1.0, 1.25, 2.0), data)
    geomA = SliceGeometry((6, 5), (2.0, 2.5))
    geomB = SliceGeometry((6, 5), (1.0, 1.25))
    t = np.array([3.0, -2.0, 1.5])
    outA = resample_slice(volA, RigidParams(tx=t[0], ty=t[1], tz=t[2]), geomA)
    outB = resample_slice(volB, RigidParams(tx=t[0] / 2, ty=t[1] / 2, tz=t[2] / 2), geomB)
    np.testing.assert_array_equal(outA.validity, outB.validity)
    np.testing.assert_allclose(outA.data, outB.data, atol=1e-12)


def test_perturb_degenerate_range():
    p = RigidParams(0.1, 0.2, 0.3, 1.0, 2.0, 3.0)
    out = perturb_params(p, (0.0, 0.0), (0.0, 0.0), np.random.default_rng(0))
    assert out == p


def test_perturb_magnitudes_within_bucket():
    p = RigidParams()
    rng = np.random.default_rng(4)
    for _ in range(1000):
        out = perturb_params(p, (0.1, 0.2), (5.0, 12.0), rng)
        d = np.abs(out.as_array())
        assert np.all(d[:3] >= 0.1) and np.all(d[:3] < 0.2)
        assert np.all(d[3:] >= 5.0) and np.all(d[3:] < 12.0)


def test_perturb_deterministic():
    p = RigidParams()
    a = perturb_params(p, (0.1, 0.2), (5.0, 12.0), np.random.default_rng(7))
    b = perturb_params(p, (0.1, 0.2), (5.0, 12.0), np.random.default_rng(7))
    assert a == b


def test_perturb_invalid_range():
    with pytest.raises(ValueError):
        perturb_params(RigidParams(), (0.2, 0.1), (0.0, 1.0), np.random.default_rng(0))
    with pytest.raises(ValueError):
        perturb_params(RigidParams(), (-0.1, 0.1), (0.0, 1.0), np.random.default_rng(0))


def test_param_error_examples():
    a = RigidParams(0.1, 0.0, 0.0, 5.0, 0.0, 0.0)
    b = RigidParams()
    assert param_error(a, a) == (0.0,) * 6
    assert param_error(a, b) == (0.1, 0.0, 0.0, 5.0, 0.0, 0.0)


def test_param_error_symmetric():
    rng = np.random.default_rng(5)
    for _ in range(20):
        a = RigidParams(*rng.normal(size=6))
        b = RigidParams(*rng.normal(size=6))
        assert param_error(a, b) == param_error(b, a)
