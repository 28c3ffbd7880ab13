import numpy as np
import pytest

from slicereg.imgcore import ImageGrid2
from slicereg.matching import PENALTY, mad, sad, ssd


def image(values, validity=None, dims=None):
    values = np.asarray(values, dtype=float)
    if dims is None:
        dims = (values.size, 1)
    return ImageGrid2(dims, (1.0, 1.0), values.ravel(), validity)


def test_ssd_identity():
    a = image([1.0, 2.0, 3.0])
    stats = ssd(a, a)
    assert stats.cost == 0.0
    assert stats.valid_fraction == 1.0
    assert stats.pixel_count == 3


def test_ssd_hand_computed():
    a = image([1.0, 2.0])
    b = image([3.0, 5.0])
    assert ssd(a, b).cost == 13.0


def test_sad_hand_computed():
    a = image([1.0, 2.0])
    b = image([3.0, 5.0])
    assert sad(a, b).cost == 5.0


def test_dimension_mismatch():
    with pytest.raises(ValueError):
        ssd(image([1.0, 2.0]), image([1.0, 2.0, 3.0]))
    with pytest.raises(ValueError):
        mad(image([1.0, 2.0]), image([1.0, 2.0, 3.0]))


def test_penalty_when_overlap_too_small():
    a = image([1.0, 2.0, 3.0, 4.0])
    b = image([0.0, 0.0, 0.0, 0.0], validity=np.zeros(4, dtype=bool))
    stats = ssd(a, b)
    assert stats.cost == PENALTY
    assert stats.valid_fraction == 0.0
    assert sad(a, b).cost == PENALTY


def test_no_penalty_at_quarter_overlap():
    a = image([1.0, 2.0, 3.0, 4.0])
    b = image([1.0, 0.0, 0.0, 0.0],
              validity=np.array([True, False, False, False]))
    # exactly 25% joint validity stays un-penalized
    stats = ssd(a, b)
    assert stats.cost == 2.0 ** 2 + 3.0 ** 2 + 4.0 ** 2
    assert stats.valid_fraction == 0.25


def test_symmetry_random():
    rng = np.random.default_rng(0)
    for _ in range(10):
        data_a = rng.random(12)
        data_b = rng.random(12)
        valid_a = rng.random(12) > 0.2
        valid_b = rng.random(12) > 0.2
        data_a[~valid_a] = 0.0
        data_b[~valid_b] = 0.0
        a = image(data_a, valid_a, dims=(4, 3))
        b = image(data_b, valid_b, dims=(4, 3))
        assert ssd(a, b).cost == ssd(b, a).cost
        assert sad(a, b).cost == sad(b, a).cost
        if (valid_a & valid_b).any():
            assert mad(a, b) == mad(b, a)


def test_sad_homogeneity():
    rng = np.random.default_rng(1)
    a_vals = rng.random(9)
    b_vals = rng.random(9)
    a, b = image(a_vals, dims=(3, 3)), image(b_vals, dims=(3, 3))
    a2, b2 = image(2 * a_vals, dims=(3, 3)), image(2 * b_vals, dims=(3, 3))
    np.testing.assert_allclose(sad(a2, b2).cost, 2 * sad(a, b).cost, rtol=1e-12)


def test_mad_hand_computed():
    assert mad(image([1.0, 2.0]), image([3.0, 5.0])) == 2.5


def test_mad_masked_mean():
    a = image([1.0, 0.0], validity=np.array([True, False]))
    b = image([5.0, 7.0])
    assert mad(a, b) == 4.0


def test_mad_requires_joint_validity():
    a = image([0.0, 0.0], validity=np.zeros(2, dtype=bool))
    b = image([1.0, 1.0])
    with pytest.raises(ValueError):
        mad(a, b)


def test_mad_constant_offset():
    rng = np.random.default_rng(2)
    vals = rng.random(16)
    a = image(vals, dims=(4, 4))
    b = image(vals + 3.25, dims=(4, 4))
    np.testing.assert_allclose(mad(a, b), 3.25, rtol=1e-12)
