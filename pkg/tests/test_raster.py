import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from fringekit import (
    DimensionMismatchError,
    Mask,
    PhaseMap,
    ScalarImage,
    image_map_binary,
    wrap_to_principal,
)


class TestScalarImage:
    def test_dimensions(self):
        img = ScalarImage(np.zeros((3, 5)))
        assert img.height == 3 and img.width == 5

    def test_rejects_non_2d(self):
        with pytest.raises(ValueError):
            ScalarImage(np.zeros(4))
        with pytest.raises(ValueError):
            ScalarImage(np.zeros((2, 2, 2)))

    def test_rejects_empty(self):
        with pytest.raises(ValueError):
            ScalarImage(np.zeros((0, 3)))

    def test_immutable(self):
        img = ScalarImage(np.zeros((2, 2)))
        with pytest.raises(ValueError):
            img.data[0, 0] = 1.0

    def test_float32_preserved(self):
        img = ScalarImage(np.zeros((2, 2), dtype=np.float32))
        assert img.data.dtype == np.float32

    def test_source_array_detached(self):
        src = np.zeros((2, 2))
        img = ScalarImage(src)
        src[0, 0] = 7.0
        assert img.data[0, 0] == 0.0


class TestWrapToPrincipal:
    def test_identity_at_zero(self):
        assert wrap_to_principal(0.0) == 0.0

    def test_three_pi(self):
        # periodicity: atan2 lands on +pi for 3*pi (float residue keeps the sign)
        assert wrap_to_principal(3 * np.pi) == pytest.approx(np.pi, abs=1e-12)

    def test_eight(self):
        # direct evaluation oracle: atan2(sin 8, cos 8) == 8 - 2*pi
        oracle = math.atan2(math.sin(8.0), math.cos(8.0))
        assert oracle == pytest.approx(8.0 - 2 * np.pi, abs=1e-12)
        assert wrap_to_principal(8.0) == oracle

    def test_non_finite_rejected(self):
        with pytest.raises(ValueError):
            wrap_to_principal(np.nan)
        with pytest.raises(ValueError):
            wrap_to_principal(np.inf)

    def test_range(self, rng):
        theta = rng.uniform(-1e4, 1e4, size=10_000)
        w = wrap_to_principal(theta)
        assert np.all((w > -np.pi) & (w <= np.pi))

    @given(st.floats(min_value=-1e6, max_value=1e6, allow_nan=False))
    @settings(max_examples=300)
    def test_idempotent_exactly(self, x):
        once = wrap_to_principal(x)
        assert wrap_to_principal(once) == once

    def test_periodicity_within_1e12(self, rng):
        # wrap(x + 2*pi*k) == wrap(x) within 1e-12 rad for |k| <= 1000; the
        # shifted input is built in extended precision so only the final
        # float64 rounding (half an ulp) eats into the budget.
        import mpmath

        mpmath.mp.dps = 40
        two_pi = 2 * mpmath.pi
        xs = rng.uniform(-np.pi + 1e-9, np.pi, size=200)
        ks = np.concatenate(
            [np.array([-1000, -999, -512, -1, 1, 512, 999, 1000]),
             rng.integers(-1000, 1001, size=50)]
        )
        for x in xs[:20]:
            base = wrap_to_principal(float(x))
            for k in ks:
                shifted = float(mpmath.mpf(float(x)) + int(k) * two_pi)
                assert wrap_to_principal(shifted) == pytest.approx(base, abs=1e-12)


class TestPhaseMap:
    def test_wrapped_range_enforced(self):
        with pytest.raises(ValueError):
            PhaseMap(ScalarImage(np.full((2, 2), 4.0)), wrapped=True)

    def test_nan_allowed_when_masked(self):
        data = np.array([[0.1, np.nan]])
        pm = PhaseMap(ScalarImage(data), wrapped=True)
        assert np.isnan(pm.image.data[0, 1])

    def test_unwrapped_unrestricted(self):
        PhaseMap(ScalarImage(np.full((2, 2), 600.0)), wrapped=False)


class TestImageMapBinary:
    def test_subtract_self_is_zero(self):
        a = ScalarImage(np.arange(6, dtype=float).reshape(2, 3))
        out = image_map_binary(a, a, np.subtract)
        assert np.array_equal(out.data, np.zeros((2, 3)))

    def test_add_ones(self):
        ones = ScalarImage(np.ones((2, 2)))
        out = image_map_binary(ones, ones, np.add)
        assert np.array_equal(out.data, np.full((2, 2), 2.0))

    def test_dimension_mismatch(self):
        a = ScalarImage(np.zeros((3, 3)))
        b = ScalarImage(np.zeros((2, 2)))
        with pytest.raises(DimensionMismatchError):
            image_map_binary(a, b, np.add)

    def test_nan_stays_local(self):
        # masked-pixel NaN must not leak into other pixels
        a = np.ones((2, 2))
        a[0, 0] = np.nan
        out = image_map_binary(ScalarImage(a), ScalarImage(np.ones((2, 2))), np.add)
        assert np.isnan(out.data[0, 0])
        assert np.all(np.isfinite(np.delete(out.data.ravel(), 0)))


class TestMask:
    def test_and(self):
        m1 = Mask(np.array([[True, True], [False, True]]))
        m2 = Mask(np.array([[True, False], [False, True]]))
        assert np.array_equal((m1 & m2).valid, [[True, False], [False, True]])

    def test_and_dimension_mismatch(self):
        with pytest.raises(DimensionMismatchError):
            Mask(np.ones((2, 2), bool)) & Mask(np.ones((3, 3), bool))
