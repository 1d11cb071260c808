from __future__ import annotations

import numpy as np
import pytest

from firewatch.encodings import (
    ChannelGroupSpec,
    group_channels,
    location_encoding,
    month_encoding,
    timestep_encoding,
    timestep_encoding_table,
)


class TestChannelGroups:
    def test_default_routing(self):
        # 1-based channel labels 1..11 as values
        ir, vis, wv = group_channels(np.arange(1, 12))
        np.testing.assert_array_equal(ir, [1, 2, 3, 4, 5, 6, 7])
        np.testing.assert_array_equal(vis, [8, 9])
        np.testing.assert_array_equal(wv, [10, 11])

    def test_channel_ten_is_water_vapor(self):
        x = np.zeros(11)
        x[9] = 42.0  # channel 10, 1-based
        _, _, wv = group_channels(x)
        assert wv[0] == 42.0

    def test_concat_is_permutation(self):
        x = np.arange(11.0)
        ir, vis, wv = group_channels(x)
        np.testing.assert_array_equal(np.concatenate([ir, vis, wv]), x)

    def test_inverse_permutation_recovers_input(self):
        spec = ChannelGroupSpec(
            infrared=(10, 0, 2, 4, 6, 8, 1), visible=(3, 5), water_vapor=(7, 9)
        )
        rng = np.random.default_rng(0)
        x = rng.normal(size=11)
        ir, vis, wv = group_channels(x, spec)
        flat = np.concatenate([ir, vis, wv])
        np.testing.assert_array_equal(flat[spec.inverse_permutation()], x)

    def test_wrong_length(self):
        with pytest.raises(ValueError):
            group_channels(np.zeros(10))

    def test_groups_must_cover(self):
        with pytest.raises(ValueError):
            ChannelGroupSpec(infrared=(0, 1, 2, 3, 4, 5, 6), visible=(7, 8), water_vapor=(9, 9))


class TestTimestepEncoding:
    def test_t0_is_zeros_and_ones(self):
        for d in (2, 8, 64):
            enc = timestep_encoding(0, d)
            np.testing.assert_array_equal(enc[0::2], np.zeros(d // 2))
            np.testing.assert_array_equal(enc[1::2], np.ones(d // 2))

    def test_bounded(self):
        for t in (0, 1, 17, 95, 10_000):
            assert np.all(np.abs(timestep_encoding(t, 16)) <= 1.0)

    def test_odd_width_rejected(self):
        with pytest.raises(ValueError):
            timestep_encoding(0, 3)

    def test_injective_over_window(self):
        table = timestep_encoding_table(96, 4)
        for i in range(96):
            for j in range(i + 1, 96):
                assert not np.array_equal(table[i], table[j])


class TestMonthEncoding:
    def test_january(self):
        np.testing.assert_allclose(month_encoding(1), [0.0, 1.0], atol=1e-15)

    def test_april_is_quarter_turn(self):
        np.testing.assert_allclose(month_encoding(4), [1.0, 0.0], atol=1e-15)

    def test_out_of_range(self):
        for m in (0, 13):
            with pytest.raises(ValueError):
                month_encoding(m)

    def test_unit_circle_and_distinct(self):
        points = [tuple(month_encoding(m)) for m in range(1, 13)]
        for p in points:
            assert np.hypot(*p) == pytest.approx(1.0)
        assert len(set(points)) == 12


class TestLocationEncoding:
    def test_origin(self):
        np.testing.assert_allclose(location_encoding(0, 0), [1, 0, 0], atol=1e-15)

    def test_north_pole(self):
        np.testing.assert_allclose(location_encoding(90, 123.0), [0, 0, 1], atol=1e-15)

    def test_unit_norm(self):
        rng = np.random.default_rng(1)
        for _ in range(50):
            lat, lon = rng.uniform(-90, 90), rng.uniform(-180, 180)
            assert np.linalg.norm(location_encoding(lat, lon)) == pytest.approx(1.0)

    def test_antipodal_points_negate(self):
        rng = np.random.default_rng(2)
        for _ in range(20):
            lat, lon = rng.uniform(-89, 89), rng.uniform(-179, 1)
            a = location_encoding(lat, lon)
            b = location_encoding(-lat, lon + 180.0)
            np.testing.assert_allclose(a, -b, atol=1e-12)

    def test_out_of_range(self):
        with pytest.raises(ValueError):
            location_encoding(91, 0)
        with pytest.raises(ValueError):
            location_encoding(0, -181)
