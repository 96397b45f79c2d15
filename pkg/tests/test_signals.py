import numpy as np
import pytest

from decaf.signals import (InputSpec, SignalSpec, TestInput, random_input,
                           sample_channels, segment_interval, value_at)


def at_like_spec():
    return InputSpec(signals=(
        SignalSpec("Throttle", 7, 0.0, 100.0, 50.0),
        SignalSpec("Brake", 3, 0.0, 325.0, 50.0),
    ))


class TestSpecs:
    def test_invariants_enforced(self):
        with pytest.raises(ValueError):
            SignalSpec("x", 0, 0.0, 1.0, 10.0)
        with pytest.raises(ValueError):
            SignalSpec("x", 1, 2.0, 1.0, 10.0)
        with pytest.raises(ValueError):
            SignalSpec("x", 1, 0.0, 1.0, -1.0)
        with pytest.raises(ValueError):
            SignalSpec("x", 1, 0.0, 1.0, 10.0, interpolation="linear")

    def test_input_spec_checks(self):
        with pytest.raises(ValueError):
            InputSpec(signals=(SignalSpec("a", 1, 0, 1, 10),
                               SignalSpec("b", 1, 0, 1, 20)))
        with pytest.raises(ValueError):
            InputSpec(signals=(SignalSpec("a", 1, 0, 1, 10),
                               SignalSpec("a", 1, 0, 1, 10)))

    def test_feature_dimension(self):
        assert at_like_spec().dimension == 10

    def test_feature_names(self):
        names = at_like_spec().feature_names()
        assert names[0] == "Throttle_cp0"
        assert names[7] == "Brake_cp0"
        assert len(names) == 10


class TestSegmentInterval:
    def test_at_throttle_first_segment(self):
        spec = SignalSpec("Throttle", 7, 0.0, 100.0, 50.0)
        lo, hi = segment_interval(spec, 0)
        assert lo == 0.0
        assert round(hi, 2) == 7.14

    def test_at_brake_middle_segment(self):
        spec = SignalSpec("Brake", 3, 0.0, 325.0, 50.0)
        lo, hi = segment_interval(spec, 1)
        assert round(lo, 2) == 16.67
        assert round(hi, 2) == 33.33

    def test_single_point_owns_horizon(self):
        spec = SignalSpec("x", 1, 0.0, 1.0, 42.0)
        assert segment_interval(spec, 0) == (0.0, 42.0)

    def test_out_of_range_index(self):
        spec = SignalSpec("x", 3, 0.0, 1.0, 10.0)
        with pytest.raises(IndexError):
            segment_interval(spec, 3)
        with pytest.raises(IndexError):
            segment_interval(spec, -1)

    def test_segments_partition_horizon(self):
        spec = SignalSpec("x", 7, 0.0, 1.0, 50.0)
        intervals = [segment_interval(spec, j) for j in range(7)]
        assert intervals[0][0] == 0.0
        assert intervals[-1][1] == pytest.approx(50.0)
        for (_, hi), (lo, _) in zip(intervals, intervals[1:]):
            assert hi == lo


class TestValueAt:
    def test_worked_throttle_segment(self):
        spec = at_like_spec()
        inp = TestInput({"Throttle": [54.50, 1, 2, 3, 4, 5, 6],
                         "Brake": [0, 0, 0]}, spec)
        assert value_at(inp, spec, "Throttle", 3.0) == 54.50

    def test_constant_signal(self):
        spec = at_like_spec()
        inp = TestInput({"Throttle": np.full(7, 33.0), "Brake": np.zeros(3)}, spec)
        for t in np.linspace(0, 50, 23):
            assert value_at(inp, spec, "Throttle", t) == 33.0

    def test_matches_index_oracle(self):
        spec = at_like_spec()
        rng = np.random.default_rng(3)
        inp = random_input(spec, rng)
        for t in rng.uniform(0, 50, size=1000):
            j = min(int(t * 7 / 50), 6)
            assert value_at(inp, spec, "Throttle", t) == inp.values["Throttle"][j]

    def test_horizon_endpoint_clamps_to_last_segment(self):
        spec = at_like_spec()
        inp = random_input(spec, np.random.default_rng(0))
        assert value_at(inp, spec, "Throttle", 50.0) == inp.values["Throttle"][6]

    def test_errors(self):
        spec = at_like_spec()
        inp = random_input(spec, np.random.default_rng(0))
        with pytest.raises(KeyError):
            value_at(inp, spec, "nope", 1.0)
        with pytest.raises(ValueError):
            value_at(inp, spec, "Throttle", 50.1)

    def test_sample_channels_matches_value_at(self):
        spec = at_like_spec()
        inp = random_input(spec, np.random.default_rng(5))
        times = np.arange(0, 50.001, 0.25)
        sampled = sample_channels(inp, spec, times)
        for name in ("Throttle", "Brake"):
            expected = [value_at(inp, spec, name, t) for t in times]
            assert np.array_equal(sampled[name], expected)


class TestRandomInput:
    def test_deterministic_under_seed(self):
        spec = at_like_spec()
        a = random_input(spec, np.random.default_rng(17))
        b = random_input(spec, np.random.default_rng(17))
        assert np.array_equal(a.as_vector(), b.as_vector())

    def test_range_containment(self):
        spec = InputSpec(signals=(SignalSpec("u", 1, 0.0, 100.0, 1.0),))
        rng = np.random.default_rng(2)
        xs = np.array([random_input(spec, rng).values["u"][0] for _ in range(10_000)])
        assert xs.min() >= 0.0
        assert xs.max() <= 100.0

    def test_uniform_mean(self):
        # mean of n uniform draws on [0,100]: mu=50, sigma=100/sqrt(12 n)
        spec = InputSpec(signals=(SignalSpec("u", 1, 0.0, 100.0, 1.0),))
        rng = np.random.default_rng(4)
        xs = np.array([random_input(spec, rng).values["u"][0] for _ in range(10_000)])
        sigma = 100.0 / np.sqrt(12 * len(xs))
        assert abs(xs.mean() - 50.0) < 3 * sigma


class TestTestInput:
    def test_range_checked_on_construction(self):
        spec = at_like_spec()
        with pytest.raises(ValueError):
            TestInput({"Throttle": np.full(7, 101.0), "Brake": np.zeros(3)}, spec)

    def test_length_checked(self):
        spec = at_like_spec()
        with pytest.raises(ValueError):
            TestInput({"Throttle": np.zeros(6), "Brake": np.zeros(3)}, spec)

    def test_vector_round_trip(self):
        spec = at_like_spec()
        inp = random_input(spec, np.random.default_rng(9))
        again = TestInput.from_vector(spec, inp.as_vector())
        assert np.array_equal(inp.as_vector(), again.as_vector())
