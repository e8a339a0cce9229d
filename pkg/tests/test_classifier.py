import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

import oracles
import synth
from mfed import classifier as C
from mfed.errors import FormatError, InsufficientData, ShapeError
from mfed.signal_core import GestureWindow, Label, Poi


def small_weights(seed=0, n=10):
    return C.init_weights(n, 25.0, np.random.default_rng(seed))


class TestLabelPoi:
    def test_within_positive_band(self):
        assert C.label_poi(101.5, [100.0]) is Label.POSITIVE

    def test_ambiguous_band(self):
        assert C.label_poi(103.0, [100.0]) is Label.AMBIGUOUS

    def test_beyond_bands(self):
        assert C.label_poi(105.0, [100.0]) is Label.NEGATIVE

    def test_empty_annotations(self):
        assert C.label_poi(50.0, []) is Label.NEGATIVE

    @pytest.mark.parametrize(
        "d,expected",
        [
            (2.0, Label.POSITIVE),
            (2.0001, Label.AMBIGUOUS),
            (4.0, Label.AMBIGUOUS),
            (4.0001, Label.NEGATIVE),
        ],
    )
    def test_boundaries(self, d, expected):
        assert C.label_poi(100.0 + d, [100.0]) is expected
        assert C.label_poi(100.0 - d, [100.0]) is expected

    @given(
        st.floats(0, 1000),
        st.lists(st.floats(0, 1000), min_size=0, max_size=20).map(sorted),
    )
    @settings(max_examples=300, deadline=None)
    def test_matches_nearest_distance_oracle(self, poi_t, annotations):
        assert C.label_poi(poi_t, annotations).value == oracles.label_oracle(poi_t, annotations)


class TestConv:
    def test_zero_input_gives_biases(self):
        rng = np.random.default_rng(0)
        w = rng.normal(size=(2, 2, 1, 4))
        b = rng.normal(size=4)
        out = C.conv2d_valid(np.zeros((5, 3, 1)), w, b)
        assert np.allclose(out, np.broadcast_to(b, (4, 2, 4)))

    def test_matches_bruteforce(self):
        rng = np.random.default_rng(1)
        x = rng.normal(size=(4, 3, 1))
        w = rng.normal(size=(2, 2, 1, 1))
        b = rng.normal(size=1)
        assert np.allclose(C.conv2d_valid(x, w, b), oracles.conv2d_oracle(x, w, b), atol=1e-9)

    def test_output_shape_at_full_width(self):
        rng = np.random.default_rng(2)
        x = rng.normal(size=(150, 3, 1))
        w = rng.normal(size=(2, 2, 1, 32))
        assert C.conv2d_valid(x, w, np.zeros(32)).shape == (149, 2, 32)

    def test_channel_mismatch(self):
        with pytest.raises(ShapeError):
            C.conv2d_valid(np.zeros((5, 3, 2)), np.zeros((2, 2, 1, 4)), np.zeros(4))


class TestForward:
    def test_zero_weights_give_half(self):
        w = small_weights()
        for arr in w.tensors().values():
            arr[...] = 0.0
        x = np.random.default_rng(0).normal(size=(10, 3))
        assert C.forward(w, x) == 0.5

    def test_matches_oracle(self):
        rng = np.random.default_rng(3)
        for seed in range(10):
            w = small_weights(seed, n=int(rng.integers(7, 14)))
            x = rng.normal(size=(w.n, 3))
            assert C.forward(w, x) == pytest.approx(oracles.forward_oracle(w, x), abs=1e-6)

    def test_shape_trace_for_150(self):
        assert C.stage_shapes(150) == [
            (150, 3, 1),
            (149, 2, 32),
            (74, 2, 32),
            (73, 1, 64),
            (36, 1, 64),
            (2304,),
            (100,),
            (100,),
            (1,),
        ]

    def test_flatten_dim_matches_actual(self):
        rng = np.random.default_rng(4)
        for n in (7, 8, 9, 13, 20, 33, 150):
            w = C.init_weights(n, 25.0, rng)
            p, cache = C._forward_cached(w, rng.normal(size=(n, 3)))
            assert cache["flat"].shape == (C.flatten_dim(n),)
            assert 0.0 < p < 1.0

    def test_row_count_mismatch(self):
        w = small_weights()
        with pytest.raises(ShapeError):
            C.forward(w, np.zeros((12, 3)))

    def test_too_short_window_rejected(self):
        with pytest.raises(ShapeError):
            C.flatten_dim(6)


class TestClassify:
    def test_above_threshold(self):
        w = small_weights()
        x = np.random.default_rng(5).normal(size=(10, 3))
        p = C.forward(w, x)
        assert C.classify(w, x, threshold=p - 0.01)

    def test_threshold_is_inclusive(self):
        w = small_weights()
        x = np.random.default_rng(6).normal(size=(10, 3))
        p = C.forward(w, x)
        assert C.classify(w, x, threshold=p)

    def test_high_threshold(self):
        w = small_weights()
        x = np.random.default_rng(7).normal(size=(10, 3))
        assert not C.classify(w, x, threshold=0.999999)


def _labeled(rng, count, n=16):
    data = []
    for i in range(count):
        positive = i % 2 == 0
        x = synth.synthetic_window(rng, positive, n=n)
        poi = Poi(index=0, t=float(i), ax_value=-4.0, variance_sum=2.0)
        data.append(
            C.LabeledWindow(
                GestureWindow(poi, x), Label.POSITIVE if positive else Label.NEGATIVE, source=f"p{i % 3}"
            )
        )
    return data


class TestTrain:
    def test_deterministic_given_seed(self):
        rng = np.random.default_rng(8)
        data = _labeled(rng, 12)
        cfg = C.TrainConfig(epochs=2, seed=11)
        w1 = C.train(data, cfg)
        w2 = C.train(data, cfg)
        for k, v in w1.tensors().items():
            assert np.array_equal(v, w2.tensors()[k]), k

    def test_requires_both_classes(self):
        rng = np.random.default_rng(9)
        data = [
            C.LabeledWindow(d.window, Label.AMBIGUOUS, d.source) for d in _labeled(rng, 6)
        ]
        with pytest.raises(InsufficientData):
            C.train(data, C.TrainConfig(epochs=1))

    def test_learns_separable_data(self):
        rng = np.random.default_rng(10)
        data = _labeled(rng, 60)
        w = C.train(data, C.TrainConfig(epochs=25, seed=1))
        assert C.training_accuracy(w, data) >= 0.9

    def test_gradients_match_finite_differences(self):
        rng = np.random.default_rng(11)
        w = small_weights(12, n=8)
        x = rng.normal(size=(8, 3))
        y = 1.0
        _, grads = C.loss_and_grads(w, x, y)
        eps = 1e-4
        pick = np.random.default_rng(13)
        for name, arr in w.tensors().items():
            flat = arr.reshape(-1)
            for i in pick.choice(flat.size, size=min(8, flat.size), replace=False):
                orig = flat[i]
                flat[i] = orig + eps
                lp, _ = C.loss_and_grads(w, x, y)
                flat[i] = orig - eps
                lm, _ = C.loss_and_grads(w, x, y)
                flat[i] = orig
                num = (lp - lm) / (2 * eps)
                ana = grads[name].reshape(-1)[i]
                assert abs(num - ana) / max(1e-8, abs(num) + abs(ana)) < 1e-4, name


class TestWeightsFile:
    def test_round_trip(self, tmp_path):
        w = small_weights(1)
        path = tmp_path / "w.json"
        C.save_weights(w, str(path))
        loaded = C.load_weights(str(path))
        assert loaded.n == w.n and loaded.rate == w.rate
        for k, v in w.tensors().items():
            assert np.array_equal(v, loaded.tensors()[k]), k

    def test_filter_count_mismatch(self, tmp_path):
        import json

        w = small_weights(2)
        path = tmp_path / "w.json"
        C.save_weights(w, str(path))
        doc = json.loads(path.read_text())
        doc["conv1"]["filters"] = [[[row[:16] for row in plane] for plane in blk] for blk in doc["conv1"]["filters"]]
        doc["conv1"]["biases"] = doc["conv1"]["biases"][:16]
        path.write_text(json.dumps(doc))
        with pytest.raises(FormatError, match="conv1"):
            C.load_weights(str(path))

    def test_unsupported_version(self, tmp_path):
        import json

        w = small_weights(3)
        path = tmp_path / "w.json"
        C.save_weights(w, str(path))
        doc = json.loads(path.read_text())
        doc["version"] = 99
        path.write_text(json.dumps(doc))
        with pytest.raises(FormatError, match="99"):
            C.load_weights(str(path))
