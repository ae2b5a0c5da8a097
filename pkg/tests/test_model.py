import math

import numpy as np
import pytest

from netcast.errors import InvalidArgument, ModelFormatError
from netcast.model import (
    REFERENCE_DIMS,
    Dataset,
    Layer,
    Model,
    chunk_columns,
    chunked_matvec,
    forward_digital,
    load_model,
    matvec_reference,
    predict_digital,
    read_idx,
    reference_model_path,
    save_model,
)


def triple_loop(w, x):
    out = []
    for r in range(len(w)):
        acc = 0.0
        for c in range(len(x)):
            acc += w[r][c] * x[c]
        out.append(acc)
    return np.array(out)


def test_chunk_columns_examples():
    assert chunk_columns(784, 16).steps == 49
    assert chunk_columns(100, 100).steps == 1
    plan = chunk_columns(13, 5)
    assert plan.chunks == ((0, 5), (5, 10), (10, 13))
    assert plan.widths() == [5, 5, 3]


@pytest.mark.parametrize("b,d", [(0, 1), (1, 0), (-3, 2)])
def test_chunk_columns_rejects_empty(b, d):
    with pytest.raises(InvalidArgument):
        chunk_columns(b, d)


def test_chunked_matvec_matches_direct(rng):
    w = rng.normal(size=(8, 13))
    x = rng.normal(size=13)
    got = chunked_matvec(w, x, chunk_columns(13, 5))
    assert np.allclose(got, w @ x, rtol=1e-12, atol=0)


def test_matvec_reference_examples(rng):
    x = rng.normal(size=7)
    assert np.array_equal(matvec_reference(np.eye(7), x), x)
    assert np.array_equal(matvec_reference(np.zeros((3, 7)), x), np.zeros(3))
    w = rng.normal(size=(10, 10))
    x = rng.normal(size=10)
    assert np.allclose(matvec_reference(w, x), triple_loop(w.tolist(), x.tolist()), rtol=1e-12)
    with pytest.raises(InvalidArgument):
        matvec_reference(w, np.ones(9))


def test_reference_model_shape_and_baseline(reference_model):
    assert reference_model.dims == REFERENCE_DIMS
    assert [l.activation for l in reference_model.layers] == ["relu", "relu", "identity"]
    assert reference_model.baseline_accuracy >= 0.975


def test_reference_baseline_recorded(reference_model, mnist_1000):
    acc = float(np.mean(predict_digital(reference_model, mnist_1000.images) == mnist_1000.labels))
    assert acc == pytest.approx(reference_model.metadata["baseline_accuracy_first_1000"], abs=1e-12)


def test_save_load_round_trip_bit_exact(tmp_path, reference_model):
    path = tmp_path / "m.txt"
    save_model(reference_model, path)
    again = load_model(path)
    for a, b in zip(reference_model.layers, again.layers):
        assert a.weights.tobytes() == b.weights.tobytes()
        assert a.bias.tobytes() == b.bias.tobytes()
        assert a.input_scale == b.input_scale
    assert again.metadata == reference_model.metadata


def test_truncated_model_names_missing_layer(tmp_path):
    text = reference_model_path().read_text().splitlines()
    cut = next(i for i, line in enumerate(text) if line.startswith("layer 2"))
    path = tmp_path / "cut.txt"
    path.write_text("\n".join(text[:cut]) + "\n")
    with pytest.raises(ModelFormatError, match="layer 2"):
        load_model(path)


def test_bad_model_header(tmp_path):
    path = tmp_path / "bad.txt"
    path.write_text("hello\n")
    with pytest.raises(ModelFormatError, match=":1"):
        load_model(path)


def test_layer_chain_checked():
    a = Layer(np.ones((3, 4)), np.zeros(3))
    b = Layer(np.ones((2, 5)), np.zeros(2))
    with pytest.raises(ModelFormatError, match="layer 1"):
        Model((a, b))
    with pytest.raises(ModelFormatError):
        Layer(np.array([[np.inf]]), np.zeros(1))


def test_dataset_invariants():
    with pytest.raises(InvalidArgument):
        Dataset(np.zeros((2, 4)), np.zeros(3))
    with pytest.raises(InvalidArgument):
        Dataset(np.full((1, 4), 1.5), np.zeros(1))


def test_dataset_pixels_in_unit_range(mnist_1000):
    assert mnist_1000.images.shape == (1000, 784)
    assert mnist_1000.images.min() >= 0 and mnist_1000.images.max() <= 1
    # bytes divided by 255: every pixel is k/255
    k = mnist_1000.images[:5] * 255
    assert np.allclose(k, np.round(k), atol=1e-9)


def test_read_idx_roundtrip(tmp_path):
    arr = np.arange(24, dtype=np.uint8).reshape(2, 3, 4)
    header = bytes([0, 0, 0x08, 3]) + b"".join(int(n).to_bytes(4, "big") for n in arr.shape)
    path = tmp_path / "x.idx"
    path.write_bytes(header + arr.tobytes())
    assert np.array_equal(read_idx(path), arr)


def test_zero_images_predict_bias_chain(reference_model):
    x = np.zeros((1, 784))
    h = np.zeros(0)
    z = None
    for layer in reference_model.layers:
        z = layer.bias.copy() if z is None else layer.weights @ h + layer.bias
        h = np.maximum(z, 0) if layer.activation == "relu" else z
    assert predict_digital(reference_model, x)[0] == int(np.argmax(h))
    assert math.isfinite(float(forward_digital(reference_model, x).sum()))
