import numpy as np
import pytest

from ctlpinn.autodiff import mlp_forward_jet
from ctlpinn.errors import CheckpointError, ConfigurationError
from ctlpinn.network import (
    MlpSpec,
    forward,
    init_params,
    layer_slices,
    load_checkpoint,
    param_length,
    save_checkpoint,
)


def test_spec_validation():
    with pytest.raises(ConfigurationError):
        MlpSpec((1, 1))  # no hidden layer
    with pytest.raises(ConfigurationError):
        MlpSpec((1, 0, 1))
    with pytest.raises(ConfigurationError):
        MlpSpec((1, 4, 1), activation="relu")


def test_init_deterministic():
    spec = MlpSpec((1, 4, 1), seed=7)
    a = init_params(spec)
    b = init_params(spec)
    assert a.tobytes() == b.tobytes()
    assert init_params(MlpSpec((1, 4, 1), seed=8)).tobytes() != a.tobytes()


def test_init_bounds_and_zero_biases():
    spec = MlpSpec((3, 10, 10, 2), seed=1)
    params = init_params(spec)
    for w, b, fan_in, fan_out in layer_slices(spec):
        bound = np.sqrt(6.0 / (fan_in + fan_out))
        assert np.all(np.abs(params[w]) <= bound)
        assert np.all(params[b] == 0.0)


def test_init_distribution():
    # many draws: max stays under the bound, mean within 3 sigma of zero
    spec = MlpSpec((50, 100, 50), seed=42)
    params = init_params(spec)
    weights = np.concatenate([params[w] for w, _, _, _ in layer_slices(spec)])
    assert weights.size >= 10_000
    bound = np.sqrt(6.0 / 150)
    assert np.max(np.abs(weights)) <= bound
    sigma = bound / np.sqrt(3.0)
    assert abs(weights.mean()) < 3.0 * sigma / np.sqrt(weights.size)


def test_param_length_formula():
    # 15 hidden layers of 40, inputs 3, output 1
    widths = (3,) + (40,) * 15 + (1,)
    spec = MlpSpec(widths, seed=0)
    expected = (3 * 40 + 40) + 14 * (40 * 40 + 40) + (40 * 1 + 1)
    assert param_length(spec) == expected


def test_forward_zero_params():
    spec = MlpSpec((2, 5, 5, 1), seed=0)
    out = forward(np.zeros(param_length(spec)), spec, [0.7, -0.2])
    assert out.tolist() == [0.0]


def test_forward_single_neuron_value():
    spec = MlpSpec((1, 1, 1), seed=0)
    params = np.array([1.0, 0.0, 1.0, 0.0])
    out = forward(params, spec, [0.5])
    assert abs(out[0] - 0.46211715726000974) < 1e-15


def test_forward_matches_jet_value_bitwise(rng):
    spec = MlpSpec((3, 6, 6, 2), seed=11)
    params = init_params(spec)
    pts = rng.uniform(-1.5, 1.5, size=(100, 3))
    vals = forward(params, spec, pts)
    for i in range(0, 100, 17):
        jets = mlp_forward_jet(params, spec, pts[i], 2)
        for j, jet in enumerate(jets):
            assert vals[i, j] == jet.value


def test_forward_dim_mismatch():
    spec = MlpSpec((2, 4, 1), seed=0)
    with pytest.raises(ConfigurationError):
        forward(init_params(spec), spec, [1.0, 2.0, 3.0])


def test_sine_activation_runs():
    spec = MlpSpec((1, 4, 1), activation="sin", seed=0)
    out = forward(init_params(spec), spec, [0.3])
    assert np.isfinite(out).all()


def test_checkpoint_roundtrip(tmp_path):
    spec = MlpSpec((2, 8, 8, 1), seed=5)
    params = init_params(spec)
    path = tmp_path / "model.ckpt"
    save_checkpoint(params, spec, path)
    loaded, spec2, extras = load_checkpoint(path)
    assert loaded.tobytes() == params.tobytes()
    assert spec2 == spec
    assert extras == 0


def test_checkpoint_extras_roundtrip(tmp_path):
    spec = MlpSpec((2, 4, 2), seed=5)
    params = np.concatenate([init_params(spec), [0.0321]])
    path = tmp_path / "model.ckpt"
    save_checkpoint(params, spec, path, extras=1)
    loaded, _, extras = load_checkpoint(path)
    assert extras == 1
    assert loaded[-1] == 0.0321


def test_checkpoint_truncated(tmp_path):
    spec = MlpSpec((1, 3, 1), seed=0)
    path = tmp_path / "model.ckpt"
    save_checkpoint(init_params(spec), spec, path)
    blob = path.read_bytes()
    path.write_bytes(blob[:-5])
    with pytest.raises(CheckpointError):
        load_checkpoint(path)


def test_checkpoint_bad_magic(tmp_path):
    path = tmp_path / "junk.ckpt"
    path.write_bytes(b"NOTMAGIC" + b"\x00" * 32)
    with pytest.raises(CheckpointError):
        load_checkpoint(path)


def test_checkpoint_wrong_length_vector(tmp_path):
    spec = MlpSpec((1, 3, 1), seed=0)
    with pytest.raises(ConfigurationError):
        save_checkpoint(np.zeros(3), spec, tmp_path / "x.ckpt")
