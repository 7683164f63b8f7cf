import numpy as np
import pytest

from weedout.checkpoint import load_checkpoint, save_checkpoint
from weedout.errors import ChecksumError, FormatError
from weedout.network import init_network
from weedout.sparsity import sample_structured


def test_network_round_trip_bit_exact(tmp_path, small_conv_spec):
    net = init_network(small_conv_spec, (10, 10, 1), seed=123)
    path = tmp_path / "net.npz"
    save_checkpoint(path, net)
    loaded, mask = load_checkpoint(path)
    assert mask is None
    assert loaded.init_seed == net.init_seed
    assert loaded.input_shape == net.input_shape
    assert loaded.spec == net.spec
    for a, b in zip(loaded.params, net.params):
        if a is None:
            assert b is None
            continue
        np.testing.assert_array_equal(a.weight, b.weight)
        np.testing.assert_array_equal(a.bias, b.bias)


def test_embedded_mask_round_trip(tmp_path, small_dense_spec, rng):
    net = init_network(small_dense_spec, (5,), seed=9)
    mask = sample_structured(small_dense_spec, 0.4, rng)
    path = tmp_path / "net.npz"
    save_checkpoint(path, net, mask)
    _, loaded = load_checkpoint(path)
    assert loaded.mode == mask.mode
    assert loaded.eta == mask.eta
    assert loaded.sample_seed == mask.sample_seed
    for i in mask.masks:
        np.testing.assert_array_equal(loaded.masks[i], mask.masks[i])


def test_tampered_mask_detected(tmp_path, small_dense_spec, rng):
    net = init_network(small_dense_spec, (5,), seed=10)
    mask = sample_structured(small_dense_spec, 0.4, rng)
    path = tmp_path / "net.npz"
    save_checkpoint(path, net, mask)
    data = dict(np.load(path))
    flipped = data["mask0"].copy()
    flipped[0] ^= 1
    data["mask0"] = flipped
    np.savez(path, **data)
    with pytest.raises(ChecksumError):
        load_checkpoint(path)


def test_non_checkpoint_file_rejected(tmp_path):
    path = tmp_path / "other.npz"
    np.savez(path, a=np.zeros(3))
    with pytest.raises(FormatError):
        load_checkpoint(path)
