import struct

import numpy as np
import pytest

from crisisspot.errors import FormatError, ResolutionError, ShapeError
from crisisspot.tensorio import (load_checkpoint, load_tensor, read_tensor_shape, save_checkpoint, save_tensor,
                                 tensor_from_bytes, tensor_to_bytes)


def test_tensor_roundtrip_and_layout(tmp_path):
    a = np.arange(6, dtype=np.float32).reshape(2, 3)
    path = tmp_path / "a.cspt"
    save_tensor(path, a)
    raw = path.read_bytes()
    # independent decode of the documented layout
    magic, version, rows, cols = struct.unpack_from("<4sHII", raw)
    assert (magic, version, rows, cols) == (b"CSPT", 1, 2, 3)
    assert struct.unpack_from("<6f", raw, 14) == tuple(range(6))
    np.testing.assert_array_equal(load_tensor(path), a)
    assert read_tensor_shape(path) == (2, 3)


@pytest.mark.parametrize("mutate", [
    lambda b: b"XXXX" + b[4:],            # bad magic
    lambda b: b[:10],                     # truncated header
    lambda b: b[:-4],                     # truncated payload
    lambda b: b + b"\0",                  # trailing bytes
])
def test_tensor_corruption_rejected(tmp_path, mutate):
    path = tmp_path / "a.cspt"
    path.write_bytes(mutate(tensor_to_bytes(np.ones((2, 2)))))
    with pytest.raises(FormatError):
        load_tensor(path)


def test_empty_and_non2d():
    with pytest.raises(FormatError):
        tensor_from_bytes(struct.pack("<4sHII", b"CSPT", 1, 0, 3))
    with pytest.raises(ShapeError):
        tensor_to_bytes(np.ones(3))


def test_missing_file(tmp_path):
    with pytest.raises(ResolutionError):
        load_tensor(tmp_path / "nope.cspt")


def test_checkpoint_roundtrip(tmp_path):
    tensors = {"w": np.random.default_rng(0).standard_normal((3, 2)).astype(np.float32),
               "b": np.arange(4, dtype=np.float32), "s": np.ones((2, 1, 3), dtype=np.float32)}
    save_checkpoint(tmp_path / "c.ckpt", tensors, {"note": "x"})
    out, header = load_checkpoint(tmp_path / "c.ckpt")
    assert header == {"note": "x"}
    for k, v in tensors.items():
        np.testing.assert_array_equal(out[k], v)
        assert out[k].shape == v.shape


def test_checkpoint_bad_magic(tmp_path):
    (tmp_path / "c.ckpt").write_bytes(b"NOPE" + b"\0" * 20)
    with pytest.raises(FormatError):
        load_checkpoint(tmp_path / "c.ckpt")
