import numpy as np
import pytest

from qtnn import SeedStream, checkpoint
from qtnn.checkpoint import CheckpointFormatError


def _bnn_arrays(sizes, stream):
    arrays = []
    for m, n in zip(sizes, sizes[1:]):
        arrays.append(stream.gaussians(n * m).reshape(n, m))
        arrays.append(stream.gaussians(n * m).reshape(n, m))
        arrays.append(stream.gaussians(n))
        arrays.append(stream.gaussians(n))
    return arrays


def test_bnn_round_trip(tmp_path):
    sizes = [6, 4, 2]
    arrays = _bnn_arrays(sizes, SeedStream(1))
    path = tmp_path / "model.qtnn"
    checkpoint.save(path, "bnn", sizes, "qt", 1.0, 1.0, arrays)
    meta, loaded = checkpoint.load(path)
    assert meta == {"kind": "bnn", "layers": sizes, "activation": "qt",
                    "v0": 1.0, "a": 1.0}
    for a, b in zip(arrays, loaded):
        assert np.array_equal(a, b)


def test_rnn_round_trip(tmp_path):
    vocab, emb, hidden = 11, 4, 5
    s = SeedStream(2)
    arrays = [s.gaussians(vocab * emb).reshape(vocab, emb),
              s.gaussians(hidden * emb).reshape(hidden, emb),
              s.gaussians(hidden * hidden).reshape(hidden, hidden),
              s.gaussians(hidden), s.gaussians(hidden), s.gaussians(1)]
    path = tmp_path / "cell.qtnn"
    checkpoint.save(path, "rnn", [vocab, emb, hidden], "relu", 0.0, 0.0, arrays)
    meta, loaded = checkpoint.load(path)
    assert meta["kind"] == "rnn" and meta["layers"] == [vocab, emb, hidden]
    assert meta["activation"] == "relu"
    for a, b in zip(arrays, loaded):
        assert np.array_equal(a, b)


def test_header_text_layout():
    blob = checkpoint.serialize("bnn", [3, 2, 2], "qt", 1.5, 0.5,
                                _bnn_arrays([3, 2, 2], SeedStream(3)))
    assert blob.startswith(b"QTNN1\n")
    header = blob[6:blob.index(b"\n", 6)].decode()
    assert header == "kind=bnn layers=3,2,2 activation=qt v0=1.5 a=0.5"


def test_payload_is_little_endian_declaration_order():
    arrays = _bnn_arrays([2, 2], SeedStream(4))
    blob = checkpoint.serialize("bnn", [2, 2], "qt", 1.0, 1.0, arrays)
    payload = blob[blob.index(b"\n", 6) + 1:]
    flat = np.concatenate([a.reshape(-1) for a in arrays])
    assert payload == flat.astype("<f8").tobytes()


def test_serialization_is_byte_deterministic():
    arrays = _bnn_arrays([4, 3, 2], SeedStream(5))
    a = checkpoint.serialize("bnn", [4, 3, 2], "qt", 1.0, 2.0, arrays)
    b = checkpoint.serialize("bnn", [4, 3, 2], "qt", 1.0, 2.0,
                             [np.array(x) for x in arrays])
    assert a == b


def test_bad_magic_rejected():
    with pytest.raises(CheckpointFormatError):
        checkpoint.deserialize(b"NOPE1\n" + b"\x00" * 64)


def test_truncated_payload_rejected():
    blob = checkpoint.serialize("bnn", [2, 2], "qt", 1.0, 1.0,
                                _bnn_arrays([2, 2], SeedStream(6)))
    with pytest.raises(CheckpointFormatError):
        checkpoint.deserialize(blob[:-8])


def test_unknown_kind_rejected():
    with pytest.raises(ValueError):
        checkpoint.serialize("cnn", [2, 2], "qt", 1.0, 1.0, [])
    blob = checkpoint.serialize("bnn", [2, 2], "qt", 1.0, 1.0,
                                _bnn_arrays([2, 2], SeedStream(7)))
    with pytest.raises(CheckpointFormatError):
        checkpoint.deserialize(blob.replace(b"kind=bnn", b"kind=cnn"))
