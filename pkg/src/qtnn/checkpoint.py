"""QTNN1 checkpoint format, shared by the Bayesian and recurrent models.

Layout: magic b"QTNN1\n", one ASCII header line

    kind=<bnn|rnn> layers=<comma sizes> activation=<qt|relu> v0=<f> a=<f>

then every parameter array flattened in declaration order as little-endian
64-bit floats. For ReLU models v0 and a are written as 0. Array shapes are
implied by kind and layers:

    bnn: per consecutive size pair (m, n): W_mu (n, m), W_rho (n, m),
         b_mu (n,), b_rho (n,)
    rnn: layers = vocab,emb,hidden; embedding (vocab, emb), W_xh (hidden,
         emb), W_hh (hidden, hidden), b_h (hidden,), head_w (hidden,),
         head_b (1,)
"""

from __future__ import annotations

import numpy as np

MAGIC = b"QTNN1\n"


class CheckpointFormatError(ValueError):
    pass


def _fmt(x: float) -> str:
    return repr(float(x))


def serialize(kind: str, sizes, activation: str, v0: float, a: float,
              arrays) -> bytes:
    if kind not in ("bnn", "rnn"):
        raise ValueError(f"unknown checkpoint kind {kind!r}")
    if activation not in ("qt", "relu"):
        raise ValueError(f"unknown activation {activation!r}")
    header = (f"kind={kind} layers={','.join(str(int(s)) for s in sizes)} "
              f"activation={activation} v0={_fmt(v0)} a={_fmt(a)}\n")
    chunks = [MAGIC, header.encode("ascii")]
    for arr in arrays:
        chunks.append(np.ascontiguousarray(arr, dtype="<f8").tobytes())
    return b"".join(chunks)


def save(path, kind, sizes, activation, v0, a, arrays):
    with open(path, "wb") as fh:
        fh.write(serialize(kind, sizes, activation, v0, a, arrays))


def _expected_shapes(kind: str, sizes: list[int]):
    if kind == "bnn":
        shapes = []
        for m, n in zip(sizes, sizes[1:]):
            shapes.extend([(n, m), (n, m), (n,), (n,)])
        return shapes
    vocab, emb, hidden = sizes
    return [(vocab, emb), (hidden, emb), (hidden, hidden), (hidden,),
            (hidden,), (1,)]


def deserialize(blob: bytes):
    """Returns (meta dict, list of arrays). Raises CheckpointFormatError."""
    if not blob.startswith(MAGIC):
        raise CheckpointFormatError("bad magic; not a QTNN1 checkpoint")
    nl = blob.index(b"\n", len(MAGIC))
    header = blob[len(MAGIC):nl].decode("ascii")
    fields = {}
    for part in header.split():
        if "=" not in part:
            raise CheckpointFormatError(f"malformed header field {part!r}")
        key, val = part.split("=", 1)
        fields[key] = val
    try:
        kind = fields["kind"]
        sizes = [int(s) for s in fields["layers"].split(",")]
        meta = {
            "kind": kind,
            "layers": sizes,
            "activation": fields["activation"],
            "v0": float(fields["v0"]),
            "a": float(fields["a"]),
        }
    except (KeyError, ValueError) as exc:
        raise CheckpointFormatError(f"bad header {header!r}: {exc}") from exc
    if kind not in ("bnn", "rnn"):
        raise CheckpointFormatError(f"unknown checkpoint kind {kind!r}")
    if kind == "rnn" and len(sizes) != 3:
        raise CheckpointFormatError("rnn checkpoints need layers=vocab,emb,hidden")

    payload = blob[nl + 1:]
    shapes = _expected_shapes(kind, sizes)
    want = sum(int(np.prod(s)) for s in shapes) * 8
    if len(payload) != want:
        raise CheckpointFormatError(
            f"payload is {len(payload)} bytes, expected {want}")
    arrays = []
    offset = 0
    for shape in shapes:
        count = int(np.prod(shape))
        arr = np.frombuffer(payload, dtype="<f8", count=count, offset=offset)
        arrays.append(arr.astype(np.float64).reshape(shape))
        offset += count * 8
    return meta, arrays


def load(path):
    with open(path, "rb") as fh:
        return deserialize(fh.read())
