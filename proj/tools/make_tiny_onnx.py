#!/usr/bin/env python3
# Copyright (c) 2026 The ADFA Authors
# SPDX-License-Identifier: Apache-2.0
"""Regenerate tests/fixtures/tiny_backbone.onnx.

Hand-encoded ONNX protobuf (no onnx package needed): a four-conv chain on a
3x16x16 input whose ReLU taps sit at 1/4, 1/8, and 1/16 of the input size,
mirroring the tap layout of the full-scale backbone at desk scale.

    stem: 3 -> 4 ch, stride 2   (8x8)
    c1:   4 -> 4 ch, stride 2   -> tap1, 4x4x4
    c2:   4 -> 6 ch, stride 2   -> tap2, 6x2x2
    c3:   6 -> 8 ch, stride 2   -> tap3, 8x1x1

Weights come from a fixed linear-congruential sequence, so the file is
byte-stable across regenerations.
"""

import struct
import sys


def varint(n: int) -> bytes:
    out = bytearray()
    while True:
        b = n & 0x7F
        n >>= 7
        if n:
            out.append(b | 0x80)
        else:
            out.append(b)
            return bytes(out)


def tag(field: int, wire: int) -> bytes:
    return varint((field << 3) | wire)


def f_varint(field: int, value: int) -> bytes:
    return tag(field, 0) + varint(value)


def f_bytes(field: int, payload: bytes) -> bytes:
    return tag(field, 2) + varint(len(payload)) + payload


def f_string(field: int, s: str) -> bytes:
    return f_bytes(field, s.encode())


def dim(value: int) -> bytes:
    return f_varint(1, value)


def tensor_value_info(name: str, shape) -> bytes:
    shape_msg = b"".join(f_bytes(1, dim(d)) for d in shape)
    tensor_type = f_varint(1, 1) + f_bytes(2, shape_msg)  # elem_type FLOAT
    return f_string(1, name) + f_bytes(2, f_bytes(1, tensor_type))


def attr_ints(name: str, values) -> bytes:
    body = f_string(1, name) + f_varint(20, 7)  # AttributeType INTS
    for v in values:
        body += f_varint(8, v)
    return body


def node(op: str, name: str, inputs, outputs, attrs=()) -> bytes:
    body = b"".join(f_string(1, i) for i in inputs)
    body += b"".join(f_string(2, o) for o in outputs)
    body += f_string(3, name) + f_string(4, op)
    body += b"".join(f_bytes(5, a) for a in attrs)
    return body


def tensor(name: str, dims, values) -> bytes:
    body = b"".join(f_varint(1, d) for d in dims)
    body += f_varint(2, 1)  # FLOAT
    body += f_string(8, name)
    body += f_bytes(9, b"".join(struct.pack("<f", v) for v in values))
    return body


class Lcg:
    def __init__(self, seed: int):
        self.state = seed

    def next(self) -> float:
        self.state = (self.state * 6364136223846793005 + 1442695040888963407) % (1 << 64)
        return ((self.state >> 33) / float(1 << 31)) - 0.5


def main(out_path: str) -> None:
    rng = Lcg(20240917)
    chans = [(3, 4, "stem"), (4, 4, "c1"), (4, 6, "c2"), (6, 8, "c3")]
    conv_attrs = (
        attr_ints("kernel_shape", [3, 3]),
        attr_ints("strides", [2, 2]),
        attr_ints("pads", [1, 1, 1, 1]),
    )

    nodes = []
    initializers = []
    src = "input"
    for cin, cout, label in chans:
        w = [0.4 * rng.next() for _ in range(cout * cin * 9)]
        initializers.append(tensor(f"{label}_w", [cout, cin, 3, 3], w))
        initializers.append(tensor(f"{label}_b", [cout], [0.0] * cout))
        nodes.append(
            node("Conv", f"{label}_conv", [src, f"{label}_w", f"{label}_b"],
                 [f"{label}_pre"], conv_attrs))
        nodes.append(node("Relu", f"{label}_relu", [f"{label}_pre"], [f"{label}_out"]))
        src = f"{label}_out"

    graph = b"".join(f_bytes(1, n) for n in nodes)
    graph += f_string(2, "tiny_backbone")
    graph += b"".join(f_bytes(5, t) for t in initializers)
    graph += f_bytes(11, tensor_value_info("input", [1, 3, 16, 16]))
    for label, c, s in (("c1", 4, 4), ("c2", 6, 2), ("c3", 8, 1)):
        graph += f_bytes(12, tensor_value_info(f"{label}_out", [1, c, s, s]))

    model = f_varint(1, 7)  # ir_version
    model += f_string(2, "adfa-tools")
    model += f_bytes(7, graph)
    model += f_bytes(8, f_string(1, "") + f_varint(2, 13))  # opset 13

    with open(out_path, "wb") as fh:
        fh.write(model)
    print(f"wrote {out_path} ({len(model)} bytes)")


if __name__ == "__main__":
    main(sys.argv[1] if len(sys.argv) > 1 else "tests/fixtures/tiny_backbone.onnx")
