"""Regenerates the committed fixture files in this directory.

Run from the repository root:  python3 tests/fixtures/make_fixtures.py
Weights are seeded and rounded so the files are stable and reviewable.
"""

from __future__ import annotations

import json
import struct
from pathlib import Path

import numpy as np

HERE = Path(__file__).parent


def _round(a, nd=6):
    return np.round(np.asarray(a, dtype=np.float64), nd).tolist()


def write(name: str, obj) -> None:
    with (HERE / name).open("w", encoding="utf-8") as fh:
        json.dump(obj, fh, indent=1)
        fh.write("\n")
    print("wrote", name)


def main() -> None:
    rng = np.random.default_rng(20260815)

    # two-logit affine net with an exactly known robust radius at the origin:
    # logits (x1 + 1, -x1), margin 2*x1 + 1, so the l-inf radius at 0 is 0.5
    write(
        "affine_margin.json",
        {
            "input_dim": 2,
            "layers": [
                {"type": "affine", "weight": [[1.0, 0.0], [-1.0, 0.0]], "bias": [1.0, 0.0]}
            ],
        },
    )
    write("affine_margin_inputs.json", [[0.0, 0.0], [0.1, -0.2]])

    # one-hidden-layer ReLU net used for the hand-derived propagation golden
    write(
        "fnn_relu_2x2.json",
        {
            "input_dim": 2,
            "layers": [
                {"type": "affine", "weight": [[1.0, 1.0], [1.0, -1.0]], "bias": [0.0, 0.0]},
                {"type": "activation", "kind": "relu"},
                {"type": "affine", "weight": [[1.0, 1.0], [0.0, 1.0]], "bias": [0.0, 0.0]},
            ],
        },
    )
    (HERE / "fnn_relu_2x2_inputs.csv").write_text("0.0,0.0\n0.5,0.25\n", encoding="utf-8")
    print("wrote fnn_relu_2x2_inputs.csv")

    # ReLU net whose certified radius is exactly 0.5 under l-inf at the origin:
    # margin bound is 1 - 2*eps (lower lines vanish, chord upper has slope 1/2)
    write(
        "fnn_relu_gap.json",
        {
            "input_dim": 2,
            "layers": [
                {"type": "affine", "weight": [[1.0, 1.0], [1.0, -1.0]], "bias": [0.0, 0.0]},
                {"type": "activation", "kind": "relu"},
                {"type": "affine", "weight": [[2.0, 2.0], [0.0, 1.0]], "bias": [1.0, 0.0]},
            ],
        },
    )

    # small random net mixing sigmoid and tanh layers
    w1 = rng.normal(0, 0.8, (4, 3))
    w2 = rng.normal(0, 0.8, (4, 4))
    w3 = rng.normal(0, 0.8, (3, 4))
    write(
        "fnn_sigmoid_3x4.json",
        {
            "input_dim": 3,
            "layers": [
                {"type": "affine", "weight": _round(w1), "bias": _round(rng.normal(0, 0.3, 4))},
                {"type": "activation", "kind": "sigmoid"},
                {"type": "affine", "weight": _round(w2), "bias": _round(rng.normal(0, 0.3, 4))},
                {"type": "activation", "kind": "tanh"},
                {"type": "affine", "weight": _round(w3), "bias": _round(rng.normal(0, 0.3, 3))},
            ],
        },
    )
    write("fnn_sigmoid_3x4_inputs.json", _round(rng.uniform(-1, 1, (3, 3)), 4))

    # tiny conv net: conv 1->2 (3x3, pad 1), batchnorm, relu, 2x2 maxpool, dense
    filters = rng.normal(0, 0.5, (2, 1, 3, 3))
    n_feat = 2 * 4 * 4
    write(
        "cnn_pool_tiny.json",
        {
            "input_dim": 16,
            "layers": [
                {
                    "type": "conv2d",
                    "filters": _round(filters),
                    "bias": _round(rng.normal(0, 0.2, 2)),
                    "stride": 1,
                    "padding": 1,
                    "input_shape": [1, 4, 4],
                },
                {
                    "type": "batchnorm",
                    "scale": _round(rng.uniform(0.8, 1.2, n_feat)),
                    "shift": _round(rng.normal(0, 0.1, n_feat)),
                    "mean": _round(rng.normal(0, 0.1, n_feat)),
                    "variance": _round(rng.uniform(0.5, 1.5, n_feat)),
                    "epsilon": 1e-5,
                },
                {"type": "activation", "kind": "relu"},
                {"type": "maxpool", "input_shape": [2, 4, 4], "size": 2, "stride": 2},
                {
                    "type": "affine",
                    "weight": _round(rng.normal(0, 0.5, (3, 8))),
                    "bias": _round(rng.normal(0, 0.2, 3)),
                },
            ],
        },
    )
    images = rng.integers(0, 256, size=(3, 4, 4), dtype=np.uint8)
    with (HERE / "cnn_inputs.idx").open("wb") as fh:
        fh.write(struct.pack(">IIII", 0x00000803, 3, 4, 4))
        fh.write(images.tobytes())
    print("wrote cnn_inputs.idx")

    # malformed on purpose: bias length does not match the weight rows
    write(
        "bad_bias_mismatch.json",
        {
            "input_dim": 2,
            "layers": [
                {"type": "affine", "weight": [[1.0, 0.0], [0.0, 1.0]], "bias": [0.0, 0.0, 0.0]}
            ],
        },
    )


if __name__ == "__main__":
    main()
