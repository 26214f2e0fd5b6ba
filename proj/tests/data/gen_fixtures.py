"""Regenerates the checked-in test networks. Deterministic; numpy only."""

import json
import math
from pathlib import Path

import numpy as np

HERE = Path(__file__).resolve().parent


def f32(v):
    return float(str(np.float32(v)))


def acasxu_like(rng):
    sizes = [5, 50, 50, 50, 50, 50, 50, 5]
    mins = [0.0, -3.141593, -3.141593, 100.0, 0.0]
    maxs = [60760.0, 3.141593, 3.141593, 1200.0, 1200.0]
    means = [1.9791091e04, 0.0, 0.0, 650.0, 600.0, 7.5188840201005975]
    ranges = [60261.0, 6.28318530718, 6.28318530718, 1100.0, 1200.0, 373.94992]
    out = ["// AcasXu-shaped network with random weights, for parser and emission tests",
           "// layers, inputs, outputs, max layer size",
           f"{len(sizes) - 1},{sizes[0]},{sizes[-1]},{max(sizes)},",
           ",".join(str(s) for s in sizes) + ",",
           "0,",
           ",".join(repr(v) for v in mins) + ",",
           ",".join(repr(v) for v in maxs) + ",",
           ",".join(repr(v) for v in means) + ",",
           ",".join(repr(v) for v in ranges) + ","]
    for l in range(len(sizes) - 1):
        w = rng.uniform(-0.2, 0.2, size=(sizes[l + 1], sizes[l]))
        b = rng.uniform(-0.05, 0.05, size=sizes[l + 1])
        for row in w:
            out.append(",".join(f"{v:.6f}" for v in row) + ",")
        for v in b:
            out.append(f"{v:.6f},")
    (HERE / "acasxu_like.nnet").write_text("\n".join(out) + "\n")


def forward32(layers, x):
    # left-to-right accumulation from zero, bias last, as the interpreter does
    v = [np.float32(t) for t in x]
    for layer in layers:
        nxt = []
        for row, b in zip(layer["weights"], layer["bias"]):
            acc = np.float32(0.0)
            for w, t in zip(row, v):
                acc = np.float32(acc + np.float32(np.float32(w) * t))
            acc = np.float32(acc + np.float32(b))
            nxt.append(activate32(layer["activation"], acc))
        v = nxt
    return [float(t) for t in v]


def activate32(act, u):
    if act == "relu":
        return np.float32(0.0) if u < 0 else u
    if act == "linear":
        return u
    if act == "sigmoid":
        return np.float32(1.0 / (1.0 + math.exp(-float(u))))
    return np.float32(math.tanh(float(u)))


def forward64(layers, x):
    v = np.array(x, dtype=np.float64)
    for layer in layers:
        u = np.array(layer["weights"]) @ v + np.array(layer["bias"])
        act = layer["activation"]
        if act == "relu":
            v = np.maximum(u, 0.0)
        elif act == "sigmoid":
            v = 1.0 / (1.0 + np.exp(-u))
        elif act == "tanh":
            v = np.tanh(u)
        else:
            v = u
    return [float(t) for t in v]


def dense2(rng, name, acts):
    shapes = [(3, 6), (6, 2)]
    layers = []
    for (n_in, n_out), act in zip(shapes, acts):
        layers.append({
            "type": "dense",
            "weights": [[f32(v) for v in row] for row in rng.uniform(-1, 1, size=(n_out, n_in))],
            "bias": [f32(v) for v in rng.uniform(-0.5, 0.5, size=n_out)],
            "activation": act,
        })
    fixtures = []
    for _ in range(16):
        x = [f32(v) for v in rng.uniform(-2, 2, size=3)]
        fixtures.append({"input": x, "float32": forward32(layers, x), "real": forward64(layers, x)})
    doc = {"format_version": 1, "layers": layers, "source": "numpy", "fixtures": fixtures}
    (HERE / name).write_text(json.dumps(doc, indent=1) + "\n")


def trend(rng):
    # small enough that even 32-bit formats solve in seconds
    layers = []
    for n_in, n_out, act in [(2, 6, "relu"), (6, 2, "linear")]:
        layers.append({
            "type": "dense",
            "weights": [[round(float(v), 4) for v in row] for row in rng.uniform(-0.8, 0.8, size=(n_out, n_in))],
            "bias": [round(float(v), 4) for v in rng.uniform(-0.4, 0.4, size=n_out)],
            "activation": act,
        })
    doc = {"format_version": 1, "layers": layers}
    (HERE / "trend_2x6x2.json").write_text(json.dumps(doc, indent=1) + "\n")


def main():
    rng = np.random.default_rng(7)
    acasxu_like(rng)
    dense2(rng, "dense2_relu.json", ["relu", "linear"])
    dense2(rng, "dense2_tanh.json", ["tanh", "sigmoid"])
    trend(rng)


if __name__ == "__main__":
    main()
