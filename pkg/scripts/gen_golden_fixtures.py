"""Regenerate the feature-trunk golden fixtures.

Everything here is computed with a deliberately naive, dependency-free
float64 oracle — nested-loop 3x3 convolution, ReLU, 2x2 max pool, the fixed
ImageNet channel normalization — so the fixtures are an independent check on
the package's feature stack, not an echo of it.  For each fixture we store
the random weights, an input image, the expected tap activations, a fixed
random projection per tap, and the finite-difference input gradient of
L = sum_k <proj_k, tap_k>.

Outputs: tests/fixtures/golden_trunk_small.npz, golden_trunk_pooled.npz.
"""

from pathlib import Path

import numpy as np

FIXTURES = Path(__file__).resolve().parent.parent / "tests" / "fixtures"

IMAGENET_MEAN = (0.485, 0.456, 0.406)
IMAGENET_STD = (0.229, 0.224, 0.225)

# (name, layers, tap intervals); layers: ("conv", name, cin, cout) / "relu" / "pool"
ARCHITECTURES = {
    "golden_trunk_small": (
        (
            ("conv", "t1", 3, 4),
            "relu",
            ("conv", "t2", 4, 6),
            "relu",
        ),
        ((0, 2), (2, 4)),
        8,  # input side
    ),
    "golden_trunk_pooled": (
        (
            ("conv", "t1", 3, 4),
            "relu",
            ("conv", "t2", 4, 6),
            "relu",
            "pool",
            ("conv", "t3", 6, 8),
            "relu",
        ),
        ((0, 2), (2, 4), (4, 7)),
        8,
    ),
}


def conv3x3(x: np.ndarray, weight: np.ndarray, bias: np.ndarray) -> np.ndarray:
    """Direct same-padded 3x3 convolution; x is (C, H, W), weight (O, C, 3, 3)."""
    c_in, h, w = x.shape
    c_out = weight.shape[0]
    padded = np.zeros((c_in, h + 2, w + 2))
    padded[:, 1:-1, 1:-1] = x
    out = np.empty((c_out, h, w))
    for o in range(c_out):
        acc = np.full((h, w), bias[o])
        for c in range(c_in):
            for dy in range(3):
                for dx in range(3):
                    acc = acc + weight[o, c, dy, dx] * padded[c, dy : dy + h, dx : dx + w]
        out[o] = acc
    return out


def pool2x2(x: np.ndarray) -> np.ndarray:
    c, h, w = x.shape
    return x.reshape(c, h // 2, 2, w // 2, 2).max(axis=(2, 4))


def forward_taps(image: np.ndarray, layers, intervals, weights) -> list[np.ndarray]:
    """image is (H, W, 3) in [0, 1]; returns the pre-ReLU conv output at the
    end of each interval."""
    x = image.transpose(2, 0, 1).astype(np.float64)
    mean = np.array(IMAGENET_MEAN).reshape(3, 1, 1)
    std = np.array(IMAGENET_STD).reshape(3, 1, 1)
    x = (x - mean) / std
    tap_at = {}
    for start, stop in intervals:
        convs = [i for i in range(start, stop) if isinstance(layers[i], tuple)]
        tap_at[convs[-1]] = len(tap_at)
    taps = [None] * len(intervals)
    last = max(tap_at)
    for i, layer in enumerate(layers):
        if i > last:
            break
        if isinstance(layer, tuple):
            _, name, _, _ = layer
            x = conv3x3(x, weights[f"{name}.weight"], weights[f"{name}.bias"])
            if i in tap_at:
                taps[tap_at[i]] = x.copy()
        elif layer == "relu":
            x = np.maximum(x, 0.0)
        else:
            x = pool2x2(x)
    return taps


def make_fixture(name: str, seed: int) -> None:
    layers, intervals, side = ARCHITECTURES[name]
    rng = np.random.default_rng(seed)
    weights = {}
    for layer in layers:
        if isinstance(layer, tuple):
            _, lname, cin, cout = layer
            weights[f"{lname}.weight"] = rng.normal(0.0, np.sqrt(2.0 / (cin * 9)), (cout, cin, 3, 3))
            weights[f"{lname}.bias"] = rng.normal(0.0, 0.05, cout)
    image = rng.uniform(0.05, 0.95, (side, side, 3))

    taps = forward_taps(image, layers, intervals, weights)
    projections = [rng.standard_normal(t.shape) for t in taps]

    def objective(img):
        return sum(
            float(np.sum(p * t)) for p, t in zip(projections, forward_taps(img, layers, intervals, weights))
        )

    eps = 1e-5
    grad = np.zeros_like(image)
    for i in range(side):
        for j in range(side):
            for c in range(3):
                plus = image.copy()
                minus = image.copy()
                plus[i, j, c] += eps
                minus[i, j, c] -= eps
                grad[i, j, c] = (objective(plus) - objective(minus)) / (2.0 * eps)

    payload = {"image": image, "input_grad": grad}
    for k, (t, p) in enumerate(zip(taps, projections)):
        payload[f"tap_{k}"] = t
        payload[f"proj_{k}"] = p
    payload.update(weights)
    out = FIXTURES / f"{name}.npz"
    np.savez_compressed(out, **payload)
    print(f"{out.name}: {len(taps)} taps, |grad| max {np.abs(grad).max():.4f}")


def main() -> None:
    FIXTURES.mkdir(parents=True, exist_ok=True)
    make_fixture("golden_trunk_small", seed=101)
    make_fixture("golden_trunk_pooled", seed=202)


if __name__ == "__main__":
    main()
