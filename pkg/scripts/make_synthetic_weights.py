"""Generate a synthetic feature-trunk weights file (VNSTW1 container).

Pretrained VGG-19 weights give the intended perceptual behavior; this script
produces a stand-in with the exact container layout — He-initialized 3x3
convolutions with small random biases — so the whole pipeline can run
self-contained (tests, demos, CI).

Usage:
    python3 scripts/make_synthetic_weights.py --out weights.vnstw [--seed 0]
"""

import argparse

import numpy as np

from vecstyle.features import TapSet, TrunkSpec, WeightStore, save_weights

#: Uniform gain applied to every tap channel.  Trained perceptual weights set
#: the distance's overall scale as much as its per-channel shape; without a
#: comparable gain the synthetic metric's dynamic range is so small that the
#: contour regularizer's noise floor dominates the optimization objective.
CHANNEL_GAIN = 2.0


def make_synthetic_trunk(seed: int = 0) -> WeightStore:
    spec = TrunkSpec.canonical()
    rng = np.random.default_rng(seed)
    tensors = {}
    for _, name, cin, cout in spec.conv_layers():
        std = np.sqrt(2.0 / (cin * 9))
        tensors[f"{name}.weight"] = rng.normal(0.0, std, (cout, cin, 3, 3)).astype(np.float32)
        tensors[f"{name}.bias"] = rng.normal(0.0, 0.01, cout).astype(np.float32)
    for k, layer_idx in enumerate(TapSet().tap_layers(spec)):
        c_out = spec.layers[layer_idx][3]
        tensors[f"lpips.w{k}"] = np.full(c_out, CHANNEL_GAIN, dtype=np.float32)
    return WeightStore(tensors)


def main() -> None:
    parser = argparse.ArgumentParser(description=__doc__.split("\n")[0])
    parser.add_argument("--out", required=True, help="output .vnstw path")
    parser.add_argument("--seed", type=int, default=0)
    args = parser.parse_args()
    store = make_synthetic_trunk(args.seed)
    save_weights(store, args.out)
    n = sum(t.size for t in store.tensors.values())
    print(f"wrote {args.out} ({len(store.tensors)} tensors, {n} values)")


if __name__ == "__main__":
    main()
