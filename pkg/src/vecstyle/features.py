"""Convolutional feature trunk with activation taps.

A :class:`TrunkSpec` describes a VGG-19-shaped stack of 3x3 convolutions,
ReLUs, and 2x2 max-pools.  :func:`forward` runs the stack on an RGB image
(after fixed ImageNet channel normalization) up to the last tapped layer and
returns the tapped activations: for each interval in the :class:`TapSet`,
the output of the interval's last convolution, taken before the following
ReLU.  :func:`backward` pulls gradients at the taps back to the input image.

Weights come from a neutral little-endian binary container (magic
``VNSTW1``); see :func:`load_weights`.  The canonical trunk has 16 convs /
16 ReLUs / 5 pools (37 layers) and 20,024,384 conv parameters.

All feature arithmetic is float32 by default (matching pretrained-weight
precision); :class:`FeatureNet` accepts ``dtype=torch.float64`` for
high-precision verification runs.
"""

from __future__ import annotations

import struct
from dataclasses import dataclass

import numpy as np
import torch
import torch.nn.functional as F

from .errors import DimensionError, TapeConsumedError, WeightFormatError
from .validation import check_image

__all__ = [
    "TrunkSpec",
    "TapSet",
    "WeightStore",
    "FeatureTaps",
    "FeatureTape",
    "FeatureNet",
    "load_weights",
    "save_weights",
    "forward",
    "backward",
    "IMAGENET_MEAN",
    "IMAGENET_STD",
]

IMAGENET_MEAN = (0.485, 0.456, 0.406)
IMAGENET_STD = (0.229, 0.224, 0.225)

_MAGIC = b"VNSTW1"
_VGG19_BLOCKS = ((64, 2), (128, 2), (256, 4), (512, 4), (512, 4))


@dataclass(frozen=True)
class TrunkSpec:
    """Ordered layer list: ("conv", name, c_in, c_out), ("relu",), ("pool",)."""

    layers: tuple[tuple, ...]
    in_channels: int = 3

    def __post_init__(self):
        chans = self.in_channels
        names = set()
        for i, layer in enumerate(self.layers):
            kind = layer[0]
            if kind == "conv":
                _, name, cin, cout = layer
                if cin != chans:
                    raise DimensionError(
                        f"conv layer {name!r} at index {i} expects {cin} input channels "
                        f"but receives {chans}"
                    )
                if name in names:
                    raise DimensionError(f"duplicate conv name {name!r}")
                names.add(name)
                chans = cout
            elif kind not in ("relu", "pool"):
                raise DimensionError(f"unknown layer kind {layer!r} at index {i}")

    @classmethod
    def canonical(cls) -> "TrunkSpec":
        """The 37-layer VGG-19 trunk: conv names convK_J in block order."""
        layers: list[tuple] = []
        cin = 3
        for block, (cout, n_convs) in enumerate(_VGG19_BLOCKS, start=1):
            for j in range(1, n_convs + 1):
                layers.append(("conv", f"conv{block}_{j}", cin, cout))
                layers.append(("relu",))
                cin = cout
            layers.append(("pool",))
        return cls(layers=tuple(layers))

    def conv_layers(self) -> list[tuple[int, str, int, int]]:
        out = []
        for i, layer in enumerate(self.layers):
            if layer[0] == "conv":
                _, name, cin, cout = layer
                out.append((i, name, cin, cout))
        return out

    @property
    def n_parameters(self) -> int:
        return sum(
            cout * cin * 9 + cout for _, _, cin, cout in self.conv_layers()
        )

    def min_input_side(self, last_layer: int) -> int:
        """Smallest H/W so every pool up to ``last_layer`` sees >= 2 pixels."""
        pools = sum(1 for l in self.layers[: last_layer + 1] if l[0] == "pool")
        return 2 ** (pools + 1)


_DEFAULT_INTERVALS = ((0, 4), (9, 16), (16, 23), (23, 30), (30, 36))


@dataclass(frozen=True)
class TapSet:
    """Layer-index intervals; each tap is the output of the interval's last
    convolution, taken before the following ReLU."""

    intervals: tuple[tuple[int, int], ...] = _DEFAULT_INTERVALS

    def __post_init__(self):
        prev_stop = 0
        if not self.intervals:
            raise DimensionError("TapSet needs at least one interval")
        for start, stop in self.intervals:
            if not (0 <= start < stop):
                raise DimensionError(f"invalid tap interval [{start}, {stop})")
            if start < prev_stop:
                raise DimensionError("tap intervals must be disjoint and increasing")
            prev_stop = stop
        object.__setattr__(
            self, "intervals", tuple((int(a), int(b)) for a, b in self.intervals)
        )

    def tap_layers(self, spec: TrunkSpec) -> list[int]:
        """Per interval, the layer index of its last convolution."""
        out = []
        n = len(spec.layers)
        for start, stop in self.intervals:
            if stop > n:
                raise DimensionError(
                    f"tap interval [{start}, {stop}) exceeds trunk length {n}"
                )
            if spec.layers[stop - 1][0] != "relu":
                raise DimensionError(
                    f"tap interval [{start}, {stop}) must end just past a ReLU layer"
                )
            convs = [i for i in range(start, stop) if spec.layers[i][0] == "conv"]
            if not convs:
                raise DimensionError(f"tap interval [{start}, {stop}) contains no convolution")
            out.append(convs[-1])
        return out


@dataclass
class WeightStore:
    """Named float32 tensors; immutable after load, shareable across passes."""

    tensors: dict[str, np.ndarray]

    def __post_init__(self):
        self.tensors = {k: np.asarray(v, dtype=np.float32) for k, v in self.tensors.items()}

    def get(self, name: str) -> np.ndarray | None:
        return self.tensors.get(name)

    def unknown_names(self, spec: TrunkSpec) -> list[str]:
        expected = set()
        for _, name, _, _ in spec.conv_layers():
            expected.add(f"{name}.weight")
            expected.add(f"{name}.bias")
        out = []
        for name in self.tensors:
            if name in expected or name.startswith("lpips.w"):
                continue
            out.append(name)
        return sorted(out)


def _validate_store(store: WeightStore, spec: TrunkSpec) -> None:
    for _, name, cin, cout in spec.conv_layers():
        w = store.get(f"{name}.weight")
        if w is None:
            raise WeightFormatError(f"missing tensor '{name}.weight'")
        if w.shape != (cout, cin, 3, 3):
            raise WeightFormatError(
                f"tensor '{name}.weight' has shape {w.shape}, expected {(cout, cin, 3, 3)}"
            )
        b = store.get(f"{name}.bias")
        if b is None:
            raise WeightFormatError(f"missing tensor '{name}.bias'")
        if b.shape != (cout,):
            raise WeightFormatError(
                f"tensor '{name}.bias' has shape {b.shape}, expected {(cout,)}"
            )


def load_weights(source, spec: TrunkSpec | None = None) -> WeightStore:
    """Read a VNSTW1 weight container and validate it against ``spec``.

    ``source`` may be bytes, a binary file object, or a path.  Little-endian
    layout: 6-byte magic, u32 tensor count, then per tensor u16 name length,
    UTF-8 name, u8 rank, rank u32 dims, and the float32 values row-major.
    Errors carry the byte offset at which parsing failed.
    """
    if isinstance(source, (bytes, bytearray)):
        data = bytes(source)
    elif hasattr(source, "read"):
        data = source.read()
    else:
        with open(source, "rb") as f:
            data = f.read()

    if spec is None:
        spec = TrunkSpec.canonical()

    off = 0

    def need(n: int, what: str) -> bytes:
        nonlocal off
        if off + n > len(data):
            raise WeightFormatError(f"truncated file while reading {what}", offset=off)
        chunk = data[off : off + n]
        off += n
        return chunk

    magic = need(6, "magic")
    if magic != _MAGIC:
        raise WeightFormatError(f"bad magic {magic!r}, expected {_MAGIC!r}", offset=0)
    (count,) = struct.unpack("<I", need(4, "tensor count"))

    tensors: dict[str, np.ndarray] = {}
    for t in range(count):
        (name_len,) = struct.unpack("<H", need(2, f"name length of tensor {t}"))
        name_off = off
        try:
            name = need(name_len, f"name of tensor {t}").decode("utf-8")
        except UnicodeDecodeError:
            raise WeightFormatError(f"tensor {t} name is not valid UTF-8", offset=name_off)
        if not name:
            raise WeightFormatError(f"tensor {t} has an empty name", offset=name_off)
        if name in tensors:
            raise WeightFormatError(f"duplicate tensor name '{name}'", offset=name_off)
        (rank,) = struct.unpack("<B", need(1, f"rank of '{name}'"))
        if rank == 0 or rank > 8:
            raise WeightFormatError(f"tensor '{name}' has invalid rank {rank}", offset=off - 1)
        dims = struct.unpack(f"<{rank}I", need(4 * rank, f"dims of '{name}'"))
        n_values = 1
        for d in dims:
            if d == 0:
                raise WeightFormatError(f"tensor '{name}' has a zero dimension", offset=off)
            n_values *= d
        if n_values > (1 << 31):
            raise WeightFormatError(f"tensor '{name}' is implausibly large", offset=off)
        raw = need(4 * n_values, f"values of '{name}'")
        arr = np.frombuffer(raw, dtype="<f4").reshape(dims).astype(np.float32)
        if not np.all(np.isfinite(arr)):
            raise WeightFormatError(f"tensor '{name}' contains non-finite values")
        tensors[name] = arr

    if off != len(data):
        raise WeightFormatError(
            f"{len(data) - off} trailing bytes after the last tensor", offset=off
        )

    store = WeightStore(tensors=tensors)
    _validate_store(store, spec)
    return store


def save_weights(store: WeightStore, dest) -> None:
    """Write a WeightStore in the VNSTW1 container format."""
    parts = [_MAGIC, struct.pack("<I", len(store.tensors))]
    for name, arr in store.tensors.items():
        arr = np.ascontiguousarray(arr, dtype="<f4")
        enc = name.encode("utf-8")
        parts.append(struct.pack("<H", len(enc)))
        parts.append(enc)
        parts.append(struct.pack("<B", arr.ndim))
        parts.append(struct.pack(f"<{arr.ndim}I", *arr.shape))
        parts.append(arr.tobytes())
    blob = b"".join(parts)
    if hasattr(dest, "write"):
        dest.write(blob)
    else:
        with open(dest, "wb") as f:
            f.write(blob)


@dataclass
class FeatureTaps:
    """Tapped activations: per tap a (C, H, W) array plus its channel weights."""

    values: tuple[np.ndarray, ...]
    channel_weights: tuple[np.ndarray, ...]
    layer_indices: tuple[int, ...]


class FeatureTape:
    """Single-use autograd handle from :func:`forward`."""

    def __init__(self, input_leaf: torch.Tensor, tap_tensors: list[torch.Tensor]):
        self._input_leaf = input_leaf
        self._tap_tensors = tap_tensors
        self._consumed = False


class FeatureNet:
    """A trunk + taps + weights bundle ready for repeated evaluation."""

    def __init__(
        self,
        weights: WeightStore,
        taps: TapSet | None = None,
        spec: TrunkSpec | None = None,
        dtype: torch.dtype = torch.float32,
    ):
        self.spec = spec if spec is not None else TrunkSpec.canonical()
        self.taps = taps if taps is not None else TapSet()
        self.dtype = dtype
        _validate_store(weights, self.spec)
        self.tap_layers = self.taps.tap_layers(self.spec)
        self.last_layer = max(self.tap_layers)
        self.min_side = self.spec.min_input_side(self.last_layer)

        self._conv_params: dict[int, tuple[torch.Tensor, torch.Tensor]] = {}
        for i, name, _, _ in self.spec.conv_layers():
            if i > self.last_layer:
                break
            w = torch.from_numpy(weights.tensors[f"{name}.weight"].copy()).to(dtype)
            b = torch.from_numpy(weights.tensors[f"{name}.bias"].copy()).to(dtype)
            self._conv_params[i] = (w, b)

        self.channel_weights: list[np.ndarray] = []
        for k, layer_idx in enumerate(self.tap_layers):
            c_out = self.spec.layers[layer_idx][3]
            wl = weights.get(f"lpips.w{k}")
            if wl is None:
                wl = np.ones(c_out, dtype=np.float32)
            else:
                if wl.shape != (c_out,):
                    raise WeightFormatError(
                        f"channel weights 'lpips.w{k}' have shape {wl.shape}, "
                        f"expected {(c_out,)}"
                    )
                if np.any(wl < 0):
                    raise WeightFormatError(f"channel weights 'lpips.w{k}' must be non-negative")
            self.channel_weights.append(wl.astype(np.float32))

        mean = torch.tensor(IMAGENET_MEAN, dtype=dtype).view(1, 3, 1, 1)
        std = torch.tensor(IMAGENET_STD, dtype=dtype).view(1, 3, 1, 1)
        self._mean, self._std = mean, std

    @property
    def n_parameters(self) -> int:
        return self.spec.n_parameters

    def check_input_size(self, height: int, width: int) -> None:
        if height < self.min_side or width < self.min_side:
            raise DimensionError(
                f"input {height}x{width} is too small for this trunk/tap combination "
                f"(needs at least {self.min_side}x{self.min_side})"
            )

    def forward_t(self, x: torch.Tensor) -> list[torch.Tensor]:
        """Run layers 0..last tap on a (1, 3, H, W) tensor in [0, 1] and
        return the tapped (pre-ReLU) conv outputs."""
        h = (x - self._mean) / self._std
        tap_at = set(self.tap_layers)
        taps: list[torch.Tensor] = []
        for i, layer in enumerate(self.spec.layers[: self.last_layer + 1]):
            kind = layer[0]
            if kind == "conv":
                w, b = self._conv_params[i]
                h = F.conv2d(h, w, b, stride=1, padding=1)
            elif kind == "relu":
                h = F.relu(h)
            else:
                h = F.max_pool2d(h, kernel_size=2, stride=2)
            if i in tap_at:
                taps.append(h)
        return taps


def _as_net(weights, taps: TapSet | None, spec: TrunkSpec | None) -> FeatureNet:
    if isinstance(weights, FeatureNet):
        if taps is not None or spec is not None:
            raise DimensionError(
                "pass taps/spec when constructing the FeatureNet, not per call"
            )
        return weights
    return FeatureNet(weights, taps=taps, spec=spec)


def forward(
    image,
    weights: WeightStore | FeatureNet,
    taps: TapSet | None = None,
    spec: TrunkSpec | None = None,
) -> tuple[FeatureTaps, FeatureTape]:
    """Extract tapped features from an (H, W, 3) image in [0, 1].

    Identical (image, weights, taps) produce bit-identical taps.  Returns the
    taps and a single-use tape for :func:`backward`.
    """
    net = _as_net(weights, taps, spec)
    arr = check_image(image, "image", channels=(3,))
    net.check_input_size(arr.shape[0], arr.shape[1])
    x = (
        torch.from_numpy(np.ascontiguousarray(arr.transpose(2, 0, 1))[None])
        .to(net.dtype)
        .requires_grad_(True)
    )
    tap_tensors = net.forward_t(x)
    values = tuple(t.detach().numpy()[0].copy() for t in tap_tensors)
    fw = FeatureTaps(
        values=values,
        channel_weights=tuple(net.channel_weights),
        layer_indices=tuple(net.tap_layers),
    )
    return fw, FeatureTape(x, tap_tensors)


def backward(tape: FeatureTape, tap_grads) -> np.ndarray:
    """Pull per-tap gradients back to the input image -> (H, W, 3) float.

    ReLU backward uses the forward mask; max-pool backward routes each
    gradient to the first maximal element of its window.
    """
    if tape._consumed:
        raise TapeConsumedError("this feature tape was already used for a backward pass")
    if len(tap_grads) != len(tape._tap_tensors):
        raise DimensionError(
            f"expected {len(tape._tap_tensors)} tap gradients, got {len(tap_grads)}"
        )
    grads_t = []
    for g, t in zip(tap_grads, tape._tap_tensors):
        g = np.asarray(g)
        if g.shape != tuple(t.shape[1:]):
            raise DimensionError(
                f"tap gradient shape {g.shape} does not match tap shape {tuple(t.shape[1:])}"
            )
        grads_t.append(torch.from_numpy(np.ascontiguousarray(g)[None]).to(t.dtype))
    tape._consumed = True
    (gx,) = torch.autograd.grad(
        outputs=tape._tap_tensors,
        inputs=[tape._input_leaf],
        grad_outputs=grads_t,
        allow_unused=False,
    )
    return gx[0].permute(1, 2, 0).numpy().copy()
