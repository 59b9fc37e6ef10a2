import importlib.util
import sys
from pathlib import Path

import numpy as np
import pytest

REPO = Path(__file__).resolve().parent.parent
FIXTURES = Path(__file__).resolve().parent / "fixtures"


def _load_script(name: str):
    path = REPO / "scripts" / f"{name}.py"
    spec = importlib.util.spec_from_file_location(name, path)
    module = importlib.util.module_from_spec(spec)
    sys.modules[name] = module
    spec.loader.exec_module(module)
    return module


@pytest.fixture(scope="session")
def fixtures_dir() -> Path:
    return FIXTURES


@pytest.fixture(scope="session")
def synthetic_weights_path(tmp_path_factory) -> Path:
    """Full canonical-trunk weights file (He-initialized, seeded); built once
    per session because the 80 MB binary has no place in the repo."""
    gen = _load_script("make_synthetic_weights")
    out = tmp_path_factory.mktemp("weights") / "synthetic.vnstw"
    from vecstyle.features import save_weights

    save_weights(gen.make_synthetic_trunk(seed=0), out)
    return out


@pytest.fixture(scope="session")
def synthetic_net(synthetic_weights_path):
    from vecstyle.features import FeatureNet, load_weights

    return FeatureNet(load_weights(synthetic_weights_path))


def make_tiny_net(seed: int = 7, dtype=None):
    """A 2-conv trunk with taps after each conv; fast enough for loops."""
    import torch
    from vecstyle.features import FeatureNet, TapSet, TrunkSpec, WeightStore

    rng = np.random.default_rng(seed)
    spec = TrunkSpec(layers=(("conv", "a1", 3, 4), ("relu",), ("conv", "a2", 4, 5), ("relu",)))
    taps = TapSet(intervals=((0, 2), (2, 4)))
    tensors = {}
    for _, name, cin, cout in spec.conv_layers():
        tensors[f"{name}.weight"] = rng.standard_normal((cout, cin, 3, 3)) * 0.2
        tensors[f"{name}.bias"] = rng.standard_normal(cout) * 0.05
    return FeatureNet(
        WeightStore(tensors), taps=taps, spec=spec, dtype=dtype or torch.float32
    )


@pytest.fixture
def tiny_net():
    return make_tiny_net()


def make_blob_scene(seed: int = 0, n_shapes: int = 2, size: float = 48.0):
    """Random smooth closed blobs with interior colors/alphas (no parameter
    sits near a clamp boundary, so finite differences stay valid)."""
    from vecstyle.scene import Paint, Scene, Shape, Subpath

    rng = np.random.default_rng(seed)
    shapes = []
    for k in range(n_shapes):
        cx = rng.uniform(0.25 * size, 0.75 * size)
        cy = rng.uniform(0.25 * size, 0.75 * size)
        radius = rng.uniform(0.12 * size, 0.22 * size)
        n_lobes = int(rng.integers(3, 6))
        pts = []
        for i in range(n_lobes):
            a0 = 2.0 * np.pi * i / n_lobes
            a1 = 2.0 * np.pi * (i + 1) / n_lobes
            r0 = radius * rng.uniform(0.8, 1.2)
            pts.append([cx + r0 * np.cos(a0), cy + r0 * np.sin(a0)])
            pts.append(
                [cx + 1.25 * r0 * np.cos(a0 + (a1 - a0) / 3), cy + 1.25 * r0 * np.sin(a0 + (a1 - a0) / 3)]
            )
            pts.append(
                [cx + 1.1 * r0 * np.cos(a1 - (a1 - a0) / 3), cy + 1.1 * r0 * np.sin(a1 - (a1 - a0) / 3)]
            )
        sub = Subpath(points=np.array(pts), closed=True)
        fill = Paint.solid(*rng.uniform(0.15, 0.85, 3), rng.uniform(0.55, 0.9))
        if k % 2 == 0:
            stroke = Paint.solid(*rng.uniform(0.15, 0.85, 3), rng.uniform(0.6, 0.9))
            width = rng.uniform(1.0, 2.0)
        else:
            stroke = Paint.none()
            width = 0.0
        shapes.append(Shape(subpaths=(sub,), fill=fill, stroke=stroke, stroke_width=width))
    return Scene(width=size, height=size, shapes=tuple(shapes))
