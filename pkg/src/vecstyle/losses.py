"""Perceptual and contour objectives.

The total objective driven by the optimizer is::

    total = lpips(render(scene_out), style) + weight * contour(scene_out, scene_content)

``lpips`` is a perceptual distance computed from channel-unit-normalized
feature taps: per tap, the difference is scaled channel-wise by w_l, squared,
summed over channels, averaged over spatial positions (one normalization by
H_l*W_l), and the per-tap means are summed.  Optionally a single random
scalar s ~ Uniform(0, 1) multiplies *both* images before feature extraction
(the same s, so self-distance stays zero).

``contour`` compares outline renders (fills black, strokes white) of the two
scenes on one shared random patch of ``patch_fraction`` of the canvas, as a
mean absolute difference (or mean squared, for the L2 variant).  Color
parameters receive gradients only through the perceptual path; points and
widths accumulate both paths.

Every operation is pure given (inputs, rng): fixed seeds reproduce the exact
LossReport.  RNG draw order in ``total_loss`` is fixed: color scale first
(when enabled), then patch x, then patch y.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import torch

from .errors import DimensionError
from .features import FeatureNet, TapSet, TrunkSpec, WeightStore
from .raster import RenderConfig, _render_graph, _scene_leaves
from .scene import ParamGroups, Scene
from .validation import check_image

__all__ = ["LossConfig", "LossReport", "lpips", "contour_loss", "total_loss"]

_NORM_EPS = 1e-10


@dataclass
class LossConfig:
    """Objective settings.  ``contour_weight`` is the weight of the contour
    term in the total loss (default 100)."""

    contour_weight: float = 100.0
    contour_variant: str = "l1"
    patch_fraction: tuple[float, float] = (0.25, 0.25)
    color_scale_transform: bool = True
    rng_seed: int = 0

    def validate(self) -> None:
        if not (self.contour_weight >= 0.0) or not np.isfinite(self.contour_weight):
            raise DimensionError(f"contour_weight must be >= 0, got {self.contour_weight!r}")
        if self.contour_variant not in ("l1", "l2"):
            raise DimensionError(f"contour_variant must be 'l1' or 'l2', got {self.contour_variant!r}")
        fw, fh = self.patch_fraction
        if not (0.0 < fw <= 1.0 and 0.0 < fh <= 1.0):
            raise DimensionError(f"patch_fraction must lie in (0, 1], got {self.patch_fraction!r}")


@dataclass
class LossReport:
    """One evaluation of the objective.  ``total`` always equals
    ``lpips_term + weight * contour_term`` exactly in stored precision;
    ``contour_term`` is the raw (pre-weight) contour value."""

    total: float
    lpips_term: float
    contour_term: float
    color_scale_used: float
    patch_origin: tuple[int, int]


def _resolve_rng(rng, config: LossConfig) -> np.random.Generator:
    if rng is None:
        return np.random.default_rng(config.rng_seed)
    return rng


def _as_feature_net(net) -> FeatureNet:
    if isinstance(net, FeatureNet):
        return net
    if isinstance(net, WeightStore):
        return FeatureNet(net)
    raise DimensionError(f"expected a FeatureNet or WeightStore, got {type(net).__name__}")


def _lpips_from_taps(
    taps_x: list[torch.Tensor],
    taps_y: list[torch.Tensor],
    channel_weights: list[np.ndarray],
) -> torch.Tensor:
    total = None
    for tx, ty, wl in zip(taps_x, taps_y, channel_weights):
        xn = tx / (torch.sqrt((tx * tx).sum(dim=1, keepdim=True)) + _NORM_EPS)
        yn = ty / (torch.sqrt((ty * ty).sum(dim=1, keepdim=True)) + _NORM_EPS)
        w = torch.from_numpy(wl).to(tx.dtype).view(1, -1, 1, 1)
        dist = (w * (xn - yn)).square().sum(dim=1)  # (1, H_l, W_l)
        term = dist.mean()
        total = term if total is None else total + term
    return total


def _image_to_batch(arr: np.ndarray, dtype: torch.dtype) -> torch.Tensor:
    return torch.from_numpy(np.ascontiguousarray(arr.transpose(2, 0, 1))[None]).to(dtype)


def lpips(
    x,
    y,
    net: FeatureNet | WeightStore,
    config: LossConfig | None = None,
    rng: np.random.Generator | None = None,
) -> tuple[float, np.ndarray]:
    """Perceptual distance between two (H, W, 3) images in [0, 1].

    Returns the value and its gradient with respect to ``x``.  With the
    color-scale transform enabled, one scalar s ~ Uniform(0, 1) is drawn and
    multiplies both images before feature extraction.
    """
    config = config if config is not None else LossConfig()
    config.validate()
    net = _as_feature_net(net)
    xa = check_image(x, "x", channels=(3,))
    ya = check_image(y, "y", channels=(3,))
    if xa.shape != ya.shape:
        raise DimensionError(f"x and y must have the same shape, got {xa.shape} vs {ya.shape}")
    net.check_input_size(xa.shape[0], xa.shape[1])
    rng = _resolve_rng(rng, config)
    s = float(rng.uniform(0.0, 1.0)) if config.color_scale_transform else 1.0

    x_t = _image_to_batch(xa, net.dtype).requires_grad_(True)
    y_t = _image_to_batch(ya, net.dtype)
    s_t = torch.tensor(s, dtype=net.dtype)
    taps_x = net.forward_t(x_t * s_t)
    with torch.no_grad():
        taps_y = net.forward_t(y_t * s_t)
    value_t = _lpips_from_taps(taps_x, taps_y, net.channel_weights)
    (grad_t,) = torch.autograd.grad(value_t, [x_t])
    grad = grad_t[0].permute(1, 2, 0).numpy().astype(np.float64)
    return float(value_t.detach()), grad


def _patch_geometry(
    config: LossConfig, render_config: RenderConfig, rng: np.random.Generator
) -> tuple[int, int, int, int]:
    width, height = int(render_config.out_width), int(render_config.out_height)
    fw, fh = config.patch_fraction
    pw = int(width * fw)
    ph = int(height * fh)
    if pw < 1 or ph < 1:
        raise DimensionError(
            f"image {width}x{height} is too small for patch fraction {config.patch_fraction}"
        )
    px = int(rng.integers(0, width - pw + 1))
    py = int(rng.integers(0, height - ph + 1))
    return px, py, pw, ph


def _contour_value(
    img_out_t: torch.Tensor,
    img_content_t: torch.Tensor,
    origin: tuple[int, int, int, int],
    variant: str,
) -> torch.Tensor:
    px, py, pw, ph = origin
    a = img_out_t[py : py + ph, px : px + pw, :3]
    b = img_content_t[py : py + ph, px : px + pw, :3]
    diff = a - b
    if variant == "l2":
        return diff.square().mean()
    return diff.abs().mean()


def contour_loss(
    scene_out: Scene,
    scene_content: Scene,
    render_config: RenderConfig,
    config: LossConfig | None = None,
    rng: np.random.Generator | None = None,
) -> tuple[float, ParamGroups]:
    """Outline divergence between two scenes on one shared random patch.

    Both scenes are rendered in contour mode (fills opaque black, strokes
    opaque white, white background) at ``render_config`` resolution; the
    value is the mean absolute (or squared) difference over a patch of
    ``patch_fraction`` of the canvas, same origin for both images.  The
    returned gradient reaches ``scene_out`` points and widths only.
    """
    config = config if config is not None else LossConfig()
    config.validate()
    render_config.validate()
    rng = _resolve_rng(rng, config)
    origin = _patch_geometry(config, render_config, rng)

    leaves = _scene_leaves(scene_out)
    img_out_t = _render_graph(scene_out, leaves, render_config, contour=True)
    with torch.no_grad():
        content_leaves = _scene_leaves(scene_content)
        img_content_t = _render_graph(scene_content, content_leaves, render_config, contour=True)
    value_t = _contour_value(img_out_t, img_content_t, origin, config.contour_variant)
    grads = torch.autograd.grad(value_t, leaves, allow_unused=True)
    out = [
        np.zeros(leaf.shape[0]) if g is None else g.numpy().copy()
        for g, leaf in zip(grads, leaves)
    ]
    return float(value_t.detach()), ParamGroups(points=out[0], colors=out[1], widths=out[2])


def total_loss(
    scene_out: Scene,
    style_image,
    scene_content: Scene,
    net: FeatureNet | WeightStore,
    render_config: RenderConfig,
    config: LossConfig | None = None,
    rng: np.random.Generator | None = None,
) -> tuple[LossReport, ParamGroups]:
    """The full objective and its gradient for the scene parameters.

    Renders ``scene_out``, measures the perceptual distance of the RGB render
    to ``style_image`` (already at the working resolution) and the contour
    divergence from ``scene_content``, and returns
    ``total = lpips + contour_weight * contour`` with the fused gradient.
    """
    config = config if config is not None else LossConfig()
    config.validate()
    render_config.validate()
    net = _as_feature_net(net)
    style = check_image(style_image, "style_image", channels=(3,))
    expected = (int(render_config.out_height), int(render_config.out_width), 3)
    if style.shape != expected:
        raise DimensionError(
            f"style_image shape {style.shape} does not match the render resolution {expected}"
        )
    net.check_input_size(expected[0], expected[1])

    rng = _resolve_rng(rng, config)
    s = float(rng.uniform(0.0, 1.0)) if config.color_scale_transform else 1.0
    origin = _patch_geometry(config, render_config, rng)

    leaves = _scene_leaves(scene_out)

    # Perceptual term.
    img_t = _render_graph(scene_out, leaves, render_config, contour=False)
    rgb_t = img_t[:, :, :3].permute(2, 0, 1).unsqueeze(0).to(net.dtype)
    s_t = torch.tensor(s, dtype=net.dtype)
    taps_x = net.forward_t(rgb_t * s_t)
    with torch.no_grad():
        y_t = _image_to_batch(style, net.dtype)
        taps_y = net.forward_t(y_t * s_t)
    lpips_t = _lpips_from_taps(taps_x, taps_y, net.channel_weights)

    # Contour term (colors play no role here).
    contour_out_t = _render_graph(scene_out, leaves, render_config, contour=True)
    with torch.no_grad():
        content_leaves = _scene_leaves(scene_content)
        contour_content_t = _render_graph(
            scene_content, content_leaves, render_config, contour=True
        )
    contour_t = _contour_value(contour_out_t, contour_content_t, origin, config.contour_variant)

    scalar_t = lpips_t.double() + config.contour_weight * contour_t
    grads = torch.autograd.grad(scalar_t, leaves, allow_unused=True)
    out = [
        np.zeros(leaf.shape[0]) if g is None else g.numpy().copy()
        for g, leaf in zip(grads, leaves)
    ]

    lpips_f = float(lpips_t.detach())
    contour_f = float(contour_t.detach())
    report = LossReport(
        total=lpips_f + config.contour_weight * contour_f,
        lpips_term=lpips_f,
        contour_term=contour_f,
        color_scale_used=s,
        patch_origin=(origin[0], origin[1]),
    )
    return report, ParamGroups(points=out[0], colors=out[1], widths=out[2])
