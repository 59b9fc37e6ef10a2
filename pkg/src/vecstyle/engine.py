"""Iterative optimization loop over scene parameters.

``run`` drives Adam over the three parameter groups (anchor points, colors,
stroke widths), each with its own learning rate, minimizing the total loss
against a style raster.  Shapes are never created or deleted: topology
(shape, subpath, and point counts) is constant across iterations.  Colors are
clamped to [0, 1] and widths to >= 0 after every step.

The point learning rate defaults to a schedule over the scene's shape count;
color and width rates default to 0.01 and 0.1.  Runs are deterministic: one
RNG seeded from ``rng_seed`` feeds the per-iteration loss randomness, and all
parameter arithmetic is float64 numpy.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .errors import DimensionError, NumericalAbortError
from .features import FeatureNet, WeightStore
from .losses import LossConfig, LossReport, _as_feature_net, total_loss
from .raster import RenderConfig, render, to_rgb, write_png
from .scene import ParamGroups, Scene, apply_params, extract_params
from .svg_io import load_svg, save_svg
from .validation import check_image

__all__ = [
    "OptimConfig",
    "AdamMoments",
    "RunState",
    "point_lr_schedule",
    "run",
    "snapshot",
    "write_history_csv",
    "working_resolution",
    "prepare_style_image",
]

_GROUPS = ("points", "colors", "widths")

HISTORY_HEADER = "iter,total,lpips,contour,lr_points,lr_color,lr_width"


@dataclass
class OptimConfig:
    """Loop settings.  ``lr_points="auto"`` picks the shape-count schedule."""

    iterations: int = 150
    lr_color: float = 0.01
    lr_width: float = 0.1
    lr_points: float | str = "auto"
    betas: tuple[float, float] = (0.9, 0.999)
    adam_eps: float = 1e-8
    snapshot_every: int = 0
    snapshot_dir: str | Path | None = None
    rng_seed: int = 0

    def validate(self) -> None:
        if not isinstance(self.iterations, int) or self.iterations < 0:
            raise DimensionError(f"iterations must be a non-negative integer, got {self.iterations!r}")
        for name, value in (("lr_color", self.lr_color), ("lr_width", self.lr_width)):
            if not (isinstance(value, (int, float)) and math.isfinite(value) and value >= 0):
                raise DimensionError(f"{name} must be a finite non-negative number, got {value!r}")
        if self.lr_points != "auto" and not (
            isinstance(self.lr_points, (int, float))
            and math.isfinite(self.lr_points)
            and self.lr_points >= 0
        ):
            raise DimensionError(
                f'lr_points must be "auto" or a finite non-negative number, got {self.lr_points!r}'
            )
        b1, b2 = self.betas
        if not (0.0 <= b1 < 1.0 and 0.0 <= b2 < 1.0):
            raise DimensionError(f"betas must lie in [0, 1), got {self.betas!r}")
        if not (self.adam_eps > 0):
            raise DimensionError(f"adam_eps must be positive, got {self.adam_eps!r}")
        if not isinstance(self.snapshot_every, int) or self.snapshot_every < 0:
            raise DimensionError(f"snapshot_every must be a non-negative integer, got {self.snapshot_every!r}")
        if self.snapshot_every > 0 and self.snapshot_dir is None:
            raise DimensionError("snapshot_every > 0 requires snapshot_dir")


@dataclass
class AdamMoments:
    """First/second moment estimates and step counter for one group."""

    m: np.ndarray
    v: np.ndarray
    step: int = 0


@dataclass
class RunState:
    """Everything a snapshot needs: the evolving scene, the iteration
    counter, per-group Adam moments, and the loss history so far."""

    scene: Scene
    iteration: int
    moments: dict[str, AdamMoments]
    history: list[LossReport]
    learning_rates: dict[str, float]
    render_config: RenderConfig


def point_lr_schedule(n_shapes: int) -> float:
    """Anchor-point learning rate as a function of scene shape count.
    Boundaries (300, 1000, 1600) belong to the higher-rate bucket."""
    if not isinstance(n_shapes, int) or n_shapes < 1:
        raise DimensionError(f"n_shapes must be a positive integer, got {n_shapes!r}")
    if n_shapes < 300:
        return 0.2
    if n_shapes < 1000:
        return 0.3
    if n_shapes < 1600:
        return 0.4
    return 0.8


def _adam_step(
    param: np.ndarray,
    moments: AdamMoments,
    grad: np.ndarray,
    lr: float,
    betas: tuple[float, float],
    eps: float,
) -> None:
    b1, b2 = betas
    moments.step += 1
    moments.m = b1 * moments.m + (1.0 - b1) * grad
    moments.v = b2 * moments.v + (1.0 - b2) * (grad * grad)
    m_hat = moments.m / (1.0 - b1**moments.step)
    v_hat = moments.v / (1.0 - b2**moments.step)
    param -= lr * m_hat / (np.sqrt(v_hat) + eps)


def _require_finite(values: np.ndarray, iteration: int, group: str, what: str) -> None:
    if not np.all(np.isfinite(values)):
        raise NumericalAbortError(iteration, group, f"non-finite {what}")


def run(
    content: Scene,
    style_image,
    config: OptimConfig,
    loss_config: LossConfig,
    net: FeatureNet | WeightStore,
    render_config: RenderConfig | None = None,
) -> tuple[Scene, list[LossReport]]:
    """Optimize ``content`` toward ``style_image`` (already at the working
    resolution) and return the final scene plus the full loss history
    (``iterations + 1`` reports; the last one evaluates the final state).
    """
    config.validate()
    loss_config.validate()
    net = _as_feature_net(net)
    style = check_image(style_image, "style_image", channels=(3,))
    if render_config is None:
        render_config = RenderConfig(out_width=style.shape[1], out_height=style.shape[0])
    render_config.validate()

    n_shapes, _, _ = content.counts()
    if n_shapes < 1:
        raise DimensionError("content scene has no shapes to optimize")
    lrs = {
        "points": point_lr_schedule(n_shapes) if config.lr_points == "auto" else float(config.lr_points),
        "colors": float(config.lr_color),
        "widths": float(config.lr_width),
    }

    start = extract_params(content)
    params = {name: getattr(start, name).copy() for name in _GROUPS}
    moments = {
        name: AdamMoments(m=np.zeros_like(params[name]), v=np.zeros_like(params[name]))
        for name in _GROUPS
    }
    rng = np.random.default_rng(config.rng_seed)
    history: list[LossReport] = []
    state = RunState(
        scene=content,
        iteration=0,
        moments=moments,
        history=history,
        learning_rates=lrs,
        render_config=render_config,
    )
    snap_dir = Path(config.snapshot_dir) if config.snapshot_every > 0 else None

    scene_cur = content
    for it in range(config.iterations):
        report, grads = total_loss(scene_cur, style, content, net, render_config, loss_config, rng=rng)
        if not math.isfinite(report.total):
            raise NumericalAbortError(it, "loss", f"non-finite total loss {report.total!r}")
        history.append(report)
        for name in _GROUPS:
            grad = getattr(grads, name)
            _require_finite(grad, it, name, "gradient")
            _adam_step(params[name], moments[name], grad, lrs[name], config.betas, config.adam_eps)
            _require_finite(params[name], it, name, "parameter")
        np.clip(params["colors"], 0.0, 1.0, out=params["colors"])
        np.maximum(params["widths"], 0.0, out=params["widths"])
        scene_cur = apply_params(
            content,
            ParamGroups(points=params["points"], colors=params["colors"], widths=params["widths"]),
        )
        state.scene = scene_cur
        state.iteration = it + 1
        if snap_dir is not None and (it + 1) % config.snapshot_every == 0:
            snapshot(state, snap_dir)

    final_report, _ = total_loss(scene_cur, style, content, net, render_config, loss_config, rng=rng)
    if not math.isfinite(final_report.total):
        raise NumericalAbortError(config.iterations, "loss", "non-finite total loss")
    history.append(final_report)
    state.iteration = config.iterations
    if snap_dir is not None:
        snap_dir.mkdir(parents=True, exist_ok=True)
        write_history_csv(snap_dir / "history.csv", history, lrs)
    return scene_cur, history


def snapshot(state: RunState, directory: str | Path) -> list[Path]:
    """Write ``iter_NNNNNN.svg`` / ``.png`` for the current state plus the
    cumulative ``history.csv``; returns the written paths."""
    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    tag = f"iter_{state.iteration:06d}"
    svg_path = directory / f"{tag}.svg"
    png_path = directory / f"{tag}.png"
    csv_path = directory / "history.csv"
    save_svg(state.scene, svg_path)
    image, _ = render(state.scene, state.render_config)
    write_png(to_rgb(image.data), png_path)
    write_history_csv(csv_path, state.history, state.learning_rates)
    return [svg_path, png_path, csv_path]


def write_history_csv(path: str | Path, history: list[LossReport], learning_rates: dict[str, float]) -> None:
    """One row per report: iteration index and loss terms at 9 significant
    digits, plus the (constant) per-group learning rates."""
    lr_p = format(learning_rates["points"], ".9g")
    lr_c = format(learning_rates["colors"], ".9g")
    lr_w = format(learning_rates["widths"], ".9g")
    lines = [HISTORY_HEADER]
    for i, rep in enumerate(history):
        lines.append(
            f"{i},{rep.total:.9g},{rep.lpips_term:.9g},{rep.contour_term:.9g},{lr_p},{lr_c},{lr_w}"
        )
    Path(path).write_text("\n".join(lines) + "\n", encoding="utf-8")


def working_resolution(scene: Scene, cap: int = 512) -> tuple[int, int]:
    """Pixel dimensions for a scene: the native viewport, shrunk (aspect
    preserved) so the long side is at most ``cap``."""
    if cap < 1:
        raise DimensionError(f"resolution cap must be >= 1, got {cap!r}")
    w, h = float(scene.width), float(scene.height)
    if not (w > 0 and h > 0):
        raise DimensionError(f"scene has a degenerate viewport {w}x{h}")
    long_side = max(w, h)
    scale = min(1.0, cap / long_side)
    return max(1, round(w * scale)), max(1, round(h * scale))


def _resize_rgb(arr: np.ndarray, width: int, height: int) -> np.ndarray:
    from PIL import Image

    if arr.shape[0] == height and arr.shape[1] == width:
        return arr
    channels = []
    for c in range(3):
        im = Image.fromarray(arr[:, :, c].astype(np.float32), mode="F")
        channels.append(np.asarray(im.resize((width, height), Image.BILINEAR), dtype=np.float64))
    return np.clip(np.stack(channels, axis=-1), 0.0, 1.0)


def prepare_style_image(source, width: int, height: int) -> np.ndarray:
    """Produce the (height, width, 3) float style raster from a Scene, an
    image array, or a path to an SVG or raster file.  SVG sources are
    rendered once at the target resolution; raster files are composited over
    white and resized."""
    if isinstance(source, Scene):
        image, _ = render(source, RenderConfig(out_width=width, out_height=height))
        return to_rgb(image.data)
    if isinstance(source, np.ndarray):
        arr = check_image(source, "style_image", channels=(3,))
        return _resize_rgb(arr, width, height)
    path = Path(source)
    if path.suffix.lower() == ".svg":
        return prepare_style_image(load_svg(path), width, height)
    from PIL import Image

    with Image.open(path) as im:
        rgba = np.asarray(im.convert("RGBA"), dtype=np.float64) / 255.0
    alpha = rgba[:, :, 3:4]
    rgb = rgba[:, :, :3] * alpha + (1.0 - alpha)
    return _resize_rgb(rgb, width, height)
