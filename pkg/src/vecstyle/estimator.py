"""scikit-learn style front end.

``VectorStyleTransfer`` wraps the optimization pipeline as a transformer:
construct with a style source and a weights source, ``fit()`` to load and
validate them, then ``transform(scenes)`` to produce stylized scenes.  All
constructor arguments are stored verbatim (``get_params``/``set_params``/
``clone`` compatible); validation happens in ``fit``.
"""

from __future__ import annotations

from pathlib import Path

import numpy as np
from sklearn.base import BaseEstimator, TransformerMixin
from sklearn.utils.validation import check_is_fitted

from .engine import OptimConfig, prepare_style_image, run, working_resolution
from .features import FeatureNet, WeightStore, load_weights
from .losses import LossConfig
from .scene import Scene
from .svg_io import load_svg
from .validation import check_image

__all__ = ["VectorStyleTransfer"]


class VectorStyleTransfer(TransformerMixin, BaseEstimator):
    """Optimize vector scenes toward the look of a style image.

    Parameters
    ----------
    style : array, Scene, or path
        Style source: an (H, W, 3) image in [0, 1], a vector scene, or a
        path to a raster/SVG file.  Resolved per input scene at its working
        resolution.
    weights : path, bytes, WeightStore, or FeatureNet
        Feature-trunk weights (``VNSTW1`` container or an in-memory store).
    iterations : int, default=150
        Optimization steps per scene.
    contour_weight : float, default=100.0
        Weight of the outline-preservation term.
    contour_variant : {"l1", "l2"}, default="l1"
    color_scale_transform : bool, default=True
        Randomly rescale both images' intensities before the perceptual
        distance each iteration.
    lr_points : float or "auto", default="auto"
        Anchor-point learning rate ("auto" = shape-count schedule).
    lr_color : float, default=0.01
    lr_width : float, default=0.1
    resolution_cap : int, default=512
        Long-side cap on the working resolution.
    random_state : int, default=0
        Seed for all per-run randomness.

    Attributes
    ----------
    net_ : FeatureNet
        The loaded feature trunk (after ``fit``).
    history_ : list
        Loss history of the most recent ``transform`` (one list per scene).
    """

    def __init__(
        self,
        style=None,
        weights=None,
        *,
        iterations: int = 150,
        contour_weight: float = 100.0,
        contour_variant: str = "l1",
        color_scale_transform: bool = True,
        lr_points="auto",
        lr_color: float = 0.01,
        lr_width: float = 0.1,
        resolution_cap: int = 512,
        random_state: int = 0,
    ):
        self.style = style
        self.weights = weights
        self.iterations = iterations
        self.contour_weight = contour_weight
        self.contour_variant = contour_variant
        self.color_scale_transform = color_scale_transform
        self.lr_points = lr_points
        self.lr_color = lr_color
        self.lr_width = lr_width
        self.resolution_cap = resolution_cap
        self.random_state = random_state

    def _optim_config(self) -> OptimConfig:
        return OptimConfig(
            iterations=self.iterations,
            lr_color=self.lr_color,
            lr_width=self.lr_width,
            lr_points=self.lr_points,
            rng_seed=self.random_state,
        )

    def _loss_config(self) -> LossConfig:
        return LossConfig(
            contour_weight=self.contour_weight,
            contour_variant=self.contour_variant,
            color_scale_transform=self.color_scale_transform,
            rng_seed=self.random_state,
        )

    def fit(self, X=None, y=None):
        """Load the weights and validate the style source.  ``X`` is unused;
        the estimator is configured entirely by its parameters."""
        if self.weights is None:
            raise ValueError("VectorStyleTransfer requires a 'weights' source")
        if self.style is None:
            raise ValueError("VectorStyleTransfer requires a 'style' source")
        weights = self.weights
        if isinstance(weights, FeatureNet):
            self.net_ = weights
        elif isinstance(weights, WeightStore):
            self.net_ = FeatureNet(weights)
        else:
            self.net_ = FeatureNet(load_weights(weights))
        style = self.style
        if isinstance(style, np.ndarray):
            self.style_ = check_image(style, "style", channels=(3,))
        elif isinstance(style, Scene):
            self.style_ = style
        else:
            path = Path(style)
            if not path.exists():
                raise ValueError(f"style file not found: {path}")
            self.style_ = path
        self._optim_config().validate()
        self._loss_config().validate()
        return self

    def _transform_one(self, scene: Scene) -> Scene:
        width, height = working_resolution(scene, self.resolution_cap)
        style_img = prepare_style_image(self.style_, width, height)
        final, history = run(
            scene, style_img, self._optim_config(), self._loss_config(), self.net_
        )
        self.history_.append(history)
        return final

    def transform(self, X):
        """Stylize one scene or a sequence of scenes.  Accepts Scene objects
        or SVG paths; returns the same container shape (one Scene, or a list
        of Scenes)."""
        check_is_fitted(self, "net_")
        self.history_ = []
        if isinstance(X, (Scene, str, Path)):
            return self._transform_one(self._as_scene(X))
        return [self._transform_one(self._as_scene(item)) for item in X]

    @staticmethod
    def _as_scene(item) -> Scene:
        if isinstance(item, Scene):
            return item
        return load_svg(item)
