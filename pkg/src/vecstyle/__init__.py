"""vecstyle: neural style transfer for vector images.

Optimizes the anchor points, colors, and stroke widths of an SVG scene so
that its differentiable rasterization becomes perceptually similar to a
style image, while a contour term keeps the original outlines recognizable.
"""

from .errors import (
    CyclicReferenceError,
    DimensionError,
    GradCheckError,
    NumericalAbortError,
    SvgParseError,
    TapeConsumedError,
    UnsupportedSvgFeatureError,
    VecstyleError,
    WeightFormatError,
)
from .scene import (
    Paint,
    ParamGroups,
    ParamLayout,
    Scene,
    Shape,
    Subpath,
    apply_params,
    extract_params,
    param_layout,
)
from .svg_io import load_svg, parse_svg, save_svg, serialize_svg
from .raster import (
    RasterImage,
    RenderConfig,
    RenderTape,
    backward,
    render,
    render_contour,
    to_rgb,
    write_png,
)

from .features import (
    IMAGENET_MEAN,
    IMAGENET_STD,
    FeatureNet,
    FeatureTape,
    FeatureTaps,
    TapSet,
    TrunkSpec,
    WeightStore,
    load_weights,
    save_weights,
)
from .losses import LossConfig, LossReport, contour_loss, lpips, total_loss
from .engine import (
    OptimConfig,
    RunState,
    point_lr_schedule,
    prepare_style_image,
    run,
    snapshot,
    working_resolution,
    write_history_csv,
)
from .estimator import VectorStyleTransfer

__version__ = "0.1.0"

__all__ = [
    "__version__",
    # errors
    "VecstyleError", "SvgParseError", "UnsupportedSvgFeatureError",
    "CyclicReferenceError", "DimensionError", "WeightFormatError",
    "TapeConsumedError", "NumericalAbortError", "GradCheckError",
    # scene
    "Paint", "Subpath", "Shape", "Scene",
    "ParamGroups", "ParamLayout", "extract_params", "apply_params", "param_layout",
    # svg
    "parse_svg", "serialize_svg", "load_svg", "save_svg",
    # raster
    "RenderConfig", "RasterImage", "RenderTape",
    "render", "render_contour", "backward", "to_rgb", "write_png",
    # features
    "TrunkSpec", "TapSet", "WeightStore", "FeatureNet", "FeatureTaps", "FeatureTape",
    "load_weights", "save_weights", "IMAGENET_MEAN", "IMAGENET_STD",
    # losses
    "LossConfig", "LossReport", "lpips", "contour_loss", "total_loss",
    # engine
    "OptimConfig", "RunState", "point_lr_schedule", "run", "snapshot",
    "write_history_csv", "working_resolution", "prepare_style_image",
    # estimator
    "VectorStyleTransfer",
]
