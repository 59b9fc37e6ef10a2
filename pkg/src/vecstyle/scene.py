"""In-memory vector scene model.

A :class:`Scene` is an ordered list of :class:`Shape` objects on a canvas of
fixed user-unit dimensions.  Every shape outline is stored as cubic Bezier
subpaths — lines, quadratics and elliptical shapes are converted to cubics
when the scene is built (see :mod:`vecstyle.svg_io`).  All containers are
frozen dataclasses holding read-only float64 arrays, so a Scene can be
hashed-by-identity, shared between threads, and safely cached.

The optimizable view of a scene is :class:`ParamGroups`: three flat float64
vectors (anchor/control point coordinates, color channels, stroke widths).
``extract_params`` and ``apply_params`` form a bijection between a scene and
its groups; the flattening order is deterministic and documented on
``extract_params``.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Iterator

import numpy as np

from .errors import DimensionError

__all__ = [
    "Paint",
    "Subpath",
    "Shape",
    "Scene",
    "ParamGroups",
    "ParamLayout",
    "ShapeSlices",
    "extract_params",
    "apply_params",
    "param_layout",
]


def _readonly_f64(a, shape_suffix: tuple[int, ...] | None = None) -> np.ndarray:
    arr = np.ascontiguousarray(np.asarray(a, dtype=np.float64))
    if shape_suffix is not None and arr.shape[1:] != shape_suffix and arr.shape != shape_suffix:
        raise DimensionError(f"expected trailing dimensions {shape_suffix}, got shape {arr.shape}")
    arr.flags.writeable = False
    return arr


@dataclass(frozen=True)
class Paint:
    """Fill or stroke paint: nothing, a solid RGBA color, or a linear gradient.

    ``kind`` is one of ``"none"``, ``"solid"``, ``"gradient"``.  Solid paints
    carry ``rgba`` (4,); gradients carry ``stop_offsets`` (S,), ``stop_colors``
    (S, 4) and an axis ``start``/``end`` in user units.  All channels live in
    [0, 1].  Gradient geometry (offsets and axis) is frozen metadata — only
    the stop colors are optimizable.
    """

    kind: str
    rgba: np.ndarray | None = None
    stop_offsets: np.ndarray | None = None
    stop_colors: np.ndarray | None = None
    start: tuple[float, float] | None = None
    end: tuple[float, float] | None = None

    def __post_init__(self):
        if self.kind not in ("none", "solid", "gradient"):
            raise DimensionError(f"unknown paint kind {self.kind!r}")
        if self.kind == "solid":
            rgba = _readonly_f64(self.rgba)
            if rgba.shape != (4,):
                raise DimensionError(f"solid paint needs 4 channels, got shape {rgba.shape}")
            if np.any(rgba < 0.0) or np.any(rgba > 1.0):
                raise DimensionError("solid paint channels must lie in [0, 1]")
            object.__setattr__(self, "rgba", rgba)
        elif self.kind == "gradient":
            offs = _readonly_f64(self.stop_offsets)
            cols = _readonly_f64(self.stop_colors)
            if offs.ndim != 1 or offs.size < 2:
                raise DimensionError("gradient needs at least 2 stop offsets")
            if cols.shape != (offs.size, 4):
                raise DimensionError(
                    f"gradient stop colors must have shape ({offs.size}, 4), got {cols.shape}"
                )
            if np.any(np.diff(offs) < 0.0):
                raise DimensionError("gradient stop offsets must be non-decreasing")
            if np.any(offs < 0.0) or np.any(offs > 1.0):
                raise DimensionError("gradient stop offsets must lie in [0, 1]")
            if np.any(cols < 0.0) or np.any(cols > 1.0):
                raise DimensionError("gradient stop colors must lie in [0, 1]")
            if self.start is None or self.end is None:
                raise DimensionError("gradient needs start and end points")
            object.__setattr__(self, "stop_offsets", offs)
            object.__setattr__(self, "stop_colors", cols)
            object.__setattr__(self, "start", (float(self.start[0]), float(self.start[1])))
            object.__setattr__(self, "end", (float(self.end[0]), float(self.end[1])))

    # -- constructors ------------------------------------------------------

    @staticmethod
    def none() -> "Paint":
        return Paint(kind="none")

    @staticmethod
    def solid(r: float, g: float, b: float, a: float = 1.0) -> "Paint":
        return Paint(kind="solid", rgba=np.array([r, g, b, a], dtype=np.float64))

    @staticmethod
    def linear_gradient(
        stop_offsets, stop_colors, start: tuple[float, float], end: tuple[float, float]
    ) -> "Paint":
        return Paint(
            kind="gradient",
            stop_offsets=stop_offsets,
            stop_colors=stop_colors,
            start=start,
            end=end,
        )

    @property
    def n_color_channels(self) -> int:
        """Number of optimizable color scalars this paint contributes."""
        if self.kind == "solid":
            return 4
        if self.kind == "gradient":
            return 4 * self.stop_offsets.size
        return 0

    def color_vector(self) -> np.ndarray:
        """Flat view of the optimizable color channels (possibly empty)."""
        if self.kind == "solid":
            return np.asarray(self.rgba)
        if self.kind == "gradient":
            return self.stop_colors.reshape(-1)
        return np.empty(0, dtype=np.float64)

    def with_color_vector(self, flat: np.ndarray) -> "Paint":
        """Return a copy with color channels replaced by ``flat``."""
        flat = np.asarray(flat, dtype=np.float64)
        if flat.size != self.n_color_channels:
            raise DimensionError(
                f"paint expects {self.n_color_channels} color channels, got {flat.size}"
            )
        if self.kind == "solid":
            return Paint(kind="solid", rgba=flat.copy())
        if self.kind == "gradient":
            return Paint(
                kind="gradient",
                stop_offsets=self.stop_offsets,
                stop_colors=flat.reshape(-1, 4).copy(),
                start=self.start,
                end=self.end,
            )
        return self


@dataclass(frozen=True)
class Subpath:
    """A chain of cubic Bezier segments.

    ``points`` has shape (N, 2).  An open subpath with k segments stores
    3k + 1 points: on-curve point, two control points, on-curve point, ...
    A closed subpath stores 3k points; the final segment wraps from point
    3k - 1 back to point 0.  k >= 1 always.
    """

    points: np.ndarray
    closed: bool

    def __post_init__(self):
        pts = _readonly_f64(self.points)
        if pts.ndim != 2 or pts.shape[1] != 2:
            raise DimensionError(f"subpath points must have shape (N, 2), got {pts.shape}")
        n = pts.shape[0]
        if self.closed:
            if n < 3 or n % 3 != 0:
                raise DimensionError(f"closed subpath needs 3k points (k >= 1), got {n}")
        else:
            if n < 4 or n % 3 != 1:
                raise DimensionError(f"open subpath needs 3k + 1 points (k >= 1), got {n}")
        if not np.all(np.isfinite(pts)):
            raise DimensionError("subpath points must be finite")
        object.__setattr__(self, "points", pts)
        object.__setattr__(self, "closed", bool(self.closed))

    @property
    def n_segments(self) -> int:
        return self.points.shape[0] // 3

    def segments(self) -> Iterator[np.ndarray]:
        """Yield each cubic as a (4, 2) array of control points."""
        pts = self.points
        n = pts.shape[0]
        count = self.n_segments
        for k in range(count):
            i = 3 * k
            if self.closed and k == count - 1:
                yield np.vstack([pts[i : i + 3], pts[:1]])
            else:
                yield pts[i : i + 4]


@dataclass(frozen=True)
class Shape:
    """One paintable path: a list of subpaths plus fill/stroke appearance."""

    subpaths: tuple[Subpath, ...]
    fill: Paint = field(default_factory=Paint.none)
    stroke: Paint = field(default_factory=Paint.none)
    stroke_width: float = 0.0

    def __post_init__(self):
        sub = tuple(self.subpaths)
        if not sub:
            raise DimensionError("shape needs at least one subpath")
        if not all(isinstance(s, Subpath) for s in sub):
            raise DimensionError("shape subpaths must be Subpath instances")
        w = float(self.stroke_width)
        if not np.isfinite(w) or w < 0.0:
            raise DimensionError(f"stroke width must be finite and >= 0, got {w}")
        object.__setattr__(self, "subpaths", sub)
        object.__setattr__(self, "stroke_width", w)

    @property
    def n_points(self) -> int:
        return sum(s.points.shape[0] for s in self.subpaths)


@dataclass(frozen=True)
class Scene:
    """An ordered stack of shapes on a ``width`` x ``height`` canvas.

    Shapes are painted in list order (later shapes over earlier ones).
    """

    width: float
    height: float
    shapes: tuple[Shape, ...] = ()

    def __post_init__(self):
        w, h = float(self.width), float(self.height)
        if not (np.isfinite(w) and np.isfinite(h)) or w <= 0.0 or h <= 0.0:
            raise DimensionError(f"scene dimensions must be finite and > 0, got {w} x {h}")
        shapes = tuple(self.shapes)
        if not all(isinstance(s, Shape) for s in shapes):
            raise DimensionError("scene shapes must be Shape instances")
        object.__setattr__(self, "width", w)
        object.__setattr__(self, "height", h)
        object.__setattr__(self, "shapes", shapes)

    @property
    def n_shapes(self) -> int:
        return len(self.shapes)

    def counts(self) -> tuple[int, int, int]:
        """(shapes, subpaths, points) — the topology fingerprint."""
        n_sub = sum(len(s.subpaths) for s in self.shapes)
        n_pts = sum(s.n_points for s in self.shapes)
        return (len(self.shapes), n_sub, n_pts)


# ---------------------------------------------------------------------------
# Parameter flattening


@dataclass
class ParamGroups:
    """The three optimizable vectors of a scene.

    ``points``: every subpath coordinate, flattened; ``colors``: every
    optimizable color channel (solid RGBA or gradient stop colors, fill
    before stroke); ``widths``: one stroke width per shape.
    """

    points: np.ndarray
    colors: np.ndarray
    widths: np.ndarray

    def __post_init__(self):
        self.points = np.ascontiguousarray(self.points, dtype=np.float64)
        self.colors = np.ascontiguousarray(self.colors, dtype=np.float64)
        self.widths = np.ascontiguousarray(self.widths, dtype=np.float64)
        for name in ("points", "colors", "widths"):
            v = getattr(self, name)
            if v.ndim != 1:
                raise DimensionError(f"{name} must be a flat vector, got shape {v.shape}")


@dataclass(frozen=True)
class ShapeSlices:
    """Where one shape's parameters live inside the flat group vectors."""

    point_slices: tuple[slice, ...]  # one per subpath, into ``points``
    fill_colors: slice
    stroke_colors: slice
    width_index: int


@dataclass(frozen=True)
class ParamLayout:
    """Index map between a scene and its :class:`ParamGroups`."""

    n_points: int
    n_colors: int
    n_widths: int
    shapes: tuple[ShapeSlices, ...]


def param_layout(scene: Scene) -> ParamLayout:
    """Compute the deterministic flattening layout for ``scene``."""
    p = c = 0
    per_shape: list[ShapeSlices] = []
    for i, shape in enumerate(scene.shapes):
        sub_slices = []
        for sp in shape.subpaths:
            n = sp.points.size  # 2 coords per point
            sub_slices.append(slice(p, p + n))
            p += n
        fc = slice(c, c + shape.fill.n_color_channels)
        c = fc.stop
        sc = slice(c, c + shape.stroke.n_color_channels)
        c = sc.stop
        per_shape.append(
            ShapeSlices(
                point_slices=tuple(sub_slices),
                fill_colors=fc,
                stroke_colors=sc,
                width_index=i,
            )
        )
    return ParamLayout(n_points=p, n_colors=c, n_widths=len(scene.shapes), shapes=tuple(per_shape))


def extract_params(scene: Scene) -> ParamGroups:
    """Flatten a scene into its three parameter groups.

    Order is deterministic: shapes in document order; within a shape, subpath
    points first (row-major x, y pairs), then fill color channels, then
    stroke color channels; one stroke width per shape regardless of whether
    the shape has a stroke paint.  ``apply_params(scene, extract_params(scene))``
    reproduces the scene exactly.
    """
    layout = param_layout(scene)
    points = np.empty(layout.n_points, dtype=np.float64)
    colors = np.empty(layout.n_colors, dtype=np.float64)
    widths = np.empty(layout.n_widths, dtype=np.float64)
    for shape, sl in zip(scene.shapes, layout.shapes):
        for sp, psl in zip(shape.subpaths, sl.point_slices):
            points[psl] = sp.points.reshape(-1)
        colors[sl.fill_colors] = shape.fill.color_vector()
        colors[sl.stroke_colors] = shape.stroke.color_vector()
        widths[sl.width_index] = shape.stroke_width
    return ParamGroups(points=points, colors=colors, widths=widths)


def apply_params(scene: Scene, groups: ParamGroups) -> Scene:
    """Rebuild ``scene`` with parameter values taken from ``groups``.

    Color channels are clamped to [0, 1] and widths to >= 0 so that any
    optimizer step yields a valid scene.  Topology (shape/subpath/point
    counts, paint kinds, gradient geometry) is preserved exactly.
    """
    layout = param_layout(scene)
    if groups.points.size != layout.n_points:
        raise DimensionError(
            f"scene expects {layout.n_points} point coordinates, got {groups.points.size}"
        )
    if groups.colors.size != layout.n_colors:
        raise DimensionError(
            f"scene expects {layout.n_colors} color channels, got {groups.colors.size}"
        )
    if groups.widths.size != layout.n_widths:
        raise DimensionError(f"scene expects {layout.n_widths} widths, got {groups.widths.size}")

    colors = np.clip(groups.colors, 0.0, 1.0)
    widths = np.maximum(groups.widths, 0.0)

    new_shapes = []
    for shape, sl in zip(scene.shapes, layout.shapes):
        new_subs = []
        for sp, psl in zip(shape.subpaths, sl.point_slices):
            pts = groups.points[psl].reshape(-1, 2)
            new_subs.append(Subpath(points=pts, closed=sp.closed))
        fill = shape.fill.with_color_vector(colors[sl.fill_colors])
        stroke = shape.stroke.with_color_vector(colors[sl.stroke_colors])
        new_shapes.append(
            Shape(
                subpaths=tuple(new_subs),
                fill=fill,
                stroke=stroke,
                stroke_width=float(widths[sl.width_index]),
            )
        )
    return Scene(width=scene.width, height=scene.height, shapes=tuple(new_shapes))
