"""Differentiable vector rasterizer.

Turns a :class:`~vecstyle.scene.Scene` into an RGBA image while keeping the
render differentiable with respect to every scene parameter (anchor/control
points, colors, stroke widths).  The algorithm:

1. Each cubic segment is flattened into a polyline.  One subdivision count
   is shared by every segment of a render, solved from the chord-height
   bound at the canvas diagonal so the polyline stays within
   ``flatten_tolerance`` of the true curve.  Because the count depends only
   on the canvas and the tolerance — never on control-point geometry — the
   rendered image is a continuous function of the scene parameters;
   gradients flow through the vertex positions at fixed curve parameters.
2. Fill coverage: pixel insideness comes from a scanline winding count
   (nonzero or even-odd).  Within a band around the outline, coverage is a
   smooth ramp of the signed distance to the nearest outline edge, computed
   per pixel from the single closest edge (selected off-graph, differentiable
   through the selected edge's endpoints).  Pixels farther from the outline
   than the anti-aliasing bandwidth get their exact 0/1 winding value, so
   interior coverage saturates to exactly 1.0 and exterior to exactly 0.0.
3. Stroke coverage is the band of width ``stroke_width`` around the
   centerline: ``ramp(w/2 - d) - ramp(-w/2 - d)``.  This gives round joins
   and caps for free and renders exactly nothing at zero width.
4. Layers composite in document order with premultiplied source-over
   blending, fill before stroke per shape, over an opaque background.

All geometry math runs in float64.  The returned image is clamped to [0, 1]
with a straight-through clamp, so saturated pixels still propagate
gradients.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import torch

from .errors import DimensionError, TapeConsumedError
from .scene import Paint, ParamGroups, Scene, Shape, param_layout
from .validation import check_image

__all__ = [
    "RenderConfig",
    "RasterImage",
    "RenderTape",
    "render",
    "render_contour",
    "backward",
    "to_rgb",
    "write_png",
]

_MAX_SEGMENT_PIECES = 128
_CONTOUR_FILL = (0.0, 0.0, 0.0, 1.0)  # opaque black
_CONTOUR_STROKE = (1.0, 1.0, 1.0, 1.0)  # opaque white
_CONTOUR_BACKGROUND = (1.0, 1.0, 1.0)


@dataclass
class RenderConfig:
    """Rasterization settings.

    ``flatten_tolerance`` is the chord-height tolerance in user units;
    ``aa_bandwidth`` the half-width of the coverage ramp in pixels.
    """

    out_width: int
    out_height: int
    flatten_tolerance: float = 0.1
    aa_bandwidth: float = 1.0
    fill_rule: str = "nonzero"
    background: tuple[float, float, float] = (1.0, 1.0, 1.0)

    def validate(self) -> None:
        if int(self.out_width) != self.out_width or self.out_width < 1:
            raise DimensionError(f"out_width must be a positive integer, got {self.out_width!r}")
        if int(self.out_height) != self.out_height or self.out_height < 1:
            raise DimensionError(f"out_height must be a positive integer, got {self.out_height!r}")
        if not (self.flatten_tolerance > 0.0):
            raise DimensionError(f"flatten_tolerance must be > 0, got {self.flatten_tolerance!r}")
        if not (0.5 <= self.aa_bandwidth <= 8.0):
            raise DimensionError(
                f"aa_bandwidth must lie in [0.5, 8] pixels, got {self.aa_bandwidth!r}"
            )
        if self.fill_rule not in ("nonzero", "evenodd"):
            raise DimensionError(f"fill_rule must be 'nonzero' or 'evenodd', got {self.fill_rule!r}")
        bg = np.asarray(self.background, dtype=np.float64)
        if bg.shape != (3,) or not np.all(np.isfinite(bg)) or bg.min() < 0 or bg.max() > 1:
            raise DimensionError(f"background must be 3 channels in [0, 1], got {self.background!r}")


@dataclass
class RasterImage:
    """A rendered frame: (H, W, 4) float64 RGBA with values in [0, 1]."""

    data: np.ndarray

    @property
    def height(self) -> int:
        return self.data.shape[0]

    @property
    def width(self) -> int:
        return self.data.shape[1]


class RenderTape:
    """Opaque handle to one render's autograd graph (single use)."""

    def __init__(self, image_t: torch.Tensor, leaves: tuple[torch.Tensor, ...]):
        self._image_t = image_t
        self._leaves = leaves
        self._consumed = False


# ---------------------------------------------------------------------------
# Small numpy helpers (all no-grad bookkeeping)


def _concat_ranges(starts: np.ndarray, counts: np.ndarray) -> np.ndarray:
    """[s0, s0+1, ..., s0+c0-1, s1, ...] without a Python loop."""
    total = int(counts.sum())
    if total == 0:
        return np.empty(0, dtype=np.int64)
    rep = np.repeat(np.cumsum(counts) - counts, counts)
    return np.repeat(starts, counts) + (np.arange(total, dtype=np.int64) - rep)


def _winding_inside(
    verts: np.ndarray, edges: np.ndarray, height: int, width: int, fill_rule: str
) -> np.ndarray:
    """Boolean (H*W,) insideness of pixel centers under the fill rule."""
    inside = np.zeros(height * width, dtype=bool)
    if edges.shape[0] == 0:
        return inside
    a = verts[edges[:, 0]]
    b = verts[edges[:, 1]]
    ay, by = a[:, 1], b[:, 1]
    lo = np.minimum(ay, by)
    hi = np.maximum(ay, by)
    sign = np.where(by > ay, 1, -1).astype(np.int64)
    # Pixel-center row yc = r + 0.5 crosses the edge iff lo < yc <= hi.
    r0 = np.floor(lo - 0.5).astype(np.int64) + 1
    r1 = np.floor(hi - 0.5).astype(np.int64)
    r0 = np.maximum(r0, 0)
    r1 = np.minimum(r1, height - 1)
    counts = np.maximum(r1 - r0 + 1, 0)
    keep = counts > 0
    if not np.any(keep):
        return inside
    a, b, sign, r0, counts = a[keep], b[keep], sign[keep], r0[keep], counts[keep]
    eidx = np.repeat(np.arange(a.shape[0]), counts)
    rows = _concat_ranges(r0, counts)
    yc = rows.astype(np.float64) + 0.5
    ax, ayk = a[eidx, 0], a[eidx, 1]
    bx, byk = b[eidx, 0], b[eidx, 1]
    t = (yc - ayk) / (byk - ayk)
    xc = ax + t * (bx - ax)
    # First column whose center lies at or right of the crossing.
    c0 = np.ceil(xc - 0.5).astype(np.int64)
    c0 = np.clip(c0, 0, width)  # column `width` is a discard bucket
    delta = np.zeros((height, width + 1), dtype=np.int64)
    np.add.at(delta, (rows, c0), sign[eidx])
    wind = np.cumsum(delta[:, :width], axis=1)
    if fill_rule == "evenodd":
        return (wind % 2 != 0).ravel()
    return (wind != 0).ravel()


def _edge_pixel_pairs(
    verts: np.ndarray, edges: np.ndarray, height: int, width: int, margin: float
) -> tuple[np.ndarray, np.ndarray]:
    """(edge_index, pixel_index) pairs for pixels within ``margin`` of each
    edge's bounding box.  The inflated box contains every pixel center within
    ``margin`` of the segment, so per-pixel minima over pairs are exact."""
    if edges.shape[0] == 0:
        return np.empty(0, dtype=np.int64), np.empty(0, dtype=np.int64)
    a = verts[edges[:, 0]]
    b = verts[edges[:, 1]]
    minx = np.minimum(a[:, 0], b[:, 0]) - margin
    maxx = np.maximum(a[:, 0], b[:, 0]) + margin
    miny = np.minimum(a[:, 1], b[:, 1]) - margin
    maxy = np.maximum(a[:, 1], b[:, 1]) + margin
    c0 = np.maximum(np.ceil(minx - 0.5).astype(np.int64), 0)
    c1 = np.minimum(np.floor(maxx - 0.5).astype(np.int64), width - 1)
    r0 = np.maximum(np.ceil(miny - 0.5).astype(np.int64), 0)
    r1 = np.minimum(np.floor(maxy - 0.5).astype(np.int64), height - 1)
    ncols = np.maximum(c1 - c0 + 1, 0)
    nrows = np.maximum(r1 - r0 + 1, 0)
    keep = (ncols > 0) & (nrows > 0)
    if not np.any(keep):
        return np.empty(0, dtype=np.int64), np.empty(0, dtype=np.int64)
    kidx = np.flatnonzero(keep)
    c0, r0, ncols, nrows = c0[keep], r0[keep], ncols[keep], nrows[keep]
    eidx_r = np.repeat(np.arange(kidx.size), nrows)
    rowv = _concat_ranges(r0, nrows)
    cn = ncols[eidx_r]
    eidx = np.repeat(kidx[eidx_r], cn)
    rows = np.repeat(rowv, cn)
    cols = _concat_ranges(c0[eidx_r], cn)
    return eidx, rows * width + cols


def _segment_distance_np(
    verts: np.ndarray, edges: np.ndarray, eidx: np.ndarray, px: np.ndarray, py: np.ndarray
) -> np.ndarray:
    """Point-to-segment distances for (pair) arrays, numpy mirror of the
    differentiable formula (used only to select the closest edge)."""
    a = verts[edges[eidx, 0]]
    b = verts[edges[eidx, 1]]
    ab = b - a
    apx = px - a[:, 0]
    apy = py - a[:, 1]
    denom = np.maximum(ab[:, 0] ** 2 + ab[:, 1] ** 2, 1e-30)
    t = np.clip((apx * ab[:, 0] + apy * ab[:, 1]) / denom, 0.0, 1.0)
    dx = apx - t * ab[:, 0]
    dy = apy - t * ab[:, 1]
    return np.sqrt(dx * dx + dy * dy + 1e-24)


def _shoelace_area(verts: np.ndarray) -> float:
    x, y = verts[:, 0], verts[:, 1]
    return 0.5 * float(np.sum(x * np.roll(y, -1) - np.roll(x, -1) * y))


# ---------------------------------------------------------------------------
# Differentiable pieces (torch, float64)


def _smooth_ramp(x: torch.Tensor, half_width: float) -> torch.Tensor:
    """C1 ramp: exactly 0 for x <= -h, exactly 1 for x >= h."""
    u = torch.clamp((x + half_width) / (2.0 * half_width), 0.0, 1.0)
    return u * u * (3.0 - 2.0 * u)


def _segment_distance_t(
    verts_t: torch.Tensor, edges: np.ndarray, eidx: np.ndarray, centers: torch.Tensor
) -> torch.Tensor:
    """Differentiable point-to-segment distance for selected pairs."""
    e0 = torch.from_numpy(edges[eidx, 0])
    e1 = torch.from_numpy(edges[eidx, 1])
    a = verts_t[e0]
    b = verts_t[e1]
    ab = b - a
    ap = centers - a
    denom = (ab * ab).sum(dim=1).clamp_min(1e-30)
    t = ((ap * ab).sum(dim=1) / denom).clamp(0.0, 1.0)
    diff = ap - t.unsqueeze(1) * ab
    # The tiny epsilon keeps sqrt differentiable for pixel centers lying
    # exactly on the segment; it offsets distances by < 1e-12 px.
    return torch.sqrt((diff * diff).sum(dim=1) + 1e-24)


class _ShapeGeometry:
    """Flattened, pixel-space outline of one shape."""

    __slots__ = ("verts_t", "verts_np", "fill_edges", "stroke_edges")

    def __init__(self, verts_t, verts_np, fill_edges, stroke_edges):
        self.verts_t = verts_t
        self.verts_np = verts_np
        self.fill_edges = fill_edges
        self.stroke_edges = stroke_edges


def _segment_pieces(width: int, height: int, tol_user: float, px_scale: float) -> int:
    """Linear pieces per cubic segment for this render.

    One count shared by every segment, derived only from the canvas size and
    the tolerance — never from control-point geometry — so that an epsilon
    change of any parameter can never flip a subdivision count (which would
    make the rendered image discontinuous in that parameter).  The deviation
    of a cubic from its chordwise polyline after n-fold subdivision is at
    most 3*dev/(4*n^2) with dev bounded by the canvas diagonal for any curve
    that matters on screen; solving for n at ``tol_user`` user units gives
    the count below.
    """
    tol_px = max(tol_user * px_scale, 1e-6)
    diag_px = float(np.hypot(width, height))
    n = int(np.ceil(np.sqrt(3.0 * diag_px / (4.0 * tol_px))))
    return int(np.clip(n, 4, _MAX_SEGMENT_PIECES))


def _flatten_shape(
    shape: Shape,
    subpath_points_t: list[torch.Tensor],
    scale_xy: tuple[float, float],
    pieces: int,
) -> _ShapeGeometry:
    sx, sy = scale_xy
    scale_t = torch.tensor([sx, sy], dtype=torch.float64)

    vert_chunks: list[torch.Tensor] = []
    np_chunks: list[np.ndarray] = []
    fill_edges: list[np.ndarray] = []
    stroke_edges: list[np.ndarray] = []
    base = 0

    for sp, pts_user_t in zip(shape.subpaths, subpath_points_t):
        pts_t = pts_user_t * scale_t  # pixel space
        pts_np = pts_t.detach().numpy()
        n_pts = pts_np.shape[0]
        n_seg = n_pts // 3

        s0 = np.arange(n_seg, dtype=np.int64) * 3
        s1, s2 = s0 + 1, s0 + 2
        s3 = s0 + 3
        if sp.closed:
            s3 = s3 % n_pts

        # Evaluate every segment at the same fixed interior parameters.
        seg_id = np.repeat(np.arange(n_seg, dtype=np.int64), pieces)
        local = np.tile(np.arange(1, pieces + 1, dtype=np.float64) / pieces, n_seg)
        tt = torch.from_numpy(local).unsqueeze(1)
        sid = torch.from_numpy(seg_id)
        a_t = pts_t[torch.from_numpy(s0)][sid]
        b_t = pts_t[torch.from_numpy(s1)][sid]
        c_t = pts_t[torch.from_numpy(s2)][sid]
        d_t = pts_t[torch.from_numpy(s3)][sid]
        omt = 1.0 - tt
        inner = (
            omt * omt * omt * a_t
            + 3.0 * omt * omt * tt * b_t
            + 3.0 * omt * tt * tt * c_t
            + tt * tt * tt * d_t
        )
        verts = torch.cat([pts_t[0:1], inner], dim=0)
        if sp.closed:
            verts = verts[:-1]  # endpoint of the wrap segment equals vertex 0

        nv = verts.shape[0]
        chain = np.stack(
            [np.arange(nv - 1, dtype=np.int64), np.arange(1, nv, dtype=np.int64)], axis=1
        )
        ring = np.vstack([chain, [[nv - 1, 0]]])
        verts_np_sub = verts.detach().numpy()

        if abs(_shoelace_area(verts_np_sub)) > 1e-9:
            fill_edges.append(ring + base)
        stroke_edges.append((ring if sp.closed else chain) + base)

        vert_chunks.append(verts)
        np_chunks.append(verts_np_sub)
        base += nv

    verts_t = torch.cat(vert_chunks, dim=0)
    verts_np = np.vstack(np_chunks)
    fe = np.vstack(fill_edges) if fill_edges else np.empty((0, 2), dtype=np.int64)
    se = np.vstack(stroke_edges) if stroke_edges else np.empty((0, 2), dtype=np.int64)
    return _ShapeGeometry(verts_t, verts_np, fe, se)


def _band_distance(
    geo_verts_t: torch.Tensor,
    verts_np: np.ndarray,
    edges: np.ndarray,
    height: int,
    width: int,
    margin: float,
    centers_np: tuple[np.ndarray, np.ndarray],
) -> tuple[np.ndarray, torch.Tensor] | None:
    """Closest-edge distance for every pixel within ``margin`` of the outline.

    Returns (band pixel indices, differentiable distances) or None when the
    band is empty.  The closest edge per pixel is chosen off-graph with a
    deterministic tie-break; only that edge's distance enters the graph.
    """
    eidx, pix = _edge_pixel_pairs(verts_np, edges, height, width, margin)
    if eidx.size == 0:
        return None
    cx, cy = centers_np
    d_np = _segment_distance_np(verts_np, edges, eidx, cx[pix], cy[pix])
    band_pix, pair_band = np.unique(pix, return_inverse=True)
    order = np.lexsort((eidx, d_np, pair_band))
    grp = pair_band[order]
    first = np.flatnonzero(np.r_[True, grp[1:] != grp[:-1]])
    sel = order[first]
    centers_t = torch.from_numpy(np.stack([cx[pix[sel]], cy[pix[sel]]], axis=1))
    d_t = _segment_distance_t(geo_verts_t, edges, eidx[sel], centers_t)
    return band_pix, d_t


def _paint_pixels(
    paint: Paint,
    color_slice_t: torch.Tensor | None,
    centers_np: tuple[np.ndarray, np.ndarray],
    override: tuple[float, float, float, float] | None,
) -> tuple[torch.Tensor, torch.Tensor]:
    """Per-pixel (rgb, alpha) for a paint; scalars broadcast for solids."""
    if override is not None:
        rgba = torch.tensor(override, dtype=torch.float64)
        return rgba[:3], rgba[3]
    if paint.kind == "solid":
        rgba = color_slice_t
        return rgba[:3], rgba[3]
    # Linear gradient: geometry (axis, offsets) frozen; stop colors live.
    cx, cy = centers_np
    x1, y1 = paint.start
    x2, y2 = paint.end
    ax, ay = x2 - x1, y2 - y1
    denom = ax * ax + ay * ay
    if denom < 1e-24:
        t = np.ones_like(cx)  # degenerate axis paints the last stop
    else:
        t = ((cx - x1) * ax + (cy - y1) * ay) / denom
    t = np.clip(t, 0.0, 1.0)
    offs = np.asarray(paint.stop_offsets)
    hi = np.clip(np.searchsorted(offs, t, side="left"), 1, offs.size - 1)
    lo = hi - 1
    span = np.maximum(offs[hi] - offs[lo], 1e-12)
    u = np.clip((t - offs[lo]) / span, 0.0, 1.0)
    stops_t = color_slice_t.view(-1, 4)
    lo_t = torch.from_numpy(lo)
    hi_t = torch.from_numpy(hi)
    u_t = torch.from_numpy(u).unsqueeze(1)
    rgba_pix = stops_t[lo_t] * (1.0 - u_t) + stops_t[hi_t] * u_t
    return rgba_pix[:, :3], rgba_pix[:, 3]


def _render_graph(
    scene: Scene,
    leaves: tuple[torch.Tensor, torch.Tensor, torch.Tensor],
    config: RenderConfig,
    contour: bool,
) -> torch.Tensor:
    """Build the differentiable (H, W, 4) image tensor for ``scene``."""
    points_t, colors_t, widths_t = leaves
    layout = param_layout(scene)
    height, width = int(config.out_height), int(config.out_width)
    sx = width / scene.width
    sy = height / scene.height
    px_scale = float(np.sqrt(abs(sx * sy)))
    bw = float(config.aa_bandwidth)

    cols = (np.arange(width, dtype=np.float64) + 0.5)[None, :].repeat(height, 0).ravel()
    rows = (np.arange(height, dtype=np.float64) + 0.5)[:, None].repeat(width, 1).ravel()
    centers_np = (cols, rows)

    n_pix = height * width
    acc_rgb = torch.zeros((n_pix, 3), dtype=torch.float64)
    acc_a = torch.zeros(n_pix, dtype=torch.float64)

    pieces = _segment_pieces(width, height, config.flatten_tolerance, px_scale)

    for shape, sl in zip(scene.shapes, layout.shapes):
        sub_pts = [points_t[psl.start : psl.stop].view(-1, 2) for psl in sl.point_slices]
        geo = _flatten_shape(shape, sub_pts, (sx, sy), pieces)

        fill_override = _CONTOUR_FILL if (contour and shape.fill.kind != "none") else None
        stroke_override = _CONTOUR_STROKE if (contour and shape.stroke.kind != "none") else None

        # Fill layer.
        if shape.fill.kind != "none" and geo.fill_edges.shape[0] > 0:
            inside = _winding_inside(geo.verts_np, geo.fill_edges, height, width, config.fill_rule)
            base = torch.from_numpy(inside.astype(np.float64))
            band = _band_distance(
                geo.verts_t, geo.verts_np, geo.fill_edges, height, width, bw + 0.6, centers_np
            )
            if band is None:
                cov = base
            else:
                band_pix, d_t = band
                sign = np.where(inside[band_pix], 1.0, -1.0)
                sd = torch.from_numpy(sign) * d_t
                cov_band = _smooth_ramp(sd, bw)
                cov = base.index_copy(0, torch.from_numpy(band_pix), cov_band)
            rgb_p, a_p = _paint_pixels(
                shape.fill,
                colors_t[sl.fill_colors] if sl.fill_colors.stop > sl.fill_colors.start else None,
                centers_np,
                fill_override,
            )
            a = cov * a_p
            acc_rgb = acc_rgb * (1.0 - a).unsqueeze(1) + rgb_p * a.unsqueeze(1)
            acc_a = acc_a * (1.0 - a) + a

        # Stroke layer.
        if shape.stroke.kind != "none" and geo.stroke_edges.shape[0] > 0:
            w_px_t = widths_t[sl.width_index] * px_scale
            w_px = float(w_px_t.detach())
            band = _band_distance(
                geo.verts_t,
                geo.verts_np,
                geo.stroke_edges,
                height,
                width,
                max(w_px, 0.0) / 2.0 + bw + 0.6,
                centers_np,
            )
            if band is not None:
                band_pix, d_t = band
                half = w_px_t / 2.0
                cov_band = (
                    _smooth_ramp(half - d_t, bw) - _smooth_ramp(-half - d_t, bw)
                ).clamp_min(0.0)
                cov = torch.zeros(n_pix, dtype=torch.float64).index_copy(
                    0, torch.from_numpy(band_pix), cov_band
                )
                rgb_p, a_p = _paint_pixels(
                    shape.stroke,
                    colors_t[sl.stroke_colors]
                    if sl.stroke_colors.stop > sl.stroke_colors.start
                    else None,
                    centers_np,
                    stroke_override,
                )
                a = cov * a_p
                acc_rgb = acc_rgb * (1.0 - a).unsqueeze(1) + rgb_p * a.unsqueeze(1)
                acc_a = acc_a * (1.0 - a) + a

    bg = _CONTOUR_BACKGROUND if contour else tuple(float(c) for c in config.background)
    bg_t = torch.tensor(bg, dtype=torch.float64)
    rgb = acc_rgb + (1.0 - acc_a).unsqueeze(1) * bg_t
    img = torch.cat([rgb, torch.ones((n_pix, 1), dtype=torch.float64)], dim=1)
    img = img.view(height, width, 4)
    # Keep the graph rooted at the leaves even when no shape contributes a
    # differentiable pixel (all edges off-canvas, empty scene): downstream
    # autograd.grad calls need an output that requires grad.
    anchor = sum(leaf.sum() for leaf in leaves) * 0.0
    img = img + anchor
    # Straight-through clamp: exact [0, 1] values, gradients pass unchanged.
    return img + (img.clamp(0.0, 1.0) - img).detach()


def _scene_leaves(scene: Scene) -> tuple[torch.Tensor, torch.Tensor, torch.Tensor]:
    from .scene import extract_params

    groups = extract_params(scene)
    points_t = torch.from_numpy(groups.points.copy()).requires_grad_(True)
    colors_t = torch.from_numpy(groups.colors.copy()).requires_grad_(True)
    widths_t = torch.from_numpy(groups.widths.copy()).requires_grad_(True)
    return points_t, colors_t, widths_t


def _run_render(scene: Scene, config: RenderConfig, contour: bool) -> tuple[RasterImage, RenderTape]:
    if not isinstance(scene, Scene):
        raise DimensionError(f"expected a Scene, got {type(scene).__name__}")
    config.validate()
    leaves = _scene_leaves(scene)
    img_t = _render_graph(scene, leaves, config, contour=contour)
    return RasterImage(data=img_t.detach().numpy().copy()), RenderTape(img_t, leaves)


def render(scene: Scene, config: RenderConfig) -> tuple[RasterImage, RenderTape]:
    """Rasterize ``scene`` over its opaque background.

    Returns the image and a single-use tape for :func:`backward`.  The output
    alpha channel is 1 everywhere (the canvas is opaque); an empty scene
    renders to the background color.
    """
    return _run_render(scene, config, contour=False)


def render_contour(scene: Scene, config: RenderConfig) -> tuple[RasterImage, RenderTape]:
    """Rasterize the outline view of ``scene``: every fill paint replaced by
    opaque black, every stroke paint by opaque white (widths kept), on a
    white background.  Gradients flow to point and width parameters only.
    """
    return _run_render(scene, config, contour=True)


def backward(tape: RenderTape, loss_grad: np.ndarray) -> ParamGroups:
    """Pull an upstream (H, W, 4) gradient back to the scene parameters.

    The tape is consumed; a second call raises :class:`TapeConsumedError`.
    Parameters that do not influence the image (e.g. colors of a contour
    render) receive zero gradients.
    """
    if tape._consumed:
        raise TapeConsumedError("this render tape was already used for a backward pass")
    grad = np.asarray(loss_grad, dtype=np.float64)
    if grad.shape != tuple(tape._image_t.shape):
        raise DimensionError(
            f"loss gradient shape {grad.shape} does not match image shape "
            f"{tuple(tape._image_t.shape)}"
        )
    if not np.all(np.isfinite(grad)):
        raise DimensionError("loss gradient contains non-finite values")
    tape._consumed = True
    grads = torch.autograd.grad(
        outputs=tape._image_t,
        inputs=tape._leaves,
        grad_outputs=torch.from_numpy(grad),
        allow_unused=True,
    )
    out = []
    for g, leaf in zip(grads, tape._leaves):
        out.append(np.zeros(leaf.shape[0]) if g is None else g.numpy().copy())
    return ParamGroups(points=out[0], colors=out[1], widths=out[2])


def to_rgb(image: RasterImage | np.ndarray, background=(1.0, 1.0, 1.0)) -> np.ndarray:
    """Composite an RGBA image over an opaque background -> (H, W, 3)."""
    data = image.data if isinstance(image, RasterImage) else np.asarray(image)
    data = check_image(data, "image", channels=(3, 4))
    if data.shape[2] == 3:
        return data
    bg = np.asarray(background, dtype=np.float64)
    if bg.shape != (3,) or bg.min() < 0 or bg.max() > 1:
        raise DimensionError(f"background must be 3 channels in [0, 1], got {background!r}")
    a = data[:, :, 3:4]
    return data[:, :, :3] * a + bg * (1.0 - a)


def write_png(image: RasterImage | np.ndarray, path) -> None:
    """Write an RGB(A) float image to ``path`` as 8-bit PNG."""
    from PIL import Image

    data = image.data if isinstance(image, RasterImage) else np.asarray(image)
    data = check_image(data, "image", channels=(3, 4))
    u8 = np.clip(np.rint(data * 255.0), 0, 255).astype(np.uint8)
    mode = "RGBA" if u8.shape[2] == 4 else "RGB"
    Image.fromarray(u8, mode).save(path, format="PNG")
