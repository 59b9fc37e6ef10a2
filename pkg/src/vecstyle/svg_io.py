"""SVG parsing and serialization.

``parse_svg`` reads a static SVG subset into a :class:`~vecstyle.scene.Scene`:

* shape elements: ``path``, ``rect``, ``circle``, ``ellipse``, ``line``,
  ``polyline``, ``polygon`` (all outlines become cubic Bezier subpaths),
* path commands ``M L H V C S Q T Z`` in absolute and relative form,
* solid paints and linear gradients (``href`` chains resolved, forward
  references allowed, cycles rejected),
* nested groups with ``transform`` lists, which are flattened into the
  point coordinates,
* presentation attributes and inline ``style`` for fill/stroke/opacity.

Everything else (text, images, filters, radial gradients, CSS stylesheets,
arcs, ...) raises :class:`UnsupportedSvgFeatureError` naming the feature —
silently dropping content would make the optimization target lie about the
document.

``serialize_svg`` writes a scene back as standalone SVG with one ``path``
element per shape (all subpaths in a single ``d`` attribute) and gradient
definitions in ``<defs>``.  Path coordinates are written with 6 significant
digits; colors, opacities, widths and stop offsets with 9.
"""

from __future__ import annotations

import re
import xml.etree.ElementTree as ET
from dataclasses import dataclass, field

import numpy as np

from .errors import CyclicReferenceError, SvgParseError, UnsupportedSvgFeatureError
from .scene import Paint, Scene, Shape, Subpath

__all__ = ["parse_svg", "serialize_svg", "load_svg", "save_svg"]

_SVG_NS = "http://www.w3.org/2000/svg"
_XLINK_NS = "http://www.w3.org/1999/xlink"

_SHAPE_TAGS = {"path", "rect", "circle", "ellipse", "line", "polyline", "polygon"}
_SKIP_TAGS = {"title", "desc", "metadata", "linearGradient", "stop"}
_UNSUPPORTED_TAGS = {
    "text", "tspan", "textPath", "tref",
    "image", "filter", "feGaussianBlur",
    "radialGradient", "pattern",
    "use", "symbol", "marker", "mask", "clipPath",
    "foreignObject", "style", "script", "a", "switch", "view", "cursor",
    "animate", "animateTransform", "animateMotion", "animateColor", "set",
    "svg",  # nested viewports; the root <svg> is handled separately
    "font", "glyph", "missing-glyph",
}

# Quarter-circle cubic approximation constant: 4/3 * (sqrt(2) - 1).
_KAPPA = 0.5522847498307936

_NUM_RE = re.compile(r"[-+]?(?:\d*\.\d+|\d+\.?)(?:[eE][-+]?\d+)?")
_TRANSFORM_RE = re.compile(r"(matrix|translate|scale|rotate|skewX|skewY)\s*\(([^)]*)\)")
_URL_REF_RE = re.compile(r"url\(\s*#([^)\s]+)\s*\)")

_UNIT_TO_PX = {
    "": 1.0, "px": 1.0,
    "pt": 96.0 / 72.0, "pc": 16.0,
    "in": 96.0, "cm": 96.0 / 2.54, "mm": 96.0 / 25.4,
}

_NAMED_COLORS = {
    "black": (0, 0, 0), "white": (255, 255, 255), "red": (255, 0, 0),
    "green": (0, 128, 0), "blue": (0, 0, 255), "yellow": (255, 255, 0),
    "cyan": (0, 255, 255), "aqua": (0, 255, 255), "magenta": (255, 0, 255),
    "fuchsia": (255, 0, 255), "gray": (128, 128, 128), "grey": (128, 128, 128),
    "silver": (192, 192, 192), "maroon": (128, 0, 0), "olive": (128, 128, 0),
    "lime": (0, 255, 0), "teal": (0, 128, 128), "navy": (0, 0, 128),
    "purple": (128, 0, 128), "orange": (255, 165, 0), "brown": (165, 42, 42),
    "pink": (255, 192, 203), "gold": (255, 215, 0), "salmon": (250, 128, 114),
    "coral": (255, 127, 80), "tomato": (255, 99, 71), "orchid": (218, 112, 214),
    "plum": (221, 160, 221), "khaki": (240, 230, 140), "indigo": (75, 0, 130),
    "violet": (238, 130, 238), "turquoise": (64, 224, 208),
    "skyblue": (135, 206, 235), "steelblue": (70, 130, 180),
    "slategray": (112, 128, 144), "darkgray": (169, 169, 169),
    "darkgrey": (169, 169, 169), "lightgray": (211, 211, 211),
    "lightgrey": (211, 211, 211), "dimgray": (105, 105, 105),
    "darkred": (139, 0, 0), "darkgreen": (0, 100, 0), "darkblue": (0, 0, 139),
    "darkorange": (255, 140, 0), "darkviolet": (148, 0, 211),
    "crimson": (220, 20, 60), "chocolate": (210, 105, 30),
    "firebrick": (178, 34, 34), "forestgreen": (34, 139, 34),
    "goldenrod": (218, 165, 32), "hotpink": (255, 105, 180),
    "indianred": (205, 92, 92), "lightblue": (173, 216, 230),
    "lightgreen": (144, 238, 144), "lightyellow": (255, 255, 224),
    "midnightblue": (25, 25, 112), "olivedrab": (107, 142, 35),
    "peru": (205, 133, 63), "rebeccapurple": (102, 51, 153),
    "royalblue": (65, 105, 225), "seagreen": (46, 139, 87),
    "sienna": (160, 82, 45), "tan": (210, 180, 140), "wheat": (245, 222, 179),
    "cornflowerblue": (100, 149, 237), "mediumseagreen": (60, 179, 113),
    "slateblue": (106, 90, 205), "beige": (245, 245, 220),
    "ivory": (255, 255, 240), "lavender": (230, 230, 250),
}


def _local_tag(el) -> str:
    tag = el.tag
    if isinstance(tag, str) and tag.startswith("{"):
        return tag.split("}", 1)[1]
    return tag if isinstance(tag, str) else ""


def _tag_namespace(el) -> str | None:
    tag = el.tag
    if isinstance(tag, str) and tag.startswith("{"):
        return tag[1:].split("}", 1)[0]
    return None


def _is_svg_element(el) -> bool:
    ns = _tag_namespace(el)
    return ns is None or ns == _SVG_NS


def _parse_float(text: str, what: str) -> float:
    try:
        return float(text)
    except (TypeError, ValueError):
        raise SvgParseError(f"invalid number {text!r} for {what}") from None


def _parse_length(text: str, what: str, percent_ref: float | None = None) -> float:
    """Parse a length with optional unit; percentages need ``percent_ref``."""
    s = text.strip()
    m = _NUM_RE.match(s)
    if m is None or m.start() != 0:
        raise SvgParseError(f"invalid length {text!r} for {what}")
    value = float(m.group(0))
    unit = s[m.end():].strip()
    if unit == "%":
        if percent_ref is None:
            raise SvgParseError(f"percentage length {text!r} for {what} has no reference")
        return value / 100.0 * percent_ref
    if unit in _UNIT_TO_PX:
        return value * _UNIT_TO_PX[unit]
    raise UnsupportedSvgFeatureError(f"length unit '{unit}'", detail=f"in {what}")


def _parse_numbers(text: str, what: str) -> list[float]:
    vals = [float(m.group(0)) for m in _NUM_RE.finditer(text or "")]
    leftover = _NUM_RE.sub("", text or "").replace(",", "").strip()
    if leftover:
        raise SvgParseError(f"unexpected characters {leftover!r} in {what}")
    return vals


# ---------------------------------------------------------------------------
# Transforms


def _mat_identity() -> np.ndarray:
    return np.eye(3, dtype=np.float64)


def _parse_transform(text: str | None, what: str = "transform") -> np.ndarray:
    """Parse an SVG transform list into a 3x3 matrix (column-vector form)."""
    if not text or not text.strip():
        return _mat_identity()
    m_total = _mat_identity()
    pos = 0
    for m in _TRANSFORM_RE.finditer(text):
        between = text[pos:m.start()].replace(",", " ").strip()
        if between:
            raise SvgParseError(f"unexpected characters {between!r} in {what}")
        pos = m.end()
        name = m.group(1)
        args = _parse_numbers(m.group(2), f"{name}()")
        t = _mat_identity()
        if name == "matrix":
            if len(args) != 6:
                raise SvgParseError(f"matrix() needs 6 numbers, got {len(args)}")
            a, b, c, d, e, f = args
            t[0, :] = (a, c, e)
            t[1, :] = (b, d, f)
        elif name == "translate":
            if len(args) not in (1, 2):
                raise SvgParseError(f"translate() needs 1 or 2 numbers, got {len(args)}")
            t[0, 2] = args[0]
            t[1, 2] = args[1] if len(args) == 2 else 0.0
        elif name == "scale":
            if len(args) not in (1, 2):
                raise SvgParseError(f"scale() needs 1 or 2 numbers, got {len(args)}")
            t[0, 0] = args[0]
            t[1, 1] = args[1] if len(args) == 2 else args[0]
        elif name == "rotate":
            if len(args) not in (1, 3):
                raise SvgParseError(f"rotate() needs 1 or 3 numbers, got {len(args)}")
            ang = np.deg2rad(args[0])
            ca, sa = np.cos(ang), np.sin(ang)
            r = _mat_identity()
            r[0, 0], r[0, 1] = ca, -sa
            r[1, 0], r[1, 1] = sa, ca
            if len(args) == 3:
                cx, cy = args[1], args[2]
                pre, post = _mat_identity(), _mat_identity()
                pre[0, 2], pre[1, 2] = cx, cy
                post[0, 2], post[1, 2] = -cx, -cy
                r = pre @ r @ post
            t = r
        elif name == "skewX":
            if len(args) != 1:
                raise SvgParseError(f"skewX() needs 1 number, got {len(args)}")
            t[0, 1] = np.tan(np.deg2rad(args[0]))
        elif name == "skewY":
            if len(args) != 1:
                raise SvgParseError(f"skewY() needs 1 number, got {len(args)}")
            t[1, 0] = np.tan(np.deg2rad(args[0]))
        m_total = m_total @ t
    leftover = text[pos:].replace(",", " ").strip()
    if leftover:
        raise SvgParseError(f"unexpected characters {leftover!r} in {what}")
    return m_total


def _apply_mat(m: np.ndarray, pts: np.ndarray) -> np.ndarray:
    """Apply a 3x3 affine matrix to an (N, 2) point array."""
    return pts @ m[:2, :2].T + m[:2, 2]


def _mat_scale_factor(m: np.ndarray) -> float:
    """Area-preserving scalar scale of the linear part (for stroke widths)."""
    return float(np.sqrt(abs(m[0, 0] * m[1, 1] - m[0, 1] * m[1, 0])))


# ---------------------------------------------------------------------------
# Colors


def _parse_color(text: str, context_color: tuple[float, float, float]) -> tuple[float, float, float, float] | None:
    """Parse a CSS color into (r, g, b, a) in [0, 1]; None means 'none'."""
    s = text.strip()
    low = s.lower()
    if low == "none":
        return None
    if low == "transparent":
        return (0.0, 0.0, 0.0, 0.0)
    if low == "currentcolor":
        r, g, b = context_color
        return (r, g, b, 1.0)
    if s.startswith("#"):
        h = s[1:]
        if not re.fullmatch(r"[0-9a-fA-F]+", h) or len(h) not in (3, 4, 6, 8):
            raise SvgParseError(f"invalid hex color {text!r}")
        if len(h) in (3, 4):
            h = "".join(ch * 2 for ch in h)
        r = int(h[0:2], 16) / 255.0
        g = int(h[2:4], 16) / 255.0
        b = int(h[4:6], 16) / 255.0
        a = int(h[6:8], 16) / 255.0 if len(h) == 8 else 1.0
        return (r, g, b, a)
    m = re.fullmatch(r"rgba?\(([^)]*)\)", low)
    if m:
        parts = [p.strip() for p in re.split(r"[,\s/]+", m.group(1).strip()) if p.strip()]
        if len(parts) not in (3, 4):
            raise SvgParseError(f"invalid rgb() color {text!r}")
        chans = []
        for i, p in enumerate(parts):
            if p.endswith("%"):
                v = float(p[:-1]) / 100.0
            elif i == 3:
                v = float(p)  # alpha is a plain fraction
            else:
                v = float(p) / 255.0
            chans.append(min(max(v, 0.0), 1.0))
        if len(chans) == 3:
            chans.append(1.0)
        return tuple(chans)
    if low in _NAMED_COLORS:
        r, g, b = _NAMED_COLORS[low]
        return (r / 255.0, g / 255.0, b / 255.0, 1.0)
    raise SvgParseError(f"unrecognized color {text!r}")


def _parse_opacity(text: str) -> float:
    s = text.strip()
    if s.endswith("%"):
        v = float(s[:-1]) / 100.0
    else:
        v = float(s)
    return min(max(v, 0.0), 1.0)


# ---------------------------------------------------------------------------
# Path data

_PATH_ARITY = {
    "M": 2, "L": 2, "H": 1, "V": 1, "C": 6, "S": 4, "Q": 4, "T": 2, "Z": 0,
}


class _PathBuilder:
    """Accumulates absolute cubic segments into Subpath point arrays."""

    def __init__(self):
        self.subpaths: list[tuple[np.ndarray, bool]] = []
        self._pts: list[tuple[float, float]] = []

    def move_to(self, p):
        self._flush(closed=False)
        self._pts = [tuple(p)]

    def cubic_to(self, c1, c2, p):
        if not self._pts:
            self._pts = [tuple(c1)]  # defensive; callers always move first
        self._pts.extend([tuple(c1), tuple(c2), tuple(p)])

    def line_to(self, p):
        p0 = np.asarray(self._pts[-1])
        p1 = np.asarray(p, dtype=np.float64)
        self.cubic_to(p0 + (p1 - p0) / 3.0, p0 + 2.0 * (p1 - p0) / 3.0, p1)

    def close(self):
        if len(self._pts) <= 1:
            self._pts = self._pts[:1]
            return
        start = self._pts[0]
        end = self._pts[-1]
        if end != start:
            self.line_to(start)
        self._pts = self._pts[:-1]  # wrap segment ends at point 0 implicitly
        self._flush(closed=True)

    def current(self) -> tuple[float, float]:
        return self._pts[-1]

    def _flush(self, closed: bool):
        if len(self._pts) > 1:
            self.subpaths.append((np.array(self._pts, dtype=np.float64), closed))
        self._pts = []

    def finish(self) -> list[tuple[np.ndarray, bool]]:
        self._flush(closed=False)
        return self.subpaths


def _parse_path_data(d: str) -> list[tuple[np.ndarray, bool]]:
    """Parse a ``d`` attribute into (points, closed) subpath tuples."""
    builder = _PathBuilder()
    pos = 0
    n = len(d)
    cmd: str | None = None
    cur = np.zeros(2)
    start = np.zeros(2)
    last_cubic_c2: np.ndarray | None = None
    last_quad_c: np.ndarray | None = None
    started = False

    def read_numbers(count: int, at: int) -> tuple[list[float], int]:
        out = []
        p = at
        for _ in range(count):
            while p < n and (d[p].isspace() or d[p] == ","):
                p += 1
            m = _NUM_RE.match(d, p)
            if m is None:
                raise SvgParseError(
                    f"expected number at offset {p} in path data (after command {cmd!r})"
                )
            out.append(float(m.group(0)))
            p = m.end()
        return out, p

    while pos < n:
        ch = d[pos]
        if ch.isspace() or ch == ",":
            pos += 1
            continue
        if ch.isalpha():
            if ch in "Aa":
                raise UnsupportedSvgFeatureError("elliptical arc path command")
            if ch.upper() not in _PATH_ARITY:
                raise SvgParseError(f"unknown path command {ch!r} at offset {pos}")
            cmd = ch
            pos += 1
            if ch in "Zz":
                builder.close()
                cur = np.array(start)
                last_cubic_c2 = last_quad_c = None
                continue
        elif cmd is None:
            raise SvgParseError(f"path data must start with a move-to, got {ch!r}")
        else:
            # Implicit command repetition; M/m repeats as L/l.
            if cmd in "Mm":
                cmd = "L" if cmd == "M" else "l"

        if cmd is None or cmd in "Zz":
            raise SvgParseError(f"unexpected content at offset {pos} in path data")

        rel = cmd.islower()
        op = cmd.upper()
        args, pos = read_numbers(_PATH_ARITY[op], pos)
        if not started and op != "M":
            raise SvgParseError("path data must start with a move-to command")

        if op == "M":
            p = np.array(args)
            if rel and started:
                p = cur + p
            builder.move_to(p)
            cur = p
            start = np.array(p)
            started = True
            last_cubic_c2 = last_quad_c = None
        elif op == "L":
            p = cur + args if rel else np.array(args)
            builder.line_to(p)
            cur = p
            last_cubic_c2 = last_quad_c = None
        elif op == "H":
            x = cur[0] + args[0] if rel else args[0]
            p = np.array([x, cur[1]])
            builder.line_to(p)
            cur = p
            last_cubic_c2 = last_quad_c = None
        elif op == "V":
            y = cur[1] + args[0] if rel else args[0]
            p = np.array([cur[0], y])
            builder.line_to(p)
            cur = p
            last_cubic_c2 = last_quad_c = None
        elif op in ("C", "S"):
            if op == "C":
                c1 = cur + args[0:2] if rel else np.array(args[0:2])
                c2 = cur + args[2:4] if rel else np.array(args[2:4])
                p = cur + args[4:6] if rel else np.array(args[4:6])
            else:
                c1 = 2.0 * cur - last_cubic_c2 if last_cubic_c2 is not None else np.array(cur)
                c2 = cur + args[0:2] if rel else np.array(args[0:2])
                p = cur + args[2:4] if rel else np.array(args[2:4])
            builder.cubic_to(c1, c2, p)
            cur = p
            last_cubic_c2 = np.array(c2)
            last_quad_c = None
        elif op in ("Q", "T"):
            if op == "Q":
                q = cur + args[0:2] if rel else np.array(args[0:2])
                p = cur + args[2:4] if rel else np.array(args[2:4])
            else:
                q = 2.0 * cur - last_quad_c if last_quad_c is not None else np.array(cur)
                p = cur + args[0:2] if rel else np.array(args[0:2])
            c1 = cur + 2.0 / 3.0 * (q - cur)
            c2 = p + 2.0 / 3.0 * (q - p)
            builder.cubic_to(c1, c2, p)
            cur = p
            last_quad_c = np.array(q)
            last_cubic_c2 = None

        if cmd in "Mm":
            cmd = "L" if cmd == "M" else "l"

    return builder.finish()


# ---------------------------------------------------------------------------
# Basic shapes -> subpaths (in local coordinates)


def _rect_subpaths(el) -> list[tuple[np.ndarray, bool]]:
    x = _parse_float(el.get("x", "0"), "rect x")
    y = _parse_float(el.get("y", "0"), "rect y")
    w = _parse_float(el.get("width", "0"), "rect width")
    h = _parse_float(el.get("height", "0"), "rect height")
    if w <= 0 or h <= 0:
        return []
    rx_attr, ry_attr = el.get("rx"), el.get("ry")
    rx = _parse_float(rx_attr, "rect rx") if rx_attr is not None else None
    ry = _parse_float(ry_attr, "rect ry") if ry_attr is not None else None
    if rx is None and ry is None:
        b = _PathBuilder()
        b.move_to((x, y))
        b.line_to((x + w, y))
        b.line_to((x + w, y + h))
        b.line_to((x, y + h))
        b.close()
        return b.finish()
    rx = ry if rx is None else rx
    ry = rx if ry is None else ry
    rx = min(max(rx, 0.0), w / 2.0)
    ry = min(max(ry, 0.0), h / 2.0)
    kx, ky = _KAPPA * rx, _KAPPA * ry
    b = _PathBuilder()
    b.move_to((x + rx, y))
    b.line_to((x + w - rx, y))
    b.cubic_to((x + w - rx + kx, y), (x + w, y + ry - ky), (x + w, y + ry))
    b.line_to((x + w, y + h - ry))
    b.cubic_to((x + w, y + h - ry + ky), (x + w - rx + kx, y + h), (x + w - rx, y + h))
    b.line_to((x + rx, y + h))
    b.cubic_to((x + rx - kx, y + h), (x, y + h - ry + ky), (x, y + h - ry))
    b.line_to((x, y + ry))
    b.cubic_to((x, y + ry - ky), (x + rx - kx, y), (x + rx, y))
    b.close()
    return b.finish()


def _ellipse_subpaths(cx: float, cy: float, rx: float, ry: float) -> list[tuple[np.ndarray, bool]]:
    if rx <= 0 or ry <= 0:
        return []
    kx, ky = _KAPPA * rx, _KAPPA * ry
    b = _PathBuilder()
    b.move_to((cx + rx, cy))
    b.cubic_to((cx + rx, cy + ky), (cx + kx, cy + ry), (cx, cy + ry))
    b.cubic_to((cx - kx, cy + ry), (cx - rx, cy + ky), (cx - rx, cy))
    b.cubic_to((cx - rx, cy - ky), (cx - kx, cy - ry), (cx, cy - ry))
    b.cubic_to((cx + kx, cy - ry), (cx + rx, cy - ky), (cx + rx, cy))
    b.close()
    return b.finish()


def _poly_subpaths(el, closed: bool) -> list[tuple[np.ndarray, bool]]:
    vals = _parse_numbers(el.get("points", ""), "points attribute")
    if len(vals) % 2 != 0:
        raise SvgParseError("points attribute has an odd number of coordinates")
    if len(vals) < 4:
        return []
    pts = np.array(vals, dtype=np.float64).reshape(-1, 2)
    b = _PathBuilder()
    b.move_to(pts[0])
    for p in pts[1:]:
        b.line_to(p)
    if closed:
        b.close()
    return b.finish()


def _line_subpaths(el) -> list[tuple[np.ndarray, bool]]:
    x1 = _parse_float(el.get("x1", "0"), "line x1")
    y1 = _parse_float(el.get("y1", "0"), "line y1")
    x2 = _parse_float(el.get("x2", "0"), "line x2")
    y2 = _parse_float(el.get("y2", "0"), "line y2")
    b = _PathBuilder()
    b.move_to((x1, y1))
    b.line_to((x2, y2))
    return b.finish()


def _element_subpaths(el, tag: str) -> list[tuple[np.ndarray, bool]]:
    if tag == "path":
        return _parse_path_data(el.get("d", ""))
    if tag == "rect":
        return _rect_subpaths(el)
    if tag == "circle":
        r = _parse_float(el.get("r", "0"), "circle r")
        cx = _parse_float(el.get("cx", "0"), "circle cx")
        cy = _parse_float(el.get("cy", "0"), "circle cy")
        return _ellipse_subpaths(cx, cy, r, r)
    if tag == "ellipse":
        rx = _parse_float(el.get("rx", "0"), "ellipse rx")
        ry = _parse_float(el.get("ry", "0"), "ellipse ry")
        cx = _parse_float(el.get("cx", "0"), "ellipse cx")
        cy = _parse_float(el.get("cy", "0"), "ellipse cy")
        return _ellipse_subpaths(cx, cy, rx, ry)
    if tag == "line":
        return _line_subpaths(el)
    if tag == "polyline":
        return _poly_subpaths(el, closed=False)
    if tag == "polygon":
        return _poly_subpaths(el, closed=True)
    raise SvgParseError(f"internal: not a shape tag {tag!r}")


# ---------------------------------------------------------------------------
# Gradients


@dataclass
class _GradientDef:
    """Resolved linear gradient properties in the defining element's space."""

    x1: str = "0%"
    y1: str = "0%"
    x2: str = "100%"
    y2: str = "0%"
    units: str = "objectBoundingBox"
    transform: np.ndarray = field(default_factory=_mat_identity)
    stops: list[tuple[float, tuple[float, float, float, float]]] = field(default_factory=list)


def _collect_gradient_elements(root) -> dict[str, ET.Element]:
    table: dict[str, ET.Element] = {}
    for el in root.iter():
        if _is_svg_element(el) and _local_tag(el) == "linearGradient":
            gid = el.get("id")
            if gid:
                table[gid] = el
    return table


def _gradient_href(el) -> str | None:
    ref = el.get("href") or el.get(f"{{{_XLINK_NS}}}href")
    if ref is None:
        return None
    ref = ref.strip()
    if not ref.startswith("#"):
        raise UnsupportedSvgFeatureError("external gradient reference", detail=ref)
    return ref[1:]


def _parse_stops(el) -> list[tuple[float, tuple[float, float, float, float]]]:
    stops = []
    prev = 0.0
    for child in el:
        if not (_is_svg_element(child) and _local_tag(child) == "stop"):
            continue
        props = dict(_style_attr_props(child))
        off_text = child.get("offset", "0")
        off = _parse_opacity(off_text)  # same number-or-percent grammar, clamped
        off = max(off, prev)
        prev = off
        color_text = props.get("stop-color", child.get("stop-color", "black"))
        opacity_text = props.get("stop-opacity", child.get("stop-opacity", "1"))
        rgba = _parse_color(color_text, (0.0, 0.0, 0.0))
        if rgba is None:
            rgba = (0.0, 0.0, 0.0, 0.0)
        alpha = rgba[3] * _parse_opacity(opacity_text)
        stops.append((off, (rgba[0], rgba[1], rgba[2], alpha)))
    return stops


def _resolve_gradient(
    gid: str,
    table: dict[str, ET.Element],
    cache: dict[str, _GradientDef],
    stack: list[str],
) -> _GradientDef:
    if gid in cache:
        return cache[gid]
    if gid in stack:
        raise CyclicReferenceError(stack[stack.index(gid):] + [gid])
    el = table.get(gid)
    if el is None:
        raise SvgParseError(f"reference to unknown gradient id '#{gid}'")

    base = _GradientDef()
    href = _gradient_href(el)
    if href is not None:
        stack.append(gid)
        try:
            parent = _resolve_gradient(href, table, cache, stack)
        finally:
            stack.pop()
        base = _GradientDef(
            x1=parent.x1, y1=parent.y1, x2=parent.x2, y2=parent.y2,
            units=parent.units, transform=parent.transform.copy(),
            stops=list(parent.stops),
        )

    for coord in ("x1", "y1", "x2", "y2"):
        v = el.get(coord)
        if v is not None:
            setattr(base, coord, v)
    units = el.get("gradientUnits")
    if units is not None:
        if units not in ("objectBoundingBox", "userSpaceOnUse"):
            raise SvgParseError(f"invalid gradientUnits {units!r}")
        base.units = units
    gt = el.get("gradientTransform")
    if gt is not None:
        base.transform = _parse_transform(gt, "gradientTransform")
    spread = el.get("spreadMethod")
    if spread is not None and spread != "pad":
        raise UnsupportedSvgFeatureError(f"spreadMethod '{spread}'")
    own_stops = _parse_stops(el)
    if own_stops:
        base.stops = own_stops

    cache[gid] = base
    return base


def _gradient_paint(
    grad: _GradientDef,
    gid: str,
    local_bbox: tuple[float, float, float, float],
    ctm: np.ndarray,
    alpha_scale: float,
) -> Paint:
    if not grad.stops:
        raise SvgParseError(f"gradient '#{gid}' has no stops")
    stops = grad.stops
    if len(stops) == 1:
        stops = [(0.0, stops[0][1]), (1.0, stops[0][1])]

    if grad.units == "objectBoundingBox":
        x0, y0, x1, y1 = local_bbox
        bw, bh = x1 - x0, y1 - y0

        def coord(text: str, what: str, axis: int) -> float:
            s = text.strip()
            if s.endswith("%"):
                return float(s[:-1]) / 100.0
            return _parse_float(s, what)

        pa = np.array([[coord(grad.x1, "x1", 0), coord(grad.y1, "y1", 1)]])
        pb = np.array([[coord(grad.x2, "x2", 0), coord(grad.y2, "y2", 1)]])
        pa = _apply_mat(grad.transform, pa)
        pb = _apply_mat(grad.transform, pb)
        pa = np.array([[x0 + pa[0, 0] * bw, y0 + pa[0, 1] * bh]])
        pb = np.array([[x0 + pb[0, 0] * bw, y0 + pb[0, 1] * bh]])
    else:
        def coord(text: str, what: str, axis: int) -> float:
            # Percentages in user space resolve against the local bbox span;
            # absolute numbers pass through.
            s = text.strip()
            if s.endswith("%"):
                x0, y0, x1, y1 = local_bbox
                ref = (x1 - x0) if axis == 0 else (y1 - y0)
                return (float(s[:-1]) / 100.0) * ref + (x0 if axis == 0 else y0)
            return _parse_float(s, what)

        pa = np.array([[coord(grad.x1, "x1", 0), coord(grad.y1, "y1", 1)]])
        pb = np.array([[coord(grad.x2, "x2", 0), coord(grad.y2, "y2", 1)]])
        pa = _apply_mat(grad.transform, pa)
        pb = _apply_mat(grad.transform, pb)

    pa = _apply_mat(ctm, pa)[0]
    pb = _apply_mat(ctm, pb)[0]

    offsets = np.array([s[0] for s in stops], dtype=np.float64)
    colors = np.array([s[1] for s in stops], dtype=np.float64)
    colors[:, 3] *= alpha_scale
    return Paint.linear_gradient(
        stop_offsets=offsets,
        stop_colors=np.clip(colors, 0.0, 1.0),
        start=(float(pa[0]), float(pa[1])),
        end=(float(pb[0]), float(pb[1])),
    )


# ---------------------------------------------------------------------------
# Document walk


def _style_attr_props(el) -> dict[str, str]:
    """Parse an inline ``style`` attribute into a property dict."""
    out: dict[str, str] = {}
    style = el.get("style")
    if not style:
        return out
    for decl in style.split(";"):
        decl = decl.strip()
        if not decl:
            continue
        if ":" not in decl:
            raise SvgParseError(f"invalid style declaration {decl!r}")
        key, _, val = decl.partition(":")
        out[key.strip().lower()] = val.strip()
    return out


_STYLE_PROPS = (
    "fill", "stroke", "stroke-width", "opacity",
    "fill-opacity", "stroke-opacity", "color", "display",
)


def _element_props(el, inherited: dict[str, str]) -> dict[str, str]:
    props = dict(inherited)
    props.pop("opacity", None)  # opacity never inherits; walk() carries group opacity
    for name in _STYLE_PROPS:
        v = el.get(name)
        if v is not None and v.strip().lower() != "inherit":
            props[name] = v
    for name, v in _style_attr_props(el).items():
        if name in _STYLE_PROPS and v.lower() != "inherit":
            props[name] = v
    return props


class _SceneParser:
    def __init__(self, root: ET.Element):
        self.root = root
        self.gradient_elems = _collect_gradient_elements(root)
        self.gradient_cache: dict[str, _GradientDef] = {}
        self.shapes: list[Shape] = []

    # -- dimension handling ------------------------------------------------

    def scene_geometry(self) -> tuple[float, float, np.ndarray]:
        """Return (width, height, root transform) from width/height/viewBox."""
        root = self.root
        vb = root.get("viewBox")
        viewbox = None
        if vb is not None:
            vals = _parse_numbers(vb, "viewBox")
            if len(vals) != 4 or vals[2] <= 0 or vals[3] <= 0:
                raise SvgParseError(f"invalid viewBox {vb!r}")
            viewbox = vals

        def _dim(attr: str, ref: float | None) -> float | None:
            v = root.get(attr)
            if v is None:
                return None
            return _parse_length(v, attr, percent_ref=ref)

        vbw = viewbox[2] if viewbox else None
        vbh = viewbox[3] if viewbox else None
        width = _dim("width", vbw)
        height = _dim("height", vbh)

        if width is None and viewbox is not None:
            width = viewbox[2]
        if height is None and viewbox is not None:
            height = viewbox[3]
        if width is None or height is None:
            raise SvgParseError("svg element needs width/height or a viewBox")
        if width <= 0 or height <= 0:
            raise SvgParseError(f"svg dimensions must be positive, got {width} x {height}")

        ctm = _mat_identity()
        if viewbox is not None:
            minx, miny, vw, vh = viewbox
            par = (root.get("preserveAspectRatio") or "xMidYMid meet").split()
            align = par[0] if par else "xMidYMid"
            if align == "none":
                sx, sy = width / vw, height / vh
                tx, ty = -minx * sx, -miny * sy
            else:
                s = min(width / vw, height / vh)
                sx = sy = s
                extra_x = width - s * vw
                extra_y = height - s * vh
                # Alignment token has the form x<Pos>Y<Pos>, e.g. xMidYMax.
                fx = {"Min": 0.0, "Mid": 0.5, "Max": 1.0}.get(align[1:4], 0.5)
                fy = {"Min": 0.0, "Mid": 0.5, "Max": 1.0}.get(align[5:8], 0.5)
                tx = -minx * sx + fx * extra_x
                ty = -miny * sy + fy * extra_y
            m = _mat_identity()
            m[0, 0], m[1, 1] = sx, sy
            m[0, 2], m[1, 2] = tx, ty
            ctm = m
        return float(width), float(height), ctm

    # -- element walk -------------------------------------------------------

    def check_unsupported(self):
        for el in self.root.iter():
            if not _is_svg_element(el):
                continue
            tag = _local_tag(el)
            if el is self.root:
                continue
            if tag in _UNSUPPORTED_TAGS:
                raise UnsupportedSvgFeatureError(f"<{tag}> element")

    def walk(self, el, props: dict[str, str], ctm: np.ndarray, group_alpha: float = 1.0):
        for child in el:
            if not _is_svg_element(child):
                continue  # foreign-namespace metadata (editor annotations)
            tag = _local_tag(child)
            if tag in _SKIP_TAGS or tag == "defs":
                continue
            child_props = _element_props(child, props)
            if child_props.get("display", "").strip().lower() == "none":
                continue
            child_ctm = ctm @ _parse_transform(child.get("transform"))
            if tag == "g":
                # Group opacity composites on top of whatever opacity the
                # descendants carry themselves, so it travels as a separate
                # multiplier instead of through the inheritable props (where a
                # child's own attribute would replace it).
                child_alpha = group_alpha * _parse_opacity(child_props.pop("opacity", "1"))
                self.walk(child, child_props, child_ctm, child_alpha)
            elif tag in _SHAPE_TAGS:
                self.emit_shape(child, tag, child_props, child_ctm, group_alpha)
            else:
                raise UnsupportedSvgFeatureError(f"<{tag}> element")

    # -- paints -------------------------------------------------------------

    def resolve_paint(
        self,
        value: str,
        opacity: float,
        context_color: tuple[float, float, float],
        local_bbox: tuple[float, float, float, float],
        ctm: np.ndarray,
    ) -> Paint:
        v = value.strip()
        m = _URL_REF_RE.match(v)
        if m:
            gid = m.group(1)
            grad = _resolve_gradient(gid, self.gradient_elems, self.gradient_cache, [])
            return _gradient_paint(grad, gid, local_bbox, ctm, opacity)
        rgba = _parse_color(v, context_color)
        if rgba is None:
            return Paint.none()
        r, g, b, a = rgba
        return Paint.solid(r, g, b, a * opacity)

    def emit_shape(
        self, el, tag: str, props: dict[str, str], ctm: np.ndarray, group_alpha: float = 1.0
    ):
        local_subpaths = _element_subpaths(el, tag)
        if not local_subpaths:
            return

        all_pts = np.vstack([pts for pts, _ in local_subpaths])
        local_bbox = (
            float(all_pts[:, 0].min()), float(all_pts[:, 1].min()),
            float(all_pts[:, 0].max()), float(all_pts[:, 1].max()),
        )

        color_prop = props.get("color", "black")
        ctx_rgba = _parse_color(color_prop, (0.0, 0.0, 0.0))
        ctx_color = ctx_rgba[:3] if ctx_rgba else (0.0, 0.0, 0.0)

        opacity = _parse_opacity(props.get("opacity", "1")) * group_alpha
        fill_opacity = _parse_opacity(props.get("fill-opacity", "1")) * opacity
        stroke_opacity = _parse_opacity(props.get("stroke-opacity", "1")) * opacity

        fill_value = props.get("fill", "black")
        stroke_value = props.get("stroke", "none")
        if tag == "line":
            fill_value = "none"  # fill never applies to lines

        fill = self.resolve_paint(fill_value, fill_opacity, ctx_color, local_bbox, ctm)
        stroke = self.resolve_paint(stroke_value, stroke_opacity, ctx_color, local_bbox, ctm)

        width_text = props.get("stroke-width", "1")
        if width_text.strip().endswith("%"):
            raise UnsupportedSvgFeatureError("percentage stroke-width")
        width = _parse_length(width_text, "stroke-width", percent_ref=None)
        if width < 0:
            raise SvgParseError(f"stroke-width must be >= 0, got {width}")
        width *= _mat_scale_factor(ctm)

        subpaths = tuple(
            Subpath(points=_apply_mat(ctm, pts), closed=closed)
            for pts, closed in local_subpaths
        )
        self.shapes.append(
            Shape(subpaths=subpaths, fill=fill, stroke=stroke, stroke_width=width)
        )


def parse_svg(source: str | bytes) -> Scene:
    """Parse an SVG document (text or bytes) into a :class:`Scene`.

    Raises :class:`SvgParseError` for malformed documents (with line/column
    when the XML layer reports one), :class:`UnsupportedSvgFeatureError` for
    anything outside the supported subset, and :class:`CyclicReferenceError`
    for circular gradient references.
    """
    try:
        if isinstance(source, str):
            try:
                root = ET.fromstring(source)
            except ValueError:
                # Encoding declaration present: feed bytes instead.
                root = ET.fromstring(source.encode("utf-8"))
        else:
            root = ET.fromstring(source)
    except ET.ParseError as e:
        line, col = (e.position if e.position else (None, None))
        col = col + 1 if col is not None else None
        raise SvgParseError(f"XML syntax error: {e.msg.split(':')[0]}", line=line, column=col) from e

    if not (_is_svg_element(root) and _local_tag(root) == "svg"):
        raise SvgParseError(f"root element is <{_local_tag(root)}>, expected <svg>")

    parser = _SceneParser(root)
    parser.check_unsupported()
    width, height, root_ctm = parser.scene_geometry()
    root_props = _element_props(root, {})
    root_alpha = _parse_opacity(root_props.pop("opacity", "1"))
    root_ctm = root_ctm @ _parse_transform(root.get("transform"))
    parser.walk(root, root_props, root_ctm, root_alpha)
    return Scene(width=width, height=height, shapes=tuple(parser.shapes))


def load_svg(path) -> Scene:
    """Read and parse an SVG file."""
    with open(path, "rb") as f:
        return parse_svg(f.read())


# ---------------------------------------------------------------------------
# Serialization


def _fmt_coord(v: float) -> str:
    s = format(float(v), ".6g")
    return "0" if s == "-0" else s


def _fmt_precise(v: float) -> str:
    s = format(float(v), ".9g")
    return "0" if s == "-0" else s


def _fmt_color(rgba: np.ndarray) -> tuple[str, float]:
    r, g, b, a = (float(c) for c in rgba)
    rgb = f"rgb({_fmt_precise(r * 100)}%,{_fmt_precise(g * 100)}%,{_fmt_precise(b * 100)}%)"
    return rgb, a


def _path_data(shape: Shape) -> str:
    parts: list[str] = []
    for sp in shape.subpaths:
        segs = list(sp.segments())
        p0 = segs[0][0]
        parts.append(f"M {_fmt_coord(p0[0])} {_fmt_coord(p0[1])}")
        for seg in segs:
            c1, c2, p = seg[1], seg[2], seg[3]
            parts.append(
                "C "
                + " ".join(_fmt_coord(v) for v in (c1[0], c1[1], c2[0], c2[1], p[0], p[1]))
            )
        if sp.closed:
            parts.append("Z")
    return " ".join(parts)


def _paint_attrs(paint: Paint, prefix: str, grad_ids: dict[int, str]) -> list[str]:
    if paint.kind == "none":
        return [f'{prefix}="none"']
    if paint.kind == "solid":
        rgb, a = _fmt_color(paint.rgba)
        attrs = [f'{prefix}="{rgb}"']
        if a != 1.0:
            attrs.append(f'{prefix}-opacity="{_fmt_precise(a)}"')
        return attrs
    gid = grad_ids[id(paint)]
    return [f'{prefix}="url(#{gid})"']


def _gradient_def(paint: Paint, gid: str) -> str:
    x1, y1 = paint.start
    x2, y2 = paint.end
    lines = [
        f'<linearGradient id="{gid}" gradientUnits="userSpaceOnUse" '
        f'x1="{_fmt_coord(x1)}" y1="{_fmt_coord(y1)}" '
        f'x2="{_fmt_coord(x2)}" y2="{_fmt_coord(y2)}">'
    ]
    for off, col in zip(paint.stop_offsets, paint.stop_colors):
        rgb, a = _fmt_color(col)
        stop = f'  <stop offset="{_fmt_precise(off)}" stop-color="{rgb}"'
        if a != 1.0:
            stop += f' stop-opacity="{_fmt_precise(a)}"'
        lines.append(stop + "/>")
    lines.append("</linearGradient>")
    return "\n".join("    " + ln for ln in lines)


def serialize_svg(scene: Scene) -> str:
    """Serialize a scene to a standalone SVG document string.

    Each shape becomes one ``<path>`` whose ``d`` holds every subpath as an
    ``M ... C ... [Z]`` group; gradients become ``<defs>`` entries referenced
    by ``url(#id)``.
    """
    grad_ids: dict[int, str] = {}
    defs: list[str] = []
    for shape in scene.shapes:
        for paint in (shape.fill, shape.stroke):
            if paint.kind == "gradient" and id(paint) not in grad_ids:
                gid = f"grad{len(grad_ids)}"
                grad_ids[id(paint)] = gid
                defs.append(_gradient_def(paint, gid))

    w, h = _fmt_coord(scene.width), _fmt_coord(scene.height)
    lines = [
        '<?xml version="1.0" encoding="UTF-8"?>',
        f'<svg xmlns="{_SVG_NS}" width="{w}" height="{h}" viewBox="0 0 {w} {h}">',
    ]
    if defs:
        lines.append("  <defs>")
        lines.extend(defs)
        lines.append("  </defs>")
    for shape in scene.shapes:
        attrs = [f'd="{_path_data(shape)}"']
        attrs.extend(_paint_attrs(shape.fill, "fill", grad_ids))
        attrs.extend(_paint_attrs(shape.stroke, "stroke", grad_ids))
        attrs.append(f'stroke-width="{_fmt_precise(shape.stroke_width)}"')
        lines.append("  <path " + " ".join(attrs) + "/>")
    lines.append("</svg>")
    return "\n".join(lines) + "\n"


def save_svg(scene: Scene, path) -> None:
    """Serialize and write a scene to ``path``."""
    data = serialize_svg(scene)
    with open(path, "w", encoding="utf-8") as f:
        f.write(data)
