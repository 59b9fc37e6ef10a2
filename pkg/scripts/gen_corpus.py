"""Regenerate the deterministic test fixtures that are machine-made:
tests/fixtures/e2e_content.svg and tests/fixtures/e2e_style.png (a matched
content/style pair for the end-to-end optimization smoke test) and
tests/fixtures/style_mosaic.png (a 256x256 colored-cell raster).

The e2e pair shares one geometry: the content renders as faint translucent
blobs on a near-white canvas while the style renders the same blobs dark,
saturated and opaque — a gap the optimizer can close almost entirely by
moving colors and alphas, without displacing outlines.  The blobs overlap
into one big cluster so most shape boundaries are buried inside the painted
region, where the outline-preservation term cannot see them.

The outputs are committed; rerun only when the fixture design changes.
"""

from pathlib import Path

import numpy as np

from vecstyle.raster import RenderConfig, render, write_png
from vecstyle.scene import Paint, Scene, Shape, Subpath
from vecstyle.svg_io import save_svg

FIXTURES = Path(__file__).resolve().parent.parent / "tests" / "fixtures"


def blob_subpath(rng, cx, cy, radius, n_lobes=5) -> Subpath:
    """Closed wavy blob: straight anchor polygon with control points pushed
    off the chords by a random normal offset."""
    angles = np.linspace(0.0, 2 * np.pi, n_lobes, endpoint=False)
    radii = radius * rng.uniform(0.8, 1.2, n_lobes)
    anchors = np.stack([cx + radii * np.cos(angles), cy + radii * np.sin(angles)], axis=1)
    pts = []
    for i in range(n_lobes):
        a, b = anchors[i], anchors[(i + 1) % n_lobes]
        t = b - a
        normal = np.array([-t[1], t[0]]) * rng.uniform(0.05, 0.2)
        pts += [a, a + t / 3 + normal, a + 2 * t / 3 + normal]
    return Subpath(points=np.round(np.asarray(pts), 2), closed=True)


def make_e2e_pair(seed: int = 31) -> tuple[Scene, Scene]:
    """Content scene and its dark-opaque style twin (identical geometry)."""
    rng = np.random.default_rng(seed)
    content_shapes, style_shapes = [], []
    for gy in range(4):
        for gx in range(5):
            cx = 38 + gx * 45 + rng.uniform(-6, 6)
            cy = 44 + gy * 56 + rng.uniform(-6, 6)
            sub = blob_subpath(rng, cx, cy, rng.uniform(26, 38))
            rgb = np.round(rng.uniform(0.6, 0.92, 3), 3)
            dark = np.round(np.clip((0.9 - 0.8 * rgb) * 0.55 + 0.04, 0.02, 1.0), 3)
            content_shapes.append(
                Shape(
                    subpaths=(sub,),
                    fill=Paint.solid(*rgb, round(rng.uniform(0.04, 0.09), 3)),
                    stroke=Paint.none(),
                    stroke_width=0.0,
                )
            )
            style_shapes.append(
                Shape(
                    subpaths=(sub,),
                    fill=Paint.solid(*dark, round(rng.uniform(0.9, 0.97), 3)),
                    stroke=Paint.none(),
                    stroke_width=0.0,
                )
            )
    return (
        Scene(width=256.0, height=256.0, shapes=tuple(content_shapes)),
        Scene(width=256.0, height=256.0, shapes=tuple(style_shapes)),
    )


def make_mosaic(seed: int = 5, size: int = 256, n_cells: int = 60) -> np.ndarray:
    rng = np.random.default_rng(seed)
    centers = rng.uniform(0, size, (n_cells, 2))
    palette = rng.uniform(0.05, 0.95, (n_cells, 3))
    yy, xx = np.mgrid[0:size, 0:size]
    pix = np.stack([xx.ravel(), yy.ravel()], axis=1).astype(np.float64)
    d2 = ((pix[:, None, :] - centers[None, :, :]) ** 2).sum(axis=2)
    nearest = np.argmin(d2, axis=1)
    img = palette[nearest].reshape(size, size, 3)
    # gentle diagonal shading so cells are not flat
    shade = 0.85 + 0.15 * ((xx + yy) / (2.0 * size))
    return np.clip(img * shade[:, :, None], 0.0, 1.0)


def main() -> None:
    FIXTURES.mkdir(parents=True, exist_ok=True)
    content, style = make_e2e_pair()
    save_svg(content, FIXTURES / "e2e_content.svg")
    counts = content.counts()
    print(f"e2e_content.svg: {counts[0]} shapes, {counts[1]} subpaths, {counts[2]} points")
    config = RenderConfig(out_width=256, out_height=256)
    write_png(render(style, config)[0].data[:, :, :3], FIXTURES / "e2e_style.png")
    print("e2e_style.png: 256x256")
    write_png(make_mosaic(), FIXTURES / "style_mosaic.png")
    print("style_mosaic.png: 256x256")


if __name__ == "__main__":
    main()
